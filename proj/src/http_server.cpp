#include "psyphy/http_server.hpp"

#include <httplib.h>

#include "psyphy/error.hpp"

namespace psyphy {

StimulusStore::StimulusStore(DatasetManifest manifest, PerturbationSchedule schedule)
    : manifest_(std::move(manifest)), schedule_(schedule) {}

std::shared_ptr<const std::vector<std::uint8_t>> StimulusStore::png(const std::string& id) {
    {
        std::lock_guard lock(mutex_);
        auto it = cache_.find(id);
        if (it != cache_.end()) return it->second;
    }
    const auto [image_id, spec] = parse_stimulus_id(id);
    if (!manifest_.contains(image_id)) fail(ErrorCode::not_found, "unknown stimulus '" + id + "'");
    const Image img = perturb(manifest_.load_image(image_id), spec, schedule_);
    auto bytes = std::make_shared<const std::vector<std::uint8_t>>(encode_png(img));
    std::lock_guard lock(mutex_);
    return cache_.emplace(id, std::move(bytes)).first->second;
}

int http_status_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_parameter:
        case ErrorCode::invalid_input:
        case ErrorCode::invalid_measurement:
        case ErrorCode::invalid_label:
            return 400;
        case ErrorCode::not_found: return 404;
        case ErrorCode::capacity_exhausted:
        case ErrorCode::sequence_violation:
            return 409;
        case ErrorCode::session_closed: return 410;
        default: return 500;
    }
}

namespace {

void send_json(httplib::Response& res, int status, nlohmann::json body) {
    body["schema_version"] = kSchemaVersion;
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, ErrorCode code, const std::string& message) {
    send_json(res, http_status_for(code),
              {{"error", {{"code", std::string(to_string(code))}, {"message", message}}}});
}

// Runs a handler, mapping library errors and malformed JSON to error bodies.
template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        send_error(res, e.code(), e.what());
    } catch (const nlohmann::json::exception& e) {
        send_error(res, ErrorCode::invalid_input, e.what());
    } catch (const std::exception& e) {
        send_error(res, ErrorCode::io_error, e.what());
    }
}

nlohmann::json parse_body(const httplib::Request& req, bool required) {
    if (req.body.empty()) {
        if (required) fail(ErrorCode::invalid_input, "request body required");
        return nlohmann::json::object();
    }
    auto j = nlohmann::json::parse(req.body);
    if (!j.is_object() || !j.contains("schema_version")) {
        fail(ErrorCode::invalid_input, "request body must be a JSON object with schema_version");
    }
    if (j.at("schema_version").get<int>() != kSchemaVersion) {
        fail(ErrorCode::invalid_input, "unsupported schema_version");
    }
    return j;
}

nlohmann::json trial_or_null(const std::optional<TrialPayload>& p) {
    return p ? to_json(*p) : nlohmann::json(nullptr);
}

}  // namespace

HttpServer::HttpServer(ExperimentService& service, StimulusStore* stimuli)
    : service_(service), stimuli_(stimuli), server_(std::make_unique<httplib::Server>()) {
    install_routes();
}

HttpServer::~HttpServer() { stop(); }

void HttpServer::install_routes() {
    auto& srv = *server_;

    srv.Post(R"(/experiments/([^/]+)/sessions)", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            parse_body(req, false);
            const auto created = service_.create_session(req.matches[1]);
            send_json(res, 201,
                      {{"session", to_json(created.state)},
                       {"instructions", created.instructions},
                       {"trial", trial_or_null(created.trial)}});
        });
    });

    srv.Get(R"(/sessions/([^/]+)/trial)", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const std::string sid = req.matches[1];
            const auto trial = service_.current_trial(sid);
            const auto state = service_.session_state(sid);
            send_json(res, 200,
                      {{"session", to_json(state)},
                       {"complete", !trial.has_value()},
                       {"trial", trial_or_null(trial)}});
        });
    });

    srv.Post(R"(/sessions/([^/]+)/responses)", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const auto body = parse_body(req, true);
            SubmitRequest sub;
            sub.trial_id = body.at("trial_id").get<std::uint64_t>();
            sub.choice = choice_from_string(body.at("choice").get<std::string>());
            sub.rt_ms = body.at("rt_ms").get<double>();
            sub.modality = modality_from_string(body.at("modality").get<std::string>());
            sub.client_ts = body.value("client_ts", std::int64_t{0});
            const auto result = service_.submit_response(req.matches[1], sub);
            send_json(res, 200,
                      {{"ack", to_json(result.record)},
                       {"session", to_json(result.state)},
                       {"complete", !result.next.has_value()},
                       {"trial", trial_or_null(result.next)}});
        });
    });

    srv.Get(R"(/experiments/([^/]+)/responses)", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            res.status = 200;
            res.set_content(service_.export_responses(req.matches[1]), "application/x-ndjson");
        });
    });

    srv.Get(R"(/stimuli/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            if (!stimuli_) fail(ErrorCode::not_found, "stimulus serving is not configured");
            const auto bytes = stimuli_->png(req.matches[1]);
            res.status = 200;
            res.set_header("Cache-Control", "public, max-age=31536000, immutable");
            res.set_content(reinterpret_cast<const char*>(bytes->data()), bytes->size(), "image/png");
        });
    });

    srv.Get("/health", [](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, {{"status", "ok"}});
    });
}

void HttpServer::mount_static(const std::string& dir) {
    if (!server_->set_mount_point("/ui", dir)) {
        fail(ErrorCode::not_found, "static directory " + dir + " does not exist");
    }
}

int HttpServer::bind(const std::string& host, int port) {
    if (port == 0) {
        const int bound = server_->bind_to_any_port(host);
        if (bound < 0) fail(ErrorCode::transport_failure, "cannot bind " + host);
        return bound;
    }
    if (!server_->bind_to_port(host, port)) {
        fail(ErrorCode::transport_failure, "cannot bind " + host + ":" + std::to_string(port));
    }
    return port;
}

void HttpServer::listen() { server_->listen_after_bind(); }

void HttpServer::stop() {
    if (server_) server_->stop();
}

bool HttpServer::is_running() const { return server_->is_running(); }

}  // namespace psyphy
