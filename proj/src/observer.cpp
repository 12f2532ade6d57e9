#include "psyphy/observer.hpp"

#include <httplib.h>

#include <cmath>
#include <limits>
#include <map>

#include "psyphy/error.hpp"
#include "psyphy/rng.hpp"
#include "psyphy/service.hpp"

namespace psyphy {

void ObserverParams::validate() const {
    if (!(lapse >= 0.0 && lapse <= 0.1)) fail(ErrorCode::invalid_parameter, "lapse must lie in [0, 0.1]");
    if (!(slope > 0.0)) fail(ErrorCode::invalid_parameter, "psychometric slope must be positive");
    if (!(rt_base > 0.0)) fail(ErrorCode::invalid_parameter, "rt_base must be positive");
    if (!(rt_gain >= 0.0)) fail(ErrorCode::invalid_parameter, "rt_gain must be non-negative");
    if (!(rt_noise_sigma >= 0.0) || !(cursor_rt_noise_sigma >= 0.0)) {
        fail(ErrorCode::invalid_parameter, "rt noise sigmas must be non-negative");
    }
}

namespace {

double sigmoid(double x) {
    if (std::isnan(x)) return 0.5;
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Choice opposite(Choice c) { return c == Choice::same ? Choice::different : Choice::same; }

}  // namespace

double psychometric_accuracy(double level, const ObserverParams& params) {
    const double d = level - params.threshold;
    // infinite slope at the threshold itself is the midpoint
    const double x = d == 0.0 ? 0.0 : -params.slope * d;
    return 0.5 + (0.5 - params.lapse) * sigmoid(x);
}

ResponseRecord sample_response(const Trial& trial, const ObserverParams& params, std::uint64_t seed,
                               Modality modality) {
    Engine eng = make_engine(seed);
    const double p = psychometric_accuracy(trial.level(), params);
    const bool correct = uniform01(eng) < p;
    const double sigma = modality == Modality::cursor
                             ? std::hypot(params.rt_noise_sigma, params.cursor_rt_noise_sigma)
                             : params.rt_noise_sigma;
    const double jitter = std::exp(sigma * standard_normal(eng));
    const double rt = (params.rt_base + params.rt_gain * trial.level()) * jitter;
    const Choice choice = correct ? trial.ground_truth : opposite(trial.ground_truth);
    return make_record(trial, "", 0, ConditionId::control, choice, rt, modality, 0, 0);
}

ResponseLog simulate_session(const SessionPlan& plan, const ObserverParams& params, std::uint64_t seed,
                             std::int64_t start_ts) {
    params.validate();
    const std::uint64_t session_seed = stream_seed(seed, plan.session_id);
    ResponseLog log;
    log.reserve(plan.trials.size());
    double clock = static_cast<double>(start_ts);
    for (std::size_t i = 0; i < plan.trials.size(); ++i) {
        ResponseRecord r = sample_response(plan.trials[i], params, stream_seed(session_seed, i),
                                           plan.condition.input_modality);
        r.session_id = plan.session_id;
        r.participant_slot = plan.participant_slot;
        r.condition = plan.condition.id;
        clock += static_cast<double>(kInterTrialIntervalMs) + r.rt_ms;
        r.client_ts = static_cast<std::int64_t>(clock);
        r.server_ts = r.client_ts;
        log.push_back(std::move(r));
    }
    return log;
}

namespace {

nlohmann::json check_response(const httplib::Result& res, const std::string& what) {
    if (!res) {
        fail(ErrorCode::transport_failure, what + ": " + httplib::to_string(res.error()));
    }
    nlohmann::json body;
    try {
        body = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception&) {
        fail(ErrorCode::transport_failure, what + ": malformed response body (HTTP " + std::to_string(res->status) + ")");
    }
    if (res->status >= 400) {
        const auto& err = body.at("error");
        const std::string code = err.at("code").get<std::string>();
        const std::string message = err.at("message").get<std::string>();
        static const std::map<std::string, ErrorCode> codes{
            {"capacity-exhausted", ErrorCode::capacity_exhausted},
            {"sequence-violation", ErrorCode::sequence_violation},
            {"session-closed", ErrorCode::session_closed},
            {"not-found", ErrorCode::not_found},
            {"invalid-measurement", ErrorCode::invalid_measurement},
            {"invalid-input", ErrorCode::invalid_input},
        };
        auto it = codes.find(code);
        fail(it == codes.end() ? ErrorCode::transport_failure : it->second, what + ": " + message);
    }
    return body;
}

httplib::Client make_client(const std::string& base_url) {
    httplib::Client cli(base_url);
    cli.set_connection_timeout(2, 0);
    cli.set_read_timeout(10, 0);
    cli.set_write_timeout(10, 0);
    return cli;
}

}  // namespace

void drive_session_http(const std::string& base_url, const SessionPlan& plan, const ObserverParams& params,
                        std::uint64_t seed, ResponseLog& acknowledged) {
    params.validate();
    auto cli = make_client(base_url);
    const std::uint64_t session_seed = stream_seed(seed, plan.session_id);

    auto body = check_response(cli.Get("/sessions/" + plan.session_id + "/trial"), "GET trial");
    std::int64_t client_clock = system_clock_ms();
    while (!body.at("trial").is_null()) {
        const auto& payload = body.at("trial");
        const auto index = payload.at("trial_index").get<std::size_t>();
        if (index >= plan.trials.size() || plan.trials[index].trial_id != payload.at("trial_id").get<std::uint64_t>()) {
            fail(ErrorCode::sequence_violation, "service trial does not match the local plan for " + plan.session_id);
        }
        const Trial& trial = plan.trials[index];
        const ResponseRecord r = sample_response(trial, params, stream_seed(session_seed, index),
                                                 plan.condition.input_modality);
        client_clock += kInterTrialIntervalMs + static_cast<std::int64_t>(r.rt_ms);
        const nlohmann::json req{{"schema_version", kSchemaVersion},
                                 {"trial_id", trial.trial_id},
                                 {"choice", to_string(r.choice)},
                                 {"rt_ms", r.rt_ms},
                                 {"modality", to_string(r.modality)},
                                 {"client_ts", client_clock}};
        body = check_response(cli.Post("/sessions/" + plan.session_id + "/responses", req.dump(), "application/json"),
                              "POST response");
        acknowledged.push_back(record_from_json(body.at("ack")));
    }
}

ResponseLog run_simulated_cohort(const std::vector<SessionPlan>& plans, const ObserverParams& params,
                                 std::uint64_t seed, const CohortOptions& options) {
    if (plans.empty()) fail(ErrorCode::invalid_parameter, "cohort needs at least one session plan");
    params.validate();
    ResponseLog log;
    if (options.route == CohortRoute::in_process) {
        std::int64_t ts = options.start_ts;
        for (const auto& plan : plans) {
            auto part = simulate_session(plan, params, seed, ts);
            if (!part.empty()) ts = part.back().client_ts + 60'000;
            log.insert(log.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
        }
        return log;
    }

    std::map<std::string, const SessionPlan*> by_id;
    for (const auto& p : plans) by_id.emplace(p.session_id, &p);
    auto cli = make_client(options.base_url);
    for (std::size_t i = 0; i < plans.size(); ++i) {
        const auto body = check_response(cli.Post("/experiments/" + options.experiment_id + "/sessions",
                                                   nlohmann::json{{"schema_version", kSchemaVersion}}.dump(),
                                                   "application/json"),
                                         "POST session");
        const auto sid = body.at("session").at("session_id").get<std::string>();
        auto it = by_id.find(sid);
        if (it == by_id.end()) fail(ErrorCode::invalid_input, "service issued session " + sid + " absent from the local plans");
        drive_session_http(options.base_url, *it->second, params, seed, log);
    }
    return log;
}

}  // namespace psyphy
