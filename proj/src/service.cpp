#include "psyphy/service.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "psyphy/error.hpp"

namespace psyphy {

namespace fs = std::filesystem;

std::string to_string(SessionStatus s) {
    switch (s) {
        case SessionStatus::open: return "open";
        case SessionStatus::complete: return "complete";
        case SessionStatus::abandoned: return "abandoned";
    }
    return "open";
}

std::int64_t system_clock_ms() {
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

nlohmann::json to_json(const SessionState& s) {
    return {
        {"session_id", s.session_id},
        {"experiment_id", s.experiment_id},
        {"condition", to_string(s.condition.id)},
        {"prompt_variant", to_string(s.condition.prompt_variant)},
        {"input_modality", to_string(s.condition.input_modality)},
        {"cursor", s.cursor},
        {"trials_per_session", s.trials_per_session},
        {"status", to_string(s.status)},
    };
}

nlohmann::json to_json(const TrialPayload& p) {
    return {
        {"session_id", p.session_id},
        {"trial_index", p.trial_index},
        {"trials_per_session", p.trials_per_session},
        {"trial_id", p.trial_id},
        {"stimulus_a", p.stimulus_a},
        {"stimulus_b", p.stimulus_b},
        {"stimulus_a_url", "/stimuli/" + p.stimulus_a},
        {"stimulus_b_url", "/stimuli/" + p.stimulus_b},
        {"prompt", p.prompt},
        {"modality", to_string(p.modality)},
        {"inter_trial_interval_ms", kInterTrialIntervalMs},
    };
}

std::string stimulus_id(const std::string& image_id, const PerturbationSpec& spec) {
    switch (spec.kind) {
        case PerturbationKind::none: return image_id;
        case PerturbationKind::blur: return image_id + "~blur" + std::to_string(spec.level);
        case PerturbationKind::noise: {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(spec.seed));
            return image_id + "~noise" + std::to_string(spec.level) + "~" + buf;
        }
    }
    return image_id;
}

std::pair<std::string, PerturbationSpec> parse_stimulus_id(const std::string& id) {
    const auto bad = [&] { fail(ErrorCode::not_found, "malformed stimulus id '" + id + "'"); };
    const auto tilde = id.find('~');
    if (tilde == std::string::npos) return {id, PerturbationSpec{}};
    std::string image = id.substr(0, tilde);
    std::string rest = id.substr(tilde + 1);
    PerturbationSpec spec;
    auto parse_level = [&](const std::string& s) {
        if (s.size() != 1 || s[0] < '1' || s[0] > '5') bad();
        return s[0] - '0';
    };
    if (rest.rfind("blur", 0) == 0) {
        spec.kind = PerturbationKind::blur;
        spec.level = parse_level(rest.substr(4));
    } else if (rest.rfind("noise", 0) == 0) {
        const auto t2 = rest.find('~');
        if (t2 == std::string::npos || rest.size() - t2 - 1 != 16) bad();
        spec.kind = PerturbationKind::noise;
        spec.level = parse_level(rest.substr(5, t2 - 5));
        const std::string hex = rest.substr(t2 + 1);
        if (hex.find_first_not_of("0123456789abcdef") != std::string::npos) bad();
        spec.seed = std::stoull(hex, nullptr, 16);
    } else {
        bad();
    }
    return {image, spec};
}

struct ExperimentService::Session {
    const SessionPlan* plan = nullptr;
    std::string experiment_id;
    std::size_t cursor = 0;
    SessionStatus status = SessionStatus::open;
    std::atomic<bool> claimed{false};
    std::int64_t last_activity = 0;
    std::mutex mutex;
};

struct ExperimentService::Experiment {
    ExperimentPlan plan;
    std::unique_ptr<AppendLog> responses;
    std::unique_ptr<AppendLog> events;
    std::vector<std::unique_ptr<Session>> sessions;
    std::mutex claim_mutex;
};

namespace {

nlohmann::json event(const std::string& kind, const std::string& session_id, std::int64_t ts) {
    return {{"schema_version", kSchemaVersion}, {"event", kind}, {"session_id", session_id}, {"ts", ts}};
}

}  // namespace

ExperimentService::ExperimentService(fs::path root, Clock clock, std::int64_t abandon_after_ms)
    : root_(std::move(root)), clock_(std::move(clock)), abandon_after_ms_(abandon_after_ms) {
    if (!fs::is_directory(root_)) fail(ErrorCode::not_found, "service root " + root_.string() + " missing");
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(root_)) {
        if (entry.is_directory() && fs::exists(entry.path() / "experiment.json")) dirs.push_back(entry.path());
    }
    std::sort(dirs.begin(), dirs.end());

    for (const auto& dir : dirs) {
        auto exp = std::make_unique<Experiment>();
        exp->plan = ExperimentPlan::load(dir);
        const std::string id = exp->plan.experiment_id;
        if (experiments_.count(id)) fail(ErrorCode::invalid_input, "duplicate experiment id '" + id + "'");

        std::map<std::string, Session*> local;
        for (const auto& sp : exp->plan.sessions) {
            auto s = std::make_unique<Session>();
            s->plan = &sp;
            s->experiment_id = id;
            if (sessions_.count(sp.session_id) || local.count(sp.session_id)) {
                fail(ErrorCode::invalid_input, "session id '" + sp.session_id + "' is not unique");
            }
            local.emplace(sp.session_id, s.get());
            exp->sessions.push_back(std::move(s));
        }

        exp->events = std::make_unique<AppendLog>(dir / "session_events.jsonl");
        for (const auto& line : exp->events->read_lines()) {
            const auto j = nlohmann::json::parse(line);
            auto it = local.find(j.at("session_id").get<std::string>());
            if (it == local.end()) continue;
            Session& s = *it->second;
            const auto kind = j.at("event").get<std::string>();
            s.last_activity = std::max(s.last_activity, j.at("ts").get<std::int64_t>());
            if (kind == "claim") s.claimed = true;
            if (kind == "abandon") s.status = SessionStatus::abandoned;
        }

        exp->responses = std::make_unique<AppendLog>(dir / "responses.jsonl");
        for (const auto& line : exp->responses->read_lines()) {
            const auto r = record_from_json(nlohmann::json::parse(line));
            auto it = local.find(r.session_id);
            if (it == local.end()) {
                fail(ErrorCode::invalid_input, "response log references unknown session " + r.session_id);
            }
            Session& s = *it->second;
            if (s.cursor >= s.plan->trials.size() || s.plan->trials[s.cursor].trial_id != r.trial_id) {
                fail(ErrorCode::invalid_input, "response log out of sequence for session " + r.session_id);
            }
            s.claimed = true;
            ++s.cursor;
            s.last_activity = std::max(s.last_activity, r.server_ts);
            if (s.cursor == exp->plan.trials_per_session && s.status == SessionStatus::open) {
                s.status = SessionStatus::complete;
            }
        }
        sessions_.insert(local.begin(), local.end());
        experiments_.emplace(id, std::move(exp));
    }
}

ExperimentService::~ExperimentService() = default;

std::vector<std::string> ExperimentService::experiment_ids() const {
    std::vector<std::string> ids;
    for (const auto& [id, _] : experiments_) ids.push_back(id);
    return ids;
}

ExperimentService::Experiment& ExperimentService::experiment(const std::string& id) {
    auto it = experiments_.find(id);
    if (it == experiments_.end()) fail(ErrorCode::not_found, "unknown experiment '" + id + "'");
    return *it->second;
}

const ExperimentService::Experiment& ExperimentService::experiment(const std::string& id) const {
    auto it = experiments_.find(id);
    if (it == experiments_.end()) fail(ErrorCode::not_found, "unknown experiment '" + id + "'");
    return *it->second;
}

const ExperimentPlan& ExperimentService::plan(const std::string& experiment_id) const {
    return experiment(experiment_id).plan;
}

ExperimentService::Session& ExperimentService::session(const std::string& session_id) {
    auto it = sessions_.find(session_id);
    // Unclaimed plans are indistinguishable from unknown tokens.
    if (it == sessions_.end() || !it->second->claimed.load()) {
        fail(ErrorCode::not_found, "unknown session '" + session_id + "'");
    }
    return *it->second;
}

TrialPayload ExperimentService::payload_for(const Experiment& exp, const Session& s) const {
    const Trial& t = s.plan->trials[s.cursor];
    TrialPayload p;
    p.session_id = s.plan->session_id;
    p.trial_index = s.cursor;
    p.trials_per_session = exp.plan.trials_per_session;
    p.trial_id = t.trial_id;
    p.stimulus_a = stimulus_id(t.stim_a, t.perturbed_side == Side::a ? t.perturbation : PerturbationSpec{});
    p.stimulus_b = stimulus_id(t.stim_b, t.perturbed_side == Side::b ? t.perturbation : PerturbationSpec{});
    p.prompt = "Are these the same character?";
    p.modality = exp.plan.condition.input_modality;
    return p;
}

static SessionState state_of(const ExperimentPlan& plan, const SessionPlan& sp, std::size_t cursor,
                             SessionStatus status) {
    return SessionState{sp.session_id, plan.experiment_id, plan.condition, cursor,
                        plan.trials_per_session, status};
}

CreatedSession ExperimentService::create_session(const std::string& experiment_id) {
    Experiment& exp = experiment(experiment_id);
    std::lock_guard lock(exp.claim_mutex);
    for (auto& s : exp.sessions) {
        if (s->claimed) continue;
        std::lock_guard slock(s->mutex);
        const std::int64_t now = clock_();
        exp.events->append(event("claim", s->plan->session_id, now).dump());
        s->claimed = true;
        s->last_activity = now;
        CreatedSession out;
        out.state = state_of(exp.plan, *s->plan, s->cursor, s->status);
        out.instructions = instructions_for(exp.plan.condition.prompt_variant);
        if (s->cursor < exp.plan.trials_per_session) out.trial = payload_for(exp, *s);
        return out;
    }
    fail(ErrorCode::capacity_exhausted,
         "experiment '" + experiment_id + "' has no unassigned sessions remaining");
}

void ExperimentService::mark_abandoned_locked(Experiment& exp, Session& s) {
    exp.events->append(event("abandon", s.plan->session_id, clock_()).dump());
    s.status = SessionStatus::abandoned;
}

std::optional<TrialPayload> ExperimentService::current_trial(const std::string& session_id) {
    Session& s = session(session_id);
    Experiment& exp = experiment(s.experiment_id);
    std::lock_guard lock(s.mutex);
    if (s.status == SessionStatus::open && clock_() - s.last_activity > abandon_after_ms_) {
        mark_abandoned_locked(exp, s);
    }
    if (s.status == SessionStatus::abandoned) {
        fail(ErrorCode::session_closed, "session '" + session_id + "' was abandoned");
    }
    if (s.status == SessionStatus::complete) return std::nullopt;
    return payload_for(exp, s);
}

SessionState ExperimentService::session_state(const std::string& session_id) {
    Session& s = session(session_id);
    const Experiment& exp = experiment(s.experiment_id);
    std::lock_guard lock(s.mutex);
    return state_of(exp.plan, *s.plan, s.cursor, s.status);
}

SubmitResult ExperimentService::submit_response(const std::string& session_id,
                                                const SubmitRequest& request) {
    Session& s = session(session_id);
    Experiment& exp = experiment(s.experiment_id);
    std::lock_guard lock(s.mutex);

    const std::int64_t now = clock_();
    if (s.status == SessionStatus::open && now - s.last_activity > abandon_after_ms_) {
        mark_abandoned_locked(exp, s);
    }
    if (s.status != SessionStatus::open) {
        fail(ErrorCode::session_closed, "session '" + session_id + "' is " + to_string(s.status));
    }
    const Trial& trial = s.plan->trials[s.cursor];
    if (request.trial_id != trial.trial_id) {
        fail(ErrorCode::sequence_violation,
             "session '" + session_id + "' expects trial " + std::to_string(trial.trial_id) +
                 " at index " + std::to_string(s.cursor) + ", got " + std::to_string(request.trial_id));
    }
    if (!(request.rt_ms > 0.0) || !std::isfinite(request.rt_ms)) {
        fail(ErrorCode::invalid_measurement, "rt_ms must be a positive finite number of milliseconds");
    }

    ResponseRecord record = make_record(trial, session_id, s.plan->participant_slot, exp.plan.condition.id,
                                        request.choice, request.rt_ms, request.modality,
                                        request.client_ts, now);
    exp.responses->append(to_json(record).dump());

    ++s.cursor;
    s.last_activity = now;
    if (s.cursor == exp.plan.trials_per_session) s.status = SessionStatus::complete;

    SubmitResult out;
    out.record = std::move(record);
    out.state = state_of(exp.plan, *s.plan, s.cursor, s.status);
    if (s.status == SessionStatus::open) out.next = payload_for(exp, s);
    return out;
}

std::string ExperimentService::export_responses(const std::string& experiment_id) const {
    return experiment(experiment_id).responses->read_all();
}

ResponseLog ExperimentService::export_records(const std::string& experiment_id) const {
    std::istringstream in(export_responses(experiment_id));
    return read_log(in);
}

std::vector<std::string> ExperimentService::sweep_abandoned() {
    std::vector<std::string> marked;
    const std::int64_t now = clock_();
    for (auto& [id, exp] : experiments_) {
        for (auto& s : exp->sessions) {
            std::lock_guard lock(s->mutex);
            if (s->claimed.load() && s->status == SessionStatus::open && now - s->last_activity > abandon_after_ms_) {
                mark_abandoned_locked(*exp, *s);
                marked.push_back(s->plan->session_id);
            }
        }
    }
    return marked;
}

std::size_t ExperimentService::total_records(const std::string& experiment_id) const {
    return experiment(experiment_id).responses->record_count();
}

std::size_t ExperimentService::total_cursor(const std::string& experiment_id) const {
    const Experiment& exp = experiment(experiment_id);
    std::size_t total = 0;
    for (const auto& s : exp.sessions) {
        std::lock_guard lock(s->mutex);
        total += s->cursor;
    }
    return total;
}

}  // namespace psyphy
