#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "psyphy/append_log.hpp"
#include "psyphy/response.hpp"
#include "psyphy/trials.hpp"

namespace psyphy {

enum class SessionStatus { open, complete, abandoned };
std::string to_string(SessionStatus s);

struct SessionState {
    std::string session_id;
    std::string experiment_id;
    ExperimentCondition condition;
    std::size_t cursor = 0;
    std::size_t trials_per_session = 0;
    SessionStatus status = SessionStatus::open;
};

nlohmann::json to_json(const SessionState& s);

// What a client needs to render one trial. Ground truth is never included.
struct TrialPayload {
    std::string session_id;
    std::size_t trial_index = 0;
    std::size_t trials_per_session = 0;
    std::uint64_t trial_id = 0;
    std::string stimulus_a;  // stimulus IDs, fetchable at /stimuli/{id}
    std::string stimulus_b;
    std::string prompt;
    Modality modality = Modality::keypress;
};

nlohmann::json to_json(const TrialPayload& p);

struct CreatedSession {
    SessionState state;
    std::string instructions;
    std::optional<TrialPayload> trial;
};

struct SubmitRequest {
    std::uint64_t trial_id = 0;
    Choice choice = Choice::same;
    double rt_ms = 0.0;
    Modality modality = Modality::keypress;
    std::int64_t client_ts = 0;
};

struct SubmitResult {
    ResponseRecord record;
    SessionState state;
    std::optional<TrialPayload> next;  // empty once the session is complete
};

// Stimulus IDs encode the perturbation: "<image>", "<image>~blur<level>",
// "<image>~noise<level>~<seed hex>".
std::string stimulus_id(const std::string& image_id, const PerturbationSpec& spec);
std::pair<std::string, PerturbationSpec> parse_stimulus_id(const std::string& id);

using Clock = std::function<std::int64_t()>;  // ms since epoch
std::int64_t system_clock_ms();

inline constexpr std::int64_t kAbandonAfterMs = 30 * 60 * 1000;
inline constexpr std::int64_t kInterTrialIntervalMs = 500;

// Hosts experiments loaded from `root/<experiment_id>/`. All state needed to
// resume after a crash lives in two append-only logs per experiment:
// responses.jsonl (ResponseRecords) and session_events.jsonl (claims and
// status changes). Per-session calls are serialized on a session mutex;
// appends from distinct sessions are totally ordered by the log.
class ExperimentService {
public:
    explicit ExperimentService(std::filesystem::path root, Clock clock = system_clock_ms,
                               std::int64_t abandon_after_ms = kAbandonAfterMs);
    ~ExperimentService();

    ExperimentService(const ExperimentService&) = delete;
    ExperimentService& operator=(const ExperimentService&) = delete;

    std::vector<std::string> experiment_ids() const;
    const ExperimentPlan& plan(const std::string& experiment_id) const;

    CreatedSession create_session(const std::string& experiment_id);
    std::optional<TrialPayload> current_trial(const std::string& session_id);
    SessionState session_state(const std::string& session_id);
    SubmitResult submit_response(const std::string& session_id, const SubmitRequest& request);

    // Exact bytes of the experiment's response log, in append order.
    std::string export_responses(const std::string& experiment_id) const;
    ResponseLog export_records(const std::string& experiment_id) const;

    // Marks open sessions idle longer than the abandonment window. Returns the
    // IDs newly marked.
    std::vector<std::string> sweep_abandoned();

    std::size_t total_records(const std::string& experiment_id) const;
    std::size_t total_cursor(const std::string& experiment_id) const;

private:
    struct Session;
    struct Experiment;

    Experiment& experiment(const std::string& id);
    const Experiment& experiment(const std::string& id) const;
    Session& session(const std::string& session_id);
    TrialPayload payload_for(const Experiment& exp, const Session& s) const;
    void mark_abandoned_locked(Experiment& exp, Session& s);

    std::filesystem::path root_;
    Clock clock_;
    std::int64_t abandon_after_ms_;
    std::map<std::string, std::unique_ptr<Experiment>> experiments_;
    std::map<std::string, Session*> sessions_;  // immutable after construction
};

}  // namespace psyphy
