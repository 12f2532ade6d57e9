#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "psyphy/response.hpp"
#include "psyphy/trials.hpp"

namespace psyphy {

struct ObserverParams {
    double lapse = 0.02;
    double slope = 1.5;            // k
    double threshold = 3.0;        // level at the psychometric midpoint
    double rt_base = 550.0;        // ms
    double rt_gain = 120.0;        // ms per level
    double rt_noise_sigma = 0.15;  // log-space std of the multiplicative jitter
    // Extra log-space RT jitter when responding with a cursor; cursor RTs are
    // unreliable compared to keypresses.
    double cursor_rt_noise_sigma = 0.35;

    void validate() const;
};

// p = 0.5 + (0.5 - lapse) * sigmoid(-k (level - threshold))
double psychometric_accuracy(double level, const ObserverParams& params);

// Correctness ~ Bernoulli(psychometric_accuracy(level)); rt_ms =
// (rt_base + rt_gain*level) * exp(N(0, sigma^2)).
ResponseRecord sample_response(const Trial& trial, const ObserverParams& params,
                               std::uint64_t seed, Modality modality = Modality::keypress);

enum class CohortRoute { in_process, http };

struct CohortOptions {
    CohortRoute route = CohortRoute::in_process;
    std::string base_url;  // http route, e.g. "http://127.0.0.1:8080"
    std::string experiment_id;
    std::int64_t start_ts = 1'700'000'000'000;  // in-process client clock origin
};

// One record per trial per session. The in-process route generates records
// directly; the http route claims sessions from a running service and
// submits every response through the real endpoints. Each session's RNG
// stream is derived from (seed, session_id).
ResponseLog run_simulated_cohort(const std::vector<SessionPlan>& plans,
                                 const ObserverParams& params, std::uint64_t seed,
                                 const CohortOptions& options = {});

// Drives one already-claimed session over HTTP from whatever trial the
// service reports as current, so a client can resume after a server restart.
// Each acknowledged record is appended to `acknowledged`. Throws
// transport_failure if the service is unreachable.
void drive_session_http(const std::string& base_url, const SessionPlan& plan,
                        const ObserverParams& params, std::uint64_t seed,
                        ResponseLog& acknowledged);

// Simulates a single session in-process.
ResponseLog simulate_session(const SessionPlan& plan, const ObserverParams& params,
                             std::uint64_t seed, std::int64_t start_ts);

}  // namespace psyphy
