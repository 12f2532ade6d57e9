#include <doctest.h>

#include <thread>

#include "plan_fixture.hpp"
#include "psyphy/error.hpp"
#include "psyphy/http_server.hpp"
#include "psyphy/observer.hpp"
#include "psyphy/rng.hpp"
#include "psyphy/stats.hpp"
#include "support.hpp"

using namespace psyphy;

namespace {

Trial trial_at(int level, Choice truth = Choice::same) {
    Trial t;
    t.stim_a = "a";
    t.stim_b = "b";
    t.ground_truth = truth;
    if (level > 0) {
        t.perturbed_side = Side::a;
        t.perturbation = {PerturbationKind::blur, level, 0};
    }
    return t;
}

}  // namespace

TEST_CASE("psychometric function matches its definition") {
    ObserverParams p;
    for (double level = 0; level <= 5; level += 0.5) {
        const double want = 0.5 + (0.5 - p.lapse) / (1.0 + std::exp(p.slope * (level - p.threshold)));
        CHECK(psychometric_accuracy(level, p) == doctest::Approx(want).epsilon(1e-14));
    }
    CHECK(psychometric_accuracy(p.threshold, p) == doctest::Approx(0.5 + (0.5 - p.lapse) / 2));
    // Monotone decreasing in level, bounded by chance and 1 - lapse.
    for (int l = 0; l < 5; ++l) CHECK(psychometric_accuracy(l, p) > psychometric_accuracy(l + 1, p));
    CHECK(psychometric_accuracy(-100, p) == doctest::Approx(1.0 - p.lapse));
    CHECK(psychometric_accuracy(100, p) == doctest::Approx(0.5));
}

TEST_CASE("sampled accuracy agrees with the psychometric function") {
    ObserverParams p;
    const std::size_t n = 20000;
    for (int level : {0, 2, 3, 5}) {
        const Trial t = trial_at(level, level % 2 ? Choice::different : Choice::same);
        std::size_t correct = 0;
        for (std::size_t i = 0; i < n; ++i) correct += sample_response(t, p, stream_seed(99, i)).correct;
        const double pr = psychometric_accuracy(level, p);
        const double sd = std::sqrt(pr * (1 - pr) / n);
        CHECK(std::abs(static_cast<double>(correct) / n - pr) < 4 * sd);
    }
}

TEST_CASE("reaction times follow the level and jitter model") {
    ObserverParams p;
    p.rt_noise_sigma = 0.0;
    for (int level = 0; level <= 5; ++level) {
        CHECK(sample_response(trial_at(level), p, 1).rt_ms == p.rt_base + p.rt_gain * level);
    }
    ObserverParams q;
    const std::size_t n = 20000;
    std::vector<double> logs;
    for (std::size_t i = 0; i < n; ++i) logs.push_back(std::log(sample_response(trial_at(2), q, stream_seed(3, i)).rt_ms));
    const auto ms = stats::mean_se(logs);
    CHECK(std::abs(ms.mean - std::log(q.rt_base + 2 * q.rt_gain)) < 4 * ms.se);
    CHECK(std::sqrt(stats::sample_variance(logs)) == doctest::Approx(q.rt_noise_sigma).epsilon(0.03));

    std::vector<double> cursor;
    for (std::size_t i = 0; i < n; ++i)
        cursor.push_back(std::log(sample_response(trial_at(2), q, stream_seed(3, i), Modality::cursor).rt_ms));
    CHECK(std::sqrt(stats::sample_variance(cursor)) ==
          doctest::Approx(std::hypot(q.rt_noise_sigma, q.cursor_rt_noise_sigma)).epsilon(0.03));
}

TEST_CASE("observer parameters are validated") {
    ObserverParams p;
    p.lapse = 0.3;
    CHECK_THROWS_AS(p.validate(), Error);
    p = {};
    p.slope = 0;
    CHECK_THROWS_AS(p.validate(), Error);
    p = {};
    p.rt_gain = -1;
    CHECK_THROWS_AS(p.validate(), Error);
}

TEST_CASE("cohort is deterministic and complete") {
    const auto m = fake_manifest(5, 4);
    const auto plan = make_plan(m, "blur", ConditionId::blur, 12, 20, 3);
    const ObserverParams p;
    const auto a = run_simulated_cohort(plan.sessions, p, 5);
    CHECK(a.size() == 12 * 20);
    CHECK(a == run_simulated_cohort(plan.sessions, p, 5));
    CHECK_FALSE(a == run_simulated_cohort(plan.sessions, p, 6));
    for (const auto& r : a) {
        CHECK(r.condition == ConditionId::blur);
        CHECK(r.modality == Modality::keypress);
        CHECK(r.rt_ms > 0);
    }
    // Each session draws from its own stream, independent of cohort order.
    auto reversed = plan.sessions;
    std::reverse(reversed.begin(), reversed.end());
    CHECK(simulate_session(plan.sessions[3], p, 5, 0).front().rt_ms ==
          simulate_session(reversed[8], p, 5, 0).front().rt_ms);
}

TEST_CASE("http cohort yields the same responses as the in-process route") {
    TempDir dir;
    const auto m = fake_manifest(5, 4);
    const auto plan = make_plan(m, "ctl", ConditionId::control, 4, 10, 8);
    plan.save(dir / "ctl");
    ExperimentService svc(dir.path());
    HttpServer server(svc, nullptr);
    const int port = server.bind("127.0.0.1", 0);
    std::thread th([&] { server.listen(); });
    while (!server.is_running()) std::this_thread::sleep_for(std::chrono::milliseconds(2));

    const ObserverParams p;
    CohortOptions opts;
    opts.route = CohortRoute::http;
    opts.base_url = "http://127.0.0.1:" + std::to_string(port);
    opts.experiment_id = "ctl";
    const auto via_http = run_simulated_cohort(plan.sessions, p, 11, opts);
    const auto local = run_simulated_cohort(plan.sessions, p, 11);
    REQUIRE(via_http.size() == local.size());
    for (std::size_t i = 0; i < local.size(); ++i) {
        CHECK(via_http[i].session_id == local[i].session_id);
        CHECK(via_http[i].trial_id == local[i].trial_id);
        CHECK(via_http[i].choice == local[i].choice);
        CHECK(via_http[i].correct == local[i].correct);
        CHECK(via_http[i].rt_ms == local[i].rt_ms);
        CHECK(via_http[i].modality == Modality::cursor);
    }
    CHECK(svc.total_records("ctl") == 40);
    server.stop();
    th.join();

    CohortOptions dead = opts;
    dead.base_url = "http://127.0.0.1:1";
    try {
        run_simulated_cohort(plan.sessions, p, 11, dead);
        FAIL("expected transport failure");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::transport_failure);
    }
}
