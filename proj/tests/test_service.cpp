#include <doctest.h>

#include <atomic>
#include <set>
#include <thread>

#include "plan_fixture.hpp"
#include "psyphy/error.hpp"
#include "psyphy/service.hpp"
#include "support.hpp"

using namespace psyphy;

namespace {

struct FakeClock {
    std::shared_ptr<std::atomic<std::int64_t>> now = std::make_shared<std::atomic<std::int64_t>>(1'000'000);
    Clock fn() const {
        auto n = now;
        return [n] { return n->load(); };
    }
    void advance(std::int64_t ms) { *now += ms; }
};

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::io_error;
}

SubmitRequest answer(const TrialPayload& p, double rt = 500.0) {
    return SubmitRequest{p.trial_id, Choice::same, rt, p.modality, 0};
}

}  // namespace

TEST_CASE("stimulus ids encode perturbations") {
    CHECK(stimulus_id("img", {}) == "img");
    CHECK(stimulus_id("img", {PerturbationKind::blur, 3, 0}) == "img~blur3");
    const PerturbationSpec noisy{PerturbationKind::noise, 2, 0xABCDEF0123456789ULL};
    const auto sid = stimulus_id("c000_i001", noisy);
    CHECK(sid == "c000_i001~noise2~abcdef0123456789");
    const auto [img, spec] = parse_stimulus_id(sid);
    CHECK(img == "c000_i001");
    CHECK(spec == noisy);
    CHECK(parse_stimulus_id("img~blur3").second == PerturbationSpec{PerturbationKind::blur, 3, 0});
    CHECK_THROWS_AS(parse_stimulus_id("img~warp3"), Error);
    CHECK_THROWS_AS(parse_stimulus_id("img~blur9"), Error);
}

TEST_CASE("session lifecycle") {
    TempDir dir;
    const auto m = fake_manifest(5, 4);
    make_plan(m, "blur", ConditionId::blur, 3, 5, 1).save(dir / "blur");
    FakeClock clock;
    ExperimentService svc(dir.path(), clock.fn());
    CHECK(svc.experiment_ids() == std::vector<std::string>{"blur"});

    const auto created = svc.create_session("blur");
    CHECK(created.state.session_id == "blur-00000");
    CHECK(created.state.cursor == 0);
    CHECK(created.instructions.find("as quickly and accurately as possible") != std::string::npos);
    REQUIRE(created.trial);
    CHECK(created.trial->modality == Modality::keypress);
    CHECK(created.trial->stimulus_a.find("~blur") != std::string::npos);
    CHECK(created.trial->stimulus_b.find('~') == std::string::npos);

    std::optional<TrialPayload> cur = created.trial;
    const auto& plan = svc.plan("blur").sessions[0];
    for (std::size_t i = 0; i < 5; ++i) {
        REQUIRE(cur);
        CHECK(cur->trial_index == i);
        CHECK(cur->trial_id == plan.trials[i].trial_id);
        CHECK(svc.current_trial("blur-00000")->trial_id == cur->trial_id);
        clock.advance(700);
        const auto res = svc.submit_response("blur-00000", answer(*cur, 400 + i));
        CHECK(res.record.rt_ms == 400 + i);
        CHECK(res.record.server_ts == *clock.now);
        CHECK(res.state.cursor == i + 1);
        cur = res.next;
    }
    CHECK_FALSE(cur);
    CHECK(svc.session_state("blur-00000").status == SessionStatus::complete);
    CHECK_FALSE(svc.current_trial("blur-00000"));
    CHECK(svc.total_records("blur") == 5);
    CHECK(code_of([&] { svc.submit_response("blur-00000", SubmitRequest{0, Choice::same, 1, Modality::keypress, 0}); }) ==
          ErrorCode::session_closed);
}

TEST_CASE("errors map to codes") {
    TempDir dir;
    const auto m = fake_manifest(4, 3);
    make_plan(m, "ctl", ConditionId::control, 2, 4, 2).save(dir / "ctl");
    FakeClock clock;
    ExperimentService svc(dir.path(), clock.fn());
    CHECK(code_of([&] { svc.create_session("nope"); }) == ErrorCode::not_found);
    CHECK(code_of([&] { svc.current_trial("ctl-00000"); }) == ErrorCode::not_found);  // not claimed yet

    const auto s = svc.create_session("ctl");
    const auto t = *s.trial;
    CHECK(t.modality == Modality::cursor);
    CHECK(code_of([&] { svc.submit_response(s.state.session_id, answer(t, 0.0)); }) == ErrorCode::invalid_measurement);
    CHECK(code_of([&] { svc.submit_response(s.state.session_id, answer(t, -3)); }) == ErrorCode::invalid_measurement);
    auto wrong = answer(t);
    wrong.trial_id += 100000;
    CHECK(code_of([&] { svc.submit_response(s.state.session_id, wrong); }) == ErrorCode::sequence_violation);

    svc.submit_response(s.state.session_id, answer(t));
    // Duplicate submission of the same trial is out of sequence and not recorded twice.
    CHECK(code_of([&] { svc.submit_response(s.state.session_id, answer(t)); }) == ErrorCode::sequence_violation);
    CHECK(svc.total_records("ctl") == 1);

    svc.create_session("ctl");
    CHECK(code_of([&] { svc.create_session("ctl"); }) == ErrorCode::capacity_exhausted);
}

TEST_CASE("idle sessions are abandoned after 30 minutes") {
    TempDir dir;
    const auto m = fake_manifest(4, 3);
    make_plan(m, "ctl", ConditionId::control, 3, 4, 3).save(dir / "ctl");
    FakeClock clock;
    ExperimentService svc(dir.path(), clock.fn());
    const auto a = svc.create_session("ctl");
    const auto b = svc.create_session("ctl");
    clock.advance(kAbandonAfterMs);
    CHECK(svc.sweep_abandoned().empty());
    svc.submit_response(b.state.session_id, answer(*b.trial));
    clock.advance(1);
    CHECK(svc.sweep_abandoned() == std::vector<std::string>{a.state.session_id});
    CHECK(svc.session_state(a.state.session_id).status == SessionStatus::abandoned);
    CHECK(code_of([&] { svc.current_trial(a.state.session_id); }) == ErrorCode::session_closed);

    // Lazy detection on access.
    clock.advance(kAbandonAfterMs + 1);
    CHECK(code_of([&] { svc.current_trial(b.state.session_id); }) == ErrorCode::session_closed);
    // Abandoned slots are not reissued.
    CHECK(svc.create_session("ctl").state.session_id == "ctl-00002");
}

TEST_CASE("state survives restart") {
    TempDir dir;
    const auto m = fake_manifest(4, 3);
    make_plan(m, "n", ConditionId::noise, 3, 6, 4).save(dir / "n");
    FakeClock clock;
    std::string exported;
    {
        ExperimentService svc(dir.path(), clock.fn());
        auto s = svc.create_session("n");
        auto cur = s.trial;
        for (int i = 0; i < 4; ++i) cur = svc.submit_response(s.state.session_id, answer(*cur)).next;
        auto abandoned = svc.create_session("n");
        clock.advance(kAbandonAfterMs + 10);
        svc.sweep_abandoned();
        exported = svc.export_responses("n");
    }
    ExperimentService svc(dir.path(), clock.fn());
    CHECK(svc.export_responses("n") == exported);
    CHECK(svc.total_records("n") == 4);
    const auto st = svc.session_state("n-00000");
    CHECK(st.cursor == 4);
    CHECK(st.status == SessionStatus::abandoned);
    CHECK(svc.session_state("n-00001").status == SessionStatus::abandoned);
    CHECK(svc.create_session("n").state.session_id == "n-00002");
    CHECK(svc.export_records("n").size() == 4);
}

TEST_CASE("resumed session continues where it left off") {
    TempDir dir;
    const auto m = fake_manifest(4, 3);
    make_plan(m, "r", ConditionId::reworded, 1, 6, 5).save(dir / "r");
    FakeClock clock;
    {
        ExperimentService svc(dir.path(), clock.fn());
        auto s = svc.create_session("r");
        svc.submit_response("r-00000", answer(*s.trial));
        svc.submit_response("r-00000", answer(*svc.current_trial("r-00000")));
    }
    ExperimentService svc(dir.path(), clock.fn());
    const auto cur = svc.current_trial("r-00000");
    REQUIRE(cur);
    CHECK(cur->trial_index == 2);
    CHECK(cur->trial_id == svc.plan("r").sessions[0].trials[2].trial_id);
}

TEST_CASE("concurrent claims hand out distinct sessions") {
    TempDir dir;
    const auto m = fake_manifest(6, 4);
    make_plan(m, "c", ConditionId::control, 40, 3, 6).save(dir / "c");
    ExperimentService svc(dir.path());
    std::mutex mu;
    std::set<std::string> ids;
    std::atomic<int> exhausted{0};
    std::vector<std::thread> threads;
    for (int t = 0; t < 8; ++t) {
        threads.emplace_back([&] {
            for (int i = 0; i < 6; ++i) {
                try {
                    auto s = svc.create_session("c");
                    auto cur = s.trial;
                    while (cur) cur = svc.submit_response(s.state.session_id, answer(*cur)).next;
                    std::lock_guard lock(mu);
                    CHECK(ids.insert(s.state.session_id).second);
                } catch (const Error& e) {
                    CHECK(e.code() == ErrorCode::capacity_exhausted);
                    ++exhausted;
                }
            }
        });
    }
    for (auto& th : threads) th.join();
    CHECK(ids.size() == 40);
    CHECK(exhausted == 8);
    CHECK(svc.total_records("c") == 120);
    CHECK(svc.total_cursor("c") == 120);
}
