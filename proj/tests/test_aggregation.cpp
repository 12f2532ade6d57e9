#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "psyphy/aggregation.hpp"
#include "psyphy/error.hpp"
#include "psyphy/rng.hpp"
#include "support.hpp"

using namespace psyphy;

namespace {

ResponseRecord rec(const std::string& sid, const std::string& a, const std::string& b, int level, bool correct,
                   double rt) {
    ResponseRecord r;
    r.session_id = sid;
    r.stim_a = a;
    r.stim_b = b;
    r.level = level;
    r.correct = correct;
    r.rt_ms = rt;
    return r;
}

// A complete session of n trials with k correct and the given RT.
ResponseLog session(const std::string& sid, std::size_t n, std::size_t k, double rt) {
    ResponseLog log;
    for (std::size_t i = 0; i < n; ++i) log.push_back(rec(sid, "x", "y", 1, i < k, rt));
    return log;
}

ResponseLog random_log(std::uint64_t seed, std::size_t n) {
    Engine e = make_engine(seed);
    const std::vector<std::string> imgs{"a", "b", "c", "d", "e"};
    ResponseLog log;
    for (std::size_t i = 0; i < n; ++i) {
        log.push_back(rec("s" + std::to_string(uniform_index(e, 3)), imgs[uniform_index(e, 5)], imgs[uniform_index(e, 5)],
                          static_cast<int>(uniform_index(e, 3)), uniform01(e) < 0.7, 300 + 500 * uniform01(e)));
    }
    return log;
}

}  // namespace

TEST_CASE("prune removes incomplete, fast and at-chance sessions") {
    ResponseLog log;
    auto add = [&](const ResponseLog& s) { log.insert(log.end(), s.begin(), s.end()); };
    add(session("good", 100, 90, 600));
    add(session("short", 60, 55, 600));
    add(session("fast", 100, 95, 200));
    add(session("chance", 100, 55, 600));
    add(session("edge", 100, 62, 600));  // P(X >= 62) ~ 0.0105 > 0.01
    add(session("edge2", 100, 63, 600));  // ~0.006
    const auto [kept, report] = prune(log, PruneConfig{});
    CHECK(report.sessions_in == 6);
    CHECK(report.sessions_kept == 2);
    CHECK(report.records_in == log.size());
    CHECK(report.records_kept == 200);
    CHECK(kept.size() == 200);
    std::map<std::string, std::vector<PruneReason>> why;
    for (const auto& r : report.removed) why[r.session_id] = r.reasons;
    CHECK(why.at("short") == std::vector<PruneReason>{PruneReason::incomplete});
    CHECK(why.at("fast") == std::vector<PruneReason>{PruneReason::too_fast});
    CHECK(why.at("chance") == std::vector<PruneReason>{PruneReason::at_chance});
    CHECK(why.count("edge") == 1);
    CHECK(why.count("edge2") == 0);
    for (const auto& r : kept) CHECK((r.session_id == "good" || r.session_id == "edge2"));
    CHECK(report.to_json().at("removed").size() == 4);
    CHECK(report.to_text().find("chance") != std::string::npos);
}

TEST_CASE("pair aggregation matches a group-by oracle") {
    const auto log = random_log(1, 2000);
    // Oracle: key by sorted pair plus level, accumulate naively.
    std::map<std::tuple<std::string, std::string, int>, std::tuple<std::size_t, std::size_t, double>> oracle;
    for (const auto& r : log) {
        auto key = std::make_tuple(std::min(r.stim_a, r.stim_b), std::max(r.stim_a, r.stim_b), r.level);
        auto& [n, k, s] = oracle[key];
        ++n;
        k += r.correct;
        s += r.rt_ms;
    }
    const auto pairs = aggregate_pairs(log);
    REQUIRE(pairs.size() == oracle.size());
    for (const auto& p : pairs) {
        const auto& [n, k, s] = oracle.at({p.key.image_lo, p.key.image_hi, p.key.level});
        CHECK(p.n == n);
        CHECK(p.n_correct == k);
        CHECK(p.mean_accuracy == doctest::Approx(double(k) / n).epsilon(1e-14));
        CHECK(p.mean_rt_ms == doctest::Approx(s / n).epsilon(1e-12));
    }
    CHECK(std::is_sorted(pairs.begin(), pairs.end(), [](auto& a, auto& b) { return a.key < b.key; }));
}

TEST_CASE("pair order and level define the key") {
    ResponseLog log{rec("s", "a", "b", 2, true, 400), rec("s", "b", "a", 2, false, 600), rec("s", "a", "b", 3, true, 500)};
    const auto pairs = aggregate_pairs(log);
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0].n == 2);
    CHECK(pairs[0].mean_accuracy == 0.5);
    CHECK(pairs[0].mean_rt_ms == 500);
    const auto correct_only = aggregate_pairs(log, AggregateOptions{true});
    CHECK(correct_only[0].mean_rt_ms == 400);
}

TEST_CASE("aggregation is invariant to record order") {
    auto log = random_log(2, 1500);
    const auto pairs = aggregate_pairs(log);
    const auto labels = image_labels(pairs);
    Engine e = make_engine(3);
    for (int i = 0; i < 5; ++i) {
        shuffle(log, e);
        const auto p2 = aggregate_pairs(log);
        REQUIRE(p2.size() == pairs.size());
        for (std::size_t j = 0; j < pairs.size(); ++j) {
            CHECK(p2[j].mean_rt_ms == pairs[j].mean_rt_ms);
            CHECK(p2[j].mean_accuracy == pairs[j].mean_accuracy);
        }
        const auto l2 = image_labels(p2);
        for (std::size_t j = 0; j < labels.labels.size(); ++j) {
            CHECK(l2.labels[j].r_rt_ms == labels.labels[j].r_rt_ms);
        }
    }
}

TEST_CASE("image labels average over the pairs containing the image") {
    std::vector<PairLabel> pairs{
        {PairKey::of("a", "b", 1), 2, 2, 1.0, 400},
        {PairKey::of("a", "c", 1), 6, 3, 0.5, 800},
        {PairKey::of("c", "c", 1), 1, 1, 1.0, 300},
    };
    const auto res = image_labels(pairs, {}, {"a", "b", "c", "d"});
    REQUIRE(res.labels.size() == 3);
    CHECK(res.labels[0].image_id == "a");
    CHECK(res.labels[0].r_rt_ms == 600);
    CHECK(res.labels[0].r_accuracy == 0.75);
    CHECK(res.labels[0].n_pairs == 2);
    CHECK(res.labels[2].image_id == "c");
    CHECK(res.labels[2].r_rt_ms == doctest::Approx(550));
    CHECK(res.excluded == std::vector<std::string>{"d"});

    const auto weighted = image_labels(pairs, ImageLabelOptions{true});
    CHECK(weighted.labels[0].r_rt_ms == doctest::Approx((2 * 400 + 6 * 800) / 8.0));
    CHECK_THROWS_AS(image_labels({}), Error);
}

TEST_CASE("min-max normalization") {
    std::vector<ImageLabel> labels{{"a", 0.9, 500, 1}, {"b", 0.6, 900, 1}, {"c", 0.75, 700, 1}};
    const auto rt = normalize_labels(labels, MeasurementKind::rt);
    CHECK(rt.m == 1.0);
    CHECK(*rt.find("a") == 0.0);
    CHECK(*rt.find("b") == 1.0);
    CHECK(*rt.find("c") == doctest::Approx(0.5));
    CHECK_FALSE(rt.find("z"));
    const auto acc = normalize_labels(labels, MeasurementKind::accuracy);
    CHECK(*acc.find("a") == 1.0);
    CHECK(*acc.find("b") == 0.0);

    // Idempotent.
    const auto again = normalize_table(rt);
    CHECK(again.entries == rt.entries);

    std::vector<ImageLabel> flat{{"a", 0.5, 600, 1}, {"b", 0.5, 600, 1}};
    try {
        normalize_labels(flat, MeasurementKind::rt);
        FAIL("expected degenerate");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::degenerate_distribution);
    }
}

TEST_CASE("label table json and validation") {
    TempDir dir;
    NormalizedLabelTable t;
    t.kind = MeasurementKind::accuracy;
    t.entries = {{"a", 0.25}, {"b", 1.0}};
    t.save(dir / "t.json");
    const auto back = NormalizedLabelTable::load(dir / "t.json");
    CHECK(back.entries == t.entries);
    CHECK(back.kind == MeasurementKind::accuracy);
    CHECK(back.mean() == 0.625);
    auto j = t.to_json();
    j["entries"]["a"] = 1.5;
    CHECK_THROWS_AS(NormalizedLabelTable::from_json(j), Error);
}
