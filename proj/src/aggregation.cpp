#include "psyphy/aggregation.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "psyphy/error.hpp"
#include "psyphy/stats.hpp"

namespace psyphy {

std::string to_string(PruneReason r) {
    switch (r) {
        case PruneReason::incomplete: return "incomplete";
        case PruneReason::too_fast: return "too-fast";
        case PruneReason::at_chance: return "at-chance";
    }
    return "incomplete";
}

nlohmann::json PruneReport::to_json() const {
    nlohmann::json removed_j = nlohmann::json::array();
    for (const auto& r : removed) {
        std::vector<std::string> reasons;
        for (auto reason : r.reasons) reasons.push_back(to_string(reason));
        removed_j.push_back({{"session_id", r.session_id},
                             {"reasons", reasons},
                             {"n_responses", r.n_responses},
                             {"accuracy", r.accuracy},
                             {"median_rt_ms", r.median_rt_ms},
                             {"binomial_p", r.binomial_p}});
    }
    return {{"schema_version", 1},
            {"sessions_in", sessions_in},
            {"sessions_kept", sessions_kept},
            {"records_in", records_in},
            {"records_kept", records_kept},
            {"removed", removed_j}};
}

std::string PruneReport::to_text() const {
    std::ostringstream os;
    os << "sessions: " << sessions_kept << " kept of " << sessions_in << "\n"
       << "records:  " << records_kept << " kept of " << records_in << "\n";
    for (const auto& r : removed) {
        os << "  removed " << r.session_id << " (";
        for (std::size_t i = 0; i < r.reasons.size(); ++i) os << (i ? ", " : "") << to_string(r.reasons[i]);
        char buf[160];
        std::snprintf(buf, sizeof buf, "): n=%zu accuracy=%.3f median_rt=%.1fms p=%.3g\n", r.n_responses,
                      r.accuracy, r.median_rt_ms, r.binomial_p);
        os << buf;
    }
    return os.str();
}

std::pair<ResponseLog, PruneReport> prune(const ResponseLog& log, const PruneConfig& rules) {
    struct Tally {
        std::size_t n = 0;
        std::size_t correct = 0;
        std::vector<double> rts;
    };
    std::vector<std::string> order;
    std::map<std::string, Tally> tallies;
    for (const auto& r : log) {
        auto [it, inserted] = tallies.try_emplace(r.session_id);
        if (inserted) order.push_back(r.session_id);
        ++it->second.n;
        it->second.correct += r.correct ? 1 : 0;
        it->second.rts.push_back(r.rt_ms);
    }

    PruneReport report;
    report.sessions_in = order.size();
    report.records_in = log.size();
    std::map<std::string, bool> keep;
    for (const auto& sid : order) {
        const Tally& t = tallies[sid];
        PrunedSession ps;
        ps.session_id = sid;
        ps.n_responses = t.n;
        ps.accuracy = static_cast<double>(t.correct) / static_cast<double>(t.n);
        ps.median_rt_ms = stats::median(t.rts);
        ps.binomial_p = stats::binomial_sf(t.correct, t.n, 0.5);
        if (t.n < rules.trials_per_session) ps.reasons.push_back(PruneReason::incomplete);
        if (ps.median_rt_ms < rules.min_median_rt_ms) ps.reasons.push_back(PruneReason::too_fast);
        if (ps.binomial_p > rules.chance_alpha) ps.reasons.push_back(PruneReason::at_chance);
        keep[sid] = ps.reasons.empty();
        if (!ps.reasons.empty()) report.removed.push_back(std::move(ps));
    }

    ResponseLog kept;
    for (const auto& r : log) {
        if (keep[r.session_id]) kept.push_back(r);
    }
    report.sessions_kept = report.sessions_in - report.removed.size();
    report.records_kept = kept.size();
    return {std::move(kept), std::move(report)};
}

PairKey PairKey::of(const std::string& a, const std::string& b, int level) {
    return a <= b ? PairKey{a, b, level} : PairKey{b, a, level};
}

namespace {

// Sorted summation keeps the result independent of input order.
double sorted_mean(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace

std::vector<PairLabel> aggregate_pairs(const ResponseLog& log, const AggregateOptions& options) {
    struct Acc {
        std::size_t n = 0;
        std::size_t correct = 0;
        std::vector<double> rts;
    };
    std::map<PairKey, Acc> groups;
    for (const auto& r : log) {
        Acc& a = groups[PairKey::of(r.stim_a, r.stim_b, r.level)];
        ++a.n;
        a.correct += r.correct ? 1 : 0;
        if (!options.correct_only_rt || r.correct) a.rts.push_back(r.rt_ms);
    }
    std::vector<PairLabel> out;
    out.reserve(groups.size());
    for (auto& [key, a] : groups) {
        if (a.rts.empty()) continue;  // correct-only RT with no correct response
        PairLabel p;
        p.key = key;
        p.n = a.n;
        p.n_correct = a.correct;
        p.mean_accuracy = static_cast<double>(a.correct) / static_cast<double>(a.n);
        p.mean_rt_ms = sorted_mean(std::move(a.rts));
        out.push_back(std::move(p));
    }
    return out;
}

ImageLabelResult image_labels(const std::vector<PairLabel>& pairs, const ImageLabelOptions& options,
                              const std::vector<std::string>& expected_images) {
    if (pairs.empty()) fail(ErrorCode::insufficient_data, "image_labels needs at least one pair");
    struct Acc {
        std::vector<std::pair<double, double>> values;  // (weight*acc, weight*rt)
        std::vector<double> weights;
    };
    std::map<std::string, Acc> per_image;
    for (const auto& p : pairs) {
        const double w = options.weight_by_responses ? static_cast<double>(p.n) : 1.0;
        auto add = [&](const std::string& id) {
            Acc& a = per_image[id];
            a.values.emplace_back(w * p.mean_accuracy, w * p.mean_rt_ms);
            a.weights.push_back(w);
        };
        add(p.key.image_lo);
        if (p.key.image_hi != p.key.image_lo) add(p.key.image_hi);
    }

    ImageLabelResult result;
    for (auto& [id, a] : per_image) {
        std::sort(a.values.begin(), a.values.end());
        std::sort(a.weights.begin(), a.weights.end());
        double sa = 0.0, sr = 0.0, sw = 0.0;
        for (const auto& [va, vr] : a.values) {
            sa += va;
            sr += vr;
        }
        for (double w : a.weights) sw += w;
        result.labels.push_back(ImageLabel{id, sa / sw, sr / sw, a.values.size()});
    }
    for (const auto& id : expected_images) {
        if (!per_image.count(id)) result.excluded.push_back(id);
    }
    std::sort(result.excluded.begin(), result.excluded.end());
    return result;
}

std::string to_string(MeasurementKind k) { return k == MeasurementKind::rt ? "rt" : "accuracy"; }

MeasurementKind measurement_kind_from_string(const std::string& s) {
    if (s == "rt") return MeasurementKind::rt;
    if (s == "accuracy") return MeasurementKind::accuracy;
    fail(ErrorCode::invalid_parameter, "unknown measurement kind '" + s + "'");
}

std::optional<double> NormalizedLabelTable::find(const std::string& image_id) const {
    auto it = entries.find(image_id);
    if (it == entries.end()) return std::nullopt;
    return it->second;
}

double NormalizedLabelTable::mean() const {
    if (entries.empty()) return 0.0;
    double s = 0.0;
    for (const auto& [_, v] : entries) s += v;
    return s / static_cast<double>(entries.size());
}

nlohmann::json NormalizedLabelTable::to_json() const {
    return {{"schema_version", 1}, {"measurement_kind", to_string(kind)}, {"m", m}, {"entries", entries}};
}

NormalizedLabelTable NormalizedLabelTable::from_json(const nlohmann::json& j) {
    NormalizedLabelTable t;
    t.kind = measurement_kind_from_string(j.at("measurement_kind").get<std::string>());
    t.m = j.value("m", 1.0);
    t.entries = j.at("entries").get<std::map<std::string, double>>();
    for (const auto& [id, v] : t.entries) {
        if (!(v >= 0.0 && v <= t.m)) fail(ErrorCode::invalid_label, "label for '" + id + "' outside [0, m]");
    }
    return t;
}

void NormalizedLabelTable::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(ErrorCode::io_error, "cannot write " + path.string());
    out << to_json().dump(2) << '\n';
}

NormalizedLabelTable NormalizedLabelTable::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::io_error, "cannot open " + path.string());
    return from_json(nlohmann::json::parse(in));
}

namespace {

NormalizedLabelTable min_max(const std::map<std::string, double>& raw, MeasurementKind kind) {
    if (raw.empty()) fail(ErrorCode::insufficient_data, "no labels to normalize");
    double lo = raw.begin()->second, hi = lo;
    for (const auto& [_, v] : raw) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (!(hi > lo)) {
        fail(ErrorCode::degenerate_distribution,
             "all " + to_string(kind) + " labels are identical; penalty weights would be constant");
    }
    NormalizedLabelTable t;
    t.kind = kind;
    t.m = 1.0;
    for (const auto& [id, v] : raw) t.entries.emplace(id, (v - lo) / (hi - lo));
    return t;
}

}  // namespace

NormalizedLabelTable normalize_labels(const std::vector<ImageLabel>& labels, MeasurementKind kind) {
    std::map<std::string, double> raw;
    for (const auto& l : labels) raw.emplace(l.image_id, kind == MeasurementKind::rt ? l.r_rt_ms : l.r_accuracy);
    return min_max(raw, kind);
}

NormalizedLabelTable normalize_table(const NormalizedLabelTable& table) {
    return min_max(table.entries, table.kind);
}

nlohmann::json to_json(const PairLabel& p) {
    return {{"schema_version", 1},
            {"image_a", p.key.image_lo},
            {"image_b", p.key.image_hi},
            {"level", p.key.level},
            {"n", p.n},
            {"n_correct", p.n_correct},
            {"mean_accuracy", p.mean_accuracy},
            {"mean_rt_ms", p.mean_rt_ms}};
}

PairLabel pair_label_from_json(const nlohmann::json& j) {
    PairLabel p;
    p.key = PairKey::of(j.at("image_a").get<std::string>(), j.at("image_b").get<std::string>(),
                        j.at("level").get<int>());
    p.n = j.at("n").get<std::size_t>();
    p.n_correct = j.value("n_correct", std::size_t{0});
    p.mean_accuracy = j.at("mean_accuracy").get<double>();
    p.mean_rt_ms = j.at("mean_rt_ms").get<double>();
    return p;
}

nlohmann::json to_json(const ImageLabel& l) {
    return {{"schema_version", 1},
            {"image_id", l.image_id},
            {"r_accuracy", l.r_accuracy},
            {"r_rt_ms", l.r_rt_ms},
            {"n_pairs", l.n_pairs}};
}

ImageLabel image_label_from_json(const nlohmann::json& j) {
    return ImageLabel{j.at("image_id").get<std::string>(), j.at("r_accuracy").get<double>(),
                      j.at("r_rt_ms").get<double>(), j.at("n_pairs").get<std::size_t>()};
}

}  // namespace psyphy
