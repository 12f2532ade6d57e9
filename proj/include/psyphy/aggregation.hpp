#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "psyphy/response.hpp"

namespace psyphy {

struct PruneConfig {
    std::size_t trials_per_session = kDefaultTrialsPerSession;
    double min_median_rt_ms = 300.0;
    double chance_alpha = 0.01;  // one-sided binomial test against p = 0.5
};

enum class PruneReason { incomplete, too_fast, at_chance };
std::string to_string(PruneReason r);

struct PrunedSession {
    std::string session_id;
    std::vector<PruneReason> reasons;
    std::size_t n_responses = 0;
    double accuracy = 0.0;
    double median_rt_ms = 0.0;
    double binomial_p = 1.0;
};

struct PruneReport {
    std::size_t sessions_in = 0;
    std::size_t sessions_kept = 0;
    std::size_t records_in = 0;
    std::size_t records_kept = 0;
    std::vector<PrunedSession> removed;

    nlohmann::json to_json() const;
    std::string to_text() const;
};

// Removes whole sessions that are incomplete, implausibly fast, or not
// significantly above chance. Surviving records keep their original order.
std::pair<ResponseLog, PruneReport> prune(const ResponseLog& log, const PruneConfig& rules = {});

// Unordered stimulus pair plus perturbation level.
struct PairKey {
    std::string image_lo;
    std::string image_hi;
    int level = 0;

    static PairKey of(const std::string& a, const std::string& b, int level);
    friend auto operator<=>(const PairKey&, const PairKey&) = default;
};

struct PairLabel {
    PairKey key;
    std::size_t n = 0;
    std::size_t n_correct = 0;
    double mean_accuracy = 0.0;  // n_correct / n
    double mean_rt_ms = 0.0;
};

struct AggregateOptions {
    bool correct_only_rt = false;  // mean RT over correct responses only
};

// Sorted by key.
std::vector<PairLabel> aggregate_pairs(const ResponseLog& log, const AggregateOptions& options = {});

struct ImageLabel {
    std::string image_id;
    double r_accuracy = 0.0;
    double r_rt_ms = 0.0;
    std::size_t n_pairs = 0;
};

struct ImageLabelOptions {
    bool weight_by_responses = false;
};

struct ImageLabelResult {
    std::vector<ImageLabel> labels;  // sorted by image_id
    std::vector<std::string> excluded;  // requested images that appear in no pair
};

ImageLabelResult image_labels(const std::vector<PairLabel>& pairs,
                              const ImageLabelOptions& options = {},
                              const std::vector<std::string>& expected_images = {});

enum class MeasurementKind { rt, accuracy };
std::string to_string(MeasurementKind k);
MeasurementKind measurement_kind_from_string(const std::string& s);

struct NormalizedLabelTable {
    MeasurementKind kind = MeasurementKind::rt;
    double m = 1.0;
    std::map<std::string, double> entries;  // image_id -> r in [0,1]

    std::optional<double> find(const std::string& image_id) const;
    double mean() const;

    nlohmann::json to_json() const;
    static NormalizedLabelTable from_json(const nlohmann::json& j);
    void save(const std::filesystem::path& path) const;
    static NormalizedLabelTable load(const std::filesystem::path& path);
};

// Min-max normalization to [0,1]. Throws degenerate_distribution when all
// values are equal.
NormalizedLabelTable normalize_labels(const std::vector<ImageLabel>& labels, MeasurementKind kind);
// Same, over an existing table (idempotent on an already-normalized table).
NormalizedLabelTable normalize_table(const NormalizedLabelTable& table);

nlohmann::json to_json(const PairLabel& p);
PairLabel pair_label_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ImageLabel& l);
ImageLabel image_label_from_json(const nlohmann::json& j);

}  // namespace psyphy
