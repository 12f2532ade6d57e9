#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "psyphy/aggregation.hpp"
#include "psyphy/observer.hpp"
#include "psyphy/stats.hpp"
#include "psyphy/trainer.hpp"
#include "psyphy/trials.hpp"

namespace psyphy {

// Images that every pruned session skipped fall back to the table mean.
inline TrainConfig suite_train_defaults() {
    TrainConfig t;
    t.missing_labels = MissingLabelPolicy::table_mean;
    return t;
}

struct SuiteConfig {
    std::string experiment_id = "default";
    // Dataset: an existing class-foldered root, or a synthetic one generated
    // under the output directory when `dataset_root` is empty.
    std::filesystem::path dataset_root;
    std::size_t n_classes = 20;
    std::size_t n_instances = 20;
    GlyphOptions glyphs;

    std::vector<ConditionId> conditions = kAllConditions;
    std::vector<LossKind> loss_kinds = kAllLossKinds;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::uint64_t seed = 2022;

    std::size_t n_participants = 200;
    std::size_t trials_per_session = kDefaultTrialsPerSession;
    std::size_t target_exposure = kDefaultTargetExposure;
    PerturbationSchedule schedule;
    ObserverParams observer;
    PruneConfig prune;
    double split_ratio = 0.8;
    TrainConfig train = suite_train_defaults();

    nlohmann::json to_json() const;
    static SuiteConfig from_json(const nlohmann::json& j);
};

nlohmann::json to_json(const ObserverParams& p);
ObserverParams observer_params_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PruneConfig& p);
PruneConfig prune_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GlyphOptions& g);
GlyphOptions glyph_options_from_json(const nlohmann::json& j);

struct CellResult {
    ConditionId condition = ConditionId::control;
    LossKind loss_kind = LossKind::cross_entropy;
    std::vector<RunResult> runs;
    stats::MeanSe train;
    stats::MeanSe test;
    stats::Interval test_ci;
    std::string error;  // non-empty when the cell failed
};

struct ConditionSummary {
    ConditionId condition = ConditionId::control;
    stats::AnovaResult anova;  // test accuracy across loss-kind groups
    PruneReport prune;
    std::size_t labelled_images = 0;
    std::size_t training_images = 0;
};

struct ResultsTable {
    std::vector<CellResult> cells;  // condition-major, loss kind minor
    std::vector<ConditionSummary> conditions;

    const CellResult& cell(ConditionId c, LossKind k) const;
    nlohmann::json to_json() const;
    std::string to_text() const;
};

using ProgressFn = std::function<void(const std::string&)>;

// Runs the condition x loss-kind x seed grid: plan trials, simulate the
// cohort, prune, aggregate labels, then train every cell for every seed.
// Per-run histories are appended to `history_out` when it is non-null.
ResultsTable run_experiment_suite(const SuiteConfig& config,
                                  const std::filesystem::path& work_dir,
                                  const ProgressFn& progress = {},
                                  std::vector<nlohmann::json>* history_out = nullptr);

// Summaries for a finished grid (mean/SE, CI, per-condition ANOVA).
void summarize(ResultsTable& table);

}  // namespace psyphy
