#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "psyphy/trials.hpp"

// Manifest over fake image IDs; enough for planning and serving trials.
inline psyphy::DatasetManifest fake_manifest(std::size_t classes, std::size_t instances) {
    std::vector<std::string> cls;
    std::map<std::string, std::vector<std::string>> inst;
    for (std::size_t c = 0; c < classes; ++c) {
        const std::string name = "k" + std::to_string(100 + c);
        cls.push_back(name);
        for (std::size_t i = 0; i < instances; ++i) inst[name].push_back(name + "_" + std::to_string(100 + i));
    }
    return psyphy::DatasetManifest("/nonexistent", cls, inst);
}

inline psyphy::ExperimentPlan make_plan(const psyphy::DatasetManifest& m, const std::string& id,
                                        psyphy::ConditionId condition, std::size_t sessions,
                                        std::size_t tps, std::uint64_t seed,
                                        const std::filesystem::path& manifest_path = {}) {
    using namespace psyphy;
    ExperimentPlan plan;
    plan.experiment_id = id;
    plan.condition = ExperimentCondition::make(condition);
    plan.trials_per_session = tps;
    plan.manifest_path = manifest_path;
    plan.levels = assign_levels(m, seed);
    plan.seed = seed;
    plan.trials = generate_trials(m, plan.condition, default_pool_size(sessions, tps, 2), seed, plan.levels);
    plan.sessions = assign_sessions(plan.trials, sessions, tps, seed, plan.condition, id + "-");
    return plan;
}
