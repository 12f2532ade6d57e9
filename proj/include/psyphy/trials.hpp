#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "psyphy/dataset.hpp"
#include "psyphy/stimulus.hpp"

namespace psyphy {

inline constexpr int kSchemaVersion = 1;

enum class ConditionId { control, reworded, blur, noise };
enum class PromptVariant { labeling, psychophysics };
enum class Modality { cursor, keypress };
enum class Choice { same, different };
enum class Side { a, b, none };

std::string to_string(ConditionId v);
std::string to_string(PromptVariant v);
std::string to_string(Modality v);
std::string to_string(Choice v);
std::string to_string(Side v);
ConditionId condition_id_from_string(const std::string& s);
PromptVariant prompt_variant_from_string(const std::string& s);
Modality modality_from_string(const std::string& s);
Choice choice_from_string(const std::string& s);
Side side_from_string(const std::string& s);

struct ExperimentCondition {
    ConditionId id = ConditionId::control;
    PromptVariant prompt_variant = PromptVariant::labeling;
    Modality input_modality = Modality::cursor;

    // control is (labeling, cursor); every other condition is
    // (psychophysics, keypress).
    static ExperimentCondition make(ConditionId id);
    void validate() const;
    PerturbationKind perturbation_kind() const;

    friend bool operator==(const ExperimentCondition&, const ExperimentCondition&) = default;
};

inline const std::vector<ConditionId> kAllConditions{ConditionId::control, ConditionId::reworded,
                                                     ConditionId::blur, ConditionId::noise};

std::string instructions_for(PromptVariant variant);

struct Trial {
    std::uint64_t trial_id = 0;
    std::string stim_a;
    std::string stim_b;
    Side perturbed_side = Side::none;
    PerturbationSpec perturbation;
    Choice ground_truth = Choice::same;
    bool self_pair = false;  // only when the class has a single instance

    int level() const noexcept { return perturbation.level; }
    friend bool operator==(const Trial&, const Trial&) = default;
};

nlohmann::json to_json(const Trial& t);
Trial trial_from_json(const nlohmann::json& j);

// Fixed perturbation level per image (1..5) plus a per-image noise seed, so a
// perturbed stimulus is the same picture in every trial that shows it and in
// the classifier's training set.
struct LevelAssignment {
    std::map<std::string, int> levels;
    std::uint64_t noise_seed = 0;

    int level_of(const std::string& image_id) const;
    std::uint64_t noise_seed_of(const std::string& image_id) const;
    PerturbationSpec spec_for(const std::string& image_id, PerturbationKind kind) const;

    nlohmann::json to_json() const;
    static LevelAssignment from_json(const nlohmann::json& j);
};

LevelAssignment assign_levels(const DatasetManifest& manifest, std::uint64_t seed);

std::vector<Trial> generate_trials(const DatasetManifest& manifest,
                                   const ExperimentCondition& condition, std::size_t n_trials,
                                   std::uint64_t seed);
std::vector<Trial> generate_trials(const DatasetManifest& manifest,
                                   const ExperimentCondition& condition, std::size_t n_trials,
                                   std::uint64_t seed, const LevelAssignment& levels);

inline constexpr std::size_t kDefaultTrialsPerSession = 100;
inline constexpr std::size_t kDefaultParticipants = 1000;
inline constexpr std::size_t kDefaultTargetExposure = 10;

std::size_t default_pool_size(std::size_t n_participants, std::size_t trials_per_session,
                              std::size_t target_exposure = kDefaultTargetExposure);

struct SessionPlan {
    std::string session_id;
    std::size_t participant_slot = 0;
    ExperimentCondition condition;
    std::vector<Trial> trials;
};

std::vector<SessionPlan> assign_sessions(const std::vector<Trial>& trials,
                                         std::size_t n_participants,
                                         std::size_t trials_per_session, std::uint64_t seed,
                                         const ExperimentCondition& condition = {},
                                         const std::string& id_prefix = "s");

// Per-trial exposure counts over all plans, keyed by trial_id.
std::map<std::uint64_t, std::size_t> exposure_counts(const std::vector<SessionPlan>& plans);

nlohmann::json to_json(const SessionPlan& s);
SessionPlan session_from_json(const nlohmann::json& j,
                              const std::map<std::uint64_t, Trial>& pool);

// Everything needed to host or simulate one experiment; persisted as a
// directory holding experiment.json, trials.jsonl, sessions.jsonl.
struct ExperimentPlan {
    std::string experiment_id;
    ExperimentCondition condition;
    std::size_t trials_per_session = kDefaultTrialsPerSession;
    std::filesystem::path manifest_path;
    PerturbationSchedule schedule;
    LevelAssignment levels;
    std::uint64_t seed = 0;
    std::vector<Trial> trials;
    std::vector<SessionPlan> sessions;

    void save(const std::filesystem::path& dir) const;
    static ExperimentPlan load(const std::filesystem::path& dir);
};

nlohmann::json schedule_to_json(const PerturbationSchedule& s);
PerturbationSchedule schedule_from_json(const nlohmann::json& j);

}  // namespace psyphy
