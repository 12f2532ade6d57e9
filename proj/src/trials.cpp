#include "psyphy/trials.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "psyphy/error.hpp"
#include "psyphy/rng.hpp"

namespace psyphy {

namespace fs = std::filesystem;

std::string to_string(ConditionId v) {
    switch (v) {
        case ConditionId::control: return "control";
        case ConditionId::reworded: return "reworded";
        case ConditionId::blur: return "blur";
        case ConditionId::noise: return "noise";
    }
    return "control";
}

std::string to_string(PromptVariant v) {
    return v == PromptVariant::labeling ? "labeling" : "psychophysics";
}

std::string to_string(Modality v) { return v == Modality::cursor ? "cursor" : "keypress"; }
std::string to_string(Choice v) { return v == Choice::same ? "same" : "different"; }

std::string to_string(Side v) {
    switch (v) {
        case Side::a: return "a";
        case Side::b: return "b";
        case Side::none: return "none";
    }
    return "none";
}

ConditionId condition_id_from_string(const std::string& s) {
    if (s == "control") return ConditionId::control;
    if (s == "reworded") return ConditionId::reworded;
    if (s == "blur") return ConditionId::blur;
    if (s == "noise") return ConditionId::noise;
    fail(ErrorCode::invalid_parameter, "unknown condition '" + s + "'");
}

PromptVariant prompt_variant_from_string(const std::string& s) {
    if (s == "labeling") return PromptVariant::labeling;
    if (s == "psychophysics") return PromptVariant::psychophysics;
    fail(ErrorCode::invalid_parameter, "unknown prompt variant '" + s + "'");
}

Modality modality_from_string(const std::string& s) {
    if (s == "cursor") return Modality::cursor;
    if (s == "keypress") return Modality::keypress;
    fail(ErrorCode::invalid_parameter, "unknown modality '" + s + "'");
}

Choice choice_from_string(const std::string& s) {
    if (s == "same") return Choice::same;
    if (s == "different") return Choice::different;
    fail(ErrorCode::invalid_parameter, "unknown choice '" + s + "'");
}

Side side_from_string(const std::string& s) {
    if (s == "a") return Side::a;
    if (s == "b") return Side::b;
    if (s == "none") return Side::none;
    fail(ErrorCode::invalid_parameter, "unknown side '" + s + "'");
}

ExperimentCondition ExperimentCondition::make(ConditionId id) {
    if (id == ConditionId::control) return {id, PromptVariant::labeling, Modality::cursor};
    return {id, PromptVariant::psychophysics, Modality::keypress};
}

void ExperimentCondition::validate() const {
    if (*this != make(id)) {
        fail(ErrorCode::invalid_parameter,
             "condition " + to_string(id) + " requires prompt " + to_string(make(id).prompt_variant) +
                 " with " + to_string(make(id).input_modality) + " input");
    }
}

PerturbationKind ExperimentCondition::perturbation_kind() const {
    switch (id) {
        case ConditionId::blur: return PerturbationKind::blur;
        case ConditionId::noise: return PerturbationKind::noise;
        default: return PerturbationKind::none;
    }
}

std::string instructions_for(PromptVariant variant) {
    if (variant == PromptVariant::labeling) {
        return "Are these the same character? Look at the two images and label the pair by "
               "clicking \"Same\" or \"Different\".";
    }
    return "Are these the same character? Respond as quickly and accurately as possible, "
           "without taking breaks during trials. Press F if the two images show the same "
           "symbol, J if they show different symbols.";
}

nlohmann::json to_json(const Trial& t) {
    return {
        {"schema_version", kSchemaVersion},
        {"trial_id", t.trial_id},
        {"stim_a", t.stim_a},
        {"stim_b", t.stim_b},
        {"perturbed_side", to_string(t.perturbed_side)},
        {"perturbation",
         {{"kind", to_string(t.perturbation.kind)},
          {"level", t.perturbation.level},
          {"seed", t.perturbation.seed}}},
        {"ground_truth", to_string(t.ground_truth)},
        {"self_pair", t.self_pair},
    };
}

Trial trial_from_json(const nlohmann::json& j) {
    Trial t;
    t.trial_id = j.at("trial_id").get<std::uint64_t>();
    t.stim_a = j.at("stim_a").get<std::string>();
    t.stim_b = j.at("stim_b").get<std::string>();
    t.perturbed_side = side_from_string(j.at("perturbed_side").get<std::string>());
    const auto& p = j.at("perturbation");
    t.perturbation.kind = perturbation_kind_from_string(p.at("kind").get<std::string>());
    t.perturbation.level = p.at("level").get<int>();
    t.perturbation.seed = p.at("seed").get<std::uint64_t>();
    t.perturbation.validate();
    t.ground_truth = choice_from_string(j.at("ground_truth").get<std::string>());
    t.self_pair = j.value("self_pair", false);
    return t;
}

int LevelAssignment::level_of(const std::string& image_id) const {
    auto it = levels.find(image_id);
    if (it == levels.end()) fail(ErrorCode::not_found, "no perturbation level for '" + image_id + "'");
    return it->second;
}

std::uint64_t LevelAssignment::noise_seed_of(const std::string& image_id) const {
    return stream_seed(noise_seed, image_id);
}

PerturbationSpec LevelAssignment::spec_for(const std::string& image_id, PerturbationKind kind) const {
    if (kind == PerturbationKind::none) return {};
    PerturbationSpec spec{kind, level_of(image_id), 0};
    if (kind == PerturbationKind::noise) spec.seed = noise_seed_of(image_id);
    return spec;
}

nlohmann::json LevelAssignment::to_json() const {
    return {{"noise_seed", noise_seed}, {"levels", levels}};
}

LevelAssignment LevelAssignment::from_json(const nlohmann::json& j) {
    LevelAssignment a;
    a.noise_seed = j.at("noise_seed").get<std::uint64_t>();
    a.levels = j.at("levels").get<std::map<std::string, int>>();
    return a;
}

LevelAssignment assign_levels(const DatasetManifest& manifest, std::uint64_t seed) {
    LevelAssignment a;
    a.noise_seed = stream_seed(seed, "noise");
    Engine eng = make_engine(stream_seed(seed, "levels"));
    for (const auto& id : manifest.images()) {
        a.levels[id] = 1 + static_cast<int>(uniform_index(eng, kMaxLevel));
    }
    return a;
}

std::vector<Trial> generate_trials(const DatasetManifest& manifest,
                                   const ExperimentCondition& condition, std::size_t n_trials,
                                   std::uint64_t seed) {
    if (condition.perturbation_kind() == PerturbationKind::none) {
        return generate_trials(manifest, condition, n_trials, seed, LevelAssignment{});
    }
    return generate_trials(manifest, condition, n_trials, seed, assign_levels(manifest, seed));
}

std::vector<Trial> generate_trials(const DatasetManifest& manifest,
                                   const ExperimentCondition& condition, std::size_t n_trials,
                                   std::uint64_t seed, const LevelAssignment& levels) {
    condition.validate();
    if (manifest.classes().size() < 2) {
        fail(ErrorCode::invalid_dataset,
             "2AFC trials need at least 2 classes; a 'different' draw is impossible");
    }
    if (n_trials == 0) fail(ErrorCode::invalid_parameter, "n_trials must be at least 1");

    const auto kind = condition.perturbation_kind();
    const auto& images = manifest.images();
    const auto& classes = manifest.classes();
    Engine eng = make_engine(stream_seed(seed, "trials"));

    std::vector<Trial> trials;
    trials.reserve(n_trials);
    for (std::size_t i = 0; i < n_trials; ++i) {
        Trial t;
        t.trial_id = i;
        t.stim_a = images[uniform_index(eng, images.size())];
        const std::size_t class_a = manifest.class_index_of(t.stim_a);
        const bool same = uniform01(eng) < 0.5;
        if (same) {
            const auto& pool = manifest.instances_of(classes[class_a]);
            if (pool.size() == 1) {
                t.stim_b = t.stim_a;
                t.self_pair = true;
            } else {
                // uniform over the other instances of the class
                std::size_t pos = std::find(pool.begin(), pool.end(), t.stim_a) - pool.begin();
                std::size_t pick = uniform_index(eng, pool.size() - 1);
                if (pick >= pos) ++pick;
                t.stim_b = pool[pick];
            }
            t.ground_truth = Choice::same;
        } else {
            std::size_t other = uniform_index(eng, classes.size() - 1);
            if (other >= class_a) ++other;
            const auto& pool = manifest.instances_of(classes[other]);
            t.stim_b = pool[uniform_index(eng, pool.size())];
            t.ground_truth = Choice::different;
        }
        if (kind != PerturbationKind::none) {
            t.perturbation = levels.spec_for(t.stim_a, kind);
            t.perturbed_side = Side::a;
        }
        trials.push_back(std::move(t));
    }
    return trials;
}

std::size_t default_pool_size(std::size_t n_participants, std::size_t trials_per_session,
                              std::size_t target_exposure) {
    if (target_exposure == 0) fail(ErrorCode::invalid_parameter, "target_exposure must be positive");
    const std::size_t slots = n_participants * trials_per_session;
    return std::max(trials_per_session, (slots + target_exposure - 1) / target_exposure);
}

std::vector<SessionPlan> assign_sessions(const std::vector<Trial>& trials,
                                         std::size_t n_participants,
                                         std::size_t trials_per_session, std::uint64_t seed,
                                         const ExperimentCondition& condition,
                                         const std::string& id_prefix) {
    if (trials_per_session == 0) fail(ErrorCode::invalid_parameter, "trials_per_session must be positive");
    if (trials.size() < trials_per_session) {
        fail(ErrorCode::invalid_parameter, "trial pool of " + std::to_string(trials.size()) +
                                               " is smaller than trials_per_session " +
                                               std::to_string(trials_per_session));
    }
    std::vector<SessionPlan> plans;
    plans.reserve(n_participants);
    char buf[32];
    for (std::size_t p = 0; p < n_participants; ++p) {
        SessionPlan plan;
        std::snprintf(buf, sizeof buf, "%05zu", p);
        plan.session_id = id_prefix + buf;
        plan.participant_slot = p;
        plan.condition = condition;
        plan.trials.reserve(trials_per_session);
        for (std::size_t j = 0; j < trials_per_session; ++j) {
            plan.trials.push_back(trials[(p * trials_per_session + j) % trials.size()]);
        }
        Engine eng = make_engine(stream_seed(seed, p));
        shuffle(plan.trials, eng);
        plans.push_back(std::move(plan));
    }
    return plans;
}

std::map<std::uint64_t, std::size_t> exposure_counts(const std::vector<SessionPlan>& plans) {
    std::map<std::uint64_t, std::size_t> counts;
    for (const auto& p : plans) {
        for (const auto& t : p.trials) ++counts[t.trial_id];
    }
    return counts;
}

nlohmann::json to_json(const SessionPlan& s) {
    std::vector<std::uint64_t> ids;
    ids.reserve(s.trials.size());
    for (const auto& t : s.trials) ids.push_back(t.trial_id);
    return {
        {"schema_version", kSchemaVersion},
        {"session_id", s.session_id},
        {"participant_slot", s.participant_slot},
        {"condition", to_string(s.condition.id)},
        {"trial_ids", ids},
    };
}

SessionPlan session_from_json(const nlohmann::json& j, const std::map<std::uint64_t, Trial>& pool) {
    SessionPlan s;
    s.session_id = j.at("session_id").get<std::string>();
    s.participant_slot = j.at("participant_slot").get<std::size_t>();
    s.condition = ExperimentCondition::make(condition_id_from_string(j.at("condition").get<std::string>()));
    for (auto id : j.at("trial_ids").get<std::vector<std::uint64_t>>()) {
        auto it = pool.find(id);
        if (it == pool.end()) {
            fail(ErrorCode::invalid_input, "session " + s.session_id + " references unknown trial " +
                                               std::to_string(id));
        }
        s.trials.push_back(it->second);
    }
    return s;
}

nlohmann::json schedule_to_json(const PerturbationSchedule& s) {
    return {{"blur_sigma", s.blur_sigma}, {"noise_sigma", s.noise_sigma}};
}

PerturbationSchedule schedule_from_json(const nlohmann::json& j) {
    PerturbationSchedule s;
    if (j.contains("blur_sigma")) s.blur_sigma = j.at("blur_sigma").get<std::array<double, kMaxLevel>>();
    if (j.contains("noise_sigma")) s.noise_sigma = j.at("noise_sigma").get<std::array<double, kMaxLevel>>();
    for (double v : s.blur_sigma) {
        if (!(v > 0.0)) fail(ErrorCode::invalid_parameter, "blur sigma schedule must be positive");
    }
    for (double v : s.noise_sigma) {
        if (!(v >= 0.0)) fail(ErrorCode::invalid_parameter, "noise sigma schedule must be non-negative");
    }
    return s;
}

void ExperimentPlan::save(const fs::path& dir) const {
    fs::create_directories(dir);
    nlohmann::json meta{
        {"schema_version", kSchemaVersion},
        {"experiment_id", experiment_id},
        {"condition",
         {{"id", to_string(condition.id)},
          {"prompt_variant", to_string(condition.prompt_variant)},
          {"input_modality", to_string(condition.input_modality)}}},
        {"trials_per_session", trials_per_session},
        {"manifest_path", manifest_path.string()},
        {"schedule", schedule_to_json(schedule)},
        {"levels", levels.to_json()},
        {"seed", seed},
        {"n_trials", trials.size()},
        {"n_sessions", sessions.size()},
    };
    {
        std::ofstream out(dir / "experiment.json", std::ios::trunc);
        if (!out) fail(ErrorCode::io_error, "cannot write " + (dir / "experiment.json").string());
        out << meta.dump(2) << '\n';
    }
    {
        std::ofstream out(dir / "trials.jsonl", std::ios::trunc);
        for (const auto& t : trials) out << to_json(t).dump() << '\n';
    }
    {
        std::ofstream out(dir / "sessions.jsonl", std::ios::trunc);
        for (const auto& s : sessions) out << to_json(s).dump() << '\n';
    }
}

ExperimentPlan ExperimentPlan::load(const fs::path& dir) {
    std::ifstream meta_in(dir / "experiment.json");
    if (!meta_in) fail(ErrorCode::not_found, "no experiment.json in " + dir.string());
    const auto meta = nlohmann::json::parse(meta_in);

    ExperimentPlan plan;
    plan.experiment_id = meta.at("experiment_id").get<std::string>();
    const auto& c = meta.at("condition");
    plan.condition.id = condition_id_from_string(c.at("id").get<std::string>());
    plan.condition.prompt_variant = prompt_variant_from_string(c.at("prompt_variant").get<std::string>());
    plan.condition.input_modality = modality_from_string(c.at("input_modality").get<std::string>());
    plan.condition.validate();
    plan.trials_per_session = meta.at("trials_per_session").get<std::size_t>();
    plan.manifest_path = meta.value("manifest_path", std::string{});
    plan.schedule = schedule_from_json(meta.value("schedule", nlohmann::json::object()));
    if (meta.contains("levels")) plan.levels = LevelAssignment::from_json(meta.at("levels"));
    plan.seed = meta.value("seed", std::uint64_t{0});

    std::map<std::uint64_t, Trial> pool;
    {
        std::ifstream in(dir / "trials.jsonl");
        if (!in) fail(ErrorCode::not_found, "no trials.jsonl in " + dir.string());
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            Trial t = trial_from_json(nlohmann::json::parse(line));
            pool.emplace(t.trial_id, t);
            plan.trials.push_back(std::move(t));
        }
    }
    {
        std::ifstream in(dir / "sessions.jsonl");
        if (!in) fail(ErrorCode::not_found, "no sessions.jsonl in " + dir.string());
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            plan.sessions.push_back(session_from_json(nlohmann::json::parse(line), pool));
        }
    }
    return plan;
}

}  // namespace psyphy
