#include "psyphy/suite.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "psyphy/error.hpp"
#include "psyphy/rng.hpp"

namespace psyphy {

nlohmann::json to_json(const ObserverParams& p) {
    return {{"lapse", p.lapse},
            {"slope", p.slope},
            {"threshold", p.threshold},
            {"rt_base", p.rt_base},
            {"rt_gain", p.rt_gain},
            {"rt_noise_sigma", p.rt_noise_sigma},
            {"cursor_rt_noise_sigma", p.cursor_rt_noise_sigma}};
}

ObserverParams observer_params_from_json(const nlohmann::json& j) {
    ObserverParams p;
    p.lapse = j.value("lapse", p.lapse);
    p.slope = j.value("slope", p.slope);
    p.threshold = j.value("threshold", p.threshold);
    p.rt_base = j.value("rt_base", p.rt_base);
    p.rt_gain = j.value("rt_gain", p.rt_gain);
    p.rt_noise_sigma = j.value("rt_noise_sigma", p.rt_noise_sigma);
    p.cursor_rt_noise_sigma = j.value("cursor_rt_noise_sigma", p.cursor_rt_noise_sigma);
    p.validate();
    return p;
}

nlohmann::json to_json(const PruneConfig& p) {
    return {{"trials_per_session", p.trials_per_session},
            {"min_median_rt_ms", p.min_median_rt_ms},
            {"chance_alpha", p.chance_alpha}};
}

PruneConfig prune_config_from_json(const nlohmann::json& j) {
    PruneConfig p;
    p.trials_per_session = j.value("trials_per_session", p.trials_per_session);
    p.min_median_rt_ms = j.value("min_median_rt_ms", p.min_median_rt_ms);
    p.chance_alpha = j.value("chance_alpha", p.chance_alpha);
    return p;
}

nlohmann::json to_json(const GlyphOptions& g) {
    return {{"size", g.size},
            {"min_strokes", g.min_strokes},
            {"max_strokes", g.max_strokes},
            {"jitter", g.jitter},
            {"thickness", g.thickness}};
}

GlyphOptions glyph_options_from_json(const nlohmann::json& j) {
    GlyphOptions g;
    g.size = j.value("size", g.size);
    g.min_strokes = j.value("min_strokes", g.min_strokes);
    g.max_strokes = j.value("max_strokes", g.max_strokes);
    g.jitter = j.value("jitter", g.jitter);
    g.thickness = j.value("thickness", g.thickness);
    return g;
}

nlohmann::json SuiteConfig::to_json() const {
    nlohmann::json conds = nlohmann::json::array();
    for (auto c : conditions) conds.push_back(psyphy::to_string(c));
    nlohmann::json losses = nlohmann::json::array();
    for (auto k : loss_kinds) losses.push_back(psyphy::to_string(k));
    return {{"experiment_id", experiment_id},
            {"dataset_root", dataset_root.string()},
            {"n_classes", n_classes},
            {"n_instances", n_instances},
            {"glyphs", psyphy::to_json(glyphs)},
            {"conditions", conds},
            {"loss_kinds", losses},
            {"seeds", seeds},
            {"seed", seed},
            {"n_participants", n_participants},
            {"trials_per_session", trials_per_session},
            {"target_exposure", target_exposure},
            {"schedule", schedule_to_json(schedule)},
            {"observer", psyphy::to_json(observer)},
            {"prune", psyphy::to_json(prune)},
            {"split_ratio", split_ratio},
            {"train", train.to_json()}};
}

SuiteConfig SuiteConfig::from_json(const nlohmann::json& j) {
    SuiteConfig c;
    c.experiment_id = j.value("experiment_id", c.experiment_id);
    c.dataset_root = j.value("dataset_root", std::string());
    c.n_classes = j.value("n_classes", c.n_classes);
    c.n_instances = j.value("n_instances", c.n_instances);
    if (j.contains("glyphs")) c.glyphs = glyph_options_from_json(j.at("glyphs"));
    if (j.contains("conditions")) {
        c.conditions.clear();
        for (const auto& v : j.at("conditions")) c.conditions.push_back(condition_id_from_string(v.get<std::string>()));
    }
    if (j.contains("loss_kinds")) {
        c.loss_kinds.clear();
        for (const auto& v : j.at("loss_kinds")) c.loss_kinds.push_back(loss_kind_from_string(v.get<std::string>()));
    }
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    c.seed = j.value("seed", c.seed);
    c.n_participants = j.value("n_participants", c.n_participants);
    c.trials_per_session = j.value("trials_per_session", c.trials_per_session);
    c.target_exposure = j.value("target_exposure", c.target_exposure);
    if (j.contains("schedule")) c.schedule = schedule_from_json(j.at("schedule"));
    if (j.contains("observer")) c.observer = observer_params_from_json(j.at("observer"));
    if (j.contains("prune")) c.prune = prune_config_from_json(j.at("prune"));
    c.split_ratio = j.value("split_ratio", c.split_ratio);
    if (j.contains("train")) {
        nlohmann::json t = c.train.to_json();
        t.merge_patch(j.at("train"));
        c.train = TrainConfig::from_json(t);
    }
    return c;
}

const CellResult& ResultsTable::cell(ConditionId c, LossKind k) const {
    for (const auto& cell : cells) {
        if (cell.condition == c && cell.loss_kind == k) return cell;
    }
    fail(ErrorCode::not_found, "no cell for " + to_string(c) + " / " + to_string(k));
}

nlohmann::json ResultsTable::to_json() const {
    nlohmann::json jc = nlohmann::json::array();
    for (const auto& c : cells) {
        nlohmann::json runs = nlohmann::json::array();
        for (const auto& r : c.runs) {
            runs.push_back({{"seed", r.seed}, {"train_accuracy", r.train_accuracy}, {"test_accuracy", r.test_accuracy},
                            {"c", r.c}});
        }
        nlohmann::json o{{"condition", to_string(c.condition)},
                         {"loss_kind", to_string(c.loss_kind)},
                         {"model", display_name(c.loss_kind)},
                         {"runs", runs},
                         {"train_mean", c.train.mean},
                         {"train_se", c.train.se},
                         {"test_mean", c.test.mean},
                         {"test_se", c.test.se},
                         {"test_ci_lo", c.test_ci.lo},
                         {"test_ci_hi", c.test_ci.hi}};
        if (!c.error.empty()) o["error"] = c.error;
        jc.push_back(std::move(o));
    }
    nlohmann::json js = nlohmann::json::array();
    for (const auto& s : conditions) {
        js.push_back({{"condition", to_string(s.condition)},
                      {"anova",
                       {{"f", s.anova.f},
                        {"df_between", s.anova.df_between},
                        {"df_within", s.anova.df_within},
                        {"p", s.anova.p},
                        {"degenerate", s.anova.degenerate}}},
                      {"prune", s.prune.to_json()},
                      {"labelled_images", s.labelled_images},
                      {"training_images", s.training_images}});
    }
    return {{"schema_version", kSchemaVersion}, {"cells", jc}, {"conditions", js}};
}

namespace {

std::string fmt(const char* f, double a, double b) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

std::string pad(std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
}

}  // namespace

std::string ResultsTable::to_text() const {
    std::ostringstream os;
    const std::size_t w0 = 12, w1 = 20, w2 = 20, w3 = 20, w4 = 20;
    os << pad("Condition", w0) << pad("Model", w1) << pad("Train Accuracy", w2) << pad("Test Accuracy", w3)
       << pad("95% C.I.", w4) << "\n";
    os << std::string(w0 + w1 + w2 + w3 + w4, '-') << "\n";
    for (const auto& s : conditions) {
        bool first = true;
        for (const auto& c : cells) {
            if (c.condition != s.condition) continue;
            os << pad(first ? to_string(c.condition) : "", w0) << pad(display_name(c.loss_kind), w1);
            first = false;
            if (!c.error.empty()) {
                os << "failed: " << c.error << "\n";
                continue;
            }
            os << pad(fmt("%.4f +/- %.4f", c.train.mean, c.train.se), w2)
               << pad(fmt("%.4f +/- %.4f", c.test.mean, c.test.se), w3)
               << pad(fmt("[%.4f, %.4f]", c.test_ci.lo, c.test_ci.hi), w4) << "\n";
        }
        os << pad("", w0) << "ANOVA F(" << s.anova.df_between << ", " << s.anova.df_within << ") = " << s.anova.f
           << ", p = " << s.anova.p << (s.anova.degenerate ? " (degenerate)" : "") << "\n\n";
    }
    return os.str();
}

void summarize(ResultsTable& table) {
    for (auto& c : table.cells) {
        if (c.runs.size() < 2) continue;
        std::vector<double> tr, te;
        for (const auto& r : c.runs) {
            tr.push_back(r.train_accuracy);
            te.push_back(r.test_accuracy);
        }
        c.train = stats::mean_se(tr);
        c.test = stats::mean_se(te);
        c.test_ci = stats::confidence_interval(te);
    }
    for (auto& s : table.conditions) {
        std::vector<std::vector<double>> groups;
        for (const auto& c : table.cells) {
            if (c.condition != s.condition || !c.error.empty() || c.runs.size() < 2) continue;
            std::vector<double> te;
            for (const auto& r : c.runs) te.push_back(r.test_accuracy);
            groups.push_back(std::move(te));
        }
        s.anova = groups.size() >= 2 ? stats::one_way_anova(groups) : stats::AnovaResult{};
    }
}

namespace {

SampleSet build_samples(const DatasetManifest& manifest, const std::vector<std::string>& ids,
                        const LevelAssignment& levels, PerturbationKind kind,
                        const PerturbationSchedule& schedule) {
    SampleSet out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
        const Image img = manifest.load_image(id);
        const Image shown = perturb(img, levels.spec_for(id, kind), schedule);
        out.push_back({id, trainer_features(shown), manifest.class_index_of(id)});
    }
    return out;
}

}  // namespace

ResultsTable run_experiment_suite(const SuiteConfig& config, const std::filesystem::path& work_dir,
                                  const ProgressFn& progress, std::vector<nlohmann::json>* history_out) {
    if (config.conditions.empty() || config.loss_kinds.empty()) {
        fail(ErrorCode::invalid_parameter, "suite needs at least one condition and one loss kind");
    }
    if (config.seeds.empty()) fail(ErrorCode::invalid_parameter, "suite needs at least one seed");
    config.observer.validate();
    auto say = [&](const std::string& m) {
        if (progress) progress(m);
    };

    std::filesystem::create_directories(work_dir);
    std::filesystem::path root = config.dataset_root;
    if (root.empty()) {
        root = work_dir / "dataset";
        if (!std::filesystem::exists(root)) {
            say("writing synthetic dataset to " + root.string());
            write_synthetic_dataset(root, config.n_classes, config.n_instances, config.seed, config.glyphs);
        }
    }
    const DatasetManifest manifest = load_manifest(root, config.n_classes, config.n_instances, config.seed);
    const LevelAssignment levels = assign_levels(manifest, config.seed);
    const Split sp = split(manifest, config.split_ratio, config.seed);
    const std::size_t n_classes = manifest.classes().size();

    PruneConfig prune_rules = config.prune;
    prune_rules.trials_per_session = config.trials_per_session;

    ResultsTable table;
    for (const ConditionId cid : config.conditions) {
        const std::string cname = to_string(cid);
        const auto condition = ExperimentCondition::make(cid);
        const std::uint64_t cseed = stream_seed(config.seed, cname);
        const std::filesystem::path cdir = work_dir / cname;
        std::filesystem::create_directories(cdir);

        ConditionSummary summary;
        summary.condition = cid;
        summary.training_images = sp.train.size();

        say(cname + ": simulating cohort");
        const std::size_t pool =
            default_pool_size(config.n_participants, config.trials_per_session, config.target_exposure);
        const auto trials = generate_trials(manifest, condition, pool, cseed, levels);
        const auto plans = assign_sessions(trials, config.n_participants, config.trials_per_session, cseed,
                                           condition, cname + "-");
        const ResponseLog log = run_simulated_cohort(plans, config.observer, cseed);
        write_log(cdir / "responses.jsonl", log);

        auto [kept, report] = prune(log, prune_rules);
        summary.prune = report;
        const auto pairs = aggregate_pairs(kept);
        const auto labels = image_labels(pairs, {}, manifest.images());
        summary.labelled_images = labels.labels.size();

        std::map<MeasurementKind, NormalizedLabelTable> tables;
        std::map<MeasurementKind, std::string> table_errors;
        for (auto kind : {MeasurementKind::rt, MeasurementKind::accuracy}) {
            try {
                tables[kind] = normalize_labels(labels.labels, kind);
                tables[kind].save(cdir / ("labels_" + to_string(kind) + ".json"));
            } catch (const Error& e) {
                table_errors[kind] = e.what();
            }
        }

        say(cname + ": building training inputs");
        const auto kind = condition.perturbation_kind();
        const SampleSet train_set = build_samples(manifest, sp.train, levels, kind, config.schedule);
        const SampleSet test_set = build_samples(manifest, sp.test, levels, kind, config.schedule);

        for (const LossKind lk : config.loss_kinds) {
            CellResult cell;
            cell.condition = cid;
            cell.loss_kind = lk;
            TrainConfig tc = config.train;
            tc.loss_kind = lk;
            tc.labels.reset();
            if (lk != LossKind::cross_entropy) {
                const auto mk = lk == LossKind::psychophysical_rt ? MeasurementKind::rt : MeasurementKind::accuracy;
                if (auto it = tables.find(mk); it != tables.end()) {
                    tc.labels = it->second;
                } else {
                    cell.error = table_errors[mk];
                }
            }
            for (const std::uint64_t s : config.seeds) {
                if (!cell.error.empty()) break;
                tc.seed = s;
                say(cname + " / " + to_string(lk) + " / seed " + std::to_string(s));
                try {
                    auto out = train(train_set, test_set, n_classes, tc);
                    if (history_out) {
                        nlohmann::json h = out.result.to_json();
                        h["condition"] = cname;
                        h["loss_kind"] = to_string(lk);
                        history_out->push_back(std::move(h));
                    }
                    cell.runs.push_back(std::move(out.result));
                } catch (const Error& e) {
                    cell.error = "seed " + std::to_string(s) + ": " + e.what();
                }
            }
            table.cells.push_back(std::move(cell));
        }
        table.conditions.push_back(std::move(summary));
    }
    summarize(table);
    return table;
}

}  // namespace psyphy
