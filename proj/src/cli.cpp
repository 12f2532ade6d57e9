#include "psyphy/cli.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <pthread.h>

#include "psyphy/aggregation.hpp"
#include "psyphy/error.hpp"
#include "psyphy/http_server.hpp"
#include "psyphy/observer.hpp"
#include "psyphy/rng.hpp"
#include "psyphy/service.hpp"
#include "psyphy/stats.hpp"
#include "psyphy/suite.hpp"
#include "psyphy/trainer.hpp"

namespace psyphy {
namespace {

namespace fs = std::filesystem;

struct Context {
    std::string config_path;
    std::string out = "out";
    std::string experiment_id;
    std::uint64_t seed = 0;
    bool force = false;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* id_opt = nullptr;

    SuiteConfig cfg;
    fs::path dir;

    void resolve() {
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) fail(ErrorCode::io_error, "cannot read config " + config_path);
            nlohmann::json j;
            try {
                in >> j;
            } catch (const nlohmann::json::exception& e) {
                fail(ErrorCode::invalid_input, "config " + config_path + ": " + e.what());
            }
            cfg = SuiteConfig::from_json(j);
            if (j.contains("out_dir") && out == "out") out = j.at("out_dir").get<std::string>();
        }
        if (seed_opt->count() > 0) cfg.seed = seed;
        if (id_opt->count() > 0) cfg.experiment_id = experiment_id;
        dir = fs::path(out) / cfg.experiment_id;
        fs::create_directories(dir);
    }

    fs::path dataset_manifest() const { return dir / "dataset_manifest.json"; }
    fs::path plan_dir(ConditionId c) const { return dir / "plans" / to_string(c); }
};

// Keeps <out>/<id>/manifest.json listing every produced file.
void record_output(const Context& ctx, const fs::path& path, const std::string& subcommand) {
    const fs::path mpath = ctx.dir / "manifest.json";
    nlohmann::json m{{"experiment_id", ctx.cfg.experiment_id}, {"files", nlohmann::json::object()}};
    if (fs::exists(mpath)) {
        std::ifstream in(mpath);
        in >> m;
    }
    const auto rel = fs::relative(path, ctx.dir).generic_string();
    m["files"][rel] = {{"subcommand", subcommand}, {"seed", ctx.cfg.seed}};
    const fs::path tmp = mpath.string() + ".tmp";
    {
        std::ofstream out(tmp);
        out << m.dump(2) << "\n";
    }
    fs::rename(tmp, mpath);
}

bool skip_existing(const Context& ctx, const fs::path& path) {
    if (!ctx.force && fs::exists(path)) {
        std::cout << path.string() << " exists; skipping (pass --force to overwrite)\n";
        return true;
    }
    return false;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) fail(ErrorCode::io_error, "cannot write " + path.string());
    out << j.dump(2) << "\n";
}

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::not_found, "missing input " + path.string());
    nlohmann::json j;
    in >> j;
    return j;
}

DatasetManifest load_dataset(const Context& ctx) {
    if (!fs::exists(ctx.dataset_manifest())) {
        fail(ErrorCode::not_found, "no dataset manifest at " + ctx.dataset_manifest().string() + "; run `ingest` first");
    }
    return DatasetManifest::load(ctx.dataset_manifest());
}

std::vector<ConditionId> parse_conditions(const std::vector<std::string>& names, const SuiteConfig& cfg) {
    if (names.empty()) return cfg.conditions;
    std::vector<ConditionId> out;
    for (const auto& n : names) {
        if (n == "all") return kAllConditions;
        out.push_back(condition_id_from_string(n));
    }
    return out;
}

struct ObserverFlags {
    std::optional<double> lapse, slope, threshold, rt_base, rt_gain, rt_noise;

    void add(CLI::App* sub) {
        sub->add_option("--lapse", lapse, "observer lapse rate");
        sub->add_option("--slope", slope, "psychometric slope k");
        sub->add_option("--threshold", threshold, "psychometric midpoint level");
        sub->add_option("--rt-base", rt_base, "RT at level 0 (ms)");
        sub->add_option("--rt-gain", rt_gain, "RT increase per level (ms)");
        sub->add_option("--rt-noise", rt_noise, "log-space RT jitter");
    }
    ObserverParams apply(ObserverParams p) const {
        if (lapse) p.lapse = *lapse;
        if (slope) p.slope = *slope;
        if (threshold) p.threshold = *threshold;
        if (rt_base) p.rt_base = *rt_base;
        if (rt_gain) p.rt_gain = *rt_gain;
        if (rt_noise) p.rt_noise_sigma = *rt_noise;
        p.validate();
        return p;
    }
};

// ---- ingest

struct IngestArgs {
    std::string dataset_root;
    bool synthesize = false;
    std::optional<std::size_t> n_classes, n_instances;
};

int run_ingest(Context& ctx, const IngestArgs& a) {
    const fs::path out = ctx.dataset_manifest();
    if (skip_existing(ctx, out)) return 0;
    const std::size_t nc = a.n_classes.value_or(ctx.cfg.n_classes);
    const std::size_t ni = a.n_instances.value_or(ctx.cfg.n_instances);
    fs::path root = a.dataset_root.empty() ? ctx.cfg.dataset_root : fs::path(a.dataset_root);
    if (a.synthesize) {
        root = ctx.dir / "dataset";
        if (ctx.force) fs::remove_all(root);
        write_synthetic_dataset(root, nc, ni, ctx.cfg.seed, ctx.cfg.glyphs);
    }
    if (root.empty()) fail(ErrorCode::invalid_parameter, "ingest needs --dataset-root or --synthesize");
    const DatasetManifest m = load_manifest(fs::absolute(root), nc, ni, ctx.cfg.seed);
    m.save(out);
    record_output(ctx, out, "ingest");
    std::cout << "ingested " << m.classes().size() << " classes, " << m.image_count() << " images -> "
              << out.string() << "\n";
    return 0;
}

// ---- perturb

struct PerturbArgs {
    std::string kind = "blur";
    bool all_levels = false;
};

int run_perturb(Context& ctx, const PerturbArgs& a) {
    const auto kind = perturbation_kind_from_string(a.kind);
    if (kind == PerturbationKind::none) fail(ErrorCode::invalid_parameter, "perturb needs --kind blur or noise");
    const fs::path out_dir = ctx.dir / "stimuli" / a.kind;
    const fs::path index = out_dir / "index.json";
    if (skip_existing(ctx, index)) return 0;
    const DatasetManifest m = load_dataset(ctx);
    const LevelAssignment levels = assign_levels(m, ctx.cfg.seed);
    fs::create_directories(out_dir);
    nlohmann::json files = nlohmann::json::object();
    for (const auto& id : m.images()) {
        const Image img = m.load_image(id);
        std::vector<PerturbationSpec> specs;
        if (a.all_levels) {
            for (int l = 1; l <= kMaxLevel; ++l) {
                PerturbationSpec s = levels.spec_for(id, kind);
                s.level = l;
                specs.push_back(s);
            }
        } else {
            specs.push_back(levels.spec_for(id, kind));
        }
        for (const auto& s : specs) {
            const std::string sid = stimulus_id(id, s);
            const std::string name = sid + ".png";
            write_png(out_dir / name, perturb(img, s, ctx.cfg.schedule));
            files[sid] = {{"file", name}, {"image_id", id}, {"level", s.level}};
        }
    }
    write_json(ctx.dir / "levels.json", levels.to_json());
    write_json(index, {{"kind", a.kind}, {"stimuli", files}});
    record_output(ctx, ctx.dir / "levels.json", "perturb");
    record_output(ctx, index, "perturb");
    std::cout << "wrote " << files.size() << " stimuli to " << out_dir.string() << "\n";
    return 0;
}

// ---- plan

struct PlanArgs {
    std::vector<std::string> conditions;
    std::optional<std::size_t> n_participants, trials, target_exposure, pool_size;
};

int run_plan(Context& ctx, const PlanArgs& a) {
    const DatasetManifest m = load_dataset(ctx);
    const std::size_t np = a.n_participants.value_or(ctx.cfg.n_participants);
    const std::size_t tps = a.trials.value_or(ctx.cfg.trials_per_session);
    const std::size_t exposure = a.target_exposure.value_or(ctx.cfg.target_exposure);
    const std::size_t pool = a.pool_size.value_or(default_pool_size(np, tps, exposure));
    const LevelAssignment levels = assign_levels(m, ctx.cfg.seed);
    for (const auto cid : parse_conditions(a.conditions, ctx.cfg)) {
        const fs::path pdir = ctx.plan_dir(cid);
        if (skip_existing(ctx, pdir / "experiment.json")) continue;
        if (ctx.force) fs::remove_all(pdir);
        const std::string cname = to_string(cid);
        const std::uint64_t cseed = stream_seed(ctx.cfg.seed, cname);
        ExperimentPlan plan;
        plan.experiment_id = cname;
        plan.condition = ExperimentCondition::make(cid);
        plan.trials_per_session = tps;
        plan.manifest_path = fs::absolute(ctx.dataset_manifest());
        plan.schedule = ctx.cfg.schedule;
        plan.levels = levels;
        plan.seed = cseed;
        plan.trials = generate_trials(m, plan.condition, pool, cseed, levels);
        plan.sessions = assign_sessions(plan.trials, np, tps, cseed, plan.condition, cname + "-");
        plan.save(pdir);
        record_output(ctx, pdir / "experiment.json", "plan");
        std::cout << cname << ": " << plan.sessions.size() << " session plans, " << plan.trials.size()
                  << " pool trials -> " << pdir.string() << "\n";
    }
    return 0;
}

// ---- serve

struct ServeArgs {
    std::string root;
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string static_dir;
    std::string port_file;
    std::int64_t abandon_after_ms = kAbandonAfterMs;
};

int run_serve(Context& ctx, const ServeArgs& a) {
    const fs::path root = a.root.empty() ? ctx.dir / "plans" : fs::path(a.root);
    if (!fs::is_directory(root)) fail(ErrorCode::not_found, "no experiment directory at " + root.string());

    // Signals are taken by a dedicated thread so the server can stop cleanly.
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);

    ExperimentService service(root, system_clock_ms, a.abandon_after_ms);
    std::unique_ptr<StimulusStore> store;
    fs::path manifest_path = ctx.dataset_manifest();
    for (const auto& id : service.experiment_ids()) {
        if (!service.plan(id).manifest_path.empty()) {
            manifest_path = service.plan(id).manifest_path;
            break;
        }
    }
    if (fs::exists(manifest_path)) {
        const auto& ids = service.experiment_ids();
        const PerturbationSchedule schedule = ids.empty() ? ctx.cfg.schedule : service.plan(ids.front()).schedule;
        store = std::make_unique<StimulusStore>(DatasetManifest::load(manifest_path), schedule);
    }
    HttpServer server(service, store.get());
    if (!a.static_dir.empty()) server.mount_static(a.static_dir);
    const int port = server.bind(a.host, a.port);
    if (!a.port_file.empty()) {
        const fs::path tmp = a.port_file + ".tmp";
        {
            std::ofstream pf(tmp);
            pf << port << "\n";
        }
        fs::rename(tmp, a.port_file);
    }
    std::cout << "serving " << service.experiment_ids().size() << " experiment(s) on http://" << a.host << ":"
              << port << "\n"
              << std::flush;

    std::thread waiter([&server, set]() {
        int sig = 0;
        sigwait(&set, &sig);
        server.stop();
    });
    waiter.detach();
    server.listen();
    return 0;
}

// ---- simulate

struct SimulateArgs {
    std::vector<std::string> conditions;
    std::string url;
    ObserverFlags observer;
};

int run_simulate(Context& ctx, const SimulateArgs& a) {
    const ObserverParams params = a.observer.apply(ctx.cfg.observer);
    for (const auto cid : parse_conditions(a.conditions, ctx.cfg)) {
        const std::string cname = to_string(cid);
        const fs::path out = ctx.dir / "responses" / (cname + ".jsonl");
        if (skip_existing(ctx, out)) continue;
        const ExperimentPlan plan = ExperimentPlan::load(ctx.plan_dir(cid));
        CohortOptions opts;
        if (!a.url.empty()) {
            opts.route = CohortRoute::http;
            opts.base_url = a.url;
            opts.experiment_id = plan.experiment_id;
        }
        const ResponseLog log = run_simulated_cohort(plan.sessions, params, stream_seed(ctx.cfg.seed, cname), opts);
        fs::create_directories(out.parent_path());
        write_log(out, log);
        record_output(ctx, out, "simulate");
        std::cout << cname << ": " << log.size() << " responses -> " << out.string() << "\n";
    }
    return 0;
}

// ---- prune

struct PruneArgs {
    std::vector<std::string> conditions;
    std::optional<std::size_t> trials;
    std::optional<double> min_median_rt, chance_alpha;
};

int run_prune(Context& ctx, const PruneArgs& a) {
    for (const auto cid : parse_conditions(a.conditions, ctx.cfg)) {
        const std::string cname = to_string(cid);
        const fs::path out = ctx.dir / "pruned" / (cname + ".jsonl");
        const fs::path report_path = ctx.dir / "pruned" / (cname + "_report.json");
        if (skip_existing(ctx, out)) continue;
        PruneConfig rules = ctx.cfg.prune;
        rules.trials_per_session = ctx.cfg.trials_per_session;
        if (fs::exists(ctx.plan_dir(cid) / "experiment.json")) {
            rules.trials_per_session = read_json(ctx.plan_dir(cid) / "experiment.json")
                                           .value("trials_per_session", rules.trials_per_session);
        }
        if (a.trials) rules.trials_per_session = *a.trials;
        if (a.min_median_rt) rules.min_median_rt_ms = *a.min_median_rt;
        if (a.chance_alpha) rules.chance_alpha = *a.chance_alpha;
        const ResponseLog log = read_log(ctx.dir / "responses" / (cname + ".jsonl"));
        auto [kept, report] = prune(log, rules);
        fs::create_directories(out.parent_path());
        write_log(out, kept);
        write_json(report_path, report.to_json());
        record_output(ctx, out, "prune");
        record_output(ctx, report_path, "prune");
        std::cout << cname << ": " << report.to_text();
    }
    return 0;
}

// ---- aggregate

struct AggregateArgs {
    std::vector<std::string> conditions;
    bool correct_only_rt = false;
    bool weight_by_responses = false;
};

int run_aggregate(Context& ctx, const AggregateArgs& a) {
    std::vector<std::string> expected;
    if (fs::exists(ctx.dataset_manifest())) expected = DatasetManifest::load(ctx.dataset_manifest()).images();
    for (const auto cid : parse_conditions(a.conditions, ctx.cfg)) {
        const std::string cname = to_string(cid);
        const fs::path pairs_path = ctx.dir / "labels" / (cname + "_pairs.json");
        const fs::path images_path = ctx.dir / "labels" / (cname + "_images.json");
        if (skip_existing(ctx, images_path)) continue;
        const ResponseLog log = read_log(ctx.dir / "pruned" / (cname + ".jsonl"));
        const auto pairs = aggregate_pairs(log, AggregateOptions{a.correct_only_rt});
        const auto result = image_labels(pairs, ImageLabelOptions{a.weight_by_responses}, expected);
        nlohmann::json jp = nlohmann::json::array();
        for (const auto& p : pairs) jp.push_back(to_json(p));
        nlohmann::json ji = nlohmann::json::array();
        for (const auto& l : result.labels) ji.push_back(to_json(l));
        write_json(pairs_path, {{"schema_version", kSchemaVersion}, {"pairs", jp}});
        write_json(images_path, {{"schema_version", kSchemaVersion}, {"labels", ji}, {"excluded", result.excluded}});
        record_output(ctx, pairs_path, "aggregate");
        record_output(ctx, images_path, "aggregate");
        std::cout << cname << ": " << pairs.size() << " pairs, " << result.labels.size() << " labelled images, "
                  << result.excluded.size() << " excluded\n";
    }
    return 0;
}

// ---- export-labels

struct ExportArgs {
    std::vector<std::string> conditions;
    std::string kind = "both";
};

int run_export(Context& ctx, const ExportArgs& a) {
    std::vector<MeasurementKind> kinds;
    if (a.kind == "both") {
        kinds = {MeasurementKind::rt, MeasurementKind::accuracy};
    } else {
        kinds = {measurement_kind_from_string(a.kind)};
    }
    for (const auto cid : parse_conditions(a.conditions, ctx.cfg)) {
        const std::string cname = to_string(cid);
        const auto j = read_json(ctx.dir / "labels" / (cname + "_images.json"));
        std::vector<ImageLabel> labels;
        for (const auto& l : j.at("labels")) labels.push_back(image_label_from_json(l));
        for (const auto k : kinds) {
            const fs::path out = ctx.dir / "labels" / (cname + "_" + to_string(k) + ".json");
            if (skip_existing(ctx, out)) continue;
            const auto table = normalize_labels(labels, k);
            table.save(out);
            record_output(ctx, out, "export-labels");
            std::cout << cname << ": " << table.entries.size() << " normalized " << to_string(k) << " labels -> "
                      << out.string() << "\n";
        }
    }
    return 0;
}

// ---- train

struct TrainArgs {
    std::string condition = "control";
    std::string loss = "cross_entropy";
    std::string labels;
    std::string architecture;
    std::optional<std::size_t> epochs, batch_size, hidden;
    std::optional<double> lr, c, split_ratio;
    std::optional<std::uint64_t> run_seed;
    bool invert_label = false;
    bool literal_formula = false;
    std::string missing_labels;
};

SampleSet samples_for(const DatasetManifest& m, const std::vector<std::string>& ids, const LevelAssignment& levels,
                      PerturbationKind kind, const PerturbationSchedule& schedule) {
    SampleSet out;
    for (const auto& id : ids) {
        out.push_back({id, trainer_features(perturb(m.load_image(id), levels.spec_for(id, kind), schedule)),
                       m.class_index_of(id)});
    }
    return out;
}

int run_train(Context& ctx, const TrainArgs& a) {
    const auto cid = condition_id_from_string(a.condition);
    TrainConfig tc = ctx.cfg.train;
    tc.loss_kind = loss_kind_from_string(a.loss);
    if (!a.architecture.empty()) tc.architecture = architecture_from_string(a.architecture);
    if (a.epochs) tc.epochs = *a.epochs;
    if (a.batch_size) tc.batch_size = *a.batch_size;
    if (a.hidden) tc.hidden = *a.hidden;
    if (a.lr) tc.learning_rate = *a.lr;
    if (a.c) tc.c = *a.c;
    if (a.invert_label) tc.invert_label = true;
    if (a.literal_formula) tc.apply_only_when_incorrect = false;
    if (!a.missing_labels.empty()) {
        nlohmann::json j = tc.to_json();
        j["missing_labels"] = a.missing_labels;
        tc.missing_labels = TrainConfig::from_json(j).missing_labels;
    }
    tc.seed = a.run_seed.value_or(ctx.cfg.seed);
    const double ratio = a.split_ratio.value_or(ctx.cfg.split_ratio);

    const std::string stem = to_string(cid) + "_" + to_string(tc.loss_kind) + "_seed" + std::to_string(tc.seed);
    const fs::path out = ctx.dir / "runs" / (stem + ".json");
    const fs::path hist = ctx.dir / "runs" / (stem + "_history.jsonl");
    if (skip_existing(ctx, out)) return 0;

    if (tc.loss_kind != LossKind::cross_entropy) {
        const auto mk = tc.loss_kind == LossKind::psychophysical_rt ? MeasurementKind::rt : MeasurementKind::accuracy;
        const fs::path lp = a.labels.empty() ? ctx.dir / "labels" / (to_string(cid) + "_" + to_string(mk) + ".json")
                                             : fs::path(a.labels);
        tc.labels = NormalizedLabelTable::load(lp);
    }
    const DatasetManifest m = load_dataset(ctx);
    LevelAssignment levels = assign_levels(m, ctx.cfg.seed);
    if (fs::exists(ctx.plan_dir(cid) / "experiment.json")) levels = ExperimentPlan::load(ctx.plan_dir(cid)).levels;
    const Split sp = split(m, ratio, ctx.cfg.seed);
    const auto kind = ExperimentCondition::make(cid).perturbation_kind();
    const SampleSet train_set = samples_for(m, sp.train, levels, kind, ctx.cfg.schedule);
    const SampleSet test_set = samples_for(m, sp.test, levels, kind, ctx.cfg.schedule);

    const auto res = train(train_set, test_set, m.classes().size(), tc);
    nlohmann::json j = res.result.to_json();
    j["condition"] = to_string(cid);
    j["config"] = tc.to_json();
    j["split_ratio"] = ratio;
    write_json(out, j);
    {
        std::ofstream h(hist);
        for (const auto& e : res.result.history) {
            h << nlohmann::json{{"epoch", e.epoch}, {"mean_loss", e.mean_loss}, {"train_accuracy", e.train_accuracy}}
                     .dump()
              << "\n";
        }
    }
    record_output(ctx, out, "train");
    record_output(ctx, hist, "train");
    std::cout << stem << ": train " << res.result.train_accuracy << ", test " << res.result.test_accuracy << "\n";
    return 0;
}

// ---- suite

struct SuiteArgs {
    std::vector<std::uint64_t> seeds;
    std::optional<std::size_t> n_participants, epochs;
    bool quiet = false;
};

int run_suite(Context& ctx, const SuiteArgs& a) {
    SuiteConfig cfg = ctx.cfg;
    if (!a.seeds.empty()) cfg.seeds = a.seeds;
    if (a.n_participants) cfg.n_participants = *a.n_participants;
    if (a.epochs) cfg.train.epochs = *a.epochs;
    const fs::path sdir = ctx.dir / "suite";
    const fs::path out = sdir / "results.json";
    if (skip_existing(ctx, out)) return 0;
    if (ctx.force) fs::remove_all(sdir);
    std::vector<nlohmann::json> history;
    ProgressFn progress;
    if (!a.quiet) progress = [](const std::string& m) { std::cerr << m << "\n"; };
    const ResultsTable table = run_experiment_suite(cfg, sdir, progress, &history);

    write_json(sdir / "config.json", cfg.to_json());
    {
        std::ofstream h(sdir / "history.jsonl");
        for (const auto& j : history) h << j.dump() << "\n";
    }
    {
        std::ofstream t(sdir / "results.txt");
        t << table.to_text();
    }
    write_json(out, table.to_json());
    for (const char* f : {"config.json", "history.jsonl", "results.txt", "results.json"}) {
        record_output(ctx, sdir / f, "suite");
    }
    std::cout << table.to_text();
    return 0;
}

// ---- stats

struct StatsArgs {
    std::string values;
    std::string groups;
    double level = 0.95;
};

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            fail(ErrorCode::invalid_input, "not a number: '" + item + "'");
        }
    }
    return out;
}

int run_stats(const StatsArgs& a) {
    nlohmann::json out;
    if (!a.values.empty()) {
        const auto v = parse_list(a.values);
        const auto ms = stats::mean_se(v);
        const auto ci = stats::confidence_interval(v, a.level);
        out["n"] = v.size();
        out["mean"] = ms.mean;
        out["se"] = ms.se;
        out["ci"] = {{"level", a.level}, {"lo", ci.lo}, {"hi", ci.hi}};
    }
    if (!a.groups.empty()) {
        std::vector<std::vector<double>> groups;
        std::stringstream ss(a.groups);
        std::string g;
        while (std::getline(ss, g, ';')) groups.push_back(parse_list(g));
        const auto r = stats::one_way_anova(groups);
        out["anova"] = {{"f", r.f},
                        {"df_between", r.df_between},
                        {"df_within", r.df_within},
                        {"p", r.p},
                        {"degenerate", r.degenerate}};
    }
    if (out.is_null()) fail(ErrorCode::invalid_parameter, "stats needs --values and/or --groups");
    std::cout << out.dump(2) << "\n";
    return 0;
}

}  // namespace

int dispatch(int argc, char** argv) {
    CLI::App app{"Psychophysics-informed training pipeline: ingest, perturb, plan, serve, simulate, prune, "
                 "aggregate, export-labels, train, suite, stats",
                 "psyphy"};
    app.fallthrough();
    app.require_subcommand(1);

    Context ctx;
    app.add_option("--config", ctx.config_path, "JSON pipeline config; flags override its values");
    app.add_option("--out", ctx.out, "output root; artifacts go under <out>/<experiment_id>/");
    ctx.id_opt = app.add_option("--experiment-id,-e", ctx.experiment_id, "experiment id (default from config)");
    ctx.seed_opt = app.add_option("--seed", ctx.seed, "master seed; determines every stochastic output");
    app.add_flag("--force", ctx.force, "overwrite existing outputs");

    IngestArgs ingest;
    auto* s_ingest = app.add_subcommand("ingest", "select classes/instances from a dataset root");
    s_ingest->add_option("--dataset-root", ingest.dataset_root, "directory of class folders of PNGs");
    s_ingest->add_flag("--synthesize", ingest.synthesize, "generate a procedural glyph dataset first");
    s_ingest->add_option("--n-classes", ingest.n_classes, "classes to select");
    s_ingest->add_option("--n-instances", ingest.n_instances, "instances per class");

    PerturbArgs perturb_args;
    auto* s_perturb = app.add_subcommand("perturb", "render blurred or noisy stimuli to PNG");
    s_perturb->add_option("--kind", perturb_args.kind, "blur or noise")->check(CLI::IsMember({"blur", "noise"}));
    s_perturb->add_flag("--all-levels", perturb_args.all_levels, "render levels 1-5 for every image");

    PlanArgs plan;
    auto* s_plan = app.add_subcommand("plan", "generate trials and session plans");
    s_plan->add_option("--conditions,--condition", plan.conditions, "control, reworded, blur, noise or all");
    s_plan->add_option("--n-participants", plan.n_participants, "sessions to plan");
    s_plan->add_option("--trials", plan.trials, "trials per session");
    s_plan->add_option("--target-exposure", plan.target_exposure, "mean presentations per pool trial");
    s_plan->add_option("--pool-size", plan.pool_size, "pool trials (overrides target exposure)");

    ServeArgs serve;
    auto* s_serve = app.add_subcommand("serve", "run the experiment HTTP service");
    s_serve->add_option("--root", serve.root, "directory of experiment plans (default <out>/<id>/plans)");
    s_serve->add_option("--host", serve.host, "bind address");
    s_serve->add_option("--port", serve.port, "port (0 picks a free one)");
    s_serve->add_option("--static-dir", serve.static_dir, "client bundle served under /ui/");
    s_serve->add_option("--port-file", serve.port_file, "write the bound port here");
    s_serve->add_option("--abandon-after-ms", serve.abandon_after_ms, "idle time before a session is abandoned");

    SimulateArgs sim;
    auto* s_sim = app.add_subcommand("simulate", "run a synthetic observer cohort");
    s_sim->add_option("--conditions,--condition", sim.conditions, "conditions to simulate");
    s_sim->add_option("--url", sim.url, "submit through a running service instead of in-process");
    sim.observer.add(s_sim);

    PruneArgs prune_args;
    auto* s_prune = app.add_subcommand("prune", "drop incomplete, too-fast and at-chance sessions");
    s_prune->add_option("--conditions,--condition", prune_args.conditions, "conditions to prune");
    s_prune->add_option("--trials", prune_args.trials, "trials a complete session must have");
    s_prune->add_option("--min-median-rt", prune_args.min_median_rt, "minimum median RT (ms)");
    s_prune->add_option("--chance-alpha", prune_args.chance_alpha, "binomial test level against chance");

    AggregateArgs agg;
    auto* s_agg = app.add_subcommand("aggregate", "aggregate responses into pair and image labels");
    s_agg->add_option("--conditions,--condition", agg.conditions, "conditions to aggregate");
    s_agg->add_flag("--correct-only-rt", agg.correct_only_rt, "average RT over correct responses only");
    s_agg->add_flag("--weight-by-responses", agg.weight_by_responses, "weight pairs by response count");

    ExportArgs exp;
    auto* s_exp = app.add_subcommand("export-labels", "write min-max normalized label tables");
    s_exp->add_option("--conditions,--condition", exp.conditions, "conditions to export");
    s_exp->add_option("--kind", exp.kind, "rt, accuracy or both")->check(CLI::IsMember({"rt", "accuracy", "both"}));

    TrainArgs tr;
    auto* s_train = app.add_subcommand("train", "train one classifier");
    s_train->add_option("--condition", tr.condition, "condition whose images and labels to use");
    s_train->add_option("--loss", tr.loss, "cross_entropy, psychophysical_accuracy or psychophysical_rt");
    s_train->add_option("--labels", tr.labels, "normalized label table (default from export-labels)");
    s_train->add_option("--architecture", tr.architecture, "softmax-regression or mlp-1-hidden");
    s_train->add_option("--epochs", tr.epochs);
    s_train->add_option("--batch-size", tr.batch_size);
    s_train->add_option("--hidden", tr.hidden, "hidden width for mlp-1-hidden");
    s_train->add_option("--lr", tr.lr, "learning rate");
    s_train->add_option("--c", tr.c, "penalty scale; <= 0 uses 1/mean(z)");
    s_train->add_option("--split-ratio", tr.split_ratio);
    s_train->add_option("--run-seed", tr.run_seed, "initialization/shuffle seed (default --seed)");
    s_train->add_flag("--invert-label", tr.invert_label, "use 1 - r before computing the penalty");
    s_train->add_flag("--literal-formula", tr.literal_formula, "apply z*c on every sample, correct or not");
    s_train->add_option("--missing-labels", tr.missing_labels, "error or table_mean")
        ->check(CLI::IsMember({"error", "table_mean"}));

    SuiteArgs suite;
    auto* s_suite = app.add_subcommand("suite", "run the condition x loss x seed grid");
    s_suite->add_option("--seeds", suite.seeds, "training seeds");
    s_suite->add_option("--n-participants", suite.n_participants);
    s_suite->add_option("--epochs", suite.epochs);
    s_suite->add_flag("--quiet", suite.quiet, "no progress on stderr");

    StatsArgs st;
    auto* s_stats = app.add_subcommand("stats", "mean/SE, t interval and one-way ANOVA");
    s_stats->add_option("--values", st.values, "comma-separated sample");
    s_stats->add_option("--groups", st.groups, "groups separated by ';', values by ','");
    s_stats->add_option("--level", st.level, "confidence level");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (s_stats->parsed()) return run_stats(st);
        ctx.resolve();
        if (s_ingest->parsed()) return run_ingest(ctx, ingest);
        if (s_perturb->parsed()) return run_perturb(ctx, perturb_args);
        if (s_plan->parsed()) return run_plan(ctx, plan);
        if (s_serve->parsed()) return run_serve(ctx, serve);
        if (s_sim->parsed()) return run_simulate(ctx, sim);
        if (s_prune->parsed()) return run_prune(ctx, prune_args);
        if (s_agg->parsed()) return run_aggregate(ctx, agg);
        if (s_exp->parsed()) return run_export(ctx, exp);
        if (s_train->parsed()) return run_train(ctx, tr);
        if (s_suite->parsed()) return run_suite(ctx, suite);
    } catch (const Error& e) {
        std::cerr << nlohmann::json{{"error", to_string(e.code())}, {"message", e.what()}}.dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << nlohmann::json{{"error", "internal"}, {"message", e.what()}}.dump() << "\n";
        return 1;
    }
    std::cerr << app.help();
    return 2;
}

}  // namespace psyphy
