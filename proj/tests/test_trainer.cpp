#include <doctest.h>

#include <cmath>
#include <set>

#include "plan_fixture.hpp"
#include "psyphy/error.hpp"
#include "psyphy/rng.hpp"
#include "psyphy/trainer.hpp"

using namespace psyphy;

namespace {

// Two Gaussian blobs far apart: linearly separable.
SampleSet separable(std::size_t n, std::uint64_t seed) {
    Engine e = make_engine(seed);
    SampleSet s;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t label = i % 2;
        std::vector<double> f(6);
        for (double& v : f) v = 0.3 * standard_normal(e);
        f[0] += label ? 2.0 : -2.0;
        f[1] += label ? -1.0 : 1.0;
        s.push_back({"img" + std::to_string(i), f, label});
    }
    return s;
}

SampleSet blobs(std::size_t n, std::size_t k, std::size_t dim, double spread, std::uint64_t seed) {
    Engine e = make_engine(seed);
    std::vector<std::vector<double>> centres(k, std::vector<double>(dim));
    Engine ce = make_engine(1234);
    for (auto& c : centres)
        for (double& v : c) v = standard_normal(ce);
    SampleSet s;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t label = i % k;
        std::vector<double> f(dim);
        for (std::size_t d = 0; d < dim; ++d) f[d] = centres[label][d] + spread * standard_normal(e);
        s.push_back({"img" + std::to_string(i), f, label});
    }
    return s;
}

NormalizedLabelTable constant_table(const SampleSet& s, double r) {
    NormalizedLabelTable t;
    t.kind = MeasurementKind::rt;
    for (const auto& x : s) t.entries[x.image_id] = r;
    return t;
}

}  // namespace

TEST_CASE("stratified split") {
    const auto m = fake_manifest(100, 40);
    const auto sp = split(m, 0.8, 3);
    CHECK(sp.train.size() == 3200);
    CHECK(sp.test.size() == 800);
    std::map<std::string, std::size_t> per_class;
    for (const auto& id : sp.train) ++per_class[m.class_of(id)];
    for (const auto& [_, n] : per_class) CHECK(n == 32);
    std::set<std::string> tr(sp.train.begin(), sp.train.end());
    for (const auto& id : sp.test) CHECK(tr.count(id) == 0);
    CHECK(split(m, 0.8, 3).train == sp.train);
    CHECK_FALSE(split(m, 0.8, 4).train == sp.train);

    const auto tiny = fake_manifest(3, 2);
    const auto sp2 = split(tiny, 0.99, 1);
    CHECK(sp2.train.size() == 3);
    CHECK(sp2.test.size() == 3);
    CHECK_THROWS_AS(split(m, 1.0, 1), Error);
    CHECK_THROWS_AS(split(m, 0.0, 1), Error);
}

TEST_CASE("split lists classes that cannot be stratified") {
    std::map<std::string, std::vector<std::string>> inst{{"a", {"a1", "a2"}}, {"b", {"b1"}}, {"c", {"c1"}}};
    const DatasetManifest m("/x", {"a", "b", "c"}, inst);
    try {
        split(m, 0.5, 1);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::stratification_failure);
        const std::string msg = e.what();
        CHECK(msg.find("b") != std::string::npos);
        CHECK(msg.find("c") != std::string::npos);
    }
}

TEST_CASE("separable toy set is learned with non-increasing loss") {
    const auto data = separable(200, 1);
    TrainConfig cfg;
    cfg.seed = 5;
    const auto out = train(data, 2, cfg);
    CHECK(out.result.train_accuracy >= 0.99);
    REQUIRE(out.result.history.size() == 20);
    for (std::size_t i = 1; i < out.result.history.size(); ++i) {
        CHECK(out.result.history[i].mean_loss <= out.result.history[i - 1].mean_loss);
    }
}

TEST_CASE("mlp learns the separable set") {
    const auto data = separable(200, 2);
    TrainConfig cfg;
    cfg.architecture = Architecture::mlp_1_hidden;
    cfg.hidden = 16;
    cfg.seed = 1;
    CHECK(train(data, 2, cfg).result.train_accuracy >= 0.99);
}

TEST_CASE("training is deterministic in seed") {
    const auto data = blobs(120, 4, 10, 1.0, 3);
    TrainConfig cfg;
    cfg.seed = 9;
    cfg.epochs = 5;
    const auto a = train(data, 4, cfg);
    const auto b = train(data, 4, cfg);
    CHECK(a.model.parameters() == b.model.parameters());
    cfg.seed = 10;
    CHECK_FALSE(train(data, 4, cfg).model.parameters() == a.model.parameters());
}

TEST_CASE("unit penalties reproduce cross entropy bit for bit") {
    const auto data = blobs(150, 5, 12, 1.5, 4);
    TrainConfig ce;
    ce.seed = 21;
    ce.epochs = 6;
    ce.batch_size = 16;
    TrainConfig psy = ce;
    psy.loss_kind = LossKind::psychophysical_rt;
    psy.labels = constant_table(data, 0.0);
    psy.c = 1.0;
    const auto a = train(data, 5, ce);
    const auto b = train(data, 5, psy);
    CHECK(a.model.parameters() == b.model.parameters());
    for (std::size_t i = 0; i < a.result.history.size(); ++i) {
        CHECK(a.result.history[i].mean_loss == b.result.history[i].mean_loss);
    }
}

TEST_CASE("auto c is the reciprocal mean penalty") {
    const auto data = blobs(40, 2, 4, 1.0, 5);
    TrainConfig cfg;
    cfg.loss_kind = LossKind::psychophysical_accuracy;
    cfg.epochs = 1;
    NormalizedLabelTable t;
    t.kind = MeasurementKind::accuracy;
    double zsum = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double r = (i % 5) / 4.0;
        t.entries[data[i].image_id] = r;
        zsum += 1.0 - r;
    }
    cfg.labels = t;
    CHECK(train(data, 2, cfg).result.c == doctest::Approx(data.size() / zsum).epsilon(1e-14));
    const auto z = sample_penalties(data, cfg);
    CHECK(z[1] == 0.75);
    cfg.invert_label = true;
    CHECK(sample_penalties(data, cfg)[1] == 0.25);
}

TEST_CASE("label requirements") {
    const auto data = blobs(20, 2, 3, 1.0, 6);
    TrainConfig cfg;
    cfg.loss_kind = LossKind::psychophysical_rt;
    CHECK_THROWS_AS(train(data, 2, cfg), Error);  // no table
    auto t = constant_table(data, 0.5);
    t.kind = MeasurementKind::accuracy;
    cfg.labels = t;
    CHECK_THROWS_AS(train(data, 2, cfg), Error);  // wrong kind
    t.kind = MeasurementKind::rt;
    t.entries.erase(data[3].image_id);
    cfg.labels = t;
    try {
        train(data, 2, cfg);
        FAIL("expected missing label");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::invalid_label);
        CHECK(std::string(e.what()).find(data[3].image_id) != std::string::npos);
    }
    cfg.missing_labels = MissingLabelPolicy::table_mean;
    CHECK(sample_penalties(data, cfg)[3] == doctest::Approx(0.5));
}

TEST_CASE("divergence is reported with context") {
    auto data = blobs(64, 3, 5, 1.0, 7);
    for (auto& s : data)
        for (double& v : s.features) v *= 1e150;
    TrainConfig cfg;
    cfg.learning_rate = 1e10;
    cfg.batch_size = 8;
    try {
        train(data, 3, cfg);
        FAIL("expected divergence");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::divergence);
        CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    }
}

TEST_CASE("untrained models are at chance on average") {
    const std::size_t k = 10, n = 500;
    const auto data = blobs(n, k, 20, 1.0, 8);
    double total = 0.0;
    const int inits = 60;
    for (int s = 0; s < inits; ++s) {
        Model m(Architecture::softmax_regression, 20, k);
        m.initialize(s);
        total += evaluate(m, data);
    }
    CHECK(std::abs(total / inits - 1.0 / k) < 0.03);
}

TEST_CASE("backward matches finite differences") {
    for (auto arch : {Architecture::softmax_regression, Architecture::mlp_1_hidden}) {
        Model m(arch, 5, 3, 4);
        m.initialize(4, 0.5);
        Engine e = make_engine(2);
        std::vector<double> x(5);
        for (double& v : x) v = standard_normal(e);
        const std::size_t y = 1;
        // Loss = CE(softmax(logits), y); dL/dlogits = softmax - onehot.
        auto loss = [&](const Model& mm) { return cross_entropy(softmax(mm.logits(x)), y); };
        auto d = softmax(m.logits(x));
        d[y] -= 1.0;
        std::vector<double> grad(m.parameters().size(), 0.0);
        m.backward(x, d, grad);
        for (std::size_t i = 0; i < grad.size(); ++i) {
            Model p = m, q = m;
            p.parameters()[i] += 1e-6;
            q.parameters()[i] -= 1e-6;
            const double fd = (loss(p) - loss(q)) / 2e-6;
            CHECK(std::abs(fd - grad[i]) < 1e-6 * std::max(1.0, std::abs(fd)));
        }
    }
}

TEST_CASE("config validation and json") {
    TrainConfig cfg;
    cfg.epochs = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.learning_rate = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.loss_kind = LossKind::psychophysical_accuracy;
    cfg.architecture = Architecture::mlp_1_hidden;
    cfg.c = 2.5;
    cfg.invert_label = true;
    const auto back = TrainConfig::from_json(cfg.to_json());
    CHECK(back.loss_kind == cfg.loss_kind);
    CHECK(back.architecture == cfg.architecture);
    CHECK(back.c == 2.5);
    CHECK(back.invert_label);
    CHECK(display_name(LossKind::psychophysical_rt) == "Reaction Time");
    CHECK_THROWS_AS(loss_kind_from_string("hinge"), Error);
}

TEST_CASE("trainer features are 28x28 with ink high") {
    Image img(48, 48, 1.0);
    img.at(10, 10) = 0.0;
    const auto f = trainer_features(img);
    CHECK(f.size() == kTrainerSide * kTrainerSide);
    double mx = 0;
    for (double v : f) mx = std::max(mx, v);
    CHECK(mx > 0.0);
    CHECK(f[0] == 0.0);
}
