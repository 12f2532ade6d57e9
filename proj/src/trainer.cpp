#include "psyphy/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "psyphy/error.hpp"
#include "psyphy/rng.hpp"

namespace psyphy {

std::string to_string(Architecture a) {
    return a == Architecture::softmax_regression ? "softmax-regression" : "mlp-1-hidden";
}

Architecture architecture_from_string(const std::string& s) {
    if (s == "softmax-regression") return Architecture::softmax_regression;
    if (s == "mlp-1-hidden") return Architecture::mlp_1_hidden;
    fail(ErrorCode::invalid_parameter, "unknown architecture '" + s + "'");
}

std::string to_string(LossKind k) {
    switch (k) {
        case LossKind::cross_entropy: return "cross_entropy";
        case LossKind::psychophysical_accuracy: return "psychophysical_accuracy";
        case LossKind::psychophysical_rt: return "psychophysical_rt";
    }
    return "cross_entropy";
}

std::string display_name(LossKind k) {
    switch (k) {
        case LossKind::cross_entropy: return "Cross Entropy";
        case LossKind::psychophysical_accuracy: return "Averaged Accuracy";
        case LossKind::psychophysical_rt: return "Reaction Time";
    }
    return "";
}

LossKind loss_kind_from_string(const std::string& s) {
    if (s == "cross_entropy") return LossKind::cross_entropy;
    if (s == "psychophysical_accuracy") return LossKind::psychophysical_accuracy;
    if (s == "psychophysical_rt") return LossKind::psychophysical_rt;
    fail(ErrorCode::invalid_parameter, "unknown loss kind '" + s + "'");
}

Model::Model(Architecture arch, std::size_t inputs, std::size_t classes, std::size_t hidden)
    : arch_(arch), inputs_(inputs), classes_(classes), hidden_(arch == Architecture::mlp_1_hidden ? hidden : 0) {
    if (inputs == 0 || classes < 2) fail(ErrorCode::invalid_parameter, "model needs inputs and >= 2 classes");
    if (arch == Architecture::mlp_1_hidden && hidden == 0) {
        fail(ErrorCode::invalid_parameter, "mlp-1-hidden needs a positive hidden width");
    }
    const std::size_t n = arch == Architecture::softmax_regression
                              ? classes * inputs + classes
                              : hidden * inputs + hidden + classes * hidden + classes;
    params_.assign(n, 0.0);
}

void Model::initialize(std::uint64_t seed, double init_scale) {
    Engine eng = make_engine(stream_seed(seed, "init"));
    if (arch_ == Architecture::softmax_regression) {
        const double scale = init_scale > 0.0 ? init_scale : 0.01;
        for (std::size_t i = 0; i < classes_ * inputs_; ++i) params_[i] = scale * standard_normal(eng);
        std::fill(params_.begin() + static_cast<std::ptrdiff_t>(classes_ * inputs_), params_.end(), 0.0);
        return;
    }
    const double s1 = init_scale > 0.0 ? init_scale : std::sqrt(2.0 / static_cast<double>(inputs_));
    const double s2 = init_scale > 0.0 ? init_scale : std::sqrt(2.0 / static_cast<double>(hidden_));
    std::size_t off = 0;
    for (std::size_t i = 0; i < hidden_ * inputs_; ++i) params_[off++] = s1 * standard_normal(eng);
    for (std::size_t i = 0; i < hidden_; ++i) params_[off++] = 0.0;
    for (std::size_t i = 0; i < classes_ * hidden_; ++i) params_[off++] = s2 * standard_normal(eng);
    for (std::size_t i = 0; i < classes_; ++i) params_[off++] = 0.0;
}

std::size_t Model::hidden_pre(std::span<const double> x, std::vector<double>& h) const {
    h.assign(hidden_, 0.0);
    const double* w1 = params_.data();
    const double* b1 = w1 + hidden_ * inputs_;
    for (std::size_t j = 0; j < hidden_; ++j) {
        double acc = b1[j];
        const double* row = w1 + j * inputs_;
        for (std::size_t i = 0; i < inputs_; ++i) acc += row[i] * x[i];
        h[j] = acc > 0.0 ? acc : 0.0;
    }
    return hidden_ * inputs_ + hidden_;
}

std::vector<double> Model::logits(std::span<const double> x) const {
    if (x.size() != inputs_) fail(ErrorCode::invalid_input, "model input has wrong dimension");
    std::vector<double> out(classes_);
    if (arch_ == Architecture::softmax_regression) {
        const double* w = params_.data();
        const double* b = w + classes_ * inputs_;
        for (std::size_t k = 0; k < classes_; ++k) {
            double acc = b[k];
            const double* row = w + k * inputs_;
            for (std::size_t i = 0; i < inputs_; ++i) acc += row[i] * x[i];
            out[k] = acc;
        }
        return out;
    }
    std::vector<double> h;
    const std::size_t off = hidden_pre(x, h);
    const double* w2 = params_.data() + off;
    const double* b2 = w2 + classes_ * hidden_;
    for (std::size_t k = 0; k < classes_; ++k) {
        double acc = b2[k];
        const double* row = w2 + k * hidden_;
        for (std::size_t j = 0; j < hidden_; ++j) acc += row[j] * h[j];
        out[k] = acc;
    }
    return out;
}

std::size_t Model::predict(std::span<const double> x) const {
    const auto z = logits(x);
    return static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
}

void Model::backward(std::span<const double> x, std::span<const double> dlogits, std::span<double> grad) const {
    if (arch_ == Architecture::softmax_regression) {
        double* gw = grad.data();
        double* gb = gw + classes_ * inputs_;
        for (std::size_t k = 0; k < classes_; ++k) {
            const double d = dlogits[k];
            if (d == 0.0) continue;
            double* row = gw + k * inputs_;
            for (std::size_t i = 0; i < inputs_; ++i) row[i] += d * x[i];
            gb[k] += d;
        }
        return;
    }
    std::vector<double> h;
    const std::size_t off = hidden_pre(x, h);
    const double* w2 = params_.data() + off;
    double* gw1 = grad.data();
    double* gb1 = gw1 + hidden_ * inputs_;
    double* gw2 = grad.data() + off;
    double* gb2 = gw2 + classes_ * hidden_;

    std::vector<double> dh(hidden_, 0.0);
    for (std::size_t k = 0; k < classes_; ++k) {
        const double d = dlogits[k];
        double* row = gw2 + k * hidden_;
        const double* wrow = w2 + k * hidden_;
        for (std::size_t j = 0; j < hidden_; ++j) {
            row[j] += d * h[j];
            dh[j] += d * wrow[j];
        }
        gb2[k] += d;
    }
    for (std::size_t j = 0; j < hidden_; ++j) {
        if (h[j] <= 0.0) continue;
        double* row = gw1 + j * inputs_;
        for (std::size_t i = 0; i < inputs_; ++i) row[i] += dh[j] * x[i];
        gb1[j] += dh[j];
    }
}

bool Model::finite() const {
    return std::all_of(params_.begin(), params_.end(), [](double v) { return std::isfinite(v); });
}

Split split(const DatasetManifest& manifest, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) fail(ErrorCode::invalid_parameter, "split ratio must lie in (0,1)");
    std::vector<std::string> deficient;
    for (const auto& cls : manifest.classes()) {
        if (manifest.instances_of(cls).size() < 2) deficient.push_back(cls);
    }
    if (!deficient.empty()) {
        std::string list;
        for (const auto& c : deficient) list += (list.empty() ? "" : ", ") + c;
        fail(ErrorCode::stratification_failure, "classes with fewer than 2 instances: " + list);
    }
    Split out;
    for (const auto& cls : manifest.classes()) {
        auto ids = manifest.instances_of(cls);
        Engine eng = make_engine(stream_seed(seed, "split/" + cls));
        shuffle(ids, eng);
        const std::size_t n = ids.size();
        auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
        n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
        out.train.insert(out.train.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
        out.test.insert(out.test.end(), ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
    }
    return out;
}

void TrainConfig::validate() const {
    if (epochs < 1) fail(ErrorCode::invalid_parameter, "epochs must be at least 1");
    if (batch_size < 1) fail(ErrorCode::invalid_parameter, "batch size must be at least 1");
    if (!(learning_rate > 0.0)) fail(ErrorCode::invalid_parameter, "learning rate must be positive");
    if (loss_kind != LossKind::cross_entropy) {
        if (!labels) fail(ErrorCode::invalid_label, "psychophysical loss needs a label table");
        const auto want = loss_kind == LossKind::psychophysical_rt ? MeasurementKind::rt : MeasurementKind::accuracy;
        if (labels->kind != want) {
            fail(ErrorCode::invalid_label, "loss " + to_string(loss_kind) + " needs " + to_string(want) + " labels");
        }
    }
}

nlohmann::json TrainConfig::to_json() const {
    return {{"loss_kind", to_string(loss_kind)},
            {"architecture", to_string(architecture)},
            {"hidden", hidden},
            {"epochs", epochs},
            {"batch_size", batch_size},
            {"learning_rate", learning_rate},
            {"seed", seed},
            {"c", c},
            {"apply_only_when_incorrect", apply_only_when_incorrect},
            {"invert_label", invert_label},
            {"missing_labels", missing_labels == MissingLabelPolicy::error ? "error" : "table_mean"}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig c;
    if (j.contains("loss_kind")) c.loss_kind = loss_kind_from_string(j.at("loss_kind").get<std::string>());
    if (j.contains("architecture")) c.architecture = architecture_from_string(j.at("architecture").get<std::string>());
    c.hidden = j.value("hidden", c.hidden);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.seed = j.value("seed", c.seed);
    c.c = j.value("c", c.c);
    c.apply_only_when_incorrect = j.value("apply_only_when_incorrect", c.apply_only_when_incorrect);
    c.invert_label = j.value("invert_label", c.invert_label);
    const auto ml = j.value("missing_labels", std::string("error"));
    if (ml == "error") {
        c.missing_labels = MissingLabelPolicy::error;
    } else if (ml == "table_mean") {
        c.missing_labels = MissingLabelPolicy::table_mean;
    } else {
        fail(ErrorCode::invalid_parameter, "unknown missing_labels policy '" + ml + "'");
    }
    return c;
}

nlohmann::json RunResult::to_json() const {
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& e : history) {
        hist.push_back({{"epoch", e.epoch}, {"mean_loss", e.mean_loss}, {"train_accuracy", e.train_accuracy}});
    }
    return {{"train_accuracy", train_accuracy},
            {"test_accuracy", test_accuracy},
            {"seed", seed},
            {"c", c},
            {"history", hist}};
}

std::vector<double> sample_penalties(const SampleSet& samples, const TrainConfig& config) {
    std::vector<double> z(samples.size(), 1.0);
    if (config.loss_kind == LossKind::cross_entropy) return z;
    const NormalizedLabelTable& table = *config.labels;
    const double fallback = table.mean();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        auto r = table.find(samples[i].image_id);
        if (!r) {
            if (config.missing_labels == MissingLabelPolicy::error) {
                fail(ErrorCode::invalid_label, "no psychophysical label for training image '" + samples[i].image_id + "'");
            }
            r = fallback;
        }
        const double v = config.invert_label ? table.m - *r : *r;
        z[i] = penalty(v, table.m);
    }
    return z;
}

double evaluate(const Model& model, const SampleSet& samples) {
    if (samples.empty()) return 0.0;
    std::size_t correct = 0;
    for (const auto& s : samples) correct += model.predict(s.features) == s.label ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(samples.size());
}

TrainOutput train(const SampleSet& train_set, std::size_t n_classes, const TrainConfig& config) {
    return train(train_set, SampleSet{}, n_classes, config);
}

TrainOutput train(const SampleSet& train_set, const SampleSet& test_set, std::size_t n_classes,
                  const TrainConfig& config) {
    config.validate();
    if (train_set.empty()) fail(ErrorCode::insufficient_data, "empty training set");
    const std::size_t dim = train_set.front().features.size();
    for (const auto& s : train_set) {
        if (s.features.size() != dim) fail(ErrorCode::invalid_input, "training samples differ in dimension");
        if (s.label >= n_classes) fail(ErrorCode::invalid_input, "training label out of range");
    }

    const bool psych = config.loss_kind != LossKind::cross_entropy;
    const auto z = sample_penalties(train_set, config);
    PenaltyConfig pc;
    pc.apply_only_when_incorrect = config.apply_only_when_incorrect;
    pc.m = psych ? config.labels->m : 1.0;
    if (psych) {
        if (config.c > 0.0) {
            pc.c = config.c;
        } else {
            const double mean_z = std::accumulate(z.begin(), z.end(), 0.0) / static_cast<double>(z.size());
            if (!(mean_z > 0.0)) fail(ErrorCode::degenerate_distribution, "all penalties are zero; cannot scale c");
            pc.c = 1.0 / mean_z;
        }
    }
    pc.validate();

    TrainOutput out;
    out.model = Model(config.architecture, dim, n_classes, config.hidden);
    out.model.initialize(config.seed);
    out.result.seed = config.seed;
    out.result.c = pc.c;

    auto& params = out.model.parameters();
    std::vector<double> grad(params.size());
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        Engine eng = make_engine(stream_seed(config.seed, epoch + 1));
        shuffle(order, eng);
        double epoch_loss = 0.0;
        std::size_t epoch_correct = 0;
        for (std::size_t start = 0, batch = 0; start < order.size(); start += config.batch_size, ++batch) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            const double inv_b = 1.0 / static_cast<double>(end - start);
            std::fill(grad.begin(), grad.end(), 0.0);
            double batch_loss = 0.0;
            for (std::size_t i = start; i < end; ++i) {
                const TrainingSample& s = train_set[order[i]];
                const auto logits = out.model.logits(s.features);
                if (!std::all_of(logits.begin(), logits.end(), [](double v) { return std::isfinite(v); })) {
                    fail(ErrorCode::divergence, "non-finite logits at epoch " + std::to_string(epoch + 1) +
                                                    ", batch " + std::to_string(batch + 1));
                }
                std::vector<double> g;
                double loss;
                if (psych) {
                    g = loss_gradient(logits, s.label, z[order[i]], pc);
                    loss = psychophysical_loss(softmax(logits), s.label, z[order[i]], pc);
                } else {
                    g = softmax(logits);
                    loss = cross_entropy(g, s.label);
                    g[s.label] -= 1.0;
                }
                epoch_correct += unique_argmax(logits) == s.label ? 1 : 0;
                batch_loss += loss;
                for (double& v : g) v *= inv_b;
                out.model.backward(s.features, g, grad);
            }
            if (!std::isfinite(batch_loss)) {
                fail(ErrorCode::divergence, "non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                                                std::to_string(batch + 1));
            }
            epoch_loss += batch_loss;
            for (std::size_t p = 0; p < params.size(); ++p) params[p] -= config.learning_rate * grad[p];
        }
        if (!out.model.finite()) {
            fail(ErrorCode::divergence, "non-finite weights after epoch " + std::to_string(epoch + 1));
        }
        out.result.history.push_back({epoch + 1, epoch_loss / static_cast<double>(order.size()),
                                      static_cast<double>(epoch_correct) / static_cast<double>(order.size())});
    }
    out.result.train_accuracy = evaluate(out.model, train_set);
    out.result.test_accuracy = evaluate(out.model, test_set);
    return out;
}

std::vector<double> trainer_features(const Image& img) {
    const Image small = downsample_area(img, kTrainerSide, kTrainerSide);
    std::vector<double> f(small.size());
    const auto px = small.pixels();
    // ink = 1, background = 0
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = 1.0 - px[i];
    return f;
}

}  // namespace psyphy
