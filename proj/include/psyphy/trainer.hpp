#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "psyphy/aggregation.hpp"
#include "psyphy/dataset.hpp"
#include "psyphy/loss.hpp"

namespace psyphy {

enum class Architecture { softmax_regression, mlp_1_hidden };
std::string to_string(Architecture a);
Architecture architecture_from_string(const std::string& s);

inline constexpr std::size_t kTrainerSide = 28;

// Dense classifier over flattened 28x28 inputs. Parameters live in one flat
// vector: [W1 | b1 | W2 | b2] for the MLP (ReLU hidden layer), [W | b] for
// softmax regression. Weight matrices are row-major (out x in).
class Model {
public:
    Model() = default;
    Model(Architecture arch, std::size_t inputs, std::size_t classes, std::size_t hidden = 0);

    Architecture architecture() const noexcept { return arch_; }
    std::size_t inputs() const noexcept { return inputs_; }
    std::size_t classes() const noexcept { return classes_; }
    std::size_t hidden() const noexcept { return hidden_; }

    std::vector<double>& parameters() noexcept { return params_; }
    const std::vector<double>& parameters() const noexcept { return params_; }

    void initialize(std::uint64_t seed, double init_scale = 0.0);

    std::vector<double> logits(std::span<const double> input) const;
    std::size_t predict(std::span<const double> input) const;

    // Accumulates d(loss)/d(params) into `grad` given d(loss)/d(logits).
    void backward(std::span<const double> input, std::span<const double> dlogits,
                  std::span<double> grad) const;

    bool finite() const;

private:
    std::size_t hidden_pre(std::span<const double> input, std::vector<double>& h) const;

    Architecture arch_ = Architecture::softmax_regression;
    std::size_t inputs_ = 0;
    std::size_t classes_ = 0;
    std::size_t hidden_ = 0;
    std::vector<double> params_;
};

struct TrainingSample {
    std::string image_id;
    std::vector<double> features;
    std::size_t label = 0;
};

using SampleSet = std::vector<TrainingSample>;

struct Split {
    std::vector<std::string> train;
    std::vector<std::string> test;
};

// Stratified per class: round(ratio * n) training instances per class, at
// least one on each side.
Split split(const DatasetManifest& manifest, double ratio, std::uint64_t seed);

enum class LossKind { cross_entropy, psychophysical_accuracy, psychophysical_rt };
std::string to_string(LossKind k);
std::string display_name(LossKind k);
LossKind loss_kind_from_string(const std::string& s);
inline const std::vector<LossKind> kAllLossKinds{LossKind::cross_entropy,
                                                 LossKind::psychophysical_accuracy,
                                                 LossKind::psychophysical_rt};

enum class MissingLabelPolicy { error, table_mean };

struct TrainConfig {
    LossKind loss_kind = LossKind::cross_entropy;
    Architecture architecture = Architecture::softmax_regression;
    std::size_t hidden = 64;
    std::size_t epochs = 20;
    std::size_t batch_size = 64;
    double learning_rate = 0.1;
    std::uint64_t seed = 0;
    // <= 0 selects c = 1 / mean(z) over the training set.
    double c = 0.0;
    bool apply_only_when_incorrect = true;
    bool invert_label = false;
    MissingLabelPolicy missing_labels = MissingLabelPolicy::error;
    std::optional<NormalizedLabelTable> labels;

    void validate() const;
    nlohmann::json to_json() const;  // labels omitted
    static TrainConfig from_json(const nlohmann::json& j);
};

struct EpochStats {
    std::size_t epoch = 0;
    double mean_loss = 0.0;
    double train_accuracy = 0.0;  // running, during the epoch
};

struct RunResult {
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    std::vector<EpochStats> history;
    std::uint64_t seed = 0;
    double c = 1.0;

    nlohmann::json to_json() const;
};

struct TrainOutput {
    Model model;
    RunResult result;
};

// Per-sample penalties z_i (all 1 for plain cross entropy) in sample order.
std::vector<double> sample_penalties(const SampleSet& samples, const TrainConfig& config);

TrainOutput train(const SampleSet& train_set, std::size_t n_classes, const TrainConfig& config);
TrainOutput train(const SampleSet& train_set, const SampleSet& test_set, std::size_t n_classes,
                  const TrainConfig& config);

double evaluate(const Model& model, const SampleSet& samples);

// Downsamples to 28x28 and inverts so ink is 1.
std::vector<double> trainer_features(const Image& img);

}  // namespace psyphy
