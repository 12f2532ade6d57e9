#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace psyphy {

inline constexpr double kMinProbability = 1e-12;

// Numerically stable softmax.
std::vector<double> softmax(std::span<const double> logits);
void softmax_into(std::span<const double> logits, std::span<double> out);

// Index of the unique maximum, or npos-like `size()` when the maximum is tied.
std::size_t unique_argmax(std::span<const double> values);

// Index of the single 1 in a one-hot vector; throws invalid_input otherwise.
std::size_t one_hot_index(std::span<const double> label);

// -log(pred[true_class]) with the log clamped at log(1e-12).
double cross_entropy(std::span<const double> pred, std::size_t true_class);
double cross_entropy(std::span<const double> pred, std::span<const double> one_hot);

// z = m - r.
double penalty(double r, double m = 1.0);

struct PenaltyConfig {
    double c = 1.0;
    bool apply_only_when_incorrect = true;
    double m = 1.0;

    void validate() const;
};

// A prediction counts as correct only when its argmax is unique and equals
// the true class; ties are incorrect.
bool prediction_correct(std::span<const double> pred, std::size_t true_class);

// 1 on the correct branch, z*c otherwise.
double sample_weight(std::span<const double> pred, std::size_t true_class, double z,
                     const PenaltyConfig& config);

double psychophysical_loss(std::span<const double> pred, std::size_t true_class, double z,
                           const PenaltyConfig& config);
double psychophysical_loss(std::span<const double> pred, std::span<const double> one_hot,
                           double z, const PenaltyConfig& config);

// Gradient of psychophysical_loss(softmax(logits)) w.r.t. the logits, with the
// correct/incorrect branch held fixed: w * (softmax(logits) - y).
std::vector<double> loss_gradient(std::span<const double> logits, std::size_t true_class,
                                  double z, const PenaltyConfig& config);
std::vector<double> loss_gradient(std::span<const double> logits,
                                  std::span<const double> one_hot, double z,
                                  const PenaltyConfig& config);

}  // namespace psyphy
