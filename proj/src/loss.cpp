#include "psyphy/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "psyphy/error.hpp"

namespace psyphy {

void softmax_into(std::span<const double> logits, std::span<double> out) {
    if (logits.empty() || out.size() != logits.size()) {
        fail(ErrorCode::invalid_input, "softmax: empty input or size mismatch");
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> out(logits.size());
    softmax_into(logits, out);
    return out;
}

std::size_t unique_argmax(std::span<const double> values) {
    std::size_t best = 0;
    bool tied = false;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) {
            best = i;
            tied = false;
        } else if (values[i] == values[best]) {
            tied = true;
        }
    }
    return tied ? values.size() : best;
}

std::size_t one_hot_index(std::span<const double> label) {
    std::size_t idx = label.size();
    for (std::size_t i = 0; i < label.size(); ++i) {
        if (label[i] == 1.0) {
            if (idx != label.size()) fail(ErrorCode::invalid_input, "label vector has more than one 1");
            idx = i;
        } else if (label[i] != 0.0) {
            fail(ErrorCode::invalid_input, "label vector must be one-hot");
        }
    }
    if (idx == label.size()) fail(ErrorCode::invalid_input, "label vector has no 1 entry");
    return idx;
}

double cross_entropy(std::span<const double> pred, std::size_t true_class) {
    if (true_class >= pred.size()) {
        fail(ErrorCode::invalid_input, "cross_entropy: class index " + std::to_string(true_class) +
                                           " outside a " + std::to_string(pred.size()) + "-way prediction");
    }
    static const double log_floor = std::log(kMinProbability);
    const double p = pred[true_class];
    const double lp = p > 0.0 ? std::log(p) : log_floor;
    return -std::max(lp, log_floor);
}

double cross_entropy(std::span<const double> pred, std::span<const double> one_hot) {
    if (pred.size() != one_hot.size()) {
        fail(ErrorCode::invalid_input, "cross_entropy: prediction has " + std::to_string(pred.size()) +
                                           " classes, label has " + std::to_string(one_hot.size()));
    }
    return cross_entropy(pred, one_hot_index(one_hot));
}

double penalty(double r, double m) {
    if (!(r >= 0.0) || !std::isfinite(r)) fail(ErrorCode::invalid_label, "psychophysical label must be >= 0");
    if (r > m) fail(ErrorCode::invalid_label, "psychophysical label exceeds its maximum");
    return m - r;
}

void PenaltyConfig::validate() const {
    if (!(c > 0.0) || !std::isfinite(c)) fail(ErrorCode::invalid_parameter, "penalty scale c must be positive");
    if (!(m > 0.0) || !std::isfinite(m)) fail(ErrorCode::invalid_parameter, "penalty maximum m must be positive");
}

bool prediction_correct(std::span<const double> pred, std::size_t true_class) {
    return unique_argmax(pred) == true_class;
}

double sample_weight(std::span<const double> pred, std::size_t true_class, double z,
                     const PenaltyConfig& config) {
    if (config.apply_only_when_incorrect && prediction_correct(pred, true_class)) return 1.0;
    return z * config.c;
}

double psychophysical_loss(std::span<const double> pred, std::size_t true_class, double z,
                           const PenaltyConfig& config) {
    if (!(z >= 0.0 && z <= config.m)) fail(ErrorCode::invalid_label, "penalty z outside [0, m]");
    const double ce = cross_entropy(pred, true_class);
    if (config.apply_only_when_incorrect && prediction_correct(pred, true_class)) return ce;
    return z * config.c * ce;
}

double psychophysical_loss(std::span<const double> pred, std::span<const double> one_hot, double z,
                           const PenaltyConfig& config) {
    if (pred.size() != one_hot.size()) fail(ErrorCode::invalid_input, "prediction/label dimension mismatch");
    return psychophysical_loss(pred, one_hot_index(one_hot), z, config);
}

std::vector<double> loss_gradient(std::span<const double> logits, std::size_t true_class, double z,
                                  const PenaltyConfig& config) {
    for (double v : logits) {
        if (!std::isfinite(v)) fail(ErrorCode::invalid_input, "loss_gradient: non-finite logit");
    }
    if (true_class >= logits.size()) fail(ErrorCode::invalid_input, "loss_gradient: class index out of range");
    std::vector<double> grad = softmax(logits);
    const double w = sample_weight(grad, true_class, z, config);
    grad[true_class] -= 1.0;
    for (double& g : grad) g *= w;
    return grad;
}

std::vector<double> loss_gradient(std::span<const double> logits, std::span<const double> one_hot, double z,
                                  const PenaltyConfig& config) {
    if (logits.size() != one_hot.size()) fail(ErrorCode::invalid_input, "logit/label dimension mismatch");
    return loss_gradient(logits, one_hot_index(one_hot), z, config);
}

}  // namespace psyphy
