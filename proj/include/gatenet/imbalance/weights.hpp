/*
 * Copyright 2026 The GateNet Toolkit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gatenet/error.hpp"
#include "gatenet/nn/tensor.hpp"

namespace gatenet::imbalance {

/// Per-class loss weights, normalized to sum to the number of classes.
struct ClassWeights {
    std::vector<double> weights;
    double beta = 0.0;

    std::size_t size() const noexcept { return weights.size(); }
    double operator[](std::size_t c) const { return weights[c]; }

    static ClassWeights uniform(std::size_t n_classes) { return {std::vector<double>(n_classes, 1.0), 0.0}; }
};

/// Raw class-balanced weight (1 - beta) / (1 - beta^n) for a class with n >= 1
/// members. The denominator goes through expm1 so beta close to 1 keeps its
/// precision.
inline double effective_number_weight(std::uint64_t count, double beta) {
    if (count == 0) return 0.0;
    if (beta == 0.0) return 1.0;
    const double denom = -std::expm1(static_cast<double>(count) * std::log(beta));
    return (1.0 - beta) / denom;
}

inline ClassWeights effective_number_weights(std::span<const std::uint64_t> class_counts, double beta) {
    if (!(beta >= 0.0 && beta < 1.0)) throw ConfigError("beta must lie in [0, 1), got " + std::to_string(beta));
    ClassWeights out;
    out.beta = beta;
    out.weights.reserve(class_counts.size());
    double total = 0.0;
    for (std::uint64_t n : class_counts) {
        out.weights.push_back(effective_number_weight(n, beta));
        total += out.weights.back();
    }
    if (total == 0.0) throw ValidationError("class-balanced weights need at least one class with a non-zero count");
    const double scale = static_cast<double>(class_counts.size()) / total;
    for (double& w : out.weights) w *= scale;
    return out;
}

/// Counts of each label value in [0, n_classes).
inline std::vector<std::uint64_t> class_counts(std::span<const int> labels, std::size_t n_classes) {
    std::vector<std::uint64_t> counts(n_classes, 0);
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= n_classes)
            throw ValidationError("label " + std::to_string(y) + " outside [0, " + std::to_string(n_classes) + ")");
        ++counts[static_cast<std::size_t>(y)];
    }
    return counts;
}

struct FocalLossConfig {
    double gamma = 5.0;
    ClassWeights class_weights;
};

/// Smallest target probability that enters the logarithm.
inline constexpr double kProbabilityFloor = 1e-12;

struct FocalLossResult {
    double value = 0.0;
    nn::Tensor grad;             // d(value)/d(probs)
    std::size_t saturated = 0;  // events whose target probability hit the floor
};

/// Mean over the batch of -w_t (1 - p_t)^gamma log(p_t), with its gradient
/// with respect to the probabilities.
inline FocalLossResult focal_loss(const nn::Tensor& probs, std::span<const int> targets, const FocalLossConfig& cfg) {
    if (probs.rank() != 2) throw DimensionError("focal loss expects probs [B, C], got " + nn::shape_string(probs.shape()));
    const std::size_t b = probs.dim(0), c = probs.dim(1);
    if (targets.size() != b)
        throw DimensionError("focal loss: " + std::to_string(targets.size()) + " targets for " + std::to_string(b) +
                             " rows");
    if (cfg.gamma < 0.0) throw ConfigError("focal gamma must be non-negative");
    const bool weighted = !cfg.class_weights.weights.empty();
    if (weighted && cfg.class_weights.size() != c)
        throw DimensionError("focal loss: " + std::to_string(cfg.class_weights.size()) + " class weights for " +
                             std::to_string(c) + " classes");

    FocalLossResult out;
    out.grad = nn::Tensor({b, c}, 0.0);
    const double inv_b = 1.0 / static_cast<double>(b);
    for (std::size_t r = 0; r < b; ++r) {
        const int t = targets[r];
        if (t < 0 || static_cast<std::size_t>(t) >= c)
            throw ValidationError("target " + std::to_string(t) + " outside [0, " + std::to_string(c) + ")");
        const double w = weighted ? cfg.class_weights[static_cast<std::size_t>(t)] : 1.0;
        double p = probs[r * c + static_cast<std::size_t>(t)];
        bool clamped = false;
        if (p < kProbabilityFloor) {
            p = kProbabilityFloor;
            clamped = true;
            ++out.saturated;
        }
        const double q = 1.0 - p;
        const double log_p = std::log(p);
        const double mod = cfg.gamma == 0.0 ? 1.0 : std::pow(q, cfg.gamma);
        out.value += -w * mod * log_p * inv_b;
        if (clamped) continue;
        double dmod = 0.0;
        if (cfg.gamma != 0.0 && q > 0.0) dmod = -cfg.gamma * std::pow(q, cfg.gamma - 1.0);
        // d/dp [-w * mod(p) * log p]
        out.grad[r * c + static_cast<std::size_t>(t)] = -w * (dmod * log_p + mod / p) * inv_b;
    }
    return out;
}

}  // namespace gatenet::imbalance
