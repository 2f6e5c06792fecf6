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

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "gatenet/error.hpp"
#include "gatenet/imbalance/weights.hpp"

namespace gatenet::imbalance {

using Rng = std::mt19937_64;

struct SamplerConfig {
    double beta_sampling = 0.999;
    std::uint64_t seed = 0;
};

/// Draws training event indices with replacement. The probability of event i
/// is w[c] / n[c] for its class c, where w are the class-balanced weights of
/// the training counts. Sampling is done as class first, then a uniform
/// member of that class, which yields the same distribution.
class EventSampler {
public:
    EventSampler(std::span<const int> labels, std::size_t n_classes, const SamplerConfig& cfg) : rng_(cfg.seed) {
        if (labels.empty()) throw ValidationError("event sampler needs at least one event");
        if (!(cfg.beta_sampling >= 0.0 && cfg.beta_sampling < 1.0))
            throw ConfigError("beta_sampling must lie in [0, 1)");
        const auto counts = class_counts(labels, n_classes);
        weights_ = effective_number_weights(counts, cfg.beta_sampling);
        members_.resize(n_classes);
        for (std::size_t i = 0; i < labels.size(); ++i) members_[static_cast<std::size_t>(labels[i])].push_back(i);
        class_dist_ = std::discrete_distribution<std::size_t>(weights_.weights.begin(), weights_.weights.end());
    }

    std::size_t next() {
        const auto& pool = members_[class_dist_(rng_)];
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        return pool[pick(rng_)];
    }

    std::vector<std::size_t> draw(std::size_t n) {
        std::vector<std::size_t> out(n);
        for (auto& i : out) i = next();
        return out;
    }

    /// Probability that one draw lands in class c.
    double class_probability(std::size_t c) const {
        return weights_[c] / static_cast<double>(weights_.size());
    }

    const ClassWeights& weights() const noexcept { return weights_; }

private:
    Rng rng_;
    ClassWeights weights_;
    std::vector<std::vector<std::size_t>> members_;
    std::discrete_distribution<std::size_t> class_dist_;
};

/// Draws K context-event indices from a sample of n events: uniform without
/// replacement when n >= K, uniform with replacement otherwise. The sampler
/// keeps a permutation buffer so each draw costs O(K).
class ContextSampler {
public:
    ContextSampler(std::size_t n_events, std::size_t k) : n_(n_events), k_(k) {
        if (n_events == 0) throw ValidationError("cannot draw context events from an empty sample");
        if (k == 0) throw EmptyContextError("context size must be at least 1");
        if (n_ >= k_) {
            perm_.resize(n_);
            std::iota(perm_.begin(), perm_.end(), std::size_t{0});
        }
    }

    std::size_t n_events() const noexcept { return n_; }
    std::size_t size() const noexcept { return k_; }

    /// Appends K indices to out.
    void draw_into(Rng& rng, std::vector<std::size_t>& out) {
        if (n_ >= k_) {
            // Partial Fisher-Yates over whatever order the buffer is in.
            for (std::size_t j = 0; j < k_; ++j) {
                std::uniform_int_distribution<std::size_t> pick(j, n_ - 1);
                std::swap(perm_[j], perm_[pick(rng)]);
                out.push_back(perm_[j]);
            }
        } else {
            std::uniform_int_distribution<std::size_t> pick(0, n_ - 1);
            for (std::size_t j = 0; j < k_; ++j) out.push_back(pick(rng));
        }
    }

    std::vector<std::size_t> draw(Rng& rng) {
        std::vector<std::size_t> out;
        out.reserve(k_);
        draw_into(rng, out);
        return out;
    }

private:
    std::size_t n_;
    std::size_t k_;
    std::vector<std::size_t> perm_;
};

/// One context draw of size k from a sample with n_events events.
inline std::vector<std::size_t> sample_context(std::size_t n_events, std::size_t k, Rng& rng) {
    return ContextSampler(n_events, k).draw(rng);
}

}  // namespace gatenet::imbalance
