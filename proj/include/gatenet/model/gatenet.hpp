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

// GateNet: a per-event block, a context block whose per-event outputs are
// averaged over the K context events, and a classification head over the
// concatenation of both. The context-free baseline is the same network with
// the context block removed.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "gatenet/error.hpp"
#include "gatenet/nn/graph.hpp"
#include "gatenet/nn/kernels.hpp"
#include "gatenet/nn/tensor.hpp"

namespace gatenet::model {

using nn::Mode;
using nn::Tensor;

struct GateNetConfig {
    std::size_t n_markers = 12;
    std::size_t n_classes = 2;
    std::size_t n_context = 1000;
    std::vector<std::size_t> single_block_filters{1024, 512, 256};
    std::vector<std::size_t> context_block_filters{64, 48};
    std::size_t head_hidden = 32;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_markers == 0) throw ConfigError("n_markers must be at least 1");
        if (n_classes < 2) throw ConfigError("n_classes must be at least 2");
        if (n_context == 0) throw EmptyContextError("n_context must be at least 1");
        if (single_block_filters.empty() || context_block_filters.empty())
            throw ConfigError("single and context blocks need at least one stage");
        for (auto f : single_block_filters)
            if (f == 0) throw ConfigError("filter counts must be at least 1");
        for (auto f : context_block_filters)
            if (f == 0) throw ConfigError("filter counts must be at least 1");
        if (head_hidden == 0) throw ConfigError("head_hidden must be at least 1");
    }
};

struct BaselineConfig {
    std::size_t n_markers = 12;
    std::size_t n_classes = 2;
    std::vector<std::size_t> hidden{1024, 512, 256, 32};
    std::uint64_t seed = 0;

    void validate() const {
        if (n_markers == 0) throw ConfigError("n_markers must be at least 1");
        if (n_classes < 2) throw ConfigError("n_classes must be at least 2");
        if (hidden.empty()) throw ConfigError("baseline needs at least one hidden layer");
        for (auto f : hidden)
            if (f == 0) throw ConfigError("hidden widths must be at least 1");
    }
};

enum class Architecture : std::uint32_t { gatenet = 1, baseline = 2 };

/// Affine map followed by batch normalization; ReLU or softmax is applied by
/// the caller depending on the stage's position.
struct Stage {
    nn::Param weight;
    nn::Param bias;
    nn::Param gamma;
    nn::Param shift;
    nn::RunningStats running;

    std::size_t in() const { return weight.value.dim(1); }
    std::size_t out() const { return weight.value.dim(0); }
};

struct NetworkParams {
    Architecture arch = Architecture::gatenet;
    std::size_t n_markers = 0;
    std::size_t n_classes = 0;
    std::size_t n_context = 0;  // 0 for the baseline
    std::vector<Stage> event_stages;
    std::vector<Stage> context_stages;
    std::vector<Stage> head_stages;  // last one produces the class logits

    bool uses_context() const noexcept { return arch == Architecture::gatenet; }

    std::vector<nn::Param*> parameters() {
        std::vector<nn::Param*> out;
        for (auto* block : {&event_stages, &context_stages, &head_stages})
            for (auto& s : *block)
                for (nn::Param* p : {&s.weight, &s.bias, &s.gamma, &s.shift}) out.push_back(p);
        return out;
    }

    std::vector<const nn::Param*> parameters() const {
        std::vector<const nn::Param*> out;
        for (auto* block : {&event_stages, &context_stages, &head_stages})
            for (const auto& s : *block)
                for (const nn::Param* p : {&s.weight, &s.bias, &s.gamma, &s.shift}) out.push_back(p);
        return out;
    }

    std::vector<nn::RunningStats*> running_stats() {
        std::vector<nn::RunningStats*> out;
        for (auto* block : {&event_stages, &context_stages, &head_stages})
            for (auto& s : *block) out.push_back(&s.running);
        return out;
    }

    /// Number of trainable scalars (running statistics excluded).
    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const nn::Param* p : parameters()) n += p->value.size();
        return n;
    }

    void zero_grad() {
        for (nn::Param* p : parameters()) p->zero_grad();
    }
};

namespace detail {

/// Weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); batchnorm starts
/// as the identity with running mean 0 and variance 1.
inline Stage make_stage(const std::string& name, std::size_t in, std::size_t out, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> u(-bound, bound);
    Stage s;
    Tensor w({out, in});
    for (double& v : w.values()) v = u(rng);
    Tensor b({out});
    for (double& v : b.values()) v = u(rng);
    s.weight = nn::Param(name + ".weight", std::move(w));
    s.bias = nn::Param(name + ".bias", std::move(b));
    s.gamma = nn::Param(name + ".bn.gamma", Tensor({out}, 1.0));
    s.shift = nn::Param(name + ".bn.shift", Tensor({out}, 0.0));
    s.running = nn::RunningStats(out);
    return s;
}

}  // namespace detail

inline NetworkParams init_params(const GateNetConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    NetworkParams p;
    p.arch = Architecture::gatenet;
    p.n_markers = cfg.n_markers;
    p.n_classes = cfg.n_classes;
    p.n_context = cfg.n_context;
    std::size_t in = cfg.n_markers;
    for (std::size_t i = 0; i < cfg.single_block_filters.size(); ++i) {
        p.event_stages.push_back(detail::make_stage("single." + std::to_string(i), in, cfg.single_block_filters[i], rng));
        in = cfg.single_block_filters[i];
    }
    std::size_t cin = cfg.n_markers;
    for (std::size_t i = 0; i < cfg.context_block_filters.size(); ++i) {
        p.context_stages.push_back(
            detail::make_stage("context." + std::to_string(i), cin, cfg.context_block_filters[i], rng));
        cin = cfg.context_block_filters[i];
    }
    p.head_stages.push_back(detail::make_stage("head.hidden", in + cin, cfg.head_hidden, rng));
    p.head_stages.push_back(detail::make_stage("head.out", cfg.head_hidden, cfg.n_classes, rng));
    return p;
}

inline NetworkParams init_params(const BaselineConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    NetworkParams p;
    p.arch = Architecture::baseline;
    p.n_markers = cfg.n_markers;
    p.n_classes = cfg.n_classes;
    std::size_t in = cfg.n_markers;
    for (std::size_t i = 0; i < cfg.hidden.size(); ++i) {
        p.event_stages.push_back(detail::make_stage("mlp." + std::to_string(i), in, cfg.hidden[i], rng));
        in = cfg.hidden[i];
    }
    p.head_stages.push_back(detail::make_stage("head.out", in, cfg.n_classes, rng));
    return p;
}

struct ForwardOptions {
    Mode mode = Mode::eval;
    /// In train mode, whether batchnorm folds batch statistics into the
    /// running estimates. Gradient checks turn this off.
    bool update_running = true;
};

namespace detail {

inline nn::Var stage_forward(nn::Graph& g, Stage& s, nn::Var x, const ForwardOptions& opt, bool relu) {
    nn::BatchNormOptions bn;
    bn.update_running = opt.update_running;
    return g.affine_batchnorm(x, g.param(s.weight), g.param(s.bias), g.param(s.gamma), g.param(s.shift), s.running,
                              opt.mode, bn, relu);
}

}  // namespace detail

/// Records the forward pass on `g` and returns the probability node [B, C].
/// `events` is [B, M]; `context_rows` is [B*K, M], rows b*K..b*K+K-1 being
/// the context of event b. The baseline ignores `context_rows`.
inline nn::Var forward_graph(nn::Graph& g, NetworkParams& p, const Tensor& events, const Tensor* context_rows,
                             const ForwardOptions& opt) {
    if (events.rank() != 2 || events.dim(1) != p.n_markers)
        throw DimensionError("events must be [B, " + std::to_string(p.n_markers) + "], got " +
                             nn::shape_string(events.shape()));
    const std::size_t b = events.dim(0);
    nn::Var h = g.input(events);
    for (auto& s : p.event_stages) h = detail::stage_forward(g, s, h, opt, true);
    if (p.uses_context()) {
        if (!context_rows) throw EmptyContextError("GateNet forward needs context events");
        if (context_rows->rank() != 2 || context_rows->dim(1) != p.n_markers)
            throw DimensionError("context rows must be [B*K, " + std::to_string(p.n_markers) + "], got " +
                                 nn::shape_string(context_rows->shape()));
        if (context_rows->dim(0) != b * p.n_context)
            throw DimensionError("context rows: expected B*K = " + std::to_string(b * p.n_context) + ", got " +
                                 std::to_string(context_rows->dim(0)));
        nn::Var c = g.input(*context_rows);
        for (auto& s : p.context_stages) c = detail::stage_forward(g, s, c, opt, true);
        h = g.concat(h, g.mean_pool(c, p.n_context));
    }
    for (std::size_t i = 0; i + 1 < p.head_stages.size(); ++i)
        h = detail::stage_forward(g, p.head_stages[i], h, opt, true);
    return g.softmax(detail::stage_forward(g, p.head_stages.back(), h, opt, false));
}

/// Class probabilities [B, C] for events [B, M] and contexts [B, M, K].
inline Tensor forward(NetworkParams& p, const Tensor& events, const Tensor& contexts, Mode mode) {
    if (contexts.rank() != 3) throw DimensionError("contexts must be [B, M, K], got " + nn::shape_string(contexts.shape()));
    const std::size_t b = contexts.dim(0), m = contexts.dim(1), k = contexts.dim(2);
    if (k != p.n_context)
        throw DimensionError("context axis 2 (K): expected " + std::to_string(p.n_context) + ", got " + std::to_string(k));
    if (events.rank() != 2 || events.dim(0) != b)
        throw DimensionError("events axis 0 (B) must match contexts axis 0 (" + std::to_string(b) + ")");
    Tensor rows({b * k, m});
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < m; ++j)
            for (std::size_t l = 0; l < k; ++l) rows[(i * k + l) * m + j] = contexts[(i * m + j) * k + l];
    nn::Graph g;
    return g.value(forward_graph(g, p, events, &rows, {mode, true}));
}

/// Baseline probabilities [B, C]; no context path exists.
inline Tensor forward_baseline(NetworkParams& p, const Tensor& events, Mode mode) {
    if (p.uses_context()) throw ConfigError("forward_baseline called on a GateNet parameter set");
    nn::Graph g;
    return g.value(forward_graph(g, p, events, nullptr, {mode, true}));
}

}  // namespace gatenet::model
