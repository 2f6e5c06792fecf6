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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "gatenet/error.hpp"
#include "gatenet/imbalance/sampler.hpp"
#include "gatenet/imbalance/weights.hpp"
#include "gatenet/io/transform.hpp"
#include "gatenet/io/types.hpp"
#include "gatenet/model/checkpoint.hpp"
#include "gatenet/model/gatenet.hpp"
#include "gatenet/nn/graph.hpp"
#include "gatenet/nn/optim.hpp"

namespace gatenet::train {

using ModelConfig = std::variant<model::GateNetConfig, model::BaselineConfig>;

struct TrainConfig {
    std::size_t batch_size = 1024;
    std::size_t max_iters = 5000;
    std::size_t max_epochs = 10;
    std::size_t min_iters_small_data = 50;

    double max_lr = 0.002;
    double warmup_fraction = 0.25;
    double start_div = 25.0;
    double final_div = 1e4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.99;
    double adam_epsilon = 1e-5;

    double loss_beta = 0.99;
    double sampling_beta = 0.999;
    double focal_gamma = 5.0;
    /// Switches for the imbalance ablation: off means unit class weights and
    /// uniform event sampling respectively.
    bool class_weighted_loss = true;
    bool weighted_sampling = true;

    io::TransformKind transform = io::TransformKind::zscore;
    double asinh_cofactor = 5.0;

    std::uint64_t seed = 0;

    void validate() const {
        if (batch_size == 0 || max_iters == 0 || max_epochs == 0 || min_iters_small_data == 0)
            throw ConfigError("batch size, iteration and epoch limits must be positive");
        if (!(max_lr > 0.0)) throw ConfigError("max_lr must be positive");
        if (!(loss_beta >= 0.0 && loss_beta < 1.0)) throw ConfigError("loss beta must lie in [0, 1)");
        if (!(sampling_beta >= 0.0 && sampling_beta < 1.0)) throw ConfigError("sampling beta must lie in [0, 1)");
        if (focal_gamma < 0.0) throw ConfigError("focal gamma must be non-negative");
    }
};

/// Batch size that guarantees min_iters_small_data iterations within
/// max_epochs epochs, capped at the configured batch size.
inline std::size_t effective_batch_size(std::size_t n_train_events, const TrainConfig& cfg) {
    if (n_train_events == 0) throw ValidationError("no training events");
    const std::size_t adaptive = n_train_events * cfg.max_epochs / cfg.min_iters_small_data;
    return std::max<std::size_t>(1, std::min(cfg.batch_size, adaptive));
}

/// Iterations until either max_iters or max_epochs passes over the data.
inline std::size_t planned_iterations(std::size_t n_train_events, std::size_t batch, const TrainConfig& cfg) {
    return std::max<std::size_t>(1, std::min(cfg.max_iters, cfg.max_epochs * n_train_events / batch));
}

struct IterationRecord {
    std::size_t iteration = 0;
    double loss = 0.0;
    double lr = 0.0;
    std::size_t saturated = 0;
};

struct TrainHistory {
    std::size_t n_train_events = 0;
    std::size_t batch_size = 0;
    std::size_t total_iters = 0;
    std::vector<std::uint64_t> class_counts;
    std::vector<double> loss_weights;
    std::vector<IterationRecord> iterations;
};

/// Everything needed to apply a trained model to new samples.
struct TrainedModel {
    model::NetworkParams params;
    std::vector<std::string> class_names;
    io::MarkerPanel panel;
    io::TransformSpec transform;

    model::Checkpoint to_checkpoint(nlohmann::json metadata = nlohmann::json::object()) const {
        return {params, class_names, panel, transform, std::move(metadata)};
    }
    static TrainedModel from_checkpoint(model::Checkpoint ck) {
        return {std::move(ck.params), std::move(ck.class_names), std::move(ck.panel), std::move(ck.transform)};
    }
};

struct TrainResult {
    TrainedModel model;
    TrainHistory history;
};

/// Derives an independent stream seed from a base seed and a tag.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                      static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32)};
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

namespace detail {

inline std::size_t config_markers(const ModelConfig& mc) {
    return std::visit([](const auto& c) { return c.n_markers; }, mc);
}
inline std::size_t config_classes(const ModelConfig& mc) {
    return std::visit([](const auto& c) { return c.n_classes; }, mc);
}

inline io::TransformSpec fit_transform(std::span<const io::LabeledSample* const> samples, const TrainConfig& cfg) {
    switch (cfg.transform) {
        case io::TransformKind::none: return io::TransformSpec::none();
        case io::TransformKind::asinh: return io::TransformSpec::asinh(cfg.asinh_cofactor);
        case io::TransformKind::zscore: {
            std::vector<const io::EventTable*> tables;
            for (const auto* s : samples) tables.push_back(&s->events);
            return io::TransformSpec::zscore(io::fit_zscore(tables));
        }
    }
    return io::TransformSpec::none();
}

/// Copies rows of `table` into consecutive rows of dst starting at dst_row.
inline void gather_rows(const io::EventTable& table, std::span<const std::size_t> rows, nn::Tensor& dst,
                        std::size_t dst_row) {
    const std::size_t m = table.n_markers();
    double* out = dst.data() + dst_row * m;
    for (std::size_t r : rows) {
        const auto src = table.row(r);
        std::copy(src.begin(), src.end(), out);
        out += m;
    }
}

}  // namespace detail

using ProgressFn = std::function<void(const IterationRecord&, std::size_t total)>;

/// Trains a model on the given samples. Transform statistics, class counts,
/// sampler weights and batchnorm statistics are all derived from these
/// samples only.
inline TrainResult train(const ModelConfig& model_config, std::span<const io::LabeledSample> train_samples,
                         const TrainConfig& cfg, const ProgressFn& progress = {}) {
    cfg.validate();
    std::vector<const io::LabeledSample*> used;
    for (const auto& s : train_samples)
        if (s.n_events() > 0) used.push_back(&s);
    if (used.empty()) throw ValidationError("training needs at least one sample with at least one event");
    const io::MarkerPanel& panel = used.front()->events.panel;
    const auto& class_names = used.front()->class_names;
    for (const auto* s : used) {
        s->validate();
        if (s->events.panel != panel)
            throw PanelMismatch("training sample '" + s->sample_id() + "' has a different marker panel");
        if (s->class_names != class_names)
            throw ValidationError("training sample '" + s->sample_id() + "' has a different class set");
    }
    if (detail::config_markers(model_config) != panel.size())
        throw ConfigError("model expects " + std::to_string(detail::config_markers(model_config)) +
                          " markers, data has " + std::to_string(panel.size()));
    if (detail::config_classes(model_config) != class_names.size())
        throw ConfigError("model expects " + std::to_string(detail::config_classes(model_config)) +
                          " classes, data has " + std::to_string(class_names.size()));

    TrainResult result;
    result.model.panel = panel;
    result.model.class_names = class_names;
    result.model.transform = detail::fit_transform(used, cfg);
    result.model.params = std::visit([](const auto& c) { return model::init_params(c); }, model_config);
    model::NetworkParams& params = result.model.params;

    std::vector<io::EventTable> tables;
    std::vector<int> labels;
    std::vector<std::pair<std::size_t, std::size_t>> origin;  // (sample, row) per global event
    for (std::size_t s = 0; s < used.size(); ++s) {
        tables.push_back(io::transform_intensities(used[s]->events, result.model.transform));
        for (std::size_t r = 0; r < used[s]->n_events(); ++r) {
            labels.push_back(used[s]->labels[r]);
            origin.emplace_back(s, r);
        }
    }
    const std::size_t n_events = labels.size();
    const std::size_t n_classes = class_names.size();
    const std::size_t m = panel.size();

    TrainHistory& hist = result.history;
    hist.n_train_events = n_events;
    hist.class_counts = imbalance::class_counts(labels, n_classes);
    // Batchnorm in train mode needs two rows.
    hist.batch_size = std::max<std::size_t>(2, effective_batch_size(n_events, cfg));
    hist.total_iters = planned_iterations(n_events, hist.batch_size, cfg);

    imbalance::FocalLossConfig focal;
    focal.gamma = cfg.focal_gamma;
    focal.class_weights = cfg.class_weighted_loss ? imbalance::effective_number_weights(hist.class_counts, cfg.loss_beta)
                                                  : imbalance::ClassWeights::uniform(n_classes);
    hist.loss_weights = focal.class_weights.weights;

    imbalance::EventSampler sampler(labels, n_classes, {cfg.sampling_beta, derive_seed(cfg.seed, 1)});
    imbalance::Rng uniform_rng(derive_seed(cfg.seed, 2));
    imbalance::Rng context_rng(derive_seed(cfg.seed, 3));
    std::vector<imbalance::ContextSampler> ctx_samplers;
    if (params.uses_context())
        for (const auto& t : tables) ctx_samplers.emplace_back(t.n_events, params.n_context);

    nn::OneCycleSchedule sched{cfg.max_lr, hist.total_iters, cfg.warmup_fraction, cfg.start_div, cfg.final_div};
    nn::AdamState adam;
    adam.beta1 = cfg.adam_beta1;
    adam.beta2 = cfg.adam_beta2;
    adam.epsilon = cfg.adam_epsilon;
    auto param_list = params.parameters();

    const std::size_t b = hist.batch_size;
    const std::size_t k = params.uses_context() ? params.n_context : 0;
    nn::Tensor events({b, m});
    nn::Tensor contexts;
    if (k) contexts = nn::Tensor({b * k, m});
    std::vector<std::size_t> batch(b), ctx_idx;
    std::vector<int> targets(b);
    hist.iterations.reserve(hist.total_iters);

    for (std::size_t it = 0; it < hist.total_iters; ++it) {
        const double lr = nn::onecycle_lr(it, sched);
        if (cfg.weighted_sampling) {
            for (auto& i : batch) i = sampler.next();
        } else {
            std::uniform_int_distribution<std::size_t> pick(0, n_events - 1);
            for (auto& i : batch) i = pick(uniform_rng);
        }
        for (std::size_t r = 0; r < b; ++r) {
            const auto [s, row] = origin[batch[r]];
            targets[r] = labels[batch[r]];
            const std::size_t one[1] = {row};
            detail::gather_rows(tables[s], one, events, r);
            if (k) {
                ctx_idx.clear();
                ctx_samplers[s].draw_into(context_rng, ctx_idx);
                detail::gather_rows(tables[s], ctx_idx, contexts, r * k);
            }
        }

        nn::Graph g;
        const nn::Var probs = model::forward_graph(g, params, events, k ? &contexts : nullptr, {nn::Mode::train, true});
        auto fl = imbalance::focal_loss(g.value(probs), targets, focal);
        IterationRecord rec{it, fl.value, lr, fl.saturated};
        if (!std::isfinite(fl.value))
            throw TrainingDivergence("non-finite loss at iteration " + std::to_string(it) + " (lr " +
                                     std::to_string(lr) + ", " + std::to_string(fl.saturated) +
                                     " saturated probabilities)");
        const nn::Var loss = g.scalar_loss(probs, fl.value, std::move(fl.grad));
        params.zero_grad();
        g.backward(loss);
        try {
            nn::adam_step(param_list, adam, lr);
        } catch (const TrainingDivergence& e) {
            throw TrainingDivergence(std::string(e.what()) + " at iteration " + std::to_string(it) + " (lr " +
                                         std::to_string(lr) + ", " + std::to_string(fl.saturated) +
                                         " saturated probabilities)",
                                     e.parameter());
        }
        hist.iterations.push_back(rec);
        if (progress) progress(rec, hist.total_iters);
    }
    return result;
}

struct Prediction {
    std::vector<int> labels;
    nn::Tensor probs;  // [n_events, n_classes]
};

/// Reorders the columns of `events` to the model's panel. Extra markers are
/// ignored; missing ones are an error listing them.
inline io::EventTable align_panel(const io::EventTable& events, const io::MarkerPanel& panel) {
    if (events.panel == panel) return events;
    const auto missing = events.panel.missing(panel);
    if (!missing.empty()) {
        std::string list;
        for (const auto& n : missing) list += (list.empty() ? "" : ", ") + n;
        throw PanelMismatch("sample '" + events.sample_id + "' lacks markers required by the model: " + list);
    }
    io::EventTable out;
    out.panel = panel;
    out.sample_id = events.sample_id;
    out.n_events = events.n_events;
    out.intensities.resize(events.n_events * panel.size());
    std::vector<std::size_t> cols;
    for (const auto& n : panel.names) cols.push_back(*events.panel.index_of(n));
    for (std::size_t i = 0; i < events.n_events; ++i)
        for (std::size_t j = 0; j < cols.size(); ++j) out.intensities[i * panel.size() + j] = events.at(i, cols[j]);
    return out;
}

/// Eval-mode prediction. Each of the n_context_draws passes draws a fresh
/// context per event (all events of one pass before the next), and the
/// probabilities are averaged. A pass consumes `rng` exactly as a
/// single-draw call would. Ties in the argmax go to the lowest class.
inline Prediction predict_sample(TrainedModel& m, const io::EventTable& sample, std::size_t n_context_draws,
                                 imbalance::Rng& rng, std::size_t chunk = 256) {
    if (n_context_draws == 0) throw ConfigError("n_context_draws must be at least 1");
    if (sample.n_events == 0) throw ValidationError("cannot predict an empty sample");
    const io::EventTable table = io::transform_intensities(align_panel(sample, m.panel), m.transform);
    model::NetworkParams& p = m.params;
    const std::size_t n = table.n_events, c = p.n_classes, mk = p.n_markers;
    const std::size_t k = p.uses_context() ? p.n_context : 0;
    const std::size_t draws = k ? n_context_draws : 1;

    Prediction out;
    out.probs = nn::Tensor({n, c}, 0.0);
    std::vector<std::size_t> rows, ctx_idx;
    for (std::size_t d = 0; d < draws; ++d) {
        std::vector<imbalance::ContextSampler> ctx;
        if (k) ctx.emplace_back(n, k);
        for (std::size_t start = 0; start < n; start += chunk) {
            const std::size_t len = std::min(chunk, n - start);
            rows.resize(len);
            for (std::size_t i = 0; i < len; ++i) rows[i] = start + i;
            nn::Tensor ev({len, mk});
            detail::gather_rows(table, rows, ev, 0);
            nn::Tensor cx;
            if (k) {
                cx = nn::Tensor({len * k, mk});
                for (std::size_t i = 0; i < len; ++i) {
                    ctx_idx.clear();
                    ctx.front().draw_into(rng, ctx_idx);
                    detail::gather_rows(table, ctx_idx, cx, i * k);
                }
            }
            nn::Graph g;
            const auto& probs = g.value(model::forward_graph(g, p, ev, k ? &cx : nullptr, {nn::Mode::eval, false}));
            for (std::size_t i = 0; i < len; ++i)
                for (std::size_t j = 0; j < c; ++j) out.probs[(start + i) * c + j] += probs[i * c + j];
        }
    }
    if (draws > 1)
        for (double& v : out.probs.values()) v /= static_cast<double>(draws);
    out.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < c; ++j)
            if (out.probs[i * c + j] > out.probs[i * c + best]) best = j;
        out.labels[i] = static_cast<int>(best);
    }
    return out;
}

}  // namespace gatenet::train
