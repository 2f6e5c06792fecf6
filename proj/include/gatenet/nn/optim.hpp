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
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "gatenet/error.hpp"
#include "gatenet/nn/tensor.hpp"

namespace gatenet::nn {

/// Adam with bias-corrected moments. One moment pair per parameter, in the
/// order the parameters are passed to adam_step.
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.99;
    double epsilon = 1e-5;
    std::size_t step_count = 0;
    std::vector<Tensor> first_moment;
    std::vector<Tensor> second_moment;
};

/// Applies one Adam update with learning rate `lr`. Throws TrainingDivergence
/// naming the first parameter whose gradient is not finite; in that case no
/// parameter is modified.
inline void adam_step(std::span<Param* const> params, AdamState& state, double lr) {
    for (const Param* p : params)
        if (!p->grad.all_finite()) throw TrainingDivergence("non-finite gradient in parameter '" + p->name + "'", p->name);

    if (state.first_moment.empty()) {
        for (const Param* p : params) {
            state.first_moment.emplace_back(p->value.shape(), 0.0);
            state.second_moment.emplace_back(p->value.shape(), 0.0);
        }
    } else if (state.first_moment.size() != params.size()) {
        throw StateError("optimizer state tracks " + std::to_string(state.first_moment.size()) +
                         " parameters, got " + std::to_string(params.size()));
    }

    ++state.step_count;
    const double t = static_cast<double>(state.step_count);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        Param& p = *params[k];
        Tensor& m = state.first_moment[k];
        Tensor& v = state.second_moment[k];
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double g = p.grad[i];
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
            p.value[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + state.epsilon);
        }
    }
}

/// 1cycle learning-rate policy: cosine warm-up from max_lr/start_div to
/// max_lr, then cosine annealing to max_lr/final_div.
struct OneCycleSchedule {
    double max_lr = 0.002;
    std::size_t total_iters = 1;
    double warmup_fraction = 0.25;
    double start_div = 25.0;
    double final_div = 1e4;

    void validate() const {
        if (total_iters == 0) throw ConfigError("1cycle schedule needs total_iters >= 1");
        if (!(warmup_fraction > 0.0 && warmup_fraction < 1.0))
            throw ConfigError("1cycle warmup_fraction must lie in (0, 1)");
        if (!(start_div > 1.0 && final_div > 1.0)) throw ConfigError("1cycle divisors must exceed 1");
        if (!(max_lr > 0.0)) throw ConfigError("1cycle max_lr must be positive");
    }
};

namespace detail {
inline double cosine_interp(double from, double to, double pct) {
    const double w = (1.0 + std::cos(std::numbers::pi * pct)) / 2.0;
    return from * w + to * (1.0 - w);
}
}  // namespace detail

inline double onecycle_lr(std::size_t iter, const OneCycleSchedule& s) {
    s.validate();
    if (iter > s.total_iters)
        throw RangeError("iteration " + std::to_string(iter) + " outside [0, " + std::to_string(s.total_iters) + "]");
    const double warm = s.warmup_fraction * static_cast<double>(s.total_iters);
    const double it = static_cast<double>(iter);
    if (it <= warm) return detail::cosine_interp(s.max_lr / s.start_div, s.max_lr, it / warm);
    return detail::cosine_interp(s.max_lr, s.max_lr / s.final_div,
                                 (it - warm) / (static_cast<double>(s.total_iters) - warm));
}

}  // namespace gatenet::nn
