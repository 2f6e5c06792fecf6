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

// Forward and backward kernels for the layers GateNet is built from. All
// kernels are pure functions over explicit buffers; activations use a
// channels-last layout ([rows, channels]) so that a pointwise convolution over
// L positions and a dense layer over N events are the same affine map.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gatenet/error.hpp"
#include "gatenet/nn/tensor.hpp"

namespace gatenet::nn {

namespace detail {

inline void require_rank(const Tensor& t, std::size_t rank, const char* what) {
    if (t.rank() != rank)
        throw DimensionError(std::string(what) + " must have rank " + std::to_string(rank) + ", got shape " +
                             shape_string(t.shape()));
}

inline void require_axis(const char* what, std::size_t got, std::size_t want) {
    if (got != want)
        throw DimensionError(std::string(what) + ": expected " + std::to_string(want) + ", got " + std::to_string(got));
}

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::Map<RowMatrix> as_matrix(Tensor& t) {
    return {t.data(), static_cast<Eigen::Index>(t.dim(0)), static_cast<Eigen::Index>(t.size() / t.dim(0))};
}
inline Eigen::Map<const RowMatrix> as_matrix(const Tensor& t) {
    return {t.data(), static_cast<Eigen::Index>(t.dim(0)), static_cast<Eigen::Index>(t.size() / t.dim(0))};
}
inline Eigen::Map<Eigen::RowVectorXd> as_row(Tensor& t) { return {t.data(), static_cast<Eigen::Index>(t.size())}; }
inline Eigen::Map<const Eigen::RowVectorXd> as_row(const Tensor& t) {
    return {t.data(), static_cast<Eigen::Index>(t.size())};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Affine map over rows: out[n, o] = b[o] + sum_i w[o, i] * x[n, i]

inline Tensor affine_rows(const Tensor& x, const Tensor& w, const Tensor& b) {
    detail::require_rank(x, 2, "input");
    detail::require_rank(w, 2, "weight");
    detail::require_rank(b, 1, "bias");
    const std::size_t n = x.dim(0), in = x.dim(1), out = w.dim(0);
    detail::require_axis("weight input channels (axis 1) vs input channels", w.dim(1), in);
    detail::require_axis("bias length vs weight output channels (axis 0)", b.dim(0), out);

    Tensor y = Tensor::uninitialized({n, out});
    auto ym = detail::as_matrix(y);
    ym.noalias() = detail::as_matrix(x) * detail::as_matrix(w).transpose();
    ym.rowwise() += detail::as_row(b);
    return y;
}

/// Accumulates gradients of affine_rows. Any of dx/dw/db may be null.
inline void affine_rows_backward(const Tensor& x, const Tensor& w, const Tensor& dy, Tensor* dx, Tensor* dw,
                                 Tensor* db) {
    const auto g = detail::as_matrix(dy);
    if (dx) detail::as_matrix(*dx).noalias() += g * detail::as_matrix(w);
    if (dw) detail::as_matrix(*dw).noalias() += g.transpose() * detail::as_matrix(x);
    if (db) detail::as_row(*db) += g.colwise().sum();
}

/// Dense layer over a batch of rows.
inline Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b) { return affine_rows(x, w, b); }

/// Kernel-size-1 convolution over a channels-first signal x[C_in, L].
inline Tensor pointwise_conv1d(const Tensor& x, const Tensor& w, const Tensor& b) {
    detail::require_rank(x, 2, "conv input [C_in, L]");
    detail::require_rank(w, 2, "conv weight [C_out, C_in]");
    detail::require_axis("conv weight axis 1 (C_in) vs input axis 0 (C_in)", w.dim(1), x.dim(0));
    return transpose(affine_rows(transpose(x), w, b));
}

// ---------------------------------------------------------------------------
// Batch normalization over rows of x[N, C].

enum class Mode { train, eval };

struct BatchNormOptions {
    double epsilon = 1e-5;
    double momentum = 0.1;
    bool update_running = true;
};

struct RunningStats {
    Tensor mean;
    Tensor var;

    RunningStats() = default;
    explicit RunningStats(std::size_t channels) : mean({channels}, 0.0), var({channels}, 1.0) {}
};

/// What the backward pass needs from a batchnorm forward call.
struct BatchNormCache {
    Mode mode = Mode::train;
    Tensor normalized;            // x_hat
    std::vector<double> inv_std;  // per channel
};

inline Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& shift, RunningStats& stats, Mode mode,
                        const BatchNormOptions& opt = {}, BatchNormCache* cache = nullptr) {
    detail::require_rank(x, 2, "batchnorm input [N, C]");
    const std::size_t n = x.dim(0), c = x.dim(1);
    detail::require_axis("batchnorm gamma length vs channels", gamma.size(), c);
    detail::require_axis("batchnorm shift length vs channels", shift.size(), c);
    detail::require_axis("batchnorm running mean length vs channels", stats.mean.size(), c);

    std::vector<double> mean(c, 0.0), inv_std(c, 0.0);
    const double* xp = x.data();
    if (mode == Mode::train) {
        if (n < 2) throw DegenerateBatchError("batchnorm in train mode needs at least 2 rows, got " + std::to_string(n));
        std::vector<double> var(c, 0.0);
        double* mp = mean.data();
        double* vp = var.data();
        for (std::size_t r = 0; r < n; ++r) {
            const double* xr = xp + r * c;
            for (std::size_t j = 0; j < c; ++j) mp[j] += xr[j];
        }
        for (std::size_t j = 0; j < c; ++j) mp[j] /= static_cast<double>(n);
        for (std::size_t r = 0; r < n; ++r) {
            const double* xr = xp + r * c;
            for (std::size_t j = 0; j < c; ++j) {
                const double d = xr[j] - mp[j];
                vp[j] += d * d;
            }
        }
        for (std::size_t j = 0; j < c; ++j) {
            var[j] /= static_cast<double>(n);
            inv_std[j] = 1.0 / std::sqrt(var[j] + opt.epsilon);
        }
        if (opt.update_running) {
            // Running variance tracks the unbiased estimate.
            const double unbias = static_cast<double>(n) / static_cast<double>(n - 1);
            for (std::size_t j = 0; j < c; ++j) {
                stats.mean[j] = (1.0 - opt.momentum) * stats.mean[j] + opt.momentum * mean[j];
                stats.var[j] = (1.0 - opt.momentum) * stats.var[j] + opt.momentum * var[j] * unbias;
            }
        }
    } else {
        for (std::size_t j = 0; j < c; ++j) {
            mean[j] = stats.mean[j];
            inv_std[j] = 1.0 / std::sqrt(stats.var[j] + opt.epsilon);
        }
    }

    Tensor y = Tensor::uninitialized({n, c});
    const double* mp = mean.data();
    const double* sp = inv_std.data();
    const double* gp = gamma.data();
    const double* bp = shift.data();
    double* yp = y.data();
    if (cache) {
        Tensor xhat = Tensor::uninitialized({n, c});
        double* hp = xhat.data();
        for (std::size_t r = 0; r < n * c; r += c)
            for (std::size_t j = 0; j < c; ++j) {
                const double h = (xp[r + j] - mp[j]) * sp[j];
                hp[r + j] = h;
                yp[r + j] = gp[j] * h + bp[j];
            }
        cache->mode = mode;
        cache->normalized = std::move(xhat);
        cache->inv_std = std::move(inv_std);
    } else {
        for (std::size_t r = 0; r < n * c; r += c)
            for (std::size_t j = 0; j < c; ++j) yp[r + j] = gp[j] * ((xp[r + j] - mp[j]) * sp[j]) + bp[j];
    }
    return y;
}

/// Accumulates batchnorm gradients. In train mode the batch statistics are
/// differentiated through; in eval mode the map is affine.
inline void batchnorm_backward(const BatchNormCache& cache, const Tensor& gamma, const Tensor& dy, Tensor* dx,
                               Tensor* dgamma, Tensor* dshift) {
    const std::size_t n = dy.dim(0), c = dy.dim(1);
    const double* hp = cache.normalized.data();
    const double* gp = dy.data();
    std::vector<double> sum_dy(c, 0.0), sum_dy_h(c, 0.0);
    double* s1 = sum_dy.data();
    double* s2 = sum_dy_h.data();
    for (std::size_t r = 0; r < n * c; r += c)
        for (std::size_t j = 0; j < c; ++j) {
            s1[j] += gp[r + j];
            s2[j] += gp[r + j] * hp[r + j];
        }
    if (dgamma)
        for (std::size_t j = 0; j < c; ++j) (*dgamma)[j] += sum_dy_h[j];
    if (dshift)
        for (std::size_t j = 0; j < c; ++j) (*dshift)[j] += sum_dy[j];
    if (!dx) return;
    std::vector<double> k(c);
    for (std::size_t j = 0; j < c; ++j) k[j] = gamma[j] * cache.inv_std[j];
    const double* kp = k.data();
    double* dxp = dx->data();
    if (cache.mode == Mode::eval) {
        for (std::size_t r = 0; r < n * c; r += c)
            for (std::size_t j = 0; j < c; ++j) dxp[r + j] += gp[r + j] * kp[j];
        return;
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t j = 0; j < c; ++j) {
        s1[j] *= inv_n;
        s2[j] *= inv_n;
    }
    for (std::size_t r = 0; r < n * c; r += c)
        for (std::size_t j = 0; j < c; ++j) dxp[r + j] += kp[j] * (gp[r + j] - s1[j] - hp[r + j] * s2[j]);
}

// ---------------------------------------------------------------------------
// Elementwise and reduction kernels.

inline Tensor relu(const Tensor& x) {
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
    return y;
}

/// Accumulates dx += dy where the forward output was positive.
inline void relu_backward(const Tensor& y, const Tensor& dy, Tensor& dx) {
    for (std::size_t i = 0; i < y.size(); ++i)
        if (y[i] > 0.0) dx[i] += dy[i];
}

/// Mean over the last axis of x[C, L]; the pooling kernel spans all of L.
inline Tensor avgpool_last_axis(const Tensor& x) {
    if (x.rank() != 2) throw DimensionError("avgpool expects [C, L], got " + shape_string(x.shape()));
    const std::size_t c = x.dim(0), l = x.dim(1);
    Tensor y({c});
    for (std::size_t j = 0; j < c; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < l; ++k) s += x[j * l + k];
        y[j] = s / static_cast<double>(l);
    }
    return y;
}

/// Channels-last pooling: x[B*K, C] viewed as B groups of K rows, averaged per group.
inline Tensor mean_pool_groups(const Tensor& x, std::size_t group) {
    detail::require_rank(x, 2, "pool input [B*K, C]");
    if (group == 0) throw EmptyContextError("average pooling over zero context events");
    if (x.dim(0) % group != 0)
        throw DimensionError("pool input rows " + std::to_string(x.dim(0)) + " not divisible by group size " +
                             std::to_string(group));
    const std::size_t b = x.dim(0) / group, c = x.dim(1);
    Tensor y({b, c});
    const double scale = 1.0 / static_cast<double>(group);
    for (std::size_t g = 0; g < b; ++g) {
        double* yr = y.data() + g * c;
        for (std::size_t k = 0; k < group; ++k) {
            const double* xr = x.data() + (g * group + k) * c;
            for (std::size_t j = 0; j < c; ++j) yr[j] += xr[j];
        }
        for (std::size_t j = 0; j < c; ++j) yr[j] *= scale;
    }
    return y;
}

inline void mean_pool_groups_backward(const Tensor& dy, std::size_t group, Tensor& dx) {
    const std::size_t b = dy.dim(0), c = dy.dim(1);
    const double scale = 1.0 / static_cast<double>(group);
    for (std::size_t g = 0; g < b; ++g)
        for (std::size_t k = 0; k < group; ++k) {
            double* dxr = dx.data() + (g * group + k) * c;
            const double* dyr = dy.data() + g * c;
            for (std::size_t j = 0; j < c; ++j) dxr[j] += dyr[j] * scale;
        }
}

/// Row-wise softmax of logits[N, C].
inline Tensor softmax(const Tensor& z) {
    detail::require_rank(z, 2, "softmax input [N, C]");
    const std::size_t n = z.dim(0), c = z.dim(1);
    Tensor p({n, c});
    for (std::size_t r = 0; r < n; ++r) {
        double mx = z[r * c];
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, z[r * c + j]);
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            p[r * c + j] = std::exp(z[r * c + j] - mx);
            s += p[r * c + j];
        }
        for (std::size_t j = 0; j < c; ++j) p[r * c + j] /= s;
    }
    return p;
}

/// dz += J_softmax^T dp, using the forward output p.
inline void softmax_backward(const Tensor& p, const Tensor& dp, Tensor& dz) {
    const std::size_t n = p.dim(0), c = p.dim(1);
    for (std::size_t r = 0; r < n; ++r) {
        double dot = 0.0;
        for (std::size_t j = 0; j < c; ++j) dot += p[r * c + j] * dp[r * c + j];
        for (std::size_t j = 0; j < c; ++j) dz[r * c + j] += p[r * c + j] * (dp[r * c + j] - dot);
    }
}

/// Column concatenation of a[N, C1] and b[N, C2].
inline Tensor concat_columns(const Tensor& a, const Tensor& b) {
    detail::require_rank(a, 2, "concat lhs");
    detail::require_rank(b, 2, "concat rhs");
    detail::require_axis("concat row count (axis 0)", b.dim(0), a.dim(0));
    const std::size_t n = a.dim(0), ca = a.dim(1), cb = b.dim(1);
    Tensor y = Tensor::uninitialized({n, ca + cb});
    for (std::size_t r = 0; r < n; ++r) {
        std::copy_n(a.data() + r * ca, ca, y.data() + r * (ca + cb));
        std::copy_n(b.data() + r * cb, cb, y.data() + r * (ca + cb) + ca);
    }
    return y;
}

}  // namespace gatenet::nn
