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

// Reverse-mode differentiation over a recorded sequence of kernel calls.
// Only the operations GateNet needs are provided.

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "gatenet/error.hpp"
#include "gatenet/nn/kernels.hpp"
#include "gatenet/nn/tensor.hpp"

namespace gatenet::nn {

/// Handle to a node on a Graph.
struct Var {
    std::size_t id = static_cast<std::size_t>(-1);
    bool valid() const noexcept { return id != static_cast<std::size_t>(-1); }
};

class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;
    Graph(Graph&&) = default;
    Graph& operator=(Graph&&) = default;

    /// A constant leaf; no gradient flows out of the graph through it.
    Var input(Tensor value) {
        Node n;
        n.owned = std::move(value);
        return push(std::move(n));
    }

    /// A trainable leaf. Backward accumulates into param.grad.
    Var param(Param& p) {
        Node n;
        n.borrowed = &p.value;
        n.param = &p;
        n.needs_grad = true;
        return push(std::move(n));
    }

    const Tensor& value(Var v) const { return node(v).get(); }

    /// Gradient of the last backward() target with respect to v.
    const Tensor& grad(Var v) const {
        const Node& n = node(v);
        if (n.grad.empty()) throw StateError("no gradient recorded for node " + std::to_string(v.id));
        return n.grad;
    }

    Var affine(Var x, Var w, Var b) {
        Node n;
        n.owned = affine_rows(value(x), value(w), value(b));
        n.inputs = {x, w, b};
        n.backward = [](Graph& g, Node& self) {
            const Var x = self.inputs[0], w = self.inputs[1], b = self.inputs[2];
            affine_rows_backward(g.value(x), g.value(w), self.grad, g.grad_buffer(x), g.grad_buffer(w),
                                 g.grad_buffer(b));
        };
        return push(std::move(n), {x, w, b});
    }

    Var batchnorm(Var x, Var gamma, Var shift, RunningStats& stats, Mode mode, const BatchNormOptions& opt = {}) {
        auto cache = std::make_shared<BatchNormCache>();
        Node n;
        n.owned = nn::batchnorm(value(x), value(gamma), value(shift), stats, mode, opt, cache.get());
        n.inputs = {x, gamma, shift};
        n.backward = [cache](Graph& g, Node& self) {
            batchnorm_backward(*cache, g.value(self.inputs[1]), self.grad, g.grad_buffer(self.inputs[0]),
                               g.grad_buffer(self.inputs[1]), g.grad_buffer(self.inputs[2]));
        };
        return push(std::move(n), {x, gamma, shift});
    }

    Var relu(Var x) {
        Node n;
        n.owned = nn::relu(value(x));
        n.inputs = {x};
        n.backward = [](Graph& g, Node& self) {
            if (Tensor* dx = g.grad_buffer(self.inputs[0])) relu_backward(self.owned, self.grad, *dx);
        };
        return push(std::move(n), {x});
    }

    /// Averages consecutive groups of `group` rows (the context pooling).
    Var mean_pool(Var x, std::size_t group) {
        Node n;
        n.owned = mean_pool_groups(value(x), group);
        n.inputs = {x};
        n.backward = [group](Graph& g, Node& self) {
            if (Tensor* dx = g.grad_buffer(self.inputs[0])) mean_pool_groups_backward(self.grad, group, *dx);
        };
        return push(std::move(n), {x});
    }

    Var concat(Var a, Var b) {
        Node n;
        n.owned = concat_columns(value(a), value(b));
        n.inputs = {a, b};
        n.backward = [](Graph& g, Node& self) {
            const std::size_t rows = self.grad.dim(0), width = self.grad.dim(1);
            const std::size_t ca = g.value(self.inputs[0]).dim(1), cb = width - ca;
            if (Tensor* da = g.grad_buffer(self.inputs[0]))
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t j = 0; j < ca; ++j) (*da)[r * ca + j] += self.grad[r * width + j];
            if (Tensor* db = g.grad_buffer(self.inputs[1]))
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t j = 0; j < cb; ++j) (*db)[r * cb + j] += self.grad[r * width + ca + j];
        };
        return push(std::move(n), {a, b});
    }

    /// affine -> batchnorm -> optional ReLU as one node. Only the normalized
    /// values and the output are kept, which matters for the [B*K, C] context
    /// activations.
    Var affine_batchnorm(Var x, Var w, Var b, Var gamma, Var shift, RunningStats& stats, Mode mode,
                         const BatchNormOptions& opt, bool apply_relu) {
        auto cache = std::make_shared<BatchNormCache>();
        Node n;
        {
            const Tensor z = affine_rows(value(x), value(w), value(b));
            n.owned = nn::batchnorm(z, value(gamma), value(shift), stats, mode, opt, cache.get());
        }
        if (apply_relu)
            for (double& v : n.owned.values()) v = v > 0.0 ? v : 0.0;
        n.inputs = {x, w, b, gamma, shift};
        n.backward = [cache, apply_relu](Graph& g, Node& self) {
            const Tensor* dy = &self.grad;
            Tensor masked;
            if (apply_relu) {
                masked = self.grad;
                const double* y = self.owned.data();
                double* d = masked.data();
                for (std::size_t i = 0; i < masked.size(); ++i)
                    if (!(y[i] > 0.0)) d[i] = 0.0;
                dy = &masked;
            }
            Tensor dz(dy->shape());
            batchnorm_backward(*cache, g.value(self.inputs[3]), *dy, &dz, g.grad_buffer(self.inputs[3]),
                               g.grad_buffer(self.inputs[4]));
            masked = Tensor();
            affine_rows_backward(g.value(self.inputs[0]), g.value(self.inputs[1]), dz, g.grad_buffer(self.inputs[0]),
                                 g.grad_buffer(self.inputs[1]), g.grad_buffer(self.inputs[2]));
        };
        return push(std::move(n), {x, w, b, gamma, shift});
    }

    Var softmax(Var z) {
        Node n;
        n.owned = nn::softmax(value(z));
        n.inputs = {z};
        n.backward = [](Graph& g, Node& self) {
            if (Tensor* dz = g.grad_buffer(self.inputs[0])) softmax_backward(self.owned, self.grad, *dz);
        };
        return push(std::move(n), {z});
    }

    /// Sum of all elements, as a scalar node.
    Var sum(Var x) {
        double s = 0.0;
        for (double v : value(x).values()) s += v;
        Node n;
        n.owned = Tensor({1}, s);
        n.inputs = {x};
        n.backward = [](Graph& g, Node& self) {
            if (Tensor* dx = g.grad_buffer(self.inputs[0]))
                for (double& d : dx->values()) d += self.grad[0];
        };
        return push(std::move(n), {x});
    }

    /// Attaches an externally evaluated scalar loss L(x) together with dL/dx.
    Var scalar_loss(Var x, double loss, Tensor dloss_dx) {
        if (dloss_dx.shape() != value(x).shape())
            throw DimensionError("loss gradient shape " + shape_string(dloss_dx.shape()) + " does not match input " +
                                 shape_string(value(x).shape()));
        Node n;
        n.owned = Tensor({1}, loss);
        n.inputs = {x};
        n.backward = [local = std::move(dloss_dx)](Graph& g, Node& self) {
            if (Tensor* dx = g.grad_buffer(self.inputs[0]))
                for (std::size_t i = 0; i < dx->size(); ++i) (*dx)[i] += self.grad[0] * local[i];
        };
        return push(std::move(n), {x});
    }

    /// Propagates d(loss)/d(node) back to every parameter leaf. Parameter
    /// gradients accumulate across calls; callers zero them between steps.
    void backward(Var loss) {
        if (nodes_.empty() || !loss.valid() || loss.id >= nodes_.size())
            throw StateError("backward called before a forward pass was recorded");
        Node& top = nodes_[loss.id];
        if (top.get().size() != 1) throw StateError("backward target must be a scalar, got shape " +
                                                    shape_string(top.get().shape()));
        for (Node& n : nodes_) n.grad = Tensor();
        if (!top.needs_grad) return;
        top.grad = Tensor({1}, 1.0);
        for (std::size_t i = loss.id + 1; i-- > 0;) {
            Node& n = nodes_[i];
            if (n.grad.empty()) continue;
            if (n.param) {
                Tensor& pg = n.param->grad;
                for (std::size_t k = 0; k < pg.size(); ++k) pg[k] += n.grad[k];
            }
            if (n.backward) n.backward(*this, n);
        }
    }

    void clear() { nodes_.clear(); }
    std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        Tensor owned;
        const Tensor* borrowed = nullptr;
        Param* param = nullptr;
        std::vector<Var> inputs;
        std::function<void(Graph&, Node&)> backward;
        Tensor grad;
        bool needs_grad = false;

        const Tensor& get() const { return borrowed ? *borrowed : owned; }
    };

    const Node& node(Var v) const {
        if (!v.valid() || v.id >= nodes_.size()) throw StateError("unknown graph node");
        return nodes_[v.id];
    }

    /// Lazily allocated gradient slot, or null for nodes that need none.
    Tensor* grad_buffer(Var v) {
        Node& n = nodes_[v.id];
        if (!n.needs_grad) return nullptr;
        if (n.grad.empty()) n.grad = Tensor(n.get().shape(), 0.0);
        return &n.grad;
    }

    Var push(Node n, std::initializer_list<Var> deps = {}) {
        for (Var d : deps)
            if (nodes_[d.id].needs_grad) n.needs_grad = true;
        nodes_.push_back(std::move(n));
        return Var{nodes_.size() - 1};
    }

    std::vector<Node> nodes_;
};

}  // namespace gatenet::nn
