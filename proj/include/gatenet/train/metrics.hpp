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
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "gatenet/error.hpp"

namespace gatenet::train {

/// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
public:
    ConfusionMatrix() = default;
    explicit ConfusionMatrix(std::size_t n_classes) : n_(n_classes), counts_(n_classes * n_classes, 0) {}

    static ConfusionMatrix from_labels(std::span<const int> truth, std::span<const int> predicted, std::size_t n_classes) {
        if (truth.size() != predicted.size())
            throw AlignmentError("confusion matrix: " + std::to_string(truth.size()) + " true labels vs " +
                                 std::to_string(predicted.size()) + " predictions");
        ConfusionMatrix cm(n_classes);
        for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], predicted[i]);
        return cm;
    }

    static ConfusionMatrix from_rows(const std::vector<std::vector<std::uint64_t>>& rows) {
        ConfusionMatrix cm(rows.size());
        for (std::size_t t = 0; t < rows.size(); ++t) {
            if (rows[t].size() != rows.size()) throw DimensionError("confusion matrix must be square");
            for (std::size_t p = 0; p < rows.size(); ++p) cm.counts_[t * cm.n_ + p] = rows[t][p];
        }
        return cm;
    }

    void add(int truth, int predicted, std::uint64_t count = 1) {
        if (truth < 0 || predicted < 0 || static_cast<std::size_t>(truth) >= n_ ||
            static_cast<std::size_t>(predicted) >= n_)
            throw ValidationError("confusion matrix entry (" + std::to_string(truth) + ", " + std::to_string(predicted) +
                                  ") outside " + std::to_string(n_) + " classes");
        counts_[static_cast<std::size_t>(truth) * n_ + static_cast<std::size_t>(predicted)] += count;
    }

    void merge(const ConfusionMatrix& other) {
        if (other.n_ != n_) throw DimensionError("cannot merge confusion matrices of different size");
        for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    }

    std::size_t n_classes() const noexcept { return n_; }
    std::uint64_t operator()(std::size_t truth, std::size_t predicted) const { return counts_[truth * n_ + predicted]; }
    std::uint64_t total() const {
        std::uint64_t s = 0;
        for (auto c : counts_) s += c;
        return s;
    }
    const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }

private:
    std::size_t n_ = 0;
    std::vector<std::uint64_t> counts_;
};

struct ClassScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::uint64_t support = 0;
};

struct F1Report {
    std::vector<ClassScore> classes;
    double weighted_f1 = 0.0;
    double unweighted_f1 = 0.0;
    std::uint64_t total = 0;
};

/// Per-class precision, recall and F1 plus support-weighted and plain-mean
/// aggregates. Classes with zero support are left out of both aggregates.
/// Supports enter the weighted mean divided by their gcd, so equal supports
/// give bit-identical weighted and unweighted values.
inline F1Report f1_scores(const ConfusionMatrix& cm) {
    const std::size_t n = cm.n_classes();
    F1Report r;
    r.total = cm.total();
    if (r.total == 0) throw ValidationError("F1 scores of an empty confusion matrix");
    r.classes.resize(n);
    std::uint64_t g = 0;
    for (std::size_t c = 0; c < n; ++c) {
        std::uint64_t tp = cm(c, c), row = 0, col = 0;
        for (std::size_t k = 0; k < n; ++k) {
            row += cm(c, k);
            col += cm(k, c);
        }
        ClassScore& s = r.classes[c];
        s.support = row;
        s.precision = col ? static_cast<double>(tp) / static_cast<double>(col) : 0.0;
        s.recall = row ? static_cast<double>(tp) / static_cast<double>(row) : 0.0;
        s.f1 = (s.precision + s.recall) > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
        g = std::gcd(g, row);
    }
    double weight_sum = 0.0, counted = 0.0;
    for (const ClassScore& s : r.classes) {
        if (s.support == 0) continue;
        const double w = static_cast<double>(s.support / g);
        weight_sum += w;
        counted += 1.0;
        r.weighted_f1 += w * s.f1;
        r.unweighted_f1 += s.f1;
    }
    r.weighted_f1 /= weight_sum;
    r.unweighted_f1 /= counted;
    return r;
}

/// Linearly interpolated percentile (q in [0, 100]) of unsorted values.
inline double percentile(std::vector<double> values, double q) {
    if (values.empty()) throw ValidationError("percentile of an empty set");
    std::sort(values.begin(), values.end());
    const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

struct Distribution {
    double median = 0.0;
    double p25 = 0.0;
    double p75 = 0.0;
    std::size_t n = 0;
};

inline Distribution summarize(const std::vector<double>& values) {
    return {percentile(values, 50.0), percentile(values, 25.0), percentile(values, 75.0), values.size()};
}

inline void mean_std(std::span<const double> xs, double& mean, double& sd) {
    mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    sd = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
}

}  // namespace gatenet::train
