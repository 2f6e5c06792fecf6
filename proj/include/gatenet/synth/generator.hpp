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

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gatenet/error.hpp"
#include "gatenet/io/types.hpp"

namespace gatenet::synth {

struct PopulationSpec {
    std::string class_name;
    std::vector<double> mean;
    std::vector<double> covariance;  // row-major n_markers x n_markers
    double frequency = 0.0;

    static std::vector<double> isotropic(std::size_t m, double variance) {
        std::vector<double> c(m * m, 0.0);
        for (std::size_t i = 0; i < m; ++i) c[i * m + i] = variance;
        return c;
    }
};

struct BatchEffectSpec {
    double shift_scale = 0.0;
    double gain_min = 1.0;
    double gain_max = 1.0;
    double pop_jitter = 0.0;
    /// When set, the per-sample shift is one scalar draw times this unit
    /// direction; otherwise every marker gets its own draw.
    std::optional<std::vector<double>> shift_direction;
};

struct SynthDatasetSpec {
    std::vector<std::string> markers;
    std::vector<PopulationSpec> populations;
    BatchEffectSpec batch_effect;
    std::size_t n_samples = 10;
    double events_median = 1000.0;
    double events_dispersion = 0.0;  // sigma of log(event count)
    std::uint64_t seed = 0;

    std::size_t n_markers() const noexcept { return markers.size(); }
    std::vector<std::string> class_names() const {
        std::vector<std::string> out;
        for (const auto& p : populations) out.push_back(p.class_name);
        return out;
    }

    void validate() const {
        const std::size_t m = markers.size();
        if (m == 0) throw SpecError("synthetic spec needs at least one marker");
        if (populations.empty()) throw SpecError("synthetic spec needs at least one population");
        if (n_samples < 1) throw SpecError("n_samples must be at least 1");
        if (!(events_median >= 1.0) || !(events_dispersion >= 0.0))
            throw SpecError("events_median must be >= 1 and events_dispersion >= 0");
        double total = 0.0;
        for (const auto& p : populations) {
            if (p.mean.size() != m) throw SpecError("population '" + p.class_name + "' mean has the wrong length");
            if (p.covariance.size() != m * m)
                throw SpecError("population '" + p.class_name + "' covariance must be " + std::to_string(m) + "x" +
                                std::to_string(m));
            if (!(p.frequency > 0.0 && p.frequency <= 1.0))
                throw SpecError("population '" + p.class_name + "' frequency must lie in (0, 1]");
            total += p.frequency;
        }
        if (std::abs(total - 1.0) > 1e-9) throw SpecError("population frequencies sum to " + std::to_string(total));
        const auto& b = batch_effect;
        if (!(b.shift_scale >= 0.0)) throw SpecError("shift_scale must be >= 0");
        if (!(b.gain_min > 0.0) || !(b.gain_max >= b.gain_min)) throw SpecError("gain range must lie in (0, inf)");
        if (!(b.pop_jitter >= 0.0)) throw SpecError("pop_jitter must be >= 0");
        if (b.shift_direction) {
            if (b.shift_direction->size() != m) throw SpecError("shift_direction has the wrong length");
            double n2 = 0.0;
            for (double v : *b.shift_direction) n2 += v * v;
            if (std::abs(n2 - 1.0) > 1e-9) throw SpecError("shift_direction must have unit length");
        }
    }
};

/// Factor A with A * A^T == cov. Throws SpecError unless cov is symmetric
/// positive semi-definite.
inline Eigen::MatrixXd psd_factor(const std::vector<double>& cov, std::size_t m, const std::string& name = "") {
    Eigen::MatrixXd c(m, m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) c(i, j) = cov[i * m + j];
    double scale = c.cwiseAbs().maxCoeff();
    if (!c.allFinite()) throw SpecError("covariance of '" + name + "' is not finite");
    if ((c - c.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, scale))
        throw SpecError("covariance of '" + name + "' is not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
    Eigen::VectorXd ev = es.eigenvalues();
    if (ev.minCoeff() < -1e-10 * std::max(1.0, scale))
        throw SpecError("covariance of '" + name + "' is not positive semi-definite (eigenvalue " +
                        std::to_string(ev.minCoeff()) + ")");
    ev = ev.cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal();
}

/// Per-sample batch-effect draws. Diagnostics only.
struct SampleTruth {
    std::string sample_id;
    std::vector<double> shift;
    std::vector<double> gain;
    std::vector<std::vector<double>> population_offsets;
};

/// Ground truth kept apart from the samples; nothing in training accepts it.
struct SynthGroundTruth {
    std::vector<SampleTruth> samples;
};

struct SynthDataset {
    std::vector<io::LabeledSample> samples;
    SynthGroundTruth truth;
};

inline std::string sample_name(std::size_t index) {
    std::string n = std::to_string(index + 1);
    return "sample_" + std::string(n.size() < 3 ? 3 - n.size() : 0, '0') + n;
}

inline std::uint64_t sample_seed(std::uint64_t seed, std::size_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x5eedu};
    std::uint32_t w[2];
    seq.generate(w, w + 2);
    return (static_cast<std::uint64_t>(w[0]) << 32) | w[1];
}

inline io::LabeledSample generate_sample(const SynthDatasetSpec& spec, std::size_t sample_index,
                                         SampleTruth* truth = nullptr) {
    spec.validate();
    const std::size_t m = spec.n_markers();
    const std::size_t c = spec.populations.size();
    std::vector<Eigen::MatrixXd> factors;
    for (const auto& p : spec.populations) factors.push_back(psd_factor(p.covariance, m, p.class_name));

    std::mt19937_64 rng(sample_seed(spec.seed, sample_index));
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto& b = spec.batch_effect;

    const std::size_t n = static_cast<std::size_t>(
        std::max(1.0, std::round(spec.events_median * std::exp(spec.events_dispersion * normal(rng)))));

    std::vector<double> shift(m, 0.0), gain(m, 1.0);
    if (b.shift_direction) {
        const double z = b.shift_scale * normal(rng);
        for (std::size_t j = 0; j < m; ++j) shift[j] = z * (*b.shift_direction)[j];
    } else {
        for (std::size_t j = 0; j < m; ++j) shift[j] = b.shift_scale * normal(rng);
    }
    std::uniform_real_distribution<double> gain_dist(b.gain_min, b.gain_max);
    for (std::size_t j = 0; j < m; ++j) gain[j] = b.gain_min == b.gain_max ? b.gain_min : gain_dist(rng);
    std::vector<std::vector<double>> offsets(c, std::vector<double>(m, 0.0));
    for (auto& o : offsets)
        for (auto& v : o) v = b.pop_jitter * normal(rng);

    std::vector<double> freqs;
    for (const auto& p : spec.populations) freqs.push_back(p.frequency);
    std::discrete_distribution<std::size_t> pick(freqs.begin(), freqs.end());

    std::vector<double> values(n * m);
    std::vector<int> labels(n);
    Eigen::VectorXd z(m);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = pick(rng);
        labels[i] = static_cast<int>(k);
        for (std::size_t j = 0; j < m; ++j) z[j] = normal(rng);
        const Eigen::VectorXd x = factors[k] * z;
        const auto& mu = spec.populations[k].mean;
        for (std::size_t j = 0; j < m; ++j) values[i * m + j] = gain[j] * (mu[j] + offsets[k][j] + x[j]) + shift[j];
    }

    io::LabeledSample s;
    s.events = io::EventTable(io::MarkerPanel{spec.markers}, n, std::move(values), sample_name(sample_index));
    s.labels = std::move(labels);
    s.class_names = spec.class_names();
    if (truth) *truth = {s.sample_id(), shift, gain, offsets};
    return s;
}

inline SynthDataset generate_dataset(const SynthDatasetSpec& spec) {
    spec.validate();
    SynthDataset d;
    d.samples.reserve(spec.n_samples);
    for (std::size_t i = 0; i < spec.n_samples; ++i) {
        SampleTruth t;
        d.samples.push_back(generate_sample(spec, i, &t));
        d.truth.samples.push_back(std::move(t));
    }
    return d;
}

inline std::vector<std::string> numbered(const std::string& prefix, std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 1; i <= n; ++i) out.push_back(prefix + std::to_string(i));
    return out;
}

/// separable | batch_hard | rare_class
inline SynthDatasetSpec benchmark_preset(const std::string& name) {
    SynthDatasetSpec s;
    s.markers = numbered("M", 4);
    const auto diag = [](double v) { return PopulationSpec::isotropic(4, v); };
    if (name == "separable") {
        s.populations = {{"pop1", {0, 0, 0, 0}, diag(1.0), 0.5},
                         {"pop2", {8, 0, 0, 0}, diag(1.0), 0.3},
                         {"pop3", {0, 8, 0, 0}, diag(1.0), 0.2}};
        s.n_samples = 4;
        s.events_median = 1000;
    } else if (name == "batch_hard") {
        // populations on a line along u, shifted per sample along the same line
        const double h = 0.5;
        s.populations = {{"pop1", {0, 0, 0, 0}, diag(0.25), 0.5},
                         {"pop2", {3 * h, 3 * h, 3 * h, 3 * h}, diag(0.25), 0.3},
                         {"pop3", {6 * h, 6 * h, 6 * h, 6 * h}, diag(0.25), 0.2}};
        s.batch_effect = {1.5, 0.9, 1.1, 0.1, std::vector<double>{h, h, h, h}};
        s.n_samples = 20;
        s.events_median = 2000;
    } else if (name == "rare_class") {
        s.populations = {{"major", {0, 0, 0, 0}, diag(1.0), 0.699},
                         {"minor", {4, 0, 0, 0}, diag(0.25), 0.3},
                         {"rare", {0, 3, 0, 0}, diag(0.0225), 0.001}};
        s.batch_effect = {0.3, 0.95, 1.05, 0.05, std::vector<double>{0.5, 0.5, 0.5, 0.5}};
        s.n_samples = 10;
        s.events_median = 5000;
    } else {
        throw SpecError("unknown preset '" + name + "' (expected separable, batch_hard or rare_class)");
    }
    return s;
}

}  // namespace gatenet::synth
