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
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <vector>

#include "gatenet/synth/generator.hpp"
#include "gatenet/synth/spec_file.hpp"

using namespace gatenet;
using namespace gatenet::synth;

namespace {

using Centroids = std::vector<std::vector<double>>;

Centroids fit_centroids(const std::vector<const io::LabeledSample*>& samples, std::size_t c) {
    const std::size_t m = samples.front()->events.n_markers();
    Centroids mu(c, std::vector<double>(m, 0.0));
    std::vector<double> n(c, 0.0);
    for (const auto* s : samples)
        for (std::size_t i = 0; i < s->n_events(); ++i) {
            const auto k = static_cast<std::size_t>(s->labels[i]);
            n[k] += 1.0;
            for (std::size_t j = 0; j < m; ++j) mu[k][j] += s->events.at(i, j);
        }
    for (std::size_t k = 0; k < c; ++k)
        for (auto& v : mu[k]) v /= n[k];
    return mu;
}

double centroid_accuracy(const io::LabeledSample& s, const Centroids& mu) {
    std::size_t hit = 0;
    for (std::size_t i = 0; i < s.n_events(); ++i) {
        std::size_t best = 0;
        double best_d = INFINITY;
        for (std::size_t k = 0; k < mu.size(); ++k) {
            double d = 0.0;
            for (std::size_t j = 0; j < mu[k].size(); ++j) d += std::pow(s.events.at(i, j) - mu[k][j], 2);
            if (d < best_d) best_d = d, best = k;
        }
        hit += static_cast<int>(best) == s.labels[i];
    }
    return double(hit) / double(s.n_events());
}

// Centroids re-fit on the sample itself.
double per_sample_oracle(const io::LabeledSample& s, std::size_t c) { return centroid_accuracy(s, fit_centroids({&s}, c)); }

// Centroids fit on all other samples, applied to each held-out sample.
double cross_sample_accuracy(const std::vector<io::LabeledSample>& samples, std::size_t c) {
    double acc = 0.0;
    for (std::size_t h = 0; h < samples.size(); ++h) {
        std::vector<const io::LabeledSample*> rest;
        for (std::size_t i = 0; i < samples.size(); ++i)
            if (i != h) rest.push_back(&samples[i]);
        acc += centroid_accuracy(samples[h], fit_centroids(rest, c));
    }
    return acc / double(samples.size());
}

SynthDatasetSpec two_marker_spec() {
    SynthDatasetSpec s;
    s.markers = {"A", "B"};
    s.populations = {{"p", {1.0, -2.0}, {1.0, 0.3, 0.3, 0.5}, 0.9}, {"q", {-3.0, 4.0}, {0.25, 0.0, 0.0, 2.0}, 0.1}};
    s.n_samples = 1;
    s.events_median = 100000;
    s.seed = 17;
    return s;
}

}  // namespace

TEST(Generator, NoBatchEffectMeansMatchSpec) {
    const auto spec = two_marker_spec();
    const auto s = generate_sample(spec, 0);
    const auto mu = fit_centroids({&s}, 2);
    std::vector<double> n(2, 0.0);
    for (int y : s.labels) n[static_cast<std::size_t>(y)] += 1.0;
    for (std::size_t k = 0; k < 2; ++k)
        for (std::size_t j = 0; j < 2; ++j) {
            const double se = std::sqrt(spec.populations[k].covariance[j * 2 + j] / n[k]);
            EXPECT_NEAR(mu[k][j], spec.populations[k].mean[j], 3 * se) << "class " << k << " marker " << j;
        }
}

TEST(Generator, ClassCountsAreBinomial) {
    const auto s = generate_sample(two_marker_spec(), 0);
    ASSERT_EQ(s.n_events(), 100000u);
    const double minority = static_cast<double>(std::count(s.labels.begin(), s.labels.end(), 1));
    EXPECT_NEAR(minority, 1e4, 3 * std::sqrt(1e5 * 0.1 * 0.9));
}

TEST(Generator, CovarianceUnaffectedByShiftUpToGain) {
    auto spec = two_marker_spec();
    spec.batch_effect = {5.0, 0.8, 1.2, 0.0, std::nullopt};
    SampleTruth t;
    const auto s = generate_sample(spec, 0, &t);
    for (std::size_t k = 0; k < 2; ++k) {
        const auto mu = fit_centroids({&s}, 2)[k];
        double c[2][2] = {{0, 0}, {0, 0}}, n = 0;
        for (std::size_t i = 0; i < s.n_events(); ++i) {
            if (s.labels[i] != static_cast<int>(k)) continue;
            n += 1;
            for (std::size_t a = 0; a < 2; ++a)
                for (std::size_t b = 0; b < 2; ++b)
                    c[a][b] += (s.events.at(i, a) - mu[a]) * (s.events.at(i, b) - mu[b]);
        }
        for (std::size_t a = 0; a < 2; ++a)
            for (std::size_t b = 0; b < 2; ++b) {
                const double expect = t.gain[a] * t.gain[b] * spec.populations[k].covariance[a * 2 + b];
                EXPECT_NEAR(c[a][b] / (n - 1), expect, 0.05 * std::max(1.0, std::abs(expect)) * (k ? 3 : 1));
            }
    }
}

TEST(Generator, ShiftIsPerSample) {
    auto spec = two_marker_spec();
    spec.events_median = 10;
    spec.batch_effect.shift_scale = 1.0;
    SampleTruth a, b;
    generate_sample(spec, 0, &a);
    generate_sample(spec, 1, &b);
    EXPECT_NE(a.shift, b.shift);
}

TEST(Generator, DeterministicGivenSeed) {
    auto spec = benchmark_preset("batch_hard");
    spec.n_samples = 3;
    spec.events_median = 200;
    const auto a = generate_dataset(spec), b = generate_dataset(spec);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(a.samples[i].events.intensities, b.samples[i].events.intensities);
        EXPECT_EQ(a.samples[i].labels, b.samples[i].labels);
        EXPECT_EQ(a.truth.samples[i].shift, b.truth.samples[i].shift);
    }
    EXPECT_EQ(a.samples[1].sample_id(), "sample_002");
    spec.seed = 1;
    EXPECT_NE(generate_dataset(spec).samples[0].events.intensities, a.samples[0].events.intensities);
}

TEST(Generator, EventCountDispersion) {
    auto spec = two_marker_spec();
    spec.events_median = 500;
    spec.events_dispersion = 0.5;
    spec.n_samples = 201;
    const auto d = generate_dataset(spec);
    std::vector<double> logs;
    for (const auto& s : d.samples) logs.push_back(std::log(double(s.n_events())));
    std::sort(logs.begin(), logs.end());
    EXPECT_NEAR(std::exp(logs[100]), 500.0, 500.0 * 0.15);
}

TEST(Generator, ShiftStdMatchesScale) {
    auto spec = benchmark_preset("batch_hard");
    spec.n_samples = 2000;
    spec.events_median = 1;
    const auto d = generate_dataset(spec);
    const auto& dir = *spec.batch_effect.shift_direction;
    double s2 = 0.0;
    for (const auto& t : d.truth.samples) {
        const double z = std::inner_product(t.shift.begin(), t.shift.end(), dir.begin(), 0.0);
        s2 += z * z;
    }
    const double sd = std::sqrt(s2 / 2000.0);
    EXPECT_NEAR(sd, spec.batch_effect.shift_scale, 3 * spec.batch_effect.shift_scale / std::sqrt(4000.0));
}

TEST(Generator, LargeShiftsMakeSamplesOverlap) {
    auto spec = benchmark_preset("separable");
    spec.batch_effect.shift_scale = 3 * 8.0;
    spec.n_samples = 12;
    spec.events_median = 300;
    const auto d = generate_dataset(spec);
    EXPECT_LT(cross_sample_accuracy(d.samples, 3), 0.9);
    for (const auto& s : d.samples) EXPECT_GE(per_sample_oracle(s, 3), 0.99);
}

TEST(Generator, RejectsBadCovariance) {
    auto spec = two_marker_spec();
    spec.populations[0].covariance = {1.0, 2.0, 2.0, 1.0};
    EXPECT_THROW(generate_sample(spec, 0), SpecError);
    spec.populations[0].covariance = {1.0, 0.2, 0.1, 1.0};
    EXPECT_THROW(generate_sample(spec, 0), SpecError);
    spec = two_marker_spec();
    spec.populations[1].frequency = 0.2;
    EXPECT_THROW(generate_sample(spec, 0), SpecError);
    spec = two_marker_spec();
    spec.batch_effect.shift_direction = std::vector<double>{1.0, 1.0};
    EXPECT_THROW(generate_sample(spec, 0), SpecError);
}

TEST(Generator, SingularCovarianceAllowed) {
    auto spec = two_marker_spec();
    spec.populations[0].covariance = {1.0, 1.0, 1.0, 1.0};
    const auto s = generate_sample(spec, 0);
    for (std::size_t i = 0; i < s.n_events(); ++i)
        if (s.labels[i] == 0) {
            EXPECT_NEAR(s.events.at(i, 0) - 1.0, s.events.at(i, 1) + 2.0, 1e-9);
        }
}

TEST(Presets, SeparableIsSeparablePerSample) {
    const auto d = generate_dataset(benchmark_preset("separable"));
    for (const auto& s : d.samples) EXPECT_GE(per_sample_oracle(s, 3), 0.99);
}

TEST(Presets, BatchHardNeedsSampleContext) {
    const auto d = generate_dataset(benchmark_preset("batch_hard"));
    ASSERT_EQ(d.samples.size(), 20u);
    double oracle = 0.0;
    for (const auto& s : d.samples) {
        const double a = per_sample_oracle(s, 3);
        EXPECT_GE(a, 0.99);
        oracle += a / 20.0;
    }
    const double cross = cross_sample_accuracy(d.samples, 3);
    EXPECT_LE(cross, 0.8);
    EXPECT_GE(oracle - cross, 0.19);
}

TEST(Presets, RareClassShare) {
    const auto spec = benchmark_preset("rare_class");
    EXPECT_EQ(spec.populations[2].frequency, 0.001);
    const auto d = generate_dataset(spec);
    std::size_t rare = 0, total = 0;
    for (const auto& s : d.samples) {
        rare += static_cast<std::size_t>(std::count(s.labels.begin(), s.labels.end(), 2));
        total += s.n_events();
    }
    EXPECT_NEAR(double(rare) / double(total), 0.001, 3 * std::sqrt(0.001 / double(total)));
}

TEST(Presets, UnknownName) { EXPECT_THROW(benchmark_preset("nope"), SpecError); }

TEST(SpecFile, ParsesFullSpec) {
    const auto s = parse_spec_string(R"(# comment
markers = CD3, CD4
n_samples = 3
events_median = 250
events_dispersion = 0.2
seed = 9
shift_scale = 0.5
shift_direction = 0.6, 0.8
gain_min = 0.9
gain_max = 1.1
pop_jitter = 0.05
population.T.mean = 1, 2
population.T.cov = diag 0.25   # isotropic
population.T.frequency = 0.75
population.B.mean = -1, 0
population.B.cov = 1, 0.5, 0.5, 1
population.B.frequency = 0.25
)");
    EXPECT_EQ(s.markers, (std::vector<std::string>{"CD3", "CD4"}));
    EXPECT_EQ(s.n_samples, 3u);
    EXPECT_EQ(s.seed, 9u);
    EXPECT_EQ(s.class_names(), (std::vector<std::string>{"T", "B"}));
    EXPECT_EQ(s.populations[0].covariance, (std::vector<double>{0.25, 0, 0, 0.25}));
    EXPECT_EQ(s.populations[1].covariance, (std::vector<double>{1, 0.5, 0.5, 1}));
    EXPECT_EQ(*s.batch_effect.shift_direction, (std::vector<double>{0.6, 0.8}));
    EXPECT_EQ(s.batch_effect.gain_max, 1.1);
}

TEST(SpecFile, PresetBaseWithOverrides) {
    const auto s = parse_spec_string("preset = batch_hard\nn_samples = 4\nseed = 3\n");
    const auto p = benchmark_preset("batch_hard");
    EXPECT_EQ(s.n_samples, 4u);
    EXPECT_EQ(s.populations.size(), p.populations.size());
    EXPECT_EQ(s.batch_effect.shift_scale, p.batch_effect.shift_scale);
}

TEST(SpecFile, Errors) {
    EXPECT_THROW(parse_spec_string("n_samples = 2\npreset = separable\n"), SpecError);
    EXPECT_THROW(parse_spec_string("preset = separable\nbogus = 1\n"), SpecError);
    EXPECT_THROW(parse_spec_string("preset = separable\nn_samples\n"), SpecError);
    EXPECT_THROW(parse_spec_string("preset = separable\nn_samples = two\n"), SpecError);
    EXPECT_THROW(parse_spec_string("preset = separable\npopulation.X.mean = 0, 0, 0, 0\npopulation.X.frequency = 1\n"),
                 SpecError);
    EXPECT_THROW(parse_spec_string("markers = A\npopulation.X.mean = 0\npopulation.X.cov = -1\npopulation.X.frequency = 1\n"),
                 SpecError);
    try {
        parse_spec_string("preset = separable\n\nseed = x\n");
        FAIL();
    } catch (const SpecError& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
    EXPECT_THROW(load_spec("/nonexistent/spec.txt"), ConfigError);
}

TEST(SpecFile, LoadFromFile) {
    const auto path = std::filesystem::temp_directory_path() / "gatenet_spec_test.txt";
    std::ofstream(path) << "preset = rare_class\nn_samples = 2\n";
    EXPECT_EQ(load_spec(path.string()).n_samples, 2u);
    std::filesystem::remove(path);
}
