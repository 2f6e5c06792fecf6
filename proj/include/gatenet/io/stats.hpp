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
#include <span>
#include <vector>

#include "gatenet/error.hpp"
#include "gatenet/io/types.hpp"

namespace gatenet::io {

struct DatasetStats {
    std::size_t n_samples = 0;
    double events_mean = 0.0;
    double events_std = 0.0;
    std::size_t n_markers = 0;
    std::size_t n_classes = 0;
    std::size_t minority_class = 0;
    /// Percentage of each sample's events in the minority class, mean and std.
    double minority_pct_mean = 0.0;
    double minority_pct_std = 0.0;
};

namespace stats_detail {
inline void mean_std(std::span<const double> xs, double& mean, double& sd) {
    mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    sd = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
}
}  // namespace stats_detail

/// Dataset summary. The minority class is the class with the fewest events
/// over the whole dataset among classes that occur at all.
inline DatasetStats compute_dataset_stats(std::span<const LabeledSample> samples) {
    if (samples.empty()) throw ValidationError("dataset statistics of an empty dataset");
    DatasetStats st;
    st.n_samples = samples.size();
    st.n_markers = samples.front().events.n_markers();
    st.n_classes = samples.front().n_classes();
    std::vector<double> sizes;
    std::vector<std::size_t> totals(st.n_classes, 0);
    for (const auto& s : samples) {
        s.validate();
        if (s.n_classes() != st.n_classes) throw ValidationError("samples disagree on the number of classes");
        sizes.push_back(static_cast<double>(s.n_events()));
        for (int y : s.labels) ++totals[static_cast<std::size_t>(y)];
    }
    stats_detail::mean_std(sizes, st.events_mean, st.events_std);
    bool found = false;
    for (std::size_t c = 0; c < st.n_classes; ++c)
        if (totals[c] > 0 && (!found || totals[c] < totals[st.minority_class])) {
            st.minority_class = c;
            found = true;
        }
    std::vector<double> pct;
    for (const auto& s : samples) {
        if (s.n_events() == 0) continue;
        std::size_t k = 0;
        for (int y : s.labels) k += static_cast<std::size_t>(y) == st.minority_class;
        pct.push_back(100.0 * static_cast<double>(k) / static_cast<double>(s.n_events()));
    }
    if (!pct.empty()) stats_detail::mean_std(pct, st.minority_pct_mean, st.minority_pct_std);
    return st;
}

}  // namespace gatenet::io
