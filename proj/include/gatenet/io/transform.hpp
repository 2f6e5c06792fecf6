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
#include <string>
#include <vector>

#include "gatenet/error.hpp"
#include "gatenet/io/types.hpp"

namespace gatenet::io {

enum class TransformKind { none, asinh, zscore };

/// Per-marker mean and (population) standard deviation of training events.
struct ZScoreStats {
    std::vector<std::string> markers;
    std::vector<double> mean;
    std::vector<double> stddev;
};

struct TransformSpec {
    TransformKind kind = TransformKind::none;
    double cofactor = 5.0;  // asinh only
    ZScoreStats stats;      // zscore only

    static TransformSpec none() { return {}; }
    static TransformSpec asinh(double cofactor) { return {TransformKind::asinh, cofactor, {}}; }
    static TransformSpec zscore(ZScoreStats s) { return {TransformKind::zscore, 5.0, std::move(s)}; }
};

inline const char* to_string(TransformKind k) {
    switch (k) {
        case TransformKind::none: return "none";
        case TransformKind::asinh: return "asinh";
        case TransformKind::zscore: return "zscore";
    }
    return "none";
}

inline TransformKind parse_transform_kind(const std::string& s) {
    if (s == "none") return TransformKind::none;
    if (s == "asinh") return TransformKind::asinh;
    if (s == "zscore") return TransformKind::zscore;
    throw ConfigError("unknown transform '" + s + "' (expected none, asinh or zscore)");
}

/// Fits z-score statistics over the pooled events of the given training tables.
/// A marker with zero spread is an error naming that marker.
inline ZScoreStats fit_zscore(std::span<const EventTable* const> training) {
    if (training.empty()) throw ValidationError("z-score fit needs at least one training sample");
    const MarkerPanel& panel = training.front()->panel;
    const std::size_t m = panel.size();
    std::vector<double> sum(m, 0.0);
    std::size_t n = 0;
    for (const EventTable* t : training) {
        if (t->panel != panel) throw PanelMismatch("training samples disagree on the marker panel");
        for (std::size_t i = 0; i < t->n_events; ++i)
            for (std::size_t j = 0; j < m; ++j) sum[j] += t->at(i, j);
        n += t->n_events;
    }
    if (n == 0) throw ValidationError("z-score fit over zero events");
    ZScoreStats s;
    s.markers = panel.names;
    s.mean.resize(m);
    for (std::size_t j = 0; j < m; ++j) s.mean[j] = sum[j] / static_cast<double>(n);
    std::vector<double> ss(m, 0.0);
    for (const EventTable* t : training)
        for (std::size_t i = 0; i < t->n_events; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                const double d = t->at(i, j) - s.mean[j];
                ss[j] += d * d;
            }
    s.stddev.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
        s.stddev[j] = std::sqrt(ss[j] / static_cast<double>(n));
        if (!(s.stddev[j] > 0.0))
            throw ValidationError("marker '" + panel.names[j] + "' has zero standard deviation in the training data");
    }
    return s;
}

inline EventTable transform_intensities(const EventTable& events, const TransformSpec& spec) {
    EventTable out = events;
    switch (spec.kind) {
        case TransformKind::none:
            break;
        case TransformKind::asinh:
            if (!(spec.cofactor > 0.0)) throw ConfigError("asinh cofactor must be positive");
            for (double& v : out.intensities) v = std::asinh(v / spec.cofactor);
            break;
        case TransformKind::zscore: {
            const auto& s = spec.stats;
            if (s.markers != events.panel.names)
                throw PanelMismatch("z-score statistics were fitted on a different marker panel");
            const std::size_t m = events.n_markers();
            for (std::size_t j = 0; j < m; ++j)
                if (!(s.stddev[j] > 0.0))
                    throw ValidationError("marker '" + s.markers[j] + "' has zero standard deviation");
            for (std::size_t i = 0; i < out.n_events; ++i)
                for (std::size_t j = 0; j < m; ++j) {
                    double& v = out.intensities[i * m + j];
                    v = (v - s.mean[j]) / s.stddev[j];
                }
            break;
        }
    }
    return out;
}

}  // namespace gatenet::io
