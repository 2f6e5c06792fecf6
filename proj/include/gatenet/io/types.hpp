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
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "gatenet/error.hpp"

namespace gatenet::io {

/// Ordered, uniquely named measurement channels.
struct MarkerPanel {
    std::vector<std::string> names;

    MarkerPanel() = default;
    explicit MarkerPanel(std::vector<std::string> marker_names) : names(std::move(marker_names)) { validate(); }

    std::size_t size() const noexcept { return names.size(); }

    std::optional<std::size_t> index_of(const std::string& name) const {
        auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end()) return std::nullopt;
        return static_cast<std::size_t>(it - names.begin());
    }

    /// Names in `required` that this panel lacks.
    std::vector<std::string> missing(const MarkerPanel& required) const {
        std::vector<std::string> out;
        for (const auto& n : required.names)
            if (!index_of(n)) out.push_back(n);
        return out;
    }

    void validate() const {
        std::unordered_set<std::string> seen;
        for (const auto& n : names)
            if (!seen.insert(n).second) throw ValidationError("duplicate marker name '" + n + "'");
    }

    friend bool operator==(const MarkerPanel&, const MarkerPanel&) = default;
};

/// One sample's events as a row-major n_events x n_markers matrix.
struct EventTable {
    MarkerPanel panel;
    std::size_t n_events = 0;
    std::vector<double> intensities;
    std::string sample_id;

    EventTable() = default;
    EventTable(MarkerPanel p, std::size_t n, std::vector<double> values, std::string id = {})
        : panel(std::move(p)), n_events(n), intensities(std::move(values)), sample_id(std::move(id)) {
        if (intensities.size() != n_events * panel.size())
            throw ValidationError("event table '" + sample_id + "' holds " + std::to_string(intensities.size()) +
                                  " values for " + std::to_string(n_events) + " x " + std::to_string(panel.size()));
    }

    std::size_t n_markers() const noexcept { return panel.size(); }
    bool empty() const noexcept { return n_events == 0; }

    std::span<const double> row(std::size_t i) const { return {intensities.data() + i * n_markers(), n_markers()}; }
    std::span<double> row(std::size_t i) { return {intensities.data() + i * n_markers(), n_markers()}; }
    double at(std::size_t i, std::size_t j) const { return intensities[i * n_markers() + j]; }

    /// Rows selected by index, in the given order.
    EventTable select(std::span<const std::size_t> rows) const {
        EventTable out;
        out.panel = panel;
        out.sample_id = sample_id;
        out.n_events = rows.size();
        out.intensities.reserve(rows.size() * n_markers());
        for (std::size_t r : rows) {
            auto src = row(r);
            out.intensities.insert(out.intensities.end(), src.begin(), src.end());
        }
        return out;
    }

    /// Enforces n_events >= 1 and finite intensities.
    void validate() const {
        if (n_events == 0) throw ValidationError("sample '" + sample_id + "' has no events");
        for (std::size_t i = 0; i < intensities.size(); ++i)
            if (!std::isfinite(intensities[i]))
                throw ValidationError("sample '" + sample_id + "': non-finite intensity at event " +
                                      std::to_string(i / n_markers()) + ", marker '" +
                                      panel.names[i % n_markers()] + "'");
    }
};

/// Events plus one class label per event.
struct LabeledSample {
    EventTable events;
    std::vector<int> labels;
    std::vector<std::string> class_names;
    std::optional<std::string> expert_id;

    std::size_t n_events() const noexcept { return events.n_events; }
    std::size_t n_classes() const noexcept { return class_names.size(); }
    const std::string& sample_id() const noexcept { return events.sample_id; }

    void validate() const {
        if (labels.size() != events.n_events)
            throw ValidationError("sample '" + events.sample_id + "': " + std::to_string(labels.size()) +
                                  " labels for " + std::to_string(events.n_events) + " events");
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= class_names.size())
                throw ValidationError("sample '" + events.sample_id + "': label " + std::to_string(labels[i]) +
                                      " at event " + std::to_string(i) + " outside [0, " +
                                      std::to_string(class_names.size()) + ")");
    }
};

}  // namespace gatenet::io
