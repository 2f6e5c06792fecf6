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

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gatenet/error.hpp"
#include "gatenet/io/types.hpp"

namespace gatenet::io {

struct Consensus {
    LabeledSample sample;
    /// Events where the top vote count was shared by several classes.
    std::size_t tie_count = 0;
};

/// Per-event majority vote over expert gatings of the same events. Ties go to
/// the lowest class index.
inline Consensus consensus_labels(std::span<const LabeledSample> experts) {
    if (experts.size() < 2) throw ValidationError("consensus needs at least two expert gatings");
    const LabeledSample& first = experts.front();
    for (const auto& e : experts) {
        e.validate();
        if (e.n_events() != first.n_events())
            throw AlignmentError("expert gatings of sample '" + first.sample_id() + "' disagree on event count (" +
                                 std::to_string(e.n_events()) + " vs " + std::to_string(first.n_events()) + ")");
        if (e.class_names != first.class_names)
            throw AlignmentError("expert gatings of sample '" + first.sample_id() + "' use different class sets");
    }
    const std::size_t c = first.n_classes();
    Consensus out;
    out.sample.events = first.events;
    out.sample.class_names = first.class_names;
    out.sample.labels.resize(first.n_events());
    std::vector<std::size_t> votes(c);
    for (std::size_t i = 0; i < first.n_events(); ++i) {
        std::fill(votes.begin(), votes.end(), 0);
        for (const auto& e : experts) ++votes[static_cast<std::size_t>(e.labels[i])];
        std::size_t best = 0, ties = 1;
        for (std::size_t k = 1; k < c; ++k) {
            if (votes[k] > votes[best]) {
                best = k;
                ties = 1;
            } else if (votes[k] == votes[best]) {
                ++ties;
            }
        }
        if (ties > 1) ++out.tie_count;
        out.sample.labels[i] = static_cast<int>(best);
    }
    return out;
}

}  // namespace gatenet::io
