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

// Hierarchical gating strategies. Input samples carry, per event, the deepest
// population that event was gated into; a subdataset keeps the events inside
// its parent population and relabels them by which of its subpopulations they
// fall under.

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gatenet/error.hpp"
#include "gatenet/io/types.hpp"

namespace gatenet::io {

struct SubdatasetSpec {
    std::string name;
    std::optional<std::string> parent;  // nullopt for the root stage
    std::vector<std::string> subpopulations;
    /// Class for parent events that fall in none of the subpopulations.
    std::optional<std::string> remainder;
    std::pair<std::string, std::string> display_markers;

    std::vector<std::string> class_names() const {
        auto out = subpopulations;
        if (remainder) out.push_back(*remainder);
        return out;
    }
};

class HierarchySpec {
public:
    HierarchySpec() = default;
    explicit HierarchySpec(std::vector<SubdatasetSpec> stages) : stages_(std::move(stages)) { validate(); }

    const std::vector<SubdatasetSpec>& stages() const noexcept { return stages_; }

    const SubdatasetSpec& find(const std::string& name) const {
        for (const auto& s : stages_)
            if (s.name == name) return s;
        throw ConfigError("unknown subdataset '" + name + "'");
    }

    bool knows_population(const std::string& population) const { return parent_of_.count(population) > 0; }

    /// population, its parent, its grandparent, ... up to a root population.
    std::vector<std::string> lineage(const std::string& population) const {
        std::vector<std::string> out;
        std::optional<std::string> cur = population;
        while (cur) {
            auto it = parent_of_.find(*cur);
            if (it == parent_of_.end()) throw ValidationError("population '" + *cur + "' is not part of the hierarchy");
            out.push_back(*cur);
            cur = it->second;
        }
        return out;
    }

private:
    void validate() {
        parent_of_.clear();
        for (const auto& s : stages_) {
            if (s.subpopulations.empty()) throw ConfigError("subdataset '" + s.name + "' lists no subpopulations");
            if (s.parent && !parent_of_.count(*s.parent))
                throw ConfigError("subdataset '" + s.name + "': parent population '" + *s.parent +
                                  "' is not a subpopulation of an earlier stage");
            for (const auto& p : s.subpopulations) {
                if (parent_of_.count(p))
                    throw ConfigError("population '" + p + "' appears in more than one subdataset");
                parent_of_[p] = s.parent;
            }
        }
    }

    std::vector<SubdatasetSpec> stages_;
    std::map<std::string, std::optional<std::string>> parent_of_;
};

/// The nine-stage peripheral blood / CSF gating strategy.
inline HierarchySpec rheumaflow_hierarchy() {
    return HierarchySpec({
        {"Leuko", std::nullopt, {"Leukocytes", "Rest"}, std::nullopt, {"FSC", "SSC"}},
        {"Granulo-Lympho-Mono", "Leukocytes", {"Granulocytes", "Lymphocytes", "Monocytes"}, "Rest", {"CD45", "SSC"}},
        {"NK-NKT-T", "Lymphocytes", {"NKT cells", "NK cells", "T cells"}, "Rest", {"CD3", "CD56"}},
        {"B-Plasma", "Lymphocytes", {"B cells", "Plasma cells"}, "Rest", {"CD19", "CD138"}},
        {"CD56CD16", "NK cells", {"CD56+", "CD56dim CD16+"}, "Rest", {"CD56", "CD16"}},
        {"CD14CD16", "Monocytes", {"CD14+CD16+", "CD14+CD16-", "CD14-CD16+"}, "Rest", {"CD14", "CD16"}},
        {"CD4CD8", "T cells", {"CD4+ T cells", "CD8+ T cells"}, "Rest", {"CD4", "CD8"}},
        {"CD4HLADR", "CD4+ T cells", {"HLA-DR+ CD4+ T cells"}, "Rest", {"CD4", "HLA-DR"}},
        {"CD8HLADR", "CD8+ T cells", {"HLA-DR+ CD8+ T cells"}, "Rest", {"CD8", "HLA-DR"}},
    });
}

struct DerivedSubdataset {
    std::vector<LabeledSample> samples;
    /// Samples with no event inside the parent population. They stay in
    /// `samples` with zero events.
    std::vector<std::string> empty_samples;
};

inline DerivedSubdataset derive_subdataset(std::span<const LabeledSample> samples, const HierarchySpec& hierarchy,
                                           const std::string& subdataset) {
    const SubdatasetSpec& stage = hierarchy.find(subdataset);
    const auto classes = stage.class_names();
    DerivedSubdataset out;
    for (const auto& s : samples) {
        s.validate();
        // Per input class: the child class index, or -1 when outside the parent.
        std::vector<int> mapping(s.class_names.size(), -1);
        for (std::size_t c = 0; c < s.class_names.size(); ++c) {
            const auto lineage = hierarchy.lineage(s.class_names[c]);
            const bool inside = !stage.parent ||
                                std::find(lineage.begin(), lineage.end(), *stage.parent) != lineage.end();
            if (!inside) continue;
            for (std::size_t k = 0; k < stage.subpopulations.size() && mapping[c] < 0; ++k)
                if (std::find(lineage.begin(), lineage.end(), stage.subpopulations[k]) != lineage.end())
                    mapping[c] = static_cast<int>(k);
            if (mapping[c] < 0) {
                if (!stage.remainder)
                    throw ValidationError("sample '" + s.sample_id() + "': population '" + s.class_names[c] +
                                          "' lies inside '" + *stage.parent + "' but in none of the subpopulations of '" +
                                          stage.name + "'");
                mapping[c] = static_cast<int>(stage.subpopulations.size());
            }
        }
        std::vector<std::size_t> keep;
        std::vector<int> labels;
        for (std::size_t i = 0; i < s.labels.size(); ++i) {
            const int m = mapping[static_cast<std::size_t>(s.labels[i])];
            if (m < 0) continue;
            keep.push_back(i);
            labels.push_back(m);
        }
        LabeledSample child;
        child.events = s.events.select(keep);
        child.labels = std::move(labels);
        child.class_names = classes;
        child.expert_id = s.expert_id;
        if (child.n_events() == 0) out.empty_samples.push_back(s.sample_id());
        out.samples.push_back(std::move(child));
    }
    return out;
}

}  // namespace gatenet::io
