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
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "gatenet/error.hpp"

namespace gatenet::train {

struct Fold {
    std::vector<std::string> train;
    std::vector<std::string> validation;
};

struct FoldSplit {
    std::size_t k = 5;
    std::vector<Fold> folds;
};

/// Shuffles the sample ids and deals them into k validation folds; the
/// n % k remainder goes one each to the first folds.
inline FoldSplit kfold_split(const std::vector<std::string>& sample_ids, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw ConfigError("cross-validation needs k >= 2, got " + std::to_string(k));
    if (sample_ids.size() < k)
        throw ConfigError("cannot split " + std::to_string(sample_ids.size()) + " samples into " + std::to_string(k) +
                          " folds");
    std::vector<std::string> order = sample_ids;
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    FoldSplit split;
    split.k = k;
    const std::size_t base = order.size() / k, extra = order.size() % k;
    std::size_t start = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t len = base + (f < extra ? 1 : 0);
        Fold fold;
        for (std::size_t i = 0; i < order.size(); ++i) {
            if (i >= start && i < start + len) fold.validation.push_back(order[i]);
            else fold.train.push_back(order[i]);
        }
        split.folds.push_back(std::move(fold));
        start += len;
    }
    return split;
}

}  // namespace gatenet::train
