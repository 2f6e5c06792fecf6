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
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gatenet/error.hpp"
#include "gatenet/synth/generator.hpp"

namespace gatenet::synth {

// Plain-text spec format, one `key = value` per line, `#` starts a comment:
//
//   preset = batch_hard            # optional base, applied first
//   markers = CD3, CD4, CD8
//   n_samples = 20
//   events_median = 2000
//   events_dispersion = 0.3
//   seed = 7
//   shift_scale = 1.5
//   shift_direction = 0.577, 0.577, 0.577
//   gain_min = 0.9
//   gain_max = 1.1
//   pop_jitter = 0.1
//   population.T.mean = 0, 0, 0
//   population.T.cov = diag 0.25   # or m*m row-major values
//   population.T.frequency = 0.5
//
// Populations keep the order in which their names first appear. Declaring
// any population replaces the preset's populations.

namespace detail {

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

inline double to_double(const std::string& key, const std::string& v, std::size_t line) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw SpecError("line " + std::to_string(line) + ": '" + key + "' expects a number, got '" + v + "'");
    }
}

inline std::vector<double> to_doubles(const std::string& key, const std::string& v, std::size_t line) {
    std::vector<double> out;
    for (const auto& s : split_list(v)) out.push_back(to_double(key, s, line));
    return out;
}

inline std::uint64_t to_uint(const std::string& key, const std::string& v, std::size_t line) {
    try {
        std::size_t used = 0;
        const unsigned long long u = std::stoull(v, &used);
        if (used != v.size() || v.front() == '-') throw std::invalid_argument(v);
        return u;
    } catch (const std::exception&) {
        throw SpecError("line " + std::to_string(line) + ": '" + key + "' expects a non-negative integer, got '" +
                        v + "'");
    }
}

}  // namespace detail

inline SynthDatasetSpec parse_spec(std::istream& in) {
    using namespace detail;
    std::vector<std::pair<std::size_t, std::pair<std::string, std::string>>> entries;
    std::string raw;
    std::size_t line = 0;
    SynthDatasetSpec spec;
    bool have_base = false;
    while (std::getline(in, raw)) {
        ++line;
        if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        raw = trim(raw);
        if (raw.empty()) continue;
        const auto eq = raw.find('=');
        if (eq == std::string::npos) throw SpecError("line " + std::to_string(line) + ": expected key = value");
        std::string key = trim(raw.substr(0, eq)), value = trim(raw.substr(eq + 1));
        if (key == "preset") {
            if (have_base || !entries.empty()) throw SpecError("line " + std::to_string(line) + ": preset must come first");
            spec = benchmark_preset(value);
            have_base = true;
            continue;
        }
        entries.push_back({line, {key, value}});
    }

    std::vector<std::string> pop_order;
    std::map<std::string, PopulationSpec> pops;
    std::map<std::string, std::pair<std::size_t, std::string>> pending_cov;
    for (const auto& [ln, kv] : entries) {
        const auto& [key, value] = kv;
        if (key == "markers") spec.markers = split_list(value);
        else if (key == "n_samples") spec.n_samples = to_uint(key, value, ln);
        else if (key == "events_median") spec.events_median = to_double(key, value, ln);
        else if (key == "events_dispersion") spec.events_dispersion = to_double(key, value, ln);
        else if (key == "seed") spec.seed = to_uint(key, value, ln);
        else if (key == "shift_scale") spec.batch_effect.shift_scale = to_double(key, value, ln);
        else if (key == "shift_direction") {
            if (value == "none") spec.batch_effect.shift_direction.reset();
            else spec.batch_effect.shift_direction = to_doubles(key, value, ln);
        } else if (key == "gain_min") spec.batch_effect.gain_min = to_double(key, value, ln);
        else if (key == "gain_max") spec.batch_effect.gain_max = to_double(key, value, ln);
        else if (key == "pop_jitter") spec.batch_effect.pop_jitter = to_double(key, value, ln);
        else if (key.rfind("population.", 0) == 0) {
            const auto dot = key.rfind('.');
            if (dot <= 11) throw SpecError("line " + std::to_string(ln) + ": malformed key '" + key + "'");
            const std::string name = key.substr(11, dot - 11), field = key.substr(dot + 1);
            if (!pops.count(name)) {
                pop_order.push_back(name);
                pops[name].class_name = name;
            }
            auto& p = pops[name];
            if (field == "mean") p.mean = to_doubles(key, value, ln);
            else if (field == "frequency") p.frequency = to_double(key, value, ln);
            else if (field == "cov") pending_cov[name] = {ln, value};
            else throw SpecError("line " + std::to_string(ln) + ": unknown population field '" + field + "'");
        } else {
            throw SpecError("line " + std::to_string(ln) + ": unknown key '" + key + "'");
        }
    }
    if (!pop_order.empty()) {
        spec.populations.clear();
        const std::size_t m = spec.markers.size();
        for (const auto& name : pop_order) {
            auto p = pops[name];
            auto it = pending_cov.find(name);
            if (it == pending_cov.end()) throw SpecError("population '" + name + "' has no cov");
            const auto& [ln, v] = it->second;
            if (v.rfind("diag", 0) == 0)
                p.covariance = PopulationSpec::isotropic(m, to_double("cov", trim(v.substr(4)), ln));
            else
                p.covariance = to_doubles("cov", v, ln);
            spec.populations.push_back(std::move(p));
        }
    }
    spec.validate();
    for (const auto& p : spec.populations) psd_factor(p.covariance, spec.n_markers(), p.class_name);
    return spec;
}

inline SynthDatasetSpec parse_spec_string(const std::string& text) {
    std::istringstream in(text);
    return parse_spec(in);
}

inline SynthDatasetSpec load_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open spec file '" + path + "'");
    return parse_spec(in);
}

}  // namespace gatenet::synth
