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

// Comma-separated sample files: a header row of marker names, one event per
// row, and an optional integer label column.

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "gatenet/error.hpp"
#include "gatenet/io/types.hpp"

namespace gatenet::io {

namespace csv_detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
}

inline std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

}  // namespace csv_detail

/// Shortest decimal text that parses back to exactly `v`.
inline std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

struct CsvOptions {
    /// Column holding integer class labels; absent means unlabeled.
    std::optional<std::string> label_column;
    /// Declared classes. When empty, classes 0..max(label) are named by index.
    std::vector<std::string> class_names;
    std::string sample_id;
};

using CsvSample = std::variant<LabeledSample, EventTable>;

inline CsvSample parse_csv_sample(std::istream& in, const CsvOptions& opt, const std::string& source = "<csv>") {
    std::string line;
    if (!std::getline(in, line)) throw ParseError(source + ": missing header row");
    const auto header = csv_detail::split(line);
    std::optional<std::size_t> label_col;
    std::vector<std::string> markers;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (opt.label_column && header[c] == *opt.label_column) {
            label_col = c;
        } else {
            markers.emplace_back(header[c]);
        }
    }
    if (opt.label_column && !label_col)
        throw ValidationError(source + ": label column '" + *opt.label_column + "' not found");
    if (markers.empty()) throw ParseError(source + ": header names no marker columns");

    std::vector<double> values;
    std::vector<int> labels;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (csv_detail::trim(line).empty()) continue;
        const auto cells = csv_detail::split(line);
        if (cells.size() != header.size())
            throw ParseError(source + ": row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                             " cells, header has " + std::to_string(header.size()));
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const auto cell = cells[c];
            if (label_col && c == *label_col) {
                int y = 0;
                auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), y);
                if (ec != std::errc{} || ptr != cell.data() + cell.size())
                    throw ParseError(source + ": row " + std::to_string(row) + ", column " + std::to_string(c + 1) +
                                     ": label '" + std::string(cell) + "' is not an integer");
                labels.push_back(y);
            } else {
                double v = 0.0;
                auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
                if (ec != std::errc{} || ptr != cell.data() + cell.size())
                    throw ParseError(source + ": row " + std::to_string(row) + ", column " + std::to_string(c + 1) +
                                     ": '" + std::string(cell) + "' is not a number");
                values.push_back(v);
            }
        }
    }

    const std::size_t n = values.size() / markers.size();
    EventTable table(MarkerPanel(std::move(markers)), n, std::move(values),
                     opt.sample_id.empty() ? source : opt.sample_id);
    table.validate();
    if (!label_col) return table;

    LabeledSample sample;
    sample.events = std::move(table);
    sample.labels = std::move(labels);
    sample.class_names = opt.class_names;
    if (sample.class_names.empty()) {
        int max_label = -1;
        for (int y : sample.labels) max_label = std::max(max_label, y);
        for (int c = 0; c <= max_label; ++c) sample.class_names.push_back(std::to_string(c));
    }
    sample.validate();
    return sample;
}

inline CsvSample load_csv_sample(const std::filesystem::path& path, CsvOptions opt = {}) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    if (opt.sample_id.empty()) opt.sample_id = path.stem().string();
    return parse_csv_sample(in, opt, path.string());
}

inline LabeledSample load_labeled_csv(const std::filesystem::path& path, const std::string& label_column,
                                      std::vector<std::string> class_names = {}) {
    CsvOptions opt;
    opt.label_column = label_column;
    opt.class_names = std::move(class_names);
    return std::get<LabeledSample>(load_csv_sample(path, std::move(opt)));
}

inline void write_csv_sample(std::ostream& out, const EventTable& events, const std::vector<int>* labels = nullptr,
                             const std::string& label_column = "label") {
    for (std::size_t j = 0; j < events.n_markers(); ++j) out << (j ? "," : "") << events.panel.names[j];
    if (labels) out << ',' << label_column;
    out << '\n';
    for (std::size_t i = 0; i < events.n_events; ++i) {
        for (std::size_t j = 0; j < events.n_markers(); ++j) out << (j ? "," : "") << format_double(events.at(i, j));
        if (labels) out << ',' << (*labels)[i];
        out << '\n';
    }
}

inline void write_csv_sample(std::ostream& out, const LabeledSample& sample, const std::string& label_column = "label") {
    write_csv_sample(out, sample.events, &sample.labels, label_column);
}

/// Predicted labels: event_index,predicted_class,probability_<class>...
inline void write_predictions(std::ostream& out, std::span<const int> predicted, std::span<const double> probs,
                              const std::vector<std::string>& class_names) {
    const std::size_t c = class_names.size();
    out << "event_index,predicted_class";
    for (const auto& name : class_names) out << ",probability_" << name;
    out << '\n';
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        out << i << ',' << class_names[static_cast<std::size_t>(predicted[i])];
        for (std::size_t k = 0; k < c; ++k) out << ',' << format_double(probs[i * c + k]);
        out << '\n';
    }
}

}  // namespace gatenet::io
