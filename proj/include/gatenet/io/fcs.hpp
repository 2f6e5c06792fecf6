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

// Reader for the list-mode subset of FCS 3.0/3.1: $DATATYPE F (32-bit float)
// and I (unsigned 16/32-bit integers), either byte order. Anything outside
// that subset is rejected with UnsupportedFeature.

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gatenet/error.hpp"
#include "gatenet/io/types.hpp"

namespace gatenet::io {

struct FcsFile {
    std::string version;
    std::map<std::string, std::string> keywords;  // keys upper-cased
    MarkerPanel panel;
    EventTable events;
};

namespace fcs_detail {

inline std::string upper(std::string s) {
    for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

inline std::size_t parse_offset(std::span<const std::byte> bytes, std::size_t pos, const char* field) {
    std::string s;
    for (std::size_t i = pos; i < pos + 8; ++i) s.push_back(static_cast<char>(bytes[i]));
    auto first = s.find_first_not_of(' ');
    if (first == std::string::npos) return 0;
    std::size_t value = 0;
    auto [ptr, ec] = std::from_chars(s.data() + first, s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw CorruptFile(std::string("FCS header field ") + field + " is not a number: '" + s + "'");
    return value;
}

inline std::size_t to_size(const std::map<std::string, std::string>& kw, const std::string& key) {
    auto it = kw.find(key);
    if (it == kw.end()) throw CorruptFile("FCS TEXT segment lacks required keyword " + key);
    std::string v = it->second;
    v.erase(0, v.find_first_not_of(' '));
    v.erase(v.find_last_not_of(' ') + 1);
    std::size_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size())
        throw CorruptFile("FCS keyword " + key + " is not a non-negative integer: '" + it->second + "'");
    return out;
}

/// Splits the TEXT segment into keyword/value pairs. The first byte is the
/// delimiter; a doubled delimiter stands for a literal one.
inline std::map<std::string, std::string> parse_text(std::string_view text) {
    if (text.empty()) throw CorruptFile("FCS TEXT segment is empty");
    const char delim = text[0];
    std::vector<std::string> tokens;
    std::string cur;
    for (std::size_t i = 1; i < text.size(); ++i) {
        if (text[i] == delim) {
            if (i + 1 < text.size() && text[i + 1] == delim) {
                cur.push_back(delim);
                ++i;
                continue;
            }
            tokens.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(text[i]);
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    if (tokens.size() % 2 != 0) throw CorruptFile("FCS TEXT segment has a keyword without a value");
    std::map<std::string, std::string> kw;
    for (std::size_t i = 0; i < tokens.size(); i += 2) kw[upper(tokens[i])] = tokens[i + 1];
    return kw;
}

template <typename T>
T load(const std::byte* p, bool big_endian) {
    std::array<std::byte, sizeof(T)> buf;
    std::memcpy(buf.data(), p, sizeof(T));
    if (big_endian != (std::endian::native == std::endian::big)) std::reverse(buf.begin(), buf.end());
    T v;
    std::memcpy(&v, buf.data(), sizeof(T));
    return v;
}

}  // namespace fcs_detail

inline FcsFile parse_fcs(std::span<const std::byte> bytes, std::string sample_id = {}) {
    using namespace fcs_detail;
    if (bytes.size() < 58) throw CorruptFile("file too short for an FCS header");
    FcsFile out;
    for (std::size_t i = 0; i < 6; ++i) out.version.push_back(static_cast<char>(bytes[i]));
    if (out.version != "FCS3.0" && out.version != "FCS3.1")
        throw UnsupportedFeature("unsupported FCS version '" + out.version + "' (need FCS3.0 or FCS3.1)");

    const std::size_t text_begin = parse_offset(bytes, 10, "TEXT begin");
    const std::size_t text_end = parse_offset(bytes, 18, "TEXT end");
    std::size_t data_begin = parse_offset(bytes, 26, "DATA begin");
    std::size_t data_end = parse_offset(bytes, 34, "DATA end");
    if (text_end < text_begin || text_end >= bytes.size())
        throw CorruptFile("FCS TEXT segment [" + std::to_string(text_begin) + ", " + std::to_string(text_end) +
                          "] lies outside the file");
    std::string_view text(reinterpret_cast<const char*>(bytes.data()) + text_begin, text_end - text_begin + 1);
    out.keywords = parse_text(text);
    const auto& kw = out.keywords;

    // Large files put the DATA offsets in TEXT and zeros in the header.
    if (data_begin == 0 && data_end == 0) {
        data_begin = to_size(kw, "$BEGINDATA");
        data_end = to_size(kw, "$ENDDATA");
    }

    auto mode_it = kw.find("$MODE");
    if (mode_it != kw.end() && upper(mode_it->second) != "L")
        throw UnsupportedFeature("FCS $MODE '" + mode_it->second + "' is not supported (list mode L only)");

    const std::size_t n_par = to_size(kw, "$PAR");
    const std::size_t n_tot = to_size(kw, "$TOT");
    if (n_par == 0) throw CorruptFile("FCS $PAR is zero");
    if (n_tot == 0) throw CorruptFile("FCS $TOT is zero; a sample must contain events");

    auto dt_it = kw.find("$DATATYPE");
    if (dt_it == kw.end()) throw CorruptFile("FCS TEXT segment lacks required keyword $DATATYPE");
    const std::string datatype = upper(dt_it->second);
    if (datatype != "F" && datatype != "I")
        throw UnsupportedFeature("FCS $DATATYPE '" + dt_it->second + "' is not supported (F or I only)");

    std::vector<std::string> names;
    std::vector<std::size_t> widths;
    for (std::size_t p = 1; p <= n_par; ++p) {
        const std::string key_n = "$P" + std::to_string(p) + "N";
        auto n_it = kw.find(key_n);
        if (n_it == kw.end()) throw CorruptFile("FCS TEXT segment lacks required keyword " + key_n);
        names.push_back(n_it->second);
        const std::size_t bits = to_size(kw, "$P" + std::to_string(p) + "B");
        if (datatype == "F" && bits != 32)
            throw UnsupportedFeature("FCS $P" + std::to_string(p) + "B=" + std::to_string(bits) +
                                     " with $DATATYPE F (only 32-bit floats supported)");
        if (datatype == "I" && bits != 16 && bits != 32)
            throw UnsupportedFeature("FCS $P" + std::to_string(p) + "B=" + std::to_string(bits) +
                                     " with $DATATYPE I (only 16 or 32 bits supported)");
        widths.push_back(bits / 8);
    }

    auto bo_it = kw.find("$BYTEORD");
    if (bo_it == kw.end()) throw CorruptFile("FCS TEXT segment lacks required keyword $BYTEORD");
    std::string order;
    for (char c : bo_it->second)
        if (c != ' ') order.push_back(c);
    bool big = false;
    if (order == "1,2,3,4" || order == "1,2") {
        big = false;
    } else if (order == "4,3,2,1" || order == "2,1") {
        big = true;
    } else {
        throw UnsupportedFeature("FCS $BYTEORD '" + bo_it->second + "' is not supported");
    }

    std::size_t row_bytes = 0;
    for (std::size_t w : widths) row_bytes += w;
    const std::size_t expected = n_tot * row_bytes;
    if (data_end < data_begin || data_end >= bytes.size())
        throw CorruptFile("FCS DATA segment [" + std::to_string(data_begin) + ", " + std::to_string(data_end) +
                          "] lies outside the file");
    const std::size_t actual = data_end - data_begin + 1;
    if (actual != expected)
        throw CorruptFile("FCS DATA segment holds " + std::to_string(actual) + " bytes but $TOT*$PAR needs " +
                          std::to_string(expected));

    out.panel = MarkerPanel(names);
    std::vector<double> values;
    values.reserve(n_tot * n_par);
    const std::byte* p = bytes.data() + data_begin;
    for (std::size_t e = 0; e < n_tot; ++e)
        for (std::size_t j = 0; j < n_par; ++j) {
            if (datatype == "F") {
                values.push_back(static_cast<double>(load<float>(p, big)));
            } else if (widths[j] == 2) {
                values.push_back(static_cast<double>(load<std::uint16_t>(p, big)));
            } else {
                values.push_back(static_cast<double>(load<std::uint32_t>(p, big)));
            }
            p += widths[j];
        }
    out.events = EventTable(out.panel, n_tot, std::move(values), std::move(sample_id));
    out.events.validate();
    return out;
}

inline FcsFile read_fcs(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open FCS file " + path.string());
    std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_fcs(std::as_bytes(std::span<const char>(raw)), path.stem().string());
}

}  // namespace gatenet::io
