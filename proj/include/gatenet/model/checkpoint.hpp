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

// Checkpoint layout (all integers and floats little-endian):
//
//   bytes 0..7   magic "GNETCKPT"
//   u32          format version
//   u64          length of the JSON directory
//   ...          JSON directory: model metadata plus, for every tensor, its
//                name and shape in payload order
//   f64[]        tensor payload
//
// Parameter values, running statistics and transform statistics all live in
// the binary payload, so a save/load round trip is bit-exact.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gatenet/error.hpp"
#include "gatenet/io/transform.hpp"
#include "gatenet/io/types.hpp"
#include "gatenet/model/gatenet.hpp"

namespace gatenet::model {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::array<char, 8> kCheckpointMagic{'G', 'N', 'E', 'T', 'C', 'K', 'P', 'T'};

struct Checkpoint {
    NetworkParams params;
    std::vector<std::string> class_names;
    io::MarkerPanel panel;
    io::TransformSpec transform;
    nlohmann::json metadata = nlohmann::json::object();
};

namespace ckpt_detail {

template <typename T>
void put_le(std::string& out, T v) {
    std::array<char, sizeof(T)> b;
    std::memcpy(b.data(), &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b.begin(), b.end());
    out.append(b.data(), b.size());
}

template <typename T>
T get_le(const std::string& in, std::size_t& pos) {
    if (pos + sizeof(T) > in.size()) throw CorruptFile("checkpoint truncated");
    std::array<char, sizeof(T)> b;
    std::memcpy(b.data(), in.data() + pos, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b.begin(), b.end());
    pos += sizeof(T);
    T v;
    std::memcpy(&v, b.data(), sizeof(T));
    return v;
}

struct NamedTensor {
    std::string name;
    const Tensor* tensor;
};

/// Stage prefix as given at initialization, e.g. "single.0" for "single.0.weight".
inline std::string stage_prefix(const Stage& s) {
    const std::string& w = s.weight.name;
    const auto dot = w.rfind(".weight");
    if (dot == std::string::npos || dot + 7 != w.size()) throw StateError("stage weight has unexpected name '" + w + "'");
    return w.substr(0, dot);
}

inline void add_stage_tensors(std::vector<NamedTensor>& out, const std::string& prefix, const Stage& s) {
    out.push_back({prefix + ".weight", &s.weight.value});
    out.push_back({prefix + ".bias", &s.bias.value});
    out.push_back({prefix + ".bn.gamma", &s.gamma.value});
    out.push_back({prefix + ".bn.shift", &s.shift.value});
    out.push_back({prefix + ".bn.running_mean", &s.running.mean});
    out.push_back({prefix + ".bn.running_var", &s.running.var});
}

inline const char* arch_name(Architecture a) { return a == Architecture::gatenet ? "gatenet" : "baseline"; }

}  // namespace ckpt_detail

inline std::string serialize_checkpoint(const Checkpoint& ck) {
    using namespace ckpt_detail;
    const NetworkParams& p = ck.params;
    std::vector<NamedTensor> tensors;
    nlohmann::json blocks = nlohmann::json::object();
    const std::array<std::pair<const char*, const std::vector<Stage>*>, 3> groups{
        {{"event", &p.event_stages}, {"context", &p.context_stages}, {"head", &p.head_stages}}};
    for (const auto& [block, stages] : groups) {
        nlohmann::json names = nlohmann::json::array();
        for (const Stage& st : *stages) {
            names.push_back(stage_prefix(st));
            add_stage_tensors(tensors, names.back().get<std::string>(), st);
        }
        blocks[block] = names;
    }
    Tensor t_mean, t_std;
    if (ck.transform.kind == io::TransformKind::zscore) {
        const auto& s = ck.transform.stats;
        t_mean = Tensor({s.mean.size()}, s.mean);
        t_std = Tensor({s.stddev.size()}, s.stddev);
        tensors.push_back({"transform.mean", &t_mean});
        tensors.push_back({"transform.stddev", &t_std});
    }

    nlohmann::json dir;
    dir["architecture"] = arch_name(p.arch);
    dir["n_markers"] = p.n_markers;
    dir["n_classes"] = p.n_classes;
    dir["n_context"] = p.n_context;
    dir["blocks"] = blocks;
    dir["class_names"] = ck.class_names;
    dir["marker_names"] = ck.panel.names;
    dir["transform"] = {{"kind", io::to_string(ck.transform.kind)}};
    dir["metadata"] = ck.metadata;
    nlohmann::json list = nlohmann::json::array();
    for (const auto& t : tensors) list.push_back({{"name", t.name}, {"shape", t.tensor->shape()}});
    dir["tensors"] = list;
    const std::string header = dir.dump();

    std::string out(kCheckpointMagic.begin(), kCheckpointMagic.end());
    put_le<std::uint32_t>(out, kCheckpointVersion);
    put_le<std::uint64_t>(out, header.size());
    out += header;
    // The cofactor travels in the payload too so it stays bit-exact.
    put_le<double>(out, ck.transform.cofactor);
    for (const auto& t : tensors)
        for (double v : t.tensor->values()) put_le<double>(out, v);
    return out;
}

inline Checkpoint deserialize_checkpoint(const std::string& bytes) {
    using namespace ckpt_detail;
    if (bytes.size() < 20 || !std::equal(kCheckpointMagic.begin(), kCheckpointMagic.end(), bytes.begin()))
        throw CorruptFile("not a GateNet checkpoint (bad magic)");
    std::size_t pos = 8;
    const auto version = get_le<std::uint32_t>(bytes, pos);
    if (version != kCheckpointVersion)
        throw UnsupportedFeature("checkpoint format version " + std::to_string(version) + " is not supported");
    const auto header_len = get_le<std::uint64_t>(bytes, pos);
    if (pos + header_len > bytes.size()) throw CorruptFile("checkpoint directory truncated");
    nlohmann::json dir;
    try {
        dir = nlohmann::json::parse(bytes.substr(pos, header_len));
    } catch (const nlohmann::json::exception& e) {
        throw CorruptFile(std::string("checkpoint directory is not valid JSON: ") + e.what());
    }
    pos += header_len;

    Checkpoint ck;
    try {
        ck.transform.kind = io::parse_transform_kind(dir.at("transform").at("kind").get<std::string>());
        ck.transform.cofactor = get_le<double>(bytes, pos);
        std::map<std::string, Tensor> tensors;
        for (const auto& t : dir.at("tensors")) {
            const auto shape = t.at("shape").get<nn::Shape>();
            std::vector<double> values(nn::shape_size(shape));
            for (double& v : values) v = get_le<double>(bytes, pos);
            tensors.emplace(t.at("name").get<std::string>(), Tensor(shape, std::move(values)));
        }
        if (pos != bytes.size()) throw CorruptFile("checkpoint has trailing bytes");

        NetworkParams& p = ck.params;
        const auto arch = dir.at("architecture").get<std::string>();
        if (arch == "gatenet") p.arch = Architecture::gatenet;
        else if (arch == "baseline") p.arch = Architecture::baseline;
        else throw CorruptFile("checkpoint names unknown architecture '" + arch + "'");
        p.n_markers = dir.at("n_markers").get<std::size_t>();
        p.n_classes = dir.at("n_classes").get<std::size_t>();
        p.n_context = dir.at("n_context").get<std::size_t>();

        auto take = [&](const std::string& name) {
            auto it = tensors.find(name);
            if (it == tensors.end()) throw CorruptFile("checkpoint lacks tensor '" + name + "'");
            return it->second;
        };
        const std::array<std::pair<const char*, std::vector<Stage>*>, 3> groups{
            {{"event", &p.event_stages}, {"context", &p.context_stages}, {"head", &p.head_stages}}};
        for (const auto& [block, stages] : groups) {
            for (const auto& prefix : dir.at("blocks").at(block).get<std::vector<std::string>>()) {
                Stage s;
                s.weight = nn::Param(prefix + ".weight", take(prefix + ".weight"));
                s.bias = nn::Param(prefix + ".bias", take(prefix + ".bias"));
                s.gamma = nn::Param(prefix + ".bn.gamma", take(prefix + ".bn.gamma"));
                s.shift = nn::Param(prefix + ".bn.shift", take(prefix + ".bn.shift"));
                s.running.mean = take(prefix + ".bn.running_mean");
                s.running.var = take(prefix + ".bn.running_var");
                stages->push_back(std::move(s));
            }
        }
        ck.class_names = dir.at("class_names").get<std::vector<std::string>>();
        ck.panel = io::MarkerPanel(dir.at("marker_names").get<std::vector<std::string>>());
        if (ck.transform.kind == io::TransformKind::zscore) {
            ck.transform.stats.markers = ck.panel.names;
            ck.transform.stats.mean = take("transform.mean").to_vector();
            ck.transform.stats.stddev = take("transform.stddev").to_vector();
        }
        ck.metadata = dir.value("metadata", nlohmann::json::object());
    } catch (const nlohmann::json::exception& e) {
        throw CorruptFile(std::string("checkpoint directory is malformed: ") + e.what());
    }
    return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
    const std::string bytes = serialize_checkpoint(ck);
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write checkpoint " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_checkpoint(bytes);
}

}  // namespace gatenet::model
