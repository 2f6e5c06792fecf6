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

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gatenet/error.hpp"
#include "gatenet/io/csv.hpp"
#include "gatenet/io/fcs.hpp"
#include "gatenet/io/hierarchy.hpp"
#include "gatenet/model/checkpoint.hpp"
#include "gatenet/synth/generator.hpp"
#include "gatenet/synth/spec_file.hpp"
#include "gatenet/train/evaluate.hpp"
#include "gatenet/train/train.hpp"

namespace gatenet::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

enum ExitCode : int { ok = 0, failure = 1, config_error = 2, data_error = 3, numeric_error = 4 };

/// Every setting a command can take. The CLI maps flags and config-file keys
/// onto these fields.
struct RunConfig {
    std::string command;
    std::vector<std::string> data;
    std::string label_column = "label";
    std::vector<std::string> classes;
    std::string out = "gatenet_out";
    std::uint64_t seed = 0;
    bool verbose = false;

    std::string model = "gatenet";
    std::size_t context = 1000;
    std::vector<std::size_t> single_filters{1024, 512, 256};
    std::vector<std::size_t> context_filters{64, 48};
    std::size_t head_hidden = 32;
    std::vector<std::size_t> baseline_hidden{1024, 512, 256, 32};

    train::TrainConfig train;
    std::string transform = "zscore";

    std::size_t folds = 5;
    std::size_t context_draws = 1;
    std::vector<std::string> sizes{"2", "5", "10", "20", "all"};
    std::size_t workers = 0;  // 0: GATENET_WORKERS or 1

    std::string checkpoint;
    std::string models_dir;
    std::vector<std::string> plot_pairs;

    std::string preset;
    std::string spec_file;
    std::optional<std::size_t> n_samples;
    std::optional<std::size_t> events;

    std::string sweep_param;
    std::vector<double> sweep_values;

    std::size_t bench_events = 2000;
    std::vector<std::string> experts;
};

// ---------------------------------------------------------------------------
// Files

inline std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 digest failed");
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return os.str();
}

inline std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw DataError("cannot open " + p.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

/// Writes to a temporary sibling, then renames over `p`.
inline void write_atomic(const fs::path& p, const std::string& content) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    fs::path tmp = p;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out << content;
        if (!out.flush()) throw Error("cannot write " + tmp.string());
    }
    fs::rename(tmp, p);
}

/// Expands directories to their *.csv / *.fcs files (sorted by name).
inline std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs) {
    std::vector<fs::path> out;
    for (const auto& in : inputs) {
        const fs::path p(in);
        if (fs::is_directory(p)) {
            std::vector<fs::path> found;
            for (const auto& e : fs::directory_iterator(p)) {
                const auto ext = e.path().extension().string();
                if (e.is_regular_file() && (ext == ".csv" || ext == ".fcs" || ext == ".FCS")) found.push_back(e.path());
            }
            std::sort(found.begin(), found.end());
            out.insert(out.end(), found.begin(), found.end());
        } else if (fs::is_regular_file(p)) {
            out.push_back(p);
        } else {
            throw DataError("input '" + in + "' does not exist");
        }
    }
    if (out.empty()) throw DataError("no input files given");
    return out;
}

/// Class names from --classes, else from a classes.txt next to the data.
inline std::vector<std::string> resolve_classes(const RunConfig& rc, const std::vector<fs::path>& files) {
    if (!rc.classes.empty()) return rc.classes;
    for (const auto& f : files) {
        const fs::path side = f.parent_path() / "classes.txt";
        if (fs::is_regular_file(side)) {
            std::ifstream in(side);
            std::vector<std::string> names;
            for (std::string line; std::getline(in, line);)
                if (!line.empty()) names.push_back(line);
            return names;
        }
    }
    return {};
}

struct LoadedData {
    std::vector<io::LabeledSample> samples;
    json digests = json::array();
};

inline LoadedData load_labeled(const RunConfig& rc, const std::vector<std::string>& inputs) {
    const auto files = expand_inputs(inputs);
    const auto classes = resolve_classes(rc, files);
    LoadedData d;
    for (const auto& f : files) {
        if (f.extension() != ".csv")
            throw DataError(f.string() + ": labeled input must be CSV (FCS files carry no labels)");
        d.samples.push_back(io::load_labeled_csv(f, rc.label_column, classes));
        d.digests.push_back({{"path", f.string()}, {"sha256", sha256_hex(read_file(f))}});
    }
    // Samples without explicit class names get 0..max(label); widen them all
    // to the largest such set.
    if (classes.empty()) {
        std::size_t n = 0;
        for (const auto& s : d.samples) n = std::max(n, s.class_names.size());
        for (auto& s : d.samples)
            for (std::size_t c = s.class_names.size(); c < n; ++c) s.class_names.push_back(std::to_string(c));
    }
    return d;
}

inline io::EventTable load_events(const fs::path& f) {
    if (f.extension() == ".csv") {
        auto s = io::load_csv_sample(f, {});
        return std::get<io::EventTable>(std::move(s));
    }
    auto fcs = io::read_fcs(f);
    return std::move(fcs.events);
}

// ---------------------------------------------------------------------------
// Settings

inline io::TransformKind transform_kind(const RunConfig& rc) { return io::parse_transform_kind(rc.transform); }

inline train::TrainConfig resolved_train_config(const RunConfig& rc) {
    train::TrainConfig t = rc.train;
    t.transform = transform_kind(rc);
    t.seed = rc.seed;
    t.validate();
    return t;
}

inline train::ModelConfig model_config(const RunConfig& rc, std::size_t n_markers, std::size_t n_classes) {
    if (rc.model == "gatenet") {
        model::GateNetConfig g;
        g.n_markers = n_markers;
        g.n_classes = n_classes;
        g.n_context = rc.context;
        g.single_block_filters = rc.single_filters;
        g.context_block_filters = rc.context_filters;
        g.head_hidden = rc.head_hidden;
        g.seed = rc.seed;
        g.validate();
        return g;
    }
    if (rc.model == "baseline") {
        model::BaselineConfig b;
        b.n_markers = n_markers;
        b.n_classes = n_classes;
        b.hidden = rc.baseline_hidden;
        b.seed = rc.seed;
        b.validate();
        return b;
    }
    throw ConfigError("unknown model '" + rc.model + "' (expected gatenet or baseline)");
}

inline json settings_json(const RunConfig& rc) {
    const auto& t = rc.train;
    json j = {{"command", rc.command},
              {"data", rc.data},
              {"label_column", rc.label_column},
              {"classes", rc.classes},
              {"out", rc.out},
              {"seed", rc.seed},
              {"model", rc.model},
              {"context", rc.context},
              {"single_filters", rc.single_filters},
              {"context_filters", rc.context_filters},
              {"head_hidden", rc.head_hidden},
              {"baseline_hidden", rc.baseline_hidden},
              {"batch_size", t.batch_size},
              {"max_iters", t.max_iters},
              {"max_epochs", t.max_epochs},
              {"min_iters", t.min_iters_small_data},
              {"max_lr", t.max_lr},
              {"warmup_fraction", t.warmup_fraction},
              {"start_div", t.start_div},
              {"final_div", t.final_div},
              {"adam_beta1", t.adam_beta1},
              {"adam_beta2", t.adam_beta2},
              {"adam_epsilon", t.adam_epsilon},
              {"loss_beta", t.loss_beta},
              {"sampling_beta", t.sampling_beta},
              {"gamma", t.focal_gamma},
              {"class_weighted_loss", t.class_weighted_loss},
              {"weighted_sampling", t.weighted_sampling},
              {"transform", rc.transform},
              {"cofactor", t.asinh_cofactor},
              {"folds", rc.folds},
              {"context_draws", rc.context_draws},
              {"sizes", rc.sizes},
              {"checkpoint", rc.checkpoint},
              {"models_dir", rc.models_dir},
              {"plot_pairs", rc.plot_pairs},
              {"preset", rc.preset},
              {"spec_file", rc.spec_file},
              {"sweep_param", rc.sweep_param},
              {"sweep_values", rc.sweep_values},
              {"bench_events", rc.bench_events},
              {"experts", rc.experts}};
    j["n_samples"] = rc.n_samples ? json(*rc.n_samples) : json(nullptr);
    j["events"] = rc.events ? json(*rc.events) : json(nullptr);
    return j;
}

inline void write_manifest(const RunConfig& rc, const json& inputs, const json& outputs) {
    json m = {{"schema_version", kSchemaVersion},
              {"command", rc.command},
              {"seed", rc.seed},
              {"settings", settings_json(rc)},
              {"inputs", inputs},
              {"outputs", outputs}};
    write_atomic(fs::path(rc.out) / "manifest.json", m.dump(2) + "\n");
}

inline std::size_t workers(const RunConfig& rc) { return rc.workers ? rc.workers : train::worker_count(); }

inline train::ProgressFn progress_printer(const RunConfig& rc) {
    if (!rc.verbose) return {};
    return [](const train::IterationRecord& r, std::size_t total) {
        if (r.iteration % 50 == 0 || r.iteration + 1 == total)
            std::cerr << "iter " << r.iteration + 1 << "/" << total << " loss " << r.loss << " lr " << r.lr << "\n";
    };
}

// ---------------------------------------------------------------------------
// JSON views of results

inline json to_json(const train::F1Report& r, const std::vector<std::string>& classes) {
    json cls = json::array();
    for (std::size_t k = 0; k < r.classes.size(); ++k)
        cls.push_back({{"class", k < classes.size() ? classes[k] : std::to_string(k)},
                       {"precision", r.classes[k].precision},
                       {"recall", r.classes[k].recall},
                       {"f1", r.classes[k].f1},
                       {"support", r.classes[k].support}});
    return {{"weighted_f1", r.weighted_f1}, {"unweighted_f1", r.unweighted_f1}, {"total", r.total}, {"classes", cls}};
}

inline json to_json(const train::Distribution& d) {
    return {{"median", d.median}, {"p25", d.p25}, {"p75", d.p75}, {"n", d.n}};
}

inline json to_json(const train::TrainHistory& h) {
    json it = json::array();
    for (const auto& r : h.iterations)
        it.push_back({{"iteration", r.iteration}, {"loss", r.loss}, {"lr", r.lr}, {"saturated", r.saturated}});
    return {{"schema_version", kSchemaVersion},
            {"n_train_events", h.n_train_events},
            {"batch_size", h.batch_size},
            {"total_iters", h.total_iters},
            {"class_counts", h.class_counts},
            {"loss_weights", h.loss_weights},
            {"iterations", it}};
}

inline json to_json(const train::CvResult& r, const std::vector<std::string>& classes) {
    json folds = json::array();
    for (const auto& f : r.folds) {
        json per = json::array();
        for (const auto& s : f.per_sample) per.push_back({{"sample", s.sample_id}, {"report", to_json(s.report, classes)}});
        folds.push_back({{"fold", f.fold},
                         {"train", f.train_ids},
                         {"validation", f.validation_ids},
                         {"pooled", to_json(f.report, classes)},
                         {"per_sample", per},
                         {"total_iters", f.history.total_iters},
                         {"batch_size", f.history.batch_size}});
    }
    return {{"schema_version", kSchemaVersion},
            {"weighted_f1_mean", r.weighted_mean},
            {"weighted_f1_std", r.weighted_std},
            {"unweighted_f1_mean", r.unweighted_mean},
            {"unweighted_f1_std", r.unweighted_std},
            {"class_f1_mean", r.class_f1_mean},
            {"folds", folds}};
}

inline std::string per_sample_csv(const train::CvResult& r) {
    std::ostringstream os;
    os << "fold,sample,weighted_f1,unweighted_f1,events\n";
    for (const auto& f : r.folds)
        for (const auto& s : f.per_sample)
            os << f.fold << ',' << s.sample_id << ',' << io::format_double(s.report.weighted_f1) << ','
               << io::format_double(s.report.unweighted_f1) << ',' << s.report.total << '\n';
    return os.str();
}

// ---------------------------------------------------------------------------
// Commands

inline int cmd_train(const RunConfig& rc) {
    const auto data = load_labeled(rc, rc.data);
    const auto& first = data.samples.front();
    const auto cfg = resolved_train_config(rc);
    const auto mc = model_config(rc, first.events.n_markers(), first.n_classes());
    auto result = train::train(mc, data.samples, cfg, progress_printer(rc));
    const fs::path out(rc.out);
    // The output location is not part of the model.
    json settings = settings_json(rc);
    settings.erase("out");
    const std::string ck = model::serialize_checkpoint(result.model.to_checkpoint({{"settings", settings}}));
    write_atomic(out / "model.gnck", ck);
    write_atomic(out / "history.json", to_json(result.history).dump(2) + "\n");
    write_manifest(rc, data.digests, {{"checkpoint", "model.gnck"}, {"checkpoint_sha256", sha256_hex(ck)},
                                      {"history", "history.json"}});
    std::cout << "trained " << result.history.total_iters << " iterations on " << result.history.n_train_events
              << " events; checkpoint " << (out / "model.gnck").string() << "\n";
    return ok;
}

inline std::pair<std::string, std::string> parse_pair(const std::string& s) {
    const auto colon = s.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == s.size())
        throw ConfigError("plot pair '" + s + "' must look like MARKER_X:MARKER_Y");
    return {s.substr(0, colon), s.substr(colon + 1)};
}

inline std::string safe_name(std::string s) {
    for (char& c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
    return s;
}

inline int cmd_predict(const RunConfig& rc) {
    if (rc.checkpoint.empty()) throw ConfigError("predict needs --checkpoint");
    auto tm = train::TrainedModel::from_checkpoint(model::load_checkpoint(rc.checkpoint));
    std::vector<std::pair<std::string, std::string>> pairs;
    for (const auto& p : rc.plot_pairs) pairs.push_back(parse_pair(p));
    if (pairs.empty() && tm.panel.size() >= 2) pairs.push_back({tm.panel.names[0], tm.panel.names[1]});
    for (const auto& [x, y] : pairs)
        if (!tm.panel.index_of(x) || !tm.panel.index_of(y))
            throw ConfigError("plot pair " + x + ":" + y + " names a marker the model does not use");

    const fs::path out(rc.out);
    json inputs = json::array(), outputs = json::array();
    imbalance::Rng rng(train::derive_seed(rc.seed, 4));
    for (const auto& f : expand_inputs(rc.data)) {
        const auto events = load_events(f);
        inputs.push_back({{"path", f.string()}, {"sha256", sha256_hex(read_file(f))}});
        const auto pred = train::predict_sample(tm, events, rc.context_draws, rng);
        std::ostringstream labels;
        io::write_predictions(labels, pred.labels, pred.probs.values(), tm.class_names);
        const std::string stem = f.stem().string();
        write_atomic(out / (stem + ".labels.csv"), labels.str());
        outputs.push_back(stem + ".labels.csv");
        const auto aligned = train::align_panel(events, tm.panel);
        for (const auto& [x, y] : pairs) {
            const std::size_t ix = *tm.panel.index_of(x), iy = *tm.panel.index_of(y);
            std::ostringstream plot;
            plot << "marker_x,marker_y,predicted_class\n";
            for (std::size_t i = 0; i < aligned.n_events; ++i)
                plot << io::format_double(aligned.at(i, ix)) << ',' << io::format_double(aligned.at(i, iy)) << ','
                     << tm.class_names[static_cast<std::size_t>(pred.labels[i])] << '\n';
            const std::string name = stem + ".plot_" + safe_name(x) + "_" + safe_name(y) + ".csv";
            write_atomic(out / name, "# x=" + x + " y=" + y + "\n" + plot.str());
            outputs.push_back(name);
        }
        std::cout << f.string() << ": " << events.n_events << " events\n";
    }
    inputs.push_back({{"path", rc.checkpoint}, {"sha256", sha256_hex(read_file(rc.checkpoint))}});
    write_manifest(rc, inputs, outputs);
    return ok;
}

/// Runs every stage model of a hierarchy on each sample. Events enter a
/// stage when an earlier stage placed them in its parent population. One
/// column per stage; empty where the event is outside the parent.
inline int cmd_predict_hierarchy(const RunConfig& rc) {
    if (rc.models_dir.empty()) throw ConfigError("predict-hierarchy needs --models DIR with <stage>.gnck files");
    const auto hierarchy = io::rheumaflow_hierarchy();
    std::map<std::string, train::TrainedModel> models;
    json inputs = json::array(), outputs = json::array();
    for (const auto& stage : hierarchy.stages()) {
        const fs::path p = fs::path(rc.models_dir) / (stage.name + ".gnck");
        if (!fs::is_regular_file(p)) continue;
        auto tm = train::TrainedModel::from_checkpoint(model::load_checkpoint(p));
        if (tm.class_names != stage.class_names())
            throw ConfigError(p.string() + ": classes do not match subdataset '" + stage.name + "'");
        models.emplace(stage.name, std::move(tm));
        inputs.push_back({{"path", p.string()}, {"sha256", sha256_hex(read_file(p))}});
    }
    if (!models.count(hierarchy.stages().front().name))
        throw ConfigError("no model for the root subdataset '" + hierarchy.stages().front().name + "'");

    imbalance::Rng rng(train::derive_seed(rc.seed, 4));
    for (const auto& f : expand_inputs(rc.data)) {
        const auto events = load_events(f);
        inputs.push_back({{"path", f.string()}, {"sha256", sha256_hex(read_file(f))}});
        const std::size_t n = events.n_events;
        std::vector<std::set<std::string>> member(n);
        std::vector<std::string> columns;
        std::vector<std::vector<std::string>> cells;
        for (const auto& stage : hierarchy.stages()) {
            auto it = models.find(stage.name);
            if (it == models.end()) continue;
            std::vector<std::size_t> rows;
            for (std::size_t i = 0; i < n; ++i)
                if (!stage.parent || member[i].count(*stage.parent)) rows.push_back(i);
            std::vector<std::string> col(n);
            if (!rows.empty()) {
                const auto pred = train::predict_sample(it->second, events.select(rows), rc.context_draws, rng);
                for (std::size_t r = 0; r < rows.size(); ++r) {
                    const auto& name = stage.class_names()[static_cast<std::size_t>(pred.labels[r])];
                    col[rows[r]] = name;
                    member[rows[r]].insert(name);
                }
            }
            columns.push_back(stage.name);
            cells.push_back(std::move(col));
        }
        std::ostringstream os;
        os << "event_index";
        for (const auto& c : columns) os << ',' << c;
        os << '\n';
        for (std::size_t i = 0; i < n; ++i) {
            os << i;
            for (const auto& col : cells) os << ',' << col[i];
            os << '\n';
        }
        const std::string name = f.stem().string() + ".hierarchy.csv";
        write_atomic(fs::path(rc.out) / name, os.str());
        outputs.push_back(name);
    }
    write_manifest(rc, inputs, outputs);
    return ok;
}

/// Writes the subdataset of every hierarchy stage for the given samples,
/// whose labels must name populations of the hierarchy.
inline int cmd_subdatasets(const RunConfig& rc) {
    const auto data = load_labeled(rc, rc.data);
    const auto hierarchy = io::rheumaflow_hierarchy();
    json outputs = json::array();
    for (const auto& stage : hierarchy.stages()) {
        const auto derived = io::derive_subdataset(data.samples, hierarchy, stage.name);
        const fs::path dir = fs::path(rc.out) / stage.name;
        std::string names;
        for (const auto& c : stage.class_names()) names += c + "\n";
        write_atomic(dir / "classes.txt", names);
        for (const auto& s : derived.samples) {
            if (s.n_events() == 0) continue;
            std::ostringstream os;
            io::write_csv_sample(os, s, rc.label_column);
            write_atomic(dir / (s.sample_id() + ".csv"), os.str());
        }
        outputs.push_back({{"subdataset", stage.name}, {"empty_samples", derived.empty_samples}});
    }
    write_manifest(rc, data.digests, outputs);
    return ok;
}

inline train::CvOptions cv_options(const RunConfig& rc) {
    train::CvOptions o;
    o.k = rc.folds;
    o.seed = rc.seed;
    o.n_context_draws = rc.context_draws;
    o.workers = workers(rc);
    o.progress = progress_printer(rc);
    return o;
}

inline int cmd_cv(const RunConfig& rc) {
    const auto data = load_labeled(rc, rc.data);
    const auto& first = data.samples.front();
    const auto r = train::cross_validate(data.samples, model_config(rc, first.events.n_markers(), first.n_classes()),
                                         resolved_train_config(rc), cv_options(rc));
    const fs::path out(rc.out);
    write_atomic(out / "cv.json", to_json(r, first.class_names).dump(2) + "\n");
    write_atomic(out / "cv_samples.csv", per_sample_csv(r));
    write_manifest(rc, data.digests, {"cv.json", "cv_samples.csv"});
    std::cout << std::fixed << std::setprecision(4) << "weighted F1 " << r.weighted_mean << " +- " << r.weighted_std
              << ", unweighted F1 " << r.unweighted_mean << " +- " << r.unweighted_std << "\n";
    return ok;
}

inline std::vector<std::size_t> parse_sizes(const std::vector<std::string>& sizes) {
    std::vector<std::size_t> out;
    for (const auto& s : sizes) {
        if (s == "all") {
            out.push_back(0);
            continue;
        }
        try {
            std::size_t used = 0;
            const long v = std::stol(s, &used);
            if (used != s.size() || v < 1) throw std::invalid_argument(s);
            out.push_back(static_cast<std::size_t>(v));
        } catch (const std::exception&) {
            throw ConfigError("learning-curve size '" + s + "' is neither a positive integer nor 'all'");
        }
    }
    return out;
}

inline int cmd_learning_curve(const RunConfig& rc) {
    const auto data = load_labeled(rc, rc.data);
    const auto& first = data.samples.front();
    const auto sizes = parse_sizes(rc.sizes);
    const auto lc = train::learning_curve(data.samples, sizes,
                                          model_config(rc, first.events.n_markers(), first.n_classes()),
                                          resolved_train_config(rc), cv_options(rc));
    json points = json::array();
    std::ostringstream csv;
    csv << "n_train,unweighted_median,unweighted_p25,unweighted_p75,weighted_median,weighted_p25,weighted_p75,"
           "pooled_unweighted_mean,pooled_weighted_mean\n";
    for (std::size_t i = 0; i < lc.points.size(); ++i) {
        const auto& p = lc.points[i];
        points.push_back({{"n_train", rc.sizes[i]},
                          {"unweighted", to_json(p.unweighted)},
                          {"weighted", to_json(p.weighted)},
                          {"pooled_unweighted_mean", p.pooled_unweighted_mean},
                          {"pooled_weighted_mean", p.pooled_weighted_mean}});
        csv << rc.sizes[i] << ',' << p.unweighted.median << ',' << p.unweighted.p25 << ',' << p.unweighted.p75 << ','
            << p.weighted.median << ',' << p.weighted.p25 << ',' << p.weighted.p75 << ',' << p.pooled_unweighted_mean
            << ',' << p.pooled_weighted_mean << '\n';
    }
    const fs::path out(rc.out);
    write_atomic(out / "learning_curve.json", json{{"schema_version", kSchemaVersion}, {"points", points}}.dump(2) + "\n");
    write_atomic(out / "learning_curve.csv", csv.str());
    write_manifest(rc, data.digests, {"learning_curve.json", "learning_curve.csv"});
    std::cout << csv.str();
    return ok;
}

inline int cmd_expert_eval(const RunConfig& rc) {
    if (rc.experts.size() < 3) throw ConfigError("expert-eval needs at least three --expert directories");
    std::vector<LoadedData> per_expert;
    for (const auto& dir : rc.experts) per_expert.push_back(load_labeled(rc, {dir}));
    const std::size_t n = per_expert.front().samples.size();
    std::vector<std::string> ids;
    for (const auto& s : per_expert.front().samples) ids.push_back(s.sample_id());
    std::vector<std::vector<io::LabeledSample>> gatings(n);
    json inputs = json::array();
    for (std::size_t e = 0; e < per_expert.size(); ++e) {
        auto& d = per_expert[e];
        if (d.samples.size() != n) throw AlignmentError("expert directories hold different numbers of samples");
        for (std::size_t s = 0; s < n; ++s) {
            if (d.samples[s].sample_id() != ids[s])
                throw AlignmentError("expert directories hold different sample names");
            d.samples[s].expert_id = fs::path(rc.experts[e]).filename().string();
            gatings[s].push_back(std::move(d.samples[s]));
        }
        for (auto& x : d.digests) inputs.push_back(x);
    }
    const auto scores = train::expert_loo_eval(gatings);
    json j = json::array();
    std::ostringstream csv;
    csv << "expert,sample,weighted_f1,unweighted_f1,unweighted_f1_mean_pairwise\n";
    for (const auto& es : scores) {
        j.push_back({{"expert", es.expert_id},
                     {"unweighted_vs_consensus", to_json(es.unweighted_vs_consensus)},
                     {"weighted_vs_consensus", to_json(es.weighted_vs_consensus)},
                     {"unweighted_pairwise", to_json(es.unweighted_pairwise)},
                     {"consensus_ties", es.consensus_ties}});
        for (std::size_t s = 0; s < es.vs_consensus.size(); ++s)
            csv << es.expert_id << ',' << es.vs_consensus[s].sample_id << ','
                << io::format_double(es.vs_consensus[s].report.weighted_f1) << ','
                << io::format_double(es.vs_consensus[s].report.unweighted_f1) << ','
                << io::format_double(es.unweighted_mean_pairwise[s]) << '\n';
        std::cout << es.expert_id << ": median unweighted F1 " << es.unweighted_vs_consensus.median << "\n";
    }
    const fs::path out(rc.out);
    write_atomic(out / "expert_eval.json", json{{"schema_version", kSchemaVersion}, {"experts", j}}.dump(2) + "\n");
    write_atomic(out / "expert_eval.csv", csv.str());
    write_manifest(rc, inputs, {"expert_eval.json", "expert_eval.csv"});
    return ok;
}

inline synth::SynthDatasetSpec synth_spec(const RunConfig& rc) {
    if (rc.preset.empty() == rc.spec_file.empty()) throw ConfigError("synth needs exactly one of --preset or --spec");
    auto spec = rc.preset.empty() ? synth::load_spec(rc.spec_file) : synth::benchmark_preset(rc.preset);
    spec.seed = rc.seed;
    if (rc.n_samples) spec.n_samples = *rc.n_samples;
    if (rc.events) spec.events_median = static_cast<double>(*rc.events);
    spec.validate();
    return spec;
}

inline int cmd_synth(const RunConfig& rc) {
    const auto spec = synth_spec(rc);
    const auto ds = synth::generate_dataset(spec);
    const fs::path out(rc.out);
    json outputs = json::array(), truth = json::array();
    for (const auto& s : ds.samples) {
        std::ostringstream os;
        io::write_csv_sample(os, s, rc.label_column);
        write_atomic(out / (s.sample_id() + ".csv"), os.str());
        outputs.push_back(s.sample_id() + ".csv");
    }
    std::string names;
    for (const auto& c : spec.class_names()) names += c + "\n";
    write_atomic(out / "classes.txt", names);
    for (const auto& t : ds.truth.samples)
        truth.push_back({{"sample", t.sample_id}, {"shift", t.shift}, {"gain", t.gain},
                         {"population_offsets", t.population_offsets}});
    // Diagnostics only; kept out of the data directory's CSV set.
    write_atomic(out / "ground_truth.json", json{{"schema_version", kSchemaVersion}, {"samples", truth}}.dump(2) + "\n");
    json inputs = json::array();
    if (!rc.spec_file.empty()) inputs.push_back({{"path", rc.spec_file}, {"sha256", sha256_hex(read_file(rc.spec_file))}});
    write_manifest(rc, inputs, outputs);
    std::cout << "wrote " << ds.samples.size() << " samples to " << out.string() << "\n";
    return ok;
}

inline int cmd_sweep(const RunConfig& rc) {
    static const std::vector<std::string> known{"gamma", "loss_beta", "sampling_beta", "max_lr", "context"};
    if (std::find(known.begin(), known.end(), rc.sweep_param) == known.end())
        throw ConfigError("unknown sweep parameter '" + rc.sweep_param +
                          "' (expected gamma, loss_beta, sampling_beta, max_lr or context)");
    if (rc.sweep_values.empty()) throw ConfigError("sweep needs at least one --values entry");
    const auto data = load_labeled(rc, rc.data);
    const auto& first = data.samples.front();
    std::ostringstream csv;
    csv << "parameter,value,weighted_f1_mean,weighted_f1_std,unweighted_f1_mean,unweighted_f1_std\n";
    json rows = json::array();
    for (double v : rc.sweep_values) {
        RunConfig point = rc;
        if (rc.sweep_param == "gamma") point.train.focal_gamma = v;
        else if (rc.sweep_param == "loss_beta") point.train.loss_beta = v;
        else if (rc.sweep_param == "sampling_beta") point.train.sampling_beta = v;
        else if (rc.sweep_param == "max_lr") point.train.max_lr = v;
        else {
            if (v < 1 || v != static_cast<double>(static_cast<std::size_t>(v)))
                throw ConfigError("context size must be a positive integer");
            point.context = static_cast<std::size_t>(v);
        }
        const auto r = train::cross_validate(data.samples,
                                             model_config(point, first.events.n_markers(), first.n_classes()),
                                             resolved_train_config(point), cv_options(point));
        csv << rc.sweep_param << ',' << io::format_double(v) << ',' << io::format_double(r.weighted_mean) << ','
            << io::format_double(r.weighted_std) << ',' << io::format_double(r.unweighted_mean) << ','
            << io::format_double(r.unweighted_std) << '\n';
        rows.push_back({{"value", v}, {"cv", to_json(r, first.class_names)}});
    }
    const fs::path out(rc.out);
    write_atomic(out / "sweep.csv", csv.str());
    write_atomic(out / "sweep.json",
                 json{{"schema_version", kSchemaVersion}, {"parameter", rc.sweep_param}, {"points", rows}}.dump(2) +
                     "\n");
    write_manifest(rc, data.digests, {"sweep.csv", "sweep.json"});
    std::cout << csv.str();
    return ok;
}

/// Inference throughput on a synthetic sample. Uses --checkpoint when given,
/// otherwise freshly initialized weights of the configured model.
inline int cmd_bench(const RunConfig& rc) {
    auto spec = synth::benchmark_preset(rc.preset.empty() ? "batch_hard" : rc.preset);
    spec.seed = rc.seed;
    spec.events_median = static_cast<double>(rc.bench_events);
    spec.n_samples = 1;
    auto sample = synth::generate_sample(spec, 0);
    train::TrainedModel tm;
    if (!rc.checkpoint.empty()) {
        tm = train::TrainedModel::from_checkpoint(model::load_checkpoint(rc.checkpoint));
        if (tm.panel.size() != sample.events.n_markers())
            throw ConfigError("benchmark sample has " + std::to_string(sample.events.n_markers()) +
                              " markers, checkpoint expects " + std::to_string(tm.panel.size()));
        sample.events.panel = tm.panel;
    } else {
        tm.params = std::visit([](const auto& c) { return model::init_params(c); },
                               model_config(rc, sample.events.n_markers(), sample.n_classes()));
        tm.class_names = sample.class_names;
        tm.panel = sample.events.panel;
        tm.transform = io::TransformSpec::none();
    }
    imbalance::Rng rng(rc.seed);
    const auto t0 = std::chrono::steady_clock::now();
    const auto pred = train::predict_sample(tm, sample.events, rc.context_draws, rng);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double eps = static_cast<double>(pred.labels.size()) / secs;
    json j = {{"schema_version", kSchemaVersion},
              {"events", pred.labels.size()},
              {"seconds", secs},
              {"events_per_second", eps},
              {"microseconds_per_event", 1e6 / eps},
              {"model", tm.params.arch == model::Architecture::gatenet ? "gatenet" : "baseline"},
              {"context", tm.params.n_context},
              {"parameters", tm.params.parameter_count()}};
    write_atomic(fs::path(rc.out) / "bench.json", j.dump(2) + "\n");
    write_manifest(rc, json::array(), {"bench.json"});
    std::cout << std::fixed << std::setprecision(1) << eps << " events/s (" << 1e6 / eps << " us/event)\n";
    return ok;
}

inline int dispatch(const RunConfig& rc) {
    if (rc.command == "train") return cmd_train(rc);
    if (rc.command == "predict") return cmd_predict(rc);
    if (rc.command == "predict-hierarchy") return cmd_predict_hierarchy(rc);
    if (rc.command == "subdatasets") return cmd_subdatasets(rc);
    if (rc.command == "cv") return cmd_cv(rc);
    if (rc.command == "learning-curve") return cmd_learning_curve(rc);
    if (rc.command == "expert-eval") return cmd_expert_eval(rc);
    if (rc.command == "synth") return cmd_synth(rc);
    if (rc.command == "sweep") return cmd_sweep(rc);
    if (rc.command == "bench") return cmd_bench(rc);
    throw ConfigError("unknown command '" + rc.command + "'");
}

/// Runs a command and maps failures onto the exit-code contract.
inline int run(const RunConfig& rc, std::ostream& err = std::cerr) {
    try {
        return dispatch(rc);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return config_error;
    } catch (const RangeError& e) {
        err << "config error: " << e.what() << "\n";
        return config_error;
    } catch (const EmptyContextError& e) {
        err << "config error: " << e.what() << "\n";
        return config_error;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << "\n";
        return data_error;
    } catch (const TrainingDivergence& e) {
        err << "numeric failure: " << e.what() << "\n";
        return numeric_error;
    } catch (const DegenerateBatchError& e) {
        err << "numeric failure: " << e.what() << "\n";
        return numeric_error;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return failure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return failure;
    }
}

}  // namespace gatenet::cli
