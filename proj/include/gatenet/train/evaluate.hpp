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
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "gatenet/error.hpp"
#include "gatenet/io/consensus.hpp"
#include "gatenet/io/types.hpp"
#include "gatenet/train/metrics.hpp"
#include "gatenet/train/split.hpp"
#include "gatenet/train/train.hpp"

namespace gatenet::train {

/// Worker count from GATENET_WORKERS, defaulting to 1.
inline std::size_t worker_count() {
    if (const char* env = std::getenv("GATENET_WORKERS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<std::size_t>(v);
    }
    return 1;
}

/// Runs fn(0..n-1) on up to `workers` threads. The first exception is
/// rethrown after all workers finish.
inline void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

struct SampleScore {
    std::string sample_id;
    F1Report report;
};

struct FoldResult {
    std::size_t fold = 0;
    std::vector<std::string> train_ids;
    std::vector<std::string> validation_ids;
    ConfusionMatrix pooled;
    F1Report report;  // from the pooled confusion matrix
    std::vector<SampleScore> per_sample;
    TrainHistory history;
};

struct CvResult {
    std::vector<FoldResult> folds;
    double weighted_mean = 0.0, weighted_std = 0.0;
    double unweighted_mean = 0.0, unweighted_std = 0.0;
    /// Per-class F1 averaged over folds (classes absent in a fold's
    /// validation data are skipped for that fold).
    std::vector<double> class_f1_mean;
};

struct CvOptions {
    std::size_t k = 5;
    std::uint64_t seed = 0;
    std::size_t n_context_draws = 1;
    std::size_t workers = 1;
    ProgressFn progress;
};

/// Seed for everything trained in fold `fold`; independent of how many
/// training samples that fold ends up using.
inline std::uint64_t fold_seed(std::uint64_t seed, std::size_t fold) { return derive_seed(seed, 1000 + fold); }

namespace detail {

inline const io::LabeledSample& by_id(std::span<const io::LabeledSample> dataset, const std::string& id) {
    for (const auto& s : dataset)
        if (s.sample_id() == id) return s;
    throw ValidationError("unknown sample id '" + id + "'");
}

inline ModelConfig reseed(ModelConfig mc, std::uint64_t seed) {
    std::visit([&](auto& c) { c.seed = seed; }, mc);
    return mc;
}

inline void check_unique_ids(std::span<const io::LabeledSample> dataset) {
    std::vector<std::string> ids;
    for (const auto& s : dataset) ids.push_back(s.sample_id());
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
        throw ValidationError("sample ids in a dataset must be unique");
}

}  // namespace detail

/// Trains on `train_ids` and scores every validation sample. Model weights
/// and training streams are seeded from `seed`.
inline FoldResult run_fold(std::span<const io::LabeledSample> dataset, const std::vector<std::string>& train_ids,
                           const std::vector<std::string>& validation_ids, const ModelConfig& model_config,
                           const TrainConfig& cfg, std::uint64_t seed, std::size_t n_context_draws,
                           const ProgressFn& progress = {}) {
    std::vector<io::LabeledSample> train_set;
    for (const auto& id : train_ids) train_set.push_back(detail::by_id(dataset, id));
    TrainConfig fold_cfg = cfg;
    fold_cfg.seed = derive_seed(seed, 1);
    auto trained = train(detail::reseed(model_config, derive_seed(seed, 2)), train_set, fold_cfg, progress);

    FoldResult fr;
    fr.train_ids = train_ids;
    fr.validation_ids = validation_ids;
    fr.history = std::move(trained.history);
    const std::size_t c = trained.model.class_names.size();
    fr.pooled = ConfusionMatrix(c);
    imbalance::Rng rng(derive_seed(seed, 3));
    for (const auto& id : validation_ids) {
        const auto& s = detail::by_id(dataset, id);
        if (s.n_events() == 0) continue;
        if (s.class_names != trained.model.class_names)
            throw ValidationError("validation sample '" + id + "' has a different class set");
        const auto pred = predict_sample(trained.model, s.events, n_context_draws, rng);
        const auto cm = ConfusionMatrix::from_labels(s.labels, pred.labels, c);
        fr.pooled.merge(cm);
        fr.per_sample.push_back({id, f1_scores(cm)});
    }
    fr.report = f1_scores(fr.pooled);
    return fr;
}

inline void aggregate(CvResult& r) {
    std::vector<double> w, u;
    for (const auto& f : r.folds) {
        w.push_back(f.report.weighted_f1);
        u.push_back(f.report.unweighted_f1);
    }
    mean_std(w, r.weighted_mean, r.weighted_std);
    mean_std(u, r.unweighted_mean, r.unweighted_std);
    if (r.folds.empty()) return;
    const std::size_t c = r.folds.front().report.classes.size();
    r.class_f1_mean.assign(c, 0.0);
    for (std::size_t k = 0; k < c; ++k) {
        double s = 0.0;
        std::size_t n = 0;
        for (const auto& f : r.folds)
            if (f.report.classes[k].support > 0) {
                s += f.report.classes[k].f1;
                ++n;
            }
        r.class_f1_mean[k] = n ? s / static_cast<double>(n) : 0.0;
    }
}

/// Sample-level k-fold cross-validation with per-fold pooled confusion
/// matrices; mean and sample standard deviation across folds.
inline CvResult cross_validate(std::span<const io::LabeledSample> dataset, const ModelConfig& model_config,
                               const TrainConfig& cfg, const CvOptions& opt = {}) {
    detail::check_unique_ids(dataset);
    std::vector<std::string> ids;
    for (const auto& s : dataset) ids.push_back(s.sample_id());
    const FoldSplit split = kfold_split(ids, opt.k, opt.seed);
    CvResult r;
    r.folds.resize(split.k);
    parallel_for(split.k, opt.workers, [&](std::size_t f) {
        try {
            r.folds[f] = run_fold(dataset, split.folds[f].train, split.folds[f].validation, model_config, cfg,
                                  fold_seed(opt.seed, f), opt.n_context_draws, opt.progress);
        } catch (const TrainingDivergence& e) {
            throw TrainingDivergence("fold " + std::to_string(f) + ": " + e.what(), e.parameter());
        }
        r.folds[f].fold = f;
    });
    aggregate(r);
    return r;
}

// ---------------------------------------------------------------------------
// Expert comparison

struct ExpertScores {
    std::size_t expert = 0;
    std::string expert_id;
    /// Against the majority vote of all other experts.
    std::vector<SampleScore> vs_consensus;
    Distribution unweighted_vs_consensus;
    Distribution weighted_vs_consensus;
    /// Per sample, the mean F1 against each other expert individually.
    std::vector<double> unweighted_mean_pairwise;
    Distribution unweighted_pairwise;
    std::size_t consensus_ties = 0;
};

/// expert_gatings[s][e] is expert e's gating of sample s. Each expert is
/// scored against the consensus of the remaining ones.
inline std::vector<ExpertScores> expert_loo_eval(const std::vector<std::vector<io::LabeledSample>>& expert_gatings) {
    if (expert_gatings.empty()) throw ValidationError("expert comparison needs at least one sample");
    const std::size_t n_experts = expert_gatings.front().size();
    if (n_experts < 3) throw ValidationError("leave-one-expert-out needs at least three experts, got " +
                                             std::to_string(n_experts));
    for (const auto& per_sample : expert_gatings)
        if (per_sample.size() != n_experts) throw AlignmentError("every sample needs a gating from every expert");

    std::vector<ExpertScores> out(n_experts);
    for (std::size_t e = 0; e < n_experts; ++e) {
        ExpertScores& es = out[e];
        es.expert = e;
        es.expert_id = expert_gatings.front()[e].expert_id.value_or("expert" + std::to_string(e + 1));
        std::vector<double> uw, w;
        for (const auto& per_sample : expert_gatings) {
            std::vector<io::LabeledSample> others;
            for (std::size_t o = 0; o < n_experts; ++o)
                if (o != e) others.push_back(per_sample[o]);
            const auto cons = io::consensus_labels(others);
            es.consensus_ties += cons.tie_count;
            const auto& mine = per_sample[e];
            if (mine.n_events() != cons.sample.n_events())
                throw AlignmentError("expert gatings of sample '" + mine.sample_id() + "' disagree on event count");
            const auto rep = f1_scores(ConfusionMatrix::from_labels(cons.sample.labels, mine.labels, mine.n_classes()));
            es.vs_consensus.push_back({mine.sample_id(), rep});
            uw.push_back(rep.unweighted_f1);
            w.push_back(rep.weighted_f1);

            double pair = 0.0;
            for (const auto& o : others)
                pair += f1_scores(ConfusionMatrix::from_labels(o.labels, mine.labels, mine.n_classes())).unweighted_f1;
            es.unweighted_mean_pairwise.push_back(pair / static_cast<double>(others.size()));
        }
        es.unweighted_vs_consensus = summarize(uw);
        es.weighted_vs_consensus = summarize(w);
        es.unweighted_pairwise = summarize(es.unweighted_mean_pairwise);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Learning curves

struct CurvePoint {
    std::size_t n_train = 0;  // training samples per fold
    std::vector<FoldResult> folds;
    /// Per-sample validation scores across all folds.
    Distribution unweighted;
    Distribution weighted;
    double pooled_unweighted_mean = 0.0;
    double pooled_weighted_mean = 0.0;
};

struct LearningCurve {
    std::vector<CurvePoint> points;
};

/// Sizes of 0 mean "the whole training fold". Training samples for a size
/// are drawn without replacement from each fold's training set; every size
/// reuses the fold seeds of cross_validate.
inline LearningCurve learning_curve(std::span<const io::LabeledSample> dataset, const std::vector<std::size_t>& sizes,
                                    const ModelConfig& model_config, const TrainConfig& cfg, const CvOptions& opt = {}) {
    detail::check_unique_ids(dataset);
    std::vector<std::string> ids;
    for (const auto& s : dataset) ids.push_back(s.sample_id());
    const FoldSplit split = kfold_split(ids, opt.k, opt.seed);
    for (std::size_t n : sizes)
        for (const auto& f : split.folds)
            if (n > f.train.size())
                throw ConfigError("learning curve size " + std::to_string(n) + " exceeds the training fold size " +
                                  std::to_string(f.train.size()));

    LearningCurve lc;
    lc.points.resize(sizes.size());
    for (auto& pt : lc.points) pt.folds.resize(split.k);
    const std::size_t jobs = sizes.size() * split.k;
    parallel_for(jobs, opt.workers, [&](std::size_t job) {
        const std::size_t si = job / split.k, f = job % split.k;
        const auto& fold = split.folds[f];
        std::vector<std::string> chosen = fold.train;
        const std::size_t n = sizes[si] == 0 ? fold.train.size() : sizes[si];
        if (n < chosen.size()) {
            std::mt19937_64 rng(derive_seed(fold_seed(opt.seed, f), 5000 + n));
            std::shuffle(chosen.begin(), chosen.end(), rng);
            chosen.resize(n);
        }
        lc.points[si].folds[f] = run_fold(dataset, chosen, fold.validation, model_config, cfg, fold_seed(opt.seed, f),
                                          opt.n_context_draws, opt.progress);
        lc.points[si].folds[f].fold = f;
    });
    for (std::size_t si = 0; si < sizes.size(); ++si) {
        CurvePoint& pt = lc.points[si];
        pt.n_train = sizes[si];
        std::vector<double> uw, w, pu, pw;
        for (const auto& f : pt.folds) {
            for (const auto& s : f.per_sample) {
                uw.push_back(s.report.unweighted_f1);
                w.push_back(s.report.weighted_f1);
            }
            pu.push_back(f.report.unweighted_f1);
            pw.push_back(f.report.weighted_f1);
        }
        pt.unweighted = summarize(uw);
        pt.weighted = summarize(w);
        double sd = 0.0;
        mean_std(pu, pt.pooled_unweighted_mean, sd);
        mean_std(pw, pt.pooled_weighted_mean, sd);
    }
    return lc;
}

}  // namespace gatenet::train
