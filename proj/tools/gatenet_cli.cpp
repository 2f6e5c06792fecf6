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
#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "gatenet/cli/commands.hpp"
#include "gatenet/runtime.hpp"

using gatenet::cli::RunConfig;

namespace {

void add_data(CLI::App* c, RunConfig& rc, bool labeled) {
    c->add_option("--data,data", rc.data, "Sample files or directories of them")->required();
    if (labeled) {
        c->add_option("--label-column", rc.label_column, "Column holding integer labels")->capture_default_str();
        c->add_option("--classes", rc.classes, "Class names in label order (default: classes.txt beside the data)")
            ->delimiter(',');
    }
}

void add_model(CLI::App* c, RunConfig& rc) {
    c->add_option("--model", rc.model, "gatenet or baseline")->capture_default_str();
    c->add_option("--context,-K", rc.context, "Context events per event")->capture_default_str();
    c->add_option("--single-filters", rc.single_filters, "Single-event block widths")->delimiter(',');
    c->add_option("--context-filters", rc.context_filters, "Context block widths")->delimiter(',');
    c->add_option("--head-hidden", rc.head_hidden, "Hidden width of the classification head")->capture_default_str();
    c->add_option("--baseline-hidden", rc.baseline_hidden, "Hidden widths of the context-free baseline")
        ->delimiter(',');
}

void add_training(CLI::App* c, RunConfig& rc) {
    auto& t = rc.train;
    c->add_option("--batch-size", t.batch_size, "Largest batch size")->capture_default_str();
    c->add_option("--max-iters", t.max_iters, "Iteration cap")->capture_default_str();
    c->add_option("--max-epochs", t.max_epochs, "Epoch cap")->capture_default_str();
    c->add_option("--min-iters", t.min_iters_small_data, "Iterations guaranteed on small data")->capture_default_str();
    c->add_option("--max-lr", t.max_lr, "Peak learning rate of the 1cycle schedule")->capture_default_str();
    c->add_option("--loss-beta", t.loss_beta, "Class-balanced loss beta")->capture_default_str();
    c->add_option("--sampling-beta", t.sampling_beta, "Class-balanced sampling beta")->capture_default_str();
    c->add_option("--gamma", t.focal_gamma, "Focal loss gamma")->capture_default_str();
    c->add_flag("!--no-class-weights", t.class_weighted_loss, "Unit class weights in the loss");
    c->add_flag("!--uniform-sampling", t.weighted_sampling, "Draw training events uniformly");
    c->add_option("--transform", rc.transform, "none, asinh or zscore")->capture_default_str();
    c->add_option("--cofactor", t.asinh_cofactor, "asinh cofactor")->capture_default_str();
}

void add_eval(CLI::App* c, RunConfig& rc) {
    c->add_option("--folds,-k", rc.folds, "Cross-validation folds")->capture_default_str();
    c->add_option("--context-draws", rc.context_draws, "Context draws averaged at inference")->capture_default_str();
    c->add_option("--workers", rc.workers, "Parallel folds (default: GATENET_WORKERS or 1)");
}

}  // namespace

int main(int argc, char** argv) {
    gatenet::tune_allocator();
    RunConfig rc;
    CLI::App app{"GateNet: context-aware gating of flow cytometry samples"};
    app.set_config("--config", "", "Read settings from a TOML/INI file; flags override it");
    app.require_subcommand(1);
    app.fallthrough();
    app.add_option("--seed", rc.seed, "Seed for every random stream")->capture_default_str();
    app.add_option("--out,-o", rc.out, "Output directory")->capture_default_str();
    app.add_flag("--verbose,-v", rc.verbose, "Print training progress");

    auto* train = app.add_subcommand("train", "Train a model; writes checkpoint, history and manifest");
    add_data(train, rc, true);
    add_model(train, rc);
    add_training(train, rc);

    auto* predict = app.add_subcommand("predict", "Label samples with a trained model; writes labels and plot data");
    add_data(predict, rc, false);
    predict->add_option("--checkpoint", rc.checkpoint, "Trained model")->required();
    predict->add_option("--plot-pair", rc.plot_pairs, "MARKER_X:MARKER_Y pairs for plot data");
    predict->add_option("--context-draws", rc.context_draws, "Context draws averaged per event")->capture_default_str();

    auto* ph = app.add_subcommand("predict-hierarchy", "Chain per-subdataset models over the gating hierarchy");
    add_data(ph, rc, false);
    ph->add_option("--models", rc.models_dir, "Directory of <subdataset>.gnck checkpoints")->required();
    ph->add_option("--context-draws", rc.context_draws, "Context draws averaged per event")->capture_default_str();

    auto* sub = app.add_subcommand("subdatasets", "Split labeled samples into the hierarchy's subdatasets");
    add_data(sub, rc, true);

    auto* cv = app.add_subcommand("cv", "k-fold cross-validation over samples");
    add_data(cv, rc, true);
    add_model(cv, rc);
    add_training(cv, rc);
    add_eval(cv, rc);

    auto* lc = app.add_subcommand("learning-curve", "Cross-validated scores against the number of training samples");
    add_data(lc, rc, true);
    add_model(lc, rc);
    add_training(lc, rc);
    add_eval(lc, rc);
    lc->add_option("--sizes", rc.sizes, "Training-set sizes; 'all' is the whole fold")->delimiter(',');

    auto* ee = app.add_subcommand("expert-eval", "Score each expert against the consensus of the others");
    ee->add_option("--expert", rc.experts, "One directory of labeled samples per expert")->required();
    ee->add_option("--label-column", rc.label_column, "Column holding integer labels")->capture_default_str();
    ee->add_option("--classes", rc.classes, "Class names in label order")->delimiter(',');

    auto* synth = app.add_subcommand("synth", "Generate a synthetic labeled dataset as CSV files");
    synth->add_option("--preset", rc.preset, "separable, batch_hard or rare_class");
    synth->add_option("--spec", rc.spec_file, "Spec file in key = value format");
    synth->add_option("--samples", rc.n_samples, "Override the number of samples");
    synth->add_option("--events", rc.events, "Override the median events per sample");
    synth->add_option("--label-column", rc.label_column, "Label column name")->capture_default_str();

    auto* sweep = app.add_subcommand("sweep", "Cross-validate over values of one setting");
    add_data(sweep, rc, true);
    add_model(sweep, rc);
    add_training(sweep, rc);
    add_eval(sweep, rc);
    sweep->add_option("--param", rc.sweep_param, "gamma, loss_beta, sampling_beta, max_lr or context")->required();
    sweep->add_option("--values", rc.sweep_values, "Values to try")->delimiter(',')->required();

    auto* bench = app.add_subcommand("bench", "Inference throughput on a synthetic sample");
    add_model(bench, rc);
    bench->add_option("--checkpoint", rc.checkpoint, "Trained model (default: untrained weights)");
    bench->add_option("--events", rc.bench_events, "Events in the benchmark sample")->capture_default_str();
    bench->add_option("--preset", rc.preset, "Synthetic preset for the sample");
    bench->add_option("--context-draws", rc.context_draws, "Context draws averaged per event")->capture_default_str();

    for (auto* sub : app.get_subcommands([](CLI::App*) { return true; })) sub->configurable();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return gatenet::cli::config_error;
    }
    rc.command = app.get_subcommands().front()->get_name();
    const int code = gatenet::cli::run(rc);
    if (code == gatenet::cli::ok) {
        try {
            // The given settings; `--config run.ini` repeats the run.
            gatenet::cli::write_atomic(std::filesystem::path(rc.out) / "run.ini",
                                       app.config_to_str(false, false));
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return gatenet::cli::failure;
        }
    }
    return code;
}
