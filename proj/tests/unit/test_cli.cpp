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
#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gatenet/io/csv.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kSmall =
    " --model gatenet -K 20 --single-filters 32,16 --context-filters 16,8 --head-hidden 8";

class Cli : public ::testing::Test {
protected:
    fs::path dir;

    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir = fs::temp_directory_path() / (std::string("gatenet_cli_") + info->name());
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }

    int run(const std::string& args) {
        const std::string cmd = std::string(GATENET_CLI) + " " + args + " >" + (dir / "stdout.txt").string() +
                                " 2>" + (dir / "stderr.txt").string();
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }
    std::string slurp(const fs::path& p) {
        std::ifstream in(p);
        std::ostringstream os;
        os << in.rdbuf();
        return os.str();
    }
    std::string err() { return slurp(dir / "stderr.txt"); }

    fs::path synth(const std::string& preset, int samples, int events, int seed = 1) {
        const fs::path out = dir / ("data_" + preset);
        EXPECT_EQ(run("synth --preset " + preset + " --samples " + std::to_string(samples) + " --events " +
                      std::to_string(events) + " --seed " + std::to_string(seed) + " --out " + out.string()),
                  0)
            << err();
        return out;
    }
    static std::vector<fs::path> csvs(const fs::path& d, const std::string& suffix = ".csv") {
        std::vector<fs::path> out;
        for (const auto& e : fs::directory_iterator(d)) {
            const auto n = e.path().filename().string();
            if (n.size() >= suffix.size() && n.compare(n.size() - suffix.size(), suffix.size(), suffix) == 0)
                out.push_back(e.path());
        }
        std::sort(out.begin(), out.end());
        return out;
    }
    static std::vector<std::vector<std::string>> rows(const std::string& text) {
        std::vector<std::vector<std::string>> out;
        std::istringstream in(text);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::vector<std::string> cells;
            std::string cell;
            std::istringstream ls(line);
            while (std::getline(ls, cell, ',')) cells.push_back(cell);
            out.push_back(cells);
        }
        return out;
    }
};

}  // namespace

TEST_F(Cli, SynthWritesOneFilePerSample) {
    const auto d = synth("batch_hard", 3, 100);
    EXPECT_EQ(csvs(d).size(), 3u);
    EXPECT_TRUE(fs::exists(d / "classes.txt"));
    EXPECT_TRUE(fs::exists(d / "ground_truth.json"));
    EXPECT_TRUE(fs::exists(d / "manifest.json"));
    const auto s = gatenet::io::load_labeled_csv(csvs(d)[0], "label", {"pop1", "pop2", "pop3"});
    EXPECT_EQ(s.events.n_markers(), 4u);
}

TEST_F(Cli, UsageAndConfigErrors) {
    EXPECT_EQ(run("--help"), 0);
    EXPECT_EQ(run(""), 2);
    EXPECT_EQ(run("synth --out " + dir.string()), 2);
    EXPECT_EQ(run("synth --preset nope --out " + dir.string()), 2);
    EXPECT_NE(err().find("nope"), std::string::npos);
    const auto d = synth("separable", 2, 50);
    EXPECT_EQ(run("sweep --data " + d.string() + " --param depth --values 1,2 --out " + (dir / "o").string()), 2);
    EXPECT_NE(err().find("depth"), std::string::npos);
    EXPECT_EQ(run("train --data " + d.string() + " --model mlp --out " + (dir / "o").string()), 2);
}

TEST_F(Cli, DataErrors) {
    const auto d = synth("separable", 2, 50);
    EXPECT_EQ(run("train --data " + (dir / "missing").string() + " --out " + (dir / "o").string()), 3);
    EXPECT_EQ(run("train --data " + d.string() + " --label-column population --out " + (dir / "o").string()), 3);
    const std::string e = err();
    EXPECT_NE(e.find("population"), std::string::npos) << e;
    EXPECT_NE(e.find("sample_001.csv"), std::string::npos) << e;
}

TEST_F(Cli, DivergenceExitCode) {
    const auto d = dir / "huge";
    fs::create_directories(d);
    std::ofstream(d / "classes.txt") << "a\nb\n";
    std::ofstream f(d / "s1.csv");
    f << "x,y,label\n";
    for (int i = 0; i < 2000; ++i) f << "1e307,1e307," << i % 2 << "\n";
    f.close();
    EXPECT_EQ(run("train --data " + d.string() + " --transform none" + kSmall + " --out " + (dir / "o").string()), 4)
        << err();
    EXPECT_NE(err().find("iteration"), std::string::npos) << err();
}

TEST_F(Cli, TrainPredictRoundTrip) {
    const auto d = synth("separable", 4, 1000);
    const auto out = dir / "model";
    ASSERT_EQ(run("train --data " + d.string() + kSmall + " --seed 3 --out " + out.string()), 0) << err();
    ASSERT_TRUE(fs::exists(out / "model.gnck"));
    const auto history = json::parse(slurp(out / "history.json"));
    const auto& its = history["iterations"];
    ASSERT_GT(its.size(), 1u);
    EXPECT_GE(its.front()["loss"].get<double>() / its.back()["loss"].get<double>(), 10.0);
    const auto manifest = json::parse(slurp(out / "manifest.json"));
    EXPECT_EQ(manifest["settings"]["seed"], 3);
    EXPECT_EQ(manifest["inputs"].size(), 4u);

    // Same settings, same checkpoint bytes.
    const auto again = dir / "again";
    ASSERT_EQ(run("train --data " + d.string() + kSmall + " --seed 3 --out " + again.string()), 0) << err();
    EXPECT_EQ(slurp(out / "model.gnck"), slurp(again / "model.gnck"));
    // Replaying the recorded settings file reproduces it too.
    const auto replay = dir / "replay";
    ASSERT_EQ(run("--config " + (out / "run.ini").string() + " --out " + replay.string()), 0) << err();
    EXPECT_EQ(slurp(out / "model.gnck"), slurp(replay / "model.gnck"));

    const auto pred = dir / "pred";
    const auto sample = csvs(d)[0];
    ASSERT_EQ(run("predict --data " + sample.string() + " --checkpoint " + (out / "model.gnck").string() +
                  " --plot-pair M1:M2 --plot-pair M3:M4 --out " + pred.string()),
              0)
        << err();
    const auto labels = rows(slurp(pred / "sample_001.labels.csv"));
    const auto input = gatenet::io::load_labeled_csv(sample, "label", {"pop1", "pop2", "pop3"});
    ASSERT_EQ(labels.size(), input.n_events() + 1);
    EXPECT_EQ(labels[0], (std::vector<std::string>{"event_index", "predicted_class", "probability_pop1",
                                                   "probability_pop2", "probability_pop3"}));
    std::map<std::string, int> label_counts;
    std::size_t agree = 0;
    for (std::size_t i = 1; i < labels.size(); ++i) {
        double s = 0.0;
        for (std::size_t c = 2; c < 5; ++c) s += std::stod(labels[i][c]);
        EXPECT_NEAR(s, 1.0, 1e-9);
        ++label_counts[labels[i][1]];
        agree += labels[i][1] == input.class_names[static_cast<std::size_t>(input.labels[i - 1])];
    }
    EXPECT_GE(double(agree) / double(input.n_events()), 0.98);
    for (const std::string pair : {"M1_M2", "M3_M4"}) {
        const auto plot = rows(slurp(pred / ("sample_001.plot_" + pair + ".csv")));
        ASSERT_EQ(plot.size(), labels.size());
        std::map<std::string, int> plot_counts;
        for (std::size_t i = 1; i < plot.size(); ++i) ++plot_counts[plot[i][2]];
        EXPECT_EQ(plot_counts, label_counts);
    }

    // Missing marker: exit 3 naming it.
    std::string text = slurp(sample);
    text.replace(text.find("M3"), 2, "CD8");
    std::ofstream(dir / "renamed.csv") << text;
    EXPECT_EQ(run("predict --data " + (dir / "renamed.csv").string() + " --checkpoint " +
                  (out / "model.gnck").string() + " --out " + pred.string()),
              3);
    EXPECT_NE(err().find("M3"), std::string::npos) << err();
}

TEST_F(Cli, SweepEmitsOneRowPerValue) {
    const auto d = synth("separable", 3, 150);
    ASSERT_EQ(run("sweep --data " + d.string() + kSmall + " -k 3 --param gamma --values 0,1,5 --out " +
                  (dir / "o").string()),
              0)
        << err();
    const auto r = rows(slurp(dir / "o" / "sweep.csv"));
    ASSERT_EQ(r.size(), 4u);
    EXPECT_EQ(r[1][1], "0");
    EXPECT_EQ(r[3][1], "5");
}

TEST_F(Cli, CrossValidateAndLearningCurve) {
    const auto d = synth("separable", 4, 150);
    ASSERT_EQ(run("cv --data " + d.string() + kSmall + " -k 2 --out " + (dir / "cv").string()), 0) << err();
    const auto cv = json::parse(slurp(dir / "cv" / "cv.json"));
    EXPECT_EQ(cv["folds"].size(), 2u);
    EXPECT_EQ(rows(slurp(dir / "cv" / "cv_samples.csv")).size(), 5u);
    ASSERT_EQ(run("learning-curve --data " + d.string() + kSmall + " -k 2 --sizes 1,all --out " +
                  (dir / "lc").string()),
              0)
        << err();
    EXPECT_EQ(rows(slurp(dir / "lc" / "learning_curve.csv")).size(), 3u);
    EXPECT_EQ(run("learning-curve --data " + d.string() + kSmall + " -k 2 --sizes 3 --out " + (dir / "lc").string()),
              2);
}

TEST_F(Cli, ExpertEvalOnIdenticalExperts) {
    const auto d = synth("separable", 2, 100);
    std::string args = "expert-eval --classes pop1,pop2,pop3";
    for (const std::string e : {"e1", "e2", "e3", "e4"}) {
        fs::create_directories(dir / e);
        for (const auto& f : csvs(d)) fs::copy_file(f, dir / e / f.filename());
        args += " --expert " + (dir / e).string();
    }
    ASSERT_EQ(run(args + " --out " + (dir / "o").string()), 0) << err();
    const auto j = json::parse(slurp(dir / "o" / "expert_eval.json"));
    ASSERT_EQ(j["experts"].size(), 4u);
    for (const auto& e : j["experts"]) {
        EXPECT_EQ(e["unweighted_vs_consensus"]["median"].get<double>(), 1.0);
        EXPECT_EQ(e["weighted_vs_consensus"]["median"].get<double>(), 1.0);
    }
    EXPECT_EQ(run("expert-eval --expert " + (dir / "e1").string() + " --expert " + (dir / "e2").string() +
                  " --out " + (dir / "o").string()),
              2);
}

TEST_F(Cli, BenchReportsThroughput) {
    ASSERT_EQ(run("bench" + kSmall + " --events 500 --out " + dir.string()), 0) << err();
    const auto j = json::parse(slurp(dir / "bench.json"));
    EXPECT_EQ(j["events"], 500);
    EXPECT_GT(j["events_per_second"].get<double>(), 0.0);
}

TEST_F(Cli, InputsAreNotModified) {
    const auto d = synth("separable", 2, 100);
    std::map<fs::path, std::string> before;
    for (const auto& f : csvs(d)) before[f] = slurp(f);
    ASSERT_EQ(run("train --data " + d.string() + kSmall + " --out " + (dir / "o").string()), 0) << err();
    for (const auto& [f, text] : before) EXPECT_EQ(slurp(f), text);
}
