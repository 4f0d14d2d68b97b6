// Copyright 2026 The Fisher Probe Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdlib>
#include <sstream>

#include <gtest/gtest.h>
#include <sys/wait.h>

// Eigen goes ahead of httplib, whose <resolv.h> defines a _res macro.
#include "oracles.hpp"

#include "fisher_probe/cli.hpp"
#include "fisher_probe/error.hpp"
#include "fisher_probe/records.hpp"
#include "fisher_probe/service.hpp"

namespace fisher_probe::cli {
namespace {

using nlohmann::json;
using testing::data_dir;
using testing::slurp;

std::vector<json> read_jsonl(const fs::path& path) {
  std::vector<json> rows;
  std::istringstream in(slurp(path));
  std::string line;
  while (std::getline(in, line)) rows.push_back(json::parse(line));
  return rows;
}

int run_binary(const std::string& args) {
  const std::string cmd = std::string(FISHER_PROBE_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Small text model trained on the review fixture, shared by the tests below.
class TextCliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = testing::scratch_dir("cli_text");
    TrainOptions o;
    o.model = "textcnn";
    o.data.data = data_dir() / "reviews.jsonl";
    o.data.embeddings = data_dir() / "embeddings.txt";
    o.overrides.epochs = 3;
    o.overrides.batch_size = 4;
    o.out = dir_ / "text.ckpt";
    std::ostringstream out, err;
    ASSERT_EQ(cmd_train(o, out, err), 0) << err.str();
  }
  static ScoreOptions score_options() {
    ScoreOptions o;
    o.checkpoint = dir_ / "text.ckpt";
    o.data.data = data_dir() / "reviews.jsonl";
    o.data.embeddings = data_dir() / "embeddings.txt";
    return o;
  }
  static PairsOptions pairs_options(const std::string& file, const std::string& out) {
    PairsOptions o;
    o.checkpoint = dir_ / "text.ckpt";
    o.pairs = data_dir() / file;
    o.embeddings = data_dir() / "embeddings.txt";
    o.out_dir = dir_ / out;
    return o;
  }
  static inline fs::path dir_;
};

TEST_F(TextCliTest, CheckpointRecordsVocabularyAndLabels) {
  const auto ck = models::load_checkpoint(dir_ / "text.ckpt");
  const auto table = datakit::load_embeddings(data_dir() / "embeddings.txt");
  EXPECT_EQ(ck.vocab_hash, table.fingerprint());
  EXPECT_EQ(ck.metadata.at("labels"), json({"neg", "pos"}));
  EXPECT_EQ(ck.model.spec.embedding_dim, 4u);
  EXPECT_TRUE(fs::exists(dir_ / "text.ckpt.report.json"));
}

TEST_F(TextCliTest, ScoreWritesOneRowPerExample) {
  ScoreOptions o = score_options();
  o.out = dir_ / "scored.jsonl";
  std::ostringstream out, err;
  ASSERT_EQ(cmd_score(o, out, err), 0) << err.str();
  const auto rows = read_jsonl(o.out);
  ASSERT_EQ(rows.size(), 10u);
  EXPECT_EQ(rows[0].at("id"), "r0");
  EXPECT_NE(out.str().find("lambda_max min="), std::string::npos);
  EXPECT_FALSE(rows[0].contains("top_eigenvector"));
}

TEST_F(TextCliTest, ScoreSortAndEigenvectors) {
  ScoreOptions o = score_options();
  o.out = dir_ / "sorted.jsonl";
  o.sort = true;
  o.top_eigvec = true;
  std::ostringstream out, err;
  ASSERT_EQ(cmd_score(o, out, err), 0) << err.str();
  const auto rows = read_jsonl(o.out);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_GE(rows[i - 1].at("lambda_max").get<double>(), rows[i].at("lambda_max").get<double>());
  }
  for (const auto& r : rows) {
    const auto v = r.at("top_eigenvector").get<std::vector<double>>();
    EXPECT_NEAR(norm2(v), 1.0, 1e-12);
    EXPECT_EQ(r.at("top_eigenvector_shape")[1], 4);
  }
}

TEST_F(TextCliTest, ScoreMatchesHttpBitForBit) {
  ScoreOptions o = score_options();
  o.out = dir_ / "for_http.jsonl";
  std::ostringstream out, err;
  ASSERT_EQ(cmd_score(o, out, err), 0);
  const auto rows = read_jsonl(o.out);
  const auto ck = models::load_checkpoint(dir_ / "text.ckpt");
  service::Service svc(load_classifier(ck, data_dir() / "embeddings.txt"), {}, "h");
  const auto examples = datakit::load_dataset(data_dir() / "reviews.jsonl", datakit::DatasetFormat::kJsonl,
                                              datakit::LabelMap::parse("neg,pos"));
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto r = svc.score(json{{"text", examples[i].text}}.dump());
    ASSERT_EQ(r.status, 200);
    EXPECT_EQ(r.body.at("lambda_max").dump(), rows[i].at("lambda_max").dump());
    EXPECT_EQ(r.body.at("probs").dump(), rows[i].at("probs").dump());
  }
}

TEST_F(TextCliTest, ScoreRejectsMismatchedEmbeddings) {
  const auto other = testing::scratch_dir("cli_other_emb");
  std::ofstream(other / "emb.txt") << "the 1 2 3 4\nmovie 0 0 0 1\n";
  ScoreOptions o = score_options();
  o.data.embeddings = other / "emb.txt";
  o.out = other / "x.jsonl";
  std::ostringstream out, err;
  EXPECT_EQ(cmd_score(o, out, err), 1);
  EXPECT_NE(err.str().find("does not match"), std::string::npos) << err.str();
}

TEST_F(TextCliTest, ScoreFailsWhenTooManyExamplesFail) {
  const auto d = testing::scratch_dir("cli_failures");
  std::ofstream(d / "data.jsonl") << "{\"text\": \"good\", \"label\": 1}\n{\"text\": \"<br />\", \"label\": 0}\n";
  ScoreOptions o = score_options();
  o.data.data = d / "data.jsonl";
  o.out = d / "out.jsonl";
  std::ostringstream out, err;
  EXPECT_EQ(cmd_score(o, out, err), 1);
  EXPECT_NE(err.str().find("example '1' failed"), std::string::npos) << err.str();
  EXPECT_EQ(read_jsonl(o.out).size(), 1u);
}

TEST_F(TextCliTest, IdenticalPairsGiveZeroDeltaAndFullOverlap) {
  const PairsOptions o = pairs_options("pairs_identical.jsonl", "identical");
  std::ostringstream out, err;
  ASSERT_EQ(cmd_pairs(o, out, err), 0) << err.str();
  const json summary = json::parse(slurp(o.out_dir / "summary.json"));
  EXPECT_EQ(summary.at("mean").get<double>(), 0.0);
  EXPECT_EQ(summary.at("std").get<double>(), 0.0);
  EXPECT_EQ(summary.at("count"), 10);
  EXPECT_EQ(read_jsonl(o.out_dir / "pairs.jsonl").size(), 10u);
  std::istringstream csv(slurp(o.out_dir / "histogram.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "bin_left,bin_right,mass_a,mass_b");
  std::size_t bins = 0;
  while (std::getline(csv, line)) {
    ++bins;
    const auto a = line.rfind(',');
    const auto b = line.rfind(',', a - 1);
    EXPECT_EQ(line.substr(b + 1, a - b - 1), line.substr(a + 1));
  }
  EXPECT_EQ(bins, 50u);
}

TEST_F(TextCliTest, ToyPairsMatchManualScoring) {
  PairsOptions o = pairs_options("pairs_toy.jsonl", "toy");
  std::ostringstream out, err;
  ASSERT_EQ(cmd_pairs(o, out, err), 0) << err.str();
  const auto ck = models::load_checkpoint(dir_ / "text.ckpt");
  const auto c = load_classifier(ck, data_dir() / "embeddings.txt");
  auto lam = [&](const char* text) { return fim::lambda_max(c, {"x", text, std::nullopt, 0}).lambda_max; };
  const double d1 = lam("the worst movie") - lam("the best movie");
  const double d2 = lam("a bad plot") - lam("a good plot");
  const json summary = json::parse(slurp(o.out_dir / "summary.json"));
  EXPECT_DOUBLE_EQ(summary.at("mean").get<double>(), 0.5 * (d1 + d2));
  EXPECT_DOUBLE_EQ(summary.at("std").get<double>(), 0.5 * std::abs(d1 - d2));
  const auto rows = read_jsonl(o.out_dir / "pairs.jsonl");
  EXPECT_EQ(rows[0].at("delta").get<double>(), d1);
  EXPECT_EQ(rows[1].at("delta").get<double>(), d2);
}

TEST_F(TextCliTest, OverlapAgainstBaseScores) {
  ScoreOptions s = score_options();
  s.out = dir_ / "base.jsonl";
  std::ostringstream out, err;
  ASSERT_EQ(cmd_score(s, out, err), 0);
  PairsOptions o = pairs_options("pairs_identical.jsonl", "overlap");
  o.overlap = s.out;
  ASSERT_EQ(cmd_pairs(o, out, err), 0) << err.str();
  const json overlap = json::parse(slurp(o.out_dir / "overlap.json"));
  // Perturbed texts equal the base texts here.
  EXPECT_EQ(overlap.at("overlap_percent").get<double>(), 100.0);
  EXPECT_EQ(overlap.at("bins"), 50);
}

TEST(CliTest, SyntheticTrainMeetsAccuracyAndIsReproducible) {
  const auto dir = testing::scratch_dir("cli_synth_train");
  TrainOptions o;
  o.synthetic = true;
  o.seed = 3;
  o.out = dir / "a.ckpt";
  std::ostringstream out, err;
  ASSERT_EQ(cmd_train(o, out, err), 0) << err.str();
  EXPECT_NE(out.str().find("valid accuracy: "), std::string::npos);
  const auto ck = models::load_checkpoint(o.out);
  EXPECT_GE(ck.metadata.at("best_valid_accuracy").get<double>(), 0.95);
  EXPECT_EQ(ck.metadata.at("data").at("seed"), 3);
  o.out = dir / "b.ckpt";
  ASSERT_EQ(cmd_train(o, out, err), 0);
  EXPECT_EQ(slurp(dir / "a.ckpt"), slurp(dir / "b.ckpt"));
  EXPECT_EQ(slurp(dir / "a.ckpt.report.json"), slurp(dir / "b.ckpt.report.json"));
}

TEST(CliTest, SyntheticCommandOutputs) {
  const auto dir = testing::scratch_dir("cli_synth");
  SyntheticOptions o;
  o.n_per_class = 150;
  o.seed = 2;
  o.out_dir = dir / "a";
  std::ostringstream out, err;
  ASSERT_EQ(cmd_synthetic(o, out, err), 0) << err.str();
  EXPECT_NE(out.str().find("spearman(lambda_max, boundary_distance): "), std::string::npos);
  std::istringstream eig(slurp(o.out_dir / "top20_eigvec.csv"));
  std::string line;
  std::getline(eig, line);
  EXPECT_EQ(line, "x1,x2,v1,v2");
  std::size_t rows = 0;
  while (std::getline(eig, line)) {
    ++rows;
    double x1, x2, v1, v2;
    char c;
    std::istringstream fields(line);
    fields >> x1 >> c >> x2 >> c >> v1 >> c >> v2;
    EXPECT_NEAR(v1 * v1 + v2 * v2, 1.0, 1e-10);
  }
  EXPECT_EQ(rows, 20u);
  const std::string points = slurp(o.out_dir / "points.csv");
  EXPECT_EQ(points.substr(0, points.find('\n')), "x1,x2,label,lambda_max,boundary_distance");
  EXPECT_EQ(std::count(points.begin(), points.end(), '\n'), 301);

  o.out_dir = dir / "b";
  ASSERT_EQ(cmd_synthetic(o, out, err), 0);
  for (const char* f : {"points.csv", "top20_eigvec.csv", "model.ckpt", "train_report.json", "summary.json"}) {
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  }
}

TEST(CliTest, MissingEmbeddingFileExitsTwoAndNamesPath) {
  TrainOptions o;
  o.model = "textcnn";
  o.data.data = data_dir() / "reviews.jsonl";
  o.data.embeddings = "/nonexistent/glove.50d.txt";
  o.out = testing::scratch_dir("cli_missing") / "m.ckpt";
  std::ostringstream out, err;
  EXPECT_EQ(cmd_train(o, out, err), 2);
  EXPECT_NE(err.str().find("/nonexistent/glove.50d.txt"), std::string::npos) << err.str();
}

TEST(CliTest, ErrorExitCodes) {
  std::ostringstream out, err;
  ScoreOptions s;
  s.checkpoint = "/nonexistent.ckpt";
  EXPECT_EQ(cmd_score(s, out, err), 2);
  const auto dir = testing::scratch_dir("cli_codes");
  std::ofstream(dir / "bad.ckpt") << "garbage";
  s.checkpoint = dir / "bad.ckpt";
  s.data.data = data_dir() / "reviews.jsonl";
  EXPECT_EQ(cmd_score(s, out, err), 2);
  TrainOptions t;
  t.model = "textcnn";
  t.synthetic = true;
  t.out = dir / "x.ckpt";
  EXPECT_EQ(cmd_train(t, out, err), 1);
}

TEST(CliTest, TrainConfigOverrides) {
  TrainOverrides o;
  o.optimizer = "adam";
  o.epochs = 7;
  const auto c = train_config(models::ModelKind::kMlp, o, 5);
  EXPECT_EQ(c.optimizer, trainer::OptimizerKind::kAdam);
  EXPECT_EQ(c.epochs, 7u);
  EXPECT_EQ(c.learning_rate, 0.1);
  EXPECT_EQ(c.seed, 5u);
  o.optimizer = "rmsprop";
  EXPECT_THROW(train_config(models::ModelKind::kMlp, o, 0), fisher_probe::InvalidArgument);
}

TEST(CliTest, PointDatasetsScoreWithTheMlp) {
  const auto dir = testing::scratch_dir("cli_points");
  TrainOptions t;
  t.data.data = data_dir() / "points.jsonl";
  t.data.labels = "0,1";
  t.overrides.epochs = 50;
  t.out = dir / "m.ckpt";
  std::ostringstream out, err;
  ASSERT_EQ(cmd_train(t, out, err), 0) << err.str();
  ScoreOptions s;
  s.checkpoint = t.out;
  s.data.data = data_dir() / "points.jsonl";
  s.out = dir / "scored.jsonl";
  ASSERT_EQ(cmd_score(s, out, err), 0) << err.str();
  EXPECT_EQ(read_jsonl(s.out).size(), 40u);
  EXPECT_EQ(records::read_scored_jsonl(s.out).size(), 40u);
}

TEST(CliBinaryTest, HelpAndExitCodes) {
  EXPECT_EQ(run_binary("--help"), 0);
  EXPECT_EQ(run_binary("score --help"), 0);
  EXPECT_NE(run_binary(""), 0);
  EXPECT_EQ(run_binary("train --model textcnn --data " + (data_dir() / "reviews.jsonl").string() +
                       " --embeddings /nonexistent/emb.txt --out /tmp/fisher_probe_unused.ckpt"),
            2);
  EXPECT_NE(run_binary("serve --checkpoint /x.ckpt --port 70000"), 0);
}

}  // namespace
}  // namespace fisher_probe::cli
