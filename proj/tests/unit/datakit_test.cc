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

#include <cmath>
#include <fstream>

#include <gtest/gtest.h>

#include "fisher_probe/datakit.hpp"
#include "fisher_probe/error.hpp"
#include "oracles.hpp"

namespace fisher_probe::datakit {
namespace {

using testing::data_dir;

using Tokens = std::vector<std::string>;

void write(const std::filesystem::path& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

TEST(TokenizeTest, LowercasesAndSplitsPunctuation) {
  EXPECT_EQ(tokenize("The BEST movie, ever!"), (Tokens{"the", "best", "movie", ",", "ever", "!"}));
  EXPECT_EQ(tokenize("don't"), (Tokens{"don", "'", "t"}));
}

TEST(TokenizeTest, StripsHtmlBreaks) {
  EXPECT_EQ(tokenize("good<br />bad<br/>ok<BR>fine"), (Tokens{"good", "bad", "ok", "fine"}));
  EXPECT_EQ(tokenize("a <b> c"), (Tokens{"a", "<", "b", ">", "c"}));
}

TEST(TokenizeTest, EmptyAndWhitespace) {
  EXPECT_TRUE(tokenize("").empty());
  EXPECT_TRUE(tokenize(" \t\n").empty());
  EXPECT_TRUE(tokenize("<br /><br />").empty());
}

TEST(TokenizeTest, NonAsciiBytesStayInWords) {
  EXPECT_EQ(tokenize("caf\xc3\xa9 ok"), (Tokens{"caf\xc3\xa9", "ok"}));
}

TEST(TokenizeTest, JoinIsSpaceSeparated) {
  const Tokens t{"a", "b", "!"};
  EXPECT_EQ(join_tokens(t), "a b !");
  EXPECT_EQ(tokenize(join_tokens(t)), t);
}

TEST(LabelMapTest, ParseAndLookup) {
  const LabelMap m = LabelMap::parse("neg, pos");
  EXPECT_EQ(m.size(), 2u);
  EXPECT_EQ(m.id("pos"), 1u);
  EXPECT_EQ(m.id("0"), 0u);
  EXPECT_EQ(m.name(1), "pos");
}

TEST(LabelMapTest, UnknownLabelListsValidOnes) {
  const LabelMap m = LabelMap::parse("neg,pos");
  try {
    m.id("positive");
    FAIL() << "expected InvalidArgument";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("neg, pos"), std::string::npos) << e.what();
  }
  EXPECT_THROW(m.id("2"), InvalidArgument);
}

TEST(LabelMapTest, RejectsDegenerateMaps) {
  EXPECT_THROW(LabelMap::parse("only"), InvalidArgument);
  EXPECT_THROW(LabelMap::parse("a,a"), InvalidArgument);
  EXPECT_THROW(LabelMap::parse("a,,b"), InvalidArgument);
}

TEST(LoadersTest, EmbeddingFile) {
  const auto table = load_embeddings(data_dir() / "embeddings.txt");
  EXPECT_EQ(table.dim, 4u);
  EXPECT_EQ(table.tokens.size(), 18u);
  EXPECT_EQ(table.rows(), 20u);
  EXPECT_EQ(table.matrix.at(table.lookup("the"), 0), -0.3523);
}

TEST(LoadersTest, EmbeddingErrorsNameFileAndLine) {
  const auto dir = testing::scratch_dir("emb_errors");
  write(dir / "ragged.txt", "a 1 2\nb 3\n");
  try {
    load_embeddings(dir / "ragged.txt");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("ragged.txt:2"), std::string::npos) << e.what();
  }
  write(dir / "nan.txt", "a 1 x\n");
  EXPECT_THROW(load_embeddings(dir / "nan.txt"), ParseError);
  write(dir / "empty.txt", "");
  EXPECT_THROW(load_embeddings(dir / "empty.txt"), ParseError);
  EXPECT_THROW(load_embeddings(dir / "missing.txt"), IoError);
}

TEST(LoadersTest, JsonlAndTsvAgree) {
  const LabelMap labels = LabelMap::parse("neg,pos");
  const auto jsonl = load_dataset(data_dir() / "reviews.jsonl", DatasetFormat::kJsonl, labels);
  const auto tsv = load_dataset(data_dir() / "reviews.tsv", DatasetFormat::kTsv, labels);
  ASSERT_EQ(jsonl.size(), 10u);
  ASSERT_EQ(tsv.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(jsonl[i].text, tsv[i].text);
    EXPECT_EQ(jsonl[i].label, tsv[i].label);
  }
  EXPECT_EQ(jsonl[0].id, "r0");
  EXPECT_EQ(tsv[3].id, "3");
  EXPECT_EQ(jsonl[1].label, 0u);
}

TEST(LoadersTest, PointRecords) {
  const auto pts = load_dataset(data_dir() / "points.jsonl", DatasetFormat::kJsonl, LabelMap({"0", "1"}));
  ASSERT_EQ(pts.size(), 40u);
  ASSERT_TRUE(pts[0].is_point());
  EXPECT_EQ((*pts[0].point)[0], -3.2241);
  EXPECT_EQ(pts[1].label, 1u);
}

TEST(LoadersTest, MalformedRecords) {
  const auto dir = testing::scratch_dir("bad_records");
  const LabelMap labels = LabelMap::parse("neg,pos");
  write(dir / "a.jsonl", "{\"text\": \"x\", \"label\": \"pos\"}\n{\"text\": \"y\"}\n");
  try {
    load_dataset(dir / "a.jsonl", DatasetFormat::kJsonl, labels);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("a.jsonl:2"), std::string::npos) << e.what();
  }
  write(dir / "b.jsonl", "{\"id\": 1, \"text\": \"x\", \"label\": 0}\n{\"id\": \"1\", \"text\": \"y\", \"label\": 1}\n");
  EXPECT_THROW(load_dataset(dir / "b.jsonl", DatasetFormat::kJsonl, labels), ParseError);
  write(dir / "c.tsv", "pos no tab here\n");
  EXPECT_THROW(load_dataset(dir / "c.tsv", DatasetFormat::kTsv, labels), ParseError);
  write(dir / "d.jsonl", "{\"text\": \"x\", \"label\": \"meh\"}\n");
  EXPECT_THROW(load_dataset(dir / "d.jsonl", DatasetFormat::kJsonl, labels), ParseError);
  write(dir / "e.jsonl", "[1, 2]\n");
  EXPECT_THROW(load_dataset(dir / "e.jsonl", DatasetFormat::kJsonl, labels), ParseError);
  write(dir / "f.jsonl", "{\"point\": [1, 2, 3], \"label\": 0}\n");
  EXPECT_THROW(load_dataset(dir / "f.jsonl", DatasetFormat::kJsonl, labels), ParseError);
  EXPECT_THROW(load_dataset(dir / "none.jsonl", DatasetFormat::kJsonl, labels), IoError);
  EXPECT_THROW(parse_format("csv"), InvalidArgument);
}

TEST(LoadersTest, BlankLinesAndCrlfAreTolerated) {
  const auto dir = testing::scratch_dir("crlf");
  write(dir / "a.tsv", "pos\tgood\r\n\r\nneg\tbad\r\n");
  const auto ex = load_dataset(dir / "a.tsv", DatasetFormat::kTsv, LabelMap::parse("neg,pos"));
  ASSERT_EQ(ex.size(), 2u);
  EXPECT_EQ(ex[0].text, "good");
  EXPECT_EQ(ex[1].label, 0u);
}

TEST(LoadersTest, Pairs) {
  const auto pairs = load_pairs(data_dir() / "pairs_toy.jsonl", LabelMap::parse("neg,pos"));
  ASSERT_EQ(pairs.size(), 2u);
  EXPECT_EQ(pairs[0].id, "a");
  EXPECT_EQ(pairs[0].perturbed_text, "the worst movie");
  EXPECT_EQ(pairs[0].original_label, 1u);
  EXPECT_EQ(pairs[0].perturbed_label, 0u);
}

TEST(MixtureTest, CholeskyReconstructs) {
  const std::vector<double> a{4.0, 2.0, 2.0, 3.0};
  const auto l = cholesky(a, 2);
  EXPECT_DOUBLE_EQ(l[0], 2.0);
  EXPECT_DOUBLE_EQ(l[1], 0.0);
  EXPECT_DOUBLE_EQ(l[2], 1.0);
  EXPECT_DOUBLE_EQ(l[3], std::sqrt(2.0));
  EXPECT_THROW(cholesky(std::vector<double>{1.0, 2.0, 2.0, 1.0}, 2), InvalidArgument);
  EXPECT_THROW(cholesky(std::vector<double>{1.0, 0.5, 0.0, 1.0}, 2), InvalidArgument);
}

TEST(MixtureTest, SampleMomentsMatchSpec) {
  GaussianMixtureSpec spec;
  spec.n_per_class = 20000;
  spec.seed = 4;
  const auto ex = sample_mixture(spec);
  ASSERT_EQ(ex.size(), 40000u);
  EXPECT_EQ(ex[0].id, "g0-0");
  EXPECT_EQ(ex[20000].id, "g1-0");
  double m[2][2] = {};
  double cov12 = 0.0;
  double var1 = 0.0;
  for (const auto& e : ex) {
    m[e.label][0] += (*e.point)[0];
    m[e.label][1] += (*e.point)[1];
  }
  for (auto& row : m) {
    row[0] /= 20000;
    row[1] /= 20000;
  }
  for (std::size_t i = 20000; i < 40000; ++i) {
    const auto& p = *ex[i].point;
    cov12 += (p[0] - m[1][0]) * (p[1] - m[1][1]);
    var1 += (p[0] - m[1][0]) * (p[0] - m[1][0]);
  }
  EXPECT_NEAR(m[0][0], -2.0, 0.03);
  EXPECT_NEAR(m[0][1], -2.0, 0.03);
  EXPECT_NEAR(m[1][0], 3.5, 0.04);
  EXPECT_NEAR(m[1][1], 3.5, 0.04);
  EXPECT_NEAR(var1 / 20000, 2.0, 0.06);
  EXPECT_NEAR(cov12 / 20000, 1.0, 0.05);
}

TEST(MixtureTest, SeededAndDistinct) {
  GaussianMixtureSpec a;
  a.n_per_class = 50;
  a.seed = 1;
  GaussianMixtureSpec b = a;
  b.seed = 2;
  EXPECT_EQ(sample_mixture(a), sample_mixture(a));
  EXPECT_NE(sample_mixture(a), sample_mixture(b));
}

TEST(EncodingTest, TextIsPaddedAndMasked) {
  rng::Stream s(1);
  const auto table = testing::random_embeddings(s, {"good", "bad"}, 3);
  Classifier c{testing::random_textcnn(s, 3, {2, 4}, 2, 2), table};
  const EncodedInput in = c.encode({"x", "good zzz", std::nullopt, 0});
  EXPECT_EQ(in.tokens, (Tokens{"good", "zzz"}));
  EXPECT_EQ(in.n_tokens, 2u);
  EXPECT_EQ(in.x.shape(), (Tensor::Shape{4, 3}));
  EXPECT_EQ(in.mask, (std::vector<std::uint8_t>{1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0}));
  EXPECT_EQ(in.x.at(1, 0), table->matrix.at(table->unk_row, 0));
  EXPECT_EQ(in.x.at(3, 2), 0.0);
}

TEST(EncodingTest, TruncatesToMaxTokens) {
  rng::Stream s(2);
  const auto table = testing::random_embeddings(s, {"a"}, 2);
  auto model = testing::random_textcnn(s, 2, {1}, 2, 2);
  model.spec.max_tokens = 3;
  Classifier c{model, table};
  const EncodedInput in = c.encode({"x", "a a a a a", std::nullopt, 0});
  EXPECT_EQ(in.n_tokens, 3u);
  EXPECT_EQ(in.x.dim(0), 3u);
}

TEST(EncodingTest, Errors) {
  rng::Stream s(3);
  const auto table = testing::random_embeddings(s, {"a"}, 2);
  Classifier text{testing::random_textcnn(s, 2, {1}, 2, 2), table};
  EXPECT_THROW(text.encode({"x", " <br /> ", std::nullopt, 0}), EmptyInputError);
  EXPECT_THROW(text.encode({"x", "", Point2{0.0, 0.0}, 0}), InvalidArgument);
  Classifier mlp{models::build_model(models::default_mlp_spec(), 0), nullptr};
  EXPECT_THROW(mlp.encode({"x", "a", std::nullopt, 0}), InvalidArgument);
  const EncodedInput p = mlp.encode({"x", "", Point2{1.5, -2.0}, 0});
  EXPECT_EQ(p.x, Tensor::vector({1.5, -2.0}));
  Classifier wrong_dim{testing::random_textcnn(s, 3, {1}, 2, 2), table};
  EXPECT_THROW(wrong_dim.encode({"x", "a", std::nullopt, 0}), ShapeError);
}

}  // namespace
}  // namespace fisher_probe::datakit
