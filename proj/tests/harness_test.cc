// Copyright 2026 The pfedsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pfedsim/harness.hpp"

#include <unistd.h>

#include <sstream>

#include "gtest/gtest.h"

namespace pfedsim::harness {
namespace {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("pfedsim_harness_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

ExperimentConfig Tiny() {
  ExperimentConfig c;
  c.dataset = {4, 60, 6, 1.0};
  c.federation.n = 5;
  c.federation.rounds = 6;
  c.federation.local_epochs = 1;
  c.federation.join_ratio = 0.4;
  c.federation.hidden = {8, 6};
  c.partition.alpha = 0.5;
  c.partition.shards = {{0, 1}, {0, 1}, {1, 2}, {2, 3}};
  c.seeds = {1, 2};
  c.measure_epochs = 3;
  c.probe_size = 32;
  c.cka_models = 3;
  return c;
}

std::vector<std::vector<std::string>> ReadCsv(const fs::path& p) {
  std::istringstream in(ReadFile(p));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

std::map<std::string, std::string> Snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = ReadFile(e.path());
  }
  return files;
}

TEST(ParseConfigTest, EmptyGivesDefaults) {
  EXPECT_EQ(ParseConfig(""), ExperimentConfig{});
  EXPECT_EQ(ParseConfig("  \n"), ExperimentConfig{});
  EXPECT_EQ(ParseConfig("{}"), ExperimentConfig{});
  const auto c = ParseConfig("{}");
  EXPECT_EQ(c.federation.n, 20u);
  EXPECT_EQ(c.federation.rounds, 60u);
  EXPECT_DOUBLE_EQ(c.federation.rho, 0.5);
  EXPECT_DOUBLE_EQ(c.partition.alpha, 0.1);
}

TEST(ParseConfigTest, ReadsKeys) {
  const auto c = ParseConfig(R"({"n": 8, "rho": 0.25, "algorithm": "fedper",
      "hidden": [16], "partition": "shard", "shards": [[0,1],[2]], "seeds": [7]})");
  EXPECT_EQ(c.federation.n, 8u);
  EXPECT_DOUBLE_EQ(c.federation.rho, 0.25);
  EXPECT_EQ(c.federation.algorithm, federation::Algorithm::kFedPer);
  EXPECT_EQ(c.federation.hidden, std::vector<std::size_t>{16});
  EXPECT_EQ(c.partition.mode, PartitionMode::kShard);
  EXPECT_EQ(c.partition.shards.size(), 2u);
  EXPECT_EQ(c.seeds, std::vector<std::uint64_t>{7});
}

TEST(ParseConfigTest, RejectsOutOfRangeNamingKey) {
  try {
    ParseConfig(R"({"rho": 1.5})");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("rho"), std::string::npos);
    EXPECT_EQ(e.category(), "config");
  }
  EXPECT_THROW(ParseConfig(R"({"join_ratio": 0})"), ConfigError);
  EXPECT_THROW(ParseConfig(R"({"n": -3})"), ConfigError);
  EXPECT_THROW(ParseConfig(R"({"alpha": 0})"), ConfigError);
  EXPECT_THROW(ParseConfig(R"({"epsilon": 0})"), ConfigError);
}

TEST(ParseConfigTest, RejectsUnknownKeysAndSyntax) {
  EXPECT_THROW(ParseConfig(R"({"rhoo": 0.5})"), ConfigError);
  EXPECT_THROW(ParseConfig(R"({"rho": 0.5)"), ConfigError);
  EXPECT_THROW(ParseConfig(R"([1, 2])"), ConfigError);
  EXPECT_THROW(ParseConfig(R"({"algorithm": "sgd"})"), ConfigError);
}

TEST(ParseConfigTest, SerializeRoundTrip) {
  auto c = Tiny();
  c.federation.algorithm = federation::Algorithm::kLocalOnly;
  c.partition.min_client_samples = 3;
  c.preset = "main-table";
  EXPECT_EQ(ParseConfig(SerializeConfig(c)), c);
  EXPECT_EQ(ParseConfig(SerializeConfig(ExperimentConfig{})), ExperimentConfig{});
}

TEST(WriteReportTest, FilesHaveExpectedShape) {
  TempDir tmp;
  const auto c = Tiny();
  const auto part = BuildPartition(c, 1);
  WriteReport(RunOne(c, part, 1), tmp.path());
  const auto metrics = ReadCsv(tmp.path() / "metrics.csv");
  ASSERT_EQ(metrics.size(), c.federation.rounds + 1);
  EXPECT_EQ(metrics[0], (std::vector<std::string>{"round", "algo", "mean_acc", "std_acc",
                                                  "uploaded_params", "downloaded_params"}));
  EXPECT_EQ(metrics[1][1], "pfedsim");

  const auto clients = ReadCsv(tmp.path() / "clients.csv");
  ASSERT_EQ(clients.size(), c.federation.n + 1);
  for (std::size_t i = 1; i < clients.size(); ++i) ASSERT_EQ(clients[i].size(), 5u);

  const auto phi = ReadCsv(tmp.path() / "phi.csv");
  ASSERT_EQ(phi.size(), c.federation.n + 1);
  for (std::size_t i = 1; i <= c.federation.n; ++i) {
    EXPECT_EQ(std::stod(phi[i][i]), 1.0);
    for (std::size_t j = 1; j <= c.federation.n; ++j) EXPECT_EQ(phi[i][j], phi[j][i]);
  }
  const auto echo = ParseConfig(ReadFile(tmp.path() / "config.json"));
  EXPECT_EQ(echo.seeds, std::vector<std::uint64_t>{1});
}

TEST(WriteReportTest, RerunIsByteIdentical) {
  TempDir a, b;
  const auto c = Tiny();
  WriteReport(RunOne(c, BuildPartition(c, 3), 3), a.path());
  WriteReport(RunOne(c, BuildPartition(c, 3), 3), b.path());
  EXPECT_EQ(Snapshot(a.path()), Snapshot(b.path()));
}

TEST(WriteFileTest, UnwritablePathIsIoError) {
  TempDir tmp;
  WriteFile(tmp.path() / "f", "x");
  EXPECT_THROW(WriteFile(tmp.path() / "f" / "g", "y"), IoError);
  EXPECT_THROW(ReadFile(tmp.path() / "missing"), IoError);
}

TEST(SpearmanTest, KnownValues) {
  EXPECT_DOUBLE_EQ(Spearman({1, 2, 3, 4}, {10, 20, 30, 40}), 1.0);
  EXPECT_DOUBLE_EQ(Spearman({1, 2, 3, 4}, {4, 3, 2, 1}), -1.0);
  EXPECT_DOUBLE_EQ(Spearman({1, 2, 3, 4}, {1, 1, 1, 1}), 0.0);
  // Ranks (1, 2.5, 2.5, 4) vs (1, 2, 3, 4).
  EXPECT_NEAR(Spearman({1, 2, 2, 3}, {1, 2, 3, 4}), 0.9486832980505138, 1e-12);
  EXPECT_THROW(Spearman({1}, {1, 2}), UsageError);
}

TEST(SummarizeTest, PopulationStd) {
  const auto s = Summarize({1.0, 3.0});
  EXPECT_DOUBLE_EQ(s.mean, 2.0);
  EXPECT_DOUBLE_EQ(s.std, 1.0);
}

TEST(BuildPartitionTest, SharedSeedSharesPartition) {
  const auto c = Tiny();
  const auto a = BuildPartition(c, 4);
  const auto b = BuildPartition(c, 4);
  ASSERT_EQ(a.clients.size(), b.clients.size());
  for (std::size_t i = 0; i < a.clients.size(); ++i) {
    EXPECT_EQ(a.clients[i].train.labels, b.clients[i].train.labels);
    EXPECT_EQ(a.clients[i].train.features, b.clients[i].train.features);
  }
  const auto other = BuildPartition(c, 5);
  EXPECT_NE(a.clients[0].train.features, other.clients[0].train.features);
}

TEST(PresetTest, CkaLayersWritesOneMatrixPerLayer) {
  TempDir tmp;
  const auto c = Tiny();
  RunPreset("cka-layers", c, tmp.path());
  const std::size_t layers = c.federation.hidden.size() + 1;
  for (auto seed : c.seeds) {
    for (std::size_t l = 0; l < layers; ++l) {
      const auto m = ReadCsv(tmp.path() / ("seed_" + std::to_string(seed)) /
                             ("cka_layer_" + std::to_string(l) + ".csv"));
      ASSERT_EQ(m.size(), c.cka_models + 1);
      for (std::size_t i = 1; i <= c.cka_models; ++i) EXPECT_NEAR(std::stod(m[i][i]), 1.0, 1e-9);
    }
  }
  EXPECT_EQ(ReadCsv(tmp.path() / "cka_summary.csv").size(), c.seeds.size() * layers + 1);
  EXPECT_TRUE(fs::exists(tmp.path() / "config.json"));
}

TEST(PresetTest, UnknownPresetIsUsageError) {
  TempDir tmp;
  EXPECT_THROW(RunPreset("nope", Tiny(), tmp.path()), UsageError);
}

TEST(PresetTest, ShardPresetsNeedFourShards) {
  TempDir tmp;
  auto c = Tiny();
  c.partition.shards.pop_back();
  EXPECT_THROW(RunPreset("shard-similarity", c, tmp.path()), ConfigError);
  EXPECT_THROW(RunPreset("metric-compare", c, tmp.path()), ConfigError);
}

TEST(PresetTest, ShardStudyDataSimilarityMatchesLabelOverlap) {
  auto c = Tiny();
  const auto study = RunShardStudy(c, 1);
  c.partition.mode = PartitionMode::kShard;
  const auto part = BuildPartition(c, 1);
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t b = 0; b < 4; ++b)
      EXPECT_DOUBLE_EQ(study.data_similarity(a, b),
                       data::DataSimilarity(part.clients[a].All(), part.clients[b].All()));
  EXPECT_EQ(PairValues(study.classifier_similarity).size(), NamedShardPairs().size());
}

TEST(PresetTest, TablesHaveOneRowPerLabel) {
  TempDir tmp;
  auto c = Tiny();
  c.seeds = {1};
  const auto main = MainTablePreset(c, tmp.path() / "main");
  EXPECT_EQ(main.final_accuracy.size(), 4u);
  EXPECT_EQ(ReadCsv(tmp.path() / "main" / "summary.csv").size(), 5u);
  const auto sweep = RhoSweepPreset(c, tmp.path() / "sweep");
  EXPECT_EQ(sweep.final_accuracy.size(), SweepRhos().size());
  // rho = 1 is FedAvg on the same partition.
  EXPECT_EQ(sweep.final_accuracy.at("1.0"), main.final_accuracy.at("fedavg"));
  EXPECT_EQ(ReadFile(tmp.path() / "sweep" / "rho_1.0" / "seed_1" / "metrics.csv").size() > 0, true);
}

TEST(PresetTest, CommAuditPerParticipantTraffic) {
  TempDir tmp;
  const auto s = CommAuditPreset(Tiny(), tmp.path());
  ASSERT_EQ(s.rows.size(), 4 * Tiny().federation.rounds);
  for (const auto& r : s.rows) {
    if (r.algo == "fedavg" || r.algo == "pfedsim") {
      EXPECT_EQ(r.uploaded, r.participants * s.model_params);
    } else if (r.algo == "fedper") {
      EXPECT_EQ(r.uploaded, r.participants * s.extractor_params);
    } else {
      EXPECT_EQ(r.uploaded, 0u);
    }
  }
}

}  // namespace
}  // namespace pfedsim::harness
