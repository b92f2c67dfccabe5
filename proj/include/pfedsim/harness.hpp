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

#pragma once

// Experiment runner, report files and the named presets.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "pfedsim/config.hpp"
#include "pfedsim/data.hpp"
#include "pfedsim/federation.hpp"
#include "pfedsim/nn.hpp"
#include "pfedsim/similarity.hpp"

namespace pfedsim::harness {

namespace fs = std::filesystem;

inline std::string FormatReal(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline void WriteFile(const fs::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << content;
  os.close();
  if (!os) throw IoError("write failed: " + path.string());
}

inline std::string ReadFile(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline LabeledDataset BuildDataset(const ExperimentConfig& c, std::uint64_t seed) {
  Rng rng(DeriveSeed(seed, Stream::kData));
  return data::MakeBlobs(c.dataset.classes, c.dataset.per_class, c.dataset.dim,
                         c.dataset.cluster_spread, rng);
}

// Same (config, seed) gives the same partition in every preset.
inline data::PartitionedDataset BuildPartition(const ExperimentConfig& c, std::uint64_t seed,
                                               std::size_t clients) {
  const auto source = BuildDataset(c, seed);
  Rng rng(DeriveSeed(seed, Stream::kPartition, clients));
  if (c.partition.mode == PartitionMode::kShard) {
    return data::ShardPartition(source, c.partition.shards, rng);
  }
  data::DirichletOptions opt;
  opt.min_client_samples = c.partition.min_client_samples;
  return data::DirichletPartition(source, clients, c.partition.alpha, rng, opt);
}

inline data::PartitionedDataset BuildPartition(const ExperimentConfig& c, std::uint64_t seed) {
  const std::size_t n =
      c.partition.mode == PartitionMode::kShard ? c.partition.shards.size() : c.federation.n;
  return BuildPartition(c, seed, n);
}

struct ExperimentReport {
  ExperimentConfig config;
  std::uint64_t seed = 0;
  federation::RunResult run;
  std::vector<std::size_t> train_sizes;
  std::vector<std::size_t> test_sizes;
  std::vector<LabelSpace> labels_present;
  double elapsed_seconds = 0.0;
};

inline ExperimentReport RunOne(const ExperimentConfig& config,
                               const data::PartitionedDataset& data, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentReport report;
  report.config = config;
  report.seed = seed;
  report.run = federation::RunExperiment(config.federation, data, seed);
  for (const auto& c : data.clients) {
    report.train_sizes.push_back(c.train.size());
    report.test_sizes.push_back(c.test.size());
    report.labels_present.push_back(LabelsPresent(c.All()));
  }
  report.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

// metrics.csv, clients.csv, phi.csv and config.json. Wall time is not
// written so reruns are byte-identical.
inline void WriteReport(const ExperimentReport& report, const fs::path& dir) {
  const std::string algo(federation::AlgorithmName(report.run.algorithm));
  std::ostringstream metrics;
  metrics << "round,algo,mean_acc,std_acc,uploaded_params,downloaded_params\n";
  for (const auto& r : report.run.rounds) {
    metrics << r.round << ',' << algo << ',' << FormatReal(r.mean_accuracy) << ','
            << FormatReal(r.std_accuracy) << ',' << r.uploaded << ',' << r.downloaded << '\n';
  }
  WriteFile(dir / "metrics.csv", metrics.str());

  std::ostringstream clients;
  clients << "client,final_acc,train_size,test_size,labels_present\n";
  for (std::size_t i = 0; i < report.train_sizes.size(); ++i) {
    clients << i << ',' << FormatReal(report.run.final_accuracy.at(i)) << ','
            << report.train_sizes[i] << ',' << report.test_sizes[i] << ',';
    bool first = true;
    for (int y : report.labels_present[i]) {
      clients << (first ? "" : " ") << y;
      first = false;
    }
    clients << '\n';
  }
  WriteFile(dir / "clients.csv", clients.str());

  std::ostringstream phi;
  similarity::WriteSimilarityCsv(report.run.phi, phi);
  WriteFile(dir / "phi.csv", phi.str());

  ExperimentConfig echo = report.config;
  echo.seeds = {report.seed};
  WriteFile(dir / "config.json", SerializeConfig(echo));
}

// Spearman rank correlation, average ranks for ties. Zero when either side
// is constant.
inline double Spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.empty()) throw UsageError("Spearman: size mismatch");
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    mx += rx[i] / n;
    my += ry[i] / n;
  }
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

inline MeanStd Summarize(const std::vector<double>& v) {
  MeanStd s;
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(var / static_cast<double>(v.size()));
  return s;
}

// ---------------------------------------------------------------------------
// Layer-wise CKA between independently trained models.

struct CkaLayersSeed {
  std::uint64_t seed = 0;
  std::vector<Matrix> layers;  // one models x models matrix per layer
  std::vector<double> mean_off_diagonal;
};

inline CkaLayersSeed RunCkaLayers(const ExperimentConfig& c, std::uint64_t seed) {
  ExperimentConfig dc = c;
  dc.partition.mode = PartitionMode::kDirichlet;
  const std::size_t models_n = c.cka_models;
  const auto part = BuildPartition(dc, seed, models_n);
  const auto pooled = BuildDataset(c, seed);

  Rng probe_rng(DeriveSeed(seed, Stream::kProbe));
  const auto probe_idx =
      probe_rng.SampleWithoutReplacement(pooled.size(), std::min(c.probe_size, pooled.size()));
  const auto probe = pooled.Select(probe_idx);

  std::vector<std::size_t> widths{c.dataset.dim};
  widths.insert(widths.end(), c.federation.hidden.begin(), c.federation.hidden.end());
  widths.push_back(part.class_count);

  std::vector<std::vector<Matrix>> acts;  // [model][layer]
  for (std::size_t k = 0; k < models_n; ++k) {
    Rng init(DeriveSeed(seed, Stream::kInit, k + 1));
    Rng shuffle(DeriveSeed(seed, Stream::kShuffle, k, 0));
    auto model = nn::InitModel(widths, init);
    model = nn::LocalTrain(std::move(model), part.clients[k].train, c.measure_epochs,
                           c.federation.batch_size, c.federation.lr, shuffle);
    acts.push_back(nn::Forward(model, probe.features).activations);
  }

  CkaLayersSeed out;
  out.seed = seed;
  const std::size_t layers = acts.front().size();
  for (std::size_t l = 0; l < layers; ++l) {
    Matrix m(models_n, models_n);
    double off = 0.0;
    for (std::size_t a = 0; a < models_n; ++a) {
      m(a, a) = 1.0;
      for (std::size_t b = a + 1; b < models_n; ++b) {
        const double v = similarity::LinearCka(acts[a][l], acts[b][l]);
        m(a, b) = m(b, a) = v;
        off += 2.0 * v;
      }
    }
    out.layers.push_back(std::move(m));
    out.mean_off_diagonal.push_back(off / static_cast<double>(models_n * (models_n - 1)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Label-shard measurement: models from one shared init, trained per shard.

struct ShardPair {
  std::size_t a, b;
  const char* name;
};

// Pairs (i, i'), (i, j), (j, k), (i, k) of the default four-shard layout,
// in decreasing data similarity.
inline const std::vector<ShardPair>& NamedShardPairs() {
  static const std::vector<ShardPair> pairs = {
      {0, 1, "i-i'"}, {0, 2, "i-j"}, {2, 3, "j-k"}, {0, 3, "i-k"}};
  return pairs;
}

struct ShardStudy {
  std::uint64_t seed = 0;
  std::size_t shards = 0;
  Matrix data_similarity;
  Matrix classifier_similarity;  // mean boundary cosine
  Matrix mdb;
  Matrix ldb;  // symmetrized: mean of both directions
  // boundary[a][b][c]: cosine of class-c boundaries of shards a and b.
  std::vector<std::vector<std::vector<double>>> boundary;
};

inline ShardStudy RunShardStudy(const ExperimentConfig& c, std::uint64_t seed) {
  ExperimentConfig sc = c;
  sc.partition.mode = PartitionMode::kShard;
  const auto part = BuildPartition(sc, seed);
  const std::size_t s = part.clients.size();

  std::vector<std::size_t> widths{c.dataset.dim};
  widths.insert(widths.end(), c.federation.hidden.begin(), c.federation.hidden.end());
  widths.push_back(part.class_count);
  Rng init(DeriveSeed(seed, Stream::kInit));
  const auto initial = nn::InitModel(widths, init);
  const auto initial_flat = nn::Flatten(initial);

  std::vector<nn::Model> models;
  std::vector<std::vector<double>> deltas;
  for (std::size_t k = 0; k < s; ++k) {
    Rng shuffle(DeriveSeed(seed, Stream::kShuffle, k, 0));
    models.push_back(nn::LocalTrain(initial, part.clients[k].train, c.measure_epochs,
                                    c.federation.batch_size, c.federation.lr, shuffle));
    auto d = nn::Flatten(models.back());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] -= initial_flat[i];
    deltas.push_back(std::move(d));
  }

  ShardStudy out;
  out.seed = seed;
  out.shards = s;
  out.data_similarity = Matrix(s, s);
  out.classifier_similarity = Matrix(s, s);
  out.mdb = Matrix(s, s);
  out.ldb = Matrix(s, s);
  out.boundary.assign(s, std::vector<std::vector<double>>(s));
  const similarity::BoundaryOptions opt{c.federation.include_bias, c.federation.epsilon};
  for (std::size_t a = 0; a < s; ++a) {
    for (std::size_t b = 0; b < s; ++b) {
      out.data_similarity(a, b) =
          data::DataSimilarity(part.clients[a].All(), part.clients[b].All());
      out.boundary[a][b] =
          similarity::BoundarySimilarities(models[a].classifier(), models[b].classifier(), opt);
      out.classifier_similarity(a, b) =
          similarity::ClassifierSimilarityPlain(models[a].classifier(), models[b].classifier(), opt);
      out.mdb(a, b) = similarity::MdbSimilarity(deltas[a], deltas[b]);
    }
  }
  for (std::size_t a = 0; a < s; ++a) {
    for (std::size_t b = 0; b < s; ++b) {
      const double ab = similarity::LdbSimilarity(models[a], models[b], part.clients[a].test);
      const double ba = similarity::LdbSimilarity(models[b], models[a], part.clients[b].test);
      out.ldb(a, b) = 0.5 * (ab + ba);
    }
  }
  return out;
}

inline std::vector<double> PairValues(const Matrix& m) {
  std::vector<double> v;
  for (const auto& p : NamedShardPairs()) v.push_back(m(p.a, p.b));
  return v;
}

inline bool StrictlyDecreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i - 1] > v[i])) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Presets. Each writes its files under `out` and returns what it measured.

inline const std::vector<std::string>& PresetNames() {
  static const std::vector<std::string> names = {"cka-layers", "shard-similarity",
                                                  "metric-compare", "main-table",
                                                  "rho-sweep", "comm-audit"};
  return names;
}

struct CkaLayersSummary {
  std::vector<CkaLayersSeed> seeds;
};

inline CkaLayersSummary CkaLayersPreset(const ExperimentConfig& c, const fs::path& out) {
  CkaLayersSummary summary;
  std::ostringstream table;
  table << "seed,layer,mean_offdiag_cka\n";
  for (auto seed : c.seeds) {
    auto r = RunCkaLayers(c, seed);
    for (std::size_t l = 0; l < r.layers.size(); ++l) {
      std::ostringstream m;
      similarity::WriteMatrixCsv(r.layers[l], m, "model");
      WriteFile(out / ("seed_" + std::to_string(seed)) / ("cka_layer_" + std::to_string(l) + ".csv"),
                m.str());
      table << seed << ',' << l << ',' << FormatReal(r.mean_off_diagonal[l]) << '\n';
    }
    summary.seeds.push_back(std::move(r));
  }
  WriteFile(out / "cka_summary.csv", table.str());
  return summary;
}

inline void RequireFourShards(const ExperimentConfig& c, const char* preset) {
  if (c.partition.shards.size() != 4) {
    throw ConfigError(std::string(preset) + " needs exactly 4 shards (i, i', j, k)");
  }
}

struct ShardSimilaritySummary {
  std::vector<ShardStudy> seeds;
  std::vector<bool> strict_order;  // per seed
};

inline ShardSimilaritySummary ShardSimilarityPreset(const ExperimentConfig& c,
                                                    const fs::path& out) {
  RequireFourShards(c, "shard-similarity");
  ShardSimilaritySummary summary;
  std::ostringstream table;
  table << "seed";
  for (const auto& p : NamedShardPairs()) table << ",cs_" << p.name;
  table << ",strict_order\n";
  for (auto seed : c.seeds) {
    auto study = RunShardStudy(c, seed);
    const fs::path dir = out / ("seed_" + std::to_string(seed));
    std::ostringstream cs;
    similarity::WriteMatrixCsv(study.classifier_similarity, cs, "shard");
    WriteFile(dir / "classifier_similarity.csv", cs.str());
    std::ostringstream bd;
    bd << "shard_a,shard_b,class,cosine\n";
    for (std::size_t a = 0; a < study.shards; ++a)
      for (std::size_t b = a + 1; b < study.shards; ++b)
        for (std::size_t k = 0; k < study.boundary[a][b].size(); ++k)
          bd << a << ',' << b << ',' << k << ',' << FormatReal(study.boundary[a][b][k]) << '\n';
    WriteFile(dir / "boundary_similarity.csv", bd.str());

    const auto pairs = PairValues(study.classifier_similarity);
    const bool ordered = StrictlyDecreasing(pairs);
    table << seed;
    for (double v : pairs) table << ',' << FormatReal(v);
    table << ',' << (ordered ? 1 : 0) << '\n';
    summary.strict_order.push_back(ordered);
    summary.seeds.push_back(std::move(study));
  }
  WriteFile(out / "shard_similarity.csv", table.str());
  return summary;
}

struct MetricRow {
  std::string metric;
  std::vector<double> pairs;  // seed-averaged, NamedShardPairs order
  double spearman = 0.0;      // against data similarity
};

struct MetricCompareSummary {
  std::vector<MetricRow> rows;  // data, mdb, ldb, cs

  const MetricRow& row(const std::string& name) const {
    for (const auto& r : rows) {
      if (r.metric == name) return r;
    }
    throw UsageError("no metric row " + name);
  }
};

inline MetricCompareSummary MetricComparePreset(const ExperimentConfig& c, const fs::path& out) {
  RequireFourShards(c, "metric-compare");
  const std::vector<std::string> names = {"data", "mdb", "ldb", "cs"};
  std::map<std::string, std::vector<double>> sums;
  for (const auto& n : names) sums[n].assign(NamedShardPairs().size(), 0.0);

  std::ostringstream per_seed;
  per_seed << "seed,metric";
  for (const auto& p : NamedShardPairs()) per_seed << ',' << p.name;
  per_seed << ",spearman_vs_data\n";
  const double inv = 1.0 / static_cast<double>(c.seeds.size());
  for (auto seed : c.seeds) {
    const auto study = RunShardStudy(c, seed);
    const std::map<std::string, std::vector<double>> values = {
        {"data", PairValues(study.data_similarity)},
        {"mdb", PairValues(study.mdb)},
        {"ldb", PairValues(study.ldb)},
        {"cs", PairValues(study.classifier_similarity)}};
    for (const auto& n : names) {
      const auto& v = values.at(n);
      per_seed << seed << ',' << n;
      for (std::size_t k = 0; k < v.size(); ++k) {
        per_seed << ',' << FormatReal(v[k]);
        sums[n][k] += v[k] * inv;
      }
      per_seed << ',' << FormatReal(Spearman(v, values.at("data"))) << '\n';
    }
  }
  WriteFile(out / "metric_compare_per_seed.csv", per_seed.str());

  MetricCompareSummary summary;
  std::ostringstream table;
  table << "metric";
  for (const auto& p : NamedShardPairs()) table << ',' << p.name;
  table << ",spearman_vs_data\n";
  for (const auto& n : names) {
    MetricRow row{n, sums[n], Spearman(sums[n], sums["data"])};
    table << n;
    for (double v : row.pairs) table << ',' << FormatReal(v);
    table << ',' << FormatReal(row.spearman) << '\n';
    summary.rows.push_back(std::move(row));
  }
  WriteFile(out / "metric_compare.csv", table.str());
  return summary;
}

struct AccuracyTable {
  // label -> final mean client accuracy per seed (seed order of the config)
  std::map<std::string, std::vector<double>> final_accuracy;

  MeanStd summary(const std::string& label) const { return Summarize(final_accuracy.at(label)); }
};

inline std::string SummaryCsv(const AccuracyTable& t, const std::string& label_header,
                              const std::vector<std::string>& order) {
  std::ostringstream os;
  os << label_header << ",mean_acc,std_acc,seeds,table\n";
  char cell[64];
  for (const auto& label : order) {
    const auto s = t.summary(label);
    std::snprintf(cell, sizeof cell, "%.2f(%.2f)", 100.0 * s.mean, 100.0 * s.std);
    os << label << ',' << FormatReal(s.mean) << ',' << FormatReal(s.std) << ','
       << t.final_accuracy.at(label).size() << ',' << cell << '\n';
  }
  return os.str();
}

inline AccuracyTable MainTablePreset(const ExperimentConfig& c, const fs::path& out) {
  AccuracyTable table;
  const std::vector<federation::Algorithm> algos = {
      federation::Algorithm::kLocalOnly, federation::Algorithm::kFedAvg,
      federation::Algorithm::kFedPer, federation::Algorithm::kPFedSim};
  std::vector<std::string> order;
  for (auto a : algos) order.emplace_back(federation::AlgorithmName(a));
  ExperimentConfig dc = c;
  dc.partition.mode = PartitionMode::kDirichlet;
  for (auto seed : c.seeds) {
    const auto part = BuildPartition(dc, seed);
    for (auto a : algos) {
      ExperimentConfig run = dc;
      run.federation.algorithm = a;
      const auto report = RunOne(run, part, seed);
      const std::string name(federation::AlgorithmName(a));
      WriteReport(report, out / name / ("seed_" + std::to_string(seed)));
      table.final_accuracy[name].push_back(report.run.rounds.back().mean_accuracy);
    }
  }
  WriteFile(out / "summary.csv", SummaryCsv(table, "algo", order));
  return table;
}

inline const std::vector<double>& SweepRhos() {
  static const std::vector<double> rhos = {0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0};
  return rhos;
}

inline std::string RhoLabel(double rho) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.1f", rho);
  return buf;
}

inline AccuracyTable RhoSweepPreset(const ExperimentConfig& c, const fs::path& out) {
  AccuracyTable table;
  std::vector<std::string> order;
  for (double rho : SweepRhos()) order.push_back(RhoLabel(rho));
  ExperimentConfig dc = c;
  dc.partition.mode = PartitionMode::kDirichlet;
  dc.federation.algorithm = federation::Algorithm::kPFedSim;
  for (auto seed : c.seeds) {
    const auto part = BuildPartition(dc, seed);
    for (double rho : SweepRhos()) {
      ExperimentConfig run = dc;
      run.federation.rho = rho;
      const auto report = RunOne(run, part, seed);
      WriteReport(report, out / ("rho_" + RhoLabel(rho)) / ("seed_" + std::to_string(seed)));
      table.final_accuracy[RhoLabel(rho)].push_back(report.run.rounds.back().mean_accuracy);
    }
  }
  WriteFile(out / "summary.csv", SummaryCsv(table, "rho", order));
  return table;
}

struct CommAuditRow {
  std::string algo;
  std::size_t round = 0;
  std::size_t participants = 0;
  std::size_t uploaded = 0;
  std::size_t downloaded = 0;
};

struct CommAuditSummary {
  std::size_t model_params = 0;
  std::size_t extractor_params = 0;
  std::vector<CommAuditRow> rows;
};

// Per-round parameter traffic of every algorithm on the first seed.
inline CommAuditSummary CommAuditPreset(const ExperimentConfig& c, const fs::path& out) {
  CommAuditSummary summary;
  ExperimentConfig dc = c;
  dc.partition.mode = PartitionMode::kDirichlet;
  const auto seed = c.seeds.front();
  const auto part = BuildPartition(dc, seed);
  std::ostringstream os;
  os << "algo,round,participants,uploaded_params,downloaded_params,uploaded_per_participant,"
        "model_params,extractor_params\n";
  for (auto a : {federation::Algorithm::kFedAvg, federation::Algorithm::kPFedSim,
                 federation::Algorithm::kFedPer, federation::Algorithm::kLocalOnly}) {
    ExperimentConfig run = dc;
    run.federation.algorithm = a;
    const auto result = federation::RunExperiment(run.federation, part, seed);
    summary.model_params = result.param_count;
    summary.extractor_params = result.extractor_param_count;
    const std::string name(federation::AlgorithmName(a));
    for (const auto& r : result.rounds) {
      // Local-only "participants" never talk to the server.
      const std::size_t m = a == federation::Algorithm::kLocalOnly ? 0 : r.participants.size();
      summary.rows.push_back({name, r.round, m, r.uploaded, r.downloaded});
      os << name << ',' << r.round << ',' << m << ',' << r.uploaded << ',' << r.downloaded << ','
         << (m == 0 ? 0 : r.uploaded / m) << ',' << result.param_count << ','
         << result.extractor_param_count << '\n';
    }
  }
  WriteFile(out / "comm.csv", os.str());
  return summary;
}

inline void WritePresetConfig(const std::string& name, ExperimentConfig c, const fs::path& out) {
  c.preset = name;
  WriteFile(out / "config.json", SerializeConfig(c));
}

// Runs a preset by name and echoes the effective config next to its output.
inline void RunPreset(const std::string& name, const ExperimentConfig& c, const fs::path& out) {
  if (name == "cka-layers") {
    CkaLayersPreset(c, out);
  } else if (name == "shard-similarity") {
    ShardSimilarityPreset(c, out);
  } else if (name == "metric-compare") {
    MetricComparePreset(c, out);
  } else if (name == "main-table") {
    MainTablePreset(c, out);
  } else if (name == "rho-sweep") {
    RhoSweepPreset(c, out);
  } else if (name == "comm-audit") {
    CommAuditPreset(c, out);
  } else {
    std::string known;
    for (const auto& n : PresetNames()) known += (known.empty() ? "" : ", ") + n;
    throw UsageError("unknown preset '" + name + "' (known: " + known + ")");
  }
  WritePresetConfig(name, c, out);
}

}  // namespace pfedsim::harness
