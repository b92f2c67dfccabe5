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

// Experiment configuration: a flat JSON object. Absent keys take defaults,
// unknown keys are rejected.

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "pfedsim/error.hpp"
#include "pfedsim/federation.hpp"

namespace pfedsim::harness {

enum class PartitionMode { kDirichlet, kShard };

struct DatasetConfig {
  std::size_t classes = 10;
  std::size_t per_class = 300;
  std::size_t dim = 20;
  double cluster_spread = 1.4;

  bool operator==(const DatasetConfig&) const = default;
};

struct PartitionConfig {
  PartitionMode mode = PartitionMode::kDirichlet;
  double alpha = 0.1;
  std::vector<std::vector<int>> shards = {
      {0, 1, 2, 3, 4}, {0, 1, 2, 3, 4}, {2, 3, 4, 5, 6}, {5, 6, 7, 8, 9}};
  // Unset: 2 * classes.
  std::optional<std::size_t> min_client_samples;

  bool operator==(const PartitionConfig&) const = default;
};

struct ExperimentConfig {
  federation::FederationConfig federation;
  DatasetConfig dataset;
  PartitionConfig partition;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::string output_dir = "out";
  std::optional<std::string> preset;
  // Measurement presets: independent training epochs, CKA probe batch size
  // and number of CKA models.
  std::size_t measure_epochs = 20;
  std::size_t probe_size = 256;
  std::size_t cka_models = 10;

  bool operator==(const ExperimentConfig& o) const {
    const auto& a = federation;
    const auto& b = o.federation;
    return a.n == b.n && a.join_ratio == b.join_ratio && a.rounds == b.rounds &&
           a.local_epochs == b.local_epochs && a.rho == b.rho && a.lr == b.lr &&
           a.batch_size == b.batch_size && a.epsilon == b.epsilon &&
           a.algorithm == b.algorithm && a.include_bias == b.include_bias &&
           a.hidden == b.hidden && a.threads == b.threads && dataset == o.dataset &&
           partition == o.partition && seeds == o.seeds && output_dir == o.output_dir &&
           preset == o.preset && measure_epochs == o.measure_epochs &&
           probe_size == o.probe_size && cka_models == o.cka_models;
  }
};

inline const std::set<std::string>& KnownKeys() {
  static const std::set<std::string> keys = {
      "n", "join_ratio", "rounds", "local_epochs", "rho", "lr", "batch_size", "epsilon",
      "algorithm", "include_bias", "hidden", "threads", "classes", "per_class", "dim",
      "cluster_spread", "partition", "alpha", "shards", "min_client_samples", "seeds",
      "output_dir", "preset", "measure_epochs", "probe_size", "cka_models"};
  return keys;
}

// Range checks shared by the parser and the CLI overrides.
inline void ValidateConfig(const ExperimentConfig& c) {
  const auto& f = c.federation;
  auto require = [](bool ok, const std::string& key, const std::string& rule) {
    if (!ok) throw ConfigError("'" + key + "' out of range: must be " + rule);
  };
  require(f.n >= 1, "n", ">= 1");
  require(f.join_ratio > 0.0 && f.join_ratio <= 1.0, "join_ratio", "in (0, 1]");
  require(f.rounds >= 1, "rounds", ">= 1");
  require(f.local_epochs >= 1, "local_epochs", ">= 1");
  require(f.rho >= 0.0 && f.rho <= 1.0, "rho", "in [0, 1]");
  require(f.lr >= 0.0 && std::isfinite(f.lr), "lr", "finite and >= 0");
  require(f.batch_size >= 1, "batch_size", ">= 1");
  require(f.epsilon > 0.0, "epsilon", "> 0");
  require(f.threads >= 1, "threads", ">= 1");
  for (auto h : f.hidden) require(h >= 1, "hidden", "a list of widths >= 1");
  require(c.dataset.classes >= 2, "classes", ">= 2");
  require(c.dataset.per_class >= 1, "per_class", ">= 1");
  require(c.dataset.dim >= 1, "dim", ">= 1");
  require(c.dataset.cluster_spread > 0.0, "cluster_spread", "> 0");
  require(c.partition.alpha > 0.0, "alpha", "> 0");
  for (const auto& shard : c.partition.shards) {
    for (int y : shard) {
      require(y >= 0 && static_cast<std::size_t>(y) < c.dataset.classes, "shards",
              "label sets within [0, classes)");
    }
  }
  require(!c.seeds.empty(), "seeds", "a nonempty list");
  require(c.measure_epochs >= 1, "measure_epochs", ">= 1");
  require(c.probe_size >= 1, "probe_size", ">= 1");
  require(c.cka_models >= 2, "cka_models", ">= 2");
}

namespace internal {

template <typename T>
T Get(const nlohmann::json& j, const std::string& key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("'" + key + "' has the wrong type: " + e.what());
  }
}

template <typename T>
void Read(const nlohmann::json& j, const std::string& key, T& out) {
  if (j.contains(key)) out = Get<T>(j, key);
}

// Counts reject negative and fractional values instead of wrapping.
inline void ReadCount(const nlohmann::json& j, const std::string& key, std::size_t& out) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_number_unsigned()) {
    throw ConfigError("'" + key + "' must be a nonnegative integer");
  }
  out = v.get<std::size_t>();
}

}  // namespace internal

inline ExperimentConfig ParseConfig(const std::string& text) {
  nlohmann::json j;
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    j = nlohmann::json::object();
  } else {
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(std::string("syntax error: ") + e.what());
    }
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!KnownKeys().contains(key)) throw ConfigError("unknown key '" + key + "'");
  }

  using internal::Read;
  using internal::ReadCount;
  ExperimentConfig c;
  auto& f = c.federation;
  ReadCount(j, "n", f.n);
  Read(j, "join_ratio", f.join_ratio);
  ReadCount(j, "rounds", f.rounds);
  ReadCount(j, "local_epochs", f.local_epochs);
  Read(j, "rho", f.rho);
  Read(j, "lr", f.lr);
  ReadCount(j, "batch_size", f.batch_size);
  Read(j, "epsilon", f.epsilon);
  if (j.contains("algorithm")) {
    const auto name = internal::Get<std::string>(j, "algorithm");
    const auto algo = federation::ParseAlgorithm(name);
    if (!algo) throw ConfigError("'algorithm' must be fedavg|pfedsim|local|fedper, got '" + name + "'");
    f.algorithm = *algo;
  }
  Read(j, "include_bias", f.include_bias);
  Read(j, "hidden", f.hidden);
  ReadCount(j, "threads", f.threads);
  ReadCount(j, "classes", c.dataset.classes);
  ReadCount(j, "per_class", c.dataset.per_class);
  ReadCount(j, "dim", c.dataset.dim);
  Read(j, "cluster_spread", c.dataset.cluster_spread);
  if (j.contains("partition")) {
    const auto mode = internal::Get<std::string>(j, "partition");
    if (mode == "dirichlet") {
      c.partition.mode = PartitionMode::kDirichlet;
    } else if (mode == "shard") {
      c.partition.mode = PartitionMode::kShard;
    } else {
      throw ConfigError("'partition' must be dirichlet|shard, got '" + mode + "'");
    }
  }
  Read(j, "alpha", c.partition.alpha);
  Read(j, "shards", c.partition.shards);
  if (j.contains("min_client_samples")) {
    std::size_t v = 0;
    ReadCount(j, "min_client_samples", v);
    c.partition.min_client_samples = v;
  }
  Read(j, "seeds", c.seeds);
  Read(j, "output_dir", c.output_dir);
  if (j.contains("preset")) c.preset = internal::Get<std::string>(j, "preset");
  ReadCount(j, "measure_epochs", c.measure_epochs);
  ReadCount(j, "probe_size", c.probe_size);
  ReadCount(j, "cka_models", c.cka_models);
  ValidateConfig(c);
  return c;
}

inline std::string SerializeConfig(const ExperimentConfig& c) {
  const auto& f = c.federation;
  nlohmann::ordered_json j;
  j["n"] = f.n;
  j["join_ratio"] = f.join_ratio;
  j["rounds"] = f.rounds;
  j["local_epochs"] = f.local_epochs;
  j["rho"] = f.rho;
  j["lr"] = f.lr;
  j["batch_size"] = f.batch_size;
  j["epsilon"] = f.epsilon;
  j["algorithm"] = std::string(federation::AlgorithmName(f.algorithm));
  j["include_bias"] = f.include_bias;
  j["hidden"] = f.hidden;
  j["threads"] = f.threads;
  j["classes"] = c.dataset.classes;
  j["per_class"] = c.dataset.per_class;
  j["dim"] = c.dataset.dim;
  j["cluster_spread"] = c.dataset.cluster_spread;
  j["partition"] = c.partition.mode == PartitionMode::kDirichlet ? "dirichlet" : "shard";
  j["alpha"] = c.partition.alpha;
  j["shards"] = c.partition.shards;
  if (c.partition.min_client_samples) j["min_client_samples"] = *c.partition.min_client_samples;
  j["seeds"] = c.seeds;
  j["output_dir"] = c.output_dir;
  if (c.preset) j["preset"] = *c.preset;
  j["measure_epochs"] = c.measure_epochs;
  j["probe_size"] = c.probe_size;
  j["cka_models"] = c.cka_models;
  return j.dump(2) + "\n";
}

}  // namespace pfedsim::harness
