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

// Synthetic blob data, non-IID client partitioning and the label-overlap
// dataset distance.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "pfedsim/dataset.hpp"
#include "pfedsim/error.hpp"
#include "pfedsim/rng.hpp"

namespace pfedsim::data {

struct ClientData {
  LabeledDataset train;
  LabeledDataset test;

  std::size_t size() const { return train.size() + test.size(); }
  LabeledDataset All() const { return Concat(train, test); }

  bool operator==(const ClientData&) const = default;
};

struct PartitionedDataset {
  std::vector<ClientData> clients;
  std::size_t class_count = 0;

  std::size_t sample_count() const {
    std::size_t n = 0;
    for (const auto& c : clients) n += c.size();
    return n;
  }

  bool operator==(const PartitionedDataset&) const = default;
};

inline std::size_t ClassCount(const LabeledDataset& d) {
  int max = -1;
  for (int y : d.labels) max = std::max(max, y);
  return static_cast<std::size_t>(max + 1);
}

// Gaussian blobs: one mean per class drawn from N(0, I), then `per_class`
// samples around it with standard deviation `cluster_spread` per coordinate.
// Output is class-major.
inline LabeledDataset MakeBlobs(std::size_t classes, std::size_t per_class, std::size_t dim,
                                double cluster_spread, Rng& rng) {
  if (classes < 2) throw UsageError("MakeBlobs: classes must be >= 2");
  if (per_class < 1) throw UsageError("MakeBlobs: per_class must be >= 1");
  if (dim < 1) throw UsageError("MakeBlobs: dim must be >= 1");
  if (!(cluster_spread > 0.0)) throw UsageError("MakeBlobs: cluster_spread must be > 0");
  Matrix means(classes, dim);
  for (auto& v : means.data()) v = rng.Normal();
  LabeledDataset out{Matrix(classes * per_class, dim), {}};
  out.labels.reserve(classes * per_class);
  std::size_t row = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t s = 0; s < per_class; ++s, ++row) {
      auto x = out.features.row(row);
      for (std::size_t j = 0; j < dim; ++j) x[j] = means(c, j) + cluster_spread * rng.Normal();
      out.labels.push_back(static_cast<int>(c));
    }
  }
  return out;
}

// Largest-remainder apportionment of `total` items by `shares` (sum 1).
// Remainder ties go to the lower index.
inline std::vector<std::size_t> Apportion(std::size_t total, const std::vector<double>& shares) {
  std::vector<std::size_t> counts(shares.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < shares.size(); ++i) {
    const double exact = shares[i] * static_cast<double>(total);
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[i];
    remainders.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) {
    ++counts[remainders[k % remainders.size()].second];
  }
  return counts;
}

// Shuffled even split; an odd sample goes to train.
inline ClientData SplitTrainTest(const LabeledDataset& source, std::vector<std::size_t> indices,
                                 Rng& rng) {
  rng.Shuffle(indices);
  const std::size_t n_train = (indices.size() + 1) / 2;
  const std::span<const std::size_t> all(indices);
  return {source.Select(all.first(n_train)), source.Select(all.subspan(n_train))};
}

struct DirichletOptions {
  // Every client must end with at least this many samples; unset means 2C.
  std::optional<std::size_t> min_client_samples;
  int max_attempts = 100;
};

// Per class, p ~ Dir(alpha * 1_n) and the class's samples are dealt to
// clients in those proportions. The whole partition is redrawn until every
// client meets the minimum size.
inline PartitionedDataset DirichletPartition(const LabeledDataset& dataset, std::size_t n,
                                             double alpha, Rng& rng,
                                             const DirichletOptions& options = {}) {
  if (n < 1) throw UsageError("DirichletPartition: n must be >= 1");
  if (!(alpha > 0.0)) throw UsageError("DirichletPartition: alpha must be > 0");
  if (dataset.empty()) throw UsageError("DirichletPartition: empty dataset");
  const std::size_t classes = ClassCount(dataset);
  const std::size_t min_size = options.min_client_samples.value_or(2 * classes);

  std::vector<std::vector<std::size_t>> by_class(classes);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    by_class[static_cast<std::size_t>(dataset.labels[i])].push_back(i);
  }

  for (int attempt = 0; attempt < options.max_attempts; ++attempt) {
    std::vector<std::vector<std::size_t>> owned(n);
    for (std::size_t c = 0; c < classes; ++c) {
      auto members = by_class[c];
      rng.Shuffle(members);
      const auto counts = Apportion(members.size(), rng.Dirichlet(n, alpha));
      std::size_t pos = 0;
      for (std::size_t j = 0; j < n; ++j) {
        owned[j].insert(owned[j].end(), members.begin() + static_cast<std::ptrdiff_t>(pos),
                        members.begin() + static_cast<std::ptrdiff_t>(pos + counts[j]));
        pos += counts[j];
      }
    }
    const bool ok = std::all_of(owned.begin(), owned.end(),
                                [&](const auto& o) { return o.size() >= min_size; });
    if (!ok) continue;
    PartitionedDataset out;
    out.class_count = classes;
    for (auto& o : owned) out.clients.push_back(SplitTrainTest(dataset, std::move(o), rng));
    return out;
  }
  throw ConfigError("DirichletPartition: could not give every one of " + std::to_string(n) +
                    " clients >= " + std::to_string(min_size) + " samples in " +
                    std::to_string(options.max_attempts) + " attempts (dataset has " +
                    std::to_string(dataset.size()) + " samples, alpha=" +
                    std::to_string(alpha) + ")");
}

// Each sample goes to one shard, chosen uniformly among the shards whose
// label set holds its label. Samples no shard wants are dropped.
inline PartitionedDataset ShardPartition(const LabeledDataset& dataset,
                                         const std::vector<std::vector<int>>& shards, Rng& rng) {
  const std::size_t classes = ClassCount(dataset);
  std::vector<std::vector<std::size_t>> owners(classes);
  for (std::size_t s = 0; s < shards.size(); ++s) {
    for (int y : shards[s]) {
      if (y < 0 || static_cast<std::size_t>(y) >= classes) {
        throw UsageError("ShardPartition: shard " + std::to_string(s) + " label " +
                         std::to_string(y) + " outside [0, " + std::to_string(classes) + ")");
      }
      auto& o = owners[static_cast<std::size_t>(y)];
      if (std::find(o.begin(), o.end(), s) == o.end()) o.push_back(s);
    }
  }
  std::vector<std::vector<std::size_t>> owned(shards.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& o = owners[static_cast<std::size_t>(dataset.labels[i])];
    if (o.empty()) continue;
    owned[o[rng.Index(o.size())]].push_back(i);
  }
  PartitionedDataset out;
  out.class_count = classes;
  for (auto& o : owned) out.clients.push_back(SplitTrainTest(dataset, std::move(o), rng));
  return out;
}

// 1 - (samples of a and b whose label both sets own) / (|a| + |b|).
inline double DataDistance(const LabeledDataset& a, const LabeledDataset& b) {
  if (a.empty() || b.empty()) throw UsageError("DataDistance: empty dataset");
  const LabelSpace ya = LabelsPresent(a), yb = LabelsPresent(b);
  std::size_t common = 0;
  for (int y : a.labels) common += yb.count(y);
  for (int y : b.labels) common += ya.count(y);
  return 1.0 - static_cast<double>(common) / static_cast<double>(a.size() + b.size());
}

inline double DataSimilarity(const LabeledDataset& a, const LabeledDataset& b) {
  return 1.0 - DataDistance(a, b);
}

// Debug dump: one line per sample, label then the feature values, no header.
inline void WriteDatasetCsv(const LabeledDataset& d, std::ostream& os) {
  char buf[32];
  for (std::size_t i = 0; i < d.size(); ++i) {
    os << d.labels[i];
    for (double v : d.features.row(i)) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      os << ',' << buf;
    }
    os << '\n';
  }
}

inline LabeledDataset ReadDatasetCsv(std::istream& is) {
  std::vector<double> values;
  std::vector<int> labels;
  std::size_t dim = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t cols = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        if (cols == 0) {
          labels.push_back(std::stoi(cell));
        } else {
          values.push_back(std::stod(cell));
        }
      } catch (const std::exception&) {
        throw UsageError("dataset csv line " + std::to_string(line_no) + ": bad value '" +
                         cell + "'");
      }
      ++cols;
    }
    if (labels.size() == 1) dim = cols - 1;
    if (cols - 1 != dim) {
      throw UsageError("dataset csv line " + std::to_string(line_no) + ": expected " +
                       std::to_string(dim) + " features");
    }
  }
  return {Matrix(labels.size(), dim, std::move(values)), std::move(labels)};
}

inline void WriteDatasetCsv(const LabeledDataset& d, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  WriteDatasetCsv(d, os);
  if (!os) throw IoError("write failed: " + path);
}

inline LabeledDataset ReadDatasetCsv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  return ReadDatasetCsv(is);
}

}  // namespace pfedsim::data
