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

#include <algorithm>
#include <cstddef>
#include <set>
#include <span>
#include <vector>

#include "pfedsim/error.hpp"
#include "pfedsim/matrix.hpp"

namespace pfedsim {

// Labeled samples stored as one feature matrix (sample per row) plus labels.
struct LabeledDataset {
  Matrix features;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  std::size_t dim() const { return features.cols(); }

  bool operator==(const LabeledDataset&) const = default;

  // Rows `indices` of this set, in the given order.
  LabeledDataset Select(std::span<const std::size_t> indices) const {
    LabeledDataset out{Matrix(indices.size(), dim()), {}};
    out.labels.reserve(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
      const auto src = features.row(indices[i]);
      std::copy(src.begin(), src.end(), out.features.row(i).begin());
      out.labels.push_back(labels[indices[i]]);
    }
    return out;
  }
};

using LabelSpace = std::set<int>;

inline LabelSpace LabelsPresent(const LabeledDataset& d) {
  return LabelSpace(d.labels.begin(), d.labels.end());
}

inline LabeledDataset Concat(const LabeledDataset& a, const LabeledDataset& b) {
  if (!a.empty() && !b.empty() && a.dim() != b.dim()) {
    throw StructuralError("Concat: feature dimensions differ");
  }
  const std::size_t dim = a.empty() ? b.dim() : a.dim();
  LabeledDataset out{Matrix(a.size() + b.size(), dim), a.labels};
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  std::copy(a.features.data().begin(), a.features.data().end(),
            out.features.data().begin());
  std::copy(b.features.data().begin(), b.features.data().end(),
            out.features.data().begin() + static_cast<std::ptrdiff_t>(a.features.size()));
  return out;
}

}  // namespace pfedsim
