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

// Model similarity metrics: per-class decision-boundary cosine, classifier
// similarity, the log-adjusted similarity that drives personalized
// aggregation, linear CKA, and the MDB / LDB comparison metrics.

#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "pfedsim/dataset.hpp"
#include "pfedsim/error.hpp"
#include "pfedsim/matrix.hpp"
#include "pfedsim/nn.hpp"

namespace pfedsim::similarity {

inline constexpr double kDefaultEpsilon = 1e-8;

// u.v / (|u||v| + epsilon).
inline double Cosine(std::span<const double> u, std::span<const double> v,
                     double epsilon = kDefaultEpsilon) {
  if (u.size() != v.size()) {
    throw UsageError("Cosine: length mismatch " + std::to_string(u.size()) + " vs " +
                     std::to_string(v.size()));
  }
  double dot = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  return dot / (std::sqrt(uu) * std::sqrt(vv) + epsilon);
}

struct BoundaryOptions {
  // Append the class bias to the weight row.
  bool include_bias = true;
  double epsilon = kDefaultEpsilon;
};

// One vector per class: the classifier's weight row, optionally with bias.
inline std::vector<std::vector<double>> DecisionBoundaries(const nn::Classifier& classifier,
                                                           bool include_bias = true) {
  std::vector<std::vector<double>> out;
  for (std::size_t c = 0; c < classifier.out_width(); ++c) {
    const auto row = classifier.weights.row(c);
    std::vector<double> v(row.begin(), row.end());
    if (include_bias) v.push_back(classifier.bias[c]);
    out.push_back(std::move(v));
  }
  return out;
}

inline void CheckSameShape(const nn::Classifier& a, const nn::Classifier& b, const char* where) {
  if (a.weights.rows() != b.weights.rows() || a.weights.cols() != b.weights.cols() ||
      a.bias.size() != b.bias.size()) {
    throw UsageError(std::string(where) + ": classifier shape mismatch");
  }
}

// Cosine of each pair of class decision boundaries.
inline std::vector<double> BoundarySimilarities(const nn::Classifier& a, const nn::Classifier& b,
                                                const BoundaryOptions& opt = {}) {
  CheckSameShape(a, b, "BoundarySimilarities");
  const auto ba = DecisionBoundaries(a, opt.include_bias);
  const auto bb = DecisionBoundaries(b, opt.include_bias);
  std::vector<double> out(ba.size());
  for (std::size_t c = 0; c < ba.size(); ++c) out[c] = Cosine(ba[c], bb[c], opt.epsilon);
  return out;
}

// Mean boundary cosine over classes.
inline double ClassifierSimilarityPlain(const nn::Classifier& a, const nn::Classifier& b,
                                        const BoundaryOptions& opt = {}) {
  const auto per_class = BoundarySimilarities(a, b, opt);
  double sum = 0.0;
  for (double s : per_class) sum += s;
  return sum / static_cast<double>(per_class.size());
}

// -(1/C) sum_c ln(1 - max(0, cos_c)). Zero for orthogonal or opposed
// boundaries, unbounded above as cos_c -> 1 (epsilon keeps it finite).
inline double PfedsimSimilarityFromCosines(std::span<const double> cosines) {
  double sum = 0.0;
  for (double c : cosines) sum += std::log(1.0 - std::max(0.0, c));
  return cosines.empty() ? 0.0 : -sum / static_cast<double>(cosines.size());
}

inline double PfedsimSimilarity(const nn::Classifier& a, const nn::Classifier& b,
                                const BoundaryOptions& opt = {}) {
  if (!(opt.epsilon > 0.0)) throw UsageError("PfedsimSimilarity: epsilon must be > 0");
  const auto cosines = BoundarySimilarities(a, b, opt);
  return PfedsimSimilarityFromCosines(cosines);
}

// Linear CKA between two activation matrices recorded on the same probe rows.
inline double LinearCka(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw UsageError("LinearCka: row counts differ");
  if (a.rows() == 0) throw UsageError("LinearCka: no rows");
  auto centered = [](const Matrix& m) {
    Matrix c = m;
    for (std::size_t j = 0; j < m.cols(); ++j) {
      double mean = 0.0;
      for (std::size_t r = 0; r < m.rows(); ++r) mean += m(r, j);
      mean /= static_cast<double>(m.rows());
      for (std::size_t r = 0; r < m.rows(); ++r) c(r, j) -= mean;
    }
    return c;
  };
  // Squared Frobenius norm of x^T y.
  auto cross_fro2 = [](const Matrix& x, const Matrix& y) {
    double total = 0.0;
    for (std::size_t i = 0; i < x.cols(); ++i) {
      for (std::size_t j = 0; j < y.cols(); ++j) {
        double s = 0.0;
        for (std::size_t r = 0; r < x.rows(); ++r) s += x(r, i) * y(r, j);
        total += s * s;
      }
    }
    return total;
  };
  const Matrix ac = centered(a), bc = centered(b);
  const double denom = std::sqrt(cross_fro2(ac, ac)) * std::sqrt(cross_fro2(bc, bc));
  if (!(denom > 0.0)) throw DegenerateError("LinearCka: zero-variance activations");
  return cross_fro2(bc, ac) / denom;
}

// Cosine of the two full-parameter update vectors (after - before).
// A zero update has no direction and scores 0.
inline double MdbSimilarity(std::span<const double> delta_a, std::span<const double> delta_b) {
  if (delta_a.size() != delta_b.size()) throw UsageError("MdbSimilarity: length mismatch");
  double dot = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < delta_a.size(); ++i) {
    dot += delta_a[i] * delta_b[i];
    aa += delta_a[i] * delta_a[i];
    bb += delta_b[i] * delta_b[i];
  }
  const double denom = std::sqrt(aa) * std::sqrt(bb);
  return denom > 0.0 ? dot / denom : 0.0;
}

// L_a(model_a) - L_a(model_b) on client a's evaluation set: positive when
// model_b fits a's data better than a's own model does.
inline double LdbSimilarity(const nn::Model& model_a, const nn::Model& model_b,
                            const LabeledDataset& eval_set_a) {
  if (eval_set_a.empty()) throw UsageError("LdbSimilarity: empty evaluation set");
  return nn::MeanLoss(model_a, eval_set_a) - nn::MeanLoss(model_b, eval_set_a);
}

// Symmetric nonnegative n x n matrix, identity at construction.
class SimilarityMatrix {
 public:
  explicit SimilarityMatrix(std::size_t n = 0) : values_(n, n) {
    for (std::size_t i = 0; i < n; ++i) values_(i, i) = 1.0;
  }

  std::size_t n() const { return values_.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return values_(i, j); }
  std::span<const double> row(std::size_t i) const { return values_.row(i); }
  const Matrix& values() const { return values_; }

  void Set(std::size_t i, std::size_t j, double v) {
    if (i >= n() || j >= n()) throw UsageError("SimilarityMatrix::Set: index out of range");
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw UsageError("SimilarityMatrix::Set: value must be finite and >= 0");
    }
    values_(i, j) = v;
    values_(j, i) = v;
  }

  bool operator==(const SimilarityMatrix&) const = default;

 private:
  Matrix values_;
};

// Recompute the entry of every unordered pair of distinct participants.
// The diagonal and any pair with a non-participant are left alone.
inline void UpdateSimilarityMatrix(SimilarityMatrix& phi, std::span<const std::size_t> participants,
                                   const std::map<std::size_t, nn::Classifier>& classifiers,
                                   const BoundaryOptions& opt = {}) {
  for (std::size_t id : participants) {
    if (!classifiers.contains(id)) {
      throw UsageError("UpdateSimilarityMatrix: no classifier for client " + std::to_string(id));
    }
  }
  for (std::size_t a = 0; a < participants.size(); ++a) {
    for (std::size_t b = a + 1; b < participants.size(); ++b) {
      const std::size_t i = participants[a], j = participants[b];
      if (i == j) continue;
      phi.Set(i, j, PfedsimSimilarity(classifiers.at(i), classifiers.at(j), opt));
    }
  }
}

// Header of client ids, then one row per client, 9 significant digits.
inline void WriteMatrixCsv(const Matrix& m, std::ostream& os, const std::string& corner = "") {
  char buf[32];
  os << corner;
  for (std::size_t j = 0; j < m.cols(); ++j) os << ',' << j;
  os << '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) {
    os << i;
    for (std::size_t j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.9g", m(i, j));
      os << ',' << buf;
    }
    os << '\n';
  }
}

inline void WriteSimilarityCsv(const SimilarityMatrix& phi, std::ostream& os) {
  WriteMatrixCsv(phi.values(), os, "client");
}

}  // namespace pfedsim::similarity
