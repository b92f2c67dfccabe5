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

#include "pfedsim/similarity.hpp"

#include <cmath>
#include <sstream>

#include "gtest/gtest.h"

namespace pfedsim::similarity {
namespace {

nn::Classifier RandomClassifier(std::size_t classes, std::size_t in, Rng& rng) {
  nn::Classifier c{Matrix(classes, in), std::vector<double>(classes), nn::Activation::kIdentity};
  for (auto& w : c.weights.data()) w = rng.Normal();
  for (auto& b : c.bias) b = rng.Normal();
  return c;
}

// Boundary c of `a` is e_c; boundary c of `b` has the requested cosine to it.
std::pair<nn::Classifier, nn::Classifier> ClassifiersWithCosine(std::size_t classes, double cos) {
  const std::size_t in = 2 * classes;
  nn::Classifier a{Matrix(classes, in), std::vector<double>(classes), nn::Activation::kIdentity};
  nn::Classifier b = a;
  for (std::size_t c = 0; c < classes; ++c) {
    a.weights(c, c) = 1.0;
    b.weights(c, c) = cos;
    b.weights(c, classes + c) = std::sqrt(1.0 - cos * cos);
  }
  return {a, b};
}

TEST(CosineTest, HandValues) {
  const std::vector<double> u{3.0, 4.0};
  EXPECT_DOUBLE_EQ(Cosine(u, u, 1e-8), 25.0 / (25.0 + 1e-8));
  EXPECT_LT(Cosine(u, u, 1e-8), 1.0);
  EXPECT_EQ(Cosine(std::vector<double>{1, 0}, std::vector<double>{0, 2}), 0.0);
  EXPECT_NEAR(Cosine(std::vector<double>{1, 0}, std::vector<double>{1, 1}, 1e-8),
              0.7071067761865475, 1e-15);
  EXPECT_THROW(Cosine(std::vector<double>{1}, std::vector<double>{1, 2}), UsageError);
}

TEST(DecisionBoundaryTest, BiasAppendedOnRequest) {
  nn::Classifier c{Matrix(2, 3, std::vector<double>{1, 2, 3, 4, 5, 6}), {7, 8},
                   nn::Activation::kIdentity};
  const auto with = DecisionBoundaries(c, true);
  EXPECT_EQ(with[1], (std::vector<double>{4, 5, 6, 8}));
  EXPECT_EQ(DecisionBoundaries(c, false)[0], (std::vector<double>{1, 2, 3}));
}

TEST(ClassifierSimilarityTest, IdenticalAndOrthogonal) {
  Rng rng(1);
  const auto a = RandomClassifier(10, 8, rng);
  EXPECT_NEAR(ClassifierSimilarityPlain(a, a), 1.0, 1e-7);
  const auto [x, y] = ClassifiersWithCosine(4, 0.0);
  EXPECT_EQ(ClassifierSimilarityPlain(x, y, {false, 1e-8}), 0.0);
  EXPECT_THROW(ClassifierSimilarityPlain(a, RandomClassifier(9, 8, rng)), UsageError);
}

TEST(PfedsimSimilarityTest, OrthogonalOpposedAndHalf) {
  const BoundaryOptions no_bias{false, 1e-8};
  {
    const auto [a, b] = ClassifiersWithCosine(5, 0.0);
    EXPECT_EQ(PfedsimSimilarity(a, b, no_bias), 0.0);
  }
  {
    const auto [a, b] = ClassifiersWithCosine(5, -0.9);
    EXPECT_EQ(PfedsimSimilarity(a, b, no_bias), 0.0);
  }
  {
    const auto [a, b] = ClassifiersWithCosine(5, 0.5);
    EXPECT_NEAR(PfedsimSimilarity(a, b, no_bias), 0.6931471705599455, 1e-12);
    EXPECT_NEAR(PfedsimSimilarity(a, b, no_bias), std::log(2.0), 1e-7);
  }
  Rng rng(2);
  EXPECT_THROW(PfedsimSimilarity(RandomClassifier(3, 4, rng), RandomClassifier(3, 5, rng)),
               UsageError);
  const auto c = RandomClassifier(3, 4, rng);
  EXPECT_THROW(PfedsimSimilarity(c, c, {true, 0.0}), UsageError);
}

TEST(PfedsimSimilarityTest, IdenticalClassifiersStayFinite) {
  Rng rng(3);
  const auto a = RandomClassifier(10, 32, rng);
  const double s = PfedsimSimilarity(a, a);
  EXPECT_TRUE(std::isfinite(s));
  EXPECT_GT(s, 1.0);  // unbounded above; no clamp to [0, 1]
}

TEST(PfedsimSimilarityProperty, SymmetricNonnegativeFinite) {
  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    const auto a = RandomClassifier(6, 5, rng);
    const auto b = RandomClassifier(6, 5, rng);
    const double ab = PfedsimSimilarity(a, b), ba = PfedsimSimilarity(b, a);
    EXPECT_EQ(ab, ba);
    EXPECT_GE(ab, 0.0);
    EXPECT_TRUE(std::isfinite(ab));
  }
}

TEST(PfedsimSimilarityProperty, ScaleInvariantUpToEpsilon) {
  Rng rng(5);
  for (int t = 0; t < 100; ++t) {
    auto a = RandomClassifier(6, 5, rng);
    const auto b = RandomClassifier(6, 5, rng);
    // Normalize each boundary (weights and bias jointly) to unit length.
    for (std::size_t c = 0; c < 6; ++c) {
      double n2 = a.bias[c] * a.bias[c];
      for (double w : a.weights.row(c)) n2 += w * w;
      const double inv = 1.0 / std::sqrt(n2);
      for (double& w : a.weights.row(c)) w *= inv;
      a.bias[c] *= inv;
    }
    auto scaled = a;
    const double k = rng.Uniform(0.1, 10.0);
    for (auto& w : scaled.weights.data()) w *= k;
    for (auto& v : scaled.bias) v *= k;
    EXPECT_LT(std::abs(PfedsimSimilarity(a, b) - PfedsimSimilarity(scaled, b)), 1e-6);
  }
}

TEST(PfedsimSimilarityProperty, MonotoneInEachCosine) {
  Rng rng(6);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> cos(4);
    for (auto& c : cos) c = rng.Uniform(0.0, 0.99);
    const double base = PfedsimSimilarityFromCosines(cos);
    const std::size_t k = rng.Index(4);
    cos[k] = std::min(0.999, cos[k] + rng.Uniform(0.0, 0.2));
    EXPECT_GE(PfedsimSimilarityFromCosines(cos), base);
  }
}

Matrix RandomActivations(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = rng.Normal();
  return m;
}

// Gram-matrix form of linear CKA: HSIC(K, L) / sqrt(HSIC(K, K) HSIC(L, L))
// with K = A A^T and centering H K H. Independent of the feature-space route.
double GramCka(const Matrix& a, const Matrix& b) {
  const std::size_t n = a.rows();
  auto gram = [n](const Matrix& x) {
    Matrix k(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0;
        for (std::size_t f = 0; f < x.cols(); ++f) s += x(i, f) * x(j, f);
        k(i, j) = s;
      }
    // Double centering.
    std::vector<double> rm(n, 0.0);
    double all = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) rm[i] += k(i, j);
      all += rm[i];
      rm[i] /= static_cast<double>(n);
    }
    all /= static_cast<double>(n * n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) k(i, j) += all - rm[i] - rm[j];
    return k;
  };
  const Matrix k = gram(a), l = gram(b);
  double kl = 0, kk = 0, ll = 0;
  for (std::size_t i = 0; i < n * n; ++i) {
    kl += k.data()[i] * l.data()[i];
    kk += k.data()[i] * k.data()[i];
    ll += l.data()[i] * l.data()[i];
  }
  return kl / std::sqrt(kk * ll);
}

TEST(LinearCkaTest, SelfSimilarityIsOne) {
  Rng rng(7);
  const auto a = RandomActivations(50, 6, rng);
  EXPECT_NEAR(LinearCka(a, a), 1.0, 1e-12);
}

TEST(LinearCkaTest, InvariantToOrthogonalTransformAndScale) {
  Rng rng(8);
  const auto a = RandomActivations(40, 2, rng);
  const double t = 0.7;
  Matrix rotated(40, 2);
  for (std::size_t r = 0; r < 40; ++r) {
    rotated(r, 0) = 3.0 * (std::cos(t) * a(r, 0) - std::sin(t) * a(r, 1));
    rotated(r, 1) = 3.0 * (std::sin(t) * a(r, 0) + std::cos(t) * a(r, 1));
  }
  EXPECT_NEAR(LinearCka(a, rotated), 1.0, 1e-12);
}

TEST(LinearCkaTest, MatchesGramOracleAndIndependentIsSmall) {
  Rng rng(9);
  for (int t = 0; t < 5; ++t) {
    const auto a = RandomActivations(30, 4, rng);
    const auto b = RandomActivations(30, 7, rng);
    EXPECT_NEAR(LinearCka(a, b), GramCka(a, b), 1e-10);
  }
  double mean = 0;
  for (int t = 0; t < 10; ++t) {
    const auto a = RandomActivations(400, 8, rng);
    const auto b = RandomActivations(400, 8, rng);
    const double v = LinearCka(a, b);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    mean += v / 10;
  }
  EXPECT_LT(mean, 0.2);
}

TEST(LinearCkaTest, DegenerateAndMismatchedInputs) {
  Rng rng(10);
  const Matrix constant(10, 3, 2.5);
  EXPECT_THROW(LinearCka(constant, RandomActivations(10, 3, rng)), DegenerateError);
  EXPECT_THROW(LinearCka(RandomActivations(10, 3, rng), RandomActivations(9, 3, rng)),
               UsageError);
}

TEST(MdbSimilarityTest, SameAndOpposite) {
  const std::vector<double> d{0.1, -0.2, 0.3};
  const std::vector<double> neg{-0.1, 0.2, -0.3};
  EXPECT_NEAR(MdbSimilarity(d, d), 1.0, 1e-15);
  EXPECT_NEAR(MdbSimilarity(d, neg), -1.0, 1e-15);
  EXPECT_THROW(MdbSimilarity(d, std::vector<double>{1.0}), UsageError);
}

TEST(LdbSimilarityTest, SignConvention) {
  // One linear layer over a single feature; eval set is all class 1.
  const nn::Model bad({nn::DenseLayer{Matrix(2, 1), {1.0, 0.0}, nn::Activation::kIdentity}});
  const nn::Model good({nn::DenseLayer{Matrix(2, 1), {0.0, 1.0}, nn::Activation::kIdentity}});
  const LabeledDataset eval{Matrix(3, 1, 1.0), {1, 1, 1}};
  EXPECT_EQ(LdbSimilarity(bad, bad, eval), 0.0);
  EXPECT_GT(LdbSimilarity(bad, good, eval), 0.0);
  EXPECT_LT(LdbSimilarity(good, bad, eval), 0.0);
  EXPECT_THROW(LdbSimilarity(bad, good, LabeledDataset{}), UsageError);
}

TEST(SimilarityMatrixTest, StartsAsIdentity) {
  const SimilarityMatrix phi(4);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(phi(i, j), i == j ? 1.0 : 0.0);
}

TEST(UpdateSimilarityMatrixTest, SingleParticipantLeavesMatrixUnchanged) {
  SimilarityMatrix phi(3);
  Rng rng(1);
  std::map<std::size_t, nn::Classifier> cls{{1, RandomClassifier(3, 2, rng)}};
  const std::vector<std::size_t> p{1};
  UpdateSimilarityMatrix(phi, p, cls);
  EXPECT_EQ(phi, SimilarityMatrix(3));
}

TEST(UpdateSimilarityMatrixTest, OrthogonalPairGetsZeroDiagonalStaysOne) {
  SimilarityMatrix phi(3);
  phi.Set(0, 2, 0.4);
  const auto [a, b] = ClassifiersWithCosine(3, 0.0);
  std::map<std::size_t, nn::Classifier> cls{{0, a}, {2, b}};
  const std::vector<std::size_t> p{0, 2};
  UpdateSimilarityMatrix(phi, p, cls, {false, 1e-8});
  EXPECT_EQ(phi(0, 2), 0.0);
  EXPECT_EQ(phi(2, 0), 0.0);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(phi(i, i), 1.0);
}

TEST(UpdateSimilarityMatrixTest, ThreeParticipantsUpdateThreePairs) {
  SimilarityMatrix phi(5);
  Rng rng(2);
  std::map<std::size_t, nn::Classifier> cls;
  for (std::size_t id : {0u, 2u, 4u}) cls[id] = RandomClassifier(4, 3, rng);
  const std::vector<std::size_t> p{0, 2, 4};
  // Force positive similarity so the change is visible.
  cls[2] = cls[0];
  cls[4] = cls[0];
  UpdateSimilarityMatrix(phi, p, cls);
  std::size_t changed = 0;
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = i + 1; j < 5; ++j) changed += phi(i, j) != 0.0;
  EXPECT_EQ(changed, 3u);
  const std::vector<std::size_t> missing{0, 3};
  EXPECT_THROW(UpdateSimilarityMatrix(phi, missing, cls), UsageError);
}

TEST(UpdateSimilarityMatrixProperty, SymmetricNonnegativeAfterRandomUpdates) {
  SimilarityMatrix phi(8);
  Rng rng(3);
  std::map<std::size_t, nn::Classifier> cls;
  for (int round = 0; round < 30; ++round) {
    for (std::size_t i = 0; i < 8; ++i) cls[i] = RandomClassifier(4, 3, rng);
    const auto p = rng.SampleWithoutReplacement(8, 1 + rng.Index(8));
    UpdateSimilarityMatrix(phi, p, cls);
    for (std::size_t i = 0; i < 8; ++i) {
      EXPECT_EQ(phi(i, i), 1.0);
      for (std::size_t j = 0; j < 8; ++j) {
        EXPECT_EQ(phi(i, j), phi(j, i));
        EXPECT_GE(phi(i, j), 0.0);
      }
    }
  }
}

TEST(SimilarityCsvTest, HeaderAndNineDigits) {
  SimilarityMatrix phi(2);
  phi.Set(0, 1, 1.0 / 3.0);
  std::ostringstream os;
  WriteSimilarityCsv(phi, os);
  EXPECT_EQ(os.str(), "client,0,1\n0,1,0.333333333\n1,0.333333333,1\n");
}

}  // namespace
}  // namespace pfedsim::similarity
