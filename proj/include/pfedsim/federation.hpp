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

// Parameter-server simulation: FedAvg, the two-phase pFedSim protocol
// (FedAvg warm-up, then similarity-weighted extractor aggregation with
// local classifiers), and the Local-only / FedPer baselines.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "pfedsim/data.hpp"
#include "pfedsim/error.hpp"
#include "pfedsim/nn.hpp"
#include "pfedsim/rng.hpp"
#include "pfedsim/similarity.hpp"

namespace pfedsim::federation {

enum class Algorithm { kFedAvg, kPFedSim, kLocalOnly, kFedPer };

inline std::string_view AlgorithmName(Algorithm a) {
  switch (a) {
    case Algorithm::kFedAvg: return "fedavg";
    case Algorithm::kPFedSim: return "pfedsim";
    case Algorithm::kLocalOnly: return "local";
    case Algorithm::kFedPer: return "fedper";
  }
  return "?";
}

inline std::optional<Algorithm> ParseAlgorithm(std::string_view name) {
  for (Algorithm a : {Algorithm::kFedAvg, Algorithm::kPFedSim, Algorithm::kLocalOnly,
                      Algorithm::kFedPer}) {
    if (AlgorithmName(a) == name) return a;
  }
  return std::nullopt;
}

struct FederationConfig {
  std::size_t n = 20;
  double join_ratio = 0.25;
  std::size_t rounds = 60;
  std::size_t local_epochs = 5;
  double rho = 0.5;
  double lr = 0.01;
  std::size_t batch_size = 32;
  double epsilon = similarity::kDefaultEpsilon;
  Algorithm algorithm = Algorithm::kPFedSim;
  bool include_bias = true;
  std::vector<std::size_t> hidden = {64, 32};
  // Worker threads for participant training; results do not depend on it.
  std::size_t threads = 1;
  // Audit knobs.
  bool update_similarity = true;
  bool record_global_models = false;

  std::size_t generalization_rounds() const {
    return static_cast<std::size_t>(std::floor(rho * static_cast<double>(rounds)));
  }
  std::size_t personalization_rounds() const { return rounds - generalization_rounds(); }
  std::size_t participants_per_round() const {
    const auto m = static_cast<std::size_t>(std::floor(join_ratio * static_cast<double>(n)));
    return std::max<std::size_t>(m, 1);
  }

  void Validate() const {
    if (n < 1) throw ConfigError("n must be >= 1");
    if (!(join_ratio > 0.0 && join_ratio <= 1.0)) throw ConfigError("join_ratio must be in (0, 1]");
    if (rounds < 1) throw ConfigError("rounds must be >= 1");
    if (local_epochs < 1) throw ConfigError("local_epochs must be >= 1");
    if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("rho must be in [0, 1]");
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be finite and >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
    for (auto h : hidden) {
      if (h < 1) throw ConfigError("hidden widths must be >= 1");
    }
  }
};

struct RoundPlan {
  std::size_t round = 0;
  std::vector<std::size_t> participants;  // ascending
};

// m clients drawn uniformly without replacement.
inline RoundPlan PlanRound(std::size_t round, std::size_t n, std::size_t m, Rng& sampler) {
  return {round, sampler.SampleWithoutReplacement(n, m)};
}

// Exact parameter tallies per round.
struct CommLedger {
  std::vector<std::size_t> uploaded;
  std::vector<std::size_t> downloaded;

  void Record(std::size_t up, std::size_t down) {
    uploaded.push_back(up);
    downloaded.push_back(down);
  }
};

// Parameter-wise mean weighted by |D_i| / sum |D_j|. Keys fix the summation
// order, so the result does not depend on how the maps were filled.
inline nn::Model FedAvgAggregate(const std::map<std::size_t, nn::Model>& models,
                                 const std::map<std::size_t, std::size_t>& sizes) {
  if (models.empty()) throw UsageError("FedAvgAggregate: no participants");
  double total = 0.0;
  for (const auto& [id, model] : models) {
    const auto it = sizes.find(id);
    if (it == sizes.end()) throw UsageError("FedAvgAggregate: no size for client " + std::to_string(id));
    total += static_cast<double>(it->second);
  }
  if (!(total > 0.0)) throw UsageError("FedAvgAggregate: total weight is zero");
  const nn::Model& shape = models.begin()->second;
  std::vector<double> acc(shape.param_count(), 0.0);
  for (const auto& [id, model] : models) {
    if (model.param_count() != acc.size()) throw StructuralError("FedAvgAggregate: shape mismatch");
    const auto flat = nn::Flatten(model);
    const double w = static_cast<double>(sizes.at(id)) / total;
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += w * flat[k];
  }
  return nn::Unflatten(shape, acc);
}

// Row-normalized, Phi-weighted mean of every client's stored extractor.
// The target's classifier is not an input and is never touched.
inline nn::Extractor PersonalizedAggregate(std::size_t target,
                                           const similarity::SimilarityMatrix& phi,
                                           std::span<const nn::Extractor> extractors) {
  if (target >= phi.n()) throw UsageError("PersonalizedAggregate: target out of range");
  if (extractors.size() != phi.n()) {
    throw UsageError("PersonalizedAggregate: need one extractor per client");
  }
  const auto row = phi.row(target);
  double total = 0.0;
  for (double v : row) total += v;
  if (!(total > 0.0)) {
    throw DegenerateError("PersonalizedAggregate: similarity row of client " +
                          std::to_string(target) + " sums to zero");
  }
  const auto& shape = extractors[target];
  std::vector<double> acc(nn::FlattenLayers(shape).size(), 0.0);
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (row[j] == 0.0) continue;
    const auto flat = nn::FlattenLayers(extractors[j]);
    if (flat.size() != acc.size()) throw StructuralError("PersonalizedAggregate: shape mismatch");
    const double w = row[j] / total;
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += w * flat[k];
  }
  nn::Extractor out = shape;
  nn::UnflattenInto(out, acc);
  return out;
}

// Fraction of argmax-correct predictions; ties go to the lowest class.
inline double Evaluate(const nn::Model& model, const LabeledDataset& test_set) {
  if (test_set.empty()) throw UsageError("Evaluate: empty test set");
  const auto pred = nn::Predict(model, test_set.features);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) ok += pred[i] == test_set.labels[i];
  return static_cast<double>(ok) / static_cast<double>(pred.size());
}

inline std::uint64_t ClientShuffleSeed(std::uint64_t seed, std::size_t client, std::size_t round) {
  return DeriveSeed(seed, Stream::kShuffle, client, round);
}

struct RoundMetrics {
  std::size_t round = 0;
  bool generalization = false;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  std::size_t uploaded = 0;
  std::size_t downloaded = 0;
  std::vector<std::size_t> participants;
  std::vector<double> client_accuracy;
};

struct RunResult {
  Algorithm algorithm = Algorithm::kPFedSim;
  std::size_t generalization_rounds = 0;
  std::size_t param_count = 0;
  std::size_t extractor_param_count = 0;
  std::vector<RoundMetrics> rounds;
  std::vector<double> final_accuracy;
  similarity::SimilarityMatrix phi;
  CommLedger ledger;
  std::vector<nn::Model> final_models;
  // Flattened global model after each shared-model round, when recorded.
  std::vector<std::vector<double>> global_trace;
};

// Server plus client runtime for one run. Run() covers every algorithm; the
// phase/round methods expose pFedSim step by step for audits.
class Simulation {
 public:
  Simulation(FederationConfig config, const data::PartitionedDataset& data, std::uint64_t seed)
      : config_(std::move(config)), data_(data), seed_(seed),
        sampler_(DeriveSeed(seed, Stream::kSampler)) {
    config_.Validate();
    if (data_.clients.size() != config_.n) {
      throw ConfigError("data has " + std::to_string(data_.clients.size()) +
                        " clients but n = " + std::to_string(config_.n));
    }
    if (data_.class_count < 2) throw ConfigError("data needs at least 2 classes");
    std::size_t dim = 0;
    for (const auto& c : data_.clients) {
      if (c.train.empty() || c.test.empty()) {
        throw ConfigError("every client needs nonempty train and test sets");
      }
      if (dim == 0) dim = c.train.dim();
      if (c.train.dim() != dim || c.test.dim() != dim) {
        throw ConfigError("clients disagree on feature dimension");
      }
    }
    std::vector<std::size_t> widths{dim};
    widths.insert(widths.end(), config_.hidden.begin(), config_.hidden.end());
    widths.push_back(data_.class_count);
    Rng init(DeriveSeed(seed, Stream::kInit));
    global_ = nn::InitModel(widths, init);
    result_.algorithm = config_.algorithm;
    result_.param_count = global_.param_count();
    result_.extractor_param_count = global_.extractor_param_count();
    result_.phi = similarity::SimilarityMatrix(config_.n);
    client_models_.assign(config_.n, global_);
  }

  const FederationConfig& config() const { return config_; }
  const nn::Model& global_model() const { return global_; }
  // The per-client (extractor, classifier) registry, always n entries.
  const std::vector<nn::Model>& client_models() const { return client_models_; }
  const similarity::SimilarityMatrix& phi() const { return result_.phi; }
  std::size_t next_round() const { return round_; }
  std::uint64_t seed() const { return seed_; }

  RunResult Run() {
    switch (config_.algorithm) {
      case Algorithm::kFedAvg:
        for (std::size_t t = 0; t < config_.rounds; ++t) RunFedAvgRound();
        break;
      case Algorithm::kPFedSim:
        RunGeneralizationPhase();
        StartPersonalization();
        while (round_ < config_.rounds) RunPersonalizationRound();
        break;
      case Algorithm::kLocalOnly:
        for (std::size_t t = 0; t < config_.rounds; ++t) RunLocalOnlyRound();
        break;
      case Algorithm::kFedPer:
        for (std::size_t t = 0; t < config_.rounds; ++t) RunFedPerRound();
        break;
    }
    return Finish();
  }

  // T_g FedAvg rounds; returns the warm-started global model.
  const nn::Model& RunGeneralizationPhase() {
    const std::size_t tg = config_.generalization_rounds();
    while (round_ < tg) RunFedAvgRound();
    result_.generalization_rounds = tg;
    return global_;
  }

  // Every client, sampled or not, starts personalization from the global
  // extractor and classifier.
  void StartPersonalization() {
    client_models_.assign(config_.n, global_);
    personalizing_ = true;
  }

  RoundPlan RunPersonalizationRound() {
    if (!personalizing_) throw UsageError("StartPersonalization() must run first");
    if (round_ >= config_.rounds) throw UsageError("no rounds left");
    const RoundPlan plan = NextPlan();
    const std::size_t m = plan.participants.size();

    std::vector<nn::Extractor> stored;
    stored.reserve(config_.n);
    for (const auto& model : client_models_) stored.push_back(model.extractor());

    // Aggregate from the pre-round registry before anyone trains.
    std::vector<nn::Model> start(m);
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t i = plan.participants[k];
      start[k] = nn::Model::Compose(PersonalizedAggregate(i, result_.phi, stored),
                                    client_models_[i].classifier());
    }
    auto trained = TrainParticipants(plan, std::move(start));
    for (std::size_t k = 0; k < m; ++k) client_models_[plan.participants[k]] = std::move(trained[k]);

    if (config_.update_similarity) {
      std::map<std::size_t, nn::Classifier> classifiers;
      for (std::size_t i : plan.participants) classifiers[i] = client_models_[i].classifier();
      similarity::UpdateSimilarityMatrix(result_.phi, plan.participants, classifiers,
                                         {config_.include_bias, config_.epsilon});
    }
    const std::size_t nu = global_.param_count();
    EndRound(plan, EvaluateClients(), m * nu, m * nu, false);
    return plan;
  }

  RunResult Finish() {
    result_.final_models = client_models_;
    if (config_.algorithm == Algorithm::kFedAvg ||
        (config_.algorithm == Algorithm::kPFedSim && !personalizing_)) {
      result_.final_models.assign(config_.n, global_);
    }
    if (!result_.rounds.empty()) result_.final_accuracy = result_.rounds.back().client_accuracy;
    return result_;
  }

 private:
  RoundPlan NextPlan() {
    return PlanRound(round_, config_.n, config_.participants_per_round(), sampler_);
  }

  void RunFedAvgRound() {
    const RoundPlan plan = NextPlan();
    auto trained = TrainParticipants(plan, std::vector<nn::Model>(plan.participants.size(), global_));
    std::map<std::size_t, nn::Model> models;
    std::map<std::size_t, std::size_t> sizes;
    for (std::size_t k = 0; k < plan.participants.size(); ++k) {
      const std::size_t i = plan.participants[k];
      models.emplace(i, std::move(trained[k]));
      sizes.emplace(i, data_.clients[i].train.size());
    }
    global_ = FedAvgAggregate(models, sizes);
    if (config_.record_global_models) result_.global_trace.push_back(nn::Flatten(global_));
    std::vector<double> acc(config_.n);
    for (std::size_t i = 0; i < config_.n; ++i) acc[i] = Evaluate(global_, data_.clients[i].test);
    const std::size_t traffic = plan.participants.size() * global_.param_count();
    EndRound(plan, std::move(acc), traffic, traffic, true);
  }

  void RunLocalOnlyRound() {
    RoundPlan plan{round_, {}};
    for (std::size_t i = 0; i < config_.n; ++i) plan.participants.push_back(i);
    auto trained = TrainParticipants(plan, client_models_);
    client_models_ = std::move(trained);
    EndRound(plan, EvaluateClients(), 0, 0, false);
  }

  // Extractors are FedAvg-averaged; classifiers never leave the client.
  void RunFedPerRound() {
    const RoundPlan plan = NextPlan();
    const std::size_t m = plan.participants.size();
    std::vector<nn::Model> start(m);
    for (std::size_t k = 0; k < m; ++k) {
      start[k] = nn::Model::Compose(global_.extractor(),
                                    client_models_[plan.participants[k]].classifier());
    }
    auto trained = TrainParticipants(plan, std::move(start));
    std::map<std::size_t, nn::Model> models;
    std::map<std::size_t, std::size_t> sizes;
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t i = plan.participants[k];
      client_models_[i] = trained[k];
      // Only the extractor is averaged; pair it with the global classifier so
      // FedAvgAggregate sees whole models.
      models.emplace(i, nn::Model::Compose(trained[k].extractor(), global_.classifier()));
      sizes.emplace(i, data_.clients[i].train.size());
    }
    global_.set_extractor(FedAvgAggregate(models, sizes).extractor());
    const std::size_t traffic = m * global_.extractor_param_count();
    EndRound(plan, EvaluateClients(), traffic, traffic, false);
  }

  std::vector<nn::Model> TrainParticipants(const RoundPlan& plan, std::vector<nn::Model> start) {
    const std::size_t m = plan.participants.size();
    auto work = [&](std::size_t k) {
      const std::size_t i = plan.participants[k];
      Rng rng(ClientShuffleSeed(seed_, i, plan.round));
      start[k] = nn::LocalTrain(std::move(start[k]), data_.clients[i].train,
                                config_.local_epochs, config_.batch_size, config_.lr, rng);
    };
    const std::size_t threads = std::min(config_.threads, m);
    if (threads <= 1) {
      for (std::size_t k = 0; k < m; ++k) work(k);
    } else {
      // Static striping; each slot is written by exactly one worker.
      std::vector<std::jthread> pool;
      std::vector<std::exception_ptr> errors(threads);
      for (std::size_t w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
          try {
            for (std::size_t k = w; k < m; k += threads) work(k);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
      pool.clear();
      for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
      }
    }
    return start;
  }

  std::vector<double> EvaluateClients() const {
    std::vector<double> acc(config_.n);
    for (std::size_t i = 0; i < config_.n; ++i) {
      acc[i] = Evaluate(client_models_[i], data_.clients[i].test);
    }
    return acc;
  }

  void EndRound(const RoundPlan& plan, std::vector<double> acc, std::size_t up, std::size_t down,
                bool generalization) {
    RoundMetrics row;
    row.round = plan.round;
    row.generalization = generalization;
    double mean = 0.0;
    for (double a : acc) mean += a;
    mean /= static_cast<double>(acc.size());
    double var = 0.0;
    for (double a : acc) var += (a - mean) * (a - mean);
    row.mean_accuracy = mean;
    row.std_accuracy = std::sqrt(var / static_cast<double>(acc.size()));
    row.uploaded = up;
    row.downloaded = down;
    row.participants = plan.participants;
    row.client_accuracy = std::move(acc);
    result_.ledger.Record(up, down);
    result_.rounds.push_back(std::move(row));
    ++round_;
  }

  FederationConfig config_;
  const data::PartitionedDataset& data_;
  std::uint64_t seed_;
  Rng sampler_;
  nn::Model global_;
  std::vector<nn::Model> client_models_;
  bool personalizing_ = false;
  std::size_t round_ = 0;
  RunResult result_;
};

inline RunResult RunExperiment(const FederationConfig& config,
                               const data::PartitionedDataset& data, std::uint64_t seed) {
  return Simulation(config, data, seed).Run();
}

}  // namespace pfedsim::federation
