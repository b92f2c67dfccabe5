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

// Command-line front end.
//
//   pfedsim run --config cfg.json [--seed N] [--out DIR] [overrides]
//   pfedsim preset <name> [--config cfg.json] [--seed N] [--out DIR] [overrides]
//
// Overrides: --algo, --rho, --alpha, --rounds, --join-ratio, --local-epochs.
// Without --out, output goes under $PFEDSIM_OUTPUT_ROOT when set, else under
// the config's output_dir.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "pfedsim/harness.hpp"

namespace {

using pfedsim::harness::ExperimentConfig;
namespace fs = std::filesystem;

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> algo;
  std::optional<double> rho;
  std::optional<double> alpha;
  std::optional<std::size_t> rounds;
  std::optional<double> join_ratio;
  std::optional<std::size_t> local_epochs;
  std::optional<std::size_t> threads;
};

void AddCommon(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--seed", o.seed, "Run a single seed instead of the config's seed list");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--algo", o.algo, "fedavg|pfedsim|local|fedper");
  cmd->add_option("--rho", o.rho, "Generalization ratio in [0, 1]");
  cmd->add_option("--alpha", o.alpha, "Dirichlet concentration");
  cmd->add_option("--rounds", o.rounds, "Communication rounds T");
  cmd->add_option("--join-ratio", o.join_ratio, "Fraction of clients per round");
  cmd->add_option("--local-epochs", o.local_epochs, "Local epochs E");
  cmd->add_option("--threads", o.threads, "Worker threads for client training");
}

ExperimentConfig LoadConfig(const CommonOptions& o) {
  ExperimentConfig c;
  if (!o.config_path.empty()) {
    c = pfedsim::harness::ParseConfig(pfedsim::harness::ReadFile(o.config_path));
  }
  auto& f = c.federation;
  if (o.seed) c.seeds = {*o.seed};
  if (o.algo) {
    const auto a = pfedsim::federation::ParseAlgorithm(*o.algo);
    if (!a) throw pfedsim::UsageError("--algo must be fedavg|pfedsim|local|fedper");
    f.algorithm = *a;
  }
  if (o.rho) f.rho = *o.rho;
  if (o.alpha) c.partition.alpha = *o.alpha;
  if (o.rounds) f.rounds = *o.rounds;
  if (o.join_ratio) f.join_ratio = *o.join_ratio;
  if (o.local_epochs) f.local_epochs = *o.local_epochs;
  if (o.threads) f.threads = *o.threads;
  pfedsim::harness::ValidateConfig(c);
  return c;
}

fs::path OutputDir(const CommonOptions& o, const ExperimentConfig& c, const std::string& leaf) {
  if (o.out) return *o.out;
  if (const char* root = std::getenv("PFEDSIM_OUTPUT_ROOT"); root && *root) {
    return fs::path(root) / leaf;
  }
  return fs::path(c.output_dir) / leaf;
}

int ExitCode(const std::string& category) {
  if (category == "usage") return 2;
  if (category == "config") return 3;
  if (category == "io") return 4;
  return 5;
}

int RunCommand(const CommonOptions& o) {
  const auto c = LoadConfig(o);
  const fs::path out = OutputDir(o, c, "run");
  for (auto seed : c.seeds) {
    const auto part = pfedsim::harness::BuildPartition(c, seed);
    const auto report = pfedsim::harness::RunOne(c, part, seed);
    const fs::path dir = out / ("seed_" + std::to_string(seed));
    pfedsim::harness::WriteReport(report, dir);
    std::printf("%s seed=%llu rounds=%zu generalization_rounds=%zu final_mean_acc=%.4f "
                "elapsed=%.2fs -> %s\n",
                std::string(pfedsim::federation::AlgorithmName(report.run.algorithm)).c_str(),
                static_cast<unsigned long long>(seed), report.run.rounds.size(),
                report.run.generalization_rounds, report.run.rounds.back().mean_accuracy,
                report.elapsed_seconds, dir.string().c_str());
  }
  return 0;
}

int PresetCommand(const std::string& name, const CommonOptions& o) {
  const auto c = LoadConfig(o);
  const fs::path out = OutputDir(o, c, name);
  const auto start = std::chrono::steady_clock::now();
  pfedsim::harness::RunPreset(name, c, out);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("preset %s done in %.2fs -> %s\n", name.c_str(), secs, out.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Personalized federated learning simulator"};
  app.require_subcommand(1);

  CommonOptions run_opts;
  auto* run = app.add_subcommand("run", "Run one algorithm over the config's seeds");
  run->add_option("--config", run_opts.config_path, "JSON config file")->required();
  AddCommon(run, run_opts);

  CommonOptions preset_opts;
  std::string preset_name;
  auto* preset = app.add_subcommand("preset", "Run a named experiment preset");
  preset->add_option("name", preset_name,
                     "cka-layers|shard-similarity|metric-compare|main-table|rho-sweep|comm-audit")
      ->required();
  preset->add_option("--config", preset_opts.config_path, "JSON config file");
  AddCommon(preset, preset_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "error [usage]: " << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    if (run->parsed()) return RunCommand(run_opts);
    return PresetCommand(preset_name, preset_opts);
  } catch (const pfedsim::Error& e) {
    std::cerr << "error [" << e.category() << "]: " << e.what() << '\n';
    return ExitCode(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error [internal]: " << e.what() << '\n';
    return 5;
  }
}
