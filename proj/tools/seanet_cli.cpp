// Copyright 2026 The seanet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Command-line front end. One subcommand per pipeline:
//
//   seanet <gendata|train|infer|communicate|analyze|wordvec>
//          [--config PATH] [--seed N] [--out DIR] [--threads N]
//
// Exit status: 0 success, 1 validation failure, 2 runtime failure.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "seanet/experiment.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw seanet::ConfigError("--config", "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Symbol-gated networks: training, inference, communication, analysis"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  std::uint32_t threads = 1;
  for (auto kind : {seanet::ExperimentKind::kGendata, seanet::ExperimentKind::kTrain,
                    seanet::ExperimentKind::kInfer, seanet::ExperimentKind::kCommunicate,
                    seanet::ExperimentKind::kAnalyze, seanet::ExperimentKind::kWordvec}) {
    auto* sub = app.add_subcommand(seanet::kind_name(kind));
    sub->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "master seed (overrides the config)");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--threads", threads, "worker threads for independent rounds")
        ->check(CLI::Range(1u, 1024u));
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  const auto kind = seanet::parse_kind(app.get_subcommands().front()->get_name());

  seanet::ExperimentConfig config;
  try {
    config = seanet::parse_config(config_path.empty() ? "" : read_file(config_path), kind);
    if (seed) config.seed = *seed;
    config.out_dir = out_dir;
    config.threads = threads;
  } catch (const std::exception& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return 1;
  }
  try {
    const auto summary = seanet::run(config);
    std::cout << summary.to_json().dump(2) << "\n";
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
  return 0;
}
