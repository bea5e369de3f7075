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


// Acceptance suite. Prints one PASS/FAIL line per criterion with the measured
// value, the threshold and the wall time, and exits non-zero on any failure.
//
// Shared desk-scale world: 10 classes in 5 superclasses, F = 32, 200 train and
// 100 test samples per class. Agents use L = 20, gated widths [32, 16, 8] and
// Adam at 1e-3 for 400 alternating epochs.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "../fd_check.hpp"
#include "seanet/seanet.hpp"

namespace {

using namespace seanet;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail, double seconds) {
  std::printf("[%s] C%-2d %-28s %s (%.1f s)\n", ok ? "PASS" : "FAIL", id, name.c_str(),
              detail.c_str(), seconds);
  std::fflush(stdout);
  if (!ok) ++failures;
}

double since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

// Runs `body`, turning an escaped exception into a failed criterion.
void criterion(int id, const std::string& name, const std::function<void(Clock::time_point)>& body) {
  const auto t0 = Clock::now();
  try {
    body(t0);
  } catch (const std::exception& e) {
    report(id, name, false, std::string("threw: ") + e.what(), since(t0));
  }
}

SyntheticSpec world_spec() {
  SyntheticSpec s;
  s.classes = 10;
  s.dim = 32;
  s.train_per_class = 200;
  s.test_per_class = 100;
  s.superclasses = 5;
  s.spread = 0.3;
  s.sub_offset = 0.5;
  s.seed = 1;
  return s;
}

Geometry agent_geometry() {
  Geometry g;
  g.symbol_len = 20;
  g.widths = {32, 16, 8};
  return g;
}

TrainConfig desk_training() {
  TrainConfig t;
  t.epochs = 400;
  t.optimizer = Optimizer::kAdam;
  t.lr_net = 1e-3;
  t.lr_symbol = 1e-3;
  t.eval_every = 0;
  return t;
}

constexpr std::uint64_t kSpeakerSeed = 999;

struct Shared {
  FeatureDataset world;
  Agent speaker;
  double speaker_seconds = 0.0;
  std::vector<Agent> listeners;  // listeners[h] never saw class h
  double listener_seconds = 0.0;
  std::vector<double> infer_medians;
};

// --- 1 ----------------------------------------------------------------------
void gradient_correctness() {
  criterion(1, "gradient correctness", [](Clock::time_point t0) {
    Geometry g;
    g.symbol_len = 8;
    g.widths = {16, 8, 4};
    std::size_t checked = 0, failed = 0;
    double worst = 0.0;
    std::string first;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      Rng rng(seed);
      const Agent a = make_agent(g, rng);
      const Vector s = uniform_vector(rng, 8, -1, 1);
      const Vector x = uniform_vector(rng, 16, -1, 1);
      const auto r = testing::fd_check_agent(a, s, x, seed % 2 ? Decision::kYes : Decision::kNo);
      checked += r.checked;
      failed += r.failures;
      worst = std::max(worst, r.worst_rel);
      if (first.empty() && r.failures) first = r.first_failure;
    }
    const double t = since(t0);
    report(1, "gradient correctness", failed == 0 && t < 30.0,
           fmt("%.0f components, %.0f mismatches, worst rel %.2e; need 0 and < 30 s",
               static_cast<double>(checked), static_cast<double>(failed), worst) +
               (first.empty() ? "" : " first: " + first),
           t);
  });
}

// --- 2 ----------------------------------------------------------------------
void gating_identities() {
  criterion(2, "gating identities", [](Clock::time_point t0) {
    int ones_bad = 0, zero_bad = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      Rng rng(seed);
      const Agent a = make_agent(agent_geometry(), rng);
      const Matrix x = Matrix::Random(32, 5);
      std::vector<Matrix> ones{Matrix::Ones(32, 5), Matrix::Ones(16, 5), Matrix::Ones(8, 5)};
      if (sea_forward_with_gains(a, x, ones).logits != forward_batch(a.ts.layers, x).output) {
        ++ones_bad;
      }
      std::vector<Matrix> gains{Matrix::Constant(32, 5, 0.4), Matrix::Constant(16, 5, 0.9),
                                Matrix::Zero(8, 5)};
      const Matrix logits = sea_forward_with_gains(a, x, gains).logits;
      for (Index c = 0; c < logits.cols(); ++c) {
        if (Vector(logits.col(c)) != a.ts.layers.back().biases) ++zero_bad;
      }
    }
    const double t = since(t0);
    report(2, "gating identities", ones_bad == 0 && zero_bad == 0 && t < 1.0,
           fmt("all-ones mismatches %.0f/100, zero-gain mismatches %.0f/500; need 0 and < 1 s",
               ones_bad, zero_bad),
           t);
  });
}

// --- 3 and 4 ----------------------------------------------------------------
void two_phase_training(Shared& sh) {
  std::size_t bank_changes = 0, param_changes = 0, epochs_seen = 0;
  criterion(3, "two-phase training", [&](Clock::time_point t0) {
    sh.world = generate_synthetic(world_spec());
    const DatasetView all(sh.world);
    Rng init(derive_seed(kSpeakerSeed, streams::kAgentInit));
    Agent agent = make_agent(agent_geometry(), init);
    TrainConfig cfg = desk_training();
    cfg.seed = derive_seed(kSpeakerSeed, streams::kTrain);
    Agent prev;
    bool have_prev = false;
    train(agent, all, cfg, [&](const EpochRecord& rec, const Agent& now) {
      if (have_prev) {
        if (rec.phase == Phase::kNetwork && !(now.bank == prev.bank)) ++bank_changes;
        if (rec.phase == Phase::kSymbol && !same_parameters(now, prev)) ++param_changes;
      }
      ++epochs_seen;
      prev = now;
      have_prev = true;
    });
    sh.speaker = std::move(agent);
    sh.speaker_seconds = since(t0);
    const double acc = mean_accuracy(evaluate_all(sh.speaker, all));
    const double t = since(t0);
    report(3, "two-phase training", acc >= 0.90 && t < 120.0,
           fmt("mean balanced test accuracy %.4f; need >= 0.90 and < 120 s", acc), t);
  });
  criterion(4, "phase isolation", [&](Clock::time_point t0) {
    report(4, "phase isolation", epochs_seen == 400 && bank_changes == 0 && param_changes == 0,
           fmt("%.0f epochs; bank changed in %.0f network epochs, parameters in %.0f symbol "
               "epochs; need 0",
               static_cast<double>(epochs_seen), static_cast<double>(bank_changes),
               static_cast<double>(param_changes)),
           since(t0));
  });
}

// --- 5 ----------------------------------------------------------------------
void symbolic_inference(Shared& sh) {
  criterion(5, "symbolic inference", [&](Clock::time_point t0) {
    InferSettings settings;  // alpha 0.5, beta 0.001, tau 0.01, lr 0.01, 2 new images
    settings.realizations = 10;
    for (ClassId h = 0; h < 10; ++h) {
      const auto t1 = Clock::now();
      const auto sp = split(sh.world, h);
      sh.listeners.push_back(train_new_agent(agent_geometry(), sp.learned, desk_training(), h));
      sh.listener_seconds += since(t1);
      Rng rng(derive_seed(h, streams::kRounds));
      sh.infer_medians.push_back(
          median(infer_realizations(sh.listeners.back(), sh.world, h, settings, rng)));
    }
    const double m = mean(sh.infer_medians);
    const double t = since(t0);
    std::string per;
    for (double v : sh.infer_medians) per += fmt(" %.2f", v);
    report(5, "symbolic inference", m >= 0.65 && t < 300.0,
           fmt("mean of per-holdout medians %.4f; need >= 0.65 and < 300 s;", m) + per, t);
  });
}

// --- 6 ----------------------------------------------------------------------
void loss_oracles() {
  criterion(6, "repelling/combined oracles", [](Clock::time_point t0) {
    double worst_rep = 0.0, worst_sum = 0.0;
    Rng rng(6);
    for (int trial = 0; trial < 1000; ++trial) {
      const Index len = 20;
      SymbolBank bank(len);
      const int k = 1 + trial % 9;
      for (int c = 0; c < k; ++c) bank.set(static_cast<ClassId>(c), uniform_vector(rng, len, -0.1, 0.1));
      const Vector s = uniform_vector(rng, len, -0.1, 0.1);
      const double tau = 0.01;
      long double direct = 0.0L;
      for (const auto& [id, a] : bank) {
        long double d2 = 0.0L;
        for (Index i = 0; i < len; ++i) {
          const long double d = static_cast<long double>(a[i]) - s[i];
          d2 += d * d;
        }
        direct += std::exp(-d2 / tau);
      }
      worst_rep = std::max(worst_rep,
                           std::abs(repelling_loss(s, bank, tau) - static_cast<double>(direct)));
    }
    Geometry g;
    g.symbol_len = 8;
    g.widths = {6, 5, 3};
    SyntheticSpec spec;
    spec.classes = 4;
    spec.dim = 6;
    spec.train_per_class = 10;
    spec.test_per_class = 2;
    const auto data = generate_synthetic(spec);
    const std::vector<ClassId> learned{0, 1, 2};
    for (int trial = 0; trial < 1000; ++trial) {
      Agent a = make_agent(g, rng);
      a.bank = random_bank(learned, 8, rng);
      const auto shot = draw_few_shot(DatasetView(data), 3, learned, rng);
      SymbolicHyper h;
      h.tau = 0.5;
      const Vector s = uniform_vector(rng, 8, -1, 1);
      const auto l = combined_loss(a, s, shot, a.bank, h);
      const double ce_new = cross_entropy(sea_logits(a, s, shot.new_images),
                                          std::vector<Decision>(2, Decision::kYes)).loss / 2.0;
      double ce_old = 0.0;
      for (Index c = 0; c < shot.old_exemplars.cols(); ++c) {
        const Decision no[1] = {Decision::kNo};
        ce_old += cross_entropy(sea_logits(a, s, shot.old_exemplars.col(c)), no).loss;
      }
      ce_old /= static_cast<double>(shot.old_exemplars.cols());
      const double rep = repelling_loss(s, a.bank, h.tau);
      worst_sum = std::max(worst_sum,
                           std::abs(l.total - (ce_new + h.alpha * ce_old + h.beta * rep)));
    }
    report(6, "repelling/combined oracles", worst_rep <= 1e-12 && worst_sum <= 1e-12,
           fmt("repelling max err %.2e, combined max err %.2e; need <= 1e-12", worst_rep,
               worst_sum),
           since(t0));
  });
}

// --- 7 and 8 ----------------------------------------------------------------
void communication_game(Shared& sh) {
  std::vector<double> game_acc;
  criterion(7, "communication game", [&](Clock::time_point t0) {
    if (sh.listeners.size() != 10) throw Error("listeners missing (criterion 5 failed early)");
    const DatasetView all(sh.world);
    SymbolicHyper extend;  // 1000 epochs per variant
    Rng xr(derive_seed(kSpeakerSeed, streams::kSpeakerExtend));
    const auto sets = speaker_symbol_sets(sh.speaker, all, 9, extend, xr);
    TISchedule schedule;  // lr 1e-4 halved every 10 epochs, 200 epochs
    schedule.batch_size = 32;
    int wins = 0;
    std::string per;
    for (ClassId h = 0; h < 10; ++h) {
      const auto sp = split(sh.world, h);
      Rng rng(derive_seed(kSpeakerSeed, streams::kRounds + h));
      TIModule ti = build_ti(20, rng);  // 10 x 500, dropout 0.3
      const auto shared = sp.learned.classes();
      const auto pairs = translation_pairs(sets, sh.listeners[h].bank, shared);
      train_ti(ti, pairs, schedule, rng);
      const auto out = run_game(sh.speaker, sh.listeners[h], ti, h, all, rng);
      game_acc.push_back(out.accuracy);
      wins += out.accuracy > out.control_accuracy;
      per += fmt(" %.2f/%.2f", out.accuracy, out.control_accuracy);
    }
    const double t = since(t0) + sh.speaker_seconds + sh.listener_seconds;
    report(7, "communication game", wins >= 8 && t < 600.0,
           fmt("translated beats control in %.0f/10 rounds; need >= 8 and < 600 s;", wins) + per,
           t);
  });
  criterion(8, "game/inference correlation", [&](Clock::time_point t0) {
    if (game_acc.size() != 10 || sh.infer_medians.size() != 10) {
      throw Error("per-class accuracies missing");
    }
    const double mg = mean(game_acc), mi = mean(sh.infer_medians);
    double num = 0, vg = 0, vi = 0;
    for (std::size_t i = 0; i < 10; ++i) {
      num += (game_acc[i] - mg) * (sh.infer_medians[i] - mi);
      vg += (game_acc[i] - mg) * (game_acc[i] - mg);
      vi += (sh.infer_medians[i] - mi) * (sh.infer_medians[i] - mi);
    }
    const double r = vg > 0 && vi > 0 ? num / std::sqrt(vg * vi) : 0.0;
    report(8, "game/inference correlation", r > 0.0,
           fmt("Pearson r %.4f over 10 holdouts; need > 0", r), since(t0));
  });
}

// --- 9 ----------------------------------------------------------------------
std::vector<Merge> brute_upgma(const DistanceMatrix& d) {
  std::map<Index, std::vector<Index>> clusters;
  for (Index i = 0; i < d.size(); ++i) clusters[i] = {i};
  std::vector<Merge> out;
  Index next = d.size();
  while (clusters.size() > 1) {
    double best = INFINITY;
    Index ba = -1, bb = -1;
    for (auto a = clusters.begin(); a != clusters.end(); ++a) {
      for (auto b = std::next(a); b != clusters.end(); ++b) {
        double sum = 0.0;
        for (auto i : a->second) {
          for (auto j : b->second) sum += d(i, j);
        }
        const double avg = sum / static_cast<double>(a->second.size() * b->second.size());
        if (avg < best) {
          best = avg;
          ba = a->first;
          bb = b->first;
        }
      }
    }
    auto merged = clusters[ba];
    merged.insert(merged.end(), clusters[bb].begin(), clusters[bb].end());
    out.push_back({ba, bb, best, static_cast<Index>(merged.size())});
    clusters.erase(ba);
    clusters.erase(bb);
    clusters[next++] = merged;
  }
  return out;
}

void clustering_oracles() {
  criterion(9, "UPGMA/cophenetic oracles", [](Clock::time_point t0) {
    Rng rng(9);
    int merge_bad = 0, ultra_bad = 0;
    double self_err = 0.0, pearson_err = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
      const Index n = 3 + trial % 5;
      DistanceMatrix d{Matrix::Zero(n, n)};
      for (Index i = 0; i < n; ++i) {
        for (Index j = i + 1; j < n; ++j) d.values(i, j) = d.values(j, i) = uniform(rng, 0.1, 10);
      }
      const auto dend = upgma(d);
      const auto want = brute_upgma(d);
      for (std::size_t k = 0; k < want.size(); ++k) {
        const auto& m = dend.merges[k];
        if (m.left != want[k].left || m.right != want[k].right ||
            std::abs(m.height - want[k].height) > 1e-12) {
          ++merge_bad;
          break;
        }
      }
      const auto t = cophenetic_distances(dend);
      for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
          for (Index k = 0; k < n; ++k) {
            if (t(i, j) > std::max(t(i, k), t(j, k)) + 1e-12) ++ultra_bad;
          }
        }
      }
      self_err = std::max(self_err, std::abs(cophenetic_correlation(t, t) - 1.0));
      long double sa = 0, sb = 0, sab = 0, saa = 0, sbb = 0, m = 0;
      for (Index i = 0; i < n; ++i) {
        for (Index j = i + 1; j < n; ++j) {
          const long double a = t(i, j), b = d(i, j);
          sa += a;
          sb += b;
          sab += a * b;
          saa += a * a;
          sbb += b * b;
          m += 1;
        }
      }
      const long double r = (m * sab - sa * sb) / std::sqrt((m * saa - sa * sa) * (m * sbb - sb * sb));
      pearson_err = std::max(pearson_err,
                             std::abs(cophenetic_correlation(t, d) - static_cast<double>(r)));
    }
    report(9, "UPGMA/cophenetic oracles",
           merge_bad == 0 && ultra_bad == 0 && self_err <= 1e-12 && pearson_err <= 1e-12,
           fmt("merge mismatches %.0f/200, ultrametric violations %.0f, ", merge_bad, ultra_bad) +
               fmt("|c(t,t)-1| %.1e, Pearson err %.1e; need 0, 0, <= 1e-12, <= 1e-12", self_err,
                   pearson_err),
           since(t0));
  });
}

// --- 10 ---------------------------------------------------------------------
void shuffle_test(const Shared& sh) {
  criterion(10, "shuffle test", [&](Clock::time_point t0) {
    std::vector<Vector> symbols;
    for (const auto& [id, s] : sh.speaker.bank) symbols.push_back(s);
    if (symbols.size() != 10) throw Error("speaker bank missing");
    const auto reference = cosine_distance_matrix(symbols);
    Rng rng(derive_seed(kSpeakerSeed, streams::kShuffle));
    const auto r = shuffle_significance(symbols, reference, 1000, rng);
    const double q99 = r.null_quantile(0.99);
    const double t = since(t0);
    report(10, "shuffle test", r.observed > q99 && t < 120.0,
           fmt("observed c %.4f vs null 99th pct %.4f (p %.3f); need c > q99 and < 120 s",
               r.observed, q99, r.p_value()),
           t);
  });
}

// --- 11 ---------------------------------------------------------------------
void wordvec_pipeline() {
  criterion(11, "word-vector pipeline", [](Clock::time_point t0) {
    std::vector<std::string> names;
    for (int c = 0; c < 10; ++c) names.push_back("class_" + std::to_string(c));
    const auto table = make_standin_word_vectors(synthetic_class_means(world_spec()), 8, 0.05, 11);
    const auto bank = reduce_word_vectors(table, names, 8, 1.0);
    double iso = 0.0;
    for (ClassId i = 0; i < 10; ++i) {
      for (ClassId j = 0; j < 10; ++j) {
        iso = std::max(iso, std::abs((bank.at(i) - bank.at(j)).norm() -
                                     (table.at(names[i]) - table.at(names[j])).norm()));
      }
    }
    ExperimentConfig c;
    c.kind = ExperimentKind::kWordvec;
    c.seed = 11;
    c.synthetic = world_spec();
    c.symbol_len = 8;
    c.hidden = {16, 8};
    c.train = desk_training();
    c.rounds = 10;
    c.wordvec.target_dim = 8;
    c.out_dir = fs::temp_directory_path() / "seanet_acceptance_wordvec";
    const auto summary = run(c);
    const double med = summary.metrics.at("median_accuracy");
    const double t = since(t0);
    report(11, "word-vector pipeline", iso <= 1e-9 && med > 0.6 && t < 180.0,
           fmt("PCA distance err %.1e, holdout median accuracy %.4f; need <= 1e-9, > 0.6 and "
               "< 180 s",
               iso, med),
           t);
  });
}

// --- 12 ---------------------------------------------------------------------
bool rejects_at(const std::function<void()>& f, std::uint64_t offset) {
  try {
    f();
  } catch (const FormatError& e) {
    return e.offset() == offset;
  }
  return false;
}

void serialization(const Shared& sh) {
  criterion(12, "serialization", [&](Clock::time_point t0) {
    const auto dir = fs::temp_directory_path() / "seanet_acceptance_io";
    fs::create_directories(dir);
    save_features(sh.world, dir / "world.seaf");
    const auto world = load_features(dir / "world.seaf");
    const bool seaf_ok = world == sh.world && encode_features(world) == encode_features(sh.world);
    save_agent(sh.speaker, dir / "speaker.sea");
    const auto agent = load_agent(dir / "speaker.sea");
    const bool agent_ok = same_parameters(agent, sh.speaker) && agent.bank == sh.speaker.bank &&
                          encode_agent(agent) == encode_agent(sh.speaker);
    int located = 0;
    auto seaf = encode_features(sh.world);
    auto sea = encode_agent(sh.speaker);
    {
      auto b = seaf;
      b[0] = 'X';
      located += rejects_at([&] { decode_features(b); }, 0);
      b = seaf;
      b[100] ^= 0x10;
      located += rejects_at([&] { decode_features(b); }, b.size() - 4);
      b = sea;
      b[0] = 'X';
      located += rejects_at([&] { decode_agent(b); }, 0);
      b = sea;
      b[b.size() / 2] ^= 0x10;
      located += rejects_at([&] { decode_agent(b); }, b.size() - 4);
    }
    int truncated = 0;
    for (std::size_t cut : {std::size_t{3}, std::size_t{17}, seaf.size() / 2, seaf.size() - 1}) {
      try {
        decode_features(std::vector<std::uint8_t>(seaf.begin(), seaf.begin() + cut));
      } catch (const FormatError&) {
        ++truncated;
      }
    }
    for (std::size_t cut : {std::size_t{3}, std::size_t{17}, sea.size() / 2, sea.size() - 1}) {
      try {
        decode_agent(std::vector<std::uint8_t>(sea.begin(), sea.begin() + cut));
      } catch (const FormatError&) {
        ++truncated;
      }
    }
    report(12, "serialization", seaf_ok && agent_ok && located == 4 && truncated == 8,
           std::string("SEAF round trip ") + (seaf_ok ? "exact" : "DIFFERS") +
               ", agent round trip " + (agent_ok ? "exact" : "DIFFERS") +
               fmt(", located rejections %.0f/4, truncations rejected %.0f/8", located,
                   truncated),
           since(t0));
  });
}

// --- 13 ---------------------------------------------------------------------
std::map<std::string, std::string> csv_files(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() != ".csv") continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    out[e.path().filename().string()] = ss.str();
  }
  return out;
}

void determinism() {
  criterion(13, "CLI determinism", [](Clock::time_point t0) {
    const auto dir = fs::temp_directory_path() / "seanet_acceptance_cli";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto cfg = dir / "config.json";
    std::ofstream(cfg) << R"({
      "rounds": 2,
      "data": {"synthetic": {"classes": 4, "dim": 6, "train_per_class": 10,
                             "test_per_class": 5, "superclasses": 2, "seed": 5}},
      "agent": {"symbol_len": 4, "hidden": [6, 3]},
      "train": {"epochs": 6, "optimizer": "adam", "lr_net": 0.001, "lr_symbol": 0.001},
      "symbolic": {"epochs": 10, "realizations": 2},
      "comms": {"variants": 2, "ti": {"hidden_layers": 2, "width": 16, "epochs": 3}},
      "analyze": {"trials": 20},
      "wordvec": {"standin_dim": 6, "target_dim": 4}
    })";
    int identical = 0, total = 0;
    std::string bad;
    for (const char* kind : {"gendata", "train", "infer", "communicate", "analyze", "wordvec"}) {
      std::map<std::string, std::string> outputs[2];
      for (int rep = 0; rep < 2; ++rep) {
        const auto out = dir / (std::string(kind) + std::to_string(rep));
        const std::string cmd = std::string(SEANET_CLI_PATH) + " " + kind + " --config " +
                                cfg.string() + " --seed 42 --out " + out.string() +
                                " > /dev/null";
        if (std::system(cmd.c_str()) != 0) throw Error(std::string("cli failed for ") + kind);
        outputs[rep] = csv_files(out);
      }
      // gendata writes a binary dataset instead of CSV.
      if (std::string(kind) == "gendata") {
        std::ifstream a(dir / "gendata0" / "dataset.seaf", std::ios::binary);
        std::ifstream b(dir / "gendata1" / "dataset.seaf", std::ios::binary);
        std::ostringstream sa, sb;
        sa << a.rdbuf();
        sb << b.rdbuf();
        outputs[0]["dataset.seaf"] = sa.str();
        outputs[1]["dataset.seaf"] = sb.str();
      }
      for (const auto& [name, text] : outputs[0]) {
        ++total;
        auto it = outputs[1].find(name);
        if (it != outputs[1].end() && it->second == text) {
          ++identical;
        } else {
          bad += " " + std::string(kind) + "/" + name;
        }
      }
    }
    report(13, "CLI determinism", identical == total && total > 0,
           fmt("%.0f/%.0f output files byte-identical across repeated runs", identical, total) +
               bad,
           since(t0));
  });
}

}  // namespace

int main() {
  Shared sh;
  gradient_correctness();
  gating_identities();
  two_phase_training(sh);
  symbolic_inference(sh);
  loss_oracles();
  communication_game(sh);
  clustering_oracles();
  shuffle_test(sh);
  wordvec_pipeline();
  serialization(sh);
  determinism();
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
