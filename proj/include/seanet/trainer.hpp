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

// Alternating two-phase training.
//
// Even epochs (0, 2, ...) update CDP and TS parameters with symbols held
// fixed; odd epochs update only the symbols, by the gradient that reaches the
// CDP input. Each batch draws a negative-sampling probability p ~ U[0,1] and
// pairs every sample with a wrong class's symbol with probability p. Symbols
// are perturbed by U[-a, a] noise per element in both phases and never at
// evaluation.

#ifndef SEANET_TRAINER_HPP_
#define SEANET_TRAINER_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seanet/common.hpp"
#include "seanet/csv.hpp"
#include "seanet/data_io.hpp"
#include "seanet/gated_net.hpp"
#include "seanet/grad_core.hpp"

namespace seanet {

enum class Optimizer : std::uint8_t { kSgd = 0, kAdam = 1 };

struct TrainConfig {
  std::uint32_t epochs = 2000;
  double lr_net = 1e-4;
  double lr_symbol = 1e-4;
  double noise_amp = 0.1;
  std::uint32_t batch_size = 64;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::kSgd;
  // False for predefined symbols (e.g. word vectors): network phase only.
  bool train_symbols = true;
  // Test accuracy is recorded every `eval_every` epochs (0 disables).
  std::uint32_t eval_every = 1;

  void validate() const {
    if (train_symbols && epochs < 2) {
      throw ValidationError("epochs must be >= 2 to run both phases");
    }
    if (epochs == 0) throw ValidationError("epochs must be >= 1");
    if (!(lr_net >= 0.0) || !(lr_symbol >= 0.0)) {
      throw ValidationError("learning rates must be >= 0");
    }
    if (!(noise_amp >= 0.0)) throw ValidationError("noise_amp must be >= 0");
    if (batch_size == 0) throw ValidationError("batch_size must be > 0");
  }
};

struct NegativeSamplingPolicy {
  double p = 0.5;

  static NegativeSamplingPolicy draw(Rng& rng) { return {uniform(rng, 0.0, 1.0)}; }
};

struct LabeledPair {
  Index row = 0;            // sample in the dataset
  ClassId true_class = 0;
  ClassId symbol_class = 0;  // class whose symbol is fed
  Symbol symbol;             // pre-noise
  Decision target = Decision::kYes;
};

// Pairs each row with its own symbol, or with probability p with a symbol
// drawn uniformly from the other classes in the bank.
inline std::vector<LabeledPair> make_batch(const DatasetView& data, std::span<const Index> rows,
                                           const SymbolBank& bank, NegativeSamplingPolicy policy,
                                           Rng& rng) {
  if (!(policy.p >= 0.0 && policy.p <= 1.0)) {
    throw ValidationError("negative sampling probability outside [0,1]");
  }
  const auto ids = bank.ids();
  std::vector<LabeledPair> out;
  out.reserve(rows.size());
  for (auto row : rows) {
    const ClassId truth = data.label(row);
    if (!bank.contains(truth)) {
      throw ValidationError("class " + std::to_string(truth) + " missing from symbol bank");
    }
    LabeledPair pair;
    pair.row = row;
    pair.true_class = truth;
    pair.symbol_class = truth;
    const bool flip = uniform(rng, 0.0, 1.0) < policy.p;
    if (flip && ids.size() > 1) {
      std::size_t pick = uniform_index(rng, ids.size() - 1);
      // Skip over the true class so the draw is uniform over the others.
      const auto true_pos = static_cast<std::size_t>(
          std::lower_bound(ids.begin(), ids.end(), truth) - ids.begin());
      if (pick >= true_pos) ++pick;
      pair.symbol_class = ids[pick];
    }
    pair.target = pair.symbol_class == truth ? Decision::kYes : Decision::kNo;
    pair.symbol = bank.at(pair.symbol_class);
    out.push_back(std::move(pair));
  }
  return out;
}

inline Symbol inject_noise(const Symbol& symbol, double noise_amp, Rng& rng) {
  if (!(noise_amp >= 0.0)) throw ValidationError("noise_amp must be >= 0");
  if (noise_amp == 0.0) return symbol;
  Symbol out = symbol;
  for (Index i = 0; i < out.size(); ++i) out[i] += uniform(rng, -noise_amp, noise_amp);
  return out;
}

// Optimizer memory that persists across epochs.
struct OptimizerState {
  std::optional<AdamState> cdp;
  std::optional<AdamState> ts;
  std::map<ClassId, AdamState> symbols;
};

struct EpochStats {
  double mean_loss = 0.0;
  double accuracy = 0.0;  // fraction of training pairs decided correctly
  std::size_t samples = 0;
};

enum class Phase : std::uint8_t { kNetwork = 0, kSymbol = 1 };

inline const char* phase_name(Phase p) { return p == Phase::kNetwork ? "network" : "symbol"; }

namespace detail {

struct BatchResult {
  LossAndGrad loss;
  SeaBatchGradients grads;
  std::size_t correct = 0;
};

inline BatchResult run_batch(const Agent& agent, const DatasetView& data,
                             const std::vector<LabeledPair>& pairs, double noise_amp, Rng& rng) {
  const Index b = static_cast<Index>(pairs.size());
  Matrix symbols(agent.symbol_len(), b);
  Matrix features(agent.feature_dim(), b);
  std::vector<Decision> targets;
  targets.reserve(pairs.size());
  for (Index i = 0; i < b; ++i) {
    const auto& p = pairs[static_cast<std::size_t>(i)];
    symbols.col(i) = inject_noise(p.symbol, noise_amp, rng);
    features.col(i) = data.feature(p.row);
    targets.push_back(p.target);
  }
  auto fwd = sea_forward_batch(agent, symbols, features);
  BatchResult r;
  r.loss = cross_entropy(fwd.logits, targets);
  for (Index i = 0; i < b; ++i) {
    if (decide(fwd.logits.col(i)) == targets[static_cast<std::size_t>(i)]) ++r.correct;
  }
  r.grads = sea_backward_batch(agent, fwd.tape, r.loss.grad);
  return r;
}

template <typename StepFn>
EpochStats run_epoch(Agent& agent, const DatasetView& data, const TrainConfig& config, Rng& rng,
                     Phase phase, StepFn&& step) {
  config.validate();
  std::vector<Index> rows = data.rows_in(Partition::kTrain);
  if (rows.empty()) throw ValidationError("no training rows in dataset view");
  std::shuffle(rows.begin(), rows.end(), rng);
  EpochStats stats;
  double loss_sum = 0.0;
  std::size_t correct = 0;
  std::size_t batch_index = 0;
  for (std::size_t start = 0; start < rows.size(); start += config.batch_size, ++batch_index) {
    const std::size_t end = std::min(rows.size(), start + config.batch_size);
    const std::span<const Index> batch_rows(rows.data() + start, end - start);
    const auto policy = NegativeSamplingPolicy::draw(rng);
    const auto pairs = make_batch(data, batch_rows, agent.bank, policy, rng);
    auto r = run_batch(agent, data, pairs, config.noise_amp, rng);
    if (!std::isfinite(r.loss.loss)) {
      throw NumericError(std::string(phase_name(phase)) + " phase: non-finite loss in batch " +
                         std::to_string(batch_index) + " (p=" + format_double(policy.p) + ")");
    }
    loss_sum += r.loss.loss;
    correct += r.correct;
    stats.samples += pairs.size();
    step(pairs, r.grads, 1.0 / static_cast<double>(pairs.size()));
  }
  stats.mean_loss = loss_sum / static_cast<double>(stats.samples);
  stats.accuracy = static_cast<double>(correct) / static_cast<double>(stats.samples);
  return stats;
}

}  // namespace detail

// Updates CDP and TS parameters; the symbol bank is left bit-identical.
inline EpochStats network_phase_epoch(Agent& agent, const DatasetView& data,
                                      const TrainConfig& config, Rng& rng,
                                      OptimizerState& state) {
  return detail::run_epoch(
      agent, data, config, rng, Phase::kNetwork,
      [&](const std::vector<LabeledPair>&, SeaBatchGradients& g, double scale) {
        g.cdp *= scale;
        g.ts *= scale;
        if (config.optimizer == Optimizer::kAdam) {
          if (!state.cdp) state.cdp = AdamState::for_network(agent.cdp.layers);
          if (!state.ts) state.ts = AdamState::for_network(agent.ts.layers);
          adam_step(*state.cdp, agent.cdp.layers, g.cdp, config.lr_net);
          adam_step(*state.ts, agent.ts.layers, g.ts, config.lr_net);
        } else {
          sgd_step(agent.cdp.layers, g.cdp, config.lr_net);
          sgd_step(agent.ts.layers, g.ts, config.lr_net);
        }
      });
}

inline EpochStats network_phase_epoch(Agent& agent, const DatasetView& data,
                                      const TrainConfig& config, Rng& rng) {
  OptimizerState state;
  return network_phase_epoch(agent, data, config, rng, state);
}

// Updates only the symbols actually fed in each batch (true or false);
// network parameters are left bit-identical.
inline EpochStats symbol_phase_epoch(Agent& agent, const DatasetView& data,
                                     const TrainConfig& config, Rng& rng, OptimizerState& state) {
  return detail::run_epoch(
      agent, data, config, rng, Phase::kSymbol,
      [&](const std::vector<LabeledPair>& pairs, SeaBatchGradients& g, double scale) {
        std::map<ClassId, Vector> per_class;
        for (std::size_t i = 0; i < pairs.size(); ++i) {
          const auto id = pairs[i].symbol_class;
          auto col = g.symbols.col(static_cast<Index>(i));
          auto [it, inserted] = per_class.try_emplace(id, col);
          if (!inserted) it->second += col;
        }
        for (auto& [id, grad] : per_class) {
          grad *= scale;
          Symbol& s = agent.bank.at(id);
          if (config.optimizer == Optimizer::kAdam) {
            auto [it, _] = state.symbols.try_emplace(id, AdamState::for_vector(s.size()));
            adam_step(it->second, s, grad, config.lr_symbol);
          } else {
            sgd_step(s, grad, config.lr_symbol);
          }
          if (!s.allFinite()) {
            throw NumericError("symbol for class " + std::to_string(id) + " became non-finite");
          }
        }
      });
}

inline EpochStats symbol_phase_epoch(Agent& agent, const DatasetView& data,
                                     const TrainConfig& config, Rng& rng) {
  OptimizerState state;
  return symbol_phase_epoch(agent, data, config, rng, state);
}

// Balanced accuracy (mean of TPR and TNR) of Yes/No decisions on the test
// rows of `data` when every sample is fed `symbol`: members of `class_id`
// should be accepted, everything else rejected. No noise is applied.
inline double evaluate_symbol(const Agent& agent, const DatasetView& data, ClassId class_id,
                              const Symbol& symbol) {
  const auto rows = data.rows_in(Partition::kTest);
  Matrix features(agent.feature_dim(), static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    features.col(static_cast<Index>(i)) = data.feature(rows[i]);
  }
  std::size_t pos = 0, neg = 0, tp = 0, tn = 0;
  const Matrix logits = sea_logits(agent, symbol, features);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const bool yes = decide(logits.col(static_cast<Index>(i))) == Decision::kYes;
    if (data.label(rows[i]) == class_id) {
      ++pos;
      tp += yes;
    } else {
      ++neg;
      tn += !yes;
    }
  }
  if (pos == 0 || neg == 0) {
    throw ValidationError("test partition needs both members and non-members of class " +
                          std::to_string(class_id));
  }
  return 0.5 * (static_cast<double>(tp) / static_cast<double>(pos) +
                static_cast<double>(tn) / static_cast<double>(neg));
}

inline double evaluate(const Agent& agent, const DatasetView& data, ClassId class_id) {
  return evaluate_symbol(agent, data, class_id, agent.bank.at(class_id));
}

// Per-class balanced accuracy for every class of `data` present in the bank.
inline std::map<ClassId, double> evaluate_all(const Agent& agent, const DatasetView& data) {
  std::map<ClassId, double> out;
  for (auto c : data.classes()) {
    if (agent.bank.contains(c)) out[c] = evaluate(agent, data, c);
  }
  return out;
}

inline double mean_accuracy(const std::map<ClassId, double>& acc) {
  if (acc.empty()) return 0.0;
  double s = 0.0;
  for (const auto& [_, a] : acc) s += a;
  return s / static_cast<double>(acc.size());
}

struct EpochRecord {
  std::uint32_t epoch = 0;
  Phase phase = Phase::kNetwork;
  double loss = 0.0;
  double train_acc = 0.0;
  std::optional<double> test_acc;
};

struct TrainResult {
  std::vector<EpochRecord> history;
};

// Gives every class of `data` missing from the bank a fresh random symbol.
inline void seed_missing_symbols(Agent& agent, const DatasetView& data, Rng& rng) {
  for (auto c : data.classes()) {
    if (!agent.bank.contains(c)) {
      agent.bank.set(c, uniform_vector(rng, agent.symbol_len(), -1.0, 1.0));
    }
  }
}

// Called after every epoch with the agent as it stands.
using EpochObserver = std::function<void(const EpochRecord&, const Agent&)>;

// Alternates network and symbol epochs, starting with the network phase.
// Test accuracy is the mean per-class balanced accuracy over the test rows
// of `data`.
inline TrainResult train(Agent& agent, const DatasetView& data, const TrainConfig& config,
                         const EpochObserver& observe = {}) {
  config.validate();
  agent.validate();
  Rng rng(config.seed);
  seed_missing_symbols(agent, data, rng);
  OptimizerState state;
  TrainResult result;
  result.history.reserve(config.epochs);
  for (std::uint32_t e = 0; e < config.epochs; ++e) {
    const Phase phase =
        (config.train_symbols && e % 2 == 1) ? Phase::kSymbol : Phase::kNetwork;
    const EpochStats stats = phase == Phase::kNetwork
                                 ? network_phase_epoch(agent, data, config, rng, state)
                                 : symbol_phase_epoch(agent, data, config, rng, state);
    EpochRecord rec{e, phase, stats.mean_loss, stats.accuracy, std::nullopt};
    const bool last = e + 1 == config.epochs;
    if (config.eval_every != 0 && ((e + 1) % config.eval_every == 0 || last)) {
      rec.test_acc = mean_accuracy(evaluate_all(agent, data));
    }
    if (observe) observe(rec, agent);
    result.history.push_back(rec);
  }
  return result;
}

inline CsvTable history_csv(const TrainResult& result) {
  CsvTable t({"epoch", "phase", "loss", "train_acc", "test_acc"});
  for (const auto& r : result.history) {
    CsvTable::Row row;
    row << r.epoch << phase_name(r.phase) << r.loss << r.train_acc
        << (r.test_acc ? format_double(*r.test_acc) : std::string());
    t.add(row);
  }
  return t;
}

}  // namespace seanet

#endif  // SEANET_TRAINER_HPP_
