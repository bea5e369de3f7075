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

// Learning by communication between two independently trained agents.
//
// A translator (TI) regresses speaker symbols onto listener symbols over the
// classes both agents know. The listener then identifies a class it was never
// trained on, guided only by the translated speaker symbol for that class.

#ifndef SEANET_COMMS_HPP_
#define SEANET_COMMS_HPP_

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "seanet/common.hpp"
#include "seanet/csv.hpp"
#include "seanet/data_io.hpp"
#include "seanet/gated_net.hpp"
#include "seanet/grad_core.hpp"
#include "seanet/symbolic.hpp"
#include "seanet/trainer.hpp"

namespace seanet {

struct TIGeometry {
  std::uint32_t hidden_layers = 10;
  Index width = 500;
  double dropout = 0.3;
};

struct TIModule {
  Network layers;  // ReLU hidden layers, identity output
  double dropout = 0.3;

  Index symbol_len() const { return layers.front().in_size(); }
};

// Hidden layers use He-uniform bounds (sqrt(6 / fan_in)) so activations keep
// their scale through the deep ReLU stack; the output layer uses
// 1/sqrt(fan_in).
inline TIModule build_ti(Index symbol_len, Rng& rng, const TIGeometry& geo = {}) {
  if (symbol_len <= 0) throw ValidationError("symbol length must be positive");
  if (geo.hidden_layers == 0 || geo.width <= 0) {
    throw ValidationError("translator needs at least one hidden layer");
  }
  if (!(geo.dropout >= 0.0 && geo.dropout < 1.0)) {
    throw ValidationError("dropout must lie in [0, 1)");
  }
  TIModule ti;
  ti.dropout = geo.dropout;
  Index in = symbol_len;
  for (std::uint32_t l = 0; l < geo.hidden_layers; ++l) {
    ti.layers.push_back(make_layer(in, geo.width, Activation::kReLU, rng, std::sqrt(6.0)));
    in = geo.width;
  }
  ti.layers.push_back(make_layer(in, symbol_len, Activation::kIdentity, rng));
  return ti;
}

// Training-mode pass: each hidden unit is dropped with probability `dropout`
// and survivors are scaled by 1 / (1 - dropout).
inline BatchForward ti_forward_train(const TIModule& ti, const Matrix& inputs, Rng& rng) {
  std::vector<Matrix> masks(ti.layers.size());
  if (ti.dropout > 0.0) {
    const double keep = 1.0 - ti.dropout;
    for (std::size_t l = 0; l + 1 < ti.layers.size(); ++l) {
      Matrix& m = masks[l];
      m.resize(ti.layers[l].out_size(), inputs.cols());
      for (Index c = 0; c < m.cols(); ++c) {
        for (Index r = 0; r < m.rows(); ++r) {
          m(r, c) = uniform(rng, 0.0, 1.0) < keep ? 1.0 / keep : 0.0;
        }
      }
    }
  }
  return forward_batch(ti.layers, inputs, masks, ForwardOptions{true});
}

// Inference mode: dropout off, deterministic.
inline Symbol translate(const TIModule& ti, const Symbol& s) {
  if (s.size() != ti.symbol_len()) {
    throw DimensionError("symbol length " + std::to_string(s.size()) +
                         " != translator width " + std::to_string(ti.symbol_len()));
  }
  return forward_batch(ti.layers, s).output.col(0);
}

inline Matrix translate_batch(const TIModule& ti, const Matrix& symbols) {
  return forward_batch(ti.layers, symbols).output;
}

struct TISchedule {
  double lr0 = 1e-4;
  double decay = 0.5;
  std::uint32_t decay_every = 10;
  std::uint32_t epochs = 200;
  std::uint32_t batch_size = 16;

  // Zero-based epoch: the rate is multiplied by `decay` at the start of epochs
  // decay_every, 2 * decay_every, ...
  double lr_at(std::uint32_t epoch) const {
    return lr0 * std::pow(decay, static_cast<double>(epoch / decay_every));
  }

  void validate() const {
    if (!(lr0 > 0.0) || !(decay > 0.0)) throw ValidationError("TI learning rate must stay > 0");
    if (decay_every == 0 || epochs == 0 || batch_size == 0) {
      throw ValidationError("TI schedule counts must be > 0");
    }
  }
};

struct TranslationPair {
  Symbol speaker;
  Symbol listener;
  ClassId class_id = 0;
};

struct TITrainResult {
  std::vector<double> epoch_mse;  // mean over elements, training mode
};

// Mean squared error over all elements, Adam, pairs shuffled every epoch.
inline TITrainResult train_ti(TIModule& ti, std::span<const TranslationPair> pairs,
                              const TISchedule& schedule, Rng& rng) {
  schedule.validate();
  if (pairs.empty()) throw ValidationError("no translation pairs");
  const Index len = ti.symbol_len();
  for (const auto& p : pairs) {
    if (p.speaker.size() != len || p.listener.size() != len) {
      throw DimensionError("translation pair length != translator width");
    }
  }
  AdamState adam = AdamState::for_network(ti.layers);
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  TITrainResult result;
  for (std::uint32_t e = 0; e < schedule.epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = schedule.lr_at(e);
    double sse = 0.0;
    for (std::size_t start = 0; start < order.size(); start += schedule.batch_size) {
      const std::size_t end = std::min(order.size(), start + schedule.batch_size);
      const Index b = static_cast<Index>(end - start);
      Matrix x(len, b), y(len, b);
      for (Index i = 0; i < b; ++i) {
        const auto& p = pairs[order[start + static_cast<std::size_t>(i)]];
        x.col(i) = p.speaker;
        y.col(i) = p.listener;
      }
      auto fwd = ti_forward_train(ti, x, rng);
      const Matrix diff = fwd.output - y;
      const double batch_sse = diff.squaredNorm();
      if (!std::isfinite(batch_sse)) {
        throw NumericError("translator loss became non-finite at epoch " + std::to_string(e));
      }
      sse += batch_sse;
      const Matrix grad = (2.0 / static_cast<double>(diff.size())) * diff;
      auto g = backward_batch(ti.layers, fwd.tape, grad);
      adam_step(adam, ti.layers, g.params, lr);
    }
    result.epoch_mse.push_back(sse / static_cast<double>(pairs.size() * static_cast<std::size_t>(len)));
  }
  return result;
}

// Inference-mode MSE over all elements.
inline double translation_mse(const TIModule& ti, std::span<const TranslationPair> pairs) {
  double sse = 0.0;
  for (const auto& p : pairs) sse += (translate(ti, p.speaker) - p.listener).squaredNorm();
  return sse / static_cast<double>(pairs.size() * static_cast<std::size_t>(ti.symbol_len()));
}

// Elementwise uniform in the per-element [min, max] envelope of the bank.
inline Symbol random_symbol(const SymbolBank& bank, Rng& rng) {
  if (bank.empty()) throw ValidationError("random_symbol needs a nonempty bank");
  const auto [lo, hi] = bank.envelope();
  Symbol s(lo.size());
  for (Index i = 0; i < s.size(); ++i) s[i] = lo[i] == hi[i] ? lo[i] : uniform(rng, lo[i], hi[i]);
  return s;
}

// Original symbol (variant 0) plus `extra` inferred variants per class.
inline std::map<ClassId, std::vector<Symbol>> speaker_symbol_sets(
    const Agent& speaker, const DatasetView& data, std::size_t extra,
    const SymbolicHyper& hyper, Rng& rng) {
  std::map<ClassId, std::vector<Symbol>> sets;
  for (auto c : data.classes()) {
    if (!speaker.bank.contains(c)) continue;
    auto& v = sets[c];
    v.push_back(speaker.bank.at(c));
    for (auto& s : extend_symbol_set(speaker, data, c, extra, hyper, rng)) v.push_back(std::move(s));
  }
  return sets;
}

// Every speaker variant of every shared class paired with the listener's
// one symbol for that class.
inline std::vector<TranslationPair> translation_pairs(
    const std::map<ClassId, std::vector<Symbol>>& speaker_sets, const SymbolBank& listener_bank,
    std::span<const ClassId> shared) {
  std::vector<TranslationPair> out;
  for (auto c : shared) {
    auto it = speaker_sets.find(c);
    if (it == speaker_sets.end()) {
      throw ValidationError("speaker has no symbols for shared class " + std::to_string(c));
    }
    for (const auto& s : it->second) out.push_back({s, listener_bank.at(c), c});
  }
  return out;
}

struct GameOutcome {
  double accuracy = 0.0;          // listener fed the translated speaker symbol
  double control_accuracy = 0.0;  // listener fed a random in-envelope symbol
  Symbol translated;
};

// Identification stage for one holdout class. `data` supplies the test rows
// (the holdout class mixed with the listener's learned classes).
inline GameOutcome run_game(const Agent& speaker, const Agent& listener, const TIModule& ti,
                            ClassId holdout, const DatasetView& data, Rng& rng) {
  if (!speaker.bank.contains(holdout)) {
    throw ValidationError("speaker was not trained on holdout class " + std::to_string(holdout));
  }
  if (listener.bank.contains(holdout)) {
    throw ValidationError("listener already knows holdout class " + std::to_string(holdout));
  }
  if (listener.bank.empty()) throw ValidationError("listener has no learned classes");
  if (ti.symbol_len() != speaker.symbol_len() || ti.symbol_len() != listener.symbol_len()) {
    throw DimensionError("translator width does not match agent symbol lengths");
  }
  GameOutcome out;
  out.translated = translate(ti, speaker.bank.at(holdout));
  out.accuracy = evaluate_symbol(listener, data, holdout, out.translated);
  out.control_accuracy = evaluate_symbol(listener, data, holdout, random_symbol(listener.bank, rng));
  return out;
}

struct GameRound {
  std::uint32_t round = 0;
  ClassId holdout = 0;
  double accuracy = 0.0;
  double control_accuracy = 0.0;
};

inline CsvTable game_csv(std::span<const GameRound> rounds) {
  CsvTable t({"round", "holdout_class", "accuracy", "control_accuracy"});
  for (const auto& r : rounds) {
    CsvTable::Row row;
    row << r.round << r.holdout << r.accuracy << r.control_accuracy;
    t.add(row);
  }
  return t;
}

}  // namespace seanet

#endif  // SEANET_COMMS_HPP_
