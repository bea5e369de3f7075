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

// Learning a class by optimizing its symbol alone against a frozen network.
//
// The objective for a candidate symbol s is
//
//   L(s) = CE(x_new -> Yes | s) + alpha * CE(x_old -> No | s)
//          + beta * sum_i exp(-|S_i - s|^2 / tau)
//
// where both cross-entropy terms are means over their image sets and S_i are
// the symbols of already-learned classes. Every function here takes the
// agent by const reference: network parameters cannot change.

#ifndef SEANET_SYMBOLIC_HPP_
#define SEANET_SYMBOLIC_HPP_

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "seanet/common.hpp"
#include "seanet/csv.hpp"
#include "seanet/data_io.hpp"
#include "seanet/gated_net.hpp"
#include "seanet/grad_core.hpp"

namespace seanet {

struct SymbolicHyper {
  double alpha = 0.5;
  double beta = 0.001;
  double tau = 0.01;
  double lr = 0.01;
  std::uint32_t epochs = 1000;

  void validate() const {
    if (!(tau > 0.0)) throw ValidationError("tau must be > 0");
    if (!(alpha >= 0.0) || !(beta >= 0.0)) throw ValidationError("alpha and beta must be >= 0");
    if (!(lr > 0.0)) throw ValidationError("symbolic lr must be > 0");
  }
};

// A handful of new-class images plus one exemplar per learned class.
struct FewShotSample {
  Matrix new_images;     // F x n_new
  Matrix old_exemplars;  // F x n_old
  std::vector<ClassId> old_classes;

  void validate(Index feature_dim) const {
    if (new_images.cols() == 0) throw ValidationError("few-shot sample has no new images");
    if (new_images.rows() != feature_dim || old_exemplars.rows() != feature_dim) {
      throw DimensionError("few-shot feature length != agent feature dim");
    }
    if (static_cast<std::size_t>(old_exemplars.cols()) != old_classes.size()) {
      throw DimensionError("one class id per old exemplar required");
    }
    std::vector<ClassId> sorted = old_classes;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw ValidationError("more than one exemplar for a learned class");
    }
  }
};

// Draws `n_new` training images of `new_class` and one training image of each
// class in `old_classes`, uniformly without replacement.
inline FewShotSample draw_few_shot(const DatasetView& data, ClassId new_class,
                                   std::span<const ClassId> old_classes, Rng& rng,
                                   std::size_t n_new = 2) {
  const auto train_rows = data.rows_in(Partition::kTrain);
  auto rows_of = [&](ClassId c) {
    std::vector<Index> out;
    for (auto r : train_rows) {
      if (data.label(r) == c) out.push_back(r);
    }
    if (out.empty()) {
      throw ValidationError("no training images for class " + std::to_string(c));
    }
    return out;
  };
  FewShotSample s;
  auto fresh = rows_of(new_class);
  if (fresh.size() < n_new) {
    throw ValidationError("class " + std::to_string(new_class) + " has fewer than " +
                          std::to_string(n_new) + " training images");
  }
  std::shuffle(fresh.begin(), fresh.end(), rng);
  s.new_images.resize(data.source().dim(), static_cast<Index>(n_new));
  for (std::size_t i = 0; i < n_new; ++i) {
    s.new_images.col(static_cast<Index>(i)) = data.feature(fresh[i]);
  }
  s.old_exemplars.resize(data.source().dim(), static_cast<Index>(old_classes.size()));
  for (std::size_t i = 0; i < old_classes.size(); ++i) {
    const auto rows = rows_of(old_classes[i]);
    s.old_exemplars.col(static_cast<Index>(i)) = data.feature(rows[uniform_index(rng, rows.size())]);
    s.old_classes.push_back(old_classes[i]);
  }
  return s;
}

// sum_i exp(-|S_i - s|^2 / tau). Zero for an empty anchor set.
inline double repelling_loss(const Symbol& s, const SymbolBank& anchors, double tau) {
  if (!(tau > 0.0)) throw ValidationError("tau must be > 0");
  double total = 0.0;
  for (const auto& [id, a] : anchors) {
    if (a.size() != s.size()) {
      throw DimensionError("anchor " + std::to_string(id) + " length != symbol length");
    }
    total += std::exp(-(a - s).squaredNorm() / tau);
  }
  return total;
}

inline Vector repelling_gradient(const Symbol& s, const SymbolBank& anchors, double tau) {
  if (!(tau > 0.0)) throw ValidationError("tau must be > 0");
  Vector g = Vector::Zero(s.size());
  for (const auto& [_, a] : anchors) {
    const Vector diff = s - a;
    g -= (2.0 / tau) * std::exp(-diff.squaredNorm() / tau) * diff;
  }
  return g;
}

struct CombinedLoss {
  double ce_new = 0.0;
  double ce_old = 0.0;
  double repel = 0.0;
  double total = 0.0;  // ce_new + alpha * ce_old + beta * repel
  Vector symbol_grad;
};

inline CombinedLoss combined_loss(const Agent& agent, const Symbol& s, const FewShotSample& shot,
                                  const SymbolBank& anchors, const SymbolicHyper& hyper) {
  hyper.validate();
  shot.validate(agent.feature_dim());
  if (s.size() != agent.symbol_len()) {
    throw DimensionError("symbol length " + std::to_string(s.size()) + " != " +
                         std::to_string(agent.symbol_len()));
  }
  const Index n_new = shot.new_images.cols();
  const Index n_old = shot.old_exemplars.cols();
  Matrix features(agent.feature_dim(), n_new + n_old);
  features << shot.new_images, shot.old_exemplars;
  std::vector<Decision> targets(static_cast<std::size_t>(n_new), Decision::kYes);
  targets.resize(static_cast<std::size_t>(n_new + n_old), Decision::kNo);
  auto fwd = sea_forward_batch(agent, s.replicate(1, n_new + n_old), features);
  auto ce = cross_entropy(fwd.logits, targets);

  CombinedLoss out;
  // Per-column losses to split the two means.
  {
    auto ce_new = cross_entropy(fwd.logits.leftCols(n_new),
                                std::span<const Decision>(targets.data(), n_new));
    out.ce_new = ce_new.loss / static_cast<double>(n_new);
    if (n_old > 0) {
      auto ce_old = cross_entropy(
          fwd.logits.rightCols(n_old),
          std::span<const Decision>(targets.data() + n_new, static_cast<std::size_t>(n_old)));
      out.ce_old = ce_old.loss / static_cast<double>(n_old);
    }
  }
  out.repel = repelling_loss(s, anchors, hyper.tau);
  out.total = out.ce_new + hyper.alpha * out.ce_old + hyper.beta * out.repel;
  if (!std::isfinite(out.total)) throw NumericError("combined loss is not finite");

  ce.grad.leftCols(n_new) /= static_cast<double>(n_new);
  if (n_old > 0) ce.grad.rightCols(n_old) *= hyper.alpha / static_cast<double>(n_old);
  auto grads = sea_backward_batch(agent, fwd.tape, ce.grad);
  out.symbol_grad = grads.symbols.rowwise().sum();
  out.symbol_grad += hyper.beta * repelling_gradient(s, anchors, hyper.tau);
  return out;
}

struct InferredSymbol {
  Symbol symbol;
  double final_loss = 0.0;
};

// Random start inside the per-element envelope of `anchors` (or U[-1,1] when
// there are none), then plain gradient descent on the symbol alone.
inline InferredSymbol infer_symbol(const Agent& agent, const FewShotSample& shot,
                                   const SymbolBank& anchors, const SymbolicHyper& hyper,
                                   Rng& rng) {
  hyper.validate();
  Symbol s(agent.symbol_len());
  if (anchors.empty()) {
    s = uniform_vector(rng, agent.symbol_len(), -1.0, 1.0);
  } else {
    const auto [lo, hi] = anchors.envelope();
    for (Index i = 0; i < s.size(); ++i) {
      s[i] = lo[i] == hi[i] ? lo[i] : uniform(rng, lo[i], hi[i]);
    }
  }
  double loss = 0.0;
  for (std::uint32_t e = 0; e < hyper.epochs; ++e) {
    const auto l = combined_loss(agent, s, shot, anchors, hyper);
    loss = l.total;
    sgd_step(s, l.symbol_grad, hyper.lr);
    if (!s.allFinite()) {
      throw NumericError("symbol diverged at epoch " + std::to_string(e) +
                         " (loss " + format_double(loss) + ")");
    }
  }
  loss = combined_loss(agent, s, shot, anchors, hyper).total;
  return {std::move(s), loss};
}

// `count` more symbols for an already-learned class, each optimized from its
// own random start on a fresh few-shot draw. Other learned classes serve as
// negatives and repelling anchors.
inline std::vector<Symbol> extend_symbol_set(const Agent& agent, const DatasetView& data,
                                             ClassId class_id, std::size_t count,
                                             const SymbolicHyper& hyper, Rng& rng) {
  if (!agent.bank.contains(class_id)) {
    throw ValidationError("class " + std::to_string(class_id) + " not learned by agent");
  }
  SymbolBank anchors = agent.bank;
  anchors.erase(class_id);
  std::vector<ClassId> others;
  for (auto c : data.classes()) {
    if (c != class_id && anchors.contains(c)) others.push_back(c);
  }
  std::vector<Symbol> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const auto shot = draw_few_shot(data, class_id, others, rng);
    out.push_back(infer_symbol(agent, shot, anchors, hyper, rng).symbol);
  }
  return out;
}

struct SymbolVariant {
  ClassId class_id = 0;
  std::uint32_t variant = 0;
  Symbol symbol;
};

inline CsvTable symbol_set_csv(std::span<const SymbolVariant> variants, Index symbol_len) {
  std::vector<std::string> header{"class_id", "variant_index"};
  for (Index i = 0; i < symbol_len; ++i) header.push_back("s" + std::to_string(i));
  CsvTable t(std::move(header));
  for (const auto& v : variants) {
    CsvTable::Row row;
    row << v.class_id << v.variant;
    for (Index i = 0; i < v.symbol.size(); ++i) row << v.symbol[i];
    t.add(row);
  }
  return t;
}

}  // namespace seanet

#endif  // SEANET_SYMBOLIC_HPP_
