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

// Symbol-gated identification network.
//
// The task-solving (TS) classifier maps a feature vector to two logits
// (No, Yes). Its gated widths are [F, h1, ..., hk]: the identity feature
// layer of width F followed by ReLU hidden layers, then an ungated 2-unit
// output layer. The context-dependent processing (CDP) network maps a symbol
// of length L through sigmoid layers of widths [F, h1, ..., hk]; the output
// of CDP layer i gates, neuron for neuron, gated TS layer i:
//
//   symbol -> cdp[0] (F)  -> cdp[1] (h1) -> ... -> cdp[k] (hk)
//                 |              |                    |
//   features ---- ⊙ ---> relu ---⊙---> ... ---> relu--⊙---> output (2)

#ifndef SEANET_GATED_NET_HPP_
#define SEANET_GATED_NET_HPP_

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "seanet/binary_io.hpp"
#include "seanet/common.hpp"
#include "seanet/grad_core.hpp"

namespace seanet {

using Symbol = Vector;

inline constexpr Index kDefaultSymbolLength = 20;

struct Geometry {
  Index symbol_len = kDefaultSymbolLength;
  // Gated widths; the first entry is the feature dimension.
  std::vector<Index> widths = {512, 100, 10};

  Index feature_dim() const { return widths.empty() ? 0 : widths.front(); }

  void validate() const {
    if (symbol_len <= 0) throw ValidationError("symbol length must be positive");
    if (widths.empty()) throw ValidationError("geometry needs at least the feature width");
    for (auto w : widths) {
      if (w <= 0) throw ValidationError("layer widths must be positive");
    }
  }

  friend bool operator==(const Geometry&, const Geometry&) = default;
};

class SymbolBank {
 public:
  SymbolBank() = default;
  explicit SymbolBank(Index symbol_len) : symbol_len_(symbol_len) {}

  Index symbol_len() const { return symbol_len_; }
  std::size_t size() const { return symbols_.size(); }
  bool empty() const { return symbols_.empty(); }
  bool contains(ClassId id) const { return symbols_.count(id) != 0; }

  void set(ClassId id, Symbol s) {
    if (s.size() != symbol_len_) {
      throw DimensionError("symbol for class " + std::to_string(id) + " has length " +
                           std::to_string(s.size()) + ", bank expects " +
                           std::to_string(symbol_len_));
    }
    if (!s.allFinite()) {
      throw NumericError("symbol for class " + std::to_string(id) + " is not finite");
    }
    symbols_[id] = std::move(s);
  }

  const Symbol& at(ClassId id) const {
    auto it = symbols_.find(id);
    if (it == symbols_.end()) {
      throw ValidationError("class " + std::to_string(id) + " not in symbol bank");
    }
    return it->second;
  }

  // Mutable access for in-place optimizer steps; length is preserved by the
  // caller.
  Symbol& at(ClassId id) {
    return const_cast<Symbol&>(std::as_const(*this).at(id));
  }

  void erase(ClassId id) { symbols_.erase(id); }

  std::vector<ClassId> ids() const {
    std::vector<ClassId> out;
    out.reserve(symbols_.size());
    for (const auto& [id, _] : symbols_) out.push_back(id);
    return out;
  }

  auto begin() const { return symbols_.begin(); }
  auto end() const { return symbols_.end(); }

  // Per-element [min, max] over all symbols.
  std::pair<Vector, Vector> envelope() const {
    if (symbols_.empty()) throw ValidationError("envelope of an empty symbol bank");
    Vector lo = symbols_.begin()->second;
    Vector hi = lo;
    for (const auto& [_, s] : symbols_) {
      lo = lo.cwiseMin(s);
      hi = hi.cwiseMax(s);
    }
    return {lo, hi};
  }

  friend bool operator==(const SymbolBank& a, const SymbolBank& b) {
    if (a.symbol_len_ != b.symbol_len_ || a.symbols_.size() != b.symbols_.size()) {
      return false;
    }
    auto ia = a.symbols_.begin();
    for (auto ib = b.symbols_.begin(); ib != b.symbols_.end(); ++ia, ++ib) {
      if (ia->first != ib->first || ia->second != ib->second) return false;
    }
    return true;
  }

 private:
  Index symbol_len_ = kDefaultSymbolLength;
  std::map<ClassId, Symbol> symbols_;
};

// Fresh symbols uniform in [-1, 1]^L.
inline SymbolBank random_bank(std::span<const ClassId> ids, Index symbol_len, Rng& rng) {
  SymbolBank bank(symbol_len);
  for (auto id : ids) bank.set(id, uniform_vector(rng, symbol_len, -1.0, 1.0));
  return bank;
}

struct CDPModule {
  Network layers;  // all sigmoid
};

struct TSClassifier {
  Network layers;  // ReLU hidden layers, identity 2-unit output
};

struct Agent {
  Geometry geometry;
  CDPModule cdp;
  TSClassifier ts;
  SymbolBank bank;

  Index symbol_len() const { return geometry.symbol_len; }
  Index feature_dim() const { return geometry.feature_dim(); }

  // Checks every dimension binding, including the one-to-one CDP/TS pairing.
  void validate() const {
    geometry.validate();
    const auto& w = geometry.widths;
    const std::size_t k = w.size();
    if (cdp.layers.size() != k) {
      throw DimensionError("CDP has " + std::to_string(cdp.layers.size()) +
                           " layers, geometry gates " + std::to_string(k));
    }
    if (ts.layers.size() != k) {
      throw DimensionError("TS has " + std::to_string(ts.layers.size()) +
                           " weight layers, expected " + std::to_string(k));
    }
    validate_network(cdp.layers);
    validate_network(ts.layers);
    if (cdp.layers.front().in_size() != geometry.symbol_len) {
      throw DimensionError("CDP input width != symbol length", 0);
    }
    for (std::size_t i = 0; i < k; ++i) {
      if (cdp.layers[i].out_size() != w[i]) {
        throw DimensionError("CDP width does not match gated TS width",
                             static_cast<int>(i));
      }
      if (cdp.layers[i].activation != Activation::kSigmoid) {
        throw ValidationError("CDP layer " + std::to_string(i) + " is not sigmoid");
      }
      if (ts.layers[i].in_size() != w[i]) {
        throw DimensionError("TS layer input does not match gated width",
                             static_cast<int>(i));
      }
    }
    for (std::size_t i = 0; i + 1 < k; ++i) {
      if (ts.layers[i].activation != Activation::kReLU) {
        throw ValidationError("TS hidden layer " + std::to_string(i) + " is not ReLU");
      }
    }
    if (ts.layers.back().out_size() != 2) {
      throw DimensionError("TS output must have exactly 2 logits",
                           static_cast<int>(k - 1));
    }
    if (bank.symbol_len() != geometry.symbol_len) {
      throw DimensionError("symbol bank length != agent symbol length");
    }
  }
};

// Parameters only; banks are compared separately.
inline bool same_parameters(const Agent& a, const Agent& b) {
  return a.cdp.layers == b.cdp.layers && a.ts.layers == b.ts.layers;
}

inline Agent make_agent(const Geometry& geometry, Rng& rng) {
  geometry.validate();
  Agent agent;
  agent.geometry = geometry;
  const auto& w = geometry.widths;
  Index in = geometry.symbol_len;
  for (auto width : w) {
    agent.cdp.layers.push_back(make_layer(in, width, Activation::kSigmoid, rng));
    in = width;
  }
  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    agent.ts.layers.push_back(make_layer(w[i], w[i + 1], Activation::kReLU, rng));
  }
  agent.ts.layers.push_back(make_layer(w.back(), 2, Activation::kIdentity, rng));
  agent.bank = SymbolBank(geometry.symbol_len);
  agent.validate();
  return agent;
}

enum class Decision : std::uint8_t { kNo = 0, kYes = 1 };

// Yes iff logits[1] > logits[0]; ties go to No.
inline Decision decide(const Eigen::Ref<const Vector>& logits) {
  if (logits.size() != 2) throw DimensionError("decide needs exactly 2 logits");
  return logits[1] > logits[0] ? Decision::kYes : Decision::kNo;
}

struct LossAndGrad {
  double loss = 0.0;  // summed over the batch
  Matrix grad;        // d loss / d logits, 2 x batch
};

// Softmax cross-entropy over (No, Yes) logits against per-column targets.
inline LossAndGrad cross_entropy(const Matrix& logits, std::span<const Decision> targets) {
  if (logits.rows() != 2 || static_cast<std::size_t>(logits.cols()) != targets.size()) {
    throw DimensionError("cross_entropy: logits " + shape_str(logits.rows(), logits.cols()) +
                         " vs " + std::to_string(targets.size()) + " targets");
  }
  LossAndGrad out;
  out.grad.resize(2, logits.cols());
  for (Index c = 0; c < logits.cols(); ++c) {
    const double m = std::max(logits(0, c), logits(1, c));
    const double e0 = std::exp(logits(0, c) - m);
    const double e1 = std::exp(logits(1, c) - m);
    const double lse = m + std::log(e0 + e1);
    const int t = targets[static_cast<std::size_t>(c)] == Decision::kYes ? 1 : 0;
    out.loss += lse - logits(t, c);
    out.grad(0, c) = e0 / (e0 + e1) - (t == 0 ? 1.0 : 0.0);
    out.grad(1, c) = e1 / (e0 + e1) - (t == 1 ? 1.0 : 0.0);
  }
  return out;
}

struct CdpBatchForward {
  std::vector<Matrix> gains;  // one per gated TS layer, width x batch
  Tape tape;
};

inline CdpBatchForward cdp_forward_batch(const CDPModule& cdp, const Matrix& symbols) {
  auto fwd = forward_batch(cdp.layers, symbols);
  CdpBatchForward out;
  out.gains.reserve(cdp.layers.size());
  for (std::size_t i = 0; i < cdp.layers.size(); ++i) {
    out.gains.push_back(fwd.tape.layer_output(i));
  }
  out.tape = std::move(fwd.tape);
  return out;
}

struct CdpForward {
  std::vector<Vector> gains;
  Tape tape;
};

inline CdpForward cdp_forward(const CDPModule& cdp, const Symbol& symbol) {
  if (cdp.layers.empty() || symbol.size() != cdp.layers.front().in_size()) {
    throw DimensionError("symbol length " + std::to_string(symbol.size()) +
                         " does not match CDP input width");
  }
  auto b = cdp_forward_batch(cdp, symbol);
  CdpForward out;
  for (auto& g : b.gains) out.gains.emplace_back(g.col(0));
  out.tape = std::move(b.tape);
  return out;
}

// Joint record of a gated forward pass.
struct SeaTape {
  Tape cdp;
  Tape ts;
  Matrix features;
  Matrix input_gain;  // gain applied to the identity feature layer
};

struct SeaBatchForward {
  Matrix logits;
  SeaTape tape;
};

namespace detail {

inline void check_sea_inputs(const Agent& agent, const Matrix& symbols,
                             const Matrix& features) {
  if (symbols.rows() != agent.symbol_len()) {
    throw DimensionError("symbol length " + std::to_string(symbols.rows()) +
                         " != agent symbol length " + std::to_string(agent.symbol_len()));
  }
  if (features.rows() != agent.feature_dim()) {
    throw DimensionError("feature length " + std::to_string(features.rows()) +
                         " != agent feature dim " + std::to_string(agent.feature_dim()));
  }
  if (symbols.cols() != features.cols()) {
    throw DimensionError("symbol batch " + std::to_string(symbols.cols()) +
                         " != feature batch " + std::to_string(features.cols()));
  }
}

// Runs the TS classifier under explicit gains (one per gated width).
inline SeaBatchForward ts_forward_gated(const Agent& agent, const Matrix& features,
                                        std::vector<Matrix> gains, Tape cdp_tape) {
  const std::size_t k = agent.ts.layers.size();
  if (gains.size() != k) {
    throw DimensionError("expected " + std::to_string(k) + " gain matrices, got " +
                         std::to_string(gains.size()));
  }
  if (gains[0].rows() != features.rows() || gains[0].cols() != features.cols()) {
    throw DimensionError("input gain shape mismatch", 0);
  }
  if ((gains[0].array() < 0.0).any() || (gains[0].array() > 1.0).any()) {
    throw ValidationError("input gains outside [0,1]");
  }
  SeaBatchForward out;
  Matrix gated_features = features.cwiseProduct(gains[0]);
  // TS layer i is gated by the gain of width w[i + 1]; the output is ungated.
  std::vector<Matrix> ts_gains(k);
  for (std::size_t i = 0; i + 1 < k; ++i) ts_gains[i] = std::move(gains[i + 1]);
  auto ts = forward_batch(agent.ts.layers, gated_features, ts_gains);
  out.logits = std::move(ts.output);
  out.tape.cdp = std::move(cdp_tape);
  out.tape.ts = std::move(ts.tape);
  out.tape.features = features;
  out.tape.input_gain = std::move(gains[0]);
  return out;
}

}  // namespace detail

// One column per sample in both `symbols` (L x B) and `features` (F x B).
inline SeaBatchForward sea_forward_batch(const Agent& agent, const Matrix& symbols,
                                         const Matrix& features) {
  detail::check_sea_inputs(agent, symbols, features);
  auto cdp = cdp_forward_batch(agent.cdp, symbols);
  return detail::ts_forward_gated(agent, features, std::move(cdp.gains),
                                  std::move(cdp.tape));
}

// Bypasses the CDP; gains are supplied directly. The returned tape has an
// empty CDP record and cannot be passed to sea_backward.
inline SeaBatchForward sea_forward_with_gains(const Agent& agent, const Matrix& features,
                                              std::vector<Matrix> gains) {
  if (features.rows() != agent.feature_dim()) {
    throw DimensionError("feature length mismatch");
  }
  return detail::ts_forward_gated(agent, features, std::move(gains), Tape());
}

struct SeaForward {
  Vector logits;
  SeaTape tape;
};

inline SeaForward sea_forward(const Agent& agent, const Symbol& symbol,
                              const Vector& features) {
  auto b = sea_forward_batch(agent, symbol, features);
  return {b.logits.col(0), std::move(b.tape)};
}

struct SeaBatchGradients {
  ParamGrads cdp;
  ParamGrads ts;
  Matrix symbols;  // L x batch
};

// Gradients are summed over the batch. Consumes both halves of the tape.
inline SeaBatchGradients sea_backward_batch(const Agent& agent, SeaTape& tape,
                                            const Matrix& logit_grad) {
  if (tape.cdp.size() != agent.cdp.layers.size()) {
    throw ValidationError("joint tape carries no matching CDP record");
  }
  auto ts = backward_batch(agent.ts.layers, tape.ts, logit_grad);
  const std::size_t k = agent.cdp.layers.size();
  // d loss / d gain for every CDP output. Gains feeding TS layer i sit at
  // CDP layer i + 1; CDP layer 0 gates the features.
  std::vector<Matrix> gain_grads(k);
  gain_grads[0] = ts.input.cwiseProduct(tape.features);
  for (std::size_t i = 0; i + 1 < k; ++i) gain_grads[i + 1] = std::move(ts.gains[i]);
  Matrix last = std::move(gain_grads.back());
  gain_grads.back() = Matrix();
  auto cdp = backward_batch(agent.cdp.layers, tape.cdp, last, gain_grads);
  return {std::move(cdp.params), std::move(ts.params), std::move(cdp.input)};
}

struct SeaGradients {
  ParamGrads cdp;
  ParamGrads ts;
  Vector symbol;
};

inline SeaGradients sea_backward(const Agent& agent, SeaTape& tape, const Vector& logit_grad) {
  if (logit_grad.size() != 2) throw DimensionError("logit gradient must have length 2");
  auto b = sea_backward_batch(agent, tape, logit_grad);
  return {std::move(b.cdp), std::move(b.ts), b.symbols.col(0)};
}

// Logits for many samples against one symbol, without a tape.
inline Matrix sea_logits(const Agent& agent, const Symbol& symbol, const Matrix& features) {
  Matrix symbols = symbol.replicate(1, features.cols());
  return sea_forward_batch(agent, symbols, features).logits;
}

// --- Agent file format -----------------------------------------------------
//
//   "SEA1"
//   u32 symbol_len, u32 width_count, u32 widths[width_count]
//   CDP layers then TS layers: weights row-major f64, then biases f64
//   u32 class_count, per class: u32 id, symbol_len f64
//   u32 CRC32 of all preceding bytes

inline std::vector<std::uint8_t> encode_agent(const Agent& agent) {
  agent.validate();
  ByteWriter w;
  w.bytes("SEA1");
  w.u32(static_cast<std::uint32_t>(agent.geometry.symbol_len));
  w.u32(static_cast<std::uint32_t>(agent.geometry.widths.size()));
  for (auto x : agent.geometry.widths) w.u32(static_cast<std::uint32_t>(x));
  auto put_net = [&](const Network& net) {
    for (const auto& layer : net) {
      for (Index r = 0; r < layer.weights.rows(); ++r) {
        for (Index c = 0; c < layer.weights.cols(); ++c) w.f64(layer.weights(r, c));
      }
      for (Index r = 0; r < layer.biases.size(); ++r) w.f64(layer.biases[r]);
    }
  };
  put_net(agent.cdp.layers);
  put_net(agent.ts.layers);
  w.u32(static_cast<std::uint32_t>(agent.bank.size()));
  for (const auto& [id, s] : agent.bank) {
    w.u32(id);
    for (Index i = 0; i < s.size(); ++i) w.f64(s[i]);
  }
  w.crc_trailer();
  return w.buffer();
}

inline Agent decode_agent(std::vector<std::uint8_t> bytes) {
  ByteReader r(std::move(bytes));
  r.expect_magic("SEA1");
  Geometry g;
  g.symbol_len = r.u32("symbol length");
  const auto nw = r.u32("width count");
  // Each width costs 4 bytes; refuse counts the file cannot hold.
  if (nw == 0 || static_cast<std::size_t>(nw) * 4 > r.remaining()) {
    throw FormatError("implausible width count " + std::to_string(nw), r.offset() - 4);
  }
  g.widths.clear();
  for (std::uint32_t i = 0; i < nw; ++i) {
    const auto x = r.u32("width");
    if (x == 0) throw FormatError("zero layer width", r.offset() - 4);
    g.widths.push_back(x);
  }
  if (g.symbol_len == 0) throw FormatError("zero symbol length", 4);
  // Expected payload size, checked before any allocation.
  std::uint64_t doubles = 0;
  Index in = g.symbol_len;
  for (auto x : g.widths) {
    doubles += static_cast<std::uint64_t>(x) * (static_cast<std::uint64_t>(in) + 1);
    in = x;
  }
  for (std::size_t i = 0; i + 1 < g.widths.size(); ++i) {
    doubles += static_cast<std::uint64_t>(g.widths[i + 1]) *
               (static_cast<std::uint64_t>(g.widths[i]) + 1);
  }
  doubles += 2 * (static_cast<std::uint64_t>(g.widths.back()) + 1);
  if (doubles * 8 + 8 > r.remaining()) {
    throw FormatError("file too short for declared geometry", r.offset());
  }
  Agent agent;
  agent.geometry = g;
  auto get_layer = [&](Index in_size, Index out_size, Activation act) {
    DenseLayer layer;
    layer.activation = act;
    layer.weights.resize(out_size, in_size);
    for (Index row = 0; row < out_size; ++row) {
      for (Index c = 0; c < in_size; ++c) layer.weights(row, c) = r.f64("weight");
    }
    layer.biases.resize(out_size);
    for (Index row = 0; row < out_size; ++row) layer.biases[row] = r.f64("bias");
    return layer;
  };
  in = g.symbol_len;
  for (auto x : g.widths) {
    agent.cdp.layers.push_back(get_layer(in, x, Activation::kSigmoid));
    in = x;
  }
  for (std::size_t i = 0; i + 1 < g.widths.size(); ++i) {
    agent.ts.layers.push_back(get_layer(g.widths[i], g.widths[i + 1], Activation::kReLU));
  }
  agent.ts.layers.push_back(get_layer(g.widths.back(), 2, Activation::kIdentity));
  const auto class_count = r.u32("class count");
  const std::uint64_t per_class = 4 + 8 * static_cast<std::uint64_t>(g.symbol_len);
  if (per_class * class_count + 4 != r.remaining()) {
    throw FormatError("symbol bank size does not match remaining bytes", r.offset() - 4);
  }
  agent.bank = SymbolBank(g.symbol_len);
  for (std::uint32_t c = 0; c < class_count; ++c) {
    const auto at = r.offset();
    const auto id = r.u32("class id");
    if (agent.bank.contains(id)) throw FormatError("duplicate class id", at);
    Symbol s(g.symbol_len);
    for (Index i = 0; i < g.symbol_len; ++i) s[i] = r.f64("symbol element");
    agent.bank.set(id, std::move(s));
  }
  r.expect_end(4, "symbol bank");
  r.verify_crc_trailer();
  agent.validate();
  return agent;
}

inline void save_agent(const Agent& agent, const std::filesystem::path& path) {
  const auto bytes = encode_agent(agent);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path.string());
}

inline Agent load_agent(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  return decode_agent(std::move(data));
}

}  // namespace seanet

#endif  // SEANET_GATED_NET_HPP_
