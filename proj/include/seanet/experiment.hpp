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

// Declarative experiment runs: JSON config in, CSV / Newick / SEA1 / SEAF
// artifacts and a summary.json out.
//
// Config schema (every key optional; unknown keys are errors):
//
//   experiment: "gendata" | "train" | "infer" | "communicate" | "analyze" | "wordvec"
//   seed: integer
//   data:      { path, synthetic: { classes, dim, train_per_class,
//                test_per_class, spread, seed, superclasses, sub_offset } }
//   agent:     { symbol_len, hidden: [int, ...] }
//   train:     { epochs, lr_net, lr_symbol, noise_amp, batch_size,
//                optimizer: "sgd" | "adam", eval_every }
//   symbolic:  { alpha, beta, tau, lr, epochs, new_images, realizations }
//   rounds:    integer (holdout rounds for infer / communicate / wordvec)
//   comms:     { variants, ti: { hidden_layers, width, dropout, lr0, decay,
//                decay_every, epochs, batch_size } }
//   analyze:   { agent, trials, reference: "self" | "symbol_distance" | "class_means" }
//   wordvec:   { path, standin_dim, standin_noise, target_dim, amplify }
//
// The first gated TS layer always has the dataset's feature width, so `agent`
// only lists the hidden widths after it.

#ifndef SEANET_EXPERIMENT_HPP_
#define SEANET_EXPERIMENT_HPP_

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "seanet/analysis.hpp"
#include "seanet/comms.hpp"
#include "seanet/common.hpp"
#include "seanet/csv.hpp"
#include "seanet/data_io.hpp"
#include "seanet/gated_net.hpp"
#include "seanet/symbolic.hpp"
#include "seanet/trainer.hpp"

namespace seanet {

using Json = nlohmann::json;

enum class ExperimentKind : std::uint8_t {
  kGendata,
  kTrain,
  kInfer,
  kCommunicate,
  kAnalyze,
  kWordvec,
};

inline const char* kind_name(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::kGendata: return "gendata";
    case ExperimentKind::kTrain: return "train";
    case ExperimentKind::kInfer: return "infer";
    case ExperimentKind::kCommunicate: return "communicate";
    case ExperimentKind::kAnalyze: return "analyze";
    case ExperimentKind::kWordvec: return "wordvec";
  }
  return "?";
}

inline std::optional<ExperimentKind> parse_kind(const std::string& s) {
  for (auto k : {ExperimentKind::kGendata, ExperimentKind::kTrain, ExperimentKind::kInfer,
                 ExperimentKind::kCommunicate, ExperimentKind::kAnalyze,
                 ExperimentKind::kWordvec}) {
    if (s == kind_name(k)) return k;
  }
  return std::nullopt;
}

// Raised for config problems; `path` is the dotted key that failed.
class ConfigError : public ValidationError {
 public:
  ConfigError(const std::string& path, const std::string& what)
      : ValidationError(path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

// Wraps a failure inside a pipeline stage.
class StageError : public Error {
 public:
  StageError(const std::string& stage, const std::string& what)
      : Error("stage '" + stage + "' failed: " + what), stage_(stage) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct InferSettings {
  SymbolicHyper hyper;
  std::uint32_t new_images = 2;
  std::uint32_t realizations = 10;
};

struct CommsSettings {
  std::uint32_t variants = 96;  // extra symbols per class beyond the original
  TIGeometry ti;
  TISchedule schedule;
};

enum class Reference : std::uint8_t { kSelf, kSymbolDistance, kClassMeans };

inline const char* reference_name(Reference r) {
  switch (r) {
    case Reference::kSelf: return "self";
    case Reference::kSymbolDistance: return "symbol_distance";
    case Reference::kClassMeans: return "class_means";
  }
  return "?";
}

struct AnalyzeSettings {
  std::string agent_path;  // empty: train one first
  std::uint32_t trials = 1000;
  Reference reference = Reference::kSelf;
};

struct WordvecSettings {
  std::string path;  // empty: stand-in vectors from class feature means
  Index standin_dim = 300;
  double standin_noise = 0.05;
  Index target_dim = 20;
  double amplify = 10.0;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kTrain;
  std::uint64_t seed = 0;
  std::string data_path;  // empty: synthetic
  SyntheticSpec synthetic;
  Index symbol_len = kDefaultSymbolLength;
  std::vector<Index> hidden{100, 10};
  TrainConfig train;
  InferSettings infer;
  std::uint32_t rounds = 10;
  CommsSettings comms;
  AnalyzeSettings analyze;
  WordvecSettings wordvec;
  // Not part of the resolved config: they do not change any artifact.
  std::filesystem::path out_dir = "out";
  std::uint32_t threads = 1;

  Geometry geometry(Index feature_dim) const {
    Geometry g;
    g.symbol_len = symbol_len;
    g.widths = {feature_dim};
    g.widths.insert(g.widths.end(), hidden.begin(), hidden.end());
    return g;
  }
};

namespace detail {

// Reads one JSON object, remembering which keys were consumed so leftovers
// can be reported by their full path.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(display(), "expected an object");
  }

  std::string child_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const Json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    const Json* v = find(key);
    if (v == nullptr) return;
    const std::string p = child_path(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v->is_boolean()) throw ConfigError(p, "expected a boolean");
      out = v->get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v->is_number_integer()) throw ConfigError(p, "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v->is_number_unsigned()) {
          const auto u = v->get<std::uint64_t>();
          if (u > std::numeric_limits<T>::max()) throw ConfigError(p, "value out of range");
          out = static_cast<T>(u);
        } else {
          throw ConfigError(p, "must be >= 0");
        }
      } else {
        const auto i = v->get<std::int64_t>();
        if (i < std::numeric_limits<T>::min() || i > std::numeric_limits<T>::max()) {
          throw ConfigError(p, "value out of range");
        }
        out = static_cast<T>(i);
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v->is_number()) throw ConfigError(p, "expected a number");
      out = v->get<double>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v->is_string()) throw ConfigError(p, "expected a string");
      out = v->get<std::string>();
    } else {
      static_assert(sizeof(T) == 0, "unsupported config field type");
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.contains(it.key())) throw ConfigError(child_path(it.key()), "unknown key");
    }
  }

 private:
  std::string display() const { return path_.empty() ? "<root>" : path_; }

  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename F>
void with_object(ObjectReader& parent, const std::string& key, F&& f) {
  const Json* v = parent.find(key);
  if (v == nullptr) return;
  ObjectReader r(*v, parent.child_path(key));
  f(r);
  r.finish();
}

template <typename F>
void check(bool ok, const std::string& path, F&& message) {
  if (!ok) throw ConfigError(path, message());
}

}  // namespace detail

// Constraint checks on a fully populated config, reported by key path.
inline void validate_config(const ExperimentConfig& c) {
  using detail::check;
  const auto& s = c.synthetic;
  if (c.data_path.empty()) {
    check(s.classes >= 2, "data.synthetic.classes", [] { return "must be >= 2"; });
    check(s.dim >= 2, "data.synthetic.dim", [] { return "must be >= 2"; });
    check(s.train_per_class > 0, "data.synthetic.train_per_class", [] { return "must be > 0"; });
    check(s.test_per_class > 0, "data.synthetic.test_per_class", [] { return "must be > 0"; });
    check(s.spread >= 0, "data.synthetic.spread", [] { return "must be >= 0"; });
    check(s.sub_offset >= 0, "data.synthetic.sub_offset", [] { return "must be >= 0"; });
    check(s.superclasses <= s.classes, "data.synthetic.superclasses",
          [] { return "must be <= classes"; });
  }
  check(c.symbol_len > 0, "agent.symbol_len", [] { return "must be > 0"; });
  check(!c.hidden.empty(), "agent.hidden", [] { return "needs at least one layer"; });
  for (std::size_t i = 0; i < c.hidden.size(); ++i) {
    check(c.hidden[i] > 0, "agent.hidden[" + std::to_string(i) + "]",
          [] { return "must be > 0"; });
  }
  const auto& t = c.train;
  check(t.epochs >= 2, "train.epochs", [] { return "must be >= 2"; });
  check(t.lr_net > 0, "train.lr_net", [] { return "must be > 0"; });
  check(t.lr_symbol > 0, "train.lr_symbol", [] { return "must be > 0"; });
  check(t.noise_amp >= 0, "train.noise_amp", [] { return "must be >= 0"; });
  check(t.batch_size > 0, "train.batch_size", [] { return "must be > 0"; });
  const auto& h = c.infer.hyper;
  check(h.alpha >= 0, "symbolic.alpha", [] { return "must be >= 0"; });
  check(h.beta >= 0, "symbolic.beta", [] { return "must be >= 0"; });
  check(h.tau > 0, "symbolic.tau", [] { return "must be > 0"; });
  check(h.lr > 0, "symbolic.lr", [] { return "must be > 0"; });
  check(h.epochs > 0, "symbolic.epochs", [] { return "must be > 0"; });
  check(c.infer.new_images > 0, "symbolic.new_images", [] { return "must be > 0"; });
  check(c.infer.realizations > 0, "symbolic.realizations", [] { return "must be > 0"; });
  check(c.rounds > 0, "rounds", [] { return "must be > 0"; });
  const auto& ti = c.comms.ti;
  check(ti.hidden_layers > 0, "comms.ti.hidden_layers", [] { return "must be > 0"; });
  check(ti.width > 0, "comms.ti.width", [] { return "must be > 0"; });
  check(ti.dropout >= 0 && ti.dropout < 1, "comms.ti.dropout", [] { return "must lie in [0, 1)"; });
  const auto& sch = c.comms.schedule;
  check(sch.lr0 > 0, "comms.ti.lr0", [] { return "must be > 0"; });
  check(sch.decay > 0, "comms.ti.decay", [] { return "must be > 0"; });
  check(sch.decay_every > 0, "comms.ti.decay_every", [] { return "must be > 0"; });
  check(sch.epochs > 0, "comms.ti.epochs", [] { return "must be > 0"; });
  check(sch.batch_size > 0, "comms.ti.batch_size", [] { return "must be > 0"; });
  check(c.analyze.trials > 0, "analyze.trials", [] { return "must be > 0"; });
  const auto& w = c.wordvec;
  check(w.standin_dim > 0, "wordvec.standin_dim", [] { return "must be > 0"; });
  check(w.standin_noise >= 0, "wordvec.standin_noise", [] { return "must be >= 0"; });
  check(w.target_dim > 0, "wordvec.target_dim", [] { return "must be > 0"; });
  check(w.amplify > 0, "wordvec.amplify", [] { return "must be > 0"; });
  if (c.kind == ExperimentKind::kWordvec) {
    check(w.target_dim == c.symbol_len, "wordvec.target_dim",
          [] { return "must equal agent.symbol_len"; });
  }
}

inline ExperimentConfig parse_config(const std::string& text,
                                     std::optional<ExperimentKind> kind = std::nullopt) {
  Json root;
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    root = Json::object();
  } else {
    try {
      root = Json::parse(text);
    } catch (const Json::parse_error& e) {
      throw ConfigError("<root>", std::string("malformed JSON: ") + e.what());
    }
  }
  ExperimentConfig c;
  detail::ObjectReader r(root, "");
  std::string kind_text;
  r.get("experiment", kind_text);
  if (!kind_text.empty()) {
    auto k = parse_kind(kind_text);
    if (!k) throw ConfigError("experiment", "unknown experiment '" + kind_text + "'");
    if (kind && *kind != *k) {
      throw ConfigError("experiment", "config is for '" + kind_text + "', not '" +
                                          kind_name(*kind) + "'");
    }
    c.kind = *k;
  }
  if (kind) c.kind = *kind;
  r.get("seed", c.seed);
  r.get("rounds", c.rounds);
  detail::with_object(r, "data", [&](detail::ObjectReader& d) {
    d.get("path", c.data_path);
    detail::with_object(d, "synthetic", [&](detail::ObjectReader& s) {
      s.get("classes", c.synthetic.classes);
      s.get("dim", c.synthetic.dim);
      s.get("train_per_class", c.synthetic.train_per_class);
      s.get("test_per_class", c.synthetic.test_per_class);
      s.get("spread", c.synthetic.spread);
      s.get("seed", c.synthetic.seed);
      s.get("superclasses", c.synthetic.superclasses);
      s.get("sub_offset", c.synthetic.sub_offset);
    });
  });
  detail::with_object(r, "agent", [&](detail::ObjectReader& a) {
    a.get("symbol_len", c.symbol_len);
    if (const Json* h = a.find("hidden")) {
      const std::string p = a.child_path("hidden");
      if (!h->is_array()) throw ConfigError(p, "expected an array of integers");
      c.hidden.clear();
      for (std::size_t i = 0; i < h->size(); ++i) {
        const auto& v = (*h)[i];
        if (!v.is_number_integer()) {
          throw ConfigError(p + "[" + std::to_string(i) + "]", "expected an integer");
        }
        c.hidden.push_back(v.get<Index>());
      }
    }
  });
  detail::with_object(r, "train", [&](detail::ObjectReader& t) {
    t.get("epochs", c.train.epochs);
    t.get("lr_net", c.train.lr_net);
    t.get("lr_symbol", c.train.lr_symbol);
    t.get("noise_amp", c.train.noise_amp);
    t.get("batch_size", c.train.batch_size);
    t.get("eval_every", c.train.eval_every);
    std::string opt;
    t.get("optimizer", opt);
    if (opt == "adam") {
      c.train.optimizer = Optimizer::kAdam;
    } else if (opt == "sgd") {
      c.train.optimizer = Optimizer::kSgd;
    } else if (!opt.empty()) {
      throw ConfigError("train.optimizer", "expected \"sgd\" or \"adam\"");
    }
  });
  detail::with_object(r, "symbolic", [&](detail::ObjectReader& s) {
    s.get("alpha", c.infer.hyper.alpha);
    s.get("beta", c.infer.hyper.beta);
    s.get("tau", c.infer.hyper.tau);
    s.get("lr", c.infer.hyper.lr);
    s.get("epochs", c.infer.hyper.epochs);
    s.get("new_images", c.infer.new_images);
    s.get("realizations", c.infer.realizations);
  });
  detail::with_object(r, "comms", [&](detail::ObjectReader& m) {
    m.get("variants", c.comms.variants);
    detail::with_object(m, "ti", [&](detail::ObjectReader& t) {
      t.get("hidden_layers", c.comms.ti.hidden_layers);
      t.get("width", c.comms.ti.width);
      t.get("dropout", c.comms.ti.dropout);
      t.get("lr0", c.comms.schedule.lr0);
      t.get("decay", c.comms.schedule.decay);
      t.get("decay_every", c.comms.schedule.decay_every);
      t.get("epochs", c.comms.schedule.epochs);
      t.get("batch_size", c.comms.schedule.batch_size);
    });
  });
  detail::with_object(r, "analyze", [&](detail::ObjectReader& a) {
    a.get("agent", c.analyze.agent_path);
    a.get("trials", c.analyze.trials);
    std::string ref;
    a.get("reference", ref);
    if (ref == "self" || ref.empty()) {
      c.analyze.reference = Reference::kSelf;
    } else if (ref == "symbol_distance") {
      c.analyze.reference = Reference::kSymbolDistance;
    } else if (ref == "class_means") {
      c.analyze.reference = Reference::kClassMeans;
    } else {
      throw ConfigError("analyze.reference",
                        "expected \"self\", \"symbol_distance\" or \"class_means\"");
    }
  });
  detail::with_object(r, "wordvec", [&](detail::ObjectReader& w) {
    w.get("path", c.wordvec.path);
    w.get("standin_dim", c.wordvec.standin_dim);
    w.get("standin_noise", c.wordvec.standin_noise);
    w.get("target_dim", c.wordvec.target_dim);
    w.get("amplify", c.wordvec.amplify);
  });
  r.finish();
  validate_config(c);
  return c;
}

// Every field with its resolved value. Keys come out sorted, so the dump is
// canonical.
inline Json resolved_json(const ExperimentConfig& c) {
  Json j;
  j["experiment"] = kind_name(c.kind);
  j["seed"] = c.seed;
  j["rounds"] = c.rounds;
  j["data"]["path"] = c.data_path;
  auto& s = j["data"]["synthetic"];
  s["classes"] = c.synthetic.classes;
  s["dim"] = c.synthetic.dim;
  s["train_per_class"] = c.synthetic.train_per_class;
  s["test_per_class"] = c.synthetic.test_per_class;
  s["spread"] = c.synthetic.spread;
  s["seed"] = c.synthetic.seed;
  s["superclasses"] = c.synthetic.superclasses;
  s["sub_offset"] = c.synthetic.sub_offset;
  j["agent"]["symbol_len"] = c.symbol_len;
  j["agent"]["hidden"] = c.hidden;
  auto& t = j["train"];
  t["epochs"] = c.train.epochs;
  t["lr_net"] = c.train.lr_net;
  t["lr_symbol"] = c.train.lr_symbol;
  t["noise_amp"] = c.train.noise_amp;
  t["batch_size"] = c.train.batch_size;
  t["eval_every"] = c.train.eval_every;
  t["optimizer"] = c.train.optimizer == Optimizer::kAdam ? "adam" : "sgd";
  auto& y = j["symbolic"];
  y["alpha"] = c.infer.hyper.alpha;
  y["beta"] = c.infer.hyper.beta;
  y["tau"] = c.infer.hyper.tau;
  y["lr"] = c.infer.hyper.lr;
  y["epochs"] = c.infer.hyper.epochs;
  y["new_images"] = c.infer.new_images;
  y["realizations"] = c.infer.realizations;
  j["comms"]["variants"] = c.comms.variants;
  auto& ti = j["comms"]["ti"];
  ti["hidden_layers"] = c.comms.ti.hidden_layers;
  ti["width"] = c.comms.ti.width;
  ti["dropout"] = c.comms.ti.dropout;
  ti["lr0"] = c.comms.schedule.lr0;
  ti["decay"] = c.comms.schedule.decay;
  ti["decay_every"] = c.comms.schedule.decay_every;
  ti["epochs"] = c.comms.schedule.epochs;
  ti["batch_size"] = c.comms.schedule.batch_size;
  j["analyze"]["agent"] = c.analyze.agent_path;
  j["analyze"]["trials"] = c.analyze.trials;
  j["analyze"]["reference"] = reference_name(c.analyze.reference);
  auto& w = j["wordvec"];
  w["path"] = c.wordvec.path;
  w["standin_dim"] = c.wordvec.standin_dim;
  w["standin_noise"] = c.wordvec.standin_noise;
  w["target_dim"] = c.wordvec.target_dim;
  w["amplify"] = c.wordvec.amplify;
  return j;
}

// 64-bit FNV-1a of the canonical resolved config, as 16 hex digits.
inline std::string config_hash(const ExperimentConfig& c) {
  const std::string text = resolved_json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct RunSummary {
  ExperimentKind kind = ExperimentKind::kTrain;
  std::string config_hash;
  double wall_seconds = 0.0;
  std::map<std::string, double> metrics;
  std::vector<std::filesystem::path> artifacts;

  Json to_json() const {
    Json j;
    j["experiment"] = kind_name(kind);
    j["config_hash"] = config_hash;
    j["wall_seconds"] = wall_seconds;
    j["metrics"] = Json::object();
    for (const auto& [k, v] : metrics) j["metrics"][k] = v;
    j["artifacts"] = Json::array();
    for (const auto& a : artifacts) j["artifacts"].push_back(a.filename().string());
    return j;
  }
};

// Runs f(0..n-1) on up to `threads` workers. The first exception (lowest
// index) is rethrown after all workers stop.
template <typename F>
void parallel_rounds(std::size_t n, std::uint32_t threads, F&& f) {
  std::vector<std::exception_ptr> errors(n);
  const std::size_t workers = std::min<std::size_t>(std::max<std::uint32_t>(threads, 1), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        f(i);
      } catch (...) {
        errors[i] = std::current_exception();
        break;
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            f(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// Seed streams. Each consumer derives its own generator from the master seed.
namespace streams {
inline constexpr std::uint64_t kAgentInit = 1;
inline constexpr std::uint64_t kTrain = 2;
inline constexpr std::uint64_t kSpeakerExtend = 3;
inline constexpr std::uint64_t kShuffle = 4;
inline constexpr std::uint64_t kRounds = 1000;  // + round index
}  // namespace streams

// Trains a fresh agent on `view` with the given geometry. `seed` drives both
// the initialization and the training schedule.
inline Agent train_new_agent(const Geometry& geometry, const DatasetView& view,
                             TrainConfig train, std::uint64_t seed,
                             TrainResult* history = nullptr) {
  Rng init(derive_seed(seed, streams::kAgentInit));
  Agent agent = make_agent(geometry, init);
  train.seed = derive_seed(seed, streams::kTrain);
  auto result = seanet::train(agent, view, train);
  if (history != nullptr) *history = std::move(result);
  return agent;
}

// Holdout for round r: classes cycled in ascending order.
inline ClassId holdout_for_round(const FeatureDataset& data, std::uint32_t round) {
  return static_cast<ClassId>(round % data.class_count);
}

// Few-shot inference of `holdout` on an agent that never saw it. Returns one
// balanced accuracy per realization, evaluated on every test row of `data`.
inline std::vector<double> infer_realizations(const Agent& agent, const FeatureDataset& data,
                                              ClassId holdout, const InferSettings& settings,
                                              Rng& rng) {
  DatasetView view(data);
  const auto learned = agent.bank.ids();
  std::vector<double> acc;
  for (std::uint32_t k = 0; k < settings.realizations; ++k) {
    const auto shot = draw_few_shot(view, holdout, learned, rng, settings.new_images);
    const auto inferred = infer_symbol(agent, shot, agent.bank, settings.hyper, rng);
    acc.push_back(evaluate_symbol(agent, view, holdout, inferred.symbol));
  }
  return acc;
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw ValidationError("median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double mean(const std::vector<double>& v) {
  if (v.empty()) throw ValidationError("mean of an empty set");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

namespace detail {

template <typename F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

inline std::vector<std::string> class_names(const FeatureDataset& data) {
  std::vector<std::string> names;
  for (std::uint32_t c = 0; c < data.class_count; ++c) {
    auto it = data.class_names.find(c);
    names.push_back(it != data.class_names.end() && !it->second.empty()
                        ? it->second
                        : "class_" + std::to_string(c));
  }
  return names;
}

class Run {
 public:
  explicit Run(const ExperimentConfig& c) : config_(c) {
    summary_.kind = c.kind;
    summary_.config_hash = config_hash(c);
  }

  const ExperimentConfig& config() const { return config_; }
  RunSummary& summary() { return summary_; }

  void write_text(const std::string& name, const std::string& text) {
    const auto path = config_.out_dir / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw Error("write failed: " + path.string());
    summary_.artifacts.push_back(path);
  }

  void write_csv(const std::string& name, const CsvTable& t) { write_text(name, t.str()); }

  std::filesystem::path artifact(const std::string& name) {
    const auto path = config_.out_dir / name;
    summary_.artifacts.push_back(path);
    return path;
  }

 private:
  const ExperimentConfig& config_;
  RunSummary summary_;
};

inline FeatureDataset load_data(const ExperimentConfig& c) {
  return stage("load data", [&] {
    if (!c.data_path.empty()) return load_features(c.data_path);
    return generate_synthetic(c.synthetic);
  });
}

inline void run_gendata(Run& run) {
  const auto& c = run.config();
  const auto data = stage("generate", [&] { return generate_synthetic(c.synthetic); });
  stage("write", [&] { save_features(data, run.artifact("dataset.seaf")); });
  run.summary().metrics["samples"] = static_cast<double>(data.size());
  run.summary().metrics["classes"] = data.class_count;
  run.summary().metrics["feature_dim"] = static_cast<double>(data.dim());
}

inline CsvTable class_accuracy_csv(const std::map<ClassId, double>& acc) {
  CsvTable t({"class_id", "accuracy"});
  for (const auto& [c, a] : acc) {
    CsvTable::Row row;
    row << c << a;
    t.add(row);
  }
  return t;
}

inline Agent run_train_stage(Run& run, const FeatureDataset& data) {
  const auto& c = run.config();
  TrainResult history;
  Agent agent = stage("train", [&] {
    return train_new_agent(c.geometry(data.dim()), DatasetView(data), c.train, c.seed, &history);
  });
  const auto acc = evaluate_all(agent, DatasetView(data));
  stage("write", [&] {
    run.write_csv("history.csv", history_csv(history));
    run.write_csv("class_accuracy.csv", class_accuracy_csv(acc));
    save_agent(agent, run.artifact("agent.sea"));
  });
  run.summary().metrics["test_accuracy"] = mean_accuracy(acc);
  return agent;
}

inline void run_train(Run& run) { run_train_stage(run, load_data(run.config())); }

inline void run_infer(Run& run) {
  const auto& c = run.config();
  const auto data = load_data(c);
  std::vector<std::vector<double>> acc(c.rounds);
  std::vector<ClassId> holdouts(c.rounds);
  stage("infer", [&] {
    parallel_rounds(c.rounds, c.threads, [&](std::size_t r) {
      const std::uint64_t seed = derive_seed(c.seed, streams::kRounds + r);
      const ClassId hold = holdout_for_round(data, static_cast<std::uint32_t>(r));
      holdouts[r] = hold;
      const auto sp = split(data, hold);
      const Agent agent = train_new_agent(c.geometry(data.dim()), sp.learned, c.train, seed);
      Rng rng(derive_seed(seed, streams::kSpeakerExtend));
      acc[r] = infer_realizations(agent, data, hold, c.infer, rng);
    });
  });
  CsvTable t({"round", "holdout_class", "realization", "accuracy"});
  std::vector<double> medians;
  for (std::uint32_t r = 0; r < c.rounds; ++r) {
    for (std::size_t k = 0; k < acc[r].size(); ++k) {
      CsvTable::Row row;
      row << r << holdouts[r] << k << acc[r][k];
      t.add(row);
    }
    medians.push_back(median(acc[r]));
  }
  stage("write", [&] { run.write_csv("infer.csv", t); });
  run.summary().metrics["mean_median_accuracy"] = mean(medians);
}

inline void run_communicate(Run& run) {
  const auto& c = run.config();
  const auto data = load_data(c);
  const DatasetView all(data);
  const Geometry geometry = c.geometry(data.dim());
  const Agent speaker =
      stage("train speaker", [&] { return train_new_agent(geometry, all, c.train, c.seed); });
  const auto sets = stage("extend symbols", [&] {
    Rng rng(derive_seed(c.seed, streams::kSpeakerExtend));
    return speaker_symbol_sets(speaker, all, c.comms.variants, c.infer.hyper, rng);
  });
  std::vector<GameRound> rounds(c.rounds);
  stage("game", [&] {
    parallel_rounds(c.rounds, c.threads, [&](std::size_t r) {
      const std::uint64_t seed = derive_seed(c.seed, streams::kRounds + r);
      const ClassId hold = holdout_for_round(data, static_cast<std::uint32_t>(r));
      const auto sp = split(data, hold);
      const Agent listener = train_new_agent(geometry, sp.learned, c.train, seed);
      Rng rng(derive_seed(seed, streams::kSpeakerExtend));
      TIModule ti = build_ti(c.symbol_len, rng, c.comms.ti);
      const auto shared = sp.learned.classes();
      const auto pairs = translation_pairs(sets, listener.bank, shared);
      train_ti(ti, pairs, c.comms.schedule, rng);
      const auto out = run_game(speaker, listener, ti, hold, all, rng);
      rounds[r] = {static_cast<std::uint32_t>(r), hold, out.accuracy, out.control_accuracy};
    });
  });
  std::vector<double> acc, ctrl;
  double wins = 0;
  for (const auto& g : rounds) {
    acc.push_back(g.accuracy);
    ctrl.push_back(g.control_accuracy);
    wins += g.accuracy > g.control_accuracy;
  }
  stage("write", [&] { run.write_csv("game.csv", game_csv(rounds)); });
  run.summary().metrics["median_accuracy"] = median(acc);
  run.summary().metrics["median_control_accuracy"] = median(ctrl);
  run.summary().metrics["wins"] = wins;
}

inline void run_analyze(Run& run) {
  const auto& c = run.config();
  const auto data = load_data(c);
  const Agent agent = c.analyze.agent_path.empty()
                          ? run_train_stage(run, data)
                          : stage("load agent", [&] { return load_agent(c.analyze.agent_path); });
  std::vector<Vector> symbols;
  std::vector<std::string> names;
  const auto all_names = class_names(data);
  for (auto id : agent.bank.ids()) {
    symbols.push_back(agent.bank.at(id));
    names.push_back(id < all_names.size() ? all_names[id] : "class_" + std::to_string(id));
  }
  const auto d = stage("cluster", [&] { return cosine_distance_matrix(symbols); });
  const auto dend = stage("cluster", [&] { return upgma(d); });
  const auto coph = cophenetic_distances(dend);
  const DistanceMatrix reference = stage("reference", [&] {
    switch (c.analyze.reference) {
      case Reference::kSelf: return coph;
      case Reference::kSymbolDistance: return d;
      case Reference::kClassMeans: {
        const Matrix means = class_feature_means(data);
        std::vector<Vector> cols;
        for (auto id : agent.bank.ids()) cols.push_back(means.col(id));
        return cosine_distance_matrix(cols);
      }
    }
    throw ValidationError("unknown reference");
  });
  const auto test = stage("shuffle test", [&] {
    Rng rng(derive_seed(c.seed, streams::kShuffle));
    return shuffle_significance(symbols, reference, c.analyze.trials, rng);
  });
  stage("write", [&] {
    run.write_text("dendrogram.nwk", to_newick(dend, names) + "\n");
    run.write_csv("semantic_edges.csv", edges_csv(semantic_network(dend, d), names));
    run.write_csv("distances.csv", matrix_csv(d, names));
    run.write_csv("cophenetic.csv", matrix_csv(coph, names));
    CsvTable report({"observed", "p_value", "null_q99", "trials"});
    CsvTable::Row row;
    row << test.observed << test.p_value() << test.null_quantile(0.99) << c.analyze.trials;
    report.add(row);
    run.write_csv("cophenetic_report.csv", report);
    CsvTable null({"trial", "c"});
    for (std::size_t i = 0; i < test.null_distribution.size(); ++i) {
      CsvTable::Row nr;
      nr << i << test.null_distribution[i];
      null.add(nr);
    }
    run.write_csv("shuffle_null.csv", null);
  });
  run.summary().metrics["cophenetic_correlation"] = test.observed;
  run.summary().metrics["p_value"] = test.p_value();
}

// Symbols taken from (possibly stand-in) word vectors reduced by PCA.
inline SymbolBank word_vector_bank(const ExperimentConfig& c, const FeatureDataset& data) {
  auto names = class_names(data);
  WordVectorTable table;
  if (c.wordvec.path.empty()) {
    table = make_standin_word_vectors(class_feature_means(data), c.wordvec.standin_dim,
                                      c.wordvec.standin_noise, c.seed);
  } else {
    table = load_word_vectors(c.wordvec.path, names);
  }
  return reduce_word_vectors(table, names, c.wordvec.target_dim, c.wordvec.amplify);
}

inline void run_wordvec(Run& run) {
  const auto& c = run.config();
  const auto data = load_data(c);
  const DatasetView all(data);
  const SymbolBank bank = stage("word vectors", [&] { return word_vector_bank(c, data); });
  std::vector<double> acc(c.rounds);
  std::vector<ClassId> holdouts(c.rounds);
  stage("train", [&] {
    parallel_rounds(c.rounds, c.threads, [&](std::size_t r) {
      const std::uint64_t seed = derive_seed(c.seed, streams::kRounds + r);
      const ClassId hold = holdout_for_round(data, static_cast<std::uint32_t>(r));
      holdouts[r] = hold;
      const auto sp = split(data, hold);
      Rng init(derive_seed(seed, streams::kAgentInit));
      Agent agent = make_agent(c.geometry(data.dim()), init);
      agent.bank = bank;
      agent.bank.erase(hold);
      TrainConfig t = c.train;
      t.train_symbols = false;
      t.seed = derive_seed(seed, streams::kTrain);
      seanet::train(agent, sp.learned, t);
      acc[r] = evaluate_symbol(agent, all, hold, bank.at(hold));
    });
  });
  CsvTable t({"round", "holdout_class", "accuracy"});
  for (std::uint32_t r = 0; r < c.rounds; ++r) {
    CsvTable::Row row;
    row << r << holdouts[r] << acc[r];
    t.add(row);
  }
  std::vector<std::string> header{"class_id"};
  for (Index i = 0; i < c.symbol_len; ++i) header.push_back("s" + std::to_string(i));
  CsvTable symbols(header);
  for (const auto& [id, s] : bank) {
    CsvTable::Row row;
    row << id;
    for (Index i = 0; i < s.size(); ++i) row << s[i];
    symbols.add(row);
  }
  stage("write", [&] {
    run.write_csv("wordvec.csv", t);
    run.write_csv("wordvec_symbols.csv", symbols);
  });
  run.summary().metrics["median_accuracy"] = median(acc);
}

}  // namespace detail

// Executes the pipeline, writing resolved_config.json, the pipeline's
// artifacts and summary.json under config.out_dir.
inline RunSummary run(const ExperimentConfig& config) {
  validate_config(config);
  const auto start = std::chrono::steady_clock::now();
  detail::Run r(config);
  detail::stage("prepare output", [&] {
    std::filesystem::create_directories(config.out_dir);
    r.write_text("resolved_config.json", resolved_json(config).dump(2) + "\n");
  });
  switch (config.kind) {
    case ExperimentKind::kGendata: detail::run_gendata(r); break;
    case ExperimentKind::kTrain: detail::run_train(r); break;
    case ExperimentKind::kInfer: detail::run_infer(r); break;
    case ExperimentKind::kCommunicate: detail::run_communicate(r); break;
    case ExperimentKind::kAnalyze: detail::run_analyze(r); break;
    case ExperimentKind::kWordvec: detail::run_wordvec(r); break;
  }
  auto& s = r.summary();
  s.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  s.artifacts.push_back(config.out_dir / "summary.json");
  detail::stage("write", [&] {
    std::ofstream out(config.out_dir / "summary.json");
    out << s.to_json().dump(2) << "\n";
    if (!out) throw Error("cannot write summary.json");
  });
  return s;
}

}  // namespace seanet

#endif  // SEANET_EXPERIMENT_HPP_
