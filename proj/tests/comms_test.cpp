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


#include "seanet/comms.hpp"

#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "seanet/data_io.hpp"
#include "test_support.hpp"

namespace seanet {
namespace {

TIGeometry small_geo(double dropout = 0.0) {
  TIGeometry g;
  g.hidden_layers = 2;
  g.width = 32;
  g.dropout = dropout;
  return g;
}

TEST(BuildTi, DefaultGeometry) {
  Rng rng(1);
  const TIModule ti = build_ti(20, rng);
  ASSERT_EQ(ti.layers.size(), 11u);
  for (std::size_t l = 0; l < 10; ++l) {
    EXPECT_EQ(ti.layers[l].out_size(), 500);
    EXPECT_EQ(ti.layers[l].activation, Activation::kReLU);
  }
  EXPECT_EQ(ti.layers.back().out_size(), 20);
  EXPECT_EQ(ti.layers.back().activation, Activation::kIdentity);
  EXPECT_EQ(ti.symbol_len(), 20);
  EXPECT_EQ(parameter_count(ti.layers), 2275020u);
  EXPECT_EQ(ti.dropout, 0.3);
}

TEST(BuildTi, RejectsBadGeometry) {
  Rng rng(1);
  EXPECT_THROW(build_ti(0, rng), ValidationError);
  TIGeometry g = small_geo();
  g.hidden_layers = 0;
  EXPECT_THROW(build_ti(4, rng, g), ValidationError);
  g = small_geo(1.0);
  EXPECT_THROW(build_ti(4, rng, g), ValidationError);
}

TEST(Translate, PureAndChecked) {
  Rng rng(2);
  const TIModule ti = build_ti(6, rng, small_geo(0.3));
  const Vector s = uniform_vector(rng, 6, -1, 1);
  EXPECT_EQ(translate(ti, s), translate(ti, s));
  EXPECT_EQ(translate_batch(ti, Matrix(s)).col(0), translate(ti, s));
  EXPECT_THROW(translate(ti, Vector::Zero(5)), DimensionError);
}

TEST(Dropout, ZeroRateMatchesInference) {
  Rng rng(3);
  const TIModule ti = build_ti(6, rng, small_geo(0.0));
  const Matrix x = Matrix::Random(6, 4);
  EXPECT_EQ(ti_forward_train(ti, x, rng).output, translate_batch(ti, x));
}

TEST(Dropout, MasksAreInvertedBernoulli) {
  Rng rng(4);
  TIGeometry g = small_geo(0.3);
  g.hidden_layers = 1;
  g.width = 2000;
  TIModule ti = build_ti(3, rng, g);
  // Identity-like first layer with positive bias so every unit is active.
  ti.layers[0].weights.setZero();
  ti.layers[0].biases.setOnes();
  const auto fwd = ti_forward_train(ti, Matrix::Zero(3, 1), rng);
  const Matrix& hidden = fwd.tape.layer_output(0);
  std::size_t kept = 0;
  for (Index i = 0; i < hidden.rows(); ++i) {
    const double v = hidden(i, 0);
    ASSERT_TRUE(v == 0.0 || std::abs(v - 1.0 / 0.7) < 1e-15) << v;
    kept += v != 0.0;
  }
  EXPECT_NEAR(static_cast<double>(kept) / 2000.0, 0.7, 0.04);
}

TEST(Schedule, HalvesEveryTenEpochs) {
  TISchedule s;
  for (std::uint32_t e = 0; e < 10; ++e) EXPECT_EQ(s.lr_at(e), 1e-4);
  EXPECT_EQ(s.lr_at(10), 5e-5);
  EXPECT_EQ(s.lr_at(19), 5e-5);
  EXPECT_EQ(s.lr_at(20), 2.5e-5);
  for (std::uint32_t e = 0; e < s.epochs; ++e) EXPECT_GT(s.lr_at(e), 0.0);
}

TEST(Schedule, Validation) {
  TISchedule s;
  s.lr0 = 0.0;
  EXPECT_THROW(s.validate(), ValidationError);
  s = {};
  s.batch_size = 0;
  EXPECT_THROW(s.validate(), ValidationError);
  s = {};
  s.decay_every = 0;
  EXPECT_THROW(s.validate(), ValidationError);
}

std::vector<TranslationPair> linear_pairs(Rng& rng, int n, Index len) {
  std::vector<TranslationPair> pairs;
  for (int i = 0; i < n; ++i) {
    const Vector s = uniform_vector(rng, len, -1, 1);
    pairs.push_back({s, Vector(-0.5 * s), static_cast<ClassId>(i)});
  }
  return pairs;
}

TEST(TrainTi, FitsToyMap) {
  Rng rng(5);
  const auto pairs = linear_pairs(rng, 40, 6);
  TIModule ti = build_ti(6, rng, small_geo(0.0));
  TISchedule s;
  s.lr0 = 1e-3;
  s.decay = 1.0;
  s.epochs = 300;
  const double before = translation_mse(ti, pairs);
  const auto r = train_ti(ti, pairs, s, rng);
  EXPECT_EQ(r.epoch_mse.size(), 300u);
  EXPECT_LT(translation_mse(ti, pairs), 1e-3);
  EXPECT_LT(translation_mse(ti, pairs), 0.05 * before);
  for (const auto& p : pairs) EXPECT_LT((translate(ti, p.speaker) - p.listener).norm(), 0.15);
}

TEST(TrainTi, Deterministic) {
  Rng a(6), b(6);
  const auto pa = linear_pairs(a, 20, 4);
  const auto pb = linear_pairs(b, 20, 4);
  TIModule ta = build_ti(4, a, small_geo(0.3));
  TIModule tb = build_ti(4, b, small_geo(0.3));
  TISchedule s;
  s.epochs = 5;
  train_ti(ta, pa, s, a);
  train_ti(tb, pb, s, b);
  for (std::size_t l = 0; l < ta.layers.size(); ++l) {
    EXPECT_EQ(ta.layers[l].weights, tb.layers[l].weights);
  }
}

TEST(TrainTi, RejectsBadPairs) {
  Rng rng(7);
  TIModule ti = build_ti(4, rng, small_geo());
  EXPECT_THROW(train_ti(ti, std::vector<TranslationPair>{}, TISchedule{}, rng), ValidationError);
  std::vector<TranslationPair> bad{{Vector::Zero(4), Vector::Zero(3), 0}};
  EXPECT_THROW(train_ti(ti, bad, TISchedule{}, rng), DimensionError);
}

TEST(RandomSymbol, InsideEnvelope) {
  Rng rng(8);
  SymbolBank bank(3);
  bank.set(0, Vector{{-1.0, 0.0, 2.0}});
  bank.set(1, Vector{{1.0, 0.5, 2.0}});
  for (int i = 0; i < 1000; ++i) {
    const Symbol s = random_symbol(bank, rng);
    EXPECT_GE(s[0], -1.0);
    EXPECT_LE(s[0], 1.0);
    EXPECT_GE(s[1], 0.0);
    EXPECT_LE(s[1], 0.5);
    EXPECT_EQ(s[2], 2.0);
  }
  EXPECT_THROW(random_symbol(SymbolBank(3), rng), ValidationError);
}

struct GameFixture {
  FeatureDataset data;
  Agent speaker;
  Agent listener;
};

GameFixture game_fixture() {
  GameFixture f;
  SyntheticSpec spec;
  spec.classes = 3;
  spec.dim = 4;
  spec.train_per_class = 5;
  spec.test_per_class = 5;
  f.data = generate_synthetic(spec);
  Geometry g;
  g.symbol_len = 4;
  g.widths = {4, 3, 2};
  Rng rng(9);
  f.speaker = make_agent(g, rng);
  f.speaker.bank = random_bank(std::vector<ClassId>{0, 1, 2}, 4, rng);
  f.listener = make_agent(g, rng);
  f.listener.bank = random_bank(std::vector<ClassId>{0, 1}, 4, rng);
  return f;
}

TEST(Pairs, EveryVariantPairedWithListenerSymbol) {
  auto f = game_fixture();
  SymbolicHyper h;
  h.epochs = 5;
  Rng rng(10);
  const auto sets = speaker_symbol_sets(f.speaker, DatasetView(f.data), 2, h, rng);
  ASSERT_EQ(sets.size(), 3u);
  for (const auto& [c, v] : sets) {
    ASSERT_EQ(v.size(), 3u);
    EXPECT_EQ(v[0], f.speaker.bank.at(c));
  }
  const std::vector<ClassId> shared{0, 1};
  const auto pairs = translation_pairs(sets, f.listener.bank, shared);
  ASSERT_EQ(pairs.size(), 6u);
  for (const auto& p : pairs) {
    EXPECT_EQ(p.listener, f.listener.bank.at(p.class_id));
  }
  const std::vector<ClassId> missing{7};
  EXPECT_THROW(translation_pairs(sets, f.listener.bank, missing), ValidationError);
}

TEST(Game, LeavesAgentsUntouchedAndChecksRoles) {
  auto f = game_fixture();
  Rng rng(11);
  const TIModule ti = build_ti(4, rng, small_geo());
  const Agent speaker = f.speaker;
  const Agent listener = f.listener;
  const DatasetView view(f.data);
  const auto out = run_game(f.speaker, f.listener, ti, 2, view, rng);
  EXPECT_EQ(out.translated, translate(ti, f.speaker.bank.at(2)));
  EXPECT_GE(out.accuracy, 0.0);
  EXPECT_LE(out.accuracy, 1.0);
  EXPECT_TRUE(same_parameters(f.speaker, speaker));
  EXPECT_TRUE(same_parameters(f.listener, listener));
  EXPECT_EQ(f.listener.bank, listener.bank);
  EXPECT_THROW(run_game(f.speaker, f.listener, ti, 0, view, rng), ValidationError);
  EXPECT_THROW(run_game(f.speaker, f.listener, ti, 5, view, rng), ValidationError);
  const TIModule wide = build_ti(5, rng, small_geo());
  EXPECT_THROW(run_game(f.speaker, f.listener, wide, 2, view, rng), DimensionError);
}

TEST(GameCsv, Layout) {
  std::vector<GameRound> r{{0, 3, 0.75, 0.5}};
  EXPECT_EQ(game_csv(r).str(), "round,holdout_class,accuracy,control_accuracy\n0,3,0.75,0.5\n");
}

}  // namespace
}  // namespace seanet
