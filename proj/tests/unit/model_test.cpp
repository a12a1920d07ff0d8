// Copyright 2026 The groc-lm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "gradcheck.hpp"
#include "groc/errors.hpp"
#include "groc/model.hpp"
#include "toy_model.hpp"

namespace groc {
namespace {

using testing::max_rel_error;
using testing::numeric_grad;
using testing::random_tensor;
using testing::sized_vocab;
using testing::tiny_config;
using testing::toy_lexicon;
using testing::toy_vocab;

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

Window toy_window(const Vocabulary& vocab) {
  auto tokens = tokenize_text("the cat sat on the mat\nthe mat sat on the\n");
  auto plan = batchify(encode(tokens, vocab), 2, 5);
  return plan.window(0);
}

Tensor full_loss(const LanguageModel& m, const Window& w, const DropoutMasks* masks) {
  const auto& words = m.vocab().tokens();
  Tensor e_in = m.input_matrix(words);
  auto pre = m.prefix_forward(ops::gather_rows(e_in, w.inputs), w.steps, m.initial_state(w.lanes), masks);
  auto out = m.output_layer(e_in, masks);
  return ops::softmax_cross_entropy(m.logits(pre.query, out, masks), w.targets);
}

TEST(Model, ConfigJsonRoundTrip) {
  auto c = tiny_config();
  c.out_activation = ops::Activation::selu;
  auto back = model_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_THROW(model_config_from_json({{"hidden", 4}, {"typo", 1}}), InputError);
  EXPECT_THROW(model_config_from_json({{"head", "softmax"}}), InputError);
  EXPECT_THROW(model_config_from_json({{"hidden_dropout", 1.5}}), InputError);
}

TEST(Model, GrocCountIndependentOfVocabulary) {
  ModelConfig c;
  std::size_t first = 0;
  for (std::size_t v : {100u, 1000u, 10000u}) {
    LanguageModel m(c, sized_vocab(v));
    EXPECT_EQ(m.parameter_count(), LanguageModel::parameter_count(c, v));
    if (!first) first = m.parameter_count();
    EXPECT_EQ(m.parameter_count(), first);
  }
}

TEST(Model, BaselineCountsGrowPerWord) {
  ModelConfig c;
  const std::size_t d = c.dim();
  for (HeadKind head : {HeadKind::tied, HeadKind::lookup, HeadKind::bilinear}) {
    c.head = head;
    c.out_layers = 0;
    LanguageModel small(c, sized_vocab(100));
    LanguageModel large(c, sized_vocab(1000));
    EXPECT_EQ(small.parameter_count(), LanguageModel::parameter_count(c, 100));
    const std::size_t per_word = head == HeadKind::lookup ? 2 * d + 1 : d + 1;
    EXPECT_EQ(large.parameter_count() - small.parameter_count(), 900 * per_word);
  }
  c.head = HeadKind::lookup;
  EXPECT_EQ(LanguageModel::head_parameter_count(c, 101) - LanguageModel::head_parameter_count(c, 100),
            d + 1);
}

TEST(Model, HandCountedTinyModel) {
  auto c = tiny_config(HeadKind::tied);
  c.layers = 1;
  LanguageModel m(c, toy_vocab());
  // embed.in 7x4, lstm 4x20 + 5x20 + 20, bridge 5x4 + 4, bias.word 6
  EXPECT_EQ(m.parameter_count(), 28u + 80u + 100u + 20u + 20u + 4u + 6u);
}

TEST(Model, ZeroWeightsGiveConstantStates) {
  LanguageModel m(tiny_config(), toy_vocab(), toy_lexicon());
  for (auto& [name, t] : m.params()) {
    for (auto& v : t.mutable_data()) v = 0.0;
  }
  Rng rng(1);
  auto x = random_tensor(rng, {6 * 2, 4}, -1, 1, false);
  auto r = m.prefix_forward(x, 6, m.initial_state(2), nullptr);
  for (double v : r.hidden.data()) EXPECT_EQ(v, 0.0);
}

TEST(Model, HalfWindowsMatchWholeWindow) {
  LanguageModel m(tiny_config(), toy_vocab(), toy_lexicon());
  Rng rng(2);
  const std::size_t lanes = 3, steps = 8;
  auto x = random_tensor(rng, {steps * lanes, 4}, -1, 1, false);
  auto whole = m.prefix_forward(x, steps, m.initial_state(lanes), nullptr);
  auto a = m.prefix_forward(ops::slice(x, 0, 0, 4 * lanes), 4, m.initial_state(lanes), nullptr);
  auto b = m.prefix_forward(ops::slice(x, 0, 4 * lanes, 8 * lanes), 4, a.state, nullptr);
  auto joined = ops::concat({a.hidden, b.hidden}, 0);
  EXPECT_EQ(values(joined), values(whole.hidden));
  EXPECT_EQ(values(b.state.c[1]), values(whole.state.c[1]));
}

TEST(Model, StateMismatchIsContractError) {
  LanguageModel m(tiny_config(), toy_vocab(), toy_lexicon());
  auto x = Tensor::zeros({4, 4});
  EXPECT_THROW(m.prefix_forward(x, 2, m.initial_state(3), nullptr), ContractError);
  auto s = m.initial_state(2);
  s.h.pop_back();
  EXPECT_THROW(m.prefix_forward(x, 2, s, nullptr), ContractError);
}

TEST(Model, PrefixGradientsThroughFiveSteps) {
  LanguageModel m(tiny_config(), toy_vocab(), toy_lexicon());
  Rng rng(4);
  auto x = random_tensor(rng, {5 * 2, 4}, -1, 1, true);
  auto w = random_tensor(rng, {5 * 2, 4}, -1, 1, false);
  auto loss = [&] {
    return ops::sum(ops::mul(m.prefix_forward(x, 5, m.initial_state(2), nullptr).query, w));
  };
  m.params().zero_grad();
  backward(loss());
  EXPECT_LT(max_rel_error(x.grad(), numeric_grad([&] { return loss().item(); }, x)), 1e-4);
  for (const char* name : {"lstm0.w_ih", "lstm0.w_hh", "lstm1.bias", "bridge.weight"}) {
    auto& p = m.params().get(name);
    EXPECT_LT(max_rel_error(p.grad(), numeric_grad([&] { return loss().item(); }, p)), 1e-4) << name;
  }
}

TEST(Model, ResidualDepthZeroIsIdentity) {
  auto c = tiny_config();
  c.out_layers = 0;
  LanguageModel m(c, toy_vocab(), toy_lexicon());
  Rng rng(5);
  auto e = random_tensor(rng, {6, 4}, -1, 1, false);
  EXPECT_EQ(values(m.residual_transform(e, nullptr)), values(e));
}

TEST(Model, ResidualZeroBranchIsIdentity) {
  LanguageModel m(tiny_config(), toy_vocab(), toy_lexicon());
  for (const char* name : {"out.layer1.weight", "out.layer1.bias"}) {
    for (auto& v : m.params().get(name).mutable_data()) v = 0.0;
  }
  Rng rng(6);
  auto e = random_tensor(rng, {6, 4}, -1, 1, false);
  EXPECT_EQ(values(m.residual_transform(e, nullptr)), values(e));
}

TEST(Model, ResidualDepthTwoMatchesRecurrence) {
  auto c = tiny_config();
  c.out_layers = 2;
  c.out_activation = ops::Activation::tanh;
  LanguageModel m(c, toy_vocab(), toy_lexicon());
  Rng rng(7);
  auto e = random_tensor(rng, {6, 4}, -1, 1, false);
  auto got = m.residual_transform(e, nullptr);
  std::vector<double> cur = values(e);
  for (int j = 1; j <= 2; ++j) {
    auto w = m.params().get("out.layer" + std::to_string(j) + ".weight").data();
    auto b = m.params().get("out.layer" + std::to_string(j) + ".bias").data();
    std::vector<double> next(cur.size());
    for (std::size_t r = 0; r < 6; ++r) {
      for (std::size_t o = 0; o < 4; ++o) {
        double acc = b[o];
        for (std::size_t i = 0; i < 4; ++i) acc += cur[r * 4 + i] * w[i * 4 + o];
        next[r * 4 + o] = std::tanh(acc) + e.at(r * 4 + o);
      }
    }
    cur = next;
  }
  for (std::size_t i = 0; i < cur.size(); ++i) EXPECT_NEAR(got.at(i), cur[i], 1e-12);
}

TEST(Model, CompositionalBias) {
  LanguageModel m(tiny_config(), toy_vocab(), toy_lexicon());
  Rng rng(8);
  auto e = random_tensor(rng, {6, 4}, -1, 1, false);
  auto& w = m.params().get("bias.weight");
  auto& a = m.params().get("bias.offset");
  auto wv = values(w);
  for (auto& v : w.mutable_data()) v = 0.0;
  a.mutable_data()[0] = 0.0;
  for (double v : values(m.compositional_bias(e))) EXPECT_EQ(v, 0.0);
  a.mutable_data()[0] = 0.7;
  for (double v : values(m.compositional_bias(e))) EXPECT_DOUBLE_EQ(v, std::tanh(0.7));

  std::copy(wv.begin(), wv.end(), w.mutable_data().begin());
  a.mutable_data()[0] = -0.3;
  auto b = m.compositional_bias(e);
  ASSERT_EQ(b.shape(), Shape{6});
  for (std::size_t r = 0; r < 6; ++r) {
    double z = -0.3;
    for (std::size_t j = 0; j < 4; ++j) z += wv[j] * e.at(r * 4 + j);
    EXPECT_NEAR(b.at(r), std::tanh(z), 1e-12);
  }
}

TEST(Model, NextWordDistribution) {
  std::vector<double> q{0.3, -0.2};
  auto uniform = next_word_distribution(q, Tensor::zeros({5, 2}), std::vector<double>(5, 0.0));
  for (double p : uniform) EXPECT_DOUBLE_EQ(p, 0.2);

  auto closed = next_word_distribution(std::vector<double>{1.0}, Tensor::from({2, 1}, {std::log(3.0), 0.0}),
                                       std::vector<double>{0.0, 0.0});
  EXPECT_NEAR(closed[0], 0.75, 1e-15);
  EXPECT_NEAR(closed[1], 0.25, 1e-15);

  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t v = 1 + rng.below(30);
    auto logits = random_tensor(rng, {1, v}, -20, 20, false);
    auto p = softmax_rows(logits);
    const double shift = rng.uniform(-50, 50);
    std::vector<double> shifted(logits.data().begin(), logits.data().end());
    for (auto& x : shifted) x += shift;
    auto q2 = softmax_rows(Tensor::from({1, v}, shifted));
    double total = 0.0;
    for (std::size_t i = 0; i < v; ++i) {
      total += p[i];
      EXPECT_GT(p[i], 0.0);
      EXPECT_NEAR(p[i], q2[i], 1e-12);
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
  EXPECT_THROW(softmax_rows(Tensor::from({1, 2}, {0.0, std::nan("")})), NumericError);
}

TEST(Model, TiedAliasesInputTable) {
  LanguageModel m(tiny_config(HeadKind::tied), toy_vocab());
  auto out = m.output_layer(m.input_matrix(m.vocab().tokens()), nullptr);
  auto& table = m.params().get("embed.in");
  table.mutable_data()[2 * 4 + 1] += 0.25;
  auto after = m.output_layer(m.input_matrix(m.vocab().tokens()), nullptr);
  EXPECT_EQ(after.embeddings.at(2 * 4 + 1) - out.embeddings.at(2 * 4 + 1), table.at(2 * 4 + 1) - out.embeddings.at(2 * 4 + 1));
  EXPECT_EQ(after.embeddings.at(2 * 4 + 1), table.at(2 * 4 + 1));
}

TEST(Model, BilinearIdentity) {
  LanguageModel m(tiny_config(HeadKind::bilinear), toy_vocab());
  auto w = m.params().get("bilinear.weight").mutable_data();
  std::fill(w.begin(), w.end(), 0.0);
  for (std::size_t i = 0; i < 4; ++i) w[i * 4 + i] = 1.0;
  auto e_in = m.input_matrix(m.vocab().tokens());
  EXPECT_EQ(values(m.output_layer(e_in, nullptr).embeddings), values(e_in));
}

TEST(Model, BaselinesUseUnknownRowForNovelWords) {
  LanguageModel m(tiny_config(HeadKind::tied), toy_vocab());
  std::vector<std::string> words{"cat", "zebra"};
  auto rows = m.input_matrix(words);
  auto table = m.params().get("embed.in");
  for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(rows.at(4 + j), table.at(6 * 4 + j));
  Vocabulary other;
  other.add("cat");
  EXPECT_THROW(m.support_size(other), ContractError);
}

TEST(Model, EvalForwardIsBitwiseRepeatable) {
  LanguageModel m(tiny_config(), toy_vocab(), toy_lexicon());
  auto w = toy_window(m.vocab());
  NoGradGuard guard;
  EXPECT_EQ(full_loss(m, w, nullptr).item(), full_loss(m, w, nullptr).item());
}

TEST(Model, MaskedLexiconEqualsSurfaceOnlyAblation) {
  auto c = tiny_config();
  LanguageModel full(c, toy_vocab(), std::make_shared<Lexicon>(mask_coverage(*toy_lexicon(), 0.0, 1)));
  c.encoder.use_relations = false;
  c.encoder.use_definitions = false;
  LanguageModel ablated(c, toy_vocab(), toy_lexicon());
  auto w = toy_window(full.vocab());
  NoGradGuard guard;
  EXPECT_EQ(full_loss(full, w, nullptr).item(), full_loss(ablated, w, nullptr).item());
}

TEST(Model, FullLossGradientsMatchFiniteDifferences) {
  auto c = tiny_config();
  c.hidden_dropout = 0.3;
  c.out_dropout = 0.2;
  LanguageModel m(c, toy_vocab(), toy_lexicon());
  auto w = toy_window(m.vocab());
  auto masks = m.sample_masks(w.lanes);
  m.params().zero_grad();
  backward(full_loss(m, w, &masks));
  for (auto& [name, p] : m.params()) {
    ASSERT_TRUE(p.has_grad()) << name;
    auto numeric = numeric_grad([&] { return full_loss(m, w, &masks).item(); }, p);
    EXPECT_LT(max_rel_error(p.grad(), numeric), 1e-3) << name;
  }
}

TEST(Model, BaselineLossGradients) {
  for (HeadKind head : {HeadKind::lookup, HeadKind::tied, HeadKind::bilinear, HeadKind::deep_residual}) {
    LanguageModel m(tiny_config(head), toy_vocab());
    auto w = toy_window(m.vocab());
    m.params().zero_grad();
    backward(full_loss(m, w, nullptr));
    for (auto& [name, p] : m.params()) {
      auto numeric = numeric_grad([&] { return full_loss(m, w, nullptr).item(); }, p);
      EXPECT_LT(max_rel_error(p.grad(), numeric), 1e-4) << head_name(head) << " " << name;
    }
  }
}

TEST(Model, CheckpointRoundTrip) {
  auto c = tiny_config();
  LanguageModel m(c, toy_vocab(), toy_lexicon());
  m.params().rng().next_u64();
  auto path = std::filesystem::temp_directory_path() / "groc_model_test.ckpt";
  write_checkpoint(path, m.to_checkpoint());
  auto back = LanguageModel::from_checkpoint(read_checkpoint(path), toy_lexicon());
  EXPECT_EQ(back.vocab(), m.vocab());
  EXPECT_EQ(back.params().rng().state(), m.params().rng().state());
  auto w = toy_window(m.vocab());
  NoGradGuard guard;
  EXPECT_EQ(full_loss(back, w, nullptr).item(), full_loss(m, w, nullptr).item());

  auto embedded = LanguageModel::from_checkpoint(read_checkpoint(path));
  EXPECT_EQ(embedded.lexicon().lookup("cat").definition, toy_lexicon()->lookup("cat").definition);
  EXPECT_EQ(full_loss(embedded, w, nullptr).item(), full_loss(m, w, nullptr).item());
  std::filesystem::remove(path);
}

TEST(Model, ExtendVocabulary) {
  const auto base = toy_vocab();
  Vocabulary target;
  for (std::size_t i = 0; i < 100; ++i) target.add("new" + std::to_string(i));
  auto u = union_vocab(base, target);

  LanguageModel tied(tiny_config(HeadKind::tied), base);
  const auto before = tied.parameter_count();
  auto old_unk = values(ops::slice(tied.params().get("embed.in"), 0, 6, 7));
  tied.extend_vocabulary(u);
  EXPECT_EQ(tied.parameter_count() - before, 100u * (4 + 1));
  EXPECT_EQ(values(ops::slice(tied.params().get("embed.in"), 0, 106, 107)), old_unk);
  EXPECT_EQ(tied.support_size(u), 106u);

  LanguageModel groc(tiny_config(), base, toy_lexicon());
  const auto groc_before = groc.parameter_count();
  groc.extend_vocabulary(u);
  EXPECT_EQ(groc.parameter_count(), groc_before);
}

TEST(Model, SampledMasksAreInvertedDropout) {
  auto c = tiny_config();
  c.hidden_dropout = 0.5;
  c.out_dropout = 0.25;
  LanguageModel m(c, toy_vocab(), toy_lexicon());
  auto masks = m.sample_masks(3);
  ASSERT_EQ(masks.hidden.size(), 2u);
  EXPECT_EQ(masks.hidden[0].size(), 15u);
  EXPECT_EQ(masks.transform.size(), 1u);
  EXPECT_EQ(masks.output.size(), 4u);
  for (double v : masks.hidden[0]) EXPECT_TRUE(v == 0.0 || v == 2.0);
  for (double v : masks.output) EXPECT_TRUE(v == 0.0 || v == 1.0 / 0.75);
}

}  // namespace
}  // namespace groc
