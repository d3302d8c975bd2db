#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "framelens/rng.hpp"
#include "framelens/transformer.hpp"
#include "scratch.hpp"

using namespace framelens;

namespace {

nn::TransformerModel tiny_model() {
  nn::EncoderConfig c;
  c.d_model = 8;
  c.heads = 2;
  c.ff = 12;
  c.layers = 2;
  c.max_len = 16;
  return nn::TransformerModel(c, nn::Vocabulary::from_tokens({"a", "b", "c", "d", "e"}), 3);
}

// Worst relative error between central differences and the analytic gradient.
template <typename Loss>
double worst_gradient_error(nn::TransformerModel& m, Loss loss) {
  double worst = 0.0;
  for (auto& p : m.params()) {
    for (Eigen::Index k = 0; k < p.value.size(); ++k) {
      const double old = p.value(k);
      p.value(k) = old + 1e-5;
      const double up = loss();
      p.value(k) = old - 1e-5;
      const double down = loss();
      p.value(k) = old;
      const double numeric = (up - down) / 2e-5;
      const double analytic = p.grad(k);
      const double err = std::abs(numeric - analytic) / std::max(1e-6, std::abs(numeric) + std::abs(analytic));
      if (std::abs(numeric - analytic) > 1e-8) worst = std::max(worst, err);
    }
  }
  return worst;
}

std::vector<std::string> repetitive_corpus(std::size_t n, std::uint64_t seed) {
  const std::vector<std::string> pattern{"the border wall", "the migrant caravan", "the visa office"};
  Rng rng(seed);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(pattern[rng.below(pattern.size())] + " today");
  return out;
}

}  // namespace

TEST_CASE("vocabulary orders by frequency then alphabetically after specials") {
  const auto v = nn::Vocabulary::build({{"b", "a", "b"}, {"c", "a", "b"}}, 100);
  REQUIRE(v.size() == nn::Vocabulary::kSpecial + 3);
  CHECK(v.token(nn::Vocabulary::kSpecial) == "b");
  CHECK(v.token(nn::Vocabulary::kSpecial + 1) == "a");
  CHECK(v.token(nn::Vocabulary::kSpecial + 2) == "c");
  CHECK(v.id("zzz") == nn::Vocabulary::kUnk);
  const auto capped = nn::Vocabulary::build({{"b", "a", "b"}, {"c", "a", "b"}}, nn::Vocabulary::kSpecial + 1);
  CHECK(capped.size() == nn::Vocabulary::kSpecial + 1);
}

TEST_CASE("encode prepends CLS and truncates") {
  const auto v = nn::Vocabulary::from_tokens({"x", "y"});
  const auto ids = v.encode({"x", "y", "x", "q"}, 3);
  REQUIRE(ids.size() == 3);
  CHECK(ids[0] == nn::Vocabulary::kCls);
  CHECK(ids[1] == v.id("x"));
}

TEST_CASE("classification gradient matches finite differences") {
  auto m = tiny_model();
  m.add_classifier_head(3, 5);
  const std::vector<int> ids{2, 4, 5, 6, 7, 8, 4};
  const std::vector<std::uint8_t> y{1, 0, 1};
  m.zero_grad();
  m.classification_step(ids, y, 1.0, true);
  CHECK(worst_gradient_error(m, [&] { return m.classification_step(ids, y, 1.0, false); }) < 1e-3);
}

TEST_CASE("masked-token gradient matches finite differences") {
  auto m = tiny_model();
  const std::vector<int> ids{2, 4, 5, 6, 7, 8, 4};
  m.zero_grad();
  Rng rng(9);
  m.mlm_step(ids, rng, 0.5, 1.0);
  CHECK(worst_gradient_error(m, [&] {
          Rng r(9);
          return m.mlm_eval(ids, r, 0.5);
        }) < 1e-3);
}

TEST_CASE("fresh encoders are seed-deterministic") {
  const nn::EncoderConfig c{};
  const std::vector<std::string> texts{"a b c", "b c d"};
  const auto a = nn::resolve_encoder("init:4", c, texts, 100);
  const auto b = nn::resolve_encoder("init:4", c, texts, 100);
  const auto d = nn::resolve_encoder("init:5", c, texts, 100);
  CHECK(a.same_weights(b));
  CHECK_FALSE(a.same_weights(d));
}

TEST_CASE("save and load preserve weights, head and predictions") {
  testing::ScratchDir dir("nn");
  auto m = tiny_model();
  m.add_classifier_head(2, 1);
  m.set_adapted_epochs(3);
  m.save(dir / "w.bin");
  const auto back = nn::TransformerModel::load(dir / "w.bin");
  CHECK(back.same_weights(m));
  CHECK(back.n_labels() == 2);
  CHECK(back.adapted_epochs() == 3);
  CHECK(back.config() == m.config());
  const auto ids = m.encode_text("a b zz");
  CHECK(back.predict_scores(ids) == m.predict_scores(ids));
}

TEST_CASE("domain adaptation lowers held-out masked-token loss") {
  const auto texts = repetitive_corpus(200, 1);
  const auto heldout = repetitive_corpus(50, 2);
  nn::EncoderConfig c;
  c.d_model = 16;
  c.ff = 32;
  const auto base = nn::resolve_encoder("init:0", c, texts, 100);
  nn::AdaptOptions opts;
  opts.epochs = 8;
  opts.adam.learning_rate = 5e-3;
  const auto adapted = nn::domain_adapt(base, texts, opts);
  CHECK(adapted.epoch_losses.size() == 8);
  CHECK(adapted.model.adapted_epochs() == 8);
  CHECK(nn::heldout_mlm_loss(adapted.model, heldout, 3) < nn::heldout_mlm_loss(base, heldout, 3));

  opts.epochs = 0;
  CHECK(nn::domain_adapt(base, texts, opts).model.same_weights(base));
}

TEST_CASE("snapshot and restore") {
  auto m = tiny_model();
  m.add_classifier_head(1, 2);
  const auto snap = m.snapshot();
  const auto copy = m;
  m.zero_grad();
  m.classification_step({2, 4, 5}, {1}, 1.0, true);
  m.adam_step({});
  CHECK_FALSE(m.same_weights(copy));
  m.restore(snap);
  CHECK(m.same_weights(copy));
}
