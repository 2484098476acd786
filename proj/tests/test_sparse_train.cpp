#include <doctest.h>

#include <cmath>

#include "signlab/datasets.hpp"
#include "signlab/sparse_train.hpp"

using namespace signlab;

TEST_CASE("flip fraction") {
  const Signs a{1, -1, 1}, b{1, 1, 1};
  CHECK(flip_fraction(a, b, Mask{1, 1, 1}) == doctest::Approx(1.0 / 3.0));
  CHECK(flip_fraction(a, b, Mask{1, 1, 0}) == doctest::Approx(0.5));
  CHECK(flip_fraction(a, a, Mask{1, 1, 1}) == 0.0);
  CHECK_THROWS(flip_fraction(a, b, Mask{0, 0, 0}));
  CHECK_THROWS(flip_fraction(a, Signs{1}, Mask{1, 1, 1}));
}

TEST_CASE("sign of zero is positive") {
  const std::vector<double> v{0.0, -0.0, -1e-300, 2.0};
  CHECK(signs_of(v) == Signs{1, 1, -1, 1});
}

TEST_CASE("perturb flips an exact count on the support") {
  const Signs s(100, 1);
  Mask m(100, 0);
  for (std::size_t i = 0; i < 100; i += 2) m[i] = 1;
  const Signs p = perturb_signs(s, m, 0.3, 4);
  std::size_t flipped = 0;
  for (std::size_t i = 0; i < 100; ++i) {
    if (p[i] != s[i]) {
      CHECK(m[i] == 1);
      ++flipped;
    }
  }
  CHECK(flipped == 15);
  CHECK(flip_fraction(s, p, m) == doctest::Approx(0.3));
  CHECK(perturb_signs(s, m, 0.0, 4) == s);
}

TEST_CASE("he init scale") {
  const SmallNet net = make_mlp({2, 400, 300}, true, LossKind::cross_entropy, 1);
  double ss = 0.0;
  for (double v : net.layers[1].weight.values()) ss += v * v;
  CHECK(ss / 120000.0 == doctest::Approx(2.0 / 400.0).epsilon(0.02));
  for (double b : net.layers[0].bias->values()) CHECK(b == 0.0);
}

TEST_CASE("accuracy by argmax") {
  SmallNet net = make_mlp({2, 2}, false, LossKind::cross_entropy, 0);
  net.layers[0].weight = Tensor::matrix(2, 2, {1.0, 0.0, 0.0, 1.0});
  Dataset d{Tensor::matrix(3, 2, {2.0, 1.0, 0.0, 1.0, 5.0, 1.0}), Tensor::matrix(3, 1, {0, 1, 1}), 2};
  CHECK(accuracy(net, d) == doctest::Approx(2.0 / 3.0));
}

namespace {

struct Setup {
  DataSplit data;
  SmallNet net;
  MaskSpec mask;
  TrainConfig cfg;
};

Setup small_setup() {
  Setup s;
  s.data = two_moons_split(200, 100, 0.1, 1);
  s.net = make_mlp({2, 16, 16, 2}, true, LossKind::cross_entropy, 2);
  s.mask = random_balanced_mask(weight_sizes(s.net), 0.8, 3);
  s.cfg.epochs = 4;
  s.cfg.warmup_epoch = 1;
  s.cfg.schedule = {1, 2, 1.0};
  s.cfg.final_sharpness = false;
  s.cfg.seed = 5;
  return s;
}

}  // namespace

TEST_CASE("masked weights stay zero in both modes") {
  Setup s = small_setup();
  for (bool sign_in : {false, true}) {
    const TrainResult r = train_sparse(s.net, s.mask, s.data, s.cfg, sign_in);
    CHECK(r.off_support_zero);
    CHECK(r.history.size() == 5);
    CHECK(r.flips.flips_per_epoch.size() == 4);
    for (std::size_t l = 0; l < r.net.layers.size(); ++l)
      for (std::size_t i = 0; i < s.mask.layers[l].size(); ++i)
        if (!s.mask.layers[l][i]) CHECK(r.net.layers[l].weight[i] == 0.0);
  }
}

TEST_CASE("cumulative flip fraction is monotone and consistent") {
  Setup s = small_setup();
  const TrainResult r = train_sparse(s.net, s.mask, s.data, s.cfg, true);
  for (std::size_t e = 1; e < r.flips.cumulative_fraction.size(); ++e) {
    CHECK(r.flips.cumulative_fraction[e] >= r.flips.cumulative_fraction[e - 1]);
  }
  CHECK(r.flips.init_to_final() <= r.flips.cumulative_fraction.back() + 1e-15);
}

TEST_CASE("training is reproducible") {
  Setup s = small_setup();
  const TrainResult a = train_sparse(s.net, s.mask, s.data, s.cfg, true);
  const TrainResult b = train_sparse(s.net, s.mask, s.data, s.cfg, true);
  CHECK(flatten_params(a.net) == flatten_params(b.net));
}

TEST_CASE("sign-in with one step matches the factor update by hand") {
  // One batch of the full data, no decay, no bias: theta' = (m - lr w g)(w - lr m g).
  Setup s = small_setup();
  SmallNet net = make_mlp({2, 2}, false, LossKind::cross_entropy, 1);
  MaskSpec mask{{Mask{1, 1, 1, 1}}, 0.0, "full"};
  DataSplit data{take_rows(s.data.train, 8), take_rows(s.data.test, 8)};
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 8;
  cfg.frobenius_decay = 0.0;
  cfg.final_sharpness = false;
  cfg.warmup_epoch = 0;
  const GradStore g = loss_gradient(net, data.train.x, data.train.y);
  const TrainResult r = train_sparse(net, mask, data, cfg, true);
  for (std::size_t i = 0; i < 4; ++i) {
    const FactorPair f = split_scalar(net.layers[0].weight[i], 1.0);
    const double gi = g.weight[0][i];
    const double expect = (f.m - cfg.lr * f.w * gi) * (f.w - cfg.lr * f.m * gi);
    CHECK(r.net.layers[0].weight[i] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("reinit modes copy what they promise") {
  Setup s = small_setup();
  SmallNet ck = s.net;
  apply_mask(ck, s.mask);
  const SmallNet a = reinit_from_checkpoint(ck, s.mask, ReinitMode::signs_random_magnitude, 1);
  const SmallNet b = reinit_from_checkpoint(ck, s.mask, ReinitMode::magnitude_random_signs, 1);
  const SmallNet c = reinit_from_checkpoint(ck, s.mask, ReinitMode::fully_random, 1);
  std::size_t sign_diffs = 0;
  for (std::size_t l = 0; l < ck.layers.size(); ++l) {
    for (std::size_t i = 0; i < ck.layers[l].weight.size(); ++i) {
      const double ref = ck.layers[l].weight[i];
      if (!s.mask.layers[l][i]) {
        CHECK(a.layers[l].weight[i] == 0.0);
        CHECK(b.layers[l].weight[i] == 0.0);
        CHECK(c.layers[l].weight[i] == 0.0);
        continue;
      }
      CHECK((a.layers[l].weight[i] < 0) == (ref < 0));
      CHECK(std::abs(b.layers[l].weight[i]) == std::abs(ref));
      sign_diffs += (c.layers[l].weight[i] < 0) != (ref < 0);
    }
    for (double v : a.layers[l].bias->values()) CHECK(v == 0.0);
  }
  CHECK(sign_diffs > 0);
}

TEST_CASE("two moons") {
  const Dataset d = two_moons(100, 0.0, 3);
  CHECK(d.size() == 100);
  CHECK(d.classes == 2);
  for (std::size_t i = 0; i < 100; ++i) {
    const double x = d.x(i, 0), y = d.x(i, 1);
    if (d.y[i] == 0.0) {
      CHECK(x * x + y * y == doctest::Approx(1.0));
    } else {
      CHECK((1 - x) * (1 - x) + (0.5 - y) * (0.5 - y) == doctest::Approx(1.0));
    }
  }
  const DataSplit split = two_moons_split(50, 20, 0.1, 0);
  CHECK(split.train.size() == 50);
  CHECK(split.test.size() == 20);
}

TEST_CASE("train config validation") {
  TrainConfig c;
  c.lr = 0.0;
  CHECK_THROWS(c.validate());
  c = TrainConfig{};
  c.batch_size = 0;
  CHECK_THROWS(c.validate());
  CHECK(parse_mask_generator("synflow") == MaskGenerator::synflow);
  CHECK_THROWS(parse_mask_generator("magnitude"));
}
