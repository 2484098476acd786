#include <doctest.h>

#include <cmath>
#include <random>

#include "signlab/reparam.hpp"

using namespace signlab;

TEST_CASE("split of a scalar matches hand values") {
  const FactorPair f = split_scalar(0.75, 1.0);
  CHECK(f.m == doctest::Approx(1.183803).epsilon(1e-6));
  CHECK(f.w == doctest::Approx(0.633552).epsilon(1e-6));

  const FactorPair z = split_scalar(0.0, 2.0);
  CHECK(z.m == doctest::Approx(std::sqrt(2.0)));
  CHECK(z.w == 0.0);

  const FactorPair neg = split_scalar(-3.0, 0.5);
  CHECK(neg.m > 0.0);
  CHECK(neg.w < 0.0);
}

TEST_CASE("split rejects bad input") {
  CHECK_THROWS_AS(split_scalar(1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(split_scalar(1.0, -1.0), std::invalid_argument);
  CHECK_THROWS(split_scalar(NAN, 1.0));
}

TEST_CASE("product and balance hold over random draws") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> xs(-50.0, 50.0);
  std::uniform_real_distribution<double> bs(1e-3, 10.0);
  double worst_prod = 0.0, worst_bal = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double x = xs(rng), beta = bs(rng);
    const FactorPair f = split_scalar(x, beta);
    worst_prod = std::max(worst_prod, std::abs(f.m * f.w - x));
    worst_bal = std::max(worst_bal, std::abs(f.m * f.m - f.w * f.w - beta));
  }
  CHECK(worst_prod <= 1e-12 * 50.0);
  CHECK(worst_bal <= 1e-10);
}

TEST_CASE("rescale restores balance and keeps the product") {
  SignInLayer layer{Tensor::matrix(1, 1, {2.0}), Tensor::matrix(1, 1, {0.5}), Mask{1}, 1.0};
  const SignInLayer r = rescale(layer);
  CHECK(r.m[0] == doctest::Approx(1.272020).epsilon(1e-6));
  CHECK(r.w[0] == doctest::Approx(0.786151).epsilon(1e-6));
  CHECK(r.m[0] * r.w[0] == doctest::Approx(1.0).epsilon(1e-14));

  const SignInLayer rr = rescale(r);
  CHECK(std::abs(rr.m[0] - r.m[0]) <= 1e-12);
  CHECK(std::abs(rr.w[0] - r.w[0]) <= 1e-12);
}

TEST_CASE("merge zeroes masked-out coordinates") {
  const Tensor theta = Tensor::matrix(2, 2, {1.0, -2.0, 3.0, -4.0});
  const SignInLayer layer = SignInLayer::from_weights(theta, Mask{1, 0, 0, 1}, 1.0);
  const Tensor merged = merge(layer);
  CHECK(merged[0] == doctest::Approx(1.0));
  CHECK(merged[1] == 0.0);
  CHECK(merged[2] == 0.0);
  CHECK(merged[3] == doctest::Approx(-4.0));
  CHECK_THROWS_AS(SignInLayer::from_weights(theta, Mask{1, 0}, 1.0), ShapeError);
}

TEST_CASE("factor gradients follow the chain rule") {
  SignInLayer layer{Tensor::matrix(1, 2, {0.25, 1.0}), Tensor::matrix(1, 2, {0.5, 2.0}),
                    Mask{1, 0}, 1.0};
  const FactorGrads g = reparam_grads(layer, Tensor::matrix(1, 2, {-1.0, 3.0}));
  CHECK(g.m[0] == doctest::Approx(-0.5));
  CHECK(g.w[0] == doctest::Approx(-0.25));
  CHECK(g.m[1] == 0.0);
  CHECK(g.w[1] == 0.0);
}

TEST_CASE("frobenius decay gradient matches finite differences") {
  const double lambda = 0.3;
  SignInLayer layer{Tensor::matrix(1, 3, {0.7, -1.2, 2.0}), Tensor::matrix(1, 3, {0.4, 0.9, -0.3}),
                    Mask{1, 1, 1}, 1.0};
  auto penalty = [&](const SignInLayer& l) {
    double s = 0.0;
    for (std::size_t i = 0; i < l.m.size(); ++i) s += lambda * std::pow(l.m[i] * l.w[i], 2);
    return s;
  };
  const FactorGrads g = frobenius_decay_grads(layer, lambda);
  const double h = 1e-6;
  for (std::size_t i = 0; i < 3; ++i) {
    SignInLayer p = layer, q = layer;
    p.m[i] += h;
    q.m[i] -= h;
    CHECK(g.m[i] == doctest::Approx((penalty(p) - penalty(q)) / (2 * h)).epsilon(1e-7));
    p = layer;
    q = layer;
    p.w[i] += h;
    q.w[i] -= h;
    CHECK(g.w[i] == doctest::Approx((penalty(p) - penalty(q)) / (2 * h)).epsilon(1e-7));
  }
}

TEST_CASE("balance drift of a gradient step is second order") {
  // One factor step on L = (mw - 1)^2 / 2 changes m^2 - w^2 by eta^2 (w^2 - m^2) g^2.
  const double m = 1.3, w = 0.4;
  auto drift = [&](double eta) {
    const double g = m * w - 1.0;
    const double m1 = m - eta * w * g, w1 = w - eta * m * g;
    return std::abs((m1 * m1 - w1 * w1) - (m * m - w * w));
  };
  CHECK(drift(0.01) / drift(0.005) == doctest::Approx(4.0).epsilon(1e-9));
}

TEST_CASE("rescale schedule") {
  ReparamSchedule s{2, 5, 1.0};
  CHECK(s.rescale_due(0));
  CHECK_FALSE(s.rescale_due(1));
  CHECK(s.rescale_due(4));
  CHECK_FALSE(s.rescale_due(6));
  ReparamSchedule bad{0, 5, 1.0};
  CHECK_THROWS(bad.validate());
}

TEST_CASE("induced metric") {
  CHECK(induced_metric(0.0, 2.0) == doctest::Approx(2.0));
  const FactorPair f = split_scalar(1.7, 0.8);
  CHECK(f.m * f.m + f.w * f.w == doctest::Approx(induced_metric(1.7, 0.8)).epsilon(1e-12));
}
