#include <doctest.h>

#include <cmath>

#include "signlab/datasets.hpp"
#include "signlab/sharpness.hpp"
#include "signlab/sparse_train.hpp"
#include "oracles.hpp"

using namespace signlab;

using oracle::top_abs_eigenvalue;

TEST_CASE("power iteration on a diagonal operator") {
  const std::vector<double> diag{1.0, -5.0, 3.0, 0.5};
  MatVec mv = [&](std::span<const double> v) {
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = diag[i] * v[i];
    return out;
  };
  const SharpnessEstimate e = power_iteration(mv, diag.size(), {1e-12, 2000, 3});
  CHECK(e.converged);
  CHECK(e.lambda == doctest::Approx(5.0).epsilon(1e-6));
}

TEST_CASE("power iteration with a +- pair of dominant eigenvalues") {
  MatVec mv = [](std::span<const double> v) {
    return std::vector<double>{2.0 * v[0], -2.0 * v[1], 0.1 * v[2]};
  };
  const SharpnessEstimate e = power_iteration(mv, 3, {1e-10, 500, 1});
  CHECK(e.lambda == doctest::Approx(2.0).epsilon(1e-8));
}

TEST_CASE("power iteration rejects an empty operator") {
  MatVec mv = [](std::span<const double> v) { return std::vector<double>(v.begin(), v.end()); };
  CHECK_THROWS(power_iteration(mv, 0));
}

TEST_CASE("sharpness matches the dense Hessian spectrum") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SmallNet net = make_mlp({2, 5, 5, 2}, true, LossKind::cross_entropy, seed);
    REQUIRE(net.param_count() <= 64);
    const Dataset data = two_moons(64, 0.1, seed);
    const auto h = dense_hessian(net, data.x, data.y);
    const std::size_t dim = net.param_count();
    const double oracle = top_abs_eigenvalue(h, dim);
    const SharpnessEstimate e = sharpness(net, data.x, data.y, {1e-12, 5000, seed});
    CHECK(std::abs(e.lambda - oracle) / oracle <= 1e-3);
  }
}

TEST_CASE("masked sharpness acts on the support only") {
  SmallNet net = make_mlp({2, 6, 2}, true, LossKind::cross_entropy, 4);
  const MaskSpec mask = random_balanced_mask(weight_sizes(net), 0.5, 9);
  apply_mask(net, mask);
  const Dataset data = two_moons(64, 0.1, 2);
  const auto idx = support_indices(net, &mask);
  CHECK(idx.size() == mask.kept() + 6 + 2);
  const auto h = dense_hessian(net, data.x, data.y, &mask);
  CHECK(h.size() == idx.size() * idx.size());
  const double oracle = top_abs_eigenvalue(h, idx.size());
  const SharpnessEstimate e = sharpness(net, data.x, data.y, {1e-12, 5000, 0}, &mask);
  CHECK(std::abs(e.lambda - oracle) / oracle <= 1e-3);
}

TEST_CASE("dense Hessian of MSE on a linear model is X^T X / n") {
  SmallNet net = make_mlp({3, 1}, false, LossKind::mse, 1);
  Tensor x = Tensor::matrix(4, 3, {1, 0, 2, 0, 1, 1, 3, 1, 0, 1, 1, 1});
  Tensor y = Tensor::matrix(4, 1, {0, 1, 0, 1});
  const auto h = dense_hessian(net, x, y);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      double expect = 0.0;
      for (std::size_t s = 0; s < 4; ++s) expect += x(s, i) * x(s, j);
      CHECK(h[i * 3 + j] == doctest::Approx(expect / 4.0).epsilon(1e-8));
    }
  }
}
