#include <doctest.h>

#include <cmath>

#include "signlab/mlp.hpp"
#include "signlab/sparse_train.hpp"
#include "oracles.hpp"

using namespace signlab;

using oracle::Problem;
using oracle::random_problem;

TEST_CASE("library loss agrees with a reference forward pass") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Problem p = random_problem(seed);
    CHECK(loss_value(p.net, p.x, p.y) == doctest::Approx(oracle::mlp_loss(p.net, p.x, p.y)).epsilon(1e-12));
  }
}

TEST_CASE("backward matches central differences on 20 random nets") {
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    const Problem p = random_problem(seed);
    REQUIRE(p.net.param_count() <= 200);
    CHECK(oracle::gradient_rel_error(p.net, p.x, p.y) <= 1e-5);
  }
}

TEST_CASE("sgd step with weight decay") {
  std::vector<double> p{1.0, -2.0};
  const std::vector<double> g{0.5, 0.5};
  sgd_step(p, g, 0.1, 0.1);
  CHECK(p[0] == doctest::Approx(1.0 - 0.1 * (0.5 + 0.1)));
  CHECK(p[1] == doctest::Approx(-2.0 - 0.1 * (0.5 - 0.2)));
}

TEST_CASE("flatten and assign round trip") {
  const Problem p = random_problem(3);
  SmallNet copy = p.net;
  std::vector<double> theta = flatten_params(p.net);
  CHECK(theta.size() == p.net.param_count());
  for (double& t : theta) t *= 2.0;
  assign_params(copy, theta);
  CHECK(flatten_params(copy) == theta);
  theta.pop_back();
  CHECK_THROWS(assign_params(copy, theta));
}

TEST_CASE("hvp of a quadratic is exact") {
  // g(theta) = A theta for symmetric A.
  const std::vector<double> a{2.0, 1.0, 1.0, 3.0};
  GradientFn grad = [&](std::span<const double> t) {
    return std::vector<double>{a[0] * t[0] + a[1] * t[1], a[2] * t[0] + a[3] * t[1]};
  };
  const std::vector<double> theta{0.3, -0.7}, dir{1.0, 2.0};
  const auto hv = hvp_fd(grad, theta, dir, 1e-4);
  CHECK(hv[0] == doctest::Approx(4.0));
  CHECK(hv[1] == doctest::Approx(7.0));
}

TEST_CASE("shape errors") {
  const Problem p = random_problem(0);
  CHECK_THROWS_AS(mlp_forward(p.net, Tensor({2, p.x.cols() + 1})), ShapeError);
  SmallNet broken = p.net;
  broken.layers.back().weight = Tensor({2, 99});
  CHECK_THROWS_AS(broken.validate(), ShapeError);
}

TEST_CASE("gated gradient equals the plain gradient at its own gates") {
  const Problem p = random_problem(21);
  const ActivationPattern gates = activation_pattern(p.net, p.x);
  CHECK(flatten_grads(loss_gradient_gated(p.net, p.x, p.y, gates)) ==
        flatten_grads(loss_gradient(p.net, p.x, p.y)));
  CHECK_THROWS_AS(loss_gradient_gated(p.net, p.x, p.y, ActivationPattern{}), ShapeError);
}

TEST_CASE("network hvp is linear in the direction") {
  const Problem p = random_problem(8);
  const std::size_t n = p.net.param_count();
  std::vector<double> u(n), v(n), w(n);
  for (std::size_t i = 0; i < n; ++i) {
    u[i] = std::sin(1.0 + i);
    v[i] = std::cos(2.0 * i);
    w[i] = 2.0 * u[i] - 3.0 * v[i];
  }
  const auto hu = hvp_fd(p.net, p.x, p.y, u, 1e-5);
  const auto hv = hvp_fd(p.net, p.x, p.y, v, 1e-5);
  const auto hw = hvp_fd(p.net, p.x, p.y, w, 1e-5);
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(hw[i] == doctest::Approx(2.0 * hu[i] - 3.0 * hv[i]).epsilon(1e-6).scale(1.0));
  }
}
