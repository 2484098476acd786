#pragma once

// Reference computations written independently of the library kernels.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "signlab/flops.hpp"
#include "signlab/mlp.hpp"
#include "signlab/sparse_train.hpp"

namespace oracle {

// Plain loops over samples, no shared code with mlp_forward.
inline double mlp_loss(const signlab::SmallNet& net, const signlab::Tensor& x,
                       const signlab::Tensor& y) {
  double total = 0.0;
  for (std::size_t s = 0; s < x.rows(); ++s) {
    std::vector<double> h(x.data().begin() + s * x.cols(), x.data().begin() + (s + 1) * x.cols());
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      const signlab::DenseLayer& L = net.layers[l];
      std::vector<double> o(L.weight.rows(), 0.0);
      for (std::size_t i = 0; i < o.size(); ++i) {
        for (std::size_t j = 0; j < h.size(); ++j) o[i] += L.weight(i, j) * h[j];
        if (L.bias) o[i] += (*L.bias)[i];
        if (l + 1 < net.layers.size()) o[i] = std::max(o[i], 0.0);
      }
      h = o;
    }
    if (net.loss == signlab::LossKind::mse) {
      for (std::size_t j = 0; j < h.size(); ++j) total += 0.5 * std::pow(h[j] - y(s, j), 2);
    } else {
      const double mx = *std::max_element(h.begin(), h.end());
      double z = 0.0;
      for (double v : h) z += std::exp(v - mx);
      total += std::log(z) + mx - h[static_cast<std::size_t>(y(s, 0))];
    }
  }
  return total / static_cast<double>(x.rows());
}

// Relative L2 error of the library gradient against central differences.
inline double gradient_rel_error(const signlab::SmallNet& net, const signlab::Tensor& x,
                                 const signlab::Tensor& y) {
  const std::vector<double> grad = signlab::flatten_grads(signlab::loss_gradient(net, x, y));
  const std::vector<double> theta = signlab::flatten_params(net);
  signlab::SmallNet probe = net;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(theta[i]));
    std::vector<double> t = theta;
    t[i] += h;
    signlab::assign_params(probe, t);
    const double up = mlp_loss(probe, x, y);
    t[i] -= 2 * h;
    signlab::assign_params(probe, t);
    const double down = mlp_loss(probe, x, y);
    const double fd = (up - down) / (2 * h);
    num += (fd - grad[i]) * (fd - grad[i]);
    den += fd * fd;
  }
  return std::sqrt(num / std::max(den, 1e-300));
}

struct Problem {
  signlab::SmallNet net;
  signlab::Tensor x;
  signlab::Tensor y;
};

// Random ReLU MLP with at most 200 parameters; odd seeds use cross-entropy.
inline Problem random_problem(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> width(1, 6);
  std::uniform_int_distribution<int> depth(1, 3);
  std::normal_distribution<double> normal(0.0, 1.0);
  const bool ce = seed % 2 == 1;
  std::vector<std::size_t> widths{static_cast<std::size_t>(width(rng) + 1)};
  const int layers = depth(rng);
  for (int l = 0; l < layers; ++l) widths.push_back(static_cast<std::size_t>(width(rng)));
  widths.push_back(ce ? 3 : 2);
  Problem p;
  p.net = signlab::make_mlp(widths, true, ce ? signlab::LossKind::cross_entropy : signlab::LossKind::mse,
                            seed);
  for (auto& layer : p.net.layers) {
    for (double& b : layer.bias->values()) b = 0.1 * normal(rng);
  }
  p.x = signlab::Tensor({7, widths.front()});
  for (double& v : p.x.values()) v = normal(rng);
  if (ce) {
    p.y = signlab::Tensor({7, 1});
    for (std::size_t i = 0; i < 7; ++i) p.y[i] = static_cast<double>(i % 3);
  } else {
    p.y = signlab::Tensor({7, 2});
    for (double& v : p.y.values()) v = normal(rng);
  }
  return p;
}

inline double top_abs_eigenvalue(const std::vector<double>& h, std::size_t dim) {
  Eigen::MatrixXd m(dim, dim);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j) m(i, j) = h[i * dim + j];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline std::uint64_t conv_flops(std::uint64_t h, std::uint64_t w, std::uint64_t co,
                                std::uint64_t k, std::uint64_t ci, bool sign_in) {
  const std::uint64_t params = co * ci * k * k;
  return 2 * h * w * params + params + (sign_in ? params : 0);
}

}  // namespace oracle
