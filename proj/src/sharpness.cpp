#include "signlab/sharpness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "signlab/seed.hpp"

namespace signlab {

namespace {

double norm2(std::span<const double> v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

struct Restricted {
  SmallNet net;
  std::vector<double> full;
  std::vector<std::size_t> index;

  ActivationPattern gates;

  GradientFn gradient(const Tensor& batch, const Tensor& targets) {
    gates = activation_pattern(net, batch);
    return [this, &batch, &targets](std::span<const double> reduced) {
      std::vector<double> theta = full;
      for (std::size_t k = 0; k < index.size(); ++k) theta[index[k]] = reduced[k];
      SmallNet probe = net;
      assign_params(probe, theta);
      const std::vector<double> g = flatten_grads(loss_gradient_gated(probe, batch, targets, gates));
      std::vector<double> out(index.size());
      for (std::size_t k = 0; k < index.size(); ++k) out[k] = g[index[k]];
      return out;
    };
  }

  std::vector<double> reduced_params() const {
    std::vector<double> r(index.size());
    for (std::size_t k = 0; k < index.size(); ++k) r[k] = full[index[k]];
    return r;
  }
};

}  // namespace

SharpnessEstimate power_iteration(const MatVec& matvec, std::size_t dim,
                                  const PowerIterationOptions& options) {
  if (dim == 0) throw std::invalid_argument("power iteration needs dim > 0");
  if (options.max_iters == 0) throw std::invalid_argument("max_iters must be positive");
  Rng rng = make_rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  for (double& x : v) x = normal(rng);
  double n = norm2(v);
  for (double& x : v) x /= n;

  SharpnessEstimate est;
  double previous = 0.0;
  for (std::size_t it = 1; it <= options.max_iters; ++it) {
    std::vector<double> hv = matvec(v);
    n = norm2(hv);
    const double lambda = n;
    est.lambda = lambda;
    est.iterations = it;
    if (n == 0.0) {
      est.residual = 0.0;
      est.converged = true;
      return est;
    }
    if (it > 1) {
      est.residual = std::abs(lambda - previous) / std::max(std::abs(lambda), 1e-300);
      if (est.residual < options.tol) {
        est.converged = true;
        return est;
      }
    }
    previous = lambda;
    for (std::size_t i = 0; i < dim; ++i) v[i] = hv[i] / n;
  }
  return est;
}

double sharpness_eps(std::span<const double> theta) {
  double mx = 0.0;
  for (double t : theta) mx = std::max(mx, std::abs(t));
  return 1e-4 * (1.0 + mx);
}

std::vector<std::size_t> support_indices(const SmallNet& net, const MaskSpec* mask) {
  if (mask && mask->layers.size() != net.layers.size()) {
    throw ShapeError("mask layer count does not match net");
  }
  std::vector<std::size_t> index;
  std::size_t offset = 0;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const DenseLayer& layer = net.layers[l];
    for (std::size_t i = 0; i < layer.weight.size(); ++i) {
      if (!mask || mask->layers[l][i]) index.push_back(offset + i);
    }
    offset += layer.weight.size();
    if (layer.bias) {
      for (std::size_t i = 0; i < layer.bias->size(); ++i) index.push_back(offset + i);
      offset += layer.bias->size();
    }
  }
  return index;
}

SharpnessEstimate sharpness(const SmallNet& net, const Tensor& batch,
                            const Tensor& targets,
                            const PowerIterationOptions& options,
                            const MaskSpec* mask) {
  Restricted r{net, flatten_params(net), support_indices(net, mask)};
  const GradientFn grad = r.gradient(batch, targets);
  const std::vector<double> theta = r.reduced_params();
  const double eps = sharpness_eps(theta);
  const MatVec hv = [&](std::span<const double> v) { return hvp_fd(grad, theta, v, eps); };
  return power_iteration(hv, theta.size(), options);
}

std::vector<double> dense_hessian(const SmallNet& net, const Tensor& batch,
                                  const Tensor& targets, const MaskSpec* mask) {
  Restricted r{net, flatten_params(net), support_indices(net, mask)};
  const GradientFn grad = r.gradient(batch, targets);
  const std::vector<double> theta = r.reduced_params();
  const double eps = sharpness_eps(theta);
  const std::size_t n = theta.size();
  std::vector<double> h(n * n);
  std::vector<double> e(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    const std::vector<double> col = hvp_fd(grad, theta, e, eps);
    for (std::size_t i = 0; i < n; ++i) h[i * n + j] = col[i];
    e[j] = 0.0;
  }
  // symmetrize away the finite-difference asymmetry
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double s = 0.5 * (h[i * n + j] + h[j * n + i]);
      h[i * n + j] = s;
      h[j * n + i] = s;
    }
  }
  return h;
}

}  // namespace signlab
