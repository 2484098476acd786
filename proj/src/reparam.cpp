#include "signlab/reparam.hpp"

#include <cmath>
#include <stdexcept>

namespace signlab {

namespace {

void check_congruent(const SignInLayer& layer) {
  if (!layer.m.same_shape(layer.w) || layer.mask.size() != layer.m.size()) {
    throw ShapeError("sign-in factors and mask are not congruent");
  }
}

}  // namespace

FactorPair split_scalar(double x, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
  if (!std::isfinite(x)) throw std::domain_error("cannot split a non-finite weight");
  const double alpha = 0.5 * beta;
  const double u = std::sqrt(alpha + std::hypot(x, alpha));
  return {u, x == 0.0 ? 0.0 : x / u};
}

std::pair<Tensor, Tensor> split_init(const Tensor& x, double beta) {
  Tensor m(x.shape());
  Tensor w(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const FactorPair f = split_scalar(x[i], beta);
    m[i] = f.m;
    w[i] = f.w;
  }
  return {std::move(m), std::move(w)};
}

SignInLayer SignInLayer::from_weights(const Tensor& theta, Mask mask,
                                      double beta) {
  if (mask.size() != theta.size()) {
    throw ShapeError("mask size does not match weight tensor");
  }
  auto [m, w] = split_init(theta, beta);
  return {std::move(m), std::move(w), std::move(mask), beta};
}

Tensor merge_unmasked(const SignInLayer& layer) {
  check_congruent(layer);
  Tensor out(layer.m.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = layer.m[i] * layer.w[i];
  return out;
}

Tensor merge(const SignInLayer& layer) {
  Tensor out = merge_unmasked(layer);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!layer.mask[i]) out[i] = 0.0;
  }
  return out;
}

SignInLayer rescale(const SignInLayer& layer) {
  auto [m, w] = split_init(merge_unmasked(layer), layer.beta);
  return {std::move(m), std::move(w), layer.mask, layer.beta};
}

FactorGrads reparam_grads(const SignInLayer& layer, const Tensor& g_theta) {
  check_congruent(layer);
  if (!g_theta.same_shape(layer.m)) {
    throw ShapeError("gradient shape does not match sign-in layer");
  }
  FactorGrads g{Tensor(layer.m.shape()), Tensor(layer.m.shape())};
  for (std::size_t i = 0; i < g_theta.size(); ++i) {
    if (!layer.mask[i]) continue;
    g.m[i] = layer.w[i] * g_theta[i];
    g.w[i] = layer.m[i] * g_theta[i];
  }
  return g;
}

FactorGrads frobenius_decay_grads(const SignInLayer& layer, double lambda) {
  check_congruent(layer);
  if (lambda < 0.0) throw std::invalid_argument("lambda must be nonnegative");
  FactorGrads g{Tensor(layer.m.shape()), Tensor(layer.m.shape())};
  if (lambda == 0.0) return g;
  for (std::size_t i = 0; i < layer.m.size(); ++i) {
    if (!layer.mask[i]) continue;
    const double m = layer.m[i];
    const double w = layer.w[i];
    g.m[i] = 2.0 * lambda * m * w * w;
    g.w[i] = 2.0 * lambda * m * m * w;
  }
  return g;
}

void ReparamSchedule::validate() const {
  if (period < 1) throw std::invalid_argument("rescale period must be >= 1");
  if (stop_epoch < 1) throw std::invalid_argument("stop epoch must be >= 1");
  if (period > stop_epoch) {
    throw std::invalid_argument("rescale period exceeds stop epoch");
  }
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
}

bool ReparamSchedule::rescale_due(int epoch) const {
  return epoch % period == 0 && epoch < stop_epoch;
}

double induced_metric(double theta, double beta) {
  return std::sqrt(beta * beta + 4.0 * theta * theta);
}

}  // namespace signlab
