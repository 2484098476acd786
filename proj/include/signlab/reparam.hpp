#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "signlab/tensor.hpp"

namespace signlab {

using Mask = std::vector<std::uint8_t>;

// One weight tensor written as mask * m * w with the balance m^2 - w^2 = beta
// restored by `rescale`. Masked-out coordinates keep frozen factors.
struct SignInLayer {
  Tensor m;
  Tensor w;
  Mask mask;
  double beta = 1.0;

  static SignInLayer from_weights(const Tensor& theta, Mask mask, double beta);
};

struct FactorPair {
  double m;
  double w;
};

struct FactorGrads {
  Tensor m;
  Tensor w;
};

// Closed-form balanced split of a scalar: m * w = x, m^2 - w^2 = beta.
FactorPair split_scalar(double x, double beta);
std::pair<Tensor, Tensor> split_init(const Tensor& x, double beta);

Tensor merge(const SignInLayer& layer);
Tensor merge_unmasked(const SignInLayer& layer);

SignInLayer rescale(const SignInLayer& layer);

// Chain rule through L(mask * m * w).
FactorGrads reparam_grads(const SignInLayer& layer, const Tensor& g_theta);

// Gradients of lambda * sum (m*w)^2 over the mask support.
FactorGrads frobenius_decay_grads(const SignInLayer& layer, double lambda);

// Rescale every `period` epochs while epoch < stop_epoch.
struct ReparamSchedule {
  int period = 1;
  int stop_epoch = 1;
  double beta = 1.0;

  void validate() const;
  bool rescale_due(int epoch) const;
};

// Metric factor of the induced flow for a balanced factor pair:
// m^2 + w^2 = sqrt((m^2 - w^2)^2 + 4 (mw)^2) = sqrt(beta^2 + 4 theta^2).
double induced_metric(double theta, double beta);

}  // namespace signlab
