#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "signlab/tensor.hpp"

namespace signlab {

enum class Parameterization { plain, sign_in };
enum class LossKind { mse, cross_entropy };

// Weight is stored out x in, so a layer computes x * W^T (+ b).
struct DenseLayer {
  Tensor weight;
  std::optional<Tensor> bias;  // shape [1, out]
  Parameterization param = Parameterization::plain;
};

// Feedforward ReLU network. Hidden layers apply max(., 0); the last layer is
// affine and feeds the loss head.
struct SmallNet {
  std::vector<DenseLayer> layers;
  LossKind loss = LossKind::mse;

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t param_count() const;
  // Throws ShapeError when adjacent layers do not compose.
  void validate() const;
};

struct ForwardCache {
  std::vector<Tensor> inputs;    // input to each layer
  std::vector<Tensor> preacts;   // affine output of each layer
};

struct GradStore {
  std::vector<Tensor> weight;
  std::vector<std::optional<Tensor>> bias;

  static GradStore zeros_like(const SmallNet& net);
};

struct LossEval {
  double value = 0.0;
  Tensor output_grad;  // dL/d(outputs)
};

Tensor mlp_forward(const SmallNet& net, const Tensor& batch,
                   ForwardCache* cache = nullptr);

// MSE is (1/2n) sum of squared residuals. Cross-entropy takes class ids in a
// [n, 1] target tensor and averages over the batch.
LossEval evaluate_loss(LossKind kind, const Tensor& outputs,
                       const Tensor& targets);

GradStore mlp_backward(const SmallNet& net, const ForwardCache& cache,
                       const Tensor& loss_grad);

// Forward, loss and backward in one call.
GradStore loss_gradient(const SmallNet& net, const Tensor& batch,
                        const Tensor& targets, double* loss = nullptr);
double loss_value(const SmallNet& net, const Tensor& batch,
                  const Tensor& targets);

// On/off state of every hidden ReLU, [sample * width] per hidden layer.
using ActivationPattern = std::vector<std::vector<std::uint8_t>>;
ActivationPattern activation_pattern(const SmallNet& net, const Tensor& batch);

// Gradient with the ReLU gates frozen at `gates`. Within one gate pattern the
// loss is smooth, so differences of this gradient do not jump at kinks.
GradStore loss_gradient_gated(const SmallNet& net, const Tensor& batch,
                              const Tensor& targets, const ActivationPattern& gates);

// theta <- theta - lr * (g + weight_decay * theta)
void sgd_step(std::span<double> params, std::span<const double> grads,
              double lr, double weight_decay);
void sgd_step(SmallNet& net, const GradStore& grads, double lr,
              double weight_decay);

// Flat parameter order: layer 0 weight, layer 0 bias, layer 1 weight, ...
std::vector<double> flatten_params(const SmallNet& net);
void assign_params(SmallNet& net, std::span<const double> flat);
std::vector<double> flatten_grads(const GradStore& grads);

using GradientFn = std::function<std::vector<double>(std::span<const double>)>;

// Central-difference Hessian-vector product (g(theta + eps v) - g(theta - eps v)) / 2 eps.
// The SmallNet overload holds the ReLU gates at those of theta.
std::vector<double> hvp_fd(const GradientFn& gradient,
                           std::span<const double> theta,
                           std::span<const double> direction, double eps);
std::vector<double> hvp_fd(const SmallNet& net, const Tensor& batch,
                           const Tensor& targets,
                           std::span<const double> direction, double eps);

}  // namespace signlab
