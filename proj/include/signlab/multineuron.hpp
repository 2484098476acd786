#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "signlab/neuron_flow.hpp"
#include "signlab/tensor.hpp"

namespace signlab {

// f(z) = sum_i a_i relu(w_i . z), W stored k x d.
struct TwoLayerNet {
  std::vector<double> a;
  Tensor w;

  std::size_t k() const { return a.size(); }
  std::size_t d() const { return w.cols(); }
};

// All weights N(0, 1/d), outer weights paired so that a_i = -a_{i+k/2}.
TwoLayerNet cob_init(std::size_t k, std::size_t d, std::uint64_t seed);

// Rademacher outer weights (resampled until both signs occur when k > 1) and
// N(0,1) rows normalized to the unit sphere.
TwoLayerNet sample_multi_teacher(std::size_t k, std::size_t d, std::uint64_t seed);

enum class SignMode { good, bad, cob };
enum class InputDistribution { gaussian, sphere };
std::string_view to_string(SignMode mode);
SignMode parse_sign_mode(std::string_view name);
std::string_view to_string(InputDistribution inputs);
InputDistribution parse_input_distribution(std::string_view name);

struct MultiNeuronConfig {
  std::size_t k_student = 3;
  std::size_t k_teacher = 3;
  std::size_t d = 2;
  std::size_t n_samples = 512;
  InputDistribution inputs = InputDistribution::sphere;
  SignMode sign_mode = SignMode::good;
  FlowMethod method = FlowMethod::standard;
  double lr = 0.25;
  std::size_t epochs = 5000;
  double beta = 2.0;                 // outer weights
  std::optional<double> beta_inner = 0.5;  // input weights; nullopt: beta
  double init_std = 0.70710678118654752;
  bool sign_in_factors = false;  // train m, w factors instead of the metric form
  std::uint64_t seed = 0;

  void validate() const;
};

struct MultiNeuronResult {
  TwoLayerNet teacher;
  TwoLayerNet initial;
  TwoLayerNet student;
  std::vector<double> loss_curve;  // loss before each epoch, then final
  Tensor representation;           // rows |a_i| w_i
  double final_loss = 0.0;
};

double two_layer_loss(const TwoLayerNet& net, const Tensor& z,
                      const std::vector<double>& y);

// Full-batch gradient descent on the MSE. Method sign_in scales each
// coordinate's gradient by sqrt(theta^2 + beta), or with sign_in_factors
// trains balanced m, w pairs and merges them every step.
MultiNeuronResult multineuron_train(const MultiNeuronConfig& config);

Tensor neuron_representation(const TwoLayerNet& net);

}  // namespace signlab
