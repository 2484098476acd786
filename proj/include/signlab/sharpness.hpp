#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "signlab/masks.hpp"
#include "signlab/mlp.hpp"

namespace signlab {

struct SharpnessEstimate {
  double lambda = 0.0;  // |H v| for the final unit iterate, i.e. the dominant |eigenvalue|
  std::size_t iterations = 0;
  double residual = 0.0;  // relative change of the last two estimates
  bool converged = false;
};

struct PowerIterationOptions {
  double tol = 1e-8;
  std::size_t max_iters = 500;
  std::uint64_t seed = 0;
};

using MatVec = std::function<std::vector<double>(std::span<const double>)>;

// Stops once successive estimates differ by less than tol * |lambda|;
// otherwise returns the last estimate with converged = false.
SharpnessEstimate power_iteration(const MatVec& matvec, std::size_t dim,
                                  const PowerIterationOptions& options = {});

// 1e-4 * (1 + max |theta|)
double sharpness_eps(std::span<const double> theta);

// Dominant Hessian eigenvalue of the loss on (batch, targets). With a mask,
// the Hessian is taken over the masked-in weights and all biases only.
SharpnessEstimate sharpness(const SmallNet& net, const Tensor& batch,
                            const Tensor& targets,
                            const PowerIterationOptions& options = {},
                            const MaskSpec* mask = nullptr);

// Indices into flatten_params(net) that the masked Hessian acts on.
std::vector<std::size_t> support_indices(const SmallNet& net, const MaskSpec* mask);

// Dense Hessian over the support, built column by column from hvp_fd.
std::vector<double> dense_hessian(const SmallNet& net, const Tensor& batch,
                                  const Tensor& targets, const MaskSpec* mask = nullptr);

}  // namespace signlab
