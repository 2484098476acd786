#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "signlab/mlp.hpp"
#include "signlab/reparam.hpp"

namespace signlab {

// One binary mask per weight matrix of a SmallNet. Biases are never masked.
struct MaskSpec {
  std::vector<Mask> layers;
  double sparsity = 0.0;
  std::string generator;

  std::size_t kept() const;
  std::size_t total() const;
  std::vector<std::size_t> kept_per_layer() const;
};

// Number of weights kept at sparsity s: total - round(s * total).
std::size_t kept_count(std::size_t total, double sparsity);

// Per-layer kept counts: an equal share each, remainder to the largest
// layers; a share above a layer's size is capped and the excess shared out
// equally again among the uncapped layers.
std::vector<std::size_t> balanced_counts(std::span<const std::size_t> sizes,
                                         std::size_t keep);

MaskSpec random_balanced_mask(std::span<const std::size_t> layer_sizes,
                              double sparsity, std::uint64_t seed);

std::vector<std::size_t> weight_sizes(const SmallNet& net);

// Global top-k over scores concatenated layer by layer. Ties go to the larger
// magnitude, then to the lower flat index.
std::vector<Mask> top_k_masks(const std::vector<std::vector<double>>& scores,
                              const std::vector<std::vector<double>>& magnitudes,
                              std::size_t keep);

// |theta * dL/dtheta| per weight on one batch.
std::vector<std::vector<double>> snip_scores(const SmallNet& net, const Tensor& batch,
                                             const Tensor& targets);
MaskSpec snip_mask(const SmallNet& net, const Tensor& batch, const Tensor& targets,
                   double sparsity);

// |theta * dR/dtheta| for R = 1^T |W_L| ... |W_1| 1 with the current mask
// applied to the weights.
std::vector<std::vector<double>> synflow_scores(const SmallNet& net,
                                                const std::vector<Mask>& masks);
// Iterative pruning over `rounds` with kept fraction (1 - s)^(r / rounds).
MaskSpec synflow_mask(const SmallNet& net, double sparsity, std::size_t rounds = 100);

// Zeroes weights outside the mask.
void apply_mask(SmallNet& net, const MaskSpec& mask);

}  // namespace signlab
