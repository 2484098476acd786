#pragma once

#include <cstddef>
#include <cstdint>

#include "signlab/tensor.hpp"

namespace signlab {

// Features [n, d] and integer class ids stored as doubles in [n, 1].
struct Dataset {
  Tensor x;
  Tensor y;
  std::size_t classes = 0;

  std::size_t size() const { return x.rows(); }
};

struct DataSplit {
  Dataset train;
  Dataset test;
};

// Two interleaved half circles with isotropic Gaussian noise; classes
// alternate so each split is balanced to within one sample.
Dataset two_moons(std::size_t n, double noise, std::uint64_t seed);
DataSplit two_moons_split(std::size_t n_train, std::size_t n_test, double noise,
                          std::uint64_t seed);

// Class means ~ N(0, spread^2 I) in `dim` dimensions, unit-variance clusters.
DataSplit gaussian_mixture_split(std::size_t n_train, std::size_t n_test,
                                 std::size_t classes, std::size_t dim,
                                 double spread, std::uint64_t seed);

Dataset take_rows(const Dataset& data, std::size_t count);

}  // namespace signlab
