#include "signlab/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "signlab/seed.hpp"

namespace signlab {

Dataset two_moons(std::size_t n, double noise, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("two_moons needs n > 0");
  if (noise < 0.0) throw std::invalid_argument("noise must be nonnegative");
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  std::normal_distribution<double> jitter(0.0, noise);
  Dataset out{Tensor({n, 2}), Tensor({n, 1}), 2};
  for (std::size_t i = 0; i < n; ++i) {
    const double t = angle(rng);
    const bool upper = i % 2 == 0;
    double px = upper ? std::cos(t) : 1.0 - std::cos(t);
    double py = upper ? std::sin(t) : 0.5 - std::sin(t);
    if (noise > 0.0) {
      px += jitter(rng);
      py += jitter(rng);
    }
    out.x(i, 0) = px;
    out.x(i, 1) = py;
    out.y(i, 0) = upper ? 0.0 : 1.0;
  }
  return out;
}

DataSplit two_moons_split(std::size_t n_train, std::size_t n_test, double noise,
                          std::uint64_t seed) {
  return {two_moons(n_train, noise, seed_spawn(seed, 0)),
          two_moons(n_test, noise, seed_spawn(seed, 1))};
}

DataSplit gaussian_mixture_split(std::size_t n_train, std::size_t n_test,
                                 std::size_t classes, std::size_t dim,
                                 double spread, std::uint64_t seed) {
  if (classes < 2 || dim == 0 || n_train == 0 || n_test == 0) {
    throw std::invalid_argument("gaussian mixture needs classes >= 2 and positive sizes");
  }
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor centers({classes, dim});
  for (double& c : centers.values()) c = spread * normal(rng);

  auto draw = [&](std::size_t n) {
    Dataset d{Tensor({n, dim}), Tensor({n, 1}), classes};
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = i % classes;
      for (std::size_t j = 0; j < dim; ++j) d.x(i, j) = centers(c, j) + normal(rng);
      d.y(i, 0) = static_cast<double>(c);
    }
    return d;
  };
  Dataset train = draw(n_train);
  Dataset test = draw(n_test);
  return {std::move(train), std::move(test)};
}

Dataset take_rows(const Dataset& data, std::size_t count) {
  count = std::min(count, data.size());
  const std::size_t d = data.x.cols();
  Dataset out{Tensor({count, d}), Tensor({count, 1}), data.classes};
  std::copy_n(data.x.data().begin(), count * d, out.x.data().begin());
  std::copy_n(data.y.data().begin(), count, out.y.data().begin());
  return out;
}

}  // namespace signlab
