#include <doctest.h>

#include <cmath>
#include <numeric>

#include "signlab/datasets.hpp"
#include "signlab/masks.hpp"
#include "signlab/sparse_train.hpp"

using namespace signlab;

namespace {

std::size_t count(const Mask& m) { return std::accumulate(m.begin(), m.end(), std::size_t{0}); }

// 1^T |W_L| ... |W_1| 1 computed directly.
double synflow_objective(const SmallNet& net) {
  std::vector<double> h(net.input_dim(), 1.0);
  for (const DenseLayer& L : net.layers) {
    std::vector<double> o(L.weight.rows(), 0.0);
    for (std::size_t i = 0; i < o.size(); ++i)
      for (std::size_t j = 0; j < h.size(); ++j) o[i] += std::abs(L.weight(i, j)) * h[j];
    h = o;
  }
  return std::accumulate(h.begin(), h.end(), 0.0);
}

}  // namespace

TEST_CASE("kept count") {
  CHECK(kept_count(400, 0.9) == 40);
  CHECK(kept_count(10, 0.0) == 10);
  CHECK_THROWS(kept_count(10, 1.0));
  CHECK_THROWS(kept_count(10, -0.1));
}

TEST_CASE("balanced counts cap small layers") {
  const std::vector<std::size_t> a{10, 390};
  CHECK(balanced_counts(a, 40) == std::vector<std::size_t>{10, 30});
  const std::vector<std::size_t> b{100, 300};
  CHECK(balanced_counts(b, 40) == std::vector<std::size_t>{20, 20});
  const std::vector<std::size_t> c{5, 5, 100};
  const auto r = balanced_counts(c, 31);
  CHECK(std::accumulate(r.begin(), r.end(), std::size_t{0}) == 31);
  CHECK(r[0] <= 5);
}

TEST_CASE("random balanced mask") {
  const std::vector<std::size_t> sizes{128, 4096, 128};
  const MaskSpec m = random_balanced_mask(sizes, 0.9, 5);
  CHECK(m.kept() == kept_count(4352, 0.9));
  CHECK(m.total() == 4352);
  for (std::size_t l = 0; l < 3; ++l) CHECK(m.layers[l].size() == sizes[l]);
  CHECK(random_balanced_mask(sizes, 0.9, 5).layers == m.layers);
  CHECK(random_balanced_mask(sizes, 0.9, 6).layers != m.layers);
  const std::vector<std::size_t> tiny{4, 4, 4};
  CHECK_THROWS(random_balanced_mask(tiny, 0.95, 0));
}

TEST_CASE("top-k with ties") {
  const auto masks = top_k_masks({{3.0, 1.0, 2.0}}, {{1.0, 1.0, 1.0}}, 2);
  CHECK(masks[0] == Mask{1, 0, 1});
  // Equal scores: larger magnitude first, then lower index.
  const auto tied = top_k_masks({{1.0, 1.0, 1.0, 1.0}}, {{0.1, 0.5, 0.5, 0.2}}, 2);
  CHECK(tied[0] == Mask{0, 1, 1, 0});
  const auto split = top_k_masks({{1.0, 1.0}, {1.0}}, {{1.0, 1.0}, {1.0}}, 1);
  CHECK(split[0] == Mask{1, 0});
  CHECK(split[1] == Mask{0});
}

TEST_CASE("snip scores are |theta * grad|") {
  const SmallNet net = make_mlp({2, 4, 2}, true, LossKind::cross_entropy, 3);
  const Dataset d = two_moons(32, 0.1, 1);
  const auto scores = snip_scores(net, d.x, d.y);
  std::vector<double> theta = flatten_params(net);
  SmallNet probe = net;
  // weight 0 of layer 0 sits at flat index 0
  const double h = 1e-6;
  std::vector<double> t = theta;
  t[0] += h;
  assign_params(probe, t);
  const double up = loss_value(probe, d.x, d.y);
  t[0] -= 2 * h;
  assign_params(probe, t);
  const double down = loss_value(probe, d.x, d.y);
  CHECK(scores[0][0] == doctest::Approx(std::abs(theta[0] * (up - down) / (2 * h))).epsilon(1e-6));

  const MaskSpec m = snip_mask(net, d.x, d.y, 0.5);
  CHECK(m.kept() == kept_count(16, 0.5));
}

TEST_CASE("synflow scores equal the drop in the objective") {
  const SmallNet net = make_mlp({3, 4, 2}, false, LossKind::mse, 11);
  std::vector<Mask> full;
  for (const auto& L : net.layers) full.emplace_back(L.weight.size(), 1);
  const auto scores = synflow_scores(net, full);
  const double r = synflow_objective(net);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    for (std::size_t i = 0; i < net.layers[l].weight.size(); ++i) {
      SmallNet cut = net;
      cut.layers[l].weight[i] = 0.0;
      CHECK(scores[l][i] == doctest::Approx(r - synflow_objective(cut)).epsilon(1e-10));
    }
  }
}

TEST_CASE("synflow mask hits the target sparsity") {
  const SmallNet net = make_mlp({2, 64, 64, 2}, true, LossKind::cross_entropy, 0);
  const MaskSpec m = synflow_mask(net, 0.9, 100);
  CHECK(m.kept() == kept_count(m.total(), 0.9));
  for (const Mask& layer : m.layers) CHECK(count(layer) > 0);
}

TEST_CASE("apply mask zeroes pruned weights") {
  SmallNet net = make_mlp({2, 8, 2}, true, LossKind::cross_entropy, 2);
  const MaskSpec m = random_balanced_mask(weight_sizes(net), 0.5, 1);
  apply_mask(net, m);
  for (std::size_t l = 0; l < net.layers.size(); ++l)
    for (std::size_t i = 0; i < m.layers[l].size(); ++i)
      if (!m.layers[l][i]) CHECK(net.layers[l].weight[i] == 0.0);
}
