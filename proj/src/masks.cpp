#include "signlab/masks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "signlab/seed.hpp"

namespace signlab {

namespace {

void check_sparsity(double s) {
  if (!(s >= 0.0) || !(s < 1.0)) throw std::invalid_argument("sparsity must be in [0, 1)");
}

struct Candidate {
  double score;
  double magnitude;
  std::size_t flat;
};

}  // namespace

std::size_t MaskSpec::kept() const {
  std::size_t k = 0;
  for (const Mask& m : layers) k += static_cast<std::size_t>(std::count(m.begin(), m.end(), 1));
  return k;
}

std::size_t MaskSpec::total() const {
  std::size_t t = 0;
  for (const Mask& m : layers) t += m.size();
  return t;
}

std::vector<std::size_t> MaskSpec::kept_per_layer() const {
  std::vector<std::size_t> out;
  for (const Mask& m : layers) out.push_back(static_cast<std::size_t>(std::count(m.begin(), m.end(), 1)));
  return out;
}

std::size_t kept_count(std::size_t total, double sparsity) {
  check_sparsity(sparsity);
  const auto pruned = static_cast<std::size_t>(std::llround(sparsity * static_cast<double>(total)));
  return total - std::min(pruned, total);
}

std::vector<std::size_t> balanced_counts(std::span<const std::size_t> sizes,
                                         std::size_t keep) {
  const std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  if (keep > total) throw std::invalid_argument("cannot keep more weights than exist");
  std::vector<std::size_t> counts(sizes.size(), 0);
  std::vector<bool> capped(sizes.size(), false);
  std::size_t left = keep;
  while (left > 0) {
    std::vector<std::size_t> open;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      if (!capped[i]) open.push_back(i);
    }
    if (open.empty()) break;
    // largest layers first for the remainder; stable on index
    std::stable_sort(open.begin(), open.end(),
                     [&](std::size_t a, std::size_t b) { return sizes[a] > sizes[b]; });
    const std::size_t share = left / open.size();
    const std::size_t extra = left % open.size();
    std::size_t assigned = 0;
    for (std::size_t r = 0; r < open.size(); ++r) {
      const std::size_t i = open[r];
      const std::size_t want = share + (r < extra ? 1 : 0);
      const std::size_t room = sizes[i] - counts[i];
      const std::size_t take = std::min(want, room);
      counts[i] += take;
      assigned += take;
      if (counts[i] == sizes[i]) capped[i] = true;
    }
    left -= assigned;
  }
  return counts;
}

MaskSpec random_balanced_mask(std::span<const std::size_t> layer_sizes,
                              double sparsity, std::uint64_t seed) {
  const std::size_t total = std::accumulate(layer_sizes.begin(), layer_sizes.end(), std::size_t{0});
  const std::size_t keep = kept_count(total, sparsity);
  if (keep < layer_sizes.size()) {
    throw std::invalid_argument("sparsity leaves fewer weights than layers");
  }
  const std::vector<std::size_t> counts = balanced_counts(layer_sizes, keep);
  MaskSpec spec{{}, sparsity, "random-balanced"};
  for (std::size_t l = 0; l < layer_sizes.size(); ++l) {
    Rng rng = make_rng(seed_spawn(seed, l));
    std::vector<std::size_t> order(layer_sizes[l]);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    Mask mask(layer_sizes[l], 0);
    for (std::size_t i = 0; i < counts[l]; ++i) mask[order[i]] = 1;
    spec.layers.push_back(std::move(mask));
  }
  return spec;
}

std::vector<std::size_t> weight_sizes(const SmallNet& net) {
  std::vector<std::size_t> sizes;
  for (const DenseLayer& layer : net.layers) sizes.push_back(layer.weight.size());
  return sizes;
}

std::vector<Mask> top_k_masks(const std::vector<std::vector<double>>& scores,
                              const std::vector<std::vector<double>>& magnitudes,
                              std::size_t keep) {
  if (scores.size() != magnitudes.size()) throw ShapeError("scores and magnitudes differ in layers");
  std::vector<Candidate> all;
  std::size_t flat = 0;
  for (std::size_t l = 0; l < scores.size(); ++l) {
    if (scores[l].size() != magnitudes[l].size()) throw ShapeError("scores and magnitudes differ in size");
    for (std::size_t i = 0; i < scores[l].size(); ++i) {
      all.push_back({scores[l][i], magnitudes[l][i], flat++});
    }
  }
  if (keep > all.size()) throw std::invalid_argument("cannot keep more weights than exist");
  auto better = [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.magnitude != b.magnitude) return a.magnitude > b.magnitude;
    return a.flat < b.flat;
  };
  std::nth_element(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(), better);

  std::vector<Mask> masks;
  for (const auto& s : scores) masks.emplace_back(s.size(), 0);
  for (std::size_t r = 0; r < keep; ++r) {
    std::size_t f = all[r].flat;
    std::size_t l = 0;
    while (f >= masks[l].size()) f -= masks[l++].size();
    masks[l][f] = 1;
  }
  return masks;
}

namespace {

std::vector<std::vector<double>> abs_weights(const SmallNet& net) {
  std::vector<std::vector<double>> out;
  for (const DenseLayer& layer : net.layers) {
    std::vector<double> v(layer.weight.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::abs(layer.weight[i]);
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace

std::vector<std::vector<double>> snip_scores(const SmallNet& net, const Tensor& batch,
                                             const Tensor& targets) {
  const GradStore g = loss_gradient(net, batch, targets);
  std::vector<std::vector<double>> scores;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const Tensor& w = net.layers[l].weight;
    std::vector<double> s(w.size());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::abs(w[i] * g.weight[l][i]);
    scores.push_back(std::move(s));
  }
  return scores;
}

MaskSpec snip_mask(const SmallNet& net, const Tensor& batch, const Tensor& targets,
                   double sparsity) {
  const auto scores = snip_scores(net, batch, targets);
  bool informative = false;
  for (const auto& s : scores) {
    informative = informative || std::any_of(s.begin(), s.end(), [](double v) { return v > 0.0; });
  }
  if (!informative) throw std::runtime_error("SNIP scores are all zero on this batch");
  const std::vector<std::size_t> sizes = weight_sizes(net);
  const std::size_t keep = kept_count(std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}), sparsity);
  return {top_k_masks(scores, abs_weights(net), keep), sparsity, "snip"};
}

std::vector<std::vector<double>> synflow_scores(const SmallNet& net,
                                                const std::vector<Mask>& masks) {
  net.validate();
  const std::size_t L = net.layers.size();
  if (masks.size() != L) throw ShapeError("one mask per layer expected");
  std::vector<Tensor> absw;
  for (std::size_t l = 0; l < L; ++l) {
    const Tensor& w = net.layers[l].weight;
    if (masks[l].size() != w.size()) throw ShapeError("mask size does not match layer");
    Tensor a(w.shape());
    for (std::size_t i = 0; i < w.size(); ++i) a[i] = masks[l][i] ? std::abs(w[i]) : 0.0;
    absw.push_back(std::move(a));
  }
  // right[l] = |W_{l-1}| ... |W_0| 1, left[l] = 1^T |W_{L-1}| ... |W_{l+1}|
  std::vector<std::vector<double>> right(L), left(L);
  right[0].assign(absw[0].cols(), 1.0);
  for (std::size_t l = 1; l < L; ++l) {
    const Tensor& prev = absw[l - 1];
    right[l].assign(prev.rows(), 0.0);
    for (std::size_t i = 0; i < prev.rows(); ++i) {
      for (std::size_t j = 0; j < prev.cols(); ++j) right[l][i] += prev(i, j) * right[l - 1][j];
    }
  }
  left[L - 1].assign(absw[L - 1].rows(), 1.0);
  for (std::size_t l = L - 1; l-- > 0;) {
    const Tensor& next = absw[l + 1];
    left[l].assign(next.cols(), 0.0);
    for (std::size_t i = 0; i < next.rows(); ++i) {
      for (std::size_t j = 0; j < next.cols(); ++j) left[l][j] += left[l + 1][i] * next(i, j);
    }
  }
  std::vector<std::vector<double>> scores(L);
  for (std::size_t l = 0; l < L; ++l) {
    const Tensor& a = absw[l];
    scores[l].resize(a.size());
    for (std::size_t i = 0; i < a.rows(); ++i) {
      for (std::size_t j = 0; j < a.cols(); ++j) {
        scores[l][i * a.cols() + j] = left[l][i] * a(i, j) * right[l][j];
      }
    }
  }
  return scores;
}

MaskSpec synflow_mask(const SmallNet& net, double sparsity, std::size_t rounds) {
  if (rounds == 0) throw std::invalid_argument("synflow needs at least one round");
  const std::vector<std::size_t> sizes = weight_sizes(net);
  const std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  const std::size_t final_keep = kept_count(total, sparsity);
  std::vector<Mask> masks;
  for (std::size_t s : sizes) masks.emplace_back(s, 1);
  const auto magnitudes = abs_weights(net);
  for (std::size_t r = 1; r <= rounds; ++r) {
    std::size_t keep = final_keep;
    if (r < rounds) {
      const double frac = std::pow(1.0 - sparsity, static_cast<double>(r) / static_cast<double>(rounds));
      keep = std::max(final_keep, static_cast<std::size_t>(std::llround(frac * static_cast<double>(total))));
    }
    auto scores = synflow_scores(net, masks);
    // pruned weights must stay pruned
    for (std::size_t l = 0; l < masks.size(); ++l) {
      for (std::size_t i = 0; i < masks[l].size(); ++i) {
        if (!masks[l][i]) scores[l][i] = -1.0;
      }
    }
    masks = top_k_masks(scores, magnitudes, keep);
  }
  return {std::move(masks), sparsity, "synflow"};
}

void apply_mask(SmallNet& net, const MaskSpec& mask) {
  if (mask.layers.size() != net.layers.size()) throw ShapeError("mask layer count does not match net");
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    Tensor& w = net.layers[l].weight;
    if (mask.layers[l].size() != w.size()) throw ShapeError("mask size does not match layer");
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (!mask.layers[l][i]) w[i] = 0.0;
    }
  }
}

}  // namespace signlab
