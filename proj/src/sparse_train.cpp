#include "signlab/sparse_train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "signlab/seed.hpp"

namespace signlab {

Signs signs_of(std::span<const double> values) {
  Signs out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = values[i] < 0.0 ? -1 : 1;
  return out;
}

Signs masked_weight_signs(const SmallNet& net) {
  Signs out;
  for (const DenseLayer& layer : net.layers) {
    const Signs s = signs_of(layer.weight.values());
    out.insert(out.end(), s.begin(), s.end());
  }
  return out;
}

Mask concat_mask(const MaskSpec& mask) {
  Mask out;
  for (const Mask& m : mask.layers) out.insert(out.end(), m.begin(), m.end());
  return out;
}

double flip_fraction(const Signs& a, const Signs& b, const Mask& mask) {
  if (a.size() != b.size() || a.size() != mask.size()) {
    throw ShapeError("sign vectors and mask differ in size");
  }
  std::size_t support = 0;
  std::size_t flips = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!mask[i]) continue;
    ++support;
    if (a[i] != b[i]) ++flips;
  }
  if (support == 0) throw std::invalid_argument("flip fraction over an empty mask");
  return static_cast<double>(flips) / static_cast<double>(support);
}

Signs perturb_signs(const Signs& signs, const Mask& mask, double fraction,
                    std::uint64_t seed) {
  if (signs.size() != mask.size()) throw ShapeError("signs and mask differ in size");
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("perturbation fraction must be in [0, 1]");
  }
  std::vector<std::size_t> support;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) support.push_back(i);
  }
  const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(support.size())));
  Rng rng = make_rng(seed);
  std::shuffle(support.begin(), support.end(), rng);
  Signs out = signs;
  for (std::size_t k = 0; k < count; ++k) out[support[k]] = static_cast<std::int8_t>(-out[support[k]]);
  return out;
}

SmallNet make_mlp(const std::vector<std::size_t>& widths, bool bias, LossKind loss,
                  std::uint64_t seed) {
  if (widths.size() < 2) throw std::invalid_argument("an MLP needs at least two widths");
  SmallNet net;
  net.loss = loss;
  Rng rng = make_rng(seed);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    if (widths[l] == 0 || widths[l + 1] == 0) throw std::invalid_argument("widths must be positive");
    std::normal_distribution<double> he(0.0, std::sqrt(2.0 / static_cast<double>(widths[l])));
    DenseLayer layer;
    layer.weight = Tensor({widths[l + 1], widths[l]});
    for (double& w : layer.weight.values()) w = he(rng);
    if (bias) layer.bias = Tensor({1, widths[l + 1]});
    net.layers.push_back(std::move(layer));
  }
  return net;
}

double accuracy(const SmallNet& net, const Dataset& data) {
  const Tensor out = mlp_forward(net, data.x);
  std::size_t correct = 0;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < out.cols(); ++c) {
      if (out(r, c) > out(r, best)) best = c;
    }
    if (static_cast<double>(best) == data.y(r, 0)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(out.rows());
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("lr must be positive");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (weight_decay < 0.0) throw std::invalid_argument("weight_decay must be nonnegative");
  if (frobenius_decay < 0.0) throw std::invalid_argument("frobenius_decay must be nonnegative");
  if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  schedule.validate();
  if (warmup_epoch < 0 || warmup_epoch >= epochs) {
    throw std::invalid_argument("warmup_epoch must be in [0, epochs)");
  }
  if (sharpness_every < 0) throw std::invalid_argument("sharpness_every must be nonnegative");
  if (sharpness_samples == 0) throw std::invalid_argument("sharpness_samples must be positive");
}

namespace {

void check_mask(const SmallNet& net, const MaskSpec& mask) {
  if (mask.layers.size() != net.layers.size()) throw ShapeError("mask layer count does not match net");
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    if (mask.layers[l].size() != net.layers[l].weight.size()) {
      throw ShapeError("mask for layer " + std::to_string(l) + " has the wrong size");
    }
  }
}

bool zero_off_support(const SmallNet& net, const MaskSpec& mask) {
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const Tensor& w = net.layers[l].weight;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (!mask.layers[l][i] && w[i] != 0.0) return false;
    }
  }
  return true;
}

void gather_batch(const Dataset& data, std::span<const std::size_t> rows, Tensor& x, Tensor& y) {
  const std::size_t d = data.x.cols();
  x = Tensor({rows.size(), d});
  y = Tensor({rows.size(), 1});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::copy_n(&data.x.data()[rows[r] * d], d, &x.data()[r * d]);
    y(r, 0) = data.y(rows[r], 0);
  }
}

}  // namespace

TrainResult train_sparse(SmallNet net, const MaskSpec& mask, const DataSplit& data,
                         const TrainConfig& config, bool sign_in) {
  config.validate();
  net.validate();
  check_mask(net, mask);
  if (data.train.size() == 0 || data.test.size() == 0) throw std::invalid_argument("empty dataset");
  apply_mask(net, mask);

  std::vector<SignInLayer> factors;
  if (sign_in) {
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      factors.push_back(SignInLayer::from_weights(net.layers[l].weight, mask.layers[l],
                                                  config.schedule.beta));
    }
  }
  auto sync = [&] {
    for (std::size_t l = 0; l < factors.size(); ++l) net.layers[l].weight = merge(factors[l]);
  };
  sync();

  const Dataset probe = take_rows(data.train, config.sharpness_samples);
  auto evaluate = [&](int epoch, bool with_sharpness) {
    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_value(net, data.train.x, data.train.y);
    m.train_accuracy = accuracy(net, data.train);
    m.test_loss = loss_value(net, data.test.x, data.test.y);
    m.test_accuracy = accuracy(net, data.test);
    if (with_sharpness) m.sharpness = sharpness(net, probe.x, probe.y, config.power, &mask).lambda;
    return m;
  };
  auto sharpness_due = [&](int epoch) {
    if (epoch == config.epochs && config.final_sharpness) return true;
    return config.sharpness_every > 0 && epoch % config.sharpness_every == 0;
  };

  TrainResult result;
  result.flips.support = concat_mask(mask);
  result.flips.init = masked_weight_signs(net);
  result.flips.cumulative_counts.assign(result.flips.init.size(), 0);
  if (config.warmup_epoch == 0) result.flips.warmup = result.flips.init;
  result.history.push_back(evaluate(0, sharpness_due(0)));
  result.off_support_zero = zero_off_support(net, mask);

  std::size_t support_size = 0;
  for (auto v : result.flips.support) support_size += v;

  Rng rng = make_rng(config.seed);
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Tensor xb, yb;
  std::size_t ever_flipped = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (sign_in && config.schedule.rescale_due(epoch)) {
      for (auto& f : factors) f = rescale(f);
      sync();
    }
    const Signs before = masked_weight_signs(net);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      gather_batch(data.train, std::span(order).subspan(start, stop - start), xb, yb);
      const GradStore g = loss_gradient(net, xb, yb);
      for (std::size_t l = 0; l < net.layers.size(); ++l) {
        DenseLayer& layer = net.layers[l];
        if (layer.bias) sgd_step(layer.bias->values(), g.bias[l]->values(), config.lr, 0.0);
        if (sign_in) {
          SignInLayer& f = factors[l];
          const FactorGrads fg = reparam_grads(f, g.weight[l]);
          const FactorGrads fd = frobenius_decay_grads(f, config.frobenius_decay);
          for (std::size_t i = 0; i < f.m.size(); ++i) {
            const double gm = fg.m[i] + fd.m[i];
            const double gw = fg.w[i] + fd.w[i];
            f.m[i] -= config.lr * gm;
            f.w[i] -= config.lr * gw;
          }
        } else {
          sgd_step(layer.weight.values(), g.weight[l].values(), config.lr, config.weight_decay);
          const Mask& m = mask.layers[l];
          for (std::size_t i = 0; i < m.size(); ++i) {
            if (!m[i]) layer.weight[i] = 0.0;
          }
        }
      }
      sync();
    }

    const Signs after = masked_weight_signs(net);
    std::size_t flips = 0;
    for (std::size_t i = 0; i < after.size(); ++i) {
      if (!result.flips.support[i] || after[i] == before[i]) continue;
      ++flips;
      if (result.flips.cumulative_counts[i]++ == 0) ++ever_flipped;
    }
    result.flips.flips_per_epoch.push_back(flips);
    const double cum = support_size ? static_cast<double>(ever_flipped) / static_cast<double>(support_size) : 0.0;
    result.flips.cumulative_fraction.push_back(cum);
    if (epoch + 1 == config.warmup_epoch) result.flips.warmup = after;
    result.off_support_zero = result.off_support_zero && zero_off_support(net, mask);

    EpochMetrics m = evaluate(epoch + 1, sharpness_due(epoch + 1));
    m.flips_epoch = flips;
    m.flip_frac_cum = cum;
    result.history.push_back(m);
  }
  result.flips.final = masked_weight_signs(net);
  result.net = std::move(net);
  return result;
}

std::string_view to_string(ReinitMode mode) {
  switch (mode) {
    case ReinitMode::signs_random_magnitude: return "signs+random-magnitude";
    case ReinitMode::magnitude_random_signs: return "magnitude+random-signs";
    case ReinitMode::fully_random: return "fully-random";
  }
  return "fully-random";
}

SmallNet reinit_from_checkpoint(const SmallNet& checkpoint, const MaskSpec& mask,
                                ReinitMode mode, std::uint64_t seed) {
  checkpoint.validate();
  check_mask(checkpoint, mask);
  SmallNet net = checkpoint;
  Rng rng = make_rng(seed);
  std::bernoulli_distribution coin(0.5);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    Tensor& w = net.layers[l].weight;
    std::normal_distribution<double> he(0.0, std::sqrt(2.0 / static_cast<double>(w.cols())));
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (!mask.layers[l][i]) {
        w[i] = 0.0;
        continue;
      }
      const double ref = checkpoint.layers[l].weight[i];
      const double sign = ref < 0.0 ? -1.0 : 1.0;
      switch (mode) {
        case ReinitMode::signs_random_magnitude:
          w[i] = sign * std::abs(he(rng));
          break;
        case ReinitMode::magnitude_random_signs:
          w[i] = (coin(rng) ? 1.0 : -1.0) * std::abs(ref);
          break;
        case ReinitMode::fully_random:
          w[i] = he(rng);
          break;
      }
    }
    if (net.layers[l].bias) net.layers[l].bias->fill(0.0);
  }
  return net;
}

std::string_view to_string(MaskGenerator g) {
  switch (g) {
    case MaskGenerator::random_balanced: return "random-balanced";
    case MaskGenerator::snip: return "snip";
    case MaskGenerator::synflow: return "synflow";
  }
  return "random-balanced";
}

MaskGenerator parse_mask_generator(std::string_view name) {
  if (name == "random-balanced") return MaskGenerator::random_balanced;
  if (name == "snip") return MaskGenerator::snip;
  if (name == "synflow") return MaskGenerator::synflow;
  throw std::invalid_argument("unknown mask generator: " + std::string(name));
}

std::vector<StudyRun> sparse_study(const StudyConfig& config, Execution exec) {
  if (config.runs == 0) throw std::invalid_argument("runs must be positive");
  config.train.validate();
  std::vector<StudyRun> runs(config.runs);
  for_each_run(config.runs, exec, [&](std::size_t r) {
    StudyRun& run = runs[r];
    run.run_id = r;
    run.seed = seed_spawn(config.seed, r);
    const DataSplit data = two_moons_split(config.n_train, config.n_test, config.noise,
                                           seed_spawn(run.seed, 0));
    const SmallNet init = make_mlp(config.widths, true, LossKind::cross_entropy,
                                   seed_spawn(run.seed, 1));
    MaskSpec mask;
    switch (config.generator) {
      case MaskGenerator::random_balanced:
        mask = random_balanced_mask(weight_sizes(init), config.sparsity, seed_spawn(run.seed, 2));
        break;
      case MaskGenerator::snip: {
        const Dataset batch = take_rows(data.train, 256);
        mask = snip_mask(init, batch.x, batch.y, config.sparsity);
        break;
      }
      case MaskGenerator::synflow:
        mask = synflow_mask(init, config.sparsity);
        break;
    }
    run.sparsity = 1.0 - static_cast<double>(mask.kept()) / static_cast<double>(mask.total());

    TrainConfig train = config.train;
    train.seed = seed_spawn(run.seed, 3);
    run.plain = train_sparse(init, mask, data, train, false);
    run.sign_in = train_sparse(init, mask, data, train, true);

    TrainConfig retrain = train;
    retrain.final_sharpness = false;
    retrain.sharpness_every = 0;
    const SmallNet& source = run.sign_in.net;
    run.reinit_signs = train_sparse(
        reinit_from_checkpoint(source, mask, ReinitMode::signs_random_magnitude, seed_spawn(run.seed, 4)),
        mask, data, retrain, false);
    run.reinit_magnitude = train_sparse(
        reinit_from_checkpoint(source, mask, ReinitMode::magnitude_random_signs, seed_spawn(run.seed, 5)),
        mask, data, retrain, false);
    run.reinit_random = train_sparse(
        reinit_from_checkpoint(source, mask, ReinitMode::fully_random, seed_spawn(run.seed, 6)),
        mask, data, retrain, false);
  });
  return runs;
}

StudySummary summarize(const std::vector<StudyRun>& runs) {
  StudySummary s;
  if (runs.empty()) return s;
  const double n = static_cast<double>(runs.size());
  const std::size_t epochs = runs.front().plain.flips.cumulative_fraction.size();
  s.plain_flip_cum.assign(epochs, 0.0);
  s.sign_in_flip_cum.assign(epochs, 0.0);
  for (const StudyRun& r : runs) {
    s.plain_accuracy += r.plain.history.back().test_accuracy / n;
    s.sign_in_accuracy += r.sign_in.history.back().test_accuracy / n;
    s.plain_sharpness += r.plain.history.back().sharpness.value_or(0.0) / n;
    s.sign_in_sharpness += r.sign_in.history.back().sharpness.value_or(0.0) / n;
    s.reinit_signs_accuracy += r.reinit_signs.history.back().test_accuracy / n;
    s.reinit_random_accuracy += r.reinit_random.history.back().test_accuracy / n;
    s.reinit_magnitude_accuracy += r.reinit_magnitude.history.back().test_accuracy / n;
    for (std::size_t e = 0; e < epochs; ++e) {
      s.plain_flip_cum[e] += r.plain.flips.cumulative_fraction[e] / n;
      s.sign_in_flip_cum[e] += r.sign_in.flips.cumulative_fraction[e] / n;
    }
  }
  return s;
}

}  // namespace signlab
