#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "signlab/datasets.hpp"
#include "signlab/masks.hpp"
#include "signlab/mlp.hpp"
#include "signlab/parallel.hpp"
#include "signlab/reparam.hpp"
#include "signlab/sharpness.hpp"

namespace signlab {

// +1 / -1 per coordinate, sign(0) = +1.
using Signs = std::vector<std::int8_t>;

Signs signs_of(std::span<const double> values);
Signs masked_weight_signs(const SmallNet& net);
Mask concat_mask(const MaskSpec& mask);

// Fraction of masked-in coordinates whose signs differ. Throws on an empty
// support or mismatched sizes.
double flip_fraction(const Signs& a, const Signs& b, const Mask& mask);

// Flips exactly round(fraction * support) masked-in signs, chosen uniformly.
Signs perturb_signs(const Signs& signs, const Mask& mask, double fraction,
                    std::uint64_t seed);

// He-normal weights N(0, 2 / fan_in), zero biases. widths = {in, h1, ..., out}.
SmallNet make_mlp(const std::vector<std::size_t>& widths, bool bias, LossKind loss,
                  std::uint64_t seed);

double accuracy(const SmallNet& net, const Dataset& data);

struct TrainConfig {
  double lr = 0.1;
  int epochs = 30;
  double weight_decay = 1e-4;     // plain mode
  double frobenius_decay = 1e-4;  // sign-in mode, replaces weight decay
  std::size_t batch_size = 32;
  ReparamSchedule schedule{1, 15, 1.0};
  int warmup_epoch = 3;
  int sharpness_every = 0;  // 0: final epoch only
  bool final_sharpness = true;
  std::size_t sharpness_samples = 512;
  PowerIterationOptions power{1e-6, 300, 0};
  std::uint64_t seed = 0;

  void validate() const;
};

struct FlipStats {
  Mask support;
  Signs init;
  Signs warmup;
  Signs final;
  std::vector<std::size_t> flips_per_epoch;
  std::vector<double> cumulative_fraction;  // per epoch
  std::vector<std::uint32_t> cumulative_counts;  // per coordinate

  double init_to_warmup() const { return flip_fraction(init, warmup, support); }
  double warmup_to_final() const { return flip_fraction(warmup, final, support); }
  double init_to_final() const { return flip_fraction(init, final, support); }
};

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double test_loss = 0.0;
  double test_accuracy = 0.0;
  std::size_t flips_epoch = 0;
  double flip_frac_cum = 0.0;
  std::optional<double> sharpness;
};

struct TrainResult {
  SmallNet net;  // merged weights
  std::vector<EpochMetrics> history;  // epoch 0 is the initial state
  FlipStats flips;
  bool off_support_zero = true;  // merged weights were 0 off the mask at every epoch
};

// Plain mode: masked SGD with weight decay. Sign-in mode: each weight matrix
// trained as mask * m * w with Frobenius decay and the rescale schedule.
TrainResult train_sparse(SmallNet net, const MaskSpec& mask, const DataSplit& data,
                         const TrainConfig& config, bool sign_in);

enum class ReinitMode { signs_random_magnitude, magnitude_random_signs, fully_random };
std::string_view to_string(ReinitMode mode);

// Fresh weights on the mask: magnitudes from He normal or the checkpoint,
// signs from the checkpoint or Rademacher. Biases reset to zero.
SmallNet reinit_from_checkpoint(const SmallNet& checkpoint, const MaskSpec& mask,
                                ReinitMode mode, std::uint64_t seed);

enum class MaskGenerator { random_balanced, snip, synflow };
std::string_view to_string(MaskGenerator g);
MaskGenerator parse_mask_generator(std::string_view name);

struct StudyConfig {
  std::size_t runs = 5;
  double sparsity = 0.9;
  std::vector<std::size_t> widths{2, 64, 64, 2};
  std::size_t n_train = 2000;
  std::size_t n_test = 1000;
  double noise = 0.1;
  MaskGenerator generator = MaskGenerator::random_balanced;
  TrainConfig train;
  std::uint64_t seed = 0;
};

struct StudyRun {
  std::size_t run_id = 0;
  std::uint64_t seed = 0;
  TrainResult plain;
  TrainResult sign_in;
  TrainResult reinit_signs;
  TrainResult reinit_random;
  TrainResult reinit_magnitude;
  double sparsity = 0.0;
};

struct StudySummary {
  double plain_accuracy = 0.0;
  double sign_in_accuracy = 0.0;
  double plain_sharpness = 0.0;
  double sign_in_sharpness = 0.0;
  double reinit_signs_accuracy = 0.0;
  double reinit_random_accuracy = 0.0;
  double reinit_magnitude_accuracy = 0.0;
  // per-epoch means of flip_frac_cum
  std::vector<double> plain_flip_cum;
  std::vector<double> sign_in_flip_cum;
};

// Per seed: one mask and one init shared by the plain and sign-in arms, then
// three plain retrainings from re-initializations of the sign-in result.
std::vector<StudyRun> sparse_study(const StudyConfig& config,
                                   Execution exec = Execution::parallel);
StudySummary summarize(const std::vector<StudyRun>& runs);

}  // namespace signlab
