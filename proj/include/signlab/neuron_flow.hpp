#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "signlab/parallel.hpp"
#include "signlab/tensor.hpp"

namespace signlab {

// Single hidden ReLU neuron f(z) = a * relu(w . z).
struct Teacher {
  double a = 1.0;
  std::vector<double> w;

  // w = (1/a, 0, ..., 0)
  static Teacher canonical(std::size_t d, double a = 1.0);
};

struct TeacherData {
  Tensor z;               // [n, d]
  std::vector<double> y;  // teacher labels

  std::size_t n() const { return z.rows(); }
  std::size_t d() const { return z.cols(); }
};

TeacherData sample_teacher_data(std::size_t n, std::size_t d,
                                const Teacher& teacher, std::uint64_t seed);
TeacherData label_with_teacher(Tensor z, const Teacher& teacher);

struct NeuronState {
  double a = 0.0;
  std::vector<double> w;
};

struct NeuronGrad {
  double a = 0.0;
  std::vector<double> w;
};

// L = (1/2n) sum (a relu(w.z_i) - y_i)^2
double neuron_loss(const NeuronState& state, const TeacherData& data);
NeuronGrad empirical_grads(const NeuronState& state, const TeacherData& data,
                           double* loss = nullptr);

enum class FlowMethod { standard, sign_in };
enum class Integrator { euler, rk4 };
enum class Outcome { success, origin_collapse, dead_boundary, diverged, timeout };

std::string_view to_string(FlowMethod method);
std::string_view to_string(Outcome outcome);
FlowMethod parse_flow_method(std::string_view name);
Integrator parse_integrator(std::string_view name);

// Closed-form d=1 field on w1 > 0, where the loss reduces to
// (C/2)(a w1 - target_product)^2.
struct PopulationField {
  double c = 0.5;
  double target_product = 1.0;
};

struct FieldValue {
  double da = 0.0;
  double dw = 0.0;
};

FieldValue population_field(double a, double w1, const PopulationField& field,
                            double beta1, double beta2, FlowMethod method);
double population_loss(double a, double w1, const PopulationField& field);

struct NeuronFlowConfig {
  std::size_t d = 1;
  Teacher teacher = Teacher::canonical(1);
  std::optional<std::size_t> n_samples = 64;  // nullopt: population field
  PopulationField population;
  double beta1 = 2.0;  // outer weight a
  double beta2 = 1.0;  // every input weight
  NeuronState init;
  double step = 0.01;
  double max_time = 200.0;
  std::optional<std::size_t> max_steps;
  FlowMethod method = FlowMethod::standard;
  Integrator integrator = Integrator::rk4;
  std::size_t record_every = 0;  // 0: endpoints only
  std::uint64_t data_seed = 0;
  bool balanced_init = true;

  void validate() const;
  std::size_t step_budget() const;
};

struct FlowTrace {
  std::vector<double> times;
  std::vector<double> a;
  std::vector<std::vector<double>> w;
  std::vector<double> loss;

  NeuronState final_state;
  double final_loss = 0.0;
  std::size_t steps = 0;
  bool diverged = false;
  Outcome outcome = Outcome::timeout;
};

// Integrates the standard or preconditioned (sqrt(x^2 + beta) per coordinate)
// gradient flow. Stops at the step budget, when |state| < 1e-6, when the
// success test holds for 100 consecutive steps, or on divergence.
FlowTrace flow_integrate(const NeuronFlowConfig& config);
FlowTrace flow_integrate(const NeuronFlowConfig& config, const TeacherData& data);

struct SuccessCriterion {
  double max_loss = 1e-4;
  double product_tol = 1e-2;
  double collapse_norm = 1e-3;
};

bool meets_success(const NeuronState& state, double loss, const Teacher& teacher,
                   const SuccessCriterion& criterion = {});
Outcome classify_outcome(const FlowTrace& trace, const Teacher& teacher,
                         const SuccessCriterion& criterion = {});

// Initial sign pattern of (a, w1).
enum class Quadrant { pos_pos = 0, neg_pos = 1, pos_neg = 2, neg_neg = 3 };
inline constexpr std::array<Quadrant, 4> kQuadrants = {
    Quadrant::pos_pos, Quadrant::neg_pos, Quadrant::pos_neg, Quadrant::neg_neg};
std::string_view to_string(Quadrant q);

// Balanced draw: w ~ N(0, std^2 I) with the sign of w1 forced, a = +-|w|.
NeuronState balanced_init(std::size_t d, Quadrant quadrant, std::uint64_t seed,
                          double std = 1.0);

enum class SweepMethod { sparse, overparam, sign_in, overparam_sign_in };
inline constexpr std::array<SweepMethod, 4> kSweepMethods = {
    SweepMethod::sparse, SweepMethod::overparam, SweepMethod::sign_in,
    SweepMethod::overparam_sign_in};
std::string_view to_string(SweepMethod method);
SweepMethod parse_sweep_method(std::string_view name);

struct QuadrantSweepConfig {
  std::size_t runs = 100;
  std::size_t d_overparam = 5;
  double lr = 0.01;
  std::size_t steps = 20000;
  std::size_t n_samples = 128;
  double beta1 = 8.0;
  double beta2 = 4.0;
  double init_std = 1.0;
  std::uint64_t seed = 0;
};

struct NeuronRunRecord {
  std::size_t run_id = 0;
  std::uint64_t seed = 0;
  std::string method;
  std::string quadrant;
  Outcome outcome = Outcome::timeout;
  double a_final = 0.0;
  double w1_final = 0.0;
  double loss_final = 0.0;
  std::size_t steps = 0;
};

struct QuadrantResult {
  SweepMethod method = SweepMethod::sparse;
  std::array<double, 4> success_fraction{};
  std::vector<NeuronRunRecord> runs;
};

// Gradient descent from balanced inits in each sign quadrant. Run r of
// quadrant q uses seed_spawn(seed, q * runs + r), shared across methods.
QuadrantResult quadrant_sweep(SweepMethod method, const QuadrantSweepConfig& config,
                              Execution exec = Execution::parallel);

struct MultiInputConfig {
  std::size_t runs = 100;
  std::size_t d = 5;
  double lr = 0.01;
  double time = 200.0;
  std::size_t max_steps = 200000;
  std::size_t n_samples = 512;
  double beta = 1.0;
  double init_std = 1.35;
  std::uint64_t seed = 0;
};

struct RecoveryResult {
  FlowMethod method = FlowMethod::standard;
  double lr = 0.0;
  double recovered_fraction = 0.0;
  std::vector<NeuronRunRecord> runs;
};

// Sign recovery of a_in < 0 with w1 > 0 at d > 1, same beta on both layers.
RecoveryResult multi_input_recovery(FlowMethod method, const MultiInputConfig& config,
                                    Execution exec = Execution::parallel);

// Unit vector along (-sqrt(beta1/beta2), 1).
std::array<double, 2> stable_manifold_direction(double beta1, double beta2);

}  // namespace signlab
