#include "signlab/neuron_flow.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "signlab/seed.hpp"

namespace signlab {

namespace {

constexpr double kCollapseNorm = 1e-6;
constexpr double kDivergenceNorm = 1e6;
constexpr std::size_t kSuccessStreak = 100;

double norm2(const std::vector<double>& x) {
  return std::sqrt(std::inner_product(x.begin(), x.end(), x.begin(), 0.0));
}

// Loss and gradient of the single-neuron student over a fixed data set.
// State layout: x[0] = a, x[1..d] = w.
double neuron_loss_grad(const TeacherData& data, const double* x, double* grad) {
  const std::size_t n = data.n();
  const std::size_t d = data.d();
  const double a = x[0];
  const double* w = x + 1;
  const double* z = data.z.data().data();
  double loss = 0.0;
  if (grad) std::fill(grad, grad + d + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* zi = z + i * d;
    double pre = 0.0;
    for (std::size_t j = 0; j < d; ++j) pre += w[j] * zi[j];
    const double act = pre > 0.0 ? pre : 0.0;
    const double r = a * act - data.y[i];
    loss += r * r;
    if (!grad) continue;
    grad[0] += r * act;
    if (pre > 0.0) {
      const double ra = r * a;
      for (std::size_t j = 0; j < d; ++j) grad[1 + j] += ra * zi[j];
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  if (grad) {
    for (std::size_t j = 0; j <= d; ++j) grad[j] *= inv_n;
  }
  return 0.5 * inv_n * loss;
}

class FlowField {
 public:
  FlowField(const NeuronFlowConfig& config, const TeacherData* data)
      : config_(config), data_(data), grad_(config.d + 1) {}

  // Writes dx/dt; returns the loss at x. Sets boundary_hit() when the
  // population closed form is asked for w1 <= 0.
  double operator()(const std::vector<double>& x, std::vector<double>& dx) {
    double loss = 0.0;
    if (data_) {
      loss = neuron_loss_grad(*data_, x.data(), grad_.data());
      for (std::size_t j = 0; j < x.size(); ++j) dx[j] = -grad_[j];
      if (config_.method == FlowMethod::sign_in) {
        dx[0] *= std::sqrt(x[0] * x[0] + config_.beta1);
        for (std::size_t j = 1; j < x.size(); ++j) {
          dx[j] *= std::sqrt(x[j] * x[j] + config_.beta2);
        }
      }
      return loss;
    }
    if (!(x[1] > 0.0)) {
      boundary_hit_ = true;
      dx[0] = dx[1] = 0.0;
      return population_loss(x[0], x[1], config_.population);
    }
    const FieldValue f = population_field(x[0], x[1], config_.population,
                                          config_.beta1, config_.beta2,
                                          config_.method);
    dx[0] = f.da;
    dx[1] = f.dw;
    return population_loss(x[0], x[1], config_.population);
  }

  double loss_at(const std::vector<double>& x) const {
    if (data_) return neuron_loss_grad(*data_, x.data(), nullptr);
    return population_loss(x[0], x[1], config_.population);
  }

  bool boundary_hit() const { return boundary_hit_; }

 private:
  const NeuronFlowConfig& config_;
  const TeacherData* data_;
  std::vector<double> grad_;
  bool boundary_hit_ = false;
};

NeuronState to_state(const std::vector<double>& x) {
  return {x[0], std::vector<double>(x.begin() + 1, x.end())};
}

FlowTrace integrate(const NeuronFlowConfig& config, const TeacherData* data) {
  config.validate();
  const std::size_t dim = config.d + 1;
  std::vector<double> x(dim);
  x[0] = config.init.a;
  std::copy(config.init.w.begin(), config.init.w.end(), x.begin() + 1);

  FlowField field(config, data);
  FlowTrace trace;
  std::vector<double> k1(dim), k2(dim), k3(dim), k4(dim), probe(dim);
  const double h = config.step;
  const std::size_t budget = config.step_budget();

  auto record = [&](std::size_t step, double loss) {
    trace.times.push_back(static_cast<double>(step) * h);
    trace.a.push_back(x[0]);
    trace.w.emplace_back(x.begin() + 1, x.end());
    trace.loss.push_back(loss);
  };

  std::size_t streak = 0;
  std::size_t step = 0;
  for (; step < budget; ++step) {
    const double loss = field(x, k1);
    if (config.record_every > 0 && step % config.record_every == 0) {
      record(step, loss);
    } else if (step == 0) {
      record(step, loss);
    }
    const double norm = norm2(x);
    if (!std::isfinite(norm) || norm > kDivergenceNorm || !std::isfinite(loss)) {
      trace.diverged = true;
      break;
    }
    if (norm < kCollapseNorm || field.boundary_hit()) {
      break;
    }
    if (meets_success(to_state(x), loss, config.teacher)) {
      if (++streak >= kSuccessStreak) {
        break;
      }
    } else {
      streak = 0;
    }

    if (config.integrator == Integrator::euler) {
      for (std::size_t j = 0; j < dim; ++j) x[j] += h * k1[j];
      continue;
    }
    for (std::size_t j = 0; j < dim; ++j) probe[j] = x[j] + 0.5 * h * k1[j];
    field(probe, k2);
    for (std::size_t j = 0; j < dim; ++j) probe[j] = x[j] + 0.5 * h * k2[j];
    field(probe, k3);
    for (std::size_t j = 0; j < dim; ++j) probe[j] = x[j] + h * k3[j];
    field(probe, k4);
    if (field.boundary_hit()) {
      break;
    }
    for (std::size_t j = 0; j < dim; ++j) {
      x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    }
  }

  trace.steps = step;
  trace.final_state = to_state(x);
  trace.final_loss = field.loss_at(x);
  if (!std::isfinite(trace.final_loss) || !std::isfinite(norm2(x))) {
    trace.diverged = true;
  }
  if (trace.times.empty() || trace.times.back() != static_cast<double>(step) * h) {
    record(step, trace.final_loss);
  }
  trace.outcome = classify_outcome(trace, config.teacher);
  return trace;
}

}  // namespace

Teacher Teacher::canonical(std::size_t d, double a) {
  if (d == 0) throw std::invalid_argument("teacher dimension must be positive");
  if (!(a > 0.0)) throw std::invalid_argument("teacher a must be positive");
  Teacher t{a, std::vector<double>(d, 0.0)};
  t.w[0] = 1.0 / a;
  return t;
}

TeacherData label_with_teacher(Tensor z, const Teacher& teacher) {
  if (z.rank() != 2 || z.cols() != teacher.w.size()) {
    throw ShapeError("teacher input dimension does not match data");
  }
  std::vector<double> y(z.rows());
  for (std::size_t i = 0; i < z.rows(); ++i) {
    double pre = 0.0;
    for (std::size_t j = 0; j < z.cols(); ++j) pre += teacher.w[j] * z(i, j);
    y[i] = teacher.a * std::max(pre, 0.0);
  }
  return {std::move(z), std::move(y)};
}

TeacherData sample_teacher_data(std::size_t n, std::size_t d,
                                const Teacher& teacher, std::uint64_t seed) {
  if (n == 0 || d == 0) throw std::invalid_argument("n and d must be positive");
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor z({n, d});
  for (double& v : z.values()) v = normal(rng);
  return label_with_teacher(std::move(z), teacher);
}

double neuron_loss(const NeuronState& state, const TeacherData& data) {
  if (state.w.size() != data.d()) throw ShapeError("student/data dimension mismatch");
  std::vector<double> x(1 + state.w.size());
  x[0] = state.a;
  std::copy(state.w.begin(), state.w.end(), x.begin() + 1);
  return neuron_loss_grad(data, x.data(), nullptr);
}

NeuronGrad empirical_grads(const NeuronState& state, const TeacherData& data,
                           double* loss) {
  if (state.w.size() != data.d()) throw ShapeError("student/data dimension mismatch");
  std::vector<double> x(1 + state.w.size());
  x[0] = state.a;
  std::copy(state.w.begin(), state.w.end(), x.begin() + 1);
  std::vector<double> g(x.size());
  const double l = neuron_loss_grad(data, x.data(), g.data());
  if (loss) *loss = l;
  return {g[0], std::vector<double>(g.begin() + 1, g.end())};
}

std::string_view to_string(FlowMethod method) {
  return method == FlowMethod::standard ? "standard" : "sign-in";
}

std::string_view to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::success: return "success";
    case Outcome::origin_collapse: return "origin-collapse";
    case Outcome::dead_boundary: return "dead-boundary";
    case Outcome::diverged: return "diverged";
    case Outcome::timeout: return "timeout";
  }
  return "timeout";
}

FlowMethod parse_flow_method(std::string_view name) {
  if (name == "standard") return FlowMethod::standard;
  if (name == "sign-in") return FlowMethod::sign_in;
  throw std::invalid_argument("unknown flow method: " + std::string(name));
}

Integrator parse_integrator(std::string_view name) {
  if (name == "euler") return Integrator::euler;
  if (name == "rk4") return Integrator::rk4;
  throw std::invalid_argument("unknown integrator: " + std::string(name));
}

FieldValue population_field(double a, double w1, const PopulationField& field,
                            double beta1, double beta2, FlowMethod method) {
  if (!(w1 > 0.0)) {
    throw std::domain_error("population field holds only for w1 > 0");
  }
  const double residual = a * w1 - field.target_product;
  FieldValue f{-field.c * w1 * residual, -field.c * a * residual};
  if (method == FlowMethod::sign_in) {
    f.da *= std::sqrt(a * a + beta1);
    f.dw *= std::sqrt(w1 * w1 + beta2);
  }
  return f;
}

double population_loss(double a, double w1, const PopulationField& field) {
  if (w1 > 0.0) {
    const double r = a * w1 - field.target_product;
    return 0.5 * field.c * r * r;
  }
  // Student active only where the teacher is silent.
  return 0.5 * field.c * (a * a * w1 * w1 + field.target_product * field.target_product);
}

void NeuronFlowConfig::validate() const {
  if (d == 0) throw std::invalid_argument("d must be positive");
  if (teacher.w.size() != d) throw ShapeError("teacher dimension != d");
  if (!(teacher.a > 0.0)) throw std::invalid_argument("teacher a must be positive");
  if (init.w.size() != d) throw ShapeError("initial w dimension != d");
  if (!(step > 0.0)) throw std::invalid_argument("step must be positive");
  if (!(max_time > 0.0)) throw std::invalid_argument("max_time must be positive");
  if (!(beta1 > 0.0) || !(beta2 > 0.0)) {
    throw std::invalid_argument("betas must be positive");
  }
  if (n_samples && *n_samples == 0) {
    throw std::invalid_argument("n_samples must be positive");
  }
  if (!n_samples && d != 1) {
    throw std::invalid_argument("population field is defined for d = 1 only");
  }
  if (!(population.c > 0.0)) throw std::invalid_argument("C must be positive");
  if (balanced_init) {
    const double wn = norm2(init.w);
    if (std::abs(std::abs(init.a) - wn) > 1e-12 * std::max(1.0, wn)) {
      throw std::invalid_argument("initialization is not balanced: |a| != |w|");
    }
  }
}

std::size_t NeuronFlowConfig::step_budget() const {
  const auto by_time = static_cast<std::size_t>(std::ceil(max_time / step - 1e-9));
  return max_steps ? std::min(by_time, *max_steps) : by_time;
}

FlowTrace flow_integrate(const NeuronFlowConfig& config) {
  if (!config.n_samples) return integrate(config, nullptr);
  const TeacherData data = sample_teacher_data(*config.n_samples, config.d,
                                               config.teacher, config.data_seed);
  return integrate(config, &data);
}

FlowTrace flow_integrate(const NeuronFlowConfig& config, const TeacherData& data) {
  if (data.d() != config.d) throw ShapeError("data dimension != config.d");
  return integrate(config, &data);
}

bool meets_success(const NeuronState& state, double loss, const Teacher& teacher,
                   const SuccessCriterion& criterion) {
  if (!(loss < criterion.max_loss) || !(state.a > 0.0)) return false;
  const double target = teacher.a * teacher.w[0];
  const double ratio = state.a * state.w[0] / target;
  return std::abs(ratio - 1.0) < criterion.product_tol;
}

Outcome classify_outcome(const FlowTrace& trace, const Teacher& teacher,
                         const SuccessCriterion& criterion) {
  const NeuronState& s = trace.final_state;
  std::vector<double> x(1, s.a);
  x.insert(x.end(), s.w.begin(), s.w.end());
  const double norm = norm2(x);
  if (trace.diverged || !std::isfinite(norm) || norm > kDivergenceNorm) {
    return Outcome::diverged;
  }
  if (meets_success(s, trace.final_loss, teacher, criterion)) return Outcome::success;
  if (norm < criterion.collapse_norm) return Outcome::origin_collapse;
  if (!s.w.empty() && s.w[0] <= 0.0) return Outcome::dead_boundary;
  return Outcome::timeout;
}

std::string_view to_string(Quadrant q) {
  switch (q) {
    case Quadrant::pos_pos: return "a+w+";
    case Quadrant::neg_pos: return "a-w+";
    case Quadrant::pos_neg: return "a+w-";
    case Quadrant::neg_neg: return "a-w-";
  }
  return "a+w+";
}

NeuronState balanced_init(std::size_t d, Quadrant quadrant, std::uint64_t seed,
                          double std) {
  if (!(std > 0.0)) throw std::invalid_argument("init std must be positive");
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, std);
  NeuronState s;
  s.w.resize(d);
  for (double& v : s.w) v = normal(rng);
  const bool a_pos = quadrant == Quadrant::pos_pos || quadrant == Quadrant::pos_neg;
  const bool w_pos = quadrant == Quadrant::pos_pos || quadrant == Quadrant::neg_pos;
  s.w[0] = w_pos ? std::abs(s.w[0]) : -std::abs(s.w[0]);
  s.a = (a_pos ? 1.0 : -1.0) * norm2(s.w);
  return s;
}

std::string_view to_string(SweepMethod method) {
  switch (method) {
    case SweepMethod::sparse: return "sparse";
    case SweepMethod::overparam: return "overparam";
    case SweepMethod::sign_in: return "sign-in";
    case SweepMethod::overparam_sign_in: return "overparam+sign-in";
  }
  return "sparse";
}

SweepMethod parse_sweep_method(std::string_view name) {
  for (SweepMethod m : kSweepMethods) {
    if (to_string(m) == name) return m;
  }
  throw std::invalid_argument("unknown sweep method: " + std::string(name));
}

QuadrantResult quadrant_sweep(SweepMethod method, const QuadrantSweepConfig& config,
                              Execution exec) {
  if (config.runs == 0) throw std::invalid_argument("runs must be >= 1");
  const bool overparam =
      method == SweepMethod::overparam || method == SweepMethod::overparam_sign_in;
  const std::size_t d = overparam ? config.d_overparam : 1;
  if (overparam && d < 2) {
    throw std::invalid_argument("overparameterized methods need d > 1");
  }
  const FlowMethod flow = (method == SweepMethod::sign_in ||
                           method == SweepMethod::overparam_sign_in)
                              ? FlowMethod::sign_in
                              : FlowMethod::standard;

  QuadrantResult result;
  result.method = method;
  result.runs.resize(4 * config.runs);
  for_each_run(result.runs.size(), exec, [&](std::size_t index) {
    const auto quadrant = kQuadrants[index / config.runs];
    const std::uint64_t run_seed = seed_spawn(config.seed, index);

    NeuronFlowConfig fc;
    fc.d = d;
    fc.teacher = Teacher::canonical(d);
    fc.n_samples = config.n_samples;
    fc.beta1 = config.beta1;
    fc.beta2 = config.beta2;
    fc.init = balanced_init(d, quadrant, seed_spawn(run_seed, 1), config.init_std);
    fc.step = config.lr;
    fc.max_time = config.lr * static_cast<double>(config.steps);
    fc.max_steps = config.steps;
    fc.method = flow;
    fc.integrator = Integrator::euler;
    fc.data_seed = seed_spawn(run_seed, 0);
    const FlowTrace trace = flow_integrate(fc);

    NeuronRunRecord& rec = result.runs[index];
    rec.run_id = index;
    rec.seed = run_seed;
    rec.method = std::string(to_string(method));
    rec.quadrant = std::string(to_string(quadrant));
    rec.outcome = trace.outcome;
    rec.a_final = trace.final_state.a;
    rec.w1_final = trace.final_state.w[0];
    rec.loss_final = trace.final_loss;
    rec.steps = trace.steps;
  });

  for (std::size_t q = 0; q < 4; ++q) {
    std::size_t wins = 0;
    for (std::size_t r = 0; r < config.runs; ++r) {
      wins += result.runs[q * config.runs + r].outcome == Outcome::success;
    }
    result.success_fraction[q] =
        static_cast<double>(wins) / static_cast<double>(config.runs);
  }
  return result;
}

RecoveryResult multi_input_recovery(FlowMethod method, const MultiInputConfig& config,
                                    Execution exec) {
  if (config.runs == 0) throw std::invalid_argument("runs must be >= 1");
  if (config.d < 2) throw std::invalid_argument("multi-input recovery needs d > 1");
  RecoveryResult result;
  result.method = method;
  result.lr = config.lr;
  result.runs.resize(config.runs);
  for_each_run(config.runs, exec, [&](std::size_t index) {
    const std::uint64_t run_seed = seed_spawn(config.seed, index);
    NeuronFlowConfig fc;
    fc.d = config.d;
    fc.teacher = Teacher::canonical(config.d);
    fc.n_samples = config.n_samples;
    fc.beta1 = config.beta;
    fc.beta2 = config.beta;
    fc.init = balanced_init(config.d, Quadrant::neg_pos, seed_spawn(run_seed, 1),
                            config.init_std);
    fc.step = config.lr;
    fc.max_time = config.time;
    fc.max_steps = config.max_steps;
    fc.method = method;
    fc.integrator = Integrator::euler;
    fc.data_seed = seed_spawn(run_seed, 0);
    const FlowTrace trace = flow_integrate(fc);

    NeuronRunRecord& rec = result.runs[index];
    rec.run_id = index;
    rec.seed = run_seed;
    rec.method = std::string(to_string(method));
    rec.quadrant = std::string(to_string(Quadrant::neg_pos));
    rec.outcome = trace.outcome;
    rec.a_final = trace.final_state.a;
    rec.w1_final = trace.final_state.w[0];
    rec.loss_final = trace.final_loss;
    rec.steps = trace.steps;
  });
  std::size_t wins = 0;
  for (const auto& rec : result.runs) {
    wins += rec.outcome == Outcome::success && rec.a_final > 0.0;
  }
  result.recovered_fraction =
      static_cast<double>(wins) / static_cast<double>(config.runs);
  return result;
}

std::array<double, 2> stable_manifold_direction(double beta1, double beta2) {
  if (!(beta1 > 0.0) || !(beta2 > 0.0)) {
    throw std::invalid_argument("betas must be positive");
  }
  const double x = -std::sqrt(beta1 / beta2);
  const double len = std::hypot(x, 1.0);
  return {x / len, 1.0 / len};
}

}  // namespace signlab
