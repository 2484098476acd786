#include "signlab/multineuron.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "signlab/reparam.hpp"
#include "signlab/seed.hpp"

namespace signlab {

namespace {

double forward_one(const TwoLayerNet& net, const double* z) {
  double out = 0.0;
  const std::size_t d = net.d();
  for (std::size_t i = 0; i < net.k(); ++i) {
    double pre = 0.0;
    for (std::size_t j = 0; j < d; ++j) pre += net.w(i, j) * z[j];
    if (pre > 0.0) out += net.a[i] * pre;
  }
  return out;
}

// Returns the loss; accumulates gradients into ga (k) and gw (k x d).
double loss_grad(const TwoLayerNet& net, const Tensor& z,
                 const std::vector<double>& y, std::vector<double>& ga,
                 Tensor& gw) {
  const std::size_t n = z.rows();
  const std::size_t k = net.k();
  const std::size_t d = net.d();
  std::fill(ga.begin(), ga.end(), 0.0);
  gw.fill(0.0);
  std::vector<double> pre(k);
  double loss = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    const double* zs = &z.data()[s * d];
    double out = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      double p = 0.0;
      for (std::size_t j = 0; j < d; ++j) p += net.w(i, j) * zs[j];
      pre[i] = p;
      if (p > 0.0) out += net.a[i] * p;
    }
    const double r = out - y[s];
    loss += r * r;
    for (std::size_t i = 0; i < k; ++i) {
      if (!(pre[i] > 0.0)) continue;
      ga[i] += r * pre[i];
      const double ra = r * net.a[i];
      for (std::size_t j = 0; j < d; ++j) gw(i, j) += ra * zs[j];
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  for (double& g : ga) g *= inv_n;
  for (double& g : gw.values()) g *= inv_n;
  return 0.5 * inv_n * loss;
}

}  // namespace

TwoLayerNet cob_init(std::size_t k, std::size_t d, std::uint64_t seed) {
  if (k == 0 || k % 2 != 0) throw std::invalid_argument("COB init needs an even k");
  if (d == 0) throw std::invalid_argument("d must be positive");
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(d)));
  TwoLayerNet net{std::vector<double>(k), Tensor({k, d})};
  for (std::size_t i = 0; i < k / 2; ++i) {
    net.a[i] = normal(rng);
    net.a[i + k / 2] = -net.a[i];
  }
  for (double& v : net.w.values()) v = normal(rng);
  return net;
}

TwoLayerNet sample_multi_teacher(std::size_t k, std::size_t d, std::uint64_t seed) {
  if (k == 0 || d == 0) throw std::invalid_argument("k and d must be positive");
  Rng rng = make_rng(seed);
  std::bernoulli_distribution coin(0.5);
  std::normal_distribution<double> normal(0.0, 1.0);
  TwoLayerNet net{std::vector<double>(k), Tensor({k, d})};
  bool mixed = false;
  while (!mixed) {
    for (double& a : net.a) a = coin(rng) ? 1.0 : -1.0;
    mixed = k == 1;
    for (std::size_t i = 1; i < k; ++i) mixed = mixed || net.a[i] != net.a[0];
  }
  for (std::size_t i = 0; i < k; ++i) {
    double norm = 0.0;
    while (norm == 0.0) {
      norm = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        net.w(i, j) = normal(rng);
        norm += net.w(i, j) * net.w(i, j);
      }
    }
    norm = std::sqrt(norm);
    for (std::size_t j = 0; j < d; ++j) net.w(i, j) /= norm;
  }
  return net;
}

std::string_view to_string(SignMode mode) {
  switch (mode) {
    case SignMode::good: return "good";
    case SignMode::bad: return "bad";
    case SignMode::cob: return "cob";
  }
  return "good";
}

SignMode parse_sign_mode(std::string_view name) {
  if (name == "good") return SignMode::good;
  if (name == "bad") return SignMode::bad;
  if (name == "cob") return SignMode::cob;
  throw std::invalid_argument("unknown sign mode: " + std::string(name));
}

std::string_view to_string(InputDistribution inputs) {
  return inputs == InputDistribution::sphere ? "sphere" : "gaussian";
}

InputDistribution parse_input_distribution(std::string_view name) {
  if (name == "sphere") return InputDistribution::sphere;
  if (name == "gaussian") return InputDistribution::gaussian;
  throw std::invalid_argument("unknown input distribution: " + std::string(name));
}

void MultiNeuronConfig::validate() const {
  if (k_student == 0 || k_teacher == 0 || d == 0 || n_samples == 0) {
    throw std::invalid_argument("k, d and n_samples must be positive");
  }
  if (sign_mode != SignMode::cob && k_student != k_teacher) {
    throw std::invalid_argument("good/bad sign modes need k_student == k_teacher");
  }
  if (sign_mode == SignMode::cob && k_student % 2 != 0) {
    throw std::invalid_argument("COB init needs an even k_student");
  }
  if (!(lr > 0.0)) throw std::invalid_argument("lr must be positive");
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
  if (beta_inner && !(*beta_inner > 0.0)) {
    throw std::invalid_argument("beta_inner must be positive");
  }
  if (!(init_std > 0.0)) throw std::invalid_argument("init_std must be positive");
}

double two_layer_loss(const TwoLayerNet& net, const Tensor& z,
                      const std::vector<double>& y) {
  double loss = 0.0;
  for (std::size_t s = 0; s < z.rows(); ++s) {
    const double r = forward_one(net, &z.data()[s * z.cols()]) - y[s];
    loss += r * r;
  }
  return 0.5 * loss / static_cast<double>(z.rows());
}

Tensor neuron_representation(const TwoLayerNet& net) {
  Tensor rep({net.k(), net.d()});
  for (std::size_t i = 0; i < net.k(); ++i) {
    for (std::size_t j = 0; j < net.d(); ++j) rep(i, j) = std::abs(net.a[i]) * net.w(i, j);
  }
  return rep;
}

MultiNeuronResult multineuron_train(const MultiNeuronConfig& config) {
  config.validate();
  MultiNeuronResult result;
  result.teacher = sample_multi_teacher(config.k_teacher, config.d,
                                        seed_spawn(config.seed, 0));

  Rng data_rng = make_rng(seed_spawn(config.seed, 1));
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor z({config.n_samples, config.d});
  for (double& v : z.values()) v = normal(data_rng);
  if (config.inputs == InputDistribution::sphere) {
    for (std::size_t s = 0; s < config.n_samples; ++s) {
      double norm = 0.0;
      for (std::size_t j = 0; j < config.d; ++j) norm += z(s, j) * z(s, j);
      norm = std::sqrt(norm);
      for (std::size_t j = 0; j < config.d; ++j) z(s, j) /= norm;
    }
  }
  std::vector<double> y(config.n_samples);
  for (std::size_t s = 0; s < config.n_samples; ++s) {
    y[s] = forward_one(result.teacher, &z.data()[s * config.d]);
  }

  const std::uint64_t init_seed = seed_spawn(config.seed, 2);
  TwoLayerNet student;
  if (config.sign_mode == SignMode::cob) {
    student = cob_init(config.k_student, config.d, init_seed);
  } else {
    Rng rng = make_rng(init_seed);
    std::normal_distribution<double> init(0.0, config.init_std);
    student = {std::vector<double>(config.k_student), Tensor({config.k_student, config.d})};
    for (std::size_t i = 0; i < config.k_student; ++i) {
      double norm = 0.0;
      for (std::size_t j = 0; j < config.d; ++j) {
        const double wmag = std::abs(init(rng));
        student.w(i, j) = result.teacher.w(i, j) >= 0.0 ? wmag : -wmag;
        norm += wmag * wmag;
      }
      const bool positive = config.sign_mode == SignMode::bad || result.teacher.a[i] > 0.0;
      student.a[i] = positive ? std::sqrt(norm) : -std::sqrt(norm);
    }
  }
  result.initial = student;

  std::vector<double> ga(student.k());
  Tensor gw(student.w.shape());
  const std::size_t na = student.k();
  const bool factors = config.method == FlowMethod::sign_in && config.sign_in_factors;
  // Factor pairs for [a; vec(W)] when training through m * w.
  std::vector<FactorPair> pairs;
  if (factors) {
    for (double a : student.a) pairs.push_back(split_scalar(a, config.beta));
    for (double w : student.w.values()) {
      pairs.push_back(split_scalar(w, config.beta_inner.value_or(config.beta)));
    }
  }
  const double beta_w = config.beta_inner.value_or(config.beta);
  auto update = [&](double& theta, double g, std::size_t slot) {
    const double beta = slot < na ? config.beta : beta_w;
    if (factors) {
      FactorPair& f = pairs[slot];
      const double m = f.m;
      f.m -= config.lr * f.w * g;
      f.w -= config.lr * m * g;
      theta = f.m * f.w;
    } else if (config.method == FlowMethod::sign_in) {
      theta -= config.lr * std::sqrt(theta * theta + beta) * g;
    } else {
      theta -= config.lr * g;
    }
  };
  result.loss_curve.reserve(config.epochs + 1);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double loss = loss_grad(student, z, y, ga, gw);
    result.loss_curve.push_back(loss);
    if (!std::isfinite(loss)) break;
    for (std::size_t i = 0; i < na; ++i) update(student.a[i], ga[i], i);
    for (std::size_t idx = 0; idx < student.w.size(); ++idx) {
      update(student.w[idx], gw[idx], na + idx);
    }
  }
  result.final_loss = two_layer_loss(student, z, y);
  result.loss_curve.push_back(result.final_loss);
  result.student = std::move(student);
  result.representation = neuron_representation(result.student);
  return result;
}

}  // namespace signlab
