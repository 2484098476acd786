#include "signlab/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace signlab {

namespace {

void check_layer(const DenseLayer& layer, std::size_t index) {
  if (layer.weight.rank() != 2) {
    throw ShapeError("layer " + std::to_string(index) + " weight is not a matrix");
  }
  if (layer.bias && layer.bias->shape() !=
                        std::vector<std::size_t>{1, layer.weight.rows()}) {
    throw ShapeError("layer " + std::to_string(index) + " bias shape " +
                     shape_string(layer.bias->shape()) + " != [1," +
                     std::to_string(layer.weight.rows()) + "]");
  }
}

// out[n, o] = in[n, i] * W[o, i]^T + b[o]
Tensor affine(const Tensor& in, const DenseLayer& layer) {
  const std::size_t n = in.rows();
  const std::size_t fan_in = layer.weight.cols();
  const std::size_t fan_out = layer.weight.rows();
  Tensor out({n, fan_out});
  const double* w = layer.weight.data().data();
  for (std::size_t r = 0; r < n; ++r) {
    const double* x = &in.data()[r * fan_in];
    double* y = &out.data()[r * fan_out];
    for (std::size_t o = 0; o < fan_out; ++o) {
      const double* wo = w + o * fan_in;
      double acc = layer.bias ? (*layer.bias)[o] : 0.0;
      for (std::size_t i = 0; i < fan_in; ++i) acc += x[i] * wo[i];
      y[o] = acc;
    }
  }
  return out;
}

void relu_inplace(Tensor& t) {
  for (double& v : t.values()) v = v > 0.0 ? v : 0.0;
}

}  // namespace

std::size_t SmallNet::input_dim() const {
  if (layers.empty()) throw ShapeError("network has no layers");
  return layers.front().weight.cols();
}

std::size_t SmallNet::output_dim() const {
  if (layers.empty()) throw ShapeError("network has no layers");
  return layers.back().weight.rows();
}

std::size_t SmallNet::param_count() const {
  std::size_t count = 0;
  for (const auto& layer : layers) {
    count += layer.weight.size();
    if (layer.bias) count += layer.bias->size();
  }
  return count;
}

void SmallNet::validate() const {
  if (layers.empty()) throw ShapeError("network has no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    check_layer(layers[l], l);
    if (l > 0 && layers[l].weight.cols() != layers[l - 1].weight.rows()) {
      throw ShapeError("layer " + std::to_string(l) + " expects " +
                       std::to_string(layers[l].weight.cols()) +
                       " inputs but previous layer yields " +
                       std::to_string(layers[l - 1].weight.rows()));
    }
  }
}

GradStore GradStore::zeros_like(const SmallNet& net) {
  GradStore g;
  for (const auto& layer : net.layers) {
    g.weight.emplace_back(layer.weight.shape());
    if (layer.bias) {
      g.bias.emplace_back(Tensor(layer.bias->shape()));
    } else {
      g.bias.emplace_back(std::nullopt);
    }
  }
  return g;
}

namespace {

Tensor forward(const SmallNet& net, const Tensor& batch, ForwardCache* cache,
               const ActivationPattern* gates) {
  net.validate();
  if (batch.rank() != 2 || batch.cols() != net.input_dim()) {
    throw ShapeError("batch shape " + shape_string(batch.shape()) +
                     " does not match input dimension " +
                     std::to_string(net.input_dim()));
  }
  if (cache) {
    cache->inputs.clear();
    cache->preacts.clear();
  }
  Tensor current = batch;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    Tensor pre = affine(current, net.layers[l]);
    if (cache) {
      cache->inputs.push_back(std::move(current));
      cache->preacts.push_back(pre);
    }
    if (l + 1 < net.layers.size()) {
      if (gates) {
        const auto& g = (*gates)[l];
        for (std::size_t i = 0; i < pre.size(); ++i) {
          if (!g[i]) pre[i] = 0.0;
        }
      } else {
        relu_inplace(pre);
      }
    }
    current = std::move(pre);
  }
  return current;
}

void check_gates(const SmallNet& net, const Tensor& batch, const ActivationPattern& gates) {
  if (gates.size() + 1 != net.layers.size()) throw ShapeError("gate pattern does not match depth");
  for (std::size_t l = 0; l < gates.size(); ++l) {
    if (gates[l].size() != batch.rows() * net.layers[l].weight.rows()) {
      throw ShapeError("gate pattern does not match layer " + std::to_string(l));
    }
  }
}

}  // namespace

Tensor mlp_forward(const SmallNet& net, const Tensor& batch,
                   ForwardCache* cache) {
  return forward(net, batch, cache, nullptr);
}

ActivationPattern activation_pattern(const SmallNet& net, const Tensor& batch) {
  ForwardCache cache;
  forward(net, batch, &cache, nullptr);
  ActivationPattern gates;
  for (std::size_t l = 0; l + 1 < net.layers.size(); ++l) {
    std::vector<std::uint8_t> g(cache.preacts[l].size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = cache.preacts[l][i] > 0.0;
    gates.push_back(std::move(g));
  }
  return gates;
}

LossEval evaluate_loss(LossKind kind, const Tensor& outputs,
                       const Tensor& targets) {
  const std::size_t n = outputs.rows();
  const std::size_t k = outputs.cols();
  LossEval eval{0.0, Tensor(outputs.shape())};
  const double inv_n = 1.0 / static_cast<double>(n);
  if (kind == LossKind::mse) {
    if (!outputs.same_shape(targets)) {
      throw ShapeError("MSE targets " + shape_string(targets.shape()) +
                       " vs outputs " + shape_string(outputs.shape()));
    }
    for (std::size_t i = 0; i < outputs.size(); ++i) {
      const double r = outputs[i] - targets[i];
      eval.value += r * r;
      eval.output_grad[i] = r * inv_n;
    }
    eval.value *= 0.5 * inv_n;
    return eval;
  }
  if (targets.rank() != 2 || targets.rows() != n || targets.cols() != 1) {
    throw ShapeError("cross-entropy targets must be [n,1] class ids");
  }
  for (std::size_t r = 0; r < n; ++r) {
    const auto label = static_cast<std::size_t>(targets(r, 0));
    if (label >= k) throw std::out_of_range("class id out of range");
    double peak = outputs(r, 0);
    for (std::size_t c = 1; c < k; ++c) peak = std::max(peak, outputs(r, c));
    double norm = 0.0;
    for (std::size_t c = 0; c < k; ++c) norm += std::exp(outputs(r, c) - peak);
    const double log_norm = std::log(norm) + peak;
    eval.value += log_norm - outputs(r, label);
    for (std::size_t c = 0; c < k; ++c) {
      const double p = std::exp(outputs(r, c) - log_norm);
      eval.output_grad(r, c) = (p - (c == label ? 1.0 : 0.0)) * inv_n;
    }
  }
  eval.value *= inv_n;
  return eval;
}

namespace {

GradStore backward(const SmallNet& net, const ForwardCache& cache,
                   const Tensor& loss_grad, const ActivationPattern* gates) {
  const std::size_t depth = net.layers.size();
  if (cache.inputs.size() != depth || cache.preacts.size() != depth) {
    throw ShapeError("forward cache does not match network depth");
  }
  for (std::size_t l = 0; l < depth; ++l) {
    const Tensor& in = cache.inputs[l];
    const Tensor& pre = cache.preacts[l];
    const auto& w = net.layers[l].weight;
    if (in.cols() != w.cols() || pre.cols() != w.rows() ||
        in.rows() != pre.rows()) {
      throw ShapeError("stale forward cache at layer " + std::to_string(l));
    }
  }
  if (!loss_grad.same_shape(cache.preacts.back())) {
    throw ShapeError("loss gradient shape does not match outputs");
  }

  GradStore grads = GradStore::zeros_like(net);
  Tensor delta = loss_grad;
  for (std::size_t l = depth; l-- > 0;) {
    const DenseLayer& layer = net.layers[l];
    const Tensor& in = cache.inputs[l];
    const std::size_t n = in.rows();
    const std::size_t fan_in = layer.weight.cols();
    const std::size_t fan_out = layer.weight.rows();

    Tensor& gw = grads.weight[l];
    for (std::size_t r = 0; r < n; ++r) {
      const double* x = &in.data()[r * fan_in];
      const double* d = &delta.data()[r * fan_out];
      for (std::size_t o = 0; o < fan_out; ++o) {
        if (d[o] == 0.0) continue;
        double* g = &gw.data()[o * fan_in];
        for (std::size_t i = 0; i < fan_in; ++i) g[i] += d[o] * x[i];
      }
    }
    if (grads.bias[l]) {
      Tensor& gb = *grads.bias[l];
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t o = 0; o < fan_out; ++o) gb[o] += delta(r, o);
      }
    }
    if (l == 0) break;

    // Propagate through W and the ReLU of the previous layer. sigma'(0) = 0.
    const Tensor& prev_pre = cache.preacts[l - 1];
    Tensor next({n, fan_in});
    for (std::size_t r = 0; r < n; ++r) {
      const double* d = &delta.data()[r * fan_out];
      double* out = &next.data()[r * fan_in];
      for (std::size_t o = 0; o < fan_out; ++o) {
        if (d[o] == 0.0) continue;
        const double* wo = &layer.weight.data()[o * fan_in];
        for (std::size_t i = 0; i < fan_in; ++i) out[i] += d[o] * wo[i];
      }
      for (std::size_t i = 0; i < fan_in; ++i) {
        const bool on = gates ? (*gates)[l - 1][r * fan_in + i] != 0 : prev_pre(r, i) > 0.0;
        if (!on) out[i] = 0.0;
      }
    }
    delta = std::move(next);
  }
  return grads;
}

}  // namespace

GradStore mlp_backward(const SmallNet& net, const ForwardCache& cache,
                       const Tensor& loss_grad) {
  return backward(net, cache, loss_grad, nullptr);
}

GradStore loss_gradient_gated(const SmallNet& net, const Tensor& batch,
                              const Tensor& targets, const ActivationPattern& gates) {
  net.validate();
  check_gates(net, batch, gates);
  ForwardCache cache;
  Tensor out = forward(net, batch, &cache, &gates);
  LossEval eval = evaluate_loss(net.loss, out, targets);
  return backward(net, cache, eval.output_grad, &gates);
}

GradStore loss_gradient(const SmallNet& net, const Tensor& batch,
                        const Tensor& targets, double* loss) {
  ForwardCache cache;
  Tensor out = mlp_forward(net, batch, &cache);
  LossEval eval = evaluate_loss(net.loss, out, targets);
  if (loss) *loss = eval.value;
  return mlp_backward(net, cache, eval.output_grad);
}

double loss_value(const SmallNet& net, const Tensor& batch,
                  const Tensor& targets) {
  return evaluate_loss(net.loss, mlp_forward(net, batch), targets).value;
}

void sgd_step(std::span<double> params, std::span<const double> grads,
              double lr, double weight_decay) {
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (weight_decay < 0.0) {
    throw std::invalid_argument("weight decay must be nonnegative");
  }
  if (params.size() != grads.size()) {
    throw ShapeError("parameter and gradient sizes differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i] -= lr * (grads[i] + weight_decay * params[i]);
  }
}

void sgd_step(SmallNet& net, const GradStore& grads, double lr,
              double weight_decay) {
  if (grads.weight.size() != net.layers.size()) {
    throw ShapeError("gradient store does not match network");
  }
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    auto& layer = net.layers[l];
    if (!layer.weight.same_shape(grads.weight[l])) {
      throw ShapeError("gradient shape mismatch at layer " + std::to_string(l));
    }
    sgd_step(layer.weight.values(), grads.weight[l].values(), lr, weight_decay);
    if (layer.bias) {
      if (!grads.bias[l]) throw ShapeError("missing bias gradient");
      sgd_step(layer.bias->values(), grads.bias[l]->values(), lr, weight_decay);
    }
  }
}

std::vector<double> flatten_params(const SmallNet& net) {
  std::vector<double> flat;
  flat.reserve(net.param_count());
  for (const auto& layer : net.layers) {
    flat.insert(flat.end(), layer.weight.data().begin(), layer.weight.data().end());
    if (layer.bias) {
      flat.insert(flat.end(), layer.bias->data().begin(), layer.bias->data().end());
    }
  }
  return flat;
}

void assign_params(SmallNet& net, std::span<const double> flat) {
  if (flat.size() != net.param_count()) {
    throw ShapeError("flat parameter vector has " + std::to_string(flat.size()) +
                     " entries, network has " +
                     std::to_string(net.param_count()));
  }
  std::size_t pos = 0;
  for (auto& layer : net.layers) {
    std::copy_n(flat.begin() + pos, layer.weight.size(), layer.weight.data().begin());
    pos += layer.weight.size();
    if (layer.bias) {
      std::copy_n(flat.begin() + pos, layer.bias->size(), layer.bias->data().begin());
      pos += layer.bias->size();
    }
  }
}

std::vector<double> flatten_grads(const GradStore& grads) {
  std::vector<double> flat;
  for (std::size_t l = 0; l < grads.weight.size(); ++l) {
    flat.insert(flat.end(), grads.weight[l].data().begin(), grads.weight[l].data().end());
    if (grads.bias[l]) {
      flat.insert(flat.end(), grads.bias[l]->data().begin(), grads.bias[l]->data().end());
    }
  }
  return flat;
}

std::vector<double> hvp_fd(const GradientFn& gradient,
                           std::span<const double> theta,
                           std::span<const double> direction, double eps) {
  if (direction.size() != theta.size()) {
    throw ShapeError("direction length " + std::to_string(direction.size()) +
                     " != parameter count " + std::to_string(theta.size()));
  }
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
  const bool degenerate = std::all_of(direction.begin(), direction.end(),
                                      [](double v) { return v == 0.0; });
  if (degenerate) throw std::invalid_argument("zero direction");

  std::vector<double> plus(theta.begin(), theta.end());
  std::vector<double> minus(theta.begin(), theta.end());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    plus[i] += eps * direction[i];
    minus[i] -= eps * direction[i];
  }
  std::vector<double> g_plus = gradient(plus);
  const std::vector<double> g_minus = gradient(minus);
  for (std::size_t i = 0; i < g_plus.size(); ++i) {
    g_plus[i] = (g_plus[i] - g_minus[i]) / (2.0 * eps);
  }
  return g_plus;
}

std::vector<double> hvp_fd(const SmallNet& net, const Tensor& batch,
                           const Tensor& targets,
                           std::span<const double> direction, double eps) {
  SmallNet probe = net;
  const ActivationPattern gates = activation_pattern(net, batch);
  auto gradient = [&](std::span<const double> theta) {
    assign_params(probe, theta);
    return flatten_grads(loss_gradient_gated(probe, batch, targets, gates));
  };
  const std::vector<double> theta = flatten_params(net);
  return hvp_fd(gradient, theta, direction, eps);
}

}  // namespace signlab
