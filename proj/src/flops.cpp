#include "signlab/flops.hpp"

#include <stdexcept>
#include <string>

namespace signlab {

std::string_view to_string(FlopMode mode) {
  switch (mode) {
    case FlopMode::plain: return "plain";
    case FlopMode::sign_in_training: return "sign-in-training";
    case FlopMode::inference: return "inference";
  }
  return "plain";
}

FlopMode parse_flop_mode(std::string_view name) {
  if (name == "plain") return FlopMode::plain;
  if (name == "sign-in-training") return FlopMode::sign_in_training;
  if (name == "inference") return FlopMode::inference;
  throw std::invalid_argument("unknown FLOP mode: " + std::string(name));
}

std::uint64_t flop_count(const LayerShape& layer, FlopMode mode) {
  const bool extra = mode == FlopMode::sign_in_training;
  if (const auto* c = std::get_if<ConvShape>(&layer)) {
    if (!c->h_out || !c->w_out || !c->c_out || !c->k || !c->c_in) {
      throw std::invalid_argument("conv dimensions must be positive");
    }
    const std::uint64_t weights = c->c_out * c->c_in * c->k * c->k;
    return 2 * c->h_out * c->w_out * weights + weights + (extra ? weights : 0);
  }
  const auto& l = std::get<LinearShape>(layer);
  if (!l.m || !l.n) throw std::invalid_argument("linear dimensions must be positive");
  return 2 * l.m * l.n + (extra ? l.m * l.n : 0);
}

std::uint64_t flop_count(const std::vector<LayerShape>& layers, FlopMode mode) {
  std::uint64_t total = 0;
  for (const auto& l : layers) total += flop_count(l, mode);
  return total;
}

}  // namespace signlab
