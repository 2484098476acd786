#pragma once

#include <cstdint>
#include <string_view>
#include <variant>
#include <vector>

namespace signlab {

struct ConvShape {
  std::uint64_t h_out = 1;
  std::uint64_t w_out = 1;
  std::uint64_t c_out = 1;
  std::uint64_t k = 1;
  std::uint64_t c_in = 1;
};

struct LinearShape {
  std::uint64_t m = 1;
  std::uint64_t n = 1;
};

using LayerShape = std::variant<ConvShape, LinearShape>;

// Inference always uses merged weights, so it costs the same as plain.
enum class FlopMode { plain, sign_in_training, inference };
std::string_view to_string(FlopMode mode);
FlopMode parse_flop_mode(std::string_view name);

// conv: 2 H W Cout K^2 Cin + Cout Cin K^2, plus Cout Cin K^2 for the m * w
// product in sign-in training. linear: 2 m n, plus m n.
std::uint64_t flop_count(const LayerShape& layer, FlopMode mode);
std::uint64_t flop_count(const std::vector<LayerShape>& layers, FlopMode mode);

}  // namespace signlab
