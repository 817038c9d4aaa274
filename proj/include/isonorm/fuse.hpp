#pragma once

#include <cstdint>
#include <vector>

#include "isonorm/matrix.hpp"
#include "isonorm/normalize.hpp"

namespace isonorm::fuse {

// Final linear layer x′ = W′u + b′ emitting normalized-space outputs.
struct LinearLayer {
  Matrix weight;  // C×D
  Vector bias;    // C
};

// Same layer with the normalizer's inverse folded in: x = ΘW′u + (Θb′ + μ).
struct FusedLinear {
  Matrix weight;
  Vector bias;
  normalize::Method method;
};

FusedLinear fuse(const LinearLayer& layer, const normalize::Normalizer& nrm);

std::vector<std::uint8_t> serialize(const LinearLayer& layer);
std::vector<std::uint8_t> serialize(const FusedLinear& fused);
LinearLayer deserialize_layer(const std::vector<std::uint8_t>& bytes);
FusedLinear deserialize_fused(const std::vector<std::uint8_t>& bytes);

// Monte-Carlo two-path check: ‖fused(u) − invert(layer(u))‖∞ relative to the
// reference magnitude, maximized over random probes.
double verify_fusion(const LinearLayer& layer, const normalize::Normalizer& nrm,
                     const FusedLinear& fused, std::size_t probe_count,
                     std::uint64_t seed = 0);

}  // namespace isonorm::fuse
