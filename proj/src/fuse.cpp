#include "isonorm/fuse.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "isonorm/errors.hpp"
#include "isonorm/kernels.hpp"
#include "isonorm/rng.hpp"
#include "isonorm/tensor_io.hpp"

namespace isonorm::fuse {

using normalize::Normalizer;
using normalize::TransformKind;

FusedLinear fuse(const LinearLayer& layer, const Normalizer& nrm) {
  const std::size_t c = nrm.channels;
  if (layer.weight.rows != c || layer.bias.size() != c)
    throw ShapeError("fuse: layer output dimension " + std::to_string(layer.weight.rows) +
                     " does not match normalizer channels " + std::to_string(c));
  if (!all_finite(layer.weight)) throw NonFiniteInput("fuse: layer weight has non-finite entries");
  switch (nrm.kind) {
    case TransformKind::Diagonal:
      if (nrm.inverse_diag.size() != c)
        throw IncompleteNormalizer("fuse: normalizer lacks its per-channel scales");
      break;
    case TransformKind::Dense:
      if (nrm.inverse_mat.rows != c || nrm.inverse_mat.cols != c)
        throw IncompleteNormalizer("fuse: normalizer lacks its inverse matrix");
      break;
    case TransformKind::Scalar:
      break;
  }

  FusedLinear out;
  out.method = nrm.method;
  switch (nrm.kind) {
    case TransformKind::Scalar: {
      out.weight = layer.weight;
      for (double& v : out.weight.data) v *= nrm.inverse_scale;
      out.bias.resize(c);
      for (std::size_t i = 0; i < c; ++i)
        out.bias[i] = nrm.inverse_scale * layer.bias[i] + nrm.offset[i];
      break;
    }
    case TransformKind::Diagonal: {
      out.weight = layer.weight;
      for (std::size_t i = 0; i < c; ++i) {
        double* row = out.weight[i];
        for (std::size_t j = 0; j < out.weight.cols; ++j) row[j] *= nrm.inverse_diag[i];
      }
      out.bias.resize(c);
      for (std::size_t i = 0; i < c; ++i)
        out.bias[i] = nrm.inverse_diag[i] * layer.bias[i] + nrm.offset[i];
      break;
    }
    case TransformKind::Dense: {
      out.weight = kernels::matmul(nrm.inverse_mat, layer.weight);
      out.bias.resize(c);
      for (std::size_t i = 0; i < c; ++i) {
        const double* ti = nrm.inverse_mat[i];
        double acc = 0.0;
        for (std::size_t k = 0; k < c; ++k) acc += ti[k] * layer.bias[k];
        out.bias[i] = acc + nrm.offset[i];
      }
      break;
    }
  }
  return out;
}

namespace {

void check_layer(const Matrix& weight, const Vector& bias, const char* who) {
  if (weight.empty() || bias.size() != weight.rows)
    throw ShapeError(std::string(who) + ": bias length must match weight rows");
}

std::vector<std::uint8_t> encode_layer(const char* kind, const Matrix& weight,
                                       const Vector& bias,
                                       const normalize::Method* method) {
  check_layer(weight, bias, kind);
  nlohmann::json manifest;
  manifest["out_dim"] = weight.rows;
  manifest["in_dim"] = weight.cols;
  if (method) manifest["method"] = normalize::method_name(*method);
  std::vector<io::Section> sections;
  sections.push_back({"weight", io::encode_tensor(weight)});
  sections.push_back({"bias", io::encode_tensor(bias)});
  return io::encode_container(kind, std::move(manifest), sections);
}

}  // namespace

std::vector<std::uint8_t> serialize(const LinearLayer& layer) {
  return encode_layer("linear_layer", layer.weight, layer.bias, nullptr);
}

std::vector<std::uint8_t> serialize(const FusedLinear& fused) {
  return encode_layer("fused_linear", fused.weight, fused.bias, &fused.method);
}

LinearLayer deserialize_layer(const std::vector<std::uint8_t>& bytes) {
  io::Container c = io::decode_container(bytes.data(), bytes.size(), "linear_layer");
  LinearLayer out;
  out.weight = io::as_matrix(c.tensors.at("weight"));
  out.bias = io::as_vector(c.tensors.at("bias"));
  check_layer(out.weight, out.bias, "linear_layer");
  return out;
}

FusedLinear deserialize_fused(const std::vector<std::uint8_t>& bytes) {
  io::Container c = io::decode_container(bytes.data(), bytes.size(), "fused_linear");
  FusedLinear out;
  out.weight = io::as_matrix(c.tensors.at("weight"));
  out.bias = io::as_vector(c.tensors.at("bias"));
  out.method = normalize::method_from_name(c.manifest.at("method").get<std::string>());
  check_layer(out.weight, out.bias, "fused_linear");
  return out;
}

double verify_fusion(const LinearLayer& layer, const Normalizer& nrm,
                     const FusedLinear& fused, std::size_t probe_count,
                     std::uint64_t seed) {
  const std::size_t d = layer.weight.cols;
  CounterRng rng(seed);
  Matrix probes = normal_matrix(rng, std::max<std::size_t>(probe_count, 1), d);
  Matrix via_fused = kernels::affine_post(probes, fused.weight, fused.bias);
  Matrix normalized = kernels::affine_post(probes, layer.weight, layer.bias);
  Matrix via_invert = normalize::invert(nrm, normalized);
  const double scale = std::max(max_abs(via_invert), 1e-30);
  return max_abs_diff(via_fused, via_invert) / scale;
}

}  // namespace isonorm::fuse
