#include "isonorm/normalize.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "isonorm/analysis.hpp"
#include "isonorm/errors.hpp"
#include "isonorm/hadamard.hpp"
#include "isonorm/kernels.hpp"
#include "isonorm/tensor_io.hpp"

namespace isonorm::normalize {

using json = nlohmann::json;

const char* method_name(Method m) {
  switch (m) {
    case Method::GlobalStandardize: return "gstd";
    case Method::Standardize: return "std";
    case Method::PcaWhiten: return "pca";
    case Method::ZcaWhiten: return "zca";
    case Method::HcaWhiten: return "hca";
    case Method::PhiS: return "phis";
  }
  return "?";
}

Method method_from_name(const std::string& name) {
  if (name == "gstd") return Method::GlobalStandardize;
  if (name == "std") return Method::Standardize;
  if (name == "pca") return Method::PcaWhiten;
  if (name == "zca") return Method::ZcaWhiten;
  if (name == "hca") return Method::HcaWhiten;
  if (name == "phis") return Method::PhiS;
  throw Error(ErrorCode::Usage, "unknown method '" + name +
                                    "' (expected gstd|std|pca|zca|hca|phis)");
}

namespace {

double spectrum_phi(const Vector& values) {
  double trace = 0.0;
  for (double v : values) trace += v;
  return std::sqrt(trace / double(values.size()));
}

void apply_sign_fix(Matrix& h, Matrix& u) {
  const std::size_t c = h.rows;
  for (std::size_t i = 0; i < c; ++i)
    if (h(i, i) < 0.0)
      for (std::size_t j = 0; j < c; ++j) h(i, j) = -h(i, j);
  // negating a column of U leaves UΛUᵀ (and thus everything the eigensystem
  // asserts) unchanged
  for (std::size_t j = 0; j < c; ++j)
    if (u(j, j) < 0.0)
      for (std::size_t i = 0; i < c; ++i) u(i, j) = -u(i, j);
}

}  // namespace

Normalizer fit_global_standardize(const moments::FinalizedMoments& stats) {
  if (!(stats.global_sigma > 0.0))
    throw DegenerateDistribution("fit_global_standardize: σ_g is zero");
  const std::size_t c = stats.covariance.mean.size();
  Normalizer n;
  n.method = Method::GlobalStandardize;
  n.channels = c;
  n.offset.assign(c, stats.global_mu);
  n.kind = TransformKind::Scalar;
  n.forward_scale = 1.0 / stats.global_sigma;
  n.inverse_scale = stats.global_sigma;
  n.alpha = n.forward_scale;
  n.mu_g = stats.global_mu;
  n.sigma_g = stats.global_sigma;
  n.fit_samples = stats.covariance.n_samples;
  return n;
}

Normalizer fit_standardize(const moments::FinalizedMoments& stats,
                           const FitOptions& opt) {
  const std::size_t c = stats.per_channel_sigma.size();
  double sigma_max = 0.0;
  for (double s : stats.per_channel_sigma) sigma_max = std::max(sigma_max, s);
  if (sigma_max == 0.0)
    throw DegenerateDistribution("fit_standardize: every channel is constant");
  const double floor = opt.floor_rel * sigma_max;
  Normalizer n;
  n.method = Method::Standardize;
  n.channels = c;
  n.offset = stats.covariance.mean;
  n.kind = TransformKind::Diagonal;
  n.forward_diag.resize(c);
  n.inverse_diag.resize(c);
  for (std::size_t j = 0; j < c; ++j) {
    double s = stats.per_channel_sigma[j];
    if (s < floor) {
      if (!opt.clamp)
        throw DegenerateChannel(j, "fit_standardize: σ of channel " + std::to_string(j) +
                                       " (" + std::to_string(s) + ") is below floor " +
                                       std::to_string(floor));
      s = floor;
    }
    n.forward_diag[j] = 1.0 / s;
    n.inverse_diag[j] = s;
  }
  n.fit_samples = stats.covariance.n_samples;
  return n;
}

Normalizer fit_whiten(const moments::FinalizedMoments& stats, QChoice q,
                      const FitOptions& opt) {
  return fit_whiten(stats, q, moments::eigh(stats.covariance), opt);
}

Normalizer fit_whiten(const moments::FinalizedMoments& stats, QChoice q,
                      const moments::Eigensystem& eigs, const FitOptions& opt) {
  const std::size_t c = eigs.values.size();
  const double lmax = eigs.values.empty() ? 0.0 : eigs.values[0];
  if (!(lmax > 0.0))
    throw DegenerateDistribution("fit_whiten: zero covariance");
  const double floor = opt.floor_rel * lmax;
  Vector lam = eigs.values;
  for (std::size_t j = 0; j < c; ++j) {
    if (lam[j] <= floor) {
      if (!opt.clamp)
        throw RankDeficient(analysis::effective_rank(eigs.values),
                            "fit_whiten: λ_" + std::to_string(j) + " = " +
                                std::to_string(lam[j]) + " is below the rank floor " +
                                std::to_string(floor));
      lam[j] = floor;
    }
  }

  // base = Λ^(−1/2)·Uᵀ; its inverse is U·Λ^(1/2)
  Matrix base(c, c), inv_base(c, c);
  for (std::size_t i = 0; i < c; ++i) {
    const double rs = 1.0 / std::sqrt(lam[i]);
    for (std::size_t j = 0; j < c; ++j) base(i, j) = rs * eigs.vectors(j, i);
  }
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < c; ++j)
      inv_base(i, j) = eigs.vectors(i, j) * std::sqrt(lam[j]);

  Normalizer n;
  n.channels = c;
  n.offset = stats.covariance.mean;
  n.kind = TransformKind::Dense;
  switch (q) {
    case QChoice::PCA:
      n.method = Method::PcaWhiten;
      n.forward_mat = std::move(base);
      n.inverse_mat = std::move(inv_base);
      break;
    case QChoice::ZCA:
      n.method = Method::ZcaWhiten;
      n.forward_mat = kernels::matmul(eigs.vectors, base);
      n.inverse_mat = kernels::matmul_nt(inv_base, eigs.vectors);
      break;
    case QChoice::HCA: {
      n.method = Method::HcaWhiten;
      const auto h = hadamard::construct(c);
      n.forward_mat = kernels::matmul(h.entries, base);
      n.inverse_mat = kernels::matmul_nt(inv_base, h.entries);
      break;
    }
  }
  n.phi = spectrum_phi(eigs.values);
  n.fit_samples = stats.covariance.n_samples;
  n.eigs = eigs;
  return n;
}

Normalizer fit_phi_s(const moments::FinalizedMoments& stats, const FitOptions& opt) {
  return fit_phi_s(stats, moments::eigh(stats.covariance), opt);
}

Normalizer fit_phi_s(const moments::FinalizedMoments& stats,
                     const moments::Eigensystem& eigs, const FitOptions& opt) {
  const std::size_t c = eigs.values.size();
  double trace = 0.0;
  for (double v : eigs.values) trace += v;
  if (!(trace > 0.0))
    throw DegenerateDistribution("fit_phi_s: spectrum trace is zero");
  const double phi = std::sqrt(trace / double(c));
  const double alpha = 1.0 / phi;

  auto had = hadamard::construct(c);
  Matrix h = std::move(had.entries);
  Matrix u = eigs.vectors;
  if (opt.sign_fix) apply_sign_fix(h, u);

  Normalizer n;
  n.method = Method::PhiS;
  n.channels = c;
  n.offset = stats.covariance.mean;
  n.kind = TransformKind::Dense;
  n.forward_mat = kernels::matmul_nt(h, u);  // R = HUᵀ
  for (double& v : n.forward_mat.data) v *= alpha;
  n.inverse_mat = kernels::matmul_nt(u, h);  // UHᵀ
  for (double& v : n.inverse_mat.data) v *= phi;
  n.phi = phi;
  n.alpha = alpha;
  n.fit_samples = stats.covariance.n_samples;
  n.eigs = moments::Eigensystem{std::move(u), eigs.values};
  return n;
}

Normalizer fit(Method m, const moments::FinalizedMoments& stats, const FitOptions& opt) {
  switch (m) {
    case Method::GlobalStandardize: return fit_global_standardize(stats);
    case Method::Standardize: return fit_standardize(stats, opt);
    case Method::PcaWhiten: return fit_whiten(stats, QChoice::PCA, opt);
    case Method::ZcaWhiten: return fit_whiten(stats, QChoice::ZCA, opt);
    case Method::HcaWhiten: return fit_whiten(stats, QChoice::HCA, opt);
    case Method::PhiS: return fit_phi_s(stats, opt);
  }
  throw Error(ErrorCode::Generic, "fit: invalid method");
}

namespace {

void check_channels(const Normalizer& nrm, const Matrix& m, const char* what) {
  if (m.cols != nrm.channels)
    throw ShapeError(std::string(what) + ": data has " + std::to_string(m.cols) +
                     " channels, normalizer expects " + std::to_string(nrm.channels));
}

}  // namespace

Matrix apply(const Normalizer& nrm, const Matrix& y) {
  check_channels(nrm, y, "apply");
  const std::size_t n = y.rows, c = y.cols;
  switch (nrm.kind) {
    case TransformKind::Scalar: {
      Matrix out(n, c);
      const double a = nrm.forward_scale;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
      for (std::size_t i = 0; i < n; ++i) {
        const double* yi = y[i];
        double* oi = out[i];
        for (std::size_t j = 0; j < c; ++j) oi[j] = (yi[j] - nrm.offset[j]) * a;
      }
      return out;
    }
    case TransformKind::Diagonal: {
      Matrix out(n, c);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
      for (std::size_t i = 0; i < n; ++i) {
        const double* yi = y[i];
        double* oi = out[i];
        for (std::size_t j = 0; j < c; ++j)
          oi[j] = (yi[j] - nrm.offset[j]) * nrm.forward_diag[j];
      }
      return out;
    }
    case TransformKind::Dense:
      return kernels::affine_pre(y, nrm.offset, nrm.forward_mat);
  }
  throw Error(ErrorCode::Generic, "apply: invalid transform kind");
}

Matrix invert(const Normalizer& nrm, const Matrix& x) {
  check_channels(nrm, x, "invert");
  const std::size_t n = x.rows, c = x.cols;
  switch (nrm.kind) {
    case TransformKind::Scalar: {
      Matrix out(n, c);
      const double a = nrm.inverse_scale;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
      for (std::size_t i = 0; i < n; ++i) {
        const double* xi = x[i];
        double* oi = out[i];
        for (std::size_t j = 0; j < c; ++j) oi[j] = xi[j] * a + nrm.offset[j];
      }
      return out;
    }
    case TransformKind::Diagonal: {
      Matrix out(n, c);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
      for (std::size_t i = 0; i < n; ++i) {
        const double* xi = x[i];
        double* oi = out[i];
        for (std::size_t j = 0; j < c; ++j)
          oi[j] = xi[j] * nrm.inverse_diag[j] + nrm.offset[j];
      }
      return out;
    }
    case TransformKind::Dense:
      return kernels::affine_post(x, nrm.inverse_mat, nrm.offset);
  }
  throw Error(ErrorCode::Generic, "invert: invalid transform kind");
}

std::vector<float> apply_f32(const Normalizer& nrm, const std::vector<float>& y,
                             std::size_t rows) {
  if (rows == 0 || y.size() != rows * nrm.channels)
    throw ShapeError("apply_f32: buffer size is not rows×channels");
  Matrix wide(rows, nrm.channels);
  for (std::size_t i = 0; i < y.size(); ++i) wide.data[i] = y[i];
  Matrix out = apply(nrm, wide);
  std::vector<float> res(out.data.size());
  for (std::size_t i = 0; i < res.size(); ++i) res[i] = static_cast<float>(out.data[i]);
  return res;
}

namespace {

const char* kind_name(TransformKind k) {
  switch (k) {
    case TransformKind::Scalar: return "scalar";
    case TransformKind::Diagonal: return "diagonal";
    case TransformKind::Dense: return "dense";
  }
  return "?";
}

TransformKind kind_from_name(const std::string& s) {
  if (s == "scalar") return TransformKind::Scalar;
  if (s == "diagonal") return TransformKind::Diagonal;
  if (s == "dense") return TransformKind::Dense;
  throw FormatError("normalizer: unknown transform kind '" + s + "'");
}

}  // namespace

std::vector<std::uint8_t> serialize(const Normalizer& nrm) {
  json manifest;
  manifest["method"] = method_name(nrm.method);
  manifest["channels"] = nrm.channels;
  manifest["fit_samples"] = nrm.fit_samples;
  manifest["transform_kind"] = kind_name(nrm.kind);
  if (nrm.kind == TransformKind::Scalar) {
    manifest["forward_scale"] = nrm.forward_scale;
    manifest["inverse_scale"] = nrm.inverse_scale;
  }
  if (nrm.method == Method::GlobalStandardize || nrm.method == Method::PhiS)
    manifest["alpha"] = nrm.alpha;
  if (nrm.eigs) manifest["phi"] = nrm.phi;
  if (nrm.method == Method::GlobalStandardize) {
    manifest["mu_g"] = nrm.mu_g;
    manifest["sigma_g"] = nrm.sigma_g;
  }
  std::vector<io::Section> sections;
  sections.push_back({"offset", io::encode_tensor(nrm.offset)});
  if (nrm.kind == TransformKind::Diagonal) {
    sections.push_back({"forward_diag", io::encode_tensor(nrm.forward_diag)});
    sections.push_back({"inverse_diag", io::encode_tensor(nrm.inverse_diag)});
  }
  if (nrm.kind == TransformKind::Dense) {
    sections.push_back({"forward_mat", io::encode_tensor(nrm.forward_mat)});
    sections.push_back({"inverse_mat", io::encode_tensor(nrm.inverse_mat)});
  }
  if (nrm.eigs) {
    sections.push_back({"eig_vectors", io::encode_tensor(nrm.eigs->vectors)});
    sections.push_back({"eig_values", io::encode_tensor(nrm.eigs->values)});
  }
  return io::encode_container("normalizer", std::move(manifest), sections);
}

Normalizer deserialize(const std::uint8_t* data, std::size_t n) {
  io::Container c = io::decode_container(data, n, "normalizer");
  Normalizer out;
  try {
    out.method = method_from_name(c.manifest.at("method").get<std::string>());
    out.channels = c.manifest.at("channels").get<std::size_t>();
    out.fit_samples = c.manifest.at("fit_samples").get<std::size_t>();
    out.kind = kind_from_name(c.manifest.at("transform_kind").get<std::string>());
    if (c.manifest.contains("forward_scale")) {
      out.forward_scale = c.manifest["forward_scale"].get<double>();
      out.inverse_scale = c.manifest["inverse_scale"].get<double>();
    }
    if (c.manifest.contains("alpha")) out.alpha = c.manifest["alpha"].get<double>();
    if (c.manifest.contains("phi")) out.phi = c.manifest["phi"].get<double>();
    if (c.manifest.contains("mu_g")) out.mu_g = c.manifest["mu_g"].get<double>();
    if (c.manifest.contains("sigma_g")) out.sigma_g = c.manifest["sigma_g"].get<double>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("normalizer: ill-formed manifest: ") + e.what());
  }
  auto want = [&](const char* name) -> const io::TensorData& {
    auto it = c.tensors.find(name);
    if (it == c.tensors.end())
      throw FormatError("normalizer: missing tensor '" + std::string(name) + "'");
    return it->second;
  };
  out.offset = io::as_vector(want("offset"));
  if (out.offset.size() != out.channels)
    throw FormatError("normalizer: offset length does not match channel count");
  if (out.kind == TransformKind::Diagonal) {
    out.forward_diag = io::as_vector(want("forward_diag"));
    out.inverse_diag = io::as_vector(want("inverse_diag"));
    if (out.forward_diag.size() != out.channels || out.inverse_diag.size() != out.channels)
      throw FormatError("normalizer: diagonal length does not match channel count");
  }
  if (out.kind == TransformKind::Dense) {
    out.forward_mat = io::as_matrix(want("forward_mat"));
    out.inverse_mat = io::as_matrix(want("inverse_mat"));
    if (out.forward_mat.rows != out.channels || out.forward_mat.cols != out.channels ||
        out.inverse_mat.rows != out.channels || out.inverse_mat.cols != out.channels)
      throw FormatError("normalizer: matrix shape does not match channel count");
  }
  if (c.tensors.count("eig_vectors")) {
    moments::Eigensystem e;
    e.vectors = io::as_matrix(want("eig_vectors"));
    e.values = io::as_vector(want("eig_values"));
    if (e.vectors.rows != out.channels || e.vectors.cols != out.channels ||
        e.values.size() != out.channels)
      throw FormatError("normalizer: eigensystem shape does not match channel count");
    out.eigs = std::move(e);
  }
  return out;
}

Normalizer deserialize(const std::vector<std::uint8_t>& bytes) {
  return deserialize(bytes.data(), bytes.size());
}

}  // namespace isonorm::normalize
