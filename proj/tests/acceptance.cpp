// Acceptance gate: one pass/fail line per criterion, exit 0 only if all pass.
// Each criterion builds a deterministic report string; criterion 11 reruns the
// cheap criteria byte-for-byte and reduced-size replicas of the expensive ones.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "isonorm/analysis.hpp"
#include "isonorm/distill.hpp"
#include "isonorm/errors.hpp"
#include "isonorm/fuse.hpp"
#include "isonorm/hadamard.hpp"
#include "isonorm/kernels.hpp"
#include "isonorm/matrix.hpp"
#include "isonorm/moments.hpp"
#include "isonorm/normalize.hpp"
#include "isonorm/rng.hpp"

using namespace isonorm;
using normalize::Method;

namespace {

std::string fmt(double v) {
  char b[40];
  std::snprintf(b, sizeof b, "%.17g", v);
  return b;
}

double now_seconds() {
  using clock = std::chrono::steady_clock;
  static const clock::time_point start = clock::now();
  return std::chrono::duration<double>(clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;  // goes on the printed line
  std::string report;  // deterministic bytes for the repeatability criterion
};

// ---------------------------------------------------------------------------
// shared generators

// Data with population covariance R diag(spectrum) Rᵀ where R is a product of
// `sweeps` random Givens rotations: anisotropic with a scrambled orientation,
// at O(N·sweeps) cost so wide channel counts stay affordable.
Matrix rotated_gaussian(std::size_t n, const Vector& spectrum, std::size_t sweeps,
                        CounterRng& rng) {
  const std::size_t c = spectrum.size();
  Matrix y(n, c);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) y(i, j) = rng.normal() * std::sqrt(spectrum[j]);
  for (std::size_t s = 0; s < sweeps; ++s) {
    const std::size_t a = rng.uniform_index(c);
    std::size_t b = rng.uniform_index(c - 1);
    if (b >= a) ++b;
    const double th = 2.0 * 3.14159265358979323846 * rng.uniform();
    const double cs = std::cos(th), sn = std::sin(th);
    for (std::size_t i = 0; i < n; ++i) {
      const double va = y(i, a), vb = y(i, b);
      y(i, a) = cs * va - sn * vb;
      y(i, b) = sn * va + cs * vb;
    }
  }
  return y;
}

void rotate_in_place(Matrix& y, std::size_t sweeps, CounterRng& rng) {
  const std::size_t c = y.cols;
  for (std::size_t s = 0; s < sweeps; ++s) {
    const std::size_t a = rng.uniform_index(c);
    std::size_t b = rng.uniform_index(c - 1);
    if (b >= a) ++b;
    const double th = 2.0 * 3.14159265358979323846 * rng.uniform();
    const double cs = std::cos(th), sn = std::sin(th);
    for (std::size_t i = 0; i < y.rows; ++i) {
      const double va = y(i, a), vb = y(i, b);
      y(i, a) = cs * va - sn * vb;
      y(i, b) = sn * va + cs * vb;
    }
  }
}

// Two rows per channel at ±sqrt((N−1)/2·λ_c): sample covariance (N−1
// denominator) is exactly diag(spectrum).
Matrix exact_diag_cov_data(const Vector& spectrum) {
  const std::size_t c = spectrum.size();
  Matrix data(2 * c, c);
  for (std::size_t j = 0; j < c; ++j) {
    const double a = std::sqrt(double(2 * c - 1) / 2.0 * spectrum[j]);
    data(2 * j, j) = a;
    data(2 * j + 1, j) = -a;
  }
  return data;
}

moments::Eigensystem pinned_eigsys() {
  moments::Eigensystem e;
  e.values = {3.8356, 0.0894};
  e.vectors = Matrix(2, 2);
  e.vectors(0, 0) = 1.0;
  e.vectors(1, 1) = 1.0;
  return e;
}

double max_grad_error(const distill::LossConfig& cfg, Matrix x, const Matrix& y) {
  Matrix grad;
  (void)distill::loss_and_grad(cfg, x, y, &grad);
  const double h = 1e-6;
  double worst = 0.0;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double keep = x.data[i];
    x.data[i] = keep + h;
    const double up = distill::loss_and_grad(cfg, x, y, nullptr);
    x.data[i] = keep - h;
    const double dn = distill::loss_and_grad(cfg, x, y, nullptr);
    x.data[i] = keep;
    const double numeric = (up - dn) / (2.0 * h);
    worst = std::max(worst, std::abs(numeric - grad.data[i]) /
                                std::max(1.0, std::abs(grad.data[i])));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// criterion 1: Hadamard constructions

Outcome criterion1() {
  Outcome out;
  const double t0 = now_seconds();
  std::vector<std::size_t> sizes;
  for (std::size_t c = 2; c <= 1024; c *= 2) sizes.push_back(c);
  for (std::size_t c : {768, 1152, 1280, 1408}) sizes.push_back(c);

  double worst_residual = 0.0, worst_entry = 0.0;
  std::ostringstream rep;
  for (std::size_t c : sizes) {
    const auto h = hadamard::construct(c);
    const Matrix prod = kernels::matmul_nt(h.entries, h.entries);
    double residual = 0.0;
    for (std::size_t i = 0; i < c; ++i)
      for (std::size_t j = 0; j < c; ++j)
        residual = std::max(residual,
                            std::abs(prod(i, j) - (i == j ? 1.0 : 0.0)));
    const double want = 1.0 / std::sqrt(double(c));
    double entry_dev = 0.0;
    for (double v : h.entries.data)
      entry_dev = std::max(entry_dev, std::abs(std::abs(v) - want));
    worst_residual = std::max(worst_residual, residual);
    worst_entry = std::max(worst_entry, entry_dev);
    rep << "size=" << c << " recipe=" << h.recipe.to_sexpr()
        << " residual=" << fmt(residual) << " entry_dev=" << fmt(entry_dev) << "\n";
  }

  bool rejects = false;
  try {
    (void)hadamard::construct(668);
  } catch (const NoKnownConstruction&) {
    rejects = true;
  }
  rep << "construct(668)=" << (rejects ? "no_known_construction" : "unexpected") << "\n";

  const double elapsed = now_seconds() - t0;
  out.report = rep.str();
  out.pass = worst_residual < 1e-9 && worst_entry < 1e-12 && rejects && elapsed < 30.0;
  std::ostringstream d;
  d << "14 sizes, residual<=" << fmt(worst_residual) << ", entry_dev<="
    << fmt(worst_entry) << ", 668 rejected, " << fmt(elapsed) << "s";
  out.detail = d.str();
  return out;
}

// criterion 2: phi anchor and HCA one-hot magnitudes on the pinned spectrum

Outcome criterion2() {
  Outcome out;
  const auto stats = moments::compute_moments(exact_diag_cov_data({3.8356, 0.0894}));
  const auto phis = normalize::fit_phi_s(stats);
  const double phi_err = std::abs(phis.phi - 1.400892);

  const auto hca = normalize::fit_whiten(stats, normalize::QChoice::HCA);
  double onehot_err = 0.0;
  for (std::size_t r = 0; r < 2; ++r) {
    double norm2 = 0.0;
    for (std::size_t i = 0; i < 2; ++i)
      norm2 += hca.inverse_mat(i, r) * hca.inverse_mat(i, r);
    onehot_err = std::max(onehot_err, std::abs(std::sqrt(norm2) - phis.phi));
  }

  out.report = "phi=" + fmt(phis.phi) + " onehot_err=" + fmt(onehot_err) + "\n";
  out.pass = phi_err < 1e-5 && onehot_err < 1e-8;
  out.detail = "phi=" + fmt(phis.phi) + " (|err|=" + fmt(phi_err) +
               "), one-hot dev=" + fmt(onehot_err);
  return out;
}

// criterion 3: near-degenerate spectrum: alpha -> sqrt(2), whitening refuses

Outcome criterion3() {
  Outcome out;
  const auto stats = moments::compute_moments(exact_diag_cov_data({1.0, 1e-12}));
  const auto phis = normalize::fit_phi_s(stats);
  const double alpha_err = std::abs(phis.alpha - std::sqrt(2.0));

  bool refused = false;
  double reported_rank = 0.0;
  try {
    (void)normalize::fit_whiten(stats, normalize::QChoice::PCA);
  } catch (const RankDeficient& e) {
    refused = true;
    reported_rank = e.effective_rank;
  }

  out.report = "alpha=" + fmt(phis.alpha) + " whiten_refused=" +
               (refused ? "yes" : "no") + " rank=" + fmt(reported_rank) + "\n";
  out.pass = alpha_err < 1e-6 && refused;
  out.detail = "alpha=" + fmt(phis.alpha) + " (|err|=" + fmt(alpha_err) +
               "), whitening raised rank_deficient";
  return out;
}

// criterion 4: global-standardization gains at the published sigma_g values

Outcome criterion4() {
  Outcome out;
  std::ostringstream rep;
  bool ok = true;
  const struct {
    double sigma, expect;
  } cases[] = {{5.4688, 0.1829}, {0.0286, 34.97}};
  for (const auto& cs : cases) {
    CounterRng rng(41);
    Matrix data = normal_matrix(rng, 20000, 8);
    const double measured = moments::compute_moments(data).global_sigma;
    for (double& v : data.data) v *= cs.sigma / measured;  // pin sample sigma_g
    const auto nrm = normalize::fit_global_standardize(moments::compute_moments(data));
    const double rel = std::abs(nrm.alpha - cs.expect) / cs.expect;
    ok = ok && rel < 0.005;
    rep << "sigma_g=" << fmt(cs.sigma) << " alpha=" << fmt(nrm.alpha)
        << " rel_err=" << fmt(rel) << "\n";
  }
  out.report = rep.str();
  out.pass = ok;
  out.detail = "alpha within 0.5% of 0.1829 and 34.97";
  return out;
}

// criterion 5: PHI-S unit variances + rotation-invariant alpha at scale

struct C5Case {
  std::size_t channels;
  std::size_t n;
  std::uint64_t seed;
};

std::string c5_run_case(const C5Case& cs, double* vmin, double* vmax, double* alpha_rel) {
  CounterRng rng(cs.seed);
  const std::size_t c = cs.channels;
  Vector spectrum(c);
  for (std::size_t j = 0; j < c; ++j)
    spectrum[j] = 5.0 * std::pow(0.02, double(j) / double(std::max<std::size_t>(c - 1, 1))) *
                  std::exp(0.2 * rng.normal());
  Matrix data = rotated_gaussian(cs.n, spectrum, 2 * c, rng);

  const auto stats = moments::compute_moments(data);
  const auto nrm = normalize::fit_phi_s(stats);

  // Per-channel variance of the transformed sample: diag(W Σ̂ Wᵀ) exactly.
  const Matrix ws = kernels::matmul(nrm.forward_mat, stats.covariance.cov);
  *vmin = 1e300;
  *vmax = -1e300;
  for (std::size_t i = 0; i < c; ++i) {
    double v = 0.0;
    for (std::size_t k = 0; k < c; ++k) v += ws(i, k) * nrm.forward_mat(i, k);
    *vmin = std::min(*vmin, v);
    *vmax = std::max(*vmax, v);
  }

  rotate_in_place(data, 2 * c, rng);
  const auto nrm2 = normalize::fit_phi_s(moments::compute_moments(data));
  *alpha_rel = std::abs(nrm2.alpha - nrm.alpha) / nrm.alpha;

  return "C=" + std::to_string(c) + " vmin=" + fmt(*vmin) + " vmax=" + fmt(*vmax) +
         " alpha=" + fmt(nrm.alpha) + " alpha_rot_rel=" + fmt(*alpha_rel) + "\n";
}

std::string c5_suite(const std::vector<C5Case>& cases, bool* pass) {
  std::string rep;
  *pass = true;
  for (const auto& cs : cases) {
    double vmin, vmax, arel;
    rep += c5_run_case(cs, &vmin, &vmax, &arel);
    if (!(vmin >= 0.97 && vmax <= 1.03 && arel < 1e-6)) *pass = false;
  }
  return rep;
}

Outcome criterion5() {
  Outcome out;
  const double t0 = now_seconds();
  std::vector<C5Case> cases;
  for (std::uint64_t i = 0; i < 10; ++i) cases.push_back({4, 100000, 500 + i});
  for (std::uint64_t i = 0; i < 9; ++i) cases.push_back({64, 100000, 520 + i});
  cases.push_back({768, 100000, 540});

  bool ok = false;
  out.report = c5_suite(cases, &ok);
  const double elapsed = now_seconds() - t0;
  out.pass = ok && elapsed < 120.0;
  out.detail = "20 gaussians (C in {4,64,768}, N=1e5), variances in [0.97,1.03], "
               "alpha rotation-stable, " + fmt(elapsed) + "s";
  return out;
}

// criterion 6: whitenings differ by an orthogonal factor; outputs are white

Outcome criterion6() {
  Outcome out;
  CounterRng rng(61);
  Vector spectrum(16);
  for (std::size_t j = 0; j < 16; ++j)
    spectrum[j] = 4.0 * std::pow(0.05, double(j) / 15.0);
  const Matrix data = rotated_gaussian(100000, spectrum, 64, rng);
  const auto stats = moments::compute_moments(data);

  const normalize::QChoice qs[] = {normalize::QChoice::PCA, normalize::QChoice::ZCA,
                                   normalize::QChoice::HCA};
  normalize::Normalizer nrms[3];
  for (int i = 0; i < 3; ++i) nrms[i] = normalize::fit_whiten(stats, qs[i]);

  double worst_orth = 0.0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      if (a == b) continue;
      const Matrix q = kernels::matmul(nrms[a].forward_mat, nrms[b].inverse_mat);
      const Matrix qq = kernels::matmul_nt(q, q);
      for (std::size_t i = 0; i < 16; ++i)
        for (std::size_t j = 0; j < 16; ++j)
          worst_orth = std::max(worst_orth,
                                std::abs(qq(i, j) - (i == j ? 1.0 : 0.0)));
    }

  double worst_cov = 0.0;
  for (int i = 0; i < 3; ++i) {
    const Matrix white = normalize::apply(nrms[i], data);
    const auto wstats = moments::compute_moments(white);
    for (std::size_t r = 0; r < 16; ++r)
      for (std::size_t s = 0; s < 16; ++s)
        worst_cov = std::max(worst_cov, std::abs(wstats.covariance.cov(r, s) -
                                                 (r == s ? 1.0 : 0.0)));
  }

  out.report = "orth_residual=" + fmt(worst_orth) + " cov_dev=" + fmt(worst_cov) + "\n";
  out.pass = worst_orth < 1e-6 && worst_cov < 0.02;
  out.detail = "pairwise orthogonality residual " + fmt(worst_orth) +
               ", whitened covariance within " + fmt(worst_cov) + " of I";
  return out;
}

// criterion 7: round trips and fused-layer equivalence for all six methods

Outcome criterion7() {
  Outcome out;
  CounterRng rng(71);
  Vector spectrum(16);
  for (std::size_t j = 0; j < 16; ++j)
    spectrum[j] = 3.0 * std::pow(0.1, double(j) / 15.0);
  Matrix data = rotated_gaussian(20000, spectrum, 64, rng);
  for (std::size_t i = 0; i < data.rows; ++i)
    for (std::size_t j = 0; j < 16; ++j) data(i, j) += 0.25 * double(j) - 1.0;
  const auto stats = moments::compute_moments(data);

  double mag = 0.0;
  for (double v : data.data) mag = std::max(mag, std::abs(v));

  const Method methods[] = {Method::GlobalStandardize, Method::Standardize,
                            Method::PcaWhiten, Method::ZcaWhiten, Method::HcaWhiten,
                            Method::PhiS};
  std::ostringstream rep;
  double worst_rt = 0.0, worst_fuse = 0.0;
  for (Method m : methods) {
    const auto nrm = normalize::fit(m, stats);
    const Matrix round = normalize::invert(nrm, normalize::apply(nrm, data));
    const double rt = max_abs_diff(round, data) / mag;
    worst_rt = std::max(worst_rt, rt);

    fuse::LinearLayer layer;
    layer.weight = normal_matrix(rng, 16, 12);
    layer.bias.resize(16);
    fill_normal(rng, layer.bias);
    const double fe = fuse::verify_fusion(layer, nrm, fuse::fuse(layer, nrm), 1000, 777);
    worst_fuse = std::max(worst_fuse, fe);
    rep << normalize::method_name(m) << " round_trip=" << fmt(rt)
        << " fusion=" << fmt(fe) << "\n";
  }

  out.report = rep.str();
  out.pass = worst_rt < 1e-5 && worst_fuse < 1e-6;
  out.detail = "round trip <= " + fmt(worst_rt) + ", fusion <= " + fmt(worst_fuse) +
               " over 1000 probes per method";
  return out;
}

// criterion 8: radial error curves on the pinned spectrum

Outcome criterion8() {
  Outcome out;
  const auto eigs = pinned_eigsys();

  const auto phis = analysis::radial_error(eigs, Method::PhiS, 720);
  double pmin = 1e300, pmax = -1e300;
  for (double r : phis.radii) {
    pmin = std::min(pmin, r);
    pmax = std::max(pmax, r);
  }
  const bool phis_flat = pmax / pmin < 1.0 + 1e-9;

  const auto hca = analysis::radial_error(eigs, Method::HcaWhiten, 720);
  const double axis_gap = std::abs(hca.radii[0] - hca.radii[180]);
  const std::size_t hmax =
      std::size_t(std::max_element(hca.radii.begin(), hca.radii.end()) -
                  hca.radii.begin());
  const std::size_t hmod = hmax % 180;  // pi/4 family lives at 90 (±1 grid step)
  const bool hca_ok = axis_gap < 1e-9 && hmod >= 89 && hmod <= 91;

  const auto pca = analysis::radial_error(eigs, Method::PcaWhiten, 720);
  const std::size_t pmax_i =
      std::size_t(std::max_element(pca.radii.begin(), pca.radii.end()) -
                  pca.radii.begin());
  const std::size_t pmin_i =
      std::size_t(std::min_element(pca.radii.begin(), pca.radii.end()) -
                  pca.radii.begin());
  const bool pca_ok = (pmax_i % 360) == 0 && (pmin_i % 360) == 180;

  out.report = "phis_ratio=" + fmt(pmax / pmin) + " hca_axis_gap=" + fmt(axis_gap) +
               " hca_argmax=" + std::to_string(hmax) +
               " pca_argmax=" + std::to_string(pmax_i) +
               " pca_argmin=" + std::to_string(pmin_i) + "\n";
  out.pass = phis_flat && hca_ok && pca_ok;
  out.detail = "phis flat (ratio-1=" + fmt(pmax / pmin - 1.0) + "), hca axes equal, "
               "extrema on the expected grid points";
  return out;
}

// criterion 9: effective rank anchors

Outcome criterion9() {
  Outcome out;
  std::ostringstream rep;
  bool ok = true;
  for (std::size_t k : {std::size_t(1), std::size_t(8), std::size_t(64)}) {
    const double r = analysis::effective_rank(Vector(k, 0.37));
    ok = ok && std::abs(r - double(k)) < 1e-9;
    rep << "uniform_" << k << "=" << fmt(r) << "\n";
  }
  const double r3 = analysis::effective_rank({1.0, 1.0, 1e-12});
  ok = ok && std::abs(r3 - 2.0) < 1e-3;
  rep << "near_rank2=" << fmt(r3) << "\n";
  out.report = rep.str();
  out.pass = ok;
  out.detail = "uniform spectra exact, (1,1,1e-12) -> " + fmt(r3);
  return out;
}

// criterion 10: multi-teacher distillation properties
//
// All four teachers share one anisotropic channel-scale pattern, so dividing
// the target σ ratios by the largest entry and by the pattern's RMS gives
// exact global-σ ratios with the biggest teacher at σ_g = 1.  Noise is
// proportional to each teacher's own scale (shared structured fraction plus a
// white floor), and each teacher's channel mean is a single constant: every
// normalizer sheds a constant mean (global standardization through its scalar
// μ_g), while the bias-free student cannot represent it, which keeps the raw
// baseline's per-teacher losses mean-dominated.  Teacher rank exceeds the
// channel count so the spectra stay benign for the whitening family.

nlohmann::json c10_config(const std::string& method, std::size_t steps,
                          std::size_t dataset, std::size_t eval_n) {
  nlohmann::json sc = nlohmann::json::array();
  double s2 = 0.0;
  for (int c = 0; c < 64; ++c) {
    const double v = std::pow(2.0, 2.0 * c / 63.0 - 1.0);
    sc.push_back(v);
    s2 += v * v;
  }
  s2 /= 64.0;

  const double sigma_ratio[4] = {0.0286, 1.8389, 1.3496, 5.4688};
  const double channel_mean[4] = {0.0, 3.0, 0.4, 0.15};
  nlohmann::json teachers = nlohmann::json::array();
  for (int t = 0; t < 4; ++t)
    teachers.push_back({{"latent_dim", 96},
                        {"channels", 64},
                        {"global_scale", sigma_ratio[t] / 5.4688 / std::sqrt(s2)},
                        {"channel_mean", channel_mean[t]},
                        {"channel_scale", sc},
                        {"noise_structured_frac", 0.1},
                        {"noise_uniform_abs", 0.3}});

  return {{"seed", 20260823},
          {"steps", steps},
          {"batch_size", 256},
          {"learning_rate", 0.5},
          {"dataset_size", dataset},
          {"eval_size", eval_n},
          {"student_width", 128},
          {"student_depth", 0},
          {"record_every", 25},
          {"loss", {{"kind", "mse"}}},
          {"teachers", teachers},
          {"method", method}};
}

double spread(const std::vector<distill::TeacherReport>& trs) {
  double lo = 1e300, hi = -1e300;
  for (const auto& tr : trs) {
    lo = std::min(lo, tr.final_denormalized_mse);
    hi = std::max(hi, tr.final_denormalized_mse);
  }
  return hi / lo;
}

Outcome criterion10() {
  Outcome out;
  const double t0 = now_seconds();
  const std::vector<std::string> runs = {"baseline", "gstd", "std",
                                         "pca",      "zca",  "hca", "phis"};
  std::map<std::string, distill::DistillReport> reports;
  for (const std::string& m : runs) {
    const auto cfg = distill::config_from_json(c10_config(m, 2000, 20000, 2000));
    reports.emplace(m, distill::run_distillation(cfg));
  }

  // (a) the raw-target baseline's per-teacher loss spread dwarfs every
  // normalized run's spread.
  const double base_spread = spread(reports.at("baseline").teachers);
  double worst_ratio = 1e300;
  std::string worst_method;
  for (const std::string& m : runs) {
    if (m == "baseline") continue;
    const double s = spread(reports.at(m).teachers);
    const double ratio = base_spread / s;
    if (ratio < worst_ratio) {
      worst_ratio = ratio;
      worst_method = m;
    }
  }
  const bool pass_a = worst_ratio >= 10.0;

  // (b) per teacher, the two flattest normalized error-variance profiles
  // belong to HCA and PHI-S.
  bool pass_b = true;
  std::ostringstream brep;
  for (std::size_t t = 0; t < 4; ++t) {
    std::vector<std::pair<double, std::string>> ranges;
    for (const std::string& m : runs) {
      if (m == "baseline") continue;
      ranges.emplace_back(reports.at(m).teachers[t].normalized_range, m);
    }
    std::sort(ranges.begin(), ranges.end());
    const std::set<std::string> two_smallest = {ranges[0].second, ranges[1].second};
    const bool ok = two_smallest == std::set<std::string>{"hca", "phis"};
    pass_b = pass_b && ok;
    brep << "teacher" << t << " order=";
    for (const auto& [v, m] : ranges) brep << m << "=" << fmt(v) << " ";
    brep << "\n";
  }

  // (c) analytic loss gradients agree with central differences.
  CounterRng rng(101);
  Matrix gx = normal_matrix(rng, 6, 5);
  const Matrix gy = normal_matrix(rng, 6, 5);
  using LK = distill::LossConfig::Kind;
  double worst_grad = 0.0;
  for (LK k : {LK::MSE, LK::Cosine, LK::HybridMSE, LK::HybridSmoothL1}) {
    distill::LossConfig lc{k, 0.4, 0.7};
    Matrix x = gx;
    if (k == LK::HybridSmoothL1)
      for (std::size_t i = 0; i < x.data.size(); ++i) {
        const double d = x.data[i] - gy.data[i];
        if (std::abs(std::abs(d) - lc.smooth_l1_delta) < 1e-2) x.data[i] += 0.03;
      }
    worst_grad = std::max(worst_grad, max_grad_error(lc, x, gy));
  }
  const bool pass_c = worst_grad < 1e-5;

  const double elapsed = now_seconds() - t0;

  std::ostringstream rep;
  rep << "baseline_spread=" << fmt(base_spread) << "\n";
  for (const std::string& m : runs) {
    rep << m << ":";
    for (const auto& tr : reports.at(m).teachers)
      rep << " " << fmt(tr.final_denormalized_mse);
    rep << "\n";
  }
  rep << brep.str();
  rep << "grad_worst=" << fmt(worst_grad) << "\n";
  out.report = rep.str();

  out.pass = pass_a && pass_b && pass_c && elapsed < 600.0;
  std::ostringstream d;
  d << "(a) baseline/method spread ratio >= " << fmt(worst_ratio) << " (worst: "
    << worst_method << ") " << (pass_a ? "ok" : "FAIL") << "; (b) hca+phis flattest "
    << (pass_b ? "ok" : "FAIL") << "; (c) grad err " << fmt(worst_grad) << " "
    << (pass_c ? "ok" : "FAIL") << "; " << fmt(elapsed) << "s";
  out.detail = d.str();
  return out;
}

// criterion 11: repeatability

Outcome criterion11(const std::map<int, Outcome>& first,
                    const std::map<int, std::function<Outcome()>>& fns) {
  Outcome out;
  bool ok = true;
  std::ostringstream d;

  // Full reruns of every criterion that finishes in seconds.
  for (int i : {1, 2, 3, 4, 6, 7, 8, 9}) {
    const Outcome again = fns.at(i)();
    const bool same = again.report == first.at(i).report;
    ok = ok && same;
    if (!same) d << "criterion " << i << " report drifted; ";
  }

  // Reduced-size replicas of the two long-running criteria, run twice each.
  std::vector<C5Case> small5 = {{4, 2000, 901}, {4, 2000, 902}, {64, 2000, 903}};
  bool p1 = false, p2 = false;
  const std::string r5a = c5_suite(small5, &p1);
  const std::string r5b = c5_suite(small5, &p2);
  ok = ok && r5a == r5b;
  if (r5a != r5b) d << "criterion 5 replica drifted; ";

  nlohmann::json small_cfg = c10_config("phis", 60, 1024, 128);
  small_cfg["teachers"] = {nlohmann::json{{"latent_dim", 8},
                                          {"channels", 8},
                                          {"global_scale", 0.5},
                                          {"channel_mean_spread", 1.0},
                                          {"channel_scale_spread", 2.0},
                                          {"noise_structured_frac", 0.3},
                                          {"noise_uniform_abs", 0.2}},
                           nlohmann::json{{"latent_dim", 8},
                                          {"channels", 8},
                                          {"global_scale", 2.0},
                                          {"channel_mean", -2.0},
                                          {"channel_mean_spread", 4.0},
                                          {"channel_scale_spread", 2.0},
                                          {"noise_structured_frac", 0.3},
                                          {"noise_uniform_abs", 0.2}}};
  small_cfg["batch_size"] = 64;
  small_cfg["student_width"] = 16;
  const auto ra = distill::run_distillation(distill::config_from_json(small_cfg));
  const auto rb = distill::run_distillation(distill::config_from_json(small_cfg));
  const bool same10 = ra.to_json().dump() == rb.to_json().dump();
  ok = ok && same10;
  if (!same10) d << "criterion 10 replica drifted; ";

  out.pass = ok;
  out.report = r5a + ra.to_json().dump() + "\n";
  out.detail = ok ? "criteria 1-4,6-9 rerun byte-identical; reduced replicas of "
                    "5 and 10 byte-identical"
                  : d.str();
  return out;
}

}  // namespace

int main() {
  std::map<int, std::function<Outcome()>> fns = {
      {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4},
      {5, criterion5}, {6, criterion6}, {7, criterion7}, {8, criterion8},
      {9, criterion9}, {10, criterion10}};

  std::map<int, Outcome> results;
  bool all = true;
  for (int i = 1; i <= 10; ++i) {
    Outcome o;
    try {
      o = fns.at(i)();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    results[i] = o;
    all = all && o.pass;
    std::cout << "criterion " << i << ": " << (o.pass ? "PASS" : "FAIL") << " — "
              << o.detail << std::endl;
  }

  Outcome o11;
  try {
    o11 = criterion11(results, fns);
  } catch (const std::exception& e) {
    o11.pass = false;
    o11.detail = std::string("exception: ") + e.what();
  }
  all = all && o11.pass;
  std::cout << "criterion 11: " << (o11.pass ? "PASS" : "FAIL") << " — "
            << o11.detail << std::endl;

  return all ? 0 : 1;
}
