#include "isonorm/moments.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <string>

#include "isonorm/errors.hpp"
#include "isonorm/kernels.hpp"

namespace isonorm::moments {

namespace {

constexpr std::size_t kBlock = 256;  // internal accumulation block (rows)

// Chan merge of (count, mean, M2) streams; also used for the C-vector /
// comoment case below with the same weights.
struct ScalarStream {
  double count = 0.0, mean = 0.0, m2 = 0.0;
};

ScalarStream merge_scalar(const ScalarStream& a, const ScalarStream& b) {
  if (a.count == 0.0) return b;
  if (b.count == 0.0) return a;
  ScalarStream out;
  out.count = a.count + b.count;
  const double delta = b.mean - a.mean;
  out.mean = a.mean + delta * (b.count / out.count);
  out.m2 = a.m2 + b.m2 + delta * delta * (a.count * b.count / out.count);
  return out;
}

void merge_into(MomentAccumulator& acc, std::size_t bcount, const Vector& bmean,
                const Matrix& bcomoment, double bgmean, double bgm2) {
  const std::size_t c = acc.channels;
  if (acc.count == 0) {
    acc.count = bcount;
    acc.channel_mean = bmean;
    acc.comoment = bcomoment;
    acc.global_mean = bgmean;
    acc.global_m2 = bgm2;
    return;
  }
  const double n1 = double(acc.count), n2 = double(bcount), n = n1 + n2;
  Vector delta(c);
  for (std::size_t j = 0; j < c; ++j) delta[j] = bmean[j] - acc.channel_mean[j];
  for (std::size_t j = 0; j < c; ++j) acc.channel_mean[j] += delta[j] * (n2 / n);
  const double w = n1 * n2 / n;
  for (std::size_t i = 0; i < c; ++i) {
    const double di = delta[i] * w;
    double* row = acc.comoment[i];
    const double* brow = bcomoment[i];
    for (std::size_t j = 0; j < c; ++j) row[j] += brow[j] + di * delta[j];
  }
  ScalarStream g = merge_scalar({n1 * double(c), acc.global_mean, acc.global_m2},
                                {n2 * double(c), bgmean, bgm2});
  acc.count += bcount;
  acc.global_mean = g.mean;
  acc.global_m2 = g.m2;
}

}  // namespace

MomentAccumulator update(MomentAccumulator acc, const Matrix& batch) {
  if (batch.rows == 0) return acc;
  if (acc.channels == 0 && acc.count == 0) {
    acc = MomentAccumulator(batch.cols);
  }
  if (batch.cols != acc.channels)
    throw ShapeError("update: batch has " + std::to_string(batch.cols) +
                     " channels, accumulator " + std::to_string(acc.channels));
  if (!all_finite(batch)) throw NonFiniteInput("update: batch contains non-finite values");
  const std::size_t c = acc.channels;
  Matrix block(std::min(batch.rows, kBlock), c);
  for (std::size_t n0 = 0; n0 < batch.rows; n0 += kBlock) {
    const std::size_t bn = std::min(kBlock, batch.rows - n0);
    std::memcpy(block.data.data(), batch[n0], bn * c * sizeof(double));
    // two-pass within the block: means, then centered sums
    Vector bmean(c, 0.0);
    for (std::size_t i = 0; i < bn; ++i) {
      const double* row = block[i];
      for (std::size_t j = 0; j < c; ++j) bmean[j] += row[j];
    }
    for (std::size_t j = 0; j < c; ++j) bmean[j] /= double(bn);
    Matrix bco;
    if (bn == block.rows) {
      bco = kernels::centered_gram(block, bmean);
    } else {
      Matrix tail(bn, c);
      std::memcpy(tail.data.data(), block.data.data(), bn * c * sizeof(double));
      bco = kernels::centered_gram(tail, bmean);
    }
    double gsum = 0.0;
    for (std::size_t i = 0; i < bn; ++i) {
      const double* row = block[i];
      for (std::size_t j = 0; j < c; ++j) gsum += row[j];
    }
    const double gmean = gsum / double(bn * c);
    double gm2 = 0.0;
    for (std::size_t i = 0; i < bn; ++i) {
      const double* row = block[i];
      for (std::size_t j = 0; j < c; ++j) {
        const double d = row[j] - gmean;
        gm2 += d * d;
      }
    }
    merge_into(acc, bn, bmean, bco, gmean, gm2);
  }
  return acc;
}

MomentAccumulator merge(const MomentAccumulator& a, const MomentAccumulator& b) {
  if (a.count == 0) return b;
  if (b.count == 0) return a;
  if (a.channels != b.channels)
    throw ShapeError("merge: accumulators have different channel counts");
  MomentAccumulator out = a;
  merge_into(out, b.count, b.channel_mean, b.comoment, b.global_mean, b.global_m2);
  return out;
}

FinalizedMoments finalize(const MomentAccumulator& acc) {
  if (acc.count < 2)
    throw InsufficientData("finalize: need at least 2 samples, have " +
                           std::to_string(acc.count));
  const std::size_t c = acc.channels;
  FinalizedMoments out;
  out.covariance.mean = acc.channel_mean;
  out.covariance.n_samples = acc.count;
  out.covariance.cov = acc.comoment;
  const double inv = 1.0 / double(acc.count - 1);
  for (double& v : out.covariance.cov.data) v *= inv;
  out.per_channel_sigma.resize(c);
  for (std::size_t j = 0; j < c; ++j)
    out.per_channel_sigma[j] = std::sqrt(std::max(out.covariance.cov(j, j), 0.0));
  out.global_mu = acc.global_mean;
  out.global_sigma =
      std::sqrt(std::max(acc.global_m2, 0.0) / double(acc.count * c - 1));
  return out;
}

FinalizedMoments compute_moments(const Matrix& data) {
  return finalize(update(MomentAccumulator(data.cols), data));
}

namespace {

// One Jacobi rotation over rows p,q of A (symmetric, mirrored afterwards) and
// the corresponding rows of Vᵀ. Row-contiguous, branch-free inner loops.
inline void rotate(Matrix& a, Matrix& vt, std::size_t p, std::size_t q, double apq) {
  const std::size_t n = a.rows;
  const double app = a(p, p), aqq = a(q, q);
  const double theta = (aqq - app) / (2.0 * apq);
  double t;
  if (std::abs(theta) > 1e150) {
    t = 1.0 / (2.0 * theta);
  } else {
    t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
    if (theta < 0.0) t = -t;
  }
  const double c = 1.0 / std::sqrt(t * t + 1.0);
  const double s = t * c;
  const double tau = s / (1.0 + c);
  double* ap = a[p];
  double* aq = a[q];
  for (std::size_t k = 0; k < n; ++k) {
    const double akp = ap[k], akq = aq[k];
    ap[k] = akp - s * (akq + tau * akp);
    aq[k] = akq + s * (akp - tau * akq);
  }
  ap[p] = app - t * apq;
  aq[q] = aqq + t * apq;
  ap[q] = 0.0;
  aq[p] = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    a(k, p) = ap[k];
    a(k, q) = aq[k];
  }
  double* vp = vt[p];
  double* vq = vt[q];
  for (std::size_t k = 0; k < n; ++k) {
    const double vkp = vp[k], vkq = vq[k];
    vp[k] = vkp - s * (vkq + tau * vkp);
    vq[k] = vkq + s * (vkp - tau * vkq);
  }
}

}  // namespace

Eigensystem eigh(const Matrix& sym) {
  const std::size_t n = sym.rows;
  if (n == 0 || sym.cols != n) throw ShapeError("eigh: matrix must be square and nonempty");
  if (!all_finite(sym)) throw NonFiniteInput("eigh: matrix contains non-finite values");
  const double scale = max_abs(sym);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(sym(i, j) - sym(j, i)) > 1e-8 * std::max(1.0, scale))
        throw ShapeError("eigh: matrix is not symmetric within tolerance");

  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = 0.5 * (sym(i, j) + sym(j, i));
  Matrix vt = Matrix::identity(n);

  double trace = 0.0;
  for (std::size_t i = 0; i < n; ++i) trace += a(i, i);
  double stop = 1e-12 * trace;
  if (!(stop > 0.0)) stop = 1e-12 * scale;

  constexpr int kMaxSweeps = 64;
  bool converged = false;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double off_sum = 0.0, off_max = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      const double* row = a[p];
      for (std::size_t q = p + 1; q < n; ++q) {
        off_sum += std::abs(row[q]);
        off_max = std::max(off_max, std::abs(row[q]));
      }
    }
    if (off_max <= stop) {
      converged = true;
      break;
    }
    // First sweeps only rotate significant entries (classic threshold
    // strategy); later sweeps zero out entries that can no longer move
    // their diagonal neighbours.
    const double tresh = (sweep < 3) ? 0.2 * off_sum / double(n * n) : 0.0;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        const double g = 100.0 * std::abs(apq);
        if (sweep > 3 && std::abs(a(p, p)) + g == std::abs(a(p, p)) &&
            std::abs(a(q, q)) + g == std::abs(a(q, q))) {
          a(p, q) = 0.0;
          a(q, p) = 0.0;
          continue;
        }
        if (std::abs(apq) <= tresh || apq == 0.0) continue;
        rotate(a, vt, p, q, apq);
      }
    }
  }
  if (!converged)
    throw EigenFailure("eigh: no convergence after " + std::to_string(kMaxSweeps) +
                       " sweeps");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });

  Eigensystem out;
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t src = order[j];
    out.values[j] = std::max(a(src, src), 0.0);
    const double* v = vt[src];
    std::size_t arg = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
    const double sign = (v[arg] < 0.0) ? -1.0 : 1.0;
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = sign * v[i];
  }
  return out;
}

Eigensystem eigh(const CovarianceEstimate& cov) { return eigh(cov.cov); }

}  // namespace isonorm::moments
