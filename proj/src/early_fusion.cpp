#include "thermofuse/early_fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "thermofuse/error.hpp"
#include "thermofuse/log.hpp"

namespace thermofuse {

SymmetricEigen jacobi_eigen(const Mat4& symmetric) {
  Mat4 a = symmetric;
  Mat4 v{};
  for (int i = 0; i < 4; ++i) v[i][i] = 1.0;

  const auto norms = [&a]() {
    double off = 0.0;
    double all = 0.0;
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        all += a[i][j] * a[i][j];
        if (i != j) off += a[i][j] * a[i][j];
      }
    }
    return std::pair{std::sqrt(off), std::sqrt(all)};
  };

  for (int sweep = 0; sweep < 100; ++sweep) {
    const auto [off, all] = norms();
    if (off <= 1e-12 * all || all == 0.0) break;
    for (int p = 0; p < 3; ++p) {
      for (int q = p + 1; q < 4; ++q) {
        if (a[p][q] == 0.0) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < 4; ++k) {
          const double akp = a[k][p];
          const double akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (int k = 0; k < 4; ++k) {
          const double apk = a[p][k];
          const double aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (int k = 0; k < 4; ++k) {
          const double vkp = v[k][p];
          const double vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }

  std::array<int, 4> order{0, 1, 2, 3};
  std::stable_sort(order.begin(), order.end(), [&a](int x, int y) { return a[x][x] > a[y][y]; });
  SymmetricEigen out{};
  for (int k = 0; k < 4; ++k) {
    out.values[k] = a[order[k]][order[k]];
    for (int i = 0; i < 4; ++i) out.vectors[k][i] = v[i][order[k]];
  }
  return out;
}

double PcaModel::score(const Vec4& pixel) const noexcept {
  double s = 0.0;
  for (int i = 0; i < 4; ++i) s += loading[i] * (pixel[i] - mean[i]);
  return s;
}

void PcaAccumulator::add(const Raster& vis, const Raster& tir) {
  if (vis.bands() != 3 || tir.bands() != 1) {
    throw Error(ErrorCode::BandCountMismatch, "PCA expects a 3-band VIS and 1-band TIR raster");
  }
  if (vis.width() != tir.width() || vis.height() != tir.height()) {
    throw Error(ErrorCode::DimensionMismatch, "VIS and TIR rasters differ in size");
  }
  const std::array<std::span<const double>, 4> bands{vis.band(0), vis.band(1), vis.band(2), tir.band(0)};
  const std::size_t n = vis.pixel_count();

  // Two passes over this image, then Chan's merge into the running totals.
  Vec4 mean{};
  for (int b = 0; b < 4; ++b) {
    mean[b] = std::accumulate(bands[b].begin(), bands[b].end(), 0.0) / static_cast<double>(n);
  }
  Mat4 m2{};
  for (std::size_t i = 0; i < n; ++i) {
    Vec4 d;
    for (int b = 0; b < 4; ++b) d[b] = bands[b][i] - mean[b];
    for (int r = 0; r < 4; ++r) {
      for (int c = r; c < 4; ++c) m2[r][c] += d[r] * d[c];
    }
  }
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < r; ++c) m2[r][c] = m2[c][r];
  }

  const double na = static_cast<double>(count_);
  const double nb = static_cast<double>(n);
  const double total = na + nb;
  Vec4 delta;
  for (int b = 0; b < 4; ++b) delta[b] = mean[b] - mean_[b];
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) comoment_[r][c] += m2[r][c] + delta[r] * delta[c] * na * nb / total;
  }
  for (int b = 0; b < 4; ++b) mean_[b] += delta[b] * nb / total;
  count_ += n;
}

Mat4 PcaAccumulator::covariance() const {
  Mat4 cov{};
  if (count_ == 0) return cov;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) cov[r][c] = comoment_[r][c] / static_cast<double>(count_);
  }
  return cov;
}

PcaModel PcaAccumulator::finish() const {
  const Mat4 cov = covariance();
  const double trace = cov[0][0] + cov[1][1] + cov[2][2] + cov[3][3];
  if (count_ == 0 || !(trace > 0.0) || !std::isfinite(trace)) {
    throw Error(ErrorCode::DegenerateCovariance, "band covariance is zero; all pixels identical");
  }
  const SymmetricEigen eig = jacobi_eigen(cov);

  PcaModel model;
  model.mean = mean_;
  model.eigenvalues = eig.values;
  model.loading = eig.vectors[0];
  // Sign convention: TIR loading non-negative; if it vanishes, the largest
  // component is made positive instead.
  double pivot = model.loading[3];
  if (std::abs(pivot) < 1e-12) {
    pivot = *std::max_element(model.loading.begin(), model.loading.end(),
                              [](double x, double y) { return std::abs(x) < std::abs(y); });
  }
  if (pivot < 0.0) {
    for (double& l : model.loading) l = -l;
  }
  double positive = 0.0;
  for (double v : eig.values) positive += std::max(v, 0.0);
  model.explained_variance_ratio = std::clamp(std::max(eig.values[0], 0.0) / positive, 0.0, 1.0);
  return model;
}

PcaModel fit_pca4(const Raster& vis, const Raster& tir) {
  PcaAccumulator acc;
  acc.add(vis, tir);
  return acc.finish();
}

PcaModel fit_pca4(const AlignedPair& pair) { return fit_pca4(pair.vis, pair.tir); }

std::string_view to_string(Rescale r) { return r == Rescale::Moments ? "moments" : "minmax"; }

Rescale rescale_from_string(std::string_view s) {
  if (s == "moments") return Rescale::Moments;
  if (s == "minmax") return Rescale::MinMax;
  throw Error(ErrorCode::InvalidArgument, "unknown rescale mode '" + std::string(s) + "'");
}

namespace {

std::pair<double, double> mean_std(std::span<const double> v) {
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / n)};
}

}  // namespace

std::vector<double> rescale_to_moments(std::span<const double> scores, double target_mean, double target_std) {
  if (scores.empty()) throw Error(ErrorCode::InvalidArgument, "no scores to rescale");
  const auto [mean, sd] = mean_std(scores);
  if (!(sd > 0.0)) throw Error(ErrorCode::ZeroVariance, "first principal component is constant");
  std::vector<double> out(scores.size());
  const double gain = target_std / sd;
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = target_mean + (scores[i] - mean) * gain;
  return out;
}

std::vector<double> rescale_to_range(std::span<const double> scores) {
  if (scores.empty()) throw Error(ErrorCode::InvalidArgument, "no scores to rescale");
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  if (!(*hi > *lo)) throw Error(ErrorCode::ZeroVariance, "first principal component is constant");
  std::vector<double> out(scores.size());
  const double gain = 255.0 / (*hi - *lo);
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = (scores[i] - *lo) * gain;
  return out;
}

FusedImage fuse_early(const Raster& vis, const Raster& tir, const PcaModel& model, Rescale rescale) {
  if (vis.bands() != 3 || tir.bands() != 1) {
    throw Error(ErrorCode::BandCountMismatch, "fusion expects a 3-band VIS and 1-band TIR raster");
  }
  if (vis.width() != tir.width() || vis.height() != tir.height()) {
    throw Error(ErrorCode::DimensionMismatch, "VIS and TIR rasters differ in size");
  }
  FusedImage out;
  out.model = model;
  out.ycbcr = rgb_to_ycbcr(vis);

  const std::size_t n = vis.pixel_count();
  const std::array<std::span<const double>, 4> bands{vis.band(0), vis.band(1), vis.band(2), tir.band(0)};
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = model.score({bands[0][i], bands[1][i], bands[2][i], bands[3][i]});
  }

  auto luminance = out.ycbcr.planes.band(0);
  try {
    std::vector<double> fused;
    if (rescale == Rescale::Moments) {
      const auto [y_mean, y_std] = mean_std(luminance);
      fused = rescale_to_moments(scores, y_mean, y_std);
    } else {
      fused = rescale_to_range(scores);
    }
    for (std::size_t i = 0; i < n; ++i) luminance[i] = std::clamp(fused[i], 0.0, 255.0);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ZeroVariance) throw;
    log::warn("PC1 scores are constant; keeping the original luminance");
    out.luminance_fallback = true;
  }
  out.rgb = ycbcr_to_rgb(out.ycbcr);
  return out;
}

namespace {

Raster prepared_tir(const AlignedPair& pair, const FusionOptions& opts) {
  return opts.normalize_tir ? normalize_minmax(pair.tir) : pair.tir;
}

}  // namespace

FusedImage fuse_early(const AlignedPair& pair, const FusionOptions& opts) {
  const Raster tir = prepared_tir(pair, opts);
  FusedImage out = fuse_early(pair.vis, tir, fit_pca4(pair.vis, tir), opts.rescale);
  out.pair_id = pair.provenance.pair_id;
  return out;
}

FusedImage fuse_early(const AlignedPair& pair, const PcaModel& model, const FusionOptions& opts) {
  FusedImage out = fuse_early(pair.vis, prepared_tir(pair, opts), model, opts.rescale);
  out.pair_id = pair.provenance.pair_id;
  return out;
}

}  // namespace thermofuse
