#include "thermofuse/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "thermofuse/error.hpp"
#include "thermofuse/log.hpp"
#include "thermofuse/rng.hpp"

namespace thermofuse {

void GateConfig::validate() const {
  if (min_keypoints <= 0) throw Error(ErrorCode::ConfigError, "alignment.min_keypoints must be > 0");
  if (!(max_mean_sq_residual > 0.0)) {
    throw Error(ErrorCode::ConfigError, "alignment.max_mean_sq_residual must be > 0");
  }
  if (robust_iterations < 1) throw Error(ErrorCode::ConfigError, "alignment.robust_iterations must be >= 1");
  if (!(robust_inlier_px > 0.0)) throw Error(ErrorCode::ConfigError, "alignment.robust_inlier_px must be > 0");
}

std::string_view to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::TooFewKeypoints: return "TooFewKeypoints";
    case RejectReason::ResidualTooHigh: return "ResidualTooHigh";
    case RejectReason::DegenerateGeometry: return "DegenerateGeometry";
  }
  return "Unknown";
}

std::optional<RejectReason> reject_reason_from_string(std::string_view s) {
  for (auto r : {RejectReason::TooFewKeypoints, RejectReason::ResidualTooHigh, RejectReason::DegenerateGeometry}) {
    if (to_string(r) == s) return r;
  }
  return std::nullopt;
}

const AffineTransform& AlignmentOutcome::transform() const {
  if (!accepted() || !fitted) throw Error(ErrorCode::InvalidArgument, "alignment was rejected");
  return *fitted;
}

std::optional<RejectReason> apply_gates(const ResidualStats& stats, const GateConfig& cfg) noexcept {
  if (stats.n_matches < static_cast<std::size_t>(cfg.min_keypoints)) return RejectReason::TooFewKeypoints;
  if (stats.mean_sq_residual > cfg.max_mean_sq_residual) return RejectReason::ResidualTooHigh;
  return std::nullopt;
}

namespace {

struct Consensus {
  std::vector<std::size_t> inliers;
  double sse = 0.0;
};

Consensus score(const AffineTransform& t, std::span<const KeypointMatch> matches, double thr_sq) {
  Consensus c;
  for (std::size_t i = 0; i < matches.size(); ++i) {
    const double r = squared_residual(t, matches[i]);
    if (r <= thr_sq) {
      c.inliers.push_back(i);
      c.sse += r;
    }
  }
  return c;
}

bool better(const Consensus& a, const Consensus& b) {
  if (a.inliers.size() != b.inliers.size()) return a.inliers.size() > b.inliers.size();
  return a.sse < b.sse;
}

bool nearly_collinear(const Point2& p, const Point2& q, const Point2& r) {
  const double ux = q.x - p.x;
  const double uy = q.y - p.y;
  const double vx = r.x - p.x;
  const double vy = r.y - p.y;
  const double cross = ux * vy - uy * vx;
  const double scale = (ux * ux + uy * uy) + (vx * vx + vy * vy);
  return !(std::abs(cross) > 1e-9 * scale);
}

std::vector<KeypointMatch> subset(std::span<const KeypointMatch> matches, const std::vector<std::size_t>& idx) {
  std::vector<KeypointMatch> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(matches[i]);
  return out;
}

}  // namespace

AlignmentOutcome fit_alignment(std::span<const KeypointMatch> matches, const GateConfig& cfg,
                               std::string_view pair_id) {
  cfg.validate();
  AlignmentOutcome out;
  out.stats.n_matches = matches.size();

  const auto reject = [&](RejectReason fallback) {
    // The keypoint-count gate takes precedence over any fitting failure.
    out.rejection = apply_gates(out.stats, cfg) == RejectReason::TooFewKeypoints ? RejectReason::TooFewKeypoints
                                                                                   : fallback;
    return out;
  };

  if (matches.size() < 3) return reject(RejectReason::DegenerateGeometry);

  const double thr_sq = cfg.robust_inlier_px * cfg.robust_inlier_px;
  Rng rng(derive_seed(cfg.seed, "align", fnv1a64(pair_id)));
  const std::uint64_t n = matches.size();

  std::optional<Consensus> best;
  for (int it = 0; it < cfg.robust_iterations; ++it) {
    std::size_t i = 0;
    std::size_t j = 1;
    std::size_t k = 2;
    if (n > 3) {
      i = rng.below(n);
      do { j = rng.below(n); } while (j == i);
      do { k = rng.below(n); } while (k == i || k == j);
    }
    if (nearly_collinear(matches[i].src, matches[j].src, matches[k].src)) continue;
    const std::array<KeypointMatch, 3> sample{matches[i], matches[j], matches[k]};
    AffineTransform hyp;
    try {
      hyp = estimate_affine_lsq(sample);
    } catch (const Error&) {
      continue;
    }
    Consensus c = score(hyp, matches, thr_sq);
    if (!best || better(c, *best)) best = std::move(c);
    if (n == 3) break;
  }
  if (!best || best->inliers.size() < 3) return reject(RejectReason::DegenerateGeometry);

  std::vector<std::size_t> inliers = best->inliers;
  AffineTransform fit;
  for (int round = 0;; ++round) {
    try {
      fit = estimate_affine_lsq(subset(matches, inliers));
    } catch (const Error&) {
      return reject(RejectReason::DegenerateGeometry);
    }
    if (round == 20) break;
    Consensus refit = score(fit, matches, thr_sq);
    if (refit.inliers == inliers || refit.inliers.size() < 3) break;
    inliers = std::move(refit.inliers);
  }

  double sse = 0.0;
  for (auto idx : inliers) sse += squared_residual(fit, matches[idx]);
  out.fitted = fit;
  out.stats.n_inliers = inliers.size();
  out.stats.mean_sq_residual = sse / static_cast<double>(inliers.size());
  if (!(std::abs(fit.determinant()) > kSingularTolerance)) return reject(RejectReason::DegenerateGeometry);
  out.rejection = apply_gates(out.stats, cfg);
  return out;
}

void AlignedPair::validate() const {
  const auto on_canvas = [](const Raster& r) {
    return r.width() == kCanvasWidth && r.height() == kCanvasHeight;
  };
  if (!on_canvas(vis) || !on_canvas(tir) || vis.bands() != 3 || tir.bands() != 1) {
    throw Error(ErrorCode::DimensionMismatch, "aligned pair must be 3+1 bands on a 1792x1433 canvas");
  }
}

AlignResult align_pair(const Raster& vis, const Raster& tir, std::span<const KeypointMatch> matches,
                       const GateConfig& cfg, const AlignOptions& opts) {
  if (vis.bands() != 3) throw Error(ErrorCode::BandCountMismatch, "VIS raster must have 3 bands");
  if (tir.bands() != 1) throw Error(ErrorCode::BandCountMismatch, "TIR raster must have 1 band");
  const bool vis_ok = vis.width() == kVisSensorWidth && vis.height() == kVisSensorHeight;
  const bool tir_ok = tir.width() == kTirSensorWidth && tir.height() == kTirSensorHeight;
  if (!vis_ok || !tir_ok) {
    const std::string msg = "pair '" + opts.pair_id + "': sensor dimensions VIS " + std::to_string(vis.width()) +
                            "x" + std::to_string(vis.height()) + ", TIR " + std::to_string(tir.width()) + "x" +
                            std::to_string(tir.height()) + " differ from 4056x3040 / 640x512";
    if (opts.strict_sensor_dims) throw Error(ErrorCode::DimensionMismatch, msg);
    log::warn(msg);
  }

  AlignResult result;
  result.outcome = fit_alignment(matches, cfg, opts.pair_id);
  if (!result.outcome.accepted()) return result;

  const AffineTransform& vis_to_tir = result.outcome.transform();
  const CropWindow window = center_crop_window(vis.width(), vis.height(), opts.crop_fraction);
  const AffineTransform canvas_to_tir = AffineTransform::scale(1.0 / kCanvasScale);
  const AffineTransform canvas_to_vis =
      compose(AffineTransform::translation(window.x0, window.y0), compose(invert(vis_to_tir), canvas_to_tir));

  AlignedPair pair;
  pair.vis = warp_affine(vis, canvas_to_vis, kCanvasWidth, kCanvasHeight);
  pair.tir = warp_affine(tir, canvas_to_tir, kCanvasWidth, kCanvasHeight);
  pair.canvas_scale = kCanvasScale;
  pair.provenance = {opts.pair_id, opts.vis_source, opts.tir_source, vis_to_tir};
  result.pair = std::move(pair);
  return result;
}

std::array<Point2, 4> derive_footprint(const AlignmentOutcome& outcome, int tir_width, int tir_height) {
  const AffineTransform inv = invert(outcome.transform());
  const double w = tir_width;
  const double h = tir_height;
  return {apply(inv, {0.0, 0.0}), apply(inv, {w, 0.0}), apply(inv, {w, h}), apply(inv, {0.0, h})};
}

}  // namespace thermofuse
