#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "thermofuse/geometry.hpp"
#include "thermofuse/raster.hpp"

namespace thermofuse {

// Common output canvas: TIR frame upsampled by 1792 / 640.
inline constexpr int kCanvasWidth = 1792;
inline constexpr int kCanvasHeight = 1433;
inline constexpr double kCanvasScale = 1792.0 / 640.0;

inline constexpr int kVisSensorWidth = 4056;
inline constexpr int kVisSensorHeight = 3040;
inline constexpr int kTirSensorWidth = 640;
inline constexpr int kTirSensorHeight = 512;
inline constexpr double kVisCropFraction = 0.6;

struct GateConfig {
  int min_keypoints = 46;               // accept requires n_matches >= this
  double max_mean_sq_residual = 68.0;   // px^2, accept requires <= this
  int robust_iterations = 2000;
  double robust_inlier_px = 3.0;
  std::uint64_t seed = 0;

  /// Throws ConfigError on non-positive thresholds or iterations.
  void validate() const;
};

struct ResidualStats {
  std::size_t n_matches = 0;
  std::size_t n_inliers = 0;
  double mean_sq_residual = 0.0;  // mean over inliers of squared Euclidean distance
};

enum class RejectReason { TooFewKeypoints, ResidualTooHigh, DegenerateGeometry };

std::string_view to_string(RejectReason reason);
std::optional<RejectReason> reject_reason_from_string(std::string_view s);

struct AlignmentOutcome {
  std::optional<RejectReason> rejection;  // empty when accepted
  std::optional<AffineTransform> fitted;  // VIS (cropped frame) -> TIR, when a fit exists
  ResidualStats stats;

  bool accepted() const noexcept { return !rejection.has_value(); }
  /// The fitted transform; throws InvalidArgument when the pair was rejected.
  const AffineTransform& transform() const;
};

/// The two quality gates applied to already-computed statistics.
std::optional<RejectReason> apply_gates(const ResidualStats& stats, const GateConfig& cfg) noexcept;

/// Consensus sampling over minimal 3-match hypotheses, LSQ refit on the inlier
/// set (repeated until the set is stable), then the gates. The sampling stream
/// is seeded from (cfg.seed, pair_id).
AlignmentOutcome fit_alignment(std::span<const KeypointMatch> matches, const GateConfig& cfg,
                               std::string_view pair_id = {});

struct PairProvenance {
  std::string pair_id;
  std::string vis_source;
  std::string tir_source;
  AffineTransform transform;  // VIS crop -> TIR
};

struct AlignedPair {
  Raster vis;  // 3 bands, canvas size
  Raster tir;  // 1 band, canvas size
  double canvas_scale = kCanvasScale;
  PairProvenance provenance;

  /// Throws DimensionMismatch unless both rasters match the canvas.
  void validate() const;
};

struct AlignOptions {
  double crop_fraction = kVisCropFraction;
  // When false, inputs that deviate from the sensor dimensions only log a warning.
  bool strict_sensor_dims = false;
  std::string pair_id;
  std::string vis_source;
  std::string tir_source;
};

struct AlignResult {
  AlignmentOutcome outcome;
  std::optional<AlignedPair> pair;  // present iff outcome.accepted()
};

/// Warps the VIS image through (canvas scale o fitted affine) and upsamples the
/// TIR image by the canvas scale; both land on the 1792 x 1433 canvas.
/// `matches` are expressed between the centre-cropped VIS frame and the TIR frame.
AlignResult align_pair(const Raster& vis, const Raster& tir, std::span<const KeypointMatch> matches,
                       const GateConfig& cfg, const AlignOptions& opts = {});

/// TIR image corners mapped back into the cropped VIS frame, in the order
/// (0,0), (w,0), (w,h), (0,h).
std::array<Point2, 4> derive_footprint(const AlignmentOutcome& outcome, int tir_width, int tir_height);

}  // namespace thermofuse
