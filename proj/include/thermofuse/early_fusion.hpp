#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "thermofuse/alignment.hpp"
#include "thermofuse/raster.hpp"

namespace thermofuse {

using Vec4 = std::array<double, 4>;
using Mat4 = std::array<Vec4, 4>;

struct SymmetricEigen {
  Vec4 values;   // descending
  Mat4 vectors;  // vectors[k] is the unit eigenvector for values[k]
};

/// Cyclic Jacobi rotations; stops when the off-diagonal Frobenius norm falls
/// below 1e-12 of the full norm.
SymmetricEigen jacobi_eigen(const Mat4& symmetric);

/// Band order R, G, B, TIR.
struct PcaModel {
  Vec4 mean{};
  Vec4 loading{};  // unit norm, loading[3] >= 0
  double explained_variance_ratio = 0.0;
  Vec4 eigenvalues{};

  double score(const Vec4& pixel) const noexcept;
};

/// Streaming covariance of (R, G, B, TIR) pixel vectors over one or more images.
class PcaAccumulator {
 public:
  /// vis: 3 bands, tir: 1 band, same size. Throws BandCountMismatch / DimensionMismatch.
  void add(const Raster& vis, const Raster& tir);
  std::size_t count() const noexcept { return count_; }
  Mat4 covariance() const;
  /// Throws DegenerateCovariance when the covariance is zero.
  PcaModel finish() const;

 private:
  std::size_t count_ = 0;
  Vec4 mean_{};
  Mat4 comoment_{};
};

PcaModel fit_pca4(const Raster& vis, const Raster& tir);
PcaModel fit_pca4(const AlignedPair& pair);

enum class Rescale { Moments, MinMax };

std::string_view to_string(Rescale r);
Rescale rescale_from_string(std::string_view s);

/// Affine map of scores onto the target mean and (population) standard
/// deviation. Throws ZeroVariance when the scores are constant.
std::vector<double> rescale_to_moments(std::span<const double> scores, double target_mean, double target_std);
/// Min-max stretch of scores onto [0,255]. Throws ZeroVariance when constant.
std::vector<double> rescale_to_range(std::span<const double> scores);

struct FusionOptions {
  Rescale rescale = Rescale::Moments;
  bool normalize_tir = true;  // min-max the TIR band to [0,255] before PCA
};

struct FusedImage {
  Raster rgb;
  YCbCrImage ycbcr;  // fused Y with the source Cb, Cr
  PcaModel model;
  std::string pair_id;
  bool luminance_fallback = false;  // PC1 was constant; original Y kept
};

/// Replace VIS luminance by the rescaled first principal component and invert
/// YCbCr. `tir` is used as given (normalise first if needed).
FusedImage fuse_early(const Raster& vis, const Raster& tir, const PcaModel& model,
                      Rescale rescale = Rescale::Moments);

/// Per-pair pipeline: optional TIR normalisation, per-image PCA fit, fusion.
FusedImage fuse_early(const AlignedPair& pair, const FusionOptions& opts = {});
/// Same with an externally fitted (e.g. dataset-global) model.
FusedImage fuse_early(const AlignedPair& pair, const PcaModel& model, const FusionOptions& opts = {});

}  // namespace thermofuse
