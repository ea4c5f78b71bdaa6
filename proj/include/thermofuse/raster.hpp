#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "thermofuse/geometry.hpp"

namespace thermofuse {

/// Multi-band image with band-major storage: sample(b, row, col).
class Raster {
 public:
  Raster() = default;
  /// Throws InvalidArgument on non-positive dimensions.
  Raster(int width, int height, int bands, double fill = 0.0);
  /// Takes ownership of samples; validates length and finiteness.
  Raster(int width, int height, int bands, std::vector<double> samples);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int bands() const noexcept { return bands_; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }
  bool empty() const noexcept { return samples_.empty(); }

  double& at(int band, int row, int col) noexcept { return samples_[index(band, row, col)]; }
  double at(int band, int row, int col) const noexcept { return samples_[index(band, row, col)]; }

  std::span<double> band(int b) noexcept { return {samples_.data() + b * pixel_count(), pixel_count()}; }
  std::span<const double> band(int b) const noexcept {
    return {samples_.data() + b * pixel_count(), pixel_count()};
  }
  std::span<const double> samples() const noexcept { return samples_; }

  /// Copy of a single band as a 1-band raster.
  Raster extract_band(int b) const;

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  std::size_t index(int band, int row, int col) const noexcept {
    return (static_cast<std::size_t>(band) * height_ + static_cast<std::size_t>(row)) * width_ +
           static_cast<std::size_t>(col);
  }

  int width_ = 0;
  int height_ = 0;
  int bands_ = 0;
  std::vector<double> samples_;
};

/// Stack rasters of identical dimensions band-wise.
Raster stack_bands(std::span<const Raster> parts);

// Full-range BT.601 (JPEG) colour transform.
struct YCbCr {
  double y = 0.0;
  double cb = 0.0;
  double cr = 0.0;
};
struct Rgb {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;
};

/// Unclamped forward transform of one pixel.
YCbCr rgb_to_ycbcr(const Rgb& px) noexcept;
/// Unclamped exact inverse of rgb_to_ycbcr(const Rgb&).
Rgb ycbcr_to_rgb(const YCbCr& px) noexcept;

/// Y, Cb, Cr planes (bands 0, 1, 2), clamped to [0,255].
struct YCbCrImage {
  Raster planes;

  int width() const noexcept { return planes.width(); }
  int height() const noexcept { return planes.height(); }
  std::span<const double> y() const noexcept { return planes.band(0); }
  std::span<const double> cb() const noexcept { return planes.band(1); }
  std::span<const double> cr() const noexcept { return planes.band(2); }
};

/// Throws BandCountMismatch unless img has 3 bands.
YCbCrImage rgb_to_ycbcr(const Raster& img);
Raster ycbcr_to_rgb(const YCbCrImage& img);

struct CropWindow {
  int x0 = 0;
  int y0 = 0;
  int width = 0;
  int height = 0;
};

/// floor(fraction * dim) window centred at floor((dim - out) / 2).
/// Throws InvalidArgument for fraction outside (0,1], EmptyCrop for zero output.
CropWindow center_crop_window(int width, int height, double fraction);
Raster center_crop(const Raster& img, double fraction);
Raster crop(const Raster& img, const CropWindow& window);

/// Bilinear sample at continuous coordinates (pixel centres at i + 0.5),
/// clamped to the edge outside the source.
double sample_bilinear(const Raster& img, int band, double x, double y) noexcept;

/// Uniform bilinear rescale to out_w x out_h.
Raster resample_bilinear(const Raster& img, int out_w, int out_h);

/// Render img into an out_w x out_h frame; `dst_to_src` maps output
/// coordinates to source coordinates.
Raster warp_affine(const Raster& img, const AffineTransform& dst_to_src, int out_w, int out_h);

/// Affine map of [min,max] onto [0,255]; constant input maps to zeros.
/// Throws BandCountMismatch unless the raster has one band.
Raster normalize_minmax(const Raster& band);

/// PNG (8/16-bit, 1 or 3 channels) or TIFF (single band, integer or float).
/// RGB order on return. Throws IoError.
Raster read_raster(const std::string& path);
/// .png: rounded and clamped to 8 bit. .tif/.tiff: 32-bit float, single band.
void write_raster(const std::string& path, const Raster& img);

}  // namespace thermofuse
