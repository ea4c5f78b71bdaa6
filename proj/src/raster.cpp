#include "thermofuse/raster.hpp"

#include <algorithm>
#include <cmath>

#include "thermofuse/error.hpp"

namespace thermofuse {

namespace {

void check_dims(int width, int height, int bands) {
  if (width <= 0 || height <= 0 || bands <= 0) {
    throw Error(ErrorCode::InvalidArgument, "raster dimensions must be positive, got " +
                                                std::to_string(width) + "x" + std::to_string(height) +
                                                "x" + std::to_string(bands));
  }
}

}  // namespace

Raster::Raster(int width, int height, int bands, double fill)
    : width_(width), height_(height), bands_(bands) {
  check_dims(width, height, bands);
  if (!std::isfinite(fill)) throw Error(ErrorCode::InvalidArgument, "non-finite fill value");
  samples_.assign(pixel_count() * static_cast<std::size_t>(bands), fill);
}

Raster::Raster(int width, int height, int bands, std::vector<double> samples)
    : width_(width), height_(height), bands_(bands), samples_(std::move(samples)) {
  check_dims(width, height, bands);
  if (samples_.size() != pixel_count() * static_cast<std::size_t>(bands)) {
    throw Error(ErrorCode::InvalidArgument, "sample count does not match raster dimensions");
  }
  if (!std::all_of(samples_.begin(), samples_.end(), [](double v) { return std::isfinite(v); })) {
    throw Error(ErrorCode::InvalidArgument, "raster contains non-finite samples");
  }
}

Raster Raster::extract_band(int b) const {
  if (b < 0 || b >= bands_) throw Error(ErrorCode::BandCountMismatch, "band index out of range");
  const auto src = band(b);
  return Raster(width_, height_, 1, std::vector<double>(src.begin(), src.end()));
}

Raster stack_bands(std::span<const Raster> parts) {
  if (parts.empty()) throw Error(ErrorCode::InvalidArgument, "nothing to stack");
  const int w = parts.front().width();
  const int h = parts.front().height();
  int bands = 0;
  std::vector<double> samples;
  for (const auto& p : parts) {
    if (p.width() != w || p.height() != h) {
      throw Error(ErrorCode::DimensionMismatch, "stacked rasters differ in size");
    }
    bands += p.bands();
    samples.insert(samples.end(), p.samples().begin(), p.samples().end());
  }
  return Raster(w, h, bands, std::move(samples));
}

// --- colour -----------------------------------------------------------------

namespace {

using Mat3 = std::array<std::array<double, 3>, 3>;

constexpr Mat3 kRgbToYcc{{{0.299, 0.587, 0.114},
                          {-0.168736, -0.331264, 0.5},
                          {0.5, -0.418688, -0.081312}}};

constexpr Mat3 inverse3(const Mat3& m) {
  const double c00 = m[1][1] * m[2][2] - m[1][2] * m[2][1];
  const double c01 = m[1][2] * m[2][0] - m[1][0] * m[2][2];
  const double c02 = m[1][0] * m[2][1] - m[1][1] * m[2][0];
  const double det = m[0][0] * c00 + m[0][1] * c01 + m[0][2] * c02;
  Mat3 inv{};
  inv[0][0] = c00 / det;
  inv[1][0] = c01 / det;
  inv[2][0] = c02 / det;
  inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
  inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
  inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
  inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
  inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
  inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
  return inv;
}

constexpr Mat3 kYccToRgb = inverse3(kRgbToYcc);

double clamp255(double v) noexcept { return std::clamp(v, 0.0, 255.0); }

}  // namespace

YCbCr rgb_to_ycbcr(const Rgb& px) noexcept {
  const auto& m = kRgbToYcc;
  return {m[0][0] * px.r + m[0][1] * px.g + m[0][2] * px.b,
          m[1][0] * px.r + m[1][1] * px.g + m[1][2] * px.b + 128.0,
          m[2][0] * px.r + m[2][1] * px.g + m[2][2] * px.b + 128.0};
}

Rgb ycbcr_to_rgb(const YCbCr& px) noexcept {
  const auto& m = kYccToRgb;
  const double cb = px.cb - 128.0;
  const double cr = px.cr - 128.0;
  return {m[0][0] * px.y + m[0][1] * cb + m[0][2] * cr,
          m[1][0] * px.y + m[1][1] * cb + m[1][2] * cr,
          m[2][0] * px.y + m[2][1] * cb + m[2][2] * cr};
}

YCbCrImage rgb_to_ycbcr(const Raster& img) {
  if (img.bands() != 3) {
    throw Error(ErrorCode::BandCountMismatch,
                "YCbCr conversion needs 3 bands, got " + std::to_string(img.bands()));
  }
  Raster out(img.width(), img.height(), 3);
  const auto r = img.band(0);
  const auto g = img.band(1);
  const auto b = img.band(2);
  auto y = out.band(0);
  auto cb = out.band(1);
  auto cr = out.band(2);
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    const YCbCr p = rgb_to_ycbcr(Rgb{r[i], g[i], b[i]});
    y[i] = clamp255(p.y);
    cb[i] = clamp255(p.cb);
    cr[i] = clamp255(p.cr);
  }
  return {std::move(out)};
}

Raster ycbcr_to_rgb(const YCbCrImage& img) {
  const Raster& in = img.planes;
  if (in.bands() != 3) throw Error(ErrorCode::BandCountMismatch, "YCbCr image needs 3 planes");
  Raster out(in.width(), in.height(), 3);
  const auto y = in.band(0);
  const auto cb = in.band(1);
  const auto cr = in.band(2);
  auto r = out.band(0);
  auto g = out.band(1);
  auto b = out.band(2);
  for (std::size_t i = 0; i < in.pixel_count(); ++i) {
    const Rgb p = ycbcr_to_rgb(YCbCr{y[i], cb[i], cr[i]});
    r[i] = clamp255(p.r);
    g[i] = clamp255(p.g);
    b[i] = clamp255(p.b);
  }
  return out;
}

// --- geometry ---------------------------------------------------------------

CropWindow center_crop_window(int width, int height, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "crop fraction must lie in (0,1]");
  }
  // The epsilon keeps exact products such as 0.6 * 3040 from flooring one short.
  const int out_w = static_cast<int>(std::floor(fraction * width + 1e-9));
  const int out_h = static_cast<int>(std::floor(fraction * height + 1e-9));
  if (out_w <= 0 || out_h <= 0) {
    throw Error(ErrorCode::EmptyCrop, "crop of " + std::to_string(width) + "x" + std::to_string(height) +
                                          " at " + std::to_string(fraction) + " is empty");
  }
  return {(width - out_w) / 2, (height - out_h) / 2, out_w, out_h};
}

Raster crop(const Raster& img, const CropWindow& w) {
  if (w.x0 < 0 || w.y0 < 0 || w.width <= 0 || w.height <= 0 || w.x0 + w.width > img.width() ||
      w.y0 + w.height > img.height()) {
    throw Error(ErrorCode::InvalidArgument, "crop window outside raster");
  }
  Raster out(w.width, w.height, img.bands());
  for (int b = 0; b < img.bands(); ++b) {
    for (int r = 0; r < w.height; ++r) {
      for (int c = 0; c < w.width; ++c) out.at(b, r, c) = img.at(b, r + w.y0, c + w.x0);
    }
  }
  return out;
}

Raster center_crop(const Raster& img, double fraction) {
  return crop(img, center_crop_window(img.width(), img.height(), fraction));
}

double sample_bilinear(const Raster& img, int band, double x, double y) noexcept {
  const double fx = std::clamp(x - 0.5, 0.0, static_cast<double>(img.width() - 1));
  const double fy = std::clamp(y - 0.5, 0.0, static_cast<double>(img.height() - 1));
  const int x0 = static_cast<int>(fx);
  const int y0 = static_cast<int>(fy);
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const double wx = fx - x0;
  const double wy = fy - y0;
  const double top = img.at(band, y0, x0) * (1.0 - wx) + img.at(band, y0, x1) * wx;
  const double bottom = img.at(band, y1, x0) * (1.0 - wx) + img.at(band, y1, x1) * wx;
  return top * (1.0 - wy) + bottom * wy;
}

Raster warp_affine(const Raster& img, const AffineTransform& dst_to_src, int out_w, int out_h) {
  Raster out(out_w, out_h, img.bands());
  for (int r = 0; r < out_h; ++r) {
    for (int c = 0; c < out_w; ++c) {
      const Point2 src = apply(dst_to_src, {c + 0.5, r + 0.5});
      for (int b = 0; b < img.bands(); ++b) out.at(b, r, c) = sample_bilinear(img, b, src.x, src.y);
    }
  }
  return out;
}

Raster resample_bilinear(const Raster& img, int out_w, int out_h) {
  if (out_w <= 0 || out_h <= 0) throw Error(ErrorCode::InvalidArgument, "output size must be positive");
  const AffineTransform to_src{static_cast<double>(img.width()) / out_w, 0.0, 0.0,
                               static_cast<double>(img.height()) / out_h, 0.0, 0.0};
  return warp_affine(img, to_src, out_w, out_h);
}

Raster normalize_minmax(const Raster& band) {
  if (band.bands() != 1) {
    throw Error(ErrorCode::BandCountMismatch, "min-max normalisation expects a single band");
  }
  const auto values = band.band(0);
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  Raster out(band.width(), band.height(), 1);
  if (!(hi > lo)) return out;
  const double scale = 255.0 / (hi - lo);
  auto dst = out.band(0);
  for (std::size_t i = 0; i < values.size(); ++i) dst[i] = (values[i] - lo) * scale;
  return out;
}

}  // namespace thermofuse
