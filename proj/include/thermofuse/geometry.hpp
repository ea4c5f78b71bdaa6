#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

namespace thermofuse {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

/// Axis-aligned box in continuous pixel coordinates. Area has no +1 pixel term.
struct BBox {
  double xmin = 0.0;
  double ymin = 0.0;
  double xmax = 0.0;
  double ymax = 0.0;

  double width() const noexcept { return xmax - xmin; }
  double height() const noexcept { return ymax - ymin; }
  double area() const noexcept { return width() * height(); }
  Point2 center() const noexcept { return {(xmin + xmax) / 2.0, (ymin + ymax) / 2.0}; }
  bool valid() const noexcept;

  friend bool operator==(const BBox&, const BBox&) = default;
};

/// Throws InvalidArgument unless xmin < xmax, ymin < ymax and all finite.
BBox make_bbox(double xmin, double ymin, double xmax, double ymax);

double intersection_area(const BBox& a, const BBox& b) noexcept;
double iou(const BBox& a, const BBox& b) noexcept;

/// Clip to [0,w]x[0,h]. Returns an empty (invalid) box when nothing remains.
BBox clip_bbox(const BBox& b, double w, double h) noexcept;

/// (x, y) -> (a*x + b*y + tx, c*x + d*y + ty)
struct AffineTransform {
  double a = 1.0;
  double b = 0.0;
  double c = 0.0;
  double d = 1.0;
  double tx = 0.0;
  double ty = 0.0;

  static AffineTransform identity() noexcept { return {}; }
  static AffineTransform scale(double s) noexcept { return {s, 0.0, 0.0, s, 0.0, 0.0}; }
  static AffineTransform translation(double x, double y) noexcept { return {1.0, 0.0, 0.0, 1.0, x, y}; }

  double determinant() const noexcept { return a * d - b * c; }
  std::array<double, 6> params() const noexcept { return {a, b, c, d, tx, ty}; }

  friend bool operator==(const AffineTransform&, const AffineTransform&) = default;
};

inline constexpr double kSingularTolerance = 1e-12;

Point2 apply(const AffineTransform& t, const Point2& p) noexcept;

/// Throws SingularTransform when |det| <= 1e-12.
AffineTransform invert(const AffineTransform& t);

/// outer(inner(p)).
AffineTransform compose(const AffineTransform& outer, const AffineTransform& inner) noexcept;

/// Axis-aligned hull of the four transformed corners.
BBox warp_bbox(const AffineTransform& t, const BBox& b);

struct KeypointMatch {
  Point2 src;  // VIS frame
  Point2 dst;  // TIR frame
  double confidence = 1.0;
};

/// Ordinary least squares over the six affine parameters.
/// Throws DegenerateConfiguration for fewer than 3 matches or collinear sources.
AffineTransform estimate_affine_lsq(std::span<const KeypointMatch> matches);

double squared_residual(const AffineTransform& t, const KeypointMatch& m) noexcept;

/// Keypoint-match text: `x_vis y_vis x_tir y_tir [confidence]` per line, `#` comments.
std::vector<KeypointMatch> parse_matches(std::string_view text);
std::vector<KeypointMatch> read_matches_file(const std::string& path);

std::ostream& operator<<(std::ostream& os, const Point2& p);
std::ostream& operator<<(std::ostream& os, const BBox& b);
std::ostream& operator<<(std::ostream& os, const AffineTransform& t);

}  // namespace thermofuse
