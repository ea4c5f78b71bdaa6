#include "thermofuse/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>

#include "thermofuse/error.hpp"

namespace thermofuse {

bool BBox::valid() const noexcept {
  return std::isfinite(xmin) && std::isfinite(ymin) && std::isfinite(xmax) && std::isfinite(ymax) &&
         xmin < xmax && ymin < ymax;
}

BBox make_bbox(double xmin, double ymin, double xmax, double ymax) {
  BBox b{xmin, ymin, xmax, ymax};
  if (!b.valid()) {
    std::ostringstream os;
    os << "invalid box " << b;
    throw Error(ErrorCode::InvalidArgument, os.str());
  }
  return b;
}

double intersection_area(const BBox& a, const BBox& b) noexcept {
  const double w = std::min(a.xmax, b.xmax) - std::max(a.xmin, b.xmin);
  const double h = std::min(a.ymax, b.ymax) - std::max(a.ymin, b.ymin);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

double iou(const BBox& a, const BBox& b) noexcept {
  const double inter = intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

BBox clip_bbox(const BBox& b, double w, double h) noexcept {
  return {std::clamp(b.xmin, 0.0, w), std::clamp(b.ymin, 0.0, h), std::clamp(b.xmax, 0.0, w),
          std::clamp(b.ymax, 0.0, h)};
}

Point2 apply(const AffineTransform& t, const Point2& p) noexcept {
  return {t.a * p.x + t.b * p.y + t.tx, t.c * p.x + t.d * p.y + t.ty};
}

AffineTransform invert(const AffineTransform& t) {
  const double det = t.determinant();
  if (!(std::abs(det) > kSingularTolerance)) {
    std::ostringstream os;
    os << "determinant " << det << " of " << t;
    throw Error(ErrorCode::SingularTransform, os.str());
  }
  const double ia = t.d / det;
  const double ib = -t.b / det;
  const double ic = -t.c / det;
  const double id = t.a / det;
  return {ia, ib, ic, id, -(ia * t.tx + ib * t.ty), -(ic * t.tx + id * t.ty)};
}

AffineTransform compose(const AffineTransform& outer, const AffineTransform& inner) noexcept {
  return {outer.a * inner.a + outer.b * inner.c,
          outer.a * inner.b + outer.b * inner.d,
          outer.c * inner.a + outer.d * inner.c,
          outer.c * inner.b + outer.d * inner.d,
          outer.a * inner.tx + outer.b * inner.ty + outer.tx,
          outer.c * inner.tx + outer.d * inner.ty + outer.ty};
}

BBox warp_bbox(const AffineTransform& t, const BBox& b) {
  if (!(std::abs(t.determinant()) > kSingularTolerance)) {
    throw Error(ErrorCode::SingularTransform, "cannot warp a box through a singular transform");
  }
  const std::array<Point2, 4> corners{{{b.xmin, b.ymin}, {b.xmax, b.ymin}, {b.xmax, b.ymax}, {b.xmin, b.ymax}}};
  BBox out{INFINITY, INFINITY, -INFINITY, -INFINITY};
  for (const auto& c : corners) {
    const Point2 p = apply(t, c);
    out.xmin = std::min(out.xmin, p.x);
    out.ymin = std::min(out.ymin, p.y);
    out.xmax = std::max(out.xmax, p.x);
    out.ymax = std::max(out.ymax, p.y);
  }
  return out;
}

namespace {

// Gaussian elimination with partial pivoting on a 3x3 system with two
// right-hand sides. Returns false when a pivot falls below `tol`.
bool solve3x2(std::array<std::array<double, 5>, 3> m, double tol, std::array<double, 3>& x0,
              std::array<double, 3>& x1) {
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r) {
      if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
    }
    if (!(std::abs(m[piv][col]) > tol)) return false;
    std::swap(m[piv], m[col]);
    for (int r = col + 1; r < 3; ++r) {
      const double f = m[r][col] / m[col][col];
      for (int k = col; k < 5; ++k) m[r][k] -= f * m[col][k];
    }
  }
  for (int r = 2; r >= 0; --r) {
    double s0 = m[r][3];
    double s1 = m[r][4];
    for (int k = r + 1; k < 3; ++k) {
      s0 -= m[r][k] * x0[k];
      s1 -= m[r][k] * x1[k];
    }
    x0[r] = s0 / m[r][r];
    x1[r] = s1 / m[r][r];
  }
  return true;
}

}  // namespace

AffineTransform estimate_affine_lsq(std::span<const KeypointMatch> matches) {
  const std::size_t n = matches.size();
  if (n < 3) {
    throw Error(ErrorCode::DegenerateConfiguration,
                "affine fit needs at least 3 matches, got " + std::to_string(n));
  }

  // Condition the design: centre the sources and scale them to unit RMS radius per axis.
  double cx = 0.0;
  double cy = 0.0;
  for (const auto& m : matches) {
    cx += m.src.x;
    cy += m.src.y;
  }
  cx /= static_cast<double>(n);
  cy /= static_cast<double>(n);
  double spread = 0.0;
  for (const auto& m : matches) {
    spread += (m.src.x - cx) * (m.src.x - cx) + (m.src.y - cy) * (m.src.y - cy);
  }
  spread = std::sqrt(spread / (2.0 * static_cast<double>(n)));
  if (!(spread > 0.0) || !std::isfinite(spread)) {
    throw Error(ErrorCode::DegenerateConfiguration, "all source keypoints coincide");
  }
  const double s = 1.0 / spread;

  // Both output coordinates share the normal matrix of the design [u v 1].
  std::array<std::array<double, 5>, 3> sys{};
  for (const auto& m : matches) {
    const std::array<double, 3> row{s * (m.src.x - cx), s * (m.src.y - cy), 1.0};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) sys[i][j] += row[i] * row[j];
      sys[i][3] += row[i] * m.dst.x;
      sys[i][4] += row[i] * m.dst.y;
    }
  }

  std::array<double, 3> px{};
  std::array<double, 3> py{};
  if (!solve3x2(sys, kSingularTolerance * static_cast<double>(n), px, py)) {
    throw Error(ErrorCode::DegenerateConfiguration, "source keypoints are collinear");
  }

  AffineTransform t;
  t.a = px[0] * s;
  t.b = px[1] * s;
  t.tx = px[2] - s * (px[0] * cx + px[1] * cy);
  t.c = py[0] * s;
  t.d = py[1] * s;
  t.ty = py[2] - s * (py[0] * cx + py[1] * cy);
  return t;
}

double squared_residual(const AffineTransform& t, const KeypointMatch& m) noexcept {
  const Point2 p = apply(t, m.src);
  const double dx = p.x - m.dst.x;
  const double dy = p.y - m.dst.y;
  return dx * dx + dy * dy;
}

std::vector<KeypointMatch> parse_matches(std::string_view text) {
  std::vector<KeypointMatch> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::vector<double> values;
    std::string tok;
    while (fields >> tok) {
      try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size() || !std::isfinite(v)) throw std::invalid_argument(tok);
        values.push_back(v);
      } catch (const std::exception&) {
        throw Error(ErrorCode::MalformedLine, "not a number: '" + tok + "'", line_no);
      }
    }
    if (values.empty()) continue;
    if (values.size() != 4 && values.size() != 5) {
      throw Error(ErrorCode::MalformedLine,
                  "expected 4 or 5 fields, got " + std::to_string(values.size()), line_no);
    }
    KeypointMatch m{{values[0], values[1]}, {values[2], values[3]}, 1.0};
    if (values.size() == 5) {
      if (values[4] < 0.0 || values[4] > 1.0) {
        throw Error(ErrorCode::MalformedLine, "confidence outside [0,1]", line_no);
      }
      m.confidence = values[4];
    }
    out.push_back(m);
  }
  return out;
}

std::vector<KeypointMatch> read_matches_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open match file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_matches(buf.str());
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.detail(), e.line());
  }
}

std::ostream& operator<<(std::ostream& os, const Point2& p) {
  return os << '(' << p.x << ", " << p.y << ')';
}

std::ostream& operator<<(std::ostream& os, const BBox& b) {
  return os << '(' << b.xmin << ", " << b.ymin << ", " << b.xmax << ", " << b.ymax << ')';
}

std::ostream& operator<<(std::ostream& os, const AffineTransform& t) {
  return os << "affine(" << t.a << ", " << t.b << ", " << t.c << ", " << t.d << ", " << t.tx << ", "
            << t.ty << ')';
}

}  // namespace thermofuse
