#include "thermofuse/detection.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <tuple>

#include "thermofuse/error.hpp"

namespace thermofuse {

namespace {

constexpr std::array<std::string_view, 3> kVisNames{"occupied_nest", "empty_nest", "isolated_individual"};
constexpr std::array<std::string_view, 1> kTirNames{"heron"};
constexpr std::array<std::string_view, 4> kFusedNames{"occupied_nest", "empty_nest", "isolated_individual",
                                                      "false_positive"};

bool parse_double(std::string_view tok, double& out) {
  // from_chars rejects leading '+', which some writers emit.
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return res.ec == std::errc{} && res.ptr == tok.data() + tok.size() && std::isfinite(out);
}

bool parse_int(std::string_view tok, int& out) {
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return res.ec == std::errc{} && res.ptr == tok.data() + tok.size();
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const std::string& path, const std::string& text) {
  const auto parent = std::filesystem::path(path).parent_path();
  std::error_code ec;
  if (!parent.empty()) std::filesystem::create_directories(parent, ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

bool detection_order(const Detection& a, const Detection& b) {
  return std::tie(a.class_id, a.box.xmin, a.box.ymin, a.score, a.box.xmax, a.box.ymax) <
         std::tie(b.class_id, b.box.xmin, b.box.ymin, b.score, b.box.xmax, b.box.ymax);
}

}  // namespace

int class_count(Taxonomy t) noexcept {
  switch (t) {
    case Taxonomy::Vis: return 3;
    case Taxonomy::Tir: return 1;
    case Taxonomy::Fused: return 4;
  }
  return 0;
}

std::string_view class_name(Taxonomy t, int index) {
  if (index < 0 || index >= class_count(t)) {
    throw Error(ErrorCode::UnknownClassIndex, "class index " + std::to_string(index));
  }
  switch (t) {
    case Taxonomy::Vis: return kVisNames[index];
    case Taxonomy::Tir: return kTirNames[index];
    case Taxonomy::Fused: return kFusedNames[index];
  }
  return {};
}

std::string_view to_string(Taxonomy t) {
  switch (t) {
    case Taxonomy::Vis: return "vis";
    case Taxonomy::Tir: return "tir";
    case Taxonomy::Fused: return "fused";
  }
  return {};
}

Taxonomy taxonomy_from_string(std::string_view s) {
  if (s == "vis") return Taxonomy::Vis;
  if (s == "tir") return Taxonomy::Tir;
  if (s == "fused") return Taxonomy::Fused;
  throw Error(ErrorCode::InvalidArgument, "unknown taxonomy '" + std::string(s) + "'");
}

AnnotationSet parse_detections(std::string_view text, Taxonomy taxonomy, ImageDims dims, AnnotationKind kind,
                               std::string image_id) {
  if (dims.width <= 0 || dims.height <= 0) throw Error(ErrorCode::InvalidArgument, "image dims must be positive");
  AnnotationSet set{std::move(image_id), dims, taxonomy, kind, {}};
  const double w = dims.width;
  const double h = dims.height;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    const auto fields = split_ws(line);
    if (fields.empty()) {
      if (end == text.size()) break;
      continue;
    }
    if (fields.size() != 5 && fields.size() != 6) {
      throw Error(ErrorCode::MalformedLine, "expected 5 or 6 fields, got " + std::to_string(fields.size()), line_no);
    }
    int cls = 0;
    if (!parse_int(fields[0], cls) || cls < 0) {
      throw Error(ErrorCode::MalformedLine, "bad class index '" + std::string(fields[0]) + "'", line_no);
    }
    if (cls >= class_count(taxonomy)) {
      throw Error(ErrorCode::UnknownClassIndex,
                  "class index " + std::to_string(cls) + " not in " + std::string(to_string(taxonomy)) + " taxonomy",
                  line_no);
    }
    std::array<double, 5> v{0.0, 0.0, 0.0, 0.0, 1.0};
    for (std::size_t i = 1; i < fields.size(); ++i) {
      if (!parse_double(fields[i], v[i - 1])) {
        throw Error(ErrorCode::MalformedLine, "not a number: '" + std::string(fields[i]) + "'", line_no);
      }
    }
    const auto [cx, cy, bw, bh, score] = v;
    const auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
    if (!in_unit(cx) || !in_unit(cy) || !in_unit(bw) || !in_unit(bh) || bw <= 0.0 || bh <= 0.0) {
      throw Error(ErrorCode::CoordinateOutOfRange, "normalised geometry must lie in [0,1] with positive size",
                  line_no);
    }
    if (!in_unit(score)) throw Error(ErrorCode::MalformedLine, "score outside [0,1]", line_no);
    const BBox box = clip_bbox({(cx - bw / 2.0) * w, (cy - bh / 2.0) * h, (cx + bw / 2.0) * w, (cy + bh / 2.0) * h},
                               w, h);
    if (!box.valid()) throw Error(ErrorCode::CoordinateOutOfRange, "box vanishes after clamping", line_no);
    set.detections.push_back({box, cls, score});
    if (end == text.size()) break;
  }
  return set;
}

std::string write_detections(const AnnotationSet& set) {
  std::vector<Detection> dets = set.detections;
  std::sort(dets.begin(), dets.end(), detection_order);
  const double w = set.dims.width;
  const double h = set.dims.height;
  std::string out;
  char buf[160];
  for (const auto& d : dets) {
    const Point2 c = d.box.center();
    int len = std::snprintf(buf, sizeof buf, "%d %.10f %.10f %.10f %.10f", d.class_id, c.x / w, c.y / h,
                            d.box.width() / w, d.box.height() / h);
    out.append(buf, static_cast<std::size_t>(len));
    if (set.kind == AnnotationKind::Predicted) {
      len = std::snprintf(buf, sizeof buf, " %.10f", d.score);
      out.append(buf, static_cast<std::size_t>(len));
    }
    out.push_back('\n');
  }
  return out;
}

AnnotationSet read_detections_file(const std::string& path, Taxonomy taxonomy, ImageDims dims, AnnotationKind kind,
                                   std::string image_id) {
  const std::string text = read_text(path);
  try {
    return parse_detections(text, taxonomy, dims, kind, std::move(image_id));
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.detail(), e.line());
  }
}

void write_detections_file(const std::string& path, const AnnotationSet& set) {
  write_text(path, write_detections(set));
}

// --- tiling -----------------------------------------------------------------

std::vector<int> tile_origins(int extent, int tile_size, int overlap) {
  if (tile_size <= 0 || overlap < 0 || overlap >= tile_size) {
    throw Error(ErrorCode::InvalidArgument, "tile size must be positive and overlap in [0, tile size)");
  }
  if (extent <= tile_size) return {0};
  const int stride = tile_size - overlap;
  std::vector<int> out;
  for (int p = 0;; p += stride) {
    if (p + tile_size >= extent) {
      out.push_back(extent - tile_size);
      break;
    }
    out.push_back(p);
  }
  return out;
}

std::vector<Tile> tile(const AnnotationSet& set, const TileOptions& opts) {
  const auto xs = tile_origins(set.dims.width, opts.tile_size, opts.overlap);
  const auto ys = tile_origins(set.dims.height, opts.tile_size, opts.overlap);
  const int tw = std::min(opts.tile_size, set.dims.width);
  const int th = std::min(opts.tile_size, set.dims.height);
  std::vector<Tile> tiles;
  for (int y0 : ys) {
    for (int x0 : xs) {
      Tile t{set.image_id, set.dims, set.taxonomy, set.kind, x0, y0, tw, th, {}};
      const BBox frame{static_cast<double>(x0), static_cast<double>(y0), static_cast<double>(x0 + tw),
                       static_cast<double>(y0 + th)};
      for (const auto& d : set.detections) {
        const double kept = intersection_area(d.box, frame);
        if (kept <= 0.0 || kept < opts.min_box_area_frac * d.box.area()) continue;
        const BBox clipped{std::max(d.box.xmin, frame.xmin) - x0, std::max(d.box.ymin, frame.ymin) - y0,
                           std::min(d.box.xmax, frame.xmax) - x0, std::min(d.box.ymax, frame.ymax) - y0};
        t.detections.push_back({clipped, d.class_id, d.score});
      }
      tiles.push_back(std::move(t));
    }
  }
  return tiles;
}

std::vector<Detection> nms(std::vector<Detection> dets, double nms_iou) {
  std::stable_sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) { return a.score > b.score; });
  std::vector<bool> suppressed(dets.size(), false);
  std::vector<Detection> kept;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (suppressed[i]) continue;
    kept.push_back(dets[i]);
    for (std::size_t j = i + 1; j < dets.size(); ++j) {
      if (!suppressed[j] && dets[j].class_id == dets[i].class_id && iou(dets[i].box, dets[j].box) > nms_iou) {
        suppressed[j] = true;
      }
    }
  }
  return kept;
}

AnnotationSet merge_tiles(std::span<const Tile> tiles, double nms_iou) {
  AnnotationSet out;
  if (tiles.empty()) return out;
  const Tile& first = tiles.front();
  out.image_id = first.image_id;
  out.dims = first.image_dims;
  out.taxonomy = first.taxonomy;
  out.kind = first.kind;
  std::vector<Detection> all;
  for (const auto& t : tiles) {
    if (t.image_id != first.image_id) {
      throw Error(ErrorCode::MixedImageIds, "tiles from '" + first.image_id + "' and '" + t.image_id + "'");
    }
    for (const auto& d : t.detections) {
      all.push_back({{d.box.xmin + t.x0, d.box.ymin + t.y0, d.box.xmax + t.x0, d.box.ymax + t.y0}, d.class_id,
                     d.score});
    }
  }
  out.detections = nms(std::move(all), nms_iou);
  std::sort(out.detections.begin(), out.detections.end(), detection_order);
  return out;
}

// --- manifest ---------------------------------------------------------------

std::string resolve_path(const std::string& manifest_path, const std::string& entry_path) {
  const std::filesystem::path p(entry_path);
  if (p.is_absolute() || entry_path.empty()) return entry_path;
  return (std::filesystem::path(manifest_path).parent_path() / p).string();
}

std::string detection_path_for(const std::string& raster_path) {
  return std::filesystem::path(raster_path).replace_extension(".txt").string();
}

}  // namespace thermofuse
