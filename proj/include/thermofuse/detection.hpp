#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "thermofuse/geometry.hpp"

namespace thermofuse {

enum class VisClass : std::uint8_t { OccupiedNest = 0, EmptyNest = 1, IsolatedIndividual = 2 };
enum class TirClass : std::uint8_t { Heron = 0 };
// First three entries share indices with VisClass.
enum class FusedClass : std::uint8_t { OccupiedNest = 0, EmptyNest = 1, IsolatedIndividual = 2, FalsePositive = 3 };

inline constexpr int kNumVisClasses = 3;
inline constexpr int kNumFusedClasses = 4;

enum class Taxonomy { Vis, Tir, Fused };

int class_count(Taxonomy t) noexcept;
std::string_view class_name(Taxonomy t, int index);
std::string_view to_string(Taxonomy t);
Taxonomy taxonomy_from_string(std::string_view s);

struct Detection {
  BBox box;       // canvas pixels
  int class_id = 0;  // index into the owning set's taxonomy
  double score = 1.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

enum class AnnotationKind { GroundTruth, Predicted };

struct ImageDims {
  int width = 0;
  int height = 0;

  friend bool operator==(const ImageDims&, const ImageDims&) = default;
};

struct AnnotationSet {
  std::string image_id;
  ImageDims dims;
  Taxonomy taxonomy = Taxonomy::Vis;
  AnnotationKind kind = AnnotationKind::Predicted;
  std::vector<Detection> detections;
};

/// Line format: `class_index cx cy w h [score]`, geometry normalised to the
/// image size. Boxes are clamped to the image on ingest; a missing score means 1.
/// Errors: MalformedLine, UnknownClassIndex, CoordinateOutOfRange, all with line numbers.
AnnotationSet parse_detections(std::string_view text, Taxonomy taxonomy, ImageDims dims,
                               AnnotationKind kind = AnnotationKind::Predicted, std::string image_id = {});

/// Ordered by class, then xmin, then ymin (score, xmax, ymax break remaining
/// ties). Ground-truth sets omit the score column.
std::string write_detections(const AnnotationSet& set);

AnnotationSet read_detections_file(const std::string& path, Taxonomy taxonomy, ImageDims dims,
                                   AnnotationKind kind, std::string image_id);
void write_detections_file(const std::string& path, const AnnotationSet& set);

// --- tiling -----------------------------------------------------------------

struct TileOptions {
  int tile_size = 640;
  int overlap = 0;
  double min_box_area_frac = 0.5;
};

struct Tile {
  std::string image_id;
  ImageDims image_dims;
  Taxonomy taxonomy = Taxonomy::Vis;
  AnnotationKind kind = AnnotationKind::Predicted;
  int x0 = 0;
  int y0 = 0;
  int width = 0;
  int height = 0;
  std::vector<Detection> detections;  // tile frame
};

/// Grid origins along one axis at stride tile - overlap; the last origin is
/// anchored so the tile ends on the image boundary.
std::vector<int> tile_origins(int extent, int tile_size, int overlap);

std::vector<Tile> tile(const AnnotationSet& set, const TileOptions& opts = {});

/// Greedy per-class NMS (suppress when IoU > nms_iou), highest score first.
std::vector<Detection> nms(std::vector<Detection> dets, double nms_iou);

/// Throws MixedImageIds when tiles come from different images.
AnnotationSet merge_tiles(std::span<const Tile> tiles, double nms_iou = 0.5);

// --- dataset splits ---------------------------------------------------------

enum class Split { Train, Val, Test };
std::string_view to_string(Split s);
std::optional<Split> split_from_string(std::string_view s);

struct SplitRatios {
  double train = 0.64;
  double val = 0.16;
  double test = 0.20;
};

struct SplitResult {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
  bool stratified = true;  // false when a class proportion misses the +-3 point band
  std::string warning;

  std::vector<Split> assignment(std::size_t n) const;
};

/// Largest-remainder split sizes for n items.
std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& ratios);

/// Image-level split stratified on class-presence flags; deterministic under
/// seed. Throws InvalidArgument unless ratios sum to 1 +- 1e-9.
SplitResult stratified_split(std::span<const AnnotationSet> sets, const SplitRatios& ratios, std::uint64_t seed);

/// Worst absolute difference (fraction, not points) between a split's
/// per-class object share and the global share, over splits with objects.
double max_class_share_deviation(std::span<const AnnotationSet> sets, const SplitResult& split);

// --- manifest ---------------------------------------------------------------

struct ManifestEntry {
  std::string image_id;
  std::string vis_path;
  std::string tir_path;
  std::string gt_vis_path;
  std::string gt_tir_path;
  std::optional<Split> split;
};

/// JSON lines; relative paths are resolved against the manifest's directory by
/// resolve_path().
std::vector<ManifestEntry> read_manifest(const std::string& path);
void write_manifest(const std::string& path, std::span<const ManifestEntry> entries);
std::string resolve_path(const std::string& manifest_path, const std::string& entry_path);

/// Detection file sibling to a raster: same stem, `.txt` extension.
std::string detection_path_for(const std::string& raster_path);

}  // namespace thermofuse
