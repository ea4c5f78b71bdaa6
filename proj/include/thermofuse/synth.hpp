#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "thermofuse/cart.hpp"
#include "thermofuse/detection.hpp"
#include "thermofuse/evaluation.hpp"
#include "thermofuse/late_fusion.hpp"

namespace thermofuse {

struct BetaParams {
  double alpha = 1.0;
  double beta = 1.0;
};

/// Synthetic detector scenario. Only detections are simulated, no pixels.
struct ScenarioConfig {
  int n_images = 100;
  int canvas_width = 1792;
  int canvas_height = 1433;
  double objects_per_image = 2.25;  // Poisson mean
  std::array<double, 3> class_priors{0.85, 0.10, 0.05};
  std::array<double, 3> vis_recall{0.93, 0.93, 0.93};
  double tir_recall = 0.85;  // occupied nests and isolated individuals only
  double vis_fp_rate = 0.0;  // expected FPs per image
  double tir_fp_rate = 0.0;
  double jitter_center_px = 0.0;  // sigma
  double jitter_scale = 0.0;      // sigma of log width/height factor
  BetaParams tp_score{8.0, 2.0};
  BetaParams fp_score{2.0, 5.0};
  std::uint64_t seed = 42;

  // Box sizes in canvas pixels: side ~ U[min,max], aspect ~ exp(U[-a,a]).
  double box_min_side = 40.0;
  double box_max_side = 110.0;
  double box_log_aspect = 0.25;
  double max_gt_overlap = 0.3;
  int placement_attempts = 200;
  // TIR boxes sit on the heat core, a shrunk copy of the object box.
  double tir_shrink = 0.6;
  // Chance a detected VIS object carries a wrong (uniformly chosen) class.
  double vis_class_confusion = 0.0;
  // Ablation: TIR false positives reuse the VIS false-positive boxes.
  bool correlated_fp = false;

  void validate() const;
};

struct SyntheticImage {
  AnnotationSet gt;      // VIS taxonomy, ground truth
  AnnotationSet gt_tir;  // heat-emitting GT objects in the TIR taxonomy
  AnnotationSet vis;
  AnnotationSet tir;
};

struct SyntheticDataset {
  ScenarioConfig config;
  std::vector<SyntheticImage> images;
};

/// Per-image streams are derived from (seed, stage, image index), so images
/// can be generated in any order or in parallel. Throws InfeasiblePlacement.
SyntheticImage generate_image(const ScenarioConfig& cfg, int index);
SyntheticDataset generate(const ScenarioConfig& cfg, int threads = 1);

std::string image_id_for(int index);

/// Writes vis/, tir/, gt_vis/, gt_tir/ detection files and manifest.jsonl.
/// Raster paths in the manifest name `<id>.png` files that do not exist; their
/// `.txt` siblings hold the detections.
void write_dataset(const SyntheticDataset& ds, const std::string& out_dir);

struct ExperimentOptions {
  SplitRatios ratios{};
  CartHyperparams cart{};
  SingletonPolicy policy = SingletonPolicy::ClassifyAll;
  EvalConfig eval{};
  double label_iou = 0.5;
  int threads = 1;
};

struct ExperimentReport {
  MetricsReport vis_only;
  MetricsReport late;
  double fp_recall = 0.0;  // on the test split
  std::size_t train_images = 0;
  std::size_t val_images = 0;
  std::size_t test_images = 0;
  std::size_t train_samples = 0;
  std::size_t test_fp_samples = 0;
  CartTree tree;
};

ExperimentReport run_experiment(const ScenarioConfig& cfg, const ExperimentOptions& opts = {});
ExperimentReport run_experiment(const SyntheticDataset& ds, const ExperimentOptions& opts = {});

}  // namespace thermofuse
