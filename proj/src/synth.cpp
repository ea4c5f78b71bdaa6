#include "thermofuse/synth.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>

#include "thermofuse/error.hpp"
#include "thermofuse/parallel.hpp"
#include "thermofuse/rng.hpp"

namespace thermofuse {

void ScenarioConfig::validate() const {
  const auto fail = [](const std::string& m) { throw Error(ErrorCode::ConfigError, m); };
  if (n_images < 0) fail("n_images must be >= 0");
  if (canvas_width <= 0 || canvas_height <= 0) fail("canvas size must be positive");
  if (!(objects_per_image >= 0.0 && objects_per_image <= 500.0)) fail("objects_per_image must lie in [0, 500]");
  const double prior_sum = std::accumulate(class_priors.begin(), class_priors.end(), 0.0);
  for (double p : class_priors) {
    if (!(p >= 0.0)) fail("class priors must be >= 0");
  }
  if (std::abs(prior_sum - 1.0) > 1e-9) fail("class priors must sum to 1");
  for (double r : vis_recall) {
    if (!(r >= 0.0 && r <= 1.0)) fail("vis_recall must lie in [0, 1]");
  }
  if (!(tir_recall >= 0.0 && tir_recall <= 1.0)) fail("tir_recall must lie in [0, 1]");
  if (!(vis_fp_rate >= 0.0 && vis_fp_rate <= 500.0) || !(tir_fp_rate >= 0.0 && tir_fp_rate <= 500.0)) {
    fail("fp rates must lie in [0, 500]");
  }
  if (!(jitter_center_px >= 0.0) || !(jitter_scale >= 0.0)) fail("jitter sigmas must be >= 0");
  for (const auto& b : {tp_score, fp_score}) {
    if (!(b.alpha > 0.0 && b.beta > 0.0)) fail("beta score parameters must be positive");
  }
  if (!(box_min_side > 0.0 && box_max_side >= box_min_side)) fail("box sides must satisfy 0 < min <= max");
  if (box_max_side * std::exp(box_log_aspect) >= std::min(canvas_width, canvas_height)) {
    fail("boxes must fit inside the canvas");
  }
  if (!(box_log_aspect >= 0.0)) fail("box_log_aspect must be >= 0");
  if (!(max_gt_overlap >= 0.0 && max_gt_overlap <= 1.0)) fail("max_gt_overlap must lie in [0, 1]");
  if (placement_attempts < 1) fail("placement_attempts must be >= 1");
  if (!(tir_shrink > 0.0 && tir_shrink <= 1.0)) fail("tir_shrink must lie in (0, 1]");
  if (!(vis_class_confusion >= 0.0 && vis_class_confusion <= 1.0)) fail("vis_class_confusion must lie in [0, 1]");
}

namespace {

constexpr int kOccupied = static_cast<int>(VisClass::OccupiedNest);
constexpr int kIsolated = static_cast<int>(VisClass::IsolatedIndividual);

bool emits_heat(int cls) { return cls == kOccupied || cls == kIsolated; }

// Inversion sampling: for a fixed uniform the count never decreases as the
// mean grows.
int poisson_by_inversion(double u, double mean) {
  double p = std::exp(-mean);
  double cdf = p;
  int k = 0;
  while (u > cdf && k < 100000) {
    ++k;
    p *= mean / k;
    cdf += p;
    if (p == 0.0 && k > mean) break;
  }
  return k;
}

int draw_class(Rng& rng, const std::array<double, 3>& priors) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (int c = 0; c < 2; ++c) {
    acc += priors[static_cast<std::size_t>(c)];
    if (u < acc) return c;
  }
  return 2;
}

BBox draw_box(Rng& rng, const ScenarioConfig& cfg) {
  const double side = rng.uniform(cfg.box_min_side, cfg.box_max_side);
  const double aspect = std::exp(rng.uniform(-cfg.box_log_aspect, cfg.box_log_aspect));
  const double w = side * aspect;
  const double h = side / aspect;
  const double x = rng.uniform(0.0, cfg.canvas_width - w);
  const double y = rng.uniform(0.0, cfg.canvas_height - h);
  return {x, y, x + w, y + h};
}

BBox scaled_about_center(const BBox& b, double fx, double fy) {
  if (fx == 1.0 && fy == 1.0) return b;  // keep corners bit-exact
  const Point2 c = b.center();
  const double hw = b.width() * fx / 2.0;
  const double hh = b.height() * fy / 2.0;
  return {c.x - hw, c.y - hh, c.x + hw, c.y + hh};
}

// Draws are made unconditionally so the stream layout never depends on outcomes.
struct Jitter {
  double dx, dy, sx, sy;
};

Jitter draw_jitter(Rng& rng, const ScenarioConfig& cfg) {
  Jitter j{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
  j.dx *= cfg.jitter_center_px;
  j.dy *= cfg.jitter_center_px;
  j.sx = std::exp(j.sx * cfg.jitter_scale);
  j.sy = std::exp(j.sy * cfg.jitter_scale);
  return j;
}

BBox apply_jitter(const BBox& b, const Jitter& j) {
  BBox out = scaled_about_center(b, j.sx, j.sy);
  out.xmin += j.dx;
  out.xmax += j.dx;
  out.ymin += j.dy;
  out.ymax += j.dy;
  return out;
}

double clamp01(double v) { return std::min(std::max(v, 0.0), 1.0); }

}  // namespace

std::string image_id_for(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "img_%05d", index);
  return buf;
}

SyntheticImage generate_image(const ScenarioConfig& cfg, int index) {
  const auto idx = static_cast<std::uint64_t>(index);
  const ImageDims dims{cfg.canvas_width, cfg.canvas_height};
  const double cw = cfg.canvas_width;
  const double ch = cfg.canvas_height;
  const std::string id = image_id_for(index);

  SyntheticImage img;
  img.gt = {id, dims, Taxonomy::Vis, AnnotationKind::GroundTruth, {}};
  img.gt_tir = {id, dims, Taxonomy::Tir, AnnotationKind::GroundTruth, {}};
  img.vis = {id, dims, Taxonomy::Vis, AnnotationKind::Predicted, {}};
  img.tir = {id, dims, Taxonomy::Tir, AnnotationKind::Predicted, {}};

  // Ground truth.
  Rng gt_rng(derive_seed(cfg.seed, "synth.gt", idx));
  const auto n_objects = gt_rng.poisson(cfg.objects_per_image);
  for (std::uint64_t k = 0; k < n_objects; ++k) {
    const int cls = draw_class(gt_rng, cfg.class_priors);
    bool placed = false;
    for (int attempt = 0; attempt < cfg.placement_attempts && !placed; ++attempt) {
      const BBox box = draw_box(gt_rng, cfg);
      placed = std::none_of(img.gt.detections.begin(), img.gt.detections.end(),
                            [&](const Detection& d) { return iou(d.box, box) > cfg.max_gt_overlap; });
      if (placed) img.gt.detections.push_back({box, cls, 1.0});
    }
    if (!placed) {
      throw Error(ErrorCode::InfeasiblePlacement, "could not place object " + std::to_string(k) + " in " + id +
                                                      " after " + std::to_string(cfg.placement_attempts) +
                                                      " attempts");
    }
  }
  for (const auto& d : img.gt.detections) {
    if (emits_heat(d.class_id)) img.gt_tir.detections.push_back({d.box, 0, 1.0});
  }

  // VIS and TIR true detections.
  Rng vis_rng(derive_seed(cfg.seed, "synth.vis", idx));
  Rng tir_rng(derive_seed(cfg.seed, "synth.tir", idx));
  for (const auto& g : img.gt.detections) {
    const double u_detect = vis_rng.uniform();
    const Jitter j = draw_jitter(vis_rng, cfg);
    const double u_confuse = vis_rng.uniform();
    const auto other = static_cast<int>(vis_rng.below(2));
    const double score = clamp01(vis_rng.beta(cfg.tp_score.alpha, cfg.tp_score.beta));
    if (u_detect < cfg.vis_recall[static_cast<std::size_t>(g.class_id)]) {
      int cls = g.class_id;
      if (u_confuse < cfg.vis_class_confusion) cls = (g.class_id + 1 + other) % kNumVisClasses;
      const BBox box = clip_bbox(apply_jitter(g.box, j), cw, ch);
      if (box.valid()) img.vis.detections.push_back({box, cls, score});
    }

    const double t_detect = tir_rng.uniform();
    const Jitter tj = draw_jitter(tir_rng, cfg);
    const double t_score = clamp01(tir_rng.beta(cfg.tp_score.alpha, cfg.tp_score.beta));
    if (emits_heat(g.class_id) && t_detect < cfg.tir_recall) {
      const BBox core = scaled_about_center(g.box, cfg.tir_shrink, cfg.tir_shrink);
      const BBox box = clip_bbox(apply_jitter(core, tj), cw, ch);
      if (box.valid()) img.tir.detections.push_back({box, 0, t_score});
    }
  }

  // False positives, each modality on its own stream.
  Rng vfp_rng(derive_seed(cfg.seed, "synth.vis_fp", idx));
  const int n_vis_fp = poisson_by_inversion(vfp_rng.uniform(), cfg.vis_fp_rate);
  std::vector<BBox> vis_fp_boxes;
  for (int k = 0; k < n_vis_fp; ++k) {
    const BBox box = draw_box(vfp_rng, cfg);
    const int cls = draw_class(vfp_rng, cfg.class_priors);
    const double score = clamp01(vfp_rng.beta(cfg.fp_score.alpha, cfg.fp_score.beta));
    vis_fp_boxes.push_back(box);
    img.vis.detections.push_back({box, cls, score});
  }

  Rng tfp_rng(derive_seed(cfg.seed, "synth.tir_fp", idx));
  if (cfg.correlated_fp) {
    // Same geometry model as a true TIR detection, so only scores tell them apart.
    for (const auto& b : vis_fp_boxes) {
      const Jitter j = draw_jitter(tfp_rng, cfg);
      const double score = clamp01(tfp_rng.beta(cfg.fp_score.alpha, cfg.fp_score.beta));
      const BBox box = clip_bbox(apply_jitter(scaled_about_center(b, cfg.tir_shrink, cfg.tir_shrink), j), cw, ch);
      if (box.valid()) img.tir.detections.push_back({box, 0, score});
    }
  } else {
    const int n_tir_fp = poisson_by_inversion(tfp_rng.uniform(), cfg.tir_fp_rate);
    for (int k = 0; k < n_tir_fp; ++k) {
      const BBox box = scaled_about_center(draw_box(tfp_rng, cfg), cfg.tir_shrink, cfg.tir_shrink);
      const double score = clamp01(tfp_rng.beta(cfg.fp_score.alpha, cfg.fp_score.beta));
      img.tir.detections.push_back({box, 0, score});
    }
  }
  return img;
}

SyntheticDataset generate(const ScenarioConfig& cfg, int threads) {
  cfg.validate();
  SyntheticDataset ds{cfg, std::vector<SyntheticImage>(static_cast<std::size_t>(cfg.n_images))};
  parallel_for(ds.images.size(), threads,
               [&](std::size_t i) { ds.images[i] = generate_image(cfg, static_cast<int>(i)); });
  return ds;
}

void write_dataset(const SyntheticDataset& ds, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::vector<ManifestEntry> entries;
  for (const auto& img : ds.images) {
    const std::string& id = img.gt.image_id;
    write_detections_file((fs::path(out_dir) / "vis" / (id + ".txt")).string(), img.vis);
    write_detections_file((fs::path(out_dir) / "tir" / (id + ".txt")).string(), img.tir);
    write_detections_file((fs::path(out_dir) / "gt_vis" / (id + ".txt")).string(), img.gt);
    write_detections_file((fs::path(out_dir) / "gt_tir" / (id + ".txt")).string(), img.gt_tir);
    entries.push_back({id, "vis/" + id + ".png", "tir/" + id + ".png", "gt_vis/" + id + ".txt",
                       "gt_tir/" + id + ".txt", std::nullopt});
  }
  write_manifest((fs::path(out_dir) / "manifest.jsonl").string(), entries);
}

ExperimentReport run_experiment(const ScenarioConfig& cfg, const ExperimentOptions& opts) {
  return run_experiment(generate(cfg, opts.threads), opts);
}

ExperimentReport run_experiment(const SyntheticDataset& ds, const ExperimentOptions& opts) {
  opts.eval.validate();
  std::vector<AnnotationSet> gts;
  gts.reserve(ds.images.size());
  for (const auto& img : ds.images) gts.push_back(img.gt);
  const SplitResult split = stratified_split(gts, opts.ratios, ds.config.seed);

  ExperimentReport rep;
  rep.train_images = split.train.size();
  rep.val_images = split.val.size();
  rep.test_images = split.test.size();

  std::vector<TrainingSample> train;
  for (auto i : split.train) {
    const auto& img = ds.images[i];
    auto s = build_training_samples(img.vis, img.tir, img.gt, opts.policy, opts.label_iou);
    train.insert(train.end(), s.begin(), s.end());
  }
  rep.train_samples = train.size();
  const auto labeled = to_labeled(train);
  rep.tree = train_cart(labeled, opts.cart);

  ConfusionMatrix vis_cm(kNumVisClasses);
  ConfusionMatrix late_cm(kNumVisClasses);
  std::vector<TrainingSample> test_samples;
  for (auto i : split.test) {
    const auto& img = ds.images[i];
    vis_cm.add(match_to_gt(img.vis, img.gt, opts.eval));
    late_cm.add(match_to_gt(fuse_late(img.vis, img.tir, rep.tree, opts.policy), img.gt, opts.eval));
    auto s = build_training_samples(img.vis, img.tir, img.gt, opts.policy, opts.label_iou);
    test_samples.insert(test_samples.end(), s.begin(), s.end());
  }
  const auto n_test = static_cast<std::int64_t>(split.test.size());
  rep.vis_only = macro_metrics(vis_cm, Taxonomy::Vis, n_test);
  rep.late = macro_metrics(late_cm, Taxonomy::Vis, n_test);
  rep.fp_recall = false_positive_recall(rep.tree, test_samples);
  rep.test_fp_samples = static_cast<std::size_t>(std::count_if(
      test_samples.begin(), test_samples.end(),
      [](const TrainingSample& s) { return s.label == FusedClass::FalsePositive; }));
  return rep;
}

}  // namespace thermofuse
