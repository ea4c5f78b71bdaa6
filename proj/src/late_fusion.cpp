#include "thermofuse/late_fusion.hpp"

#include <algorithm>
#include <tuple>

#include "thermofuse/error.hpp"

namespace thermofuse {

namespace {

void require_same_canvas(const AnnotationSet& a, const AnnotationSet& b) {
  if (!(a.dims == b.dims)) {
    throw Error(ErrorCode::CanvasMismatch, "annotation sets for '" + a.image_id + "' use different canvases (" +
                                               std::to_string(a.dims.width) + "x" + std::to_string(a.dims.height) +
                                               " vs " + std::to_string(b.dims.width) + "x" +
                                               std::to_string(b.dims.height) + ")");
  }
}

struct Candidate {
  double iou;
  std::size_t i;
  std::size_t j;
};

// Greedy one-to-one assignment over IoU > min_iou (or >= when inclusive).
std::vector<Candidate> greedy_assign(std::span<const BBox> a, std::span<const BBox> b, double min_iou, bool inclusive) {
  std::vector<Candidate> cands;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double v = iou(a[i], b[j]);
      if (inclusive ? v >= min_iou : v > min_iou) cands.push_back({v, i, j});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Candidate& x, const Candidate& y) {
    return std::tie(y.iou, x.i, x.j) < std::tie(x.iou, y.i, y.j);
  });
  std::vector<bool> used_a(a.size(), false);
  std::vector<bool> used_b(b.size(), false);
  std::vector<Candidate> out;
  for (const auto& c : cands) {
    if (used_a[c.i] || used_b[c.j]) continue;
    used_a[c.i] = used_b[c.j] = true;
    out.push_back(c);
  }
  return out;
}

std::vector<BBox> boxes_of(std::span<const Detection> dets) {
  std::vector<BBox> out;
  out.reserve(dets.size());
  for (const auto& d : dets) out.push_back(d.box);
  return out;
}

}  // namespace

std::string_view to_string(Bucket b) {
  switch (b) {
    case Bucket::Pair: return "pair";
    case Bucket::VisSingleton: return "vis_singleton";
    case Bucket::TirSingleton: return "tir_singleton";
  }
  return {};
}

MatchSet match_modalities(const AnnotationSet& vis, const AnnotationSet& tir) {
  require_same_canvas(vis, tir);
  const auto vb = boxes_of(vis.detections);
  const auto tb = boxes_of(tir.detections);
  auto assigned = greedy_assign(vb, tb, 0.0, false);
  // Report pairs in VIS order so the item sequence is stable.
  std::sort(assigned.begin(), assigned.end(), [](const Candidate& x, const Candidate& y) { return x.i < y.i; });

  MatchSet ms;
  std::vector<bool> vis_used(vb.size(), false);
  std::vector<bool> tir_used(tb.size(), false);
  for (const auto& c : assigned) {
    ms.pairs.push_back({vis.detections[c.i], tir.detections[c.j], c.iou});
    vis_used[c.i] = tir_used[c.j] = true;
  }
  for (std::size_t i = 0; i < vb.size(); ++i) {
    if (!vis_used[i]) ms.vis_singletons.push_back(vis.detections[i]);
  }
  for (std::size_t j = 0; j < tb.size(); ++j) {
    if (!tir_used[j]) ms.tir_singletons.push_back(tir.detections[j]);
  }
  return ms;
}

std::vector<MatchItem> items(const MatchSet& ms) {
  std::vector<MatchItem> out;
  out.reserve(ms.pairs.size() + ms.vis_singletons.size() + ms.tir_singletons.size());
  for (const auto& p : ms.pairs) out.push_back({Bucket::Pair, p.vis, p.tir, p.iou});
  for (const auto& d : ms.vis_singletons) out.push_back({Bucket::VisSingleton, d, std::nullopt, 0.0});
  for (const auto& d : ms.tir_singletons) out.push_back({Bucket::TirSingleton, std::nullopt, d, 0.0});
  return out;
}

Features encode_features(const MatchItem& item) {
  Features f{};
  if (item.vis) {
    if (item.vis->class_id < 0 || item.vis->class_id >= kNumVisClasses) {
      throw Error(ErrorCode::UnknownClassIndex, "VIS class index " + std::to_string(item.vis->class_id));
    }
    f[static_cast<std::size_t>(item.vis->class_id)] = item.vis->score;
  }
  if (item.tir) f[kFeatTirScore] = item.tir->score;
  if (item.vis && item.tir) f[kFeatIou] = item.iou;
  return f;
}

std::vector<TrainingSample> label_samples(const MatchSet& ms, const AnnotationSet& gt, double iou_label_thresh,
                                          const std::string& image_id) {
  const auto all = items(ms);
  std::vector<BBox> reps;
  reps.reserve(all.size());
  for (const auto& it : all) reps.push_back(it.representative().box);
  const auto gb = boxes_of(gt.detections);
  const auto assigned = greedy_assign(reps, gb, iou_label_thresh, true);

  std::vector<TrainingSample> out(all.size());
  for (std::size_t k = 0; k < all.size(); ++k) {
    out[k].features = encode_features(all[k]);
    out[k].bucket = all[k].bucket;
    out[k].image_id = image_id.empty() ? gt.image_id : image_id;
  }
  for (const auto& c : assigned) {
    const int cls = gt.detections[c.j].class_id;
    if (cls < 0 || cls >= kNumVisClasses) throw Error(ErrorCode::UnknownClassIndex, "GT class " + std::to_string(cls));
    out[c.i].label = static_cast<FusedClass>(cls);
  }
  return out;
}

std::string_view to_string(SingletonPolicy p) {
  return p == SingletonPolicy::ClassifyAll ? "classify_all" : "passthrough";
}

SingletonPolicy policy_from_string(std::string_view s) {
  if (s == "classify_all") return SingletonPolicy::ClassifyAll;
  if (s == "passthrough" || s == "passthrough_singletons") return SingletonPolicy::Passthrough;
  throw Error(ErrorCode::InvalidArgument, "unknown singleton policy '" + std::string(s) + "'");
}

std::vector<TrainingSample> build_training_samples(const AnnotationSet& vis, const AnnotationSet& tir,
                                                   const AnnotationSet& gt, SingletonPolicy policy,
                                                   double iou_label_thresh) {
  require_same_canvas(vis, gt);
  auto samples = label_samples(match_modalities(vis, tir), gt, iou_label_thresh, vis.image_id);
  if (policy == SingletonPolicy::Passthrough) {
    std::erase_if(samples, [](const TrainingSample& s) { return s.bucket != Bucket::Pair; });
  }
  return samples;
}

std::vector<LabeledFeatures> to_labeled(std::span<const TrainingSample> samples) {
  std::vector<LabeledFeatures> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back({s.features, static_cast<int>(s.label)});
  return out;
}

AnnotationSet fuse_late(const AnnotationSet& vis, const AnnotationSet& tir, const CartTree& tree,
                        SingletonPolicy policy) {
  if (!tree.trained()) throw Error(ErrorCode::UntrainedTree, "late fusion needs a trained tree");
  const MatchSet ms = match_modalities(vis, tir);
  AnnotationSet out{vis.image_id, vis.dims, Taxonomy::Fused, AnnotationKind::Predicted, {}};
  for (const auto& it : items(ms)) {
    const BBox box = it.representative().box;
    if (it.bucket != Bucket::Pair && policy == SingletonPolicy::Passthrough) {
      if (it.vis) {
        out.detections.push_back({box, it.vis->class_id, it.vis->score});
      } else {
        out.detections.push_back({box, static_cast<int>(FusedClass::IsolatedIndividual), it.tir->score});
      }
      continue;
    }
    const CartPrediction p = tree.predict(encode_features(it));
    if (p.label == static_cast<int>(FusedClass::FalsePositive)) continue;
    out.detections.push_back({box, p.label, p.confidence});
  }
  return out;
}

double false_positive_recall(const CartTree& tree, std::span<const TrainingSample> samples) {
  std::size_t total = 0;
  std::size_t caught = 0;
  for (const auto& s : samples) {
    if (s.label != FusedClass::FalsePositive) continue;
    ++total;
    if (tree.predict(s.features).label == static_cast<int>(FusedClass::FalsePositive)) ++caught;
  }
  return total == 0 ? 0.0 : static_cast<double>(caught) / static_cast<double>(total);
}

}  // namespace thermofuse
