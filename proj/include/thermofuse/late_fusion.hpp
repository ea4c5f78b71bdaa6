#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "thermofuse/cart.hpp"
#include "thermofuse/detection.hpp"

namespace thermofuse {

// Feature columns: occupied_score, empty_score, isolated_score, tir_score, iou.
inline constexpr int kFeatTirScore = 3;
inline constexpr int kFeatIou = 4;

struct MatchedPair {
  Detection vis;
  Detection tir;
  double iou = 0.0;
};

struct MatchSet {
  std::vector<MatchedPair> pairs;
  std::vector<Detection> vis_singletons;
  std::vector<Detection> tir_singletons;
};

enum class Bucket { Pair, VisSingleton, TirSingleton };
std::string_view to_string(Bucket b);

/// One fusion candidate: a pair or a single-modality detection.
struct MatchItem {
  Bucket bucket = Bucket::Pair;
  std::optional<Detection> vis;
  std::optional<Detection> tir;
  double iou = 0.0;

  const Detection& representative() const { return vis ? *vis : *tir; }
};

/// Greedy one-to-one pairing by descending IoU over all cross pairs with IoU > 0.
/// Equal IoUs resolve to the lower VIS index, then the lower TIR index.
/// Throws CanvasMismatch when the two sets have different dimensions.
MatchSet match_modalities(const AnnotationSet& vis, const AnnotationSet& tir);

/// Pairs first, then VIS singletons, then TIR singletons.
std::vector<MatchItem> items(const MatchSet& ms);

Features encode_features(const MatchItem& item);

struct TrainingSample {
  Features features{};
  FusedClass label = FusedClass::FalsePositive;
  std::string image_id;
  Bucket bucket = Bucket::Pair;
};

/// Representative boxes (VIS when present) are matched greedily to GT by
/// descending IoU; IoU >= threshold takes the GT class, anything else is a
/// FalsePositive. Each GT box is used at most once.
std::vector<TrainingSample> label_samples(const MatchSet& ms, const AnnotationSet& gt, double iou_label_thresh = 0.5,
                                          const std::string& image_id = {});

enum class SingletonPolicy { ClassifyAll, Passthrough };
std::string_view to_string(SingletonPolicy p);
SingletonPolicy policy_from_string(std::string_view s);

/// Training samples for one image under a policy; passthrough keeps pairs only
/// since singletons never reach the tree at inference.
std::vector<TrainingSample> build_training_samples(const AnnotationSet& vis, const AnnotationSet& tir,
                                                   const AnnotationSet& gt, SingletonPolicy policy,
                                                   double iou_label_thresh = 0.5);

std::vector<LabeledFeatures> to_labeled(std::span<const TrainingSample> samples);

/// Fused detections (FalsePositive outputs removed), VIS geometry preferred.
AnnotationSet fuse_late(const AnnotationSet& vis, const AnnotationSet& tir, const CartTree& tree,
                        SingletonPolicy policy = SingletonPolicy::ClassifyAll);

/// Share of FalsePositive-labelled samples the tree routes to FalsePositive.
/// Returns 0 when no sample carries that label.
double false_positive_recall(const CartTree& tree, std::span<const TrainingSample> samples);

}  // namespace thermofuse
