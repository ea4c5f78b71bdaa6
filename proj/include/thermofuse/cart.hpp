#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace thermofuse {

inline constexpr int kCartFeatures = 5;
inline constexpr int kCartClasses = 4;

using Features = std::array<double, kCartFeatures>;

struct LabeledFeatures {
  Features x{};
  int label = 0;  // 0 .. kCartClasses-1
};

struct CartHyperparams {
  int max_depth = 6;
  int min_samples_leaf = 5;
  double min_impurity_decrease = 1e-7;

  void validate() const;
};

struct CartNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::array<int, kCartClasses> counts{};

  bool is_leaf() const noexcept { return feature < 0; }
};

struct CartPrediction {
  int label = 0;
  double confidence = 0.0;
  int leaf = -1;
};

/// Binary classification tree. Nodes are stored in depth-first pre-order with
/// the root at index 0; samples with value <= threshold go left.
class CartTree {
 public:
  CartTree() = default;
  CartTree(CartHyperparams hp, std::vector<CartNode> nodes);

  bool trained() const noexcept { return !nodes_.empty(); }
  const CartHyperparams& hyperparams() const noexcept { return hp_; }
  const std::vector<CartNode>& nodes() const noexcept { return nodes_; }
  int depth() const;

  /// Majority class of the reached leaf (ties go to the lower class index) and
  /// its share of the leaf. Throws UntrainedTree.
  CartPrediction predict(const Features& x) const;

  /// Canonical form: sorted keys, shortest round-trip float formatting.
  nlohmann::json to_json() const;
  std::string serialize() const;
  static CartTree from_json(const nlohmann::json& j);

 private:
  CartHyperparams hp_;
  std::vector<CartNode> nodes_;
};

/// Weighted Gini impurity sum_k n_k/n * (1 - sum_c p_c^2) of a candidate split.
double gini(std::span<const int> counts) noexcept;

/// Greedy recursive splitting minimising weighted Gini. Candidate thresholds are
/// midpoints between consecutive distinct values; ties (within 1e-12) prefer the
/// lower feature index, then the lower threshold. A split is kept only when the
/// node-weighted impurity decrease reaches min_impurity_decrease and both
/// children hold at least min_samples_leaf samples.
/// Throws EmptyTrainingSet for an empty sample list.
CartTree train_cart(std::span<const LabeledFeatures> samples, const CartHyperparams& hp = {});

double training_accuracy(const CartTree& tree, std::span<const LabeledFeatures> samples);

}  // namespace thermofuse
