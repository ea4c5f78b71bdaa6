#include "thermofuse/cart.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "thermofuse/error.hpp"

namespace thermofuse {

namespace {
constexpr double kTieTolerance = 1e-12;
constexpr const char* kFormat = "thermofuse-cart/1";
}  // namespace

void CartHyperparams::validate() const {
  if (max_depth < 0) throw Error(ErrorCode::ConfigError, "cart.max_depth must be >= 0");
  if (min_samples_leaf < 1) throw Error(ErrorCode::ConfigError, "cart.min_samples_leaf must be >= 1");
  if (!(min_impurity_decrease >= 0.0)) {
    throw Error(ErrorCode::ConfigError, "cart.min_impurity_decrease must be >= 0");
  }
}

double gini(std::span<const int> counts) noexcept {
  const double n = std::accumulate(counts.begin(), counts.end(), 0.0);
  if (n == 0.0) return 0.0;
  double sum_sq = 0.0;
  for (int c : counts) sum_sq += (c / n) * (c / n);
  return 1.0 - sum_sq;
}

CartTree::CartTree(CartHyperparams hp, std::vector<CartNode> nodes) : hp_(hp), nodes_(std::move(nodes)) {}

int CartTree::depth() const {
  if (nodes_.empty()) return 0;
  std::vector<int> d(nodes_.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    if (n.is_leaf()) continue;
    d[static_cast<std::size_t>(n.left)] = d[i] + 1;
    d[static_cast<std::size_t>(n.right)] = d[i] + 1;
    deepest = std::max(deepest, d[i] + 1);
  }
  return deepest;
}

CartPrediction CartTree::predict(const Features& x) const {
  if (nodes_.empty()) throw Error(ErrorCode::UntrainedTree, "tree has no nodes");
  int idx = 0;
  while (!nodes_[static_cast<std::size_t>(idx)].is_leaf()) {
    const auto& n = nodes_[static_cast<std::size_t>(idx)];
    idx = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  const auto& leaf = nodes_[static_cast<std::size_t>(idx)];
  const auto best = std::max_element(leaf.counts.begin(), leaf.counts.end());  // first max wins ties
  const int total = std::accumulate(leaf.counts.begin(), leaf.counts.end(), 0);
  return {static_cast<int>(best - leaf.counts.begin()), total > 0 ? static_cast<double>(*best) / total : 0.0, idx};
}

nlohmann::json CartTree::to_json() const {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : nodes_) {
    nlohmann::json j;
    j["counts"] = n.counts;
    if (n.is_leaf()) {
      j["leaf"] = true;
    } else {
      j["leaf"] = false;
      j["feature"] = n.feature;
      j["threshold"] = n.threshold;
      j["left"] = n.left;
      j["right"] = n.right;
    }
    nodes.push_back(std::move(j));
  }
  nlohmann::json root;
  root["format"] = kFormat;
  root["features"] = {"occupied_score", "empty_score", "isolated_score", "tir_score", "iou"};
  root["classes"] = {"occupied_nest", "empty_nest", "isolated_individual", "false_positive"};
  root["hyperparams"] = {{"max_depth", hp_.max_depth},
                         {"min_samples_leaf", hp_.min_samples_leaf},
                         {"min_impurity_decrease", hp_.min_impurity_decrease}};
  root["nodes"] = std::move(nodes);
  return root;
}

std::string CartTree::serialize() const { return to_json().dump(2) + "\n"; }

CartTree CartTree::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kFormat) {
      throw Error(ErrorCode::InvalidArgument, "unsupported tree format");
    }
    CartHyperparams hp;
    const auto& h = j.at("hyperparams");
    hp.max_depth = h.at("max_depth").get<int>();
    hp.min_samples_leaf = h.at("min_samples_leaf").get<int>();
    hp.min_impurity_decrease = h.at("min_impurity_decrease").get<double>();
    std::vector<CartNode> nodes;
    for (const auto& jn : j.at("nodes")) {
      CartNode n;
      n.counts = jn.at("counts").get<std::array<int, kCartClasses>>();
      if (!jn.at("leaf").get<bool>()) {
        n.feature = jn.at("feature").get<int>();
        n.threshold = jn.at("threshold").get<double>();
        n.left = jn.at("left").get<int>();
        n.right = jn.at("right").get<int>();
      }
      nodes.push_back(n);
    }
    const int count = static_cast<int>(nodes.size());
    for (const auto& n : nodes) {
      if (n.is_leaf()) continue;
      if (n.feature >= kCartFeatures || n.left <= 0 || n.right <= 0 || n.left >= count || n.right >= count) {
        throw Error(ErrorCode::InvalidArgument, "tree node references are out of range");
      }
    }
    return CartTree(hp, std::move(nodes));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed tree file: ") + e.what());
  }
}

namespace {

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double impurity = INFINITY;  // weighted child impurity
};

class Builder {
 public:
  Builder(std::span<const LabeledFeatures> samples, const CartHyperparams& hp) : samples_(samples), hp_(hp) {}

  std::vector<CartNode> build() {
    std::vector<std::size_t> all(samples_.size());
    std::iota(all.begin(), all.end(), 0);
    grow(all, 0);
    return std::move(nodes_);
  }

 private:
  std::array<int, kCartClasses> count(const std::vector<std::size_t>& idx) const {
    std::array<int, kCartClasses> c{};
    for (auto i : idx) ++c[static_cast<std::size_t>(samples_[i].label)];
    return c;
  }

  SplitChoice best_split(const std::vector<std::size_t>& idx) const {
    SplitChoice best;
    const std::size_t n = idx.size();
    const auto total = count(idx);
    std::vector<std::size_t> order = idx;
    for (int f = 0; f < kCartFeatures; ++f) {
      const auto fu = static_cast<std::size_t>(f);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return samples_[a].x[fu] < samples_[b].x[fu]; });
      std::array<int, kCartClasses> left{};
      for (std::size_t i = 0; i + 1 < n; ++i) {
        ++left[static_cast<std::size_t>(samples_[order[i]].label)];
        const double lo = samples_[order[i]].x[fu];
        const double hi = samples_[order[i + 1]].x[fu];
        if (!(lo < hi)) continue;
        const std::size_t nl = i + 1;
        const std::size_t nr = n - nl;
        if (nl < static_cast<std::size_t>(hp_.min_samples_leaf) || nr < static_cast<std::size_t>(hp_.min_samples_leaf)) {
          continue;
        }
        std::array<int, kCartClasses> right{};
        for (int k = 0; k < kCartClasses; ++k) right[k] = total[k] - left[k];
        const double imp = (static_cast<double>(nl) * gini(left) + static_cast<double>(nr) * gini(right)) /
                           static_cast<double>(n);
        if (imp < best.impurity - kTieTolerance) {
          double thr = lo + (hi - lo) / 2.0;
          if (!(thr < hi)) thr = lo;
          best = {f, thr, imp};
        }
      }
    }
    return best;
  }

  int grow(const std::vector<std::size_t>& idx, int depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    nodes_.back().counts = count(idx);
    const double node_gini = gini(nodes_.back().counts);
    if (depth >= hp_.max_depth || node_gini == 0.0) return id;

    const SplitChoice split = best_split(idx);
    if (split.feature < 0) return id;
    const double decrease = static_cast<double>(idx.size()) / static_cast<double>(samples_.size()) *
                            (node_gini - split.impurity);
    if (!(decrease > 0.0) || decrease < hp_.min_impurity_decrease) return id;

    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    const auto fu = static_cast<std::size_t>(split.feature);
    for (auto i : idx) (samples_[i].x[fu] <= split.threshold ? left : right).push_back(i);

    nodes_[static_cast<std::size_t>(id)].feature = split.feature;
    nodes_[static_cast<std::size_t>(id)].threshold = split.threshold;
    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    nodes_[static_cast<std::size_t>(id)].left = l;
    nodes_[static_cast<std::size_t>(id)].right = r;
    return id;
  }

  std::span<const LabeledFeatures> samples_;
  CartHyperparams hp_;
  std::vector<CartNode> nodes_;
};

}  // namespace

CartTree train_cart(std::span<const LabeledFeatures> samples, const CartHyperparams& hp) {
  hp.validate();
  if (samples.empty()) throw Error(ErrorCode::EmptyTrainingSet, "no training samples");
  for (const auto& s : samples) {
    if (s.label < 0 || s.label >= kCartClasses) throw Error(ErrorCode::InvalidArgument, "label out of range");
  }
  return CartTree(hp, Builder(samples, hp).build());
}

double training_accuracy(const CartTree& tree, std::span<const LabeledFeatures> samples) {
  if (samples.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& s : samples) correct += tree.predict(s.x).label == s.label ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

}  // namespace thermofuse
