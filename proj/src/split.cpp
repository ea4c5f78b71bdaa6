#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "thermofuse/detection.hpp"
#include "thermofuse/error.hpp"
#include "thermofuse/log.hpp"
#include "thermofuse/rng.hpp"

namespace thermofuse {

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return {};
}

std::optional<Split> split_from_string(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  return std::nullopt;
}

std::vector<Split> SplitResult::assignment(std::size_t n) const {
  std::vector<Split> out(n, Split::Train);
  for (auto i : val) out.at(i) = Split::Val;
  for (auto i : test) out.at(i) = Split::Test;
  return out;
}

namespace {

void validate(const SplitRatios& r) {
  const std::array<double, 3> v{r.train, r.val, r.test};
  for (double x : v) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw Error(ErrorCode::InvalidArgument, "split ratios must be >= 0");
  }
  if (std::abs(v[0] + v[1] + v[2] - 1.0) > 1e-9) {
    throw Error(ErrorCode::InvalidArgument, "split ratios must sum to 1");
  }
}

std::uint32_t presence_key(const AnnotationSet& s) {
  std::uint32_t key = 0;
  for (const auto& d : s.detections) key |= 1u << static_cast<unsigned>(d.class_id);
  return key;
}

}  // namespace

std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& ratios) {
  validate(ratios);
  const std::array<double, 3> r{ratios.train, ratios.val, ratios.test};
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> frac{};
  std::size_t used = 0;
  for (int k = 0; k < 3; ++k) {
    const double quota = r[k] * static_cast<double>(n);
    sizes[k] = static_cast<std::size_t>(std::floor(quota + 1e-9));
    frac[k] = quota - static_cast<double>(sizes[k]);
    used += sizes[k];
  }
  while (used > n) {  // only reachable through the floor epsilon
    const auto k = static_cast<std::size_t>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    --sizes[k];
    --used;
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&frac](int a, int b) { return frac[a] > frac[b]; });
  for (std::size_t i = 0; used < n; ++i, ++used) ++sizes[order[i % 3]];
  return sizes;
}

SplitResult stratified_split(std::span<const AnnotationSet> sets, const SplitRatios& ratios, std::uint64_t seed) {
  const std::size_t n = sets.size();
  const auto targets = split_sizes(n, ratios);

  std::map<std::uint32_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[presence_key(sets[i])].push_back(i);

  // Within a stratum: seeded shuffle, then heaviest images first so object
  // counts spread evenly over the splits.
  std::vector<std::size_t> order;
  order.reserve(n);
  for (auto& [key, members] : groups) {
    Rng rng(derive_seed(seed, "split", key));
    for (std::size_t i = members.size(); i > 1; --i) std::swap(members[i - 1], members[rng.below(i)]);
    std::stable_sort(members.begin(), members.end(), [&sets](std::size_t a, std::size_t b) {
      return sets[a].detections.size() > sets[b].detections.size();
    });
    order.insert(order.end(), members.begin(), members.end());
  }

  // Sequential apportionment: each item goes to the split furthest behind its
  // proportional share, which keeps every stratum near the global ratios.
  SplitResult result;
  std::array<std::vector<std::size_t>*, 3> buckets{&result.train, &result.val, &result.test};
  std::array<std::size_t, 3> assigned{};
  for (std::size_t pos = 0; pos < n; ++pos) {
    int pick = -1;
    double best = -INFINITY;
    for (int k = 0; k < 3; ++k) {
      if (assigned[k] >= targets[k]) continue;
      const double deficit =
          static_cast<double>(targets[k]) * static_cast<double>(pos + 1) / static_cast<double>(n) -
          static_cast<double>(assigned[k]);
      if (deficit > best) {
        best = deficit;
        pick = k;
      }
    }
    buckets[pick]->push_back(order[pos]);
    ++assigned[pick];
  }
  for (auto* b : buckets) std::sort(b->begin(), b->end());

  const double dev = max_class_share_deviation(sets, result);
  if (dev > 0.03) {
    result.stratified = false;
    result.warning = "InfeasibleStratification: class share deviates by " + std::to_string(dev * 100.0) +
                     " points; best-effort split kept";
    log::warn(result.warning);
  }
  return result;
}

double max_class_share_deviation(std::span<const AnnotationSet> sets, const SplitResult& split) {
  int k = 0;
  for (const auto& s : sets) k = std::max(k, class_count(s.taxonomy));
  if (k == 0) return 0.0;
  const auto counts = [&](const std::vector<std::size_t>& idx) {
    std::vector<double> c(static_cast<std::size_t>(k), 0.0);
    for (auto i : idx) {
      for (const auto& d : sets[i].detections) c[static_cast<std::size_t>(d.class_id)] += 1.0;
    }
    return c;
  };
  std::vector<std::size_t> all(sets.size());
  std::iota(all.begin(), all.end(), 0);
  const auto global = counts(all);
  const double global_total = std::accumulate(global.begin(), global.end(), 0.0);
  if (global_total == 0.0) return 0.0;
  double worst = 0.0;
  for (const auto* part : {&split.train, &split.val, &split.test}) {
    const auto c = counts(*part);
    const double total = std::accumulate(c.begin(), c.end(), 0.0);
    if (total == 0.0) continue;
    for (int j = 0; j < k; ++j) worst = std::max(worst, std::abs(c[j] / total - global[j] / global_total));
  }
  return worst;
}

}  // namespace thermofuse
