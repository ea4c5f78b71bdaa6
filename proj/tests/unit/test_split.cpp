#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "thermofuse/detection.hpp"
#include "thermofuse/error.hpp"
#include "thermofuse/rng.hpp"

using namespace thermofuse;
namespace fs = std::filesystem;

namespace {

// Images with the survey's class mix (1481 / 126 / 94 objects over 755 images).
std::vector<AnnotationSet> survey_like(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<AnnotationSet> out;
  for (int i = 0; i < n; ++i) {
    AnnotationSet s{"img" + std::to_string(i), {1792, 1433}, Taxonomy::Vis, AnnotationKind::GroundTruth, {}};
    const auto k = 1 + rng.poisson(1.25);
    for (std::uint64_t j = 0; j < k; ++j) {
      const double u = rng.uniform();
      const int cls = u < 1481.0 / 1701 ? 0 : (u < 1607.0 / 1701 ? 1 : 2);
      s.detections.push_back({{10.0 * j, 0, 10.0 * j + 5, 5}, cls, 1.0});
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

TEST(SplitSizes, LargestRemainder) {
  EXPECT_EQ(split_sizes(755, {}), (std::array<std::size_t, 3>{483, 121, 151}));
  EXPECT_EQ(split_sizes(10, {1, 0, 0}), (std::array<std::size_t, 3>{10, 0, 0}));
  EXPECT_EQ(split_sizes(3, {0.5, 0.25, 0.25}), (std::array<std::size_t, 3>{1, 1, 1}));  // remainders .5 < .75 = .75
  EXPECT_EQ(split_sizes(0, {}), (std::array<std::size_t, 3>{0, 0, 0}));
  EXPECT_THROW(split_sizes(10, {0.5, 0.5, 0.5}), Error);
  EXPECT_THROW(split_sizes(10, {1.2, -0.1, -0.1}), Error);
}

TEST(StratifiedSplit, SurveySizedDataset) {
  const auto sets = survey_like(755, 42);
  const SplitResult r = stratified_split(sets, {}, 42);
  EXPECT_NEAR(static_cast<double>(r.train.size()), 483, 2);
  EXPECT_NEAR(static_cast<double>(r.val.size()), 121, 2);
  EXPECT_NEAR(static_cast<double>(r.test.size()), 151, 2);
  EXPECT_TRUE(r.stratified);
  EXPECT_LE(max_class_share_deviation(sets, r), 0.03);
}

TEST(StratifiedSplit, DisjointExhaustiveDeterministic) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto sets = survey_like(200 + static_cast<int>(seed) * 37, seed);
    const SplitResult a = stratified_split(sets, {}, seed);
    const SplitResult b = stratified_split(sets, {}, seed);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.val, b.val);
    EXPECT_EQ(a.test, b.test);
    std::set<std::size_t> all;
    for (const auto* part : {&a.train, &a.val, &a.test}) all.insert(part->begin(), part->end());
    EXPECT_EQ(all.size(), sets.size());
    EXPECT_EQ(a.train.size() + a.val.size() + a.test.size(), sets.size());
  }
  const auto sets = survey_like(300, 5);
  EXPECT_NE(stratified_split(sets, {}, 1).test, stratified_split(sets, {}, 2).test);
}

TEST(StratifiedSplit, UniformProfileAlwaysStratified) {
  std::vector<AnnotationSet> sets(100, AnnotationSet{"x", {10, 10}, Taxonomy::Vis, AnnotationKind::GroundTruth,
                                                    {{{0, 0, 1, 1}, 0, 1.0}}});
  const SplitResult r = stratified_split(sets, {}, 9);
  EXPECT_TRUE(r.stratified);
  EXPECT_EQ(max_class_share_deviation(sets, r), 0.0);
}

TEST(StratifiedSplit, AllToTrain) {
  const auto sets = survey_like(50, 7);
  const SplitResult r = stratified_split(sets, {1, 0, 0}, 1);
  EXPECT_EQ(r.train.size(), 50u);
  EXPECT_TRUE(r.val.empty());
  EXPECT_TRUE(r.test.empty());
  const auto asg = r.assignment(50);
  EXPECT_TRUE(std::all_of(asg.begin(), asg.end(), [](Split s) { return s == Split::Train; }));
}

TEST(StratifiedSplit, InfeasibleDegradesToWarning) {
  // One image carries every rare object: no split can match the global share.
  std::vector<AnnotationSet> sets;
  for (int i = 0; i < 10; ++i) {
    AnnotationSet s{"i", {10, 10}, Taxonomy::Vis, AnnotationKind::GroundTruth, {{{0, 0, 1, 1}, 0, 1.0}}};
    if (i == 0) {
      for (int k = 0; k < 20; ++k) s.detections.push_back({{0, 0, 1, 1}, 2, 1.0});
    }
    sets.push_back(s);
  }
  const SplitResult r = stratified_split(sets, {}, 1);
  EXPECT_FALSE(r.stratified);
  EXPECT_NE(r.warning.find("InfeasibleStratification"), std::string::npos);
  EXPECT_EQ(r.train.size() + r.val.size() + r.test.size(), 10u);
}

TEST(SplitNames, RoundTrip) {
  for (Split s : {Split::Train, Split::Val, Split::Test}) EXPECT_EQ(split_from_string(to_string(s)), s);
  EXPECT_EQ(split_from_string("all"), std::nullopt);
}

TEST(Manifest, WriteReadRoundTrip) {
  const fs::path dir = fs::temp_directory_path() / "thermofuse_manifest";
  fs::remove_all(dir);
  const std::vector<ManifestEntry> entries{
      {"a", "vis/a.png", "tir/a.png", "gt_vis/a.txt", "gt_tir/a.txt", Split::Test},
      {"b", "/abs/vis/b.png", "", "", "", std::nullopt}};
  const std::string path = (dir / "m.jsonl").string();
  write_manifest(path, entries);
  const auto back = read_manifest(path);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].image_id, "a");
  EXPECT_EQ(back[0].split, Split::Test);
  EXPECT_EQ(back[1].split, std::nullopt);
  EXPECT_EQ(back[1].vis_path, "/abs/vis/b.png");
  EXPECT_EQ(resolve_path(path, back[0].vis_path), (dir / "vis/a.png").string());
  EXPECT_EQ(resolve_path(path, back[1].vis_path), "/abs/vis/b.png");
}

TEST(Manifest, MalformedLinesReported) {
  const fs::path dir = fs::temp_directory_path() / "thermofuse_manifest_bad";
  fs::create_directories(dir);
  const std::string path = (dir / "m.jsonl").string();
  std::ofstream(path) << "{\"image_id\": \"a\"}\n{\"image_id\": \"b\", \"split\": \"holdout\"}\n";
  try {
    read_manifest(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedLine);
    EXPECT_EQ(e.line(), 2);
  }
  std::ofstream(path) << "not json\n";
  EXPECT_THROW(read_manifest(path), Error);
  try {
    read_manifest((dir / "missing.jsonl").string());
    FAIL();
  } catch (const Error& e) {
    EXPECT_TRUE(e.is_io());
  }
}
