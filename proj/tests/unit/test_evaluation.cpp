#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>

#include "support/oracles.hpp"
#include "thermofuse/error.hpp"
#include "thermofuse/evaluation.hpp"
#include "thermofuse/rng.hpp"

using namespace thermofuse;
namespace fs = std::filesystem;

namespace {

constexpr ImageDims kCanvas{1792, 1433};

AnnotationSet gt_of(std::vector<Detection> d) {
  return {"img", kCanvas, Taxonomy::Vis, AnnotationKind::GroundTruth, std::move(d)};
}

AnnotationSet pred_of(std::vector<Detection> d) {
  return {"img", kCanvas, Taxonomy::Vis, AnnotationKind::Predicted, std::move(d)};
}

Detection det(double x0, double y0, double x1, double y1, int cls = 0, double score = 1.0) {
  return {{x0, y0, x1, y1}, cls, score};
}

ConfusionMatrix load_fixture(std::int64_t& images) {
  const fs::path root = fs::path(THERMOFUSE_TEST_DATA) / "golden" / "vis_only";
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(root / "gt")) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  ConfusionMatrix cm(3);
  for (const auto& f : files) {
    const std::string id = f.stem().string();
    const auto gt = read_detections_file(f.string(), Taxonomy::Vis, kCanvas, AnnotationKind::GroundTruth, id);
    const auto pred = read_detections_file((root / "pred" / f.filename()).string(), Taxonomy::Vis, kCanvas,
                                           AnnotationKind::Predicted, id);
    cm.add(match_to_gt(pred, gt));
  }
  images = static_cast<std::int64_t>(files.size());
  return cm;
}

}  // namespace

TEST(MatchToGt, PerfectAndEmpty) {
  const auto gt = gt_of({det(0, 0, 10, 10, 0), det(20, 20, 30, 30, 1)});
  auto m = match_to_gt(pred_of(gt.detections), gt);
  const auto cm = confusion_matrix(m, 3);
  EXPECT_EQ(cm.at(0, 0), 1);
  EXPECT_EQ(cm.at(1, 1), 1);
  EXPECT_EQ(cm.false_negatives(), 0);
  EXPECT_EQ(cm.false_positives(), 0);

  m = match_to_gt(pred_of({}), gt);
  const auto none = confusion_matrix(m, 3);
  EXPECT_EQ(none.false_negatives(), 2);
  EXPECT_EQ(none.at(0, 3), 1);
  EXPECT_EQ(none.at(1, 3), 1);
}

TEST(MatchToGt, HigherScoreWins) {
  const auto gt = gt_of({det(0, 0, 10, 10)});
  const auto m = match_to_gt(pred_of({det(0, 0, 10, 8, 0, 0.6), det(0, 0, 10, 7, 0, 0.9)}), gt);
  int fp = 0;
  for (const auto& x : m) {
    if (x.gt_class >= 0 && x.pred_class >= 0) EXPECT_EQ(x.pred_index, 1);
    fp += x.gt_class < 0 ? 1 : 0;
  }
  EXPECT_EQ(fp, 1);
}

TEST(MatchToGt, FiltersLowScoresAndForeignClasses) {
  const auto gt = gt_of({det(0, 0, 10, 10)});
  EvalConfig cfg;
  auto cm = confusion_matrix(match_to_gt(pred_of({det(0, 0, 10, 10, 0, 0.49)}), gt, cfg), 3);
  EXPECT_EQ(cm.detections(), 0);
  EXPECT_EQ(cm.false_negatives(), 1);
  cm = confusion_matrix(match_to_gt(pred_of({det(0, 0, 10, 10, 0, 0.5)}), gt, cfg), 3);
  EXPECT_EQ(cm.at(0, 0), 1);
  // A fused FalsePositive label never reaches the matrix.
  cm = confusion_matrix(match_to_gt(pred_of({det(0, 0, 10, 10, 3, 0.9)}), gt, cfg), 3);
  EXPECT_EQ(cm.detections(), 0);
  cfg.iou_match_thresh = 0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.score_thresh = 1.0;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(MatchToGt, CanvasMismatch) {
  auto p = pred_of({});
  p.dims = {640, 512};
  EXPECT_THROW(match_to_gt(p, gt_of({})), Error);
}

TEST(MatchToGt, SmallInstancesAgainstAssignmentOracle) {
  // With well-separated scores and at most one overlapping candidate per GT,
  // score-ordered greedy and maximum-cardinality assignment agree.
  Rng rng(21);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<Detection> g, p;
    for (std::uint64_t i = 0, n = 1 + rng.below(4); i < n; ++i) {
      g.push_back(det(100.0 * i, 0, 100.0 * i + 40, 40, static_cast<int>(rng.below(3))));
    }
    for (std::uint64_t i = 0, n = 1 + rng.below(4); i < n; ++i) {
      const double x = 100.0 * rng.below(5) + rng.uniform(-15, 15);
      p.push_back(det(x, 0, x + 40, 40, static_cast<int>(rng.below(3)), 0.5 + 0.1 * i));
    }
    const auto m = match_to_gt(pred_of(p), gt_of(g));
    std::vector<std::vector<double>> w(p.size(), std::vector<double>(g.size()));
    for (std::size_t i = 0; i < p.size(); ++i) {
      for (std::size_t j = 0; j < g.size(); ++j) {
        const double v = iou(p[i].box, g[j].box);
        w[i][j] = v >= 0.5 ? 1.0 : 0.0;
      }
    }
    const auto best = oracle::exhaustive_assignment(w, [](double x) { return x > 0; });
    const auto matched = std::count_if(m.begin(), m.end(), [](const GtMatch& x) { return x.gt_class >= 0 && x.pred_class >= 0; });
    EXPECT_EQ(static_cast<double>(matched), best.total);
    const auto cm = confusion_matrix(m, 3);
    EXPECT_EQ(cm.detections(), static_cast<std::int64_t>(p.size()));
    EXPECT_EQ(cm.ground_truth(), static_cast<std::int64_t>(g.size()));
  }
}

TEST(ConfusionMatrixTest, Examples) {
  std::vector<GtMatch> m(5, GtMatch{0, 0, 1.0, 0, 0});
  auto cm = confusion_matrix(m, 1);
  EXPECT_EQ(cm.at(0, 0), 5);
  EXPECT_EQ(cm.at(0, 1) + cm.at(1, 0) + cm.at(1, 1), 0);
  const auto r = macro_metrics(cm, Taxonomy::Tir);
  EXPECT_EQ(r.macro_f1, 1.0);
  EXPECT_EQ(r.macro_precision, 1.0);
  EXPECT_EQ(r.macro_recall, 1.0);
  EXPECT_EQ(r.per_class[0].name, "heron");

  cm = ConfusionMatrix(3);
  const std::vector<GtMatch> off{{0, 1, 0.9, 0, 0}, {-1, 0, 0.0, -1, 1}, {2, -1, 0.0, 1, -1}};
  cm.add(off);
  EXPECT_EQ(cm.at(0, 1), 1);
  EXPECT_EQ(cm.at(cm.background(), 0), 1);  // egret-style false positive
  EXPECT_EQ(cm.at(2, cm.background()), 1);
  EXPECT_EQ(cm.detections(), 2);
  EXPECT_EQ(cm.ground_truth(), 2);
}

TEST(ConfusionMatrixTest, MergeIsOrderIndependent) {
  ConfusionMatrix a(3), b(3);
  a.at(0, 0) = 3;
  a.at(3, 1) = 2;
  b.at(1, 1) = 4;
  b.at(2, 3) = 1;
  ConfusionMatrix ab = a, ba = b;
  ab += b;
  ba += a;
  EXPECT_EQ(ab, ba);
  EXPECT_THROW(ab += ConfusionMatrix(1), Error);
}

TEST(Metrics, MacroF1IsMeanOfClassF1) {
  EXPECT_NEAR(macro_f1(std::vector<double>{0.902, 0.440, 0.357}), 0.5663333333, 1e-9);
  EXPECT_NEAR(macro_f1(std::vector<double>{0.930, 0.444, 0.381}), 0.585, 1e-12);
  EXPECT_EQ(f1_score(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(f1_score(0.5, 1.0), 2.0 / 3.0);
}

TEST(Metrics, BoundsAndMonotonicity) {
  Rng rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    ConfusionMatrix cm(3);
    for (int t = 0; t < 4; ++t) {
      for (int p = 0; p < 4; ++p) {
        if (t != 3 || p != 3) cm.at(t, p) = static_cast<std::int64_t>(rng.below(20));
      }
    }
    const auto r = macro_metrics(cm);
    double sum = 0;
    for (const auto& c : r.per_class) {
      for (double v : {c.precision, c.recall, c.f1}) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
      }
      sum += c.f1;
    }
    EXPECT_NEAR(r.macro_f1, sum / 3, 1e-12);
    const int k = static_cast<int>(rng.below(3));
    ConfusionMatrix more = cm;
    ++more.at(k, k);
    const auto r2 = macro_metrics(more);
    EXPECT_GE(r2.per_class[k].precision, r.per_class[k].precision);
    EXPECT_GE(r2.per_class[k].recall, r.per_class[k].recall);
    EXPECT_GE(r2.per_class[k].f1, r.per_class[k].f1);
  }
}

TEST(Report, EmptyDatasetIsAllZero) {
  const auto r = macro_metrics(ConfusionMatrix(3));
  EXPECT_EQ(r.macro_f1, 0.0);
  EXPECT_EQ(r.detections, 0);
  const std::string text = render_report(r);
  EXPECT_NE(text.find("False negatives: 0 (0%)"), std::string::npos);
  EXPECT_EQ(parse_report_csv(report_csv(r)), r);
}

TEST(Report, CsvRoundTrip) {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    ConfusionMatrix cm(3);
    for (int t = 0; t < 4; ++t) {
      for (int p = 0; p < 4; ++p) {
        if (t != 3 || p != 3) cm.at(t, p) = static_cast<std::int64_t>(rng.below(50));
      }
    }
    const auto r = macro_metrics(cm, Taxonomy::Vis, trial);
    EXPECT_EQ(parse_report_csv(report_csv(r)), r);
  }
  EXPECT_THROW(parse_report_csv("nonsense"), Error);
}

TEST(Report, VisOnlyFixtureReproducesTableCounts) {
  std::int64_t images = 0;
  const ConfusionMatrix cm = load_fixture(images);
  const MetricsReport r = macro_metrics(cm, Taxonomy::Vis, images);
  EXPECT_EQ(r.images, 149);
  EXPECT_EQ(r.detections, 372);
  EXPECT_EQ(r.false_negatives, 25);
  EXPECT_EQ(r.false_positives, 28);
  EXPECT_EQ(r.ground_truth, 369);
  EXPECT_NEAR(r.per_class[0].f1, 0.902, 5e-4);
  EXPECT_NEAR(r.per_class[1].f1, 0.440, 5e-4);
  EXPECT_NEAR(r.per_class[2].f1, 0.357, 5e-4);
  EXPECT_NEAR(r.macro_f1, 0.566, 5e-4);
  const std::string text = render_report(r);
  EXPECT_NE(text.find("Detections: 372"), std::string::npos);
  EXPECT_NE(text.find("25 (7%)"), std::string::npos);
  EXPECT_NE(text.find("28 (8%)"), std::string::npos);
  EXPECT_NE(text.find("F1 score: 56.6%"), std::string::npos);
}
