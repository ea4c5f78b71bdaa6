#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "support/oracles.hpp"
#include "thermofuse/error.hpp"
#include "thermofuse/geometry.hpp"
#include "thermofuse/rng.hpp"

using namespace thermofuse;

namespace {

void expect_affine_near(const AffineTransform& got, const AffineTransform& want, double tol) {
  const auto g = got.params();
  const auto w = want.params();
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(g[i], w[i], tol) << "param " << i;
}

BBox random_box(Rng& rng) {
  const double x = rng.uniform(-100, 100);
  const double y = rng.uniform(-100, 100);
  return {x, y, x + rng.uniform(0.1, 80), y + rng.uniform(0.1, 80)};
}

AffineTransform random_affine(Rng& rng) {
  for (;;) {
    AffineTransform t{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2),
                      rng.uniform(-2, 2), rng.uniform(-50, 50), rng.uniform(-50, 50)};
    if (std::abs(t.determinant()) > 0.2) return t;
  }
}

}  // namespace

TEST(Iou, IdenticalBoxesGiveOne) {
  EXPECT_DOUBLE_EQ(iou({0, 0, 10, 10}, {0, 0, 10, 10}), 1.0);
}

TEST(Iou, DisjointBoxesGiveZero) {
  EXPECT_DOUBLE_EQ(iou({0, 0, 1, 1}, {5, 5, 6, 6}), 0.0);
  // Touching edges share no area.
  EXPECT_DOUBLE_EQ(iou({0, 0, 1, 1}, {1, 0, 2, 1}), 0.0);
}

TEST(Iou, PartialOverlapMatchesPixelCount) {
  const double want = oracle::pixel_count_iou(0, 0, 10, 10, 5, 5, 15, 15);
  EXPECT_NEAR(want, 25.0 / 175.0, 1e-15);
  EXPECT_NEAR(iou({0, 0, 10, 10}, {5, 5, 15, 15}), want, 1e-12);
}

TEST(Iou, RandomIntegerBoxesMatchPixelCount) {
  Rng rng(7);
  for (int i = 0; i < 300; ++i) {
    const int ax = static_cast<int>(rng.below(30)), ay = static_cast<int>(rng.below(30));
    const int bx = static_cast<int>(rng.below(30)), by = static_cast<int>(rng.below(30));
    const int aw = 1 + static_cast<int>(rng.below(20)), ah = 1 + static_cast<int>(rng.below(20));
    const int bw = 1 + static_cast<int>(rng.below(20)), bh = 1 + static_cast<int>(rng.below(20));
    const double want = oracle::pixel_count_iou(ax, ay, ax + aw, ay + ah, bx, by, bx + bw, by + bh);
    EXPECT_NEAR(iou({double(ax), double(ay), double(ax + aw), double(ay + ah)},
                    {double(bx), double(by), double(bx + bw), double(by + bh)}),
                want, 1e-12);
  }
}

TEST(Iou, SymmetricBoundedAndReflexive) {
  Rng rng(11);
  for (int i = 0; i < 2000; ++i) {
    const BBox a = random_box(rng);
    const BBox b = random_box(rng);
    const double ab = iou(a, b);
    EXPECT_EQ(ab, iou(b, a));
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
    EXPECT_DOUBLE_EQ(iou(a, a), 1.0);
  }
}

TEST(BBoxTest, MakeRejectsInvalid) {
  EXPECT_THROW(make_bbox(1, 0, 1, 2), Error);
  EXPECT_THROW(make_bbox(0, 3, 1, 2), Error);
  EXPECT_THROW(make_bbox(0, 0, NAN, 2), Error);
  EXPECT_NO_THROW(make_bbox(0, 0, 1, 2));
  EXPECT_DOUBLE_EQ(make_bbox(0, 0, 4, 2).area(), 8.0);
}

TEST(Affine, ApplyIdentityAndScaleTranslate) {
  EXPECT_EQ(apply(AffineTransform::identity(), {3, 4}), (Point2{3, 4}));
  EXPECT_EQ(apply({2, 0, 0, 2, 3, 4}, {1, 1}), (Point2{5, 6}));
}

TEST(Affine, InvertExamples) {
  EXPECT_EQ(invert(AffineTransform::identity()), AffineTransform::identity());
  expect_affine_near(invert({1, 0, 0, 1, 5, -2}), {1, 0, 0, 1, -5, 2}, 0.0);
  expect_affine_near(invert({2, 0, 0, 2, 0, 0}), {0.5, 0, 0, 0.5, 0, 0}, 0.0);
}

TEST(Affine, InvertSingularThrows) {
  try {
    invert({1, 2, 2, 4, 0, 0});
    FAIL() << "expected SingularTransform";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingularTransform);
  }
  EXPECT_THROW(invert({1e-7, 0, 0, 1e-6, 0, 0}), Error);
}

TEST(Affine, InvertRoundTrip) {
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    const AffineTransform t = random_affine(rng);
    const AffineTransform ti = invert(t);
    const Point2 p{rng.uniform(-1e4, 1e4), rng.uniform(-1e4, 1e4)};
    const Point2 q = apply(ti, apply(t, p));
    EXPECT_NEAR(q.x, p.x, 1e-9 * 1e4 * 10);
    EXPECT_NEAR(q.y, p.y, 1e-9 * 1e4 * 10);
    const Point2 r = apply(compose(t, ti), p);
    EXPECT_NEAR(r.x, p.x, 1e-7);
    EXPECT_NEAR(r.y, p.y, 1e-7);
  }
}

TEST(Affine, InvertRoundTripWellConditioned) {
  // Rotation + scale + translation: well conditioned, so 1e-9 px holds.
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const double th = rng.uniform(-3, 3), s = rng.uniform(0.5, 3);
    const AffineTransform t{s * std::cos(th), -s * std::sin(th), s * std::sin(th), s * std::cos(th),
                            rng.uniform(-100, 100), rng.uniform(-100, 100)};
    const Point2 p{rng.uniform(-1e4, 1e4), rng.uniform(-1e4, 1e4)};
    const Point2 q = apply(invert(t), apply(t, p));
    EXPECT_NEAR(q.x, p.x, 1e-9 * 1e4);
    EXPECT_NEAR(q.y, p.y, 1e-9 * 1e4);
  }
}

TEST(WarpBBox, IdentityAndScale) {
  const BBox b{1, 2, 7, 9};
  EXPECT_EQ(warp_bbox(AffineTransform::identity(), b), b);
  EXPECT_EQ(warp_bbox(AffineTransform::scale(2), {0, 0, 1, 1}), (BBox{0, 0, 2, 2}));
}

TEST(WarpBBox, RotationMatchesCornerEnumeration) {
  const double c = std::cos(M_PI / 4), s = std::sin(M_PI / 4);
  const AffineTransform rot{c, -s, s, c, 0, 0};
  const BBox got = warp_bbox(rot, {0, 0, 1, 1});
  // Corners (0,0), (1,0), (1,1), (0,1) rotated by 45 degrees.
  const std::vector<Point2> corners{{0, 0}, {c, s}, {c - s, s + c}, {-s, c}};
  double x0 = 1e9, y0 = 1e9, x1 = -1e9, y1 = -1e9;
  for (const auto& p : corners) {
    x0 = std::min(x0, p.x);
    y0 = std::min(y0, p.y);
    x1 = std::max(x1, p.x);
    y1 = std::max(y1, p.y);
  }
  EXPECT_NEAR(got.xmin, x0, 1e-9);
  EXPECT_NEAR(got.ymin, y0, 1e-9);
  EXPECT_NEAR(got.xmax, x1, 1e-9);
  EXPECT_NEAR(got.ymax, y1, 1e-9);
  EXPECT_NEAR(got.xmin, -std::sqrt(2.0) / 2, 1e-9);
  EXPECT_NEAR(got.xmax, std::sqrt(2.0) / 2, 1e-9);
  EXPECT_NEAR(got.ymax, std::sqrt(2.0), 1e-9);
}

TEST(WarpBBox, CommutesWithTranslation) {
  Rng rng(17);
  for (int i = 0; i < 200; ++i) {
    const AffineTransform t = random_affine(rng);
    const BBox b = random_box(rng);
    const double dx = rng.uniform(-20, 20), dy = rng.uniform(-20, 20);
    const BBox shifted{b.xmin + dx, b.ymin + dy, b.xmax + dx, b.ymax + dy};
    // warp(t, b + d) == warp(t o translate(d), b)
    const BBox lhs = warp_bbox(t, shifted);
    const BBox rhs = warp_bbox(compose(t, AffineTransform::translation(dx, dy)), b);
    EXPECT_NEAR(lhs.xmin, rhs.xmin, 1e-9);
    EXPECT_NEAR(lhs.ymin, rhs.ymin, 1e-9);
    EXPECT_NEAR(lhs.xmax, rhs.xmax, 1e-9);
    EXPECT_NEAR(lhs.ymax, rhs.ymax, 1e-9);
  }
}

TEST(WarpBBox, SingularThrows) { EXPECT_THROW(warp_bbox({0, 0, 0, 0, 1, 1}, {0, 0, 1, 1}), Error); }

TEST(AffineLsq, ExactThreePointSolve) {
  const std::vector<KeypointMatch> m{{{0, 0}, {3, 4}}, {{1, 0}, {5, 4}}, {{0, 1}, {3, 6}}};
  expect_affine_near(estimate_affine_lsq(m), {2, 0, 0, 2, 3, 4}, 1e-12);
}

TEST(AffineLsq, IdentityOnRandomPoints) {
  Rng rng(1);
  std::vector<KeypointMatch> m;
  for (int i = 0; i < 10; ++i) {
    const Point2 p{rng.uniform(0, 640), rng.uniform(0, 512)};
    m.push_back({p, p});
  }
  expect_affine_near(estimate_affine_lsq(m), AffineTransform::identity(), 1e-9);
}

TEST(AffineLsq, NoiselessRecoveryOfRandomAffines) {
  Rng rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    const AffineTransform t = random_affine(rng);
    std::vector<KeypointMatch> m;
    const int n = 3 + static_cast<int>(rng.below(20));
    for (int i = 0; i < n; ++i) {
      const Point2 p{rng.uniform(0, 640), rng.uniform(0, 512)};
      m.push_back({p, apply(t, p)});
    }
    expect_affine_near(estimate_affine_lsq(m), t, 1e-9);
  }
}

TEST(AffineLsq, NoisyFitMatchesNormalEquationsOracle) {
  Rng rng(99);
  const AffineTransform truth{0.92, 0.05, -0.07, 1.04, 12.5, -30.0};
  std::vector<KeypointMatch> m;
  for (int i = 0; i < 100; ++i) {
    const Point2 p{rng.uniform(0, 640), rng.uniform(0, 512)};
    const Point2 q = apply(truth, p);
    m.push_back({p, {q.x + rng.normal(0, 0.5), q.y + rng.normal(0, 0.5)}});
  }
  const AffineTransform fit = estimate_affine_lsq(m);
  const AffineTransform ref = oracle::normal_equations_affine(m);
  expect_affine_near(fit, ref, 1e-6);
  // Linear part well within 1e-2; translation has a larger standard error.
  EXPECT_NEAR(fit.a, truth.a, 1e-2);
  EXPECT_NEAR(fit.b, truth.b, 1e-2);
  EXPECT_NEAR(fit.c, truth.c, 1e-2);
  EXPECT_NEAR(fit.d, truth.d, 1e-2);
}

TEST(AffineLsq, ResidualNotBeatenByPerturbations) {
  Rng rng(31);
  const AffineTransform truth{1.1, 0.02, 0.03, 0.95, 4, 7};
  std::vector<KeypointMatch> m;
  for (int i = 0; i < 50; ++i) {
    const Point2 p{rng.uniform(0, 640), rng.uniform(0, 512)};
    const Point2 q = apply(truth, p);
    m.push_back({p, {q.x + rng.normal(0, 2), q.y + rng.normal(0, 2)}});
  }
  const AffineTransform fit = estimate_affine_lsq(m);
  const auto sse = [&](const AffineTransform& t) {
    double s = 0;
    for (const auto& k : m) s += squared_residual(t, k);
    return s;
  };
  const double best = sse(fit);
  for (int i = 0; i < 500; ++i) {
    AffineTransform p = fit;
    const double scale = std::pow(10.0, -static_cast<double>(rng.below(6)));
    p.a += rng.normal(0, scale * 1e-2);
    p.b += rng.normal(0, scale * 1e-2);
    p.c += rng.normal(0, scale * 1e-2);
    p.d += rng.normal(0, scale * 1e-2);
    p.tx += rng.normal(0, scale);
    p.ty += rng.normal(0, scale);
    EXPECT_GE(sse(p), best * (1 - 1e-12));
  }
}

TEST(AffineLsq, DegenerateInputsThrow) {
  const std::vector<KeypointMatch> two{{{0, 0}, {0, 0}}, {{1, 0}, {1, 0}}};
  const std::vector<KeypointMatch> line{{{0, 0}, {0, 0}}, {{1, 1}, {1, 1}}, {{2, 2}, {2, 2}}, {{5, 5}, {1, 1}}};
  for (const auto* m : {&two, &line}) {
    try {
      estimate_affine_lsq(*m);
      FAIL() << "expected DegenerateConfiguration";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::DegenerateConfiguration);
    }
  }
}

TEST(MatchFile, ParsesCommentsAndOptionalConfidence) {
  const auto m = parse_matches("# header\n1 2 3 4\n\n5 6 7 8 0.25  # trailing\n");
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0].src, (Point2{1, 2}));
  EXPECT_EQ(m[0].dst, (Point2{3, 4}));
  EXPECT_DOUBLE_EQ(m[0].confidence, 1.0);
  EXPECT_DOUBLE_EQ(m[1].confidence, 0.25);
}

TEST(MatchFile, MalformedLineCarriesLineNumber) {
  try {
    parse_matches("1 2 3 4\n1 2 x 4\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedLine);
    EXPECT_EQ(e.line(), 2);
  }
  EXPECT_THROW(parse_matches("1 2 3 4 1.5\n"), Error);  // confidence outside [0,1]
  EXPECT_THROW(parse_matches("1 2 3\n"), Error);
}

TEST(MatchFile, MissingFileIsIoError) {
  try {
    read_matches_file("/nonexistent/dir/file.matches");
    FAIL();
  } catch (const Error& e) {
    EXPECT_TRUE(e.is_io());
  }
}
