#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "thermofuse/cli.hpp"
#include "thermofuse/raster.hpp"
#include "thermofuse/rng.hpp"

using namespace thermofuse;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("thermofuse_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

const fs::path kFixture = fs::path(THERMOFUSE_TEST_DATA) / "golden" / "vis_only";

}  // namespace

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(cli({}).code, kExitValidation);
  EXPECT_EQ(cli({"frobnicate"}).code, kExitValidation);
  EXPECT_EQ(cli({"evaluate", "--gt", "x"}).code, kExitValidation);
  EXPECT_EQ(cli({"--version"}).code, kExitOk);
  EXPECT_EQ(cli({"--help"}).code, kExitOk);
}

TEST(Cli, UnknownConfigKeyNamed) {
  const fs::path dir = scratch("badkey");
  std::ofstream(dir / "c.toml") << "[eval]\niou = 0.5\nthreshold = 0.3\n";
  const CliRun r = cli({"evaluate", "--pred", kFixture / "pred", "--gt", kFixture / "gt", "--config", dir / "c.toml",
                     "--out", dir / "r.csv"});
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_NE(r.err.find("eval.threshold"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("line 3"), std::string::npos) << r.err;
  EXPECT_EQ(cli({"simulate", "--set", "nope=1", "--out", dir}).code, kExitValidation);
}

TEST(Cli, MissingInputsExitTwo) {
  const fs::path dir = scratch("missing");
  EXPECT_EQ(cli({"simulate", "--config", "/nonexistent/c.toml", "--out", dir}).code, kExitIo);
  EXPECT_EQ(cli({"split", "--manifest", dir / "none.jsonl", "--out", dir / "m.jsonl"}).code, kExitIo);
  EXPECT_EQ(cli({"fuse-late", "--tree", dir / "none.json", "--manifest", dir / "none.jsonl", "--out", dir}).code,
            kExitIo);
}

TEST(Cli, EvaluateVisOnlyFixture) {
  const fs::path dir = scratch("eval");
  const CliRun r = cli({"evaluate", "--pred", kFixture / "pred", "--gt", kFixture / "gt", "--taxonomy", "vis", "--out",
                     dir / "report.csv"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("Detections: 372"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("False negatives: 25 (7%)"), std::string::npos);
  EXPECT_NE(r.out.find("False positives: 28 (8%)"), std::string::npos);
  EXPECT_NE(r.out.find("F1 score: 56.6%"), std::string::npos);
  EXPECT_EQ(slurp(dir / "report.txt"), r.out);
  const std::string csv = slurp(dir / "report.csv");
  EXPECT_EQ(csv.rfind("class,tp,fp,fn,precision,recall,f1\n", 0), 0u);
  EXPECT_NE(csv.find("detections,372"), std::string::npos);

  const auto rec = nlohmann::json::parse(slurp(dir / "run_record_evaluate.json"));
  EXPECT_EQ(rec.at("command"), "evaluate");
  EXPECT_EQ(rec.at("config_hash").get<std::string>().size(), 16u);
  EXPECT_EQ(rec.at("version"), version());
  EXPECT_EQ(rec.at("inputs").size(), 2u);
  EXPECT_GE(rec.at("wall_time_s").get<double>(), 0.0);

  // A stricter score threshold drops detections.
  const CliRun strict = cli({"evaluate", "--pred", kFixture / "pred", "--gt", kFixture / "gt", "--score", "0.9", "--out",
                          dir / "strict.csv"});
  ASSERT_EQ(strict.code, kExitOk);
  EXPECT_EQ(strict.out.find("Detections: 372"), std::string::npos);

  const CliRun table = cli({"report", "--csv", dir / "report.csv", "--label", "VIS-only", "--out", dir / "table.txt"});
  ASSERT_EQ(table.code, kExitOk) << table.err;
  EXPECT_NE(table.out.find("VIS-only"), std::string::npos);
  EXPECT_NE(table.out.find("25 (7%)"), std::string::npos);
}

TEST(Cli, SyntheticPipelineIsDeterministic) {
  const auto run_once = [](const fs::path& dir) {
    EXPECT_EQ(cli({"simulate", "--set", "scenario.n_images=80", "--set", "scenario.vis_fp_rate=0.5", "--set",
                   "scenario.tir_fp_rate=1", "--seed", "5", "--out", dir / "data"})
                  .code,
              kExitOk);
    EXPECT_EQ(cli({"split", "--manifest", dir / "data" / "manifest.jsonl", "--seed", "5", "--out",
                   dir / "split" / "manifest.jsonl"})
                  .code,
              kExitOk);
    const CliRun train = cli({"train-late", "--manifest", dir / "split" / "manifest.jsonl", "--split", "train", "--out",
                           dir / "tree.json"});
    EXPECT_EQ(train.code, kExitOk) << train.err;
    EXPECT_EQ(cli({"fuse-late", "--tree", dir / "tree.json", "--manifest", dir / "split" / "manifest.jsonl",
                   "--split", "test", "--out", dir / "fused"})
                  .code,
              kExitOk);
    const CliRun ev = cli({"evaluate", "--pred", dir / "fused", "--gt", dir / "data" / "gt_vis", "--taxonomy", "fused",
                        "--manifest", dir / "split" / "manifest.jsonl", "--split", "test", "--out",
                        dir / "late.csv"});
    EXPECT_EQ(ev.code, kExitOk) << ev.err;
  };
  const fs::path a = scratch("pipe_a"), b = scratch("pipe_b");
  run_once(a);
  run_once(b);
  EXPECT_FALSE(slurp(a / "tree.json").empty());
  EXPECT_EQ(slurp(a / "tree.json"), slurp(b / "tree.json"));
  EXPECT_EQ(slurp(a / "late.csv"), slurp(b / "late.csv"));
  EXPECT_EQ(digest_path((a / "fused").string()), digest_path((b / "fused").string()));
  EXPECT_EQ(slurp(a / "split" / "manifest.jsonl"), slurp(b / "split" / "manifest.jsonl"));
}

TEST(Cli, AlignThenFuseEarly) {
  const fs::path dir = scratch("align");
  fs::create_directories(dir / "raw");
  Rng rng(3);
  Raster vis(300, 200, 3), tir(64, 48, 1);
  for (int b = 0; b < 3; ++b) {
    for (auto& v : vis.band(b)) v = static_cast<double>(rng.below(256));
  }
  for (auto& v : tir.band(0)) v = rng.uniform(20, 40);
  write_raster((dir / "raw" / "p1.png").string(), vis);
  write_raster((dir / "raw" / "p1_tir.tiff").string(), tir);
  write_raster((dir / "raw" / "p2.png").string(), vis);
  write_raster((dir / "raw" / "p2_tir.tiff").string(), tir);
  {
    std::ofstream m1(dir / "raw" / "p1.matches");
    for (int i = 0; i < 60; ++i) {
      const double x = rng.uniform(0, 180), y = rng.uniform(0, 120);
      m1 << x << ' ' << y << ' ' << 0.3 * x + 2 << ' ' << 0.3 * y - 1 << '\n';
    }
    std::ofstream m2(dir / "raw" / "p2.matches");
    for (int i = 0; i < 10; ++i) m2 << i << ' ' << 2 * i << ' ' << i << ' ' << i * i << '\n';
  }
  std::ofstream(dir / "raw" / "manifest.jsonl")
      << R"({"image_id": "p1", "vis_path": "p1.png", "tir_path": "p1_tir.tiff", "gt_vis_path": "", "gt_tir_path": ""})"
      << "\n"
      << R"({"image_id": "p2", "vis_path": "p2.png", "tir_path": "p2_tir.tiff", "gt_vis_path": "", "gt_tir_path": ""})"
      << "\n";
  const CliRun al = cli({"align", "--manifest", dir / "raw" / "manifest.jsonl", "--out", dir / "aligned"});
  ASSERT_EQ(al.code, kExitOk) << al.err;
  std::istringstream report(slurp(dir / "aligned" / "gate_report.jsonl"));
  std::string l1, l2;
  std::getline(report, l1);
  std::getline(report, l2);
  EXPECT_EQ(nlohmann::json::parse(l1).at("verdict"), "accept");
  const auto rej = nlohmann::json::parse(l2);
  EXPECT_EQ(rej.at("verdict"), "reject");
  EXPECT_EQ(rej.at("reason"), "TooFewKeypoints");
  EXPECT_TRUE(fs::exists(dir / "aligned" / "p1_vis.png"));
  EXPECT_FALSE(fs::exists(dir / "aligned" / "p2_vis.png"));

  const CliRun fe = cli({"fuse-early", "--pairs", dir / "aligned" / "gate_report.jsonl", "--global-pca", "--rescale",
                      "minmax", "--out", dir / "fused"});
  ASSERT_EQ(fe.code, kExitOk) << fe.err;
  EXPECT_TRUE(fs::exists(dir / "fused" / "p1_fused.png"));
  const auto side = nlohmann::json::parse(slurp(dir / "fused" / "p1_fused.json"));
  EXPECT_EQ(side.at("rescale"), "minmax");
  EXPECT_EQ(side.at("global_pca"), true);
  EXPECT_EQ(side.at("loading").size(), 4u);
  const CliRun per_image = cli({"fuse-early", "--pairs", dir / "aligned", "--out", dir / "fused2"});
  ASSERT_EQ(per_image.code, kExitOk) << per_image.err;
  EXPECT_EQ(nlohmann::json::parse(slurp(dir / "fused2" / "p1_fused.json")).at("global_pca"), false);
  EXPECT_EQ(cli({"fuse-early", "--pairs", dir / "aligned", "--rescale", "gamma", "--out", dir / "f3"}).code,
            kExitValidation);
}

TEST(Cli, TileAndMergeRoundTrip) {
  const fs::path dir = scratch("tile");
  fs::copy(kFixture / "gt" / "test_000.txt", dir / "test_000.txt");
  const CliRun t = cli({"tile", "--in", dir / "test_000.txt", "--ground-truth", "--out", dir / "tiles"});
  ASSERT_EQ(t.code, kExitOk) << t.err;
  const CliRun m = cli({"tile", "--in", dir / "tiles", "--merge", "--ground-truth", "--out", dir / "merged"});
  ASSERT_EQ(m.code, kExitOk) << m.err;
  EXPECT_TRUE(fs::exists(dir / "merged" / "test_000.txt"));
}

TEST(Cli, DigestIsStable) {
  const fs::path dir = scratch("digest");
  std::ofstream(dir / "a.txt") << "hello";
  const std::string d1 = digest_path((dir / "a.txt").string());
  EXPECT_EQ(d1.size(), 16u);
  EXPECT_EQ(d1, digest_path((dir / "a.txt").string()));
  std::ofstream(dir / "a.txt") << "hellp";
  EXPECT_NE(d1, digest_path((dir / "a.txt").string()));
}
