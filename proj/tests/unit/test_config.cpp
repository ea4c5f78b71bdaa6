#include <gtest/gtest.h>

#include <algorithm>

#include "thermofuse/config.hpp"
#include "thermofuse/error.hpp"

using namespace thermofuse;

TEST(ConfigParse, SectionsCommentsAndValues) {
  const auto e = parse_config(
      "# top\n"
      "seed = 7\n"
      "\n"
      "[eval]\n"
      "iou = 0.6   # trailing\n"
      "[paths]\n"
      "out = \"a # not a comment\"\n");
  ASSERT_EQ(e.size(), 3u);
  EXPECT_EQ(e.at("seed").raw, "7");
  EXPECT_EQ(e.at("eval.iou").raw, "0.6");
  EXPECT_EQ(e.at("eval.iou").line, 5);
  EXPECT_EQ(e.at("paths.out").raw, "\"a # not a comment\"");
}

TEST(ConfigParse, SyntaxErrorsCarryLines) {
  for (const auto& [text, line] : std::vector<std::pair<std::string, int>>{
           {"seed = 1\nnot a pair\n", 2}, {"[eval\n", 1}, {"a = 1\na = 2\n", 2}, {"x =\n", 1}, {"\n\n[]\n", 3}}) {
    try {
      parse_config(text);
      FAIL() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::ConfigError);
      EXPECT_EQ(e.line(), line) << text;
    }
  }
}

TEST(PipelineConfigTest, AppliesTypedValues) {
  PipelineConfig c;
  c.apply(parse_config(
      "seed = 99\n[eval]\niou = 0.6\n[late]\npolicy = \"passthrough\"\n[scenario]\nclass_priors = [0.5, 0.25, 0.25]\n"
      "correlated_fp = true\n[fusion]\nrescale = \"minmax\"\n"));
  EXPECT_EQ(c.seed, 99u);
  EXPECT_EQ(c.gate.seed, 99u);
  EXPECT_EQ(c.scenario.seed, 99u);
  EXPECT_EQ(c.eval.iou_match_thresh, 0.6);
  EXPECT_EQ(c.policy, SingletonPolicy::Passthrough);
  EXPECT_EQ(c.scenario.class_priors, (std::array<double, 3>{0.5, 0.25, 0.25}));
  EXPECT_TRUE(c.scenario.correlated_fp);
  EXPECT_EQ(c.fusion.rescale, Rescale::MinMax);
  EXPECT_NO_THROW(c.validate());
}

TEST(PipelineConfigTest, UnknownKeyNamed) {
  PipelineConfig c;
  try {
    c.apply(parse_config("[eval]\nthreshold = 0.5\n"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigError);
    EXPECT_NE(std::string(e.what()).find("eval.threshold"), std::string::npos);
    EXPECT_EQ(e.line(), 2);
  }
}

TEST(PipelineConfigTest, BadValuesRejected) {
  PipelineConfig c;
  EXPECT_THROW(c.set("seed", "-1"), Error);
  EXPECT_THROW(c.set("eval.iou", "half"), Error);
  EXPECT_THROW(c.set("alignment.strict_sensor_dims", "yes"), Error);
  EXPECT_THROW(c.set("scenario.vis_recall", "[1, 1]"), Error);
  EXPECT_THROW(c.set("late.policy", "\"drop\""), Error);
  c.set("split.train", "0.9");
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.set("alignment.min_keypoints", "0");
  EXPECT_THROW(c.validate(), Error);
}

TEST(PipelineConfigTest, CanonicalFormRoundTrips) {
  PipelineConfig a;
  a.set("cart.max_depth", "3");
  a.set("scenario.vis_fp_rate", "0.125");
  PipelineConfig b;
  b.apply(parse_config(a.canonical()));
  EXPECT_EQ(a.canonical(), b.canonical());
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_EQ(a.hash().size(), 16u);
  b.set("cart.max_depth", "4");
  EXPECT_NE(a.hash(), b.hash());
  const std::string canon = a.canonical();
  EXPECT_EQ(config_keys().size(), static_cast<std::size_t>(std::count(canon.begin(), canon.end(), '\n')));
}

TEST(PipelineConfigTest, ShippedConfigsLoad) {
  for (const char* name : {"reference_scenario.toml", "pipeline.toml"}) {
    PipelineConfig c;
    EXPECT_NO_THROW(c.apply(read_config_file(std::string(THERMOFUSE_CONFIG_DIR) + "/" + name))) << name;
    EXPECT_NO_THROW(c.validate()) << name;
  }
  try {
    read_config_file("/nonexistent.toml");
    FAIL();
  } catch (const Error& e) {
    EXPECT_TRUE(e.is_io());
  }
}
