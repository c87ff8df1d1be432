// Copyright 2026 The nerfedit Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <fstream>

#include "nerfedit/train/config.hpp"
#include "test_support.hpp"

namespace nerfedit::train {
namespace {

nlohmann::json minimal_change() {
  return {{"operations", {"change"}},
          {"source_text", "a red ball"},
          {"target_text", "a green ball"},
          {"thresholds", {{"change", {{"start", 0.5}, {"target", 0.15}}}}},
          {"segmenter", {{"type", "color_key"}}}};
}

TEST(Budget, DependsOnTheOperationMix) {
  EXPECT_EQ(default_budget(render::EditOps{true, false, false}), 5000);
  EXPECT_EQ(default_budget(render::EditOps{true, true, false}), 4000);
  EXPECT_EQ(default_budget(render::EditOps{true, false, true}), 4000);
  EXPECT_EQ(default_budget(render::EditOps{false, true, true}), 3000);
  EXPECT_EQ(default_budget(render::EditOps{false, false, true}), 3000);
}

TEST(EditConfigParse, FullProfileDefaults) {
  const auto c = parse_edit_config(minimal_change());
  EXPECT_EQ(c.profile, Profile::Full);
  EXPECT_EQ(c.iterations, 3000);
  EXPECT_EQ(c.patch_size, 72);
  EXPECT_EQ(c.dilations, 10);
  EXPECT_DOUBLE_EQ(c.weights.lambda_global, 0.5);
  EXPECT_DOUBLE_EQ(c.weights.lambda_region, 1.0);
  EXPECT_DOUBLE_EQ(c.weights.lambda_opacity, 2.0);
  EXPECT_DOUBLE_EQ(c.weights.lambda_reg, 0.2);
  EXPECT_DOUBLE_EQ(c.lr.at(0), 5e-4);
  EXPECT_DOUBLE_EQ(c.lr.at(1000), 1e-4);
  EXPECT_EQ(c.ops, (render::EditOps{false, false, true}));
}

TEST(EditConfigParse, DeskProfileOverride) {
  const auto c = parse_edit_config(minimal_change(), Profile::Desk);
  EXPECT_EQ(c.profile, Profile::Desk);
  EXPECT_EQ(c.iterations, 300);
  EXPECT_EQ(c.patch_size, 32);
  EXPECT_EQ(c.render.coarse_samples, 32);
  EXPECT_EQ(c.weights.reg_start_step, 100);
}

TEST(EditConfigParse, ExplicitIterationsWin) {
  auto j = minimal_change();
  j["iterations"] = 17;
  EXPECT_EQ(parse_edit_config(j).iterations, 17);
}

TEST(EditConfigParse, UnknownKeysRejected) {
  auto j = minimal_change();
  j["learning_rate_typo"] = 1;
  EXPECT_THROW(parse_edit_config(j), ValidationError);
  auto k = minimal_change();
  k["render"] = {{"coarse_sampels", 4}};
  EXPECT_THROW(parse_edit_config(k), ValidationError);
}

TEST(EditConfigParse, EnabledOperationsNeedThresholdTargets) {
  auto j = minimal_change();
  j.erase("thresholds");
  EXPECT_THROW(parse_edit_config(j), ValidationError);
  auto k = minimal_change();
  k["operations"] = {"add", "change"};
  EXPECT_THROW(parse_edit_config(k), ValidationError);
  k["thresholds"]["add"] = {{"target", 0.3}};
  EXPECT_NO_THROW(parse_edit_config(k));
}

TEST(EditConfigParse, BadValuesRejected) {
  auto j = minimal_change();
  j["operations"] = {"recolor"};
  EXPECT_THROW(parse_edit_config(j), ValidationError);
  j = minimal_change();
  j["operations"] = nlohmann::json::array();
  EXPECT_THROW(parse_edit_config(j), ValidationError);
  j = minimal_change();
  j["source_text"] = "";
  EXPECT_THROW(parse_edit_config(j), ValidationError);
  j = minimal_change();
  j["patch_size"] = "big";
  EXPECT_THROW(parse_edit_config(j), ValidationError);
  j = minimal_change();
  j.erase("segmenter");
  EXPECT_THROW(parse_edit_config(j), ValidationError);
  j = minimal_change();
  j["embedder"] = {{"type", "remote"}};
  EXPECT_THROW(parse_edit_config(j), ValidationError);
}

TEST(EditConfigParse, ResolvedConfigParsesBackUnchanged) {
  auto j = minimal_change();
  j["profile"] = "desk";
  j["seed"] = 9;
  const auto c = parse_edit_config(j);
  const auto dumped = to_json(c);
  const auto again = parse_edit_config(dumped);
  EXPECT_EQ(to_json(again), dumped);
}

TEST(EditConfigLoad, RelativePathsFollowTheConfigFile) {
  const auto dir = testing::temp_dir("config_paths");
  auto j = minimal_change();
  j["templates_file"] = "templates.txt";
  std::ofstream(dir / "edit.json") << j.dump();
  std::ofstream(dir / "templates.txt") << "a photo of {}\n";
  const auto c = load_edit_config(dir / "edit.json");
  EXPECT_EQ(std::filesystem::path(c.templates_file), dir / "templates.txt");
  EXPECT_THROW(load_edit_config(dir / "missing.json"), ValidationError);
}

TEST(Profiles, ParseAndName) {
  EXPECT_EQ(parse_profile("desk"), Profile::Desk);
  EXPECT_EQ(profile_name(Profile::Full), "full");
  EXPECT_THROW(parse_profile("laptop"), ValidationError);
}

}  // namespace
}  // namespace nerfedit::train
