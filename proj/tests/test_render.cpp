// Copyright 2026 The FlowZero Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "flowzero/render.hpp"
#include "temp_dir.hpp"

namespace fz = flowzero;

namespace {

fz::DynamicSceneSyntax two_objects() {
  fz::DynamicSceneSyntax dss;
  dss.prompt = {"a cat and a dog", 8};
  for (int i = 0; i < 8; ++i) {
    fz::FramePlan f{i, "A cat and a dog.", {{"cat", {0.1, 0.1, 0.4, 0.4}}}, {fz::Direction::kLeft, 0.5}};
    if (i != 3) f.layout.push_back({"dog", {0.5, 0.5, 0.9, 0.9}});
    dss.frames.push_back(f);
  }
  return dss;
}

int count_colored(const cv::Mat& img, const cv::Rect& roi) {
  int n = 0;
  const cv::Mat sub = img(roi);
  for (int y = 0; y < sub.rows; ++y) {
    for (int x = 0; x < sub.cols; ++x) {
      const auto p = sub.at<cv::Vec3b>(y, x);
      if (p[0] != p[1] || p[1] != p[2]) ++n;
    }
  }
  return n;
}

}  // namespace

TEST(Render, WritesOnePngPerFrame) {
  fzt::TempDir dir;
  const auto paths = fz::render_dss(two_objects(), dir.path());
  ASSERT_EQ(paths.size(), 8u);
  EXPECT_EQ(paths[7].filename(), "frame_007.png");
  const cv::Mat img = cv::imread(paths[0].string());
  EXPECT_EQ(img.cols, 512);
  EXPECT_EQ(img.rows, 512);
}

TEST(Render, AbsentObjectIsNotDrawn) {
  const auto dss = two_objects();
  const auto names = dss.object_names();
  fz::RenderOptions opt;
  opt.draw_background_arrow = false;
  const cv::Rect dog_region(240, 240, 240, 240);
  EXPECT_GT(count_colored(fz::render_frame(dss.frames[2], names, opt), dog_region), 0);
  EXPECT_EQ(count_colored(fz::render_frame(dss.frames[3], names, opt), dog_region), 0);
}

TEST(Render, ClippedEdgeIsDashed) {
  fz::FramePlan f{0, "d", {{"car", {0.5, 0.3, 1.3, 0.7}}}, {fz::Direction::kRandom, 0.0}};
  fz::RenderOptions opt;
  opt.draw_background_arrow = false;
  const auto img = fz::render_frame(f, {"car"}, opt);
  // Right edge sits on the canvas border and must have gaps.
  int on = 0;
  int off = 0;
  for (int y = 170; y < 340; ++y) {
    const auto p = img.at<cv::Vec3b>(y, 510);
    (p[0] != p[1] || p[1] != p[2]) ? ++on : ++off;
  }
  EXPECT_GT(on, 20);
  EXPECT_GT(off, 20);
  // Left edge is solid.
  for (int y = 170; y < 340; ++y) {
    const auto p = img.at<cv::Vec3b>(y, 255);
    EXPECT_TRUE(p[0] != p[1] || p[1] != p[2]) << y;
  }
}

TEST(Render, Deterministic) {
  const auto dss = two_objects();
  const auto a = fz::render_frame(dss.frames[0], dss.object_names());
  const auto b = fz::render_frame(dss.frames[0], dss.object_names());
  EXPECT_EQ(cv::norm(a, b, cv::NORM_INF), 0.0);
}

TEST(Render, RejectsTinyCanvas) {
  fz::RenderOptions opt;
  opt.width = 8;
  EXPECT_THROW(fz::render_frame(two_objects().frames[0], {}, opt), fz::RangeError);
}
