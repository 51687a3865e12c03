// Copyright 2026 The FlowZero Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "flowzero/dss.hpp"
#include "flowzero/io.hpp"

namespace flowzero {

struct RenderOptions {
  int width = 512;
  int height = 512;
  int thickness = 2;
  bool draw_background_arrow = true;
};

namespace detail {

inline cv::Scalar palette(std::size_t i) {
  static const std::array<cv::Scalar, 8> colors = {
      cv::Scalar(60, 76, 231), cv::Scalar(113, 204, 46), cv::Scalar(219, 152, 52), cv::Scalar(15, 196, 241),
      cv::Scalar(182, 89, 155), cv::Scalar(34, 126, 230), cv::Scalar(160, 160, 22), cv::Scalar(94, 73, 52)};
  return colors[i % colors.size()];
}

inline void dashed_line(cv::Mat& img, cv::Point2d a, cv::Point2d b, const cv::Scalar& color, int thickness) {
  const double len = std::hypot(b.x - a.x, b.y - a.y);
  const double dash = 8.0;
  for (double s = 0.0; s < len; s += 2 * dash) {
    const double e = std::min(s + dash, len);
    const cv::Point2d p = a + (b - a) * (s / len);
    const cv::Point2d q = a + (b - a) * (e / len);
    cv::line(img, p, q, color, thickness, cv::LINE_AA);
  }
}

// Unit vector in image coordinates (y grows downward).
inline cv::Point2d arrow_vector(Direction d) {
  const double r = 1.0 / std::sqrt(2.0);
  switch (d) {
    case Direction::kLeft: return {-1, 0};
    case Direction::kRight: return {1, 0};
    case Direction::kUp: return {0, -1};
    case Direction::kDown: return {0, 1};
    case Direction::kLeftUp: return {-r, -r};
    case Direction::kLeftDown: return {-r, r};
    case Direction::kRightUp: return {r, -r};
    case Direction::kRightDown: return {r, r};
    case Direction::kRandom: return {0, 0};
  }
  return {0, 0};
}

}  // namespace detail

/// Draws one frame plan: labeled boxes clipped to the canvas, with the
/// clipped edges dashed, and an arrow for the background motion.
inline cv::Mat render_frame(const FramePlan& frame, const std::vector<std::string>& object_order,
                            const RenderOptions& opt = {}) {
  if (opt.width < 16 || opt.height < 16) throw RangeError("render size must be at least 16x16");
  cv::Mat img(opt.height, opt.width, CV_8UC3, cv::Scalar(250, 250, 250));
  const double W = opt.width;
  const double H = opt.height;

  for (const auto& e : frame.layout) {
    const auto it = std::find(object_order.begin(), object_order.end(), e.object);
    const cv::Scalar color = detail::palette(static_cast<std::size_t>(it - object_order.begin()));
    const double x1 = std::clamp(e.box.x1, 0.0, 1.0) * (W - 1);
    const double x2 = std::clamp(e.box.x2, 0.0, 1.0) * (W - 1);
    const double y1 = std::clamp(e.box.y1, 0.0, 1.0) * (H - 1);
    const double y2 = std::clamp(e.box.y2, 0.0, 1.0) * (H - 1);
    if (x2 <= x1 || y2 <= y1) continue;  // entirely off canvas
    auto edge = [&](cv::Point2d a, cv::Point2d b, bool clipped) {
      if (clipped) {
        detail::dashed_line(img, a, b, color, opt.thickness);
      } else {
        cv::line(img, a, b, color, opt.thickness, cv::LINE_AA);
      }
    };
    edge({x1, y1}, {x2, y1}, e.box.y1 < 0.0);
    edge({x1, y2}, {x2, y2}, e.box.y2 > 1.0);
    edge({x1, y1}, {x1, y2}, e.box.x1 < 0.0);
    edge({x2, y1}, {x2, y2}, e.box.x2 > 1.0);
    int baseline = 0;
    const auto size = cv::getTextSize(e.object, cv::FONT_HERSHEY_SIMPLEX, 0.45, 1, &baseline);
    const cv::Point origin(static_cast<int>(x1) + 3, std::max(static_cast<int>(y1) + size.height + 3, size.height + 3));
    cv::putText(img, e.object, origin, cv::FONT_HERSHEY_SIMPLEX, 0.45, color, 1, cv::LINE_AA);
  }

  if (opt.draw_background_arrow) {
    const cv::Point2d c(W - 40.0, H - 40.0);
    const cv::Scalar grey(90, 90, 90);
    const cv::Point2d v = detail::arrow_vector(frame.background.direction);
    if (v.x == 0.0 && v.y == 0.0) {
      cv::putText(img, "~", cv::Point(static_cast<int>(c.x) - 8, static_cast<int>(c.y) + 8),
                  cv::FONT_HERSHEY_SIMPLEX, 1.0, grey, 2, cv::LINE_AA);
    } else {
      const double len = 10.0 + 20.0 * std::clamp(frame.background.speed, 0.0, 1.0);
      cv::arrowedLine(img, c - v * len, c + v * len, grey, 2, cv::LINE_AA, 0, 0.3);
    }
  }
  return img;
}

/// Writes frame_000.png, frame_001.png, ... and returns the paths.
inline std::vector<std::filesystem::path> render_dss(const DynamicSceneSyntax& dss,
                                                     const std::filesystem::path& out_dir,
                                                     const RenderOptions& opt = {}) {
  ensure_directory(out_dir);
  const auto names = dss.object_names();
  std::vector<std::filesystem::path> paths;
  for (std::size_t i = 0; i < dss.frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%03zu.png", i);
    const auto path = out_dir / name;
    if (!cv::imwrite(path.string(), render_frame(dss.frames[i], names, opt))) {
      throw IOError("could not write " + path.string());
    }
    paths.push_back(path);
  }
  return paths;
}

}  // namespace flowzero
