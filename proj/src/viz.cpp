#include "rigidflow/viz.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace rigidflow {

namespace {

std::vector<std::array<double, 3>> color_wheel() {
  constexpr int RY = 15, YG = 6, GC = 4, CB = 11, BM = 13, MR = 6;
  std::vector<std::array<double, 3>> wheel;
  for (int i = 0; i < RY; ++i) wheel.push_back({1.0, static_cast<double>(i) / RY, 0.0});
  for (int i = 0; i < YG; ++i) wheel.push_back({1.0 - static_cast<double>(i) / YG, 1.0, 0.0});
  for (int i = 0; i < GC; ++i) wheel.push_back({0.0, 1.0, static_cast<double>(i) / GC});
  for (int i = 0; i < CB; ++i) wheel.push_back({0.0, 1.0 - static_cast<double>(i) / CB, 1.0});
  for (int i = 0; i < BM; ++i) wheel.push_back({static_cast<double>(i) / BM, 0.0, 1.0});
  for (int i = 0; i < MR; ++i) wheel.push_back({1.0, 0.0, 1.0 - static_cast<double>(i) / MR});
  return wheel;
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
}

}  // namespace

std::vector<std::uint8_t> flow_to_rgb(const FlowField3& flow, double max_radius) {
  static const auto wheel = color_wheel();
  const int n = static_cast<int>(wheel.size());

  if (max_radius <= 0.0) {
    for (std::size_t i = 0; i < flow.values.size(); ++i) {
      if (flow.valid[i]) max_radius = std::max(max_radius, flow.values[i].head<2>().norm());
    }
  }

  std::vector<std::uint8_t> rgb(flow.values.size() * 3, 0);
  for (std::size_t i = 0; i < flow.values.size(); ++i) {
    if (!flow.valid[i]) continue;
    const double u = flow.values[i].x();
    const double v = flow.values[i].y();
    const double rad = max_radius > 0.0 ? std::min(1.0, std::hypot(u, v) / max_radius) : 0.0;
    const double a = std::atan2(-v, -u) / std::numbers::pi;
    const double fk = (a + 1.0) / 2.0 * (n - 1);
    const int k0 = static_cast<int>(std::floor(fk)) % n;
    const int k1 = (k0 + 1) % n;
    const double f = fk - std::floor(fk);
    for (int ch = 0; ch < 3; ++ch) {
      const double hue = (1.0 - f) * wheel[static_cast<std::size_t>(k0)][static_cast<std::size_t>(ch)] +
                         f * wheel[static_cast<std::size_t>(k1)][static_cast<std::size_t>(ch)];
      rgb[3 * i + static_cast<std::size_t>(ch)] = to_byte(0.5 + rad * (hue - 0.5));
    }
  }
  return rgb;
}

std::vector<std::uint8_t> twist_to_rgb(const Grid<Twist>& twists, bool translational,
                                       double scale) {
  const int offset = translational ? 0 : 3;
  if (scale <= 0.0) {
    for (const auto& xi : twists.values()) {
      scale = std::max(scale, xi.segment<3>(offset).cwiseAbs().maxCoeff());
    }
  }
  std::vector<std::uint8_t> rgb(twists.size() * 3, 0);
  for (std::size_t i = 0; i < twists.size(); ++i) {
    for (int ch = 0; ch < 3; ++ch) {
      const double v = scale > 0.0 ? std::clamp(twists[i](offset + ch) / scale, -1.0, 1.0) : 0.0;
      rgb[3 * i + static_cast<std::size_t>(ch)] =
          static_cast<std::uint8_t>(std::lround(128.0 + 127.0 * v));
    }
  }
  return rgb;
}

}  // namespace rigidflow
