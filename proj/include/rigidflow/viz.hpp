#pragma once

#include <cstdint>
#include <vector>

#include "rigidflow/field.hpp"

namespace rigidflow {

/// Middlebury-wheel hue with saturation growing from mid-gray at zero flow to
/// the full wheel color at `max_radius`. max_radius <= 0 selects the largest
/// valid magnitude. Invalid pixels are black. Returns RGB bytes, row-major.
std::vector<std::uint8_t> flow_to_rgb(const FlowField3& flow, double max_radius = 0.0);

/// Maps each of the three components of tau (translational = true) or phi
/// to one color channel, 128 at zero and saturating at +-scale. scale <= 0
/// selects the largest absolute component.
std::vector<std::uint8_t> twist_to_rgb(const Grid<Twist>& twists, bool translational,
                                       double scale = 0.0);

}  // namespace rigidflow
