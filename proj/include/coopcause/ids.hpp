#pragma once

#include <cstdint>

namespace coopcause {

using VehicleId = std::int32_t;
using SegmentId = std::int32_t;

inline constexpr VehicleId kNoVehicle = -1;
inline constexpr SegmentId kNoSegment = -1;

}  // namespace coopcause
