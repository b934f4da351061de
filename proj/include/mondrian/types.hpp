#pragma once

#include <cstdint>
#include <limits>

namespace mondrian {

// Dense index into a tree's node arena.
using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

}  // namespace mondrian
