#pragma once

// Small hand-built frames in the grid text format. Shared by the built-in
// verification and the unit tests.

#include <string_view>

namespace pilotmix::instances {

/// One slot, four pilots, a chain A={0,1}, B={1,2}, C={2,3}. Without SIC
/// only A and C have a clean pilot; cancelling either frees B.
inline constexpr std::string_view kChain = R"(grid 1 4
1 0 0,1
2 0 1,2
3 0 2,3
)";

/// A is jammed in both of its slots (by B in slot 0, by C in slot 1), while
/// B and C each have a clean replica. Only outer SIC recovers A.
inline constexpr std::string_view kOuterOnly = R"(grid 2 2
1 0,1 0;0
2 0,1 0;1
3 0,1 1;0
)";

/// A and B collide on both pilots of slot 0; B also sits alone in slot 1.
inline constexpr std::string_view kShadowed = R"(grid 2 4
1 0 0,1
2 0,1 0,1;2,3
)";

/// Two users with the same slots and the same subsets: no receiver can
/// separate them.
inline constexpr std::string_view kIdenticalPair = R"(grid 2 4
1 0,1 0,2;1
2 0,1 0,2;1
3 1 3
)";

}  // namespace pilotmix::instances
