#pragma once

#include <cmath>
#include <limits>
#include <vector>

namespace srmp {

using Cost = double;
using NodeId = int;
using FactorId = int;
using EdgeId = int;

// One label index per node of a scope (or per node of V for a full labeling).
using Labeling = std::vector<int>;

inline constexpr Cost kInfiniteCost = std::numeric_limits<Cost>::infinity();

// Messages are kept finite. Min-marginals of hard-constraint tables are
// clamped to this magnitude before being stored in a message.
inline constexpr Cost kMessageCap = 1e15;

inline bool is_infinite(Cost c) { return std::isinf(c); }

inline Cost clamp_message_value(Cost v)
{
  if (v > kMessageCap) return kMessageCap;
  if (v < -kMessageCap) return -kMessageCap;
  return v;
}

}  // namespace srmp
