#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "errors.hpp"
#include "lattice.hpp"

namespace lattice_bert {

// Relation of a target token to a source token. The integer codes are the
// serialized form and must not be reordered.
enum class PositionRelation : std::uint8_t {
  self = 0,
  left_detached = 1,
  left_overlapped = 2,
  contains = 3,
  contained_by = 4,
  right_overlapped = 5,
  right_detached = 6,
};

inline constexpr std::size_t kNumRelations = 7;

inline constexpr std::string_view relation_name(PositionRelation r) {
  constexpr std::array<std::string_view, kNumRelations> names{
      "self", "left_detached", "left_overlapped", "contains", "contained_by", "right_overlapped", "right_detached"};
  return names[static_cast<std::size_t>(r)];
}

// Swaps the roles of source and target.
inline constexpr PositionRelation mirror(PositionRelation r) {
  switch (r) {
    case PositionRelation::left_detached: return PositionRelation::right_detached;
    case PositionRelation::right_detached: return PositionRelation::left_detached;
    case PositionRelation::left_overlapped: return PositionRelation::right_overlapped;
    case PositionRelation::right_overlapped: return PositionRelation::left_overlapped;
    case PositionRelation::contains: return PositionRelation::contained_by;
    case PositionRelation::contained_by: return PositionRelation::contains;
    case PositionRelation::self: return PositionRelation::self;
  }
  return r;
}

// Closed intervals: a shared boundary character counts as overlap, so
// (1,3) -> (3,4) is right-overlapped rather than unclassified.
inline PositionRelation relation(Span src, Span tgt, bool same_index) {
  if (!src.valid() || !tgt.valid()) throw InvalidSpan("relation: span with start > end or start < 1");
  if (same_index) {
    if (src != tgt) throw InvalidSpan("relation: same token with different spans");
    return PositionRelation::self;
  }
  if (src == tgt) throw InvalidSpan("relation: distinct tokens share a span");
  if (src.end < tgt.start) return PositionRelation::right_detached;
  if (tgt.end < src.start) return PositionRelation::left_detached;
  if (src.start <= tgt.start && tgt.end <= src.end) return PositionRelation::contains;
  if (tgt.start <= src.start && src.end <= tgt.end) return PositionRelation::contained_by;
  return src.start < tgt.start ? PositionRelation::right_overlapped : PositionRelation::left_overlapped;
}

inline constexpr std::int32_t kMaxDistance = 128;
inline constexpr std::size_t kDistanceBuckets = 2 * kMaxDistance + 1;

inline constexpr std::int32_t clip(std::int64_t t) {
  return static_cast<std::int32_t>(std::clamp<std::int64_t>(t, -kMaxDistance, kMaxDistance));
}

// Start/end offsets of the target relative to the source, each clipped to
// [-128, 128]: ss = s_j - s_i, se = s_j - e_i, es = e_j - s_i, ee = e_j - e_i.
struct DistanceOffsets {
  std::int32_t ss = 0;
  std::int32_t se = 0;
  std::int32_t es = 0;
  std::int32_t ee = 0;

  friend constexpr bool operator==(const DistanceOffsets&, const DistanceOffsets&) = default;
};

inline constexpr DistanceOffsets distance_offsets(Span src, Span tgt) {
  return {clip(static_cast<std::int64_t>(tgt.start) - src.start), clip(static_cast<std::int64_t>(tgt.start) - src.end),
          clip(static_cast<std::int64_t>(tgt.end) - src.start), clip(static_cast<std::int64_t>(tgt.end) - src.end)};
}

// Table index of a clipped offset: 0..256.
inline constexpr std::size_t bucket(std::int32_t clipped) { return static_cast<std::size_t>(clipped + kMaxDistance); }

}  // namespace lattice_bert
