#pragma once

#include <array>
#include <string_view>

namespace abduct {

/// Signed start/end differences between two events i and j:
/// (ts_j - ts_i, te_j - te_i, ts_j - te_i, te_j - ts_i).
struct TemporalDistance {
  std::array<double, 4> v{};

  double start_start() const { return v[0]; }
  double end_end() const { return v[1]; }
  double start_end() const { return v[2]; }
  double end_start() const { return v[3]; }
};

struct TimedEvent {
  double ts = 0.0;
  double te = 0.0;
  int id = 0;
};

TemporalDistance temporal_distance(const TimedEvent& i, const TimedEvent& j);

/// The 13 atomic interval relations, phrased as "e_i <relation> e_j".
enum class AllenRelation {
  kBefore,
  kAfter,
  kDuring,
  kContains,
  kOverlaps,
  kOverlappedBy,
  kMeets,
  kMetBy,
  kStarts,
  kStartedBy,
  kFinishes,
  kFinishedBy,
  kEquals,
};
inline constexpr int kNumAllenRelations = 13;

std::string_view to_string(AllenRelation r);

/// kForward: e_i precedes e_j (edge i -> j). kBackward: e_j precedes e_i.
enum class OrderDirection { kForward, kBackward };

struct AllenOrder {
  AllenRelation relation;
  OrderDirection direction;
};

/// Relation from the sign pattern of a temporal distance (valid intervals only).
AllenRelation classify_relation(const TemporalDistance& d);

/// Relation plus direction. Contained intervals precede their containers,
/// otherwise the earlier interval precedes; identical intervals order by id.
/// The induced order is total: it sorts by end time, then by later start, then id.
AllenOrder allen_order(const TimedEvent& i, const TimedEvent& j);

/// Strict "i precedes j" under allen_order.
bool precedes(const TimedEvent& i, const TimedEvent& j);

}  // namespace abduct
