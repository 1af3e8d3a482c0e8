#include "abduct/allen.hpp"

#include <array>

namespace abduct {

namespace {

constexpr std::array<std::string_view, kNumAllenRelations> kNames{
    "before",   "after",    "during", "contains",    "overlaps", "overlapped_by", "meets",
    "met_by",   "starts",   "started_by", "finishes", "finished_by", "equals"};

constexpr int sign(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace

std::string_view to_string(AllenRelation r) { return kNames[static_cast<int>(r)]; }

TemporalDistance temporal_distance(const TimedEvent& i, const TimedEvent& j) {
  return {{j.ts - i.ts, j.te - i.te, j.ts - i.te, j.te - i.ts}};
}

AllenRelation classify_relation(const TemporalDistance& d) {
  const int ss = sign(d.start_start());
  const int ee = sign(d.end_end());
  const int se = sign(d.start_end());
  const int es = sign(d.end_start());
  if (se > 0) return AllenRelation::kBefore;
  if (es < 0) return AllenRelation::kAfter;
  if (se == 0) return AllenRelation::kMeets;
  if (es == 0) return AllenRelation::kMetBy;
  if (ss == 0 && ee == 0) return AllenRelation::kEquals;
  if (ss == 0) return ee > 0 ? AllenRelation::kStarts : AllenRelation::kStartedBy;
  if (ee == 0) return ss < 0 ? AllenRelation::kFinishes : AllenRelation::kFinishedBy;
  if (ss < 0) return ee > 0 ? AllenRelation::kDuring : AllenRelation::kOverlappedBy;
  return ee < 0 ? AllenRelation::kContains : AllenRelation::kOverlaps;
}

AllenOrder allen_order(const TimedEvent& i, const TimedEvent& j) {
  const AllenRelation rel = classify_relation(temporal_distance(i, j));
  OrderDirection dir = OrderDirection::kForward;
  switch (rel) {
    case AllenRelation::kBefore:
    case AllenRelation::kDuring:
    case AllenRelation::kOverlaps:
    case AllenRelation::kMeets:
    case AllenRelation::kStarts:
    case AllenRelation::kFinishes:
      dir = OrderDirection::kForward;
      break;
    case AllenRelation::kAfter:
    case AllenRelation::kContains:
    case AllenRelation::kOverlappedBy:
    case AllenRelation::kMetBy:
    case AllenRelation::kStartedBy:
    case AllenRelation::kFinishedBy:
      dir = OrderDirection::kBackward;
      break;
    case AllenRelation::kEquals:
      dir = i.id <= j.id ? OrderDirection::kForward : OrderDirection::kBackward;
      break;
  }
  return {rel, dir};
}

bool precedes(const TimedEvent& i, const TimedEvent& j) {
  if (i.ts == j.ts && i.te == j.te && i.id == j.id) return false;
  return allen_order(i, j).direction == OrderDirection::kForward;
}

}  // namespace abduct
