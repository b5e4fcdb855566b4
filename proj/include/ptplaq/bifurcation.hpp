#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "ptplaq/stationary.hpp"

namespace ptplaq {

enum class EventKind {
  stabilization,
  destabilization,
  quartet_formation,
  quartet_breakup,
  branch_collision,
  termination,
};

std::string_view event_name(EventKind kind);

struct BifurcationEvent {
  double gamma = 0.0;
  EventKind kind = EventKind::termination;
  std::string description;
};

/// Resolution of the bisection that locates each event in gamma.
inline constexpr double kEventResolution = 1e-3;

/// Scans consecutive samples for changes in the (real, imaginary, quartet)
/// counts, reclassified at kEventTol, and pins each change down by
/// bisection with newton_refine seeded from the left sample.  A
/// termination record on the curve becomes a final event.
std::vector<BifurcationEvent> detect_bifurcations(const BranchCurve& curve);

}  // namespace ptplaq
