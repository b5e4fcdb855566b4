#include "ptplaq/bifurcation.hpp"

#include <sstream>
#include <tuple>

#include "ptplaq/errors.hpp"

namespace ptplaq {

namespace {

struct Signature {
  std::size_t real = 0;
  std::size_t imag = 0;
  std::size_t quartets = 0;
  std::size_t zero = 0;
  std::size_t unpaired = 0;

  bool stable() const { return real == 0 && quartets == 0 && unpaired == 0; }
  bool operator==(const Signature& o) const {
    return std::tie(real, imag, quartets, unpaired) == std::tie(o.real, o.imag, o.quartets, o.unpaired);
  }
};

Signature signature_of(const StabilitySpectrum& s) {
  return {s.n_real_pairs, s.n_imag_pairs, s.n_quartets, s.n_zero, s.n_unpaired};
}

std::string describe(const Signature& s) {
  std::ostringstream out;
  out << s.real << " real, " << s.imag << " imaginary, " << s.quartets << " quartet";
  if (s.unpaired) out << ", " << s.unpaired << " unpaired";
  return out.str();
}

EventKind classify_transition(const Signature& from, const Signature& to) {
  if (from.stable() && !to.stable()) return EventKind::destabilization;
  if (!from.stable() && to.stable()) return EventKind::stabilization;
  if (to.quartets > from.quartets) return EventKind::quartet_formation;
  if (to.quartets < from.quartets) return EventKind::quartet_breakup;
  if (to.real > from.real) return EventKind::destabilization;
  if (to.real < from.real) return EventKind::stabilization;
  return EventKind::branch_collision;
}

}  // namespace

std::string_view event_name(EventKind kind) {
  switch (kind) {
    case EventKind::stabilization: return "stabilization";
    case EventKind::destabilization: return "destabilization";
    case EventKind::quartet_formation: return "quartet_formation";
    case EventKind::quartet_breakup: return "quartet_breakup";
    case EventKind::branch_collision: return "branch_collision";
    case EventKind::termination: return "termination";
  }
  return "?";
}

std::vector<BifurcationEvent> detect_bifurcations(const BranchCurve& curve) {
  std::vector<BifurcationEvent> events;
  const auto& samples = curve.samples;

  std::vector<Signature> sigs;
  sigs.reserve(samples.size());
  for (const auto& s : samples) sigs.push_back(signature_of(classify_lambdas(s.spectrum.lambdas, kEventTol)));

  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (sigs[i] == sigs[i - 1]) continue;
    const BranchSample& left = samples[i - 1];
    double lo = left.gamma;
    double hi = samples[i].gamma;
    StateVector seed = left.state;
    Signature right_sig = sigs[i];
    while (hi - lo > kEventResolution) {
      const double mid = 0.5 * (lo + hi);
      const PlaquetteConfig c = curve.config.with_gamma(mid);
      std::optional<Signature> mid_sig;
      try {
        const NewtonResult r = newton_refine(c, curve.E, seed);
        mid_sig = signature_of(stability_of(c, curve.E, r.state, kEventTol));
        if (*mid_sig == sigs[i - 1]) {
          lo = mid;
          seed = r.state;
          continue;
        }
      } catch (const Error&) {
      }
      hi = mid;
      if (mid_sig) right_sig = *mid_sig;
    }
    BifurcationEvent e;
    e.gamma = 0.5 * (lo + hi);
    e.kind = classify_transition(sigs[i - 1], right_sig);
    if (right_sig.zero > sigs[i - 1].zero && right_sig.stable() == sigs[i - 1].stable() &&
        right_sig.quartets == sigs[i - 1].quartets && right_sig.real == sigs[i - 1].real)
      e.kind = EventKind::branch_collision;
    // The last sample before a termination sits on the collision point
    // itself, where the spectrum is defective.
    if (curve.termination && i + 1 == samples.size()) e.kind = EventKind::branch_collision;
    e.description = describe(sigs[i - 1]) + " -> " + describe(right_sig);
    events.push_back(std::move(e));
  }

  if (curve.termination) {
    BifurcationEvent e;
    e.gamma = curve.termination->gamma;
    e.kind = EventKind::termination;
    e.description = curve.termination->reason;
    events.push_back(std::move(e));
  }
  return events;
}

}  // namespace ptplaq
