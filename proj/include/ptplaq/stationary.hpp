#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ptplaq/model.hpp"
#include "ptplaq/stability.hpp"

namespace ptplaq {

/// Amplitude/phase form u_n = A_n exp(i phi_n) plus the propagation
/// constant (E for the squares, G for the cross).
struct MadelungState {
  std::vector<double> amplitudes;
  std::vector<double> phases;
  double E = 0.0;

  StateVector to_state() const;
  static MadelungState from_state(const StateVector& u, double E);
};

enum class BranchName {
  case1aa_plus,
  case1aa_minus,
  case1ab,
  case1b,
  case2,
  b_plus,
  b_minus,
  c_inphase_plus,
  c_inphase_minus,
  c_antiphase_plus,
  c_antiphase_minus,
  d_branch,
};

struct BranchLabel {
  PlaquetteKind kind = PlaquetteKind::A_0p0m;
  BranchName name = BranchName::case1aa_plus;
  /// Root index (ascending site-A amplitude) for families with several roots.
  std::size_t index = 0;

  bool operator==(const BranchLabel&) const = default;
};

std::string_view branch_name(BranchName name);
std::string branch_id(const BranchLabel& label);  // e.g. "case1aa_minus", "d_branch2"
BranchLabel parse_branch_label(PlaquetteKind kind, std::string_view id);
bool branch_valid_for(const BranchLabel& label);
/// Marker used for the branch in the published figures, when one exists.
std::string_view figure_symbol(const BranchLabel& label);

struct AnalyticBranch {
  BranchLabel label;
  MadelungState state;
  /// Which phase root the residual test selected, e.g. "cos(phi_b)<0".
  std::string root_choice;
};

/// Every closed-form branch with real amplitudes at (cfg, E).  Each emitted
/// state has stationary residual <= 1e-10.
std::vector<AnalyticBranch> analytic_branches(const PlaquetteConfig& cfg, double E);

/// Positive roots A of E = A^2 + 4k^2 A^2 / (A^4 + gamma^2).
std::vector<double> solve_case_1ab(double E, double k, double gamma);

/// Positive (A, C) solutions of C^2 (G - C^2) = 4 A^2 (G - A^2) and
/// (kC)^2 = (gamma A)^2 + (GA - A^3)^2, sorted by A.
std::vector<std::pair<double, double>> solve_cross_amplitudes(double G, double k, double gamma);

struct NewtonResult {
  StateVector state;
  std::size_t iterations = 0;
  double residual = 0.0;
};

inline constexpr std::size_t kNewtonMaxIterations = 50;

/// Newton iteration on the 2N real stationary equations bordered with the
/// gauge condition Im u_A = 0.  The result is gauge fixed (u_A real, >= 0).
/// Throws PreconditionError, ConvergenceError or SingularityError.
NewtonResult newton_refine(const PlaquetteConfig& cfg, double E, const StateVector& guess, double tol = 1e-12);

double residual_norm(const PlaquetteConfig& cfg, double E, const StateVector& u);

struct BranchSample {
  double gamma = 0.0;
  StateVector state;
  MadelungState madelung;
  double residual = 0.0;
  StabilitySpectrum spectrum;
};

struct Termination {
  double gamma_lo = 0.0;  // last gamma where the branch was found
  double gamma_hi = 0.0;  // first gamma where it was not
  double gamma = 0.0;     // bracket midpoint
  std::string reason;
};

struct BranchCurve {
  PlaquetteConfig config;  // gamma field holds the start of the window
  BranchLabel label;
  double E = 0.0;
  std::vector<BranchSample> samples;
  std::optional<Termination> termination;
};

/// Natural-parameter continuation in gamma at fixed E: previous state as
/// predictor, newton_refine as corrector.  Stops at the first gamma where
/// the corrector fails, jumps to another branch, or the closed form ceases
/// to exist; the termination bracket is then halved once.
BranchCurve continue_branch(const PlaquetteConfig& cfg, const BranchLabel& label, double E, double gamma_lo,
                            double gamma_hi, double step);

/// Closed-form state for `label` at (cfg, E), if the family has one there.
std::optional<MadelungState> closed_form_state(const PlaquetteConfig& cfg, const BranchLabel& label, double E);

}  // namespace ptplaq
