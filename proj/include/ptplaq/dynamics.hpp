#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ptplaq/model.hpp"
#include "ptplaq/symmetry.hpp"

namespace ptplaq {

struct Diagnostics {
  double total_power = 0.0;
  std::vector<double> per_site_power;
  cplx pt_inner_product{};  // u^dagger P u
  double power_balance_residual = 0.0;
  double pt_balance_residual = 0.0;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<StateVector> states;
  std::vector<Diagnostics> diagnostics;  // filled by `diagnostics`
  bool blew_up = false;
  double blowup_time = 0.0;
};

inline constexpr double kDefaultDt = 1e-3;
inline constexpr std::size_t kDefaultStride = 100;
inline constexpr double kBlowupAmplitude = 1e6;

/// Fixed-step RK4 for du/dt = rhs(cfg, u).  A sample is stored every
/// `stride` steps and at t_end.  Integration stops with `blew_up` set once
/// any |u_n| exceeds `cap`; NaN raises NumericalError.
Trajectory integrate(const PlaquetteConfig& cfg, const StateVector& u0, double t_end, double dt = kDefaultDt,
                     std::size_t stride = kDefaultStride, double cap = kBlowupAmplitude);

enum class PerturbationMode { uniform, random, eigenmode };

struct PerturbationSpec {
  double delta = 1e-3;
  PerturbationMode mode = PerturbationMode::uniform;
  std::uint64_t seed = 0;
  /// Position in the list of nonzero stability modes ordered by descending
  /// Re lambda; 0 is the most unstable.
  std::size_t index = 0;
};

/// A nonzero stability mode and its real-space perturbation direction.
struct StabilityMode {
  cplx lambda;
  StateVector direction;  // unit norm
};

/// Nonzero modes of the linearisation about u0, most unstable first.
std::vector<StabilityMode> stability_modes(const PlaquetteConfig& cfg, double E, const StateVector& u0);

/// u0 + delta * direction with a unit direction.  Eigenmode perturbations
/// need the model context; the overload without it rejects them.
StateVector perturb(const StateVector& u0, const PerturbationSpec& spec);
StateVector perturb(const PlaquetteConfig& cfg, double E, const StateVector& u0, const PerturbationSpec& spec);

/// Fills the per-sample power and PT-product records.  The balance
/// residuals compare centred differences of the stored samples with the
/// exact right-hand sides of the power and PT-product balance laws.
void diagnostics(Trajectory& traj, const PlaquetteConfig& cfg, const ParityOperator& p);

}  // namespace ptplaq
