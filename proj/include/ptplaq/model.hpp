#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ptplaq/numerics.hpp"

namespace ptplaq {

/// The four gain-loss topologies.  Sites of the squares are ordered
/// (A, B, C, D) around the ring; the cross has arms A, B, D, E around the
/// passive centre C.
enum class PlaquetteKind { A_0p0m, B_pmpm, C_ppmm, D_pm0pm };

std::string_view kind_code(PlaquetteKind kind);  // "A" .. "D"
std::string_view kind_pattern(PlaquetteKind kind);  // "0+0-", ...
PlaquetteKind kind_from_code(std::string_view code);

std::size_t site_count(PlaquetteKind kind);
char site_name(std::size_t index);

struct PlaquetteConfig {
  PlaquetteKind kind = PlaquetteKind::A_0p0m;
  double k = 1.0;
  double gamma = 0.0;

  std::size_t sites() const { return site_count(kind); }
  bool decoupled() const { return k == 0.0; }
  PlaquetteConfig with_gamma(double g) const { return {kind, k, g}; }
};

/// Complex field amplitudes u_n, one per site.
using StateVector = CVector;

/// +1 gain, -1 loss, 0 passive; multiplies i*gamma on the diagonal of H_L.
std::vector<int> gain_loss_signs(PlaquetteKind kind);

/// Real 0/1 bond matrix: the ring for squares, the star for the cross.
ComplexMatrix adjacency(PlaquetteKind kind);

/// Conservative part -k * adjacency.
ComplexMatrix linear_hamiltonian_conservative(const PlaquetteConfig& cfg);
/// Gain-loss part i*gamma*diag(signs).
ComplexMatrix linear_hamiltonian_gain_loss(const PlaquetteConfig& cfg);

ComplexMatrix build_linear_hamiltonian(const PlaquetteConfig& cfg);

/// -diag(|u_n|^2).
ComplexMatrix nonlinear_diagonal(const StateVector& u);

/// du/dt = -i [H_L + H_NL(u)] u.
StateVector rhs(const PlaquetteConfig& cfg, const StateVector& u);

/// k*(neighbour sum) + |u_n|^2 u_n - i*gamma*sign_n*u_n - E*u_n.
/// Its zeros are stationary states u(t) = exp(+iEt) u0 of `rhs`.
StateVector stationary_residual(const PlaquetteConfig& cfg, double E, const StateVector& u);

void validate_state(const PlaquetteConfig& cfg, const StateVector& u);

void to_json(nlohmann::json& j, const PlaquetteConfig& cfg);
void from_json(const nlohmann::json& j, PlaquetteConfig& cfg);

}  // namespace ptplaq
