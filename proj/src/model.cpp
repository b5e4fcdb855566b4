#include "ptplaq/model.hpp"

#include <cmath>

#include "ptplaq/errors.hpp"

namespace ptplaq {

std::string_view kind_code(PlaquetteKind kind) {
  switch (kind) {
    case PlaquetteKind::A_0p0m: return "A";
    case PlaquetteKind::B_pmpm: return "B";
    case PlaquetteKind::C_ppmm: return "C";
    case PlaquetteKind::D_pm0pm: return "D";
  }
  return "?";
}

std::string_view kind_pattern(PlaquetteKind kind) {
  switch (kind) {
    case PlaquetteKind::A_0p0m: return "0+0-";
    case PlaquetteKind::B_pmpm: return "+-+-";
    case PlaquetteKind::C_ppmm: return "++--";
    case PlaquetteKind::D_pm0pm: return "+-0+-";
  }
  return "?";
}

PlaquetteKind kind_from_code(std::string_view code) {
  if (code == "A") return PlaquetteKind::A_0p0m;
  if (code == "B") return PlaquetteKind::B_pmpm;
  if (code == "C") return PlaquetteKind::C_ppmm;
  if (code == "D") return PlaquetteKind::D_pm0pm;
  throw PreconditionError("unknown plaquette kind '" + std::string(code) + "'");
}

std::size_t site_count(PlaquetteKind kind) { return kind == PlaquetteKind::D_pm0pm ? 5 : 4; }

char site_name(std::size_t index) { return static_cast<char>('A' + index); }

std::vector<int> gain_loss_signs(PlaquetteKind kind) {
  // Read off the stationary equations: a "-i gamma u" term there is gain.
  switch (kind) {
    case PlaquetteKind::A_0p0m: return {0, +1, 0, -1};
    case PlaquetteKind::B_pmpm: return {+1, -1, +1, -1};
    case PlaquetteKind::C_ppmm: return {+1, +1, -1, -1};
    case PlaquetteKind::D_pm0pm: return {-1, +1, 0, -1, +1};
  }
  return {};
}

ComplexMatrix adjacency(PlaquetteKind kind) {
  const std::size_t n = site_count(kind);
  ComplexMatrix m(n, n);
  if (kind == PlaquetteKind::D_pm0pm) {
    constexpr std::size_t centre = 2;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == centre) continue;
      m(i, centre) = 1.0;
      m(centre, i) = 1.0;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      m(i, (i + 1) % n) = 1.0;
      m((i + 1) % n, i) = 1.0;
    }
  }
  return m;
}

ComplexMatrix linear_hamiltonian_conservative(const PlaquetteConfig& cfg) {
  return adjacency(cfg.kind) * cplx{-cfg.k};
}

ComplexMatrix linear_hamiltonian_gain_loss(const PlaquetteConfig& cfg) {
  const auto signs = gain_loss_signs(cfg.kind);
  CVector d(signs.size());
  for (std::size_t i = 0; i < signs.size(); ++i) d[i] = cplx{0.0, cfg.gamma * signs[i]};
  return ComplexMatrix::diagonal(d);
}

ComplexMatrix build_linear_hamiltonian(const PlaquetteConfig& cfg) {
  return linear_hamiltonian_conservative(cfg) + linear_hamiltonian_gain_loss(cfg);
}

ComplexMatrix nonlinear_diagonal(const StateVector& u) {
  CVector d(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) d[i] = -std::norm(u[i]);
  return ComplexMatrix::diagonal(d);
}

void validate_state(const PlaquetteConfig& cfg, const StateVector& u) {
  if (u.size() != cfg.sites()) {
    throw DimensionError("state has " + std::to_string(u.size()) + " sites, plaquette " +
                         std::string(kind_code(cfg.kind)) + " has " + std::to_string(cfg.sites()));
  }
  for (const auto& z : u)
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) throw PreconditionError("state has non-finite entries");
}

StateVector rhs(const PlaquetteConfig& cfg, const StateVector& u) {
  // Dimension only: the integrator reports non-finite stages itself.
  if (u.size() != cfg.sites()) validate_state(cfg, u);
  const auto signs = gain_loss_signs(cfg.kind);
  const ComplexMatrix adj = adjacency(cfg.kind);
  const cplx i_unit{0.0, 1.0};
  StateVector du(u.size());
  for (std::size_t n = 0; n < u.size(); ++n) {
    cplx hu{};
    for (std::size_t m = 0; m < u.size(); ++m)
      if (adj(n, m) != cplx{}) hu -= cfg.k * u[m];
    hu += i_unit * (cfg.gamma * signs[n]) * u[n];
    hu -= std::norm(u[n]) * u[n];
    du[n] = -i_unit * hu;
  }
  return du;
}

StateVector stationary_residual(const PlaquetteConfig& cfg, double E, const StateVector& u) {
  if (u.size() != cfg.sites()) validate_state(cfg, u);
  const auto signs = gain_loss_signs(cfg.kind);
  const ComplexMatrix adj = adjacency(cfg.kind);
  const cplx i_unit{0.0, 1.0};
  StateVector f(u.size());
  for (std::size_t n = 0; n < u.size(); ++n) {
    cplx s{};
    for (std::size_t m = 0; m < u.size(); ++m)
      if (adj(n, m) != cplx{}) s += u[m];
    f[n] = cfg.k * s + std::norm(u[n]) * u[n] - i_unit * (cfg.gamma * signs[n]) * u[n] - E * u[n];
  }
  return f;
}

void to_json(nlohmann::json& j, const PlaquetteConfig& cfg) {
  j = nlohmann::json{{"kind", std::string(kind_code(cfg.kind))}, {"k", cfg.k}, {"gamma", cfg.gamma}};
}

void from_json(const nlohmann::json& j, PlaquetteConfig& cfg) {
  for (const char* key : {"kind", "k", "gamma"})
    if (!j.contains(key)) throw PreconditionError(std::string("plaquette config missing '") + key + "'");
  if (!j.at("kind").is_string()) throw PreconditionError("plaquette 'kind' must be one of \"A\"..\"D\"");
  if (!j.at("k").is_number() || !j.at("gamma").is_number())
    throw PreconditionError("plaquette 'k' and 'gamma' must be numbers");
  cfg.kind = kind_from_code(j.at("kind").get<std::string>());
  cfg.k = j.at("k").get<double>();
  cfg.gamma = j.at("gamma").get<double>();
  if (!std::isfinite(cfg.k) || !std::isfinite(cfg.gamma))
    throw PreconditionError("plaquette 'k' and 'gamma' must be finite");
}

}  // namespace ptplaq
