#include "ptplaq/stationary.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>

#include "ptplaq/errors.hpp"

namespace ptplaq {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kBranchResidualTol = 1e-10;
constexpr std::size_t kRootGrid1D = 10000;
constexpr double kRootMergeDistance = 1e-6;

double wrap_phase(double phi) {
  phi = std::remainder(phi, 2.0 * kPi);
  if (phi <= -kPi) phi += 2.0 * kPi;
  return phi;
}

// Candidate states differing only in their phase roots; the one with the
// smallest stationary residual wins.
struct PhaseCandidate {
  std::vector<double> phases;
  std::string description;
};

std::optional<AnalyticBranch> pick_phase_root(const PlaquetteConfig& cfg, double E, const BranchLabel& label,
                                              const std::vector<double>& amplitudes,
                                              const std::vector<PhaseCandidate>& candidates) {
  std::optional<AnalyticBranch> best;
  double best_residual = std::numeric_limits<double>::infinity();
  for (const auto& c : candidates) {
    MadelungState m{amplitudes, c.phases, E};
    for (auto& p : m.phases) p = wrap_phase(p);
    const double r = residual_norm(cfg, E, m.to_state());
    if (r < best_residual) {
      best_residual = r;
      best = AnalyticBranch{label, std::move(m), c.description};
    }
  }
  if (!best || best_residual > kBranchResidualTol) return std::nullopt;
  return best;
}

// Non-negative square root that forgives rounding just below zero.
std::optional<double> real_sqrt(double x, double scale) {
  if (x >= 0.0) return std::sqrt(x);
  if (x > -64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, scale)) return 0.0;
  return std::nullopt;
}

std::vector<PhaseCandidate> sine_roots(double s, const std::function<std::vector<double>(double)>& layout,
                                       const std::string& name) {
  const double principal = std::asin(std::clamp(s, -1.0, 1.0));
  return {{layout(principal), "cos(" + name + ")>=0"}, {layout(kPi - principal), "cos(" + name + ")<=0"}};
}

std::optional<AnalyticBranch> kind_a_case1a(const PlaquetteConfig& cfg, double E, const BranchLabel& label,
                                            double amp_a, double amp_b) {
  const double k = cfg.k;
  const double g = cfg.gamma;
  const std::vector<double> amps{amp_a, amp_b, amp_a, amp_b};
  const double s = amp_a == 0.0 ? 0.0 : -g * amp_b / (2.0 * k * amp_a);
  if (std::abs(s) > 1.0) return std::nullopt;
  auto layout = [](double pb) { return std::vector<double>{0.0, pb, 0.0, -pb}; };
  return pick_phase_root(cfg, E, label, amps, sine_roots(s, layout, "phi_b"));
}

std::optional<AnalyticBranch> kind_a(const PlaquetteConfig& cfg, const BranchLabel& label, double E) {
  const double k = cfg.k;
  const double g = cfg.gamma;
  if (k == 0.0) return std::nullopt;
  switch (label.name) {
    case BranchName::case1aa_plus:
    case BranchName::case1aa_minus: {
      const auto root = real_sqrt(4.0 * k * k - g * g, 4.0 * k * k);
      if (!root) return std::nullopt;
      const double sign = label.name == BranchName::case1aa_plus ? 1.0 : -1.0;
      const auto amp = real_sqrt(E + sign * *root, std::abs(E));
      if (!amp) return std::nullopt;
      return kind_a_case1a(cfg, E, label, *amp, *amp);
    }
    case BranchName::case1ab: {
      if (E <= 0.0) return std::nullopt;
      const auto roots = solve_case_1ab(E, k, g);
      if (label.index >= roots.size()) return std::nullopt;
      const double a = roots[label.index];
      const double b = 2.0 * std::abs(k) * a / std::sqrt(a * a * a * a + g * g);
      return kind_a_case1a(cfg, E, label, a, b);
    }
    case BranchName::case1b: {
      const double tol = 1e-12 * std::max(1.0, std::abs(k));
      const bool at_point = std::abs(g) <= tol || std::abs(std::abs(g) - 2.0 * std::abs(k)) <= tol;
      if (!at_point || E < 0.0) return std::nullopt;
      const double a = std::sqrt(E);
      std::vector<PhaseCandidate> cands;
      for (double pb : {kPi / 2.0, -kPi / 2.0})
        for (double pc : {0.0, kPi})
          cands.push_back({{0.0, pb, pc, -pb}, "phi_b=" + std::string(pb > 0 ? "+" : "-") + "pi/2,phi_c=" +
                                                   std::string(pc == 0.0 ? "0" : "pi")});
      return pick_phase_root(cfg, E, label, {a, a, a, a}, cands);
    }
    case BranchName::case2: {
      if (std::abs(g) > 2.0 * std::abs(k) || E < 0.0 || label.index > 1) return std::nullopt;
      const double a = std::sqrt(E);
      const double principal = std::asin(std::clamp(-g / (2.0 * k), -1.0, 1.0));
      const double pb = label.index == 0 ? principal : kPi - principal;
      return pick_phase_root(cfg, E, label, {a, a, a, a},
                             {{{0.0, pb, 2.0 * pb - kPi, pb - kPi}, label.index == 0 ? "cos(phi_b)>=0" : "cos(phi_b)<=0"}});
    }
    default:
      return std::nullopt;
  }
}

std::optional<AnalyticBranch> kind_b(const PlaquetteConfig& cfg, const BranchLabel& label, double E) {
  const double k = cfg.k;
  const double g = cfg.gamma;
  if (k == 0.0) return std::nullopt;
  const auto root = real_sqrt(4.0 * k * k - g * g, 4.0 * k * k);
  if (!root) return std::nullopt;
  const double sign = label.name == BranchName::b_plus ? 1.0 : -1.0;
  const auto amp = real_sqrt(E + sign * *root, std::abs(E));
  if (!amp) return std::nullopt;
  const double principal = std::asin(std::clamp(g / (2.0 * k), -1.0, 1.0));
  std::vector<PhaseCandidate> cands;
  for (double pb : {principal, kPi - principal})
    for (double pd : {principal, kPi - principal})
      cands.push_back({{0.0, pb, 0.0, pd}, std::string("cos(phi_b)") + (pb == principal ? ">=0" : "<=0") +
                                               ",cos(phi_d)" + (pd == principal ? ">=0" : "<=0")});
  return pick_phase_root(cfg, E, label, {*amp, *amp, *amp, *amp}, cands);
}

std::optional<AnalyticBranch> kind_c(const PlaquetteConfig& cfg, const BranchLabel& label, double E) {
  const double k = cfg.k;
  const double g = cfg.gamma;
  if (k == 0.0) return std::nullopt;
  const auto root = real_sqrt(k * k - g * g, k * k);
  if (!root) return std::nullopt;
  const bool inphase = label.name == BranchName::c_inphase_plus || label.name == BranchName::c_inphase_minus;
  const bool plus = label.name == BranchName::c_inphase_plus || label.name == BranchName::c_antiphase_plus;
  const auto amp = real_sqrt(E + (inphase ? -k : k) + (plus ? *root : -*root), std::abs(E) + std::abs(k));
  if (!amp) return std::nullopt;
  const double principal = std::asin(std::clamp(g / k, -1.0, 1.0));
  std::vector<PhaseCandidate> cands;
  for (double pd : {principal, kPi - principal}) {
    const std::string tag = std::string("cos(phi_d)") + (pd == principal ? ">=0" : "<=0");
    if (inphase) {
      for (double pc : {principal, kPi - principal})
        cands.push_back({{0.0, 0.0, pc, pd}, std::string("cos(phi_c)") + (pc == principal ? ">=0," : "<=0,") + tag});
    } else {
      cands.push_back({{0.0, kPi, pd - kPi, pd}, tag});
    }
  }
  return pick_phase_root(cfg, E, label, {*amp, *amp, *amp, *amp}, cands);
}

std::optional<AnalyticBranch> kind_d(const PlaquetteConfig& cfg, const BranchLabel& label, double G) {
  const double k = cfg.k;
  const double g = cfg.gamma;
  if (k == 0.0 || G <= 0.0) return std::nullopt;
  const auto roots = solve_cross_amplitudes(G, k, g);
  if (label.index >= roots.size()) return std::nullopt;
  const auto [a, c] = roots[label.index];
  const double phi = std::atan2(g * a / (k * c), (G * a - a * a * a) / (k * c));
  return pick_phase_root(cfg, G, label, {a, a, c, a, a}, {{{phi, -phi, 0.0, phi, -phi}, "phi_c=0"}});
}

std::vector<BranchLabel> labels_for(PlaquetteKind kind) {
  using enum BranchName;
  switch (kind) {
    case PlaquetteKind::A_0p0m:
      return {{kind, case1aa_plus, 0}, {kind, case1aa_minus, 0}, {kind, case1b, 0}, {kind, case2, 0},
              {kind, case2, 1}};
    case PlaquetteKind::B_pmpm:
      return {{kind, b_plus, 0}, {kind, b_minus, 0}};
    case PlaquetteKind::C_ppmm:
      return {{kind, c_inphase_plus, 0}, {kind, c_inphase_minus, 0}, {kind, c_antiphase_plus, 0},
              {kind, c_antiphase_minus, 0}};
    case PlaquetteKind::D_pm0pm:
      return {};
  }
  return {};
}

std::optional<AnalyticBranch> closed_form_branch(const PlaquetteConfig& cfg, const BranchLabel& label, double E) {
  if (label.kind != cfg.kind || !branch_valid_for(label)) return std::nullopt;
  switch (cfg.kind) {
    case PlaquetteKind::A_0p0m: return kind_a(cfg, label, E);
    case PlaquetteKind::B_pmpm: return kind_b(cfg, label, E);
    case PlaquetteKind::C_ppmm: return kind_c(cfg, label, E);
    case PlaquetteKind::D_pm0pm: return kind_d(cfg, label, E);
  }
  return std::nullopt;
}

// Families whose members are indexed by root order have no fixed identity
// across gamma, so their existence cannot be read from the closed form.
bool indexed_family(const BranchLabel& label) {
  return label.name == BranchName::case1ab || label.name == BranchName::d_branch;
}

}  // namespace

// ---------------------------------------------------------------------------

StateVector MadelungState::to_state() const {
  StateVector u(amplitudes.size());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = std::polar(amplitudes[i], phases[i]);
  return u;
}

MadelungState MadelungState::from_state(const StateVector& u, double E) {
  MadelungState m;
  m.E = E;
  for (const auto& z : u) {
    m.amplitudes.push_back(std::abs(z));
    m.phases.push_back(std::abs(z) == 0.0 ? 0.0 : wrap_phase(std::arg(z)));
  }
  return m;
}

std::string_view branch_name(BranchName name) {
  switch (name) {
    case BranchName::case1aa_plus: return "case1aa_plus";
    case BranchName::case1aa_minus: return "case1aa_minus";
    case BranchName::case1ab: return "case1ab";
    case BranchName::case1b: return "case1b";
    case BranchName::case2: return "case2";
    case BranchName::b_plus: return "b_plus";
    case BranchName::b_minus: return "b_minus";
    case BranchName::c_inphase_plus: return "c_inphase_plus";
    case BranchName::c_inphase_minus: return "c_inphase_minus";
    case BranchName::c_antiphase_plus: return "c_antiphase_plus";
    case BranchName::c_antiphase_minus: return "c_antiphase_minus";
    case BranchName::d_branch: return "d_branch";
  }
  return "?";
}

std::string branch_id(const BranchLabel& label) {
  std::string id(branch_name(label.name));
  const bool show_index = label.name == BranchName::d_branch ||
                          ((label.name == BranchName::case1ab || label.name == BranchName::case2) && label.index > 0);
  if (!show_index) return id;
  // "case2_1" rather than "case21": the family name already ends in a digit.
  if (label.name != BranchName::d_branch) id += '_';
  return id + std::to_string(label.index);
}

BranchLabel parse_branch_label(PlaquetteKind kind, std::string_view id) {
  constexpr BranchName all[] = {
      BranchName::case1aa_plus,     BranchName::case1aa_minus,   BranchName::case1ab,
      BranchName::case1b,           BranchName::case2,           BranchName::b_plus,
      BranchName::b_minus,          BranchName::c_inphase_plus,  BranchName::c_inphase_minus,
      BranchName::c_antiphase_plus, BranchName::c_antiphase_minus, BranchName::d_branch};
  // Longest name first so that "case1aa_plus" is not read as "case1a"+...
  std::optional<BranchLabel> found;
  std::size_t matched = 0;
  for (BranchName n : all) {
    const auto name = branch_name(n);
    if (id.substr(0, name.size()) != name || name.size() <= matched) continue;
    auto rest = id.substr(name.size());
    std::size_t index = 0;
    if (!rest.empty() && n != BranchName::d_branch) {
      if (rest.size() < 2 || rest[0] != '_') continue;
      rest = rest.substr(1);
    }
    if (!rest.empty()) {
      if (!std::all_of(rest.begin(), rest.end(), [](char c) { return c >= '0' && c <= '9'; })) continue;
      index = static_cast<std::size_t>(std::stoul(std::string(rest)));
    }
    found = BranchLabel{kind, n, index};
    matched = name.size();
  }
  if (!found || !branch_valid_for(*found))
    throw PreconditionError("branch '" + std::string(id) + "' is not defined for plaquette " +
                            std::string(kind_code(kind)));
  return *found;
}

bool branch_valid_for(const BranchLabel& label) {
  using enum BranchName;
  switch (label.kind) {
    case PlaquetteKind::A_0p0m:
      return label.name == case1aa_plus || label.name == case1aa_minus || label.name == case1ab ||
             label.name == case1b || label.name == case2;
    case PlaquetteKind::B_pmpm:
      return label.name == b_plus || label.name == b_minus;
    case PlaquetteKind::C_ppmm:
      return label.name == c_inphase_plus || label.name == c_inphase_minus || label.name == c_antiphase_plus ||
             label.name == c_antiphase_minus;
    case PlaquetteKind::D_pm0pm:
      return label.name == d_branch;
  }
  return false;
}

std::string_view figure_symbol(const BranchLabel& label) {
  using enum BranchName;
  switch (label.name) {
    case case1aa_plus: return "blue circles";
    case case1aa_minus: return "red crosses";
    case case1ab: return "green stars";
    case case2: return "black squares";
    case b_plus: return "blue circles";
    case b_minus: return "red crosses";
    case c_inphase_plus: return "blue circles";
    case c_inphase_minus: return "red crosses";
    case c_antiphase_plus: return "black squares";
    case c_antiphase_minus: return "green stars";
    default: return "";
  }
}

double residual_norm(const PlaquetteConfig& cfg, double E, const StateVector& u) {
  return vector_norm(stationary_residual(cfg, E, u));
}

// ---------------------------------------------------------------------------
// Root finders

std::vector<double> solve_case_1ab(double E, double k, double gamma) {
  if (!(E > 0.0)) throw PreconditionError("solve_case_1ab: E must be positive");
  const double k2 = k * k;
  const double g2 = gamma * gamma;
  auto f = [&](double a) {
    const double a2 = a * a;
    return a2 + 4.0 * k2 * a2 / (a2 * a2 + g2) - E;
  };
  auto df = [&](double a) {
    const double a2 = a * a;
    const double den = a2 * a2 + g2;
    return 2.0 * a + 8.0 * k2 * a * (g2 - a2 * a2) / (den * den);
  };

  const double top = std::sqrt(E);
  std::vector<double> roots;
  double prev_a = top / kRootGrid1D;
  double prev_f = f(prev_a);
  for (std::size_t i = 2; i <= kRootGrid1D; ++i) {
    const double a = top * static_cast<double>(i) / kRootGrid1D;
    const double fa = f(a);
    if (prev_f == 0.0 || (prev_f < 0.0) != (fa < 0.0)) {
      double lo = prev_a, hi = a;
      double flo = prev_f;
      for (int it = 0; it < 100 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if ((fm < 0.0) == (flo < 0.0) && fm != 0.0) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      double root = 0.5 * (lo + hi);
      for (int it = 0; it < 3; ++it) {
        const double d = df(root);
        if (d == 0.0) break;
        const double next = root - f(root) / d;
        if (next <= 0.0 || std::abs(f(next)) > std::abs(f(root))) break;
        root = next;
      }
      if (std::abs(f(root)) <= 1e-12 * std::max(1.0, E) &&
          (roots.empty() || std::abs(root - roots.back()) > kRootMergeDistance))
        roots.push_back(root);
    }
    prev_a = a;
    prev_f = fa;
  }
  return roots;
}

std::vector<std::pair<double, double>> solve_cross_amplitudes(double G, double k, double gamma) {
  if (!(G > 0.0)) throw PreconditionError("solve_cross_amplitudes: G must be positive");
  if (k == 0.0) return {};
  const double k2 = k * k;
  const double g2 = gamma * gamma;

  // Eliminating C^2 = A^2 (gamma^2 + (G - A^2)^2) / k^2 leaves one equation
  // in x = A^2.  Roots with x > G exist (the second equation allows
  // C^2 > G), so the scan runs well past sqrt(G).
  auto c2_of = [&](double x) { return x * (g2 + (G - x) * (G - x)) / k2; };
  auto f = [&](double x) {
    const double y = c2_of(x);
    return y * (G - y) - 4.0 * x * (G - x);
  };

  const double x_max = 2.0 * G + 8.0 * k2 + g2;
  std::vector<double> brackets;
  double prev_x = x_max / kRootGrid1D;
  double prev_f = f(prev_x);
  for (std::size_t i = 2; i <= kRootGrid1D; ++i) {
    const double x = x_max * static_cast<double>(i) / kRootGrid1D;
    const double fx = f(x);
    if (prev_f == 0.0 || (prev_f < 0.0) != (fx < 0.0)) {
      double lo = prev_x, hi = x, flo = prev_f;
      for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if ((fm < 0.0) == (flo < 0.0) && fm != 0.0) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      brackets.push_back(0.5 * (lo + hi));
    }
    prev_x = x;
    prev_f = fx;
  }

  // Polish each candidate on the original two equations in (A, C).
  std::vector<std::pair<double, double>> roots;
  for (double x : brackets) {
    double a = std::sqrt(x);
    double c = std::sqrt(c2_of(x));
    if (c <= 1e-8) continue;
    auto residuals = [&](double aa, double cc) {
      const double a2 = aa * aa, c2 = cc * cc;
      const double r1 = c2 * (G - c2) - 4.0 * a2 * (G - a2);
      const double t = G * aa - a2 * aa;
      const double r2 = k2 * c2 - g2 * a2 - t * t;
      return std::array<double, 2>{r1, r2};
    };
    for (int it = 0; it < 20; ++it) {
      const auto r = residuals(a, c);
      if (std::abs(r[0]) + std::abs(r[1]) == 0.0) break;
      const double a2 = a * a, c2 = c * c;
      const double t = G * a - a2 * a;
      const double j11 = -8.0 * a * G + 16.0 * a2 * a;
      const double j12 = 2.0 * c * G - 4.0 * c2 * c;
      const double j21 = -2.0 * g2 * a - 2.0 * t * (G - 3.0 * a2);
      const double j22 = 2.0 * k2 * c;
      const double det = j11 * j22 - j12 * j21;
      if (det == 0.0) break;
      const double da = (r[0] * j22 - r[1] * j12) / det;
      const double dc = (j11 * r[1] - j21 * r[0]) / det;
      a -= da;
      c -= dc;
      if (std::abs(da) + std::abs(dc) <= 1e-15 * (a + c)) break;
    }
    const auto r = residuals(a, c);
    if (!(a > 0.0 && c > 0.0) || std::abs(r[0]) > 1e-10 || std::abs(r[1]) > 1e-10) continue;
    if (std::abs(gamma) * a > std::abs(k) * c) continue;
    const bool duplicate = std::any_of(roots.begin(), roots.end(), [&](const auto& p) {
      return std::hypot(p.first - a, p.second - c) <= kRootMergeDistance;
    });
    if (!duplicate) roots.emplace_back(a, c);
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

// ---------------------------------------------------------------------------

std::optional<MadelungState> closed_form_state(const PlaquetteConfig& cfg, const BranchLabel& label, double E) {
  auto b = closed_form_branch(cfg, label, E);
  if (!b) return std::nullopt;
  return std::move(b->state);
}

std::vector<AnalyticBranch> analytic_branches(const PlaquetteConfig& cfg, double E) {
  std::vector<AnalyticBranch> out;
  auto add = [&](const BranchLabel& label) {
    if (auto b = closed_form_branch(cfg, label, E)) out.push_back(std::move(*b));
  };
  for (const auto& label : labels_for(cfg.kind)) add(label);
  if (cfg.kind == PlaquetteKind::A_0p0m && E > 0.0 && cfg.k != 0.0) {
    const auto roots = solve_case_1ab(E, cfg.k, cfg.gamma);
    for (std::size_t i = 0; i < roots.size(); ++i) add({cfg.kind, BranchName::case1ab, i});
  }
  if (cfg.kind == PlaquetteKind::D_pm0pm && E > 0.0 && cfg.k != 0.0) {
    const auto roots = solve_cross_amplitudes(E, cfg.k, cfg.gamma);
    for (std::size_t i = 0; i < roots.size(); ++i) add({cfg.kind, BranchName::d_branch, i});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Newton

namespace {

StateVector gauge_fixed(StateVector u) {
  const double a = std::abs(u[0]);
  if (a == 0.0) return u;
  const cplx rot = std::conj(u[0]) / a;
  for (auto& z : u) z *= rot;
  u[0] = cplx{u[0].real(), 0.0};
  return u;
}

}  // namespace

NewtonResult newton_refine(const PlaquetteConfig& cfg, double E, const StateVector& guess, double tol) {
  validate_state(cfg, guess);
  const double gnorm = vector_norm(guess);
  if (!(gnorm > 0.0)) throw PreconditionError("newton_refine: zero guess (trivial root excluded by the gauge)");
  if (std::abs(guess[0]) <= 1e-14 * gnorm)
    throw PreconditionError("newton_refine: site A vanishes, gauge Im(u_A)=0 cannot be imposed");

  const std::size_t n = cfg.sites();
  const auto signs = gain_loss_signs(cfg.kind);
  const ComplexMatrix adj = adjacency(cfg.kind);
  StateVector u = gauge_fixed(guess);

  double residual = std::numeric_limits<double>::infinity();
  for (std::size_t iter = 0; iter <= kNewtonMaxIterations; ++iter) {
    const StateVector f = stationary_residual(cfg, E, u);
    residual = vector_norm(f);
    if (!std::isfinite(residual)) break;

    double umax2 = 0.0;
    for (const auto& z : u) umax2 = std::max(umax2, std::norm(z));
    const double floor = 64.0 * std::numeric_limits<double>::epsilon() *
                         (std::abs(E) + 4.0 * std::abs(cfg.k) + std::abs(cfg.gamma) + umax2) * vector_norm(u);
    if (residual <= std::max(tol, floor)) {
      u = gauge_fixed(std::move(u));
      if (u[0].real() < 0.0)
        for (auto& z : u) z = -z;
      return {u, iter, residual_norm(cfg, E, u)};
    }
    if (iter == kNewtonMaxIterations) break;

    // Real Jacobian over (Re u, Im u), bordered by the gauge tangent i*u
    // and the constraint row selecting Im u_A.
    const std::size_t dim = 2 * n + 1;
    ComplexMatrix m(dim, dim);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) {
        cplx d_u = adj(r, c) * cfg.k;  // dF_r/du_c
        cplx d_ubar{};                 // dF_r/d(conj u_c)
        if (r == c) {
          d_u += 2.0 * std::norm(u[r]) - cplx{0.0, cfg.gamma * signs[r]} - E;
          d_ubar = u[r] * u[r];
        }
        const cplx d_x = d_u + d_ubar;
        const cplx d_y = cplx{0.0, 1.0} * (d_u - d_ubar);
        m(r, c) = d_x.real();
        m(r, n + c) = d_y.real();
        m(n + r, c) = d_x.imag();
        m(n + r, n + c) = d_y.imag();
      }
      m(r, 2 * n) = -u[r].imag();
      m(n + r, 2 * n) = u[r].real();
    }
    m(2 * n, n) = 1.0;

    CVector rhs_vec(dim);
    for (std::size_t r = 0; r < n; ++r) {
      rhs_vec[r] = -f[r].real();
      rhs_vec[n + r] = -f[r].imag();
    }
    rhs_vec[2 * n] = -u[0].imag();

    CVector step;
    try {
      step = solve_linear(m, rhs_vec);
    } catch (const SingularityError& e) {
      throw SingularityError(std::string("newton_refine: Jacobian singular beyond the gauge direction: ") + e.what(),
                             e.condition_indicator());
    }
    for (std::size_t r = 0; r < n; ++r) u[r] += cplx{step[r].real(), step[n + r].real()};
  }
  std::ostringstream msg;
  msg << "newton_refine: no convergence after " << kNewtonMaxIterations << " iterations (residual " << residual
      << ")";
  throw ConvergenceError(msg.str(), residual);
}

// ---------------------------------------------------------------------------
// Continuation

namespace {

double gauge_distance(const StateVector& a, const StateVector& b) {
  const StateVector fa = gauge_fixed(a);
  const StateVector fb = gauge_fixed(b);
  double s = 0.0;
  for (std::size_t i = 0; i < fa.size(); ++i) s += std::norm(fa[i] - fb[i]);
  return std::sqrt(s);
}

struct StepOutcome {
  std::optional<StateVector> state;
  std::string failure;
};

}  // namespace

BranchCurve continue_branch(const PlaquetteConfig& cfg, const BranchLabel& label, double E, double gamma_lo,
                            double gamma_hi, double step) {
  if (!(step > 0.0)) throw PreconditionError("continue_branch: step must be positive");
  if (gamma_lo > gamma_hi) throw PreconditionError("continue_branch: empty gamma window");
  if (label.kind != cfg.kind || !branch_valid_for(label))
    throw PreconditionError("continue_branch: branch " + branch_id(label) + " not defined for this plaquette");

  BranchCurve curve;
  curve.config = cfg.with_gamma(gamma_lo);
  curve.label = label;
  curve.E = E;

  const auto start = closed_form_state(curve.config, label, E);
  if (!start) {
    throw PreconditionError("continue_branch: branch " + branch_id(label) + " absent at gamma=" +
                            std::to_string(gamma_lo));
  }

  auto record = [&](double gamma, const StateVector& u) {
    const PlaquetteConfig c = cfg.with_gamma(gamma);
    BranchSample s;
    s.gamma = gamma;
    s.state = u;
    s.madelung = MadelungState::from_state(u, E);
    s.residual = residual_norm(c, E, u);
    s.spectrum = stability_of(c, E, u);
    curve.samples.push_back(std::move(s));
  };

  StateVector first = start->to_state();
  if (vector_norm(first) > 0.0 && std::abs(first[0]) > 0.0) first = gauge_fixed(first);
  record(gamma_lo, first);

  const double tiny = 1e-10;
  auto degenerate = [&](const StateVector& u) {
    return vector_norm(u) <= tiny || std::abs(u[0]) <= 1e-14 * vector_norm(u);
  };

  const StateVector* prev_prev = nullptr;
  double last_delta = 0.0;

  auto attempt = [&](double gamma, const StateVector& prev, const StateVector* before, double gamma_prev,
                     double gamma_before) -> StepOutcome {
    const PlaquetteConfig c = cfg.with_gamma(gamma);
    std::optional<MadelungState> closed;
    if (!indexed_family(label)) {
      closed = closed_form_state(c, label, E);
      if (!closed) return {std::nullopt, "closed form ceases to exist"};
    }
    StateVector predictor;
    if (degenerate(prev)) {
      if (!closed) return {std::nullopt, "degenerate predictor"};
      predictor = closed->to_state();
      if (degenerate(predictor)) return {predictor, ""};
    } else if (before != nullptr && !degenerate(*before)) {
      // Secant predictor through the two previous gauge-fixed samples.
      const double w = (gamma - gamma_prev) / (gamma_prev - gamma_before);
      const StateVector p = gauge_fixed(prev);
      const StateVector q = gauge_fixed(*before);
      predictor.resize(p.size());
      for (std::size_t i = 0; i < p.size(); ++i) predictor[i] = p[i] + w * (p[i] - q[i]);
    } else {
      predictor = prev;
    }

    auto accept = [&](const StateVector& u) -> bool {
      if (degenerate(u)) return false;
      if (closed) return gauge_distance(u, closed->to_state()) <= 1e-6 * std::max(1.0, vector_norm(u));
      if (degenerate(prev)) return true;
      const double jump = gauge_distance(u, prev);
      return jump <= std::max(0.1 * vector_norm(prev), 4.0 * last_delta);
    };

    // Fallback predictors: the plain previous state, then the closed-form
    // root nearest to it (the secant overshoots close to a fold).
    std::vector<StateVector> predictors{predictor};
    if (!degenerate(prev)) predictors.push_back(prev);
    if (closed) {
      predictors.push_back(closed->to_state());
    } else if (!degenerate(prev)) {
      std::optional<StateVector> nearest;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t idx = 0;; ++idx) {
        const auto cand = closed_form_state(c, BranchLabel{label.kind, label.name, idx}, E);
        if (!cand) break;
        const StateVector v = cand->to_state();
        const double d = gauge_distance(v, prev);
        if (d < best) {
          best = d;
          nearest = v;
        }
      }
      if (nearest) predictors.push_back(*nearest);
    }
    for (const auto& guess : predictors) {
      try {
        NewtonResult r = newton_refine(c, E, guess);
        if (!accept(r.state)) continue;
        // Near a fold Newton stalls at ~sqrt(eps) in the amplitudes; the
        // closed form it landed next to is the sharper representative.
        if (closed) {
          const StateVector exact = gauge_fixed(closed->to_state());
          if (residual_norm(c, E, exact) <= std::max(r.residual, 1e-12)) return {exact, ""};
        }
        return {r.state, ""};
      } catch (const Error&) {
      }
    }
    return {std::nullopt, "corrector failed or left the branch"};
  };

  std::vector<StateVector> history{first};
  for (std::size_t i = 1;; ++i) {
    const double gamma = gamma_lo + static_cast<double>(i) * step;
    if (gamma > gamma_hi + 1e-9 * step) break;
    const BranchSample& last = curve.samples.back();
    const double gamma_before = curve.samples.size() >= 2 ? curve.samples[curve.samples.size() - 2].gamma : 0.0;
    prev_prev = curve.samples.size() >= 2 ? &curve.samples[curve.samples.size() - 2].state : nullptr;
    StepOutcome out = attempt(gamma, last.state, prev_prev, last.gamma, gamma_before);
    if (!out.state) {
      Termination t;
      t.gamma_lo = last.gamma;
      t.gamma_hi = gamma;
      t.reason = out.failure;
      const double mid = 0.5 * (t.gamma_lo + t.gamma_hi);
      const StepOutcome probe = attempt(mid, last.state, prev_prev, last.gamma, gamma_before);
      if (probe.state) {
        t.gamma_lo = mid;
      } else {
        t.gamma_hi = mid;
      }
      t.gamma = 0.5 * (t.gamma_lo + t.gamma_hi);
      curve.termination = t;
      break;
    }
    if (!degenerate(last.state)) last_delta = gauge_distance(*out.state, last.state);
    record(gamma, *out.state);
  }
  return curve;
}

}  // namespace ptplaq
