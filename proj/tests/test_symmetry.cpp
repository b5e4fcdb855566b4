#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "ptplaq/errors.hpp"
#include "ptplaq/stationary.hpp"
#include "ptplaq/symmetry.hpp"
#include "support.hpp"

using namespace ptplaq;
using testing::multiset_distance;

namespace {

using testing::kAllKinds;

// Closed-form eigenvalues written out independently of the library.
Spectrum closed_form(PlaquetteKind kind, double k, double g) {
  const cplx outer = std::sqrt(cplx{4 * k * k - g * g});
  const cplx ig{0, g};
  switch (kind) {
    case PlaquetteKind::A_0p0m: return {0.0, 0.0, outer, -outer};
    case PlaquetteKind::B_pmpm: return {ig, -ig, outer, -outer};
    case PlaquetteKind::C_ppmm: {
      const cplx inner = 2.0 * k * std::sqrt(cplx{k * k - g * g});
      const cplx p = std::sqrt(2 * k * k - g * g + inner);
      const cplx m = std::sqrt(2 * k * k - g * g - inner);
      return {p, m, -p, -m};
    }
    case PlaquetteKind::D_pm0pm: return {ig, -ig, outer, -outer, 0.0};
  }
  return {};
}

ComplexMatrix from_rows(std::initializer_list<std::initializer_list<cplx>> rows) { return ComplexMatrix(rows); }

std::vector<ParityLabel> labels(const std::vector<ParityOperator>& ps) {
  std::vector<ParityLabel> out;
  for (const auto& p : ps) out.push_back(p.label);
  return out;
}

}  // namespace

TEST_CASE("parity operators have the published matrix forms") {
  CHECK((make_parity(ParityLabel::P_x0).matrix -
         from_rows({{0, 0, 1, 0}, {0, 0, 0, 1}, {1, 0, 0, 0}, {0, 1, 0, 0}})).max_abs() == 0.0);
  CHECK((make_parity(ParityLabel::P_0x).matrix -
         from_rows({{0, 1, 0, 0}, {1, 0, 0, 0}, {0, 0, 0, 1}, {0, 0, 1, 0}})).max_abs() == 0.0);
  CHECK((make_parity(ParityLabel::P_xx).matrix -
         from_rows({{0, 0, 0, 1}, {0, 0, 1, 0}, {0, 1, 0, 0}, {1, 0, 0, 0}})).max_abs() == 0.0);
  CHECK((make_parity(ParityLabel::P_d0).matrix -
         from_rows({{0, 1, 0, 0, 0}, {1, 0, 0, 0, 0}, {0, 0, 1, 0, 0}, {0, 0, 0, 0, 1}, {0, 0, 0, 1, 0}}))
            .max_abs() == 0.0);
  CHECK((make_parity(ParityLabel::P_dx).matrix -
         from_rows({{0, 0, 0, 0, 1}, {0, 0, 0, 1, 0}, {0, 0, 1, 0, 0}, {0, 1, 0, 0, 0}, {1, 0, 0, 0, 0}}))
            .max_abs() == 0.0);
}

TEST_CASE("parity candidates per plaquette") {
  CHECK(labels(parity_candidates({PlaquetteKind::A_0p0m, 1.0, 0.5})) == std::vector{ParityLabel::P_x0});
  CHECK(labels(parity_candidates({PlaquetteKind::B_pmpm, 1.0, 0.5})) ==
        std::vector{ParityLabel::P_0x, ParityLabel::P_xx});
  CHECK(labels(parity_candidates({PlaquetteKind::C_ppmm, 1.0, 0.5})) ==
        std::vector{ParityLabel::P_x0, ParityLabel::P_xx});
  CHECK(labels(parity_candidates({PlaquetteKind::D_pm0pm, 1.0, 0.5})) ==
        std::vector{ParityLabel::P_d0, ParityLabel::P_dx});
}

TEST_CASE("parity candidates are involutions that commute and anticommute as required") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> d(0.1, 3.0);
  for (auto kind : kAllKinds) {
    for (int trial = 0; trial < 10; ++trial) {
      const PlaquetteConfig cfg{kind, d(rng), d(rng)};
      const auto h0 = linear_hamiltonian_conservative(cfg);
      const auto h1 = linear_hamiltonian_gain_loss(cfg);
      const auto ps = parity_candidates(cfg);
      CHECK(!ps.empty());
      for (const auto& p : ps) {
        const auto& m = p.matrix;
        const std::size_t n = m.rows();
        CHECK((m * m - ComplexMatrix::identity(n)).max_abs() == 0.0);
        CHECK((m - ComplexMatrix::identity(n)).max_abs() > 0.0);
        CHECK((m - m.transpose()).max_abs() == 0.0);
        CHECK((m - m.conj()).max_abs() == 0.0);
        CHECK((m * h0 - h0 * m).max_abs() <= 1e-15 * cfg.k);
        CHECK((m * h1 + h1 * m).max_abs() <= 1e-15 * cfg.gamma);
        CHECK(check_pseudo_hermiticity(build_linear_hamiltonian(cfg), p));
      }
    }
  }
}

TEST_CASE("pseudo-hermiticity of the linear part only") {
  const auto p = make_parity(ParityLabel::P_x0);
  for (double g : {0.0, 0.3, 2.0, 5.0}) CHECK(check_pseudo_hermiticity(build_linear_hamiltonian({PlaquetteKind::A_0p0m, 1.7, g}), p));
  CHECK(check_pseudo_hermiticity(ComplexMatrix::identity(4), p));
  CHECK(check_pseudo_hermiticity(ComplexMatrix::identity(5), make_parity(ParityLabel::P_dx)));

  const StateVector u = {cplx{1.0, 0.2}, cplx{0.3, -0.5}, cplx{0.4, 0.1}, cplx{-0.7, 0.0}};
  const auto h = build_linear_hamiltonian({PlaquetteKind::A_0p0m, 1.0, 0.5}) + nonlinear_diagonal(u);
  CHECK_FALSE(check_pseudo_hermiticity(h, p));
}

TEST_CASE("closed-form linear spectra at the quoted parameters") {
  CHECK(multiset_distance(linear_spectrum_analytic({PlaquetteKind::A_0p0m, 1.0, 0.0}), {0.0, 0.0, 2.0, -2.0}) < 1e-15);
  CHECK(multiset_distance(linear_spectrum_analytic({PlaquetteKind::C_ppmm, 1.0, 1.0}), {1.0, 1.0, -1.0, -1.0}) < 1e-12);
  CHECK(multiset_distance(linear_spectrum_analytic({PlaquetteKind::D_pm0pm, 1.0, 0.5}),
                          {cplx{0, 0.5}, cplx{0, -0.5}, std::sqrt(3.75), -std::sqrt(3.75), 0.0}) < 1e-15);
}

TEST_CASE("numeric and closed-form linear spectra agree on random parameters") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> d(-3.0, 3.0);
  for (auto kind : kAllKinds) {
    int done = 0;
    while (done < 100) {
      const double k = d(rng), g = d(rng);
      // Defective eigenvalues lose half their digits; stay off the EPs.
      const double threshold = kind == PlaquetteKind::C_ppmm ? std::abs(k) : 2.0 * std::abs(k);
      if (std::abs(std::abs(g) - threshold) < 1e-3 || std::abs(k) < 1e-3) continue;
      const PlaquetteConfig cfg{kind, k, g};
      const Spectrum expected = closed_form(kind, k, g);
      CHECK(multiset_distance(linear_spectrum_analytic(cfg), expected) <= 1e-9);
      CHECK(multiset_distance(eig_complex(build_linear_hamiltonian(cfg)), expected) <= 1e-9);
      ++done;
    }
  }
}

TEST_CASE("pseudo-hermitian spectra are closed under conjugation") {
  std::mt19937_64 rng(78);
  std::uniform_real_distribution<double> d(-3.0, 3.0);
  for (auto kind : kAllKinds) {
    for (int trial = 0; trial < 50; ++trial) {
      const Spectrum s = eig_complex(build_linear_hamiltonian({kind, d(rng), d(rng)}));
      Spectrum conj;
      for (auto z : s) conj.push_back(std::conj(z));
      CHECK(multiset_distance(s, conj) <= 1e-7);
    }
  }
}

TEST_CASE("phase regimes") {
  CHECK(classify_pt_phase({PlaquetteKind::A_0p0m, 1.0, 1.0}).regime == PtRegime::exact);
  CHECK(classify_pt_phase({PlaquetteKind::A_0p0m, 1.0, 2.5}).regime == PtRegime::broken);
  CHECK(classify_pt_phase({PlaquetteKind::B_pmpm, 1.0, 0.1}).regime == PtRegime::broken);
  CHECK(classify_pt_phase({PlaquetteKind::B_pmpm, 1.0, 0.0}).regime == PtRegime::exact);
  CHECK(classify_pt_phase({PlaquetteKind::C_ppmm, 1.0, 0.5}).regime == PtRegime::exact);
  CHECK(classify_pt_phase({PlaquetteKind::C_ppmm, 1.0, 1.5}).regime == PtRegime::broken);
  CHECK(classify_pt_phase({PlaquetteKind::D_pm0pm, 1.0, 0.3}).regime == PtRegime::broken);

  const auto ep = classify_pt_phase({PlaquetteKind::A_0p0m, 1.0, 2.0});
  CHECK(ep.regime == PtRegime::exceptional_point);
  REQUIRE(ep.ep_order.has_value());
  CHECK(*ep.ep_order == 3);

  const auto ep_c = classify_pt_phase({PlaquetteKind::C_ppmm, 1.0, 1.0});
  CHECK(ep_c.regime == PtRegime::exceptional_point);
  REQUIRE(ep_c.ep_order.has_value());
  CHECK(*ep_c.ep_order == 2);

  CHECK(regime_name(PtRegime::exceptional_point) == "exceptional_point");
}

TEST_CASE("exact regime means every eigenvalue is real") {
  for (double g = 0.0; g <= 2.6; g += 0.13) {
    const PlaquetteConfig cfg{PlaquetteKind::A_0p0m, 1.0, g};
    const auto r = classify_pt_phase(cfg);
    if (r.regime == PtRegime::exact) CHECK(r.real_eigenvalue_count == 4);
    if (r.regime == PtRegime::broken) CHECK(r.real_eigenvalue_count < 4);
  }
}

TEST_CASE("jordan structure") {
  ComplexMatrix zero(2, 2);
  CHECK(jordan_structure(zero, 0.0) == std::vector<std::size_t>{1, 1});
  CHECK(jordan_structure(build_linear_hamiltonian({PlaquetteKind::A_0p0m, 1.0, 2.0}), 0.0) ==
        std::vector<std::size_t>{3, 1});
  CHECK(jordan_structure(build_linear_hamiltonian({PlaquetteKind::C_ppmm, 1.0, 1.0}), 1.0) ==
        std::vector<std::size_t>{2});
  CHECK(jordan_structure(build_linear_hamiltonian({PlaquetteKind::C_ppmm, 1.0, 1.0}), -1.0) ==
        std::vector<std::size_t>{2});
}

TEST_CASE("jordan blocks at an EP add up to the algebraic multiplicity") {
  struct Case {
    PlaquetteConfig cfg;
    cplx mu;
    std::size_t multiplicity;
  };
  for (const auto& c : {Case{{PlaquetteKind::A_0p0m, 1.0, 2.0}, 0.0, 4}, Case{{PlaquetteKind::A_0p0m, 2.5, 5.0}, 0.0, 4},
                        Case{{PlaquetteKind::C_ppmm, 1.0, 1.0}, 1.0, 2}, Case{{PlaquetteKind::C_ppmm, 0.5, 0.5}, -0.5, 2}}) {
    std::size_t total = 0;
    for (auto b : jordan_structure(build_linear_hamiltonian(c.cfg), c.mu)) total += b;
    CHECK(total == c.multiplicity);
  }
}

TEST_CASE("rank sequence is non-increasing") {
  const auto r = rank_sequence(build_linear_hamiltonian({PlaquetteKind::A_0p0m, 1.0, 2.0}), 0.0);
  REQUIRE(r.size() == 5);
  CHECK(r[0] == 4);
  CHECK(r[1] == 2);
  CHECK(r[2] == 1);
  CHECK(r[3] == 0);
  CHECK(r[4] == 0);
  for (std::size_t m = 1; m < r.size(); ++m) CHECK(r[m] <= r[m - 1]);
}

TEST_CASE("symmetric first-square state is its own PT image") {
  const double pb = 0.4;
  const StateVector u = {1.0, std::polar(0.7, pb), 1.0, std::polar(0.7, -pb)};
  const auto phi = check_solution_pt_symmetry(u, make_parity(ParityLabel::P_x0));
  REQUIRE(phi.has_value());
  CHECK(std::abs(*phi) < 1e-12);
}

TEST_CASE("case 2 state becomes PT invariant after a global rotation") {
  const PlaquetteConfig cfg{PlaquetteKind::A_0p0m, 1.0, 1.2};
  std::optional<MadelungState> st = closed_form_state(cfg, {PlaquetteKind::A_0p0m, BranchName::case2, 0}, 2.0);
  REQUIRE(st.has_value());
  const double phi_b = st->phases[1];
  const double phi_c = st->phases[2];
  const auto p = make_parity(ParityLabel::P_x0);

  // As written (phi_a = 0) the state maps to itself up to exp(-i phi_c).
  const StateVector u = st->to_state();
  const auto phi = check_solution_pt_symmetry(u, p);
  REQUIRE(phi.has_value());
  CHECK(std::abs(std::polar(1.0, *phi) - std::polar(1.0, -phi_c)) < 1e-10);

  // Rotating by exp(-i(phi_b - pi/2)) absorbs that phase.
  StateVector v = u;
  for (auto& z : v) z *= std::polar(1.0, -(phi_b - M_PI / 2));
  const auto phi0 = check_solution_pt_symmetry(v, p);
  REQUIRE(phi0.has_value());
  CHECK(std::abs(*phi0) < 1e-10);
}

TEST_CASE("PT image of a state supported on one site") {
  CHECK_FALSE(check_solution_pt_symmetry({1.0, 0.0, 0.0, 0.0}, make_parity(ParityLabel::P_x0)).has_value());
}

TEST_CASE("PT phase transforms covariantly under rotations") {
  std::mt19937_64 rng(9);
  const StateVector u = {1.0, std::polar(0.7, 0.4), 1.0, std::polar(0.7, -0.4)};
  const auto p = make_parity(ParityLabel::P_x0);
  std::uniform_real_distribution<double> angle(-1.5, 1.5);
  for (int trial = 0; trial < 20; ++trial) {
    const double theta = angle(rng);
    StateVector v = u;
    for (auto& z : v) z *= std::polar(1.0, theta);
    const auto phi = check_solution_pt_symmetry(v, p);
    REQUIRE(phi.has_value());
    CHECK(std::abs(std::polar(1.0, *phi) - std::polar(1.0, -2.0 * theta)) < 1e-12);
  }
}
