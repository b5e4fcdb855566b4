#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "ptplaq/errors.hpp"
#include "ptplaq/model.hpp"
#include "ptplaq/stationary.hpp"
#include "ptplaq/symmetry.hpp"
#include "support.hpp"

using namespace ptplaq;

namespace {

using testing::kAllKinds;
using testing::neighbours;
using testing::residual_by_hand;
using testing::stationary_gamma_coefficients;

bool hermitian(const ComplexMatrix& h) { return (h - h.adjoint()).max_abs() == 0.0; }

}  // namespace

TEST_CASE("kind codes round trip") {
  for (auto kind : kAllKinds) CHECK(kind_from_code(kind_code(kind)) == kind);
  CHECK_THROWS_AS(kind_from_code("E"), PreconditionError);
  CHECK(site_count(PlaquetteKind::D_pm0pm) == 5);
  CHECK(site_count(PlaquetteKind::B_pmpm) == 4);
}

TEST_CASE("gain and loss balance on every plaquette") {
  for (auto kind : kAllKinds) {
    int total = 0;
    for (int s : gain_loss_signs(kind)) total += s;
    CHECK(total == 0);
  }
}

TEST_CASE("gain-loss signs agree with the stationary equations") {
  // A +i*gamma*s_n*u_n term in H_L turns into -i*gamma*s_n*u_n in the
  // stationary system under u = exp(iEt) u0.
  for (auto kind : kAllKinds) {
    const auto s = gain_loss_signs(kind);
    const auto c = stationary_gamma_coefficients(kind);
    for (std::size_t n = 0; n < s.size(); ++n) CHECK(s[n] == -c[n]);
  }
}

TEST_CASE("square with gain on B and loss on D") {
  const auto h = build_linear_hamiltonian({PlaquetteKind::A_0p0m, 1.0, 0.5});
  const ComplexMatrix expected = {{0.0, -1.0, 0.0, -1.0},
                                  {-1.0, cplx{0, 0.5}, -1.0, 0.0},
                                  {0.0, -1.0, 0.0, -1.0},
                                  {-1.0, 0.0, -1.0, cplx{0, -0.5}}};
  CHECK((h - expected).max_abs() == 0.0);
}

TEST_CASE("cross couples the centre to each arm only") {
  const auto h = build_linear_hamiltonian({PlaquetteKind::D_pm0pm, 1.0, 0.0});
  const ComplexMatrix expected = {{0, 0, -1, 0, 0}, {0, 0, -1, 0, 0}, {-1, -1, 0, -1, -1}, {0, 0, -1, 0, 0},
                                  {0, 0, -1, 0, 0}};
  CHECK((h - expected).max_abs() == 0.0);
}

TEST_CASE("hamiltonian is symmetric, and hermitian exactly when gamma vanishes") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> d(-3.0, 3.0);
  for (auto kind : kAllKinds) {
    for (int trial = 0; trial < 20; ++trial) {
      const PlaquetteConfig cfg{kind, d(rng), d(rng)};
      const auto h = build_linear_hamiltonian(cfg);
      CHECK((h - h.transpose()).max_abs() == 0.0);
      CHECK(hermitian(h) == (cfg.gamma == 0.0));
      CHECK(hermitian(build_linear_hamiltonian(cfg.with_gamma(0.0))));
    }
  }
}

TEST_CASE("linear hamiltonian splits into conservative and gain-loss parts") {
  const PlaquetteConfig cfg{PlaquetteKind::C_ppmm, 0.7, 0.3};
  const auto sum = linear_hamiltonian_conservative(cfg) + linear_hamiltonian_gain_loss(cfg);
  CHECK((sum - build_linear_hamiltonian(cfg)).max_abs() == 0.0);
}

TEST_CASE("nonlinear diagonal") {
  CHECK(nonlinear_diagonal(StateVector(4)).max_abs() == 0.0);

  const auto n = nonlinear_diagonal({1.0, cplx{0, 2}, 0.0, 0.0});
  CHECK(n(0, 0) == cplx{-1.0});
  CHECK(n(1, 1) == cplx{-4.0});
  CHECK(n(2, 2) == cplx{0.0});
  CHECK(n(0, 1) == cplx{0.0});
  CHECK(hermitian(n));
}

TEST_CASE("nonlinear diagonal commutes with parity relabelling") {
  std::mt19937_64 rng(4);
  const ParityOperator p = make_parity(ParityLabel::P_x0);
  for (int trial = 0; trial < 20; ++trial) {
    const StateVector u = testing::random_vector(rng, 4);
    const auto lhs = nonlinear_diagonal(p.matrix * u);
    const auto rhs_m = p.matrix * nonlinear_diagonal(u) * p.matrix;
    CHECK((lhs - rhs_m).max_abs() < 1e-14);
  }
}

TEST_CASE("right-hand side at zero and at the uniform state") {
  const PlaquetteConfig cfg{PlaquetteKind::A_0p0m, 1.0, 0.0};
  for (auto z : rhs(cfg, StateVector(4))) CHECK(z == cplx{});
  for (auto z : rhs(cfg, {1.0, 1.0, 1.0, 1.0})) CHECK(std::abs(z - cplx{0, 3}) < 1e-15);
}

TEST_CASE("right-hand side matches the written equations of motion") {
  std::mt19937_64 rng(8);
  for (auto kind : kAllKinds) {
    const PlaquetteConfig cfg{kind, 0.8, 0.6};
    const StateVector u = testing::random_vector(rng, cfg.sites());
    const auto c = stationary_gamma_coefficients(kind);
    const auto nb = neighbours(kind);
    const StateVector f = rhs(cfg, u);
    for (std::size_t n = 0; n < u.size(); ++n) {
      cplx s{};
      for (auto m : nb[n]) s += u[m];
      // i du/dt = -k(nbrs) - |u|^2 u - c i gamma u
      const cplx expected = cplx{0, -1} * (-cfg.k * s - std::norm(u[n]) * u[n] - c[n] * cplx{0, cfg.gamma} * u[n]);
      CHECK(std::abs(f[n] - expected) < 1e-13);
    }
  }
}

TEST_CASE("power grows at twice gamma times the gain-loss imbalance") {
  std::mt19937_64 rng(12);
  const PlaquetteConfig cfg{PlaquetteKind::A_0p0m, 1.0, 1.9};
  for (int trial = 0; trial < 50; ++trial) {
    const StateVector u = testing::random_vector(rng, 4);
    const StateVector f = rhs(cfg, u);
    double rate = 0.0;
    for (std::size_t n = 0; n < 4; ++n) rate += 2.0 * std::real(std::conj(u[n]) * f[n]);
    const double expected = 2.0 * cfg.gamma * (std::norm(u[1]) - std::norm(u[3]));
    CHECK(std::abs(rate - expected) < 1e-12 * (1.0 + std::abs(expected)));
  }
}

TEST_CASE("power balance holds on every plaquette") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  for (auto kind : kAllKinds) {
    const auto s = gain_loss_signs(kind);
    for (int trial = 0; trial < 30; ++trial) {
      const PlaquetteConfig cfg{kind, d(rng), d(rng)};
      const StateVector u = testing::random_vector(rng, cfg.sites());
      const StateVector f = rhs(cfg, u);
      double rate = 0.0, expected = 0.0;
      for (std::size_t n = 0; n < u.size(); ++n) {
        rate += 2.0 * std::real(std::conj(u[n]) * f[n]);
        expected += 2.0 * cfg.gamma * s[n] * std::norm(u[n]);
      }
      CHECK(std::abs(rate - expected) < 1e-12 * (1.0 + std::abs(expected)));
    }
  }
}

TEST_CASE("global phase rotations commute with the flow") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> angle(-M_PI, M_PI);
  for (auto kind : kAllKinds) {
    const PlaquetteConfig cfg{kind, 1.3, 0.4};
    for (int trial = 0; trial < 20; ++trial) {
      const StateVector u = testing::random_vector(rng, cfg.sites());
      const cplx rot = std::polar(1.0, angle(rng));
      StateVector ru = u;
      for (auto& z : ru) z *= rot;
      StateVector expected = rhs(cfg, u);
      for (auto& z : expected) z *= rot;
      CHECK(testing::max_diff(rhs(cfg, ru), expected) < 1e-13);
    }
  }
}

TEST_CASE("stationary residual at zero") {
  for (auto kind : kAllKinds) {
    const PlaquetteConfig cfg{kind, 1.0, 0.7};
    for (auto z : stationary_residual(cfg, 3.0, StateVector(cfg.sites()))) CHECK(z == cplx{});
  }
}

TEST_CASE("uniform in-phase state is not stationary at E=2") {
  const PlaquetteConfig cfg{PlaquetteKind::A_0p0m, 1.0, 0.0};
  for (auto z : stationary_residual(cfg, 2.0, {2.0, 2.0, 2.0, 2.0})) CHECK(std::abs(z - 8.0) < 1e-14);
}

TEST_CASE("stationary residual matches the written stationary systems") {
  std::mt19937_64 rng(31);
  for (auto kind : kAllKinds) {
    const PlaquetteConfig cfg{kind, 0.9, 0.35};
    const StateVector u = testing::random_vector(rng, cfg.sites());
    CHECK(testing::max_diff(stationary_residual(cfg, 1.7, u), residual_by_hand(cfg, 1.7, u)) < 1e-13);
  }
}

TEST_CASE("closed-form branches of the first square are stationary at E=2") {
  const PlaquetteConfig cfg{PlaquetteKind::A_0p0m, 1.0, 0.0};
  const auto branches = analytic_branches(cfg, 2.0);
  REQUIRE(!branches.empty());
  for (const auto& b : branches) {
    const StateVector u = b.state.to_state();
    CHECK(vector_norm(residual_by_hand(cfg, 2.0, u)) < 1e-12);
  }
}

TEST_CASE("closed-form branches of the third square are stationary at gamma=0.5") {
  const PlaquetteConfig cfg{PlaquetteKind::C_ppmm, 1.0, 0.5};
  const auto branches = analytic_branches(cfg, 2.0);
  std::size_t lower = 0;
  for (const auto& b : branches) {
    if (b.label.name == BranchName::c_inphase_minus || b.label.name == BranchName::c_antiphase_minus) ++lower;
    CHECK(vector_norm(residual_by_hand(cfg, 2.0, b.state.to_state())) < 1e-12);
  }
  CHECK(lower == 2);
}

TEST_CASE("stationary states rotate at frequency E under the flow") {
  // u(t) = exp(iEt) u0 has du/dt = iE u; rhs must agree, and by gauge
  // covariance it then agrees at every t.
  for (auto kind : kAllKinds) {
    const PlaquetteConfig cfg{kind, 1.0, kind == PlaquetteKind::D_pm0pm ? 0.3 : 0.5};
    const double E = kind == PlaquetteKind::D_pm0pm ? 15.0 : 2.0;
    for (const auto& b : analytic_branches(cfg, E)) {
      const StateVector u0 = b.state.to_state();
      for (double t : {0.0, 0.37, 5.0}) {
        StateVector u = u0;
        for (auto& z : u) z *= std::polar(1.0, E * t);
        StateVector expected = u;
        for (auto& z : expected) z *= cplx{0, E};
        CHECK(testing::max_diff(rhs(cfg, u), expected) < 1e-10 * (1.0 + E));
      }
    }
  }
}

TEST_CASE("config json round trip") {
  const PlaquetteConfig cfg{PlaquetteKind::D_pm0pm, 1.25, -0.5};
  nlohmann::json j = cfg;
  CHECK(j["kind"] == "D");
  const PlaquetteConfig back = j.get<PlaquetteConfig>();
  CHECK(back.kind == cfg.kind);
  CHECK(back.k == cfg.k);
  CHECK(back.gamma == cfg.gamma);
  CHECK(PlaquetteConfig{PlaquetteKind::A_0p0m, 0.0, 0.0}.decoupled());
}

TEST_CASE("state validation") {
  const PlaquetteConfig cfg{PlaquetteKind::A_0p0m, 1.0, 0.0};
  CHECK_THROWS_AS(validate_state(cfg, StateVector(5)), DimensionError);
  CHECK_THROWS(validate_state(cfg, {NAN, 0.0, 0.0, 0.0}));
  CHECK_NOTHROW(validate_state(cfg, StateVector(4)));
}
