#include <cmath>

#include "doctest.h"
#include "tskf/error.hpp"
#include "tskf/kalman.hpp"
#include "tskf/oracles.hpp"
#include "tskf/owc.hpp"

using namespace tskf;
using namespace tskf::oracles;

namespace {

Matrix m1(double v) { return Matrix::Constant(1, 1, v); }
Vector v1(double v) { return Vector::Constant(1, v); }

StateSpaceModel scalar(double a, double c, double g, double q, double r, double p0) {
  return {m1(a), Matrix::Zero(1, 1), m1(c), v1(0), m1(g), m1(q), m1(r), v1(0), m1(p0)};
}

}  // namespace

TEST_CASE("discrete equivalent mapping") {
  const auto ref = owc::reference_model();
  const auto eq = DiscreteEquivalent::from_model(ref, 0.5);
  CHECK((eq.Phi - (Matrix::Identity(2, 2) + 0.5 * ref.A)).norm() == 0);
  CHECK((eq.Qd - 0.5 * ref.G * ref.Q * ref.G.transpose()).norm() == 0);
  CHECK(eq.Rd(0, 0) == 4.0);
  CHECK_THROWS_AS(DiscreteEquivalent::from_model(ref, 0.0), Error);
}

TEST_CASE("filter and discrete predictor agree at constant graininess") {
  const auto ref = owc::reference_model();
  for (double c : {0.1, 0.5, 2.0}) {
    const auto grid = sample_grid(uniform_lattice(c, 200 * c), {});
    REQUIRE(grid.size() == 201);
    const auto traj = simulate_truth(ref, grid, zero_input(1), 4);
    const auto trace = run_filter(ref, grid, traj, zero_input(1));
    std::vector<Vector> ys;
    for (const auto& p : traj) ys.push_back(p.y);
    const auto disc = discrete_kf_equivalent(ref, c, 200, ys);
    for (std::size_t k = 0; k <= 200; ++k) {
      CHECK((trace.records[k].x_hat - disc[k].x_hat).cwiseAbs().maxCoeff() <= 1e-9);
      CHECK((trace.records[k].P - disc[k].P).cwiseAbs().maxCoeff() <= 1e-9);
    }
  }
}

TEST_CASE("unobserved noiseless predictor is Phi^k P0 Phi^T^k") {
  auto m = owc::reference_model();
  m.C.setZero();
  m.Q.setZero();
  const std::vector<Vector> ys(10, v1(0));
  const auto disc = discrete_kf_equivalent(m, 0.3, 10, ys);
  const Matrix Phi = Matrix::Identity(2, 2) + 0.3 * m.A;
  Matrix Pk = m.P0;
  for (std::size_t k = 0; k <= 10; ++k) {
    CHECK((disc[k].P - Pk).cwiseAbs().maxCoeff() <= 1e-13);
    Pk = Phi * Pk * Phi.transpose();
  }
}

TEST_CASE("scalar steady state") {
  const double q = 0.7, r = 1.9;
  const auto m = scalar(0, 1, 1, q, r, 5.0);
  const std::vector<Vector> ys(400, v1(0));
  const auto disc = discrete_kf_equivalent(m, 1.0, 400, ys);
  const double p_inf = (q + std::sqrt(q * q + 4 * q * r)) / 2;
  CHECK(disc.back().P(0, 0) == doctest::Approx(p_inf).epsilon(1e-12));

  const auto grid = sample_grid(uniform_lattice(1.0, 400), {});
  CHECK(covariance_sequence(m, grid).back()(0, 0) == doctest::Approx(p_inf).epsilon(1e-12));
}

TEST_CASE("Riccati reference") {
  SUBCASE("pure diffusion grows linearly") {
    const auto m = scalar(0, 0, 1, 1, 1, 0.5);
    const auto ref = riccati_ode_reference(m, 0, 3, m.P0, 0.01);
    for (double t : {0.0, 0.37, 1.0, 2.995, 3.0}) CHECK(ref.at(t)(0, 0) == doctest::Approx(0.5 + t));
    CHECK_THROWS_AS(ref.at(3.5), Error);
  }
  SUBCASE("converges to sqrt(q r)") {
    const double q = 2.0, r = 0.5;
    const auto m = scalar(0, 1, 1, q, r, 4.0);
    const auto ref = riccati_ode_reference(m, 0, 30, m.P0, 0.01);
    CHECK(ref.at(30)(0, 0) == doctest::Approx(std::sqrt(q * r)).epsilon(1e-10));
  }
  SUBCASE("RK4 self-convergence near 16x") {
    // P' = q - P^2 / r with P(0) = p0 has P(t) = s tanh(s t / r + atanh(p0 / s)), s = sqrt(q r).
    const double q = 1.0, r = 1.0, p0 = 0.2;
    const auto m = scalar(0, 1, 1, q, r, p0);
    const double s = std::sqrt(q * r);
    const double exact = s * std::tanh(s * 2.0 / r + std::atanh(p0 / s));
    auto err = [&](double step) {
      return std::abs(riccati_ode_reference(m, 0, 2, m.P0, step).at(2)(0, 0) - exact);
    };
    const double e1 = err(0.2), e2 = err(0.1), e3 = err(0.05);
    CHECK(e1 / e2 == doctest::Approx(16).epsilon(0.25));
    CHECK(e2 / e3 == doctest::Approx(16).epsilon(0.25));
  }
  SUBCASE("interval filter approaches the ODE") {
    const auto m = owc::reference_model();
    const auto ref = riccati_ode_reference(m, 0, 5, m.P0, 1e-3);
    const auto ts = TimeScale::canonicalize(std::vector<TimeSegment>{Interval{0, 5}});
    const auto grid = sample_grid(ts, {1e-3});
    const auto Ps = covariance_sequence(m, grid);
    double err = 0, scale = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const Matrix Pr = ref.at(grid[i].t);
      err = std::max(err, (Ps[i] - Pr).cwiseAbs().maxCoeff());
      scale = std::max(scale, Pr.cwiseAbs().maxCoeff());
    }
    CHECK(err / scale <= 1e-2);
  }
}

TEST_CASE("graininess probes") {
  const auto ref = owc::reference_model();
  BoundOptions opt;
  CHECK_FALSE(covariance_diverges(ref, 0.5, opt));
  const auto probe = probe_graininess(ref, 0.5, opt);
  CHECK(probe.steps == opt.horizon_steps);
  CHECK(probe.max_trace >= probe.final_trace);

  // Unobserved unstable scalar: trace grows like (1 + c)^{2k}.
  const auto unstable = scalar(1, 0, 0, 0, 1, 1);
  const auto grow = probe_graininess(unstable, 0.5, opt);
  CHECK(grow.diverges);
  CHECK(grow.steps < opt.horizon_steps);
  CHECK(divergence_criterion(opt).find("1e+08") != std::string::npos);
}

TEST_CASE("stable scalar has no bound in (0.1, 1.9)") {
  const auto m = scalar(-1, 1, 0, 0, 1, 1);
  for (double c = 0.1; c < 1.9; c += 0.1) CHECK_FALSE(covariance_diverges(m, c, {}));
  try {
    estimate_graininess_bound(m, 0.1, 1.9);
    FAIL("expected NoSignChange");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoSignChange);
  }
}

TEST_CASE("bisection brackets a synthetic transition") {
  // Unobserved A = -1: |1 - c| > 1 exactly when c > 2.
  const auto m = scalar(-1, 0, 0, 0, 1, 1);
  BoundOptions opt;
  opt.resolution = 0.01;
  const auto b = estimate_graininess_bound(m, 1.0, 3.0, opt);
  CHECK(b.lo <= b.mu_bar);
  CHECK(b.mu_bar <= b.hi);
  CHECK(b.hi - b.lo <= 0.01);
  CHECK(b.mu_bar == doctest::Approx(2.0).epsilon(0.01));
  CHECK_FALSE(b.criterion.empty());
}
