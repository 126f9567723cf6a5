#include <cmath>
#include <random>

#include "doctest.h"
#include "tskf/error.hpp"
#include "tskf/linsys.hpp"
#include "tskf/owc.hpp"

using namespace tskf;

namespace {

Matrix m1(double v) { return Matrix::Constant(1, 1, v); }
Vector v1(double v) { return Vector::Constant(1, v); }

StateSpaceModel scalar(double a, double c, double g, double q, double r) {
  return {m1(a), Matrix::Zero(1, 1), m1(c), v1(0), m1(g), m1(q), m1(r), v1(1), m1(1)};
}

}  // namespace

TEST_CASE("measure") {
  const auto owc = owc::owc_model();
  CHECK(measure(owc, v1(0.4141), v1(0))(0) == doctest::Approx(-637.35 * 0.4141 + 511.97).epsilon(1e-15));
  CHECK(measure(owc, v1(0.4141), v1(0))(0) == doctest::Approx(248.04).epsilon(0.01 / 248.04));
  CHECK(measure(owc, v1(0.5), v1(0))(0) == doctest::Approx(193.295));

  const auto ref = owc::reference_model();
  CHECK(measure(ref, Vector::Ones(2), v1(0))(0) == 1);

  StateSpaceModel id = ref;
  id.C = Matrix::Identity(2, 2);
  id.D = Vector::Zero(2);
  id.R = Matrix::Identity(2, 2);
  const Vector x(Vector::LinSpaced(2, 3, 4));
  CHECK(measure(id, x, Vector::Zero(2)) == x);

  CHECK_THROWS_AS(measure(ref, Vector::Ones(3), v1(0)), Error);
}

TEST_CASE("frozen dynamics") {
  auto m = scalar(0, 1, 0, 1, 1);
  const auto grid = sample_grid(td_timescale(), {0.5});
  for (const auto& p : simulate_truth(m, grid, zero_input(1), 3)) CHECK(p.x_true(0) == 1);
}

TEST_CASE("noise-free reference system on 2Z steps with I + 2A") {
  auto m = owc::reference_model();
  m.Q.setZero();
  m.R.setZero();
  const auto grid = sample_grid(uniform_lattice(2, 20), {});
  const auto traj = simulate_truth(m, grid, zero_input(1), 1);
  const Matrix Phi = Matrix::Identity(2, 2) + 2.0 * m.A;
  for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
    CHECK((traj[i + 1].x_true - Phi * traj[i].x_true).norm() == 0);
  }
}

TEST_CASE("OWC truth matches a scalar recurrence on the same stream") {
  const auto m = owc::owc_model();
  const auto grid = sample_grid(td_timescale(), {0.05});
  const auto traj = simulate_truth(m, grid, zero_input(1), 11);

  std::mt19937_64 rng(11);
  std::normal_distribution<double> z(0.0, 1.0);
  double x = 0.5;
  REQUIRE(traj.size() == grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double v = 10.0 * z(rng);
    CHECK(traj[i].x_true(0) == doctest::Approx(x).epsilon(1e-12));
    CHECK(traj[i].y(0) == doctest::Approx(-637.35 * x + 511.97 + v).epsilon(1e-12));
    if (grid[i].mu) {
      const double w = z(rng);
      x = x + *grid[i].mu * (x + w);
    }
  }
  CHECK(traj.back().t == 300);
}

TEST_CASE("same seed, same trajectory") {
  const auto m = owc::reference_model();
  const auto grid = sample_grid(p_ab(1, 2, 10), {0.1});
  const auto a = simulate_truth(m, grid, zero_input(1), 5);
  const auto b = simulate_truth(m, grid, zero_input(1), 5);
  const auto c = simulate_truth(m, grid, zero_input(1), 6);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].x_true == b[i].x_true);
    CHECK(a[i].y == b[i].y);
    differs = differs || a[i].y != c[i].y;
  }
  CHECK(differs);
}

TEST_CASE("noise-free superposition") {
  auto m = owc::reference_model();
  m.Q.setZero();
  m.R.setZero();
  const auto grid = sample_grid(p_ab(1, 2, 4), {0.1});
  auto run = [&](Vector x0) {
    m.x0_mean = x0;
    return simulate_truth(m, grid, zero_input(1), 1);
  };
  Vector a(2), b(2);
  a << 1.5, -0.25;
  b << -0.75, 2.0;
  const auto ta = run(a), tb = run(b), tab = run(2.0 * a + 3.0 * b);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK((tab[i].x_true - 2.0 * ta[i].x_true - 3.0 * tb[i].x_true).norm() <= 1e-12);
  }
}

TEST_CASE("first-order refinement on an interval") {
  auto m = owc::reference_model();
  m.Q.setZero();
  m.R.setZero();
  const auto ts = TimeScale::canonicalize(std::vector<TimeSegment>{Interval{0, 5}});
  auto end_state = [&](double h) {
    return simulate_truth(m, sample_grid(ts, {h}), zero_input(1), 1).back().x_true;
  };
  const Vector x1 = end_state(0.02), x2 = end_state(0.01), x4 = end_state(0.005);
  const double ratio = (x1 - x2).norm() / (x2 - x4).norm();
  CHECK(ratio >= 1.5);
  CHECK(ratio <= 2.5);
}

TEST_CASE("sqrt_mu scaling divides w by sqrt(mu)") {
  auto m = scalar(0, 1, 1, 1, 1);
  const auto grid = sample_grid(uniform_lattice(4, 8), {});
  TruthOptions opt;
  const auto a = simulate_truth(m, grid, zero_input(1), 2, opt);
  opt.noise_scaling = NoiseScaling::SqrtMu;
  const auto b = simulate_truth(m, grid, zero_input(1), 2, opt);
  CHECK(b[0].w_drawn(0) == doctest::Approx(a[0].w_drawn(0) / 2.0));
}

TEST_CASE("boundary modes") {
  CHECK(reflect_into(0.7, 0.4, 0.6) == doctest::Approx(0.5));
  CHECK(reflect_into(0.3, 0.4, 0.6) == doctest::Approx(0.5));
  CHECK(reflect_into(0.95, 0.4, 0.6) == doctest::Approx(0.55));
  CHECK(reflect_into(0.5, 0.4, 0.6) == 0.5);

  const auto m = owc::owc_model();
  const auto grid = sample_grid(td_timescale(), {0.05});
  TruthOptions opt;
  opt.lower = v1(0.4141);
  opt.upper = v1(0.6729);
  for (auto mode : {BoundaryMode::Reflect, BoundaryMode::Clamp}) {
    opt.boundary = mode;
    for (const auto& p : simulate_truth(m, grid, zero_input(1), 1, opt)) {
      CHECK(p.x_true(0) >= 0.4141);
      CHECK(p.x_true(0) <= 0.6729);
    }
  }
}

TEST_CASE("validation") {
  auto m = owc::reference_model();
  CHECK_NOTHROW(m.validate());
  m.R = m1(0);
  CHECK_THROWS_AS(m.validate(), Error);
  m = owc::reference_model();
  m.P0(0, 1) = 0.5;
  CHECK_THROWS_AS(m.check_covariances(), Error);
  m = owc::reference_model();
  m.G = Matrix::Ones(3, 1);
  try {
    m.validate();
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
  CHECK_THROWS_AS(simulate_truth(owc::owc_model(), std::vector<GridPoint>{}, zero_input(1), 1), Error);
}
