#include "tskf/linsys.hpp"

#include <cmath>
#include <random>

#include <fmt/format.h>

#include "tskf/error.hpp"

namespace tskf {

namespace {

constexpr double kSymmetryTolerance = 1e-12;
constexpr double kPsdTolerance = -1e-12;

void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("{} is {}x{}, expected {}x{}", name, m.rows(), m.cols(), rows, cols));
  }
}

void require_length(const Vector& v, Eigen::Index len, const char* name) {
  if (v.size() != len) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("{} has length {}, expected {}", name, v.size(), len));
  }
}

void require_symmetric(const Matrix& m, const char* name) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > kSymmetryTolerance * scale) {
    throw Error(ErrorCode::NotPositiveDefinite, fmt::format("{} is not symmetric", name));
  }
}

void require_psd(const Matrix& m, const char* name) {
  require_symmetric(m, name);
  if (m.size() == 0) return;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m, Eigen::EigenvaluesOnly);
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if (eig.eigenvalues().minCoeff() < kPsdTolerance * scale) {
    throw Error(ErrorCode::NotPositiveDefinite, fmt::format("{} is not positive semidefinite", name));
  }
}

}  // namespace

void StateSpaceModel::check_dimensions() const {
  const Eigen::Index n = A.rows();
  if (n == 0) throw Error(ErrorCode::DimensionMismatch, "A must be non-empty");
  require_shape(A, n, n, "A");
  const Eigen::Index m = B.cols();
  const Eigen::Index p = C.rows();
  const Eigen::Index q = G.cols();
  if (p == 0) throw Error(ErrorCode::DimensionMismatch, "C must have at least one row");
  require_shape(B, n, m, "B");
  require_shape(C, p, n, "C");
  require_length(D, p, "D");
  require_shape(G, n, q, "G");
  require_shape(Q, q, q, "Q");
  require_shape(R, p, p, "R");
  require_length(x0_mean, n, "x0_mean");
  require_shape(P0, n, n, "P0");
  const bool finite = A.allFinite() && B.allFinite() && C.allFinite() && D.allFinite() &&
                      G.allFinite() && Q.allFinite() && R.allFinite() && x0_mean.allFinite() &&
                      P0.allFinite();
  if (!finite) throw Error(ErrorCode::NonFinite, "model has non-finite entries");
}

void StateSpaceModel::check_covariances() const {
  require_psd(Q, "Q");
  require_psd(P0, "P0");
  require_symmetric(R, "R");
  Eigen::LLT<Matrix> llt(R);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::NotPositiveDefinite, "R is not positive definite");
  }
}

InputSignal zero_input(Eigen::Index m) {
  return [m](double) { return Vector::Zero(m); };
}

InputSignal constant_input(Vector u) {
  return [u = std::move(u)](double) { return u; };
}

Vector measure(const StateSpaceModel& model, const Vector& x, const Vector& noise_draw) {
  require_length(x, model.C.cols(), "x");
  require_length(noise_draw, model.C.rows(), "measurement noise");
  require_length(model.D, model.C.rows(), "D");
  return model.C * x + model.D + noise_draw;
}

Matrix psd_factor(const Matrix& S) {
  if (S.size() == 0) return S;
  if (S.rows() == 1) return Matrix::Constant(1, 1, std::sqrt(std::max(0.0, S(0, 0))));
  Eigen::SelfAdjointEigenSolver<Matrix> eig(S);
  const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal();
}

double reflect_into(double v, double lo, double hi) {
  const double width = hi - lo;
  if (!(width > 0.0)) return lo;
  const double period = 2.0 * width;
  double r = std::fmod(v - lo, period);
  if (r < 0.0) r += period;
  return r <= width ? lo + r : hi - (r - width);
}

Trajectory simulate_truth(const StateSpaceModel& model, std::span<const GridPoint> grid,
                          const InputSignal& input, std::uint64_t seed,
                          const TruthOptions& options) {
  model.check_dimensions();
  if (grid.empty()) throw Error(ErrorCode::EmptyGrid, "grid is empty");
  const Eigen::Index n = model.state_dim();
  const Eigen::Index p = model.output_dim();
  const Eigen::Index q = model.noise_dim();
  if (options.boundary != BoundaryMode::Free) {
    require_length(options.lower, n, "truth lower bound");
    require_length(options.upper, n, "truth upper bound");
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto standard_normal = [&](Eigen::Index k) {
    Vector z(k);
    for (Eigen::Index i = 0; i < k; ++i) z(i) = normal(rng);
    return z;
  };

  const Matrix q_factor = psd_factor(model.Q);
  const Matrix r_factor = psd_factor(model.R);

  Vector x = model.x0_mean;
  if (options.random_init) x += psd_factor(model.P0) * standard_normal(n);

  auto apply_bounds = [&](Vector& state) {
    if (options.boundary == BoundaryMode::Free) return;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double lo = options.lower(i);
      const double hi = options.upper(i);
      state(i) = options.boundary == BoundaryMode::Reflect ? reflect_into(state(i), lo, hi)
                                                            : std::clamp(state(i), lo, hi);
    }
  };
  apply_bounds(x);

  Trajectory out;
  out.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const GridPoint& gp = grid[i];
    TrajectoryPoint pt;
    pt.t = gp.t;
    pt.mu = gp.mu;
    pt.x_true = x;
    pt.v_drawn = r_factor * standard_normal(p);
    pt.y = model.C * x + model.D + pt.v_drawn;
    if (gp.mu) {
      const double mu = *gp.mu;
      Vector w = q_factor * standard_normal(q);
      if (options.noise_scaling == NoiseScaling::SqrtMu) w /= std::sqrt(mu);
      const Vector u = input(gp.t);
      x = x + mu * (model.A * x + model.B * u + model.G * w);
      apply_bounds(x);
      if (!x.allFinite()) {
        throw DivergenceError(gp.t, mu,
                              fmt::format("truth state became non-finite after t = {} (mu = {})",
                                          gp.t, mu));
      }
      pt.w_drawn = std::move(w);
    }
    out.push_back(std::move(pt));
  }
  return out;
}

}  // namespace tskf
