#include "tskf/kalman.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "tskf/error.hpp"

namespace tskf {

namespace {

Eigen::LLT<Matrix> factor_innovation(const Matrix& C, const Matrix& R, const Matrix& P, double mu) {
  const Matrix S = R + mu * C * P * C.transpose();
  Eigen::LLT<Matrix> llt(S);
  if (llt.info() != Eigen::Success || !S.allFinite()) {
    throw Error(ErrorCode::SingularInnovationCovariance,
                "R + mu C P C^T is not positive definite");
  }
  return llt;
}

Matrix jump_factor(const Matrix& A, double mu) {
  return Matrix::Identity(A.rows(), A.cols()) + mu * A;
}

}  // namespace

Matrix gain(const Matrix& A, const Matrix& C, const Matrix& R, const Matrix& P, double mu) {
  const auto llt = factor_innovation(C, R, P, mu);
  // K^T = S^{-1} C P (I + mu A)^T since S and P are symmetric.
  const Matrix cross = jump_factor(A, mu) * P * C.transpose();
  return llt.solve(cross.transpose()).transpose();
}

Matrix covariance_delta(const Matrix& A, const Matrix& C, const Matrix& G, const Matrix& Q,
                        const Matrix& R, const Matrix& P, double mu) {
  const auto llt = factor_innovation(C, R, P, mu);
  const Matrix phi = jump_factor(A, mu);
  const Matrix cross = phi * P * C.transpose();
  const Matrix correction = cross * llt.solve(cross.transpose());
  return A * P + phi * P * A.transpose() + G * Q * G.transpose() - correction;
}

FilterState filter_step(const StateSpaceModel& model, const FilterState& state, const Vector& y,
                        const Vector& u, double mu, const FilterOptions& options) {
  if (!(mu > 0.0) || !std::isfinite(mu)) {
    throw Error(ErrorCode::NonPositiveMu, fmt::format("graininess must be positive, got {}", mu));
  }
  const double mu_eff = options.clamp_mu ? std::min(mu, *options.clamp_mu) : mu;
  const Matrix K = gain(model.A, model.C, model.R, state.P, mu_eff);
  const Vector innovation = y - model.C * state.x_hat - model.D;
  const Vector x_delta = model.A * state.x_hat + model.B * u + K * innovation;
  const Matrix p_delta =
      covariance_delta(model.A, model.C, model.G, model.Q, model.R, state.P, mu_eff);

  FilterState next;
  next.t = state.t + mu;
  next.x_hat = state.x_hat + mu_eff * x_delta;
  const Matrix P = state.P + mu_eff * p_delta;
  next.P = 0.5 * (P + P.transpose());
  return next;
}

FilterTrace run_filter(const StateSpaceModel& model, std::span<const GridPoint> grid,
                       const Trajectory& trajectory, const InputSignal& input,
                       const FilterOptions& options) {
  model.validate();
  if (grid.empty()) throw Error(ErrorCode::EmptyGrid, "grid is empty");
  if (grid.size() != trajectory.size()) {
    throw Error(ErrorCode::GridTrajectoryMismatch,
                fmt::format("grid has {} points but trajectory has {}", grid.size(),
                            trajectory.size()));
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (std::abs(grid[i].t - trajectory[i].t) > kTimeTolerance) {
      throw Error(ErrorCode::GridTrajectoryMismatch,
                  fmt::format("grid point {} at t = {} but trajectory at t = {}", i, grid[i].t,
                              trajectory[i].t));
    }
  }

  FilterTrace trace;
  trace.records.reserve(grid.size());
  FilterState state{grid.front().t, model.x0_mean, model.P0};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const GridPoint& gp = grid[i];
    const TrajectoryPoint& truth = trajectory[i];
    FilterStepRecord rec;
    rec.t = gp.t;
    rec.mu = gp.mu;
    rec.segment = gp.segment;
    rec.origin = gp.origin;
    rec.y = truth.y;
    rec.innovation = truth.y - model.C * state.x_hat - model.D;
    rec.x_hat = state.x_hat;
    rec.P = state.P;
    rec.est_error = truth.x_true - state.x_hat;
    rec.meas_error = truth.y - model.C * truth.x_true - model.D;
    if (gp.mu) {
      const double mu = *gp.mu;
      const double mu_eff = options.clamp_mu ? std::min(mu, *options.clamp_mu) : mu;
      rec.K = gain(model.A, model.C, model.R, state.P, mu_eff);
      state = filter_step(model, state, truth.y, input(gp.t), mu, options);
      state.t = grid[i + 1].t;
      if (!state.x_hat.allFinite() || !state.P.allFinite()) {
        throw DivergenceError(gp.t, mu,
                              fmt::format("filter diverged leaving t = {} with mu = {}", gp.t, mu));
      }
    }
    trace.records.push_back(std::move(rec));
  }
  return trace;
}

std::vector<Matrix> covariance_sequence(const StateSpaceModel& model,
                                        std::span<const GridPoint> grid,
                                        const FilterOptions& options) {
  model.validate();
  if (grid.empty()) throw Error(ErrorCode::EmptyGrid, "grid is empty");
  std::vector<Matrix> out;
  out.reserve(grid.size());
  Matrix P = model.P0;
  for (const GridPoint& gp : grid) {
    out.push_back(P);
    if (!gp.mu) break;
    const double mu = *gp.mu;
    if (!(mu > 0.0)) {
      throw Error(ErrorCode::NonPositiveMu, fmt::format("graininess must be positive, got {}", mu));
    }
    const double mu_eff = options.clamp_mu ? std::min(mu, *options.clamp_mu) : mu;
    const Matrix next =
        P + mu_eff * covariance_delta(model.A, model.C, model.G, model.Q, model.R, P, mu_eff);
    P = 0.5 * (next + next.transpose());
    if (!P.allFinite()) throw DivergenceError(gp.t, mu, "covariance overflowed");
  }
  return out;
}

}  // namespace tskf
