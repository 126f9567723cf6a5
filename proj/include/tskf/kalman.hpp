#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tskf/linsys.hpp"
#include "tskf/timescale.hpp"

namespace tskf {

struct FilterState {
  double t = 0.0;
  Vector x_hat;
  Matrix P;
};

struct FilterOptions {
  // Caps the graininess used inside gain and covariance updates. Off by
  // default; large jumps are processed as they are.
  std::optional<double> clamp_mu;
};

// K = (I + mu A) P C^T (R + mu C P C^T)^{-1}, solved through a Cholesky
// factorization of the innovation covariance.
Matrix gain(const Matrix& A, const Matrix& C, const Matrix& R, const Matrix& P, double mu);

// P^Delta = A P + (I + mu A) P A^T + G Q G^T
//           - (I + mu A) P C^T (R + mu C P C^T)^{-1} C P (I + mu A)^T
Matrix covariance_delta(const Matrix& A, const Matrix& C, const Matrix& G, const Matrix& Q,
                        const Matrix& R, const Matrix& P, double mu);

// One delta step over graininess mu:
//   x_hat(sigma) = x_hat + mu (A x_hat + B u + K (y - C x_hat - D))
//   P(sigma)     = P + mu P^Delta, re-symmetrized.
FilterState filter_step(const StateSpaceModel& model, const FilterState& state, const Vector& y,
                        const Vector& u, double mu, const FilterOptions& options = {});

// One record per grid point, holding the filter quantities at t.
struct FilterStepRecord {
  double t = 0.0;
  std::optional<double> mu;
  std::size_t segment = 0;
  PointOrigin origin = PointOrigin::DiscretePoint;
  Vector y;
  // Gain used to leave t; empty on the final point.
  Matrix K;
  // y - C x_hat - D.
  Vector innovation;
  Vector x_hat;
  Matrix P;
  // x_true - x_hat and y - C x_true - D.
  Vector est_error;
  Vector meas_error;
};

struct FilterTrace {
  std::vector<FilterStepRecord> records;
  std::string scenario;
  std::uint64_t seed = 0;
};

FilterTrace run_filter(const StateSpaceModel& model, std::span<const GridPoint> grid,
                       const Trajectory& trajectory, const InputSignal& input,
                       const FilterOptions& options = {});

// Covariance recursion alone over a grid; measurements and noise draws do not
// enter P. Returns one P per grid point.
std::vector<Matrix> covariance_sequence(const StateSpaceModel& model,
                                        std::span<const GridPoint> grid,
                                        const FilterOptions& options = {});

}  // namespace tskf
