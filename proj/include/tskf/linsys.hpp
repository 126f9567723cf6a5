#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "tskf/timescale.hpp"

namespace tskf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Linear time-invariant dynamics on a time scale
//   x^Delta = A x + B u + G w,   y = C x + D + v,
// with w ~ (0, Q), v ~ (0, R) and initial belief (x0_mean, P0).
struct StateSpaceModel {
  Matrix A;
  Matrix B;
  Matrix C;
  Vector D;
  Matrix G;
  Matrix Q;
  Matrix R;
  Vector x0_mean;
  Matrix P0;

  Eigen::Index state_dim() const { return A.rows(); }
  Eigen::Index input_dim() const { return B.cols(); }
  Eigen::Index output_dim() const { return C.rows(); }
  Eigen::Index noise_dim() const { return G.cols(); }

  // Throws DimensionMismatch.
  void check_dimensions() const;
  // Q, P0 symmetric PSD; R symmetric PD. Throws NotPositiveDefinite.
  void check_covariances() const;
  void validate() const {
    check_dimensions();
    check_covariances();
  }
};

using InputSignal = std::function<Vector(double)>;

InputSignal zero_input(Eigen::Index m);
InputSignal constant_input(Vector u);

enum class NoiseScaling {
  // w drawn with covariance Q at every grid point regardless of mu.
  PerStep,
  // w drawn with covariance Q / mu so the increment mu G w has variance mu G Q G^T.
  SqrtMu,
};

enum class BoundaryMode { Free, Reflect, Clamp };

struct TruthOptions {
  NoiseScaling noise_scaling = NoiseScaling::PerStep;
  BoundaryMode boundary = BoundaryMode::Free;
  // Per-component bounds used by Reflect and Clamp; sized to the state.
  Vector lower;
  Vector upper;
  // Draw x(t0) from (x0_mean, P0) instead of setting it to x0_mean.
  bool random_init = false;
};

struct TrajectoryPoint {
  double t = 0.0;
  std::optional<double> mu;
  Vector x_true;
  // Empty on the final point.
  Vector w_drawn;
  Vector y;
  Vector v_drawn;
};

using Trajectory = std::vector<TrajectoryPoint>;

// y = C x + D + noise.
Vector measure(const StateSpaceModel& model, const Vector& x, const Vector& noise_draw);

// Steps the truth with x(sigma) = x + mu (A x + B u + G w). Noise is drawn
// from one std::mt19937_64 stream in the order: [x0 draw], then per grid
// point v (p values) followed, on non-final points, by w (q values).
Trajectory simulate_truth(const StateSpaceModel& model, std::span<const GridPoint> grid,
                          const InputSignal& input, std::uint64_t seed,
                          const TruthOptions& options = {});

// Factor L with L L^T = S for a symmetric PSD matrix S.
Matrix psd_factor(const Matrix& S);

// Maps v into [lo, hi] by mirror reflection at the bounds.
double reflect_into(double v, double lo, double hi);

}  // namespace tskf
