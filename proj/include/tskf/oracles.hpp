#pragma once

#include <span>
#include <string>
#include <vector>

#include "tskf/linsys.hpp"

namespace tskf::oracles {

// Classical discrete system matching the time-scale filter on the lattice cZ.
struct DiscreteEquivalent {
  double c = 0.0;
  Matrix Phi;  // I + c A
  Matrix Qd;   // c G Q G^T
  Matrix Rd;   // R / c

  static DiscreteEquivalent from_model(const StateSpaceModel& model, double c);
};

struct DiscreteEstimate {
  Vector x_hat;
  Matrix P;
};

// Textbook one-step-ahead Kalman predictor
//   x_{k+1} = Phi x_k + c B u_k + Phi P_k C^T (C P_k C^T + R_d)^{-1} (y_k - C x_k - D)
//   P_{k+1} = Phi P_k Phi^T + Q_d - Phi P_k C^T (C P_k C^T + R_d)^{-1} C P_k Phi^T
// Returns steps + 1 entries, starting with (x0_mean, P0). The input is held at
// `input` for every step.
std::vector<DiscreteEstimate> discrete_kf_equivalent(const StateSpaceModel& model, double c,
                                                     std::size_t steps,
                                                     std::span<const Vector> measurements,
                                                     const Vector& input = Vector());

// Fourth-order Runge-Kutta solution of
//   P' = A P + P A^T + G Q G^T - P C^T R^{-1} C P.
class RiccatiReference {
 public:
  RiccatiReference(double t0, double step, std::vector<Matrix> samples,
                   const StateSpaceModel& model);

  double t0() const { return t0_; }
  double t1() const { return t0_ + step_ * static_cast<double>(samples_.size() - 1); }
  double step() const { return step_; }
  const std::vector<Matrix>& samples() const { return samples_; }

  // Exact sample on the integration mesh, cubic Hermite interpolation between.
  Matrix at(double t) const;

 private:
  double t0_;
  double step_;
  std::vector<Matrix> samples_;
  Matrix A_, C_, GQG_, Rinv_;
};

Matrix riccati_rhs(const Matrix& A, const Matrix& C, const Matrix& GQG, const Matrix& Rinv,
                   const Matrix& P);

RiccatiReference riccati_ode_reference(const StateSpaceModel& model, double t0, double t1,
                                       const Matrix& P0, double ode_step);

struct BoundOptions {
  std::size_t horizon_steps = 1000;
  // Divergent when trace(P) > ceiling_factor * trace(P0).
  double ceiling_factor = 1e8;
  // Divergent when trace(P) strictly increases over this trailing fraction.
  double tail_fraction = 0.1;
  // Minimum relative growth across the tail to count as growth.
  double tail_min_growth = 1e-6;
  double resolution = 0.05;
};

struct BoundEstimate {
  double mu_bar = 0.0;
  std::string criterion;
  double lo = 0.0;
  double hi = 0.0;
};

// Human-readable identifier of the divergence rule for the given options.
std::string divergence_criterion(const BoundOptions& options);

struct CovarianceProbe {
  double c = 0.0;
  // Steps actually run; fewer than the horizon when the ceiling was hit.
  std::size_t steps = 0;
  double final_trace = 0.0;
  double max_trace = 0.0;
  bool diverges = false;
};

// Runs the constant-graininess covariance recursion and applies the rule.
CovarianceProbe probe_graininess(const StateSpaceModel& model, double c,
                                 const BoundOptions& options);
bool covariance_diverges(const StateSpaceModel& model, double c, const BoundOptions& options);

// Bisects on constant graininess c over [mu_lo, mu_hi]. Throws NoSignChange
// unless the recursion is bounded at mu_lo and divergent at mu_hi.
BoundEstimate estimate_graininess_bound(const StateSpaceModel& model, double mu_lo, double mu_hi,
                                        const BoundOptions& options = {});

}  // namespace tskf::oracles
