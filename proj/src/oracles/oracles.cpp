#include "tskf/oracles.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "tskf/error.hpp"

namespace tskf::oracles {

DiscreteEquivalent DiscreteEquivalent::from_model(const StateSpaceModel& model, double c) {
  if (!(c > 0.0)) throw Error(ErrorCode::BadParameter, "constant graininess must be positive");
  DiscreteEquivalent eq;
  eq.c = c;
  eq.Phi = Matrix::Identity(model.A.rows(), model.A.cols()) + c * model.A;
  eq.Qd = c * model.G * model.Q * model.G.transpose();
  eq.Rd = model.R / c;
  return eq;
}

std::vector<DiscreteEstimate> discrete_kf_equivalent(const StateSpaceModel& model, double c,
                                                     std::size_t steps,
                                                     std::span<const Vector> measurements,
                                                     const Vector& input) {
  model.validate();
  if (measurements.size() < steps) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("{} steps need {} measurements, got {}", steps, steps,
                            measurements.size()));
  }
  const auto eq = DiscreteEquivalent::from_model(model, c);
  const Vector u = input.size() == 0 ? Vector::Zero(model.input_dim()) : input;
  const Matrix& C = model.C;

  std::vector<DiscreteEstimate> out;
  out.reserve(steps + 1);
  Vector x = model.x0_mean;
  Matrix P = model.P0;
  out.push_back({x, P});
  for (std::size_t k = 0; k < steps; ++k) {
    const Matrix S = C * P * C.transpose() + eq.Rd;
    Eigen::LLT<Matrix> llt(S);
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorCode::SingularInnovationCovariance, "C P C^T + R_d is not positive definite");
    }
    const Matrix L = eq.Phi * P * C.transpose();
    const Matrix gain = llt.solve(L.transpose()).transpose();
    x = eq.Phi * x + c * model.B * u + gain * (measurements[k] - C * x - model.D);
    P = eq.Phi * P * eq.Phi.transpose() + eq.Qd - gain * L.transpose();
    P = 0.5 * (P + P.transpose()).eval();
    out.push_back({x, P});
  }
  return out;
}

Matrix riccati_rhs(const Matrix& A, const Matrix& C, const Matrix& GQG, const Matrix& Rinv,
                   const Matrix& P) {
  const Matrix PCt = P * C.transpose();
  return A * P + P * A.transpose() + GQG - PCt * Rinv * PCt.transpose();
}

RiccatiReference::RiccatiReference(double t0, double step, std::vector<Matrix> samples,
                                   const StateSpaceModel& model)
    : t0_(t0),
      step_(step),
      samples_(std::move(samples)),
      A_(model.A),
      C_(model.C),
      GQG_(model.G * model.Q * model.G.transpose()),
      Rinv_(model.R.llt().solve(Matrix::Identity(model.R.rows(), model.R.cols()))) {}

Matrix RiccatiReference::at(double t) const {
  const double u = (t - t0_) / step_;
  const auto last = static_cast<double>(samples_.size() - 1);
  if (u < -1e-9 || u > last + 1e-9) {
    throw Error(ErrorCode::BadParameter, fmt::format("t = {} outside the reference span", t));
  }
  const double k = std::round(u);
  if (std::abs(u - k) <= 1e-9) return samples_[static_cast<std::size_t>(std::clamp(k, 0.0, last))];
  const auto i = static_cast<std::size_t>(std::floor(u));
  const double s = u - static_cast<double>(i);
  const Matrix& p0 = samples_[i];
  const Matrix& p1 = samples_[i + 1];
  const Matrix d0 = step_ * riccati_rhs(A_, C_, GQG_, Rinv_, p0);
  const Matrix d1 = step_ * riccati_rhs(A_, C_, GQG_, Rinv_, p1);
  const double s2 = s * s;
  const double s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * p0 + (s3 - 2 * s2 + s) * d0 + (-2 * s3 + 3 * s2) * p1 +
         (s3 - s2) * d1;
}

RiccatiReference riccati_ode_reference(const StateSpaceModel& model, double t0, double t1,
                                       const Matrix& P0, double ode_step) {
  model.validate();
  if (!(ode_step > 0.0) || !(t1 > t0)) {
    throw Error(ErrorCode::BadParameter, "Riccati reference needs ode_step > 0 and t1 > t0");
  }
  const auto steps = static_cast<std::size_t>(std::llround((t1 - t0) / ode_step));
  if (steps == 0 || std::abs(static_cast<double>(steps) * ode_step - (t1 - t0)) > 1e-9 * (t1 - t0)) {
    throw Error(ErrorCode::BadParameter, "ode_step must divide the span evenly");
  }
  const Matrix GQG = model.G * model.Q * model.G.transpose();
  const Matrix Rinv = model.R.llt().solve(Matrix::Identity(model.R.rows(), model.R.cols()));
  auto f = [&](const Matrix& P) { return riccati_rhs(model.A, model.C, GQG, Rinv, P); };

  std::vector<Matrix> samples;
  samples.reserve(steps + 1);
  Matrix P = P0;
  samples.push_back(P);
  const double h = ode_step;
  for (std::size_t k = 0; k < steps; ++k) {
    const Matrix k1 = f(P);
    const Matrix k2 = f(P + 0.5 * h * k1);
    const Matrix k3 = f(P + 0.5 * h * k2);
    const Matrix k4 = f(P + h * k3);
    P = P + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    P = 0.5 * (P + P.transpose()).eval();
    if (!P.allFinite()) {
      throw DivergenceError(t0 + static_cast<double>(k) * h, h, "Riccati ODE overflowed");
    }
    samples.push_back(P);
  }
  return RiccatiReference(t0, ode_step, std::move(samples), model);
}

std::string divergence_criterion(const BoundOptions& options) {
  return fmt::format(
      "trace-ceiling: trace(P_k) > {:g} * trace(P0) within {} steps, or trace(P_k) strictly "
      "increasing over the final {:g}% of the horizon with relative growth > {:g}",
      options.ceiling_factor, options.horizon_steps, options.tail_fraction * 100.0,
      options.tail_min_growth);
}

CovarianceProbe probe_graininess(const StateSpaceModel& model, double c,
                                 const BoundOptions& options) {
  const auto eq = DiscreteEquivalent::from_model(model, c);
  const Matrix& C = model.C;
  Matrix P = model.P0;
  const double ceiling = options.ceiling_factor * std::max(model.P0.trace(), 1e-300);
  const auto tail_start = static_cast<std::size_t>(
      std::floor(static_cast<double>(options.horizon_steps) * (1.0 - options.tail_fraction)));

  CovarianceProbe probe;
  probe.c = c;
  double prev_trace = P.trace();
  probe.max_trace = prev_trace;
  double tail_first = 0.0;
  bool tail_increasing = true;
  for (std::size_t k = 1; k <= options.horizon_steps; ++k) {
    probe.steps = k;
    const Matrix S = C * P * C.transpose() + eq.Rd;
    Eigen::LLT<Matrix> llt(S);
    if (llt.info() != Eigen::Success) {
      probe.diverges = true;
      return probe;
    }
    const Matrix L = eq.Phi * P * C.transpose();
    P = eq.Phi * P * eq.Phi.transpose() + eq.Qd - L * llt.solve(L.transpose());
    P = 0.5 * (P + P.transpose()).eval();
    const double tr = P.trace();
    probe.final_trace = tr;
    if (std::isfinite(tr)) probe.max_trace = std::max(probe.max_trace, tr);
    if (!std::isfinite(tr) || tr > ceiling) {
      probe.diverges = true;
      return probe;
    }
    if (k == tail_start) tail_first = tr;
    if (k > tail_start && !(tr > prev_trace)) tail_increasing = false;
    prev_trace = tr;
  }
  probe.diverges = tail_increasing && prev_trace > tail_first * (1.0 + options.tail_min_growth);
  return probe;
}

bool covariance_diverges(const StateSpaceModel& model, double c, const BoundOptions& options) {
  return probe_graininess(model, c, options).diverges;
}

BoundEstimate estimate_graininess_bound(const StateSpaceModel& model, double mu_lo, double mu_hi,
                                        const BoundOptions& options) {
  model.validate();
  if (!(mu_lo > 0.0) || !(mu_hi > mu_lo)) {
    throw Error(ErrorCode::BadParameter, "graininess range must satisfy 0 < lo < hi");
  }
  if (!(options.resolution > 0.0)) throw Error(ErrorCode::BadParameter, "resolution must be > 0");
  const bool lo_div = covariance_diverges(model, mu_lo, options);
  const bool hi_div = covariance_diverges(model, mu_hi, options);
  if (lo_div || !hi_div) {
    throw Error(ErrorCode::NoSignChange,
                fmt::format("[{}, {}] does not bracket a transition (lo {}, hi {}); widen the "
                            "bracket or lower the ceiling",
                            mu_lo, mu_hi, lo_div ? "divergent" : "bounded",
                            hi_div ? "divergent" : "bounded"));
  }
  double lo = mu_lo;
  double hi = mu_hi;
  while (hi - lo > options.resolution) {
    const double mid = 0.5 * (lo + hi);
    if (covariance_diverges(model, mid, options)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return {0.5 * (lo + hi), divergence_criterion(options), lo, hi};
}

}  // namespace tskf::oracles
