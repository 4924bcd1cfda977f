#ifndef CASSIFUSE_SOLVER_HPP
#define CASSIFUSE_SOLVER_HPP

// Feature fusion by linearized, momentum-blended ADMM.
//
// Solves
//   min_x  1/2 ||y - H x||^2 + lambda1 ||Psi^T x||_1 + lambda2 ||Phi x||_1
// by splitting g1 = Psi^T x, g2 = Phi x with scaled duals d1, d2. The smooth
// part of the augmented Lagrangian is
//   S(x) = 1/2 ||y - H x||^2 + rho/2 ||Psi^T x - g1 + d1||^2
//                            + rho/2 ||Phi x - g2 + d2||^2,
// whose gradient (Psi orthonormal) is
//   H^T (H x - y) + rho (x - Psi (g1 - d1)) + rho Phi^T (Phi x - g2 + d2).
//
// Operators are passed as LinearMap values. `analysis` maps features to
// coefficients (Psi^T); its adjoint is the synthesis Psi.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cassifuse/cube.hpp"
#include "cassifuse/errors.hpp"
#include "cassifuse/linear_map.hpp"
#include "cassifuse/random.hpp"

namespace cassifuse {

// sign(v) max(|v| - tau, 0), element-wise.
inline void soft_threshold_inplace(std::span<double> v, double tau) {
  if (!(tau >= 0.0)) throw domain_error("soft-threshold level must be non-negative");
  for (double& x : v) {
    const double a = std::abs(x) - tau;
    x = a > 0.0 ? std::copysign(a, x) : 0.0;
  }
}

inline std::vector<double> soft_threshold(std::span<const double> v, double tau) {
  std::vector<double> out(v.begin(), v.end());
  soft_threshold_inplace(out, tau);
  return out;
}

inline double soft_threshold(double v, double tau) {
  double x = v;
  soft_threshold_inplace(std::span<double>(&x, 1), tau);
  return x;
}

enum class AlphaSchedule {
  constant,  // alpha = alpha0 every iteration; alpha0 = 1 disables blending
  harmonic,  // alpha^(j+1) = 2 / (j + 2)
};

inline std::string to_string(AlphaSchedule s) {
  return s == AlphaSchedule::harmonic ? "harmonic" : "constant";
}

inline AlphaSchedule alpha_schedule_from_string(const std::string& s) {
  if (s == "constant") return AlphaSchedule::constant;
  if (s == "harmonic") return AlphaSchedule::harmonic;
  throw configuration_error("unknown alpha schedule '" + s + "' (constant|harmonic)");
}

// alpha^(j+1) for the harmonic schedule; alpha^(1) = 1.
inline double harmonic_alpha(std::size_t j) { return 2.0 / (static_cast<double>(j) + 2.0); }

struct FusionConfig {
  std::optional<double> lambda1;  // unset: lambda1_factor * ||H^T y||_inf
  double lambda1_factor = 1e-3;
  double lambda2 = 5e-4;
  double rho = 1.0;
  std::optional<double> beta;  // unset: estimate_step
  std::size_t max_iters = 200;
  double rel_tol = 1e-4;
  AlphaSchedule schedule = AlphaSchedule::constant;
  std::optional<double> alpha0;  // first blend weight; constant value for `constant`
  std::size_t power_iterations = 100;
  std::uint64_t power_seed = 0x5eed;
  bool record_trace = false;

  void validate() const {
    if (lambda1 && !(*lambda1 >= 0.0)) throw configuration_error("lambda1 must be >= 0");
    if (!(lambda1_factor >= 0.0)) throw configuration_error("lambda1_factor must be >= 0");
    if (!(lambda2 >= 0.0)) throw configuration_error("lambda2 must be >= 0");
    if (!(rho > 0.0)) throw configuration_error("rho must be > 0");
    if (beta && !(*beta > 0.0)) throw configuration_error("beta must be > 0");
    if (max_iters == 0) throw configuration_error("max_iters must be positive");
    if (!(rel_tol > 0.0 && rel_tol < 1.0)) throw configuration_error("rel_tol must lie in (0, 1)");
    if (alpha0 && !(*alpha0 > 0.0 && *alpha0 <= 1.0)) {
      throw configuration_error("alpha0 must lie in (0, 1]");
    }
    if (power_iterations < 50) throw configuration_error("power_iterations must be >= 50");
  }

  double alpha(std::size_t j) const {
    if (schedule == AlphaSchedule::constant) return alpha0.value_or(1.0);
    if (j == 0 && alpha0) return *alpha0;
    return harmonic_alpha(j);
  }
};

// 1/2 ||y - Hx||^2 + lambda1 ||Psi^T x||_1 + lambda2 ||Phi x||_1.
template <LinearMap HMap, LinearMap AnalysisMap, LinearMap DiffMap>
double fusion_objective(std::span<const double> x, std::span<const double> y, const HMap& h,
                        const AnalysisMap& analysis, const DiffMap& diff, double lambda1,
                        double lambda2) {
  detail::require_length(y.size(), h.rows(), "measurements");
  auto r = apply(h, x);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= y[i];
  double f = 0.5 * dot(r, r);
  if (lambda1 != 0.0) f += lambda1 * norm1(apply(analysis, x));
  if (lambda2 != 0.0) f += lambda2 * norm1(apply(diff, x));
  return f;
}

// Splitting variables of one solve.
struct FusionState {
  std::vector<double> x;      // latest iterate
  std::vector<double> x_avg;  // momentum average (returned estimate)
  std::vector<double> gamma1, gamma2;
  std::vector<double> delta1, delta2;
  std::size_t iteration = 0;
  std::vector<double> objective_history;

  template <LinearMap AnalysisMap, LinearMap DiffMap>
  static FusionState zeros(std::size_t n, const AnalysisMap& analysis, const DiffMap& diff) {
    FusionState s;
    s.x.assign(n, 0.0);
    s.x_avg.assign(n, 0.0);
    s.gamma1.assign(analysis.rows(), 0.0);
    s.delta1.assign(analysis.rows(), 0.0);
    s.gamma2.assign(diff.rows(), 0.0);
    s.delta2.assign(diff.rows(), 0.0);
    return s;
  }
};

namespace detail {

template <LinearMap HMap, LinearMap AnalysisMap, LinearMap DiffMap>
void check_fusion_dims(std::size_t n, std::span<const double> y, const HMap& h,
                       const AnalysisMap& analysis, const DiffMap& diff) {
  require_length(y.size(), h.rows(), "measurements");
  require_length(n, h.cols(), "features vs projection");
  require_length(analysis.cols(), n, "sparsifying transform");
  require_length(diff.cols(), n, "difference operator");
}

}  // namespace detail

// Value of the smooth surrogate S(x) for fixed splitting variables.
template <LinearMap HMap, LinearMap AnalysisMap, LinearMap DiffMap>
double smooth_surrogate(std::span<const double> x, std::span<const double> y, const HMap& h,
                        const AnalysisMap& analysis, const DiffMap& diff, const FusionState& s,
                        double rho) {
  detail::check_fusion_dims(x.size(), y, h, analysis, diff);
  auto r = apply(h, x);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= y[i];
  auto c1 = apply(analysis, x);
  for (std::size_t i = 0; i < c1.size(); ++i) c1[i] += s.delta1[i] - s.gamma1[i];
  auto c2 = apply(diff, x);
  for (std::size_t i = 0; i < c2.size(); ++i) c2[i] += s.delta2[i] - s.gamma2[i];
  return 0.5 * dot(r, r) + 0.5 * rho * (dot(c1, c1) + dot(c2, c2));
}

// Gradient of S at x.
template <LinearMap HMap, LinearMap AnalysisMap, LinearMap DiffMap>
std::vector<double> smooth_gradient(std::span<const double> x, std::span<const double> y,
                                    const HMap& h, const AnalysisMap& analysis,
                                    const DiffMap& diff, const FusionState& s, double rho) {
  detail::check_fusion_dims(x.size(), y, h, analysis, diff);
  auto r = apply(h, x);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= y[i];
  auto g = apply_adjoint(h, r);

  std::vector<double> w(s.gamma1.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = s.gamma1[i] - s.delta1[i];
  const auto synth = apply_adjoint(analysis, w);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += rho * (x[i] - synth[i]);

  auto u = apply(diff, x);
  for (std::size_t i = 0; i < u.size(); ++i) u[i] += s.delta2[i] - s.gamma2[i];
  const auto back = apply_adjoint(diff, u);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += rho * back[i];
  return g;
}

// x - (1/beta) grad S(x): the minimizer of the linearized surrogate with
// proximal weight beta.
template <LinearMap HMap, LinearMap AnalysisMap, LinearMap DiffMap>
std::vector<double> gradient_step(std::span<const double> x, std::span<const double> y,
                                  const HMap& h, const AnalysisMap& analysis, const DiffMap& diff,
                                  const FusionState& s, double rho, double beta) {
  if (!(beta > 0.0)) throw domain_error("step parameter beta must be positive");
  auto g = smooth_gradient(x, y, h, analysis, diff, s, rho);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - g[i] / beta;
  return out;
}

// 1.05 times the largest eigenvalue of H^T H + rho I + rho Phi^T Phi, by power
// iteration from a seeded random start.
template <LinearMap HMap, LinearMap DiffMap>
double estimate_step(const HMap& h, const DiffMap& diff, double rho, std::size_t iterations = 100,
                     std::uint64_t seed = 0x5eed) {
  const std::size_t n = h.cols();
  detail::require_length(diff.cols(), n, "difference operator");
  Rng rng(seed);
  std::vector<double> v(n), w(n), hv(h.rows()), hw(n), dv(diff.rows()), dw(n);
  for (double& e : v) e = rng.normal();
  double nv = norm2(v);
  for (double& e : v) e /= nv;
  double lambda = 0.0;
  for (std::size_t it = 0; it < std::max<std::size_t>(iterations, 1); ++it) {
    h.apply(v, hv);
    h.apply_adjoint(hv, hw);
    diff.apply(v, dv);
    diff.apply_adjoint(dv, dw);
    for (std::size_t i = 0; i < n; ++i) w[i] = hw[i] + rho * v[i] + rho * dw[i];
    lambda = dot(v, w);
    const double nw = norm2(w);
    if (!(nw > 0.0)) break;
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / nw;
  }
  return lambda > 0.0 ? 1.05 * lambda : 1.0;
}

struct FusionReport {
  std::size_t iterations = 0;
  bool converged = false;  // rel_tol reached before max_iters
  double final_objective = 0.0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double rho = 0.0;
  double beta = 0.0;
  double last_relative_change = 0.0;
  double data_residual = 0.0;      // ||y - H x||
  double sparsity_residual = 0.0;  // ||Psi^T x - g1||
  double tv_residual = 0.0;        // ||Phi x - g2||
  std::vector<double> objective_trace;  // per iteration, when requested
};

struct FusionResult {
  std::vector<double> x;
  FusionState state;
  FusionReport report;
};

template <LinearMap HMap, LinearMap AnalysisMap, LinearMap DiffMap>
FusionResult fuse(std::span<const double> y, const HMap& h, const AnalysisMap& analysis,
                  const DiffMap& diff, const FusionConfig& config) {
  config.validate();
  const std::size_t n = h.cols();
  detail::check_fusion_dims(n, y, h, analysis, diff);

  FusionReport rep;
  rep.rho = config.rho;
  rep.lambda2 = config.lambda2;
  rep.lambda1 = config.lambda1 ? *config.lambda1
                               : config.lambda1_factor * norm_inf(apply_adjoint(h, y));
  rep.beta = config.beta ? *config.beta
                         : estimate_step(h, diff, config.rho, config.power_iterations,
                                         config.power_seed);
  const double rho = config.rho, beta = rep.beta;
  const double tau1 = rep.lambda1 / rho, tau2 = rep.lambda2 / rho;

  FusionState s = FusionState::zeros(n, analysis, diff);
  std::vector<double> md(n), r(h.rows()), g(n), w1(analysis.rows()), synth(n), u(diff.rows()),
      back(n), x_new(n), avg_new(n), c1(analysis.rows()), c2(diff.rows());

  for (std::size_t j = 0; j < config.max_iters; ++j) {
    const double a = config.alpha(j);

    for (std::size_t i = 0; i < n; ++i) md[i] = (1.0 - a) * s.x_avg[i] + a * s.x[i];

    // Linearized x-update at the blended point.
    h.apply(md, r);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= y[i];
    h.apply_adjoint(r, g);
    for (std::size_t i = 0; i < w1.size(); ++i) w1[i] = s.gamma1[i] - s.delta1[i];
    analysis.apply_adjoint(w1, synth);
    diff.apply(md, u);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] += s.delta2[i] - s.gamma2[i];
    diff.apply_adjoint(u, back);
    for (std::size_t i = 0; i < n; ++i) {
      const double grad = g[i] + rho * (md[i] - synth[i]) + rho * back[i];
      x_new[i] = md[i] - grad / beta;
      avg_new[i] = (1.0 - a) * s.x_avg[i] + a * x_new[i];
    }

    // Proximal steps, their blends, then dual ascent.
    analysis.apply(x_new, c1);
    diff.apply(x_new, c2);
    for (std::size_t i = 0; i < c1.size(); ++i) {
      const double fresh = soft_threshold(c1[i] + s.delta1[i], tau1);
      s.gamma1[i] = (1.0 - a) * s.gamma1[i] + a * fresh;
      s.delta1[i] += c1[i] - s.gamma1[i];
    }
    for (std::size_t i = 0; i < c2.size(); ++i) {
      const double fresh = soft_threshold(c2[i] + s.delta2[i], tau2);
      s.gamma2[i] = (1.0 - a) * s.gamma2[i] + a * fresh;
      s.delta2[i] += c2[i] - s.gamma2[i];
    }

    double diff_sq = 0.0, avg_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = avg_new[i] - s.x_avg[i];
      diff_sq += d * d;
      avg_sq += avg_new[i] * avg_new[i];
    }
    if (!std::isfinite(diff_sq) || !std::isfinite(avg_sq)) {
      throw divergence_error("fusion iterate became non-finite at iteration " +
                                 std::to_string(j + 1) + " (beta=" + std::to_string(beta) + ")",
                             j + 1);
    }
    s.x.swap(x_new);
    s.x_avg.swap(avg_new);
    s.iteration = j + 1;
    rep.last_relative_change =
        avg_sq > 0.0 ? std::sqrt(diff_sq / avg_sq) : (diff_sq > 0.0 ? 1.0 : 0.0);

    if (config.record_trace) {
      s.objective_history.push_back(
          fusion_objective(s.x_avg, y, h, analysis, diff, rep.lambda1, rep.lambda2));
    }
    if (j > 0 && rep.last_relative_change < config.rel_tol) {
      rep.converged = true;
      break;
    }
  }

  rep.iterations = s.iteration;
  rep.final_objective = fusion_objective(s.x_avg, y, h, analysis, diff, rep.lambda1, rep.lambda2);
  h.apply(s.x_avg, r);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = y[i] - r[i];
  rep.data_residual = norm2(r);
  analysis.apply(s.x_avg, c1);
  for (std::size_t i = 0; i < c1.size(); ++i) c1[i] -= s.gamma1[i];
  rep.sparsity_residual = norm2(c1);
  diff.apply(s.x_avg, c2);
  for (std::size_t i = 0; i < c2.size(); ++i) c2[i] -= s.gamma2[i];
  rep.tv_residual = norm2(c2);
  rep.objective_trace = s.objective_history;

  FusionResult out;
  out.x = s.x_avg;
  out.report = std::move(rep);
  out.state = std::move(s);
  return out;
}

}  // namespace cassifuse

#endif  // CASSIFUSE_SOLVER_HPP
