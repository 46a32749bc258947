#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "advkit/glm.hpp"
#include "advkit/perturbation.hpp"
#include "advkit/rng.hpp"

namespace advkit {

/// Exact worst-case loss over the perturbation ball.  For losses convex in
/// the margin the inner maximum is attained at one of the two margin
/// endpoints f +- delta ||beta||_*, so the sup reduces to a two-point max.
inline double worst_case_loss(const LossFamily& family,
                              const Eigen::VectorXd& x, double y,
                              const Eigen::VectorXd& beta,
                              const PerturbationSpec& spec) {
  const double f = margin(x, beta);
  const double a = spec.delta * dual_norm(beta, spec);
  return std::max(loss(family, f + a, y), loss(family, f - a, y));
}

/// Brute-force check of worst_case_loss: evaluates both margin endpoints
/// plus n_samples random feasible perturbations.  The perturbation enters
/// the loss only through <Delta, beta>, which ranges over
/// [-delta ||beta||_*, +delta ||beta||_*], so no feasible point can beat
/// the endpoints; sampling guards the reduction itself.
inline double oracle_worst_case(const LossFamily& family,
                                const Eigen::VectorXd& x, double y,
                                const Eigen::VectorXd& beta,
                                const PerturbationSpec& spec, int n_samples,
                                std::uint64_t seed) {
  if (n_samples < 0)
    throw std::invalid_argument("oracle_worst_case: n_samples must be >= 0");
  spec.validate(x.size());
  const double f = margin(x, beta);
  const double a = spec.delta * dual_norm(beta, spec);
  double best = std::max(loss(family, f + a, y), loss(family, f - a, y));

  Rng rng(seed);
  const Eigen::Index d = x.size();
  Eigen::VectorXd delta_vec(d);
  for (int s = 0; s < n_samples; ++s) {
    if (spec.norm_kind == NormKind::linf) {
      for (Eigen::Index j = 0; j < d; ++j)
        delta_vec[j] = rng.next_uniform(-spec.delta, spec.delta);
    } else {
      // direction-radius draw; feasibility is all that matters here
      for (Eigen::Index j = 0; j < d; ++j) delta_vec[j] = rng.next_normal();
      double norm_p = std::pow(delta_vec.array().abs().pow(spec.p).sum(),
                               1.0 / spec.p);
      if (norm_p == 0.0) norm_p = 1.0;
      const double radius =
          std::pow(rng.next_double(), 1.0 / static_cast<double>(d));
      delta_vec *= spec.delta * radius / norm_p;
    }
    if (spec.weights)
      delta_vec.array() /= spec.weights->array();  // ||w (x) Delta|| <= delta
    best = std::max(best, loss(family, f + delta_vec.dot(beta), y));
  }
  return best;
}

/// Mean worst-case loss over the dataset; the objective the adversarial
/// training estimator minimizes.
inline double empirical_adv_risk(const LossFamily& family, const Dataset& data,
                                 const Eigen::VectorXd& beta,
                                 const PerturbationSpec& spec) {
  data.validate(family);
  spec.validate(data.dim());
  const double a = spec.delta * dual_norm(beta, spec);
  const Eigen::VectorXd f = data.X * beta;
  double total = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i)
    total += std::max(loss(family, f[i] + a, data.y[i]),
                      loss(family, f[i] - a, data.y[i]));
  return total / static_cast<double>(data.n());
}

/// First or second order expansion of the empirical adversarial risk in
/// delta around 0:
///   order 1:  mean L + delta ||beta||_{q,w} mean |L'|
///   order 2:  order 1 + delta^2/2 ||beta||_{q,w}^2 mean L''
/// where ||beta||_{q,w} is the (weighted) dual norm.
inline double expansion(const LossFamily& family, const Dataset& data,
                        const Eigen::VectorXd& beta,
                        const PerturbationSpec& spec, int order) {
  if (order != 1 && order != 2)
    throw std::invalid_argument("expansion: order must be 1 or 2");
  data.validate(family);
  spec.validate(data.dim());
  const double nrm = dual_norm(beta, spec);
  const Eigen::VectorXd f = data.X * beta;
  double mean_loss = 0.0, mean_abs_dloss = 0.0, mean_d2loss = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    mean_loss += loss(family, f[i], data.y[i]);
    mean_abs_dloss += std::abs(dloss(family, f[i], data.y[i]));
    if (order == 2) mean_d2loss += d2loss(family, f[i], data.y[i]);
  }
  const double n = static_cast<double>(data.n());
  mean_loss /= n;
  mean_abs_dloss /= n;
  double value = mean_loss + spec.delta * nrm * mean_abs_dloss;
  if (order == 2)
    value += 0.5 * spec.delta * spec.delta * nrm * nrm * (mean_d2loss / n);
  return value;
}

}  // namespace advkit
