#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

namespace advkit {

enum class NormKind { linf, lp };

/// Norm ball the adversary perturbs inputs in: either the max-norm or an
/// lp norm with p in (1, inf), with magnitude delta >= 0.  Optional
/// componentwise weights w (all nonzero) restrict the ball to
/// ||w (x) Delta|| <= delta; the adaptive procedure uses the first-stage
/// coefficients as w.
struct PerturbationSpec {
  NormKind norm_kind{NormKind::linf};
  double p{0};  // exponent, lp only
  double delta{0};
  std::optional<Eigen::VectorXd> weights;

  static PerturbationSpec linf(double delta) {
    PerturbationSpec s;
    s.norm_kind = NormKind::linf;
    s.delta = delta;
    s.validate_scalars();
    return s;
  }

  static PerturbationSpec lp(double p, double delta) {
    PerturbationSpec s;
    s.norm_kind = NormKind::lp;
    s.p = p;
    s.delta = delta;
    s.validate_scalars();
    return s;
  }

  PerturbationSpec with_weights(const Eigen::VectorXd& w) const {
    PerturbationSpec s = *this;
    for (Eigen::Index j = 0; j < w.size(); ++j)
      if (w[j] == 0.0)
        throw std::invalid_argument("perturbation weight " +
                                    std::to_string(j) + " is zero");
    s.weights = w;
    return s;
  }

  /// Dual exponent q with 1/p + 1/q = 1 (q = 1 for linf).
  double dual_exponent() const {
    if (norm_kind == NormKind::linf) return 1.0;
    return p / (p - 1.0);
  }

  void validate_scalars() const {
    if (!(delta >= 0.0))
      throw std::invalid_argument("perturbation magnitude must satisfy delta >= 0");
    if (norm_kind == NormKind::lp && !(p > 1.0 && std::isfinite(p)))
      throw std::invalid_argument("lp perturbation requires p in (1, inf)");
  }

  void validate(Eigen::Index d) const {
    validate_scalars();
    if (weights) {
      if (weights->size() != d)
        throw std::invalid_argument("weights have length " +
                                    std::to_string(weights->size()) +
                                    ", expected " + std::to_string(d));
      for (Eigen::Index j = 0; j < d; ++j)
        if ((*weights)[j] == 0.0)
          throw std::invalid_argument("perturbation weight " +
                                      std::to_string(j) + " is zero");
    }
  }
};

/// Dual norm of beta under the spec's perturbation norm: ||beta||_1 for
/// linf, ||beta||_q for lp, applied to w^{-1} (x) beta when weighted.
/// This is the factor scaling the worst-case margin shift.
inline double dual_norm(const Eigen::VectorXd& beta,
                        const PerturbationSpec& spec) {
  spec.validate(beta.size());
  Eigen::ArrayXd v = beta.array().abs();
  if (spec.weights) v /= spec.weights->array().abs();
  if (spec.norm_kind == NormKind::linf) return v.sum();
  const double q = spec.dual_exponent();
  if (q == 2.0) return std::sqrt((v * v).sum());
  return std::pow(v.pow(q).sum(), 1.0 / q);
}

}  // namespace advkit
