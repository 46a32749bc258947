#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>

namespace advkit {

enum class LossKind { linear, logistic };

/// Loss family of the generalized linear model.  Linear regression uses
/// the half squared error (f - y)^2 / 2 with real y; logistic regression
/// uses log(1 + exp(-y f)) with labels y in {-1, +1}.  Both losses are
/// convex and twice differentiable in the margin f.
struct LossFamily {
  LossKind kind{LossKind::linear};

  static LossFamily linear() { return {LossKind::linear}; }
  static LossFamily logistic() { return {LossKind::logistic}; }

  const char* name() const {
    return kind == LossKind::linear ? "linear" : "logistic";
  }
};

/// sign with sign(0) = 0.
inline double sign(double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }

namespace detail {

inline void check_label(const LossFamily& family, double y) {
  if (family.kind == LossKind::logistic && y != 1.0 && y != -1.0)
    throw std::invalid_argument("logistic labels must be -1 or +1, got " +
                                std::to_string(y));
}

// log(1 + exp(z)) without overflow.
inline double log1pexp(double z) {
  if (z > 0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

}  // namespace detail

/// Inner product <x, beta>; the linear predictor.
inline double margin(const Eigen::VectorXd& x, const Eigen::VectorXd& beta) {
  if (x.size() != beta.size())
    throw std::invalid_argument("margin: x has length " +
                                std::to_string(x.size()) + ", beta " +
                                std::to_string(beta.size()));
  return x.dot(beta);
}

/// L(f, y).
inline double loss(const LossFamily& family, double f, double y) {
  detail::check_label(family, y);
  if (family.kind == LossKind::linear) {
    const double r = f - y;
    return 0.5 * r * r;
  }
  return detail::log1pexp(-y * f);
}

/// First derivative of L in the margin.
inline double dloss(const LossFamily& family, double f, double y) {
  detail::check_label(family, y);
  if (family.kind == LossKind::linear) return f - y;
  // -y / (1 + exp(y f)), evaluated on the non-overflowing side
  const double z = y * f;
  if (z > 0) {
    const double e = std::exp(-z);
    return -y * e / (1.0 + e);
  }
  return -y / (1.0 + std::exp(z));
}

/// Second derivative of L in the margin.  Linear: 1.  Logistic:
/// exp(yf) / (1 + exp(yf))^2, which lies in (0, 1/4].
inline double d2loss(const LossFamily& family, double f, double y) {
  detail::check_label(family, y);
  if (family.kind == LossKind::linear) return 1.0;
  const double e = std::exp(-std::abs(y * f));  // symmetric in the sign
  const double denom = 1.0 + e;
  return e / (denom * denom);
}

/// Dataset of n rows of d covariates plus responses.  Rows are kept in
/// the order they were ingested or generated; "the first n samples"
/// always means a row prefix.
struct Dataset {
  Eigen::MatrixXd X;  // n x d
  Eigen::VectorXd y;  // n

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index dim() const { return X.cols(); }

  Dataset prefix(Eigen::Index rows) const {
    if (rows < 1 || rows > n())
      throw std::invalid_argument("Dataset::prefix: invalid row count " +
                                  std::to_string(rows));
    return {X.topRows(rows), y.head(rows)};
  }

  void validate(const LossFamily& family) const {
    if (X.rows() < 1 || X.cols() < 1)
      throw std::invalid_argument("dataset must have n >= 1 and d >= 1");
    if (y.size() != X.rows())
      throw std::invalid_argument("dataset has " + std::to_string(X.rows()) +
                                  " rows but " + std::to_string(y.size()) +
                                  " responses");
    if (!X.allFinite() || !y.allFinite())
      throw std::invalid_argument("dataset contains non-finite entries");
    if (family.kind == LossKind::logistic)
      for (Eigen::Index i = 0; i < y.size(); ++i)
        detail::check_label(family, y[i]);
  }
};

}  // namespace advkit
