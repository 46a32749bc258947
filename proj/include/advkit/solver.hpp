#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "advkit/adversarial.hpp"
#include "advkit/glm.hpp"
#include "advkit/perturbation.hpp"

namespace advkit {

struct SolverConfig {
  double tol{1e-8};         // KKT residual threshold
  int max_iter{100000};
  double box_radius{1e3};   // feasible set is [-R, R]^d
  double initial_step{1.0};

  void validate() const {
    if (!(tol > 0)) throw std::invalid_argument("solver tol must be > 0");
    if (max_iter < 1) throw std::invalid_argument("solver max_iter must be >= 1");
    if (!(box_radius > 0)) throw std::invalid_argument("solver box radius must be > 0");
    if (!(initial_step > 0)) throw std::invalid_argument("solver initial step must be > 0");
  }
};

/// Fit output.  Zeros in beta are bit-exact (they come from the
/// soft-threshold, never from rounding), so support is reliable for
/// variable-selection statistics.  converged implies the re-checkable
/// certificate kkt_residual <= tol.
struct FitResult {
  Eigen::VectorXd beta;
  std::vector<int> support;            // indices with beta[j] != 0
  double kkt_residual{std::numeric_limits<double>::infinity()};
  double objective{std::numeric_limits<double>::infinity()};
  int iterations{0};
  bool converged{false};
  std::vector<double> objective_trace;  // non-increasing by construction
};

inline double soft_threshold(double z, double lam) {
  if (lam < 0) throw std::invalid_argument("soft_threshold: lam must be >= 0");
  const double mag = std::abs(z) - lam;
  if (mag <= 0) return 0.0;
  return z > 0 ? mag : -mag;
}

/// Exact minimizer of c'u + u'Hu/2 + sum_j lam_j |u_j| by cyclic
/// coordinate descent.  Each single-coordinate subproblem is solved in
/// closed form by a soft-threshold, so zeros are exact; a cycle whose
/// largest coordinate move is below config.tol terminates.
inline Eigen::VectorXd solve_quadratic_l1(const Eigen::MatrixXd& H,
                                          const Eigen::VectorXd& c,
                                          const Eigen::VectorXd& lam,
                                          const SolverConfig& config = {}) {
  config.validate();
  const Eigen::Index d = H.rows();
  if (H.cols() != d || c.size() != d || lam.size() != d)
    throw std::invalid_argument("solve_quadratic_l1: dimension mismatch");
  for (Eigen::Index j = 0; j < d; ++j) {
    if (lam[j] < 0)
      throw std::invalid_argument("solve_quadratic_l1: negative penalty");
    if (H(j, j) <= 0)
      throw std::runtime_error("solve_quadratic_l1: H has a non-positive "
                               "diagonal entry; not positive definite");
  }
  Eigen::VectorXd u = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd Hu = Eigen::VectorXd::Zero(d);
  for (int cycle = 0; cycle < config.max_iter; ++cycle) {
    double max_move = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      const double old = u[j];
      const double partial = c[j] + Hu[j] - H(j, j) * old;
      const double next = soft_threshold(-partial, lam[j]) / H(j, j);
      if (next != old) {
        Hu += H.col(j) * (next - old);
        u[j] = next;
        max_move = std::max(max_move, std::abs(next - old));
      }
    }
    if (!u.allFinite() || u.lpNorm<Eigen::Infinity>() > 1e12)
      throw std::runtime_error("solve_quadratic_l1: iterates diverged; H is "
                               "likely not positive semidefinite");
    if (max_move <= config.tol) return u;
  }
  return u;
}

namespace detail {

// Per-sample quantities of the two-endpoint reformulation at beta.
struct BranchState {
  double a{0};              // delta * dual_norm(beta)
  Eigen::VectorXd f;        // margins X beta
  Eigen::ArrayXd loss_hi, loss_lo;    // L(f + a), L(f - a)
  Eigen::ArrayXd dloss_hi, dloss_lo;  // L'(f + a), L'(f - a)
};

inline BranchState branch_state(const LossFamily& family, const Dataset& data,
                                const Eigen::VectorXd& beta,
                                const PerturbationSpec& spec) {
  BranchState st;
  st.a = spec.delta * dual_norm(beta, spec);
  st.f = data.X * beta;
  const Eigen::Index n = data.n();
  st.loss_hi.resize(n);
  st.loss_lo.resize(n);
  st.dloss_hi.resize(n);
  st.dloss_lo.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    st.loss_hi[i] = loss(family, st.f[i] + st.a, data.y[i]);
    st.loss_lo[i] = loss(family, st.f[i] - st.a, data.y[i]);
    st.dloss_hi[i] = dloss(family, st.f[i] + st.a, data.y[i]);
    st.dloss_lo[i] = dloss(family, st.f[i] - st.a, data.y[i]);
  }
  return st;
}

// Inverse weight magnitudes 1/|w_j| (all ones when unweighted).
inline Eigen::ArrayXd inv_weight_mags(const PerturbationSpec& spec,
                                      Eigen::Index d) {
  if (!spec.weights) return Eigen::ArrayXd::Ones(d);
  return spec.weights->array().abs().inverse();
}

// Penalised coordinatewise residual given a smooth gradient and penalty.
inline double coord_residual(const Eigen::VectorXd& beta,
                             const Eigen::VectorXd& g, double lam,
                             const Eigen::ArrayXd& inv_w) {
  double worst = 0.0;
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    const double thr = lam * inv_w[j];
    const double dist = beta[j] != 0.0
                            ? std::abs(g[j] + thr * sign(beta[j]))
                            : std::max(0.0, std::abs(g[j]) - thr);
    worst = std::max(worst, dist);
  }
  return worst;
}

// KKT residual for the linf family of specs, honouring sample ties.  At a
// tie L(f+a) = L(f-a) the subdifferential is the convex hull of the two
// branch gradients; the residual is minimised over per-tied-sample mixing
// weights (candidates: the argmax branch and a clamped least-squares
// solve of the nonzero-coordinate stationarity equations).
inline double kkt_residual_linf(const LossFamily& family, const Dataset& data,
                                const Eigen::VectorXd& beta,
                                const PerturbationSpec& spec) {
  const Eigen::Index n = data.n();
  const Eigen::Index d = data.dim();
  const double inv_n = 1.0 / static_cast<double>(n);
  const BranchState st = branch_state(family, data, beta, spec);
  const Eigen::ArrayXd inv_w = inv_weight_mags(spec, d);

  constexpr double kTieTol = 1e-9;
  std::vector<Eigen::Index> tied;
  Eigen::VectorXd g0 = Eigen::VectorXd::Zero(d);
  double lam0 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double gap = std::abs(st.loss_hi[i] - st.loss_lo[i]);
    const double scale = 1.0 + std::abs(st.loss_hi[i]) + std::abs(st.loss_lo[i]);
    const bool same_branch = st.a == 0.0;  // branches coincide exactly
    if (!same_branch && gap <= kTieTol * scale) {
      tied.push_back(i);
      continue;
    }
    const double ds =
        st.loss_hi[i] >= st.loss_lo[i] ? st.dloss_hi[i] : st.dloss_lo[i];
    g0 += ds * inv_n * data.X.row(i).transpose();
    lam0 += spec.delta * std::abs(ds) * inv_n;
  }
  if (tied.empty()) return coord_residual(beta, g0, lam0, inv_w);

  const Eigen::Index t = static_cast<Eigen::Index>(tied.size());
  auto residual_at = [&](const Eigen::VectorXd& theta) {
    Eigen::VectorXd g = g0;
    double lam = lam0;
    for (Eigen::Index k = 0; k < t; ++k) {
      const Eigen::Index i = tied[k];
      const double th = theta[k];
      const double mix = th * st.dloss_hi[i] + (1.0 - th) * st.dloss_lo[i];
      g += mix * inv_n * data.X.row(i).transpose();
      // branch s contributes s * L'(f + s a) to the penalty weight
      lam += spec.delta * inv_n *
             (th * st.dloss_hi[i] - (1.0 - th) * st.dloss_lo[i]);
    }
    return coord_residual(beta, g, std::max(lam, 0.0), inv_w);
  };

  Eigen::VectorXd theta_argmax(t);
  for (Eigen::Index k = 0; k < t; ++k)
    theta_argmax[k] = st.loss_hi[tied[k]] >= st.loss_lo[tied[k]] ? 1.0 : 0.0;
  double best = residual_at(theta_argmax);

  std::vector<Eigen::Index> nz;
  for (Eigen::Index j = 0; j < d; ++j)
    if (beta[j] != 0.0) nz.push_back(j);
  if (!nz.empty()) {
    // stationarity on the nonzero coordinates is affine in theta; fit it
    const Eigen::Index m = static_cast<Eigen::Index>(nz.size());
    Eigen::MatrixXd E(m, t);
    Eigen::VectorXd e0(m);
    for (Eigen::Index row = 0; row < m; ++row) {
      const Eigen::Index j = nz[row];
      const double sg = sign(beta[j]) * inv_w[j];
      e0[row] = g0[j] + lam0 * sg;
      for (Eigen::Index k = 0; k < t; ++k) {
        const Eigen::Index i = tied[k];
        const double hi = st.dloss_hi[i] * (data.X(i, j) + spec.delta * sg);
        const double lo = st.dloss_lo[i] * (data.X(i, j) - spec.delta * sg);
        E(row, k) = (hi - lo) * inv_n;
        e0[row] += lo * inv_n;
      }
    }
    Eigen::VectorXd theta =
        E.completeOrthogonalDecomposition().solve(-e0);
    for (Eigen::Index k = 0; k < t; ++k)
      theta[k] = std::clamp(theta[k], 0.0, 1.0);
    best = std::min(best, residual_at(theta));
  }
  return best;
}

// Gradient of the (weighted) dual norm for lp specs at beta != 0.
inline Eigen::VectorXd lp_dual_norm_gradient(const Eigen::VectorXd& beta,
                                             const PerturbationSpec& spec) {
  const double q = spec.dual_exponent();
  const double nrm = dual_norm(beta, spec);
  const Eigen::Index d = beta.size();
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(d);
  if (nrm == 0.0) return grad;
  const Eigen::ArrayXd inv_w = inv_weight_mags(spec, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double v = std::abs(beta[j]) * inv_w[j];
    grad[j] = sign(beta[j]) * inv_w[j] *
              std::pow(v, q - 1.0) / std::pow(nrm, q - 1.0);
  }
  return grad;
}

inline double kkt_residual_lp(const LossFamily& family, const Dataset& data,
                              const Eigen::VectorXd& beta,
                              const PerturbationSpec& spec) {
  const BranchState st = branch_state(family, data, beta, spec);
  const Eigen::Index n = data.n();
  const double inv_n = 1.0 / static_cast<double>(n);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(data.dim());
  double lam = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double ds =
        st.loss_hi[i] >= st.loss_lo[i] ? st.dloss_hi[i] : st.dloss_lo[i];
    g += ds * inv_n * data.X.row(i).transpose();
    lam += spec.delta * std::abs(ds) * inv_n;
  }
  if (beta.isZero(0.0)) {
    // optimality of the origin: the scaled gradient must lie inside the
    // dual-ball of the norm subdifferential
    Eigen::ArrayXd wg = g.array();
    if (spec.weights) wg *= spec.weights->array().abs();
    const double q = spec.dual_exponent();
    const double qq = q / (q - 1.0);  // exponent dual to q, i.e. p
    const double nrm = std::pow(wg.abs().pow(qq).sum(), 1.0 / qq);
    return std::max(0.0, nrm - lam);
  }
  const Eigen::VectorXd full = g + lam * lp_dual_norm_gradient(beta, spec);
  return full.lpNorm<Eigen::Infinity>();
}

}  // namespace detail

/// Distance from zero to the subdifferential of the empirical adversarial
/// risk at beta, evaluated from scratch (usable as an independent check of
/// any fit).  Coordinates with beta_j != 0 contribute
/// |g_j + lam sign(beta_j)/|w_j||, zeros contribute the hinge
/// max(0, |g_j| - lam/|w_j|); samples sitting exactly on the two-branch
/// tie are handled through their full subdifferential.
inline double kkt_residual(const LossFamily& family, const Dataset& data,
                           const Eigen::VectorXd& beta,
                           const PerturbationSpec& spec) {
  data.validate(family);
  spec.validate(data.dim());
  if (beta.size() != data.dim())
    throw std::invalid_argument("kkt_residual: beta has wrong length");
  if (!beta.allFinite())
    throw std::invalid_argument("kkt_residual: beta has non-finite entries");
  if (spec.norm_kind == NormKind::lp && spec.delta > 0)
    return detail::kkt_residual_lp(family, data, beta, spec);
  return detail::kkt_residual_linf(family, data, beta, spec);
}

namespace detail {

// Exact minimiser of the linear-loss objective restricted to an active
// structure: residual signs fixed off the tie set T, margins pinned to
// y_i on T, zero coordinates fixed, and coordinate signs fixed.  On that
// cell the objective is an equality-constrained quadratic; its KKT system
// is solved directly.  Returns an empty vector when the structure is
// infeasible or the candidate leaves the cell.
inline Eigen::VectorXd polish_linear(const Dataset& data,
                                     const PerturbationSpec& spec,
                                     const Eigen::VectorXd& beta,
                                     const std::vector<Eigen::Index>& tie_set,
                                     const std::vector<Eigen::Index>& free_coords,
                                     double box_radius) {
  const Eigen::Index n = data.n();
  const Eigen::Index nf = static_cast<Eigen::Index>(free_coords.size());
  const Eigen::Index nt = static_cast<Eigen::Index>(tie_set.size());
  if (nf == 0) return {};
  const Eigen::ArrayXd inv_w = inv_weight_mags(spec, data.dim());

  Eigen::VectorXd signed_w(nf);  // d a / d beta_F with fixed signs
  for (Eigen::Index c = 0; c < nf; ++c) {
    const Eigen::Index j = free_coords[c];
    signed_w[c] = spec.delta * sign(beta[j]) * inv_w[j];
  }

  std::vector<char> in_tie(n, 0);
  for (Eigen::Index i : tie_set) in_tie[i] = 1;

  const Eigen::VectorXd resid = data.X * beta - data.y;
  Eigen::MatrixXd quad = Eigen::MatrixXd::Zero(nf, nf);
  Eigen::VectorXd lin = Eigen::VectorXd::Zero(nf);
  Eigen::VectorXd row(nf);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (in_tie[i]) {
      row = signed_w;  // loss reduces to a^2/2 on the tie set
      quad.noalias() += row * row.transpose();
      continue;
    }
    const double sg = sign(resid[i]);
    if (sg == 0.0) return {};  // sample belongs on the tie set
    for (Eigen::Index c = 0; c < nf; ++c)
      row[c] = sg * data.X(i, free_coords[c]) + signed_w[c];
    quad.noalias() += row * row.transpose();
    lin.noalias() += row * (-sg * data.y[i]);
  }
  quad /= static_cast<double>(n);
  lin /= static_cast<double>(n);

  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(nf + nt, nf + nt);
  kkt.topLeftCorner(nf, nf) = quad;
  Eigen::VectorXd rhs(nf + nt);
  rhs.head(nf) = -lin;
  for (Eigen::Index k = 0; k < nt; ++k) {
    for (Eigen::Index c = 0; c < nf; ++c)
      kkt(nf + k, c) = kkt(c, nf + k) = data.X(tie_set[k], free_coords[c]);
    rhs[nf + k] = data.y[tie_set[k]];
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
  if (!lu.isInvertible()) return {};
  const Eigen::VectorXd sol = lu.solve(rhs);

  Eigen::VectorXd candidate = Eigen::VectorXd::Zero(data.dim());
  for (Eigen::Index c = 0; c < nf; ++c) {
    const double v = sol[c];
    if (sign(v) != sign(beta[free_coords[c]])) return {};  // left the cell
    if (std::abs(v) > box_radius) return {};
    candidate[free_coords[c]] = v;
  }
  const Eigen::VectorXd new_resid = data.X * candidate - data.y;
  for (Eigen::Index i = 0; i < n; ++i)
    if (!in_tie[i] && sign(new_resid[i]) != sign(resid[i])) return {};
  return candidate;
}

}  // namespace detail

/// Minimises the empirical adversarial risk over the box [-R, R]^d.
///
/// linf specs (weighted or not) use a proximal scheme: at each iterate the
/// penalty weight lam = delta * mean dM/da is frozen, a gradient step is
/// taken along g = mean (dM/df) x_i with the step halved until the true
/// objective does not increase, and the coordinatewise soft-threshold
/// t lam / |w_j| plus box projection is applied.  Zeros therefore come out
/// bit-exact.  With the linear loss the optimum generically interpolates a
/// few samples; once the iteration stops moving, an active-set polish
/// solves the equality-constrained quadratic on that kink structure and is
/// accepted only when the independent KKT check certifies it.
///
/// lp specs (p < inf, delta > 0) use projected subgradient steps with
/// step initial_step/sqrt(k) and best-iterate tracking; no exact zeros are
/// expected there.
inline FitResult minimize_adv_risk(const LossFamily& family,
                                   const Dataset& data,
                                   const PerturbationSpec& spec,
                                   const SolverConfig& config = {}) {
  data.validate(family);
  spec.validate(data.dim());
  config.validate();
  const Eigen::Index n = data.n();
  const Eigen::Index d = data.dim();
  const double inv_n = 1.0 / static_cast<double>(n);
  const double R = config.box_radius;

  auto objective = [&](const Eigen::VectorXd& b) {
    return empirical_adv_risk(family, data, b, spec);
  };
  auto finish = [&](Eigen::VectorXd b, int iterations, bool converged,
                    std::vector<double> trace) {
    if (converged) {
      // separate numerical dust from genuine zeros, then re-certify
      Eigen::VectorXd snapped = b;
      bool changed = false;
      for (Eigen::Index j = 0; j < d; ++j)
        if (snapped[j] != 0.0 && std::abs(snapped[j]) <= 1e-10) {
          snapped[j] = 0.0;
          changed = true;
        }
      if (changed && kkt_residual(family, data, snapped, spec) <= config.tol)
        b = std::move(snapped);
    }
    FitResult out;
    out.beta = std::move(b);
    for (Eigen::Index j = 0; j < d; ++j)
      if (out.beta[j] != 0.0) out.support.push_back(static_cast<int>(j));
    out.kkt_residual = kkt_residual(family, data, out.beta, spec);
    out.objective = objective(out.beta);
    out.iterations = iterations;
    out.converged = converged;
    out.objective_trace = std::move(trace);
    return out;
  };

  const bool lp_route = spec.norm_kind == NormKind::lp && spec.delta > 0;
  if (lp_route) {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd best = b;
    double best_obj = objective(b);
    std::vector<double> trace{best_obj};
    for (int it = 1; it <= config.max_iter; ++it) {
      const detail::BranchState st = detail::branch_state(family, data, b, spec);
      Eigen::VectorXd g = Eigen::VectorXd::Zero(d);
      double lam = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double ds = st.loss_hi[i] >= st.loss_lo[i] ? st.dloss_hi[i]
                                                         : st.dloss_lo[i];
        g += ds * inv_n * data.X.row(i).transpose();
        lam += spec.delta * std::abs(ds) * inv_n;
      }
      g += lam * detail::lp_dual_norm_gradient(b, spec);
      const double step = config.initial_step / std::sqrt(static_cast<double>(it));
      b = (b - step * g).cwiseMax(-R).cwiseMin(R);
      const double obj = objective(b);
      if (!std::isfinite(obj))
        throw std::runtime_error("minimize_adv_risk: non-finite objective");
      if (obj < best_obj) {
        best_obj = obj;
        best = b;
      }
      trace.push_back(best_obj);
      if (it % 25 == 0 &&
          kkt_residual(family, data, best, spec) <= config.tol)
        return finish(best, it, true, std::move(trace));
    }
    const bool ok = kkt_residual(family, data, best, spec) <= config.tol;
    return finish(best, config.max_iter, ok, std::move(trace));
  }

  // linf / delta = 0 proximal route
  const Eigen::ArrayXd inv_w = detail::inv_weight_mags(spec, d);
  const bool kinked = family.kind == LossKind::linear && spec.delta > 0;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(d);
  double obj = objective(b);
  if (!std::isfinite(obj))
    throw std::runtime_error("minimize_adv_risk: non-finite initial objective");
  std::vector<double> trace{obj};
  int since_polish = 0;

  // Scans active structures (k samples pinned to their kink, m smallest
  // nonzero coordinates zeroed); returns a certified candidate if one
  // passes the independent KKT check, otherwise records the best
  // objective-improving candidate in (jump, jump_obj).
  auto try_polish = [&](Eigen::VectorXd& jump,
                        double& jump_obj) -> std::optional<Eigen::VectorXd> {
    const Eigen::VectorXd resid = data.X * b - data.y;
    std::vector<Eigen::Index> sample_order(n);
    std::iota(sample_order.begin(), sample_order.end(), Eigen::Index{0});
    std::sort(sample_order.begin(), sample_order.end(),
              [&](Eigen::Index i, Eigen::Index j) {
                return std::abs(resid[i]) < std::abs(resid[j]);
              });
    std::vector<Eigen::Index> nonzero;
    for (Eigen::Index j = 0; j < d; ++j)
      if (b[j] != 0.0) nonzero.push_back(j);
    std::sort(nonzero.begin(), nonzero.end(), [&](Eigen::Index i, Eigen::Index j) {
      return std::abs(b[i]) < std::abs(b[j]);
    });
    const int max_ties = static_cast<int>(std::min<Eigen::Index>(d + 3, n));
    const int max_drop = static_cast<int>(
        std::min<std::size_t>(3, nonzero.empty() ? 0 : nonzero.size() - 1));
    for (int m = 0; m <= max_drop; ++m) {
      std::vector<Eigen::Index> free_coords(nonzero.begin() + m, nonzero.end());
      std::sort(free_coords.begin(), free_coords.end());
      for (int k = 0; k <= max_ties; ++k) {
        std::vector<Eigen::Index> ties(sample_order.begin(),
                                       sample_order.begin() + k);
        Eigen::VectorXd cand =
            detail::polish_linear(data, spec, b, ties, free_coords, R);
        if (cand.size() == 0) continue;
        const double cand_obj = objective(cand);
        if (cand_obj > obj + 1e-15 * (1.0 + std::abs(obj))) continue;
        if (kkt_residual(family, data, cand, spec) <= config.tol)
          return cand;
        if (cand_obj < jump_obj) {
          jump_obj = cand_obj;
          jump = std::move(cand);
        }
      }
    }
    return std::nullopt;
  };

  for (int it = 0; it < config.max_iter; ++it) {
    const detail::BranchState st = detail::branch_state(family, data, b, spec);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(d);
    double lam = 0.0;
    double cheap = 0.0;
    bool any_tie = false;
    {
      for (Eigen::Index i = 0; i < n; ++i) {
        const bool hi = st.loss_hi[i] >= st.loss_lo[i];
        const double ds = hi ? st.dloss_hi[i] : st.dloss_lo[i];
        g += ds * inv_n * data.X.row(i).transpose();
        lam += spec.delta * std::abs(ds) * inv_n;
        if (st.a > 0.0 &&
            std::abs(st.loss_hi[i] - st.loss_lo[i]) <=
                1e-9 * (1.0 + std::abs(st.loss_hi[i]) + std::abs(st.loss_lo[i])))
          any_tie = true;
      }
      cheap = detail::coord_residual(b, g, lam, inv_w);
    }
    if (cheap <= config.tol)
      return finish(b, it, true, std::move(trace));
    if (any_tie && kkt_residual(family, data, b, spec) <= config.tol)
      return finish(b, it, true, std::move(trace));

    // frozen-lambda proximal step with objective backtracking
    double t = config.initial_step;
    Eigen::VectorXd next;
    double next_obj = obj;
    bool accepted = false;
    while (t > 1e-18) {
      next = b - t * g;
      for (Eigen::Index j = 0; j < d; ++j)
        next[j] = soft_threshold(next[j], t * lam * inv_w[j]);
      next = next.cwiseMax(-R).cwiseMin(R);
      next_obj = objective(next);
      if (!std::isfinite(next_obj)) {
        std::ostringstream msg;
        msg << "minimize_adv_risk: non-finite objective at iterate [";
        for (Eigen::Index j = 0; j < d; ++j) msg << (j ? "," : "") << next[j];
        msg << "]";
        throw std::runtime_error(msg.str());
      }
      if (next_obj <= obj) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    double move = accepted ? (next - b).lpNorm<Eigen::Infinity>() : 0.0;
    if (accepted) {
      b = std::move(next);
      obj = next_obj;
      trace.push_back(obj);
    }
    ++since_polish;

    const bool stuck = !accepted || move == 0.0;
    if (kinked && (stuck || (since_polish >= 50 && move < 1e-6))) {
      since_polish = 0;
      Eigen::VectorXd jump;
      double jump_obj = obj - 1e-15 * (1.0 + std::abs(obj));
      if (auto certified = try_polish(jump, jump_obj)) {
        trace.push_back(objective(*certified));
        return finish(std::move(*certified), it + 1, true, std::move(trace));
      }
      if (jump.size() != 0) {
        b = std::move(jump);
        obj = jump_obj;
        trace.push_back(obj);
        continue;
      }
      if (stuck)  // fixed point of a deterministic map; nothing will change
        return finish(b, it + 1, false, std::move(trace));
    } else if (stuck) {
      return finish(b, it + 1, false, std::move(trace));
    }
  }
  return finish(b, config.max_iter, false, std::move(trace));
}

}  // namespace advkit
