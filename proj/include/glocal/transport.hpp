#pragma once

#include "glocal/local_structure.hpp"
#include "glocal/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace glocal {

enum class TransportMode { Balanced, Unbalanced };

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using DenseVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Cosine cost between flattened source positions (rows) and target positions (columns).
template <typename Scalar>
struct BasicCostMatrix {
  DenseMatrix<Scalar> values;
  Index size() const { return values.rows(); }
};

template <typename Scalar>
struct BasicTransportPlan {
  DenseMatrix<Scalar> matrix;
  DenseVector<Scalar> alpha;
  DenseVector<Scalar> beta;
  TransportMode mode = TransportMode::Balanced;
  int iterations = 0;
  /// Largest absolute deviation of row/column sums from alpha/beta.
  Scalar marginal_violation = 0;
  /// False when the iteration budget ran out before the tolerance was met.
  bool converged = false;

  Index size() const { return matrix.rows(); }
};

struct SinkhornOptions {
  double eps_reg = 0.05;
  /// Marginal relaxation strength for unbalanced mode; larger is closer to balanced.
  double tau = 10.0;
  TransportMode mode = TransportMode::Balanced;
  int max_iters = 2000;
  double tol = 1e-6;
};

/// C_ij = 1 - <s_i, o_j> / ((|s_i| + eps)(|o_j| + eps)) over the H*W positions.
template <typename Scalar = double>
BasicCostMatrix<Scalar> cost_matrix(const Tensor& source, const Tensor& target, double eps_norm = 1e-8) {
  require_chw(source, "cost_matrix");
  require_same_shape(source, target, "cost_matrix");
  if (!(eps_norm > 0.0)) throw Error("cost_matrix: eps_norm must be positive");
  const DenseMatrix<Scalar> s = source.as_matrix().template cast<Scalar>();
  const DenseMatrix<Scalar> o = target.as_matrix().template cast<Scalar>();
  const DenseVector<Scalar> s_norm = (s.colwise().norm().array() + Scalar(eps_norm)).matrix().transpose();
  const DenseVector<Scalar> o_norm = (o.colwise().norm().array() + Scalar(eps_norm)).matrix().transpose();
  DenseMatrix<Scalar> cosine = s.transpose() * o;
  cosine.array().colwise() /= s_norm.array();
  cosine.array().rowwise() /= o_norm.transpose().array();
  BasicCostMatrix<Scalar> cost{(Scalar(1) - cosine.array()).matrix()};
  cost.values = cost.values.cwiseMax(Scalar(0)).cwiseMin(Scalar(2));
  return cost;
}

namespace detail {

template <typename Scalar>
Scalar safe_log(Scalar v) {
  return v > Scalar(0) ? std::log(v) : -std::numeric_limits<Scalar>::infinity();
}

/// eps * log sum_j exp((g_j - C_ij) / eps) along rows; -inf when every term vanishes.
template <typename Scalar>
DenseVector<Scalar> soft_min_rows(const DenseMatrix<Scalar>& cost, const DenseVector<Scalar>& g, Scalar eps) {
  DenseVector<Scalar> out(cost.rows());
  for (Index i = 0; i < cost.rows(); ++i) {
    Scalar peak = -std::numeric_limits<Scalar>::infinity();
    for (Index j = 0; j < cost.cols(); ++j) peak = std::max(peak, g[j] - cost(i, j));
    if (!std::isfinite(peak)) {
      out[i] = -std::numeric_limits<Scalar>::infinity();
      continue;
    }
    Scalar acc = 0;
    for (Index j = 0; j < cost.cols(); ++j) acc += std::exp((g[j] - cost(i, j) - peak) / eps);
    out[i] = peak + eps * std::log(acc);
  }
  return out;
}

}  // namespace detail

/// Entropic optimal transport by stabilized Sinkhorn scaling.
///
/// Iterates u = a / (K v), v = b / (K^T u) on the kernel
/// K_ij = exp((f_i + g_j - C_ij) / eps). Whenever the scalings drift far from
/// one they are absorbed into the dual potentials (f, g) and K is rebuilt,
/// so the iteration is equivalent to the log-domain updates without
/// overflow at small eps. Unbalanced mode raises each scaling update to the
/// power tau / (tau + eps), the KL-relaxed marginal update.
///
/// In balanced mode with strictly positive marginals, a problem still
/// unsolved after a short run of scaling updates continues with damped
/// Newton steps on the dual potentials. Each Newton step counts as one
/// iteration.
template <typename Scalar>
BasicTransportPlan<Scalar> sinkhorn(const BasicCostMatrix<Scalar>& cost, const DenseVector<Scalar>& alpha,
                                    const DenseVector<Scalar>& beta, const SinkhornOptions& options = {}) {
  const Index n = cost.values.rows();
  const Index m = cost.values.cols();
  if (alpha.size() != n || beta.size() != m) throw Error("sinkhorn: marginal lengths do not match the cost matrix");
  if ((alpha.array() < 0).any() || (beta.array() < 0).any() || !(alpha.sum() > 0) || !(beta.sum() > 0)) {
    throw Error("sinkhorn: marginals must be nonnegative with positive mass");
  }
  if (!(options.eps_reg > 0)) throw Error("sinkhorn: eps_reg must be positive");
  if (!(options.tau > 0)) throw Error("sinkhorn: tau must be positive");
  if (options.max_iters < 0) throw Error("sinkhorn: max_iters must be nonnegative");

  const Scalar eps = Scalar(options.eps_reg);
  const bool balanced = options.mode == TransportMode::Balanced;
  const Scalar power = balanced ? Scalar(1) : Scalar(options.tau / (options.tau + options.eps_reg));
  const Scalar absorb_limit = Scalar(1e30);
  const auto& C = cost.values;

  DenseVector<Scalar> f = C.rowwise().minCoeff();
  DenseVector<Scalar> g = (C.colwise() - f).colwise().minCoeff().transpose();
  DenseVector<Scalar> u = DenseVector<Scalar>::Ones(n);
  DenseVector<Scalar> v = DenseVector<Scalar>::Ones(m);
  DenseMatrix<Scalar> K(n, m);

  auto rebuild_kernel = [&] {
    for (Index j = 0; j < m; ++j)
      for (Index i = 0; i < n; ++i) K(i, j) = std::exp((f[i] + g[j] - C(i, j)) / eps);
  };
  auto absorb = [&] {
    for (Index i = 0; i < n; ++i) f[i] += eps * detail::safe_log(u[i]);
    for (Index j = 0; j < m; ++j) g[j] += eps * detail::safe_log(v[j]);
    u.setOnes();
    v.setOnes();
    rebuild_kernel();
  };
  auto scale = [&](Scalar target, Scalar mass) -> Scalar {
    if (target == Scalar(0)) return Scalar(0);
    return balanced ? target / mass : std::pow(target / mass, power);
  };
  // Exact log-domain row/column update, used when the kernel product underflows.
  auto log_update_rows = [&] {
    absorb();
    const DenseVector<Scalar> soft = detail::soft_min_rows<Scalar>(C, g, eps);
    for (Index i = 0; i < n; ++i) {
      const Scalar la = detail::safe_log(alpha[i]);
      f[i] = std::isfinite(la) ? power * (eps * la - soft[i]) : -std::numeric_limits<Scalar>::infinity();
    }
    rebuild_kernel();
  };
  auto log_update_cols = [&] {
    absorb();
    const DenseMatrix<Scalar> Ct = C.transpose();
    const DenseVector<Scalar> soft = detail::soft_min_rows<Scalar>(Ct, f, eps);
    for (Index j = 0; j < m; ++j) {
      const Scalar lb = detail::safe_log(beta[j]);
      g[j] = std::isfinite(lb) ? power * (eps * lb - soft[j]) : -std::numeric_limits<Scalar>::infinity();
    }
    rebuild_kernel();
  };

  rebuild_kernel();
  BasicTransportPlan<Scalar> plan;
  plan.alpha = alpha;
  plan.beta = beta;
  plan.mode = options.mode;

  auto current_plan = [&] { return DenseMatrix<Scalar>(u.asDiagonal() * K * v.asDiagonal()); };
  auto violation_of = [&](const DenseMatrix<Scalar>& P) {
    const Scalar rows = (P.rowwise().sum() - alpha).cwiseAbs().maxCoeff();
    const Scalar cols = (P.colwise().sum().transpose() - beta).cwiseAbs().maxCoeff();
    return std::max(rows, cols);
  };

  constexpr int newton_after = 64;
  bool newton_tried = false;
  const bool newton_ready = balanced && (alpha.array() > 0).all() && (beta.array() > 0).all() && n + m > 2;
  // Newton iteration on (f, g) with g[m-1] held fixed; true once the tolerance is met.
  auto newton = [&](int& iter) -> bool {
    absorb();
    auto residual = [&](const DenseMatrix<Scalar>& P) {
      DenseVector<Scalar> r(n + m);
      r.head(n) = P.rowwise().sum() - alpha;
      r.tail(m) = P.colwise().sum().transpose() - beta;
      return r;
    };
    DenseVector<Scalar> r = residual(K);
    const Scalar polish = Scalar(options.tol) * Scalar(1e-3);
    auto solved = [&] { return r.cwiseAbs().maxCoeff() < Scalar(options.tol); };
    while (iter < options.max_iters) {
      if (r.cwiseAbs().maxCoeff() < polish) return true;
      ++iter;
      const Index dim = n + m - 1;
      DenseMatrix<Scalar> M = DenseMatrix<Scalar>::Zero(dim, dim);
      M.topLeftCorner(n, n).diagonal() = K.rowwise().sum();
      M.bottomRightCorner(m - 1, m - 1).diagonal() = K.colwise().sum().head(m - 1).transpose();
      M.topRightCorner(n, m - 1) = K.leftCols(m - 1);
      M.bottomLeftCorner(m - 1, n) = K.leftCols(m - 1).transpose();
      const Eigen::LDLT<DenseMatrix<Scalar>> solver(M);
      const DenseVector<Scalar> step = -eps * solver.solve(r.head(dim));
      if (solver.info() != Eigen::Success || !step.allFinite()) return solved();
      const Scalar norm = r.squaredNorm();
      Scalar t = 1;
      bool accepted = false;
      for (int halving = 0; halving < 40 && !accepted; ++halving, t /= 2) {
        DenseVector<Scalar> trial_f = f + t * step.head(n);
        DenseVector<Scalar> trial_g = g;
        trial_g.head(m - 1) += t * step.tail(m - 1);
        DenseMatrix<Scalar> P(n, m);
        for (Index j = 0; j < m; ++j)
          for (Index i = 0; i < n; ++i) P(i, j) = std::exp((trial_f[i] + trial_g[j] - C(i, j)) / eps);
        const DenseVector<Scalar> trial_r = residual(P);
        if (P.allFinite() && trial_r.squaredNorm() < (Scalar(1) - Scalar(1e-4) * t) * norm) {
          f = trial_f;
          g = trial_g;
          K = P;
          r = trial_r;
          accepted = true;
        }
      }
      if (!accepted) return solved();
    }
    return solved();
  };

  DenseVector<Scalar> previous_f = f;
  DenseVector<Scalar> previous_g = g;
  int iter = 0;
  bool converged = false;
  while (iter < options.max_iters) {
    ++iter;
    const DenseVector<Scalar> Kv = K * v;
    bool underflow = false;
    for (Index i = 0; i < n; ++i) {
      if (alpha[i] > 0 && !(Kv[i] > 0)) underflow = true;
      u[i] = scale(alpha[i], Kv[i]);
    }
    if (underflow || !u.allFinite()) {
      u.setOnes();
      log_update_rows();
    }
    const DenseVector<Scalar> Ktu = K.transpose() * u;
    underflow = false;
    for (Index j = 0; j < m; ++j) {
      if (beta[j] > 0 && !(Ktu[j] > 0)) underflow = true;
      v[j] = scale(beta[j], Ktu[j]);
    }
    if (underflow || !v.allFinite()) {
      v.setOnes();
      log_update_cols();
    }
    if (u.cwiseAbs().maxCoeff() > absorb_limit || v.cwiseAbs().maxCoeff() > absorb_limit ||
        (u.array() > 0).select(u, Scalar(1)).minCoeff() < Scalar(1) / absorb_limit ||
        (v.array() > 0).select(v, Scalar(1)).minCoeff() < Scalar(1) / absorb_limit) {
      absorb();
    }

    if (balanced) {
      // Column sums are exact after the v update; rows carry the residual.
      if (violation_of(current_plan()) < Scalar(options.tol)) {
        converged = true;
        break;
      }
      if (newton_ready && !newton_tried && iter >= newton_after) {
        newton_tried = true;
        if (newton(iter)) {
          converged = true;
          break;
        }
      }
    } else {
      DenseVector<Scalar> fu = f, gv = g;
      for (Index i = 0; i < n; ++i) fu[i] += eps * detail::safe_log(u[i]);
      for (Index j = 0; j < m; ++j) gv[j] += eps * detail::safe_log(v[j]);
      Scalar change = 0;
      for (Index i = 0; i < n; ++i)
        if (std::isfinite(fu[i]) && std::isfinite(previous_f[i])) change = std::max(change, std::abs(fu[i] - previous_f[i]));
      for (Index j = 0; j < m; ++j)
        if (std::isfinite(gv[j]) && std::isfinite(previous_g[j])) change = std::max(change, std::abs(gv[j] - previous_g[j]));
      previous_f = fu;
      previous_g = gv;
      if (iter > 1 && change < Scalar(options.tol)) {
        converged = true;
        break;
      }
    }
  }

  plan.matrix = current_plan();
  plan.iterations = iter;
  plan.marginal_violation = violation_of(plan.matrix);
  if (balanced && !converged) converged = plan.marginal_violation < Scalar(options.tol);
  plan.converged = converged;
  return plan;
}

template <typename Scalar>
DenseVector<Scalar> uniform_marginal(Index n) {
  return DenseVector<Scalar>::Constant(n, Scalar(1) / Scalar(n));
}

/// Convenience overload with uniform marginals.
template <typename Scalar>
BasicTransportPlan<Scalar> sinkhorn(const BasicCostMatrix<Scalar>& cost, const SinkhornOptions& options = {}) {
  return sinkhorn(cost, uniform_marginal<Scalar>(cost.values.rows()), uniform_marginal<Scalar>(cost.values.cols()),
                  options);
}

/// Rows scaled to sum to one; all-zero rows stay zero.
template <typename Scalar>
DenseMatrix<Scalar> row_normalized(const DenseMatrix<Scalar>& plan) {
  DenseMatrix<Scalar> out = plan;
  for (Index i = 0; i < out.rows(); ++i) {
    const Scalar s = out.row(i).sum();
    if (s > Scalar(0)) out.row(i) /= s;
  }
  return out;
}

/// Aligns modulation parameters: taps <- P * taps, bias <- P * bias, where
/// P is the row-normalized plan (or the raw plan when `row_normalize` is false).
template <typename Scalar>
ModulationField warp_modulation(const BasicTransportPlan<Scalar>& plan, const ModulationField& field,
                                bool row_normalize = true) {
  if (plan.matrix.rows() != field.positions() || plan.matrix.cols() != field.positions()) {
    throw Error("warp_modulation: plan is " + std::to_string(plan.matrix.rows()) + "x" +
                std::to_string(plan.matrix.cols()) + " but the field has " + std::to_string(field.positions()) +
                " positions");
  }
  const DenseMatrix<Scalar> P = row_normalize ? row_normalized<Scalar>(plan.matrix) : plan.matrix;
  RowMatrixXf taps = (P * field.taps.template cast<Scalar>()).template cast<float>();
  RowMatrixXf bias = (P * field.bias.template cast<Scalar>()).template cast<float>();
  return {field.height, field.width, field.channels, field.kernel, std::move(taps), std::move(bias)};
}

using CostMatrix = BasicCostMatrix<double>;
using TransportPlan = BasicTransportPlan<double>;

}  // namespace glocal
