#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hysid/error.hpp"

namespace hysid {

inline constexpr double kRankTolerance = 1e-10;
inline constexpr double kDependenceTolerance = 1e-9;

// What stlsq does when the active columns are linearly dependent.
enum class RankPolicy {
  Prune,       // drop columns that lie in the span of earlier ones (library order)
  RidgeRetry,  // retry the solve with ridge 1e-8 and record a warning
  Strict,      // report RankDeficient
};

struct StlsqConfig {
  double lambda = 0.05;
  int max_iterations = 25;
  double ridge = 0.0;
  RankPolicy rank_policy = RankPolicy::Prune;
};

struct StlsqResult {
  Eigen::MatrixXd coefficients;                 // columns x targets
  std::vector<std::vector<bool>> active;        // per target
  std::vector<int> iterations;                  // per target
  std::vector<std::vector<int>> support_sizes;  // active count after each iteration, per target
  std::vector<std::string> warnings;
};

// Minimizes ||theta * X - target|| per target column via Householder QR.
// Ridge adds sqrt(ridge)*I rows under theta.
inline Eigen::MatrixXd least_squares(const Eigen::MatrixXd& theta, const Eigen::MatrixXd& target, double ridge = 0.0) {
  require(theta.rows() == target.rows(), "least_squares: row counts differ");
  require(ridge >= 0.0, "least_squares: ridge must be >= 0");
  const Eigen::Index p = theta.cols();
  if (p == 0) return Eigen::MatrixXd(0, target.cols());
  if (ridge > 0.0) {
    Eigen::MatrixXd a(theta.rows() + p, p);
    a << theta, std::sqrt(ridge) * Eigen::MatrixXd::Identity(p, p);
    Eigen::MatrixXd b(theta.rows() + p, target.cols());
    b << target, Eigen::MatrixXd::Zero(p, target.cols());
    return a.householderQr().solve(b);
  }
  require(theta.rows() >= p, "least_squares: fewer rows than columns");
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(theta);
  // singular values of R equal those of theta
  Eigen::MatrixXd r = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(r);
  const auto& sv = svd.singularValues();
  if (sv.size() > 0 && !(sv(sv.size() - 1) >= kRankTolerance * sv(0)))
    throw Error(ErrorKind::RankDeficient, "smallest singular value " + std::to_string(sv(sv.size() - 1)) +
                                              " below tolerance (largest " + std::to_string(sv(0)) + ")");
  return qr.solve(target);
}

// Greedy Gram-Schmidt in the given order: keeps a column when its residual
// against the kept ones exceeds tol times its norm.
inline std::vector<int> independent_columns(const Eigen::MatrixXd& theta, const std::vector<int>& cols,
                                            double tol = kDependenceTolerance) {
  std::vector<int> keep;
  std::vector<Eigen::VectorXd> basis;
  for (int c : cols) {
    Eigen::VectorXd v = theta.col(c);
    const double nv = v.norm();
    if (nv == 0.0) continue;
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : basis) v -= q.dot(v) * q;
    const double nr = v.norm();
    if (nr > tol * nv) {
      basis.push_back(v / nr);
      keep.push_back(c);
    }
  }
  return keep;
}

namespace detail {

inline Eigen::MatrixXd columns(const Eigen::MatrixXd& m, const std::vector<int>& cols) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = m.col(cols[i]);
  return out;
}

}  // namespace detail

// Sequentially thresholded least squares, one independent sparse equation
// per target column.
inline StlsqResult stlsq(const Eigen::MatrixXd& theta, const Eigen::MatrixXd& target, const StlsqConfig& cfg) {
  require(cfg.lambda >= 0.0, "stlsq: lambda must be >= 0");
  require(cfg.max_iterations >= 1, "stlsq: max_iterations must be >= 1");
  require(theta.rows() == target.rows(), "stlsq: row counts differ");
  const int p = static_cast<int>(theta.cols());
  StlsqResult res;
  res.coefficients = Eigen::MatrixXd::Zero(p, target.cols());
  for (Eigen::Index t = 0; t < target.cols(); ++t) {
    std::vector<int> active(static_cast<std::size_t>(p));
    for (int j = 0; j < p; ++j) active[static_cast<std::size_t>(j)] = j;
    Eigen::VectorXd y = target.col(t);
    Eigen::VectorXd xi = Eigen::VectorXd::Zero(p);
    std::vector<int> sizes;
    int it = 0;
    while (it < cfg.max_iterations) {
      ++it;
      std::vector<int> cols = active;
      if (cfg.rank_policy == RankPolicy::Prune) cols = independent_columns(theta, active);
      Eigen::MatrixXd sub = detail::columns(theta, cols);
      Eigen::VectorXd sol;
      try {
        sol = least_squares(sub, y, cfg.ridge);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::RankDeficient || cfg.rank_policy != RankPolicy::RidgeRetry) throw;
        res.warnings.push_back("target " + std::to_string(t) + ": rank deficient, retried with ridge 1e-8");
        sol = least_squares(sub, y, 1e-8);
      }
      xi.setZero();
      std::vector<int> next;
      for (std::size_t i = 0; i < cols.size(); ++i) {
        const double v = sol(static_cast<Eigen::Index>(i));
        if (std::abs(v) >= cfg.lambda) {
          xi(cols[i]) = v;
          next.push_back(cols[i]);
        }
      }
      sizes.push_back(static_cast<int>(next.size()));
      if (next.empty()) {
        Error e(ErrorKind::AllTermsEliminated,
                "every coefficient of target " + std::to_string(t) + " fell below lambda; lower lambda");
        e.col = t;
        throw e;
      }
      const bool stable = next == active;
      active = std::move(next);
      if (stable) break;
    }
    res.coefficients.col(t) = xi;
    std::vector<bool> mask(static_cast<std::size_t>(p), false);
    for (int j : active) mask[static_cast<std::size_t>(j)] = true;
    res.active.push_back(std::move(mask));
    res.iterations.push_back(it);
    res.support_sizes.push_back(std::move(sizes));
  }
  return res;
}

}  // namespace hysid
