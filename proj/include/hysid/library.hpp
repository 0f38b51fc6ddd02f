#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hysid/embedding.hpp"
#include "hysid/error.hpp"

namespace hysid {

enum class BasisKind { Constant, Monomial, Hysteron, Cross };

struct BasisDescriptor {
  BasisKind kind = BasisKind::Constant;
  std::vector<int> exponents;  // per signal column; empty for a bare hysteron
  int hysteron = -1;           // column of the updated block: 2j plain, 2j+1 complement
  std::string name;

  int degree() const {
    int d = 0;
    for (int e : exponents) d += e;
    return d;
  }
  bool operator==(const BasisDescriptor& o) const {
    return kind == o.kind && exponents == o.exponents && hysteron == o.hysteron;
  }
};

namespace detail {

inline void monomials_of_degree(std::size_t n, int d, std::size_t start, std::vector<int>& cur,
                                std::vector<std::vector<int>>& out) {
  if (d == 0) {
    out.push_back(cur);
    return;
  }
  for (std::size_t i = start; i < n; ++i) {
    ++cur[i];
    monomials_of_degree(n, d - 1, i, cur, out);
    --cur[i];
  }
}

}  // namespace detail

// Exponent vectors in graded lexicographic order: 1, x1, x2, ..., x1^2, x1*x2, ...
inline std::vector<std::vector<int>> enumerate_monomials(std::size_t n, int max_degree) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(n, 0);
  for (int d = 0; d <= max_degree; ++d) detail::monomials_of_degree(n, d, 0, cur, out);
  return out;
}

inline std::string monomial_name(const std::vector<int>& exps, const std::vector<std::string>& names) {
  std::string s;
  for (std::size_t i = 0; i < exps.size(); ++i) {
    if (exps[i] == 0) continue;
    if (!s.empty()) s += '*';
    s += names[i];
    if (exps[i] > 1) s += '^' + std::to_string(exps[i]);
  }
  return s.empty() ? "1" : s;
}

inline std::string basis_name(const BasisDescriptor& d, const std::vector<std::string>& signal_names) {
  const std::string h = d.hysteron >= 0 ? hysteron_name(static_cast<std::size_t>(d.hysteron / 2), d.hysteron % 2) : "";
  switch (d.kind) {
    case BasisKind::Constant: return "1";
    case BasisKind::Monomial: return monomial_name(d.exponents, signal_names);
    case BasisKind::Hysteron: return h;
    case BasisKind::Cross: return monomial_name(d.exponents, signal_names) + "*" + h;
  }
  return "?";
}

inline std::vector<std::string> generic_signal_names(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("x" + std::to_string(i + 1));
  return out;
}

// Three parts: polynomials without hysterons; each of those times each
// updated hysteron column; the bare hysteron columns. With dedup, constant
// times H is dropped in favour of the bare H of part three.
inline std::vector<BasisDescriptor> enumerate_basis(std::size_t n_state_cols, std::size_t n_hysterons, int max_degree,
                                                    bool dedup = true) {
  require(max_degree >= 0, "max_degree must be >= 0");
  const auto mons = enumerate_monomials(n_state_cols, max_degree);
  const auto names = generic_signal_names(n_state_cols);
  const int hcols = static_cast<int>(2 * n_hysterons);
  std::vector<BasisDescriptor> out;
  for (const auto& e : mons) {
    BasisDescriptor d;
    d.kind = mons.front() == e ? BasisKind::Constant : BasisKind::Monomial;
    d.exponents = e;
    out.push_back(d);
  }
  for (const auto& e : mons) {
    const bool constant = mons.front() == e;
    if (constant && dedup) continue;
    for (int h = 0; h < hcols; ++h) {
      BasisDescriptor d;
      d.kind = BasisKind::Cross;
      d.exponents = e;
      d.hysteron = h;
      out.push_back(d);
    }
  }
  for (int h = 0; h < hcols; ++h) {
    BasisDescriptor d;
    d.kind = BasisKind::Hysteron;
    d.hysteron = h;
    out.push_back(d);
  }
  for (auto& d : out) d.name = basis_name(d, names);
  return out;
}

inline std::size_t binomial(std::size_t n, std::size_t k) {
  std::size_t r = 1;
  for (std::size_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

inline std::size_t count_columns(std::size_t n_state_cols, std::size_t n_hysterons, int max_degree, bool dedup = true) {
  require(max_degree >= 0, "max_degree must be >= 0");
  const std::size_t p = binomial(n_state_cols + static_cast<std::size_t>(max_degree), static_cast<std::size_t>(max_degree));
  const std::size_t h = 2 * n_hysterons;
  return p + p * h + h - (dedup ? h : 0);
}

struct BasisLibrary {
  std::vector<BasisDescriptor> descriptors;
  Eigen::MatrixXd matrix;
};

inline double eval_monomial(const std::vector<int>& exps, const double* x) {
  double v = 1.0;
  for (std::size_t i = 0; i < exps.size(); ++i)
    for (int p = 0; p < exps[i]; ++p) v *= x[i];
  return v;
}

inline double eval_descriptor(const BasisDescriptor& d, const double* x, const double* h) {
  switch (d.kind) {
    case BasisKind::Constant: return 1.0;
    case BasisKind::Monomial: return eval_monomial(d.exponents, x);
    case BasisKind::Hysteron: return h[d.hysteron];
    case BasisKind::Cross: return eval_monomial(d.exponents, x) * h[d.hysteron];
  }
  return 0.0;
}

// signals: rows x n_state_cols; updated: rows x 2m (H(k), Hbar(k) interleaved).
inline BasisLibrary evaluate(const std::vector<BasisDescriptor>& descriptors, const Eigen::MatrixXd& signals,
                             const Eigen::MatrixXd& updated) {
  require(signals.rows() == updated.rows() || updated.cols() == 0, "hysteron rows must align with state rows");
  const Eigen::Index rows = signals.rows();
  for (const auto& d : descriptors) {
    require(d.exponents.empty() || static_cast<Eigen::Index>(d.exponents.size()) == signals.cols(),
            "descriptor '" + d.name + "' does not match state columns");
    require(d.hysteron < updated.cols(), "descriptor '" + d.name + "' references a missing hysteron");
  }
  BasisLibrary lib{descriptors, Eigen::MatrixXd(rows, static_cast<Eigen::Index>(descriptors.size()))};
  std::vector<double> x(static_cast<std::size_t>(signals.cols())), h(static_cast<std::size_t>(updated.cols()));
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < signals.cols(); ++c) x[static_cast<std::size_t>(c)] = signals(r, c);
    for (Eigen::Index c = 0; c < updated.cols(); ++c) h[static_cast<std::size_t>(c)] = updated(r, c);
    for (std::size_t j = 0; j < descriptors.size(); ++j) {
      const double v = eval_descriptor(descriptors[j], x.data(), h.data());
      if (!std::isfinite(v)) {
        Error e(ErrorKind::NonFiniteValue, "library entry not finite at row " + std::to_string(r) + ", column '" +
                                               descriptors[j].name + "'");
        e.row = r;
        e.col = static_cast<std::ptrdiff_t>(j);
        throw e;
      }
      lib.matrix(r, static_cast<Eigen::Index>(j)) = v;
    }
  }
  return lib;
}

}  // namespace hysid
