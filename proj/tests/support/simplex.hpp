#pragma once

// Dense two-phase tableau simplex with Bland's rule, used as an independent
// oracle for small transport problems: minimize c.x subject to A x = b, x >= 0.

#include <Eigen/Dense>

#include <limits>
#include <stdexcept>
#include <vector>

namespace oeg::testing {

class TableauSimplex {
 public:
  static double minimize(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& c) {
    const Eigen::Index m = a.rows(), n = a.cols();
    TableauSimplex s;
    s.t_ = Eigen::MatrixXd::Zero(m + 1, n + m + 1);
    s.rows_ = m;
    s.cols_ = n + m;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double sign = b(i) < 0 ? -1.0 : 1.0;
      s.t_.row(i).head(n) = sign * a.row(i);
      s.t_(i, n + i) = 1.0;
      s.t_(i, n + m) = sign * b(i);
      s.basis_.push_back(n + i);
    }

    // Phase 1: drive the artificial variables to zero.
    Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(n + m);
    phase1.tail(m).setOnes();
    s.price(phase1);
    s.run(n + m);
    if (-s.t_(m, n + m) > 1e-9) throw std::runtime_error("infeasible");
    for (Eigen::Index i = 0; i < m; ++i) {
      if (s.basis_[static_cast<std::size_t>(i)] < n) continue;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (std::abs(s.t_(i, j)) > 1e-9) {
          s.pivot(i, j);
          break;
        }
      }
    }

    // Phase 2 over the original columns only.
    Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(n + m);
    phase2.head(n) = c;
    s.price(phase2);
    s.run(n);
    return -s.t_(m, n + m);
  }

 private:
  void price(const Eigen::VectorXd& cost) {
    t_.row(rows_).setZero();
    t_.row(rows_).head(cols_) = cost.transpose();
    for (Eigen::Index i = 0; i < rows_; ++i) {
      t_.row(rows_) -= cost(basis_[static_cast<std::size_t>(i)]) * t_.row(i);
    }
  }

  void pivot(Eigen::Index row, Eigen::Index col) {
    t_.row(row) /= t_(row, col);
    for (Eigen::Index i = 0; i <= rows_; ++i) {
      if (i != row && t_(i, col) != 0.0) t_.row(i) -= t_(i, col) * t_.row(row);
    }
    basis_[static_cast<std::size_t>(row)] = col;
  }

  void run(Eigen::Index allowed_cols) {
    for (int guard = 0; guard < 100000; ++guard) {
      Eigen::Index enter = -1;
      for (Eigen::Index j = 0; j < allowed_cols; ++j) {
        if (t_(rows_, j) < -1e-12) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return;
      Eigen::Index leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < rows_; ++i) {
        if (t_(i, enter) <= 1e-12) continue;
        const double ratio = t_(i, cols_) / t_(i, enter);
        if (ratio < best - 1e-15 ||
            (ratio <= best + 1e-15 && leave >= 0 && basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)])) {
          best = ratio;
          leave = i;
        }
      }
      if (leave < 0) throw std::runtime_error("unbounded");
      pivot(leave, enter);
    }
    throw std::runtime_error("simplex did not terminate");
  }

  Eigen::MatrixXd t_;
  Eigen::Index rows_ = 0, cols_ = 0;
  std::vector<Eigen::Index> basis_;
};

// Balanced transport as an LP: variables x_ij row-major, row sums = a,
// column sums = b.
inline double transport_lp(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::MatrixXd& cost) {
  const Eigen::Index s = a.size(), d = b.size();
  Eigen::MatrixXd eq = Eigen::MatrixXd::Zero(s + d, s * d);
  Eigen::VectorXd rhs(s + d), c(s * d);
  for (Eigen::Index i = 0; i < s; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      eq(i, i * d + j) = 1.0;
      eq(s + j, i * d + j) = 1.0;
      c(i * d + j) = cost(i, j);
    }
  }
  rhs << a, b;
  return TableauSimplex::minimize(eq, rhs, c);
}

}  // namespace oeg::testing
