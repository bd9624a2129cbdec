#include "convkit/svd.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <string>

namespace convkit {
namespace {

// Relative reconstruction residual above which a factorization is rejected.
constexpr double kResidualTolerance = 1e-9;

using MatrixXdRow = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

SvdResult svd(const Matrix& m) {
  if (!all_finite(m.data())) fail_numeric("svd: input contains NaN or Inf");

  const std::size_t rows = m.rows();
  const std::size_t cols = m.cols();
  const std::size_t k = std::min(rows, cols);
  SvdResult out{Matrix(rows, k), std::vector<float>(k, 0.0f), Matrix(k, cols)};
  if (k == 0) return out;

  MatrixXdRow a(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) a(r, c) = m(r, c);
  }

  Eigen::BDCSVD<Eigen::MatrixXd> solver(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::MatrixXd& u = solver.matrixU();
  const Eigen::MatrixXd& v = solver.matrixV();
  const Eigen::VectorXd& s = solver.singularValues();

  const double norm = a.norm();
  const double residual =
      (a - u * s.asDiagonal() * v.transpose()).norm() / (norm > 0.0 ? norm : 1.0);
  if (solver.info() != Eigen::Success || !std::isfinite(residual) ||
      residual > kResidualTolerance) {
    fail_numeric("svd: no convergence for " + std::to_string(rows) + "x" +
                 std::to_string(cols) + " matrix, relative residual " +
                 std::to_string(residual));
  }

  // Singular values come back non-increasing; keep that order and fix signs.
  for (std::size_t t = 0; t < k; ++t) {
    std::size_t arg = 0;
    for (std::size_t r = 1; r < rows; ++r) {
      if (std::abs(u(r, t)) > std::abs(u(arg, t))) arg = r;
    }
    const double sign = u(arg, t) < 0.0 ? -1.0 : 1.0;
    for (std::size_t r = 0; r < rows; ++r) {
      out.u(r, t) = static_cast<float>(sign * u(r, t));
    }
    for (std::size_t c = 0; c < cols; ++c) {
      out.vt(t, c) = static_cast<float>(sign * v(c, t));
    }
    out.sigma[t] = static_cast<float>(s(t));
  }
  return out;
}

TruncatedSvd svd_truncate(const SvdResult& s, std::size_t r) {
  const std::size_t k = s.sigma.size();
  if (r < 1 || r > k) {
    fail_validation("svd_truncate: rank " + std::to_string(r) +
                    " outside [1, " + std::to_string(k) + "]");
  }
  TruncatedSvd out{Matrix(s.u.rows(), r),
                   std::vector<float>(s.sigma.begin(), s.sigma.begin() + r),
                   Matrix(r, s.vt.cols())};
  for (std::size_t row = 0; row < s.u.rows(); ++row) {
    for (std::size_t t = 0; t < r; ++t) out.u(row, t) = s.u(row, t);
  }
  for (std::size_t t = 0; t < r; ++t) {
    for (std::size_t c = 0; c < s.vt.cols(); ++c) out.vt(t, c) = s.vt(t, c);
  }
  return out;
}

double tail_energy(const std::vector<float>& sigma, std::size_t r) {
  double sum = 0.0;
  for (std::size_t t = r; t < sigma.size(); ++t) {
    sum += static_cast<double>(sigma[t]) * sigma[t];
  }
  return std::sqrt(sum);
}

Matrix compose(const Matrix& u, const std::vector<float>& sigma, const Matrix& vt) {
  if (u.cols() != sigma.size() || vt.rows() != sigma.size()) {
    fail_validation("compose: inner extents " + std::to_string(u.cols()) + ", " +
                    std::to_string(sigma.size()) + ", " + std::to_string(vt.rows()) +
                    " disagree");
  }
  Matrix out(u.rows(), vt.cols());
  for (std::size_t r = 0; r < u.rows(); ++r) {
    for (std::size_t c = 0; c < vt.cols(); ++c) {
      double acc = 0.0;
      for (std::size_t t = 0; t < sigma.size(); ++t) {
        acc += static_cast<double>(u(r, t)) * sigma[t] * vt(t, c);
      }
      out(r, c) = static_cast<float>(acc);
    }
  }
  return out;
}

}  // namespace convkit
