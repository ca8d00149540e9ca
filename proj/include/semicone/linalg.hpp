#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <vector>

namespace semicone {

// Rank by Gaussian elimination with partial pivoting; pivots below
// threshold * (largest pivot seen) count as zero.
inline int gaussian_rank(Eigen::MatrixXd m, double threshold = 1e-10) {
  const int rows = static_cast<int>(m.rows());
  const int cols = static_cast<int>(m.cols());
  int rank = 0;
  double max_pivot = 0.0;
  for (int col = 0; col < cols && rank < rows; ++col) {
    int piv = rank;
    for (int r = rank + 1; r < rows; ++r)
      if (std::abs(m(r, col)) > std::abs(m(piv, col))) piv = r;
    const double p = std::abs(m(piv, col));
    max_pivot = std::max(max_pivot, p);
    if (p <= threshold * std::max(1e-300, max_pivot)) continue;
    m.row(piv).swap(m.row(rank));
    for (int r = rank + 1; r < rows; ++r) {
      const double f = m(r, col) / m(rank, col);
      m.row(r) -= f * m.row(rank);
    }
    ++rank;
  }
  return rank;
}

// Orthonormal basis of the (numerical) null space, relative threshold on
// singular values.
inline std::vector<Eigen::VectorXd> nullspace(const Eigen::MatrixXd& m, double rel_tol = 1e-9) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv(0) : 0.0;
  std::vector<Eigen::VectorXd> basis;
  for (int i = 0; i < m.cols(); ++i) {
    const double s = i < sv.size() ? sv(i) : 0.0;
    if (s <= rel_tol * smax || smax == 0.0) basis.push_back(svd.matrixV().col(i));
  }
  return basis;
}

// Moore-Penrose pseudoinverse with relative singular-value cutoff.
inline Eigen::MatrixXd pseudoinverse(const Eigen::MatrixXd& m, double rel_tol = 1e-9) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv(0) : 0.0;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > rel_tol * smax && sv(i) > 0.0) inv(i) = 1.0 / sv(i);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

inline double operator_norm(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(0);
}

}  // namespace semicone
