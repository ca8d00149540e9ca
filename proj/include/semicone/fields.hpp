#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "semicone/scalar_field.hpp"
#include "semicone/tensor.hpp"

namespace semicone {
namespace fields {

// Coordinates follow SymTensor::to_coords (sorted multi-indices in lex
// order).  For symmetric 2x2 forms the ambient is (v0, v1, v2) with
// xi_11 = v0, xi_12 = v1 / sqrt(2), xi_22 = v2.

inline ScalarField frobenius(int dim) {
  return make_field(dim, "frobenius", [](const Eigen::VectorXd& v) { return v.norm(); }, true);
}

inline ScalarField neg_sqnorm(int dim) {
  return make_field(dim, "neg_sqnorm",
                    [](const Eigen::VectorXd& v) { return -v.squaredNorm(); });
}

inline double sym2_det(const Eigen::VectorXd& v) { return v[0] * v[2] - 0.5 * v[1] * v[1]; }

inline void sym2_eigenvalues(const Eigen::VectorXd& v, double& l1, double& l2) {
  const double mean = 0.5 * (v[0] + v[2]);
  const double disc = std::sqrt(0.25 * (v[0] - v[2]) * (v[0] - v[2]) + 0.5 * v[1] * v[1]);
  l1 = mean + disc;
  l2 = mean - disc;
}

inline ScalarField neg_det_sym2() {
  return make_field(3, "neg_det", [](const Eigen::VectorXd& v) { return -sym2_det(v); });
}

inline ScalarField nuclear_sym2() {
  return make_field(3, "nuclear",
                    [](const Eigen::VectorXd& v) {
                      double l1, l2;
                      sym2_eigenvalues(v, l1, l2);
                      return std::abs(l1) + std::abs(l2);
                    },
                    true);
}

inline ScalarField spectral_sym2() {
  return make_field(3, "spectral",
                    [](const Eigen::VectorXd& v) {
                      double l1, l2;
                      sym2_eigenvalues(v, l1, l2);
                      return std::max(std::abs(l1), std::abs(l2));
                    },
                    true);
}

// sqrt(|xi|^2 - 2 beta det xi): a norm for |beta| < 1 that agrees with the
// Frobenius norm on the dyad cone (det vanishes there)
inline ScalarField det_augmented_sym2(double beta) {
  if (!(std::abs(beta) < 1.0)) throw std::invalid_argument("det_augmented: |beta| < 1");
  return make_field(3, "det_augmented",
                    [beta](const Eigen::VectorXd& v) {
                      return std::sqrt(v.squaredNorm() - 2.0 * beta * sym2_det(v));
                    },
                    true);
}

inline ScalarField norm_plus_linear(const Eigen::VectorXd& slope) {
  Eigen::VectorXd s = slope;
  return make_field(static_cast<int>(slope.size()), "norm_plus_linear",
                    [s](const Eigen::VectorXd& v) { return v.norm() + s.dot(v); }, true);
}

// full 2x2 matrices in jet coordinates of shape (n=2, k=1, dimY=2)
inline Eigen::Matrix2d mat2_of_coords(const Eigen::VectorXd& v) {
  Eigen::Matrix2d m;
  m(0, 0) = v[0];
  m(1, 0) = v[1];
  m(0, 1) = v[2];
  m(1, 1) = v[3];
  return m;
}

inline ScalarField spectral_mat2() {
  return make_field(4, "spectral_2x2",
                    [](const Eigen::VectorXd& v) {
                      Eigen::JacobiSVD<Eigen::Matrix2d> svd(mat2_of_coords(v));
                      return svd.singularValues()(0);
                    },
                    true);
}

// sum |x_i| - beta min |x_i|: separately convex and positively 1-homogeneous
// for beta in [0,1], but not convex for beta > 0
inline ScalarField l1_minus_min(int dim, double beta) {
  return make_field(dim, "l1_minus_min",
                    [beta](const Eigen::VectorXd& v) {
                      return v.cwiseAbs().sum() - beta * v.cwiseAbs().minCoeff();
                    },
                    true);
}

// classical operator-gap integrand on symmetric 2x2 jets:
// F_c(xi) = c (|xi_11| + |xi_22|) - |xi_12|
inline ScalarField fc_classical(double c) {
  return make_field(3, "F_c",
                    [c](const Eigen::VectorXd& v) {
                      return c * (std::abs(v[0]) + std::abs(v[2])) -
                             std::abs(v[1]) / std::sqrt(2.0);
                    },
                    true);
}

inline ScalarField two_well(const Eigen::VectorXd& P) {
  Eigen::VectorXd p = P;
  return make_field(static_cast<int>(P.size()), "two_well",
                    [p](const Eigen::VectorXd& v) {
                      return std::min((v - p).norm(), (v + p).norm());
                    });
}

inline ScalarField sqrt_one_plus_sq(int dim) {
  return make_field(dim, "sqrt1p",
                    [](const Eigen::VectorXd& v) { return std::sqrt(1.0 + v.squaredNorm()); });
}

inline ScalarField linear(const Eigen::VectorXd& slope) {
  Eigen::VectorXd s = slope;
  return make_field(static_cast<int>(slope.size()), "linear",
                    [s](const Eigen::VectorXd& v) { return s.dot(v); }, true);
}

inline ScalarField weighted_max_abs(const Eigen::VectorXd& weights) {
  Eigen::VectorXd w = weights;
  return make_field(static_cast<int>(weights.size()), "weighted_max_abs",
                    [w](const Eigen::VectorXd& v) {
                      return (w.cwiseProduct(v)).cwiseAbs().maxCoeff();
                    },
                    true);
}

}  // namespace fields
}  // namespace semicone
