#pragma once

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

namespace semicone {

struct Box {
  Eigen::VectorXd lo, hi;

  static Box centered(int d, double radius) {
    Box b;
    b.lo = Eigen::VectorXd::Constant(d, -radius);
    b.hi = Eigen::VectorXd::Constant(d, radius);
    return b;
  }
  static Box unit(int d) {
    Box b;
    b.lo = Eigen::VectorXd::Zero(d);
    b.hi = Eigen::VectorXd::Ones(d);
    return b;
  }

  int dim() const { return static_cast<int>(lo.size()); }
  double volume() const { return (hi - lo).prod(); }
  double diam() const { return (hi - lo).norm(); }
  Eigen::VectorXd center() const { return 0.5 * (lo + hi); }

  bool contains(const Eigen::VectorXd& x, double slack = 0.0) const {
    for (int i = 0; i < dim(); ++i)
      if (x[i] < lo[i] - slack || x[i] > hi[i] + slack) return false;
    return true;
  }

  bool contains_box(const Box& inner) const {
    return contains(inner.lo) && contains(inner.hi);
  }

  template <class Rng>
  Eigen::VectorXd sample(Rng& rng) const {
    Eigen::VectorXd x(dim());
    for (int i = 0; i < dim(); ++i) x[i] = rng.uniform(lo[i], hi[i]);
    return x;
  }

  // parameter interval of { t : x + t d in box }
  std::pair<double, double> line_clip(const Eigen::VectorXd& x, const Eigen::VectorXd& d) const {
    double tlo = -std::numeric_limits<double>::infinity();
    double thi = std::numeric_limits<double>::infinity();
    for (int i = 0; i < dim(); ++i) {
      if (std::abs(d[i]) < 1e-300) {
        if (x[i] < lo[i] || x[i] > hi[i]) return {1.0, 0.0};  // empty
        continue;
      }
      double a = (lo[i] - x[i]) / d[i];
      double b = (hi[i] - x[i]) / d[i];
      if (a > b) std::swap(a, b);
      tlo = std::max(tlo, a);
      thi = std::min(thi, b);
    }
    return {tlo, thi};
  }
};

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Deterministic evaluator on R^dim, values in R or -infinity.  The optional
// homogeneous flag declares f(t x) = t f(x) for t > 0; consumers audit it on
// samples rather than trusting it blindly.
struct ScalarField {
  int dim = 0;
  std::function<double(const Eigen::VectorXd&)> eval;
  std::optional<Box> domain_box;
  std::function<bool(const Eigen::VectorXd&)> domain_pred;  // null = everywhere
  bool homogeneous = false;
  std::string name;

  double operator()(const Eigen::VectorXd& x) const { return eval(x); }

  bool in_domain(const Eigen::VectorXd& x) const {
    if (domain_box && !domain_box->contains(x)) return false;
    if (domain_pred && !domain_pred(x)) return false;
    return true;
  }

  // samples t in {0.5, 2}; relative tolerance 1e-9 per declared invariant
  bool audit_homogeneous(const Eigen::VectorXd& x, double rel_tol = 1e-9) const {
    const double fx = eval(x);
    if (!std::isfinite(fx)) return true;
    for (double t : {0.5, 2.0}) {
      const double a = eval(t * x), b = t * fx;
      if (std::abs(a - b) > rel_tol * std::max(1.0, std::abs(b))) return false;
    }
    return true;
  }
};

inline ScalarField make_field(int dim, std::string name,
                              std::function<double(const Eigen::VectorXd&)> f,
                              bool homogeneous = false) {
  ScalarField s;
  s.dim = dim;
  s.name = std::move(name);
  s.eval = std::move(f);
  s.homogeneous = homogeneous;
  return s;
}

}  // namespace semicone
