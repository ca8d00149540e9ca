#pragma once

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "semicone/profile.hpp"
#include "semicone/scalar_field.hpp"

namespace semicone {

// Tensor-product smoothstep cutoff: 1 on a centered plateau box, supported
// strictly inside the domain box, with closed-form partial derivatives.
class Cutoff {
public:
  struct Window {
    double lo = 0, hi = 1;   // support interval (strictly inside the domain axis)
    double m = 0.1;          // transition width

    // p-th derivative of the 1-d window at x
    double value(double x, int p) const {
      if (x <= lo || x >= hi) return 0.0;
      if (x < lo + m) return sderiv((x - lo) / m, p) / std::pow(m, p);
      if (x > hi - m) {
        const double sign = (p % 2 == 0) ? 1.0 : -1.0;  // chain rule through hi - x
        return sign * sderiv((hi - x) / m, p) / std::pow(m, p);
      }
      return p == 0 ? 1.0 : 0.0;
    }

    double deriv_sup(int p) const {
      if (p == 0) return 1.0;
      return smoothstep5_deriv_sup(p) / std::pow(m, p);
    }

   private:
    static double sderiv(double t, int p) {
      switch (p) {
        case 0: return smoothstep5(t);
        case 1: return d1(t);
        case 2: return d2(t);
        case 3: return d3(t);
        case 4: return d4(t);
        default: throw std::invalid_argument("Cutoff: derivative order beyond 4");
      }
    }
    static double d1(double t) {
      if (t <= 0 || t >= 1) return 0.0;
      return ((30.0 * t - 60.0) * t + 30.0) * t * t;
    }
    static double d2(double t) {
      if (t <= 0 || t >= 1) return 0.0;
      return ((120.0 * t - 180.0) * t + 60.0) * t;
    }
    static double d3(double t) {
      if (t <= 0 || t >= 1) return 0.0;
      return (360.0 * t - 360.0) * t + 60.0;
    }
    static double d4(double t) {
      if (t <= 0 || t >= 1) return 0.0;
      return 720.0 * t - 360.0;
    }
  };

  Box domain;
  Box plateau;
  std::vector<Window> windows;

  double psi(const Eigen::VectorXd& x) const {
    double v = 1.0;
    for (int i = 0; i < static_cast<int>(windows.size()); ++i) {
      v *= windows[i].value(x[i], 0);
      if (v == 0.0) return 0.0;
    }
    return v;
  }

  // partial derivative with exponent multi-index alpha
  double dpsi(const Eigen::VectorXd& x, const std::vector<int>& alpha) const {
    double v = 1.0;
    for (int i = 0; i < static_cast<int>(windows.size()); ++i) {
      v *= windows[i].value(x[i], alpha[i]);
      if (v == 0.0) return 0.0;
    }
    return v;
  }

  bool on_plateau(const Eigen::VectorXd& x) const { return plateau.contains(x); }

  // upper bound for the full-index Frobenius norm of the l-th gradient:
  // sqrt( sum over |beta| = l of multinomial(l; beta) prod_i sup|w_i^(beta_i)|^2 )
  double grad_norm_sup(int l) const {
    if (l == 0) return 1.0;
    const int n = static_cast<int>(windows.size());
    double total = 0.0;
    std::vector<int> beta(n, 0);
    std::function<void(int, int, double)> rec = [&](int pos, int remaining, double multi) {
      if (pos == n - 1) {
        beta[pos] = remaining;
        double mult = multi;
        for (int q = 2; q <= remaining; ++q) mult /= q;
        double p = 1.0;
        for (int i = 0; i < n; ++i) p *= windows[i].deriv_sup(beta[i]);
        total += mult * p * p;
        return;
      }
      for (int v = 0; v <= remaining; ++v) {
        beta[pos] = v;
        double mult = multi;
        for (int q = 2; q <= v; ++q) mult /= q;
        rec(pos + 1, remaining - v, mult);
      }
    };
    double lfact = 1.0;
    for (int q = 2; q <= l; ++q) lfact *= q;
    rec(0, l, lfact);
    return std::sqrt(total);
  }

  // sup over multi-indices of total order l of sup |D^alpha psi|
  double deriv_sup(int l) const {
    if (l == 0) return 1.0;
    const int n = static_cast<int>(windows.size());
    double best = 0.0;
    std::vector<int> alpha(n, 0);
    // enumerate compositions of l into n parts
    std::function<void(int, int)> rec = [&](int pos, int remaining) {
      if (pos == n - 1) {
        alpha[pos] = remaining;
        double p = 1.0;
        for (int i = 0; i < n; ++i) p *= windows[i].deriv_sup(alpha[i]);
        best = std::max(best, p);
        return;
      }
      for (int v = 0; v <= remaining; ++v) {
        alpha[pos] = v;
        rec(pos + 1, remaining - v);
      }
    };
    rec(0, l);
    return best;
  }
};

// Plateau volume ratio strictly above 1 - eps/2; derivative sup norms for
// orders up to 4 are available from the windows.
inline Cutoff build_cutoff(const Box& omega, double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("build_cutoff: eps in (0,1)");
  const int n = omega.dim();
  Cutoff c;
  c.domain = omega;
  c.windows.resize(n);
  // total one-sided margin per axis: support gap m0 plus transition m
  const double shrink = 0.98 * (1.0 - std::pow(1.0 - 0.5 * eps, 1.0 / n)) / 2.0;
  c.plateau.lo = omega.lo;
  c.plateau.hi = omega.hi;
  for (int i = 0; i < n; ++i) {
    const double L = omega.hi[i] - omega.lo[i];
    const double total = shrink * L;
    const double m0 = total / 8.0;
    const double m = total - m0;
    c.windows[i].lo = omega.lo[i] + m0;
    c.windows[i].hi = omega.hi[i] - m0;
    c.windows[i].m = m;
    c.plateau.lo[i] = omega.lo[i] + total;
    c.plateau.hi[i] = omega.hi[i] - total;
  }
  const double ratio = c.plateau.volume() / omega.volume();
  if (!(ratio > 1.0 - 0.5 * eps))
    throw std::runtime_error("build_cutoff: plateau volume ratio not met");
  return c;
}

}  // namespace semicone
