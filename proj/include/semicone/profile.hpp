#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "semicone/quadrature.hpp"

namespace semicone {

// Polynomial on [b_i, b_{i+1}] pieces, coefficients in the local variable
// (t - b_i).  Exact antidifferentiation keeps the whole profile machinery
// quadrature-free on the inside.
class PiecewisePoly {
public:
  PiecewisePoly() = default;
  PiecewisePoly(std::vector<double> breaks, std::vector<std::vector<double>> coefs)
      : breaks_(std::move(breaks)), coefs_(std::move(coefs)) {
    if (breaks_.size() != coefs_.size() + 1)
      throw std::invalid_argument("PiecewisePoly: breaks/coefs mismatch");
  }

  double lo() const { return breaks_.front(); }
  double hi() const { return breaks_.back(); }

  double eval(double t) const {
    int i = piece_of(t);
    const double u = t - breaks_[i];
    const auto& c = coefs_[i];
    double v = 0.0;
    for (int j = static_cast<int>(c.size()) - 1; j >= 0; --j) v = v * u + c[j];
    return v;
  }

  // F' = this, F(lo) = 0, continuous across breaks
  PiecewisePoly antiderivative() const {
    std::vector<std::vector<double>> out(coefs_.size());
    double carry = 0.0;
    for (std::size_t i = 0; i < coefs_.size(); ++i) {
      const auto& c = coefs_[i];
      std::vector<double> C(c.size() + 1, 0.0);
      C[0] = carry;
      for (std::size_t j = 0; j < c.size(); ++j) C[j + 1] = c[j] / static_cast<double>(j + 1);
      out[i] = C;
      const double w = breaks_[i + 1] - breaks_[i];
      double v = 0.0;
      for (int j = static_cast<int>(C.size()) - 1; j >= 0; --j) v = v * w + C[j];
      carry = v;
    }
    return PiecewisePoly(breaks_, std::move(out));
  }

  double integral() const {
    PiecewisePoly F = antiderivative();
    return F.eval(hi());
  }

  PiecewisePoly minus_constant(double c) const {
    auto out = coefs_;
    for (auto& piece : out) piece[0] -= c;
    return PiecewisePoly(breaks_, std::move(out));
  }

  const std::vector<double>& breaks() const { return breaks_; }

private:
  int piece_of(double t) const {
    if (t <= breaks_.front()) return 0;
    if (t >= breaks_.back()) return static_cast<int>(coefs_.size()) - 1;
    int lo = 0, hi = static_cast<int>(coefs_.size()) - 1;
    while (lo < hi) {
      const int mid = (lo + hi + 1) / 2;
      if (t >= breaks_[mid]) lo = mid;
      else hi = mid - 1;
    }
    return lo;
  }

  std::vector<double> breaks_;
  std::vector<std::vector<double>> coefs_;
};

// quintic smoothstep 10u^3 - 15u^4 + 6u^5 and its derivative sup norms
inline double smoothstep5(double u) {
  if (u <= 0) return 0.0;
  if (u >= 1) return 1.0;
  return ((6.0 * u - 15.0) * u + 10.0) * u * u * u;
}

// sup |sigma^{(p)}| on [0,1] for p = 0..4
inline double smoothstep5_deriv_sup(int p) {
  static const double sup[5] = {1.0, 1.875, 5.773502691896258, 60.0, 360.0};
  if (p < 0 || p > 4) throw std::invalid_argument("smoothstep5_deriv_sup: order out of range");
  return sup[p];
}

struct ProfileError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// 1-periodic mollified two-level step h with closed-form primitives
// h_0 = h, h_l(0) = 0, h_l' = h_{l-1}.  Each level is stored as a global
// polynomial part plus a 1-periodic piecewise-polynomial part, so h_l(t) is
// exact for any t without summation over periods.
class Profile {
public:
  double lambda = 0.5;
  double eps = 0.1;
  double width = 0.0;  // each transition occupies an interval of length 2*width
  int k = 1;

  double I_xi_lo = 0, I_xi_hi = 0;    // h == lambda - 1 here
  double I_eta_lo = 0, I_eta_hi = 0;  // h == lambda here
  double h1_sup = 0.0;                // exact sup |h_1|
  double mean_h1 = 0.0;               // integral of h_1 over one period

  double h(double t) const { return level_eval(0, t); }
  double H(double t) const { return level_eval(k, t); }
  // H^{(l)} = h_{k-l} for 0 <= l <= k
  double H_deriv(int l, double t) const {
    if (l < 0 || l > k) throw std::invalid_argument("Profile::H_deriv: order out of range");
    return level_eval(k - l, t);
  }
  double level_eval(int level, double t) const {
    const double fl = std::floor(t);
    const double s = t - fl;
    double poly = 0.0;
    const auto& p = pi_[level];
    for (int j = static_cast<int>(p.size()) - 1; j >= 0; --j) poly = poly * t + p[j];
    return poly + rho_[level].eval(s);
  }

  // certified upper bound for sup_{|t|<=T} |h_level|
  double level_sup_bound(int level, double T) const {
    double poly = 0.0;
    const auto& p = pi_[level];
    for (int j = static_cast<int>(p.size()) - 1; j >= 0; --j) poly = poly * T + std::abs(p[j]);
    return poly + rho_sup_[level];
  }

  double interval_xi() const { return I_xi_hi - I_xi_lo; }
  double interval_eta() const { return I_eta_hi - I_eta_lo; }

  friend Profile build_profile(double lambda, double eps, double mollify_width, int k);

private:
  std::vector<std::vector<double>> pi_;  // global polynomial coefficients per level
  std::vector<PiecewisePoly> rho_;       // periodic parts per level
  std::vector<double> rho_sup_;          // sampled sup of |rho| per level
};

// Builds the profile and verifies its invariants by composite Gauss
// quadrature (1e4 nodes per period): zero mean, plateau values, range.
inline Profile build_profile(double lambda, double eps, double mollify_width, int k) {
  if (!(lambda > 0.0 && lambda < 1.0)) throw std::invalid_argument("build_profile: lambda in (0,1)");
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("build_profile: eps in (0,1)");
  const double w = mollify_width;
  if (!(w > 0.0)) throw std::invalid_argument("build_profile: width must be positive");
  // plateau bounds |I_xi| > (1-eps/2) lambda, |I_eta| > (1-eps/2)(1-lambda)
  if (!(lambda - 2.0 * w > (1.0 - eps / 2.0) * lambda) ||
      !(1.0 - lambda - 2.0 * w > (1.0 - eps / 2.0) * (1.0 - lambda)))
    throw ProfileError("build_profile: plateau bound violated; choose a smaller mollify_width");

  Profile pr;
  pr.lambda = lambda;
  pr.eps = eps;
  pr.width = w;
  pr.k = k;
  pr.I_xi_lo = 2.0 * w;
  pr.I_xi_hi = lambda;
  pr.I_eta_lo = lambda + 2.0 * w;
  pr.I_eta_hi = 1.0;

  const double W = 2.0 * w;
  const double W3 = W * W * W, W4 = W3 * W, W5 = W4 * W;
  // h: down-transition, low plateau, up-transition, high plateau
  std::vector<double> breaks = {0.0, W, lambda, lambda + W, 1.0};
  std::vector<std::vector<double>> coefs = {
      {lambda, 0.0, 0.0, -10.0 / W3, 15.0 / W4, -6.0 / W5},
      {lambda - 1.0},
      {lambda - 1.0, 0.0, 0.0, 10.0 / W3, -15.0 / W4, 6.0 / W5},
      {lambda}};
  PiecewisePoly h(std::move(breaks), std::move(coefs));

  // invariant audit by quadrature; panels aligned to the transition pieces
  // so the Gauss rule is exact on each polynomial piece regardless of width
  auto heval = [&h](double t) { return h.eval(t); };
  double mean = 0.0;
  const std::vector<double>& hb = h.breaks();
  for (std::size_t i = 0; i + 1 < hb.size(); ++i) {
    const int panels = std::max(4, static_cast<int>(2500 * (hb[i + 1] - hb[i])));
    mean += gauss_integrate(heval, hb[i], hb[i + 1], panels);
  }
  if (std::abs(mean) > 1e-10) throw ProfileError("build_profile: mean of h exceeds 1e-10");
  for (int i = 0; i <= 100; ++i) {
    const double txi = pr.I_xi_lo + (pr.I_xi_hi - pr.I_xi_lo) * i / 100.0;
    const double teta = pr.I_eta_lo + (pr.I_eta_hi - pr.I_eta_lo) * i / 100.0;
    if (std::abs(h.eval(txi) - (lambda - 1.0)) > 1e-12 ||
        std::abs(h.eval(teta) - lambda) > 1e-12)
      throw ProfileError("build_profile: plateau value check failed");
  }
  for (int i = 0; i <= 10000; ++i) {
    const double v = h.eval(i / 10000.0);
    if (v < lambda - 1.0 - 1e-12 || v > lambda + 1e-12)
      throw ProfileError("build_profile: range check failed");
  }

  // level 0
  pr.pi_.push_back({});
  pr.rho_.push_back(h);
  // levels 1..k: rho_{l} = antiderivative of (rho_{l-1} - mean), pi_{l} by
  // polynomial integration of (pi_{l-1} + mean)
  for (int l = 1; l <= k; ++l) {
    const double m = pr.rho_.back().integral();
    pr.rho_.push_back(pr.rho_.back().minus_constant(m).antiderivative());
    const auto& p = pr.pi_.back();
    std::vector<double> P(p.size() + 1, 0.0);
    P[0] = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) P[j + 1] = p[j] / static_cast<double>(j + 1);
    P[1] += m;
    pr.pi_.push_back(std::move(P));
  }
  pr.rho_sup_.assign(k + 1, 0.0);
  for (int l = 0; l <= k; ++l) {
    double sup = 0.0;
    for (int i = 0; i <= 20000; ++i) sup = std::max(sup, std::abs(pr.rho_[l].eval(i / 20000.0)));
    pr.rho_sup_[l] = sup * (1.0 + 1e-9) + 1e-15;
  }
  pr.mean_h1 = pr.rho_[1].integral();  // pi_1 == 0, so this is the full mean

  // exact sup of |h_1|: h_1' = h vanishes only inside the two transitions,
  // where sigma crosses the levels; bisect for those roots
  {
    auto bisect = [&](double lo, double hi, double target, bool down) {
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double v = smoothstep5(mid);
        if ((v > target) == down) lo = mid;
        else hi = mid;
      }
      return 0.5 * (lo + hi);
    };
    // down transition: h = lambda - sigma(t/W): zero at sigma = lambda
    const double u1 = bisect(0.0, 1.0, lambda, false);
    // up transition: h = lambda - 1 + sigma((t-lambda)/W): zero at sigma = 1 - lambda
    const double u2 = bisect(0.0, 1.0, 1.0 - lambda, false);
    double sup = 0.0;
    for (double t : {0.0, W * u1, lambda + W * u2, 1.0})
      sup = std::max(sup, std::abs(pr.rho_[1].eval(std::min(t, 1.0))));
    pr.h1_sup = sup;
  }
  return pr;
}

}  // namespace semicone
