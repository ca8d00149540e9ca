#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <vector>

#include "semicone/cones.hpp"
#include "semicone/linalg.hpp"
#include "semicone/scalar_field.hpp"

namespace semicone {

struct ConvexityWitness {
  Eigen::VectorXd x, y, direction;
};

struct ConvexityReport {
  long samples_tested = 0;
  double worst_violation = -std::numeric_limits<double>::infinity();
  std::optional<ConvexityWitness> witness;  // present iff worst_violation > 0
  bool neg_infinity_seen = false;
};

// Directional convexity audit by midpoint inequality on sampled segments in
// cone directions.  Midpoint tests stay valid for the non-smooth
// 1-homogeneous functions this toolkit cares about; second differences would
// not.
inline ConvexityReport check_dconvex(
    const ScalarField& f, const DirectionCone& cone, const Box& region, int n_segments,
    int n_points, std::uint64_t seed = 9001,
    const std::function<void(int, double, double)>& profile_sink = nullptr) {
  if (f.domain_box && !f.domain_box->contains_box(region))
    throw std::invalid_argument("check_dconvex: region outside declared domain");
  ConvexityReport rep;
  CounterRng rng(seed);
  auto dirs = cone.sample_unit(n_segments);
  for (int s = 0; s < n_segments; ++s) {
    const Eigen::VectorXd& d = dirs[s];
    Eigen::VectorXd x0 = region.sample(rng);
    auto [tlo, thi] = region.line_clip(x0, d);
    if (!(thi - tlo > 1e-9 * region.diam())) continue;
    const int np = std::max(3, n_points);
    std::vector<double> fv(np);
    bool usable = true;
    for (int i = 0; i < np; ++i) {
      const double t = tlo + (thi - tlo) * i / (np - 1);
      const Eigen::VectorXd p = x0 + t * d;
      if (!f.in_domain(p)) {
        usable = false;
        break;
      }
      fv[i] = f(p);
      if (fv[i] == kNegInf) rep.neg_infinity_seen = true;
      if (profile_sink) profile_sink(s, t, fv[i]);
    }
    if (!usable) continue;
    for (int i = 1; i + 1 < np; ++i) {
      ++rep.samples_tested;
      const double viol = fv[i] - 0.5 * (fv[i - 1] + fv[i + 1]);
      if (std::isnan(viol)) continue;  // -inf arithmetic; flagged above
      if (viol > rep.worst_violation) {
        rep.worst_violation = viol;
        if (viol > 0) {
          const double step = (thi - tlo) / (np - 1);
          rep.witness = ConvexityWitness{x0 + (tlo + step * (i - 1)) * d,
                                         x0 + (tlo + step * (i + 1)) * d, d};
        }
      }
    }
  }
  if (rep.worst_violation <= 0) rep.witness.reset();
  return rep;
}

struct LipschitzEstimate {
  double L = 0.0;
  double c0 = 0.0;         // c * n * max(1, c), reported so over-estimation is visible
  double norm_const = 0.0; // the norm-equivalence constant c for the chosen basis
  double oscillation = 0.0;
  bool unbounded = false;  // -infinity encountered while sampling
};

// L = (c0 / r) * osc(f, B_2r(center)); the norm-equivalence constant of the
// spanning basis is estimated over random coefficient vectors.
inline LipschitzEstimate lipschitz_estimate(const ScalarField& f, const DirectionCone& cone,
                                            const Eigen::VectorXd& center, double r,
                                            std::uint64_t seed = 1234) {
  LipschitzEstimate est;
  auto basis = cone.spanning_basis();
  const int d = static_cast<int>(center.size());
  for (auto& e : basis) e.normalize();

  CounterRng rng(seed);
  double chi = 0.0, clo = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 10000; ++it) {
    Eigen::VectorXd t = rng.gaussian_vector(d);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(d);
    double l1 = 0.0;
    for (int j = 0; j < d; ++j) {
      v += t[j] * basis[j];
      l1 += std::abs(t[j]);
    }
    const double ratio = v.norm() / l1;
    chi = std::max(chi, ratio);
    clo = std::min(clo, ratio);
  }
  const double c = std::max({1.0, chi, 1.0 / clo});
  est.norm_const = c;
  est.c0 = c * d * std::max(1.0, c);

  double fmin = std::numeric_limits<double>::infinity();
  double fmax = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < 10000; ++it) {
    const Eigen::VectorXd x = center + rng.in_ball(d, 2.0 * r);
    if (!f.in_domain(x)) continue;
    const double v = f(x);
    if (v == kNegInf) {
      est.unbounded = true;
      continue;
    }
    fmin = std::min(fmin, v);
    fmax = std::max(fmax, v);
  }
  est.oscillation = fmax - fmin;
  est.L = est.c0 / r * est.oscillation;
  return est;
}

struct RecessionResult {
  double value = 0.0;
  bool converged = false;
  std::vector<std::pair<double, double>> ladder;  // (t, f(tx)/t)
};

// Radial recession function: Richardson-extrapolated limit of f(t x)/t on a
// geometric ladder ending at t_max.  Valid for locally Lipschitz f; the
// ladder may genuinely fail to stabilize otherwise, which the flag reports.
inline RecessionResult recession(const ScalarField& f, const Eigen::VectorXd& x, double t_max,
                                 int levels = 8) {
  RecessionResult res;
  levels = std::max(3, levels);
  std::vector<double> v(levels);
  for (int i = levels - 1; i >= 0; --i) {
    const double t = t_max * std::pow(2.0, -i);
    const Eigen::VectorXd p = t * x;
    if (!f.in_domain(p)) return res;  // not converged
    v[i] = f(p) / t;
    res.ladder.emplace_back(t, v[i]);
  }
  // v[0] is the largest-t value; assume v(t) = L + c/t + ...
  const double r01 = 2.0 * v[0] - v[1];
  const double r12 = 2.0 * v[1] - v[2];
  res.value = r01 + (r01 - r12) / 3.0;
  res.converged = std::abs(v[0] - v[1]) <= 1e-6 * std::max(1.0, std::abs(v[0]));
  return res;
}

// Residual of the key bound f(x+y) <= f^inf(x) + f(y); nonpositive (within
// tolerance) whenever f is D-convex, x in C and a cone direction, y in C.
inline double keybound_check(const ScalarField& f, const DirectionCone& cone,
                             const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                             double t_max = 1e8, double membership_tol = 1e-7) {
  if (!cone.membership(x, membership_tol))
    throw std::invalid_argument("keybound_check: x not in the direction cone");
  if (!f.in_domain(x) || !f.in_domain(y) || !f.in_domain(x + y))
    throw std::invalid_argument("keybound_check: point outside domain");
  double rec;
  if (f.homogeneous) {
    rec = f(x);  // radial quotient is constant for positively 1-homogeneous f
  } else {
    auto rr = recession(f, x, t_max);
    rec = rr.value;
  }
  return f(x + y) - rec - f(y);
}

// Basis of quadratic forms vanishing on the cone (the D-affine quadratics,
// up to sign): assembles q(d,d) = 0 over sampled directions and returns the
// null space.  Forms are symmetric d x d matrices in ambient coordinates.
inline std::vector<Eigen::MatrixXd> daffine_quadratics(const DirectionCone& cone) {
  const int d = cone.ambient_dim();
  const int nq = d * (d + 1) / 2;
  const int m = 10 * nq;
  auto dirs = cone.sample_unit(m);
  Eigen::MatrixXd rows(m, nq);
  for (int s = 0; s < m; ++s) {
    int c = 0;
    for (int p = 0; p < d; ++p)
      for (int q = p; q < d; ++q) rows(s, c++) = dirs[s][p] * dirs[s][q] * (p == q ? 1.0 : 2.0);
  }
  auto null = nullspace(rows, 1e-9);
  std::vector<Eigen::MatrixXd> basis;
  for (const auto& v : null) {
    Eigen::MatrixXd q(d, d);
    int c = 0;
    for (int p = 0; p < d; ++p)
      for (int r = p; r < d; ++r) {
        q(p, r) = v[c];
        q(r, p) = v[c];
        ++c;
      }
    basis.push_back(q);
  }
  return basis;
}

struct QdMembership {
  bool nonnegative = false;
  double min_value = 0.0;
  Eigen::VectorXd worst_direction;
};

// q is a D-convex quadratic form iff q(d,d) >= 0 on the cone.
inline QdMembership qd_membership(const Eigen::MatrixXd& q, const DirectionCone& cone, int m) {
  QdMembership res;
  auto dirs = cone.sample_unit(m);
  res.min_value = std::numeric_limits<double>::infinity();
  for (const auto& d : dirs) {
    const double v = d.dot(q * d);
    if (v < res.min_value) {
      res.min_value = v;
      res.worst_direction = d;
    }
  }
  res.nonnegative = res.min_value >= -1e-12;
  return res;
}

}  // namespace semicone
