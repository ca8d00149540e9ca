#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <vector>

#include "semicone/cones.hpp"
#include "semicone/scalar_field.hpp"

namespace semicone {

// Raised when the rescaled family s (f(x0 + y/s) - f(x0)) fails to decrease
// in s beyond tolerance: evidence that f is not D-convex or not positively
// 1-homogeneous at the claimed scale.
struct MonotonicityError : std::runtime_error {
  double s_small, s_large;
  Eigen::VectorXd y;
  MonotonicityError(double s1, double s2, Eigen::VectorXd yy, double gap)
      : std::runtime_error("subcone ladder: monotonicity violated between s=" +
                           std::to_string(s1) + " and s=" + std::to_string(s2) + " (gap " +
                           std::to_string(gap) + ")"),
        s_small(s1),
        s_large(s2),
        y(std::move(yy)) {}
};

struct CertificateError : std::runtime_error {
  Eigen::VectorXd witness;
  double slack;
  CertificateError(std::string msg, Eigen::VectorXd w, double s)
      : std::runtime_error(std::move(msg)), witness(std::move(w)), slack(s) {}
};

struct LadderEntry {
  double s;
  double raw;
  double accel;
};

// The limit g(y) = lim_s s (f(x0 + y/s) - f(x0)) = inf_s, evaluated lazily on
// a dyadic ladder with one-step Richardson acceleration.  Each finite-s value
// is itself an upper bound for the limit (monotone quotient), so truncation
// never invalidates the support property f(y) >= f(x0) + g(y - x0).
class Subcone {
public:
  // eval_noise reports the accuracy of f's values; consulted per ladder step
  // so that nested subcones see the parent's noise as it accumulates
  Subcone(ScalarField f, Eigen::VectorXd x0, std::function<double()> eval_noise = nullptr,
          int max_level = 40)
      : st_(std::make_shared<State>()) {
    st_->f = std::move(f);
    st_->x0 = std::move(x0);
    st_->eval_noise = std::move(eval_noise);
    st_->max_level = max_level;
    st_->fx0 = st_->f(st_->x0);
    st_->scale = std::max(1.0, std::abs(st_->fx0));
  }

  const Eigen::VectorXd& base_point() const { return st_->x0; }
  double f_at_base() const { return st_->fx0; }

  // noise level of the values this subcone produces, for nested use
  double noise() const {
    std::lock_guard<std::mutex> lock(st_->mu);
    return std::max(st_->noise_seen, 1e-12);
  }

  double operator()(const Eigen::VectorXd& y) const { return eval(y); }

  double eval(const Eigen::VectorXd& y) const {
    if (y.norm() == 0.0) return 0.0;
    {
      std::lock_guard<std::mutex> lock(st_->mu);
      auto it = st_->cache.find(key(y));
      if (it != st_->cache.end()) return it->second;
    }
    const double v = eval_ladder(y);
    {
      std::lock_guard<std::mutex> lock(st_->mu);
      st_->cache[key(y)] = v;
    }
    return v;
  }

  ScalarField as_field(std::string name = "subcone") const {
    ScalarField s;
    s.dim = static_cast<int>(st_->x0.size());
    s.name = std::move(name);
    auto self = *this;  // copies share the cache
    s.eval = [self](const Eigen::VectorXd& y) { return self.eval(y); };
    s.homogeneous = true;
    return s;
  }

  std::vector<LadderEntry> last_ladder() const {
    std::lock_guard<std::mutex> lock(st_->mu);
    return st_->last_ladder;
  }

private:
  struct State {
    ScalarField f;
    Eigen::VectorXd x0;
    double fx0 = 0.0, scale = 1.0;
    std::function<double()> eval_noise;
    int max_level = 40;
    std::mutex mu;
    std::map<std::string, double> cache;
    std::vector<LadderEntry> last_ladder;
    double noise_seen = 0.0;
  };

  static std::string key(const Eigen::VectorXd& y) {
    return std::string(reinterpret_cast<const char*>(y.data()), y.size() * sizeof(double));
  }

  double eval_ladder(const Eigen::VectorXd& y) const {
    std::vector<LadderEntry> log;
    const double eps = 2.2e-16;
    double r_prev = 0.0, a_prev = 0.0;
    bool have_r = false, have_a = false;
    double result = 0.0;
    bool done = false;
    for (int i = 0; i <= st_->max_level && !done; ++i) {
      const double s = std::pow(2.0, i);
      const Eigen::VectorXd p = st_->x0 + y / s;
      if (!st_->f.in_domain(p)) {
        if (have_r) break;
        continue;  // ladder starts once the probe point enters the domain
      }
      const double fp = st_->f(p);
      const double r = s * (fp - st_->fx0);
      const double fnoise = st_->eval_noise ? st_->eval_noise() : 0.0;
      const double step_noise = s * (2.0 * fnoise + 8.0 * eps * st_->scale);
      if (have_r) {
        const double mono_tol = 1e-9 * st_->scale + step_noise;
        if (r > r_prev + mono_tol) throw MonotonicityError(s / 2.0, s, y, r - r_prev);
        const double a = 2.0 * r - r_prev;
        log.push_back({s, r, a});
        if (have_a && std::abs(a - a_prev) <= 1e-10 * (1.0 + std::abs(a))) {
          result = a;
          // the produced value is only good to the stop tolerance itself
          noise_track(step_noise + 1e-10 * (1.0 + std::abs(a)));
          done = true;
          break;
        }
        if (std::abs(r - r_prev) <= 4.0 * step_noise) {
          result = r;  // truncation is below the evaluation noise floor
          noise_track(5.0 * step_noise);
          done = true;
          break;
        }
        a_prev = a;
        have_a = true;
      } else {
        log.push_back({s, r, r});
      }
      r_prev = r;
      have_r = true;
      result = r;
    }
    {
      std::lock_guard<std::mutex> lock(st_->mu);
      st_->last_ladder = std::move(log);
    }
    return result;
  }

  void noise_track(double n) const {
    std::lock_guard<std::mutex> lock(st_->mu);
    st_->noise_seen = std::max(st_->noise_seen, n + 1e-10);
  }

  std::shared_ptr<State> st_;
};

// Convenience named per the toolkit's public surface: extract the subcone of
// f at x0 (f positively 1-homogeneous and D-convex on its cone domain; the
// homogeneity is spot-audited, D-convexity is the caller's audit).
inline Subcone subcone_extract(const ScalarField& f, const DirectionCone& cone,
                               const Eigen::VectorXd& x0, double membership_tol = 1e-7) {
  if (!cone.membership(x0, membership_tol))
    throw std::invalid_argument("subcone_extract: x0 not in the direction cone");
  if (!f.in_domain(x0)) throw std::invalid_argument("subcone_extract: x0 outside domain");
  if (!f.audit_homogeneous(x0))
    throw std::invalid_argument("subcone_extract: f fails the homogeneity audit at x0");
  return Subcone(f, x0);
}

struct SupportCertificate {
  Eigen::VectorXd x0;
  Eigen::VectorXd ell;       // coefficient vector of the supporting functional
  double touch_residual = 0.0;
  double min_slack = 0.0;
  long n_samples = 0;
};

namespace detail {

struct LevelFn {
  std::function<double(const Eigen::VectorXd&)> eval;
  std::function<double()> noise;  // current accuracy of eval's values
};

// Subdifferential of a positively 1-homogeneous D-convex h at the origin of
// span(basis), all basis vectors cone members.  Returns the coefficients
// gamma so that ell(sum c_j e_j) = sum gamma_j c_j.
inline Eigen::VectorXd solve_at_zero(const LevelFn& h, const std::vector<Eigen::VectorXd>& basis) {
  const int m = static_cast<int>(basis.size());
  Eigen::VectorXd gamma(m);
  if (m == 1) {
    // the 1-d subdifferential is the interval [-h(-e), h(e)]; take its
    // midpoint so the output is deterministic
    const double hp = h.eval(basis[0]);
    const double hm = h.eval(-basis[0]);
    gamma[0] = 0.5 * (hp - hm);
    return gamma;
  }
  const Eigen::VectorXd& e1 = basis[0];
  ScalarField hf;
  hf.dim = static_cast<int>(e1.size());
  hf.eval = h.eval;
  hf.homogeneous = true;
  Subcone g(hf, e1, h.noise);
  gamma[0] = h.eval(e1);
  std::vector<Eigen::VectorXd> rest(basis.begin() + 1, basis.end());
  LevelFn gh;
  gh.eval = [&g](const Eigen::VectorXd& y) { return g.eval(y); };
  const auto parent_noise = h.noise;
  gh.noise = [&g, parent_noise] {
    return g.noise() + (parent_noise ? parent_noise() : 0.0);
  };
  const Eigen::VectorXd sub = solve_at_zero(gh, rest);
  gamma.tail(m - 1) = sub;
  return gamma;
}

}  // namespace detail

struct SubgradientOptions {
  long n_verify = 100000;
  int retries = 50;
  std::uint64_t seed = 2024;
  double touch_tol = 1e-9;
  double slack_tol = 1e-7;
};

// Supporting functional at x0 in C ∩ D for positively 1-homogeneous D-convex
// f: subcone extraction at x0/|x0| followed by the dimension recursion, then
// a sphere-sampled support verification.  The certificate is checked against
// its own invariants before being returned.
inline SupportCertificate subgradient_at(const ScalarField& f, const DirectionCone& cone,
                                         const Eigen::VectorXd& x0,
                                         SubgradientOptions opts = {}) {
  const int d = static_cast<int>(x0.size());
  if (x0.norm() == 0.0) throw std::invalid_argument("subgradient_at: x0 = 0");
  if (!cone.membership(x0, 1e-7))
    throw std::invalid_argument("subgradient_at: x0 not in the direction cone");
  if (!f.in_domain(x0)) throw std::invalid_argument("subgradient_at: x0 outside domain");

  const Eigen::VectorXd xh = x0 / x0.norm();
  const double fx0 = f(x0);
  const double fxh = f(xh);

  double best_slack = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_witness = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd best_ell;

  for (int retry = 0; retry <= opts.retries; ++retry) {
    // complete xh to a basis of cone members, greedily by orthogonal residual
    std::vector<Eigen::VectorXd> basis{xh};
    std::vector<Eigen::VectorXd> ortho{xh};
    {
      CounterRng rng(cone.seed() + 77777 * (retry + 1));
      const int budget = std::max(80 * d, 800);
      bool complete = false;
      for (int tries = 0; tries < 4 && !complete; ++tries) {
        for (int i = 0; i < budget && static_cast<int>(basis.size()) < d; ++i) {
          Eigen::VectorXd v = cone.draw_unit(rng, i);
          Eigen::VectorXd r = v;
          for (const auto& q : ortho) r -= r.dot(q) * q;
          if (r.norm() > 0.3) {  // keep the basis well conditioned
            basis.push_back(v);
            ortho.push_back(r / r.norm());
          }
        }
        complete = static_cast<int>(basis.size()) == d;
      }
      if (!complete) {
        // relax the conditioning demand before giving up on this retry
        CounterRng rng2(cone.seed() + 99991 * (retry + 1));
        for (int i = 0; i < 4 * budget && static_cast<int>(basis.size()) < d; ++i) {
          Eigen::VectorXd v = cone.draw_unit(rng2, i);
          Eigen::VectorXd r = v;
          for (const auto& q : ortho) r -= r.dot(q) * q;
          if (r.norm() > 1e-6) {
            basis.push_back(v);
            ortho.push_back(r / r.norm());
          }
        }
      }
      if (static_cast<int>(basis.size()) < d) continue;  // resample basis
    }

    Subcone g(f, xh);
    detail::LevelFn gh;
    gh.eval = [&g](const Eigen::VectorXd& y) { return g.eval(y); };
    gh.noise = [&g] { return g.noise(); };
    std::vector<Eigen::VectorXd> rest(basis.begin() + 1, basis.end());
    Eigen::VectorXd gamma(d);
    gamma[0] = fxh;
    gamma.tail(d - 1) = detail::solve_at_zero(gh, rest);

    Eigen::MatrixXd B(d, d);
    for (int i = 0; i < d; ++i) B.col(i) = basis[i];
    Eigen::VectorXd ell = B.transpose().colPivHouseholderQr().solve(gamma);

    // verification sweep over the unit sphere of the domain
    CounterRng vr(opts.seed + 31 * retry);
    double min_slack = std::numeric_limits<double>::infinity();
    Eigen::VectorXd witness = Eigen::VectorXd::Zero(d);
    long tested = 0;
    for (long i = 0; i < opts.n_verify; ++i) {
      Eigen::VectorXd y = vr.on_sphere(d);
      if (!f.in_domain(y)) {
        y = -y;
        if (!f.in_domain(y)) continue;
      }
      const double slack = f(y) - ell.dot(y);
      ++tested;
      if (slack < min_slack) {
        min_slack = slack;
        witness = y;
      }
    }
    const double touch = std::abs(ell.dot(x0) - fx0);

    if (touch <= opts.touch_tol * (1.0 + std::abs(fx0)) && min_slack >= -opts.slack_tol) {
      SupportCertificate cert;
      cert.x0 = x0;
      cert.ell = ell;
      cert.touch_residual = touch;
      cert.min_slack = min_slack;
      cert.n_samples = tested;
      return cert;
    }
    if (min_slack > best_slack) {
      best_slack = min_slack;
      best_witness = witness;
      best_ell = ell;
    }
  }
  throw CertificateError("subgradient_at: support verification failed (best slack " +
                             std::to_string(best_slack) + ")",
                         best_witness, best_slack);
}

struct JensenWitness {
  Eigen::VectorXd x, y;
  double lambda = 0.5;
  Eigen::VectorXd barycentre;
  double violation = 0.0;
};

// Random search for two-point Jensen violations with a barycentre of rank at
// least two (when the ambient is a tensor space).  Absence after m trials is
// a report, not a proof.
inline std::optional<JensenWitness> nonconvexity_witness(
    const ScalarField& f, const Box& region, long m,
    std::optional<TensorShape> shape = std::nullopt, std::uint64_t seed = 4242) {
  CounterRng rng(seed);
  std::optional<JensenWitness> best;
  for (long i = 0; i < m; ++i) {
    const Eigen::VectorXd x = region.sample(rng);
    const Eigen::VectorXd y = region.sample(rng);
    const double lam = rng.uniform(0.05, 0.95);
    const Eigen::VectorXd mid = lam * x + (1.0 - lam) * y;
    if (!f.in_domain(x) || !f.in_domain(y) || !f.in_domain(mid)) continue;
    const double viol = f(mid) - lam * f(x) - (1.0 - lam) * f(y);
    if (viol <= 0) continue;
    if (shape) {
      SymTensor t = SymTensor::from_coords(*shape, mid);
      if (t.norm() < 1e-10) continue;
      if (rank_one_factor(t).has_value()) continue;  // need rank >= 2
    }
    if (!best || viol > best->violation) best = JensenWitness{x, y, lam, mid, viol};
  }
  return best;
}

}  // namespace semicone
