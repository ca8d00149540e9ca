#include <catch2/catch.hpp>

#include "oracles.hpp"
#include "semicone/fields.hpp"
#include "semicone/laminate.hpp"

using namespace semicone;

namespace {

SymTensor half_dyad_11() {
  return dyad_to_tensor(
      Dyad{0.5, Eigen::VectorXd::Ones(1),
           (Eigen::VectorXd(2) << 1 / std::sqrt(2.0), 1 / std::sqrt(2.0)).finished(), 2});
}

// A valid test map at a deliberately small frequency: the oracle identities
// (exact derivatives, compact support, mean-zero jets) hold for any j; only
// the split conditions need the threshold frequency.
TestMap small_test_map(long j = 4, int k = 2) {
  TestMap tm;
  tm.b = Eigen::VectorXd::Ones(1);
  tm.a = (Eigen::VectorXd(2) << 1 / std::sqrt(2.0), 1 / std::sqrt(2.0)).finished();
  tm.j = j;
  tm.profile = build_profile(0.5, 0.3, 0.03, k);
  tm.omega = Box::unit(2);
  tm.cutoff = build_cutoff(tm.omega, 0.3);
  tm.C = SymTensor(TensorShape{2, k, 1});
  tm.finalize();
  return tm;
}

}  // namespace

TEST_CASE("profile construction") {
  SECTION("plateau lengths clear the declared bounds") {
    Profile p = build_profile(0.5, 0.1, 0.01, 2);
    CHECK(p.interval_xi() > (1 - 0.05) * 0.5);
    CHECK(p.interval_eta() > (1 - 0.05) * 0.5);
  }
  SECTION("mean zero, verified independently") {
    Profile p = build_profile(0.35, 0.1, 0.005, 2);
    const double mean = adaptive_simpson([&](double t) { return p.h(t); }, 0.0, 1.0, 1e-12);
    CHECK(std::abs(mean) <= 1e-10);
  }
  SECTION("plateau values and range") {
    Profile p = build_profile(0.25, 0.05, 0.002, 2);
    CHECK(p.h(0.5 * (p.I_xi_lo + p.I_xi_hi)) == Approx(0.25 - 1.0));
    CHECK(p.h(0.5 * (p.I_eta_lo + p.I_eta_hi)) == Approx(0.25));
    for (int i = 0; i <= 1000; ++i) {
      const double v = p.h(i / 1000.0);
      CHECK(v >= 0.25 - 1.0 - 1e-12);
      CHECK(v <= 0.25 + 1e-12);
    }
  }
  SECTION("primitives satisfy h_l' = h_{l-1} and h_l(0) = 0") {
    Profile p = build_profile(0.4, 0.1, 0.004, 3);
    for (int l = 1; l <= 3; ++l) {
      CHECK(p.level_eval(l, 0.0) == Approx(0.0).margin(1e-14));
      for (double t : {0.3, 1.7, 12.9, -4.2}) {
        const double h = 1e-6;
        const double fd = (p.level_eval(l, t + h) - p.level_eval(l, t - h)) / (2 * h);
        CHECK(fd == Approx(p.level_eval(l - 1, t)).margin(1e-6));
      }
    }
  }
  SECTION("growth bound for the primitives") {
    for (int k : {2, 3}) {
      Profile p = build_profile(0.25, 0.05, 0.002, k);
      CounterRng rng(19);
      for (int i = 0; i < 10000; ++i) {
        const double t = rng.uniform(-100.0, 100.0);
        for (int l = 0; l < k; ++l) {
          double fact = 1.0;
          for (int q = 2; q <= k - l - 1; ++q) fact *= q;
          const double bound = p.h1_sup * std::pow(std::abs(t), k - l - 1) / fact;
          CHECK(std::abs(p.H_deriv(l, t)) <= bound * (1 + 1e-9) + 1e-12);
        }
      }
    }
  }
  SECTION("plateau bound failure points at the width") {
    CHECK_THROWS_AS(build_profile(0.5, 0.1, 0.05, 2), ProfileError);
  }
}

TEST_CASE("cutoff construction") {
  Box omega = Box::unit(2);
  Cutoff c = build_cutoff(omega, 0.1);
  SECTION("plateau volume ratio") {
    CHECK(c.plateau.volume() / omega.volume() > 0.95);
  }
  SECTION("identically one with vanishing derivatives on the plateau") {
    CounterRng rng(3);
    for (int i = 0; i < 200; ++i) {
      const Eigen::VectorXd x = c.plateau.sample(rng);
      CHECK(c.psi(x) == 1.0);
      CHECK(c.dpsi(x, {1, 0}) == 0.0);
      CHECK(c.dpsi(x, {0, 2}) == 0.0);
    }
  }
  SECTION("compact support strictly inside the domain") {
    for (double t = 0.0; t <= 1.0; t += 0.05) {
      Eigen::VectorXd edge(2);
      edge << t, 0.0;
      CHECK(c.psi(edge) == 0.0);
      edge << 0.0, t;
      CHECK(c.psi(edge) == 0.0);
    }
  }
  SECTION("derivative sup norms match the window closed forms") {
    const double m = c.windows[0].m;
    const double expect2 = std::max(smoothstep5_deriv_sup(2) / (m * m),
                                    std::pow(smoothstep5_deriv_sup(1) / m, 2));
    CHECK(c.deriv_sup(2) == Approx(expect2));
    CounterRng rng(5);
    double seen = 0.0;
    for (int i = 0; i < 5000; ++i) {
      const Eigen::VectorXd x = omega.sample(rng);
      seen = std::max(seen, std::abs(c.dpsi(x, {2, 0})));
      seen = std::max(seen, std::abs(c.dpsi(x, {1, 1})));
    }
    CHECK(seen <= c.deriv_sup(2) * (1 + 1e-12));
  }
}

TEST_CASE("test map derivatives") {
  TestMap tm = small_test_map();

  SECTION("order zero matches the direct formula") {
    CounterRng rng(11);
    for (int i = 0; i < 50; ++i) {
      const Eigen::VectorXd x = tm.omega.sample(rng);
      const double direct = tm.b[0] * tm.cutoff.psi(x) *
                            std::pow(static_cast<double>(tm.j), -tm.k()) *
                            tm.profile.H(tm.j * tm.a.dot(x));
      SymTensor d0 = tm.dphi(x, 0);
      CHECK(d0.coeffs()(0, 0) == Approx(direct).margin(1e-15));
      CHECK(tm.phi(x)[0] == Approx(direct).margin(1e-15));
    }
  }
  SECTION("derivatives agree with central finite differences") {
    // The map is piecewise polynomial and only C^2 across piece boundaries,
    // so the finite-difference oracle must keep its stencil inside one
    // smooth piece.  On joint plateaus (cutoff windows at 1, the profile on
    // a level piece) the local polynomial degree is 2 and the comparison is
    // exact to roundoff; inside transitions the truncation of the
    // difference quotient dominates and only a coarse agreement is checked.
    CounterRng rng(13);
    auto window_plateau = [&](const Eigen::VectorXd& x, double margin) {
      for (int i = 0; i < 2; ++i) {
        const auto& w = tm.cutoff.windows[i];
        if (x[i] < w.lo + w.m + margin || x[i] > w.hi - w.m - margin) return false;
      }
      return true;
    };
    auto h_plateau = [&](const Eigen::VectorXd& x, double margin) {
      const double t = tm.j * tm.a.dot(x);
      const double f = t - std::floor(t);
      const double m = margin * tm.j * 2.0;
      return (f > tm.profile.I_xi_lo + m && f < tm.profile.I_xi_hi - m) ||
             (f > tm.profile.I_eta_lo + m && f < tm.profile.I_eta_hi - m);
    };
    int exact_checked = 0, rough_checked = 0;
    while (exact_checked < 60 || rough_checked < 60) {
      Eigen::VectorXd x = tm.omega.sample(rng);
      const double step = 1e-4;
      const bool smooth = window_plateau(x, 4 * step) && h_plateau(x, 4 * step);
      if (!smooth) {
        // keep the stencil clear of the piece boundaries of the transition
        if (!window_plateau(x, -4 * step)) continue;
        const double t = tm.j * tm.a.dot(x);
        const double f = t - std::floor(t);
        const double m = 4 * step * tm.j * 2.0;
        bool near_break = false;
        for (double b : {0.0, 2 * tm.profile.width, tm.profile.lambda,
                         tm.profile.lambda + 2 * tm.profile.width, 1.0})
          near_break |= std::abs(f - b) < m;
        if (near_break) continue;
      }
      for (int l = 1; l <= tm.k(); ++l) {
        SymTensor dl = tm.dphi(x, l);
        for (int e = 0; e < dl.entries(); ++e) {
          const auto& idx = dl.table().index(e);
          std::vector<Eigen::VectorXd> dirs;
          for (int v : idx) dirs.push_back(Eigen::VectorXd::Unit(2, v));
          const Eigen::VectorXd fd = oracles::mixed_central_difference(
              [&tm](const Eigen::VectorXd& p) { return tm.phi(p); }, x, dirs, step);
          const double scale = std::max(1e-3, dl.coeffs().cwiseAbs().maxCoeff());
          if (smooth) {
            CHECK(std::abs(fd[0] - dl.coeffs()(e, 0)) <= 1e-6 * scale + 1e-9);
          } else {
            CHECK(std::abs(fd[0] - dl.coeffs()(e, 0)) <= 1e-3 * scale + 1e-6);
          }
        }
      }
      (smooth ? exact_checked : rough_checked) += 1;
    }
  }
  SECTION("on the plateau the k-jet is the pure profile oscillation") {
    CounterRng rng(17);
    for (int i = 0; i < 100; ++i) {
      const Eigen::VectorXd x = tm.cutoff.plateau.sample(rng);
      SymTensor dk = tm.dphi(x, tm.k());
      const double hval = tm.profile.h(tm.j * tm.a.dot(x));
      SymTensor expect = dyad_to_tensor(Dyad{hval, tm.b, tm.a, tm.k()});
      CHECK((dk - expect).norm() <= 1e-12 * std::max(1.0, expect.norm()));
    }
  }
  SECTION("compact support: the map and all derivatives vanish on the boundary ring") {
    for (double t = 0.0; t <= 1.0; t += 0.02) {
      for (auto edge : {std::pair<double, double>{t, 0.0}, {t, 1.0}, {0.0, t}, {1.0, t}}) {
        Eigen::VectorXd x(2);
        x << edge.first, edge.second;
        CHECK(tm.phi(x).norm() == 0.0);
        for (int l = 1; l <= tm.k(); ++l) CHECK(tm.dphi(x, l).norm() == 0.0);
      }
    }
  }
  SECTION("derivative order above k is rejected") {
    CHECK_THROWS_AS(tm.dphi(Eigen::Vector2d(0.5, 0.5), tm.k() + 1), std::invalid_argument);
  }
}

TEST_CASE("oscillation construction meets the split conditions") {
  SymTensor xi = half_dyad_11();
  SymTensor eta = -1.0 * half_dyad_11();
  BuildOscillationOptions opts;
  opts.verify_grid = 192;
  OscillationResult osc = build_oscillation(xi, eta, 0.5, 0.2, Box::unit(2), opts);
  SplitReport rep = verify_split(osc.map, xi, eta, 0.5, 0.2, 512);
  CHECK(rep.cond_i);
  CHECK(rep.cond_ii);
  CHECK(rep.cond_iii);
  CHECK(rep.exactness <= 1e-9);
  CHECK(osc.tail_bound < 0.2);
  CHECK(osc.map.j >= osc.j_analytic);

  SECTION("volume measurement agrees with the exact-line oracle") {
    const double exact = measure_region_volume_exact_line(osc.map, true, 512);
    CHECK(std::abs(rep.vol_xi - exact) <= 5e-3 * rep.omega_vol);
  }
  SECTION("rank-one precondition is enforced") {
    SymTensor bad(TensorShape{2, 2, 1});
    bad.set_coeff({0, 0}, Eigen::VectorXd::Ones(1));
    bad.set_coeff({1, 1}, -Eigen::VectorXd::Ones(1));
    CHECK_THROWS_AS(build_oscillation(xi, xi + bad, 0.5, 0.1, Box::unit(2)),
                    std::invalid_argument);
  }
}

TEST_CASE("first order case n=2, k=1") {
  SymTensor xi(TensorShape{2, 1, 1});
  xi.set_coeff({0}, Eigen::VectorXd::Constant(1, 0.5));
  SymTensor eta(TensorShape{2, 1, 1});
  eta.set_coeff({0}, Eigen::VectorXd::Constant(1, -0.5));
  BuildOscillationOptions opts;
  opts.verify_grid = 256;
  OscillationResult osc = build_oscillation(xi, eta, 0.25, 0.1, Box::unit(2), opts);
  CHECK(osc.report.cond_i);
  CHECK(osc.report.cond_ii);
  CHECK(osc.report.cond_iii);
  CHECK(osc.report.vol_xi > 0.9 * 0.25 * osc.report.omega_vol);
}

TEST_CASE("oscillation averages out: mean-zero jet and linear energies") {
  TestMap tm = small_test_map();

  SECTION("integral of D^k phi vanishes entrywise") {
    for (int e = 0; e < 3; ++e) {
      const double val = oracles::integrate2d(
          [&](double x, double y) {
            Eigen::VectorXd p(2);
            p << x, y;
            TestMap::Jet jt;
            tm.jet(p, jt);
            return tm.dphi_entry(jt, tm.k(), e) * tm.b[0];
          },
          0, 1, 0, 1, 3e-9);
      CHECK(std::abs(val) <= 1e-8);
    }
  }
  SECTION("linear integrands see only the base state") {
    SymTensor zeta(TensorShape{2, 2, 1});
    zeta.set_coeff({0, 0}, Eigen::VectorXd::Constant(1, 0.3));
    zeta.set_coeff({0, 1}, Eigen::VectorXd::Constant(1, -0.2));
    zeta.set_coeff({1, 1}, Eigen::VectorXd::Constant(1, 0.9));
    const Eigen::VectorXd zc = zeta.to_coords();
    ScalarField lin = fields::linear(zc);
    SymTensor xi0(TensorShape{2, 2, 1});
    xi0.set_coeff({0, 0}, Eigen::VectorXd::Constant(1, 0.7));
    auto res = integrate_energy(lin, xi0, tm, 512);
    const double adaptive = oracles::integrate2d(
        [&](double x, double y) {
          Eigen::VectorXd p(2);
          p << x, y;
          TestMap::Jet jt;
          tm.jet(p, jt);
          Eigen::VectorXd dk(3);
          tm.dk_total_coords(jt, dk);
          dk -= tm.base_coords();
          return zc.dot(xi0.to_coords() + dk);
        },
        0, 1, 0, 1, 3e-9);
    CHECK(std::abs(adaptive - zc.dot(xi0.to_coords())) <= 1e-8);
    // the midpoint value must agree within its own reported error band
    CHECK(res.value == Approx(adaptive).margin(std::max(5 * res.error_estimate, 1e-6)));
  }
  SECTION("zero perturbation integrates to F(xi) |Omega|") {
    ScalarField F = fields::frobenius(3);
    SymTensor xi0(TensorShape{2, 2, 1});
    xi0.set_coeff({0, 1}, Eigen::VectorXd::Constant(1, 1.2));
    auto zero_map = [](const Eigen::VectorXd&, Eigen::VectorXd& out) { out.setZero(); };
    auto res = integrate_energy(F, xi0.to_coords(), zero_map, Box::unit(2), 64);
    CHECK(res.value == Approx(F(xi0.to_coords())).epsilon(1e-12));
  }
  SECTION("admissibility violations are rejected with the offending point") {
    ScalarField F = fields::frobenius(3);
    F.domain_pred = [](const Eigen::VectorXd& v) { return v.norm() < 0.5; };
    SymTensor xi0(TensorShape{2, 2, 1});
    xi0.set_coeff({0, 0}, Eigen::VectorXd::Constant(1, 2.0));
    auto zero_map = [](const Eigen::VectorXd&, Eigen::VectorXd& out) { out.setZero(); };
    CHECK_THROWS_AS(integrate_energy(F, xi0.to_coords(), zero_map, Box::unit(2), 16),
                    AdmissibilityError);
  }
}

TEST_CASE("weak-star decay of stripe indicators") {
  // the indicator is piecewise constant, so the integral against any tester
  // is computed exactly by splitting at the stripe boundaries; adaptive
  // rules alias on unresolved stripes and must not be trusted here
  Profile p = build_profile(0.5, 0.2, 0.01, 1);
  const double Ilen = p.interval_xi();
  auto chi_val = [&](double t) {
    const double f = t - std::floor(t);
    return (f > p.I_xi_lo && f < p.I_xi_hi ? 1.0 : 0.0) - Ilen;
  };
  auto integrate_exact = [&](double j, const std::function<double(double)>& phi) {
    std::vector<double> brks = {0.0, 1.0};
    for (long m = 0; m <= static_cast<long>(j); ++m)
      for (double c : {p.I_xi_lo, p.I_xi_hi}) {
        const double t = (m + c) / j;
        if (t > 0 && t < 1) brks.push_back(t);
      }
    std::sort(brks.begin(), brks.end());
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < brks.size(); ++i)
      acc += chi_val(j * 0.5 * (brks[i] + brks[i + 1])) *
             adaptive_simpson(phi, brks[i], brks[i + 1], 1e-15, 40);
    return std::abs(acc);
  };
  auto fit_slope = [](const std::vector<double>& lj, const std::vector<double>& lv) {
    const int m = static_cast<int>(lj.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < m; ++i) {
      sx += lj[i];
      sy += lv[i];
      sxx += lj[i] * lj[i];
      sxy += lj[i] * lv[i];
    }
    return (m * sxy - sx * sy) / (m * sxx - sx * sx);
  };

  SECTION("rough testers realize the integration-by-parts rate 1/j") {
    auto window = [](double t) { return t > 0.3 && t < 0.8 ? std::exp(t) : 0.0; };
    std::vector<double> lj, lv;
    for (int e = 2; e <= 11; ++e) {
      const double j = std::pow(2.0, e);
      lj.push_back(std::log(j));
      lv.push_back(std::log(std::max(integrate_exact(j, window), 1e-300)));
    }
    CHECK(fit_slope(lj, lv) == Approx(-1.0).margin(0.35));
  }
  SECTION("smooth testers decay at least that fast") {
    auto bump = [](double t) { return smoothstep5(3 * t) * smoothstep5(3 - 3 * t); };
    std::vector<double> lj, lv;
    for (int e = 2; e <= 9; ++e) {
      const double j = std::pow(2.0, e);
      lj.push_back(std::log(j));
      lv.push_back(std::log(std::max(integrate_exact(j, bump), 1e-300)));
    }
    CHECK(fit_slope(lj, lv) <= -1.0);
    CHECK(integrate_exact(512.0, bump) <= 1e-8);
  }
}

TEST_CASE("periodic rescaling") {
  TestMap tm = small_test_map();
  auto [rm, rep] = rescale_periodic(tm, 3, 0.5, 0.2, 64);

  SECTION("lower-derivative sups scale down dyadically") {
    for (int l = 0; l < tm.k(); ++l)
      CHECK(rep.sup_lower[l] <= std::pow(2.0, -3 * (tm.k() - l)) * (rep.sup_dk + 10.0));
  }
  SECTION("rescaling at the required level meets both smallness clauses") {
    auto [rm2, rep2] = rescale_periodic(tm, rep.required_level, 0.5, 0.2, 64);
    for (double s : rep2.sup_lower) CHECK(s < 0.2);
    CHECK(rep2.holder_seminorm <= 0.2 * (1 + 1e-6));
  }
  SECTION("energy is invariant under rescaling on commensurate grids") {
    ScalarField F = fields::frobenius(3);
    SymTensor xi0(TensorShape{2, 2, 1});
    xi0.set_coeff({0, 0}, Eigen::VectorXd::Constant(1, 0.4));
    auto base_dk = [&tm](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
      TestMap::Jet jt;
      tm.jet(x, jt);
      tm.dk_total_coords(jt, out);
      out -= tm.base_coords();
    };
    auto resc_dk = [&rm = rm](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
      out = rm.dphi(x, rm.base().k()).to_coords();
    };
    // the rescaled node set at grid 2^9 maps 8-to-1 onto the base node set
    // at grid 2^6, so the two quadratures coincide up to roundoff
    auto e1 = integrate_energy(F, xi0.to_coords(), base_dk, Box::unit(2), 1 << 6);
    auto e2 = integrate_energy(F, xi0.to_coords(), resc_dk, Box::unit(2), 1 << 9);
    CHECK(e1.value == Approx(e2.value).margin(1e-9));
  }
}
