#include <catch2/catch.hpp>

#include "semicone/fields.hpp"
#include "semicone/relaxation.hpp"
#include "semicone/subdifferential.hpp"

using namespace semicone;

namespace {

Eigen::VectorXd sym2_coords(double m11, double m12, double m22) {
  Eigen::VectorXd v(3);
  v << m11, std::sqrt(2.0) * m12, m22;
  return v;
}

}  // namespace

TEST_CASE("monotone difference quotient") {
  // f(y) - f(x) >= (f(x + lam (y - x)) - f(x)) / lam for 1-homogeneous
  // D-convex f and x in the cone
  auto cone = DirectionCone::symmetric_dyad(2, 7);
  std::vector<ScalarField> suite = {fields::frobenius(3), fields::nuclear_sym2(),
                                    fields::det_augmented_sym2(0.6)};
  CounterRng rng(101);
  for (const auto& f : suite) {
    auto dyads = cone.sample_unit(10);
    for (int rep = 0; rep < 100; ++rep) {
      const Eigen::VectorXd x = dyads[rep % dyads.size()] * rng.uniform(0.5, 2.0);
      const Eigen::VectorXd y = rng.gaussian_vector(3);
      for (double lam : {0.1, 0.5, 0.9}) {
        const double lhs = f(y) - f(x);
        const double rhs = (f((x + lam * (y - x)).eval()) - f(x)) / lam;
        CHECK(lhs >= rhs - 1e-9);
      }
    }
  }
}

TEST_CASE("subcone extraction") {
  auto cone = DirectionCone::symmetric_dyad(2, 7);

  SECTION("norm at a unit point gives the tangent functional") {
    Eigen::VectorXd x0 = sym2_coords(1, 1, 1) / 2.0;  // unit dyad
    Subcone g = subcone_extract(fields::frobenius(3), cone, x0);
    CounterRng rng(55);
    for (int rep = 0; rep < 20; ++rep) {
      Eigen::VectorXd y = rng.gaussian_vector(3);
      CHECK(g.eval(y) == Approx(x0.dot(y)).margin(1e-9));
    }
  }
  SECTION("linear fields are their own subcone") {
    Eigen::VectorXd v(3);
    v << 0.4, -0.3, 0.7;
    Eigen::VectorXd x0 = sym2_coords(1, 0, 0);
    Subcone g = subcone_extract(fields::linear(v), cone, x0);
    CounterRng rng(56);
    for (int rep = 0; rep < 10; ++rep) {
      Eigen::VectorXd y = rng.gaussian_vector(3);
      CHECK(g.eval(y) == Approx(v.dot(y)).margin(1e-10));
    }
  }
  SECTION("separable kink: g(u,v) = u + |v| at (1,0)") {
    auto axes = DirectionCone::axes(2, 3);
    Eigen::VectorXd x0(2);
    x0 << 1, 0;
    Subcone g = subcone_extract(fields::l1_minus_min(2, 0.0), axes, x0);
    for (auto [u, v] : std::vector<std::pair<double, double>>{
             {1.0, 0.5}, {-0.7, 0.2}, {0.3, -0.9}, {2.0, 0.0}}) {
      Eigen::VectorXd y(2);
      y << u, v;
      CHECK(g.eval(y) == Approx(u + std::abs(v)).margin(1e-9));
    }
  }
  SECTION("extracted subcones are positively 1-homogeneous") {
    Eigen::VectorXd x0 = sym2_coords(1, 0, 0);
    Subcone g = subcone_extract(fields::nuclear_sym2(), cone, x0);
    CounterRng rng(57);
    for (int rep = 0; rep < 20; ++rep) {
      Eigen::VectorXd y = rng.gaussian_vector(3);
      const double base = g.eval(y);
      for (double lam : {0.5, 2.0})
        CHECK(g.eval((lam * y).eval()) == Approx(lam * base).margin(1e-8));
    }
  }
  SECTION("support property against the parent field") {
    Eigen::VectorXd x0 = sym2_coords(1, 1, 1) / 2.0;
    ScalarField f = fields::det_augmented_sym2(0.5);
    Subcone g = subcone_extract(f, cone, x0);
    CounterRng rng(58);
    for (int rep = 0; rep < 500; ++rep) {
      Eigen::VectorXd y = rng.on_sphere(3) * rng.uniform(0.2, 3.0);
      CHECK(f(y) - f(x0) - g.eval((y - x0).eval()) >= -1e-7);
    }
  }
}

TEST_CASE("subgradient certificates") {
  auto cone = DirectionCone::symmetric_dyad(2, 7);
  SubgradientOptions opts;
  opts.n_verify = 20000;

  SECTION("gradient of the norm at a dyad") {
    Eigen::VectorXd x0 = sym2_coords(1, 1, 1);  // norm 2
    auto cert = subgradient_at(fields::frobenius(3), cone, x0, opts);
    CHECK(cert.touch_residual <= 1e-9 * (1 + 2.0));
    CHECK(cert.min_slack >= -1e-7);
    // consistency with the smooth gradient x0/|x0|
    CHECK((cert.ell - x0 / x0.norm()).norm() <= 1e-6);
  }
  SECTION("separable field with the midpoint tie-break") {
    auto axes = DirectionCone::axes(2, 3);
    Eigen::VectorXd x0(2);
    x0 << 1, 0;
    auto cert = subgradient_at(fields::l1_minus_min(2, 0.0), axes, x0, opts);
    CHECK(cert.min_slack >= -1e-7);
    CHECK((cert.ell - Eigen::Vector2d(1, 0)).norm() <= 1e-9);
  }
  SECTION("non-convex separately convex field still certifies on the cone") {
    auto axes = DirectionCone::axes(2, 3);
    Eigen::VectorXd x0(2);
    x0 << 2, 0;
    auto cert = subgradient_at(fields::l1_minus_min(2, 0.5), axes, x0, opts);
    CHECK(cert.touch_residual <= 1e-9 * (1 + 2.0));
    CHECK(cert.min_slack >= -1e-7);
  }
  SECTION("det-augmented norms at several dyads") {
    ScalarField f = fields::det_augmented_sym2(0.7);
    for (const auto& d : cone.sample_unit(5)) {
      auto cert = subgradient_at(f, cone, (1.7 * d).eval(), opts);
      CHECK(cert.min_slack >= -1e-7);
      CHECK(cert.touch_residual <= 1e-9 * (1 + std::abs(f(1.7 * d))));
    }
  }
  SECTION("x0 = 0 and off-cone points are rejected") {
    CHECK_THROWS_AS(subgradient_at(fields::frobenius(3), cone, Eigen::VectorXd::Zero(3), opts),
                    std::invalid_argument);
    CHECK_THROWS_AS(subgradient_at(fields::frobenius(3), cone, sym2_coords(1, 0, -1), opts),
                    std::invalid_argument);
  }
}

TEST_CASE("monotonicity violations expose non-D-convex inputs") {
  // -|x| is 1-homogeneous but concave; the ladder must blow the whistle
  auto cone = DirectionCone::axes(2, 3);
  ScalarField f = make_field(2, "neg_norm",
                             [](const Eigen::VectorXd& v) { return -v.norm(); }, true);
  Eigen::VectorXd x0(2);
  x0 << 1, 0;
  Subcone g(f, x0);
  bool caught = false;
  try {
    // probe transversal to x0 where -|.| is strictly concave along the ladder
    Eigen::VectorXd y(2);
    y << 0, 1;
    g.eval(y);
  } catch (const MonotonicityError& e) {
    caught = true;
    CHECK(e.s_large > e.s_small);
  }
  CHECK(caught);
}

TEST_CASE("depth-limited envelopes of collapsing integrands refuse certificates") {
  // the lamination relaxation of the c = 0.4 gap integrand is -infinity
  // everywhere (a negative laminate at 0 scales), so no support certificate
  // can exist; a depth-limited grid envelope is moreover not exactly
  // D-convex, and the verification sweep must catch that rather than hand
  // out a certificate
  auto cone = DirectionCone::symmetric_dyad(2, 11);
  EnvelopeOptions eopts;
  eopts.max_sweeps = 2;
  eopts.dirs = 32;
  eopts.reach = 8;
  auto res = envelope(fields::fc_classical(0.4), cone, Box::centered(3, 2.0), 0.125, eopts);
  ScalarField env = res.grid.as_field("fc_envelope_depth2");
  Eigen::VectorXd x0(3);
  x0 << 1, std::sqrt(2.0), 1;  // the (1,1) dyad
  SubgradientOptions opts;
  opts.n_verify = 20000;
  opts.retries = 2;
  bool refused = false;
  try {
    auto cert = subgradient_at(env, cone, x0, opts);
    (void)cert;
  } catch (const CertificateError& e) {
    refused = true;
    CHECK(e.slack < -1e-6);
  } catch (const MonotonicityError&) {
    refused = true;  // the ladder itself may expose the failed D-convexity
  }
  CHECK(refused);
}

TEST_CASE("nonconvexity witnesses") {
  Box region = Box::centered(3, 2.0);
  SECTION("a norm yields no witness") {
    auto w = nonconvexity_witness(fields::frobenius(3), region, 20000, TensorShape{2, 2, 1});
    CHECK_FALSE(w.has_value());
  }
  SECTION("minus det yields a rank-two witness") {
    auto w = nonconvexity_witness(fields::neg_det_sym2(), region, 50000, TensorShape{2, 2, 1});
    REQUIRE(w.has_value());
    CHECK(w->violation > 0);
    // verify the reported violation and the rank of the barycentre
    ScalarField f = fields::neg_det_sym2();
    const double direct =
        f(w->barycentre) - w->lambda * f(w->x) - (1.0 - w->lambda) * f(w->y);
    CHECK(direct == Approx(w->violation).epsilon(1e-12));
    SymTensor mid = SymTensor::from_coords(TensorShape{2, 2, 1}, w->barycentre);
    CHECK_FALSE(rank_one_factor(mid).has_value());
  }
  SECTION("the non-convex suite member is caught off the cone") {
    Box r2 = Box::centered(2, 2.0);
    auto w = nonconvexity_witness(fields::l1_minus_min(2, 0.5), r2, 20000);
    REQUIRE(w.has_value());
    CHECK(w->violation > 0);
  }
}
