#include <catch2/catch.hpp>

#include "oracles.hpp"
#include "semicone/rng.hpp"
#include "semicone/tensor.hpp"

using namespace semicone;

namespace {

SymTensor random_tensor(TensorShape shape, CounterRng& rng) {
  SymTensor t(shape);
  for (int i = 0; i < t.entries(); ++i)
    for (int c = 0; c < shape.dimY; ++c) t.coeffs()(i, c) = rng.normal();
  return t;
}

SymTensor identity_form_2d() {
  SymTensor t(TensorShape{2, 2, 1});
  t.set_coeff({0, 0}, Eigen::VectorXd::Ones(1));
  t.set_coeff({1, 1}, Eigen::VectorXd::Ones(1));
  return t;
}

}  // namespace

TEST_CASE("eval on basis pairs and dyads") {
  SymTensor id = identity_form_2d();
  std::vector<Eigen::VectorXd> args = {Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)};
  CHECK(id.eval(args)[0] == Approx(0.0).margin(1e-15));

  Dyad d{1.0, Eigen::VectorXd::Ones(1), Eigen::Vector2d(1, 1), 2};
  SymTensor mu = dyad_to_tensor(d);
  CHECK(mu.eval(args)[0] == Approx(1.0));
}

TEST_CASE("eval agrees with the full non-symmetric expansion") {
  CounterRng rng(31);
  for (auto [n, k, dimY] : {std::tuple<int, int, int>{2, 2, 1}, {3, 2, 2}, {2, 3, 2}, {3, 3, 1}}) {
    SymTensor t = random_tensor({n, k, dimY}, rng);
    std::vector<Eigen::VectorXd> args;
    for (int j = 0; j < k; ++j) args.push_back(rng.gaussian_vector(n));
    const Eigen::VectorXd a = t.eval(args);
    const Eigen::VectorXd b = oracles::eval_bruteforce(t, args);
    CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, b.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("eval rejects dimension mismatches") {
  SymTensor id = identity_form_2d();
  std::vector<Eigen::VectorXd> bad = {Eigen::Vector3d(1, 0, 0), Eigen::Vector3d(0, 1, 0)};
  CHECK_THROWS_AS(id.eval(bad), std::invalid_argument);
}

TEST_CASE("symmetry of eval under argument permutations") {
  CounterRng rng(77);
  SymTensor t = random_tensor({3, 3, 2}, rng);
  std::vector<Eigen::VectorXd> args;
  for (int j = 0; j < 3; ++j) args.push_back(rng.gaussian_vector(3));
  const Eigen::VectorXd base = t.eval(args);
  std::vector<int> perm = {0, 1, 2};
  std::sort(perm.begin(), perm.end());
  do {
    std::vector<Eigen::VectorXd> p = {args[perm[0]], args[perm[1]], args[perm[2]]};
    CHECK((t.eval(p) - base).cwiseAbs().maxCoeff() <=
          1e-14 * std::max(1.0, base.cwiseAbs().maxCoeff()));
  } while (std::next_permutation(perm.begin(), perm.end()));
}

TEST_CASE("dyad_to_tensor coefficients") {
  SECTION("single axis direction") {
    Dyad d{1.0, Eigen::VectorXd::Ones(1), Eigen::Vector2d(1, 0), 3};
    SymTensor t = dyad_to_tensor(d);
    CHECK(t.coeff({0, 0, 0})[0] == 1.0);
    for (int i = 1; i < t.entries(); ++i) CHECK(t.coeffs().row(i).norm() == 0.0);
  }
  SECTION("expanded products") {
    Dyad d{2.0, Eigen::Vector2d(0, 1), Eigen::Vector2d(1, 1), 2};
    SymTensor t = dyad_to_tensor(d);
    for (auto idx : std::vector<std::vector<int>>{{0, 0}, {0, 1}, {1, 1}}) {
      CHECK(t.coeff(idx)[0] == 0.0);
      CHECK(t.coeff(idx)[1] == 2.0);
    }
  }
  SECTION("zero scale") {
    Dyad d{0.0, Eigen::Vector2d(1, 2), Eigen::Vector2d(3, 4), 2};
    CHECK(dyad_to_tensor(d).norm() == 0.0);
  }
}

TEST_CASE("k-th derivative of the generated polynomial recovers k! mu") {
  SECTION("axis dyad, order 2") {
    Dyad d{1.0, Eigen::VectorXd::Ones(1), Eigen::Vector2d(1, 0), 2};
    CHECK(poly_kth_derivative_check(dyad_to_tensor(d), 1e-3, 1e-6));
  }
  SECTION("random tensors across shapes") {
    CounterRng rng(5150);
    for (int n = 1; n <= 3; ++n)
      for (int k = 1; k <= 3; ++k)
        for (int dimY : {1, 2}) {
          const double tol = k >= 3 ? 1e-4 : 1e-6;
          for (int rep = 0; rep < 100; ++rep) {
            SymTensor t = random_tensor({n, k, dimY}, rng);
            REQUIRE(poly_kth_derivative_check(t, 1e-3, tol, rng.next_u64()));
          }
        }
  }
}

TEST_CASE("inner product") {
  CounterRng rng(99);
  SECTION("orthogonal dyads") {
    Dyad d1{1.0, Eigen::VectorXd::Ones(1), Eigen::Vector2d(1, 0), 2};
    Dyad d2{1.0, Eigen::VectorXd::Ones(1), Eigen::Vector2d(0, 1), 2};
    CHECK(dyad_to_tensor(d1).inner(dyad_to_tensor(d2)) == Approx(0.0).margin(1e-15));
  }
  SECTION("definiteness") {
    SymTensor t = random_tensor({3, 2, 2}, rng);
    CHECK(t.inner(t) > 0.0);
  }
  SECTION("matches the full index-range sum") {
    for (auto [n, k] : {std::pair<int, int>{2, 2}, {3, 2}, {2, 3}}) {
      SymTensor a = random_tensor({n, k, 2}, rng);
      SymTensor b = random_tensor({n, k, 2}, rng);
      CHECK(a.inner(b) == Approx(oracles::inner_bruteforce(a, b)).epsilon(1e-12));
    }
  }
  SECTION("duality with diagonal evaluation") {
    for (int rep = 0; rep < 20; ++rep) {
      SymTensor mu = random_tensor({3, 3, 1}, rng);
      Eigen::VectorXd a = rng.gaussian_vector(3);
      Dyad d{1.0, Eigen::VectorXd::Ones(1), a, 3};
      const double lhs = mu.inner(dyad_to_tensor(d));
      const double rhs = mu.eval_diag(a)[0];
      CHECK(lhs == Approx(rhs).epsilon(1e-12).margin(1e-12));
    }
  }
  SECTION("shape mismatch rejected") {
    SymTensor a(TensorShape{2, 2, 1}), b(TensorShape{2, 2, 2});
    CHECK_THROWS_AS(a.inner(b), std::invalid_argument);
  }
}

TEST_CASE("rank_one_factor") {
  SECTION("dyad with vector amplitude") {
    Dyad d{1.0, Eigen::Vector2d(1, 2), Eigen::Vector2d(0, 1), 2};
    auto f = rank_one_factor(dyad_to_tensor(d));
    REQUIRE(f.has_value());
    CHECK((f->nu - Eigen::Vector2d(0, 1)).norm() <= 1e-12);
    CHECK((f->b - Eigen::Vector2d(1, 2)).norm() <= 1e-12);
  }
  SECTION("identity form has rank two") {
    CHECK_FALSE(rank_one_factor(identity_form_2d()).has_value());
  }
  SECTION("all-ones symmetric matrix") {
    // eigendecomposition oracle: [[1,1],[1,1]] = 2 vv^T, v = (1,1)/sqrt(2)
    SymTensor t(TensorShape{2, 2, 1});
    t.set_coeff({0, 0}, Eigen::VectorXd::Ones(1));
    t.set_coeff({0, 1}, Eigen::VectorXd::Ones(1));
    t.set_coeff({1, 1}, Eigen::VectorXd::Ones(1));
    auto f = rank_one_factor(t);
    REQUIRE(f.has_value());
    CHECK(f->b[0] == Approx(2.0));
    CHECK((f->nu - Eigen::Vector2d(1, 1) / std::sqrt(2.0)).norm() <= 1e-12);
  }
  SECTION("zero input rejected") {
    CHECK_THROWS_AS(rank_one_factor(SymTensor(TensorShape{2, 2, 1})), std::invalid_argument);
  }
  SECTION("round trip over random dyads") {
    CounterRng rng(2718);
    for (int rep = 0; rep < 100; ++rep) {
      const int n = 2 + rng.uniform_int(2);
      const int k = 1 + rng.uniform_int(3);
      const int dimY = 1 + rng.uniform_int(2);
      Dyad d;
      d.t = rng.normal();
      if (std::abs(d.t) < 0.1) d.t = 0.5;
      d.b = rng.gaussian_vector(dimY);
      if (d.b.norm() < 0.1) d.b = Eigen::VectorXd::Ones(dimY);
      d.a = rng.gaussian_vector(n);
      if (d.a.norm() < 0.1) d.a = Eigen::VectorXd::Ones(n);
      d.k = k;
      SymTensor t = dyad_to_tensor(d);
      auto f = rank_one_factor(t);
      REQUIRE(f.has_value());
      // sign convention: first nonzero coordinate of nu positive
      for (int i = 0; i < n; ++i) {
        if (std::abs(f->nu[i]) > 1e-9) {
          CHECK(f->nu[i] > 0.0);
          break;
        }
      }
      CHECK(std::abs(f->nu.norm() - 1.0) <= 1e-12);
      SymTensor rec = dyad_to_tensor(Dyad{1.0, f->b, f->nu, k});
      CHECK((rec - t).norm() <= 1e-10 * t.norm());
      CHECK(std::abs(f->b.norm() - std::abs(d.t) * d.b.norm() * std::pow(d.a.norm(), k)) <=
            1e-10 * t.norm());
    }
  }
}

TEST_CASE("partial application consistency") {
  CounterRng rng(404);
  SymTensor t = random_tensor({3, 3, 2}, rng);
  Eigen::VectorXd x = rng.gaussian_vector(3);
  SymTensor p = t.partial_apply(x, 2);
  std::vector<Eigen::VectorXd> h = {rng.gaussian_vector(3)};
  std::vector<Eigen::VectorXd> full = {h[0], x, x};
  CHECK((p.eval(h) - t.eval(full)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("isometric coordinates") {
  CounterRng rng(808);
  SymTensor t = random_tensor({3, 2, 2}, rng);
  Eigen::VectorXd c = t.to_coords();
  CHECK(c.norm() == Approx(t.norm()).epsilon(1e-13));
  SymTensor back = SymTensor::from_coords(t.shape(), c);
  CHECK((back - t).norm() <= 1e-13 * t.norm());
}
