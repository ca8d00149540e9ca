#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "semicone/linalg.hpp"
#include "semicone/tensor.hpp"

namespace semicone {

// Balanced spanning cone of directions, represented by a membership test and
// a deterministic unit-sphere sampler (everything downstream consumes only
// samples and membership).  Ambient vectors are isometric tensor
// coordinates, see SymTensor::to_coords.
class DirectionCone {
public:
  enum class Kind { HigherDyad, SymmetricDyad, RankOneMatrix, EpsCone, Custom };

  static DirectionCone symmetric_dyad(int n, std::uint64_t seed = 1) {
    DirectionCone c;
    c.kind_ = Kind::SymmetricDyad;
    c.shape_ = TensorShape{n, 2, 1};
    c.seed_ = seed;
    return c;
  }

  static DirectionCone rank_one_matrix(int n, int N, std::uint64_t seed = 1) {
    DirectionCone c;
    c.kind_ = Kind::RankOneMatrix;
    c.shape_ = TensorShape{n, 1, N};
    c.seed_ = seed;
    return c;
  }

  static DirectionCone higher_dyad(TensorShape shape, std::uint64_t seed = 1) {
    DirectionCone c;
    c.kind_ = Kind::HigherDyad;
    c.shape_ = shape;
    c.seed_ = seed;
    return c;
  }

  // { a (x) b : |a . xi0 b| >= eps0 |a||b| } inside n x n matrices
  static DirectionCone eps_cone(const Eigen::MatrixXd& xi0, double eps0,
                                std::uint64_t seed = 1) {
    DirectionCone c;
    c.kind_ = Kind::EpsCone;
    const int n = static_cast<int>(xi0.rows());
    c.shape_ = TensorShape{n, 1, n};
    c.xi0_ = xi0;
    c.eps0_ = eps0;
    c.seed_ = seed;
    return c;
  }

  // scalar multiples of a finite generator set in R^d
  static DirectionCone custom(std::vector<Eigen::VectorXd> generators, std::uint64_t seed = 1) {
    if (generators.empty()) throw std::invalid_argument("custom cone needs generators");
    DirectionCone c;
    c.kind_ = Kind::Custom;
    c.shape_ = TensorShape{static_cast<int>(generators[0].size()), 1, 1};
    c.generators_ = std::move(generators);
    c.seed_ = seed;
    return c;
  }

  // coordinate axes of R^d
  static DirectionCone axes(int d, std::uint64_t seed = 1) {
    std::vector<Eigen::VectorXd> gen;
    for (int i = 0; i < d; ++i) gen.push_back(Eigen::VectorXd::Unit(d, i));
    auto c = custom(std::move(gen), seed);
    c.kind_name_override_ = "axes";
    return c;
  }

  Kind kind() const { return kind_; }
  const TensorShape& shape() const { return shape_; }
  int ambient_dim() const { return shape_.dim(); }
  std::uint64_t seed() const { return seed_; }
  double eps0() const { return eps0_; }

  std::string kind_name() const {
    if (!kind_name_override_.empty()) return kind_name_override_;
    switch (kind_) {
      case Kind::HigherDyad: return "higher_dyad";
      case Kind::SymmetricDyad: return "symmetric_dyad";
      case Kind::RankOneMatrix: return "rank_one";
      case Kind::EpsCone: return "eps_cone";
      case Kind::Custom: return "custom";
    }
    return "?";
  }

  bool is_dyad_kind() const {
    return kind_ == Kind::HigherDyad || kind_ == Kind::SymmetricDyad ||
           kind_ == Kind::RankOneMatrix || kind_ == Kind::EpsCone;
  }

  // dist(v, cone) <= tol * |v|.  For dyad kinds the distance is read off the
  // singular values of the matrix view; for the eps-cone the factored pair
  // must in addition satisfy the defining inequality.
  bool membership(const Eigen::VectorXd& v, double tol = 1e-9) const {
    const double nv = v.norm();
    if (nv == 0.0) return true;  // balanced cones contain 0 in their closure
    if (is_dyad_kind()) {
      SymTensor t = SymTensor::from_coords(shape_, v);
      Eigen::MatrixXd view = t.matrix_view();
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(view, Eigen::ComputeThinV);
      const auto& sv = svd.singularValues();
      double tail = 0.0;
      for (int i = 1; i < sv.size(); ++i) tail += sv(i) * sv(i);
      if (std::sqrt(tail) > tol * nv) return false;
      if (kind_ == Kind::EpsCone) {
        Eigen::VectorXd nu = svd.matrixV().col(0);
        std::vector<Eigen::VectorXd> args(1, nu);
        Eigen::VectorXd b = t.eval(args);
        const double nb = b.norm();
        if (nb == 0.0) return false;
        return std::abs(b.dot(xi0_ * nu)) / nb + tol >= eps0_;
      }
      return true;
    }
    // custom: colinear with some generator
    for (const auto& g : generators_) {
      Eigen::VectorXd gh = g / g.norm();
      if ((v - v.dot(gh) * gh).norm() <= tol * nv) return true;
    }
    return false;
  }

  // m deterministic unit members; throws if rejection sampling starves
  std::vector<Eigen::VectorXd> sample_unit(int m) const {
    if (m < 1) throw std::invalid_argument("sample_unit: m >= 1 required");
    CounterRng rng(seed_);
    std::vector<Eigen::VectorXd> out;
    out.reserve(m);
    for (int i = 0; i < m; ++i) out.push_back(draw_unit(rng, i));
    return out;
  }

  Eigen::VectorXd draw_unit(CounterRng& rng, int index) const {
    switch (kind_) {
      case Kind::HigherDyad:
      case Kind::SymmetricDyad:
      case Kind::RankOneMatrix: {
        Dyad d;
        d.t = 1.0;
        d.a = rng.on_sphere(shape_.n);
        d.b = rng.on_sphere(shape_.dimY);
        d.k = shape_.k;
        Eigen::VectorXd v = dyad_to_tensor(d).to_coords();
        return v / v.norm();
      }
      case Kind::EpsCone: {
        for (long attempt = 0; attempt < 1000000; ++attempt) {
          Eigen::VectorXd b = rng.on_sphere(shape_.dimY);
          Eigen::VectorXd a = rng.on_sphere(shape_.n);
          if (std::abs(b.dot(xi0_ * a)) >= eps0_) {
            Dyad d{1.0, b, a, 1};
            Eigen::VectorXd v = dyad_to_tensor(d).to_coords();
            return v / v.norm();
          }
        }
        throw std::runtime_error(
            "eps-cone sampler: rejection failed after 1e6 draws (eps0 too close to 1)");
      }
      case Kind::Custom: {
        const auto& g = generators_[index % generators_.size()];
        const double s = rng.uniform() < 0.5 ? -1.0 : 1.0;
        return s * g / g.norm();
      }
    }
    throw std::logic_error("unreachable");
  }

  // Linearly independent cone members of full ambient dimension, chosen
  // greedily by largest orthogonal residual from the sample stream.
  // Throws SpanningError naming the achieved rank on failure.
  struct SpanningError : std::runtime_error {
    int achieved_rank;
    SpanningError(int r, int want)
        : std::runtime_error("spanning_basis: cone samples span only rank " + std::to_string(r) +
                             " of " + std::to_string(want)),
          achieved_rank(r) {}
  };

  std::vector<Eigen::VectorXd> spanning_basis(int budget = 0) const {
    const int d = ambient_dim();
    if (budget <= 0) budget = std::max(60 * d, 600);
    CounterRng rng(seed_ + 0x5eedba11);
    std::vector<Eigen::VectorXd> chosen;     // original members
    std::vector<Eigen::VectorXd> ortho;      // orthonormalized copies
    std::vector<Eigen::VectorXd> pool;
    pool.reserve(budget);
    for (int i = 0; i < budget; ++i) pool.push_back(draw_unit(rng, i));
    while (static_cast<int>(chosen.size()) < d) {
      double best = -1.0;
      int best_i = -1;
      Eigen::VectorXd best_res;
      for (int i = 0; i < static_cast<int>(pool.size()); ++i) {
        Eigen::VectorXd r = pool[i];
        for (const auto& q : ortho) r -= r.dot(q) * q;
        const double rn = r.norm();
        if (rn > best) {
          best = rn;
          best_i = i;
          best_res = r;
        }
      }
      if (best < 1e-8) throw SpanningError(static_cast<int>(chosen.size()), d);
      chosen.push_back(pool[best_i]);
      ortho.push_back(best_res / best);
    }
    // exact rank audit
    Eigen::MatrixXd m(d, d);
    for (int i = 0; i < d; ++i) m.col(i) = chosen[i];
    if (gaussian_rank(m, 1e-10) < d) throw SpanningError(gaussian_rank(m, 1e-10), d);
    return chosen;
  }

  const Eigen::MatrixXd& xi0() const { return xi0_; }
  const std::vector<Eigen::VectorXd>& generators() const { return generators_; }

private:
  Kind kind_ = Kind::SymmetricDyad;
  TensorShape shape_;
  Eigen::MatrixXd xi0_;
  double eps0_ = 0.0;
  std::vector<Eigen::VectorXd> generators_;
  std::uint64_t seed_ = 1;
  std::string kind_name_override_;
};

struct SeparatingFunctional {
  Eigen::VectorXd ell;
  double margin = 0.0;
};

struct SeparatingResult {
  std::optional<SeparatingFunctional> functional;  // set when margin > 0
  std::optional<Eigen::VectorXd> witness;          // unit cone member with ell(d) ~ 0
  double margin = 0.0;
};

namespace detail {

// minimize |f| over the unit sphere along random great circles (deterministic)
inline double sphere_polish(const std::function<double(const Eigen::VectorXd&)>& f,
                            Eigen::VectorXd& x, CounterRng& rng, int restarts = 40,
                            int iters = 60) {
  double fx = std::abs(f(x));
  const int d = static_cast<int>(x.size());
  for (int r = 0; r < restarts; ++r) {
    Eigen::VectorXd dir = rng.on_sphere(d);
    dir -= dir.dot(x) * x;
    if (dir.norm() < 1e-12) continue;
    dir.normalize();
    double lo = -1.5, hi = 1.5;
    auto at = [&](double t) {
      Eigen::VectorXd y = std::cos(t) * x + std::sin(t) * dir;
      return std::abs(f(y));
    };
    // golden section on the circle arc
    const double gr = 0.6180339887498949;
    double a = lo, b = hi, c1 = b - gr * (b - a), c2 = a + gr * (b - a);
    double f1 = at(c1), f2 = at(c2);
    for (int it = 0; it < iters; ++it) {
      if (f1 < f2) {
        b = c2; c2 = c1; f2 = f1; c1 = b - gr * (b - a); f1 = at(c1);
      } else {
        a = c1; c1 = c2; f1 = f2; c2 = a + gr * (b - a); f2 = at(c2);
      }
    }
    const double t = 0.5 * (a + b);
    Eigen::VectorXd y = std::cos(t) * x + std::sin(t) * dir;
    y.normalize();
    const double fy = std::abs(f(y));
    if (fy < fx) {
      x = y;
      fx = fy;
    }
  }
  return fx;
}

}  // namespace detail

// Verifies condition "closure(D) meets ker(ell) only at 0" by sampling: the
// margin is the sampled minimum of |ell(d)| over unit cone members, refined
// by a deterministic local search.  A margin at numerical zero returns the
// witnessing direction instead.  This is a verification of a given ell, not
// a search for one.
inline SeparatingResult verify_separating(const DirectionCone& cone, const Eigen::VectorXd& ell,
                                          int m) {
  if (ell.norm() == 0.0) throw std::invalid_argument("verify_separating: ell = 0");
  SeparatingResult res;

  // analytic zero for dyad cones with dimY >= 2: pick b orthogonal to the
  // ell-contraction at any a with nonzero contraction
  if (cone.is_dyad_kind() && cone.kind() != DirectionCone::Kind::EpsCone &&
      cone.shape().dimY >= 2) {
    SymTensor L = SymTensor::from_coords(cone.shape(), ell);
    CounterRng rng(cone.seed() + 7);
    for (int t = 0; t < 64; ++t) {
      Eigen::VectorXd a = rng.on_sphere(cone.shape().n);
      std::vector<Eigen::VectorXd> args(cone.shape().k, a);
      Eigen::VectorXd w = L.eval(args);
      Eigen::VectorXd b;
      if (w.norm() < 1e-14) {
        b = Eigen::VectorXd::Unit(cone.shape().dimY, 0);
      } else {
        Eigen::VectorXd u = rng.on_sphere(cone.shape().dimY);
        b = u - u.dot(w) * w / w.squaredNorm();
        if (b.norm() < 1e-10) continue;
        b.normalize();
      }
      Dyad dd{1.0, b, a, cone.shape().k};
      Eigen::VectorXd v = dyad_to_tensor(dd).to_coords();
      v.normalize();
      if (std::abs(ell.dot(v)) <= 1e-12) {
        res.margin = 0.0;
        res.witness = v;
        return res;
      }
    }
  }

  auto samples = cone.sample_unit(m);
  double margin = std::numeric_limits<double>::infinity();
  Eigen::VectorXd arg;
  for (const auto& d : samples) {
    const double v = std::abs(ell.dot(d));
    if (v < margin) {
      margin = v;
      arg = d;
    }
  }

  // local refinement within the cone parametrization for scalar dyad cones
  if (cone.is_dyad_kind() && cone.shape().dimY == 1 &&
      cone.kind() != DirectionCone::Kind::EpsCone) {
    SymTensor L = SymTensor::from_coords(cone.shape(), ell);
    CounterRng rng(cone.seed() + 13);
    Eigen::VectorXd a_best = rng.on_sphere(cone.shape().n);
    auto value = [&](const Eigen::VectorXd& a) {
      std::vector<Eigen::VectorXd> args(cone.shape().k, a);
      // |<ell, a^{(x)k}>| for the unit-normalized dyad
      Dyad dd{1.0, Eigen::VectorXd::Ones(1), a, cone.shape().k};
      Eigen::VectorXd v = dyad_to_tensor(dd).to_coords();
      return L.eval(args)[0] / v.norm();
    };
    double best = std::abs(value(a_best));
    for (int s = 0; s < 32; ++s) {
      Eigen::VectorXd a = rng.on_sphere(cone.shape().n);
      const double v = std::abs(value(a));
      if (v < best) {
        best = v;
        a_best = a;
      }
    }
    best = detail::sphere_polish(value, a_best, rng);
    if (best < margin) {
      margin = best;
      Dyad dd{1.0, Eigen::VectorXd::Ones(1), a_best, cone.shape().k};
      arg = dyad_to_tensor(dd).to_coords();
      arg.normalize();
    }
  }

  res.margin = margin;
  if (margin <= 1e-12) {
    res.witness = arg;
  } else {
    res.functional = SeparatingFunctional{ell, margin};
  }
  return res;
}

}  // namespace semicone
