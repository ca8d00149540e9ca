#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "semicone/linalg.hpp"
#include "semicone/multiindex.hpp"
#include "semicone/rng.hpp"

namespace semicone {

struct TensorShape {
  int n = 1;     // base dimension
  int k = 1;     // order
  int dimY = 1;  // target dimension

  int dim() const { return dimY * static_cast<int>(binomial(n + k - 1, k)); }
  bool operator==(const TensorShape& o) const { return n == o.n && k == o.k && dimY == o.dimY; }
};

// t * b (x) a^{(x)k}: evaluates on (h1..hk) to t * b * prod <a, h_i>.
struct Dyad {
  double t = 1.0;
  Eigen::VectorXd b;  // in R^dimY
  Eigen::VectorXd a;  // in R^n
  int k = 1;
};

// Y-valued symmetric k-linear map on R^n, stored by sorted multi-index.
// Symmetry is structural: a full index is looked up through its sorted form,
// so permutation invariance of eval() is exact.  The inner product weights
// each sorted index by its orbit size and therefore agrees with the full
// (unsorted) index-range sum.
class SymTensor {
public:
  SymTensor() : shape_{1, 1, 1}, table_(MultiIndexTable::get(1, 1)) {
    coeffs_.setZero(table_->size(), 1);
  }

  explicit SymTensor(TensorShape shape)
      : shape_(shape), table_(MultiIndexTable::get(shape.n, shape.k)) {
    coeffs_.setZero(table_->size(), shape.dimY);
  }

  const TensorShape& shape() const { return shape_; }
  const MultiIndexTable& table() const { return *table_; }
  int entries() const { return table_->size(); }

  Eigen::MatrixXd& coeffs() { return coeffs_; }
  const Eigen::MatrixXd& coeffs() const { return coeffs_; }

  // coefficient at an arbitrary (unsorted) full multi-index, 0-based entries
  Eigen::VectorXd coeff(const std::vector<int>& idx) const {
    return coeffs_.row(table_->position(idx)).transpose();
  }
  void set_coeff(const std::vector<int>& idx, const Eigen::VectorXd& v) {
    coeffs_.row(table_->position(idx)) = v.transpose();
  }

  // Multilinear evaluation on k vectors from R^n.  Sums over sorted indices
  // and their distinct permutations; the brute-force full expansion over all
  // n^k tuples is used as the independent oracle in tests.
  Eigen::VectorXd eval(const std::vector<Eigen::VectorXd>& args) const {
    if (static_cast<int>(args.size()) != shape_.k)
      throw std::invalid_argument("SymTensor::eval: wrong number of arguments");
    for (const auto& a : args)
      if (a.size() != shape_.n) throw std::invalid_argument("SymTensor::eval: bad arg length");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(shape_.dimY);
    std::vector<int> idx;
    for (int i = 0; i < entries(); ++i) {
      idx = table_->index(i);
      double sym = 0.0;
      do {
        double p = 1.0;
        for (int j = 0; j < shape_.k; ++j) p *= args[j][idx[j]];
        sym += p;
      } while (std::next_permutation(idx.begin(), idx.end()));
      out += sym * coeffs_.row(i).transpose();
    }
    return out;
  }

  // eval with all k arguments equal
  Eigen::VectorXd eval_diag(const Eigen::VectorXd& x) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(shape_.dimY);
    for (int i = 0; i < entries(); ++i) {
      double p = table_->orbit(i);
      for (int v : table_->index(i)) p *= x[v];
      out += p * coeffs_.row(i).transpose();
    }
    return out;
  }

  // Partial application with `times` copies of x: a symmetric (k-times)-linear map.
  SymTensor partial_apply(const Eigen::VectorXd& x, int times) const {
    if (times < 0 || times > shape_.k) throw std::invalid_argument("partial_apply: bad order");
    SymTensor out(TensorShape{shape_.n, shape_.k - times, shape_.dimY});
    const auto& ot = out.table();
    std::vector<int> full(shape_.k);
    for (int i = 0; i < ot.size(); ++i) {
      const auto& head = ot.index(i);
      // sum over the x-filled tail with multiplicity
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(shape_.dimY);
      auto tail_table = MultiIndexTable::get(shape_.n, times);
      for (int t = 0; t < tail_table->size(); ++t) {
        double p = tail_table->orbit(t);
        for (int v : tail_table->index(t)) p *= x[v];
        std::copy(head.begin(), head.end(), full.begin());
        std::copy(tail_table->index(t).begin(), tail_table->index(t).end(),
                  full.begin() + head.size());
        acc += p * coeffs_.row(table_->position(full)).transpose();
      }
      out.coeffs_.row(i) = acc.transpose();
    }
    return out;
  }

  // canonical scalar product (full index range, via orbit weights)
  double inner(const SymTensor& other) const {
    if (!(shape_ == other.shape_)) throw std::invalid_argument("SymTensor::inner: shape mismatch");
    double s = 0.0;
    for (int i = 0; i < entries(); ++i)
      s += table_->orbit(i) * coeffs_.row(i).dot(other.coeffs_.row(i));
    return s;
  }

  double norm() const { return std::sqrt(inner(*this)); }

  SymTensor& operator+=(const SymTensor& o) {
    coeffs_ += o.coeffs_;
    return *this;
  }
  SymTensor& operator-=(const SymTensor& o) {
    coeffs_ -= o.coeffs_;
    return *this;
  }
  SymTensor& operator*=(double t) {
    coeffs_ *= t;
    return *this;
  }
  friend SymTensor operator+(SymTensor a, const SymTensor& b) { return a += b; }
  friend SymTensor operator-(SymTensor a, const SymTensor& b) { return a -= b; }
  friend SymTensor operator*(double t, SymTensor a) { return a *= t; }

  // Isometric coordinates: entry (i, c) scaled by sqrt(orbit_i), flattened
  // index-major, so the Euclidean norm of the coordinate vector equals the
  // tensor norm.  All cone and grid code works in these coordinates.
  Eigen::VectorXd to_coords() const {
    Eigen::VectorXd v(entries() * shape_.dimY);
    for (int i = 0; i < entries(); ++i) {
      const double w = std::sqrt(table_->orbit(i));
      for (int c = 0; c < shape_.dimY; ++c) v[i * shape_.dimY + c] = w * coeffs_(i, c);
    }
    return v;
  }

  static SymTensor from_coords(const TensorShape& shape, const Eigen::VectorXd& v) {
    SymTensor t(shape);
    if (v.size() != t.entries() * shape.dimY)
      throw std::invalid_argument("SymTensor::from_coords: bad length");
    for (int i = 0; i < t.entries(); ++i) {
      const double w = std::sqrt(t.table_->orbit(i));
      for (int c = 0; c < shape.dimY; ++c) t.coeffs_(i, c) = v[i * shape.dimY + c] / w;
    }
    return t;
  }

  // Matrix of the map R^n -> (k-1)-linear maps, x |-> T(x, .,...,.), with
  // rows scaled so the matrix Frobenius norm equals the tensor norm.
  Eigen::MatrixXd matrix_view() const {
    if (shape_.k < 1) throw std::logic_error("matrix_view needs k >= 1");
    auto sub = MultiIndexTable::get(shape_.n, shape_.k - 1);
    Eigen::MatrixXd m(sub->size() * shape_.dimY, shape_.n);
    std::vector<int> full(shape_.k);
    for (int r = 0; r < sub->size(); ++r) {
      const double w = std::sqrt(sub->orbit(r));
      for (int i = 0; i < shape_.n; ++i) {
        std::copy(sub->index(r).begin(), sub->index(r).end(), full.begin());
        full[shape_.k - 1] = i;
        const auto row = coeffs_.row(table_->position(full));
        for (int c = 0; c < shape_.dimY; ++c) m(r * shape_.dimY + c, i) = w * row[c];
      }
    }
    return m;
  }

private:
  TensorShape shape_;
  std::shared_ptr<const MultiIndexTable> table_;
  Eigen::MatrixXd coeffs_;  // entries x dimY
};

inline SymTensor dyad_to_tensor(const Dyad& d) {
  const int n = static_cast<int>(d.a.size());
  const int dimY = static_cast<int>(d.b.size());
  SymTensor t(TensorShape{n, d.k, dimY});
  for (int i = 0; i < t.entries(); ++i) {
    double p = d.t;
    for (int v : t.table().index(i)) p *= d.a[v];
    t.coeffs().row(i) = p * d.b.transpose();
  }
  return t;
}

struct RankOneFactor {
  Eigen::VectorXd b;   // in R^dimY
  Eigen::VectorXd nu;  // unit vector in R^n, first nonzero coordinate positive
};

// Factor delta = b (x) nu^{(x)k} when delta, viewed as a linear map
// R^n -> (k-1)-linear maps, has rank <= 1.  Singular values below
// rel_tol * sigma_max count as zero.
inline std::optional<RankOneFactor> rank_one_factor(const SymTensor& delta,
                                                    double rel_tol = 1e-9) {
  const double nrm = delta.norm();
  if (nrm == 0.0) throw std::invalid_argument("rank_one_factor: zero input");
  Eigen::MatrixXd view = delta.matrix_view();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(view, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  for (int i = 1; i < sv.size(); ++i)
    if (sv(i) > rel_tol * sv(0)) return std::nullopt;
  Eigen::VectorXd nu = svd.matrixV().col(0);
  for (int i = 0; i < nu.size(); ++i) {
    if (std::abs(nu[i]) > 1e-12) {
      if (nu[i] < 0) nu = -nu;
      break;
    }
  }
  RankOneFactor f;
  f.nu = nu;
  std::vector<Eigen::VectorXd> args(delta.shape().k, nu);
  f.b = delta.eval(args);
  return f;
}

// Self-test of storage and evaluation: the k-th finite difference of
// x |-> mu(x,...,x) must recover k! mu.  Mixed central differences are exact
// for degree-k polynomials up to roundoff.
inline bool poly_kth_derivative_check(const SymTensor& mu, double step = 1e-3,
                                      double rel_tol = 1e-6, std::uint64_t seed = 42) {
  const int k = mu.shape().k;
  const int n = mu.shape().n;
  CounterRng rng(seed);
  const Eigen::VectorXd x0 = rng.gaussian_vector(n);
  double kfact = 1.0;
  for (int i = 2; i <= k; ++i) kfact *= i;
  double scale = std::max(1.0, kfact * mu.coeffs().cwiseAbs().maxCoeff());
  for (int i = 0; i < mu.entries(); ++i) {
    const auto& idx = mu.table().index(i);
    Eigen::VectorXd fd = Eigen::VectorXd::Zero(mu.shape().dimY);
    for (int mask = 0; mask < (1 << k); ++mask) {
      Eigen::VectorXd x = x0;
      double sign = 1.0;
      for (int j = 0; j < k; ++j) {
        const double e = (mask >> j) & 1 ? 1.0 : -1.0;
        sign *= e;
        x[idx[j]] += e * step;
      }
      fd += sign * mu.eval_diag(x);
    }
    fd /= std::pow(2.0 * step, k);
    const Eigen::VectorXd expect = kfact * mu.coeff(idx);
    if ((fd - expect).cwiseAbs().maxCoeff() > rel_tol * scale) return false;
  }
  return true;
}

}  // namespace semicone
