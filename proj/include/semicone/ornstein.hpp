#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "semicone/dconvexity.hpp"
#include "semicone/relaxation.hpp"

namespace semicone {

// Coefficient family of a k-th order operator A(x,D) phi = sum_{|alpha|=k}
// a_alpha(x) d^alpha phi, with constant or piecewise-constant x-dependence
// on box pieces.
struct OperatorTerm {
  std::vector<int> alpha;  // exponents, |alpha| = k
  Eigen::MatrixXd coef;    // W x V
};

struct OperatorPiece {
  std::optional<Box> box;  // nullopt: everywhere
  std::vector<OperatorTerm> terms;
};

struct OperatorFamily {
  int k = 1, n = 1, dimV = 1, dimW = 1;
  std::vector<OperatorPiece> pieces;  // at least one

  TensorShape jet_shape() const { return TensorShape{n, k, dimV}; }

  void validate() const {
    if (pieces.empty()) throw std::invalid_argument("OperatorFamily: no pieces");
    for (const auto& p : pieces)
      for (const auto& t : p.terms) {
        int total = 0;
        for (int a : t.alpha) total += a;
        if (static_cast<int>(t.alpha.size()) != n || total != k)
          throw std::invalid_argument("OperatorFamily: multi-index of wrong order");
        if (t.coef.rows() != dimW || t.coef.cols() != dimV)
          throw std::invalid_argument("OperatorFamily: coefficient of wrong shape");
      }
  }
};

// simple constructors for scalar (V = R) operators given exponent/weight rows
inline OperatorFamily make_scalar_operator(int k, int n, std::vector<std::vector<int>> alphas,
                                           std::vector<std::vector<double>> rows) {
  OperatorFamily op;
  op.k = k;
  op.n = n;
  op.dimV = 1;
  op.dimW = static_cast<int>(rows[0].size());
  OperatorPiece piece;
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    OperatorTerm t;
    t.alpha = alphas[i];
    t.coef = Eigen::MatrixXd(op.dimW, 1);
    for (int w = 0; w < op.dimW; ++w) t.coef(w, 0) = rows[i][w];
    piece.terms.push_back(std::move(t));
  }
  op.pieces.push_back(std::move(piece));
  return op;
}

// The induced linear map on k-th jets, as a W x dim matrix acting on
// isometric jet coordinates: applying the operator to a map with D^k phi
// constant reads the coefficient at each sorted multi-index once.
struct SymbolMap {
  TensorShape shape;
  int dimW = 1;
  Eigen::MatrixXd mat;

  Eigen::VectorXd apply(const Eigen::VectorXd& jet_coords) const { return mat * jet_coords; }
};

inline SymbolMap assemble_symbol_piece(const OperatorFamily& op, const OperatorPiece& piece) {
  SymbolMap sm;
  sm.shape = op.jet_shape();
  sm.dimW = op.dimW;
  auto table = MultiIndexTable::get(op.n, op.k);
  sm.mat.setZero(op.dimW, sm.shape.dim());
  for (const auto& term : piece.terms) {
    const int pos = table->position_of_exponents(term.alpha);
    const double w = std::sqrt(table->orbit(pos));
    // jet coordinate block `pos` carries sqrt(orbit) * xi[pos]
    sm.mat.block(0, pos * op.dimV, op.dimW, op.dimV) += term.coef / w;
  }
  return sm;
}

inline std::vector<SymbolMap> assemble_symbol(const OperatorFamily& op) {
  op.validate();
  std::vector<SymbolMap> out;
  for (const auto& p : op.pieces) out.push_back(assemble_symbol_piece(op, p));
  return out;
}

// the symbol applied to d^alpha of a polynomial test input, evaluated by
// exact mixed central differences; used as the assembly self-test oracle
inline double symbol_self_test(const OperatorFamily& op, const SymbolMap& sm,
                               const OperatorPiece& piece, int trials = 20,
                               std::uint64_t seed = 97) {
  CounterRng rng(seed);
  const TensorShape shape = op.jet_shape();
  auto table = MultiIndexTable::get(op.n, op.k);
  double kfact = 1.0;
  for (int i = 2; i <= op.k; ++i) kfact *= i;
  double worst = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    SymTensor mu(shape);
    for (int i = 0; i < mu.entries(); ++i)
      for (int c = 0; c < shape.dimY; ++c) mu.coeffs()(i, c) = rng.normal();
    const Eigen::VectorXd x0 = rng.gaussian_vector(op.n);
    // A f with f(x) = mu(x,...,x): finite differences of d^alpha f at x0
    Eigen::VectorXd direct = Eigen::VectorXd::Zero(op.dimW);
    const double step = 1e-2;
    for (const auto& term : piece.terms) {
      std::vector<int> dirs;
      for (int i = 0; i < op.n; ++i)
        for (int c = 0; c < term.alpha[i]; ++c) dirs.push_back(i);
      Eigen::VectorXd fd = Eigen::VectorXd::Zero(shape.dimY);
      for (int mask = 0; mask < (1 << op.k); ++mask) {
        Eigen::VectorXd x = x0;
        double sign = 1.0;
        for (int jj = 0; jj < op.k; ++jj) {
          const double e = (mask >> jj) & 1 ? 1.0 : -1.0;
          sign *= e;
          x[dirs[jj]] += e * step;
        }
        fd += sign * mu.eval_diag(x);
      }
      fd /= std::pow(2.0 * step, op.k);
      direct += term.coef * fd;
    }
    const Eigen::VectorXd via_symbol = sm.apply((kfact * mu).to_coords());
    worst = std::max(worst, (direct - via_symbol).cwiseAbs().maxCoeff() /
                                std::max(1.0, via_symbol.cwiseAbs().maxCoeff()));
  }
  return worst;
}

struct FactorizePiece {
  std::optional<Box> box;
  bool kernel_included = false;
  std::optional<Eigen::MatrixXd> C;
  double norm_C = 0.0;
  double column_residual = 0.0;
  std::optional<Eigen::VectorXd> kernel_witness;  // jet coords with A1 w = 0, A2 w != 0
};

struct FactorizeResult {
  std::vector<FactorizePiece> pieces;
  double threshold = 1e-9;  // relative pseudoinverse / kernel cutoff
  bool factorizable = false;
  double max_norm = 0.0;

  bool holds_with(double c) const { return factorizable && max_norm <= c; }
};

namespace detail {

inline std::optional<Box> intersect(const std::optional<Box>& a, const std::optional<Box>& b) {
  if (!a) return b;
  if (!b) return a;
  Box out;
  out.lo = a->lo.cwiseMax(b->lo);
  out.hi = a->hi.cwiseMin(b->hi);
  for (int i = 0; i < out.dim(); ++i)
    if (!(out.lo[i] < out.hi[i])) return std::nullopt;  // empty interior
  return out;
}

}  // namespace detail

// Pointwise factorization criterion: per piece of a common refinement, the
// inequality ||A2 phi||_1 <= c ||A1 phi||_1 holds iff ker A1 <= ker A2 and
// C = A2 o pinv(A1) has operator norm at most c.  A kernel vector seen by A2
// is returned as the witness otherwise.
inline FactorizeResult factorize(const OperatorFamily& A1, const OperatorFamily& A2,
                                 double rel_threshold = 1e-9) {
  if (A1.k != A2.k || A1.n != A2.n || A1.dimV != A2.dimV)
    throw std::invalid_argument("factorize: operator shapes do not match");
  A1.validate();
  A2.validate();
  FactorizeResult res;
  res.threshold = rel_threshold;
  res.factorizable = true;
  for (const auto& p1 : A1.pieces) {
    for (const auto& p2 : A2.pieces) {
      auto box = detail::intersect(p1.box, p2.box);
      if (p1.box && p2.box && !box) continue;  // disjoint pieces
      FactorizePiece piece;
      piece.box = box;
      const SymbolMap s1 = assemble_symbol_piece(A1, p1);
      const SymbolMap s2 = assemble_symbol_piece(A2, p2);
      auto kernel = nullspace(s1.mat, rel_threshold);
      const double a2norm = operator_norm(s2.mat);
      piece.kernel_included = true;
      double worst = 0.0;
      Eigen::VectorXd worst_vec;
      for (const auto& kvec : kernel) {
        const double v = (s2.mat * kvec).norm();
        if (v > worst) {
          worst = v;
          worst_vec = kvec;
        }
      }
      if (worst > rel_threshold * std::max(a2norm, 1e-300)) {
        piece.kernel_included = false;
        piece.kernel_witness = worst_vec;
        res.factorizable = false;
      } else {
        const Eigen::MatrixXd C = s2.mat * pseudoinverse(s1.mat, rel_threshold);
        double resid = 0.0;
        // per multi-index coefficient check a2_alpha = C a1_alpha
        resid = (C * s1.mat - s2.mat).cwiseAbs().maxCoeff();
        piece.C = C;
        piece.norm_C = operator_norm(C);
        piece.column_residual = resid;
        if (resid > 1e-9 * std::max(1.0, a2norm)) res.factorizable = false;
        res.max_norm = std::max(res.max_norm, piece.norm_C);
      }
      res.pieces.push_back(std::move(piece));
    }
  }
  return res;
}

enum class WNorm { Euclidean, SumAbs };

inline double wnorm(const Eigen::VectorXd& v, WNorm kind) {
  return kind == WNorm::Euclidean ? v.norm() : v.cwiseAbs().sum();
}

// F_c(xi) = c ||A1 xi|| - ||A2 xi|| on jet coordinates; |t|-homogeneous
inline ScalarField operator_gap_field(const SymbolMap& s1, const SymbolMap& s2, double c,
                                      WNorm kind = WNorm::SumAbs) {
  ScalarField f;
  f.dim = s1.shape.dim();
  f.name = "F_c";
  f.homogeneous = true;
  Eigen::MatrixXd m1 = s1.mat, m2 = s2.mat;
  f.eval = [m1, m2, c, kind](const Eigen::VectorXd& x) {
    return c * wnorm(m1 * x, kind) - wnorm(m2 * x, kind);
  };
  return f;
}

struct PointwisePieceVerdict {
  bool nonnegative = false;
  double min_value = 0.0;
  Eigen::VectorXd minimizer;
};

struct PointwiseVerdict {
  std::vector<PointwisePieceVerdict> pieces;
  bool nonnegative = true;  // conjunction over pieces
};

namespace detail {

// minimize a (signed) function over the unit sphere by seeded multistart
// great-circle golden-section descent
inline std::pair<double, Eigen::VectorXd> sphere_minimize(
    const std::function<double(const Eigen::VectorXd&)>& f, int dim, int starts,
    std::uint64_t seed) {
  CounterRng rng(seed);
  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_x;
  for (int s = 0; s < starts; ++s) {
    Eigen::VectorXd x = rng.on_sphere(dim);
    double fx = f(x);
    for (int round = 0; round < 24; ++round) {
      Eigen::VectorXd dir = rng.on_sphere(dim);
      dir -= dir.dot(x) * x;
      if (dir.norm() < 1e-12) continue;
      dir.normalize();
      const double gr = 0.6180339887498949;
      double a = -1.2, b = 1.2;
      double c1 = b - gr * (b - a), c2 = a + gr * (b - a);
      auto at = [&](double t) {
        Eigen::VectorXd y = std::cos(t) * x + std::sin(t) * dir;
        return f(y);
      };
      double f1 = at(c1), f2 = at(c2);
      for (int it = 0; it < 40; ++it) {
        if (f1 < f2) {
          b = c2; c2 = c1; f2 = f1; c1 = b - gr * (b - a); f1 = at(c1);
        } else {
          a = c1; c1 = c2; f1 = f2; c2 = a + gr * (b - a); f2 = at(c2);
        }
      }
      const double t = 0.5 * (a + b);
      Eigen::VectorXd y = (std::cos(t) * x + std::sin(t) * dir).normalized();
      const double fy = f(y);
      if (fy < fx) {
        x = y;
        fx = fy;
      }
    }
    if (fx < best) {
      best = fx;
      best_x = x;
    }
  }
  return {best, best_x};
}

}  // namespace detail

// Thm-style pointwise audit: the integral bound holds iff every piece's
// integrand is nonnegative; each piece is minimized over the unit jet
// sphere by multistart descent.
inline PointwiseVerdict pointwise_criterion(const std::vector<ScalarField>& piece_fields,
                                            int starts = 200, std::uint64_t seed = 1729) {
  PointwiseVerdict verdict;
  CounterRng rng(seed);
  for (const auto& F : piece_fields) {
    // |t|-homogeneity audit on samples
    for (int i = 0; i < 16; ++i) {
      Eigen::VectorXd x = rng.on_sphere(F.dim);
      const double fx = F(x);
      for (double t : {-2.0, -1.0, 0.5}) {
        if (std::abs(F(t * x) - std::abs(t) * fx) > 1e-9 * std::max(1.0, std::abs(fx)))
          throw std::invalid_argument("pointwise_criterion: field is not |t|-homogeneous");
      }
    }
    auto [minv, minx] = detail::sphere_minimize(
        [&F](const Eigen::VectorXd& x) { return F(x); }, F.dim, starts, seed + 13);
    PointwisePieceVerdict pv;
    pv.min_value = minv;
    pv.minimizer = minx;
    pv.nonnegative = minv >= -1e-9;
    verdict.nonnegative = verdict.nonnegative && pv.nonnegative;
    verdict.pieces.push_back(std::move(pv));
  }
  return verdict;
}

struct RatioMeasurement {
  double numerator = 0.0;    // integral of ||A2 D^k phi||
  double denominator = 0.0;  // integral of ||A1 D^k phi||
  double ratio = 0.0;
  int grid = 0;
};

// L1 mass ratio of the two operators on a realized test map; numerator and
// denominator share one quadrature grid so correlated errors cancel.
inline RatioMeasurement measure_l1_ratio(const TestMap& tm, const SymbolMap& s1,
                                         const SymbolMap& s2, int grid,
                                         WNorm kind = WNorm::SumAbs) {
  RatioMeasurement m;
  m.grid = grid;
  const int n = tm.omega.dim();
  long total = 1;
  for (int i = 0; i < n; ++i) total *= grid;
  using Pair = std::pair<double, double>;
  Pair sums = parallel_reduce<Pair>(
      total, Pair{0.0, 0.0},
      [&](long lo, long hi) {
        Pair acc{0.0, 0.0};
        TestMap::Jet jt;
        Eigen::VectorXd x(n), dk(tm.base_coords().size());
        for (long f = lo; f < hi; ++f) {
          long rem = f;
          for (int i = 0; i < n; ++i) {
            const long ci = rem % grid;
            rem /= grid;
            x[i] = tm.omega.lo[i] + (tm.omega.hi[i] - tm.omega.lo[i]) * (ci + 0.5) / grid;
          }
          tm.jet(x, jt);
          tm.dk_total_coords(jt, dk);
          acc.first += wnorm(s2.apply(dk), kind);
          acc.second += wnorm(s1.apply(dk), kind);
        }
        return acc;
      },
      [](Pair a, Pair b) {
        return Pair{a.first + b.first, a.second + b.second};
      });
  const double cell = tm.omega.volume() / static_cast<double>(total);
  m.numerator = sums.first * cell;
  m.denominator = sums.second * cell;
  m.ratio = m.denominator > 0 ? m.numerator / m.denominator : 0.0;
  return m;
}

struct BlowupResult {
  bool found = false;
  std::string verdict;
  double envelope_at_zero = 0.0;
  int depth = 0;
  std::shared_ptr<LaminateTree> tree;
  std::optional<OscillationResult> oscillation;
  std::vector<RatioMeasurement> ratios;  // root map and rescaled copies
  double best_ratio = 0.0;
};

struct BlowupOptions {
  double region_radius = 2.0;
  double spacing = 0.125;
  EnvelopeOptions env;
  int measure_grid = 1024;
  double eps = 0.05;
  int rescale_levels = 2;
  double tol = 1e-6;
};

// Synthesize maps violating ||A2 phi||_1 <= c ||A1 phi||_1: laminate search
// on F_c at the origin, realized as an oscillating test map whose measured
// mass ratio exceeds c.  A fruitless depth-limited search is reported as
// undetermined, not asserted.
inline BlowupResult blowup_sequence(const OperatorFamily& A1, const OperatorFamily& A2, double c,
                                    int depth, BlowupOptions opts = {}) {
  FactorizeResult fr = factorize(A1, A2);
  if (fr.holds_with(c))
    throw std::invalid_argument(
        "blowup_sequence: the inequality provably holds at this constant; no blow-up exists");
  if (A1.pieces.size() != 1 || A2.pieces.size() != 1)
    throw std::invalid_argument("blowup_sequence: constant-coefficient operators expected here");
  const SymbolMap s1 = assemble_symbol(A1)[0];
  const SymbolMap s2 = assemble_symbol(A2)[0];
  const ScalarField F = operator_gap_field(s1, s2, c, WNorm::SumAbs);
  const TensorShape shape = A1.jet_shape();
  DirectionCone cone = DirectionCone::higher_dyad(shape, 11);

  BlowupResult out;
  out.depth = depth;
  EnvelopeOptions eo = opts.env;
  eo.max_sweeps = depth;
  EnvelopeResult env = envelope(F, cone, Box::centered(shape.dim(), opts.region_radius),
                                opts.spacing, eo);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(shape.dim());
  out.envelope_at_zero = env.grid.values[env.grid.nearest_node(zero)];
  // certify the proposed laminate with exact field values before claiming
  // anything: grid interpolation undershoots on kinked integrands
  std::shared_ptr<LaminateTree> tree;
  double certified = 0.0;
  if (out.envelope_at_zero < -opts.tol) {
    tree = extract_laminate(env.grid, F, env.dirs, eo.reach, zero, 1e-9, std::min(depth, 4));
    certified = tree->is_leaf() ? 0.0 : tree->leaf_value(F);
  }
  if (!(certified < -opts.tol)) {
    out.verdict = "undetermined at depth " + std::to_string(depth);
    out.best_ratio = 0.0;
    return out;
  }
  out.found = true;
  out.tree = tree;

  // the gap field is |t|-homogeneous, so the laminate can be rescaled to a
  // unit amplitude without changing the mass ratio
  {
    double tmax = 0.0;
    std::vector<std::pair<Eigen::VectorXd, double>> ls;
    tree->leaves(ls);
    for (const auto& [pnt, w] : ls) tmax = std::max(tmax, pnt.norm());
    const double scale = 0.5 / std::max(tmax, 1e-12);
    std::function<void(LaminateTree&)> rescale = [&](LaminateTree& node) {
      node.point *= scale;
      if (node.split) {
        node.split->t_plus *= scale;
        node.split->t_minus *= scale;
      }
      for (auto& ch : node.children) rescale(*ch);
    };
    rescale(*tree);
  }

  ScalarField mass1 = make_field(shape.dim(), "A1_mass",
                                 [s1](const Eigen::VectorXd& x) {
                                   return wnorm(s1.apply(x), WNorm::SumAbs);
                                 },
                                 true);
  ScalarField mass2 = make_field(shape.dim(), "A2_mass",
                                 [s2](const Eigen::VectorXd& x) {
                                   return wnorm(s2.apply(x), WNorm::SumAbs);
                                 },
                                 true);
  BuildOscillationOptions bo;
  bo.verify_grid = 256;

  if (tree->depth() == 1) {
    const auto& split = *tree->split;
    SymTensor xi = SymTensor::from_coords(shape, (split.t_plus * split.dir).eval());
    SymTensor eta = SymTensor::from_coords(shape, (-split.t_minus * split.dir).eval());
    OscillationResult osc =
        build_oscillation(xi, eta, split.lambda, opts.eps, Box::unit(shape.n), bo);
    out.ratios.push_back(measure_l1_ratio(osc.map, s1, s2, opts.measure_grid, WNorm::SumAbs));
    for (int lvl = 1; lvl <= opts.rescale_levels; ++lvl) {
      // rescaled periodic copies have identical mass ratios; re-measure on a
      // commensurate grid as an audit
      auto [rm, rep] = rescale_periodic(osc.map, lvl, 0.5, opts.eps, 64, 33 + lvl);
      (void)rep;
      RatioMeasurement mm;
      mm.grid = opts.measure_grid;
      long total = 1;
      for (int i = 0; i < shape.n; ++i) total *= mm.grid;
      using Pair = std::pair<double, double>;
      Pair sums = parallel_reduce<Pair>(
          total, Pair{0.0, 0.0},
          [&](long lo, long hi) {
            Pair acc{0.0, 0.0};
            Eigen::VectorXd x(shape.n);
            for (long f = lo; f < hi; ++f) {
              long rem = f;
              for (int i = 0; i < shape.n; ++i) {
                const long ci = rem % mm.grid;
                rem /= mm.grid;
                x[i] = (ci + 0.5) / mm.grid;
              }
              const Eigen::VectorXd dk = rm.dphi(x, rm.base().k()).to_coords();
              acc.first += wnorm(s2.apply(dk), WNorm::SumAbs);
              acc.second += wnorm(s1.apply(dk), WNorm::SumAbs);
            }
            return acc;
          },
          [](Pair a, Pair b) {
            return Pair{a.first + b.first, a.second + b.second};
          });
      mm.numerator = sums.first / static_cast<double>(total);
      mm.denominator = sums.second / static_cast<double>(total);
      mm.ratio = mm.denominator > 0 ? mm.numerator / mm.denominator : 0.0;
      out.ratios.push_back(mm);
    }
    out.oscillation = std::move(osc);
  } else {
    // nested laminates: realize once per operator mass; both runs rebuild
    // the same deterministic oscillations, so the ratio is measured on one
    // and the same map
    auto r1 = realize_laminate(*tree, mass1, shape, opts.eps, opts.measure_grid, bo);
    auto r2 = realize_laminate(*tree, mass2, shape, opts.eps, opts.measure_grid, bo);
    RatioMeasurement mm;
    mm.grid = opts.measure_grid;
    mm.numerator = r2->energy;
    mm.denominator = r1->energy;
    mm.ratio = mm.denominator > 0 ? mm.numerator / mm.denominator : 0.0;
    out.ratios.push_back(mm);
  }
  double best = 0.0;
  for (const auto& r : out.ratios) best = std::max(best, r.ratio);
  out.best_ratio = best;
  out.verdict = "blow-up found: measured ratio " + std::to_string(out.best_ratio) +
                " at constant " + std::to_string(c);
  return out;
}

}  // namespace semicone
