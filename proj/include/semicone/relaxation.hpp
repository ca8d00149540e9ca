#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "semicone/cones.hpp"
#include "semicone/laminate.hpp"
#include "semicone/parallel.hpp"
#include "semicone/scalar_field.hpp"

namespace semicone {

// Scalar samples on a box lattice; -infinity is a first-class value.
class GridFunction {
public:
  Box region;
  double h = 0.1;
  std::vector<int> counts;
  std::vector<double> values;
  bool homogeneous = false;

  static GridFunction from_field(const ScalarField& F, const Box& region, double spacing) {
    GridFunction g;
    g.h = spacing;
    g.homogeneous = F.homogeneous;
    g.region.lo = region.lo;
    g.region.hi = region.hi;
    const int d = region.dim();
    if (d > 12) throw std::invalid_argument("GridFunction: ambient dimension above 12");
    g.counts.resize(d);
    long total = 1;
    for (int i = 0; i < d; ++i) {
      g.counts[i] = std::max(2, static_cast<int>(std::floor((region.hi[i] - region.lo[i]) / spacing + 0.5)) + 1);
      g.region.hi[i] = region.lo[i] + (g.counts[i] - 1) * spacing;
      total *= g.counts[i];
    }
    g.values.resize(total);
    parallel_for(total, [&](long lo, long hi) {
      Eigen::VectorXd x(d);
      for (long f = lo; f < hi; ++f) {
        g.node_coord(f, x);
        g.values[f] = F(x);
      }
    });
    return g;
  }

  int dim() const { return static_cast<int>(counts.size()); }
  long size() const { return static_cast<long>(values.size()); }

  void node_coord(long flat, Eigen::VectorXd& x) const {
    long rem = flat;
    for (int i = 0; i < dim(); ++i) {
      const long ci = rem % counts[i];
      rem /= counts[i];
      x[i] = region.lo[i] + ci * h;
    }
  }

  long flat_index(const std::vector<int>& idx) const {
    long f = 0;
    for (int i = dim() - 1; i >= 0; --i) f = f * counts[i] + idx[i];
    return f;
  }

  // nearest node index of a point (for queries at lattice points)
  long nearest_node(const Eigen::VectorXd& x) const {
    std::vector<int> idx(dim());
    for (int i = 0; i < dim(); ++i) {
      int c = static_cast<int>(std::lround((x[i] - region.lo[i]) / h));
      idx[i] = std::min(counts[i] - 1, std::max(0, c));
    }
    return flat_index(idx);
  }

  bool contains(const Eigen::VectorXd& x, double slack = 1e-9) const {
    return region.contains(x, slack * h);
  }

  // multilinear interpolation; any -infinity corner with positive weight
  // makes the result -infinity
  double interp(const Eigen::VectorXd& x) const {
    const int d = dim();
    int base[12];
    double w[12];
    for (int i = 0; i < d; ++i) {
      double u = (x[i] - region.lo[i]) / h;
      int c = static_cast<int>(std::floor(u));
      c = std::min(counts[i] - 2, std::max(0, c));
      base[i] = c;
      w[i] = std::min(1.0, std::max(0.0, u - c));
    }
    double acc = 0.0;
    bool neg_inf = false;
    for (int corner = 0; corner < (1 << d); ++corner) {
      double weight = 1.0;
      long f = 0;
      for (int i = d - 1; i >= 0; --i) {
        const int bit = (corner >> i) & 1;
        weight *= bit ? w[i] : 1.0 - w[i];
        f = f * counts[i] + (base[i] + bit);
      }
      if (weight == 0.0) continue;
      const double v = values[f];
      if (v == kNegInf) {
        neg_inf = true;
        continue;
      }
      acc += weight * v;
    }
    return neg_inf ? kNegInf : acc;
  }

  // positively 1-homogeneous extension read off the sphere of radius r0
  double homog_eval(const Eigen::VectorXd& x, double r0) const {
    const double nx = x.norm();
    if (nx < 1e-300) return 0.0;
    return interp((r0 / nx) * x) * (nx / r0);
  }

  ScalarField as_field(std::string name = "grid") const {
    auto copy = std::make_shared<GridFunction>(*this);
    ScalarField f;
    f.dim = dim();
    f.name = std::move(name);
    if (homogeneous) {
      double rmin = std::numeric_limits<double>::infinity();
      for (int i = 0; i < dim(); ++i)
        rmin = std::min(rmin, std::min(std::abs(region.lo[i]), std::abs(region.hi[i])));
      const double r0 = 0.5 * rmin;
      f.eval = [copy, r0](const Eigen::VectorXd& x) { return copy->homog_eval(x, r0); };
      f.homogeneous = true;
    } else {
      f.eval = [copy](const Eigen::VectorXd& x) { return copy->interp(x); };
      f.domain_box = region;
    }
    return f;
  }

  // largest second difference along the axes: the multilinear interpolation
  // error bound carried by envelope audits
  double interp_error_bound() const {
    double bound = 0.0;
    const int d = dim();
    std::vector<int> idx(d, 0);
    for (long f = 0; f < size(); ++f) {
      long rem = f;
      for (int i = 0; i < d; ++i) {
        idx[i] = static_cast<int>(rem % counts[i]);
        rem /= counts[i];
      }
      const double v = values[f];
      if (v == kNegInf) continue;
      for (int i = 0; i < d; ++i) {
        if (idx[i] + 1 >= counts[i] || idx[i] == 0) continue;
        long stride = 1;
        for (int q = 0; q < i; ++q) stride *= counts[q];
        const double vp = values[f + stride], vm = values[f - stride];
        if (vp == kNegInf || vm == kNegInf) continue;
        bound = std::max(bound, 0.5 * std::abs(vp + vm - 2.0 * v));
      }
    }
    return bound;
  }
};

// One two-point lamination sweep: each node takes the best convex
// combination lambda F(mu + r1 h d) + (1-lambda) F(mu - r2 h d) over the
// sampled cone directions and lattice step pairs, lambda = r2/(r1+r2).
// Values never increase (the identity split is always a candidate).
inline GridFunction lamination_step(const GridFunction& F,
                                    const std::vector<Eigen::VectorXd>& dirs, int reach) {
  GridFunction out = F;
  const int d = F.dim();
  parallel_for(F.size(), [&](long lo, long hi) {
    Eigen::VectorXd x(d), p(d);
    std::vector<double> plus(reach + 1), minus(reach + 1);
    for (long f = lo; f < hi; ++f) {
      F.node_coord(f, x);
      double best = F.values[f];
      for (const auto& dir : dirs) {
        int rp = 0, rm = 0;
        for (int r = 1; r <= reach; ++r) {
          p = x + (r * F.h) * dir;
          if (!F.contains(p)) break;
          plus[r] = F.interp(p);
          rp = r;
        }
        for (int r = 1; r <= reach; ++r) {
          p = x - (r * F.h) * dir;
          if (!F.contains(p)) break;
          minus[r] = F.interp(p);
          rm = r;
        }
        for (int r1 = 1; r1 <= rp; ++r1)
          for (int r2 = 1; r2 <= rm; ++r2) {
            const double lam = static_cast<double>(r2) / (r1 + r2);
            const double vp = plus[r1], vm = minus[r2];
            const double cand =
                (vp == kNegInf || vm == kNegInf) ? kNegInf : lam * vp + (1.0 - lam) * vm;
            if (cand < best) best = cand;
          }
      }
      out.values[f] = best;
    }
  });
  return out;
}

inline GridFunction lamination_step(const GridFunction& F, const DirectionCone& cone, int dirs,
                                    int reach) {
  return lamination_step(F, cone.sample_unit(dirs), reach);
}

struct LaminateSplit {
  Eigen::VectorXd dir;
  double t_plus = 0, t_minus = 0, lambda = 0.5;
};

struct LaminateTree {
  Eigen::VectorXd point;
  double weight = 1.0;
  double value = 0.0;  // envelope value at the point
  std::optional<LaminateSplit> split;
  std::vector<std::shared_ptr<LaminateTree>> children;

  bool is_leaf() const { return !split.has_value(); }

  int depth() const {
    int d = 0;
    for (const auto& c : children) d = std::max(d, 1 + c->depth());
    return d;
  }

  void leaves(std::vector<std::pair<Eigen::VectorXd, double>>& out) const {
    if (is_leaf()) {
      out.emplace_back(point, weight);
      return;
    }
    for (const auto& c : children) c->leaves(out);
  }

  double leaf_value(const ScalarField& F) const {
    std::vector<std::pair<Eigen::VectorXd, double>> ls;
    leaves(ls);
    double s = 0.0;
    for (const auto& [p, w] : ls) s += w * F(p);
    return s;
  }
};

struct EnvelopeOptions {
  int dirs = 32;
  int reach = 8;
  int max_sweeps = 20;
  double tol = 1e-3;
  double divergence_cut = 0.0;                // 0: use -1/tol
  std::vector<Eigen::VectorXd> extra_dirs;    // appended to the sampled set
};

struct EnvelopeResult {
  GridFunction grid;
  std::vector<double> trace;  // max decrease per sweep
  int sweeps = 0;
  bool diverged = false;
  std::vector<Eigen::VectorXd> dirs;
  double interp_bound = 0.0;
};

// Iterated lamination to a fixed point within tol (or sweep budget).  The
// output is an upper bound for the relaxation: every value is realized by a
// finite laminate of F-values.  Divergence below -1/tol flags the -infinity
// route instead of iterating further.
inline EnvelopeResult envelope(const ScalarField& F, const DirectionCone& cone,
                               const Box& region, double spacing, EnvelopeOptions opts = {}) {
  EnvelopeResult res;
  res.grid = GridFunction::from_field(F, region, spacing);
  res.dirs = cone.sample_unit(opts.dirs);
  for (const auto& d : opts.extra_dirs) {
    if (!cone.membership(d, 1e-7))
      throw std::invalid_argument("envelope: extra direction not in the cone");
    res.dirs.push_back(d / d.norm());
  }
  const double cut = opts.divergence_cut != 0.0 ? opts.divergence_cut : -1.0 / opts.tol;
  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    GridFunction next = lamination_step(res.grid, res.dirs, opts.reach);
    double dec = 0.0;
    bool diverged = false;
    for (long f = 0; f < next.size(); ++f) {
      const double a = res.grid.values[f], b = next.values[f];
      if (b == kNegInf && a != kNegInf) diverged = true;
      else if (a != kNegInf && b != kNegInf) dec = std::max(dec, a - b);
      if (b != kNegInf && b < cut) diverged = true;
    }
    res.grid = std::move(next);
    res.trace.push_back(dec);
    res.sweeps = sweep + 1;
    if (diverged) {
      res.diverged = true;
      break;
    }
    if (dec < opts.tol) break;
  }
  res.interp_bound = res.grid.interp_error_bound();
  return res;
}

// Argmin backtracking on a converged grid: a point is split along the best
// sampled direction whenever the grid proposes a combination strictly below
// the exact field value there, and stays a leaf once its own F-value is
// already optimal.  The resulting tree certifies an upper bound through
// exact leaf evaluations; the grid only proposes.
inline std::shared_ptr<LaminateTree> extract_laminate(const GridFunction& G, const ScalarField& F,
                                                      const std::vector<Eigen::VectorXd>& dirs,
                                                      int reach, const Eigen::VectorXd& point,
                                                      double split_tol, int depth_cap = 10,
                                                      double weight = 1.0) {
  auto node = std::make_shared<LaminateTree>();
  node->point = point;
  node->weight = weight;
  node->value = G.interp(point);
  if (depth_cap <= 0) return node;
  const double here = F(point);
  double best = here - split_tol;
  LaminateSplit bs;
  bool found = false;
  Eigen::VectorXd p(G.dim());
  for (const auto& dir : dirs) {
    for (int r1 = 1; r1 <= reach; ++r1) {
      p = point + (r1 * G.h) * dir;
      if (!G.contains(p)) break;
      const double vp = G.interp(p);
      for (int r2 = 1; r2 <= reach; ++r2) {
        Eigen::VectorXd q = point - (r2 * G.h) * dir;
        if (!G.contains(q)) break;
        const double vm = G.interp(q);
        const double lam = static_cast<double>(r2) / (r1 + r2);
        const double cand =
            (vp == kNegInf || vm == kNegInf) ? kNegInf : lam * vp + (1.0 - lam) * vm;
        if (cand < best) {
          best = cand;
          bs.dir = dir;
          bs.t_plus = r1 * G.h;
          bs.t_minus = r2 * G.h;
          bs.lambda = lam;
          found = true;
        }
      }
    }
  }
  if (!found) return node;
  node->split = bs;
  node->children.push_back(extract_laminate(G, F, dirs, reach, point + bs.t_plus * bs.dir,
                                            split_tol, depth_cap - 1, weight * bs.lambda));
  node->children.push_back(extract_laminate(G, F, dirs, reach, point - bs.t_minus * bs.dir,
                                            split_tol, depth_cap - 1,
                                            weight * (1.0 - bs.lambda)));
  return node;
}

struct NegInfinityVerdict {
  enum class Kind { NegInfinityAtZero, NegInfinityOnComponent, FiniteBoundedBelow, Undetermined };
  Kind kind = Kind::Undetermined;
  int depth = 0;
  double best_value = 0.0;  // most negative laminate value found at the probe
  std::shared_ptr<LaminateTree> witness_tree;
  std::string describe() const {
    switch (kind) {
      case Kind::NegInfinityAtZero: return "relaxation(0) = -infinity";
      case Kind::NegInfinityOnComponent: return "-infinity on the probe's component";
      case Kind::FiniteBoundedBelow: return "finite (bounded below)";
      case Kind::Undetermined:
        return "undetermined at depth " + std::to_string(depth);
    }
    return "?";
  }
};

struct NegInfinityOptions {
  double radius = 2.0;
  double spacing = 0.125;
  int depth = 3;  // sweeps of lamination
  double tol = 1e-6;
  EnvelopeOptions env;
};

// For positively 1-homogeneous F with F(0) = 0: any laminate at 0 with a
// negative value scales to -infinity.  For general F the verdict is per
// connected component of the diverging region, with components taken along
// cone-direction lattice edges.
inline NegInfinityVerdict detect_neg_infinity(const ScalarField& F, const DirectionCone& cone,
                                              const Eigen::VectorXd& probe,
                                              NegInfinityOptions opts = {}) {
  NegInfinityVerdict v;
  v.depth = opts.depth;
  const int d = F.dim;
  EnvelopeOptions eo = opts.env;
  eo.max_sweeps = opts.depth;
  Box region = Box::centered(d, opts.radius);
  if (!F.homogeneous) {
    Eigen::VectorXd shift = probe;
    region.lo += shift;
    region.hi += shift;
  }
  EnvelopeResult env = envelope(F, cone, region, opts.spacing, eo);

  if (F.homogeneous) {
    const long zero = env.grid.nearest_node(Eigen::VectorXd::Zero(d));
    const double v0 = env.grid.values[zero];
    // the grid search only proposes; a negative verdict needs a laminate
    // whose exact leaf values go below zero (interpolation can undershoot
    // on kinked integrands)
    auto tree = extract_laminate(env.grid, F, env.dirs, eo.reach, Eigen::VectorXd::Zero(d),
                                 std::min(opts.tol, 1e-9), opts.depth);
    const double certified = tree->is_leaf() ? F(Eigen::VectorXd::Zero(d)) : tree->leaf_value(F);
    v.best_value = std::min(certified, 0.0);
    if (v0 == kNegInf || certified < -opts.tol) {
      v.kind = NegInfinityVerdict::Kind::NegInfinityAtZero;
      v.witness_tree = tree;
      return v;
    }
    // bounded below certificate: nonnegative on sphere samples
    CounterRng rng(cone.seed() + 5);
    double fmin = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 20000; ++i) fmin = std::min(fmin, F(rng.on_sphere(d)));
    if (fmin >= -1e-12) {
      v.kind = NegInfinityVerdict::Kind::FiniteBoundedBelow;
      return v;
    }
    v.kind = NegInfinityVerdict::Kind::Undetermined;
    return v;
  }

  // general F: union-find over lattice adjacency restricted to cone-direction
  // neighbors, then check the probe's component for divergence
  const double cut = -1.0 / opts.tol;
  const GridFunction& g = env.grid;
  std::vector<long> parent(g.size());
  std::iota(parent.begin(), parent.end(), 0l);
  std::function<long(long)> find = [&](long i) {
    while (parent[i] != i) {
      parent[i] = parent[parent[i]];
      i = parent[i];
    }
    return i;
  };
  auto unite = [&](long a, long b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[a] = b;
  };
  // neighbor offsets with entries in {-1,0,1}; keep those whose direction is
  // (approximately) in the cone
  std::vector<std::vector<int>> offsets;
  std::vector<int> off(d, -1);
  while (true) {
    bool nonzero = false;
    for (int i = 0; i < d; ++i) nonzero |= off[i] != 0;
    if (nonzero) {
      Eigen::VectorXd dir(d);
      for (int i = 0; i < d; ++i) dir[i] = off[i];
      dir.normalize();
      if (cone.membership(dir, 1e-6)) offsets.push_back(off);
    }
    int i = 0;
    while (i < d && off[i] == 1) off[i++] = -1;
    if (i == d) break;
    ++off[i];
  }
  std::vector<int> idx(d);
  for (long f = 0; f < g.size(); ++f) {
    long rem = f;
    for (int i = 0; i < d; ++i) {
      idx[i] = static_cast<int>(rem % g.counts[i]);
      rem /= g.counts[i];
    }
    for (const auto& o : offsets) {
      bool ok = true;
      long f2 = 0;
      for (int i = d - 1; i >= 0; --i) {
        const int c = idx[i] + o[i];
        if (c < 0 || c >= g.counts[i]) {
          ok = false;
          break;
        }
        f2 = f2 * g.counts[i] + c;
      }
      if (ok) unite(f, f2);
    }
  }
  const long pf = find(g.nearest_node(probe));
  bool neg = false;
  double best = std::numeric_limits<double>::infinity();
  for (long f = 0; f < g.size(); ++f) {
    if (find(f) != pf) continue;
    const double val = g.values[f];
    best = std::min(best, val);
    if (val == kNegInf || val < cut) neg = true;
  }
  v.best_value = best;
  v.kind = neg ? NegInfinityVerdict::Kind::NegInfinityOnComponent
               : NegInfinityVerdict::Kind::Undetermined;
  return v;
}

struct UnboundednessWitness {
  double t_star = 0.0;
  double value = 0.0;  // 0.5 (F(mu0 + t d) + F(mu0 - t d)) at t_star
  std::vector<std::pair<double, double>> trace;
};

// Witness that no D-convex positively 1-homogeneous G <= F can have
// G(mu0) >= M: along the D-affine direction d the symmetric two-point
// average of F drops below any bound, while convexity at the rank-one point
// mu0 would force G(mu0) to sit below it.
inline UnboundednessWitness certify_unbounded(
    const ScalarField& F, const TensorShape& shape, const Eigen::VectorXd& mu0,
    const Eigen::VectorXd& d, double M,
    const std::function<bool(const Eigen::VectorXd&)>& cone_membership) {
  if (d.norm() == 0.0) throw std::invalid_argument("certify_unbounded: zero direction");
  SymTensor t0 = SymTensor::from_coords(shape, mu0);
  if (t0.norm() == 0.0 || !rank_one_factor(t0))
    throw std::invalid_argument("certify_unbounded: mu0 must factor as a rank-one form");
  auto value = [&](double t) {
    return 0.5 * (F(mu0 + t * d) + F(mu0 - t * d));
  };
  // membership of mu0 +- t d in the declared open cone, sampled over scales
  for (double t = 1.0 / 1024.0; t <= 1<<20; t *= 4.0)
    if (!cone_membership(mu0 + t * d) || !cone_membership(mu0 - t * d))
      throw std::invalid_argument("certify_unbounded: mu0 +- t d leaves the declared cone");

  UnboundednessWitness w;
  double lo = 0.0, hi = 1.0 / 1024.0;
  while (value(hi) >= M) {
    lo = hi;
    hi *= 2.0;
    w.trace.emplace_back(hi, value(hi));
    if (hi > 1e18) throw std::runtime_error("certify_unbounded: no drop found (is d degenerate?)");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (value(mid) < M) hi = mid;
    else lo = mid;
  }
  w.t_star = hi;
  w.value = value(hi);
  return w;
}

struct RealizedLaminate {
  double energy = 0.0;        // measured integral at the root
  double tree_value = 0.0;    // sum of leaf weights times F(leaf)
  double gap = 0.0;
  bool ok = false;
  double eps = 0.0;
  long cells_xi = 0, cells_eta = 0;
  std::shared_ptr<RealizedLaminate> child_xi, child_eta;
  std::optional<OscillationResult> oscillation;
  int cell_level = 0;
};

namespace detail {

struct CellQualifier {
  const TestMap* tm;
  int level;
  bool xi_side;

  // cell given by integer corner at dyadic level: [y, y + 2^-level]^n
  bool operator()(const std::vector<int>& cell) const {
    const int n = tm->omega.dim();
    const double side = std::pow(2.0, -level);
    // inside the cutoff plateau
    for (int i = 0; i < n; ++i) {
      const double lo = cell[i] * side, hi = lo + side;
      if (lo < tm->cutoff.plateau.lo[i] - 1e-12 || hi > tm->cutoff.plateau.hi[i] + 1e-12)
        return false;
    }
    // the phase range over the cell sits inside one period's stripe
    double tmin = 0.0, tmax = 0.0;
    for (int i = 0; i < n; ++i) {
      const double lo = cell[i] * side, hi = lo + side;
      const double ai = static_cast<double>(tm->j) * tm->a[i];
      tmin += ai * (ai >= 0 ? lo : hi);
      tmax += ai * (ai >= 0 ? hi : lo);
    }
    const double Ilo = xi_side ? tm->profile.I_xi_lo : tm->profile.I_eta_lo;
    const double Ihi = xi_side ? tm->profile.I_xi_hi : tm->profile.I_eta_hi;
    const double z = std::floor(tmin - Ilo);
    for (double zz : {z, z + 1.0}) {
      if (tmin >= zz + Ilo + 1e-9 && tmax <= zz + Ihi - 1e-9) return true;
    }
    return false;
  }
};

}  // namespace detail

// Realize a laminate tree as nested oscillations: the root split is built
// directly; child constructions are planted (rescaled) on the dyadic cells
// contained in the root's two regions, exactly the decomposition used to
// prove the relaxation's directional convexity.  Energies of planted cells
// equal the child's unit-cell energy by change of variables, so each level
// is measured on its own natural grid.
inline std::shared_ptr<RealizedLaminate> realize_laminate(const LaminateTree& tree,
                                                          const ScalarField& F,
                                                          const TensorShape& shape, double eps,
                                                          int grid = 512,
                                                          BuildOscillationOptions build_opts = {}) {
  if (tree.depth() > 4)
    throw std::invalid_argument("realize_laminate: nesting depth above 4 refused at desk scale");
  auto out = std::make_shared<RealizedLaminate>();
  out->eps = eps;
  if (tree.is_leaf()) {
    out->energy = F(tree.point);
    out->tree_value = out->energy;
    out->gap = 0.0;
    out->ok = true;
    return out;
  }

  const int n = shape.n;
  const Box unit = Box::unit(n);
  const Eigen::VectorXd xi_c = tree.children[0]->point;
  const Eigen::VectorXd eta_c = tree.children[1]->point;
  SymTensor xi = SymTensor::from_coords(shape, xi_c);
  SymTensor eta = SymTensor::from_coords(shape, eta_c);
  OscillationResult osc =
      build_oscillation(xi, eta, tree.split->lambda, eps, unit, build_opts);
  const TestMap& tm = osc.map;

  // child realizations on their own unit cells
  out->child_xi = realize_laminate(*tree.children[0], F, shape, eps, grid, build_opts);
  out->child_eta = realize_laminate(*tree.children[1], F, shape, eps, grid, build_opts);

  // dyadic cell level: cells must be narrow against both stripe systems
  const double Imin = std::min(tm.profile.interval_xi(), tm.profile.interval_eta());
  double a1 = 0.0;
  for (int i = 0; i < n; ++i) a1 += std::abs(tm.a[i]);
  int level = 1;
  while (std::pow(2.0, -level) * static_cast<double>(tm.j) * a1 > 0.25 * Imin && level < 24)
    ++level;

  out->cell_level = level;
  detail::CellQualifier q_xi{&tm, level, true};
  detail::CellQualifier q_eta{&tm, level, false};

  // One sweep classifies each node's dyadic cell on the fly: planted cells
  // contribute the child's unit-cell energy per unit measure (change of
  // variables), the complement contributes the root jet directly.  The cell
  // population is never enumerated.
  const double side = std::pow(2.0, -level);
  struct Sums {
    double complement = 0.0;
    long in_xi = 0, in_eta = 0;
  };
  long total_g = 1;
  for (int i = 0; i < n; ++i) total_g *= grid;
  Sums sums = parallel_reduce<Sums>(
      total_g, Sums{},
      [&](long lo, long hi) {
        Sums acc;
        TestMap::Jet jt;
        Eigen::VectorXd x(n), dk(static_cast<long>(xi_c.size()));
        std::vector<int> cell(n);
        for (long f = lo; f < hi; ++f) {
          long rem = f;
          for (int i = 0; i < n; ++i) {
            const long ci = rem % grid;
            rem /= grid;
            // jittered nodes: dyadic frequencies resonate with plain
            // midpoints and would systematically miss the planted cells
            x[i] = (ci + 0.5 + detail::jitter(f * n + i)) / grid;
            cell[i] = static_cast<int>(std::floor(x[i] / side));
          }
          if (q_xi(cell)) {
            ++acc.in_xi;
            continue;
          }
          if (q_eta(cell)) {
            ++acc.in_eta;
            continue;
          }
          tm.jet(x, jt);
          tm.dk_total_coords(jt, dk);
          acc.complement += F(dk);
        }
        return acc;
      },
      [](Sums a, Sums b) {
        a.complement += b.complement;
        a.in_xi += b.in_xi;
        a.in_eta += b.in_eta;
        return a;
      });
  const double node_w = 1.0 / static_cast<double>(total_g);
  const double measure_xi = sums.in_xi * node_w;
  const double measure_eta = sums.in_eta * node_w;
  out->cells_xi = static_cast<long>(std::lround(measure_xi / std::pow(side, n)));
  out->cells_eta = static_cast<long>(std::lround(measure_eta / std::pow(side, n)));

  out->energy = sums.complement * node_w + measure_xi * out->child_xi->energy +
                measure_eta * out->child_eta->energy;

  out->tree_value = tree.leaf_value(F);
  out->gap = std::abs(out->energy - out->tree_value);
  std::vector<std::pair<Eigen::VectorXd, double>> ls;
  tree.leaves(ls);
  double leaf_abs = 0.0;
  for (const auto& [p, w] : ls) leaf_abs += std::abs(F(p));
  out->ok = out->gap <= eps * (1.0 + leaf_abs);
  out->oscillation = std::move(osc);
  return out;
}

}  // namespace semicone
