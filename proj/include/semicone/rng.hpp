#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>

namespace semicone {

// Counter-based generator: stream i of seed s is mix(s, i). No state beyond
// the counter, so identical (seed, counter) pairs give identical draws on any
// run and streams for different seeds are independent.
class CounterRng {
public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = seed_ + (counter_++) * 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // uniform in [0,1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    // Box-Muller; spare value discarded to keep the stream position simple
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  Eigen::VectorXd gaussian_vector(int d) {
    Eigen::VectorXd v(d);
    for (int i = 0; i < d; ++i) v[i] = normal();
    return v;
  }

  // uniform on the unit sphere of R^d
  Eigen::VectorXd on_sphere(int d) {
    Eigen::VectorXd v = gaussian_vector(d);
    double n = v.norm();
    while (n < 1e-12) {
      v = gaussian_vector(d);
      n = v.norm();
    }
    return v / n;
  }

  // uniform in the ball of radius r (rejection-free via radial cdf)
  Eigen::VectorXd in_ball(int d, double r) {
    const double u = uniform();
    return on_sphere(d) * (r * std::pow(u, 1.0 / d));
  }

  int uniform_int(int n) { return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n)); }

  std::uint64_t seed() const { return seed_; }

private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

}  // namespace semicone
