#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace semicone {

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Sorted multi-indices (i1 <= ... <= ik, entries in 0..n-1) in lexicographic
// order, with their orbit sizes (number of distinct permutations).  One table
// per (n, k) is built and shared; n*k stays small so packing into 4-bit
// digits of a u64 is enough for the lookup key.
class MultiIndexTable {
public:
  MultiIndexTable(int n, int k) : n_(n), k_(k) {
    if (n < 1 || k < 0 || n > 15 || k > 15)
      throw std::invalid_argument("MultiIndexTable: unsupported (n,k)");
    std::vector<int> idx(k, 0);
    while (true) {
      indices_.push_back(idx);
      pos_[pack(idx)] = static_cast<int>(indices_.size()) - 1;
      orbits_.push_back(orbit_size(idx));
      // next sorted index in lex order
      int j = k - 1;
      while (j >= 0 && idx[j] == n - 1) --j;
      if (j < 0) break;
      const int v = idx[j] + 1;
      for (int l = j; l < k; ++l) idx[l] = v;
    }
  }

  int n() const { return n_; }
  int k() const { return k_; }
  int size() const { return static_cast<int>(indices_.size()); }
  const std::vector<int>& index(int i) const { return indices_[i]; }
  double orbit(int i) const { return orbits_[i]; }

  // position of an arbitrary (not necessarily sorted) multi-index
  int position(std::vector<int> idx) const {
    std::sort(idx.begin(), idx.end());
    auto it = pos_.find(pack(idx));
    if (it == pos_.end()) throw std::out_of_range("MultiIndexTable: bad index");
    return it->second;
  }

  int position_sorted(const std::vector<int>& idx) const {
    auto it = pos_.find(pack(idx));
    if (it == pos_.end()) throw std::out_of_range("MultiIndexTable: bad index");
    return it->second;
  }

  // exponent form: alpha[j] = multiplicity of j in the multi-index
  std::vector<int> exponents(int i) const {
    std::vector<int> a(n_, 0);
    for (int v : indices_[i]) ++a[v];
    return a;
  }

  int position_of_exponents(const std::vector<int>& alpha) const {
    std::vector<int> idx;
    for (int j = 0; j < static_cast<int>(alpha.size()); ++j)
      for (int c = 0; c < alpha[j]; ++c) idx.push_back(j);
    return position_sorted(idx);
  }

  static std::shared_ptr<const MultiIndexTable> get(int n, int k) {
    static std::mutex mu;
    static std::map<std::pair<int, int>, std::shared_ptr<const MultiIndexTable>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_pair(n, k);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    auto t = std::make_shared<const MultiIndexTable>(n, k);
    cache[key] = t;
    return t;
  }

private:
  static std::uint64_t pack(const std::vector<int>& idx) {
    std::uint64_t key = 0;
    for (int v : idx) key = (key << 4) | static_cast<std::uint64_t>(v + 1);
    return key;
  }

  double orbit_size(const std::vector<int>& idx) const {
    double f = 1.0;
    for (int i = 2; i <= k_; ++i) f *= i;
    int run = 1;
    for (std::size_t i = 1; i <= idx.size(); ++i) {
      if (i < idx.size() && idx[i] == idx[i - 1]) {
        ++run;
      } else {
        for (int r = 2; r <= run; ++r) f /= r;
        run = 1;
      }
    }
    return f;
  }

  int n_, k_;
  std::vector<std::vector<int>> indices_;
  std::vector<double> orbits_;
  std::unordered_map<std::uint64_t, int> pos_;
};

}  // namespace semicone
