#ifndef GLOP_SHPP_SOLVERS_HPP
#define GLOP_SHPP_SOLVERS_HPP

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "glop/core.hpp"
#include "glop/rng.hpp"
#include "glop/shpp.hpp"

namespace glop {

// A reviser maps a batch of equal-size SHPP tasks to one proposed path
// each, endpoints fixed. `uses_augmentation` is false for solvers whose
// output is invariant under the coordinate transform (exact oracles, local
// search on raw coords); the revision engine then skips the 4x variants.
class Reviser {
 public:
  virtual ~Reviser() = default;
  virtual std::string name() const = 0;
  virtual int max_size() const = 0;  // 0 = unbounded
  virtual bool supports_asymmetric() const { return false; }
  virtual bool uses_augmentation() const { return false; }
  // Proposes a path for one task. May read raw or transformed coords.
  virtual PathOrder propose(const ShppTask& task) = 0;
};

namespace detail {
// Pairwise distances of a task (raw Euclidean, or the parent's matrix).
inline std::vector<double> task_distances(const ShppTask& task) {
  const int n = task.size();
  std::vector<double> d(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      d[static_cast<std::size_t>(i) * n + j] = task.dist(i, j);
  return d;
}
}  // namespace detail

// Exhaustive search over all (n-2)! interior orderings. Test oracle;
// lexicographically smallest path among ties.
inline PathOrder brute_force_shpp(const ShppTask& task) {
  const int n = task.size();
  if (n < 2) throw ValidationError("brute_force_shpp: need n >= 2");
  if (n > 9) throw ValidationError("brute_force_shpp: n > 9 rejected");
  auto d = detail::task_distances(task);
  auto dist = [&](int i, int j) { return d[static_cast<std::size_t>(i) * n + j]; };

  std::vector<int> interior(std::max(0, n - 2));
  std::iota(interior.begin(), interior.end(), 1);
  std::vector<int> best_interior = interior;
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> perm = interior;  // ascending start = lexicographic enumeration
  do {
    double len = perm.empty() ? dist(0, n - 1) : dist(0, perm.front());
    for (std::size_t i = 0; i + 1 < perm.size(); ++i) len += dist(perm[i], perm[i + 1]);
    if (!perm.empty()) len += dist(perm.back(), n - 1);
    if (len < best) {  // strict: first-found among exact ties is lexicographic min
      best = len;
      best_interior = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  PathOrder path;
  path.order.reserve(n);
  path.order.push_back(0);
  path.order.insert(path.order.end(), best_interior.begin(), best_interior.end());
  path.order.push_back(n - 1);
  return path;
}

// Held-Karp subset DP for the optimal path 0 -> n-1. Supports asymmetric
// distances. Memory 2^(n-2) * (n-2) doubles, capped at n = 16.
inline PathOrder held_karp_shpp(const ShppTask& task) {
  const int n = task.size();
  if (n < 2) throw ValidationError("held_karp_shpp: need n >= 2");
  if (n > 16) throw ValidationError("held_karp_shpp: n > 16 rejected");
  auto d = detail::task_distances(task);
  auto dist = [&](int i, int j) { return d[static_cast<std::size_t>(i) * n + j]; };

  const int m = n - 2;  // interior nodes, labeled 0..m-1 = task nodes 1..n-2
  PathOrder path;
  if (m == 0) { path.order = {0, n - 1}; return path; }

  const std::size_t full = std::size_t{1} << m;
  const double inf = std::numeric_limits<double>::infinity();
  // cost[mask][j]: min cost of a path from node 0 through exactly `mask`
  // ending at interior j (j in mask).
  std::vector<double> cost(full * m, inf);
  std::vector<std::int8_t> parent(full * m, -1);
  for (int j = 0; j < m; ++j) cost[(std::size_t{1} << j) * m + j] = dist(0, j + 1);
  for (std::size_t mask = 1; mask < full; ++mask) {
    for (int j = 0; j < m; ++j) {
      if (!(mask & (std::size_t{1} << j))) continue;
      double cj = cost[mask * m + j];
      if (cj == inf) continue;
      for (int k = 0; k < m; ++k) {
        if (mask & (std::size_t{1} << k)) continue;
        std::size_t nm = mask | (std::size_t{1} << k);
        double c = cj + dist(j + 1, k + 1);
        double& slot = cost[nm * m + k];
        if (c < slot || (c == slot && j < parent[nm * m + k])) {
          slot = c;
          parent[nm * m + k] = static_cast<std::int8_t>(j);
        }
      }
    }
  }
  const std::size_t all = full - 1;
  int best_j = -1;
  double best = inf;
  for (int j = 0; j < m; ++j) {
    double c = cost[all * m + j] + dist(j + 1, n - 1);
    if (c < best) { best = c; best_j = j; }
  }
  std::vector<int> rev;
  std::size_t mask = all;
  int j = best_j;
  while (j >= 0) {
    rev.push_back(j + 1);
    int pj = parent[mask * m + j];
    mask &= ~(std::size_t{1} << j);
    j = pj;
  }
  path.order.reserve(n);
  path.order.push_back(0);
  path.order.insert(path.order.end(), rev.rbegin(), rev.rend());
  path.order.push_back(n - 1);
  return path;
}

// First-improvement 2-opt on the open path with pinned endpoints: reverses
// interior segments while an improving move exists or the pass cap hits.
// Symmetric distances only (a reversal would re-cost interior edges).
inline PathOrder two_opt_shpp(const ShppTask& task, PathOrder path, int max_passes = 50) {
  const int n = task.size();
  if (path.size() != n || path.order.front() != 0 || path.order.back() != n - 1)
    throw ValidationError("two_opt_shpp: invalid initial path");
  auto dist = [&](int i, int j) { return task.dist(i, j); };
  auto& o = path.order;
  for (int pass = 0; pass < max_passes; ++pass) {
    bool improved = false;
    for (int i = 1; i + 1 < n; ++i) {
      for (int j = i + 1; j + 1 < n + 1 && j < n - 1; ++j) {
        // reverse o[i..j]; affected edges (i-1,i) and (j,j+1)
        double before = dist(o[i - 1], o[i]) + dist(o[j], o[j + 1]);
        double after = dist(o[i - 1], o[j]) + dist(o[i], o[j + 1]);
        if (after < before - 1e-12) {
          std::reverse(o.begin() + i, o.begin() + j + 1);
          improved = true;
        }
      }
    }
    if (!improved) break;
  }
  return path;
}

// --- reviser wrappers -------------------------------------------------------

class BruteForceReviser final : public Reviser {
 public:
  std::string name() const override { return "bf"; }
  int max_size() const override { return 9; }
  bool supports_asymmetric() const override { return true; }
  PathOrder propose(const ShppTask& task) override { return brute_force_shpp(task); }
};

class HeldKarpReviser final : public Reviser {
 public:
  std::string name() const override { return "dp"; }
  int max_size() const override { return 16; }
  bool supports_asymmetric() const override { return true; }
  PathOrder propose(const ShppTask& task) override { return held_karp_shpp(task); }
};

class TwoOptReviser final : public Reviser {
 public:
  explicit TwoOptReviser(int max_passes = 50) : max_passes_(max_passes) {}
  std::string name() const override { return "2opt"; }
  int max_size() const override { return 0; }
  PathOrder propose(const ShppTask& task) override {
    PathOrder init;
    init.order.resize(task.size());
    std::iota(init.order.begin(), init.order.end(), 0);
    return two_opt_shpp(task, std::move(init), max_passes_);
  }

 private:
  int max_passes_;
};

// Leaves every task unchanged. Useful for exercising the accept/discard path.
class IdentityReviser final : public Reviser {
 public:
  std::string name() const override { return "identity"; }
  int max_size() const override { return 0; }
  bool supports_asymmetric() const override { return true; }
  PathOrder propose(const ShppTask& task) override {
    PathOrder p;
    p.order.resize(task.size());
    std::iota(p.order.begin(), p.order.end(), 0);
    return p;
  }
};

using ReviserFactory = std::function<std::shared_ptr<Reviser>()>;

// Name -> factory registry for CLI selection (dp, bf, 2opt, identity; the
// neural reviser registers itself from its own header).
inline std::map<std::string, ReviserFactory>& reviser_registry() {
  static std::map<std::string, ReviserFactory> reg = {
      {"dp", [] { return std::make_shared<HeldKarpReviser>(); }},
      {"bf", [] { return std::make_shared<BruteForceReviser>(); }},
      {"2opt", [] { return std::make_shared<TwoOptReviser>(); }},
      {"identity", [] { return std::make_shared<IdentityReviser>(); }},
  };
  return reg;
}

inline std::shared_ptr<Reviser> make_reviser(const std::string& name) {
  auto& reg = reviser_registry();
  auto it = reg.find(name);
  if (it == reg.end()) throw ValidationError("unknown reviser: " + name);
  return it->second();
}

}  // namespace glop

#endif  // GLOP_SHPP_SOLVERS_HPP
