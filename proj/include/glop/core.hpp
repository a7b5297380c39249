#ifndef GLOP_CORE_HPP
#define GLOP_CORE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace glop {

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ProblemKind { TSP, CVRP, PCTSP };

inline const char* to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::TSP: return "tsp";
    case ProblemKind::CVRP: return "cvrp";
    case ProblemKind::PCTSP: return "pctsp";
  }
  return "?";
}

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline double euclid(const Point& a, const Point& b) {
  double dx = a.x - b.x, dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

// A routing problem instance. Coordinates live in the unit square; an
// explicit distance matrix overrides Euclidean distances when present
// (asymmetric/explicit instances). Immutable after construction.
struct RoutingInstance {
  ProblemKind kind = ProblemKind::TSP;
  std::vector<Point> coords;
  std::vector<double> dist_matrix;  // row-major n*n, empty unless explicit
  int depot = 0;

  // CVRP
  std::vector<double> demands;
  double capacity = 0.0;

  // PCTSP
  std::vector<double> prizes;
  std::vector<double> penalties;
  double prize_min = 0.0;

  // TSPLIB comparability: round each edge to the nearest integer (EUC_2D).
  bool round_edges = false;

  int size() const { return static_cast<int>(coords.size()); }
  bool has_matrix() const { return !dist_matrix.empty(); }

  double dist(int i, int j) const {
    if (has_matrix()) return dist_matrix[static_cast<std::size_t>(i) * coords.size() + j];
    double d = euclid(coords[i], coords[j]);
    return round_edges ? std::nearbyint(d) : d;
  }
};

// Closed tour: a permutation of all node indices; the successor of the
// last node is the first.
struct Tour {
  std::vector<int> order;

  int size() const { return static_cast<int>(order.size()); }
};

// Open SHPP path: order[0] and order.back() are the fixed endpoints.
struct PathOrder {
  std::vector<int> order;

  int size() const { return static_cast<int>(order.size()); }
};

// A complete partition: node subsets, each beginning and terminating at
// the depot. CVRP: every customer in exactly one subset. PCTSP: a single
// subset (the to-visit set).
struct Partition {
  std::vector<std::vector<int>> subsets;
};

inline bool is_permutation_of_all(const std::vector<int>& order, int n) {
  if (static_cast<int>(order.size()) != n) return false;
  std::vector<char> seen(n, 0);
  for (int v : order) {
    if (v < 0 || v >= n || seen[v]) return false;
    seen[v] = 1;
  }
  return true;
}

inline double tour_length(const RoutingInstance& inst, const Tour& tour) {
  if (!is_permutation_of_all(tour.order, inst.size()))
    throw ValidationError("tour is not a permutation of all nodes");
  const int n = tour.size();
  if (n < 2) return 0.0;
  double len = 0.0;
  for (int i = 0; i + 1 < n; ++i) len += inst.dist(tour.order[i], tour.order[i + 1]);
  len += inst.dist(tour.order[n - 1], tour.order[0]);
  return len;
}

// Open-path length over instance nodes (no closing edge).
inline double path_length(const RoutingInstance& inst, const std::vector<int>& order) {
  double len = 0.0;
  for (std::size_t i = 0; i + 1 < order.size(); ++i) len += inst.dist(order[i], order[i + 1]);
  return len;
}

// --- validation -----------------------------------------------------------

inline std::vector<std::string> validate(const RoutingInstance& inst) {
  std::vector<std::string> v;
  const int n = inst.size();
  for (const Point& p : inst.coords)
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      v.push_back("coords: non-finite coordinate");
      break;
    }
  if (inst.has_matrix()) {
    if (inst.dist_matrix.size() != static_cast<std::size_t>(n) * n)
      v.push_back("dist: matrix not square of instance size");
    else
      for (int i = 0; i < n; ++i) {
        if (inst.dist_matrix[static_cast<std::size_t>(i) * n + i] != 0.0)
          v.push_back("dist: nonzero diagonal at " + std::to_string(i));
        for (int j = 0; j < n; ++j)
          if (inst.dist_matrix[static_cast<std::size_t>(i) * n + j] < 0.0)
            v.push_back("dist: negative entry");
      }
  }
  if (inst.kind == ProblemKind::CVRP) {
    if (inst.capacity <= 0.0) v.push_back("capacity: must be positive");
    if (static_cast<int>(inst.demands.size()) != n) v.push_back("demands: wrong size");
    for (int i = 0; i < n && i < static_cast<int>(inst.demands.size()); ++i) {
      if (inst.demands[i] < 0.0) v.push_back("demands: negative demand at " + std::to_string(i));
      if (inst.demands[i] > inst.capacity)
        v.push_back("demands: demand exceeds capacity at " + std::to_string(i));
    }
    if (!inst.demands.empty() && inst.demands[inst.depot] != 0.0)
      v.push_back("demands: depot demand must be 0");
  }
  if (inst.kind == ProblemKind::PCTSP) {
    if (static_cast<int>(inst.prizes.size()) != n) v.push_back("prizes: wrong size");
    if (static_cast<int>(inst.penalties.size()) != n) v.push_back("penalties: wrong size");
    double total = 0.0;
    for (double b : inst.prizes) {
      if (b < 0.0) v.push_back("prizes: negative prize");
      total += b;
    }
    for (double p : inst.penalties)
      if (p < 0.0) v.push_back("penalties: negative penalty");
    if (inst.prize_min <= 0.0) v.push_back("prize_min: must be positive");
    if (total < inst.prize_min) v.push_back("prize: total prize below prize_min (infeasible)");
  }
  return v;
}

inline std::vector<std::string> validate(const RoutingInstance& inst, const Tour& tour) {
  std::vector<std::string> v;
  if (!is_permutation_of_all(tour.order, inst.size()))
    v.push_back("tour: not a permutation of all nodes");
  return v;
}

inline std::vector<std::string> validate(const RoutingInstance& inst, const Partition& part) {
  std::vector<std::string> v;
  const int n = inst.size();
  std::vector<int> count(n, 0);
  for (std::size_t r = 0; r < part.subsets.size(); ++r) {
    const auto& s = part.subsets[r];
    if (s.size() < 2 || s.front() != inst.depot || s.back() != inst.depot) {
      v.push_back("subset " + std::to_string(r) + ": must begin and terminate at depot");
      continue;
    }
    for (std::size_t t = 1; t + 1 < s.size(); ++t) {
      int node = s[t];
      if (node < 0 || node >= n) {
        v.push_back("subset " + std::to_string(r) + ": node index out of range");
      } else if (node == inst.depot) {
        v.push_back("subset " + std::to_string(r) + ": interior depot visit");
      } else {
        ++count[node];
      }
    }
  }
  for (int i = 0; i < n; ++i)
    if (count[i] > 1) v.push_back("node " + std::to_string(i) + ": repeated across subsets");

  if (inst.kind == ProblemKind::CVRP) {
    for (int i = 0; i < n; ++i)
      if (i != inst.depot && count[i] == 0)
        v.push_back("coverage: node " + std::to_string(i) + " unvisited");
    for (std::size_t r = 0; r < part.subsets.size(); ++r) {
      double load = 0.0;
      const auto& s = part.subsets[r];
      for (std::size_t t = 1; t + 1 < s.size(); ++t)
        if (s[t] >= 0 && s[t] < n) load += inst.demands[s[t]];
      if (load > inst.capacity + 1e-9)
        v.push_back("capacity: subset " + std::to_string(r) + " load " + std::to_string(load) +
                    " exceeds capacity");
    }
  } else if (inst.kind == ProblemKind::PCTSP) {
    if (part.subsets.size() != 1) v.push_back("pctsp: partition must have exactly one subset");
    double prize = 0.0;
    for (int i = 0; i < n; ++i)
      if (i != inst.depot && count[i] == 1) prize += inst.prizes[i];
    if (prize < inst.prize_min - 1e-12)
      v.push_back("prize: collected prize " + std::to_string(prize) + " below prize_min");
  } else {
    v.push_back("partition: instance kind has no partition semantics");
  }
  return v;
}

}  // namespace glop

#endif  // GLOP_CORE_HPP
