#ifndef GLOP_INSERTION_HPP
#define GLOP_INSERTION_HPP

#include <limits>
#include <vector>

#include "glop/core.hpp"
#include "glop/parallel.hpp"
#include "glop/rng.hpp"

namespace glop {

// Random Insertion: visit nodes in a uniformly random order, inserting each
// at the position of minimum insertion cost d(a,v)+d(v,b)-d(a,b) over all
// current tour edges. The first two nodes form the initial 2-cycle.
//
// The partial tour is kept as a flat array of directed edges plus a
// successor map. Inserting v into edge j=(a,b) rewrites edge j to (a,v) and
// appends (v,b); edge indices are stable and ties break on the lowest one.
// The scan is a contiguous pass, which is what makes TSP100K tractable.
inline Tour random_insertion_order(const RoutingInstance& inst, const std::vector<int>& order) {
  const int n = inst.size();
  Tour tour;
  if (n == 0) return tour;
  if (n == 1) { tour.order = {order[0]}; return tour; }

  std::vector<int> ea(n), eb(n);
  std::vector<double> elen(n);
  const bool matrix = inst.has_matrix();
  const Point* pts = inst.coords.data();

  auto d = [&](int i, int j) -> double {
    if (matrix) return inst.dist(i, j);
    double dx = pts[i].x - pts[j].x, dy = pts[i].y - pts[j].y;
    double v = std::sqrt(dx * dx + dy * dy);
    return inst.round_edges ? std::nearbyint(v) : v;
  };

  int ecount = 2;
  ea[0] = order[0]; eb[0] = order[1]; elen[0] = d(order[0], order[1]);
  ea[1] = order[1]; eb[1] = order[0]; elen[1] = d(order[1], order[0]);

  for (int i = 2; i < n; ++i) {
    const int v = order[i];
    int best = 0;
    double best_delta = std::numeric_limits<double>::infinity();
    double best_da = 0.0, best_db = 0.0;
    if (!matrix) {
      const double vx = pts[v].x, vy = pts[v].y;
      for (int j = 0; j < ecount; ++j) {
        double ax = pts[ea[j]].x - vx, ay = pts[ea[j]].y - vy;
        double bx = pts[eb[j]].x - vx, by = pts[eb[j]].y - vy;
        double da = std::sqrt(ax * ax + ay * ay);
        double db = std::sqrt(bx * bx + by * by);
        if (inst.round_edges) { da = std::nearbyint(da); db = std::nearbyint(db); }
        double delta = da + db - elen[j];
        if (delta < best_delta) { best_delta = delta; best = j; best_da = da; best_db = db; }
      }
    } else {
      for (int j = 0; j < ecount; ++j) {
        double da = d(ea[j], v);
        double db = d(v, eb[j]);
        double delta = da + db - elen[j];
        if (delta < best_delta) { best_delta = delta; best = j; best_da = da; best_db = db; }
      }
    }
    // split edge `best` = (a,b) into (a,v) and (v,b)
    int b = eb[best];
    eb[best] = v;
    elen[best] = best_da;
    ea[ecount] = v; eb[ecount] = b; elen[ecount] = best_db;
    ++ecount;
  }

  std::vector<int> succ(n);
  for (int j = 0; j < ecount; ++j) succ[ea[j]] = eb[j];
  tour.order.reserve(n);
  int cur = order[0];
  for (int i = 0; i < n; ++i) { tour.order.push_back(cur); cur = succ[cur]; }
  return tour;
}

inline Tour random_insertion(const RoutingInstance& inst, Rng rng) {
  return random_insertion_order(inst, rng.permutation(inst.size()));
}

// W independent insertion orders -> W tours. Tour i uses rng.child(i), so
// random_insertion_multi(inst, 1, rng)[0] == random_insertion(inst, rng.child(0)).
inline std::vector<Tour> random_insertion_multi(const RoutingInstance& inst, int w, const Rng& rng) {
  std::vector<Tour> tours(w);
  parallel_for(w, [&](int i) { tours[i] = random_insertion(inst, rng.child(i)); });
  return tours;
}

}  // namespace glop

#endif  // GLOP_INSERTION_HPP
