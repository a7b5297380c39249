#ifndef GLOP_SHPP_HPP
#define GLOP_SHPP_HPP

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "glop/core.hpp"

namespace glop {

// Record of the similarity map applied to a segment's coordinates:
// optional axis swap, translation by (x_min, y_min), scale by sc, then an
// optional flip of either transformed axis (augmentation).
struct TransformRecord {
  double sc = 1.0;
  bool axis_swapped = false;
  double x_min = 0.0;
  double y_min = 0.0;
  int flip_mask = 0;  // bit 0: x' -> 1-x', bit 1: y' -> y_max-y'
  double y_max = 1.0; // of the transformed segment, needed for the y flip
};

// One SHPP extracted from a parent tour: the segment's node ids in tour
// order, their raw coordinates, and the transformed coordinates fed to
// scale-sensitive revisers. First/last nodes are the fixed endpoints.
struct ShppTask {
  int parent = 0;         // parent tour id (index among the W candidates)
  int segment = 0;        // segment index within the decomposition
  std::vector<int> nodes; // node ids, in current path order
  std::vector<Point> raw;       // raw coords, aligned with `nodes`
  std::vector<Point> transformed;
  TransformRecord transform;
  bool degenerate = false;      // all points coincident; skip reconstruction
  double length = 0.0;          // current open-path length in raw coords
  const RoutingInstance* instance = nullptr;  // set when the parent has an explicit matrix

  int size() const { return static_cast<int>(nodes.size()); }

  // Distance between local positions i and j: raw Euclidean, or the parent
  // instance's (possibly asymmetric) matrix when one is attached.
  double dist(int i, int j) const {
    if (instance && instance->has_matrix()) return instance->dist(nodes[i], nodes[j]);
    return euclid(raw[i], raw[j]);
  }

  bool asymmetric() const { return instance && instance->has_matrix(); }
};

// Open-path length of `path` (a permutation of 0..n-1 into task.nodes
// positions) in raw coordinates.
inline double shpp_length(const ShppTask& task, const PathOrder& path) {
  const int n = task.size();
  if (path.size() != n) throw ValidationError("shpp_length: path size mismatch");
  if (path.order.front() != 0 || path.order.back() != n - 1)
    throw ValidationError("shpp_length: endpoints must be fixed at 0 and n-1");
  if (!is_permutation_of_all(path.order, n))
    throw ValidationError("shpp_length: not a permutation");
  double len = 0.0;
  for (int i = 0; i + 1 < n; ++i) len += task.dist(path.order[i], path.order[i + 1]);
  return len;
}

inline double path_coords_length(const std::vector<Point>& pts, const std::vector<int>& order) {
  double len = 0.0;
  for (std::size_t i = 0; i + 1 < order.size(); ++i) len += euclid(pts[order[i]], pts[order[i + 1]]);
  return len;
}

// Min-max normalization with optional axis swap: if the x-range exceeds the
// y-range the axes are kept, otherwise swapped; both axes are shifted to 0
// and scaled by sc = 1/max(range). Afterwards x' spans exactly [0,1] and
// y' spans [0, y_max] with y_max <= 1. Coincident segments are flagged
// degenerate and left untouched.
inline void transform(ShppTask& task) {
  double xmin = task.raw[0].x, xmax = xmin, ymin = task.raw[0].y, ymax = ymin;
  for (const Point& p : task.raw) {
    xmin = std::min(xmin, p.x); xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y); ymax = std::max(ymax, p.y);
  }
  const double xr = xmax - xmin, yr = ymax - ymin;
  const double range = std::max(xr, yr);
  if (range <= 0.0) {
    task.degenerate = true;
    task.transformed = task.raw;
    return;
  }
  TransformRecord rec;
  rec.sc = 1.0 / range;
  rec.axis_swapped = !(xr > yr);
  rec.x_min = xmin;
  rec.y_min = ymin;
  task.transformed.resize(task.raw.size());
  double ty_max = 0.0;
  for (std::size_t i = 0; i < task.raw.size(); ++i) {
    double tx = rec.sc * (task.raw[i].x - xmin);
    double ty = rec.sc * (task.raw[i].y - ymin);
    if (rec.axis_swapped) std::swap(tx, ty);
    task.transformed[i] = {tx, ty};
    ty_max = std::max(ty_max, ty);
  }
  rec.y_max = ty_max;
  task.transform = rec;
}

// The four reflection variants of a transformed task: identity, x-flip,
// y-flip, both. All are isometries, so path lengths are preserved.
inline std::vector<ShppTask> augment(const ShppTask& task) {
  std::vector<ShppTask> variants;
  variants.reserve(4);
  for (int mask = 0; mask < 4; ++mask) {
    ShppTask v = task;
    v.transform.flip_mask = mask;
    for (Point& p : v.transformed) {
      if (mask & 1) p.x = 1.0 - p.x;
      if (mask & 2) p.y = task.transform.y_max - p.y;
    }
    variants.push_back(std::move(v));
  }
  return variants;
}

}  // namespace glop

#endif  // GLOP_SHPP_HPP
