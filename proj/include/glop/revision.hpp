#ifndef GLOP_REVISION_HPP
#define GLOP_REVISION_HPP

#include <cassert>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include "glop/core.hpp"
#include "glop/insertion.hpp"
#include "glop/parallel.hpp"
#include "glop/rng.hpp"
#include "glop/shpp.hpp"
#include "glop/shpp_solvers.hpp"

namespace glop {

// Sizes and per-size iteration counts of the revision loop, plus the number
// of initial tours W.
struct RevisionSchedule {
  std::vector<int> sizes;   // e.g. {100, 50, 20}
  std::vector<int> iters;   // aligned with sizes
  int w = 1;

  void check() const {
    if (sizes.size() != iters.size()) throw ValidationError("schedule: sizes/iters mismatch");
    if (w < 1) throw ValidationError("schedule: W must be >= 1");
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      if (sizes[i] < 4) throw ValidationError("schedule: reviser size must be >= 4");
      if (iters[i] < 0) throw ValidationError("schedule: iterations must be >= 0");
      for (std::size_t j = i + 1; j < sizes.size(); ++j)
        if (sizes[i] == sizes[j]) throw ValidationError("schedule: duplicate size");
    }
  }
};

struct Decomposition {
  std::vector<ShppTask> tasks;
  std::vector<int> tail;  // N mod n nodes, left untouched
};

// Cuts floor(N/n) disjoint consecutive segments of exactly n nodes from the
// tour, starting at offset p; the remaining N mod n nodes form the tail.
// Segment endpoints are the segment's first and last tour nodes.
inline Decomposition decompose(const RoutingInstance& inst, const Tour& tour, int n, int p,
                               int parent_id = 0) {
  const int total = tour.size();
  if (n < 4) throw ValidationError("decompose: n must be >= 4");
  if (n > total) throw ValidationError("decompose: n exceeds tour size");
  if (p < 0 || p >= total) throw ValidationError("decompose: offset out of range");
  const int k = total / n;
  Decomposition out;
  out.tasks.resize(k);
  const bool matrix = inst.has_matrix();
  for (int r = 0; r < k; ++r) {
    ShppTask& t = out.tasks[r];
    t.parent = parent_id;
    t.segment = r;
    t.nodes.resize(n);
    t.raw.resize(n);
    for (int i = 0; i < n; ++i) {
      int node = tour.order[(p + r * n + i) % total];
      t.nodes[i] = node;
      t.raw[i] = inst.coords[node];
    }
    if (matrix) {
      t.instance = &inst;
      t.transformed = t.raw;
    } else {
      transform(t);
    }
    t.length = 0.0;
    for (int i = 0; i + 1 < n; ++i) t.length += t.dist(i, i + 1);
  }
  const int tail_n = total - k * n;
  out.tail.resize(tail_n);
  for (int i = 0; i < tail_n; ++i) out.tail[i] = tour.order[(p + k * n + i) % total];
  return out;
}

// Reassembles a tour from its (possibly reordered) segments and the tail,
// preserving the original inter-segment connections.
inline Tour compose(const RoutingInstance& inst, const Decomposition& dec) {
  Tour tour;
  for (const ShppTask& t : dec.tasks)
    tour.order.insert(tour.order.end(), t.nodes.begin(), t.nodes.end());
  tour.order.insert(tour.order.end(), dec.tail.begin(), dec.tail.end());
  if (!is_permutation_of_all(tour.order, inst.size()))
    throw std::logic_error("compose: segments do not cover the instance");
  return tour;
}

struct ReviseStats {
  long long proposed = 0;
  long long accepted = 0;
  long long failures = 0;
};

// Runs the reviser on every task and accepts a proposal only when it is
// strictly shorter in raw coordinates (1e-12 slack). Endpoints never move.
// A failing reviser leaves its task unchanged.
inline void reconstruct_batch(std::vector<ShppTask>& tasks, Reviser& reviser,
                              ReviseStats* stats = nullptr) {
  const bool augmented = reviser.uses_augmentation();
  std::vector<ReviseStats> local(tasks.size());
  parallel_for(static_cast<int>(tasks.size()), [&](int ti) {
    ShppTask& task = tasks[ti];
    ReviseStats& st = local[ti];
    if (task.degenerate) return;
    if (reviser.max_size() > 0 && task.size() > reviser.max_size()) return;
    if (task.asymmetric() && !reviser.supports_asymmetric()) return;
    PathOrder best_path;
    double best_len = task.length;
    bool have = false;
    try {
      if (augmented && !task.asymmetric()) {
        for (ShppTask& variant : augment(task)) {
          PathOrder p = reviser.propose(variant);
          ++st.proposed;
          double len = shpp_length(task, p);  // raw coordinates
          if (len < best_len) { best_len = len; best_path = std::move(p); have = true; }
        }
      } else {
        PathOrder p = reviser.propose(task);
        ++st.proposed;
        double len = shpp_length(task, p);
        if (len < best_len) { best_len = len; best_path = std::move(p); have = true; }
      }
    } catch (const std::exception&) {
      ++st.failures;
      return;
    }
    // discard rule: keep the current ordering unless strictly better
    if (have && best_len < task.length - 1e-12) {
      std::vector<int> nodes(task.size());
      std::vector<Point> raw(task.size());
      for (int i = 0; i < task.size(); ++i) {
        nodes[i] = task.nodes[best_path.order[i]];
        raw[i] = task.raw[best_path.order[i]];
      }
      task.nodes = std::move(nodes);
      task.raw = std::move(raw);
      task.length = best_len;
      ++st.accepted;
    }
  });
  if (stats)
    for (const auto& st : local) {
      stats->proposed += st.proposed;
      stats->accepted += st.accepted;
      stats->failures += st.failures;
    }
}

// One revision round: decompose at offset p, reconstruct, compose.
inline Tour revise_once(const RoutingInstance& inst, const Tour& tour, int n, int p,
                        Reviser& reviser, ReviseStats* stats = nullptr) {
  Decomposition dec = decompose(inst, tour, n, p);
  reconstruct_batch(dec.tasks, reviser, stats);
  return compose(inst, dec);
}

// Picks the reviser applied at segment size n.
using ReviserSelect = std::function<std::shared_ptr<Reviser>(int size)>;

// Full (sub-)TSP solve: W random-insertion tours, then for each size in the
// schedule I_n revisions with the decomposition point starting uniformly at
// random and shifting by max(1, floor(n/I_n)); returns the best final tour.
inline Tour solve_tsp(const RoutingInstance& inst, const RevisionSchedule& schedule,
                      const ReviserSelect& select, Rng rng, ReviseStats* stats = nullptr) {
  schedule.check();
  const int total = inst.size();
  std::vector<Tour> tours = random_insertion_multi(inst, schedule.w, rng.child(0));
  Rng shifts = rng.child(1);
  for (std::size_t si = 0; si < schedule.sizes.size(); ++si) {
    const int n = schedule.sizes[si];
    const int iters = schedule.iters[si];
    if (n > total || iters == 0) continue;  // size skipped, not fatal
    std::shared_ptr<Reviser> reviser = select(n);
    if (!reviser) continue;
    int p = static_cast<int>(shifts.uniform_index(static_cast<std::uint64_t>(total)));
    const int step = std::max(1, n / iters);
    for (int it = 0; it < iters; ++it) {
      for (int w = 0; w < schedule.w; ++w)
        tours[w] = revise_once(inst, tours[w], n, p, *reviser, stats);
      p = (p + step) % total;
    }
  }
  int best = 0;
  double best_len = tour_length(inst, tours[0]);
  for (int w = 1; w < schedule.w; ++w) {
    double len = tour_length(inst, tours[w]);
    if (len < best_len) { best_len = len; best = w; }
  }
  return tours[best];
}

}  // namespace glop

#endif  // GLOP_REVISION_HPP
