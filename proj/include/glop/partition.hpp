#ifndef GLOP_PARTITION_HPP
#define GLOP_PARTITION_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "glop/autodiff.hpp"
#include "glop/core.hpp"
#include "glop/insertion.hpp"
#include "glop/neural_reviser.hpp"
#include "glop/parallel.hpp"
#include "glop/rng.hpp"
#include "glop/shpp_solvers.hpp"

#include "json.hpp"

namespace glop {

// Heatmap entries for pairs the sparse graph does not represent.
inline constexpr double kHeatmapFloor = 1e-10;

// --- sparse graph ------------------------------------------------------------

// k-nearest-neighbor digraph over depot + customers with per-node and
// per-edge features. CVRP: node = (demand/capacity, radius, polar angle
// w.r.t. the depot), neighbors by polar angle, edge = (distance, relative
// angle). PCTSP: node = (prize, penalty, radius, angle), neighbors by
// Euclidean distance, edge = (distance).
struct SparseGraph {
  int n = 0;  // node count including the depot
  int k = 0;
  Mat node_feats;        // n x F
  std::vector<int> src;  // n*k directed edges
  std::vector<int> dst;
  Mat edge_feats;        // (n*k) x Fe
};

inline int default_partition_k(ProblemKind kind, int n) {
  if (kind == ProblemKind::CVRP) return n <= 1000 ? 100 : 200;
  if (n <= 500) return 50;
  return n <= 1000 ? 100 : 200;
}

inline SparseGraph build_sparse_graph(const RoutingInstance& inst, int k) {
  if (inst.kind == ProblemKind::TSP)
    throw ValidationError("build_sparse_graph: instance must be CVRP or PCTSP");
  const int n = inst.size();
  if (k >= n) k = n - 1;
  if (k < 1) throw ValidationError("build_sparse_graph: need at least 2 nodes");
  SparseGraph g;
  g.n = n;
  g.k = k;

  const Point d0 = inst.coords[inst.depot];
  std::vector<double> radius(n), angle(n);
  for (int i = 0; i < n; ++i) {
    double dx = inst.coords[i].x - d0.x, dy = inst.coords[i].y - d0.y;
    radius[i] = std::sqrt(dx * dx + dy * dy);
    angle[i] = (i == inst.depot) ? 0.0 : std::atan2(dy, dx);
  }

  const bool cvrp = inst.kind == ProblemKind::CVRP;
  g.node_feats = Mat(n, cvrp ? 3 : 4);
  for (int i = 0; i < n; ++i) {
    if (cvrp) {
      g.node_feats(i, 0) = inst.demands[i] / inst.capacity;
      g.node_feats(i, 1) = radius[i];
      g.node_feats(i, 2) = angle[i];
    } else {
      g.node_feats(i, 0) = (i == inst.depot) ? 0.0 : inst.prizes[i];
      g.node_feats(i, 1) = (i == inst.depot) ? 0.0 : inst.penalties[i];
      g.node_feats(i, 2) = radius[i];
      g.node_feats(i, 3) = angle[i];
    }
  }

  auto angle_gap = [](double a, double b) {
    double d = std::abs(a - b);
    return std::min(d, 2.0 * std::acos(-1.0) - d);
  };

  // kNN adjacency, plus a guaranteed edge back to the depot from every node:
  // closing a route / terminating is always a scored action, never a
  // floor-probability fallback.
  g.src.reserve(static_cast<std::size_t>(n) * (k + 1));
  g.dst.reserve(static_cast<std::size_t>(n) * (k + 1));
  std::vector<std::pair<double, int>> order(n - 1);
  for (int i = 0; i < n; ++i) {
    int m = 0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      double key = cvrp ? angle_gap(angle[i], angle[j]) : euclid(inst.coords[i], inst.coords[j]);
      order[m++] = {key, j};
    }
    std::partial_sort(order.begin(), order.begin() + k, order.end());
    bool has_depot = i == inst.depot;
    for (int e = 0; e < k; ++e) {
      g.src.push_back(i);
      g.dst.push_back(order[e].second);
      has_depot = has_depot || order[e].second == inst.depot;
    }
    if (!has_depot) {
      g.src.push_back(i);
      g.dst.push_back(inst.depot);
    }
  }
  g.edge_feats = Mat(static_cast<int>(g.src.size()), cvrp ? 2 : 1);
  for (std::size_t row = 0; row < g.src.size(); ++row) {
    int i = g.src[row], j = g.dst[row];
    g.edge_feats(static_cast<int>(row), 0) = euclid(inst.coords[i], inst.coords[j]);
    if (cvrp) g.edge_feats(static_cast<int>(row), 1) = angle_gap(angle[i], angle[j]);
  }
  for (double v : g.node_feats.a)
    if (!std::isfinite(v)) throw ValidationError("build_sparse_graph: non-finite node feature");
  return g;
}

// --- heatmap model ------------------------------------------------------------

struct GnnConfig {
  ProblemKind kind = ProblemKind::CVRP;
  int emb = 48;    // node embedding dimension
  int layers = 3;  // message-passing rounds
  double clip = 10.0;

  int node_feat_dim() const { return kind == ProblemKind::CVRP ? 3 : 4; }
  int edge_feat_dim() const { return kind == ProblemKind::CVRP ? 2 : 1; }
};

inline nlohmann::json to_json(const GnnConfig& c) {
  return {{"kind", c.kind == ProblemKind::CVRP ? "cvrp" : "pctsp"},
          {"emb", c.emb},
          {"layers", c.layers},
          {"clip", c.clip}};
}

inline GnnConfig gnn_config_from_json(const nlohmann::json& j) {
  GnnConfig c;
  c.kind = j.at("kind") == "cvrp" ? ProblemKind::CVRP : ProblemKind::PCTSP;
  c.emb = j.at("emb");
  c.layers = j.at("layers");
  c.clip = j.at("clip");
  return c;
}

inline ParamStore init_gnn_params(const GnnConfig& cfg, Rng rng) {
  ParamStore s;
  const int d = cfg.emb;
  s.params["embed.W"] = detail::glorot(cfg.node_feat_dim(), d, rng);
  s.params["embed.b"] = Mat(1, d);
  s.params["eembed.W"] = detail::glorot(cfg.edge_feat_dim(), d, rng);
  s.params["eembed.b"] = Mat(1, d);
  for (int l = 0; l < cfg.layers; ++l) {
    std::string p = "mp" + std::to_string(l) + ".";
    s.params[p + "Wn"] = detail::glorot(d, d, rng);
    s.params[p + "We"] = detail::glorot(d, d, rng);
    s.params[p + "b"] = Mat(1, d);
    s.params[p + "Wa"] = detail::glorot(d, d, rng);
    s.params[p + "Ws"] = detail::glorot(d, d, rng);
    s.params[p + "ln.g"] = Mat(1, d, 1.0);
    s.params[p + "ln.b"] = Mat(1, d);
  }
  s.params["score.W1"] = detail::glorot(3 * d, d, rng);
  s.params["score.b1"] = Mat(1, d);
  s.params["score.W2"] = detail::glorot(d, 1, rng);
  return s;
}

struct BoundGnn {
  Tape* tape = nullptr;
  const GnnConfig* cfg = nullptr;
  std::map<std::string, int> ids;

  int id(const std::string& name) const { return ids.at(name); }
};

inline BoundGnn bind_gnn(Tape& t, const ParamStore& store, const GnnConfig& cfg) {
  BoundGnn b;
  b.tape = &t;
  b.cfg = &cfg;
  for (const auto& [name, m] : store.params) b.ids[name] = t.leaf(m, name);
  return b;
}

// Dense n x n log-heatmap: message passing over the sparse graph, then a
// per-edge score clipped into (-clip, clip); pairs without a sparse edge
// hold the constant log of the positive floor.
inline int gnn_log_heatmap(Tape& t, const BoundGnn& b, const SparseGraph& g) {
  const GnnConfig& cfg = *b.cfg;
  int x = ad::add_rowvec(t, ad::matmul(t, t.leaf(g.node_feats), b.id("embed.W")),
                         b.id("embed.b"));
  int e = ad::add_rowvec(t, ad::matmul(t, t.leaf(g.edge_feats), b.id("eembed.W")),
                         b.id("eembed.b"));
  for (int l = 0; l < cfg.layers; ++l) {
    std::string p = "mp" + std::to_string(l) + ".";
    int msg = ad::relu(
        t, ad::add_rowvec(t,
                          ad::add(t, ad::matmul(t, ad::gather_rows(t, x, g.dst), b.id(p + "Wn")),
                                  ad::matmul(t, e, b.id(p + "We"))),
                          b.id(p + "b")));
    int agg = ad::scatter_sum_rows(t, msg, g.src, g.n);
    int upd = ad::add(t, ad::matmul(t, agg, b.id(p + "Wa")), ad::matmul(t, x, b.id(p + "Ws")));
    x = ad::layer_norm(t, ad::add(t, x, upd), b.id(p + "ln.g"), b.id(p + "ln.b"));
  }
  int pair = ad::concat_cols(t, {ad::gather_rows(t, x, g.src), ad::gather_rows(t, x, g.dst), e});
  int hidden = ad::relu(t, ad::add_rowvec(t, ad::matmul(t, pair, b.id("score.W1")),
                                          b.id("score.b1")));
  int scores = ad::scale(t, ad::tanh_op(t, ad::matmul(t, hidden, b.id("score.W2"))), cfg.clip);
  std::vector<std::pair<int, int>> pos(g.src.size());
  for (std::size_t i = 0; i < g.src.size(); ++i) pos[i] = {g.src[i], g.dst[i]};
  return ad::scatter_entries(t, scores, std::move(pos), g.n, g.n, std::log(kHeatmapFloor));
}

// Forward-only dense heatmap of unnormalized positive sampling weights.
inline Mat partition_heatmap(const SparseGraph& g, const ParamStore& store,
                             const GnnConfig& cfg) {
  Tape t;
  BoundGnn b = bind_gnn(t, store, cfg);
  Mat h = t.val(gnn_log_heatmap(t, b, g));
  for (double& v : h.a) v = std::exp(v);
  return h;
}

// --- constrained sequential sampling (partition construction) ----------------

struct PartitionState {
  int current = 0;
  std::vector<char> visited;
  double remaining = 0.0;        // CVRP: capacity left in the open route
  double prize = 0.0;            // PCTSP: collected so far
  int closed = 0;                // CVRP: routes already closed
  int unvisited = 0;             // customers not yet visited
  double unvisited_demand = 0.0;
  bool finished = false;
  std::vector<int> open;
  std::vector<std::vector<int>> subsets;  // interiors, no depot sentinels
};

inline PartitionState init_partition_state(const RoutingInstance& inst) {
  PartitionState s;
  s.current = inst.depot;
  s.visited.assign(inst.size(), 0);
  s.visited[inst.depot] = 1;
  s.remaining = inst.capacity;
  s.unvisited = inst.size() - 1;
  if (inst.kind == ProblemKind::CVRP)
    for (int i = 0; i < inst.size(); ++i)
      if (i != inst.depot) s.unvisited_demand += inst.demands[i];
  return s;
}

inline int cvrp_max_vehicles(const RoutingInstance& inst, int slack = 2) {
  double total = 0.0;
  for (int i = 0; i < inst.size(); ++i)
    if (i != inst.depot) total += inst.demands[i];
  return static_cast<int>(std::ceil(total / inst.capacity - 1e-12)) + slack;
}

// Feasible next nodes per the problem constraints. CVRP: unvisited nodes
// that fit the remaining capacity, plus the depot (closing the route) when
// doing so still leaves enough vehicles for the unvisited demand. PCTSP:
// every unvisited node, plus the depot once the prize minimum is met.
inline std::vector<int> feasible_actions(const PartitionState& s, const RoutingInstance& inst,
                                         int slack = 2) {
  std::vector<int> out;
  if (s.finished) return out;
  if (inst.kind == ProblemKind::CVRP) {
    const int max_vehicles = cvrp_max_vehicles(inst, slack);
    auto routes_needed = [&](double demand) {
      return static_cast<int>(std::ceil(demand / inst.capacity - 1e-12));
    };
    // Closing the route must leave enough vehicles for the unvisited demand.
    if (s.current != inst.depot &&
        max_vehicles - (s.closed + 1) >= routes_needed(s.unvisited_demand))
      out.push_back(inst.depot);
    for (int j = 0; j < inst.size(); ++j)
      if (!s.visited[j] && inst.demands[j] <= s.remaining + 1e-12) out.push_back(j);
    // The vehicle budget is a soft bound: a walk that exhausted it mid-route
    // closes anyway (one vehicle over) rather than dead-ending, since every
    // demand fits an empty vehicle and capacity/coverage stay intact.
    if (out.empty() && s.current != inst.depot) out.push_back(inst.depot);
  } else if (inst.kind == ProblemKind::PCTSP) {
    if (s.prize >= inst.prize_min - 1e-12) out.push_back(inst.depot);
    for (int j = 0; j < inst.size(); ++j)
      if (!s.visited[j]) out.push_back(j);
  } else {
    throw ValidationError("feasible_actions: instance kind has no partition semantics");
  }
  if (out.empty() && s.unvisited > 0)
    throw ValidationError("feasible_actions: no feasible action with unvisited nodes left");
  if (out.empty()) throw ValidationError("feasible_actions: no feasible action");
  return out;
}

inline void apply_action(PartitionState& s, const RoutingInstance& inst, int action) {
  if (action == inst.depot) {
    if (inst.kind == ProblemKind::CVRP) {
      s.subsets.push_back(std::move(s.open));
      s.open.clear();
      ++s.closed;
      s.remaining = inst.capacity;
      s.current = inst.depot;
      if (s.unvisited == 0) s.finished = true;
    } else {
      s.subsets.push_back(std::move(s.open));
      s.open.clear();
      s.finished = true;
      s.current = inst.depot;
    }
    return;
  }
  s.visited[action] = 1;
  s.open.push_back(action);
  --s.unvisited;
  if (inst.kind == ProblemKind::CVRP) {
    s.remaining -= inst.demands[action];
    s.unvisited_demand -= inst.demands[action];
  } else {
    s.prize += inst.prizes[action];
  }
  s.current = action;
}

enum class PartitionMode { Greedy, Sample };

struct SampledPartition {
  Partition partition;
  std::vector<int> trajectory;  // full action sequence, depot returns included
  double log_prob = 0.0;
};

namespace detail {

// One Eq.-3 step: normalized choice over the feasible heatmap entries of
// the current row. Returns the picked node and adds its log-probability.
inline int pick_action(const Mat& h, const PartitionState& s, const std::vector<int>& feas,
                       PartitionMode mode, Rng* rng, double& log_prob) {
  double z = 0.0;
  for (int j : feas) z += std::max(h(s.current, j), kHeatmapFloor);
  int pick = feas.front();
  if (mode == PartitionMode::Greedy) {
    double best = -1.0;
    for (int j : feas) {
      double w = std::max(h(s.current, j), kHeatmapFloor);
      if (w > best) { best = w; pick = j; }
    }
  } else {
    double u = rng->uniform() * z;
    double acc = 0.0;
    for (int j : feas) {
      acc += std::max(h(s.current, j), kHeatmapFloor);
      pick = j;
      if (u < acc) break;
    }
  }
  log_prob += std::log(std::max(h(s.current, pick), kHeatmapFloor) / z);
  return pick;
}

}  // namespace detail

inline SampledPartition sample_partition(const Mat& heatmap, const RoutingInstance& inst,
                                         PartitionMode mode, Rng rng, int slack = 2) {
  if (heatmap.rows != inst.size() || heatmap.cols != inst.size())
    throw ValidationError("sample_partition: heatmap shape mismatch");
  PartitionState s = init_partition_state(inst);
  SampledPartition out;
  while (!s.finished) {
    std::vector<int> feas = feasible_actions(s, inst, slack);
    int pick = detail::pick_action(heatmap, s, feas, mode, &rng, out.log_prob);
    out.trajectory.push_back(pick);
    apply_action(s, inst, pick);
  }
  for (auto& interior : s.subsets) {
    std::vector<int> route;
    route.reserve(interior.size() + 2);
    route.push_back(inst.depot);
    route.insert(route.end(), interior.begin(), interior.end());
    route.push_back(inst.depot);
    out.partition.subsets.push_back(std::move(route));
  }
  return out;
}

// Independent log-probability recomputation of a recorded trajectory.
inline double trajectory_log_prob(const Mat& heatmap, const RoutingInstance& inst,
                                  const std::vector<int>& trajectory, int slack = 2) {
  PartitionState s = init_partition_state(inst);
  double lp = 0.0;
  for (int action : trajectory) {
    std::vector<int> feas = feasible_actions(s, inst, slack);
    double z = 0.0;
    bool ok = false;
    for (int j : feas) {
      z += std::max(heatmap(s.current, j), kHeatmapFloor);
      ok = ok || j == action;
    }
    if (!ok) throw ValidationError("trajectory_log_prob: infeasible recorded action");
    lp += std::log(std::max(heatmap(s.current, action), kHeatmapFloor) / z);
    apply_action(s, inst, action);
  }
  if (!s.finished) throw ValidationError("trajectory_log_prob: incomplete trajectory");
  return lp;
}

// Tape-resident trajectory log-probability for REINFORCE: every step is a
// masked log-softmax over the current log-heatmap row, so the gradient
// flows back into the GNN.
inline int trajectory_log_prob_node(Tape& t, int log_heatmap, const RoutingInstance& inst,
                                    const std::vector<int>& trajectory, int slack = 2) {
  PartitionState s = init_partition_state(inst);
  int lp = t.leaf(Mat(1, 1, 0.0));
  for (int action : trajectory) {
    std::vector<int> feas = feasible_actions(s, inst, slack);
    std::vector<char> mask(inst.size(), 0);
    for (int j : feas) mask[j] = 1;
    int row = ad::gather_rows(t, log_heatmap, {s.current});
    lp = ad::add(t, lp, ad::masked_log_prob(t, row, mask, action));
    apply_action(s, inst, action);
  }
  if (!s.finished) throw ValidationError("trajectory_log_prob_node: incomplete trajectory");
  return lp;
}

// --- partition evaluation -----------------------------------------------------

// Closed-tour Held-Karp over an explicit distance matrix (n <= 16).
inline double held_karp_tsp(const std::vector<double>& dist, int n) {
  if (n > 16) throw ValidationError("held_karp_tsp: n must be <= 16");
  if (n <= 1) return 0.0;
  if (n == 2) return dist[1] + dist[n];
  const int m = n - 1;  // nodes 1..n-1; node 0 is the fixed start
  const std::size_t masks = std::size_t{1} << m;
  std::vector<double> cost(masks * m, std::numeric_limits<double>::infinity());
  for (int j = 0; j < m; ++j) cost[(std::size_t{1} << j) * m + j] = dist[j + 1];
  for (std::size_t mask = 1; mask < masks; ++mask) {
    for (int j = 0; j < m; ++j) {
      if (!(mask >> j & 1)) continue;
      double c = cost[mask * m + j];
      if (!std::isfinite(c)) continue;
      for (int k = 0; k < m; ++k) {
        if (mask >> k & 1) continue;
        std::size_t nm = mask | (std::size_t{1} << k);
        double cand = c + dist[(j + 1) * n + (k + 1)];
        if (cand < cost[nm * m + k]) cost[nm * m + k] = cand;
      }
    }
  }
  double best = std::numeric_limits<double>::infinity();
  for (int j = 0; j < m; ++j)
    best = std::min(best, cost[(masks - 1) * m + j] + dist[(j + 1) * n]);
  return best;
}

// Closed-tour Held-Karp with tour reconstruction: order starts at node 0.
inline std::vector<int> held_karp_tsp_route(const std::vector<double>& dist, int n) {
  if (n > 16) throw ValidationError("held_karp_tsp_route: n must be <= 16");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (n <= 3) return order;
  const int m = n - 1;
  const std::size_t masks = std::size_t{1} << m;
  std::vector<double> cost(masks * m, std::numeric_limits<double>::infinity());
  std::vector<std::int8_t> parent(masks * m, -1);
  for (int j = 0; j < m; ++j) cost[(std::size_t{1} << j) * m + j] = dist[j + 1];
  for (std::size_t mask = 1; mask < masks; ++mask) {
    for (int j = 0; j < m; ++j) {
      if (!(mask >> j & 1)) continue;
      double c = cost[mask * m + j];
      if (!std::isfinite(c)) continue;
      for (int k = 0; k < m; ++k) {
        if (mask >> k & 1) continue;
        std::size_t nm = mask | (std::size_t{1} << k);
        double cand = c + dist[(j + 1) * n + (k + 1)];
        if (cand < cost[nm * m + k]) {
          cost[nm * m + k] = cand;
          parent[nm * m + k] = static_cast<std::int8_t>(j);
        }
      }
    }
  }
  double best = std::numeric_limits<double>::infinity();
  int last = 0;
  for (int j = 0; j < m; ++j) {
    double cand = cost[(masks - 1) * m + j] + dist[(j + 1) * n];
    if (cand < best) { best = cand; last = j; }
  }
  std::size_t mask = masks - 1;
  for (int pos = n - 1; pos >= 1; --pos) {
    order[pos] = last + 1;
    int p = parent[mask * m + last];
    mask ^= std::size_t{1} << last;
    last = p;
  }
  order[0] = 0;
  return order;
}

// A solved sub-tour: depot-first closed route over original node ids.
struct SubRoute {
  std::vector<int> route;  // begins at the depot; closing edge implied
  double length = 0.0;
};

// Exact for small subsets, insertion + 2-opt beyond the DP cap.
inline SubRoute solve_sub_tsp_route(const RoutingInstance& inst,
                                    const std::vector<int>& customers, int dp_cap = 13,
                                    std::uint64_t seed = 1) {
  SubRoute out;
  out.route.push_back(inst.depot);
  if (customers.empty()) return out;
  std::vector<int> nodes;
  nodes.reserve(customers.size() + 1);
  nodes.push_back(inst.depot);
  nodes.insert(nodes.end(), customers.begin(), customers.end());
  const int m = static_cast<int>(nodes.size());
  std::vector<int> local;  // tour over local indices, depot (0) first
  if (m <= dp_cap) {
    std::vector<double> dist(static_cast<std::size_t>(m) * m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) dist[i * m + j] = inst.dist(nodes[i], nodes[j]);
    local = held_karp_tsp_route(dist, m);
  } else {
    RoutingInstance sub;
    sub.kind = ProblemKind::TSP;
    sub.coords.reserve(m);
    for (int v : nodes) sub.coords.push_back(inst.coords[v]);
    Tour tour = random_insertion(sub, Rng(seed));
    // 2-opt the insertion tour as an open path with the closing edge pinned
    TwoOptReviser two_opt;
    ShppTask task;
    task.nodes = tour.order;
    task.raw.reserve(m);
    for (int v : tour.order) task.raw.push_back(sub.coords[v]);
    task.transformed = task.raw;
    std::vector<int> id(m);
    std::iota(id.begin(), id.end(), 0);
    task.length = path_coords_length(task.raw, id);
    PathOrder path = two_opt.propose(task);
    double len = path_coords_length(task.raw, path.order) +
                 euclid(task.raw[path.order.front()], task.raw[path.order.back()]);
    local = tour.order;
    if (len < tour_length(sub, tour))
      for (int i = 0; i < m; ++i) local[i] = task.nodes[path.order[i]];
    // rotate the local tour so the depot leads
    auto it = std::find(local.begin(), local.end(), 0);
    std::rotate(local.begin(), it, local.end());
  }
  out.route.clear();
  for (int v : local) out.route.push_back(nodes[v]);
  for (int i = 0; i < m; ++i)
    out.length += inst.dist(out.route[i], out.route[(i + 1) % m]);
  return out;
}

// Route length of depot + customers as a closed sub-TSP.
using SubTspSolver = std::function<double(const RoutingInstance&, const std::vector<int>&)>;

inline SubTspSolver make_sub_tsp_solver(int dp_cap = 13, std::uint64_t seed = 1) {
  return [dp_cap, seed](const RoutingInstance& inst, const std::vector<int>& customers) {
    return solve_sub_tsp_route(inst, customers, dp_cap, seed).length;
  };
}

// Eq.-4 objective of a complete partition. CVRP: sum of sub-TSP route
// lengths. PCTSP: route length plus penalties of the unvisited nodes.
inline double evaluate_partition(const RoutingInstance& inst, const Partition& part,
                                 const SubTspSolver& solver) {
  auto violations = validate(inst, part);
  if (!violations.empty())
    throw ValidationError("evaluate_partition: " + violations.front());
  std::vector<char> covered(inst.size(), 0);
  double obj = 0.0;
  for (const auto& route : part.subsets) {
    std::vector<int> customers(route.begin() + 1, route.end() - 1);
    for (int v : customers) covered[v] = 1;
    obj += solver(inst, customers);
  }
  if (inst.kind == ProblemKind::PCTSP)
    for (int i = 0; i < inst.size(); ++i)
      if (i != inst.depot && !covered[i]) obj += inst.penalties[i];
  return obj;
}

// --- REINFORCE training --------------------------------------------------------

struct GlobalTrainConfig {
  double lr = 1e-4;
  int samples = 8;         // M partitions per instance
  double clip_norm = 1.0;
  int slack = 2;
  int dp_cap = 13;
};

struct GlobalTrainStats {
  double mean_objective = 0.0;
  int skipped_nonfinite = 0;
};

// One update across a batch of instances: per instance, M sampled
// partitions with the per-instance mean objective as the baseline.
inline GlobalTrainStats train_global_step(const std::vector<RoutingInstance>& batch,
                                          ParamStore& store, const GnnConfig& cfg,
                                          const SubTspSolver& solver, Adam& opt, Rng& rng,
                                          const GlobalTrainConfig& tc) {
  GlobalTrainStats stats;
  std::map<std::string, Mat> grads;
  int contributions = 0;
  for (std::size_t bi = 0; bi < batch.size(); ++bi) {
    const RoutingInstance& inst = batch[bi];
    SparseGraph g = build_sparse_graph(inst, default_partition_k(inst.kind, inst.size() - 1));
    Mat h = partition_heatmap(g, store, cfg);

    std::vector<SampledPartition> samples(tc.samples);
    std::vector<double> objective(tc.samples);
    std::vector<char> stranded(tc.samples, 0);
    Rng inst_rng = rng.child(bi);
    std::vector<Rng> sample_rngs;
    for (int m = 0; m < tc.samples; ++m) sample_rngs.push_back(inst_rng.child(m));
    parallel_for(tc.samples, [&](int m) {
      try {
        samples[m] = sample_partition(h, inst, PartitionMode::Sample, sample_rngs[m], tc.slack);
        objective[m] = evaluate_partition(inst, samples[m].partition, solver);
      } catch (const ValidationError&) {
        stranded[m] = 1;  // dead-end walk; drop it from the batch
      }
    });
    int kept = 0;
    double baseline = 0.0;
    for (int m = 0; m < tc.samples; ++m)
      if (!stranded[m]) { baseline += objective[m]; ++kept; }
    if (kept < 2) { ++stats.skipped_nonfinite; continue; }
    baseline /= kept;

    Tape t;
    BoundGnn b = bind_gnn(t, store, cfg);
    int log_h = gnn_log_heatmap(t, b, g);
    int loss = t.leaf(Mat(1, 1, 0.0));
    for (int m = 0; m < tc.samples; ++m) {
      if (stranded[m]) continue;
      double adv = objective[m] - baseline;
      loss = ad::add(t, loss,
                     ad::scale(t, trajectory_log_prob_node(t, log_h, inst,
                                                           samples[m].trajectory, tc.slack),
                               adv / kept));
    }
    t.backward(loss);
    auto g_named = t.named_grads();
    bool finite = true;
    for (const auto& [k, gm] : g_named)
      for (double v : gm.a)
        if (!std::isfinite(v)) { finite = false; break; }
    if (!finite) { ++stats.skipped_nonfinite; continue; }
    ++contributions;
    stats.mean_objective += baseline;
    for (auto& [k, gm] : g_named) {
      Mat& dst = grads[k];
      if (dst.rows == 0) dst = Mat(gm.rows, gm.cols);
      for (std::size_t i = 0; i < gm.a.size(); ++i) dst.a[i] += gm.a[i];
    }
  }
  if (contributions > 0) {
    for (auto& [k, gm] : grads)
      for (double& v : gm.a) v /= contributions;
    opt.step(store, grads, tc.clip_norm);
    stats.mean_objective /= contributions;
  }
  return stats;
}

// --- checkpointing --------------------------------------------------------------

inline void save_partition_checkpoint(const std::string& path, const GnnConfig& cfg,
                                      const ParamStore& store) {
  nlohmann::json j;
  j["format"] = 1;
  j["kind"] = "partition";
  j["config"] = to_json(cfg);
  j["digest"] = detail::fnv1a(j["config"].dump());
  j["weights"] = weights_to_json(store);
  std::ofstream f(path);
  if (!f) throw IoError("checkpoint: cannot open " + path);
  f << j.dump();
}

struct PartitionModel {
  GnnConfig config;
  ParamStore params;
};

inline PartitionModel load_partition_checkpoint(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("checkpoint: cannot open " + path);
  nlohmann::json j = nlohmann::json::parse(f);
  if (j.at("kind") != "partition") throw IoError("checkpoint: not a partition checkpoint");
  if (j.at("digest").get<std::uint64_t>() != detail::fnv1a(j.at("config").dump()))
    throw IoError("checkpoint: config digest mismatch");
  return {gnn_config_from_json(j.at("config")), weights_from_json(j.at("weights"))};
}

}  // namespace glop

#endif  // GLOP_PARTITION_HPP
