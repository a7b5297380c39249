#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "glop/partition.hpp"

using namespace glop;

namespace {

RoutingInstance small_cvrp(int n, double capacity, Rng& rng) {
  return generate_cvrp_one(n, capacity, rng.child(7001));
}

Mat random_heatmap(int n, Rng& rng, double lo = 0.1, double hi = 5.0) {
  Mat h(n, n);
  for (double& v : h.a) v = rng.uniform(lo, hi);
  return h;
}

// All partitions of customers into capacity-feasible groups, scored with
// the exact closed-tour solver: the enumeration oracle for tiny CVRPs.
double enumerate_cvrp_optimum(const RoutingInstance& inst) {
  const int n = inst.size() - 1;  // customers 1..n
  std::vector<std::vector<int>> groups;
  double best = std::numeric_limits<double>::infinity();
  SubTspSolver exact = make_sub_tsp_solver(16);
  std::function<void(int)> rec = [&](int next) {
    if (next > n) {
      double total = 0.0;
      for (const auto& g : groups) total += exact(inst, g);
      best = std::min(best, total);
      return;
    }
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
      double load = inst.demands[next];
      for (int v : groups[gi]) load += inst.demands[v];
      if (load <= inst.capacity + 1e-12) {
        groups[gi].push_back(next);
        rec(next + 1);
        groups[gi].pop_back();
      }
    }
    groups.push_back({next});
    rec(next + 1);
    groups.pop_back();
  };
  rec(1);
  return best;
}

}  // namespace

TEST_CASE("sparse graph defaults and shape") {
  REQUIRE(default_partition_k(ProblemKind::CVRP, 1000) == 100);
  REQUIRE(default_partition_k(ProblemKind::CVRP, 2000) == 200);
  REQUIRE(default_partition_k(ProblemKind::PCTSP, 500) == 50);
  REQUIRE(default_partition_k(ProblemKind::PCTSP, 1000) == 100);
  REQUIRE(default_partition_k(ProblemKind::PCTSP, 5000) == 200);

  Rng rng(301);
  RoutingInstance inst = small_cvrp(9, 20.0, rng);
  SparseGraph g = build_sparse_graph(inst, 50);  // clamped to n-1
  REQUIRE(g.k == 9);
  REQUIRE(static_cast<int>(g.src.size()) == g.n * g.k);
  // complete digraph minus self-loops at k = n-1
  std::vector<std::vector<char>> seen(g.n, std::vector<char>(g.n, 0));
  for (std::size_t e = 0; e < g.src.size(); ++e) {
    REQUIRE(g.src[e] != g.dst[e]);
    seen[g.src[e]][g.dst[e]] = 1;
  }
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j)
      if (i != j) REQUIRE(seen[i][j] == 1);
  REQUIRE(g.node_feats(inst.depot, 0) == 0.0);  // depot demand feature
  for (double v : g.node_feats.a) REQUIRE(std::isfinite(v));

  RoutingInstance pc = generate_pctsp_one(8, 9.0, rng.child(1));
  SparseGraph gp = build_sparse_graph(pc, 3);
  REQUIRE(gp.k == 3);
  REQUIRE(gp.node_feats.cols == 4);
  REQUIRE(gp.edge_feats.cols == 1);
  // every node keeps a scored edge back to the depot
  std::vector<char> to_depot(gp.n, 0);
  for (std::size_t e = 0; e < gp.src.size(); ++e)
    if (gp.dst[e] == pc.depot) to_depot[gp.src[e]] = 1;
  for (int i = 0; i < gp.n; ++i)
    if (i != pc.depot) REQUIRE(to_depot[i] == 1);
}

TEST_CASE("heatmap is positive, deterministic, and label-equivariant") {
  Rng rng(302);
  RoutingInstance inst = small_cvrp(10, 25.0, rng);
  GnnConfig cfg;
  cfg.emb = 16;
  cfg.layers = 2;
  ParamStore store = init_gnn_params(cfg, rng.child(0));
  SparseGraph g = build_sparse_graph(inst, 5);
  Mat h1 = partition_heatmap(g, store, cfg);
  Mat h2 = partition_heatmap(g, store, cfg);
  REQUIRE(h1.a == h2.a);
  for (double v : h1.a) REQUIRE(v > 0.0);

  // relabel the customers; the heatmap must permute with them
  const int n = inst.size();
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin() + 1, perm.end(), std::mt19937(99));  // depot fixed
  RoutingInstance relabeled = inst;
  for (int i = 0; i < n; ++i) {
    relabeled.coords[perm[i]] = inst.coords[i];
    relabeled.demands[perm[i]] = inst.demands[i];
  }
  Mat hp = partition_heatmap(build_sparse_graph(relabeled, 5), store, cfg);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      REQUIRE_THAT(hp(perm[i], perm[j]), Catch::Matchers::WithinAbs(h1(i, j), 1e-5));
}

TEST_CASE("feasible actions respect capacity, vehicles, and prizes") {
  Rng rng(303);
  RoutingInstance inst = small_cvrp(6, 10.0, rng);
  PartitionState s = init_partition_state(inst);
  // zero remaining capacity away from the depot: only the depot is feasible
  apply_action(s, inst, 1);
  s.remaining = 0.0;
  bool any_demand_zero = false;
  for (int i = 1; i < inst.size(); ++i) any_demand_zero |= inst.demands[i] == 0.0;
  REQUIRE_FALSE(any_demand_zero);
  std::vector<int> feas = feasible_actions(s, inst);
  REQUIRE(feas == std::vector<int>{inst.depot});

  RoutingInstance pc = generate_pctsp_one(6, 9.0, rng.child(1));
  PartitionState ps = init_partition_state(pc);
  REQUIRE(ps.prize < pc.prize_min);
  for (int a : feasible_actions(ps, pc)) REQUIRE(a != pc.depot);

  // depot never feasible while standing on it
  PartitionState s2 = init_partition_state(inst);
  for (int a : feasible_actions(s2, inst)) REQUIRE(a != inst.depot);
}

TEST_CASE("every sampled partition validates, even under adversarial heatmaps") {
  Rng rng(304);
  for (int rep = 0; rep < 60; ++rep) {
    bool cvrp = rep % 2 == 0;
    RoutingInstance inst = cvrp ? small_cvrp(6, 12.0, rng)
                                : generate_pctsp_one(6, 9.0, rng.child(5000 + rep));
    Mat h = rep % 4 < 2 ? random_heatmap(inst.size(), rng)
                        : random_heatmap(inst.size(), rng, 1e-9, 1e-7);  // adversarial scale
    for (int s = 0; s < 30; ++s) {
      SampledPartition sp =
          sample_partition(h, inst, PartitionMode::Sample, rng.child(rep * 100 + s));
      REQUIRE(validate(inst, sp.partition).empty());
      REQUIRE(std::isfinite(sp.log_prob));
      REQUIRE(sp.log_prob <= 1e-12);
    }
  }
}

TEST_CASE("sampling follows the heatmap ratios and log-probs recompute exactly") {
  Rng rng(305);
  RoutingInstance inst = generate_pctsp_one(4, 9.0, rng.child(0));  // 5 nodes with depot
  Mat h = random_heatmap(inst.size(), rng);

  // analytic first-step distribution: all customers feasible, depot not
  std::vector<double> expect(inst.size(), 0.0);
  double z = 0.0;
  for (int j = 1; j < inst.size(); ++j) z += h(inst.depot, j);
  for (int j = 1; j < inst.size(); ++j) expect[j] = h(inst.depot, j) / z;

  const int trials = 20000;
  std::vector<int> count(inst.size(), 0);
  for (int s = 0; s < trials; ++s) {
    SampledPartition sp = sample_partition(h, inst, PartitionMode::Sample, rng.child(10 + s));
    ++count[sp.trajectory.front()];
    // independent log-prob recomputation
    REQUIRE_THAT(trajectory_log_prob(h, inst, sp.trajectory),
                 Catch::Matchers::WithinAbs(sp.log_prob, 1e-9));
  }
  for (int j = 1; j < inst.size(); ++j) {
    double p = expect[j];
    double sigma = std::sqrt(p * (1.0 - p) * trials);
    REQUIRE(std::abs(count[j] - p * trials) <= 3.0 * sigma);
  }

  // greedy is deterministic
  SampledPartition g1 = sample_partition(h, inst, PartitionMode::Greedy, rng.child(1));
  SampledPartition g2 = sample_partition(h, inst, PartitionMode::Greedy, rng.child(2));
  REQUIRE(g1.trajectory == g2.trajectory);

  // uniform heatmap on a 2-customer instance: each first step has prob 1/2
  RoutingInstance two = generate_pctsp_one(2, 9.0, rng.child(3));
  Mat uniform(two.size(), two.size(), 1.0);
  int first_is_one = 0;
  const int two_trials = 4000;
  for (int s = 0; s < two_trials; ++s) {
    SampledPartition u = sample_partition(uniform, two, PartitionMode::Sample, rng.child(40000 + s));
    REQUIRE((u.trajectory.front() == 1 || u.trajectory.front() == 2));
    first_is_one += u.trajectory.front() == 1;
  }
  double sigma2 = std::sqrt(0.25 * two_trials);
  REQUIRE(std::abs(first_is_one - 0.5 * two_trials) <= 3.0 * sigma2);
}

TEST_CASE("tape log-prob equals the value-space recomputation") {
  Rng rng(306);
  GnnConfig cfg;
  cfg.emb = 12;
  cfg.layers = 2;
  ParamStore store = init_gnn_params(cfg, rng.child(0));
  for (int rep = 0; rep < 10; ++rep) {
    RoutingInstance inst = small_cvrp(7, 15.0, rng);
    SparseGraph g = build_sparse_graph(inst, 4);
    Mat h = partition_heatmap(g, store, cfg);
    SampledPartition sp = sample_partition(h, inst, PartitionMode::Sample, rng.child(20 + rep));
    Tape t;
    BoundGnn b = bind_gnn(t, store, cfg);
    int lp = trajectory_log_prob_node(t, gnn_log_heatmap(t, b, g), inst, sp.trajectory);
    REQUIRE_THAT(t.val(lp)(0, 0), Catch::Matchers::WithinAbs(sp.log_prob, 1e-9));
  }
}

TEST_CASE("closed-tour dynamic program matches brute force") {
  // unit square: optimal closed tour is the perimeter
  std::vector<double> sq = {0, 1, std::sqrt(2.0), 1,
                            1, 0, 1, std::sqrt(2.0),
                            std::sqrt(2.0), 1, 0, 1,
                            1, std::sqrt(2.0), 1, 0};
  REQUIRE_THAT(held_karp_tsp(sq, 4), Catch::Matchers::WithinAbs(4.0, 1e-12));

  Rng rng(307);
  for (int rep = 0; rep < 30; ++rep) {
    const int n = 7;
    std::vector<Point> pts(n);
    for (auto& p : pts) p = {rng.uniform(), rng.uniform()};
    std::vector<double> dist(n * n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) dist[i * n + j] = euclid(pts[i], pts[j]);
    // brute-force over tours fixing node 0
    std::vector<int> perm = {1, 2, 3, 4, 5, 6};
    double best = std::numeric_limits<double>::infinity();
    do {
      double len = dist[perm[0]];
      for (int i = 0; i + 1 < 6; ++i) len += dist[perm[i] * n + perm[i + 1]];
      len += dist[perm[5] * n];
      best = std::min(best, len);
    } while (std::next_permutation(perm.begin(), perm.end()));
    REQUIRE_THAT(held_karp_tsp(dist, n), Catch::Matchers::WithinAbs(best, 1e-9));
  }
}

TEST_CASE("partition evaluation matches hand oracles") {
  Rng rng(308);
  SubTspSolver solver = make_sub_tsp_solver();

  // CVRP where every route is a singleton: objective is out-and-back sums
  RoutingInstance inst = small_cvrp(6, 9.0, rng);
  Partition singletons;
  double expect = 0.0;
  for (int i = 1; i < inst.size(); ++i) {
    singletons.subsets.push_back({inst.depot, i, inst.depot});
    expect += 2.0 * inst.dist(inst.depot, i);
  }
  REQUIRE_THAT(evaluate_partition(inst, singletons, solver),
               Catch::Matchers::WithinAbs(expect, 1e-9));

  // PCTSP visiting nobody violates the prize constraint
  RoutingInstance pc = generate_pctsp_one(5, 9.0, rng.child(1));
  Partition empty;
  empty.subsets.push_back({pc.depot, pc.depot});
  REQUIRE_THROWS_AS(evaluate_partition(pc, empty, solver), ValidationError);

  // PCTSP objective includes the unvisited penalties
  Partition all;
  all.subsets.push_back({pc.depot, 1, 2, 3, 4, 5, pc.depot});
  double with_all = evaluate_partition(pc, all, solver);
  REQUIRE(with_all > 0.0);
}

TEST_CASE("enumerated optimum lower-bounds every sampled partition") {
  Rng rng(309);
  for (int rep = 0; rep < 4; ++rep) {
    RoutingInstance inst = small_cvrp(8, 15.0, rng);
    double opt = enumerate_cvrp_optimum(inst);
    SubTspSolver solver = make_sub_tsp_solver(16);
    Mat h = random_heatmap(inst.size(), rng);
    for (int s = 0; s < 25; ++s) {
      SampledPartition sp =
          sample_partition(h, inst, PartitionMode::Sample, rng.child(rep * 50 + s));
      REQUIRE(evaluate_partition(inst, sp.partition, solver) >= opt - 1e-9);
    }
  }
}

TEST_CASE("self-baseline with one sample produces a zero update") {
  Rng rng(310);
  GnnConfig cfg;
  cfg.emb = 12;
  cfg.layers = 1;
  ParamStore store = init_gnn_params(cfg, rng.child(0));
  ParamStore before = store;
  Adam opt(1e-2);
  GlobalTrainConfig tc;
  tc.samples = 1;
  std::vector<RoutingInstance> batch = {small_cvrp(6, 12.0, rng)};
  Rng train_rng(11);
  train_global_step(batch, store, cfg, make_sub_tsp_solver(), opt, train_rng, tc);
  for (const auto& [name, m] : before.params) {
    const Mat& after = store.params.at(name);
    for (std::size_t i = 0; i < m.a.size(); ++i) REQUIRE(after.a[i] == m.a[i]);
  }
}

TEST_CASE("a short global training run improves the greedy partition") {
  Rng rng(311);
  GnnConfig cfg;
  cfg.emb = 16;
  cfg.layers = 2;
  ParamStore store = init_gnn_params(cfg, rng.child(0));
  SubTspSolver solver = make_sub_tsp_solver();

  Rng data_rng(412);
  std::vector<RoutingInstance> train_set;
  for (int i = 0; i < 8; ++i) train_set.push_back(generate_cvrp_one(10, 20.0, data_rng.child(i)));

  auto greedy_mean = [&](const ParamStore& s) {
    double sum = 0.0;
    for (const auto& inst : train_set) {
      SparseGraph g = build_sparse_graph(inst, 6);
      Mat h = partition_heatmap(g, s, cfg);
      SampledPartition sp = sample_partition(h, inst, PartitionMode::Greedy, Rng(1));
      sum += evaluate_partition(inst, sp.partition, solver);
    }
    return sum / train_set.size();
  };

  double before = greedy_mean(store);
  Adam opt(3e-3);
  GlobalTrainConfig tc;
  tc.samples = 6;
  Rng train_rng(500);
  for (int step = 0; step < 60; ++step) {
    Rng step_rng = train_rng.child(step);
    train_global_step(train_set, store, cfg, solver, opt, step_rng, tc);
  }
  double after = greedy_mean(store);
  INFO("before=" << before << " after=" << after);
  REQUIRE(after < before);
}

TEST_CASE("partition checkpoint round-trips bit-identically") {
  Rng rng(312);
  GnnConfig cfg;
  cfg.kind = ProblemKind::PCTSP;
  cfg.emb = 12;
  cfg.layers = 2;
  ParamStore store = init_gnn_params(cfg, rng.child(0));
  const std::string path = "/tmp/glop_test_partition_ckpt.json";
  save_partition_checkpoint(path, cfg, store);
  PartitionModel loaded = load_partition_checkpoint(path);
  REQUIRE(loaded.config.kind == cfg.kind);
  REQUIRE(loaded.config.emb == cfg.emb);
  for (const auto& [name, m] : store.params) {
    const Mat& lm = loaded.params.params.at(name);
    for (std::size_t i = 0; i < m.a.size(); ++i) REQUIRE(lm.a[i] == m.a[i]);
  }
  std::remove(path.c_str());
}
