#ifndef GLOP_PIPELINE_HPP
#define GLOP_PIPELINE_HPP

#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "glop/core.hpp"
#include "glop/instance_io.hpp"
#include "glop/neural_reviser.hpp"
#include "glop/partition.hpp"
#include "glop/revision.hpp"
#include "glop/rng.hpp"
#include "glop/shpp_solvers.hpp"

#include "json.hpp"

namespace glop {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Full description of one solve path: revision schedule for TSP, partition
// decoding for CVRP/PCTSP, and the reviser stack shared by both.
struct SolveConfig {
  ProblemKind kind = ProblemKind::TSP;
  std::string name = "custom";
  RevisionSchedule schedule;  // sizes, per-size iterations, W
  std::string reviser = "2opt";  // dp | bf | 2opt | identity | neural:<ckpt>[,<ckpt>...]
  PartitionMode mode = PartitionMode::Greedy;
  int num_samples = 1;           // partitions evaluated when sampling
  int k = 0;                     // sparse-graph degree; 0 = scale default
  int slack = 2;                 // extra vehicles over the capacity bound
  int dp_cap = 13;               // exact sub-TSP threshold
  std::uint64_t seed = 0;
  std::string partition_checkpoint;  // trained heatmap model; empty = fresh
  double time_budget_s = 0.0;        // advisory, recorded with results

  nlohmann::json digest_json() const {
    return {{"kind", kind == ProblemKind::TSP ? "tsp"
                     : kind == ProblemKind::CVRP ? "cvrp" : "pctsp"},
            {"name", name},
            {"sizes", schedule.sizes},
            {"iters", schedule.iters},
            {"W", schedule.w},
            {"reviser", reviser},
            {"mode", mode == PartitionMode::Greedy ? "greedy" : "sample"},
            {"num_samples", num_samples},
            {"k", k},
            {"slack", slack},
            {"dp_cap", dp_cap},
            {"ckpt", partition_checkpoint},
            {"budget", time_budget_s}};
  }
  std::string digest() const { return digest_json().dump(); }
};

// Named presets with the stock inference schedules.
inline SolveConfig preset_config(const std::string& name) {
  SolveConfig cfg;
  cfg.name = name;
  if (name == "tsp500-default") {
    cfg.kind = ProblemKind::TSP;
    cfg.schedule.sizes = {20, 50, 100};
    cfg.schedule.iters = {5, 25, 20};
    cfg.schedule.w = 1;
  } else if (name == "cvrp2k-default") {
    cfg.kind = ProblemKind::CVRP;
    cfg.schedule.sizes = {20, 50};
    cfg.schedule.iters = {5, 5};
    cfg.schedule.w = 1;
  } else {
    throw ConfigError("unknown preset: " + name);
  }
  return cfg;
}

// Builds the per-size reviser selector from a reviser spec string. Neural
// specs carry checkpoint paths; sizes without a matching checkpoint fall
// back to exact DP (small) or 2-opt (large).
inline ReviserSelect make_reviser_select(const std::string& spec) {
  if (spec.rfind("neural:", 0) == 0) {
    auto by_size = std::make_shared<std::map<int, std::shared_ptr<Reviser>>>();
    std::stringstream paths(spec.substr(7));
    std::string path;
    while (std::getline(paths, path, ',')) {
      if (path.empty()) continue;
      auto r = load_reviser_checkpoint(path);
      (*by_size)[r->max_size()] = r;
    }
    if (by_size->empty()) throw ConfigError("neural reviser spec has no checkpoints");
    return [by_size](int size) -> std::shared_ptr<Reviser> {
      auto it = by_size->find(size);
      if (it != by_size->end()) return it->second;
      if (size <= 16) return make_reviser("dp");
      return make_reviser("2opt");
    };
  }
  if (!reviser_registry().count(spec)) throw ConfigError("unknown reviser: " + spec);
  return [spec](int size) {
    auto r = make_reviser(spec);
    if (r->max_size() > 0 && size > r->max_size())
      throw ConfigError("reviser " + spec + " cannot handle size " + std::to_string(size));
    return r;
  };
}

struct SolveOutcome {
  Tour tour;            // TSP solutions
  Partition partition;  // CVRP / PCTSP routes, depot-first closed subsets
  double objective = 0.0;
  ResultRecord record;
};

class Solver {
 public:
  explicit Solver(SolveConfig cfg) : cfg_(std::move(cfg)) {
    for (int size : cfg_.schedule.sizes) select_size(size);  // fail fast
    if (cfg_.kind != ProblemKind::TSP) {
      if (!cfg_.partition_checkpoint.empty()) {
        model_ = load_partition_checkpoint(cfg_.partition_checkpoint);
        if (model_.config.kind != cfg_.kind)
          throw ConfigError("partition checkpoint kind does not match problem");
      } else {
        model_.config.kind = cfg_.kind;
        model_.params = init_gnn_params(model_.config, Rng(cfg_.seed, {0x9e11}));
      }
    }
    if (cfg_.num_samples < 1) throw ConfigError("num_samples must be >= 1");
  }

  const SolveConfig& config() const { return cfg_; }

  SolveOutcome solve(const RoutingInstance& inst, const std::string& id,
                     std::uint64_t seed) const {
    if (inst.kind != cfg_.kind) throw ConfigError("instance kind does not match config");
    auto t0 = std::chrono::steady_clock::now();
    SolveOutcome out;
    if (cfg_.kind == ProblemKind::TSP) {
      solve_tsp_path(inst, seed, out);
    } else {
      solve_partition_path(inst, seed, out);
    }
    out.record.id = id;
    out.record.method = method_name();
    out.record.objective = out.objective;
    out.record.seed = seed;
    out.record.config = cfg_.digest();
    out.record.time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
  }

 private:
  std::string method_name() const {
    if (cfg_.kind == ProblemKind::TSP) return "glop-tsp/" + cfg_.reviser;
    std::string base = cfg_.kind == ProblemKind::CVRP ? "glop-cvrp" : "glop-pctsp";
    return base + (cfg_.mode == PartitionMode::Greedy ? "-g" : "-s");
  }

  std::shared_ptr<Reviser> select_size(int size) const {
    ReviserSelect sel = make_reviser_select(cfg_.reviser);
    return sel(size);
  }

  void solve_tsp_path(const RoutingInstance& inst, std::uint64_t seed, SolveOutcome& out) const {
    ReviserSelect sel = make_reviser_select(cfg_.reviser);
    Rng rng(seed);
    out.tour = glop::solve_tsp(inst, cfg_.schedule, sel, rng);
    auto violations = validate(inst, out.tour);
    if (!violations.empty()) throw ValidationError("solve: " + violations.front());
    out.objective = tour_length(inst, out.tour);
  }

  void solve_partition_path(const RoutingInstance& inst, std::uint64_t seed,
                            SolveOutcome& out) const {
    const int k = cfg_.k > 0 ? cfg_.k : default_partition_k(inst.kind, inst.size() - 1);
    SparseGraph g = build_sparse_graph(inst, k);
    Mat h = partition_heatmap(g, model_.params, model_.config);

    const int count = cfg_.mode == PartitionMode::Greedy ? 1 : cfg_.num_samples;
    Rng rng(seed);
    std::vector<Rng> sample_rngs;
    for (int m = 0; m < count; ++m) sample_rngs.push_back(rng.child(m));
    std::vector<double> objective(count);
    std::vector<Partition> routed(count);
    parallel_for(count, [&](int m) {
      SampledPartition sp;
      for (int attempt = 0;; ++attempt) {
        try {
          sp = sample_partition(h, inst, cfg_.mode, sample_rngs[m].child(attempt), cfg_.slack);
          break;
        } catch (const ValidationError&) {
          // dead-end walk (probability-zero prefix); redraw deterministically
          if (attempt >= 32) throw;
        }
      }
      Partition solved;
      double obj = 0.0;
      std::vector<char> covered(inst.size(), 0);
      for (const auto& subset : sp.partition.subsets) {
        std::vector<int> customers(subset.begin() + 1, subset.end() - 1);
        for (int v : customers) covered[v] = 1;
        SubRoute r = solve_sub_tsp_route(inst, customers, cfg_.dp_cap, seed + 1);
        obj += r.length;
        r.route.push_back(inst.depot);
        solved.subsets.push_back(std::move(r.route));
      }
      if (inst.kind == ProblemKind::PCTSP)
        for (int i = 0; i < inst.size(); ++i)
          if (i != inst.depot && !covered[i]) obj += inst.penalties[i];
      objective[m] = obj;
      routed[m] = std::move(solved);
    });
    int best = 0;
    for (int m = 1; m < count; ++m)
      if (objective[m] < objective[best]) best = m;
    out.partition = std::move(routed[best]);
    out.objective = objective[best];

    auto violations = validate(inst, out.partition);
    if (!violations.empty()) throw ValidationError("solve: " + violations.front());
    // reported objective must match an independent recomputation
    double recomputed = 0.0;
    std::vector<char> covered(inst.size(), 0);
    for (const auto& route : out.partition.subsets) {
      for (std::size_t i = 0; i + 1 < route.size(); ++i)
        recomputed += inst.dist(route[i], route[i + 1]);
      for (std::size_t i = 1; i + 1 < route.size(); ++i) covered[route[i]] = 1;
    }
    if (inst.kind == ProblemKind::PCTSP)
      for (int i = 0; i < inst.size(); ++i)
        if (i != inst.depot && !covered[i]) recomputed += inst.penalties[i];
    if (std::abs(recomputed - out.objective) > 1e-9)
      throw ValidationError("solve: objective does not match recomputation");
  }

  SolveConfig cfg_;
  PartitionModel model_;
};

// --- benchmarking ---------------------------------------------------------------

struct BenchReport {
  std::vector<ResultRecord> records;
  std::vector<std::string> errors;  // per-instance failures, isolated
  double mean = 0.0;
  double stddev = 0.0;
  double mean_gap = std::numeric_limits<double>::quiet_NaN();
  double total_time_s = 0.0;
  std::string config_digest;
};

// Solves the whole dataset with per-instance derived seeds. The optional
// reference objectives enable gap reporting (gap = obj/ref - 1).
inline BenchReport bench(const std::vector<RoutingInstance>& instances, const SolveConfig& cfg,
                         const std::vector<double>& reference = {}) {
  if (!reference.empty() && reference.size() != instances.size())
    throw ConfigError("bench: reference objective count mismatch");
  Solver solver(cfg);
  BenchReport report;
  report.config_digest = cfg.digest();
  const int n = static_cast<int>(instances.size());
  std::vector<ResultRecord> rows(n);
  std::vector<std::string> errors(n);
  Rng root(cfg.seed);
  std::vector<std::uint64_t> seeds(n);
  for (int i = 0; i < n; ++i) seeds[i] = root.child(i).uniform_index(~std::uint64_t{0});
  auto t0 = std::chrono::steady_clock::now();
  parallel_for(n, [&](int i) {
    try {
      rows[i] = solver.solve(instances[i], "instance-" + std::to_string(i), seeds[i]).record;
    } catch (const std::exception& e) {
      errors[i] = std::string("instance-") + std::to_string(i) + ": " + e.what();
    }
  });
  report.total_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  double gap_sum = 0.0;
  int gap_count = 0;
  for (int i = 0; i < n; ++i) {
    if (!errors[i].empty()) {
      report.errors.push_back(errors[i]);
      continue;
    }
    report.records.push_back(rows[i]);
    if (!reference.empty() && reference[i] > 0.0) {
      gap_sum += rows[i].objective / reference[i] - 1.0;
      ++gap_count;
    }
  }
  const std::size_t m = report.records.size();
  if (m > 0) {
    for (const auto& r : report.records) report.mean += r.objective;
    report.mean /= static_cast<double>(m);
    for (const auto& r : report.records)
      report.stddev += (r.objective - report.mean) * (r.objective - report.mean);
    report.stddev = m > 1 ? std::sqrt(report.stddev / static_cast<double>(m - 1)) : 0.0;
  }
  if (gap_count > 0) report.mean_gap = gap_sum / gap_count;
  return report;
}

inline std::string summarize(const BenchReport& r) {
  std::ostringstream os;
  os << "instances: " << r.records.size() << " solved, " << r.errors.size() << " failed\n";
  os << "mean objective: " << r.mean << "  stddev: " << r.stddev << "\n";
  if (std::isfinite(r.mean_gap)) os << "mean gap: " << r.mean_gap * 100.0 << "%\n";
  os << "total time: " << r.total_time_s << " s\n";
  for (const auto& e : r.errors) os << "error: " << e << "\n";
  return os.str();
}

// --- stability ------------------------------------------------------------------

struct RunSummary {
  std::uint64_t seed = 0;
  double min = 0.0, lower_quartile = 0.0, mean = 0.0, upper_quartile = 0.0, max = 0.0;
  std::vector<double> objectives;  // raw rows, so the quartiles are recomputable
};

namespace detail {

inline double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  if (v.size() == 1) return v[0];
  double pos = q * (v.size() - 1);
  std::size_t lo = static_cast<std::size_t>(pos);
  double frac = pos - lo;
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] * (1.0 - frac) + v[lo + 1] * frac;
}

}  // namespace detail

// Re-solves the dataset once per seed 0..runs-1 and summarizes the
// objective distribution of each run.
inline std::vector<RunSummary> stability(const std::vector<RoutingInstance>& instances,
                                         SolveConfig cfg, int runs) {
  if (runs < 2) throw ConfigError("stability: runs must be >= 2");
  std::vector<RunSummary> out;
  for (int r = 0; r < runs; ++r) {
    cfg.seed = static_cast<std::uint64_t>(r);
    BenchReport report = bench(instances, cfg);
    if (report.records.empty()) throw ValidationError("stability: run produced no results");
    RunSummary s;
    s.seed = cfg.seed;
    for (const auto& row : report.records) s.objectives.push_back(row.objective);
    s.min = *std::min_element(s.objectives.begin(), s.objectives.end());
    s.max = *std::max_element(s.objectives.begin(), s.objectives.end());
    s.lower_quartile = detail::quantile(s.objectives, 0.25);
    s.upper_quartile = detail::quantile(s.objectives, 0.75);
    s.mean = report.mean;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace glop

#endif  // GLOP_PIPELINE_HPP
