// glop: hierarchical routing solver CLI (TSP / CVRP / PCTSP).

#include <cstdint>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "glop/instance_io.hpp"
#include "glop/neural_reviser.hpp"
#include "glop/partition.hpp"
#include "glop/pipeline.hpp"

namespace {

using namespace glop;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitConfig = 3;

ProblemKind parse_kind(const std::string& s) {
  if (s == "tsp") return ProblemKind::TSP;
  if (s == "cvrp") return ProblemKind::CVRP;
  if (s == "pctsp") return ProblemKind::PCTSP;
  throw ConfigError("unknown problem kind: " + s);
}

// Shared dataset source: an instance file (.tsp or JSON-lines) or a
// freshly generated dataset.
struct DatasetOpts {
  std::string input;
  int n = 0;
  int count = 0;
  std::uint64_t data_seed = 0;
  double capacity = 0.0;
  double kn = 0.0;
  bool normalize = false;
};

void add_dataset_opts(CLI::App* cmd, DatasetOpts& d) {
  cmd->add_option("--input", d.input, "instance file (.tsp TSPLIB or .jsonl)");
  cmd->add_option("--n", d.n, "instance size to generate");
  cmd->add_option("--count", d.count, "number of instances to generate");
  cmd->add_option("--data-seed", d.data_seed, "dataset generation seed");
  cmd->add_option("--capacity", d.capacity, "CVRP vehicle capacity (0 = scale default)");
  cmd->add_option("--kn", d.kn, "PCTSP prize scale K^n (0 = scale default)");
  cmd->add_flag("--normalize", d.normalize, "normalize TSPLIB coords to the unit square");
}

std::vector<RoutingInstance> load_dataset(const DatasetOpts& d, ProblemKind kind) {
  if (!d.input.empty()) {
    if (d.input.size() > 4 && d.input.substr(d.input.size() - 4) == ".tsp")
      return {parse_tsplib_file(d.input, d.normalize)};
    return read_instances(d.input);
  }
  if (d.n <= 0 || d.count <= 0)
    throw ConfigError("provide --input or both --n and --count");
  DatasetSpec spec;
  spec.kind = kind;
  spec.n = d.n;
  spec.count = d.count;
  spec.seed = d.data_seed;
  spec.capacity = d.capacity;
  spec.kn = d.kn;
  return generate(spec);
}

// Solve-path options shared by solve-*, bench, and stability.
struct SolveOpts {
  DatasetOpts data;
  std::string preset;
  std::vector<int> rs;
  std::vector<int> iters;
  int w = 1;
  std::string reviser = "2opt";
  std::string mode = "greedy";
  int num_samples = 1;
  int k = 0;
  int slack = 2;
  int dp_cap = 13;
  std::uint64_t seed = 0;
  std::string ckpt;
  std::string out;
  std::string ref;
};

void add_solve_opts(CLI::App* cmd, SolveOpts& s, ProblemKind kind) {
  add_dataset_opts(cmd, s.data);
  cmd->add_option("--preset", s.preset, "named config preset (tsp500-default, cvrp2k-default)");
  cmd->add_option("--rs", s.rs, "revision sizes, e.g. --rs 20 50 100")->delimiter(',');
  cmd->add_option("--iters", s.iters, "revision iterations per size")->delimiter(',');
  cmd->add_option("--W", s.w, "parallel insertion tours");
  cmd->add_option("--reviser", s.reviser, "dp | bf | 2opt | identity | neural:<ckpt>[,...]");
  cmd->add_option("--seed", s.seed, "solver seed");
  cmd->add_option("--out", s.out, "JSON-lines results file");
  cmd->add_option("--ref", s.ref, "JSON-lines reference results for gap reporting");
  if (kind != ProblemKind::TSP) {
    cmd->add_option("--mode", s.mode, "greedy | sample")
        ->check(CLI::IsMember({"greedy", "sample"}));
    cmd->add_option("--num-samples", s.num_samples, "partitions evaluated when sampling");
    cmd->add_option("--k", s.k, "sparse graph degree (0 = scale default)");
    cmd->add_option("--slack", s.slack, "extra vehicles over the capacity lower bound");
    cmd->add_option("--dp-cap", s.dp_cap, "exact sub-TSP size threshold");
    cmd->add_option("--ckpt", s.ckpt, "partition model checkpoint");
  }
}

SolveConfig build_config(const SolveOpts& s, ProblemKind kind) {
  SolveConfig cfg = s.preset.empty() ? SolveConfig{} : preset_config(s.preset);
  if (s.preset.empty()) cfg.kind = kind;
  if (cfg.kind != kind) throw ConfigError("preset problem kind does not match subcommand");
  if (!s.rs.empty() || !s.iters.empty()) {
    cfg.schedule.sizes = s.rs;
    cfg.schedule.iters = s.iters;
  }
  cfg.schedule.w = s.w;
  cfg.reviser = s.reviser;
  cfg.mode = s.mode == "sample" ? PartitionMode::Sample : PartitionMode::Greedy;
  cfg.num_samples = s.num_samples;
  cfg.k = s.k;
  cfg.slack = s.slack;
  cfg.dp_cap = s.dp_cap;
  cfg.seed = s.seed;
  cfg.partition_checkpoint = s.ckpt;
  if (!cfg.schedule.sizes.empty()) cfg.schedule.check();
  return cfg;
}

int run_bench_like(const SolveOpts& s, ProblemKind kind, bool print_rows) {
  std::vector<RoutingInstance> instances = load_dataset(s.data, kind);
  SolveConfig cfg = build_config(s, kind);
  std::vector<double> reference;
  if (!s.ref.empty())
    for (const auto& r : read_results(s.ref)) reference.push_back(r.objective);
  BenchReport report = bench(instances, cfg, reference);
  if (!s.out.empty()) write_results(s.out, report.records);
  if (print_rows)
    for (const auto& r : report.records) std::cout << to_json(r).dump() << "\n";
  std::cout << summarize(report);
  return report.errors.empty() ? kExitOk : kExitValidation;
}

int cmd_generate(const DatasetOpts& d, const std::string& problem, const std::string& out) {
  ProblemKind kind = parse_kind(problem);
  if (d.n <= 0 || d.count <= 0) throw ConfigError("generate needs --n and --count");
  DatasetSpec spec;
  spec.kind = kind;
  spec.n = d.n;
  spec.count = d.count;
  spec.seed = d.data_seed;
  spec.capacity = d.capacity;
  spec.kn = d.kn;
  std::vector<RoutingInstance> instances = generate(spec);
  if (kind == ProblemKind::TSP && d.count == 1 && out.size() > 4 &&
      out.substr(out.size() - 4) == ".tsp") {
    write_tsplib_file(out, instances[0], "generated-tsp");
  } else {
    write_instances(out, instances);
  }
  std::cout << "wrote " << instances.size() << " instance(s) to " << out << "\n";
  return kExitOk;
}

int cmd_train_reviser(int n, int steps, int batch, double lr, int emb, int heads, int layers,
                      int ff, std::uint64_t seed, const std::string& init,
                      const std::string& out) {
  PolicyConfig cfg;
  cfg.n = n;
  cfg.emb = emb;
  cfg.heads = heads;
  cfg.layers = layers;
  cfg.ff = ff;
  std::shared_ptr<NeuralReviser> reviser;
  if (!init.empty()) {
    reviser = load_reviser_checkpoint(init);
  } else {
    reviser = std::make_shared<NeuralReviser>(cfg, init_policy_params(cfg, Rng(seed)));
  }
  TrainConfig tc;
  tc.lr = lr;
  tc.batch = batch;
  tc.steps = steps;
  std::vector<double> curve = train_stage1(*reviser, tc, Rng(seed, {1}));
  save_reviser_checkpoint(out, reviser->config(), reviser->params());
  for (std::size_t i = 0; i < curve.size(); ++i)
    std::cout << nlohmann::json{{"step", i}, {"mean_sampled_length", curve[i]}}.dump() << "\n";
  std::cout << "saved reviser checkpoint to " << out << "\n";
  return kExitOk;
}

int cmd_train_partition(const std::string& problem, int n, int count, int k, int samples,
                        double lr, int epochs, std::uint64_t seed, const std::string& out) {
  ProblemKind kind = parse_kind(problem);
  if (kind == ProblemKind::TSP) throw ConfigError("train-partition needs cvrp or pctsp");
  DatasetSpec spec;
  spec.kind = kind;
  spec.n = n;
  spec.count = count;
  spec.seed = seed;
  std::vector<RoutingInstance> instances = generate(spec);
  GnnConfig cfg;
  cfg.kind = kind;
  ParamStore store = init_gnn_params(cfg, Rng(seed, {2}));
  Adam opt(lr);
  GlobalTrainConfig tc;
  tc.lr = lr;
  tc.samples = samples;
  SubTspSolver solver = make_sub_tsp_solver();
  Rng rng(seed, {3});
  for (int e = 0; e < epochs; ++e) {
    Rng step_rng = rng.child(e);
    GlobalTrainStats st = train_global_step(instances, store, cfg, solver, opt, step_rng, tc);
    std::cout << nlohmann::json{{"epoch", e},
                                {"mean_objective", st.mean_objective},
                                {"skipped", st.skipped_nonfinite}}
                     .dump()
              << "\n";
  }
  // ignore unused sparse-degree override for generated data of this scale
  (void)k;
  save_partition_checkpoint(out, cfg, store);
  std::cout << "saved partition checkpoint to " << out << "\n";
  return kExitOk;
}

int cmd_stability(const SolveOpts& s, const std::string& problem, int runs) {
  ProblemKind kind = parse_kind(problem);
  std::vector<RoutingInstance> instances = load_dataset(s.data, kind);
  SolveConfig cfg = build_config(s, kind);
  std::vector<RunSummary> summaries = stability(instances, cfg, runs);
  std::vector<ResultRecord> rows;
  for (const auto& run : summaries) {
    nlohmann::json j{{"seed", run.seed},
                     {"min", run.min},
                     {"lower_quartile", run.lower_quartile},
                     {"mean", run.mean},
                     {"upper_quartile", run.upper_quartile},
                     {"max", run.max}};
    std::cout << j.dump() << "\n";
  }
  if (!s.out.empty()) {
    std::ofstream f(s.out);
    if (!f) throw IoError("stability: cannot open " + s.out);
    for (const auto& run : summaries) {
      nlohmann::json j{{"seed", run.seed},          {"min", run.min},
                       {"lower_quartile", run.lower_quartile}, {"mean", run.mean},
                       {"upper_quartile", run.upper_quartile}, {"max", run.max},
                       {"objectives", run.objectives}};
      f << j.dump() << "\n";
    }
  }
  return kExitOk;
}

// Exact solvers exposed for external harnesses: closed-tour DP (and brute
// force) on small instances, or the SHPP variants with fixed endpoints.
int cmd_oracle(const DatasetOpts& d, const std::string& op, const std::string& out) {
  std::vector<RoutingInstance> instances = load_dataset(d, ProblemKind::TSP);
  std::vector<ResultRecord> rows;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const RoutingInstance& inst = instances[i];
    const int n = inst.size();
    ResultRecord r;
    r.id = "instance-" + std::to_string(i);
    r.method = "oracle/" + op;
    if (op == "dp-tsp") {
      std::vector<double> dist(static_cast<std::size_t>(n) * n);
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) dist[a * n + b] = inst.dist(a, b);
      r.objective = held_karp_tsp(dist, n);
    } else if (op == "dp-shpp" || op == "bf-shpp") {
      ShppTask task;
      task.nodes.resize(n);
      std::iota(task.nodes.begin(), task.nodes.end(), 0);
      task.raw = inst.coords;
      task.transformed = task.raw;
      std::vector<int> id(n);
      std::iota(id.begin(), id.end(), 0);
      task.length = path_coords_length(task.raw, id);
      PathOrder path = op == "dp-shpp" ? held_karp_shpp(task) : brute_force_shpp(task);
      r.objective = shpp_length(task, path);
    } else {
      throw ConfigError("unknown oracle op: " + op);
    }
    rows.push_back(std::move(r));
    std::cout << to_json(rows.back()).dump() << "\n";
  }
  if (!out.empty()) write_results(out, rows);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"glop: hierarchical TSP/CVRP/PCTSP solver"};
  app.require_subcommand(1);

  // generate
  DatasetOpts gen_data;
  std::string gen_problem = "tsp", gen_out;
  CLI::App* generate_cmd = app.add_subcommand("generate", "generate benchmark instances");
  add_dataset_opts(generate_cmd, gen_data);
  generate_cmd->add_option("--problem", gen_problem, "tsp | cvrp | pctsp");
  generate_cmd->add_option("--out", gen_out, "output file (.jsonl, or .tsp for one TSP)")
      ->required();

  // solve-*
  SolveOpts tsp_opts, cvrp_opts, pctsp_opts;
  CLI::App* solve_tsp_cmd = app.add_subcommand("solve-tsp", "solve TSP instances");
  add_solve_opts(solve_tsp_cmd, tsp_opts, ProblemKind::TSP);
  CLI::App* solve_cvrp_cmd = app.add_subcommand("solve-cvrp", "solve CVRP instances");
  add_solve_opts(solve_cvrp_cmd, cvrp_opts, ProblemKind::CVRP);
  CLI::App* solve_pctsp_cmd = app.add_subcommand("solve-pctsp", "solve PCTSP instances");
  add_solve_opts(solve_pctsp_cmd, pctsp_opts, ProblemKind::PCTSP);

  // train-reviser
  int tr_n = 10, tr_steps = 100, tr_batch = 64, tr_emb = 64, tr_heads = 2, tr_layers = 3,
      tr_ff = 128;
  double tr_lr = 1e-4;
  std::uint64_t tr_seed = 0;
  std::string tr_init, tr_out;
  CLI::App* train_reviser_cmd =
      app.add_subcommand("train-reviser", "stage-1 training of a neural reviser");
  train_reviser_cmd->add_option("--n", tr_n, "SHPP size");
  train_reviser_cmd->add_option("--steps", tr_steps, "optimizer steps");
  train_reviser_cmd->add_option("--batch-size", tr_batch, "tasks per step");
  train_reviser_cmd->add_option("--lr", tr_lr, "learning rate");
  train_reviser_cmd->add_option("--emb", tr_emb, "embedding dimension");
  train_reviser_cmd->add_option("--heads", tr_heads, "attention heads");
  train_reviser_cmd->add_option("--layers", tr_layers, "encoder layers");
  train_reviser_cmd->add_option("--ff", tr_ff, "feed-forward dimension");
  train_reviser_cmd->add_option("--seed", tr_seed, "training seed");
  train_reviser_cmd->add_option("--init", tr_init, "checkpoint to fine-tune");
  train_reviser_cmd->add_option("--out", tr_out, "checkpoint output path")->required();

  // train-partition
  std::string tp_problem = "cvrp", tp_out;
  int tp_n = 50, tp_count = 16, tp_k = 0, tp_samples = 8, tp_epochs = 50;
  double tp_lr = 1e-4;
  std::uint64_t tp_seed = 0;
  CLI::App* train_partition_cmd =
      app.add_subcommand("train-partition", "REINFORCE training of the partition model");
  train_partition_cmd->add_option("--problem", tp_problem, "cvrp | pctsp");
  train_partition_cmd->add_option("--n", tp_n, "training instance size");
  train_partition_cmd->add_option("--count", tp_count, "training instances");
  train_partition_cmd->add_option("--k", tp_k, "sparse graph degree");
  train_partition_cmd->add_option("--samples", tp_samples, "partitions per instance");
  train_partition_cmd->add_option("--lr", tp_lr, "learning rate");
  train_partition_cmd->add_option("--epochs", tp_epochs, "optimizer steps");
  train_partition_cmd->add_option("--seed", tp_seed, "training seed");
  train_partition_cmd->add_option("--out", tp_out, "checkpoint output path")->required();

  // bench
  SolveOpts bench_opts;
  std::string bench_problem = "tsp";
  CLI::App* bench_cmd = app.add_subcommand("bench", "benchmark a dataset");
  bench_cmd->add_option("--problem", bench_problem, "tsp | cvrp | pctsp");
  add_solve_opts(bench_cmd, bench_opts, ProblemKind::CVRP);  // exposes all flags

  // stability
  SolveOpts stab_opts;
  std::string stab_problem = "tsp";
  int stab_runs = 10;
  CLI::App* stability_cmd =
      app.add_subcommand("stability", "objective spread across independent runs");
  stability_cmd->add_option("--problem", stab_problem, "tsp | cvrp | pctsp");
  stability_cmd->add_option("--runs", stab_runs, "independent runs (seeds 0..runs-1)");
  add_solve_opts(stability_cmd, stab_opts, ProblemKind::CVRP);

  // oracle
  DatasetOpts oracle_data;
  std::string oracle_op = "dp-tsp", oracle_out;
  CLI::App* oracle_cmd = app.add_subcommand("oracle", "exact small-instance solvers");
  add_dataset_opts(oracle_cmd, oracle_data);
  oracle_cmd->add_option("--op", oracle_op, "dp-tsp | dp-shpp | bf-shpp");
  oracle_cmd->add_option("--out", oracle_out, "JSON-lines results file");

  try {
    app.parse(argc, argv);
    if (generate_cmd->parsed()) return cmd_generate(gen_data, gen_problem, gen_out);
    if (solve_tsp_cmd->parsed()) return run_bench_like(tsp_opts, ProblemKind::TSP, true);
    if (solve_cvrp_cmd->parsed()) return run_bench_like(cvrp_opts, ProblemKind::CVRP, true);
    if (solve_pctsp_cmd->parsed()) return run_bench_like(pctsp_opts, ProblemKind::PCTSP, true);
    if (train_reviser_cmd->parsed())
      return cmd_train_reviser(tr_n, tr_steps, tr_batch, tr_lr, tr_emb, tr_heads, tr_layers,
                               tr_ff, tr_seed, tr_init, tr_out);
    if (train_partition_cmd->parsed())
      return cmd_train_partition(tp_problem, tp_n, tp_count, tp_k, tp_samples, tp_lr,
                                 tp_epochs, tp_seed, tp_out);
    if (bench_cmd->parsed())
      return run_bench_like(bench_opts, parse_kind(bench_problem), false);
    if (stability_cmd->parsed()) return cmd_stability(stab_opts, stab_problem, stab_runs);
    if (oracle_cmd->parsed()) return cmd_oracle(oracle_data, oracle_op, oracle_out);
    return kExitConfig;
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
}
