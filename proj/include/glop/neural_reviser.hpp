#ifndef GLOP_NEURAL_REVISER_HPP
#define GLOP_NEURAL_REVISER_HPP

#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "glop/autodiff.hpp"
#include "glop/core.hpp"
#include "glop/insertion.hpp"
#include "glop/instance_io.hpp"
#include "glop/revision.hpp"
#include "glop/rng.hpp"
#include "glop/shpp.hpp"
#include "glop/shpp_solvers.hpp"

#include "json.hpp"

namespace glop {

// Attention-based local policy for SHPP reconstruction. Toy defaults; the
// paper-scale shape (128-dim, 8 heads, 6 layers) is selectable by config.
struct PolicyConfig {
  int n = 10;          // segment size the reviser is trained for
  int emb = 64;        // embedding dimension
  int heads = 2;       // attention heads (emb % heads == 0)
  int layers = 3;      // encoder layers
  int ff = 128;        // feed-forward hidden dimension
  double clip = 10.0;  // tanh logit clipping

  int head_dim() const { return emb / heads; }
};

struct TrainConfig {
  double lr = 1e-4;
  int batch = 64;
  int steps = 100;         // optimizer steps per stage/epoch
  double clip_norm = 1.0;  // gradient clip (global norm); 0 disables
  double lr_decay = 1.0;   // multiplicative decay per epoch (stage 2: 0.99)
  int curriculum_stage = 1;
};

inline nlohmann::json to_json(const PolicyConfig& c) {
  return {{"n", c.n},      {"emb", c.emb}, {"heads", c.heads},
          {"layers", c.layers}, {"ff", c.ff},   {"clip", c.clip}};
}

inline PolicyConfig policy_config_from_json(const nlohmann::json& j) {
  PolicyConfig c;
  c.n = j.at("n");
  c.emb = j.at("emb");
  c.heads = j.at("heads");
  c.layers = j.at("layers");
  c.ff = j.at("ff");
  c.clip = j.at("clip");
  return c;
}

namespace detail {

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline Mat glorot(int rows, int cols, Rng& rng) {
  Mat m(rows, cols);
  double s = std::sqrt(6.0 / (rows + cols));
  for (double& v : m.a) v = s * (2.0 * rng.uniform() - 1.0);
  return m;
}

}  // namespace detail

// Fresh parameter store for a policy of the given shape.
inline ParamStore init_policy_params(const PolicyConfig& cfg, Rng rng) {
  ParamStore s;
  const int d = cfg.emb, dh = cfg.head_dim();
  if (d % cfg.heads != 0) throw ValidationError("policy: emb must divide by heads");
  s.params["embed.W"] = detail::glorot(2, d, rng);
  s.params["embed.b"] = Mat(1, d);
  for (int l = 0; l < cfg.layers; ++l) {
    std::string p = "enc" + std::to_string(l) + ".";
    for (int h = 0; h < cfg.heads; ++h) {
      std::string hp = p + std::to_string(h) + ".";
      s.params[hp + "Wq"] = detail::glorot(d, dh, rng);
      s.params[hp + "Wk"] = detail::glorot(d, dh, rng);
      s.params[hp + "Wv"] = detail::glorot(d, dh, rng);
      s.params[hp + "Wo"] = detail::glorot(dh, d, rng);
    }
    s.params[p + "ln1.g"] = Mat(1, d, 1.0);
    s.params[p + "ln1.b"] = Mat(1, d);
    s.params[p + "ff.W1"] = detail::glorot(d, cfg.ff, rng);
    s.params[p + "ff.b1"] = Mat(1, cfg.ff);
    s.params[p + "ff.W2"] = detail::glorot(cfg.ff, d, rng);
    s.params[p + "ff.b2"] = Mat(1, d);
    s.params[p + "ln2.g"] = Mat(1, d, 1.0);
    s.params[p + "ln2.b"] = Mat(1, d);
  }
  s.params["dec.Wctx"] = detail::glorot(3 * d, d, rng);
  s.params["dec.Wk"] = detail::glorot(d, d, rng);
  return s;
}

// Parameter leaves bound into one tape.
struct BoundPolicy {
  Tape* tape = nullptr;
  const PolicyConfig* cfg = nullptr;
  std::map<std::string, int> ids;

  int id(const std::string& name) const { return ids.at(name); }
};

inline BoundPolicy bind_policy(Tape& t, const ParamStore& store, const PolicyConfig& cfg) {
  BoundPolicy b;
  b.tape = &t;
  b.cfg = &cfg;
  for (const auto& [name, m] : store.params) b.ids[name] = t.leaf(m, name);
  return b;
}

// AM-style encoder: linear node embedding, then `layers` blocks of
// multi-head self-attention and feed-forward, each with a residual and a
// row-wise layer norm. Returns the n x emb node embedding matrix.
inline int encode(Tape& t, const BoundPolicy& b, const std::vector<Point>& coords) {
  const PolicyConfig& cfg = *b.cfg;
  const int n = static_cast<int>(coords.size());
  Mat C(n, 2);
  for (int i = 0; i < n; ++i) { C(i, 0) = coords[i].x; C(i, 1) = coords[i].y; }
  int x = ad::add_rowvec(t, ad::matmul(t, t.leaf(std::move(C)), b.id("embed.W")), b.id("embed.b"));
  std::vector<char> full(static_cast<std::size_t>(n) * n, 1);
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(cfg.head_dim()));
  for (int l = 0; l < cfg.layers; ++l) {
    std::string p = "enc" + std::to_string(l) + ".";
    int attn = -1;
    for (int h = 0; h < cfg.heads; ++h) {
      std::string hp = p + std::to_string(h) + ".";
      int q = ad::matmul(t, x, b.id(hp + "Wq"));
      int k = ad::matmul(t, x, b.id(hp + "Wk"));
      int v = ad::matmul(t, x, b.id(hp + "Wv"));
      int scores = ad::scale(t, ad::matmul(t, q, k, false, true), inv_sqrt_dh);
      int probs = ad::masked_softmax_rows(t, scores, full);
      int head = ad::matmul(t, ad::matmul(t, probs, v), b.id(hp + "Wo"));
      attn = (attn < 0) ? head : ad::add(t, attn, head);
    }
    x = ad::layer_norm(t, ad::add(t, x, attn), b.id(p + "ln1.g"), b.id(p + "ln1.b"));
    int f = ad::add_rowvec(
        t,
        ad::matmul(t, ad::relu(t, ad::add_rowvec(t, ad::matmul(t, x, b.id(p + "ff.W1")),
                                                 b.id(p + "ff.b1"))),
                   b.id(p + "ff.W2")),
        b.id(p + "ff.b2"));
    x = ad::layer_norm(t, ad::add(t, x, f), b.id(p + "ln2.g"), b.id(p + "ln2.b"));
  }
  return x;
}

enum class DecodeMode { Greedy, Sample, Replay };

struct Rollout {
  PathOrder path;       // start -> terminal order over local positions
  std::vector<int> actions;  // interior picks in decode order
  int logp_node = -1;   // 1x1 tape node: sum of per-step log-probs
  double logp = 0.0;
  double length = 0.0;  // in the coords used for decoding
};

// One autoregressive decode over local positions. Forward direction fixes
// start = 0 and destination = n-1; the backward direction swaps the roles
// and the returned path is reversed back into start -> terminal order.
// The context embedding is [graph embedding; last visited; destination].
inline Rollout decode_rollout(Tape& t, const BoundPolicy& b, int node_emb,
                              const std::vector<Point>& coords, bool backward_dir,
                              DecodeMode mode, Rng* rng = nullptr,
                              const std::vector<int>* replay = nullptr) {
  const PolicyConfig& cfg = *b.cfg;
  const int n = static_cast<int>(coords.size());
  if (n < 3) {
    Rollout r;
    r.path.order = {0, n - 1};
    r.logp_node = t.leaf(Mat(1, 1, 0.0));
    if (n == 2) r.length = euclid(coords[0], coords[1]);
    return r;
  }
  const int start = backward_dir ? n - 1 : 0;
  const int dest = backward_dir ? 0 : n - 1;
  int graph = ad::mean_rows(t, node_emb);
  int keys = ad::matmul(t, node_emb, b.id("dec.Wk"));
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(cfg.emb));

  std::vector<char> visited(n, 0);
  visited[start] = 1;
  visited[dest] = 1;
  int last = start;
  Rollout r;
  r.path.order.reserve(n);
  r.path.order.push_back(start);
  int logp = t.leaf(Mat(1, 1, 0.0));
  for (int step = 0; step < n - 2; ++step) {
    int ctx = ad::concat_cols(t, {graph, ad::gather_rows(t, node_emb, {last}),
                                  ad::gather_rows(t, node_emb, {dest})});
    int q = ad::matmul(t, ctx, b.id("dec.Wctx"));
    int logits = ad::scale(
        t, ad::tanh_op(t, ad::scale(t, ad::matmul(t, q, keys, false, true), inv_sqrt_d)),
        cfg.clip);
    std::vector<char> feasible(n);
    for (int j = 0; j < n; ++j) feasible[j] = !visited[j];
    int pick = -1;
    const Mat& lv = t.val(logits);
    if (mode == DecodeMode::Replay) {
      pick = (*replay)[step];
    } else if (mode == DecodeMode::Greedy) {
      double best = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < n; ++j)
        if (feasible[j] && lv(0, j) > best) { best = lv(0, j); pick = j; }
    } else {
      double mx = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < n; ++j)
        if (feasible[j]) mx = std::max(mx, lv(0, j));
      double z = 0.0;
      for (int j = 0; j < n; ++j)
        if (feasible[j]) z += std::exp(lv(0, j) - mx);
      double u = rng->uniform() * z;
      double acc = 0.0;
      for (int j = 0; j < n; ++j) {
        if (!feasible[j]) continue;
        acc += std::exp(lv(0, j) - mx);
        pick = j;
        if (u < acc) break;
      }
    }
    if (pick < 0 || visited[pick]) throw std::logic_error("decode: no feasible action");
    logp = ad::add(t, logp, ad::masked_log_prob(t, logits, feasible, pick));
    r.actions.push_back(pick);
    visited[pick] = 1;
    r.path.order.push_back(pick);
    last = pick;
  }
  r.path.order.push_back(dest);
  if (backward_dir) std::reverse(r.path.order.begin(), r.path.order.end());
  r.logp_node = logp;
  r.logp = t.val(logp)(0, 0);
  r.length = path_coords_length(coords, r.path.order);
  return r;
}

struct DecodeOutput {
  Rollout fd;
  Rollout bd;
};

inline DecodeOutput decode_bidirectional(Tape& t, const BoundPolicy& b, int node_emb,
                                         const std::vector<Point>& coords, DecodeMode mode,
                                         Rng* rng = nullptr) {
  DecodeOutput out;
  out.fd = decode_rollout(t, b, node_emb, coords, false, mode, rng);
  out.bd = decode_rollout(t, b, node_emb, coords, true, mode, rng);
  return out;
}

// Greedy bidirectional inference: the better of the two decoded paths.
inline PathOrder policy_inference(const ParamStore& store, const PolicyConfig& cfg,
                                  const std::vector<Point>& coords) {
  Tape t;
  BoundPolicy b = bind_policy(t, store, cfg);
  int x = encode(t, b, coords);
  DecodeOutput out = decode_bidirectional(t, b, x, coords, DecodeMode::Greedy);
  return out.fd.length <= out.bd.length ? out.fd.path : out.bd.path;
}

// --- training ---------------------------------------------------------------

// Multi-distribution stage-1 sampling: y_max uniform on (0,1], nodes
// uniform on [0,1] x [0,y_max]; endpoints are the first/last samples.
inline ShppTask sample_stage1_shpp(int n, Rng& rng) {
  if (n < 4) throw ValidationError("sample_stage1_shpp: n >= 4");
  ShppTask t;
  double y_max = 1.0 - rng.uniform();  // (0, 1]
  t.nodes.resize(n);
  std::iota(t.nodes.begin(), t.nodes.end(), 0);
  t.raw.resize(n);
  for (auto& p : t.raw) p = {rng.uniform(), rng.uniform() * y_max};
  t.transformed = t.raw;
  t.transform.y_max = y_max;
  std::vector<int> id(n);
  std::iota(id.begin(), id.end(), 0);
  t.length = path_coords_length(t.raw, id);
  return t;
}

struct TrainStepStats {
  double mean_sampled_length = 0.0;
  double mean_advantage = 0.0;
  int skipped_nonfinite = 0;
};

// One REINFORCE step on a batch of equal-size tasks: two sampled rollouts
// per task with the mean of the two greedy rollouts as the baseline.
inline TrainStepStats train_step(const std::vector<ShppTask>& batch, ParamStore& store,
                                 const PolicyConfig& cfg, Adam& opt, Rng& rng,
                                 double clip_norm = 1.0) {
  TrainStepStats stats;
  std::map<std::string, Mat> grads;
  int contributions = 0;
  struct PerTask {
    std::map<std::string, Mat> g;
    double sampled_len = 0.0;
    double advantage = 0.0;
    bool ok = false;
  };
  std::vector<PerTask> results(batch.size());
  std::vector<Rng> task_rngs;
  task_rngs.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) task_rngs.push_back(rng.child(i));
  parallel_for(static_cast<int>(batch.size()), [&](int i) {
    const ShppTask& task = batch[i];
    const std::vector<Point>& pts = task.transformed.empty() ? task.raw : task.transformed;
    Tape t;
    BoundPolicy b = bind_policy(t, store, cfg);
    int x = encode(t, b, pts);
    DecodeOutput greedy = decode_bidirectional(t, b, x, pts, DecodeMode::Greedy);
    double baseline = 0.5 * (greedy.fd.length + greedy.bd.length);
    Rng r = std::move(task_rngs[i]);
    DecodeOutput sampled = decode_bidirectional(t, b, x, pts, DecodeMode::Sample, &r);
    double adv_fd = sampled.fd.length - baseline;
    double adv_bd = sampled.bd.length - baseline;
    int loss = ad::add(t, ad::scale(t, sampled.fd.logp_node, adv_fd),
                       ad::scale(t, sampled.bd.logp_node, adv_bd));
    t.backward(loss);
    PerTask& out = results[i];
    out.g = t.named_grads();
    out.sampled_len = 0.5 * (sampled.fd.length + sampled.bd.length);
    out.advantage = 0.5 * (adv_fd + adv_bd);
    out.ok = true;
    for (const auto& [k, g] : out.g)
      for (double v : g.a)
        if (!std::isfinite(v)) { out.ok = false; return; }
  });
  for (auto& res : results) {
    if (!res.ok) { ++stats.skipped_nonfinite; continue; }
    ++contributions;
    stats.mean_sampled_length += res.sampled_len;
    stats.mean_advantage += res.advantage;
    for (auto& [k, g] : res.g) {
      Mat& dst = grads[k];
      if (dst.rows == 0) dst = Mat(g.rows, g.cols);
      for (std::size_t j = 0; j < g.a.size(); ++j) dst.a[j] += g.a[j];
    }
  }
  if (contributions > 0) {
    for (auto& [k, g] : grads)
      for (double& v : g.a) v /= contributions;
    opt.step(store, grads, clip_norm);
    stats.mean_sampled_length /= contributions;
    stats.mean_advantage /= contributions;
  }
  return stats;
}

// A reviser of a fixed size plus its parameters; pluggable into the
// revision engine. Scale-sensitive, so it consumes the 4x augmentation.
class NeuralReviser final : public Reviser {
 public:
  NeuralReviser(PolicyConfig cfg, ParamStore store)
      : cfg_(cfg), store_(std::move(store)) {}

  std::string name() const override { return "neural:" + std::to_string(cfg_.n); }
  int max_size() const override { return cfg_.n; }
  bool uses_augmentation() const override { return true; }
  PathOrder propose(const ShppTask& task) override {
    const std::vector<Point>& pts = task.transformed.empty() ? task.raw : task.transformed;
    return policy_inference(store_, cfg_, pts);
  }

  PolicyConfig& config() { return cfg_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

 private:
  PolicyConfig cfg_;
  ParamStore store_;
};

// --- checkpointing ----------------------------------------------------------

inline nlohmann::json weights_to_json(const ParamStore& store) {
  nlohmann::json w;
  for (const auto& [name, m] : store.params)
    w[name] = {{"rows", m.rows}, {"cols", m.cols}, {"data", m.a}};
  return w;
}

inline ParamStore weights_from_json(const nlohmann::json& w) {
  ParamStore s;
  for (auto it = w.begin(); it != w.end(); ++it) {
    Mat m(it.value().at("rows").get<int>(), it.value().at("cols").get<int>());
    m.a = it.value().at("data").get<std::vector<double>>();
    if (m.a.size() != static_cast<std::size_t>(m.rows) * m.cols)
      throw IoError("checkpoint: weight size mismatch for " + it.key());
    s.params[it.key()] = std::move(m);
  }
  return s;
}

inline void save_reviser_checkpoint(const std::string& path, const PolicyConfig& cfg,
                                    const ParamStore& store) {
  nlohmann::json j;
  j["format"] = 1;
  j["kind"] = "reviser";
  j["config"] = to_json(cfg);
  j["digest"] = detail::fnv1a(j["config"].dump());
  j["weights"] = weights_to_json(store);
  std::ofstream f(path);
  if (!f) throw IoError("checkpoint: cannot open " + path);
  f << j.dump();
}

inline std::shared_ptr<NeuralReviser> load_reviser_checkpoint(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("checkpoint: cannot open " + path);
  nlohmann::json j = nlohmann::json::parse(f);
  if (j.at("kind") != "reviser") throw IoError("checkpoint: not a reviser checkpoint");
  PolicyConfig cfg = policy_config_from_json(j.at("config"));
  if (j.at("digest").get<std::uint64_t>() != detail::fnv1a(j.at("config").dump()))
    throw IoError("checkpoint: config digest mismatch");
  return std::make_shared<NeuralReviser>(cfg, weights_from_json(j.at("weights")));
}

// --- two-stage curriculum ---------------------------------------------------

// Stage 1: train one reviser on freshly sampled multi-distribution SHPPs.
// Returns the training curve: after every step, the mean greedy-decoded
// length on a fixed evaluation batch drawn once up front (a deterministic
// monitoring signal, unlike per-batch sampled lengths).
inline std::vector<double> train_stage1(NeuralReviser& reviser, const TrainConfig& tc, Rng rng) {
  Adam opt(tc.lr);
  const int eval_count = 64;
  std::vector<ShppTask> eval_batch;
  eval_batch.reserve(eval_count);
  Rng eval_gen = rng.child(0xe7a1);
  for (int i = 0; i < eval_count; ++i)
    eval_batch.push_back(sample_stage1_shpp(reviser.config().n, eval_gen));
  auto eval_mean = [&]() {
    std::vector<double> lens(eval_batch.size());
    parallel_for(static_cast<int>(eval_batch.size()), [&](int i) {
      const ShppTask& task = eval_batch[i];
      PathOrder p = policy_inference(reviser.params(), reviser.config(), task.transformed);
      lens[i] = path_coords_length(task.transformed, p.order);
    });
    double s = 0.0;
    for (double v : lens) s += v;
    return s / static_cast<double>(lens.size());
  };
  std::vector<double> curve;
  curve.reserve(tc.steps);
  for (int step = 0; step < tc.steps; ++step) {
    Rng step_rng = rng.child(step);
    std::vector<ShppTask> batch;
    batch.reserve(tc.batch);
    Rng gen = step_rng.child(0);
    for (int i = 0; i < tc.batch; ++i) batch.push_back(sample_stage1_shpp(reviser.config().n, gen));
    Rng train_rng = step_rng.child(1);
    train_step(batch, reviser.params(), reviser.config(), opt, train_rng, tc.clip_norm);
    curve.push_back(eval_mean());
  }
  return curve;
}

// Stage 2: collaborative fine-tuning along the inference pipeline. Uniform
// TSP tours are decomposed at the largest size; each fine-tuned reviser is
// run on its instances and the improved subtours are re-decomposed at the
// next size to fine-tune the next reviser.
inline void curriculum_stage2(std::vector<std::shared_ptr<NeuralReviser>>& revisers,
                              const TrainConfig& tc, int tsp_n, Rng rng) {
  if (revisers.empty() || tc.steps == 0) return;
  for (std::size_t i = 1; i < revisers.size(); ++i)
    if (revisers[i]->config().n >= revisers[i - 1]->config().n)
      throw ValidationError("curriculum_stage2: revisers must be ordered by size desc");

  // source SHPPs from insertion tours on uniform TSP
  const int instances = std::max(1, tc.batch / 4);
  std::vector<ShppTask> tasks;
  Rng gen = rng.child(0);
  for (int i = 0; i < instances; ++i) {
    RoutingInstance inst = generate_uniform_tsp_one(tsp_n, gen.child(i));
    Tour tour = random_insertion(inst, gen.child(i).child(1));
    auto dec = decompose(inst, tour, revisers[0]->config().n,
                         static_cast<int>(gen.child(i).child(2).uniform_index(tsp_n)));
    for (auto& t : dec.tasks) tasks.push_back(std::move(t));
  }

  Rng stage_rng = rng.child(1);
  for (std::size_t ri = 0; ri < revisers.size(); ++ri) {
    NeuralReviser& rev = *revisers[ri];
    Adam opt(tc.lr);
    Rng rev_rng = stage_rng.child(ri);
    for (int step = 0; step < tc.steps; ++step) {
      // draw a batch from the task pool
      Rng step_rng = rev_rng.child(step);
      std::vector<ShppTask> batch;
      for (int i = 0; i < tc.batch; ++i)
        batch.push_back(tasks[step_rng.uniform_index(tasks.size())]);
      train_step(batch, rev.params(), rev.config(), opt, step_rng, tc.clip_norm);
      opt.set_lr(opt.lr() * tc.lr_decay);
    }
    // run the fine-tuned reviser over its tasks, then re-decompose the
    // improved subtours at the next size
    reconstruct_batch(tasks, rev);
    if (ri + 1 < revisers.size()) {
      const int next_n = revisers[ri + 1]->config().n;
      std::vector<ShppTask> next;
      for (const ShppTask& t : tasks) {
        const int k = t.size() / next_n;
        for (int seg = 0; seg < k; ++seg) {
          ShppTask sub;
          sub.nodes.assign(t.nodes.begin() + seg * next_n, t.nodes.begin() + (seg + 1) * next_n);
          sub.raw.assign(t.raw.begin() + seg * next_n, t.raw.begin() + (seg + 1) * next_n);
          transform(sub);
          std::vector<int> id(next_n);
          std::iota(id.begin(), id.end(), 0);
          sub.length = path_coords_length(sub.raw, id);
          next.push_back(std::move(sub));
        }
      }
      tasks = std::move(next);
    }
  }
}

}  // namespace glop

#endif  // GLOP_NEURAL_REVISER_HPP
