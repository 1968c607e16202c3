// Copyright 2026 The STAR Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "star/network.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "star/errors.hpp"

namespace star {
namespace {

constexpr std::uint64_t kInitStream = 0x1417;
constexpr std::uint64_t kTrainStream = 0x7a11;
constexpr std::uint64_t kEvalStream = 0xe7a1;

int encoder_index(const ModelParams& p, int agent) { return p.config.per_agent_encoders ? agent : 0; }

// Observation encoder on a block of columns. Caches are optional.
Matrix encode_block(const ModelParams& p, int agent, const Matrix& glimpses, const Matrix& loc_inputs,
                    Matrix* enc_glimpse, Matrix* enc_loc) {
  if (!p.config.use_encoder) return glimpses;
  const int e = encoder_index(p, agent);
  Matrix a = relu_forward(linear_forward(p.at(p.layout.enc_glimpse[e]), glimpses));
  Matrix b = relu_forward(linear_forward(p.at(p.layout.enc_loc[e]), loc_inputs));
  Matrix o = relu_forward(linear_forward(p.at(p.layout.enc_out[e]), Matrix(a + b)));
  if (enc_glimpse != nullptr) *enc_glimpse = std::move(a);
  if (enc_loc != nullptr) *enc_loc = std::move(b);
  return o;
}

int argmax(const Eigen::Ref<const Vector>& v) {
  Index best = 0;
  v.maxCoeff(&best);
  return static_cast<int>(best);
}

}  // namespace

int ModelParams::find(const std::string& name) const {
  for (std::size_t i = 0; i < groups.size(); ++i)
    if (groups[i].name == name) return static_cast<int>(i);
  return -1;
}

std::vector<ParamGroup*> ModelParams::pointers() {
  std::vector<ParamGroup*> out;
  out.reserve(groups.size());
  for (ParamGroup& g : groups) out.push_back(&g);
  return out;
}

void ModelParams::zero_grad() {
  for (ParamGroup& g : groups) g.zero_grad();
}

Index ModelParams::size() const {
  Index total = 0;
  for (const ParamGroup& g : groups) total += g.size();
  return total;
}

Index observation_width(const RunConfig& cfg) {
  return cfg.use_encoder ? cfg.enc_out_width : cfg.glimpse_geometry().length();
}

Index merge_width(const RunConfig& cfg) {
  return static_cast<Index>(cfg.agents) * (cfg.use_conv_merge ? cfg.conv_filters : observation_width(cfg));
}

ModelParams make_model_params(const RunConfig& cfg) {
  cfg.validate();
  ModelParams p;
  p.config = cfg;
  auto add = [&p](ParamGroup g) {
    p.groups.push_back(std::move(g));
    return static_cast<int>(p.groups.size() - 1);
  };
  const Index glimpse_len = cfg.glimpse_geometry().length();
  const Index ow = observation_width(cfg);
  if (cfg.use_encoder) {
    const int n_enc = cfg.per_agent_encoders ? cfg.agents : 1;
    for (int e = 0; e < n_enc; ++e) {
      const std::string suffix = cfg.per_agent_encoders ? "_" + std::to_string(e) : "";
      p.layout.enc_glimpse.push_back(add(ParamGroup("enc_glimpse" + suffix, cfg.enc_glimpse_width, glimpse_len)));
      p.layout.enc_loc.push_back(add(ParamGroup("enc_loc" + suffix, cfg.enc_loc_width, 2)));
      if (cfg.enc_glimpse_width != cfg.enc_loc_width) {
        throw ConfigError("enc_glimpse_width and enc_loc_width must match: their outputs are summed");
      }
      p.layout.enc_out.push_back(add(ParamGroup("enc_out" + suffix, cfg.enc_out_width, cfg.enc_glimpse_width)));
    }
  }
  if (cfg.use_conv_merge) p.layout.conv = add(ParamGroup("conv", cfg.conv_filters, ow));
  p.layout.core = add(make_lstm("core", merge_width(cfg), cfg.core_width));
  for (int a = 0; a < cfg.agents; ++a) {
    p.layout.loc_heads.push_back(add(ParamGroup("loc_head_" + std::to_string(a), 1, cfg.core_width + ow)));
  }
  if (cfg.use_time_action) p.layout.time_head = add(ParamGroup("time_head", 1, cfg.core_width));
  p.layout.classifier = add(ParamGroup("classifier", cfg.classes, cfg.core_width));
  return p;
}

void init_model_params(ModelParams& params, std::uint64_t seed) {
  Rng rng = make_stream(seed, {kInitStream});
  for (std::size_t i = 0; i < params.groups.size(); ++i) {
    if (static_cast<int>(i) == params.layout.core) {
      init_lstm(params.groups[i], rng);
    } else {
      init_glorot(params.groups[i], rng);
    }
  }
}

Vector encode_observation(const ModelParams& params, int agent, const Vector& glimpse,
                          NormalizedLocation loc) {
  if (glimpse.size() != params.config.glimpse_geometry().length()) {
    throw DimensionError("encode_observation: glimpse length " + std::to_string(glimpse.size()) +
                         " vs expected " + std::to_string(params.config.glimpse_geometry().length()));
  }
  Matrix q(2, 1);
  q << loc.t, loc.l;
  return encode_block(params, agent, glimpse, q, nullptr, nullptr).col(0);
}

SharedObservation merge_observations(const ModelParams& params, const std::vector<Vector>& observations) {
  const RunConfig& cfg = params.config;
  if (static_cast<int>(observations.size()) != cfg.agents) {
    throw DimensionError("merge_observations: expected " + std::to_string(cfg.agents) + " observations");
  }
  SharedObservation out;
  out.stacked.resize(cfg.agents, observation_width(cfg));
  for (int a = 0; a < cfg.agents; ++a) out.stacked.row(a) = observations[static_cast<std::size_t>(a)].transpose();
  const Matrix& grid = cfg.use_conv_merge ? (out.conv_out = conv_1xM_forward(params.at(params.layout.conv), out.stacked))
                                          : out.stacked;
  out.merged.resize(grid.size());
  for (Index a = 0; a < grid.rows(); ++a) out.merged.segment(a * grid.cols(), grid.cols()) = grid.row(a).transpose();
  return out;
}

LstmState core_step(const ModelParams& params, const Vector& merged, const LstmState& state) {
  return lstm_cell_forward(params.at(params.layout.core), merged, state);
}

ProposedActions propose_actions(const ModelParams& params, const Vector& hidden,
                                const std::vector<Vector>& observations, Rng& rng) {
  const RunConfig& cfg = params.config;
  ProposedActions out;
  for (int a = 0; a < cfg.agents; ++a) {
    const Vector& o = observations.at(static_cast<std::size_t>(a));
    Vector joint(hidden.size() + o.size());
    joint << hidden, o;
    const double mean = std::tanh(linear_forward(params.at(params.layout.loc_heads[static_cast<std::size_t>(a)]), joint)(0));
    out.locations.push_back(sample_from_mean(mean, cfg.variance, rng));
  }
  if (cfg.use_time_action) {
    const double mean = std::tanh(linear_forward(params.at(params.layout.time_head), hidden)(0));
    out.time = sample_from_mean(mean, cfg.effective_time_variance(), rng);
  }
  return out;
}

Vector classify(const ModelParams& params, const Vector& hidden) {
  return softmax(linear_forward(params.at(params.layout.classifier), hidden));
}

// ---- Rollout -------------------------------------------------------------------

Rollout::Rollout(const ModelParams& params, std::vector<const Window*> windows, std::span<Rng> rngs,
                 std::span<const Trajectory* const> replay)
    : params_(&params), windows_(std::move(windows)), n_(static_cast<Index>(windows_.size())) {
  const RunConfig& cfg = params.config;
  const int H = cfg.agents;
  const int S = cfg.episode_length;
  const GlimpseGeometry geom = cfg.glimpse_geometry();
  const Index G = geom.length();
  const Index ow = observation_width(cfg);
  const Index n = n_;
  const double var = cfg.variance;
  const double tvar = cfg.effective_time_variance();
  if (static_cast<Index>(rngs.size()) != n) throw DimensionError("Rollout: one stream per column required");
  if (!replay.empty() && static_cast<Index>(replay.size()) != n) {
    throw DimensionError("Rollout: replay needs one trajectory per column");
  }
  for (const Window* w : windows_) {
    if (w->values.rows() != cfg.window_length || w->values.cols() != cfg.channels) {
      throw DimensionError("Rollout: window is " + std::to_string(w->values.rows()) + "x" +
                           std::to_string(w->values.cols()) + ", model expects " +
                           std::to_string(cfg.window_length) + "x" + std::to_string(cfg.channels));
    }
  }

  Matrix t(1, n);
  Matrix l(H, n);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  for (Index k = 0; k < n; ++k) {
    if (!replay.empty()) {
      const StepRecord& first = replay[static_cast<std::size_t>(k)]->steps.at(0);
      t(0, k) = first.observed.at(0).t;
      for (int a = 0; a < H; ++a) l(a, k) = first.observed.at(static_cast<std::size_t>(a)).l;
    } else {
      Rng& rng = rngs[static_cast<std::size_t>(k)];
      t(0, k) = uniform(rng);
      for (int a = 0; a < H; ++a) l(a, k) = uniform(rng);
    }
  }

  LstmState state = LstmState::zeros(cfg.core_width, n);
  const ParamGroup& core = params.at(params.layout.core);
  const ParamGroup& classifier = params.at(params.layout.classifier);
  steps_.resize(static_cast<std::size_t>(S));
  for (int s = 0; s < S; ++s) {
    Step& st = steps_[static_cast<std::size_t>(s)];
    st.t = t;
    st.l = l;
    st.glimpses.resize(G, H * n);
    st.loc_inputs.resize(2, H * n);
    for (int a = 0; a < H; ++a) {
      for (Index k = 0; k < n; ++k) {
        const Index col = a * n + k;
        foveate_into(windows_[static_cast<std::size_t>(k)]->values, {t(0, k), l(a, k)}, geom,
                     st.glimpses.col(col).data());
        st.loc_inputs(0, col) = t(0, k);
        st.loc_inputs(1, col) = l(a, k);
      }
    }

    if (!cfg.use_encoder) {
      st.obs = st.glimpses;
    } else if (!cfg.per_agent_encoders) {
      st.obs = encode_block(params, 0, st.glimpses, st.loc_inputs, &st.enc_glimpse, &st.enc_loc);
    } else {
      st.obs.resize(ow, H * n);
      st.enc_glimpse.resize(cfg.enc_glimpse_width, H * n);
      st.enc_loc.resize(cfg.enc_loc_width, H * n);
      for (int a = 0; a < H; ++a) {
        Matrix eg, el;
        st.obs.middleCols(a * n, n) = encode_block(params, a, st.glimpses.middleCols(a * n, n),
                                                   st.loc_inputs.middleCols(a * n, n), &eg, &el);
        st.enc_glimpse.middleCols(a * n, n) = eg;
        st.enc_loc.middleCols(a * n, n) = el;
      }
    }

    // Shared observation: each column's H x ow grid, merged row by row.
    const Matrix* grid = &st.obs;
    if (cfg.use_conv_merge) {
      st.conv_in_out = linear_forward(params.at(params.layout.conv), st.obs);
      grid = &st.conv_in_out;
    }
    const Index rw = grid->rows();
    st.merged.resize(H * rw, n);
    for (int a = 0; a < H; ++a) st.merged.middleRows(a * rw, rw) = grid->middleCols(a * n, n);

    state = lstm_cell_forward(core, st.merged, state, &st.core);
    st.hidden = state.hidden;
    st.logits = linear_forward(classifier, st.hidden);
    st.probs = softmax_columns(st.logits);

    st.head_inputs.resize(static_cast<std::size_t>(H));
    st.loc_mean.resize(H, n);
    st.loc_sample.resize(H, n);
    st.loc_logp.setZero(H, n);
    for (int a = 0; a < H; ++a) {
      Matrix& in = st.head_inputs[static_cast<std::size_t>(a)];
      in.resize(cfg.core_width + ow, n);
      in.topRows(cfg.core_width) = st.hidden;
      in.bottomRows(ow) = st.obs.middleCols(a * n, n);
      st.loc_mean.row(a) = linear_forward(params.at(params.layout.loc_heads[static_cast<std::size_t>(a)]), in)
                               .array()
                               .tanh()
                               .matrix();
    }
    if (cfg.use_time_action) {
      st.time_mean = linear_forward(params.at(params.layout.time_head), st.hidden).array().tanh().matrix();
      st.time_sample.resize(1, n);
      st.time_logp.setZero(1, n);
    }
    for (Index k = 0; k < n; ++k) {
      Rng& rng = rngs[static_cast<std::size_t>(k)];
      const Trajectory* rep = replay.empty() ? nullptr : replay[static_cast<std::size_t>(k)];
      for (int a = 0; a < H; ++a) {
        SampledAction act;
        if (rep != nullptr) {
          act.sample = rep->steps.at(static_cast<std::size_t>(s)).location_actions.at(static_cast<std::size_t>(a)).sample;
          act.mean = st.loc_mean(a, k);
          act.log_density = var > 0.0 ? gaussian_log_pdf(act.sample, act.mean, var) : 0.0;
        } else {
          act = sample_from_mean(st.loc_mean(a, k), var, rng);
        }
        st.loc_sample(a, k) = act.sample;
        st.loc_logp(a, k) = act.log_density;
        l(a, k) = std::clamp(act.sample, -1.0, 1.0);
      }
      if (cfg.use_time_action) {
        SampledAction act;
        if (rep != nullptr) {
          act.sample = rep->steps.at(static_cast<std::size_t>(s)).time_action.value().sample;
          act.mean = st.time_mean(0, k);
          act.log_density = tvar > 0.0 ? gaussian_log_pdf(act.sample, act.mean, tvar) : 0.0;
        } else {
          act = sample_from_mean(st.time_mean(0, k), tvar, rng);
        }
        st.time_sample(0, k) = act.sample;
        st.time_logp(0, k) = act.log_density;
        t(0, k) = std::clamp(act.sample, -1.0, 1.0);
      }
    }
  }
}

int Rollout::prediction(Index column) const { return argmax(final_probs().col(column)); }

Trajectory Rollout::trajectory(Index column, bool keep_policy_inputs) const {
  const RunConfig& cfg = params_->config;
  const int H = cfg.agents;
  Trajectory traj;
  traj.expected_steps = cfg.episode_length;
  traj.label = windows_[static_cast<std::size_t>(column)]->label;
  for (const Step& st : steps_) {
    StepRecord rec;
    for (int a = 0; a < H; ++a) {
      rec.observed.push_back({st.t(0, column), st.l(a, column)});
      SampledAction act;
      act.mean = st.loc_mean(a, column);
      act.sample = st.loc_sample(a, column);
      act.value = std::clamp(act.sample, -1.0, 1.0);
      act.log_density = st.loc_logp(a, column);
      rec.location_actions.push_back(act);
      if (keep_policy_inputs) rec.location_inputs.push_back(st.head_inputs[static_cast<std::size_t>(a)].col(column));
    }
    if (cfg.use_time_action) {
      SampledAction act;
      act.mean = st.time_mean(0, column);
      act.sample = st.time_sample(0, column);
      act.value = std::clamp(act.sample, -1.0, 1.0);
      act.log_density = st.time_logp(0, column);
      rec.time_action = act;
      if (keep_policy_inputs) rec.time_input = st.hidden.col(column);
    }
    rec.prediction = st.probs.col(column);
    traj.steps.push_back(std::move(rec));
  }
  traj.prediction = prediction(column);
  traj.reward = terminal_reward(traj.prediction, traj.label);
  return traj;
}

double Rollout::log_density_sum(Index column) const {
  double total = 0.0;
  for (const Step& st : steps_) {
    total += st.loc_logp.col(column).sum();
    if (st.time_logp.size() > 0) total += st.time_logp(0, column);
  }
  return total;
}

void Rollout::backward(ModelParams& grads, const Matrix& d_final_logits,
                       const std::vector<Matrix>* d_step_logits) const {
  const RunConfig& cfg = params_->config;
  const int H = cfg.agents;
  const Index n = n_;
  const ModelLayout& L = grads.layout;
  ParamGroup& classifier = grads.at(L.classifier);
  ParamGroup& core = grads.at(L.core);

  Matrix dh = Matrix::Zero(cfg.core_width, n);
  Matrix dc = Matrix::Zero(cfg.core_width, n);
  for (int s = cfg.episode_length - 1; s >= 0; --s) {
    const Step& st = steps_[static_cast<std::size_t>(s)];
    Matrix d_logits;
    if (s == cfg.episode_length - 1) d_logits = d_final_logits;
    if (d_step_logits != nullptr) {
      const Matrix& extra = (*d_step_logits)[static_cast<std::size_t>(s)];
      if (extra.size() > 0) d_logits = d_logits.size() > 0 ? Matrix(d_logits + extra) : extra;
    }
    if (d_logits.size() > 0) dh += linear_backward(classifier, st.hidden, d_logits);

    LstmGradients g = lstm_cell_backward(core, st.core, dh, dc);
    dh = std::move(g.hidden_prev);
    dc = std::move(g.cell_prev);

    // Un-merge: rows of r_g back to agent-major column blocks.
    const Index rw = g.input.rows() / H;
    Matrix d_grid(rw, H * n);
    for (int a = 0; a < H; ++a) d_grid.middleCols(a * n, n) = g.input.middleRows(a * rw, rw);
    Matrix d_obs = cfg.use_conv_merge ? linear_backward(grads.at(L.conv), st.obs, d_grid) : std::move(d_grid);

    if (!cfg.use_encoder) continue;
    const Matrix d_out_pre = relu_backward(st.obs, d_obs);
    const int n_enc = cfg.per_agent_encoders ? H : 1;
    const Index block = cfg.per_agent_encoders ? n : H * n;
    for (int e = 0; e < n_enc; ++e) {
      const Index c0 = e * block;
      const Matrix sum = st.enc_glimpse.middleCols(c0, block) + st.enc_loc.middleCols(c0, block);
      const Matrix d_sum = linear_backward(grads.at(L.enc_out[static_cast<std::size_t>(e)]), sum,
                                           d_out_pre.middleCols(c0, block));
      linear_backward_params(grads.at(L.enc_glimpse[static_cast<std::size_t>(e)]),
                             st.glimpses.middleCols(c0, block),
                             relu_backward(st.enc_glimpse.middleCols(c0, block), d_sum));
      linear_backward_params(grads.at(L.enc_loc[static_cast<std::size_t>(e)]),
                             st.loc_inputs.middleCols(c0, block),
                             relu_backward(st.enc_loc.middleCols(c0, block), d_sum));
    }
  }
}

void Rollout::accumulate_policy_scores(ModelParams& grads, std::span<const double> column_weights) const {
  const RunConfig& cfg = params_->config;
  const double var = cfg.variance;
  const double tvar = cfg.effective_time_variance();
  const auto n = static_cast<std::size_t>(n_);
  std::vector<double> samples(n), means(n);
  for (const Step& st : steps_) {
    for (int a = 0; a < cfg.agents; ++a) {
      for (std::size_t k = 0; k < n; ++k) {
        samples[k] = st.loc_sample(a, static_cast<Index>(k));
        means[k] = st.loc_mean(a, static_cast<Index>(k));
      }
      accumulate_score_gradient(grads.at(grads.layout.loc_heads[static_cast<std::size_t>(a)]),
                                st.head_inputs[static_cast<std::size_t>(a)], samples, means, var,
                                column_weights);
    }
    if (cfg.use_time_action) {
      for (std::size_t k = 0; k < n; ++k) {
        samples[k] = st.time_sample(0, static_cast<Index>(k));
        means[k] = st.time_mean(0, static_cast<Index>(k));
      }
      accumulate_score_gradient(grads.at(grads.layout.time_head), st.hidden, samples, means, tvar,
                                column_weights);
    }
  }
}

Trajectory rollout_episode(const Window& w, const ModelParams& params, Rng& rng) {
  Rng streams[1] = {rng};
  Rollout r(params, {&w}, streams);
  rng = streams[0];
  return r.trajectory(0);
}

McPrediction monte_carlo_predict(const Window& w, const ModelParams& params, Rng& rng) {
  const int M = params.config.copies;
  const std::uint64_t base = rng();
  std::vector<Rng> streams;
  for (int m = 0; m < M; ++m) streams.push_back(make_stream(base, {static_cast<std::uint64_t>(m)}));
  Rollout r(params, std::vector<const Window*>(static_cast<std::size_t>(M), &w), streams);
  McPrediction out;
  out.prediction = r.final_probs().rowwise().mean();
  for (int m = 0; m < M; ++m) out.trajectories.push_back(r.trajectory(m));
  return out;
}

namespace {

// Runs `work(shard)` for every shard on `workers` threads.
template <typename Fn>
void for_each_shard(std::size_t shards, int workers, Fn&& work) {
  const auto n_workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, workers)), shards);
  if (n_workers <= 1) {
    for (std::size_t s = 0; s < shards; ++s) work(s);
    return;
  }
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < n_workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t s = w; s < shards; s += n_workers) work(s);
    });
  }
}

}  // namespace

Matrix predict_windows(const ModelParams& params, std::span<const Window> windows, std::uint64_t key,
                       std::vector<std::vector<Trajectory>>* trajectories) {
  const RunConfig& cfg = params.config;
  const auto N = windows.size();
  const auto M = static_cast<std::size_t>(cfg.copies);
  const auto per_shard = static_cast<std::size_t>(cfg.shard_windows);
  const std::size_t shards = (N + per_shard - 1) / per_shard;
  Matrix out(cfg.classes, static_cast<Index>(N));
  if (trajectories != nullptr) trajectories->assign(N, {});
  for_each_shard(shards, cfg.workers, [&](std::size_t shard) {
    const std::size_t begin = shard * per_shard;
    const std::size_t end = std::min(N, begin + per_shard);
    std::vector<const Window*> cols;
    std::vector<Rng> streams;
    for (std::size_t i = begin; i < end; ++i) {
      for (std::size_t m = 0; m < M; ++m) {
        cols.push_back(&windows[i]);
        streams.push_back(make_stream(cfg.seed, {kEvalStream, key, i, m}));
      }
    }
    Rollout r(params, cols, streams);
    for (std::size_t i = begin; i < end; ++i) {
      const auto c0 = static_cast<Index>((i - begin) * M);
      out.col(static_cast<Index>(i)) = r.final_probs().middleCols(c0, static_cast<Index>(M)).rowwise().mean();
      if (trajectories != nullptr) {
        for (std::size_t m = 0; m < M; ++m) (*trajectories)[i].push_back(r.trajectory(c0 + static_cast<Index>(m)));
      }
    }
  });
  return out;
}

// ---- Trainer -------------------------------------------------------------------

Trainer::Trainer(ModelParams& params) : params_(&params) {}

TrainStats Trainer::accumulate_gradients(std::span<const Window* const> batch, std::uint64_t step_key,
                                         std::span<const Trajectory* const> replay) {
  const RunConfig& cfg = params_->config;
  const std::size_t N = batch.size();
  if (N == 0) throw StateError("train_step: empty batch");
  const auto M = static_cast<std::size_t>(cfg.copies);
  if (!replay.empty() && replay.size() != N * M) {
    throw DimensionError("train_step: replay needs one trajectory per window copy");
  }
  const auto per_shard = static_cast<std::size_t>(cfg.shard_windows);
  const std::size_t shards = (N + per_shard - 1) / per_shard;
  const double inv_nm = 1.0 / static_cast<double>(N * M);
  const double baseline = cfg.use_baseline ? baseline_ : 0.0;

  struct ShardResult {
    ModelParams grads;
    double loss = 0.0;
    double reward = 0.0;
  };
  std::vector<ShardResult> results(shards);

  for_each_shard(shards, cfg.workers, [&](std::size_t shard) {
    ShardResult& res = results[shard];
    res.grads = *params_;
    res.grads.zero_grad();
    const std::size_t begin = shard * per_shard;
    const std::size_t end = std::min(N, begin + per_shard);
    const std::size_t n = (end - begin) * M;

    std::vector<const Window*> cols;
    std::vector<Rng> streams;
    std::vector<const Trajectory*> rep;
    for (std::size_t i = begin; i < end; ++i) {
      for (std::size_t m = 0; m < M; ++m) {
        cols.push_back(batch[i]);
        streams.push_back(make_stream(cfg.seed, {kTrainStream, step_key, i, m}));
        if (!replay.empty()) rep.push_back(replay[i * M + m]);
      }
    }
    Rollout r(res.grads, cols, streams, rep);

    const Matrix& probs = r.final_probs();
    Matrix d_final = Matrix::Zero(probs.rows(), static_cast<Index>(n));
    std::vector<double> advantage(n);
    for (std::size_t i = begin; i < end; ++i) {
      const int y = batch[i]->label;
      const auto c0 = static_cast<Index>((i - begin) * M);
      const double mean_py = probs.row(y).segment(c0, static_cast<Index>(M)).mean();
      res.loss += -std::log(std::max(mean_py, kProbabilityFloor)) / static_cast<double>(N);
      // d(-ln mean_py)/d p_k[y] = -1 / (M mean_py); softmax VJP gives p_k[y] (e_y - p_k).
      const double alpha = mean_py > kProbabilityFloor ? -inv_nm / mean_py : 0.0;
      for (std::size_t m = 0; m < M; ++m) {
        const Index k = c0 + static_cast<Index>(m);
        const double py = probs(y, k);
        d_final.col(k) = -alpha * py * probs.col(k);
        d_final(y, k) += alpha * py;
        const int reward = terminal_reward(r.prediction(k), y).value;
        res.reward += reward;
        advantage[static_cast<std::size_t>(k)] = static_cast<double>(reward) - baseline;
      }
    }

    // The descent objective is L_c - w * R_bar, so score terms enter with -w.
    const double w = cfg.reinforce_weight * inv_nm;
    if (cfg.reinforce_target == ReinforceTarget::kActionLogDensity) {
      r.backward(res.grads, d_final);
      std::vector<double> weights(n);
      for (std::size_t k = 0; k < n; ++k) weights[k] = -w * advantage[k];
      r.accumulate_policy_scores(res.grads, weights);
    } else {
      std::vector<Matrix> d_steps(static_cast<std::size_t>(cfg.episode_length));
      for (int s = 0; s < cfg.episode_length; ++s) {
        const Matrix& ps = r.step_probs(s);
        Matrix d = -ps;
        for (std::size_t i = begin; i < end; ++i) {
          for (std::size_t m = 0; m < M; ++m) {
            const Index k = static_cast<Index>((i - begin) * M + m);
            d(batch[i]->label, k) += 1.0;
            d.col(k) *= -w * advantage[static_cast<std::size_t>(k)];
          }
        }
        d_steps[static_cast<std::size_t>(s)] = std::move(d);
      }
      r.backward(res.grads, d_final, &d_steps);
    }
  });

  TrainStats stats;
  double reward_sum = 0.0;
  for (ShardResult& res : results) {
    for (std::size_t g = 0; g < params_->groups.size(); ++g) {
      params_->groups[g].grad_weight += res.grads.groups[g].grad_weight;
      params_->groups[g].grad_bias += res.grads.groups[g].grad_bias;
    }
    stats.loss += res.loss;
    reward_sum += res.reward;
  }
  stats.mean_reward = reward_sum / static_cast<double>(N * M);
  return stats;
}

TrainStats Trainer::train_step(std::span<const Window* const> batch, std::uint64_t step_key) {
  params_->zero_grad();
  TrainStats stats = accumulate_gradients(batch, step_key);
  auto groups = params_->pointers();
  stats.grad_norm = sgd_step(groups, {params_->config.learning_rate, params_->config.clip_norm});
  if (params_->config.use_baseline) {
    const double decay = params_->config.baseline_decay;
    baseline_ = decay * baseline_ + (1.0 - decay) * stats.mean_reward;
  }
  return stats;
}

}  // namespace star
