#include "vesselnav/sac.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <utility>

#include "vesselnav/error.hpp"

namespace vn {

using nn::Graph;
using nn::Mlp;
using nn::Param;
using nn::Tensor;

// --- replay buffer --------------------------------------------------------

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) fail(ErrorKind::Parameter, "replay capacity must be positive");
    data_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(Transition t) {
    if (data_.size() < capacity_) {
        data_.push_back(std::move(t));
    } else {
        data_[head_] = std::move(t);
        head_ = (head_ + 1) % capacity_;
    }
    ++inserted_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
    if (i >= data_.size()) fail(ErrorKind::Parameter, "replay index out of range");
    if (data_.size() < capacity_) return data_[i];
    return data_[(head_ + i) % capacity_];
}

// --- config ---------------------------------------------------------------

void SacConfig::validate() const {
    if (!(discount > 0.0 && discount < 1.0))
        fail(ErrorKind::Config, "discount must lie in (0,1)");
    if (!(tau > 0.0 && tau <= 1.0)) fail(ErrorKind::Config, "tau must lie in (0,1]");
    if (lr <= 0.0) fail(ErrorKind::Config, "learning rate must be positive");
    if (batch_size < 1) fail(ErrorKind::Config, "batch size must be positive");
    if (buffer_capacity < static_cast<std::size_t>(batch_size))
        fail(ErrorKind::Config, "buffer must hold at least one batch");
    if (hidden.empty()) fail(ErrorKind::Config, "need at least one hidden layer");
    for (int h : hidden)
        if (h < 1) fail(ErrorKind::Config, "hidden sizes must be positive");
    if (warmup_steps < 0) fail(ErrorKind::Config, "warmup cannot be negative");
    if (total_steps < 0) fail(ErrorKind::Config, "total steps cannot be negative");
    if (update_every < 1) fail(ErrorKind::Config, "update interval must be positive");
    if (eval_interval < 1) fail(ErrorKind::Config, "eval interval must be positive");
    if (eval_episodes < 1) fail(ErrorKind::Config, "need at least one eval episode");
}

// --- agent ----------------------------------------------------------------

namespace {

std::vector<int> trunk_sizes(int obs_dim, const std::vector<int>& hidden) {
    std::vector<int> s{obs_dim};
    s.insert(s.end(), hidden.begin(), hidden.end());
    return s;
}

std::vector<int> critic_sizes(int obs_dim, int action_dim,
                              const std::vector<int>& hidden) {
    std::vector<int> s{obs_dim + action_dim};
    s.insert(s.end(), hidden.begin(), hidden.end());
    s.push_back(1);
    return s;
}

Tensor hconcat(const Tensor& a, const Tensor& b) {
    Tensor out(a.rows, a.cols + b.cols);
    for (int i = 0; i < a.rows; ++i) {
        for (int j = 0; j < a.cols; ++j) out.at(i, j) = a.at(i, j);
        for (int j = 0; j < b.cols; ++j) out.at(i, a.cols + j) = b.at(i, j);
    }
    return out;
}

struct BatchSample {
    Tensor actions;            // [B, A]
    std::vector<double> logp;  // per row
};

/// Batched counterpart of GaussianHead::sample_raw for fixed noise.
BatchSample sample_batch_raw(const nn::GaussianHead& head, const Tensor& feats,
                             const Tensor& eps) {
    Tensor mu = head.mean.forward_raw(feats);
    Tensor ls = head.log_std.forward_raw(feats);
    BatchSample out;
    out.actions = Tensor(mu.rows, mu.cols);
    out.logp.assign(mu.rows, 0.0);
    for (int i = 0; i < mu.rows; ++i) {
        for (int j = 0; j < mu.cols; ++j) {
            double lsj = std::min(std::max(ls.at(i, j), nn::kLogStdMin), nn::kLogStdMax);
            double e = eps.at(i, j);
            double a = std::tanh(mu.at(i, j) + std::exp(lsj) * e);
            out.actions.at(i, j) = a;
            out.logp[i] += -0.5 * e * e - lsj - 0.5 * std::log(2.0 * kPi) -
                           std::log(1.0 - a * a + nn::kSquashEps);
        }
    }
    return out;
}

} // namespace

SacAgent::SacAgent(int obs_dim, int action_dim, const SacConfig& config,
                   Rng& init_rng)
    : obs_dim_(obs_dim),
      action_dim_(action_dim),
      trunk_(trunk_sizes(obs_dim, config.hidden), init_rng),
      head_(config.hidden.back(), action_dim, init_rng),
      critic1_(critic_sizes(obs_dim, action_dim, config.hidden), init_rng),
      critic2_(critic_sizes(obs_dim, action_dim, config.hidden), init_rng),
      target1_(critic1_),
      target2_(critic2_),
      log_alpha_(1, 1),
      actor_opt_(config.lr),
      critic_opt_(config.lr),
      alpha_opt_(config.lr) {
    if (obs_dim < 1 || action_dim < 1)
        fail(ErrorKind::Parameter, "agent dimensions must be positive");
    // Start the entropy temperature small.  The reward scale here is small
    // (at most roughly +1 per episode), so a large initial temperature lets
    // the entropy bonus dominate early Bellman targets and inflate the
    // critics far above any attainable return; the auto-tuner then spends
    // most of the step budget walking that bias back out.  Starting low is
    // safe because the tuner raises the temperature whenever the policy
    // entropy falls below its target.
    log_alpha_.value.v[0] = std::log(0.01);
}

std::vector<double> SacAgent::act(const std::vector<double>& observation,
                                  bool stochastic, Rng& rng) const {
    if (static_cast<int>(observation.size()) != obs_dim_)
        fail(ErrorKind::Parameter, "observation dimension mismatch");
    Tensor x(1, obs_dim_);
    for (int j = 0; j < obs_dim_; ++j) x.at(0, j) = observation[j];
    Tensor feats = trunk_.features_raw(x);
    if (stochastic) return head_.sample_raw(feats, rng).action;
    return head_.mean_action_raw(feats);
}

ActionCommand SacAgent::act_command(const Observation& observation, bool stochastic,
                                    Rng& rng) const {
    std::array<double, Observation::kDim> v = observation.to_vector();
    std::vector<double> a =
        act(std::vector<double>(v.begin(), v.end()), stochastic, rng);
    std::array<double, 4> n{};
    for (int j = 0; j < 4 && j < static_cast<int>(a.size()); ++j) n[j] = a[j];
    return ActionCommand::from_normalized(n);
}

std::vector<Param*> SacAgent::actor_params() {
    std::vector<Param*> out = trunk_.params();
    for (Param* p : head_.params()) out.push_back(p);
    return out;
}

std::vector<Param*> SacAgent::critic_params() {
    std::vector<Param*> out = critic1_.params();
    for (Param* p : critic2_.params()) out.push_back(p);
    return out;
}

LossReport SacAgent::update(const ReplayBuffer& buffer, const SacConfig& config,
                            Rng& rng) {
    if (buffer.size() < static_cast<std::size_t>(config.batch_size)) return {};
    std::vector<const Transition*> batch;
    batch.reserve(static_cast<std::size_t>(config.batch_size));
    for (int i = 0; i < config.batch_size; ++i)
        batch.push_back(&buffer.at(rng.uniform_int(buffer.size())));
    return update_on_batch(batch, config, rng);
}

LossReport SacAgent::update_on_batch(const std::vector<const Transition*>& batch,
                                     const SacConfig& config, Rng& rng) {
    int B = static_cast<int>(batch.size());
    if (B == 0) fail(ErrorKind::Parameter, "empty update batch");
    Tensor obs(B, obs_dim_), act(B, action_dim_), nobs(B, obs_dim_);
    std::vector<double> rew(B), done(B);
    for (int i = 0; i < B; ++i) {
        const Transition& t = *batch[i];
        if (static_cast<int>(t.observation.size()) != obs_dim_ ||
            static_cast<int>(t.next_observation.size()) != obs_dim_ ||
            static_cast<int>(t.action.size()) != action_dim_)
            fail(ErrorKind::Parameter, "transition shape mismatch");
        for (int j = 0; j < obs_dim_; ++j) {
            obs.at(i, j) = t.observation[j];
            nobs.at(i, j) = t.next_observation[j];
        }
        for (int j = 0; j < action_dim_; ++j) act.at(i, j) = t.action[j];
        rew[i] = t.reward;
        done[i] = t.done ? 1.0 : 0.0;
    }

    double alpha_now = alpha();

    // Bellman targets from the target critics and a fresh policy sample; no
    // tape is involved.
    Tensor eps_next(B, action_dim_);
    for (double& e : eps_next.v) e = rng.normal();
    BatchSample next = sample_batch_raw(head_, trunk_.features_raw(nobs), eps_next);
    Tensor nsa = hconcat(nobs, next.actions);
    Tensor q1n = target1_.forward_raw(nsa);
    Tensor q2n = target2_.forward_raw(nsa);
    Tensor y(B, 1);
    for (int i = 0; i < B; ++i) {
        double qmin = std::min(q1n.at(i, 0), q2n.at(i, 0));
        double soft = qmin - alpha_now * next.logp[i];
        y.at(i, 0) = rew[i] + config.discount * (1.0 - done[i]) * soft;
    }

    LossReport report;
    report.updated = true;

    // Critic regression toward y.
    for (Param* p : critic_params()) p->zero_grad();
    {
        Graph g;
        int sa = g.constant(hconcat(obs, act));
        int yt = g.constant(y);
        int d1 = g.sub(critic1_.forward(g, sa), yt);
        int d2 = g.sub(critic2_.forward(g, sa), yt);
        int l1 = g.mean_all(g.mul(d1, d1));
        int l2 = g.mean_all(g.mul(d2, d2));
        int total = g.add(l1, l2);
        report.critic1 = g.value(l1).v[0];
        report.critic2 = g.value(l2).v[0];
        g.backward(total);
        critic_opt_.step(critic_params());
    }

    // Actor: minimize alpha * log pi - min(Q1, Q2) on a reparameterized
    // sample. Critic gradients accumulated here are discarded.
    Tensor eps_pi(B, action_dim_);
    for (double& e : eps_pi.v) e = rng.normal();
    double mean_logp = 0.0;
    for (Param* p : actor_params()) p->zero_grad();
    {
        Graph g;
        int o = g.constant(obs);
        auto [a_pi, logp_pi] = head_.sample_graph(g, trunk_.features(g, o), eps_pi);
        int sa_pi = g.concat_cols(o, a_pi);
        int qmin = g.min_elem(critic1_.forward(g, sa_pi), critic2_.forward(g, sa_pi));
        int loss =
            g.mean_all(g.sub(g.scale_add(logp_pi, alpha_now, 0.0), qmin));
        report.actor = g.value(loss).v[0];
        const Tensor& lp = g.value(logp_pi);
        for (int i = 0; i < B; ++i) mean_logp += lp.at(i, 0);
        mean_logp /= B;
        g.backward(loss);
        actor_opt_.step(actor_params());
    }
    for (Param* p : critic_params()) p->zero_grad();

    // Temperature: steer entropy toward the target. Loss is linear in
    // log alpha with the detached entropy gap as slope.
    double gap = mean_logp + config.target_entropy;
    log_alpha_.zero_grad();
    {
        Graph g;
        int loss = g.mean_all(g.scale_add(g.param(log_alpha_), -gap, 0.0));
        report.alpha_loss = g.value(loss).v[0];
        g.backward(loss);
        alpha_opt_.step({&log_alpha_});
    }
    report.alpha = alpha();

    soft_update_targets(config.tau);
    return report;
}

void SacAgent::soft_update_targets(double tau) {
    if (!(tau >= 0.0 && tau <= 1.0)) fail(ErrorKind::Parameter, "tau outside [0,1]");
    auto blend = [tau](Mlp& target, Mlp& online) {
        for (std::size_t l = 0; l < target.layers.size(); ++l) {
            Tensor* tv[2] = {&target.layers[l].W.value, &target.layers[l].b.value};
            Tensor* ov[2] = {&online.layers[l].W.value, &online.layers[l].b.value};
            for (int k = 0; k < 2; ++k)
                for (std::size_t i = 0; i < tv[k]->v.size(); ++i)
                    tv[k]->v[i] = (1.0 - tau) * tv[k]->v[i] + tau * ov[k]->v[i];
        }
    };
    blend(target1_, critic1_);
    blend(target2_, critic2_);
}

double SacAgent::alpha() const { return std::exp(log_alpha_.value.v[0]); }

double SacAgent::target_gap() const {
    double gap = 0.0;
    auto scan = [&gap](const Mlp& target, const Mlp& online) {
        for (std::size_t l = 0; l < target.layers.size(); ++l) {
            const Tensor& tw = target.layers[l].W.value;
            const Tensor& ow = online.layers[l].W.value;
            for (std::size_t i = 0; i < tw.v.size(); ++i)
                gap = std::max(gap, std::fabs(tw.v[i] - ow.v[i]));
            const Tensor& tb = target.layers[l].b.value;
            const Tensor& ob = online.layers[l].b.value;
            for (std::size_t i = 0; i < tb.v.size(); ++i)
                gap = std::max(gap, std::fabs(tb.v[i] - ob.v[i]));
        }
    };
    scan(target1_, critic1_);
    scan(target2_, critic2_);
    return gap;
}

std::vector<std::pair<std::string, Param*>> SacAgent::named_params() {
    std::vector<std::pair<std::string, Param*>> out;
    auto add_mlp = [&out](const std::string& prefix, Mlp& m) {
        for (std::size_t l = 0; l < m.layers.size(); ++l) {
            out.emplace_back(prefix + "/" + std::to_string(l) + "/W", &m.layers[l].W);
            out.emplace_back(prefix + "/" + std::to_string(l) + "/b", &m.layers[l].b);
        }
    };
    add_mlp("trunk", trunk_);
    out.emplace_back("head/mean/W", &head_.mean.W);
    out.emplace_back("head/mean/b", &head_.mean.b);
    out.emplace_back("head/log_std/W", &head_.log_std.W);
    out.emplace_back("head/log_std/b", &head_.log_std.b);
    add_mlp("critic1", critic1_);
    add_mlp("critic2", critic2_);
    add_mlp("target1", target1_);
    add_mlp("target2", target2_);
    out.emplace_back("log_alpha", &log_alpha_);
    return out;
}

std::vector<std::pair<std::string, const Param*>> SacAgent::named_params() const {
    std::vector<std::pair<std::string, const Param*>> out;
    for (auto& [name, p] : const_cast<SacAgent*>(this)->named_params())
        out.emplace_back(name, p);
    return out;
}

void SacAgent::save(const std::string& path) const {
    std::map<std::string, Tensor> blob;
    for (const auto& [name, p] : named_params()) {
        blob[name] = p->value;
        blob[name + "#m"] = p->m;
        blob[name + "#v"] = p->v2;
    }
    Tensor steps(1, 3);
    steps.v = {static_cast<double>(actor_opt_.steps_taken()),
               static_cast<double>(critic_opt_.steps_taken()),
               static_cast<double>(alpha_opt_.steps_taken())};
    blob["opt/steps"] = steps;
    nn::save_tensors(path, blob);
}

std::vector<double> SacAgent::parameter_values() const {
    std::vector<double> flat;
    for (const auto& [name, p] : named_params())
        flat.insert(flat.end(), p->value.v.begin(), p->value.v.end());
    return flat;
}

void SacAgent::set_parameter_values(const std::vector<double>& flat) {
    std::size_t total = 0;
    for (const auto& [name, p] : named_params()) total += p->value.size();
    if (flat.size() != total)
        fail(ErrorKind::Parameter, "parameter snapshot length mismatch");
    std::size_t k = 0;
    for (auto& [name, p] : named_params())
        for (double& v : p->value.v) v = flat[k++];
}

void SacAgent::load(const std::string& path) {
    std::map<std::string, Tensor> blob = nn::load_tensors(path);
    auto take = [&blob, &path](const std::string& name, Tensor& into) {
        auto it = blob.find(name);
        if (it == blob.end())
            fail(ErrorKind::Load, "checkpoint missing tensor " + name + ": " + path);
        if (!it->second.same_shape(into))
            fail(ErrorKind::Load, "checkpoint shape mismatch for " + name + ": " + path);
        into = it->second;
    };
    for (auto& [name, p] : named_params()) {
        take(name, p->value);
        take(name + "#m", p->m);
        take(name + "#v", p->v2);
    }
    Tensor steps(1, 3);
    take("opt/steps", steps);
    actor_opt_.set_steps_taken(static_cast<long>(steps.v[0]));
    critic_opt_.set_steps_taken(static_cast<long>(steps.v[1]));
    alpha_opt_.set_steps_taken(static_cast<long>(steps.v[2]));
}

// --- evaluation and training loop -----------------------------------------

double evaluate_success_rate(const SacAgent& agent, const VascTree& tree,
                             const SimConfig& sim, const EpisodeConfig& eval_config,
                             int episodes, Rng rng) {
    if (episodes < 1) fail(ErrorKind::Parameter, "need at least one episode");
    Episode env(tree, sim, eval_config, rng);
    Rng unused(0);
    int successes = 0;
    for (int e = 0; e < episodes; ++e) {
        Observation obs = env.reset();
        while (!env.done()) {
            ActionCommand cmd = agent.act_command(obs, false, unused);
            obs = env.run_step(cmd).observation;
        }
        if (env.reached()) ++successes;
    }
    return 100.0 * successes / episodes;
}

TrainState::TrainState(std::size_t buffer_capacity, std::uint64_t seed_)
    : seed(seed_),
      buffer(buffer_capacity),
      explore(Rng::stream(seed_, "explore")),
      update(Rng::stream(seed_, "update")),
      env_rng(Rng::stream(seed_, "env").state()) {}

TrainResult train_from_state_cycle(SacAgent& agent, TrainState& state,
                                   const std::vector<const VascTree*>& trees,
                                   const SimConfig& sim,
                                   const std::vector<EpisodeConfig>& train_configs,
                                   const VascTree& eval_tree,
                                   const EpisodeConfig& eval_config,
                                   const SacConfig& config, long until_step) {
    config.validate();
    if (trees.empty() || trees.size() != train_configs.size())
        fail(ErrorKind::Config,
             "need one training episode setup per anatomy, at least one");
    for (std::size_t i = 0; i < trees.size(); ++i) {
        if (!trees[i]) fail(ErrorKind::Config, "null anatomy in training set");
        train_configs[i].validate(*trees[i]);
    }
    eval_config.validate(eval_tree);
    if (state.buffer.capacity() != config.buffer_capacity)
        fail(ErrorKind::Config, "training state buffer does not match config");

    long limit = config.total_steps;
    if (until_step > 0) limit = std::min(limit, until_step);

    TrainResult result;
    result.snapshots = state.snapshots;
    result.episodes_completed = state.episodes_completed;
    result.steps_used = state.next_step - 1;
    result.stopped_early = state.stopped_early;

    LossReport last_losses;
    const long n_trees = static_cast<long>(trees.size());

    while (!state.stopped_early && state.next_step <= limit) {
        long chunk_first = state.next_step;
        long boundary =
            ((chunk_first - 1) / config.eval_interval + 1) * config.eval_interval;
        long chunk_last = std::min(limit, boundary);

        // Episode k runs on trees[k mod n]; the draw stream is carried in
        // state.env_rng across episode and chunk boundaries alike.
        std::unique_ptr<Episode> env;
        std::vector<double> obs_vec;
        bool have_obs = false;
        double ep_return = 0.0;

        for (long step = chunk_first; step <= chunk_last; ++step) {
            if (!have_obs || env->done()) {
                if (have_obs) {
                    state.last_return = ep_return;
                    ++state.episodes_completed;
                }
                int immediate = 0;
                for (;;) {
                    std::size_t k = static_cast<std::size_t>(
                        state.episodes_completed % n_trees);
                    if (env) state.env_rng = env->rng_state();
                    env = std::make_unique<Episode>(*trees[k], sim,
                                                    train_configs[k], Rng(0));
                    env->set_rng_state(state.env_rng);
                    Observation o = env->reset();
                    if (!env->done()) {
                        auto v = o.to_vector();
                        obs_vec.assign(v.begin(), v.end());
                        break;
                    }
                    // Start drawn inside the target cross-section: a
                    // zero-step success. Count it and draw again.
                    state.last_return = 0.0;
                    ++state.episodes_completed;
                    if (++immediate > 1000)
                        fail(ErrorKind::Config,
                             "start set lies inside the target region");
                }
                ep_return = 0.0;
                have_obs = true;
            }

            std::vector<double> action(4);
            if (step <= config.warmup_steps) {
                for (double& a : action) a = state.explore.uniform(-1.0, 1.0);
            } else {
                action = agent.act(obs_vec, true, state.explore);
            }
            StepResult res = env->run_step(ActionCommand::from_normalized(
                {action[0], action[1], action[2], action[3]}));
            auto nv = res.observation.to_vector();
            std::vector<double> next_vec(nv.begin(), nv.end());
            state.buffer.push({obs_vec, action, res.reward, next_vec, res.reached});
            ep_return += res.reward;
            obs_vec = std::move(next_vec);

            if (step > config.warmup_steps && step % config.update_every == 0) {
                LossReport r = agent.update(state.buffer, config, state.update);
                if (r.updated) last_losses = r;
            }

            result.step_log.push_back({step, state.last_return, state.last_sr,
                                       last_losses.critic1 + last_losses.critic2,
                                       last_losses.actor, last_losses.alpha_loss,
                                       last_losses.alpha});
            result.steps_used = step;
        }

        // Interval boundary: close the open episode (truncation) and persist
        // the draw stream so a reload continues identically.
        if (have_obs) {
            state.last_return = ep_return;
            ++state.episodes_completed;
        }
        state.env_rng = env->rng_state();
        state.next_step = chunk_last + 1;

        if (chunk_last % config.eval_interval == 0) {
            long idx = chunk_last / config.eval_interval;
            Rng eval_rng =
                Rng::stream(state.seed, "eval").split(static_cast<std::uint64_t>(idx));
            state.last_sr = evaluate_success_rate(agent, eval_tree, sim, eval_config,
                                                  config.eval_episodes, eval_rng);
            state.snapshots.push_back({chunk_last, state.last_sr});
            if (!result.step_log.empty()) result.step_log.back().eval_sr = state.last_sr;
            if (state.last_sr >= state.best_sr) {
                state.best_sr = state.last_sr;
                state.best_weights = agent.parameter_values();
            }
            if (config.stop_eval_sr >= 0.0 && state.last_sr >= config.stop_eval_sr)
                state.stopped_early = true;
        }
    }

    // Training is complete (not merely paused at until_step): deploy the
    // best-snapshot weights rather than wherever the last update landed.
    bool complete = state.stopped_early || state.next_step > config.total_steps;
    if (complete && !state.best_weights.empty()) {
        agent.set_parameter_values(state.best_weights);
        state.last_sr = state.best_sr;
    }

    result.snapshots = state.snapshots;
    result.episodes_completed = state.episodes_completed;
    result.stopped_early = state.stopped_early;
    return result;
}

TrainResult train_from_state(SacAgent& agent, TrainState& state,
                             const VascTree& tree, const SimConfig& sim,
                             const EpisodeConfig& train_config,
                             const EpisodeConfig& eval_config,
                             const SacConfig& config, long until_step) {
    return train_from_state_cycle(agent, state, {&tree}, sim, {train_config},
                                  tree, eval_config, config, until_step);
}

TrainResult train_subtask(SacAgent& agent, const VascTree& tree,
                          const SimConfig& sim, const EpisodeConfig& train_config,
                          const EpisodeConfig& eval_config, const SacConfig& config,
                          std::uint64_t seed) {
    TrainState state(config.buffer_capacity, seed);
    return train_from_state(agent, state, tree, sim, train_config, eval_config,
                            config);
}

// --- training-state persistence -------------------------------------------

namespace {

double u64_as_double(std::uint64_t v) { return std::bit_cast<double>(v); }
std::uint64_t double_as_u64(double v) { return std::bit_cast<std::uint64_t>(v); }

} // namespace

void save_train_state(const std::string& path, const TrainState& state) {
    std::map<std::string, Tensor> blob;

    Tensor meta(1, 9);
    meta.v = {static_cast<double>(state.next_step),
              static_cast<double>(state.episodes_completed),
              state.last_return,
              state.last_sr,
              state.stopped_early ? 1.0 : 0.0,
              static_cast<double>(state.buffer.capacity()),
              u64_as_double(state.seed),
              static_cast<double>(state.buffer.size()),
              state.best_sr};
    blob["meta"] = meta;

    if (!state.best_weights.empty()) {
        Tensor best(1, static_cast<int>(state.best_weights.size()));
        best.v = state.best_weights;
        blob["best_weights"] = best;
    }

    auto rng_tensor = [](const std::array<std::uint64_t, 4>& s) {
        Tensor t(1, 4);
        for (int i = 0; i < 4; ++i) t.v[i] = u64_as_double(s[i]);
        return t;
    };
    blob["rng/explore"] = rng_tensor(state.explore.state());
    blob["rng/update"] = rng_tensor(state.update.state());
    blob["rng/env"] = rng_tensor(state.env_rng);

    Tensor snaps(static_cast<int>(state.snapshots.size()), 2);
    for (std::size_t i = 0; i < state.snapshots.size(); ++i) {
        snaps.at(static_cast<int>(i), 0) = static_cast<double>(state.snapshots[i].step);
        snaps.at(static_cast<int>(i), 1) = state.snapshots[i].success_rate;
    }
    blob["snapshots"] = snaps;

    if (state.buffer.size() > 0) {
        const Transition& first = state.buffer.at(0);
        int od = static_cast<int>(first.observation.size());
        int ad = static_cast<int>(first.action.size());
        int row = 2 * od + ad + 2;
        Tensor dims(1, 2);
        dims.v = {static_cast<double>(od), static_cast<double>(ad)};
        blob["buffer/dims"] = dims;
        Tensor data(static_cast<int>(state.buffer.size()), row);
        for (std::size_t i = 0; i < state.buffer.size(); ++i) {
            const Transition& t = state.buffer.at(i);
            int r = static_cast<int>(i), c = 0;
            for (double x : t.observation) data.at(r, c++) = x;
            for (double x : t.action) data.at(r, c++) = x;
            data.at(r, c++) = t.reward;
            for (double x : t.next_observation) data.at(r, c++) = x;
            data.at(r, c++) = t.done ? 1.0 : 0.0;
        }
        blob["buffer/data"] = data;
    }

    nn::save_tensors(path, blob);
}

TrainState load_train_state(const std::string& path) {
    std::map<std::string, Tensor> blob = nn::load_tensors(path);
    auto need = [&blob, &path](const std::string& name) -> const Tensor& {
        auto it = blob.find(name);
        if (it == blob.end())
            fail(ErrorKind::Load, "training state missing tensor " + name + ": " + path);
        return it->second;
    };

    const Tensor& meta = need("meta");
    if (meta.cols != 9) fail(ErrorKind::Load, "bad training state metadata: " + path);
    auto capacity = static_cast<std::size_t>(meta.v[5]);
    TrainState state(capacity, double_as_u64(meta.v[6]));
    state.next_step = static_cast<long>(meta.v[0]);
    state.episodes_completed = static_cast<int>(meta.v[1]);
    state.last_return = meta.v[2];
    state.last_sr = meta.v[3];
    state.stopped_early = meta.v[4] != 0.0;
    state.best_sr = meta.v[8];
    if (state.best_sr >= 0.0) {
        const Tensor& best = need("best_weights");
        state.best_weights = best.v;
    }

    auto rng_from = [&](const std::string& name) {
        const Tensor& t = need(name);
        if (t.cols != 4) fail(ErrorKind::Load, "bad generator state: " + path);
        std::array<std::uint64_t, 4> s{};
        for (int i = 0; i < 4; ++i) s[i] = double_as_u64(t.v[i]);
        return s;
    };
    state.explore.set_state(rng_from("rng/explore"));
    state.update.set_state(rng_from("rng/update"));
    state.env_rng = rng_from("rng/env");

    const Tensor& snaps = need("snapshots");
    for (int i = 0; i < snaps.rows; ++i)
        state.snapshots.push_back(
            {static_cast<long>(snaps.at(i, 0)), snaps.at(i, 1)});

    auto n_rows = static_cast<std::size_t>(meta.v[7]);
    if (n_rows > 0) {
        const Tensor& dims = need("buffer/dims");
        int od = static_cast<int>(dims.v[0]);
        int ad = static_cast<int>(dims.v[1]);
        const Tensor& data = need("buffer/data");
        if (data.rows != static_cast<int>(n_rows) || data.cols != 2 * od + ad + 2)
            fail(ErrorKind::Load, "buffer shape mismatch in training state: " + path);
        for (int r = 0; r < data.rows; ++r) {
            Transition t;
            int c = 0;
            t.observation.reserve(od);
            for (int j = 0; j < od; ++j) t.observation.push_back(data.at(r, c++));
            t.action.reserve(ad);
            for (int j = 0; j < ad; ++j) t.action.push_back(data.at(r, c++));
            t.reward = data.at(r, c++);
            t.next_observation.reserve(od);
            for (int j = 0; j < od; ++j) t.next_observation.push_back(data.at(r, c++));
            t.done = data.at(r, c++) != 0.0;
            state.buffer.push(std::move(t));
        }
    }
    return state;
}

void write_step_log_csv(const std::string& path, const TrainResult& result) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::Io, "cannot open step log for writing: " + path);
    out << "step,episode_return,eval_sr,critic_loss,actor_loss,alpha_loss,alpha\n";
    char line[256];
    for (const StepLogRow& r : result.step_log) {
        std::snprintf(line, sizeof(line), "%ld,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                      r.step, r.episode_return, r.eval_sr, r.critic_loss,
                      r.actor_loss, r.alpha_loss, r.alpha);
        out << line;
    }
    if (!out) fail(ErrorKind::Io, "step log write failed: " + path);
}

} // namespace vn
