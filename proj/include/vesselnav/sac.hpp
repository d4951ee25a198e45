#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vesselnav/episode.hpp"
#include "vesselnav/nn.hpp"
#include "vesselnav/rng.hpp"

namespace vn {

// Soft Actor-Critic for one sub-task policy: squashed-Gaussian actor, twin
// critics with Polyak-averaged targets, auto-tuned entropy temperature, and
// an exploration loop measured in environment steps.

struct Transition {
    std::vector<double> observation;
    std::vector<double> action;  // normalized, in (-1,1) per dimension
    double reward = 0.0;
    std::vector<double> next_observation;
    // True only when the episode ended by reaching the target; timeouts are
    // not terminal for bootstrapping purposes.
    bool done = false;
};

/// Fixed-capacity FIFO ring. Oldest entries are evicted first.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(Transition t);
    std::size_t size() const { return data_.size(); }
    std::size_t capacity() const { return capacity_; }
    std::uint64_t total_inserted() const { return inserted_; }
    /// i = 0 is the oldest retained transition.
    const Transition& at(std::size_t i) const;

private:
    std::size_t capacity_;
    std::vector<Transition> data_;
    std::size_t head_ = 0;  // slot of the oldest entry once full
    std::uint64_t inserted_ = 0;
};

struct SacConfig {
    double discount = 0.99;
    double tau = 0.005;
    double lr = 3e-4;
    int batch_size = 256;
    std::size_t buffer_capacity = 1'000'000;
    double target_entropy = -4.0;  // -(action dimensions)
    int warmup_steps = 1000;       // uniform random actions, no updates
    long total_steps = 200'000;    // exploration budget (environment steps)
    std::vector<int> hidden = {256, 256};
    int update_every = 1;
    long eval_interval = 10'000;   // snapshot cadence in exploration steps
    int eval_episodes = 50;
    // If >= 0: stop once a snapshot's success rate (percent) reaches this,
    // turning total_steps into a cap rather than an exact count.
    double stop_eval_sr = -1.0;

    void validate() const;
};

struct LossReport {
    bool updated = false;  // false when the buffer couldn't fill a batch
    double critic1 = 0.0;
    double critic2 = 0.0;
    double actor = 0.0;
    double alpha_loss = 0.0;
    double alpha = 0.0;
};

class SacAgent {
public:
    SacAgent(int obs_dim, int action_dim, const SacConfig& config, Rng& init_rng);

    int obs_dim() const { return obs_dim_; }
    int action_dim() const { return action_dim_; }

    /// Normalized action in (-1,1)^d. Stochastic mode draws action_dim
    /// normals from rng; deterministic mode is tanh of the mean and reads no
    /// randomness.
    std::vector<double> act(const std::vector<double>& observation, bool stochastic,
                            Rng& rng) const;
    /// act() mapped to physical speeds.
    ActionCommand act_command(const Observation& observation, bool stochastic,
                              Rng& rng) const;

    /// One gradient step for critics, actor and temperature on a uniformly
    /// sampled batch, then a soft target update. Defers (updated = false)
    /// while the buffer holds fewer than batch_size transitions.
    LossReport update(const ReplayBuffer& buffer, const SacConfig& config, Rng& rng);
    /// Same step on a caller-chosen batch; rng drives the policy noise only.
    LossReport update_on_batch(const std::vector<const Transition*>& batch,
                               const SacConfig& config, Rng& rng);

    void soft_update_targets(double tau);

    double alpha() const;
    double log_alpha_value() const { return log_alpha_.value.v[0]; }

    /// Parameters plus optimizer moments and step counters; load restores
    /// them and requires exactly matching shapes.
    void save(const std::string& path) const;
    void load(const std::string& path);

    /// All parameter values (no optimizer moments) as one flat vector, in a
    /// fixed order; set_parameter_values restores such a snapshot and
    /// requires the exact length.
    std::vector<double> parameter_values() const;
    void set_parameter_values(const std::vector<double>& flat);

    /// Maximum absolute elementwise gap between online and target critics.
    double target_gap() const;

    nn::Mlp& trunk() { return trunk_; }
    nn::GaussianHead& head() { return head_; }
    nn::Mlp& critic1() { return critic1_; }
    nn::Mlp& critic2() { return critic2_; }
    nn::Mlp& target1() { return target1_; }
    nn::Mlp& target2() { return target2_; }

private:
    int obs_dim_;
    int action_dim_;
    nn::Mlp trunk_;
    nn::GaussianHead head_;
    nn::Mlp critic1_, critic2_;
    nn::Mlp target1_, target2_;
    nn::Param log_alpha_;
    nn::Adam actor_opt_, critic_opt_, alpha_opt_;

    std::vector<nn::Param*> actor_params();
    std::vector<nn::Param*> critic_params();
    std::vector<std::pair<std::string, nn::Param*>> named_params();
    std::vector<std::pair<std::string, const nn::Param*>> named_params() const;
};

struct StepLogRow {
    long step = 0;
    double episode_return = 0.0;  // return of the last finished episode
    double eval_sr = -1.0;        // latest snapshot SR in percent; -1 before
    double critic_loss = 0.0;     // critic1 + critic2
    double actor_loss = 0.0;
    double alpha_loss = 0.0;
    double alpha = 0.0;
};

struct EvalSnapshot {
    long step = 0;
    double success_rate = 0.0;  // percent over eval_episodes
};

struct TrainResult {
    std::vector<StepLogRow> step_log;  // one row per exploration step taken
    std::vector<EvalSnapshot> snapshots;
    long steps_used = 0;
    bool stopped_early = false;
    int episodes_completed = 0;
};

/// Mutable training progress separate from the agent: everything besides
/// network weights needed to continue a run bit-exactly. Exploration runs in
/// intervals of eval_interval steps; episodes still open at an interval
/// boundary are truncated, so a (state, agent) pair saved at a boundary
/// resumes with identical behavior.
struct TrainState {
    std::uint64_t seed = 0;
    long next_step = 1;  // first exploration step not yet executed
    ReplayBuffer buffer;
    Rng explore, update;
    std::array<std::uint64_t, 4> env_rng{};
    double last_return = 0.0;
    double last_sr = -1.0;
    int episodes_completed = 0;
    bool stopped_early = false;
    std::vector<EvalSnapshot> snapshots;
    // Checkpoint selection: weights of the best snapshot so far (ties go to
    // the later one). Restored into the agent once training completes.
    double best_sr = -1.0;
    std::vector<double> best_weights;

    TrainState(std::size_t buffer_capacity, std::uint64_t seed);
};

/// Success rate (percent) of the deterministic policy over n episodes.
double evaluate_success_rate(const SacAgent& agent, const VascTree& tree,
                             const SimConfig& sim, const EpisodeConfig& eval_config,
                             int episodes, Rng rng);

/// Continue training until the step budget, early stop, or (if
/// until_step > 0) that step. The returned step log covers only this call;
/// snapshots cover the whole run including earlier resumed-from progress.
/// On completion (budget exhausted or early stop) the agent is left holding
/// the weights of the best evaluation snapshot, not the last update.
TrainResult train_from_state(SacAgent& agent, TrainState& state,
                             const VascTree& tree, const SimConfig& sim,
                             const EpisodeConfig& train_config,
                             const EpisodeConfig& eval_config,
                             const SacConfig& config, long until_step = 0);

/// train_from_state over a set of anatomies: training episode k runs on
/// trees[k mod n] with the matching episode setup, so experience cycles
/// through all anatomies; snapshots evaluate on eval_tree. trees and
/// train_configs are index-aligned. With one tree this is exactly
/// train_from_state.
TrainResult train_from_state_cycle(SacAgent& agent, TrainState& state,
                                   const std::vector<const VascTree*>& trees,
                                   const SimConfig& sim,
                                   const std::vector<EpisodeConfig>& train_configs,
                                   const VascTree& eval_tree,
                                   const EpisodeConfig& eval_config,
                                   const SacConfig& config, long until_step = 0);

/// Full training run for one sub-task policy. Deterministic in seed.
/// Episodes use train_config (timeout 200); snapshots use eval_config
/// (timeout 1500) with config.eval_episodes episodes each.
TrainResult train_subtask(SacAgent& agent, const VascTree& tree,
                          const SimConfig& sim, const EpisodeConfig& train_config,
                          const EpisodeConfig& eval_config, const SacConfig& config,
                          std::uint64_t seed);

/// Binary snapshot of a TrainState (buffer, generator states, counters).
void save_train_state(const std::string& path, const TrainState& state);
TrainState load_train_state(const std::string& path);

/// Training log CSV: one row per exploration step.
void write_step_log_csv(const std::string& path, const TrainResult& result);

} // namespace vn
