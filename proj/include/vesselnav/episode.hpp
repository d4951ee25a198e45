#pragma once

#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "vesselnav/guidesim.hpp"
#include "vesselnav/vasctree.hpp"

namespace vn {

// Episode lifecycle: draw a (start, target) pair, step the simulator, score
// each step with the dense progress reward, stop on success or timeout.

struct EpisodeConfig {
    int timeout_steps = 200;   // training default; evaluation runs use 1500
    double dt = 2.0 / 15.0;    // seconds per control step
    std::vector<ArcPosition> start_set;   // drawn uniformly at reset
    std::vector<ArcPosition> target_set;  // drawn uniformly at reset
    std::string task_label;
    // The catheter is introduced together with the wire, trailing it by this
    // many millimeters at reset (clamped at the insertion point).
    double catheter_setback_mm = 10.0;

    void validate(const VascTree& tree) const;
};

/// Constants of the per-step reward. These are fixed by the control design;
/// the struct exists so tests can state them in one place.
struct RewardTerms {
    double base_penalty = -0.00015;   // applied every step
    double progress_coeff = -0.001;   // per mm of pathlength change
    double success_bonus = 1.0;       // applied once on reaching the target
};

/// R = base_penalty + progress_coeff * (new - prev) + (bonus if reached).
double reward(double prev_pathlength, double new_pathlength, bool reached,
              const RewardTerms& terms = {});

/// True iff the tip sits within the vessel cross-section at the target:
/// Euclidean distance <= radius at the target (closed threshold).
bool check_success(const VascTree& tree, const ArcPosition& tip,
                   const ArcPosition& target);

/// Uniform draw of a (start, target) pair; start drawn first.
std::pair<ArcPosition, ArcPosition> draw_start_target(const EpisodeConfig& config,
                                                      Rng& rng);

struct StepResult {
    Observation observation;
    double reward = 0.0;
    bool reached = false;
    bool timed_out = false;
};

/// Single-owner mutable episode bundle. Construct, reset once, then call
/// run_step until done(); stepping past termination is a lifecycle error.
class Episode {
public:
    Episode(const VascTree& tree, SimConfig sim, EpisodeConfig config, Rng rng);

    Observation reset();
    StepResult run_step(const ActionCommand& action);

    bool done() const { return done_; }
    bool reached() const { return reached_; }
    bool timed_out() const { return timed_out_; }
    int steps() const { return steps_; }
    double simulated_seconds() const { return steps_ * config_.dt; }
    double initial_pathlength() const { return initial_pathlength_; }
    double current_pathlength() const { return current_pathlength_; }
    const DeviceState& state() const { return state_; }
    const ArcPosition& target() const { return target_; }
    const ArcPosition& start() const { return start_; }
    const VascTree& tree() const { return *tree_; }
    const EpisodeConfig& config() const { return config_; }
    const SimConfig& sim_config() const { return sim_; }
    Observation current_observation() const;
    /// Action executed on the previous step (zero command right after reset);
    /// exposed so an observation can be re-framed against another target.
    const ActionCommand& prev_action() const { return prev_action_; }

    /// Draw-stream capture, so an episode sequence can continue across
    /// process boundaries (resume support).
    std::array<std::uint64_t, 4> rng_state() const { return rng_.state(); }
    void set_rng_state(const std::array<std::uint64_t, 4>& s) { rng_.set_state(s); }

private:
    const VascTree* tree_;
    SimConfig sim_;
    EpisodeConfig config_;
    Rng rng_;
    DeviceState state_;
    ArcPosition start_{};
    ArcPosition target_{};
    ActionCommand prev_action_{};
    int steps_ = 0;
    bool started_ = false;
    bool done_ = false;
    bool reached_ = false;
    bool timed_out_ = false;
    double initial_pathlength_ = 0.0;
    double current_pathlength_ = 0.0;
};

/// Per-step trajectory log, one CSV row per step.
class TrajectoryWriter {
public:
    explicit TrajectoryWriter(const std::string& path);
    void append(int episode, int step_index, const Vec3& tip, const Vec2& projected,
                const ActionCommand& action, double reward, bool done);

private:
    std::ofstream out_;
};

/// One CSV row per finished episode.
class EpisodeSummaryWriter {
public:
    explicit EpisodeSummaryWriter(const std::string& path);
    void append(const std::string& task, std::uint64_t seed, bool success, int steps,
                double sim_seconds, double initial_pathlength,
                double final_pathlength);

private:
    std::ofstream out_;
};

} // namespace vn
