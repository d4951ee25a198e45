#include "vesselnav/episode.hpp"

#include <cmath>
#include <cstdio>

namespace vn {

void EpisodeConfig::validate(const VascTree& tree) const {
    if (timeout_steps <= 0) fail(ErrorKind::Config, "timeout_steps must be > 0");
    if (!(dt > 0.0)) fail(ErrorKind::Config, "dt must be > 0");
    if (start_set.empty()) fail(ErrorKind::Config, "episode start set is empty");
    if (target_set.empty()) fail(ErrorKind::Config, "episode target set is empty");
    for (const auto& p : start_set) tree.validate_position(p);
    for (const auto& p : target_set) tree.validate_position(p);
}

double reward(double prev_pathlength, double new_pathlength, bool reached,
              const RewardTerms& terms) {
    if (prev_pathlength < 0.0 || new_pathlength < 0.0)
        fail(ErrorKind::Parameter, "pathlengths must be non-negative");
    double r = terms.base_penalty +
               terms.progress_coeff * (new_pathlength - prev_pathlength);
    if (reached) r += terms.success_bonus;
    return r;
}

bool check_success(const VascTree& tree, const ArcPosition& tip,
                   const ArcPosition& target) {
    double dist = (tree.position_of(tip) - tree.position_of(target)).norm();
    return dist <= tree.radius_of(target);
}

std::pair<ArcPosition, ArcPosition> draw_start_target(const EpisodeConfig& config,
                                                      Rng& rng) {
    if (config.start_set.empty() || config.target_set.empty())
        fail(ErrorKind::Config, "episode start/target set is empty");
    const ArcPosition& s = config.start_set[rng.uniform_int(config.start_set.size())];
    const ArcPosition& t = config.target_set[rng.uniform_int(config.target_set.size())];
    return {s, t};
}

Episode::Episode(const VascTree& tree, SimConfig sim, EpisodeConfig config, Rng rng)
    : tree_(&tree), sim_(sim), config_(std::move(config)), rng_(rng) {
    config_.validate(tree);
}

Observation Episode::reset() {
    auto [s, t] = draw_start_target(config_, rng_);
    start_ = s;
    target_ = t;
    double start_depth = tree_->depth_from_root(start_);
    double cath = std::max(0.0, start_depth - config_.catheter_setback_mm);
    state_ = initial_state(*tree_, sim_, start_, cath);
    prev_action_ = ActionCommand();
    steps_ = 0;
    started_ = true;
    done_ = reached_ = timed_out_ = false;
    initial_pathlength_ = pathlength(*tree_, state_.wire_tip, target_);
    current_pathlength_ = initial_pathlength_;
    // A start already inside the target cross-section counts immediately.
    if (check_success(*tree_, state_.wire_tip, target_)) {
        reached_ = true;
        done_ = true;
    }
    return current_observation();
}

Observation Episode::current_observation() const {
    return observe(*tree_, sim_, state_, target_, prev_action_);
}

StepResult Episode::run_step(const ActionCommand& action) {
    if (!started_) fail(ErrorKind::Lifecycle, "run_step before reset");
    if (done_) fail(ErrorKind::Lifecycle, "run_step on a finished episode");

    state_ = step(*tree_, sim_, state_, action, config_.dt, rng_);
    ++steps_;
    double new_pl = pathlength(*tree_, state_.wire_tip, target_);
    reached_ = check_success(*tree_, state_.wire_tip, target_);
    timed_out_ = !reached_ && steps_ >= config_.timeout_steps;
    StepResult result;
    result.reward = reward(current_pathlength_, new_pl, reached_);
    current_pathlength_ = new_pl;
    done_ = reached_ || timed_out_;
    prev_action_ = action;
    result.observation = current_observation();
    result.reached = reached_;
    result.timed_out = timed_out_;
    return result;
}

TrajectoryWriter::TrajectoryWriter(const std::string& path) : out_(path) {
    if (!out_) fail(ErrorKind::Io, "cannot open trajectory log: " + path);
    out_ << "episode,step,tip_x,tip_y,tip_z,proj_x,proj_y,"
            "wire_rot_speed,wire_trans_speed,cath_rot_speed,cath_trans_speed,"
            "reward,done\n";
}

void TrajectoryWriter::append(int episode, int step_index, const Vec3& tip,
                              const Vec2& projected, const ActionCommand& action,
                              double reward_value, bool done) {
    char buf[320];
    std::snprintf(buf, sizeof(buf),
                  "%d,%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%d\n",
                  episode, step_index, tip.x, tip.y, tip.z, projected.x, projected.y,
                  action.wire_rot_speed, action.wire_trans_speed,
                  action.cath_rot_speed, action.cath_trans_speed, reward_value,
                  done ? 1 : 0);
    out_ << buf;
    if (!out_) fail(ErrorKind::Io, "trajectory log write failed");
}

EpisodeSummaryWriter::EpisodeSummaryWriter(const std::string& path) : out_(path) {
    if (!out_) fail(ErrorKind::Io, "cannot open episode summary: " + path);
    out_ << "task,seed,success,steps,sim_seconds,initial_pathlength,final_pathlength\n";
}

void EpisodeSummaryWriter::append(const std::string& task, std::uint64_t seed,
                                  bool success, int steps, double sim_seconds,
                                  double initial_pathlength, double final_pathlength) {
    char buf[320];
    std::snprintf(buf, sizeof(buf), "%s,%llu,%d,%d,%.6f,%.6f,%.6f\n", task.c_str(),
                  static_cast<unsigned long long>(seed), success ? 1 : 0, steps,
                  sim_seconds, initial_pathlength, final_pathlength);
    out_ << buf;
    if (!out_) fail(ErrorKind::Io, "episode summary write failed");
}

} // namespace vn
