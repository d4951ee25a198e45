#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vesselnav/episode.hpp"
#include "vesselnav/evalharness.hpp"
#include "vesselnav/sac.hpp"
#include "vesselnav/tasks.hpp"

namespace vn {

// Hierarchical orchestration: every pre-trained sub-task policy proposes an
// action for the current state (each framed against its own intermediate
// target), and a rule-based selector picks which proposal the devices
// execute, based on where the wire tip currently is and which side the final
// target lies on. Chaining selections step by step navigates tasks no single
// policy was trained for.

/// One frozen sub-task policy plus the target it steers toward while later
/// sub-tasks still have to run. The agent is shared and never mutated here.
struct SubtaskPolicy {
    SubtaskLabel label = SubtaskLabel::A1;
    const SacAgent* agent = nullptr;
    ArcPosition intermediate_target;
};

/// Part of a branch: the whole branch by default, or an arc interval of it.
struct RegionEntry {
    BranchLabel branch = BranchLabel::FEMORAL;
    bool whole = true;
    double lo = 0.0, hi = 0.0;  // mm, used when !whole
};

/// Ordered region: the first region containing the tip wins.
struct Region {
    SubtaskLabel label = SubtaskLabel::A1;
    std::vector<RegionEntry> entries;
};

/// Selector rules: for each final-target side, an ordered list of regions
/// mapping tip positions to the sub-task that should drive, plus the
/// stickiness distance that suppresses chattering at region boundaries.
struct TsmConfig {
    double hysteresis_mm = 5.0;
    std::map<char, std::vector<Region>> sides;  // keys 'R' and 'L'

    const std::vector<Region>& regions_for(char side) const;
    /// Structural checks: both sides present, positive regions, finite
    /// non-negative hysteresis, labels unique per side, valid intervals.
    void validate() const;
    /// Every branch of `tree` must be covered by at least one whole-branch
    /// entry on each side, so the selector is total over the tree.
    void validate_coverage(const VascTree& tree) const;
};

/// Built-in region map for the synthetic aortic tree: approach segments map
/// to the first sub-task, the arch neighbourhood to the side-matched second,
/// and the target carotid chain to the side-matched third.
TsmConfig default_tsm_config();

// Line-based text format:
//   tsmconfig v1 hysteresis_mm=<value>
//   side <R|L>
//   region <label> <BRANCH> <BRANCH[lo,hi]> ...
// Save -> load -> save is byte identical.
std::string tsm_to_string(const TsmConfig& config);
TsmConfig tsm_from_string(const std::string& text);
void save_tsm(const TsmConfig& config, const std::string& path);
TsmConfig load_tsm(const std::string& path);

/// Which side's region map a final target selects: 'R' for the right carotid
/// chain (BCT/RCCA/RICA), 'L' for LCCA/LICA. Errors for branches that belong
/// to neither chain.
char side_of_target(const VascTree& tree, const ArcPosition& final_target);

/// Shortest along-centerline distance from `tip` to any point of the entry's
/// arc interval (zero when the tip lies inside it).
double dist_to_entry(const VascTree& tree, const ArcPosition& tip,
                     const RegionEntry& entry);
/// Minimum dist_to_entry over the region's entries.
double dist_to_region(const VascTree& tree, const ArcPosition& tip,
                      const Region& region);

/// One deterministic proposal per policy, in list order. Each policy sees the
/// global device state with its own intermediate target substituted into the
/// observation's target slot.
std::vector<ActionCommand> propose_all(const std::vector<SubtaskPolicy>& policies,
                                       const VascTree& tree, const SimConfig& sim,
                                       const DeviceState& state,
                                       const ActionCommand& prev_action);

/// Outcome of one selection step.
struct TsmDecision {
    SubtaskLabel label = SubtaskLabel::A1;
    ActionCommand action;
    bool anomaly = false;  // tip was outside every mapped region
};

/// Rule-based selection among the proposals: pick the region containing the
/// tip (given the final target's side); keep the previous selection while the
/// tip is within hysteresis of that selection's region; if the tip is outside
/// every region, fall back to the nearest one and flag the anomaly. When the
/// chosen region's sub-task is not among the supplied policies (a task may
/// end before the route does, so late regions have no policy of their own),
/// the policy closest in route stage drives instead. Pure in
/// (policies, proposals, tip, config, final target, previous).
TsmDecision tsm_select(const std::vector<SubtaskPolicy>& policies,
                       const std::vector<ActionCommand>& proposals,
                       const VascTree& tree, const ArcPosition& tip,
                       const TsmConfig& config, const ArcPosition& final_target,
                       const std::optional<SubtaskLabel>& previous);

/// A chained navigation task: start set of the first segment, final targets
/// of the last, and the ordered sub-tasks in between.
struct ComposedTask {
    ComposedTaskId id = ComposedTaskId::A12R;
    std::vector<SubtaskLabel> chain;
    EpisodeConfig episode;  // timeout 1500 for evaluation runs
};

/// Assemble the task from the catalogue: chain from the task id, episode
/// start/target sets from the tree and split seed.
ComposedTask make_composed_task(const VascTree& tree, ComposedTaskId id,
                                bool eval_split, std::uint64_t seed);

/// Full trace of one orchestrated episode.
struct ComposedRunResult {
    EpisodeResult result;
    std::vector<SubtaskLabel> selected;  // per executed step, in order
    std::vector<ArcPosition> tips;       // wire tip at each selection
    int switch_count = 0;   // changes of selected label between steps
    int anomaly_steps = 0;  // steps decided via the nearest-region fallback
};

/// Run one composed episode: propose_all -> tsm_select -> simulator step,
/// until the final target is reached or the timeout expires. Only the chain's
/// policies take part (extra entries in `policies` are ignored, so removing
/// an unreferenced policy cannot change the trajectory); a chain label with
/// no policy is a load error. The policy whose label ends the chain is framed
/// against the episode's true final target; the others keep their
/// intermediate targets.
ComposedRunResult run_composed(const ComposedTask& task,
                               const std::vector<SubtaskPolicy>& policies,
                               const TsmConfig& tsm, const VascTree& tree,
                               const SimConfig& sim, Rng rng, std::uint64_t seed);

} // namespace vn
