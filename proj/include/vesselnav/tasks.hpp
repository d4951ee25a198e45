#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "vesselnav/episode.hpp"
#include "vesselnav/vasctree.hpp"

namespace vn {

// Catalogue of navigation tasks on the synthetic aortic tree. Five trainable
// sub-tasks cover successive segments of the route; composed tasks chain them
// into full femoral-to-carotid navigations, split by target side.

enum class SubtaskLabel { A1, A2R, A2L, A3R, A3L };
inline constexpr int kNumSubtasks = 5;
inline constexpr SubtaskLabel kAllSubtasks[kNumSubtasks] = {
    SubtaskLabel::A1, SubtaskLabel::A2R, SubtaskLabel::A2L,
    SubtaskLabel::A3R, SubtaskLabel::A3L,
};

std::string to_string(SubtaskLabel label);
SubtaskLabel subtask_from_string(std::string_view s);

enum class ComposedTaskId { A12R, A23R, A123R, A12L, A23L, A123L };
inline constexpr int kNumComposedTasks = 6;
inline constexpr ComposedTaskId kAllComposedTasks[kNumComposedTasks] = {
    ComposedTaskId::A12R, ComposedTaskId::A23R, ComposedTaskId::A123R,
    ComposedTaskId::A12L, ComposedTaskId::A23L, ComposedTaskId::A123L,
};

std::string to_string(ComposedTaskId id);
/// Subscripted form used in report tables, e.g. "A_{1,2}(R)".
std::string display_label(ComposedTaskId id);
ComposedTaskId composed_from_string(std::string_view s);

/// Geometry of one sub-task: where episodes start, where targets live (arc
/// ranges in millimetres along the named branches) and which branch's entry
/// serves as the intermediate target when a later sub-task continues the
/// route.
struct SubtaskSpec {
    SubtaskLabel label;
    BranchLabel start_branch;
    double start_lo, start_hi;
    BranchLabel target_branch;
    double target_lo, target_hi;  // negative bound means branch length + bound
    double target_spacing;
    BranchLabel next_entry_branch;  // successor region (own target branch if last)
};

const SubtaskSpec& subtask_spec(SubtaskLabel label);

/// Position of a sub-task along the femoral-to-carotid route: 0 for the
/// approach to the arch, 1 for the arch crossing, 2 for the carotid run.
int route_stage(SubtaskLabel label);

struct ComposedSpec {
    ComposedTaskId id;
    std::vector<SubtaskLabel> chain;  // ordered, consecutive segments
    char side;                        // 'R' or 'L'
};

const ComposedSpec& composed_spec(ComposedTaskId id);

/// n points evenly spaced over [lo, hi] of the branch arc, endpoints included.
std::vector<ArcPosition> even_arc_points(const VascTree& tree, BranchId branch,
                                         double lo, double hi, int n);

/// Stratified draw of n arc positions in [lo, hi], sorted ascending, any two
/// at least min_spacing apart. Deterministic in the seed.
std::vector<ArcPosition> sample_arc_targets(const VascTree& tree, BranchId branch,
                                            double lo, double hi, int n,
                                            std::uint64_t seed, double min_spacing);

/// Point entry_mm into the sub-task's successor branch; used as the target
/// shown to a policy while a later sub-task still has to run.
ArcPosition intermediate_target(const VascTree& tree, SubtaskLabel label,
                                double entry_mm = 10.0);

/// Episode setup for standalone training/evaluation of one sub-task. Train
/// and eval splits share one stratified target draw (alternating members) and
/// differ in timeout: 200 steps for training, 1500 for evaluation.
EpisodeConfig make_subtask_episode_config(const VascTree& tree, SubtaskLabel label,
                                          bool eval_split, std::uint64_t seed);

/// Episode setup for a composed task: starts of the first chain segment,
/// targets of the last.
EpisodeConfig make_composed_episode_config(const VascTree& tree, ComposedTaskId id,
                                           bool eval_split, std::uint64_t seed);

} // namespace vn
