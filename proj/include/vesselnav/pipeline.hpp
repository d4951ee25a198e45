#pragma once

#include <string>

#include "vesselnav/config.hpp"

namespace vn {

// Command layer shared by the CLI and the C API: anatomy generation,
// sub-task / monolith training, composed-task evaluation, paired variant
// comparison, and report regeneration. Every command reads its settings from
// one flat key-value config (file merged with overrides), writes a
// resolved-config snapshot and a machine-readable manifest under
// <out>/reports/, and is deterministic given the config, including the root
// seed key.
//
// Fixed output layout under the `out` key:
//   trees/        serialized anatomies, tree_000.txt ...
//   checkpoints/  per-variant agent checkpoints, train state, TSM config
//   reports/      stats, per-episode CSVs, metric tables, markdown summaries

/// Generates anatomy.n_trees synthetic trees plus a stats report
/// (tortuosity means, arch-type counts). n = 0 is valid and writes an empty
/// report.
void cmd_gen_vasc(const KeyValueConfig& config);

/// Trains the controllers of train.variant:
///   hm-marl-1   five sub-task agents on the first tree
///   sa-rl-1     one monolithic agent per composed task in train.tasks, each
///               given the summed step budget of the task's sub-task chain
///   hm-marl-10  five sub-task agents with episodes cycling across
///               train.n_trees anatomies
/// Interrupted runs resume from the saved training state at the last
/// snapshot boundary.
void cmd_train(const KeyValueConfig& config);

/// Evaluates one trained variant over eval.tasks with eval.episodes
/// episodes per task on the trees listed in eval.trees; emits per-episode
/// CSV, metric CSV, and a markdown table.
void cmd_eval(const KeyValueConfig& config);

/// Evaluates several variants on a shared seed grid and emits the combined
/// metric table plus paired t-tests on the success indicators.
void cmd_compare(const KeyValueConfig& config);

/// Rebuilds the comparison tables from a stored per-episode CSV without
/// running any episodes.
void cmd_report(const KeyValueConfig& config);

/// Dispatches to the cmd_* function for a subcommand name after validating
/// the config keys against the full known-key schema. Unknown command or
/// key: error.
void run_command(const std::string& command, const KeyValueConfig& config);

/// All config keys any command understands (the schema run_command enforces).
std::vector<std::string> known_config_keys();

} // namespace vn
