#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vesselnav/sac.hpp"

namespace vn {

// Evaluation protocol: run fixed-seed episode batches per task, aggregate
// success rate (SR), procedure time (PT) and pathlength ratio (PR), and
// compare controller variants with paired two-tailed t-tests on their
// per-episode success indicators.

/// Outcome record of one evaluation episode, shared by the standalone and
/// composed runners. `procedure_time_s` is present only on success; failed
/// episodes instead contribute their pathlength ratio.
struct EpisodeResult {
    std::string task;            // canonical task label, e.g. "A1" or "A12R"
    std::uint64_t seed = 0;      // episode draw seed; pairing key across variants
    bool success = false;
    std::optional<double> procedure_time_s;  // steps * dt, success only
    double initial_pathlength_mm = 0.0;
    double final_pathlength_mm = 0.0;
    int steps = 0;
};

struct MeanSd {
    double mean = 0.0;
    double sd = 0.0;  // population formula
};

/// Per-task aggregate. PT exists only when at least one episode succeeded,
/// PR only when at least one failed, which yields exactly the report's "-"
/// cells at the SR = 0% / SR = 100% boundaries.
struct TaskMetrics {
    std::string task;
    int episodes = 0;
    int successes = 0;
    MeanSd sr;                   // percentage over all episodes
    std::optional<MeanSd> pt;    // seconds over successful episodes
    std::optional<MeanSd> pr;    // percentage (remaining/initial) over failures
};

/// Aggregate one task's episodes (all must carry the task's label). The fold
/// sorts by seed first, so any input order gives identical bytes.
TaskMetrics aggregate_task(const std::string& task,
                           std::vector<EpisodeResult> episodes);

/// The shared seed list for an n-episode evaluation batch.
std::vector<std::uint64_t> evaluation_seeds(std::uint64_t seed_base,
                                            int n_episodes);

/// Callback that runs one episode of `task` with the given draw seed.
using EpisodeRunner =
    std::function<EpisodeResult(const std::string& task, std::uint64_t seed)>;

/// Run every task for n episodes on the shared seed list. Results come back
/// task-major in input task order, seeds ascending within a task.
std::vector<EpisodeResult> evaluate(const EpisodeRunner& runner,
                                    const std::vector<std::string>& tasks,
                                    int n_episodes, std::uint64_t seed_base);

/// One episode driven end-to-end by a single frozen policy in deterministic
/// mode; the episode draw stream is derived from the seed alone.
EpisodeResult run_policy_episode(const SacAgent& agent, const VascTree& tree,
                                 const SimConfig& sim,
                                 const EpisodeConfig& config,
                                 std::uint64_t seed);

/// All episodes of one controller variant, across tasks.
struct VariantResults {
    std::string name;
    std::vector<EpisodeResult> episodes;
};

struct PairwiseTest {
    std::string task;
    std::string variant_a;
    std::string variant_b;
    double t = 0.0;
    double p = 1.0;
    bool degenerate = false;  // constant nonzero success difference
    bool significant = false;
};

struct ComparisonReport {
    std::vector<std::string> tasks;     // row order
    std::vector<std::string> variants;  // column order
    std::vector<std::vector<TaskMetrics>> metrics;  // [variant][task]
    std::vector<PairwiseTest> tests;  // per task, per variant pair (a before b)
    double alpha = 0.05;
};

/// Pair the variants' episodes by (task, seed) and test success indicators.
/// Every variant must cover every task with the identical seed set; anything
/// else is a pairing error. A degenerate pair (one variant strictly better on
/// every episode) is reported as p = 0 with t = +/-inf rather than an error.
ComparisonReport compare(const std::vector<VariantResults>& variants,
                         const std::vector<std::string>& tasks,
                         double alpha = 0.05);

// Deterministic report renderings (fixed-width %.6f cells, "-" per the
// SR-boundary rules).
std::string comparison_markdown(const ComparisonReport& report);
std::string metrics_csv(const ComparisonReport& report);
std::string episodes_csv(const std::vector<VariantResults>& variants);

/// Row label used in reports: composed tasks render as their subscripted
/// display form, sub-tasks as-is.
std::string task_display(const std::string& task);

} // namespace vn
