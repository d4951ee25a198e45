#include "vesselnav/tasks.hpp"

#include <algorithm>
#include <array>

#include "vesselnav/error.hpp"
#include "vesselnav/rng.hpp"

namespace vn {

std::string to_string(SubtaskLabel label) {
    switch (label) {
        case SubtaskLabel::A1: return "A1";
        case SubtaskLabel::A2R: return "A2R";
        case SubtaskLabel::A2L: return "A2L";
        case SubtaskLabel::A3R: return "A3R";
        case SubtaskLabel::A3L: return "A3L";
    }
    fail(ErrorKind::Internal, "bad sub-task label");
}

SubtaskLabel subtask_from_string(std::string_view s) {
    for (SubtaskLabel l : kAllSubtasks)
        if (to_string(l) == s) return l;
    fail(ErrorKind::Parameter, "unknown sub-task label: " + std::string(s));
}

std::string to_string(ComposedTaskId id) {
    switch (id) {
        case ComposedTaskId::A12R: return "A12R";
        case ComposedTaskId::A23R: return "A23R";
        case ComposedTaskId::A123R: return "A123R";
        case ComposedTaskId::A12L: return "A12L";
        case ComposedTaskId::A23L: return "A23L";
        case ComposedTaskId::A123L: return "A123L";
    }
    fail(ErrorKind::Internal, "bad composed task id");
}

std::string display_label(ComposedTaskId id) {
    switch (id) {
        case ComposedTaskId::A12R: return "A_{1,2}(R)";
        case ComposedTaskId::A23R: return "A_{2,3}(R)";
        case ComposedTaskId::A123R: return "A_{1,2,3}(R)";
        case ComposedTaskId::A12L: return "A_{1,2}(L)";
        case ComposedTaskId::A23L: return "A_{2,3}(L)";
        case ComposedTaskId::A123L: return "A_{1,2,3}(L)";
    }
    fail(ErrorKind::Internal, "bad composed task id");
}

ComposedTaskId composed_from_string(std::string_view s) {
    for (ComposedTaskId id : kAllComposedTasks)
        if (to_string(id) == s || display_label(id) == s) return id;
    fail(ErrorKind::Parameter, "unknown composed task: " + std::string(s));
}

const SubtaskSpec& subtask_spec(SubtaskLabel label) {
    // Arc ranges are chosen to sit inside every branch the generator can
    // produce (ARCH >= 70 mm, CCA >= 85 mm, ICA >= 45 mm, FEMORAL >= 110 mm).
    static const std::array<SubtaskSpec, kNumSubtasks> specs = {{
        {SubtaskLabel::A1, BranchLabel::FEMORAL, 2.0, 30.0,
         BranchLabel::ARCH, 2.0, 18.0, 0.5, BranchLabel::ARCH},
        {SubtaskLabel::A2R, BranchLabel::ARCH, 2.0, 12.0,
         BranchLabel::RCCA, 2.0, 18.0, 0.5, BranchLabel::RCCA},
        {SubtaskLabel::A2L, BranchLabel::ARCH, 2.0, 12.0,
         BranchLabel::LCCA, 2.0, 18.0, 0.5, BranchLabel::LCCA},
        {SubtaskLabel::A3R, BranchLabel::RCCA, 2.0, 12.0,
         BranchLabel::RICA, 5.0, -2.0, 1.0, BranchLabel::RICA},
        {SubtaskLabel::A3L, BranchLabel::LCCA, 2.0, 12.0,
         BranchLabel::LICA, 5.0, -2.0, 1.0, BranchLabel::LICA},
    }};
    return specs[static_cast<int>(label)];
}

int route_stage(SubtaskLabel label) {
    switch (label) {
        case SubtaskLabel::A1: return 0;
        case SubtaskLabel::A2R:
        case SubtaskLabel::A2L: return 1;
        case SubtaskLabel::A3R:
        case SubtaskLabel::A3L: return 2;
    }
    fail(ErrorKind::Parameter, "unknown sub-task label");
}

const ComposedSpec& composed_spec(ComposedTaskId id) {
    using S = SubtaskLabel;
    static const std::array<ComposedSpec, kNumComposedTasks> specs = {{
        {ComposedTaskId::A12R, {S::A1, S::A2R}, 'R'},
        {ComposedTaskId::A23R, {S::A2R, S::A3R}, 'R'},
        {ComposedTaskId::A123R, {S::A1, S::A2R, S::A3R}, 'R'},
        {ComposedTaskId::A12L, {S::A1, S::A2L}, 'L'},
        {ComposedTaskId::A23L, {S::A2L, S::A3L}, 'L'},
        {ComposedTaskId::A123L, {S::A1, S::A2L, S::A3L}, 'L'},
    }};
    return specs[static_cast<int>(id)];
}

namespace {

double resolve_arc(const VascTree& tree, BranchId branch, double bound) {
    double len = tree.branch(branch).total_length();
    double s = bound < 0.0 ? len + bound : bound;
    if (s < 0.0 || s > len)
        fail(ErrorKind::Geometry, "arc bound outside branch while building task");
    return s;
}

} // namespace

std::vector<ArcPosition> even_arc_points(const VascTree& tree, BranchId branch,
                                         double lo, double hi, int n) {
    if (n < 1) fail(ErrorKind::Parameter, "need at least one arc point");
    double a = resolve_arc(tree, branch, lo);
    double b = resolve_arc(tree, branch, hi);
    if (b < a) fail(ErrorKind::Parameter, "empty arc range");
    std::vector<ArcPosition> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double t = n == 1 ? 0.5 : static_cast<double>(i) / (n - 1);
        out.push_back({branch, a + t * (b - a)});
    }
    return out;
}

std::vector<ArcPosition> sample_arc_targets(const VascTree& tree, BranchId branch,
                                            double lo, double hi, int n,
                                            std::uint64_t seed, double min_spacing) {
    if (n < 1) fail(ErrorKind::Parameter, "need at least one target");
    if (min_spacing <= 0.0) fail(ErrorKind::Parameter, "spacing must be positive");
    double a = resolve_arc(tree, branch, lo);
    double b = resolve_arc(tree, branch, hi);
    double span = b - a;
    if (span < 1.05 * n * min_spacing)
        fail(ErrorKind::Parameter, "arc range too short for requested target count");
    Rng rng(seed ^ 0x7461726765747321ull);
    double stratum = span / n;
    double pad = std::max(0.1 * stratum, 0.5 * min_spacing);
    std::vector<ArcPosition> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double s_lo = a + i * stratum + pad;
        double s_hi = a + (i + 1) * stratum - pad;
        out.push_back({branch, rng.uniform(s_lo, s_hi)});
    }
    return out;
}

ArcPosition intermediate_target(const VascTree& tree, SubtaskLabel label,
                                double entry_mm) {
    const SubtaskSpec& spec = subtask_spec(label);
    BranchId b = tree.id_of(spec.next_entry_branch);
    double len = tree.branch(b).total_length();
    if (entry_mm <= 0.0) fail(ErrorKind::Parameter, "entry depth must be positive");
    return {b, std::min(entry_mm, 0.5 * len)};
}

namespace {

constexpr int kStartCount = 10;
constexpr int kTargetsPerSplit = 10;

std::vector<ArcPosition> split_targets(const VascTree& tree, const SubtaskSpec& spec,
                                       bool eval_split, std::uint64_t seed) {
    BranchId b = tree.id_of(spec.target_branch);
    // One shared draw; alternate members so both splits cover the range.
    std::uint64_t draw_seed = seed ^ hash_name(to_string(spec.target_branch));
    std::vector<ArcPosition> all =
        sample_arc_targets(tree, b, spec.target_lo, spec.target_hi,
                           2 * kTargetsPerSplit, draw_seed, spec.target_spacing);
    std::vector<ArcPosition> out;
    for (std::size_t i = eval_split ? 1 : 0; i < all.size(); i += 2)
        out.push_back(all[i]);
    return out;
}

} // namespace

EpisodeConfig make_subtask_episode_config(const VascTree& tree, SubtaskLabel label,
                                          bool eval_split, std::uint64_t seed) {
    const SubtaskSpec& spec = subtask_spec(label);
    EpisodeConfig cfg;
    cfg.task_label = to_string(label);
    cfg.timeout_steps = eval_split ? 1500 : 200;
    cfg.start_set = even_arc_points(tree, tree.id_of(spec.start_branch),
                                    spec.start_lo, spec.start_hi, kStartCount);
    cfg.target_set = split_targets(tree, spec, eval_split, seed);
    cfg.validate(tree);
    return cfg;
}

EpisodeConfig make_composed_episode_config(const VascTree& tree, ComposedTaskId id,
                                           bool eval_split, std::uint64_t seed) {
    const ComposedSpec& comp = composed_spec(id);
    const SubtaskSpec& first = subtask_spec(comp.chain.front());
    const SubtaskSpec& last = subtask_spec(comp.chain.back());
    EpisodeConfig cfg;
    cfg.task_label = to_string(id);
    cfg.timeout_steps = eval_split ? 1500 : 200;
    cfg.start_set = even_arc_points(tree, tree.id_of(first.start_branch),
                                    first.start_lo, first.start_hi, kStartCount);
    cfg.target_set = split_targets(tree, last, eval_split, seed);
    cfg.validate(tree);
    return cfg;
}

} // namespace vn
