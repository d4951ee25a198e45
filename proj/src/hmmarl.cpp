#include "vesselnav/hmmarl.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

namespace vn {

namespace {

bool entry_contains(const VascTree& tree, const RegionEntry& entry,
                    const ArcPosition& tip) {
    if (tree.branch(tip.branch).label != entry.branch) return false;
    if (entry.whole) return true;
    return tip.s >= entry.lo && tip.s <= entry.hi;
}

bool region_contains(const VascTree& tree, const Region& region,
                     const ArcPosition& tip) {
    for (const RegionEntry& e : region.entries)
        if (entry_contains(tree, e, tip)) return true;
    return false;
}

std::string format_mm(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

} // namespace

const std::vector<Region>& TsmConfig::regions_for(char side) const {
    auto it = sides.find(side);
    if (it == sides.end())
        fail(ErrorKind::Config,
             std::string("no region map for side '") + side + "'");
    return it->second;
}

void TsmConfig::validate() const {
    if (!std::isfinite(hysteresis_mm) || hysteresis_mm < 0.0)
        fail(ErrorKind::Config, "hysteresis_mm must be finite and non-negative");
    if (sides.count('R') == 0 || sides.count('L') == 0)
        fail(ErrorKind::Config, "region maps for both sides R and L are required");
    for (const auto& [side, regions] : sides) {
        if (side != 'R' && side != 'L')
            fail(ErrorKind::Config, std::string("unknown side '") + side + "'");
        if (regions.empty())
            fail(ErrorKind::Config,
                 std::string("side ") + side + " has no regions");
        std::vector<SubtaskLabel> seen;
        for (const Region& r : regions) {
            if (std::find(seen.begin(), seen.end(), r.label) != seen.end())
                fail(ErrorKind::Config, "duplicate region label " +
                                            to_string(r.label) + " on side " + side);
            seen.push_back(r.label);
            if (r.entries.empty())
                fail(ErrorKind::Config,
                     "region " + to_string(r.label) + " has no entries");
            for (const RegionEntry& e : r.entries) {
                if (e.whole) continue;
                if (!std::isfinite(e.lo) || !std::isfinite(e.hi) || e.lo < 0.0 ||
                    e.hi <= e.lo)
                    fail(ErrorKind::Config,
                         "bad arc interval on " + std::string(to_string(e.branch)) +
                             " in region " + to_string(r.label));
            }
        }
    }
}

void TsmConfig::validate_coverage(const VascTree& tree) const {
    validate();
    for (const auto& [side, regions] : sides) {
        for (const auto& [id, branch] : tree.branches) {
            bool covered = false;
            for (const Region& r : regions)
                for (const RegionEntry& e : r.entries)
                    if (e.branch == branch.label && e.whole) covered = true;
            if (!covered)
                fail(ErrorKind::Config,
                     std::string("branch ") + to_string(branch.label) +
                         " is not covered on side " + side);
        }
    }
}

TsmConfig default_tsm_config() {
    auto whole = [](BranchLabel b) {
        RegionEntry e;
        e.branch = b;
        return e;
    };
    auto region = [&](SubtaskLabel label, std::vector<BranchLabel> branches) {
        Region r;
        r.label = label;
        for (BranchLabel b : branches) r.entries.push_back(whole(b));
        return r;
    };
    TsmConfig cfg;
    cfg.hysteresis_mm = 5.0;
    cfg.sides['R'] = {
        region(SubtaskLabel::A1, {BranchLabel::FEMORAL, BranchLabel::ILIAC,
                                  BranchLabel::DESC_AORTA}),
        region(SubtaskLabel::A2R, {BranchLabel::ARCH, BranchLabel::BCT,
                                   BranchLabel::LCCA, BranchLabel::LICA,
                                   BranchLabel::LSA}),
        region(SubtaskLabel::A3R, {BranchLabel::RCCA, BranchLabel::RICA}),
    };
    cfg.sides['L'] = {
        region(SubtaskLabel::A1, {BranchLabel::FEMORAL, BranchLabel::ILIAC,
                                  BranchLabel::DESC_AORTA}),
        region(SubtaskLabel::A2L, {BranchLabel::ARCH, BranchLabel::BCT,
                                   BranchLabel::RCCA, BranchLabel::RICA,
                                   BranchLabel::LSA}),
        region(SubtaskLabel::A3L, {BranchLabel::LCCA, BranchLabel::LICA}),
    };
    return cfg;
}

std::string tsm_to_string(const TsmConfig& config) {
    config.validate();
    std::string out = "tsmconfig v1 hysteresis_mm=" + format_mm(config.hysteresis_mm) + "\n";
    for (const auto& [side, regions] : config.sides) {
        out += std::string("side ") + side + "\n";
        for (const Region& r : regions) {
            out += "region " + to_string(r.label);
            for (const RegionEntry& e : r.entries) {
                out += std::string(" ") + to_string(e.branch);
                if (!e.whole)
                    out += "[" + format_mm(e.lo) + "," + format_mm(e.hi) + "]";
            }
            out += "\n";
        }
    }
    return out;
}

TsmConfig tsm_from_string(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) fail(ErrorKind::Load, "empty selector config");
    std::istringstream head(line);
    std::string magic, version, hfield;
    head >> magic >> version >> hfield;
    if (magic != "tsmconfig" || version != "v1" ||
        hfield.rfind("hysteresis_mm=", 0) != 0)
        fail(ErrorKind::Load, "bad selector config header: " + line);
    TsmConfig cfg;
    try {
        cfg.hysteresis_mm = std::stod(hfield.substr(14));
    } catch (const std::exception&) {
        fail(ErrorKind::Load, "bad hysteresis value: " + hfield);
    }
    cfg.sides.clear();
    char current = '\0';
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "side") {
            std::string side;
            ls >> side;
            if (side != "R" && side != "L")
                fail(ErrorKind::Load, "unknown side: " + line);
            current = side[0];
            if (cfg.sides.count(current))
                fail(ErrorKind::Load, std::string("duplicate side ") + current);
            cfg.sides[current] = {};
        } else if (word == "region") {
            if (current == '\0')
                fail(ErrorKind::Load, "region before any side: " + line);
            std::string labelname;
            ls >> labelname;
            Region region;
            try {
                region.label = subtask_from_string(labelname);
            } catch (const Error&) {
                fail(ErrorKind::Load, "unknown sub-task label: " + labelname);
            }
            std::string token;
            while (ls >> token) {
                RegionEntry entry;
                std::string branchname = token;
                auto bracket = token.find('[');
                if (bracket != std::string::npos) {
                    branchname = token.substr(0, bracket);
                    if (token.back() != ']')
                        fail(ErrorKind::Load, "bad arc interval: " + token);
                    std::string range = token.substr(bracket + 1,
                                                     token.size() - bracket - 2);
                    auto comma = range.find(',');
                    if (comma == std::string::npos)
                        fail(ErrorKind::Load, "bad arc interval: " + token);
                    try {
                        entry.lo = std::stod(range.substr(0, comma));
                        entry.hi = std::stod(range.substr(comma + 1));
                    } catch (const std::exception&) {
                        fail(ErrorKind::Load, "bad arc interval: " + token);
                    }
                    entry.whole = false;
                }
                auto label = branch_label_from_string(branchname);
                if (!label)
                    fail(ErrorKind::Load, "unknown branch label: " + branchname);
                entry.branch = *label;
                region.entries.push_back(entry);
            }
            if (region.entries.empty())
                fail(ErrorKind::Load, "region without entries: " + line);
            cfg.sides[current].push_back(region);
        } else {
            fail(ErrorKind::Load, "unrecognized selector config line: " + line);
        }
    }
    try {
        cfg.validate();
    } catch (const Error& e) {
        fail(ErrorKind::Load, std::string("invalid selector config: ") + e.what());
    }
    return cfg;
}

void save_tsm(const TsmConfig& config, const std::string& path) {
    std::string text = tsm_to_string(config);
    std::ofstream f(path, std::ios::binary);
    if (!f) fail(ErrorKind::Io, "cannot open for writing: " + path);
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f) fail(ErrorKind::Io, "write failed: " + path);
}

TsmConfig load_tsm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail(ErrorKind::Load, "cannot open selector config: " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return tsm_from_string(buf.str());
}

char side_of_target(const VascTree& tree, const ArcPosition& final_target) {
    tree.validate_position(final_target);
    switch (tree.branch(final_target.branch).label) {
        case BranchLabel::BCT:
        case BranchLabel::RCCA:
        case BranchLabel::RICA:
            return 'R';
        case BranchLabel::LCCA:
        case BranchLabel::LICA:
            return 'L';
        default:
            fail(ErrorKind::Parameter,
                 "final target must lie in a carotid chain, got branch " +
                     std::string(to_string(tree.branch(final_target.branch).label)));
    }
}

double dist_to_entry(const VascTree& tree, const ArcPosition& tip,
                     const RegionEntry& entry) {
    tree.validate_position(tip);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [id, branch] : tree.branches) {
        if (branch.label != entry.branch) continue;
        // The tree-path distance from the tip to an arc position s on this
        // branch is V-shaped in s: it is minimized where the tip's path meets
        // the branch (the tip itself, the attachment point of the subtree
        // holding the tip, or the branch start), and grows linearly away from
        // there. Clamping that minimizer into the interval gives the nearest
        // interval point.
        double meet = 0.0;
        if (tip.branch == id) {
            meet = tip.s;
        } else {
            BranchId walk = tip.branch;
            while (walk != kNoBranch) {
                const Branch& wb = tree.branch(walk);
                if (wb.parent == id) {
                    meet = tree.branch(id).cum_s[wb.attachment_index];
                    break;
                }
                walk = wb.parent;
            }
            // walk == kNoBranch: the branch is not an ancestor, so the path
            // enters it at its start; meet stays 0.
        }
        double lo = entry.whole ? 0.0 : entry.lo;
        double hi = entry.whole ? branch.total_length()
                                : std::min(entry.hi, branch.total_length());
        double s = std::clamp(meet, lo, hi);
        best = std::min(best, pathlength(tree, tip, ArcPosition{id, s}));
    }
    return best;
}

double dist_to_region(const VascTree& tree, const ArcPosition& tip,
                      const Region& region) {
    double best = std::numeric_limits<double>::infinity();
    for (const RegionEntry& e : region.entries)
        best = std::min(best, dist_to_entry(tree, tip, e));
    return best;
}

std::vector<ActionCommand> propose_all(const std::vector<SubtaskPolicy>& policies,
                                       const VascTree& tree, const SimConfig& sim,
                                       const DeviceState& state,
                                       const ActionCommand& prev_action) {
    std::vector<ActionCommand> proposals;
    proposals.reserve(policies.size());
    for (const SubtaskPolicy& p : policies) {
        if (p.agent == nullptr)
            fail(ErrorKind::Load,
                 "sub-task policy " + to_string(p.label) + " has no loaded agent");
        Observation obs =
            observe(tree, sim, state, p.intermediate_target, prev_action);
        std::array<double, Observation::kDim> flat = obs.to_vector();
        Rng unused(0);  // deterministic mode draws nothing
        std::vector<double> a = p.agent->act(
            std::vector<double>(flat.begin(), flat.end()), false, unused);
        std::array<double, 4> n{};
        for (std::size_t j = 0; j < 4 && j < a.size(); ++j) n[j] = a[j];
        proposals.push_back(ActionCommand::from_normalized(n));
    }
    return proposals;
}

TsmDecision tsm_select(const std::vector<SubtaskPolicy>& policies,
                       const std::vector<ActionCommand>& proposals,
                       const VascTree& tree, const ArcPosition& tip,
                       const TsmConfig& config, const ArcPosition& final_target,
                       const std::optional<SubtaskLabel>& previous) {
    if (policies.size() != proposals.size())
        fail(ErrorKind::Parameter, "proposals are not aligned with policies");
    tree.validate_position(tip);
    char side = side_of_target(tree, final_target);
    const std::vector<Region>& regions = config.regions_for(side);

    TsmDecision decision;
    bool found = false;
    for (const Region& r : regions) {
        if (region_contains(tree, r, tip)) {
            decision.label = r.label;
            found = true;
            break;
        }
    }
    if (!found) {
        decision.anomaly = true;
        double best = std::numeric_limits<double>::infinity();
        for (const Region& r : regions) {
            double d = dist_to_region(tree, tip, r);
            if (d < best) {
                best = d;
                decision.label = r.label;
            }
        }
    }
    if (previous && *previous != decision.label) {
        // Stay with the previous selection while the tip is still within the
        // stickiness distance of that selection's region.
        for (const Region& r : regions) {
            if (r.label != *previous) continue;
            if (dist_to_region(tree, tip, r) <= config.hysteresis_mm)
                decision.label = *previous;
            break;
        }
    }
    for (std::size_t i = 0; i < policies.size(); ++i) {
        if (policies[i].label == decision.label) {
            decision.action = proposals[i];
            return decision;
        }
    }
    // The region's sub-task is not among the supplied policies: a task that
    // ends mid-route has no policies for the later regions. The policy
    // nearest in route stage drives there (ties in favour of list order).
    std::size_t chosen = policies.size();
    int best_gap = std::numeric_limits<int>::max();
    for (std::size_t i = 0; i < policies.size(); ++i) {
        int gap = std::abs(route_stage(policies[i].label) -
                           route_stage(decision.label));
        if (gap < best_gap) {
            best_gap = gap;
            chosen = i;
        }
    }
    if (chosen == policies.size())
        fail(ErrorKind::Load,
             "no policy loaded for selected sub-task " + to_string(decision.label));
    decision.label = policies[chosen].label;
    decision.action = proposals[chosen];
    return decision;
}

ComposedTask make_composed_task(const VascTree& tree, ComposedTaskId id,
                                bool eval_split, std::uint64_t seed) {
    ComposedTask task;
    task.id = id;
    task.chain = composed_spec(id).chain;
    task.episode = make_composed_episode_config(tree, id, eval_split, seed);
    return task;
}

ComposedRunResult run_composed(const ComposedTask& task,
                               const std::vector<SubtaskPolicy>& policies,
                               const TsmConfig& tsm, const VascTree& tree,
                               const SimConfig& sim, Rng rng, std::uint64_t seed) {
    if (task.chain.empty())
        fail(ErrorKind::Parameter, "composed task has an empty sub-task chain");

    // Only the chain's policies take part, in chain order; anything else in
    // the list is ignored so its presence or absence cannot change the run.
    std::vector<SubtaskPolicy> framed;
    for (SubtaskLabel label : task.chain) {
        bool found = false;
        for (const SubtaskPolicy& p : policies) {
            if (p.label == label) {
                framed.push_back(p);
                found = true;
                break;
            }
        }
        if (!found)
            fail(ErrorKind::Load,
                 "no policy loaded for chain sub-task " + to_string(label));
    }

    Episode env(tree, sim, task.episode, rng);
    env.reset();

    // The closing sub-task steers for the episode's true final target; every
    // other policy keeps its fixed intermediate target.
    for (SubtaskPolicy& p : framed)
        if (p.label == task.chain.back()) p.intermediate_target = env.target();

    ComposedRunResult out;
    std::optional<SubtaskLabel> previous;
    while (!env.done()) {
        std::vector<ActionCommand> proposals =
            propose_all(framed, tree, sim, env.state(), env.prev_action());
        TsmDecision decision =
            tsm_select(framed, proposals, tree, env.state().wire_tip, tsm,
                       env.target(), previous);
        out.tips.push_back(env.state().wire_tip);
        env.run_step(decision.action);
        out.selected.push_back(decision.label);
        if (decision.anomaly) ++out.anomaly_steps;
        if (previous && *previous != decision.label) ++out.switch_count;
        previous = decision.label;
    }

    out.result.task = to_string(task.id);
    out.result.seed = seed;
    out.result.success = env.reached();
    if (env.reached()) out.result.procedure_time_s = env.simulated_seconds();
    out.result.initial_pathlength_mm = env.initial_pathlength();
    out.result.final_pathlength_mm = env.current_pathlength();
    out.result.steps = env.steps();
    return out;
}

} // namespace vn
