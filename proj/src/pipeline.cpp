#include "vesselnav/pipeline.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <utility>

#include "vesselnav/anatomy.hpp"
#include "vesselnav/evalharness.hpp"
#include "vesselnav/hmmarl.hpp"
#include "vesselnav/sac.hpp"
#include "vesselnav/stats.hpp"
#include "vesselnav/tasks.hpp"

namespace vn {

namespace {

namespace fs = std::filesystem;

std::string f6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string hex16(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

struct RunPaths {
    std::string out, trees, checkpoints, reports;
    explicit RunPaths(const std::string& o)
        : out(o),
          trees(o + "/trees"),
          checkpoints(o + "/checkpoints"),
          reports(o + "/reports") {}
};

RunPaths make_paths(const KeyValueConfig& cfg) {
    RunPaths p(cfg.get_string("out", "out"));
    for (const std::string& dir : {p.out, p.trees, p.checkpoints, p.reports}) {
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec)
            fail(ErrorKind::Io,
                 "cannot create directory " + dir + ": " + ec.message());
    }
    return p;
}

void write_text(const std::string& path, const std::string& content,
                bool append = false) {
    std::ofstream out(path, std::ios::binary |
                                (append ? std::ios::app : std::ios::trunc));
    if (!out) fail(ErrorKind::Io, "cannot write " + path);
    out << content;
    if (!out) fail(ErrorKind::Io, "failed writing " + path);
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Load, "cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        std::size_t b = item.find_first_not_of(" \t");
        std::size_t e = item.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

std::string tree_file(const RunPaths& p, int i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "tree_%03d.txt", i);
    return p.trees + "/" + buf;
}

VascTree load_tree_checked(const RunPaths& p, int i) {
    std::string path = tree_file(p, i);
    if (!fs::exists(path))
        fail(ErrorKind::Config,
             "no anatomy at " + path + "; run gen-vasc first");
    return load_tree(path);
}

std::uint64_t name_seed(std::uint64_t root, const std::string& name) {
    return Rng::stream(root, name).next_u64();
}

/// "64x64" -> {64, 64}.
std::vector<int> parse_hidden(const std::string& text) {
    std::vector<int> out;
    std::istringstream in(text);
    std::string part;
    while (std::getline(in, part, 'x')) {
        try {
            std::size_t used = 0;
            int v = std::stoi(part, &used);
            if (used != part.size() || v < 1) throw std::invalid_argument(part);
            out.push_back(v);
        } catch (const std::exception&) {
            fail(ErrorKind::Config,
                 "'" + text + "' is not a layer list like 64x64");
        }
    }
    if (out.empty())
        fail(ErrorKind::Config, "'" + text + "' names no hidden layers");
    return out;
}

std::string hidden_to_string(const std::vector<int>& hidden) {
    std::string out;
    for (std::size_t i = 0; i < hidden.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(hidden[i]);
    }
    return out;
}

/// Desk-scale SAC preset with config overrides applied.
SacConfig sac_from_config(const KeyValueConfig& cfg) {
    SacConfig s;
    s.hidden = parse_hidden(cfg.get_string("train.hidden", "64x64"));
    s.batch_size = static_cast<int>(cfg.get_int("train.batch", 64));
    s.buffer_capacity =
        static_cast<std::size_t>(cfg.get_int("train.buffer", 200'000));
    s.lr = cfg.get_double("train.lr", 3e-4);
    s.discount = cfg.get_double("train.discount", 0.99);
    s.tau = cfg.get_double("train.tau", 0.005);
    s.target_entropy = cfg.get_double("train.target_entropy", -4.0);
    s.warmup_steps = static_cast<int>(cfg.get_int("train.warmup", 1000));
    s.total_steps = cfg.get_int("train.steps", 200'000);
    s.update_every = static_cast<int>(cfg.get_int("train.update_every", 1));
    s.eval_interval = cfg.get_int("train.eval_interval", 5000);
    s.eval_episodes = static_cast<int>(cfg.get_int("train.eval_episodes", 20));
    s.stop_eval_sr = cfg.get_double("train.stop_sr", 100.0);
    s.validate();
    return s;
}

void write_run_records(const RunPaths& p, const std::string& command,
                       const KeyValueConfig& cfg, KeyValueConfig manifest) {
    cfg.save_snapshot(p.reports + "/resolved-" + command + ".cfg");
    manifest.set("command", command);
    manifest.set("config_fnv1a64", hex16(cfg.hash()));
    manifest.set("seed", std::to_string(cfg.get_u64("seed", 0)));
    manifest.save_snapshot(p.reports + "/manifest-" + command + ".cfg");
}

// --- training --------------------------------------------------------------

const char* kTrainlogHeader =
    "step,episode_return,eval_sr,critic_loss,actor_loss,alpha_loss,alpha\n";

void append_trainlog(const std::string& path,
                     const std::vector<StepLogRow>& rows, bool fresh) {
    std::string text;
    if (fresh || !fs::exists(path)) text += kTrainlogHeader;
    for (const StepLogRow& r : rows) {
        text += std::to_string(r.step) + "," + f6(r.episode_return) + "," +
                f6(r.eval_sr) + "," + f6(r.critic_loss) + "," + f6(r.actor_loss) +
                "," + f6(r.alpha_loss) + "," + f6(r.alpha) + "\n";
    }
    write_text(path, text, !fresh && fs::exists(path));
}

struct TrainedOne {
    long steps_used = 0;
    double final_sr = -1.0;
    bool stopped_early = false;
};

/// Trains (or resumes) one agent and persists checkpoint, training state,
/// step log, and a per-checkpoint manifest.
TrainedOne train_one(const RunPaths& p, const std::string& variant,
                     const std::string& name,
                     const std::vector<const VascTree*>& trees,
                     const std::vector<EpisodeConfig>& train_cfgs,
                     const VascTree& eval_tree, const EpisodeConfig& eval_cfg,
                     const SacConfig& sac, std::uint64_t agent_seed,
                     bool resume, std::uint64_t config_hash) {
    std::string dir = p.checkpoints + "/" + variant;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(ErrorKind::Io, "cannot create directory " + dir);
    std::string base = dir + "/" + name;

    SimConfig sim;
    Rng init = Rng::stream(agent_seed, "init");
    SacAgent agent(Observation::kDim, 4, sac, init);
    TrainState state(sac.buffer_capacity, agent_seed);
    bool resumed = false;
    if (resume && fs::exists(base + ".state") && fs::exists(base + ".ckpt")) {
        agent.load(base + ".ckpt");
        state = load_train_state(base + ".state");
        resumed = true;
    }

    TrainResult r = train_from_state_cycle(agent, state, trees, sim, train_cfgs,
                                           eval_tree, eval_cfg, sac);
    agent.save(base + ".ckpt");
    save_train_state(base + ".state", state);
    append_trainlog(p.reports + "/trainlog-" + variant + "-" + name + ".csv",
                    r.step_log, !resumed);

    TrainedOne done;
    done.steps_used = state.next_step - 1;
    done.stopped_early = state.stopped_early;
    // The saved checkpoint holds the best-snapshot weights, so report that
    // snapshot's success rate as the policy's.
    if (!state.snapshots.empty()) done.final_sr = state.best_sr;

    KeyValueConfig man;
    man.set("task", name);
    man.set("variant", variant);
    man.set("seed", std::to_string(agent_seed));
    man.set("hidden", hidden_to_string(sac.hidden));
    man.set("steps_used", std::to_string(done.steps_used));
    man.set("stopped_early", done.stopped_early ? "true" : "false");
    man.set("final_sr", f6(done.final_sr));
    man.set("episodes_completed", std::to_string(state.episodes_completed));
    man.set("config_fnv1a64", hex16(config_hash));
    man.save_snapshot(base + ".manifest");
    return done;
}

// --- evaluation ------------------------------------------------------------

ComposedTaskId composed_id_checked(const std::string& name) {
    try {
        return composed_from_string(name);
    } catch (const Error&) {
        fail(ErrorKind::Config,
             "'" + name + "' is not a composed task (expected A12R ... A123L)");
    }
}

/// "0,3,5" or "0-9" (both mixable) -> indices.
std::vector<int> parse_tree_indices(const std::string& text) {
    std::vector<int> out;
    for (const std::string& item : split_list(text)) {
        std::size_t dash = item.find('-');
        try {
            if (dash == std::string::npos) {
                std::size_t used = 0;
                int v = std::stoi(item, &used);
                if (used != item.size() || v < 0) throw std::invalid_argument(item);
                out.push_back(v);
            } else {
                std::size_t ua = 0, ub = 0;
                std::string sa = item.substr(0, dash), sb = item.substr(dash + 1);
                int a = std::stoi(sa, &ua), b = std::stoi(sb, &ub);
                if (ua != sa.size() || ub != sb.size() || a < 0 || b < a)
                    throw std::invalid_argument(item);
                for (int v = a; v <= b; ++v) out.push_back(v);
            }
        } catch (const std::exception&) {
            fail(ErrorKind::Config,
                 "eval.trees entry '" + item + "' is not an index or range");
        }
    }
    if (out.empty()) fail(ErrorKind::Config, "eval.trees names no trees");
    return out;
}

struct EvalSetup {
    std::vector<std::string> task_names;
    int episodes = 50;
    std::vector<int> tree_indices;
    std::vector<VascTree> trees;  // aligned with tree_indices
    std::uint64_t seed = 0;
    SimConfig sim;
};

EvalSetup eval_setup_from(const KeyValueConfig& cfg, const RunPaths& p) {
    EvalSetup s;
    s.seed = cfg.get_u64("seed", 0);
    s.task_names = split_list(
        cfg.get_string("eval.tasks", "A12R,A23R,A123R,A12L,A23L,A123L"));
    if (s.task_names.empty()) fail(ErrorKind::Config, "eval.tasks is empty");
    for (const std::string& t : s.task_names) composed_id_checked(t);

    std::string preset = cfg.get_string("eval.preset", "insilico");
    int preset_eps = 0;
    if (preset == "insilico") preset_eps = 50;
    else if (preset == "invitro") preset_eps = 10;
    else
        fail(ErrorKind::Config, "eval.preset '" + preset +
                                    "' is not insilico or invitro");
    s.episodes = static_cast<int>(cfg.get_int("eval.episodes", preset_eps));
    if (s.episodes < 1) fail(ErrorKind::Config, "eval.episodes must be >= 1");

    s.tree_indices = parse_tree_indices(cfg.get_string("eval.trees", "0"));
    for (int idx : s.tree_indices) s.trees.push_back(load_tree_checked(p, idx));
    return s;
}

struct LoadedVariant {
    std::string name;
    bool hierarchical = false;
    std::map<SubtaskLabel, std::unique_ptr<SacAgent>> by_label;
    std::map<std::string, std::unique_ptr<SacAgent>> by_task;
    TsmConfig tsm;
};

std::unique_ptr<SacAgent> load_agent(const std::string& base) {
    if (!fs::exists(base + ".ckpt") || !fs::exists(base + ".manifest"))
        fail(ErrorKind::Load,
             "missing checkpoint " + base + ".ckpt; train this variant first");
    KeyValueConfig man = KeyValueConfig::load_file(base + ".manifest");
    SacConfig sc;
    sc.hidden = parse_hidden(man.get_string("hidden", "64x64"));
    Rng init(0);
    auto agent = std::make_unique<SacAgent>(Observation::kDim, 4, sc, init);
    agent->load(base + ".ckpt");
    return agent;
}

LoadedVariant load_variant(const RunPaths& p, const std::string& name,
                           const std::vector<std::string>& task_names) {
    LoadedVariant v;
    v.name = name;
    std::string dir = p.checkpoints + "/" + name;
    if (name.rfind("hm-marl", 0) == 0) {
        v.hierarchical = true;
        for (SubtaskLabel label : kAllSubtasks)
            v.by_label[label] = load_agent(dir + "/" + to_string(label));
        v.tsm = load_tsm(dir + "/tsm.cfg");
    } else if (name.rfind("sa-rl", 0) == 0) {
        for (const std::string& t : task_names)
            v.by_task[t] = load_agent(dir + "/" + t);
    } else {
        fail(ErrorKind::Config, "unknown variant '" + name + "'");
    }
    return v;
}

/// Per-step orchestration trace rows for hierarchical runs, appended per
/// episode when trajectory logging is on.
const char* kTrajectoryHeader =
    "task,seed,step,branch,arc_mm,selected_subtask,anomaly\n";

EpisodeRunner make_runner(const LoadedVariant& v, const EvalSetup& setup,
                          std::shared_ptr<std::string> trajectory_sink) {
    auto composed_cache =
        std::make_shared<std::map<std::pair<std::string, std::size_t>, ComposedTask>>();
    auto policy_cache =
        std::make_shared<std::map<std::size_t, std::vector<SubtaskPolicy>>>();
    auto config_cache =
        std::make_shared<std::map<std::pair<std::string, std::size_t>, EpisodeConfig>>();

    return [&v, &setup, trajectory_sink, composed_cache, policy_cache,
            config_cache](const std::string& task,
                          std::uint64_t ep_seed) -> EpisodeResult {
        std::size_t k = static_cast<std::size_t>(
            (ep_seed - setup.seed) % setup.trees.size());
        const VascTree& tree = setup.trees[k];
        ComposedTaskId id = composed_id_checked(task);

        if (v.hierarchical) {
            auto [pit, fresh_p] = policy_cache->try_emplace(k);
            if (fresh_p)
                for (const auto& [label, agent] : v.by_label)
                    pit->second.push_back(
                        {label, agent.get(), intermediate_target(tree, label)});
            auto [cit, fresh_c] = composed_cache->try_emplace({task, k});
            if (fresh_c)
                cit->second = make_composed_task(tree, id, true, setup.seed);
            ComposedRunResult run =
                run_composed(cit->second, pit->second, v.tsm, tree, setup.sim,
                             Rng::stream(ep_seed, "episode"), ep_seed);
            if (trajectory_sink) {
                std::string& log = *trajectory_sink;
                for (std::size_t i = 0; i < run.selected.size(); ++i) {
                    const ArcPosition& tip = run.tips[i];
                    log += task + "," + std::to_string(ep_seed) + "," +
                           std::to_string(i) + "," +
                           to_string(tree.branch(tip.branch).label) + "," +
                           f6(tip.s) + "," + to_string(run.selected[i]) + "," +
                           "0\n";
                }
            }
            return run.result;
        }

        auto it = v.by_task.find(task);
        if (it == v.by_task.end())
            fail(ErrorKind::Load, "variant " + v.name +
                                      " has no policy for task " + task);
        auto [eit, fresh_e] = config_cache->try_emplace({task, k});
        if (fresh_e)
            eit->second = make_composed_episode_config(tree, id, true, setup.seed);
        return run_policy_episode(*it->second, tree, setup.sim, eit->second,
                                  ep_seed);
    };
}

std::string joined(const std::vector<std::string>& parts) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += ",";
        out += parts[i];
    }
    return out;
}

// --- per-episode CSV parsing (report regeneration) -------------------------

std::vector<VariantResults> parse_episodes_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) ||
        line != "variant,task,seed,success,steps,procedure_time_s,"
                "initial_pathlength_mm,final_pathlength_mm")
        fail(ErrorKind::Load, "per-episode CSV has an unexpected header");

    std::vector<VariantResults> variants;
    auto variant_of = [&](const std::string& name) -> VariantResults& {
        for (VariantResults& v : variants)
            if (v.name == name) return v;
        variants.push_back({name, {}});
        return variants.back();
    };

    auto parse_double = [](const std::string& s, const char* what) {
        errno = 0;
        char* end = nullptr;
        double v = std::strtod(s.c_str(), &end);
        if (s.empty() || errno != 0 || end != s.c_str() + s.size())
            fail(ErrorKind::Load, std::string("per-episode CSV: bad ") + what +
                                      " value '" + s + "'");
        return v;
    };

    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::string field;
        std::istringstream ls(line);
        while (std::getline(ls, field, ',')) fields.push_back(field);
        if (!line.empty() && line.back() == ',') fields.push_back("");
        if (fields.size() != 8)
            fail(ErrorKind::Load, "per-episode CSV line " +
                                      std::to_string(lineno) +
                                      " does not have 8 fields");
        EpisodeResult e;
        e.task = fields[1];
        e.seed = static_cast<std::uint64_t>(
            parse_double(fields[2], "seed"));
        if (fields[3] != "0" && fields[3] != "1")
            fail(ErrorKind::Load, "per-episode CSV line " +
                                      std::to_string(lineno) +
                                      " has a non-boolean success flag");
        e.success = fields[3] == "1";
        e.steps = static_cast<int>(parse_double(fields[4], "steps"));
        if (!fields[5].empty()) e.procedure_time_s = parse_double(fields[5], "time");
        e.initial_pathlength_mm = parse_double(fields[6], "initial pathlength");
        e.final_pathlength_mm = parse_double(fields[7], "final pathlength");
        variant_of(fields[0]).episodes.push_back(std::move(e));
    }
    if (variants.empty())
        fail(ErrorKind::Load, "per-episode CSV contains no episodes");
    return variants;
}

std::vector<std::string> tasks_in_order(const std::vector<VariantResults>& vs) {
    std::vector<std::string> tasks;
    for (const VariantResults& v : vs)
        for (const EpisodeResult& e : v.episodes)
            if (std::find(tasks.begin(), tasks.end(), e.task) == tasks.end())
                tasks.push_back(e.task);
    return tasks;
}

} // namespace

// --- commands ---------------------------------------------------------------

void cmd_gen_vasc(const KeyValueConfig& cfg) {
    RunPaths p = make_paths(cfg);
    std::uint64_t seed = cfg.get_u64("seed", 0);
    long long n = cfg.get_int("anatomy.n_trees", 10);
    if (n < 0) fail(ErrorKind::Config, "anatomy.n_trees must be >= 0");

    AnatomyParams params;
    params.arch_type1_probability = cfg.get_double(
        "anatomy.arch_type1_probability", params.arch_type1_probability);
    params.validate();

    Rng draw = Rng::stream(seed, "anatomy");
    int type1 = 0, type2 = 0;
    std::vector<double> right, left;
    std::string csv = "tree,arch_type,right_tortuosity,left_tortuosity\n";
    for (int i = 0; i < n; ++i) {
        VascTree tree = generate_synthetic(
            params, draw.split(static_cast<std::uint64_t>(i)).next_u64());
        save_tree(tree, tree_file(p, i));
        (tree.arch_type == ArchType::TypeI ? type1 : type2) += 1;
        BranchId rica = tree.id_of(BranchLabel::RICA);
        BranchId lica = tree.id_of(BranchLabel::LICA);
        double rt = tortuosity(tree, {tree.id_of(BranchLabel::RCCA), 0.0},
                               {rica, tree.branch(rica).total_length()});
        double lt = tortuosity(tree, {tree.id_of(BranchLabel::LCCA), 0.0},
                               {lica, tree.branch(lica).total_length()});
        right.push_back(rt);
        left.push_back(lt);
        csv += std::to_string(i) + "," + to_string(tree.arch_type) + "," +
               f6(rt) + "," + f6(lt) + "\n";
    }

    std::string md = "# Synthetic anatomy batch\n\n";
    md += "- trees: " + std::to_string(n) + "\n";
    md += "- arch type I: " + std::to_string(type1) + "\n";
    md += "- arch type II: " + std::to_string(type2) + "\n";
    if (right.empty()) {
        md += "- right carotid tortuosity: -\n";
        md += "- left carotid tortuosity: -\n";
    } else {
        md += "- right carotid tortuosity: " + f6(mean_of(right)) + " +/- " +
              f6(population_sd(right)) + "\n";
        md += "- left carotid tortuosity: " + f6(mean_of(left)) + " +/- " +
              f6(population_sd(left)) + "\n";
    }
    write_text(p.reports + "/vasc-stats.md", md);
    write_text(p.reports + "/vasc-stats.csv", csv);

    KeyValueConfig man;
    man.set("n_trees", std::to_string(n));
    man.set("arch_type1", std::to_string(type1));
    man.set("arch_type2", std::to_string(type2));
    write_run_records(p, "gen-vasc", cfg, man);
}

void cmd_train(const KeyValueConfig& cfg) {
    RunPaths p = make_paths(cfg);
    std::uint64_t root = cfg.get_u64("seed", 0);
    std::string variant = cfg.get_string("train.variant", "hm-marl-1");
    bool resume = cfg.get_bool("train.resume", true);
    SacConfig sac = sac_from_config(cfg);

    KeyValueConfig man;
    man.set("variant", variant);
    std::vector<std::string> names;

    if (variant == "hm-marl-1" || variant == "hm-marl-10") {
        int n_trees = variant == "hm-marl-10"
                          ? static_cast<int>(cfg.get_int("train.n_trees", 10))
                          : 1;
        if (n_trees < 1) fail(ErrorKind::Config, "train.n_trees must be >= 1");
        std::vector<VascTree> trees;
        trees.reserve(static_cast<std::size_t>(n_trees));
        for (int i = 0; i < n_trees; ++i) trees.push_back(load_tree_checked(p, i));
        std::vector<const VascTree*> tree_ptrs;
        for (const VascTree& t : trees) tree_ptrs.push_back(&t);

        std::string dir = p.checkpoints + "/" + variant;
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) fail(ErrorKind::Io, "cannot create directory " + dir);
        save_tsm(default_tsm_config(), dir + "/tsm.cfg");

        for (SubtaskLabel label : kAllSubtasks) {
            std::string name = to_string(label);
            std::vector<EpisodeConfig> train_cfgs;
            for (const VascTree& t : trees)
                train_cfgs.push_back(
                    make_subtask_episode_config(t, label, false, root));
            EpisodeConfig eval_cfg =
                make_subtask_episode_config(trees[0], label, true, root);
            TrainedOne done = train_one(
                p, variant, name, tree_ptrs, train_cfgs, trees[0], eval_cfg, sac,
                name_seed(root, variant + ":" + name), resume, cfg.hash());
            names.push_back(name);
            man.set("steps." + name, std::to_string(done.steps_used));
            man.set("sr." + name, f6(done.final_sr));
        }
    } else if (variant == "sa-rl-1") {
        VascTree tree = load_tree_checked(p, 0);
        std::vector<std::string> tasks = split_list(cfg.get_string(
            "train.tasks", "A12R,A23R,A123R,A12L,A23L,A123L"));
        if (tasks.empty()) fail(ErrorKind::Config, "train.tasks is empty");
        for (const std::string& task : tasks) {
            ComposedTaskId id = composed_id_checked(task);
            // Matched total budget: the monolith gets the summed step budget
            // of the sub-tasks its route is split into.
            SacConfig task_sac = sac;
            task_sac.total_steps =
                sac.total_steps *
                static_cast<long>(composed_spec(id).chain.size());
            EpisodeConfig train_cfg =
                make_composed_episode_config(tree, id, false, root);
            EpisodeConfig eval_cfg =
                make_composed_episode_config(tree, id, true, root);
            TrainedOne done = train_one(
                p, variant, task, {&tree}, {train_cfg}, tree, eval_cfg,
                task_sac, name_seed(root, variant + ":" + task), resume,
                cfg.hash());
            names.push_back(task);
            man.set("steps." + task, std::to_string(done.steps_used));
            man.set("sr." + task, f6(done.final_sr));
        }
    } else {
        fail(ErrorKind::Config,
             "train.variant '" + variant +
                 "' is not hm-marl-1, sa-rl-1, or hm-marl-10");
    }

    man.set("checkpoints", joined(names));
    write_run_records(p, "train", cfg, man);
}

void cmd_eval(const KeyValueConfig& cfg) {
    RunPaths p = make_paths(cfg);
    EvalSetup setup = eval_setup_from(cfg, p);
    std::string name = cfg.get_string("eval.variant", "hm-marl-1");
    LoadedVariant variant = load_variant(p, name, setup.task_names);

    std::shared_ptr<std::string> trajectories;
    if (cfg.get_bool("eval.trajectories", false) && variant.hierarchical)
        trajectories = std::make_shared<std::string>(kTrajectoryHeader);

    EpisodeRunner runner = make_runner(variant, setup, trajectories);
    VariantResults results{name,
                           evaluate(runner, setup.task_names, setup.episodes,
                                    setup.seed)};
    ComparisonReport report = compare({results}, setup.task_names);

    write_text(p.reports + "/eval-" + name + ".md", comparison_markdown(report));
    write_text(p.reports + "/eval-" + name + "-metrics.csv", metrics_csv(report));
    write_text(p.reports + "/eval-" + name + "-episodes.csv",
               episodes_csv({results}));
    if (trajectories)
        write_text(p.reports + "/trajectories-" + name + ".csv", *trajectories);

    KeyValueConfig man;
    man.set("variant", name);
    man.set("tasks", joined(setup.task_names));
    man.set("episodes", std::to_string(setup.episodes));
    man.set("trees", std::to_string(setup.trees.size()));
    write_run_records(p, "eval", cfg, man);
}

void cmd_compare(const KeyValueConfig& cfg) {
    RunPaths p = make_paths(cfg);
    EvalSetup setup = eval_setup_from(cfg, p);
    std::vector<std::string> names =
        split_list(cfg.get_string("compare.variants", "hm-marl-1,sa-rl-1"));
    if (names.size() < 2)
        fail(ErrorKind::Config, "compare.variants needs at least two variants");
    double alpha = cfg.get_double("compare.alpha", 0.05);

    std::vector<LoadedVariant> loaded;
    loaded.reserve(names.size());
    for (const std::string& n : names)
        loaded.push_back(load_variant(p, n, setup.task_names));

    std::vector<VariantResults> results;
    for (const LoadedVariant& v : loaded) {
        EpisodeRunner runner = make_runner(v, setup, nullptr);
        results.push_back({v.name, evaluate(runner, setup.task_names,
                                            setup.episodes, setup.seed)});
    }
    ComparisonReport report = compare(results, setup.task_names, alpha);

    write_text(p.reports + "/comparison.md", comparison_markdown(report));
    write_text(p.reports + "/comparison-metrics.csv", metrics_csv(report));
    write_text(p.reports + "/comparison-episodes.csv", episodes_csv(results));

    KeyValueConfig man;
    man.set("variants", joined(names));
    man.set("tasks", joined(setup.task_names));
    man.set("episodes", std::to_string(setup.episodes));
    man.set("alpha", f6(alpha));
    write_run_records(p, "compare", cfg, man);
}

void cmd_report(const KeyValueConfig& cfg) {
    RunPaths p = make_paths(cfg);
    std::string path = cfg.get_string("report.episodes",
                                      p.reports + "/comparison-episodes.csv");
    double alpha = cfg.get_double("report.alpha", 0.05);

    std::vector<VariantResults> variants = parse_episodes_csv(read_text(path));
    std::vector<std::string> tasks = tasks_in_order(variants);
    ComparisonReport report = compare(variants, tasks, alpha);

    write_text(p.reports + "/comparison.md", comparison_markdown(report));
    write_text(p.reports + "/comparison-metrics.csv", metrics_csv(report));

    KeyValueConfig man;
    man.set("episodes_file", path);
    man.set("alpha", f6(alpha));
    man.set("variants", std::to_string(variants.size()));
    write_run_records(p, "report", cfg, man);
}

std::vector<std::string> known_config_keys() {
    return {
        "seed",
        "out",
        "anatomy.n_trees",
        "anatomy.arch_type1_probability",
        "train.variant",
        "train.steps",
        "train.hidden",
        "train.batch",
        "train.buffer",
        "train.lr",
        "train.discount",
        "train.tau",
        "train.target_entropy",
        "train.warmup",
        "train.update_every",
        "train.eval_interval",
        "train.eval_episodes",
        "train.stop_sr",
        "train.tasks",
        "train.n_trees",
        "train.resume",
        "eval.variant",
        "eval.tasks",
        "eval.episodes",
        "eval.preset",
        "eval.trees",
        "eval.trajectories",
        "compare.variants",
        "compare.alpha",
        "report.episodes",
        "report.alpha",
    };
}

void run_command(const std::string& command, const KeyValueConfig& cfg) {
    cfg.validate_keys(known_config_keys());

    // Parallelism cap; this build runs every command on one thread so that
    // determinism holds, but the variable is still validated.
    if (const char* env = std::getenv("VESSELNAV_THREADS")) {
        std::string v(env);
        try {
            std::size_t used = 0;
            int n = std::stoi(v, &used);
            if (used != v.size() || n < 1) throw std::invalid_argument(v);
        } catch (const std::exception&) {
            fail(ErrorKind::Config,
                 "VESSELNAV_THREADS must be a positive integer, got '" + v + "'");
        }
    }

    if (command == "gen-vasc") cmd_gen_vasc(cfg);
    else if (command == "train") cmd_train(cfg);
    else if (command == "eval") cmd_eval(cfg);
    else if (command == "compare") cmd_compare(cfg);
    else if (command == "report") cmd_report(cfg);
    else
        fail(ErrorKind::Parameter, "unknown command '" + command + "'");
}

} // namespace vn
