// Command-line front end. Talks to the library exclusively through the C
// API, mirroring what an external embedding would see.

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vesselnav.h"

namespace {

// Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 load error,
// 1 anything else.
int exit_code_for(vn_status status) {
    switch (status) {
        case VN_OK: return 0;
        case VN_ERR_CONFIG: return 2;
        case VN_ERR_IO: return 3;
        case VN_ERR_LOAD: return 4;
        default: return 1;
    }
}

struct CommonArgs {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config,
                    "Key-value settings file (key = value lines)");
    cmd->add_option("--out", args.out,
                    "Output directory (trees/, checkpoints/, reports/)");
    cmd->add_option("--seed", args.seed, "Root seed for all randomness");
    cmd->add_option("--set", args.sets,
                    "Extra key=value override; repeatable, applied last");
}

int run(const std::string& command, const CommonArgs& args,
        std::vector<std::string> overrides) {
    if (!args.out.empty()) overrides.push_back("out=" + args.out);
    if (args.seed) overrides.push_back("seed=" + std::to_string(*args.seed));
    for (const std::string& s : args.sets) overrides.push_back(s);

    std::vector<const char*> raw;
    raw.reserve(overrides.size());
    for (const std::string& s : overrides) raw.push_back(s.c_str());

    vn_status status =
        vn_run(command.c_str(), args.config.empty() ? nullptr : args.config.c_str(),
               raw.data(), static_cast<int>(raw.size()));
    if (status != VN_OK)
        std::fprintf(stderr, "error: %s\n", vn_last_error());
    return exit_code_for(status);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Desk-scale testbed for two-device endovascular navigation: "
        "synthetic vascular trees, per-segment SAC policies, rule-based "
        "policy orchestration, and paired evaluation reports."};
    app.require_subcommand(1);
    app.set_version_flag("--version", vn_version());

    CommonArgs gen_args;
    std::optional<long long> gen_trees;
    CLI::App* gen = app.add_subcommand(
        "gen-vasc", "Generate synthetic anatomies plus a stats report");
    add_common(gen, gen_args);
    gen->add_option("--trees", gen_trees, "Number of trees to generate");

    CommonArgs train_args;
    std::string train_variant, train_tasks;
    std::optional<long long> train_steps;
    CLI::App* train = app.add_subcommand(
        "train", "Train a controller variant; resumable at snapshot "
                 "boundaries");
    add_common(train, train_args);
    train->add_option("--variant", train_variant,
                      "hm-marl-1, sa-rl-1, or hm-marl-10");
    train->add_option("--tasks", train_tasks,
                      "Composed tasks for sa-rl-1 (comma list)");
    train->add_option("--steps", train_steps,
                      "Exploration step budget per sub-task");

    CommonArgs eval_args;
    std::string eval_variant, eval_tasks, eval_trees;
    std::optional<long long> eval_episodes;
    CLI::App* eval = app.add_subcommand(
        "eval", "Evaluate one trained variant over composed tasks");
    add_common(eval, eval_args);
    eval->add_option("--variant", eval_variant, "Variant to evaluate");
    eval->add_option("--tasks", eval_tasks, "Composed tasks (comma list)");
    eval->add_option("--episodes", eval_episodes, "Episodes per task");
    eval->add_option("--trees", eval_trees,
                     "Tree indices to evaluate on, e.g. 0 or 0-9");

    CommonArgs cmp_args;
    std::string cmp_variants, cmp_tasks, cmp_trees;
    std::optional<long long> cmp_episodes;
    CLI::App* cmp = app.add_subcommand(
        "compare", "Evaluate several variants on shared seeds and run "
                   "paired t-tests");
    add_common(cmp, cmp_args);
    cmp->add_option("--variants", cmp_variants, "Variants (comma list)");
    cmp->add_option("--tasks", cmp_tasks, "Composed tasks (comma list)");
    cmp->add_option("--episodes", cmp_episodes, "Episodes per task");
    cmp->add_option("--trees", cmp_trees, "Tree indices, e.g. 0 or 0-9");

    CommonArgs rep_args;
    std::string rep_episodes;
    CLI::App* rep = app.add_subcommand(
        "report", "Rebuild comparison tables from a stored per-episode CSV");
    add_common(rep, rep_args);
    rep->add_option("--episodes-csv", rep_episodes,
                    "Per-episode CSV to summarize");

    CLI11_PARSE(app, argc, argv);

    if (gen->parsed()) {
        std::vector<std::string> o;
        if (gen_trees) o.push_back("anatomy.n_trees=" + std::to_string(*gen_trees));
        return run("gen-vasc", gen_args, std::move(o));
    }
    if (train->parsed()) {
        std::vector<std::string> o;
        if (!train_variant.empty()) o.push_back("train.variant=" + train_variant);
        if (!train_tasks.empty()) o.push_back("train.tasks=" + train_tasks);
        if (train_steps) o.push_back("train.steps=" + std::to_string(*train_steps));
        return run("train", train_args, std::move(o));
    }
    if (eval->parsed()) {
        std::vector<std::string> o;
        if (!eval_variant.empty()) o.push_back("eval.variant=" + eval_variant);
        if (!eval_tasks.empty()) o.push_back("eval.tasks=" + eval_tasks);
        if (eval_episodes)
            o.push_back("eval.episodes=" + std::to_string(*eval_episodes));
        if (!eval_trees.empty()) o.push_back("eval.trees=" + eval_trees);
        return run("eval", eval_args, std::move(o));
    }
    if (cmp->parsed()) {
        std::vector<std::string> o;
        if (!cmp_variants.empty()) o.push_back("compare.variants=" + cmp_variants);
        if (!cmp_tasks.empty()) o.push_back("eval.tasks=" + cmp_tasks);
        if (cmp_episodes)
            o.push_back("eval.episodes=" + std::to_string(*cmp_episodes));
        if (!cmp_trees.empty()) o.push_back("eval.trees=" + cmp_trees);
        return run("compare", cmp_args, std::move(o));
    }
    if (rep->parsed()) {
        std::vector<std::string> o;
        if (!rep_episodes.empty()) o.push_back("report.episodes=" + rep_episodes);
        return run("report", rep_args, std::move(o));
    }
    return 0;
}
