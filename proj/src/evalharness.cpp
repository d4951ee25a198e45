#include "vesselnav/evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "vesselnav/stats.hpp"
#include "vesselnav/tasks.hpp"

namespace vn {

namespace {

std::string f6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string cell(const std::optional<MeanSd>& m) {
    if (!m) return "-";
    return f6(m->mean) + " +/- " + f6(m->sd);
}

} // namespace

TaskMetrics aggregate_task(const std::string& task,
                           std::vector<EpisodeResult> episodes) {
    if (episodes.empty())
        fail(ErrorKind::Parameter, "no episodes to aggregate for task " + task);
    for (const EpisodeResult& e : episodes)
        if (e.task != task)
            fail(ErrorKind::Parameter, "episode labeled " + e.task +
                                           " in the aggregate of " + task);
    std::sort(episodes.begin(), episodes.end(),
              [](const EpisodeResult& a, const EpisodeResult& b) {
                  return a.seed < b.seed;
              });

    TaskMetrics m;
    m.task = task;
    m.episodes = static_cast<int>(episodes.size());
    std::vector<double> indicators, times, ratios;
    for (const EpisodeResult& e : episodes) {
        indicators.push_back(e.success ? 100.0 : 0.0);
        if (e.success) {
            ++m.successes;
            if (!e.procedure_time_s)
                fail(ErrorKind::Parameter,
                     "successful episode without a procedure time");
            times.push_back(*e.procedure_time_s);
        } else {
            if (e.procedure_time_s)
                fail(ErrorKind::Parameter,
                     "failed episode carries a procedure time");
            if (!(e.initial_pathlength_mm > 0.0))
                fail(ErrorKind::Parameter,
                     "failed episode needs a positive initial pathlength");
            ratios.push_back(100.0 * e.final_pathlength_mm /
                             e.initial_pathlength_mm);
        }
    }
    m.sr = {mean_of(indicators), population_sd(indicators)};
    if (!times.empty()) m.pt = MeanSd{mean_of(times), population_sd(times)};
    if (!ratios.empty()) m.pr = MeanSd{mean_of(ratios), population_sd(ratios)};
    return m;
}

std::vector<std::uint64_t> evaluation_seeds(std::uint64_t seed_base,
                                            int n_episodes) {
    if (n_episodes < 1)
        fail(ErrorKind::Parameter, "need at least one evaluation episode");
    std::vector<std::uint64_t> seeds;
    seeds.reserve(static_cast<std::size_t>(n_episodes));
    for (int i = 0; i < n_episodes; ++i)
        seeds.push_back(seed_base + static_cast<std::uint64_t>(i));
    return seeds;
}

std::vector<EpisodeResult> evaluate(const EpisodeRunner& runner,
                                    const std::vector<std::string>& tasks,
                                    int n_episodes, std::uint64_t seed_base) {
    std::vector<std::uint64_t> seeds = evaluation_seeds(seed_base, n_episodes);
    std::vector<EpisodeResult> out;
    out.reserve(tasks.size() * seeds.size());
    for (const std::string& task : tasks) {
        for (std::uint64_t seed : seeds) {
            EpisodeResult r = runner(task, seed);
            if (r.task != task || r.seed != seed)
                fail(ErrorKind::Internal,
                     "episode runner mislabeled its result for task " + task);
            out.push_back(std::move(r));
        }
    }
    return out;
}

EpisodeResult run_policy_episode(const SacAgent& agent, const VascTree& tree,
                                 const SimConfig& sim,
                                 const EpisodeConfig& config,
                                 std::uint64_t seed) {
    Episode env(tree, sim, config, Rng::stream(seed, "episode"));
    env.reset();
    Rng unused(0);  // deterministic mode draws nothing
    while (!env.done()) {
        Observation obs = env.current_observation();
        std::array<double, Observation::kDim> flat = obs.to_vector();
        std::vector<double> a = agent.act(
            std::vector<double>(flat.begin(), flat.end()), false, unused);
        env.run_step(ActionCommand::from_normalized({a[0], a[1], a[2], a[3]}));
    }
    EpisodeResult r;
    r.task = config.task_label;
    r.seed = seed;
    r.success = env.reached();
    if (env.reached()) r.procedure_time_s = env.simulated_seconds();
    r.initial_pathlength_mm = env.initial_pathlength();
    r.final_pathlength_mm = env.current_pathlength();
    r.steps = env.steps();
    return r;
}

ComparisonReport compare(const std::vector<VariantResults>& variants,
                         const std::vector<std::string>& tasks, double alpha) {
    if (variants.empty())
        fail(ErrorKind::Parameter, "no variants to compare");
    if (tasks.empty())
        fail(ErrorKind::Parameter, "no tasks to compare on");
    if (!(alpha > 0.0) || !(alpha < 1.0))
        fail(ErrorKind::Parameter, "significance level must lie in (0, 1)");

    // (variant, task) -> seed -> success indicator, with duplicate detection.
    std::vector<std::map<std::string, std::map<std::uint64_t, double>>> table(
        variants.size());
    std::vector<std::map<std::string, std::vector<EpisodeResult>>> grouped(
        variants.size());
    for (std::size_t v = 0; v < variants.size(); ++v) {
        for (const EpisodeResult& e : variants[v].episodes) {
            auto [it, inserted] =
                table[v][e.task].emplace(e.seed, e.success ? 1.0 : 0.0);
            (void)it;
            if (!inserted)
                fail(ErrorKind::Parameter,
                     "pairing error: duplicate seed in variant " +
                         variants[v].name + ", task " + e.task);
            grouped[v][e.task].push_back(e);
        }
    }

    ComparisonReport report;
    report.tasks = tasks;
    report.alpha = alpha;
    for (const VariantResults& v : variants) report.variants.push_back(v.name);
    report.metrics.resize(variants.size());

    for (const std::string& task : tasks) {
        // Shared seed set, enforced across variants.
        for (std::size_t v = 0; v < variants.size(); ++v) {
            auto it = table[v].find(task);
            if (it == table[v].end())
                fail(ErrorKind::Parameter,
                     "pairing error: variant " + variants[v].name +
                         " has no episodes for task " + task);
            if (v > 0) {
                const auto& ref = table[0].at(task);
                const auto& cur = it->second;
                bool same = ref.size() == cur.size() &&
                            std::equal(ref.begin(), ref.end(), cur.begin(),
                                       [](const auto& x, const auto& y) {
                                           return x.first == y.first;
                                       });
                if (!same)
                    fail(ErrorKind::Parameter,
                         "pairing error: seed sets differ between " +
                             variants[0].name + " and " + variants[v].name +
                             " for task " + task);
            }
        }
        for (std::size_t v = 0; v < variants.size(); ++v)
            report.metrics[v].push_back(aggregate_task(task, grouped[v].at(task)));

        for (std::size_t i = 0; i < variants.size(); ++i) {
            for (std::size_t j = i + 1; j < variants.size(); ++j) {
                std::vector<double> a, b;
                for (const auto& [seed, ind] : table[i].at(task)) {
                    a.push_back(ind);
                    b.push_back(table[j].at(task).at(seed));
                }
                PairwiseTest pt;
                pt.task = task;
                pt.variant_a = variants[i].name;
                pt.variant_b = variants[j].name;
                try {
                    TTestResult r = paired_ttest(a, b);
                    pt.t = r.t;
                    pt.p = r.p;
                } catch (const Error&) {
                    // Constant nonzero difference: one variant beats the other
                    // on every shared episode.
                    pt.degenerate = true;
                    pt.t = mean_of(a) > mean_of(b)
                               ? std::numeric_limits<double>::infinity()
                               : -std::numeric_limits<double>::infinity();
                    pt.p = 0.0;
                }
                pt.significant = pt.p < alpha;
                report.tests.push_back(pt);
            }
        }
    }
    return report;
}

std::string task_display(const std::string& task) {
    try {
        return display_label(composed_from_string(task));
    } catch (const Error&) {
        return task;
    }
}

std::string comparison_markdown(const ComparisonReport& report) {
    std::string out = "# Controller comparison\n\n";
    out += "| Task | Variant | Episodes | SR (%) | PT (s) | PR (%) |\n";
    out += "| --- | --- | --- | --- | --- | --- |\n";
    for (std::size_t t = 0; t < report.tasks.size(); ++t) {
        for (std::size_t v = 0; v < report.variants.size(); ++v) {
            const TaskMetrics& m = report.metrics[v][t];
            out += "| " + task_display(report.tasks[t]) + " | " +
                   report.variants[v] + " | " + std::to_string(m.episodes) +
                   " | " + f6(m.sr.mean) + " +/- " + f6(m.sr.sd) + " | " +
                   cell(m.pt) + " | " + cell(m.pr) + " |\n";
        }
    }
    if (!report.tests.empty()) {
        out += "\n## Paired t-tests on success indicators (alpha = " +
               f6(report.alpha) + ")\n\n";
        out += "| Task | Variant A | Variant B | t | p | Significant |\n";
        out += "| --- | --- | --- | --- | --- | --- |\n";
        for (const PairwiseTest& pt : report.tests) {
            out += "| " + task_display(pt.task) + " | " + pt.variant_a + " | " +
                   pt.variant_b + " | " + f6(pt.t) + " | " + f6(pt.p) + " | " +
                   (pt.significant ? "yes" : "no") + " |\n";
        }
    }
    return out;
}

std::string metrics_csv(const ComparisonReport& report) {
    std::string out =
        "task,variant,episodes,successes,sr_mean,sr_sd,pt_mean,pt_sd,pr_mean,"
        "pr_sd\n";
    for (std::size_t t = 0; t < report.tasks.size(); ++t) {
        for (std::size_t v = 0; v < report.variants.size(); ++v) {
            const TaskMetrics& m = report.metrics[v][t];
            out += report.tasks[t] + "," + report.variants[v] + "," +
                   std::to_string(m.episodes) + "," +
                   std::to_string(m.successes) + "," + f6(m.sr.mean) + "," +
                   f6(m.sr.sd) + ",";
            out += (m.pt ? f6(m.pt->mean) : "") + std::string(",") +
                   (m.pt ? f6(m.pt->sd) : "") + ",";
            out += (m.pr ? f6(m.pr->mean) : "") + std::string(",") +
                   (m.pr ? f6(m.pr->sd) : "");
            out += "\n";
        }
    }
    return out;
}

std::string episodes_csv(const std::vector<VariantResults>& variants) {
    std::string out =
        "variant,task,seed,success,steps,procedure_time_s,"
        "initial_pathlength_mm,final_pathlength_mm\n";
    for (const VariantResults& v : variants) {
        for (const EpisodeResult& e : v.episodes) {
            out += v.name + "," + e.task + "," + std::to_string(e.seed) + "," +
                   (e.success ? "1" : "0") + "," + std::to_string(e.steps) +
                   "," + (e.procedure_time_s ? f6(*e.procedure_time_s) : "") +
                   "," + f6(e.initial_pathlength_mm) + "," +
                   f6(e.final_pathlength_mm) + "\n";
        }
    }
    return out;
}

} // namespace vn
