#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "vesselnav/anatomy.hpp"
#include "vesselnav/episode.hpp"

using namespace vn;

namespace {

VascTree make_line_tree(double radius = 3.0) {
    VascTree t;
    Branch b;
    b.id = 0;
    b.label = BranchLabel::FEMORAL;
    b.parent = kNoBranch;
    for (int i = 0; i <= 200; ++i)
        b.points.push_back({{static_cast<double>(i), 0.0, 0.0}, radius});
    t.branches[0] = b;
    t.root = 0;
    t.rebuild_geometry();
    return t;
}

EpisodeConfig line_config(double start_s, double target_s, int timeout = 200) {
    EpisodeConfig cfg;
    cfg.timeout_steps = timeout;
    cfg.start_set = {{0, start_s}};
    cfg.target_set = {{0, target_s}};
    cfg.task_label = "A1";
    return cfg;
}

} // namespace

TEST_CASE("per-step reward matches the dense progress formula exactly") {
    CHECK(std::fabs(reward(100.0, 100.0, false) - (-0.00015)) < 1e-12);
    CHECK(std::fabs(reward(100.0, 95.0, false) - 0.00485) < 1e-12);
    CHECK(std::fabs(reward(10.0, 8.0, true) - 1.00185) < 1e-12);
    RewardTerms t;
    CHECK(t.base_penalty == -0.00015);
    CHECK(t.progress_coeff == -0.001);
    CHECK(t.success_bonus == 1.0);
    CHECK_THROWS_AS(reward(-1.0, 5.0, false), Error);
}

TEST_CASE("success is the closed vessel cross-section at the target") {
    VascTree t = make_line_tree(3.0);
    CHECK(check_success(t, {0, 50.0}, {0, 50.0}));
    CHECK(check_success(t, {0, 53.0}, {0, 50.0}));   // distance == radius
    CHECK_FALSE(check_success(t, {0, 53.001}, {0, 50.0}));
    CHECK(check_success(t, {0, 47.5}, {0, 50.0}));

    // Monotone in the threshold: widening the vessel keeps successes.
    VascTree wide = make_line_tree(3.5);
    CHECK(check_success(wide, {0, 53.0}, {0, 50.0}));
    CHECK(check_success(wide, {0, 53.001}, {0, 50.0}));
}

TEST_CASE("reset draws uniformly and deterministically from the sets") {
    VascTree t = make_line_tree();
    EpisodeConfig cfg;
    cfg.start_set = {{0, 5.0}};
    for (int i = 0; i < 10; ++i) cfg.target_set.push_back({0, 100.0 + i});
    cfg.task_label = "A1";

    std::map<double, int> counts;
    Rng rng(404);
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        auto [s, tgt] = draw_start_target(cfg, rng);
        CHECK(s.s == 5.0);
        ++counts[tgt.s];
    }
    CHECK(counts.size() == 10);
    for (const auto& [s, c] : counts) {
        double freq = static_cast<double>(c) / n;
        CHECK(freq > 0.085);
        CHECK(freq < 0.115);
    }

    // Same stream position, same sequence.
    Rng r1(11), r2(11);
    for (int i = 0; i < 100; ++i) {
        auto a = draw_start_target(cfg, r1);
        auto b = draw_start_target(cfg, r2);
        CHECK(a.second.s == b.second.s);
    }

    // Singleton sets force the pair.
    EpisodeConfig forced = line_config(5.0, 100.0);
    Rng r3(1);
    auto p = draw_start_target(forced, r3);
    CHECK(p.first.s == 5.0);
    CHECK(p.second.s == 100.0);

    EpisodeConfig empty;
    empty.task_label = "A1";
    Rng r4(1);
    CHECK_THROWS_AS(draw_start_target(empty, r4), Error);
}

TEST_CASE("idle episodes time out with no success bonus") {
    VascTree t = make_line_tree();
    Episode ep(t, SimConfig{}, line_config(5.0, 150.0, 25), Rng(2));
    ep.reset();
    StepResult last;
    int steps = 0;
    while (!ep.done()) {
        last = ep.run_step(ActionCommand(0, 0, 0, 0));
        ++steps;
        CHECK(steps <= 25);
    }
    CHECK(steps == 25);
    CHECK(last.timed_out);
    CHECK_FALSE(last.reached);
    CHECK(last.reward == doctest::Approx(-0.00015).epsilon(1e-12));
    CHECK(ep.timed_out());
    CHECK_THROWS_AS(ep.run_step(ActionCommand()), Error);
    try {
        ep.run_step(ActionCommand());
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Lifecycle);
    }
}

TEST_CASE("driving into the target cross-section succeeds with the bonus") {
    VascTree t = make_line_tree(3.0);
    Episode ep(t, SimConfig{}, line_config(5.0, 9.0), Rng(3));
    ep.reset();
    CHECK(ep.initial_pathlength() == doctest::Approx(4.0));
    StepResult r = ep.run_step(ActionCommand(0, 40.0, 0, 0));
    // Tip moves 5.33 mm, overshooting the target by 1.33 mm (< 3 mm radius).
    CHECK(r.reached);
    CHECK_FALSE(r.timed_out);
    CHECK(r.reward > 1.0);
    CHECK(ep.done());
    CHECK(ep.reached());
    CHECK(ep.steps() == 1);
    CHECK(ep.simulated_seconds() == doctest::Approx(2.0 / 15.0));
}

TEST_CASE("stepping before reset is a lifecycle error") {
    VascTree t = make_line_tree();
    Episode ep(t, SimConfig{}, line_config(5.0, 100.0), Rng(4));
    CHECK_THROWS_AS(ep.run_step(ActionCommand()), Error);
}

TEST_CASE("episode return telescopes to the pathlength decomposition") {
    AnatomyParams params;
    VascTree tree = generate_synthetic(params, 92);
    EpisodeConfig cfg;
    cfg.timeout_steps = 120;
    cfg.task_label = "A1";
    cfg.start_set = {{tree.id_of(BranchLabel::FEMORAL), 5.0}};
    BranchId arch = tree.id_of(BranchLabel::ARCH);
    cfg.target_set = {{arch, 10.0}, {arch, 30.0}};

    for (std::uint64_t seed : {1u, 2u, 3u}) {
        Episode ep(tree, SimConfig{}, cfg, Rng(seed));
        ep.reset();
        Rng actions(seed + 100);
        double total = 0.0;
        while (!ep.done()) {
            ActionCommand a(actions.uniform(-180, 180), actions.uniform(-40, 40),
                            actions.uniform(-180, 180), actions.uniform(-40, 40));
            total += ep.run_step(a).reward;
        }
        double expect = -0.00015 * ep.steps() -
                        0.001 * (ep.current_pathlength() - ep.initial_pathlength()) +
                        (ep.reached() ? 1.0 : 0.0);
        CHECK(total == doctest::Approx(expect).epsilon(1e-9));
        CHECK(ep.steps() <= cfg.timeout_steps);
    }
}

TEST_CASE("episodes are reproducible from the episode stream") {
    AnatomyParams params;
    VascTree tree = generate_synthetic(params, 15);
    EpisodeConfig cfg;
    cfg.timeout_steps = 60;
    cfg.task_label = "A1";
    cfg.start_set = {{tree.id_of(BranchLabel::FEMORAL), 5.0}};
    cfg.target_set = {{tree.id_of(BranchLabel::ARCH), 20.0}};

    auto run = [&](std::uint64_t seed) {
        Episode ep(tree, SimConfig{}, cfg, Rng(seed));
        ep.reset();
        Rng actions(77);
        std::ostringstream log;
        while (!ep.done()) {
            ActionCommand a(actions.uniform(-180, 180), actions.uniform(-40, 40), 0, 0);
            StepResult r = ep.run_step(a);
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.9f;", r.reward);
            log << buf;
        }
        return log.str();
    };
    CHECK(run(5) == run(5));
}

TEST_CASE("trajectory and summary logs have fixed headers and formats") {
    std::string tpath = "/tmp/vesselnav_test_traj.csv";
    std::string spath = "/tmp/vesselnav_test_summary.csv";
    {
        TrajectoryWriter tw(tpath);
        tw.append(0, 0, {1.5, 2.0, 3.0}, {1.5, 3.0}, ActionCommand(10, 20, -30, 5),
                  -0.00015, false);
        tw.append(0, 1, {2.5, 2.0, 3.0}, {2.5, 3.0}, ActionCommand(0, 40, 0, 0), 1.00185,
                  true);
        EpisodeSummaryWriter sw(spath);
        sw.append("A1", 42, true, 57, 7.6, 420.0, 1.25);
    }
    std::ifstream tf(tpath);
    std::string line;
    std::getline(tf, line);
    CHECK(line ==
          "episode,step,tip_x,tip_y,tip_z,proj_x,proj_y,wire_rot_speed,"
          "wire_trans_speed,cath_rot_speed,cath_trans_speed,reward,done");
    std::getline(tf, line);
    CHECK(line ==
          "0,0,1.500000,2.000000,3.000000,1.500000,3.000000,10.000000,20.000000,"
          "-30.000000,5.000000,-0.000150,0");
    std::getline(tf, line);
    CHECK(line.find(",1") != std::string::npos);

    std::ifstream sf(spath);
    std::getline(sf, line);
    CHECK(line == "task,seed,success,steps,sim_seconds,initial_pathlength,final_pathlength");
    std::getline(sf, line);
    CHECK(line == "A1,42,1,57,7.600000,420.000000,1.250000");
    std::remove(tpath.c_str());
    std::remove(spath.c_str());
}

TEST_CASE("config validation rejects bad episode settings") {
    VascTree t = make_line_tree();
    EpisodeConfig cfg = line_config(5.0, 100.0);
    cfg.timeout_steps = 0;
    CHECK_THROWS_AS(Episode(t, SimConfig{}, cfg, Rng(1)), Error);

    EpisodeConfig cfg2 = line_config(5.0, 100.0);
    cfg2.target_set.clear();
    CHECK_THROWS_AS(Episode(t, SimConfig{}, cfg2, Rng(1)), Error);

    EpisodeConfig cfg3 = line_config(5.0, 100.0);
    cfg3.start_set = {{7, 5.0}};  // no such branch
    try {
        Episode ep(t, SimConfig{}, cfg3, Rng(1));
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Geometry);
    }
}
