#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "vesselnav/error.hpp"
#include "vesselnav/sac.hpp"

using namespace vn;

namespace {

/// Single straight vessel along +z: no junctions, no stalls, dense reward
/// points straight at the target.
VascTree make_corridor_tree(double length = 120.0, double radius = 4.0) {
    VascTree t;
    Branch trunk;
    trunk.id = 0;
    trunk.label = BranchLabel::FEMORAL;
    trunk.parent = kNoBranch;
    for (int i = 0; i <= static_cast<int>(length); ++i)
        trunk.points.push_back({{0.0, 0.0, static_cast<double>(i)}, radius});
    t.branches[0] = trunk;
    t.root = 0;
    t.rebuild_geometry();
    return t;
}

EpisodeConfig corridor_episode(int timeout, std::vector<double> target_arcs) {
    EpisodeConfig cfg;
    cfg.task_label = "corridor";
    cfg.timeout_steps = timeout;
    cfg.start_set = {{0, 5.0}};
    for (double s : target_arcs) cfg.target_set.push_back({0, s});
    return cfg;
}

Transition make_transition(Rng& rng, int obs_dim, int act_dim, double reward,
                           bool done) {
    Transition t;
    for (int i = 0; i < obs_dim; ++i) t.observation.push_back(rng.uniform(-1, 1));
    for (int i = 0; i < act_dim; ++i) t.action.push_back(rng.uniform(-0.9, 0.9));
    for (int i = 0; i < obs_dim; ++i) t.next_observation.push_back(rng.uniform(-1, 1));
    t.reward = reward;
    t.done = done;
    return t;
}

SacConfig small_config() {
    SacConfig cfg;
    cfg.hidden = {16, 16};
    cfg.batch_size = 32;
    cfg.buffer_capacity = 10'000;
    cfg.warmup_steps = 0;
    cfg.target_entropy = -2.0;
    return cfg;
}

} // namespace

TEST_CASE("replay buffer evicts oldest entries first") {
    ReplayBuffer buf(4);
    CHECK(buf.capacity() == 4);
    Rng rng(1);
    for (int i = 0; i < 10; ++i) {
        buf.push(make_transition(rng, 3, 2, static_cast<double>(i), false));
        CHECK(buf.size() == static_cast<std::size_t>(std::min(i + 1, 4)));
    }
    CHECK(buf.total_inserted() == 10);
    for (int i = 0; i < 4; ++i) CHECK(buf.at(i).reward == doctest::Approx(6.0 + i));
    CHECK_THROWS_AS(buf.at(4), Error);
    CHECK_THROWS_AS(ReplayBuffer(0), Error);

    ReplayBuffer partial(8);
    for (int i = 0; i < 3; ++i)
        partial.push(make_transition(rng, 3, 2, static_cast<double>(i), false));
    CHECK(partial.size() == 3);
    for (int i = 0; i < 3; ++i) CHECK(partial.at(i).reward == doctest::Approx(i));
}

TEST_CASE("training configuration rejects out-of-range values") {
    SacConfig good = small_config();
    CHECK_NOTHROW(good.validate());

    auto expect_config_error = [](SacConfig cfg) {
        try {
            cfg.validate();
            CHECK(false);
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Config);
        }
    };
    SacConfig c = good;
    c.discount = 1.0;
    expect_config_error(c);
    c = good;
    c.discount = 0.0;
    expect_config_error(c);
    c = good;
    c.tau = 0.0;
    expect_config_error(c);
    c = good;
    c.tau = 1.5;
    expect_config_error(c);
    c = good;
    c.batch_size = 0;
    expect_config_error(c);
    c = good;
    c.buffer_capacity = 8;  // smaller than batch
    expect_config_error(c);
    c = good;
    c.hidden = {};
    expect_config_error(c);
    c = good;
    c.hidden = {16, 0};
    expect_config_error(c);
    c = good;
    c.update_every = 0;
    expect_config_error(c);
    c = good;
    c.eval_episodes = 0;
    expect_config_error(c);
}

TEST_CASE("deterministic action is repeatable and maps to physical speeds") {
    SacConfig cfg = small_config();
    Rng init(41);
    SacAgent agent(6, 4, cfg, init);

    std::vector<double> obs = {0.1, -0.3, 0.5, 0.0, 0.9, -0.7};
    Rng unused(0);
    std::vector<double> a1 = agent.act(obs, false, unused);
    std::vector<double> a2 = agent.act(obs, false, unused);
    REQUIRE(a1.size() == 4);
    CHECK(a1 == a2);
    for (double a : a1) CHECK(std::fabs(a) < 1.0);

    // Same generator state, same stochastic draw; advancing the state changes it.
    Rng s1(77), s2(77);
    std::vector<double> s_a = agent.act(obs, true, s1);
    std::vector<double> s_b = agent.act(obs, true, s2);
    CHECK(s_a == s_b);
    std::vector<double> s_c = agent.act(obs, true, s1);
    CHECK(s_a != s_c);

    // The normalized-to-physical mapping: +-1 saturates the device limits and
    // 0 is zero speed.
    ActionCommand hi = ActionCommand::from_normalized({1, 1, 1, 1});
    CHECK(hi.wire_rot_speed == 180.0);
    CHECK(hi.wire_trans_speed == 40.0);
    CHECK(hi.cath_trans_speed == 40.0);
    ActionCommand mid = ActionCommand::from_normalized({0, 0, 0, 0});
    CHECK(mid.wire_rot_speed == 0.0);
    CHECK(mid.wire_trans_speed == 0.0);
    ActionCommand lo = ActionCommand::from_normalized({-1, -1, -1, -1});
    CHECK(lo.wire_trans_speed == -40.0);
}

TEST_CASE("soft target update endpoints and geometric decay") {
    SacConfig cfg = small_config();
    Rng init(5);
    SacAgent agent(4, 2, cfg, init);
    CHECK(agent.target_gap() == 0.0);  // targets start as copies

    // Open a gap by shifting the online critics.
    for (auto& layer : agent.critic1().layers)
        for (double& v : layer.W.value.v) v += 0.5;
    for (auto& layer : agent.critic2().layers)
        for (double& v : layer.W.value.v) v += 0.25;
    double gap0 = agent.target_gap();
    CHECK(gap0 > 0.4);

    SUBCASE("tau = 0 leaves targets untouched") {
        agent.soft_update_targets(0.0);
        CHECK(agent.target_gap() == gap0);
    }
    SUBCASE("tau = 1 copies the online critics exactly") {
        agent.soft_update_targets(1.0);
        CHECK(agent.target_gap() == 0.0);
    }
    SUBCASE("frozen online nets give exact geometric decay") {
        double tau = 0.25;
        for (int k = 1; k <= 10; ++k) {
            agent.soft_update_targets(tau);
            double expect = std::pow(1.0 - tau, k) * gap0;
            CHECK(agent.target_gap() == doctest::Approx(expect).epsilon(1e-10));
        }
    }
    SUBCASE("tau outside [0,1] is rejected") {
        CHECK_THROWS_AS(agent.soft_update_targets(1.5), Error);
        CHECK_THROWS_AS(agent.soft_update_targets(-0.1), Error);
    }
}

TEST_CASE("update defers until a full batch is available") {
    SacConfig cfg = small_config();
    Rng init(9);
    SacAgent agent(4, 2, cfg, init);
    ReplayBuffer buf(cfg.buffer_capacity);
    Rng rng(10);
    for (int i = 0; i < cfg.batch_size - 1; ++i)
        buf.push(make_transition(rng, 4, 2, 0.1, false));

    std::vector<double> w_before = agent.critic1().layers[0].W.value.v;
    Rng update_rng(11);
    LossReport r = agent.update(buf, cfg, update_rng);
    CHECK(!r.updated);
    CHECK(agent.critic1().layers[0].W.value.v == w_before);

    buf.push(make_transition(rng, 4, 2, 0.1, false));
    LossReport r2 = agent.update(buf, cfg, update_rng);
    CHECK(r2.updated);
    CHECK(agent.critic1().layers[0].W.value.v != w_before);
}

TEST_CASE("critic loss falls toward fixed regression targets") {
    SacConfig cfg = small_config();
    cfg.lr = 1e-3;
    Rng init(13);
    SacAgent agent(4, 2, cfg, init);

    // Terminal transitions make the Bellman target exactly the reward, which
    // never moves, so this is regression toward constants.
    Rng rng(14);
    std::vector<Transition> storage;
    for (int i = 0; i < cfg.batch_size; ++i) {
        double r = 0.5 * rng.uniform(-1, 1);
        storage.push_back(make_transition(rng, 4, 2, r, true));
    }
    std::vector<const Transition*> batch;
    for (const Transition& t : storage) batch.push_back(&t);

    Rng noise(15);
    std::vector<double> losses;
    for (int i = 0; i < 500; ++i) {
        LossReport rep = agent.update_on_batch(batch, cfg, noise);
        CHECK(rep.updated);
        CHECK(rep.alpha > 0.0);
        losses.push_back(rep.critic1 + rep.critic2);
    }
    int decreasing = 0;
    for (int i = 1; i < 200; ++i)
        if (losses[i] < losses[i - 1]) ++decreasing;
    CHECK(decreasing >= 180);  // >= 90% of the first 200 consecutive pairs
    CHECK(losses.back() < 0.05 * losses.front());
}

TEST_CASE("batch sampling and updates are reproducible") {
    SacConfig cfg = small_config();
    auto run = [&cfg]() {
        Rng init(21);
        SacAgent agent(4, 2, cfg, init);
        ReplayBuffer buf(cfg.buffer_capacity);
        Rng rng(22);
        for (int i = 0; i < 200; ++i)
            buf.push(make_transition(rng, 4, 2, rng.uniform(-1, 1), i % 7 == 0));
        Rng update_rng(23);
        std::vector<double> trace;
        for (int i = 0; i < 20; ++i) {
            LossReport r = agent.update(buf, cfg, update_rng);
            trace.push_back(r.critic1);
            trace.push_back(r.actor);
            trace.push_back(r.alpha);
        }
        return trace;
    };
    CHECK(run() == run());
}

TEST_CASE("checkpoints restore the agent and its optimizer state") {
    SacConfig cfg = small_config();
    Rng init(31);
    SacAgent a(4, 2, cfg, init);

    Rng rng(32);
    std::vector<Transition> storage;
    for (int i = 0; i < cfg.batch_size; ++i)
        storage.push_back(make_transition(rng, 4, 2, rng.uniform(-1, 1), i % 3 == 0));
    std::vector<const Transition*> batch;
    for (const Transition& t : storage) batch.push_back(&t);
    Rng noise(33);
    for (int i = 0; i < 50; ++i) a.update_on_batch(batch, cfg, noise);

    const std::string path = "/tmp/vn_sac_ckpt.bin";
    a.save(path);

    Rng init2(99);  // different init; load must overwrite everything
    SacAgent b(4, 2, cfg, init2);
    b.load(path);

    Rng u1(0), u2(0);
    for (int i = 0; i < 10; ++i) {
        std::vector<double> obs;
        for (int j = 0; j < 4; ++j) obs.push_back(rng.uniform(-1, 1));
        CHECK(a.act(obs, false, u1) == b.act(obs, false, u2));
    }
    CHECK(a.alpha() == b.alpha());
    CHECK(a.target_gap() == doctest::Approx(b.target_gap()).epsilon(1e-15));

    // Optimizer moments restored: the next update steps identically.
    Rng na(44), nb(44);
    LossReport ra = a.update_on_batch(batch, cfg, na);
    LossReport rb = b.update_on_batch(batch, cfg, nb);
    CHECK(ra.critic1 == rb.critic1);
    CHECK(ra.actor == rb.actor);
    CHECK(ra.alpha == rb.alpha);
    CHECK(a.critic1().layers[0].W.value.v == b.critic1().layers[0].W.value.v);

    SacConfig other = cfg;
    other.hidden = {8, 8};
    Rng init3(1);
    SacAgent c(4, 2, other, init3);
    try {
        c.load(path);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Load);
    }
    std::remove(path.c_str());
}

TEST_CASE("short training run is deterministic with exact step accounting") {
    VascTree tree = make_corridor_tree();
    SimConfig sim;
    EpisodeConfig train_cfg = corridor_episode(200, {60, 70, 80});
    EpisodeConfig eval_cfg = corridor_episode(1500, {65, 75});

    SacConfig cfg;
    cfg.hidden = {8, 8};
    cfg.batch_size = 32;
    cfg.buffer_capacity = 5'000;
    cfg.warmup_steps = 100;
    cfg.total_steps = 600;
    cfg.eval_interval = 300;
    cfg.eval_episodes = 3;
    cfg.target_entropy = -4.0;

    auto run = [&]() {
        Rng init = Rng::stream(7, "init");
        SacAgent agent(Observation::kDim, 4, cfg, init);
        return train_subtask(agent, tree, sim, train_cfg, eval_cfg, cfg, 7);
    };
    TrainResult r1 = run();
    TrainResult r2 = run();

    CHECK(r1.step_log.size() == 600);  // no early stop: log covers the budget
    CHECK(r1.steps_used == 600);
    CHECK(!r1.stopped_early);
    REQUIRE(r1.snapshots.size() == 2);
    CHECK(r1.snapshots[0].step == 300);
    CHECK(r1.snapshots[1].step == 600);

    REQUIRE(r2.snapshots.size() == r1.snapshots.size());
    for (std::size_t i = 0; i < r1.snapshots.size(); ++i)
        CHECK(r1.snapshots[i].success_rate == r2.snapshots[i].success_rate);
    CHECK(r1.episodes_completed == r2.episodes_completed);
    REQUIRE(r1.step_log.size() == r2.step_log.size());
    for (std::size_t i = 0; i < r1.step_log.size(); i += 37) {
        CHECK(r1.step_log[i].critic_loss == r2.step_log[i].critic_loss);
        CHECK(r1.step_log[i].episode_return == r2.step_log[i].episode_return);
    }

    const std::string path = "/tmp/vn_step_log.csv";
    write_step_log_csv(path, r1);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "step,episode_return,eval_sr,critic_loss,actor_loss,alpha_loss,alpha");
    int rows = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 600);
    std::remove(path.c_str());
}

TEST_CASE("training resumes from persisted state with identical results") {
    VascTree tree = make_corridor_tree();
    SimConfig sim;
    EpisodeConfig train_cfg = corridor_episode(200, {60, 70, 80});
    EpisodeConfig eval_cfg = corridor_episode(1500, {65, 75});

    SacConfig cfg;
    cfg.hidden = {8, 8};
    cfg.batch_size = 32;
    cfg.buffer_capacity = 5'000;
    cfg.warmup_steps = 100;
    cfg.total_steps = 900;
    cfg.eval_interval = 300;
    cfg.eval_episodes = 3;

    // Uninterrupted reference run.
    Rng init_a = Rng::stream(19, "init");
    SacAgent a(Observation::kDim, 4, cfg, init_a);
    TrainResult ref = train_subtask(a, tree, sim, train_cfg, eval_cfg, cfg, 19);
    REQUIRE(ref.snapshots.size() == 3);

    // Interrupted run: stop at the first snapshot boundary, persist agent and
    // training state, reload both into fresh objects, continue.
    Rng init_b = Rng::stream(19, "init");
    SacAgent b(Observation::kDim, 4, cfg, init_b);
    TrainState st(cfg.buffer_capacity, 19);
    train_from_state(b, st, tree, sim, train_cfg, eval_cfg, cfg, 300);
    CHECK(st.next_step == 301);
    b.save("/tmp/vn_resume_agent.bin");
    save_train_state("/tmp/vn_resume_state.bin", st);

    Rng init_c = Rng::stream(77, "init");  // deliberately different init
    SacAgent c(Observation::kDim, 4, cfg, init_c);
    c.load("/tmp/vn_resume_agent.bin");
    TrainState st2 = load_train_state("/tmp/vn_resume_state.bin");
    CHECK(st2.buffer.size() == st.buffer.size());
    CHECK(st2.next_step == 301);
    TrainResult resumed =
        train_from_state(c, st2, tree, sim, train_cfg, eval_cfg, cfg);

    REQUIRE(resumed.snapshots.size() == ref.snapshots.size());
    for (std::size_t i = 0; i < ref.snapshots.size(); ++i) {
        CHECK(resumed.snapshots[i].step == ref.snapshots[i].step);
        CHECK(resumed.snapshots[i].success_rate == ref.snapshots[i].success_rate);
    }
    CHECK(resumed.episodes_completed == ref.episodes_completed);
    Rng u1(0), u2(0);
    std::vector<double> probe(Observation::kDim, 0.25);
    CHECK(a.act(probe, false, u1) == c.act(probe, false, u2));
    std::remove("/tmp/vn_resume_agent.bin");
    std::remove("/tmp/vn_resume_state.bin");
}

TEST_CASE("policy learns a straight corridor within the step budget") {
    VascTree tree = make_corridor_tree();
    SimConfig sim;
    EpisodeConfig train_cfg = corridor_episode(200, {55, 65, 75});
    EpisodeConfig eval_cfg = corridor_episode(1500, {60, 70});

    SacConfig cfg;
    cfg.hidden = {32, 32};
    cfg.batch_size = 64;
    cfg.buffer_capacity = 100'000;
    cfg.warmup_steps = 500;
    cfg.total_steps = 50'000;
    cfg.eval_interval = 2'500;
    cfg.eval_episodes = 50;
    cfg.stop_eval_sr = 95.0;

    Rng init = Rng::stream(3, "init");
    SacAgent agent(Observation::kDim, 4, cfg, init);
    TrainResult result = train_subtask(agent, tree, sim, train_cfg, eval_cfg, cfg, 3);

    REQUIRE(!result.snapshots.empty());
    double best = 0.0;
    for (const EvalSnapshot& s : result.snapshots)
        best = std::max(best, s.success_rate);
    CHECK(best >= 95.0);
    CHECK(result.steps_used <= 50'000);
    CHECK(result.step_log.size() == static_cast<std::size_t>(result.steps_used));
    CHECK(result.episodes_completed > 0);
}
