#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "vesselnav/error.hpp"
#include "vesselnav/nn.hpp"
#include "vesselnav/rng.hpp"

using vn::ErrorKind;
using vn::Rng;
using namespace vn::nn;

namespace {

Tensor make(int rows, int cols, std::initializer_list<double> vals) {
    Tensor t(rows, cols);
    std::size_t i = 0;
    for (double v : vals) t.v[i++] = v;
    REQUIRE(i == t.size());
    return t;
}

void fill_random(Tensor& t, Rng& rng, double lo, double hi) {
    for (double& v : t.v) v = rng.uniform(lo, hi);
}

/// Checks every parameter element's analytic gradient against central
/// differences of the rebuilt loss.
void gradcheck(std::vector<Param*> params, const std::function<int(Graph&)>& build,
               double tol = 1e-5) {
    for (Param* p : params) p->zero_grad();
    {
        Graph g;
        g.backward(build(g));
    }
    std::vector<double> flat;
    for (Param* p : params)
        flat.insert(flat.end(), p->value.v.begin(), p->value.v.end());

    auto f = [&](const std::vector<double>& x) {
        std::size_t k = 0;
        for (Param* p : params)
            for (double& v : p->value.v) v = x[k++];
        Graph g;
        return g.value(build(g)).v[0];
    };
    std::vector<double> numeric = oracles::numeric_gradient(f, flat);
    f(flat);  // restore original values

    std::size_t k = 0;
    for (Param* p : params) {
        for (double analytic : p->grad.v) {
            double ref = numeric[k++];
            double scale = std::max({1.0, std::fabs(ref), std::fabs(analytic)});
            CHECK(std::fabs(ref - analytic) / scale < tol);
        }
    }
}

} // namespace

TEST_CASE("affine layer computes x*W + b") {
    Graph g;
    int x = g.constant(make(2, 3, {1, 2, 3, 4, 5, 6}));

    Param w_zero(3, 2), bias(1, 2);
    bias.value = make(1, 2, {10, -5});
    int y0 = g.affine(x, g.param(w_zero), g.param(bias));
    CHECK(g.value(y0).at(0, 0) == 10.0);
    CHECK(g.value(y0).at(0, 1) == -5.0);
    CHECK(g.value(y0).at(1, 0) == 10.0);
    CHECK(g.value(y0).at(1, 1) == -5.0);

    Param w_id(3, 3), b_zero(1, 3);
    for (int i = 0; i < 3; ++i) w_id.value.at(i, i) = 1.0;
    int y1 = g.affine(x, g.param(w_id), g.param(b_zero));
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 3; ++j) CHECK(g.value(y1).at(i, j) == g.value(x).at(i, j));

    Param w(3, 2), b(1, 2);
    w.value = make(3, 2, {1, -1, 2, 0.5, -3, 4});
    b.value = make(1, 2, {0.25, -0.75});
    int y2 = g.affine(x, g.param(w), g.param(b));
    // Row 0: [1,2,3] -> (1*1 + 2*2 + 3*-3 + 0.25, 1*-1 + 2*0.5 + 3*4 - 0.75)
    CHECK(g.value(y2).at(0, 0) == doctest::Approx(-3.75).epsilon(1e-12));
    CHECK(g.value(y2).at(0, 1) == doctest::Approx(11.25).epsilon(1e-12));
    CHECK(g.value(y2).at(1, 0) == doctest::Approx(-3.75 + 3 * 1 + 3 * 2 - 3 * 3).epsilon(1e-12));
    CHECK(g.value(y2).at(1, 1) == doctest::Approx(11.25 - 3 + 1.5 + 12).epsilon(1e-12));

    CHECK_THROWS_AS(g.affine(x, g.param(w_zero), g.param(b_zero)), vn::Error);
}

TEST_CASE("two-layer network matches hand-computed matrices") {
    Rng rng(7);
    Mlp net({2, 2, 1}, rng);
    net.layers[0].W.value = make(2, 2, {1, -2, 3, 0.5});
    net.layers[0].b.value = make(1, 2, {0.1, -0.2});
    net.layers[1].W.value = make(2, 1, {2, -1});
    net.layers[1].b.value = make(1, 1, {0.05});

    Tensor x = make(1, 2, {0.4, -0.6});
    // h = relu([0.4*1 - 0.6*3 + 0.1, 0.4*-2 - 0.6*0.5 - 0.2]) = relu([-1.3, -1.3])
    // -> [0, 0]; y = 0.05
    Tensor y = net.forward_raw(x);
    CHECK(y.at(0, 0) == doctest::Approx(0.05).epsilon(1e-12));

    Tensor x2 = make(1, 2, {1.0, 0.2});
    // h = relu([1 + 0.6 + 0.1, -2 + 0.1 - 0.2]) = [1.7, 0]
    // y = 1.7*2 + 0.05 = 3.45
    Tensor y2 = net.forward_raw(x2);
    CHECK(y2.at(0, 0) == doctest::Approx(3.45).epsilon(1e-12));

    Graph g;
    int out = net.forward(g, g.constant(x2));
    CHECK(g.value(out).at(0, 0) == doctest::Approx(3.45).epsilon(1e-12));

    // features_raw rectifies after every layer.
    Tensor feats = net.features_raw(x2);
    CHECK(feats.rows == 1);
    CHECK(feats.cols == 1);
    CHECK(feats.at(0, 0) == doctest::Approx(3.45).epsilon(1e-12));
    Tensor x3 = make(1, 2, {-1.0, -0.2});
    CHECK(net.features_raw(x3).at(0, 0) == 0.0);
}

TEST_CASE("scalar chain rule and gradient bookkeeping") {
    Param w(1, 1);
    w.value.v[0] = 3.0;

    Graph g;
    int pw = g.param(w);
    int loss = g.mean_all(g.mul(pw, pw));
    CHECK(g.value(loss).v[0] == 9.0);
    g.backward(loss);
    CHECK(w.grad.v[0] == doctest::Approx(6.0).epsilon(1e-12));
    CHECK(g.grad(pw).v[0] == doctest::Approx(6.0).epsilon(1e-12));

    // Gradients accumulate across backward calls until zeroed.
    Graph g2;
    g2.backward(g2.mean_all(g2.mul(g2.param(w), g2.param(w))));
    CHECK(w.grad.v[0] == doctest::Approx(12.0).epsilon(1e-12));
    w.zero_grad();
    CHECK(w.grad.v[0] == 0.0);

    // Constants receive zero gradient; unreached nodes stay zero.
    Graph g3;
    int c = g3.constant_scalar(4.0);
    int p3 = g3.param(w);
    int l3 = g3.mean_all(g3.mul(p3, g3.constant_scalar(2.0)));
    g3.backward(l3);
    CHECK(g3.grad(c).v[0] == 0.0);
    CHECK(w.grad.v[0] == doctest::Approx(2.0).epsilon(1e-12));

    Graph g4;
    int nonscalar = g4.constant(make(2, 1, {1, 2}));
    CHECK_THROWS_AS(g4.backward(nonscalar), vn::Error);

    Graph g5;
    int id = g5.constant_scalar(1.0);
    CHECK_THROWS_AS(g5.grad(id), vn::Error);
}

TEST_CASE("gradient check across every operation") {
    Rng rng(2024);
    for (int trial = 0; trial < 20; ++trial) {
        Param a(2, 3), b(2, 3), w(3, 2), bias(1, 2);
        fill_random(a.value, rng, -1.5, 1.5);
        fill_random(b.value, rng, 0.2, 1.8);  // positive: feeds log
        fill_random(w.value, rng, -1.0, 1.0);
        fill_random(bias.value, rng, -0.5, 0.5);

        auto build = [&](Graph& g) {
            int pa = g.param(a);
            int pb = g.param(b);
            int lin = g.affine(pa, g.param(w), g.param(bias));       // [2,2]
            int t = g.tanh_op(lin);
            int e = g.exp_op(g.scale_add(t, 0.5, -0.1));
            int r = g.relu(g.sub(e, g.constant(make(2, 2, {1, 1, 1, 1}))));
            int cl = g.clamp(g.add(t, e), -0.9, 1.7);
            int m = g.min_elem(r, cl);
            int lg = g.log_op(pb);                                    // [2,3]
            int mixed = g.concat_cols(m, g.mul(lg, pb));              // [2,5]
            int rowsum = g.sum_cols(mixed);                           // [2,1]
            return g.mean_all(g.mul(rowsum, rowsum));
        };
        gradcheck({&a, &b, &w, &bias}, build, 2e-5);
    }
}

TEST_CASE("gradient check on an actor-critic style loss") {
    Rng rng(99);
    Tensor obs(4, 5);
    fill_random(obs, rng, -1.0, 1.0);
    Tensor eps(4, 3);
    for (double& v : eps.v) v = rng.normal();
    Tensor q_target = make(4, 1, {0.3, -0.2, 0.8, 0.1});

    Mlp trunk({5, 6, 6}, rng);
    GaussianHead head(6, 3, rng);
    Mlp q1({5 + 3, 6, 1}, rng);
    Mlp q2({5 + 3, 6, 1}, rng);
    Tensor stored_actions(4, 3);
    fill_random(stored_actions, rng, -0.8, 0.8);

    std::vector<Param*> all;
    for (Param* p : trunk.params()) all.push_back(p);
    for (Param* p : head.params()) all.push_back(p);
    for (Param* p : q1.params()) all.push_back(p);
    for (Param* p : q2.params()) all.push_back(p);

    auto build = [&](Graph& g) {
        int o = g.constant(obs);
        // Critic regression toward fixed targets on stored actions.
        int sa = g.concat_cols(o, g.constant(stored_actions));
        int tgt = g.constant(q_target);
        int d1 = g.sub(q1.forward(g, sa), tgt);
        int d2 = g.sub(q2.forward(g, sa), tgt);
        int critic_loss = g.add(g.mean_all(g.mul(d1, d1)), g.mean_all(g.mul(d2, d2)));

        // Reparameterized policy loss: alpha * logp - min(Q1, Q2).
        auto [act, logp] = head.sample_graph(g, trunk.features(g, o), eps);
        int sa_pi = g.concat_cols(o, act);
        int qmin = g.min_elem(q1.forward(g, sa_pi), q2.forward(g, sa_pi));
        int actor_loss = g.mean_all(g.sub(g.scale_add(logp, 0.2, 0.0), qmin));
        return g.add(critic_loss, actor_loss);
    };
    gradcheck(all, build, 2e-5);
}

TEST_CASE("squashed Gaussian sampling matches the density formula") {
    Rng init(5);
    GaussianHead head(2, 3, init);
    // Zero weights, zero bias: mu = 0, log sigma = 0.
    for (Param* p : head.params())
        for (double& v : p->value.v) v = 0.0;

    Tensor feats = make(1, 2, {0.7, -0.3});

    SUBCASE("zero noise hits the mode with the squash correction") {
        Graph g;
        Tensor eps(1, 3);
        auto [act, logp] = head.sample_graph(g, g.constant(feats), eps);
        for (int j = 0; j < 3; ++j) CHECK(g.value(act).at(0, j) == 0.0);
        double per_dim = -0.5 * std::log(2.0 * vn::kPi) - std::log(1.0 + 1e-6);
        CHECK(g.value(logp).at(0, 0) == doctest::Approx(3.0 * per_dim).epsilon(1e-10));
        CHECK(per_dim == doctest::Approx(-0.9189394).epsilon(1e-6));
    }

    SUBCASE("stochastic draw replays the generator stream exactly") {
        Rng rng = Rng::stream(17, "sample");
        Rng replay = rng;
        auto s = head.sample_raw(feats, rng);
        double expect_logp = 0.0;
        for (int j = 0; j < 3; ++j) {
            double e = replay.normal();
            double a = std::tanh(e);  // mu = 0, sigma = 1
            CHECK(s.pre_squash[j] == e);
            CHECK(s.action[j] == a);
            expect_logp += -0.5 * e * e - 0.5 * std::log(2.0 * vn::kPi) -
                           std::log(1.0 - a * a + 1e-6);
        }
        CHECK(s.log_prob == doctest::Approx(expect_logp).epsilon(1e-12));
        CHECK(head.log_prob_raw(feats, s.action) ==
              doctest::Approx(expect_logp).epsilon(1e-9));
    }

    SUBCASE("deterministic action is the squashed mean") {
        head.mean.b.value = make(1, 3, {0.5, -1.0, 2.0});
        auto a = head.mean_action_raw(feats);
        CHECK(a[0] == doctest::Approx(std::tanh(0.5)).epsilon(1e-12));
        CHECK(a[1] == doctest::Approx(std::tanh(-1.0)).epsilon(1e-12));
        CHECK(a[2] == doctest::Approx(std::tanh(2.0)).epsilon(1e-12));
    }

    SUBCASE("log standard deviation is clamped on both sides") {
        GaussianHead wide(2, 1, init);
        for (Param* p : wide.params())
            for (double& v : p->value.v) v = 0.0;
        wide.log_std.b.value.v[0] = 40.0;  // clamps to kLogStdMax
        double lp_wide = wide.log_prob_raw(feats, {0.0});
        CHECK(lp_wide == doctest::Approx(-kLogStdMax - 0.5 * std::log(2.0 * vn::kPi) -
                                         std::log(1.0 + 1e-6))
                             .epsilon(1e-10));
        wide.log_std.b.value.v[0] = -300.0;  // clamps to kLogStdMin
        double lp_narrow = wide.log_prob_raw(feats, {0.0});
        CHECK(lp_narrow == doctest::Approx(-kLogStdMin - 0.5 * std::log(2.0 * vn::kPi) -
                                           std::log(1.0 + 1e-6))
                               .epsilon(1e-10));
    }
}

TEST_CASE("squashed density integrates to one over the action interval") {
    Rng init(11);
    GaussianHead head(1, 1, init);
    for (Param* p : head.params())
        for (double& v : p->value.v) v = 0.0;
    head.mean.b.value.v[0] = 0.3;
    head.log_std.b.value.v[0] = std::log(0.5);
    Tensor feats = make(1, 1, {1.0});

    auto density = [&](double a) { return std::exp(head.log_prob_raw(feats, {a})); };
    const int n = 40000;  // composite Simpson, even interval count
    double lo = -1.0 + 1e-7, hi = 1.0 - 1e-7;
    double h = (hi - lo) / n;
    double acc = density(lo) + density(hi);
    for (int i = 1; i < n; ++i) acc += density(lo + i * h) * (i % 2 ? 4.0 : 2.0);
    double integral = acc * h / 3.0;
    CHECK(std::fabs(integral - 1.0) < 0.02);
}

TEST_CASE("pre-squash sample mean concentrates on the head mean") {
    Rng init(13);
    GaussianHead head(1, 1, init);
    for (Param* p : head.params())
        for (double& v : p->value.v) v = 0.0;
    head.mean.b.value.v[0] = 0.2;
    Tensor feats = make(1, 1, {1.0});

    Rng rng = Rng::stream(31, "moments");
    const int n = 100000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += head.sample_raw(feats, rng).pre_squash[0];
    // sigma = 1, so a 4-sigma band on the mean is 4 / sqrt(n).
    CHECK(std::fabs(sum / n - 0.2) < 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("taped sampling agrees with untaped forward math") {
    Rng init(21);
    Mlp trunk({4, 5, 5}, init);
    GaussianHead head(5, 2, init);
    Rng data(22);
    Tensor obs(3, 4);
    fill_random(obs, data, -1.0, 1.0);
    Tensor eps(3, 2);
    for (double& v : eps.v) v = data.normal();

    Graph g;
    auto [act, logp] = head.sample_graph(g, trunk.features(g, g.constant(obs)), eps);

    Tensor feats = trunk.features_raw(obs);
    for (int r = 0; r < 3; ++r) {
        Tensor row(1, 5);
        for (int j = 0; j < 5; ++j) row.at(0, j) = feats.at(r, j);
        Tensor mu = head.mean.forward_raw(row);
        Tensor ls = head.log_std.forward_raw(row);
        double lp = 0.0;
        for (int j = 0; j < 2; ++j) {
            double lsj = std::min(std::max(ls.at(0, j), kLogStdMin), kLogStdMax);
            double pre = mu.at(0, j) + std::exp(lsj) * eps.at(r, j);
            double a = std::tanh(pre);
            CHECK(g.value(act).at(r, j) == doctest::Approx(a).epsilon(1e-12));
            lp += -0.5 * eps.at(r, j) * eps.at(r, j) - lsj -
                  0.5 * std::log(2.0 * vn::kPi) - std::log(1.0 - a * a + 1e-6);
        }
        CHECK(g.value(logp).at(r, 0) == doctest::Approx(lp).epsilon(1e-12));
    }
}

TEST_CASE("optimizer leaves parameters alone on zero gradient") {
    Rng rng(3);
    Linear layer(4, 2, rng);
    Tensor before_w = layer.W.value;
    Tensor before_b = layer.b.value;
    Adam opt(1e-3);
    layer.W.zero_grad();
    layer.b.zero_grad();
    opt.step({&layer.W, &layer.b});
    CHECK(layer.W.value.v == before_w.v);
    CHECK(layer.b.value.v == before_b.v);
    CHECK(opt.steps_taken() == 1);
}

TEST_CASE("optimizer drives a quadratic to its minimum deterministically") {
    auto run = [](std::vector<double>& trace) {
        Param x(1, 1);
        x.value.v[0] = 5.0;
        Adam opt(0.1);
        for (int i = 0; i < 800; ++i) {
            x.zero_grad();
            Graph g;
            int px = g.param(x);
            g.backward(g.mean_all(g.mul(px, px)));
            opt.step({&x});
            trace.push_back(x.value.v[0]);
        }
        return x.value.v[0];
    };
    std::vector<double> t1, t2;
    double x1 = run(t1);
    double x2 = run(t2);
    CHECK(std::fabs(x1) < 1e-3);
    CHECK(x1 == x2);
    CHECK(t1 == t2);  // bitwise identical trajectories

    Adam opt(1e-3);
    opt.set_steps_taken(1000);
    CHECK(opt.steps_taken() == 1000);
    CHECK(opt.learning_rate() == 1e-3);
}

TEST_CASE("checkpoints round-trip bit for bit") {
    std::map<std::string, Tensor> original;
    original["actor/w0"] = make(2, 3, {1.5, -0.0, 3.1415926535897931, 1e308, 5e-324, -2.5});
    original["critic/b"] = make(1, 1, {-7.25});
    original["empty"] = Tensor(0, 0);

    const std::string p1 = "/tmp/vn_ckpt_a.bin";
    const std::string p2 = "/tmp/vn_ckpt_b.bin";
    save_tensors(p1, original);
    auto loaded = load_tensors(p1);
    REQUIRE(loaded.size() == original.size());
    for (const auto& [name, t] : original) {
        REQUIRE(loaded.count(name) == 1);
        const Tensor& u = loaded.at(name);
        REQUIRE(u.rows == t.rows);
        REQUIRE(u.cols == t.cols);
        for (std::size_t i = 0; i < t.v.size(); ++i) {
            std::uint64_t a, b;
            std::memcpy(&a, &t.v[i], 8);
            std::memcpy(&b, &u.v[i], 8);
            CHECK(a == b);
        }
    }
    save_tensors(p2, loaded);
    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(s1 == s2);
    CHECK(s1.substr(0, 8) == "VNCKPT01");
    std::remove(p1.c_str());
    std::remove(p2.c_str());
}

TEST_CASE("checkpoint loading rejects malformed files") {
    const std::string path = "/tmp/vn_ckpt_bad.bin";

    auto expect_load_error = [&](const std::string& bytes) {
        std::ofstream f(path, std::ios::binary);
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        f.close();
        try {
            load_tensors(path);
            CHECK(false);
        } catch (const vn::Error& e) {
            CHECK(e.kind() == ErrorKind::Load);
        }
    };

    expect_load_error("NOTMAGIC\x01\x00\x00\x00");
    expect_load_error("VNCK");  // shorter than the magic

    std::map<std::string, Tensor> one;
    one["w"] = make(1, 2, {1.0, 2.0});
    save_tensors(path, one);
    std::ifstream in(path, std::ios::binary);
    std::string good((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    expect_load_error(good.substr(0, good.size() - 5));  // truncated payload
    expect_load_error(good + "xx");                      // trailing bytes

    try {
        load_tensors("/tmp/vn_ckpt_missing_file.bin");
        CHECK(false);
    } catch (const vn::Error& e) {
        CHECK(e.kind() == ErrorKind::Load);
    }
    std::remove(path.c_str());
}
