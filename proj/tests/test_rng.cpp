#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "vesselnav/rng.hpp"

using vn::Rng;

TEST_CASE("identical seeds reproduce identical sequences") {
    Rng a(1234), b(1234);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng c(1234), d(1235);
    bool any_diff = false;
    for (int i = 0; i < 16; ++i) any_diff |= (c.next_u64() != d.next_u64());
    CHECK(any_diff);
}

TEST_CASE("uniform stays in [0, 1) and is roughly flat") {
    Rng rng(7);
    const int n = 100000;
    double sum = 0.0;
    std::vector<int> bins(10, 0);
    for (int i = 0; i < n; ++i) {
        double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        sum += u;
        ++bins[static_cast<int>(u * 10.0)];
    }
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.02));
    for (int c : bins) {
        CHECK(c > n / 10 - 5 * 100);  // ~5 sigma for a fair decile
        CHECK(c < n / 10 + 5 * 100);
    }
}

TEST_CASE("bounded uniform and integer draws respect their ranges") {
    Rng rng(42);
    for (int i = 0; i < 10000; ++i) {
        double v = rng.uniform(-3.0, 5.0);
        CHECK(v >= -3.0);
        CHECK(v < 5.0);
        auto k = rng.uniform_int(7);
        CHECK(k < 7);
    }
    // All residues of a small modulus appear.
    std::map<std::uint64_t, int> counts;
    Rng r2(9);
    for (int i = 0; i < 7000; ++i) ++counts[r2.uniform_int(7)];
    CHECK(counts.size() == 7);
    for (const auto& [k, c] : counts) CHECK(c > 700);
}

TEST_CASE("normal draws have the right first two moments") {
    Rng rng(11);
    const int n = 200000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        double x = rng.normal();
        sum += x;
        sumsq += x * x;
    }
    double mean = sum / n;
    double var = sumsq / n - mean * mean;
    CHECK(mean == doctest::Approx(0.0).epsilon(1.0));
    CHECK(std::fabs(mean) < 0.02);
    CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("named streams and indexed splits give distinct reproducible streams") {
    Rng a = Rng::stream(99, "episodes");
    Rng b = Rng::stream(99, "episodes");
    Rng c = Rng::stream(99, "weights");
    CHECK(a.next_u64() == b.next_u64());
    CHECK(a.next_u64() != c.next_u64());

    Rng base(5);
    Rng s0 = base.split(0);
    Rng s1 = base.split(1);
    Rng s0b = base.split(0);
    CHECK(s0.next_u64() == s0b.next_u64());
    CHECK(s0.next_u64() != s1.next_u64());

    Rng n1 = base.split("critic");
    Rng n2 = base.split("actor");
    CHECK(n1.next_u64() != n2.next_u64());
}

TEST_CASE("state capture and restore resumes the exact sequence") {
    Rng rng(77);
    for (int i = 0; i < 13; ++i) rng.next_u64();
    auto st = rng.state();
    std::vector<std::uint64_t> ahead;
    for (int i = 0; i < 20; ++i) ahead.push_back(rng.next_u64());
    Rng other(1);
    other.set_state(st);
    for (int i = 0; i < 20; ++i) CHECK(other.next_u64() == ahead[i]);
}
