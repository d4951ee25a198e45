#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "vesselnav/anatomy.hpp"
#include "vesselnav/vasctree.hpp"

using namespace vn;

namespace {

/// Tiny hand-built tree: a straight trunk along +z with one side branch along
/// +x taking off halfway up. Every quantity is known in closed form.
VascTree make_toy_tree() {
    VascTree t;
    Branch trunk;
    trunk.id = 0;
    trunk.label = BranchLabel::FEMORAL;
    trunk.parent = kNoBranch;
    for (int i = 0; i <= 100; ++i)
        trunk.points.push_back({{0.0, 0.0, static_cast<double>(i)}, 4.0});
    Branch side;
    side.id = 1;
    side.label = BranchLabel::ILIAC;
    side.parent = 0;
    side.attachment_index = 50;
    for (int i = 0; i <= 40; ++i)
        side.points.push_back({{static_cast<double>(i), 0.0, 50.0}, 2.0 + 0.05 * i});
    t.branches[0] = trunk;
    t.branches[1] = side;
    t.root = 0;
    t.rebuild_geometry();
    return t;
}

double max_point_gap(const Branch& b) {
    double m = 0.0;
    for (std::size_t i = 1; i < b.points.size(); ++i)
        m = std::max(m, (b.points[i].position - b.points[i - 1].position).norm());
    return m;
}

} // namespace

TEST_CASE("arc interpolation is linear between centerline points") {
    VascTree t = make_toy_tree();
    const Branch& trunk = t.branch(0);
    CHECK(trunk.total_length() == doctest::Approx(100.0));
    Vec3 p = trunk.position_at(12.5);
    CHECK(p.z == doctest::Approx(12.5));
    const Branch& side = t.branch(1);
    CHECK(side.radius_at(20.0) == doctest::Approx(3.0));
    CHECK(side.radius_at(0.0) == doctest::Approx(2.0));
    Vec3 tan = side.tangent_at(5.0);
    CHECK(tan.x == doctest::Approx(1.0));
    CHECK(std::fabs(tan.z) < 1e-12);
}

TEST_CASE("pathlength on one branch is the plain arc difference") {
    VascTree t = make_toy_tree();
    CHECK(pathlength(t, {0, 10.0}, {0, 90.0}) == doctest::Approx(80.0));
    CHECK(pathlength(t, {0, 90.0}, {0, 10.0}) == doctest::Approx(80.0));
    CHECK(pathlength(t, {0, 33.0}, {0, 33.0}) == doctest::Approx(0.0));
}

TEST_CASE("pathlength across a junction adds both arc legs") {
    VascTree t = make_toy_tree();
    // 20 up the trunk to the junction at 50, then 7 into the side branch.
    CHECK(pathlength(t, {0, 30.0}, {1, 7.0}) == doctest::Approx(27.0));
    CHECK(pathlength(t, {1, 7.0}, {0, 30.0}) == doctest::Approx(27.0));
    CHECK(t.depth_from_root({1, 7.0}) == doctest::Approx(57.0));
}

TEST_CASE("pathlength agrees with a graph-search oracle on generated trees") {
    AnatomyParams params;
    for (std::uint64_t seed : {3u, 17u, 98u}) {
        VascTree tree = generate_synthetic(params, seed);
        Rng rng(seed * 7 + 1);
        std::vector<BranchId> ids;
        for (const auto& [id, b] : tree.branches) ids.push_back(id);
        for (int k = 0; k < 40; ++k) {
            BranchId ba = ids[rng.uniform_int(ids.size())];
            BranchId bb = ids[rng.uniform_int(ids.size())];
            ArcPosition a{ba, rng.uniform(0.0, tree.branch(ba).total_length())};
            ArcPosition b{bb, rng.uniform(0.0, tree.branch(bb).total_length())};
            double got = pathlength(tree, a, b);
            double want = oracles::pathlength_dijkstra(tree, a, b);
            CHECK(got == doctest::Approx(want).epsilon(1e-9));
            CHECK(got == doctest::Approx(pathlength(tree, b, a)).epsilon(1e-12));
        }
    }
}

TEST_CASE("tortuosity: straight segment scores 1, semicircle scores pi/2") {
    VascTree t = make_toy_tree();
    CHECK(tortuosity(t, {0, 5.0}, {0, 95.0}) == doctest::Approx(1.0));

    VascTree semi;
    Branch arcb;
    arcb.id = 0;
    arcb.label = BranchLabel::FEMORAL;
    arcb.parent = kNoBranch;
    const int n = 720;
    for (int i = 0; i <= n; ++i) {
        double phi = kPi * i / n;
        arcb.points.push_back({{50.0 * std::cos(phi), 50.0 * std::sin(phi), 0.0}, 3.0});
    }
    semi.branches[0] = arcb;
    semi.root = 0;
    semi.rebuild_geometry();
    double L = semi.branch(0).total_length();
    CHECK(tortuosity(semi, {0, 0.0}, {0, L}) == doctest::Approx(kPi / 2.0).epsilon(1e-4));

    CHECK_THROWS_AS(tortuosity(t, {0, 5.0}, {0, 5.0}), Error);
}

TEST_CASE("generated trees are valid, complete and finely sampled") {
    AnatomyParams params;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        VascTree tree = generate_synthetic(params, seed);
        CHECK_NOTHROW(tree.check_valid());
        CHECK(tree.branches.size() == 10);
        for (int i = 0; i < kNumBranchLabels; ++i)
            CHECK(tree.has_label(static_cast<BranchLabel>(i)));
        CHECK(tree.branch(tree.root).label == BranchLabel::FEMORAL);
        for (const auto& [id, b] : tree.branches) {
            CHECK(max_point_gap(b) <= 1.0 + 1e-9);
            for (const auto& p : b.points) CHECK(p.radius > 0.0);
        }
        // Navigation order along the arch: LSA, then LCCA, then BCT.
        const Branch& lsa = tree.branch(BranchLabel::LSA);
        const Branch& lcca = tree.branch(BranchLabel::LCCA);
        const Branch& bct = tree.branch(BranchLabel::BCT);
        const Branch& arch = tree.branch(BranchLabel::ARCH);
        double s_lsa = arch.cum_s[lsa.attachment_index];
        double s_lcca = arch.cum_s[lcca.attachment_index];
        double s_bct = arch.cum_s[bct.attachment_index];
        CHECK(s_lsa < s_lcca);
        CHECK(s_lcca < s_bct);
        if (tree.arch_type == ArchType::TypeII) {
            CHECK(s_bct - s_lcca >= 1.0);
            CHECK(s_bct - s_lcca <= 8.0);
        }
    }
}

TEST_CASE("left carotid takeoff is more acute than the right-side trunk") {
    AnatomyParams params;
    int left_more_acute = 0;
    for (std::uint64_t seed = 100; seed < 140; ++seed) {
        VascTree tree = generate_synthetic(params, seed);
        double lcca = tree.branch(BranchLabel::LCCA).takeoff_angle;
        double bct = tree.branch(BranchLabel::BCT).takeoff_angle;
        CHECK(lcca > 28.0);
        CHECK(lcca < 67.0);
        CHECK(bct > 53.0);
        CHECK(bct < 97.0);
        if (lcca < bct) ++left_more_acute;
    }
    CHECK(left_more_acute == 40);
}

TEST_CASE("arch type frequency matches the configured probability") {
    AnatomyParams params;
    int type1 = 0;
    const int n = 1000;
    for (std::uint64_t seed = 0; seed < n; ++seed) {
        VascTree tree = generate_synthetic(params, seed);
        if (tree.arch_type == ArchType::TypeI) ++type1;
    }
    double frac = static_cast<double>(type1) / n;
    CHECK(frac > 0.76);
    CHECK(frac < 0.84);
}

TEST_CASE("right carotid chain tortuosity sits in the anatomical band") {
    AnatomyParams params;
    double sum = 0.0;
    const int n = 100;
    for (std::uint64_t seed = 0; seed < n; ++seed) {
        VascTree tree = generate_synthetic(params, seed);
        BranchId rcca = tree.id_of(BranchLabel::RCCA);
        BranchId rica = tree.id_of(BranchLabel::RICA);
        double L = tree.branch(rica).total_length();
        sum += tortuosity(tree, {rcca, 0.0}, {rica, L});
    }
    double mean = sum / n;
    CHECK(mean > 1.05);
    CHECK(mean < 1.35);
}

TEST_CASE("serialization round-trips byte-identically") {
    AnatomyParams params;
    VascTree tree = generate_synthetic(params, 5);
    std::string text = tree_to_string(tree);
    VascTree back = tree_from_string(text);
    CHECK(tree_to_string(back) == text);
    CHECK(back.branches.size() == tree.branches.size());
    CHECK(back.arch_type == tree.arch_type);
    CHECK(back.branch(BranchLabel::LCCA).takeoff_angle ==
          doctest::Approx(tree.branch(BranchLabel::LCCA).takeoff_angle).epsilon(1e-3));

    std::string path = "/tmp/vesselnav_test_tree.txt";
    save_tree(tree, path);
    VascTree loaded = load_tree(path);
    CHECK(tree_to_string(loaded) == text);
    std::remove(path.c_str());
}

TEST_CASE("loading rejects malformed input with a load error") {
    CHECK_THROWS_AS(tree_from_string(""), Error);
    CHECK_THROWS_AS(tree_from_string("something else\n"), Error);
    CHECK_THROWS_AS(tree_from_string("vasctree v1 arch=TypeIII\n"), Error);
    CHECK_THROWS_AS(
        tree_from_string("vasctree v1 arch=TypeI\nbranch 0 NOSUCH -1 -1 2\n"), Error);
    // Declared three points, provides one.
    CHECK_THROWS_AS(tree_from_string("vasctree v1 arch=TypeI\n"
                                     "branch 0 FEMORAL -1 -1 3\n"
                                     "0 0 0 1\n"),
                    Error);
    try {
        tree_from_string("not a tree\n");
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Load);
    }
}

TEST_CASE("fusion matches radii and positions at the seam") {
    AnatomyParams params;
    Rng root(2024);
    Rng neck_rng = root.split("neck");
    Rng body_rng = root.split("body");
    VascTree neck = generate_neck_fragment(params, neck_rng, ArchType::TypeI);
    VascTree body = generate_body_fragment(params, body_rng);
    VascTree tree = fuse(neck, body);
    CHECK_NOTHROW(tree.check_valid());
    CHECK(tree.branch(tree.root).label == BranchLabel::FEMORAL);

    const Branch& desc = tree.branch(BranchLabel::DESC_AORTA);
    const Branch& arch = tree.branch(BranchLabel::ARCH);
    CHECK(arch.parent == desc.id);
    // The arch inlet point coincides with the descending-aorta top point,
    // radius included.
    Vec3 seam_body = desc.points.back().position;
    Vec3 seam_neck = arch.points.front().position;
    CHECK((seam_body - seam_neck).norm() < 1e-9);
    CHECK(desc.points.back().radius ==
          doctest::Approx(arch.points.front().radius).epsilon(1e-12));
}

TEST_CASE("augmentation validates ranges and scales geometry as advertised") {
    AnatomyParams params;
    VascTree tree = generate_synthetic(params, 8);

    VascTree same = augment(tree, {0, 0, 0}, 1.0, 1.0);
    CHECK(tree_to_string(same) == tree_to_string(tree));

    VascTree wide = augment(tree, {0, 0, 0}, 1.0, 1.2);
    for (const auto& [id, b] : tree.branches) {
        CHECK(wide.branch(id).points.front().radius ==
              doctest::Approx(1.2 * b.points.front().radius));
    }
    Vec3 lo0, hi0, lo1, hi1;
    tree.bounding_box(lo0, hi0);
    VascTree tall = augment(tree, {0, 0, 0}, 1.3, 1.0);
    tall.bounding_box(lo1, hi1);
    CHECK(hi1.z - lo1.z == doctest::Approx(1.3 * (hi0.z - lo0.z)).epsilon(1e-9));
    CHECK(hi1.x - lo1.x == doctest::Approx(hi0.x - lo0.x).epsilon(1e-9));

    CHECK_THROWS_AS(augment(tree, {11.0, 0, 0}, 1.0, 1.0), Error);
    CHECK_THROWS_AS(augment(tree, {0, 0, 0}, 0.5, 1.0), Error);
    CHECK_THROWS_AS(augment(tree, {0, 0, 0}, 1.0, 1.4), Error);
    try {
        augment(tree, {0, 0, 0}, 2.0, 1.0);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Parameter);
    }

    // Randomized augmentation is deterministic per seed and stays valid.
    VascTree r1 = augment_random(tree, AugmentRanges{}, 31);
    VascTree r2 = augment_random(tree, AugmentRanges{}, 31);
    CHECK(tree_to_string(r1) == tree_to_string(r2));
    CHECK_NOTHROW(r1.check_valid());
}

TEST_CASE("target sampling: deterministic split, spread out, on the branch") {
    AnatomyParams params;
    VascTree tree = generate_synthetic(params, 13);
    BranchId rica = tree.id_of(BranchLabel::RICA);
    TargetSet a = sample_targets(tree, rica, 555);
    TargetSet b = sample_targets(tree, rica, 555);
    CHECK(a.train.size() == 10);
    CHECK(a.eval.size() == 10);
    for (std::size_t i = 0; i < 10; ++i) {
        CHECK(a.train[i].s == b.train[i].s);
        CHECK(a.eval[i].s == b.eval[i].s);
    }
    double L = tree.branch(rica).total_length();
    std::vector<double> all;
    for (const auto& p : a.train) all.push_back(p.s);
    for (const auto& p : a.eval) all.push_back(p.s);
    for (double s : all) {
        CHECK(s >= 0.0);
        CHECK(s <= L);
    }
    for (std::size_t i = 0; i < all.size(); ++i)
        for (std::size_t j = i + 1; j < all.size(); ++j)
            CHECK(std::fabs(all[i] - all[j]) >= 1.0);

    TargetSet c = sample_targets(tree, rica, 556);
    bool differs = false;
    for (std::size_t i = 0; i < 10; ++i) differs |= (c.train[i].s != a.train[i].s);
    CHECK(differs);
}

TEST_CASE("generation is deterministic in the seed") {
    AnatomyParams params;
    VascTree a = generate_synthetic(params, 321);
    VascTree b = generate_synthetic(params, 321);
    VascTree c = generate_synthetic(params, 322);
    CHECK(tree_to_string(a) == tree_to_string(b));
    CHECK(tree_to_string(a) != tree_to_string(c));
}

TEST_CASE("parameter validation rejects degenerate generator settings") {
    AnatomyParams bad;
    bad.rica.radius_start = {0.0, 0.5};
    CHECK_THROWS_AS(generate_synthetic(bad, 1), Error);

    AnatomyParams bad2;
    bad2.point_spacing = 0.0;
    CHECK_THROWS_AS(generate_synthetic(bad2, 1), Error);

    AnatomyParams bad3;
    bad3.lcca.takeoff_deg = {70, 95};  // not more acute than the right side
    CHECK_THROWS_AS(generate_synthetic(bad3, 1), Error);

    AnatomyParams bad4;
    bad4.arch_type1_probability = 1.5;
    try {
        generate_synthetic(bad4, 1);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Parameter);
    }
}
