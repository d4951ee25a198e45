#include "vesselnav/anatomy.hpp"

#include <algorithm>
#include <cmath>

namespace vn {

namespace {

// Catmull-Rom through the control points (endpoints doubled by reflection so
// the curve starts and ends exactly on them), densely sampled and then
// resampled to an even arc spacing.
std::vector<Vec3> spline_resample(const std::vector<Vec3>& ctrl, double spacing) {
    if (ctrl.size() < 2) fail(ErrorKind::Parameter, "need at least two control points");
    std::vector<Vec3> pts;
    pts.push_back(ctrl.front());
    auto at = [&](int i) -> Vec3 {
        if (i < 0) return ctrl[0] * 2.0 - ctrl[1];
        int n = static_cast<int>(ctrl.size());
        if (i >= n) return ctrl[n - 1] * 2.0 - ctrl[n - 2];
        return ctrl[i];
    };
    const int dense = 24;
    for (int seg = 0; seg + 1 < static_cast<int>(ctrl.size()); ++seg) {
        Vec3 p0 = at(seg - 1), p1 = at(seg), p2 = at(seg + 1), p3 = at(seg + 2);
        for (int k = 1; k <= dense; ++k) {
            double t = static_cast<double>(k) / dense;
            double t2 = t * t, t3 = t2 * t;
            Vec3 p = 0.5 * ((2.0 * p1) + (p2 - p0) * t +
                            (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t2 +
                            (3.0 * p1 - p0 + p3 - 3.0 * p2) * t3);
            pts.push_back(p);
        }
    }
    // Arc-length resample with an even step that lands exactly on the
    // endpoint, so every consecutive gap is <= spacing.
    double total = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) total += (pts[i] - pts[i - 1]).norm();
    int n_steps = std::max(1, static_cast<int>(std::ceil(total / spacing)));
    double step = total / n_steps;
    std::vector<Vec3> out;
    out.reserve(n_steps + 1);
    out.push_back(pts.front());
    double carried = 0.0;
    int emitted = 0;
    for (std::size_t i = 1; i < pts.size() && emitted + 1 < n_steps; ++i) {
        Vec3 prev = pts[i - 1];
        double seg = (pts[i] - prev).norm();
        while (carried + seg >= step && emitted + 1 < n_steps) {
            double need = step - carried;
            Vec3 dir = (pts[i] - prev) / seg;
            Vec3 q = prev + dir * need;
            out.push_back(q);
            ++emitted;
            prev = q;
            seg -= need;
            carried = 0.0;
        }
        carried += seg;
    }
    out.push_back(pts.back());
    return out;
}

void assign_radii(Branch& b, double r0, double r1) {
    std::vector<double> cs(b.points.size(), 0.0);
    for (std::size_t i = 1; i < b.points.size(); ++i)
        cs[i] = cs[i - 1] + (b.points[i].position - b.points[i - 1].position).norm();
    double total = cs.back() > 0.0 ? cs.back() : 1.0;
    for (std::size_t i = 0; i < b.points.size(); ++i) {
        double f = cs[i] / total;
        b.points[i].radius = r0 + (r1 - r0) * f;
    }
}

/// Direction at takeoff angle theta from the parent tangent, rolled around it.
/// The roll baseline points as superior (+z) as the perpendicular plane allows,
/// so side branches head upward like the real great vessels.
Vec3 dir_from_takeoff(const Vec3& parent_tangent, double theta_deg, double roll_deg) {
    Vec3 t = parent_tangent.normalized();
    Vec3 up{0, 0, 1};
    Vec3 u = up - t * up.dot(t);
    if (u.norm() < 1e-6) {
        Vec3 n1, n2;
        perp_frame(t, n1, n2);
        u = n1;
    }
    u = u.normalized();
    Vec3 w = t.cross(u);
    double roll = deg_to_rad(roll_deg);
    Vec3 side = u * std::cos(roll) + w * std::sin(roll);
    double th = deg_to_rad(theta_deg);
    return (t * std::cos(th) + side * std::sin(th)).normalized();
}

/// Mostly-straight branch: control points along `dir` with smooth lateral
/// offsets. The first two controls carry no offset so the initial tangent is
/// preserved (and with it the takeoff angle).
Branch make_wiggly_branch(BranchId id, BranchLabel label, const Vec3& start,
                          const Vec3& dir, double length, double r0, double r1,
                          double wiggle, double spacing, Rng& rng) {
    Vec3 d = dir.normalized();
    Vec3 n1, n2;
    perp_frame(d, n1, n2);
    int n_ctrl = std::max(4, static_cast<int>(std::lround(length / 18.0)) + 1);
    std::vector<Vec3> ctrl;
    ctrl.reserve(n_ctrl);
    for (int i = 0; i < n_ctrl; ++i) {
        double f = static_cast<double>(i) / (n_ctrl - 1);
        Vec3 p = start + d * (length * f);
        if (i >= 2) {
            p += n1 * rng.uniform(-wiggle, wiggle) + n2 * rng.uniform(-wiggle, wiggle);
        }
        ctrl.push_back(p);
    }
    Branch b;
    b.id = id;
    b.label = label;
    for (const Vec3& p : spline_resample(ctrl, spacing))
        b.points.push_back({p, 1.0});
    assign_radii(b, r0, r1);
    return b;
}

int nearest_point_index(const Branch& b, double s) {
    std::vector<double> cs(b.points.size(), 0.0);
    for (std::size_t i = 1; i < b.points.size(); ++i)
        cs[i] = cs[i - 1] + (b.points[i].position - b.points[i - 1].position).norm();
    int best = 0;
    double bd = std::fabs(cs[0] - s);
    for (std::size_t i = 1; i < cs.size(); ++i) {
        double dd = std::fabs(cs[i] - s);
        if (dd < bd) {
            bd = dd;
            best = static_cast<int>(i);
        }
    }
    // Keep attachments off the very ends so side junctions stay side junctions.
    best = std::clamp(best, 1, static_cast<int>(b.points.size()) - 2);
    return best;
}

Vec3 local_tangent(const Branch& b, int idx) {
    int i = std::clamp(idx, 0, static_cast<int>(b.points.size()) - 2);
    return (b.points[i + 1].position - b.points[i].position).normalized();
}

} // namespace

void AnatomyParams::validate() const {
    auto check_tpl = [](const BranchTemplate& t, const char* name) {
        if (!(t.radius_start.lo > 0.0) || !(t.radius_end.lo > 0.0))
            fail(ErrorKind::Parameter, std::string(name) + ": min radius must be > 0");
        if (!(t.length.lo > 5.0))
            fail(ErrorKind::Parameter, std::string(name) + ": length too short");
        if (t.length.hi < t.length.lo || t.radius_start.hi < t.radius_start.lo)
            fail(ErrorKind::Parameter, std::string(name) + ": inverted range");
    };
    check_tpl(femoral, "femoral");
    check_tpl(iliac, "iliac");
    check_tpl(desc_aorta, "desc_aorta");
    check_tpl(arch, "arch");
    check_tpl(bct, "bct");
    check_tpl(rcca, "rcca");
    check_tpl(rica, "rica");
    check_tpl(lcca, "lcca");
    check_tpl(lica, "lica");
    check_tpl(lsa, "lsa");
    if (arch_type1_probability < 0.0 || arch_type1_probability > 1.0)
        fail(ErrorKind::Parameter, "arch_type1_probability outside [0, 1]");
    if (!(point_spacing > 0.0) || point_spacing > 1.0)
        fail(ErrorKind::Parameter, "point_spacing must be in (0, 1] mm");
    if (lcca.takeoff_deg.lo < bct.takeoff_deg.hi)
        fail(ErrorKind::Parameter,
             "LCCA takeoff range must lean back against the approach strictly "
             "more than the right-side trunk's");
    if (!(lsa_attach_frac.hi < lcca_attach_frac.lo) ||
        !(lcca_attach_frac.hi < bct_attach_frac.lo) || !(bct_attach_frac.hi < 0.9))
        fail(ErrorKind::Parameter, "arch attachment fractions must be ordered");
}

VascTree generate_body_fragment(const AnatomyParams& params, Rng& rng) {
    VascTree body;
    // Fusion can scale the body up by the worst-case radius mismatch; sample
    // finely enough that the fused tree still meets the point-spacing bound.
    double worst_scale =
        std::max(1.0, params.arch.radius_start.hi / params.desc_aorta.radius_end.lo);
    double sp = params.point_spacing / worst_scale;

    Vec3 insertion{0, 0, 0};
    Vec3 dir_fem = Vec3{0.18 + rng.uniform(-0.05, 0.05), rng.uniform(-0.06, 0.06), 1.0}
                       .normalized();
    Branch fem = make_wiggly_branch(0, BranchLabel::FEMORAL, insertion, dir_fem,
                                    params.femoral.length.draw(rng),
                                    params.femoral.radius_start.draw(rng),
                                    params.femoral.radius_end.draw(rng),
                                    params.femoral.wiggle.draw(rng), sp, rng);
    fem.parent = kNoBranch;
    body.branches[0] = fem;
    body.root = 0;

    const Branch& femb = body.branches[0];
    Vec3 il_start = femb.points.back().position;
    Vec3 il_dir = Vec3{-0.10 + rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), 1.0}
                      .normalized();
    Branch il = make_wiggly_branch(1, BranchLabel::ILIAC, il_start, il_dir,
                                   params.iliac.length.draw(rng),
                                   params.iliac.radius_start.draw(rng),
                                   params.iliac.radius_end.draw(rng),
                                   params.iliac.wiggle.draw(rng), sp, rng);
    il.parent = 0;
    il.attachment_index = static_cast<int>(femb.points.size()) - 1;
    body.branches[1] = il;

    const Branch& ilb = body.branches[1];
    Vec3 da_start = ilb.points.back().position;
    Vec3 da_dir = Vec3{rng.uniform(-0.04, 0.04), rng.uniform(-0.04, 0.04), 1.0}
                      .normalized();
    Branch da = make_wiggly_branch(2, BranchLabel::DESC_AORTA, da_start, da_dir,
                                   params.desc_aorta.length.draw(rng),
                                   params.desc_aorta.radius_start.draw(rng),
                                   params.desc_aorta.radius_end.draw(rng),
                                   params.desc_aorta.wiggle.draw(rng), sp, rng);
    da.parent = 1;
    da.attachment_index = static_cast<int>(ilb.points.size()) - 1;
    body.branches[2] = da;

    body.rebuild_geometry();
    return body;
}

VascTree generate_neck_fragment(const AnatomyParams& params, Rng& rng,
                                ArchType arch_type) {
    VascTree neck;
    neck.arch_type = arch_type;
    double sp = params.point_spacing;

    // Arch: a circular arc in (roughly) the coronal plane, from the top of the
    // descending aorta over toward the ascending side, with a little jitter.
    double arch_len = params.arch.length.draw(rng);
    double bend = deg_to_rad(params.arch_bend_deg.draw(rng));
    double R = arch_len / bend;
    Vec3 t0{0, 0, 1};
    Vec3 axis = Vec3{rng.uniform(-0.12, 0.12), 1.0, rng.uniform(-0.12, 0.12)}.normalized();
    Vec3 binormal = axis.cross(t0).normalized();
    int n_ctrl = std::max(6, static_cast<int>(std::lround(arch_len / 12.0)));
    double wig = params.arch.wiggle.draw(rng);
    std::vector<Vec3> ctrl;
    for (int i = 0; i < n_ctrl; ++i) {
        double phi = bend * i / (n_ctrl - 1);
        Vec3 p = t0 * (R * std::sin(phi)) + binormal * (R * (1.0 - std::cos(phi)));
        if (i >= 2 && i + 1 < n_ctrl)
            p += axis * rng.uniform(-wig, wig);
        ctrl.push_back(p);
    }
    Branch arch;
    arch.id = 0;
    arch.label = BranchLabel::ARCH;
    arch.parent = kNoBranch;
    for (const Vec3& p : spline_resample(ctrl, sp)) arch.points.push_back({p, 1.0});
    assign_radii(arch, params.arch.radius_start.draw(rng), params.arch.radius_end.draw(rng));
    neck.branches[0] = arch;
    neck.root = 0;

    const Branch& archb = neck.branches[0];
    double arch_total = 0.0;
    for (std::size_t i = 1; i < archb.points.size(); ++i)
        arch_total += (archb.points[i].position - archb.points[i - 1].position).norm();

    // Great-vessel origins, ordered as encountered when coming over from the
    // descending side: LSA first, then LCCA, then BCT.
    double s_lsa = arch_total * params.lsa_attach_frac.draw(rng);
    double s_bct = arch_total * params.bct_attach_frac.draw(rng);
    double s_lcca = arch_total * params.lcca_attach_frac.draw(rng);
    if (arch_type == ArchType::TypeII) {
        // Type-II: the LCCA origin shares a displaced origin region with the BCT.
        s_lcca = s_bct - params.type2_origin_gap_mm.draw(rng);
    }

    auto add_side_branch = [&](BranchId id, BranchLabel label, const BranchTemplate& tpl,
                               BranchId parent_id, double attach_s) {
        const Branch& parent = neck.branches[parent_id];
        int idx = nearest_point_index(parent, attach_s);
        Vec3 start = parent.points[idx].position;
        Vec3 pt = local_tangent(parent, idx);
        Vec3 dir = dir_from_takeoff(pt, tpl.takeoff_deg.draw(rng), tpl.roll_deg.draw(rng));
        Branch b = make_wiggly_branch(id, label, start, dir, tpl.length.draw(rng),
                                      tpl.radius_start.draw(rng), tpl.radius_end.draw(rng),
                                      tpl.wiggle.draw(rng), sp, rng);
        b.parent = parent_id;
        b.attachment_index = idx;
        neck.branches[id] = b;
    };
    auto add_chain_branch = [&](BranchId id, BranchLabel label, const BranchTemplate& tpl,
                                BranchId parent_id) {
        const Branch& parent = neck.branches[parent_id];
        int idx = static_cast<int>(parent.points.size()) - 1;
        Vec3 start = parent.points.back().position;
        Vec3 pt = local_tangent(parent, idx - 1);
        Vec3 dir = dir_from_takeoff(pt, tpl.takeoff_deg.draw(rng), tpl.roll_deg.draw(rng));
        Branch b = make_wiggly_branch(id, label, start, dir, tpl.length.draw(rng),
                                      tpl.radius_start.draw(rng), tpl.radius_end.draw(rng),
                                      tpl.wiggle.draw(rng), sp, rng);
        b.parent = parent_id;
        b.attachment_index = idx;
        neck.branches[id] = b;
    };

    add_side_branch(1, BranchLabel::BCT, params.bct, 0, s_bct);
    add_chain_branch(2, BranchLabel::RCCA, params.rcca, 1);
    add_chain_branch(3, BranchLabel::RICA, params.rica, 2);
    add_side_branch(4, BranchLabel::LCCA, params.lcca, 0, s_lcca);
    add_chain_branch(5, BranchLabel::LICA, params.lica, 4);
    add_side_branch(6, BranchLabel::LSA, params.lsa, 0, s_lsa);

    neck.rebuild_geometry();
    return neck;
}

VascTree generate_synthetic(const AnatomyParams& params, std::uint64_t seed) {
    params.validate();
    Rng root(seed);
    ArchType at = root.uniform() < params.arch_type1_probability ? ArchType::TypeI
                                                                 : ArchType::TypeII;
    Rng neck_rng = root.split("neck");
    Rng body_rng = root.split("body");
    VascTree neck = generate_neck_fragment(params, neck_rng, at);
    VascTree body = generate_body_fragment(params, body_rng);
    VascTree tree = fuse(neck, body);
    tree.arch_type = at;
    tree.check_valid();
    return tree;
}

} // namespace vn
