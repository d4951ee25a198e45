#include "vesselnav/guidesim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace vn {

namespace {

double clampd(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

int last_index(const Branch& b) { return static_cast<int>(b.points.size()) - 1; }

/// Roll orientation of a child's ostium around the parent tangent, degrees in
/// [0, 360). This is what the wire's proximal twist has to match to slip in.
double ostium_roll(const Branch& parent, const Branch& child) {
    Vec3 t = parent.tangent_at(parent.cum_s[child.attachment_index]);
    Vec3 n1, n2;
    perp_frame(t, n1, n2);
    Vec3 d = child.points.size() >= 2
                 ? child.points[1].position - child.points[0].position
                 : t;
    Vec3 perp = d - t * d.dot(t);
    if (perp.norm() < 1e-12) return 0.0;
    return wrap_deg(rad_to_deg(std::atan2(perp.dot(n2), perp.dot(n1))));
}

double entry_probability(const SimConfig& cfg, double misalign_deg, bool supported,
                         double takeoff_deg) {
    double x = misalign_deg / cfg.misalignment_sigma_deg;
    double gain = cfg.misalignment_floor +
                  (1.0 - cfg.misalignment_floor) * std::exp(-x * x);
    double support = supported ? 1.0 : cfg.unsupported_factor;
    double takeoff = clampd(takeoff_deg / cfg.takeoff_ref_deg, cfg.takeoff_floor, 1.0);
    return clampd(cfg.aligned_entry_probability * gain * support * takeoff, 0.0, 1.0);
}

} // namespace

ActionCommand::ActionCommand(double wr, double wt, double cr, double ct)
    : wire_rot_speed(clampd(wr, -kMaxRotateDegPerS, kMaxRotateDegPerS)),
      wire_trans_speed(clampd(wt, -kMaxTranslateMmPerS, kMaxTranslateMmPerS)),
      cath_rot_speed(clampd(cr, -kMaxRotateDegPerS, kMaxRotateDegPerS)),
      cath_trans_speed(clampd(ct, -kMaxTranslateMmPerS, kMaxTranslateMmPerS)) {}

ActionCommand ActionCommand::from_normalized(const std::array<double, 4>& a) {
    auto n = [](double v) { return clampd(v, -1.0, 1.0); };
    return ActionCommand(n(a[0]) * kMaxRotateDegPerS, n(a[1]) * kMaxTranslateMmPerS,
                         n(a[2]) * kMaxRotateDegPerS, n(a[3]) * kMaxTranslateMmPerS);
}

std::array<double, 4> ActionCommand::to_normalized() const {
    return {wire_rot_speed / kMaxRotateDegPerS, wire_trans_speed / kMaxTranslateMmPerS,
            cath_rot_speed / kMaxRotateDegPerS, cath_trans_speed / kMaxTranslateMmPerS};
}

Vec2 project(const Vec3& v, int drop_axis) {
    switch (drop_axis) {
        case 0: return {v.y, v.z};
        case 2: return {v.x, v.y};
        default: return {v.x, v.z};
    }
}

ArcPosition position_at_depth(const VascTree& tree, const ArcPosition& tip,
                              double depth) {
    tree.validate_position(tip);
    double tip_depth = tree.depth_from_root(tip);
    depth = clampd(depth, 0.0, tip_depth);
    BranchId b = tip.branch;
    while (true) {
        double start_d = tree.depth_from_root({b, 0.0});
        if (depth >= start_d - 1e-9) {
            const Branch& br = tree.branch(b);
            return {b, clampd(depth - start_d, 0.0, br.total_length())};
        }
        BranchId parent = tree.branch(b).parent;
        if (parent == kNoBranch)
            return {b, 0.0};  // unreachable for consistent states
        b = parent;
    }
}

TipPointSet tip_points(const VascTree& tree, const SimConfig& config,
                       const DeviceState& state) {
    TipPointSet out;
    for (int i = 0; i < 3; ++i) {
        double depth = std::max(0.0, state.inserted_wire - i * config.tip_point_spacing_mm);
        ArcPosition p = position_at_depth(tree, state.wire_tip, depth);
        out[i] = project(tree.position_of(p), config.drop_axis);
    }
    return out;
}

DeviceState initial_state(const VascTree& tree, const SimConfig& config,
                          const ArcPosition& wire_tip, double inserted_catheter) {
    tree.validate_position(wire_tip);
    DeviceState s;
    s.wire_tip = wire_tip;
    s.inserted_wire = tree.depth_from_root(wire_tip);
    s.inserted_catheter = clampd(inserted_catheter, 0.0, s.inserted_wire);
    s.catheter_tip = position_at_depth(tree, wire_tip, s.inserted_catheter);
    s.position_history.push_back(tip_points(tree, config, s));
    return s;
}

DeviceState step(const VascTree& tree, const SimConfig& config,
                 const DeviceState& state, const ActionCommand& action, double dt,
                 Rng& rng, StepEvents* events) {
    if (!(dt > 0.0)) fail(ErrorKind::Parameter, "dt must be positive");
    tree.validate_position(state.wire_tip);

    StepEvents ev;
    DeviceState ns = state;
    ns.stalled = false;

    TipPointSet before = tip_points(tree, config, state);

    double cath_rot = config.freeze_catheter ? 0.0 : action.cath_rot_speed;
    double cath_trans = config.freeze_catheter ? 0.0 : action.cath_trans_speed;
    ns.wire_rotation = wrap_deg(ns.wire_rotation + action.wire_rot_speed * dt);
    ns.catheter_rotation = wrap_deg(ns.catheter_rotation + cath_rot * dt);

    const double eps = 1e-9;
    double motion = action.wire_trans_speed * dt;

    if (motion > eps) {
        double remaining = motion;
        while (remaining > eps && !ns.stalled) {
            const Branch& b = tree.branch(ns.wire_tip.branch);
            double len = b.total_length();

            // Nearest side attachment strictly ahead of the tip.
            double next_s = std::numeric_limits<double>::infinity();
            BranchId next_child = kNoBranch;
            for (const auto& [cid, c] : tree.branches) {
                if (c.parent != b.id || c.attachment_index >= last_index(b)) continue;
                double as = b.cum_s[c.attachment_index];
                if (as > ns.wire_tip.s + eps && as < next_s) {
                    next_s = as;
                    next_child = cid;
                }
            }

            double reach = ns.wire_tip.s + remaining;
            if (next_child != kNoBranch && next_s <= reach) {
                remaining -= next_s - ns.wire_tip.s;
                ns.wire_tip.s = next_s;
                const Branch& child = tree.branch(next_child);
                double miss = angle_diff_deg(ns.wire_rotation, ostium_roll(b, child));
                double junction_depth = tree.depth_from_root(ns.wire_tip);
                bool supported =
                    junction_depth - ns.inserted_catheter <= config.support_range_mm;
                double p = entry_probability(config, miss, supported, child.takeoff_angle);
                if (rng.uniform() < p) {
                    ns.wire_tip = {next_child, 0.0};
                    ev.entered = next_child;
                } else if (miss > config.buckle_deg && !supported) {
                    // The off-axis, unsupported tip catches on the ostium lip
                    // and buckles instead of sliding past.
                    ns.stalled = true;
                } else {
                    ++ev.junctions_passed;
                }
            } else if (reach >= len - eps) {
                remaining -= len - ns.wire_tip.s;
                ns.wire_tip.s = len;
                // Continuation at the branch end: follow the chain child; with
                // several candidates take the best roll match (stable on ties).
                BranchId cont = kNoBranch;
                double best = std::numeric_limits<double>::infinity();
                for (const auto& [cid, c] : tree.branches) {
                    if (c.parent != b.id || c.attachment_index < last_index(b)) continue;
                    double miss = angle_diff_deg(ns.wire_rotation, ostium_roll(b, c));
                    if (miss < best - 1e-12) {
                        best = miss;
                        cont = cid;
                    }
                }
                if (cont == kNoBranch) {
                    ns.stalled = true;  // dead end: pushing gains nothing
                } else {
                    ns.wire_tip = {cont, 0.0};
                }
            } else {
                ns.wire_tip.s = reach;
                remaining = 0.0;
            }
        }
    } else if (motion < -eps) {
        double r = -motion;
        while (r > eps) {
            if (ns.wire_tip.s >= r) {
                ns.wire_tip.s -= r;
                r = 0.0;
            } else {
                const Branch& b = tree.branch(ns.wire_tip.branch);
                r -= ns.wire_tip.s;
                if (b.parent == kNoBranch) {
                    ns.wire_tip.s = 0.0;  // held at the introducer
                    r = 0.0;
                } else {
                    ns.wire_tip = {b.parent, tree.branch(b.parent).cum_s[b.attachment_index]};
                }
            }
        }
    }

    ns.inserted_wire = tree.depth_from_root(ns.wire_tip);
    ns.inserted_catheter =
        clampd(ns.inserted_catheter + cath_trans * dt, 0.0, ns.inserted_wire);
    ns.catheter_tip = position_at_depth(tree, ns.wire_tip, ns.inserted_catheter);

    ns.position_history.push_back(before);
    int keep = std::max(1, config.history_length);
    if (static_cast<int>(ns.position_history.size()) > keep)
        ns.position_history.erase(ns.position_history.begin(),
                                  ns.position_history.end() - keep);

    ev.stalled = ns.stalled;
    if (events) *events = ev;
    return ns;
}

Observation observe(const VascTree& tree, const SimConfig& config,
                    const DeviceState& state, const ArcPosition& target,
                    const ActionCommand& prev_action) {
    tree.validate_position(target);

    Vec3 lo3, hi3;
    tree.bounding_box(lo3, hi3);
    Vec2 lo = project(lo3, config.drop_axis);
    Vec2 hi = project(hi3, config.drop_axis);
    lo.x -= config.workspace_margin_mm;
    lo.y -= config.workspace_margin_mm;
    hi.x += config.workspace_margin_mm;
    hi.y += config.workspace_margin_mm;
    auto norm = [&](const Vec2& v) -> Vec2 {
        return {2.0 * (v.x - lo.x) / (hi.x - lo.x) - 1.0,
                2.0 * (v.y - lo.y) / (hi.y - lo.y) - 1.0};
    };

    Observation obs;
    TipPointSet now = tip_points(tree, config, state);
    TipPointSet prev = state.position_history.empty() ? now
                                                      : state.position_history.back();
    for (int i = 0; i < 3; ++i) {
        obs.tip_points[i] = norm(now[i]);
        obs.prev_tip_points[i] = norm(prev[i]);
    }
    obs.target = norm(project(tree.position_of(target), config.drop_axis));
    obs.prev_action = prev_action;
    return obs;
}

std::array<double, Observation::kDim> Observation::to_vector() const {
    std::array<double, kDim> v{};
    int k = 0;
    for (int i = 0; i < 3; ++i) {
        v[k++] = tip_points[i].x;
        v[k++] = tip_points[i].y;
    }
    for (int i = 0; i < 3; ++i) {
        v[k++] = prev_tip_points[i].x;
        v[k++] = prev_tip_points[i].y;
    }
    v[k++] = target.x;
    v[k++] = target.y;
    auto a = prev_action.to_normalized();
    for (int i = 0; i < 4; ++i) v[k++] = a[i];
    return v;
}

} // namespace vn
