#pragma once

#include <array>
#include <vector>

#include "vesselnav/vasctree.hpp"

namespace vn {

// Quasi-static kinematics of a guidewire sliding inside a guide catheter on
// the centerline tree. The wire tip walks the tree; the catheter rides the
// wire as a rail and can never overtake the tip. Branch selection at side
// junctions is stochastic, gated by roll alignment, catheter support and the
// branch takeoff angle.

constexpr double kMaxRotateDegPerS = 180.0;
constexpr double kMaxTranslateMmPerS = 40.0;

/// Four-channel speed command. Components are clamped to the device limits on
/// construction, so a command is always valid.
struct ActionCommand {
    double wire_rot_speed = 0.0;    // deg/s in [-180, 180]
    double wire_trans_speed = 0.0;  // mm/s in [-40, 40]
    double cath_rot_speed = 0.0;    // deg/s in [-180, 180]
    double cath_trans_speed = 0.0;  // mm/s in [-40, 40]

    ActionCommand() = default;
    ActionCommand(double wr, double wt, double cr, double ct);

    /// Map a vector with components in [-1, 1] to physical speeds.
    static ActionCommand from_normalized(const std::array<double, 4>& a);
    std::array<double, 4> to_normalized() const;
};

using TipPointSet = std::array<Vec2, 3>;  // projected, mm; index 0 is the tip

struct DeviceState {
    ArcPosition wire_tip;
    double wire_rotation = 0.0;  // proximal twist, degrees in [0, 360)
    ArcPosition catheter_tip;
    double catheter_rotation = 0.0;
    double inserted_wire = 0.0;      // mm of wire past the insertion point
    double inserted_catheter = 0.0;  // mm of catheter past the insertion point
    bool stalled = false;            // set when a commanded advance went nowhere
    std::vector<TipPointSet> position_history;  // most recent last
};

struct SimConfig {
    // Side-junction entry law. With perfect alignment, catheter support and a
    // takeoff at or beyond takeoff_ref_deg, the entry probability is exactly
    // aligned_entry_probability.
    double aligned_entry_probability = 0.8;
    double misalignment_floor = 0.30;   // entry-gain floor at 180 deg off
    double misalignment_sigma_deg = 75.0;
    double unsupported_factor = 0.55;   // entry multiplier without the catheter
    double takeoff_ref_deg = 75.0;      // takeoffs at/above this are "easy"
    double takeoff_floor = 0.45;        // entry multiplier floor for acute takeoffs
    double buckle_deg = 135.0;          // unsupported + this misaligned = buckle
    double support_range_mm = 25.0;     // catheter-to-junction distance that counts
    bool freeze_catheter = false;       // ignore catheter channels if set
    int drop_axis = 1;                  // projection removes this axis (0=x,1=y,2=z)
    double workspace_margin_mm = 10.0;  // padding of the normalization box
    int history_length = 2;             // tip point sets kept on the state
    double tip_point_spacing_mm = 2.0;  // arc gap between observed tip points
};

/// Per-step event record, for logs and tests.
struct StepEvents {
    bool stalled = false;
    BranchId entered = kNoBranch;  // side branch the tip switched into
    int junctions_passed = 0;      // side attachments crossed without entering
};

/// Orthographic projection dropping one axis (default: the anteroposterior
/// axis, i.e. a coronal view).
Vec2 project(const Vec3& v, int drop_axis = 1);

/// State with the wire tip placed at `wire_tip` and the catheter
/// `inserted_catheter` mm in (clamped behind the tip), history seeded with the
/// current tip points.
DeviceState initial_state(const VascTree& tree, const SimConfig& config,
                          const ArcPosition& wire_tip, double inserted_catheter = 0.0);

/// On-tree position at arc depth `depth` measured from the insertion point
/// along the unique path to `tip` (clamped to [0, depth of tip]).
ArcPosition position_at_depth(const VascTree& tree, const ArcPosition& tip,
                              double depth);

/// Projected tip point set for the current wire: arc offsets 0, 2 and 4 mm
/// behind the tip (clamped at the insertion point), in mm.
TipPointSet tip_points(const VascTree& tree, const SimConfig& config,
                       const DeviceState& state);

/// Advance the state by one control period. Pure: identical inputs and RNG
/// stream position give the identical result. Never throws for valid states;
/// impossible advances become zero motion with the stall flag set.
DeviceState step(const VascTree& tree, const SimConfig& config,
                 const DeviceState& state, const ActionCommand& action, double dt,
                 Rng& rng, StepEvents* events = nullptr);

/// Observation: current and previous projected tip points, the projected
/// target and the previous action, all position channels normalized to
/// [-1, 1] by the padded workspace box.
struct Observation {
    TipPointSet tip_points;       // normalized
    TipPointSet prev_tip_points;  // normalized
    Vec2 target;                  // normalized
    ActionCommand prev_action;    // physical units

    static constexpr int kDim = 18;
    /// Flat encoding; the action block is normalized by the speed limits.
    std::array<double, kDim> to_vector() const;
};

Observation observe(const VascTree& tree, const SimConfig& config,
                    const DeviceState& state, const ArcPosition& target,
                    const ActionCommand& prev_action);

} // namespace vn
