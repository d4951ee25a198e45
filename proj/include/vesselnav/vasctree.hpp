#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vesselnav/error.hpp"
#include "vesselnav/geom.hpp"
#include "vesselnav/rng.hpp"

namespace vn {

/// Anatomical branch labels. FEMORAL is always the root (insertion side);
/// the two carotid chains hang off the arch, the right one via the
/// brachiocephalic trunk.
enum class BranchLabel {
    FEMORAL,
    ILIAC,
    DESC_AORTA,
    ARCH,
    BCT,
    RCCA,
    RICA,
    LCCA,
    LICA,
    LSA,
};

constexpr int kNumBranchLabels = 10;

const char* to_string(BranchLabel label);
std::optional<BranchLabel> branch_label_from_string(const std::string& s);

enum class ArchType { TypeI, TypeII };

const char* to_string(ArchType t);

using BranchId = int;
constexpr BranchId kNoBranch = -1;

struct CenterlinePoint {
    Vec3 position;  // mm
    double radius = 0.0;  // mm
};

/// One vessel segment: an ordered polyline of centerline points with radii.
/// Arc length is the cumulative chord length of the polyline; the polyline is
/// the geometry, not an approximation of something else.
struct Branch {
    BranchId id = kNoBranch;
    BranchLabel label = BranchLabel::FEMORAL;
    std::vector<CenterlinePoint> points;
    BranchId parent = kNoBranch;
    int attachment_index = -1;   // point index in the parent branch
    double takeoff_angle = 0.0;  // degrees between initial tangent and parent tangent

    // Derived, rebuilt by VascTree::rebuild_geometry().
    std::vector<double> cum_s;

    double total_length() const { return cum_s.empty() ? 0.0 : cum_s.back(); }

    Vec3 position_at(double s) const;
    double radius_at(double s) const;
    /// Unit tangent of the polyline at arc position s.
    Vec3 tangent_at(double s) const;
};

/// On-tree coordinate: a branch plus an arc length from that branch's start.
struct ArcPosition {
    BranchId branch = kNoBranch;
    double s = 0.0;  // mm

    bool operator==(const ArcPosition& o) const {
        return branch == o.branch && s == o.s;
    }
};

struct TargetSet {
    BranchId branch = kNoBranch;
    std::vector<ArcPosition> train;  // 10 positions
    std::vector<ArcPosition> eval;   // 10 positions
};

/// Directed centerline tree. Branch ids are stable across save/load.
class VascTree {
public:
    std::map<BranchId, Branch> branches;
    BranchId root = kNoBranch;
    ArchType arch_type = ArchType::TypeI;

    const Branch& branch(BranchId id) const;
    Branch& branch(BranchId id);
    const Branch& branch(BranchLabel label) const;
    BranchId id_of(BranchLabel label) const;
    bool has_label(BranchLabel label) const;

    /// Recompute cumulative arc lengths, takeoff angles and the pathlength
    /// acceleration structure. Must be called after any geometry edit; all
    /// factory functions below do so before returning.
    void rebuild_geometry();

    /// Validate the structural invariants (connectivity, acyclicity, label
    /// chains, monotone arc length). Throws Error(Geometry) on violation.
    void check_valid() const;

    Vec3 position_of(const ArcPosition& p) const;
    double radius_of(const ArcPosition& p) const;
    Vec3 tangent_of(const ArcPosition& p) const;

    /// Arc distance from the insertion point (root branch start) to p.
    double depth_from_root(const ArcPosition& p) const;

    /// Axis-aligned bounding box over all centerline points.
    void bounding_box(Vec3& lo, Vec3& hi) const;

    void validate_position(const ArcPosition& p) const;

private:
    // depth_from_root of each branch's first point; rebuilt with geometry.
    std::map<BranchId, double> branch_start_depth_;
    std::map<BranchId, int> branch_depth_;  // hops from root

    friend double pathlength(const VascTree&, const ArcPosition&, const ArcPosition&);
};

/// Distance along centerlines between two on-tree positions (the unique tree
/// path). Symmetric, non-negative, and exact for the polyline geometry.
double pathlength(const VascTree& tree, const ArcPosition& a, const ArcPosition& b);

/// Arc/chord ratio of the tree path between two distinct positions.
double tortuosity(const VascTree& tree, const ArcPosition& a, const ArcPosition& b);

/// Uniform scaling of `body` so its DESC_AORTA top radius matches `neck`'s
/// ARCH inlet radius, then grafting of the neck onto the body top. The body
/// keeps its frame; the neck is carried to the junction.
VascTree fuse(const VascTree& neck, const VascTree& body);

/// Rigid rotation about the centroid followed by anisotropic height/width
/// scaling (height = z, width = x and y). Radii scale with the width factor.
VascTree augment(const VascTree& tree, const Vec3& rotation_deg, double scale_h,
                 double scale_w);

struct AugmentRanges {
    double max_rotation_deg = 10.0;
    double min_scale = 0.7;
    double max_scale = 1.3;
};

/// Draw rotation/scale factors from the configured ranges and apply augment().
VascTree augment_random(const VascTree& tree, const AugmentRanges& ranges,
                        std::uint64_t seed);

/// 20 positions spread over a branch, split 10 train / 10 eval by a seeded
/// shuffle. Identical seed reproduces the identical split.
TargetSet sample_targets(const VascTree& tree, BranchId branch, std::uint64_t seed,
                         double min_spacing_mm = 1.0);

// --- serialization -------------------------------------------------------
//
// Line-based text format:
//   vasctree v1 arch=<TypeI|TypeII>
//   branch <id> <label> <parent-id> <attachment-index> <n-points>
//   <x> <y> <z> <r>           (n-points lines, 6 decimal places, mm)
// Parent id -1 marks the root. Save -> load -> save is byte identical.

void save_tree(const VascTree& tree, const std::string& path);
std::string tree_to_string(const VascTree& tree);
VascTree load_tree(const std::string& path);
VascTree tree_from_string(const std::string& text);

} // namespace vn
