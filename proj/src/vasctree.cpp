#include "vesselnav/vasctree.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace vn {

namespace {

const char* kLabelNames[kNumBranchLabels] = {
    "FEMORAL", "ILIAC", "DESC_AORTA", "ARCH", "BCT",
    "RCCA",    "RICA",  "LCCA",       "LICA", "LSA",
};

int label_index(BranchLabel l) { return static_cast<int>(l); }

} // namespace

const char* to_string(BranchLabel label) { return kLabelNames[label_index(label)]; }

std::optional<BranchLabel> branch_label_from_string(const std::string& s) {
    for (int i = 0; i < kNumBranchLabels; ++i) {
        if (s == kLabelNames[i]) return static_cast<BranchLabel>(i);
    }
    return std::nullopt;
}

const char* to_string(ArchType t) { return t == ArchType::TypeI ? "TypeI" : "TypeII"; }

// --- Branch ---------------------------------------------------------------

Vec3 Branch::position_at(double s) const {
    if (points.size() < 2 || cum_s.empty()) fail(ErrorKind::Geometry, "branch has no geometry");
    if (s <= 0.0) return points.front().position;
    if (s >= cum_s.back()) return points.back().position;
    auto it = std::upper_bound(cum_s.begin(), cum_s.end(), s);
    std::size_t i = static_cast<std::size_t>(it - cum_s.begin()) - 1;
    double seg = cum_s[i + 1] - cum_s[i];
    double t = seg > 0.0 ? (s - cum_s[i]) / seg : 0.0;
    return points[i].position + (points[i + 1].position - points[i].position) * t;
}

double Branch::radius_at(double s) const {
    if (points.size() < 2 || cum_s.empty()) fail(ErrorKind::Geometry, "branch has no geometry");
    if (s <= 0.0) return points.front().radius;
    if (s >= cum_s.back()) return points.back().radius;
    auto it = std::upper_bound(cum_s.begin(), cum_s.end(), s);
    std::size_t i = static_cast<std::size_t>(it - cum_s.begin()) - 1;
    double seg = cum_s[i + 1] - cum_s[i];
    double t = seg > 0.0 ? (s - cum_s[i]) / seg : 0.0;
    return points[i].radius + (points[i + 1].radius - points[i].radius) * t;
}

Vec3 Branch::tangent_at(double s) const {
    if (points.size() < 2 || cum_s.empty()) fail(ErrorKind::Geometry, "branch has no geometry");
    double L = cum_s.back();
    if (s < 0.0) s = 0.0;
    if (s > L) s = L;
    auto it = std::upper_bound(cum_s.begin(), cum_s.end(), std::min(s, L - 1e-12));
    std::size_t i = it == cum_s.begin() ? 0 : static_cast<std::size_t>(it - cum_s.begin()) - 1;
    if (i + 1 >= points.size()) i = points.size() - 2;
    return (points[i + 1].position - points[i].position).normalized();
}

// --- VascTree -------------------------------------------------------------

const Branch& VascTree::branch(BranchId id) const {
    auto it = branches.find(id);
    if (it == branches.end()) fail(ErrorKind::Geometry, "unknown branch id");
    return it->second;
}

Branch& VascTree::branch(BranchId id) {
    auto it = branches.find(id);
    if (it == branches.end()) fail(ErrorKind::Geometry, "unknown branch id");
    return it->second;
}

BranchId VascTree::id_of(BranchLabel label) const {
    for (const auto& [id, b] : branches) {
        if (b.label == label) return id;
    }
    fail(ErrorKind::Geometry, std::string("no branch labeled ") + to_string(label));
}

const Branch& VascTree::branch(BranchLabel label) const { return branch(id_of(label)); }

bool VascTree::has_label(BranchLabel label) const {
    for (const auto& [id, b] : branches) {
        if (b.label == label) return true;
    }
    return false;
}

void VascTree::rebuild_geometry() {
    for (auto& [id, b] : branches) {
        b.cum_s.resize(b.points.size());
        double acc = 0.0;
        if (!b.points.empty()) b.cum_s[0] = 0.0;
        for (std::size_t i = 1; i < b.points.size(); ++i) {
            acc += (b.points[i].position - b.points[i - 1].position).norm();
            b.cum_s[i] = acc;
        }
    }
    // Takeoff angles are derived from geometry so they survive augmentation.
    for (auto& [id, b] : branches) {
        if (b.parent == kNoBranch) {
            b.takeoff_angle = 0.0;
            continue;
        }
        const Branch& p = branch(b.parent);
        if (b.attachment_index < 0 ||
            b.attachment_index >= static_cast<int>(p.points.size()))
            fail(ErrorKind::Geometry, "attachment index out of range");
        Vec3 pt = p.tangent_at(p.cum_s[b.attachment_index]);
        Vec3 ct = b.points.size() >= 2
                      ? (b.points[1].position - b.points[0].position).normalized()
                      : pt;
        b.takeoff_angle = angle_between_deg(pt, ct);
    }
    // Distance from the root start to each branch's first point.
    branch_start_depth_.clear();
    branch_depth_.clear();
    if (root == kNoBranch) return;
    // Iterate until all reachable branches have depths (tree is small).
    branch_start_depth_[root] = 0.0;
    branch_depth_[root] = 0;
    bool progress = true;
    while (progress) {
        progress = false;
        for (const auto& [id, b] : branches) {
            if (branch_start_depth_.count(id) || b.parent == kNoBranch) continue;
            auto it = branch_start_depth_.find(b.parent);
            if (it == branch_start_depth_.end()) continue;
            const Branch& p = branch(b.parent);
            branch_start_depth_[id] = it->second + p.cum_s[b.attachment_index];
            branch_depth_[id] = branch_depth_[b.parent] + 1;
            progress = true;
        }
    }
}

void VascTree::check_valid() const {
    if (branches.empty()) fail(ErrorKind::Geometry, "empty tree");
    if (!branches.count(root)) fail(ErrorKind::Geometry, "root branch missing");
    int roots = 0;
    for (const auto& [id, b] : branches) {
        if (b.id != id) fail(ErrorKind::Geometry, "branch id mismatch");
        if (b.points.size() < 2) fail(ErrorKind::Geometry, "branch with < 2 points");
        for (const auto& p : b.points) {
            if (!(p.radius > 0.0)) fail(ErrorKind::Geometry, "non-positive radius");
            if (!std::isfinite(p.position.x) || !std::isfinite(p.position.y) ||
                !std::isfinite(p.position.z))
                fail(ErrorKind::Geometry, "non-finite point");
        }
        for (std::size_t i = 1; i < b.cum_s.size(); ++i) {
            if (!(b.cum_s[i] > b.cum_s[i - 1]))
                fail(ErrorKind::Geometry, "arc length not strictly increasing");
        }
        if (b.parent == kNoBranch) {
            ++roots;
        } else {
            if (!branches.count(b.parent)) fail(ErrorKind::Geometry, "dangling parent id");
            if (!branch_depth_.count(id))
                fail(ErrorKind::Geometry, "branch not connected to root");
        }
        if (b.takeoff_angle < 0.0 || b.takeoff_angle > 180.0)
            fail(ErrorKind::Geometry, "takeoff angle out of [0, 180]");
    }
    if (roots != 1) fail(ErrorKind::Geometry, "tree must have exactly one root");
    if (branch(root).label != BranchLabel::FEMORAL && branches.size() >= 10)
        fail(ErrorKind::Geometry, "full tree must be rooted at FEMORAL");
    // Carotid chains, when all labels are present.
    if (branches.size() >= 10) {
        auto parent_label = [&](BranchLabel l) {
            const Branch& b = branch(l);
            return b.parent == kNoBranch ? l : branch(b.parent).label;
        };
        if (parent_label(BranchLabel::RICA) != BranchLabel::RCCA ||
            parent_label(BranchLabel::RCCA) != BranchLabel::BCT ||
            parent_label(BranchLabel::BCT) != BranchLabel::ARCH ||
            parent_label(BranchLabel::LICA) != BranchLabel::LCCA ||
            parent_label(BranchLabel::LCCA) != BranchLabel::ARCH ||
            parent_label(BranchLabel::LSA) != BranchLabel::ARCH)
            fail(ErrorKind::Geometry, "carotid chain labels are wrong");
    }
}

void VascTree::validate_position(const ArcPosition& p) const {
    auto it = branches.find(p.branch);
    if (it == branches.end()) fail(ErrorKind::Geometry, "position on unknown branch");
    if (!(p.s >= -1e-9) || !(p.s <= it->second.total_length() + 1e-9))
        fail(ErrorKind::Geometry, "arc position outside branch");
}

Vec3 VascTree::position_of(const ArcPosition& p) const {
    validate_position(p);
    return branch(p.branch).position_at(p.s);
}

double VascTree::radius_of(const ArcPosition& p) const {
    validate_position(p);
    return branch(p.branch).radius_at(p.s);
}

Vec3 VascTree::tangent_of(const ArcPosition& p) const {
    validate_position(p);
    return branch(p.branch).tangent_at(p.s);
}

double VascTree::depth_from_root(const ArcPosition& p) const {
    validate_position(p);
    auto it = branch_start_depth_.find(p.branch);
    if (it == branch_start_depth_.end())
        fail(ErrorKind::Geometry, "branch not connected to root");
    return it->second + p.s;
}

void VascTree::bounding_box(Vec3& lo, Vec3& hi) const {
    bool first = true;
    for (const auto& [id, b] : branches) {
        for (const auto& p : b.points) {
            if (first) {
                lo = hi = p.position;
                first = false;
            } else {
                lo.x = std::min(lo.x, p.position.x);
                lo.y = std::min(lo.y, p.position.y);
                lo.z = std::min(lo.z, p.position.z);
                hi.x = std::max(hi.x, p.position.x);
                hi.y = std::max(hi.y, p.position.y);
                hi.z = std::max(hi.z, p.position.z);
            }
        }
    }
    if (first) fail(ErrorKind::Geometry, "empty tree");
}

// --- pathlength -----------------------------------------------------------

double pathlength(const VascTree& tree, const ArcPosition& a, const ArcPosition& b) {
    tree.validate_position(a);
    tree.validate_position(b);
    if (a.branch == b.branch) return std::fabs(a.s - b.s);

    // Climb the deeper position toward the root until both sit on the same
    // branch; accumulate the arc walked. The meeting point is then on one
    // branch and the remainder is a plain arc difference.
    ArcPosition pa = a, pb = b;
    double acc = 0.0;
    auto depth = [&](BranchId id) { return tree.branch_depth_.at(id); };
    while (pa.branch != pb.branch) {
        if (depth(pa.branch) >= depth(pb.branch)) {
            const Branch& br = tree.branch(pa.branch);
            if (br.parent == kNoBranch) fail(ErrorKind::Geometry, "disconnected positions");
            acc += pa.s;
            pa = {br.parent, tree.branch(br.parent).cum_s[br.attachment_index]};
        } else {
            const Branch& br = tree.branch(pb.branch);
            if (br.parent == kNoBranch) fail(ErrorKind::Geometry, "disconnected positions");
            acc += pb.s;
            pb = {br.parent, tree.branch(br.parent).cum_s[br.attachment_index]};
        }
    }
    return acc + std::fabs(pa.s - pb.s);
}

double tortuosity(const VascTree& tree, const ArcPosition& a, const ArcPosition& b) {
    if (a == b) fail(ErrorKind::Geometry, "tortuosity of coincident endpoints");
    double arc = pathlength(tree, a, b);
    double chord = (tree.position_of(a) - tree.position_of(b)).norm();
    if (chord <= 0.0) fail(ErrorKind::Geometry, "tortuosity with zero chord");
    return arc / chord;
}

// --- fuse -----------------------------------------------------------------

VascTree fuse(const VascTree& neck, const VascTree& body) {
    if (!neck.has_label(BranchLabel::ARCH))
        fail(ErrorKind::Geometry, "neck fragment lacks ARCH");
    if (!body.has_label(BranchLabel::DESC_AORTA))
        fail(ErrorKind::Geometry, "body fragment lacks DESC_AORTA");
    const Branch& arch = neck.branch(BranchLabel::ARCH);
    const Branch& desc = body.branch(BranchLabel::DESC_AORTA);

    double inlet_radius = arch.points.front().radius;
    double top_radius = desc.points.back().radius;
    if (!(inlet_radius > 0.0) || !(top_radius > 0.0))
        fail(ErrorKind::Geometry, "fusion radii must be positive");
    double scale = inlet_radius / top_radius;

    VascTree out;
    out.arch_type = neck.arch_type;

    // Scale the body about the descending-aorta top point so the junction
    // stays put and the body is untouched when the radii already match.
    Vec3 pivot = desc.points.back().position;
    BranchId next_id = 0;
    std::map<BranchId, BranchId> body_map, neck_map;
    for (const auto& [id, b] : body.branches) body_map[id] = next_id++;
    for (const auto& [id, b] : neck.branches) neck_map[id] = next_id++;

    for (const auto& [id, b] : body.branches) {
        Branch nb = b;
        nb.id = body_map[id];
        nb.parent = b.parent == kNoBranch ? kNoBranch : body_map[b.parent];
        for (auto& p : nb.points) {
            p.position = pivot + (p.position - pivot) * scale;
            p.radius *= scale;
        }
        out.branches[nb.id] = std::move(nb);
    }
    // Carry the neck so the arch inlet lands exactly on the body top.
    Vec3 shift = pivot - arch.points.front().position;
    for (const auto& [id, b] : neck.branches) {
        Branch nb = b;
        nb.id = neck_map[id];
        nb.parent = b.parent == kNoBranch ? body_map[body.id_of(BranchLabel::DESC_AORTA)]
                                          : neck_map[b.parent];
        if (b.parent == kNoBranch)
            nb.attachment_index = static_cast<int>(desc.points.size()) - 1;
        for (auto& p : nb.points) p.position += shift;
        out.branches[nb.id] = std::move(nb);
    }
    out.root = body_map[body.root];
    out.rebuild_geometry();
    return out;
}

// --- augment --------------------------------------------------------------

VascTree augment(const VascTree& tree, const Vec3& rotation_deg, double scale_h,
                 double scale_w) {
    auto in_range = [](double v, double lo, double hi) { return v >= lo && v <= hi; };
    if (!in_range(rotation_deg.x, -10.0, 10.0) || !in_range(rotation_deg.y, -10.0, 10.0) ||
        !in_range(rotation_deg.z, -10.0, 10.0))
        fail(ErrorKind::Parameter, "rotation outside [-10, 10] degrees");
    if (!in_range(scale_h, 0.7, 1.3) || !in_range(scale_w, 0.7, 1.3))
        fail(ErrorKind::Parameter, "scale outside [0.7, 1.3]");

    Vec3 centroid{0, 0, 0};
    std::size_t n = 0;
    for (const auto& [id, b] : tree.branches) {
        for (const auto& p : b.points) {
            centroid += p.position;
            ++n;
        }
    }
    centroid = centroid / static_cast<double>(n);

    VascTree out = tree;
    for (auto& [id, b] : out.branches) {
        for (auto& p : b.points) {
            Vec3 d = rotate_euler(p.position - centroid, rotation_deg.x, rotation_deg.y,
                                  rotation_deg.z);
            d.x *= scale_w;
            d.y *= scale_w;
            d.z *= scale_h;
            p.position = centroid + d;
            p.radius *= scale_w;
        }
    }
    out.rebuild_geometry();
    return out;
}

VascTree augment_random(const VascTree& tree, const AugmentRanges& ranges,
                        std::uint64_t seed) {
    Rng rng(seed);
    Vec3 rot{rng.uniform(-ranges.max_rotation_deg, ranges.max_rotation_deg),
             rng.uniform(-ranges.max_rotation_deg, ranges.max_rotation_deg),
             rng.uniform(-ranges.max_rotation_deg, ranges.max_rotation_deg)};
    double sh = rng.uniform(ranges.min_scale, ranges.max_scale);
    double sw = rng.uniform(ranges.min_scale, ranges.max_scale);
    return augment(tree, rot, sh, sw);
}

// --- sample_targets -------------------------------------------------------

TargetSet sample_targets(const VascTree& tree, BranchId branch_id, std::uint64_t seed,
                         double min_spacing_mm) {
    const Branch& b = tree.branch(branch_id);
    double L = b.total_length();

    Rng rng(seed);
    // Stratified positions: one per stratum with an interior jitter, so the
    // 20 points are spread over the branch and pairwise distinct. Keeping the
    // jitter at least half the minimum spacing away from the stratum edges
    // guarantees neighbours end up more than min_spacing_mm apart.
    const int n = 20;
    double margin = std::min(2.0, 0.02 * L);
    double span = L - 2.0 * margin;
    if (span < 1.05 * n * min_spacing_mm)
        fail(ErrorKind::Geometry, "branch too short for 20 spaced target points");
    std::vector<ArcPosition> pts;
    pts.reserve(n);
    for (int i = 0; i < n; ++i) {
        double lo = margin + span * i / n;
        double hi = margin + span * (i + 1) / n;
        double pad = std::max(0.1 * (hi - lo), 0.5 * min_spacing_mm);
        pts.push_back({branch_id, rng.uniform(lo + pad, hi - pad)});
    }
    // Seeded shuffle, first half trains.
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    for (int i = n - 1; i > 0; --i) {
        int j = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(i + 1)));
        std::swap(order[i], order[j]);
    }
    TargetSet set;
    set.branch = branch_id;
    for (int i = 0; i < n / 2; ++i) set.train.push_back(pts[order[i]]);
    for (int i = n / 2; i < n; ++i) set.eval.push_back(pts[order[i]]);
    return set;
}

// --- serialization --------------------------------------------------------

std::string tree_to_string(const VascTree& tree) {
    std::string out;
    out.reserve(1 << 16);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "vasctree v1 arch=%s\n", to_string(tree.arch_type));
    out += buf;
    for (const auto& [id, b] : tree.branches) {
        std::snprintf(buf, sizeof(buf), "branch %d %s %d %d %zu\n", id,
                      to_string(b.label), b.parent, b.attachment_index, b.points.size());
        out += buf;
        for (const auto& p : b.points) {
            std::snprintf(buf, sizeof(buf), "%.6f %.6f %.6f %.6f\n", p.position.x,
                          p.position.y, p.position.z, p.radius);
            out += buf;
        }
    }
    return out;
}

void save_tree(const VascTree& tree, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) fail(ErrorKind::Io, "cannot open for writing: " + path);
    f << tree_to_string(tree);
    if (!f) fail(ErrorKind::Io, "write failed: " + path);
}

VascTree tree_from_string(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) fail(ErrorKind::Load, "empty tree file");

    std::istringstream h(line);
    std::string magic, version, archkv;
    h >> magic >> version >> archkv;
    if (magic != "vasctree" || version != "v1" || archkv.rfind("arch=", 0) != 0)
        fail(ErrorKind::Load, "bad tree header: " + line);
    std::string archname = archkv.substr(5);

    VascTree tree;
    if (archname == "TypeI") tree.arch_type = ArchType::TypeI;
    else if (archname == "TypeII") tree.arch_type = ArchType::TypeII;
    else fail(ErrorKind::Load, "unknown arch type: " + archname);

    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream bh(line);
        std::string tag, labelname;
        int id, parent, attach;
        std::size_t npts;
        bh >> tag >> id >> labelname >> parent >> attach >> npts;
        if (tag != "branch" || bh.fail())
            fail(ErrorKind::Load, "bad branch header: " + line);
        auto label = branch_label_from_string(labelname);
        if (!label) fail(ErrorKind::Load, "unknown branch label: " + labelname);
        Branch b;
        b.id = id;
        b.label = *label;
        b.parent = parent;
        b.attachment_index = attach;
        b.points.reserve(npts);
        for (std::size_t i = 0; i < npts; ++i) {
            if (!std::getline(in, line)) fail(ErrorKind::Load, "truncated point list");
            CenterlinePoint p;
            if (std::sscanf(line.c_str(), "%lf %lf %lf %lf", &p.position.x,
                            &p.position.y, &p.position.z, &p.radius) != 4)
                fail(ErrorKind::Load, "bad point line: " + line);
            b.points.push_back(p);
        }
        if (b.parent == kNoBranch) tree.root = b.id;
        tree.branches[b.id] = std::move(b);
    }
    if (tree.branches.empty()) fail(ErrorKind::Load, "tree file has no branches");
    tree.rebuild_geometry();
    return tree;
}

VascTree load_tree(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail(ErrorKind::Load, "cannot open tree file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return tree_from_string(ss.str());
}

} // namespace vn
