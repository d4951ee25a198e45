#pragma once

#include <cstdint>

#include "vesselnav/vasctree.hpp"

namespace vn {

struct Range {
    double lo = 0.0;
    double hi = 0.0;
    double draw(Rng& rng) const { return rng.uniform(lo, hi); }
};

/// Template for one generated branch: length, end radii, waviness and (for
/// side branches) takeoff geometry. All values in mm / degrees.
struct BranchTemplate {
    Range length;
    Range radius_start;
    Range radius_end;
    Range wiggle;          // lateral control-point amplitude, mm
    Range takeoff_deg;     // angle from parent tangent; unused for chains
    Range roll_deg;        // orientation around the parent tangent
};

/// Parameters of the synthetic anatomy generator. Defaults give an adult-scale
/// tree with a Type-I arch 80% of the time and an asymmetric pair of carotid
/// origins: the right-side trunk leans forward along the catheter's direction
/// of travel through the arch, while the left carotid origin stands near
/// perpendicular, leaning back against the approach. Entering the left
/// carotid therefore demands the sharper turn, which is what makes
/// left-sided navigation the harder problem.
struct AnatomyParams {
    double arch_type1_probability = 0.8;
    double point_spacing = 1.0;  // mm, <= 1 so 2 mm observations always resolve

    BranchTemplate femoral{{110, 150}, {3.6, 4.4}, {4.0, 4.8}, {2.0, 5.0}, {}, {}};
    BranchTemplate iliac{{60, 90}, {4.0, 4.8}, {5.0, 6.0}, {2.0, 6.0}, {}, {}};
    BranchTemplate desc_aorta{{180, 230}, {8.0, 9.5}, {10.0, 12.5}, {2.0, 6.0}, {}, {}};
    BranchTemplate arch{{70, 95}, {10.0, 12.5}, {11.0, 13.5}, {0.5, 2.0}, {}, {}};
    BranchTemplate bct{{30, 45}, {4.5, 6.0}, {4.0, 5.0}, {0.5, 2.0}, {38, 58}, {-25, 25}};
    BranchTemplate rcca{{85, 120}, {3.2, 4.2}, {2.8, 3.8}, {6.0, 13.0}, {10, 30}, {-40, 40}};
    BranchTemplate rica{{45, 75}, {2.4, 3.2}, {2.0, 2.8}, {7.0, 15.0}, {10, 30}, {-40, 40}};
    // Left/right asymmetry: takeoff is measured from the parent tangent in
    // the direction of travel, so the BCT's 38-58 degrees lean forward while
    // the LCCA's 70-92 stand near perpendicular, leaning back against the
    // approach. The left entry demands the sharper turn and is strictly
    // harder to cannulate.
    BranchTemplate lcca{{90, 125}, {3.0, 4.0}, {2.6, 3.6}, {5.5, 11.0}, {70, 92}, {-25, 25}};
    BranchTemplate lica{{45, 75}, {2.3, 3.1}, {1.9, 2.7}, {6.0, 13.0}, {10, 30}, {-40, 40}};
    BranchTemplate lsa{{45, 75}, {3.8, 5.0}, {3.2, 4.2}, {1.5, 4.0}, {50, 80}, {-30, 30}};

    // Arch geometry: total bend of the arch curve and where the great vessels
    // take off, as fractions of the arch length (measured from the descending
    // end, i.e. the order encountered during navigation).
    Range arch_bend_deg{150, 190};
    Range lsa_attach_frac{0.16, 0.24};
    Range lcca_attach_frac{0.38, 0.50};
    Range bct_attach_frac{0.62, 0.74};
    // Type-II arches place the LCCA origin just next to the BCT origin.
    Range type2_origin_gap_mm{2.0, 6.0};

    void validate() const;
};

/// Build a complete ten-branch tree: neck and body fragments are generated
/// separately and joined by radius-matched fusion, mirroring the two-scan
/// pipeline the anatomies stand in for. Deterministic in (params, seed).
VascTree generate_synthetic(const AnatomyParams& params, std::uint64_t seed);

/// Neck fragment: ARCH (root) with BCT/RCCA/RICA, LCCA/LICA and LSA attached.
VascTree generate_neck_fragment(const AnatomyParams& params, Rng& rng,
                                ArchType arch_type);

/// Body fragment: FEMORAL (root) -> ILIAC -> DESC_AORTA.
VascTree generate_body_fragment(const AnatomyParams& params, Rng& rng);

} // namespace vn
