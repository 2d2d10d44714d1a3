#pragma once

#include <vector>

#include "regrasp/math3d.hpp"

namespace regrasp {

// one planar face of a convex hull, coplanar triangles merged
struct HullFacet {
    Vec3 normal;             // outward unit normal
    double offset = 0.0;     // normal . x == offset on the facet plane
    std::vector<Vec3> ring;  // boundary polygon, counter-clockwise about normal
    double area = 0.0;
};

struct ConvexHull {
    std::vector<Vec3> vertices;
    std::vector<HullFacet> facets;
};

ConvexHull convex_hull(const std::vector<Vec3>& points);

// facets the body can rest on: the center of mass projects strictly inside
// the facet polygon, at least margin away from every edge
std::vector<int> stable_facet_ids(const ConvexHull& hull, const Vec3& com,
                                  double margin = 1e-4);

// rigid transform that lays facet_id flat on z=0 with the body above it
Pose resting_pose(const ConvexHull& hull, int facet_id);

}  // namespace regrasp
