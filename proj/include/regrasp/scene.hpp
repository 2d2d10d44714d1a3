#pragma once

#include <cstdint>
#include <vector>

#include "regrasp/hull.hpp"
#include "regrasp/math3d.hpp"
#include "regrasp/mesh.hpp"
#include "regrasp/rng.hpp"

namespace regrasp {

enum class Category { bottle, mug };

const char* category_name(Category c);

struct RigidObject {
    Category category = Category::bottle;
    TriMesh mesh;          // object frame; +z is the canonical up axis
    double height = 0.0;   // bounding-box z extent in object frame
    Pose pose;             // object frame -> world
    int id = 0;
    Vec3 com;              // volume centroid, object frame
    ConvexHull hull;       // convex hull of mesh vertices, object frame
};

struct Scene {
    std::vector<RigidObject> objects;
    double table_height = 0.0;
    Aabb workspace;
    uint64_t rng_seed = 0;

    const RigidObject* find(int object_id) const;
    RigidObject* find(int object_id);
};

// 0.4 x 0.4 m tabletop area, 0.3 m of air above it
Aabb standard_workspace();

// Lathed closed surface of revolution: cylindrical body, randomized shoulder
// curve down to a neck of 35-70% base radius, flat cap.
RigidObject generate_bottle(uint64_t seed, double height);

// Open-topped shell (wall 3-6 mm) with a torus-segment handle; the shell and
// the handle are two disjoint closed components in one mesh.
RigidObject generate_mug(uint64_t seed, double height);

// samples height uniformly within the category range, then generates
RigidObject make_object(Category cat, uint64_t object_seed);

enum class RestClass { upright, sideways, upside_down };

RestClass classify_tilt(double tilt);

// Statically stable pose: uniform over the resting classes present, then
// uniform over that class's hull facets, then uniform yaw. Translation is
// vertical only; the caller chooses the tabletop position.
Pose sample_resting_pose(const RigidObject& obj, Rng& rng);

// one object, uniform planar position within the workspace
Scene spawn_isolation(Category cat, uint64_t object_seed, uint64_t pose_seed);
Scene spawn_isolation(Category cat, uint64_t object_seed, uint64_t pose_seed,
                      const Aabb& workspace);

// n objects dropped near the workspace center, rejection on interpenetration
Scene spawn_clutter(Category cat, int n, uint64_t object_seed, uint64_t pose_seed);
Scene spawn_clutter(Category cat, int n, uint64_t object_seed, uint64_t pose_seed,
                    const Aabb& workspace);

struct SettleReport {
    double clearance = 0.0;  // lowest mesh point height above the table
    double tilt = 0.0;       // angle between canonical up and world vertical
};

SettleReport settle_state(const Scene& scene, int object_id);

}  // namespace regrasp
