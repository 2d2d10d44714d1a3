#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "regrasp/math3d.hpp"
#include "regrasp/scene.hpp"
#include "regrasp/sensing.hpp"

namespace regrasp {

// Parallel-jaw hand. Hand frame: +x approach, +y closing axis, +z hand axis.
// The closing region is the space swept by the fingers; the collision boxes
// are the palm body plus the two fingers at full aperture.
struct HandModel {
    double finger_width = 0.02;
    double max_aperture = 0.08;
    double finger_depth = 0.05;
    Aabb hand_body_box{{-0.05, -0.06, -0.02}, {0.0, 0.06, 0.02}};

    Aabb closing_region() const {
        return Aabb{{0.0, -max_aperture / 2.0, -finger_width / 2.0},
                    {finger_depth, max_aperture / 2.0, finger_width / 2.0}};
    }
    std::array<Aabb, 3> collision_boxes() const {
        const double ft = 0.012;  // finger thickness beyond the aperture
        return {hand_body_box,
                Aabb{{0.0, max_aperture / 2.0, -finger_width / 2.0},
                     {finger_depth, max_aperture / 2.0 + ft, finger_width / 2.0}},
                Aabb{{0.0, -max_aperture / 2.0 - ft, -finger_width / 2.0},
                     {finger_depth, -max_aperture / 2.0, finger_width / 2.0}}};
    }
};

struct GraspCandidate {
    Pose pose;  // hand frame -> world
    double aperture = 0.0;
};

// Antipodal sampling over visible points: estimate a surface normal by PCA
// over a 1 cm neighborhood, orient it into free space, align the closing
// axis with it, sweep approach directions in 30 degree steps, re-center on
// the cloud between the fingers, and keep collision-free poses whose closing
// region holds an opposing-normal pair (friction half-angle 15 degrees) or a
// thin pinchable slab. Returns at most m candidates, deterministic in seed.
std::vector<GraspCandidate> sample_grasps(const PointCloud& cloud, const OccupancyGrid& grid,
                                          const HandModel& hand, int m, uint64_t seed);

enum class GraspQuality { stable, unstable, miss };

// Close the fingers against the true meshes. Stable needs both contact
// patches on one object, both contact normals inside the friction cone
// (coefficient 0.3) about the closing axis, and the contact line of centers
// antipodal. Assumes the fingers can reach their starting aperture.
GraspQuality grasp_quality(const Scene& scene, const GraspCandidate& cand,
                           const HandModel& hand);

// id of the object providing both contacts of a stable grasp, else -1
int grasped_object(const Scene& scene, const GraspCandidate& cand, const HandModel& hand);

// Object whose surface dominates the closing region at this pose, stable or
// not (-1 if the region meets no mesh). Ties go to the smaller id.
int touched_object(const Scene& scene, const GraspCandidate& cand, const HandModel& hand);

// true when the oriented box at this pose touches no occupied voxel and does
// not dip under the grid floor (the table surface)
bool box_clear_of_grid(const OccupancyGrid& grid, const Pose& pose, const Aabb& box);

}  // namespace regrasp
