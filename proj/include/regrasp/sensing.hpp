#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "regrasp/math3d.hpp"
#include "regrasp/scene.hpp"

namespace regrasp {

// Camera frame: +z optical axis, +x image right, +y image down.
struct Intrinsics {
    double fx = 0.0, fy = 0.0, cx = 0.0, cy = 0.0;
    int width = 0, height = 0;
};

// 90 degree horizontal field of view; the principal point is chosen so the
// pixel at (width/2, height/2) looks exactly along the optical axis
Intrinsics default_intrinsics(int width, int height);

struct DepthImage {
    int width = 0, height = 0;
    std::vector<double> depths;  // range along the unit pixel ray; +inf for no hit
    Pose camera_pose;            // camera frame -> world
    Intrinsics intrinsics;

    double at(int i, int j) const { return depths[static_cast<size_t>(j) * width + i]; }
};

struct Ray {
    Vec3 origin;
    Vec3 dir;  // unit length
};

// the exact ray a pixel's depth was measured along; fusion and its test
// oracle both regenerate rays through this
Ray pixel_ray(const Pose& camera_pose, const Intrinsics& intr, int i, int j);

Pose look_at_camera(const Vec3& eye, const Vec3& target);

// two cameras pointed at the workspace center, azimuths 90 degrees apart
std::array<Pose, 2> two_view_poses(const Aabb& workspace, double azimuth0,
                                   double elevation = kPi / 4.0, double range = 0.5);

// posed object triangles plus a finite table patch covering the workspace
// footprint expanded by 10 cm
std::vector<std::array<Vec3, 3>> scene_triangles(const Scene& scene);

DepthImage render_depth(const Scene& scene, const Pose& camera_pose, const Intrinsics& intr);
DepthImage render_depth(const std::vector<std::array<Vec3, 3>>& triangles,
                        const Pose& camera_pose, const Intrinsics& intr, double far = 2.0);

enum class VoxLabel : uint8_t { free = 0, occupied = 1, unknown = 2 };

struct GridSpec {
    Vec3 origin;  // world position of the voxel (0,0,0) low corner
    double resolution = 0.005;
    int nx = 0, ny = 0, nz = 0;

    // grid over the workspace; the z origin sits a hair above the table so
    // table-plane hits land below the grid
    static GridSpec for_workspace(const Aabb& ws, double resolution = 0.005);
};

struct OccupancyGrid {
    Pose origin;  // grid frame -> world; voxel (0,0,0) low corner at origin.t
    double resolution = 0.0;
    int nx = 0, ny = 0, nz = 0;
    std::vector<uint8_t> labels;  // VoxLabel values, x-major

    size_t index(int ix, int iy, int iz) const {
        return static_cast<size_t>(ix) + static_cast<size_t>(nx) * (iy + static_cast<size_t>(ny) * iz);
    }
    VoxLabel at(int ix, int iy, int iz) const {
        return static_cast<VoxLabel>(labels[index(ix, iy, iz)]);
    }
    bool in_bounds(int ix, int iy, int iz) const {
        return ix >= 0 && iy >= 0 && iz >= 0 && ix < nx && iy < ny && iz < nz;
    }
    Vec3 center(int ix, int iy, int iz) const {
        return origin.apply({(ix + 0.5) * resolution, (iy + 0.5) * resolution,
                             (iz + 0.5) * resolution});
    }
};

// Three-label fusion of two registered views. Voxels a ray's open interval
// (0, t_hit) passes through become free; voxels containing a hit point become
// occupied (dominant); the rest stay unknown. The cameras must sit 90 degrees
// apart about the vertical through the workspace center, and the grid must
// cover the workspace.
OccupancyGrid fuse_views(const DepthImage& a, const DepthImage& b, const GridSpec& spec);
OccupancyGrid fuse_views(const DepthImage& a, const DepthImage& b, const GridSpec& spec,
                         const Aabb& workspace);

enum class PointLabel : uint8_t { visible = 0, occluded = 1 };

struct PointCloud {
    std::vector<Vec3> points;
    std::vector<PointLabel> labels;

    size_t size() const { return points.size(); }
    void push(const Vec3& p, PointLabel l) {
        points.push_back(p);
        labels.push_back(l);
    }
};

// visible = occupied voxel centers; occluded = unknown voxel centers inside
// the bounding box of occupied centers dilated by the descriptor reach
PointCloud extract_cloud(const OccupancyGrid& grid, double dilation = 0.245);

PointCloud remove_table_plane(const PointCloud& cloud, double table_height,
                              double band = 0.005);

void write_grid(const OccupancyGrid& grid, const std::string& path);
OccupancyGrid read_grid(const std::string& path);

}  // namespace regrasp
