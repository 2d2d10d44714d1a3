#pragma once

#include <vector>

#include "regrasp/math3d.hpp"
#include "regrasp/sensing.hpp"

namespace regrasp {

// Truncation cuboid and image geometry for the reach descriptor.
struct DescriptorConfig {
    Vec3 cuboid_dims{0.10, 0.10, 0.20};
    int image_size = 60;
    int channels_per_view = 4;

    static DescriptorConfig standard() { return DescriptorConfig{}; }
    // Large-volume variant: doubled cuboid, same image resolution.
    static DescriptorConfig large_volume() {
        return DescriptorConfig{{0.20, 0.20, 0.40}, 60, 4};
    }
};

// Hand-frame point cloud truncated to the descriptor cuboid. Labels run
// parallel to points, as in PointCloud.
struct Descriptor {
    std::vector<Vec3> points;
    std::vector<PointLabel> labels;
    Pose source_pose;
    DescriptorConfig config;

    size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
};

// Stacked projection image: 3 views x channels_per_view, row-major planes.
// Values are in [0,1]. Index order (channel, row, col); for the view along
// hand x the image axes are (y, z), along y they are (x, z), along z (x, y):
// the first axis is the column, the second the row.
struct DescriptorImage {
    int size = 0;
    int channels = 0;
    std::vector<double> data;

    double at(int c, int row, int col) const {
        return data[(static_cast<size_t>(c) * size + row) * size + col];
    }
};

// Transform the whole cloud into the frame of pose and keep what falls inside
// the cuboid (boundary inclusive), labels preserved.
Descriptor extract(const PointCloud& cloud, const Pose& pose, const DescriptorConfig& config);

// Rasterize the descriptor. Per view: visible density, visible mean depth,
// occluded density, occluded mean depth. Densities are scaled by the channel's
// max cell count, depths normalized over the cuboid extent along the view.
DescriptorImage encode_image(const Descriptor& desc);

}  // namespace regrasp
