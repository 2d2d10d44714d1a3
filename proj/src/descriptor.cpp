#include "regrasp/descriptor.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "regrasp/errors.hpp"

namespace regrasp {

namespace {

void check_config(const DescriptorConfig& c) {
    if (!(c.cuboid_dims.x > 0.0 && c.cuboid_dims.y > 0.0 && c.cuboid_dims.z > 0.0))
        throw ParameterError("descriptor cuboid dims must be positive");
    if (c.image_size < 8) throw ParameterError("descriptor image size must be at least 8");
}

// floor of the normalized coordinate; the right boundary folds into the last
// bin so points exactly on the cuboid face still land inside
int bin_of(double v, double extent, int size) {
    double n = (v + extent / 2.0) / extent;
    int b = static_cast<int>(std::floor(n * size));
    return std::clamp(b, 0, size - 1);
}

}  // namespace

Descriptor extract(const PointCloud& cloud, const Pose& pose, const DescriptorConfig& config) {
    check_config(config);
    Descriptor d;
    d.source_pose = pose;
    d.config = config;
    const Pose inv = pose.inverse();
    const Vec3 half = config.cuboid_dims * 0.5;
    for (size_t i = 0; i < cloud.size(); ++i) {
        Vec3 q = inv.apply(cloud.points[i]);
        if (std::abs(q.x) <= half.x && std::abs(q.y) <= half.y && std::abs(q.z) <= half.z) {
            d.points.push_back(q);
            d.labels.push_back(cloud.labels[i]);
        }
    }
    return d;
}

DescriptorImage encode_image(const Descriptor& desc) {
    check_config(desc.config);
    if (desc.config.channels_per_view != 4)
        throw ParameterError("encoding defines exactly 4 channels per view");

    const int size = desc.config.image_size;
    DescriptorImage img;
    img.size = size;
    img.channels = 3 * desc.config.channels_per_view;
    img.data.assign(static_cast<size_t>(img.channels) * size * size, 0.0);

    // view axes: (u, v, depth) as hand-frame coordinate indices
    const int view_u[3] = {1, 0, 0};
    const int view_v[3] = {2, 2, 1};
    const int view_d[3] = {0, 1, 2};
    const double dims[3] = {desc.config.cuboid_dims.x, desc.config.cuboid_dims.y,
                            desc.config.cuboid_dims.z};

    auto coord = [](const Vec3& p, int axis) { return axis == 0 ? p.x : (axis == 1 ? p.y : p.z); };

    for (int v = 0; v < 3; ++v) {
        // (cell, depth) pairs per label class, sorted before accumulation so
        // the result does not depend on point order
        std::vector<std::pair<int, double>> classed[2];
        for (size_t i = 0; i < desc.points.size(); ++i) {
            const Vec3& p = desc.points[i];
            int col = bin_of(coord(p, view_u[v]), dims[view_u[v]], size);
            int row = bin_of(coord(p, view_v[v]), dims[view_v[v]], size);
            double dn = (coord(p, view_d[v]) + dims[view_d[v]] / 2.0) / dims[view_d[v]];
            int cls = desc.labels[i] == PointLabel::visible ? 0 : 1;
            classed[cls].emplace_back(row * size + col, dn);
        }
        for (int cls = 0; cls < 2; ++cls) {
            auto& pts = classed[cls];
            std::sort(pts.begin(), pts.end());
            double* density = img.data.data() + static_cast<size_t>(v * 4 + cls * 2) * size * size;
            double* depth = density + static_cast<size_t>(size) * size;
            int max_count = 0;
            for (size_t i = 0; i < pts.size();) {
                size_t j = i;
                double sum = 0.0;
                while (j < pts.size() && pts[j].first == pts[i].first) sum += pts[j++].second;
                int count = static_cast<int>(j - i);
                max_count = std::max(max_count, count);
                density[pts[i].first] = static_cast<double>(count);
                depth[pts[i].first] = sum / count;
                i = j;
            }
            if (max_count > 0)
                for (int c = 0; c < size * size; ++c) density[c] /= max_count;
        }
    }
    return img;
}

}  // namespace regrasp
