#include "regrasp/sensing.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>

#include "regrasp/errors.hpp"
#include "regrasp/mesh.hpp"

namespace regrasp {

Intrinsics default_intrinsics(int width, int height) {
    if (width < 2 || height < 2) throw ParameterError("image must be at least 2x2");
    Intrinsics intr;
    intr.width = width;
    intr.height = height;
    intr.fx = intr.fy = width / 2.0;
    intr.cx = width / 2.0 + 0.5;  // pixel (w/2, h/2) lies exactly on the axis
    intr.cy = height / 2.0 + 0.5;
    return intr;
}

Ray pixel_ray(const Pose& camera_pose, const Intrinsics& intr, int i, int j) {
    Vec3 dir{(i + 0.5 - intr.cx) / intr.fx, (j + 0.5 - intr.cy) / intr.fy, 1.0};
    return Ray{camera_pose.t, camera_pose.R * dir.normalized()};
}

Pose look_at_camera(const Vec3& eye, const Vec3& target) {
    Vec3 z = (target - eye).normalized();
    Vec3 x = z.cross(Vec3{0, 0, 1});
    if (x.norm() < 1e-9) x = Vec3{1, 0, 0};
    x = x.normalized();
    Vec3 y = z.cross(x);
    return Pose{Mat3::from_cols(x, y, z), eye};
}

std::array<Pose, 2> two_view_poses(const Aabb& workspace, double azimuth0, double elevation,
                                   double range) {
    Vec3 c = workspace.center();
    std::array<Pose, 2> poses;
    for (int k = 0; k < 2; ++k) {
        double az = azimuth0 + k * kPi / 2.0;
        Vec3 eye = c + Vec3{std::cos(elevation) * std::cos(az),
                            std::cos(elevation) * std::sin(az), std::sin(elevation)} *
                           range;
        poses[k] = look_at_camera(eye, c);
    }
    return poses;
}

std::vector<std::array<Vec3, 3>> scene_triangles(const Scene& scene) {
    std::vector<std::array<Vec3, 3>> tris;
    for (const auto& obj : scene.objects) {
        for (const auto& t : obj.mesh.tris) {
            tris.push_back({obj.pose.apply(obj.mesh.vertices[t[0]]),
                            obj.pose.apply(obj.mesh.vertices[t[1]]),
                            obj.pose.apply(obj.mesh.vertices[t[2]])});
        }
    }
    double x0 = scene.workspace.lo.x - 0.1, x1 = scene.workspace.hi.x + 0.1;
    double y0 = scene.workspace.lo.y - 0.1, y1 = scene.workspace.hi.y + 0.1;
    double z = scene.table_height;
    tris.push_back({Vec3{x0, y0, z}, Vec3{x1, y0, z}, Vec3{x1, y1, z}});
    tris.push_back({Vec3{x0, y0, z}, Vec3{x1, y1, z}, Vec3{x0, y1, z}});
    return tris;
}

DepthImage render_depth(const Scene& scene, const Pose& camera_pose, const Intrinsics& intr) {
    return render_depth(scene_triangles(scene), camera_pose, intr);
}

DepthImage render_depth(const std::vector<std::array<Vec3, 3>>& triangles,
                        const Pose& camera_pose, const Intrinsics& intr, double far) {
    DepthImage img;
    img.width = intr.width;
    img.height = intr.height;
    img.camera_pose = camera_pose;
    img.intrinsics = intr;
    img.depths.assign(static_cast<size_t>(intr.width) * intr.height,
                      std::numeric_limits<double>::infinity());

    BvhRaycaster bvh(triangles);
    for (int j = 0; j < intr.height; ++j) {
        for (int i = 0; i < intr.width; ++i) {
            Ray ray = pixel_ray(camera_pose, intr, i, j);
            RayHit hit = bvh.raycast(ray.origin, ray.dir, far);
            if (hit.valid()) img.depths[static_cast<size_t>(j) * intr.width + i] = hit.t;
        }
    }
    return img;
}

GridSpec GridSpec::for_workspace(const Aabb& ws, double resolution) {
    if (resolution <= 0.0) throw ParameterError("grid resolution must be positive");
    GridSpec spec;
    spec.resolution = resolution;
    spec.origin = Vec3{ws.lo.x, ws.lo.y, ws.lo.z + 1e-6};
    spec.nx = static_cast<int>(std::ceil(ws.extent().x / resolution - 1e-9));
    spec.ny = static_cast<int>(std::ceil(ws.extent().y / resolution - 1e-9));
    spec.nz = static_cast<int>(std::ceil(ws.extent().z / resolution - 1e-9));
    return spec;
}

namespace {

bool poses_close(const Pose& a, const Pose& b, double tol) {
    for (int i = 0; i < 9; ++i)
        if (std::abs(a.R.m[i] - b.R.m[i]) > tol) return false;
    return (a.t - b.t).norm() <= tol;
}

void require_fusable(const DepthImage& a, const DepthImage& b, const GridSpec& spec,
                     const Aabb& ws) {
    if (spec.nx < 1 || spec.ny < 1 || spec.nz < 1 || spec.resolution <= 0.0)
        throw ParameterError("grid spec has empty dimensions");
    Vec3 hi = spec.origin + Vec3{spec.nx * spec.resolution, spec.ny * spec.resolution,
                                 spec.nz * spec.resolution};
    const double slack = 1e-4;
    if (spec.origin.x > ws.lo.x + slack || spec.origin.y > ws.lo.y + slack ||
        spec.origin.z > ws.lo.z + slack || hi.x < ws.hi.x - slack || hi.y < ws.hi.y - slack ||
        hi.z < ws.hi.z - slack)
        throw ParameterError("grid does not cover the workspace");

    // the views must be 90 degrees apart about the vertical through the
    // workspace center
    Vec3 c = ws.center();
    bool ok = false;
    for (double sign : {1.0, -1.0}) {
        Mat3 rz = Mat3::rot_z(sign * kPi / 2.0);
        Pose turn{rz, c - rz * c};
        if (poses_close(turn * a.camera_pose, b.camera_pose, 1e-6)) ok = true;
    }
    if (!ok) throw ContractViolation("camera poses are not 90 degrees apart about the center");
}

// Voxel walk along one ray, marking free every voxel whose open interval
// overlaps (0, t_hit). Crossing t values are recomputed from plane
// coordinates (origin + index * resolution) instead of accumulated, so the
// result is bit-identical to a per-voxel slab test.
void walk_free(OccupancyGrid& grid, const GridSpec& spec, const Ray& ray, double t_hit) {
    double t0 = 0.0;
    double t1 = t_hit;
    for (int a = 0; a < 3; ++a) {
        int n = a == 0 ? spec.nx : (a == 1 ? spec.ny : spec.nz);
        double lo = spec.origin[a];
        double hi = spec.origin[a] + n * spec.resolution;
        double o = ray.origin[a], d = ray.dir[a];
        if (d == 0.0) {
            if (!(o >= lo && o < hi)) return;
            continue;
        }
        double inv = 1.0 / d;
        double ta = (lo - o) * inv;
        double tb = (hi - o) * inv;
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (!(t0 < t1)) return;
    }

    Vec3 p = ray.origin + ray.dir * t0;
    int idx[3], step[3], dims[3] = {spec.nx, spec.ny, spec.nz};
    double tmax[3];
    for (int a = 0; a < 3; ++a) {
        double rel = (p[a] - spec.origin[a]) / spec.resolution;
        idx[a] = std::clamp(static_cast<int>(std::floor(rel)), 0, dims[a] - 1);
        double d = ray.dir[a];
        step[a] = d > 0.0 ? 1 : (d < 0.0 ? -1 : 0);
        if (step[a] == 0) {
            tmax[a] = std::numeric_limits<double>::infinity();
        } else {
            int plane = idx[a] + (step[a] > 0 ? 1 : 0);
            tmax[a] = (spec.origin[a] + plane * spec.resolution - ray.origin[a]) / d;
        }
    }

    double t_enter = t0;
    while (true) {
        int am = 0;
        if (tmax[1] < tmax[am]) am = 1;
        if (tmax[2] < tmax[am]) am = 2;
        double t_exit = tmax[am];

        if (std::max(t_enter, 0.0) < std::min(t_exit, t_hit))
            grid.labels[grid.index(idx[0], idx[1], idx[2])] =
                static_cast<uint8_t>(VoxLabel::free);

        if (t_exit >= t_hit) return;
        t_enter = t_exit;
        idx[am] += step[am];
        if (idx[am] < 0 || idx[am] >= dims[am]) return;
        int plane = idx[am] + (step[am] > 0 ? 1 : 0);
        tmax[am] = (spec.origin[am] + plane * spec.resolution - ray.origin[am]) / ray.dir[am];
    }
}

}  // namespace

OccupancyGrid fuse_views(const DepthImage& a, const DepthImage& b, const GridSpec& spec) {
    return fuse_views(a, b, spec, standard_workspace());
}

OccupancyGrid fuse_views(const DepthImage& a, const DepthImage& b, const GridSpec& spec,
                         const Aabb& workspace) {
    require_fusable(a, b, spec, workspace);

    OccupancyGrid grid;
    grid.origin = Pose{Mat3::identity(), spec.origin};
    grid.resolution = spec.resolution;
    grid.nx = spec.nx;
    grid.ny = spec.ny;
    grid.nz = spec.nz;
    grid.labels.assign(static_cast<size_t>(spec.nx) * spec.ny * spec.nz,
                       static_cast<uint8_t>(VoxLabel::unknown));

    const DepthImage* views[2] = {&a, &b};
    for (const DepthImage* img : views) {
        for (int j = 0; j < img->height; ++j)
            for (int i = 0; i < img->width; ++i)
                walk_free(grid, spec, pixel_ray(img->camera_pose, img->intrinsics, i, j),
                          img->at(i, j));
    }
    for (const DepthImage* img : views) {
        for (int j = 0; j < img->height; ++j) {
            for (int i = 0; i < img->width; ++i) {
                double t = img->at(i, j);
                if (!std::isfinite(t)) continue;
                Ray ray = pixel_ray(img->camera_pose, img->intrinsics, i, j);
                Vec3 p = ray.origin + ray.dir * t;
                int ix = static_cast<int>(std::floor((p.x - spec.origin.x) / spec.resolution));
                int iy = static_cast<int>(std::floor((p.y - spec.origin.y) / spec.resolution));
                int iz = static_cast<int>(std::floor((p.z - spec.origin.z) / spec.resolution));
                if (grid.in_bounds(ix, iy, iz))
                    grid.labels[grid.index(ix, iy, iz)] =
                        static_cast<uint8_t>(VoxLabel::occupied);
            }
        }
    }
    return grid;
}

PointCloud extract_cloud(const OccupancyGrid& grid, double dilation) {
    PointCloud cloud;
    Aabb occupied_box;
    for (int iz = 0; iz < grid.nz; ++iz)
        for (int iy = 0; iy < grid.ny; ++iy)
            for (int ix = 0; ix < grid.nx; ++ix)
                if (grid.at(ix, iy, iz) == VoxLabel::occupied) {
                    Vec3 c = grid.center(ix, iy, iz);
                    occupied_box.expand(c);
                    cloud.push(c, PointLabel::visible);
                }
    if (!occupied_box.valid()) return cloud;

    Aabb region = occupied_box.inflated(dilation);
    for (int iz = 0; iz < grid.nz; ++iz)
        for (int iy = 0; iy < grid.ny; ++iy)
            for (int ix = 0; ix < grid.nx; ++ix)
                if (grid.at(ix, iy, iz) == VoxLabel::unknown) {
                    Vec3 c = grid.center(ix, iy, iz);
                    if (region.contains(c)) cloud.push(c, PointLabel::occluded);
                }
    return cloud;
}

PointCloud remove_table_plane(const PointCloud& cloud, double table_height, double band) {
    if (band <= 0.0) throw ParameterError("table band must be positive");
    PointCloud out;
    for (size_t i = 0; i < cloud.size(); ++i)
        if (std::abs(cloud.points[i].z - table_height) > band)
            out.push(cloud.points[i], cloud.labels[i]);
    return out;
}

namespace {
constexpr char kGridMagic[4] = {'R', 'G', 'G', 'D'};
constexpr uint32_t kGridVersion = 1;
}  // namespace

void write_grid(const OccupancyGrid& grid, const std::string& path) {
    FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw IoError("cannot open for writing: " + path);
    auto put = [&](const void* p, size_t n) {
        if (std::fwrite(p, 1, n, f) != n) {
            std::fclose(f);
            throw IoError("short write: " + path);
        }
    };
    put(kGridMagic, 4);
    put(&kGridVersion, 4);
    uint32_t dims[3] = {static_cast<uint32_t>(grid.nx), static_cast<uint32_t>(grid.ny),
                        static_cast<uint32_t>(grid.nz)};
    put(dims, sizeof dims);
    put(&grid.resolution, 8);
    put(grid.origin.R.m.data(), 9 * 8);
    double t[3] = {grid.origin.t.x, grid.origin.t.y, grid.origin.t.z};
    put(t, sizeof t);
    put(grid.labels.data(), grid.labels.size());
    std::fclose(f);
}

OccupancyGrid read_grid(const std::string& path) {
    FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw IoError("cannot open: " + path);
    auto get = [&](void* p, size_t n) {
        if (std::fread(p, 1, n, f) != n) {
            std::fclose(f);
            throw IoError("truncated grid file: " + path);
        }
    };
    char magic[4];
    get(magic, 4);
    if (std::memcmp(magic, kGridMagic, 4) != 0) {
        std::fclose(f);
        throw IoError("not a grid file: " + path);
    }
    uint32_t version;
    get(&version, 4);
    if (version != kGridVersion) {
        std::fclose(f);
        throw IoError("unsupported grid version");
    }
    uint32_t dims[3];
    get(dims, sizeof dims);
    OccupancyGrid grid;
    grid.nx = static_cast<int>(dims[0]);
    grid.ny = static_cast<int>(dims[1]);
    grid.nz = static_cast<int>(dims[2]);
    get(&grid.resolution, 8);
    get(grid.origin.R.m.data(), 9 * 8);
    double t[3];
    get(t, sizeof t);
    grid.origin.t = {t[0], t[1], t[2]};
    grid.labels.resize(static_cast<size_t>(grid.nx) * grid.ny * grid.nz);
    get(grid.labels.data(), grid.labels.size());
    std::fclose(f);
    return grid;
}

}  // namespace regrasp
