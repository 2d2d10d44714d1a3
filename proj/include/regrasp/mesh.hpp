#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "regrasp/math3d.hpp"

namespace regrasp {

struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> tris;

    Aabb bounds() const;
    TriMesh transformed(const Pose& pose) const;
    double min_z() const;

    // true when every undirected edge is shared by exactly two triangles
    // with consistent winding
    bool is_closed() const;

    // signed volume and volume centroid of the enclosed solid
    // (divergence theorem; valid for closed meshes).
    double volume() const;
    Vec3 volume_centroid() const;

    void append(const TriMesh& other);
};

// axis-aligned box from corner lo to corner hi, outward-facing
TriMesh box_mesh(const Vec3& lo, const Vec3& hi);

void write_stl_ascii(const TriMesh& mesh, const std::string& name, const std::string& path);

struct RayHit {
    double t = 0.0;
    int tri = -1;
    bool valid() const { return tri >= 0; }
};

// Moller-Trumbore; returns hit with smallest t > t_min.
bool ray_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a, const Vec3& b,
                  const Vec3& c, double& t_out);

bool triangles_intersect(const Vec3& a0, const Vec3& a1, const Vec3& a2, const Vec3& b0,
                         const Vec3& b1, const Vec3& b2);

bool meshes_intersect(const TriMesh& a, const TriMesh& b);

// parity test along +x; point must not lie on the surface
bool point_in_mesh(const TriMesh& mesh, const Vec3& p);

// Midpoint-split AABB tree over a triangle soup, built once per scene render.
class BvhRaycaster {
public:
    BvhRaycaster() = default;
    explicit BvhRaycaster(std::vector<std::array<Vec3, 3>> triangles);

    RayHit raycast(const Vec3& origin, const Vec3& dir, double t_max) const;
    size_t triangle_count() const { return tris_.size(); }
    const std::array<Vec3, 3>& triangle(int i) const { return tris_[i]; }

private:
    struct Node {
        Aabb box;
        int left = -1, right = -1;   // internal children
        int first = 0, count = 0;    // leaf range into order_
    };

    int build(int first, int count, int depth);

    std::vector<std::array<Vec3, 3>> tris_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
};

}  // namespace regrasp
