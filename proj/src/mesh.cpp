#include "regrasp/mesh.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>
#include <utility>

#include "regrasp/errors.hpp"

namespace regrasp {

Aabb TriMesh::bounds() const {
    Aabb b;
    for (const Vec3& v : vertices) b.expand(v);
    return b;
}

TriMesh TriMesh::transformed(const Pose& pose) const {
    TriMesh out;
    out.vertices.reserve(vertices.size());
    for (const Vec3& v : vertices) out.vertices.push_back(pose.apply(v));
    out.tris = tris;
    return out;
}

double TriMesh::min_z() const {
    double m = std::numeric_limits<double>::infinity();
    for (const Vec3& v : vertices) m = std::min(m, v.z);
    return m;
}

bool TriMesh::is_closed() const {
    // directed edge -> count; closed 2-manifold means each directed edge occurs
    // once and its opposite once
    std::map<std::pair<int, int>, int> edges;
    for (const auto& t : tris) {
        for (int k = 0; k < 3; ++k) {
            int a = t[k], b = t[(k + 1) % 3];
            if (a == b) return false;
            edges[{a, b}]++;
        }
    }
    for (const auto& [edge, count] : edges) {
        if (count != 1) return false;
        auto rev = edges.find({edge.second, edge.first});
        if (rev == edges.end() || rev->second != 1) return false;
    }
    return true;
}

double TriMesh::volume() const {
    double vol = 0.0;
    for (const auto& t : tris) {
        const Vec3 &a = vertices[t[0]], &b = vertices[t[1]], &c = vertices[t[2]];
        vol += a.dot(b.cross(c));
    }
    return vol / 6.0;
}

Vec3 TriMesh::volume_centroid() const {
    double vol = 0.0;
    Vec3 moment{0, 0, 0};
    for (const auto& t : tris) {
        const Vec3 &a = vertices[t[0]], &b = vertices[t[1]], &c = vertices[t[2]];
        double v = a.dot(b.cross(c));
        vol += v;
        moment += (a + b + c) * (v / 4.0);
    }
    if (std::abs(vol) < 1e-12) return Vec3{0, 0, 0};
    return moment / vol;
}

void TriMesh::append(const TriMesh& other) {
    int base = static_cast<int>(vertices.size());
    vertices.insert(vertices.end(), other.vertices.begin(), other.vertices.end());
    for (const auto& t : other.tris) tris.push_back({t[0] + base, t[1] + base, t[2] + base});
}

TriMesh box_mesh(const Vec3& lo, const Vec3& hi) {
    TriMesh m;
    m.vertices = {
        {lo.x, lo.y, lo.z}, {hi.x, lo.y, lo.z}, {hi.x, hi.y, lo.z}, {lo.x, hi.y, lo.z},
        {lo.x, lo.y, hi.z}, {hi.x, lo.y, hi.z}, {hi.x, hi.y, hi.z}, {lo.x, hi.y, hi.z},
    };
    m.tris = {
        {0, 2, 1}, {0, 3, 2},  // bottom, normal -z
        {4, 5, 6}, {4, 6, 7},  // top, normal +z
        {0, 1, 5}, {0, 5, 4},  // front, normal -y
        {2, 3, 7}, {2, 7, 6},  // back, normal +y
        {1, 2, 6}, {1, 6, 5},  // right, normal +x
        {3, 0, 4}, {3, 4, 7},  // left, normal -x
    };
    return m;
}

void write_stl_ascii(const TriMesh& mesh, const std::string& name, const std::string& path) {
    FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw IoError("cannot open for writing: " + path);
    std::fprintf(f, "solid %s\n", name.c_str());
    for (const auto& t : mesh.tris) {
        const Vec3 &a = mesh.vertices[t[0]], &b = mesh.vertices[t[1]], &c = mesh.vertices[t[2]];
        Vec3 n = (b - a).cross(c - a).normalized();
        std::fprintf(f, "  facet normal %.9g %.9g %.9g\n", n.x, n.y, n.z);
        std::fprintf(f, "    outer loop\n");
        std::fprintf(f, "      vertex %.9g %.9g %.9g\n", a.x, a.y, a.z);
        std::fprintf(f, "      vertex %.9g %.9g %.9g\n", b.x, b.y, b.z);
        std::fprintf(f, "      vertex %.9g %.9g %.9g\n", c.x, c.y, c.z);
        std::fprintf(f, "    endloop\n");
        std::fprintf(f, "  endfacet\n");
    }
    std::fprintf(f, "endsolid %s\n", name.c_str());
    std::fclose(f);
}

bool ray_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a, const Vec3& b,
                  const Vec3& c, double& t_out) {
    const double eps = 1e-12;
    Vec3 e1 = b - a, e2 = c - a;
    Vec3 p = dir.cross(e2);
    double det = e1.dot(p);
    if (std::abs(det) < eps) return false;
    double inv = 1.0 / det;
    Vec3 s = origin - a;
    double u = s.dot(p) * inv;
    if (u < 0.0 || u > 1.0) return false;
    Vec3 q = s.cross(e1);
    double v = dir.dot(q) * inv;
    if (v < 0.0 || u + v > 1.0) return false;
    double t = e2.dot(q) * inv;
    if (t <= eps) return false;
    t_out = t;
    return true;
}

namespace {

// interval of a triangle's projection onto the line L(t) = o + t*d restricted
// to where the triangle crosses the other triangle's plane
bool tri_plane_interval(const Vec3& v0, const Vec3& v1, const Vec3& v2, double d0, double d1,
                        double d2, double p0, double p1, double p2, double& lo, double& hi) {
    // dN are signed distances to the other plane, pN projections onto the
    // intersection line direction
    auto edge_cross = [](double pa, double pb, double da, double db) {
        return pa + (pb - pa) * (da / (da - db));
    };
    double a, b;
    if (d0 * d1 < 0.0 && d0 * d2 < 0.0) {
        a = edge_cross(p0, p1, d0, d1);
        b = edge_cross(p0, p2, d0, d2);
    } else if (d1 * d0 < 0.0 && d1 * d2 < 0.0) {
        a = edge_cross(p1, p0, d1, d0);
        b = edge_cross(p1, p2, d1, d2);
    } else if (d2 * d0 < 0.0 && d2 * d1 < 0.0) {
        a = edge_cross(p2, p0, d2, d0);
        b = edge_cross(p2, p1, d2, d1);
    } else {
        // one or more distances zero: fall back to using any sign change
        const double vals[3] = {d0, d1, d2};
        const double prj[3] = {p0, p1, p2};
        std::vector<double> pts;
        for (int i = 0; i < 3; ++i) {
            int j = (i + 1) % 3;
            if (vals[i] == 0.0) pts.push_back(prj[i]);
            if (vals[i] * vals[j] < 0.0) pts.push_back(edge_cross(prj[i], prj[j], vals[i], vals[j]));
        }
        if (pts.size() < 2) {
            if (pts.size() == 1) { lo = hi = pts[0]; return true; }
            return false;
        }
        a = *std::min_element(pts.begin(), pts.end());
        b = *std::max_element(pts.begin(), pts.end());
    }
    lo = std::min(a, b);
    hi = std::max(a, b);
    (void)v0; (void)v1; (void)v2;
    return true;
}

bool coplanar_tris_intersect(const Vec3& n, const Vec3& a0, const Vec3& a1, const Vec3& a2,
                             const Vec3& b0, const Vec3& b1, const Vec3& b2) {
    // project to the dominant axis plane and do 2D SAT over edge normals
    int ax = 0;
    Vec3 an{std::abs(n.x), std::abs(n.y), std::abs(n.z)};
    if (an.y > an.x) ax = 1;
    if (an.z > an[ax]) ax = 2;
    int u = (ax + 1) % 3, v = (ax + 2) % 3;
    std::array<std::array<double, 2>, 3> A = {{{a0[u], a0[v]}, {a1[u], a1[v]}, {a2[u], a2[v]}}};
    std::array<std::array<double, 2>, 3> B = {{{b0[u], b0[v]}, {b1[u], b1[v]}, {b2[u], b2[v]}}};
    auto separated = [](const std::array<std::array<double, 2>, 3>& P,
                        const std::array<std::array<double, 2>, 3>& Q) {
        for (int i = 0; i < 3; ++i) {
            int j = (i + 1) % 3;
            double ex = P[j][0] - P[i][0], ey = P[j][1] - P[i][1];
            double nx = -ey, ny = ex;
            double pmin = 1e300, pmax = -1e300, qmin = 1e300, qmax = -1e300;
            for (int k = 0; k < 3; ++k) {
                double dp = nx * P[k][0] + ny * P[k][1];
                double dq = nx * Q[k][0] + ny * Q[k][1];
                pmin = std::min(pmin, dp); pmax = std::max(pmax, dp);
                qmin = std::min(qmin, dq); qmax = std::max(qmax, dq);
            }
            if (pmax < qmin || qmax < pmin) return true;
        }
        return false;
    };
    return !separated(A, B) && !separated(B, A);
}

}  // namespace

bool triangles_intersect(const Vec3& a0, const Vec3& a1, const Vec3& a2, const Vec3& b0,
                         const Vec3& b1, const Vec3& b2) {
    // Moller's interval overlap method
    Vec3 n1 = (a1 - a0).cross(a2 - a0);
    double db0 = n1.dot(b0 - a0), db1 = n1.dot(b1 - a0), db2 = n1.dot(b2 - a0);
    const double eps = 1e-12;
    if (std::abs(db0) < eps) db0 = 0.0;
    if (std::abs(db1) < eps) db1 = 0.0;
    if (std::abs(db2) < eps) db2 = 0.0;
    if ((db0 > 0 && db1 > 0 && db2 > 0) || (db0 < 0 && db1 < 0 && db2 < 0)) return false;

    Vec3 n2 = (b1 - b0).cross(b2 - b0);
    double da0 = n2.dot(a0 - b0), da1 = n2.dot(a1 - b0), da2 = n2.dot(a2 - b0);
    if (std::abs(da0) < eps) da0 = 0.0;
    if (std::abs(da1) < eps) da1 = 0.0;
    if (std::abs(da2) < eps) da2 = 0.0;
    if ((da0 > 0 && da1 > 0 && da2 > 0) || (da0 < 0 && da1 < 0 && da2 < 0)) return false;

    if (db0 == 0.0 && db1 == 0.0 && db2 == 0.0) {
        return coplanar_tris_intersect(n1, a0, a1, a2, b0, b1, b2);
    }

    Vec3 d = n1.cross(n2);
    double pa0 = d.dot(a0), pa1 = d.dot(a1), pa2 = d.dot(a2);
    double pb0 = d.dot(b0), pb1 = d.dot(b1), pb2 = d.dot(b2);

    double alo, ahi, blo, bhi;
    if (!tri_plane_interval(a0, a1, a2, da0, da1, da2, pa0, pa1, pa2, alo, ahi)) return false;
    if (!tri_plane_interval(b0, b1, b2, db0, db1, db2, pb0, pb1, pb2, blo, bhi)) return false;
    return !(ahi < blo || bhi < alo);
}

bool meshes_intersect(const TriMesh& a, const TriMesh& b) {
    Aabb ba = a.bounds(), bb = b.bounds();
    if (!ba.overlaps(bb)) return false;

    // per-triangle boxes of B for pruning
    std::vector<Aabb> bboxes(b.tris.size());
    for (size_t j = 0; j < b.tris.size(); ++j) {
        Aabb box;
        box.expand(b.vertices[b.tris[j][0]]);
        box.expand(b.vertices[b.tris[j][1]]);
        box.expand(b.vertices[b.tris[j][2]]);
        bboxes[j] = box;
    }
    for (const auto& ta : a.tris) {
        const Vec3 &p0 = a.vertices[ta[0]], &p1 = a.vertices[ta[1]], &p2 = a.vertices[ta[2]];
        Aabb abox;
        abox.expand(p0); abox.expand(p1); abox.expand(p2);
        if (!abox.overlaps(bb)) continue;
        for (size_t j = 0; j < b.tris.size(); ++j) {
            if (!abox.overlaps(bboxes[j])) continue;
            const auto& tb = b.tris[j];
            if (triangles_intersect(p0, p1, p2, b.vertices[tb[0]], b.vertices[tb[1]],
                                    b.vertices[tb[2]]))
                return true;
        }
    }
    // containment without surface crossing (one mesh nested inside the other)
    if (!a.vertices.empty() && point_in_mesh(b, a.vertices[0])) return true;
    if (!b.vertices.empty() && point_in_mesh(a, b.vertices[0])) return true;
    return false;
}

bool point_in_mesh(const TriMesh& mesh, const Vec3& p) {
    // ray parity along a slightly irrational direction to dodge edge hits
    Vec3 dir = Vec3{0.577350269, 0.211324865, 0.788675134}.normalized();
    int crossings = 0;
    double t;
    for (const auto& tri : mesh.tris) {
        if (ray_triangle(p, dir, mesh.vertices[tri[0]], mesh.vertices[tri[1]],
                         mesh.vertices[tri[2]], t))
            ++crossings;
    }
    return (crossings % 2) == 1;
}

BvhRaycaster::BvhRaycaster(std::vector<std::array<Vec3, 3>> triangles)
    : tris_(std::move(triangles)) {
    order_.resize(tris_.size());
    std::iota(order_.begin(), order_.end(), 0);
    if (!tris_.empty()) {
        nodes_.reserve(tris_.size() * 2);
        build(0, static_cast<int>(tris_.size()), 0);
    }
}

int BvhRaycaster::build(int first, int count, int depth) {
    Node node;
    for (int i = first; i < first + count; ++i) {
        const auto& t = tris_[order_[i]];
        node.box.expand(t[0]);
        node.box.expand(t[1]);
        node.box.expand(t[2]);
    }
    int idx = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    if (count <= 4 || depth > 40) {
        nodes_[idx].first = first;
        nodes_[idx].count = count;
        return idx;
    }
    Vec3 ext = node.box.extent();
    int axis = 0;
    if (ext.y > ext.x) axis = 1;
    if (ext.z > ext[axis]) axis = 2;
    auto mid = order_.begin() + first + count / 2;
    std::nth_element(order_.begin() + first, mid, order_.begin() + first + count,
                     [&](int a, int b) {
                         const auto &ta = tris_[a], &tb = tris_[b];
                         double ca = ta[0][axis] + ta[1][axis] + ta[2][axis];
                         double cb = tb[0][axis] + tb[1][axis] + tb[2][axis];
                         return ca < cb;
                     });
    int half = count / 2;
    int l = build(first, half, depth + 1);
    int r = build(first + half, count - half, depth + 1);
    nodes_[idx].left = l;
    nodes_[idx].right = r;
    return idx;
}

RayHit BvhRaycaster::raycast(const Vec3& origin, const Vec3& dir, double t_max) const {
    RayHit hit;
    if (nodes_.empty()) return hit;
    double best = t_max;
    Vec3 inv{1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z};

    auto box_hit = [&](const Aabb& b, double limit) {
        double t0 = 0.0, t1 = limit;
        for (int a = 0; a < 3; ++a) {
            double ta = (b.lo[a] - origin[a]) * inv[a];
            double tb = (b.hi[a] - origin[a]) * inv[a];
            if (ta > tb) std::swap(ta, tb);
            t0 = std::max(t0, ta);
            t1 = std::min(t1, tb);
            if (t0 > t1) return false;
        }
        return true;
    };

    int stack[64];
    int sp = 0;
    stack[sp++] = 0;
    while (sp > 0) {
        int ni = stack[--sp];
        const Node& n = nodes_[ni];
        if (!box_hit(n.box, best)) continue;
        if (n.left < 0) {
            for (int i = n.first; i < n.first + n.count; ++i) {
                const auto& t = tris_[order_[i]];
                double th;
                if (ray_triangle(origin, dir, t[0], t[1], t[2], th) && th < best) {
                    best = th;
                    hit.t = th;
                    hit.tri = order_[i];
                }
            }
        } else {
            stack[sp++] = n.left;
            stack[sp++] = n.right;
        }
    }
    return hit;
}

}  // namespace regrasp
