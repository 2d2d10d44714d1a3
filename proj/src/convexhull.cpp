#include "regrasp/hull.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>

#include "regrasp/errors.hpp"
#include "regrasp/rng.hpp"

namespace regrasp {

namespace {

constexpr double kEpsOut = 1e-11;  // above fp noise, below the tie-break jitter

struct QFace {
    std::array<int, 3> v;
    Vec3 n;
    double d = 0.0;
    bool alive = true;
    std::vector<int> outside;
    double far_dist = 0.0;
    int far_pt = -1;
};

QFace make_face(const std::vector<Vec3>& pts, int a, int b, int c, const Vec3& interior) {
    QFace f;
    f.v = {a, b, c};
    Vec3 n = (pts[b] - pts[a]).cross(pts[c] - pts[a]);
    double len = n.norm();
    if (len < 1e-18) throw SceneGenError("degenerate hull face");
    n = n / len;
    double d = n.dot(pts[a]);
    if (n.dot(interior) > d) {
        std::swap(f.v[1], f.v[2]);
        n = -n;
        d = -d;
    }
    f.n = n;
    f.d = d;
    return f;
}

void push_outside(QFace& f, const std::vector<Vec3>& pts, int p) {
    double dist = f.n.dot(pts[p]) - f.d;
    if (dist > kEpsOut) {
        f.outside.push_back(p);
        if (dist > f.far_dist) {
            f.far_dist = dist;
            f.far_pt = p;
        }
    }
}

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(int a, int b) { parent[find(a)] = find(b); }
};

// Andrew monotone chain; returns indices into pts, counter-clockwise
std::vector<int> hull2d(const std::vector<std::array<double, 2>>& pts) {
    int n = static_cast<int>(pts.size());
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        if (pts[a][0] != pts[b][0]) return pts[a][0] < pts[b][0];
        return pts[a][1] < pts[b][1];
    });
    auto cross = [&](int o, int a, int b) {
        return (pts[a][0] - pts[o][0]) * (pts[b][1] - pts[o][1]) -
               (pts[a][1] - pts[o][1]) * (pts[b][0] - pts[o][0]);
    };
    std::vector<int> h(2 * n);
    int k = 0;
    for (int ii = 0; ii < n; ++ii) {
        int i = idx[ii];
        while (k >= 2 && cross(h[k - 2], h[k - 1], i) <= 0) --k;
        h[k++] = i;
    }
    int lower = k + 1;
    for (int ii = n - 2; ii >= 0; --ii) {
        int i = idx[ii];
        while (k >= lower && cross(h[k - 2], h[k - 1], i) <= 0) --k;
        h[k++] = i;
    }
    h.resize(k - 1);
    return h;
}

}  // namespace

ConvexHull convex_hull(const std::vector<Vec3>& points) {
    if (points.size() < 4) throw SceneGenError("convex hull needs at least 4 points");
    int n = static_cast<int>(points.size());

    // deterministic jitter breaks coplanar ties; affects combinatorics only,
    // output coordinates come from the input
    std::vector<Vec3> pts = points;
    for (int i = 0; i < n; ++i) {
        for (int ax = 0; ax < 3; ++ax) {
            uint64_t h = mix_seed(0x7f4a7c15u + static_cast<uint64_t>(i), ax);
            double u = static_cast<double>(h >> 11) * 0x1.0p-53;
            pts[i][ax] += (2.0 * u - 1.0) * 1e-9;
        }
    }

    // initial simplex from extremes
    int i0 = 0, i1 = 0;
    for (int i = 1; i < n; ++i) {
        if (pts[i].x < pts[i0].x) i0 = i;
        if (pts[i].x > pts[i1].x) i1 = i;
    }
    if (i0 == i1) throw SceneGenError("hull input is a single point");
    Vec3 dir = (pts[i1] - pts[i0]).normalized();
    int i2 = -1;
    double best = 1e-18;
    for (int i = 0; i < n; ++i) {
        Vec3 off = pts[i] - pts[i0];
        double d = (off - dir * off.dot(dir)).norm();
        if (d > best) {
            best = d;
            i2 = i;
        }
    }
    if (i2 < 0) throw SceneGenError("hull input is collinear");
    Vec3 pn = (pts[i1] - pts[i0]).cross(pts[i2] - pts[i0]).normalized();
    int i3 = -1;
    best = 1e-14;
    for (int i = 0; i < n; ++i) {
        double d = std::abs(pn.dot(pts[i] - pts[i0]));
        if (d > best) {
            best = d;
            i3 = i;
        }
    }
    if (i3 < 0) throw SceneGenError("hull input is coplanar");

    Vec3 interior = (pts[i0] + pts[i1] + pts[i2] + pts[i3]) / 4.0;
    std::vector<QFace> faces;
    faces.push_back(make_face(pts, i0, i1, i2, interior));
    faces.push_back(make_face(pts, i0, i1, i3, interior));
    faces.push_back(make_face(pts, i0, i2, i3, interior));
    faces.push_back(make_face(pts, i1, i2, i3, interior));

    for (int p = 0; p < n; ++p) {
        if (p == i0 || p == i1 || p == i2 || p == i3) continue;
        for (QFace& f : faces) {
            size_t before = f.outside.size();
            push_outside(f, pts, p);
            if (f.outside.size() != before) break;
        }
    }

    while (true) {
        int fi = -1;
        for (int i = 0; i < static_cast<int>(faces.size()); ++i) {
            if (faces[i].alive && !faces[i].outside.empty()) {
                fi = i;
                break;
            }
        }
        if (fi < 0) break;
        int apex = faces[fi].far_pt;

        std::vector<int> visible;
        for (int i = 0; i < static_cast<int>(faces.size()); ++i) {
            if (faces[i].alive && faces[i].n.dot(pts[apex]) - faces[i].d > kEpsOut)
                visible.push_back(i);
        }

        // horizon: directed edges of visible faces whose reverse lies outside
        // the visible set
        std::map<std::pair<int, int>, int> dir_edges;
        for (int i : visible) {
            const auto& v = faces[i].v;
            for (int k = 0; k < 3; ++k) dir_edges[{v[k], v[(k + 1) % 3]}] = i;
        }
        std::vector<std::pair<int, int>> horizon;
        for (const auto& [e, owner] : dir_edges) {
            if (dir_edges.find({e.second, e.first}) == dir_edges.end()) horizon.push_back(e);
        }
        (void)dir_edges;

        std::vector<int> orphans;
        for (int i : visible) {
            QFace& f = faces[i];
            f.alive = false;
            for (int p : f.outside)
                if (p != apex) orphans.push_back(p);
            f.outside.clear();
        }

        size_t first_new = faces.size();
        for (const auto& [a, b] : horizon) faces.push_back(make_face(pts, a, b, apex, interior));
        for (int p : orphans) {
            for (size_t i = first_new; i < faces.size(); ++i) {
                size_t before = faces[i].outside.size();
                push_outside(faces[i], pts, p);
                if (faces[i].outside.size() != before) break;
            }
        }
    }

    // merge coplanar neighbours; jitter-level splits sit far below this angle
    std::vector<int> alive;
    for (int i = 0; i < static_cast<int>(faces.size()); ++i)
        if (faces[i].alive) alive.push_back(i);
    int na = static_cast<int>(alive.size());

    std::map<std::pair<int, int>, std::vector<int>> shared;
    for (int ai = 0; ai < na; ++ai) {
        const auto& v = faces[alive[ai]].v;
        for (int k = 0; k < 3; ++k) {
            int a = v[k], b = v[(k + 1) % 3];
            shared[{std::min(a, b), std::max(a, b)}].push_back(ai);
        }
    }
    UnionFind uf(na);
    for (const auto& [e, fs] : shared) {
        if (fs.size() != 2) continue;
        if (faces[alive[fs[0]]].n.dot(faces[alive[fs[1]]].n) > 1.0 - 1e-7) uf.unite(fs[0], fs[1]);
    }

    std::map<int, std::vector<int>> groups;
    for (int ai = 0; ai < na; ++ai) groups[uf.find(ai)].push_back(ai);

    ConvexHull hull;
    std::vector<int> vert_used;
    for (int ai = 0; ai < na; ++ai)
        for (int vid : faces[alive[ai]].v) vert_used.push_back(vid);
    std::sort(vert_used.begin(), vert_used.end());
    vert_used.erase(std::unique(vert_used.begin(), vert_used.end()), vert_used.end());
    for (int vid : vert_used) hull.vertices.push_back(points[vid]);

    for (const auto& [root, members] : groups) {
        // area-weighted normal from the original coordinates
        Vec3 nsum{0, 0, 0};
        std::vector<int> vids;
        for (int ai : members) {
            const auto& v = faces[alive[ai]].v;
            nsum += (points[v[1]] - points[v[0]]).cross(points[v[2]] - points[v[0]]);
            for (int k = 0; k < 3; ++k) vids.push_back(v[k]);
        }
        std::sort(vids.begin(), vids.end());
        vids.erase(std::unique(vids.begin(), vids.end()), vids.end());

        HullFacet facet;
        facet.normal = nsum.normalized();
        double off = 0.0;
        for (int vid : vids) off += facet.normal.dot(points[vid]);
        facet.offset = off / static_cast<double>(vids.size());

        // in-plane frame with u x v == normal
        Vec3 ref = std::abs(facet.normal.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
        Vec3 u = facet.normal.cross(ref).normalized();
        Vec3 v = facet.normal.cross(u);
        // (u, v, n): u x v = (n x ref) x ... verify handedness below
        if (u.cross(v).dot(facet.normal) < 0) v = -v;

        std::vector<std::array<double, 2>> proj;
        proj.reserve(vids.size());
        for (int vid : vids) proj.push_back({u.dot(points[vid]), v.dot(points[vid])});
        std::vector<int> ring2d = hull2d(proj);
        for (int ri : ring2d) facet.ring.push_back(points[vids[ri]]);

        double area = 0.0;
        for (size_t k = 1; k + 1 < facet.ring.size(); ++k) {
            area += (facet.ring[k] - facet.ring[0])
                        .cross(facet.ring[k + 1] - facet.ring[0])
                        .dot(facet.normal);
        }
        facet.area = area / 2.0;
        hull.facets.push_back(std::move(facet));
    }
    std::sort(hull.facets.begin(), hull.facets.end(),
              [](const HullFacet& a, const HullFacet& b) { return a.area > b.area; });
    return hull;
}

std::vector<int> stable_facet_ids(const ConvexHull& hull, const Vec3& com, double margin) {
    std::vector<int> out;
    for (int fi = 0; fi < static_cast<int>(hull.facets.size()); ++fi) {
        const HullFacet& f = hull.facets[fi];
        if (f.normal.dot(com) > f.offset) continue;  // com must sit on the inner side
        Vec3 q = com - f.normal * (f.normal.dot(com) - f.offset);
        bool inside = true;
        int m = static_cast<int>(f.ring.size());
        for (int k = 0; k < m && inside; ++k) {
            const Vec3& a = f.ring[k];
            const Vec3& b = f.ring[(k + 1) % m];
            Vec3 inward = f.normal.cross(b - a);
            double len = inward.norm();
            if (len < 1e-15) continue;
            if ((q - a).dot(inward) / len < margin) inside = false;
        }
        if (inside) out.push_back(fi);
    }
    return out;
}

Pose resting_pose(const ConvexHull& hull, int facet_id) {
    if (facet_id < 0 || facet_id >= static_cast<int>(hull.facets.size()))
        throw ParameterError("facet id out of range");
    const HullFacet& f = hull.facets[facet_id];
    const Vec3 down{0, 0, -1};
    Vec3 axis = f.normal.cross(down);
    double s = axis.norm();
    double c = f.normal.dot(down);
    Mat3 r;
    if (s < 1e-12) {
        r = c > 0 ? Mat3::identity() : Mat3::rot_x(kPi);
    } else {
        r = Mat3::axis_angle(axis / s, std::atan2(s, c));
    }
    return Pose{r, Vec3{0, 0, f.offset}};
}

}  // namespace regrasp
