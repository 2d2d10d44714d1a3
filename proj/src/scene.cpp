#include "regrasp/scene.hpp"

#include <algorithm>
#include <cmath>

#include "regrasp/errors.hpp"

namespace regrasp {

namespace {

// seed streams so object geometry, heights, and poses draw independently
constexpr uint64_t kStreamBottle = 11;
constexpr uint64_t kStreamMug = 12;
constexpr uint64_t kStreamHeight = 13;
constexpr uint64_t kStreamPose = 14;

// Revolve a closed (r, z) profile around +z. The profile must start and end
// on the axis (r == 0); orientation is fixed afterwards by the volume sign.
TriMesh revolve_closed(const std::vector<std::array<double, 2>>& profile, int segments) {
    TriMesh m;
    std::vector<std::vector<int>> rings(profile.size());
    for (size_t i = 0; i < profile.size(); ++i) {
        double r = profile[i][0], z = profile[i][1];
        if (r == 0.0) {
            rings[i] = {static_cast<int>(m.vertices.size())};
            m.vertices.push_back({0.0, 0.0, z});
        } else {
            for (int k = 0; k < segments; ++k) {
                double a = 2.0 * kPi * k / segments;
                rings[i].push_back(static_cast<int>(m.vertices.size()));
                m.vertices.push_back({r * std::cos(a), r * std::sin(a), z});
            }
        }
    }
    for (size_t i = 0; i + 1 < profile.size(); ++i) {
        const auto& lo = rings[i];
        const auto& hi = rings[i + 1];
        for (int k = 0; k < segments; ++k) {
            int kn = (k + 1) % segments;
            if (lo.size() == 1 && hi.size() == 1) continue;
            if (lo.size() == 1) {
                m.tris.push_back({lo[0], hi[kn], hi[k]});
            } else if (hi.size() == 1) {
                m.tris.push_back({lo[k], lo[kn], hi[0]});
            } else {
                m.tris.push_back({lo[k], lo[kn], hi[kn]});
                m.tris.push_back({lo[k], hi[kn], hi[k]});
            }
        }
    }
    if (m.volume() < 0.0)
        for (auto& t : m.tris) std::swap(t[1], t[2]);
    return m;
}

// closed tube along a circular arc in the xz-plane
TriMesh handle_tube(double arc_cx, double arc_cz, double arc_r, double u0, double u1,
                    double tube_r, int arc_steps, int tube_segs) {
    TriMesh m;
    std::vector<std::vector<int>> rings(arc_steps + 1);
    for (int i = 0; i <= arc_steps; ++i) {
        double u = u0 + (u1 - u0) * i / arc_steps;
        Vec3 er{std::cos(u), 0.0, std::sin(u)};
        Vec3 center{arc_cx + arc_r * er.x, 0.0, arc_cz + arc_r * er.z};
        for (int k = 0; k < tube_segs; ++k) {
            double v = 2.0 * kPi * k / tube_segs;
            Vec3 p = center + er * (tube_r * std::cos(v)) + Vec3{0, 1, 0} * (tube_r * std::sin(v));
            rings[i].push_back(static_cast<int>(m.vertices.size()));
            m.vertices.push_back(p);
        }
    }
    for (int i = 0; i < arc_steps; ++i) {
        for (int k = 0; k < tube_segs; ++k) {
            int kn = (k + 1) % tube_segs;
            m.tris.push_back({rings[i][k], rings[i][kn], rings[i + 1][kn]});
            m.tris.push_back({rings[i][k], rings[i + 1][kn], rings[i + 1][k]});
        }
    }
    // end caps
    for (int end = 0; end < 2; ++end) {
        int i = end == 0 ? 0 : arc_steps;
        double u = end == 0 ? u0 : u1;
        int c = static_cast<int>(m.vertices.size());
        m.vertices.push_back({arc_cx + arc_r * std::cos(u), 0.0, arc_cz + arc_r * std::sin(u)});
        for (int k = 0; k < tube_segs; ++k) {
            int kn = (k + 1) % tube_segs;
            if (end == 0)
                m.tris.push_back({c, rings[i][kn], rings[i][k]});
            else
                m.tris.push_back({c, rings[i][k], rings[i][kn]});
        }
    }
    if (m.volume() < 0.0)
        for (auto& t : m.tris) std::swap(t[1], t[2]);
    return m;
}

RigidObject finish_object(Category cat, TriMesh mesh, double height) {
    RigidObject obj;
    obj.category = cat;
    obj.height = height;
    obj.com = mesh.volume_centroid();
    obj.hull = convex_hull(mesh.vertices);
    obj.mesh = std::move(mesh);
    return obj;
}

Aabb posed_bounds(const RigidObject& obj) {
    Aabb b;
    for (const Vec3& v : obj.hull.vertices) b.expand(obj.pose.apply(v));
    return b;
}

bool objects_collide(const RigidObject& a, const RigidObject& b) {
    return meshes_intersect(a.mesh.transformed(a.pose), b.mesh.transformed(b.pose));
}

}  // namespace

const char* category_name(Category c) { return c == Category::bottle ? "bottle" : "mug"; }

const RigidObject* Scene::find(int object_id) const {
    for (const auto& o : objects)
        if (o.id == object_id) return &o;
    return nullptr;
}

RigidObject* Scene::find(int object_id) {
    for (auto& o : objects)
        if (o.id == object_id) return &o;
    return nullptr;
}

Aabb standard_workspace() { return Aabb{{-0.2, -0.2, 0.0}, {0.2, 0.2, 0.3}}; }

RigidObject generate_bottle(uint64_t seed, double height) {
    if (!(height >= 0.10 && height <= 0.20))
        throw ParameterError("bottle height must be in [0.10, 0.20] m");
    Rng rng(mix_seed(seed, kStreamBottle));
    double rb = rng.uniform(0.02, 0.045);
    double rn = rb * rng.uniform(0.35, 0.70);
    double body_top = height * rng.uniform(0.55, 0.70);
    double neck_lo = height * rng.uniform(0.78, 0.90);
    double curve = rng.uniform(0.8, 2.2);

    std::vector<std::array<double, 2>> profile;
    profile.push_back({0.0, 0.0});
    profile.push_back({rb, 0.0});
    profile.push_back({rb, body_top});
    const int shoulder_rings = 6;
    for (int i = 1; i <= shoulder_rings; ++i) {
        double t = static_cast<double>(i) / (shoulder_rings + 1);
        double r = rn + (rb - rn) * std::pow(1.0 - t, curve);
        profile.push_back({r, body_top + (neck_lo - body_top) * t});
    }
    profile.push_back({rn, neck_lo});
    profile.push_back({rn, height});
    profile.push_back({0.0, height});

    return finish_object(Category::bottle, revolve_closed(profile, 24), height);
}

RigidObject generate_mug(uint64_t seed, double height) {
    if (!(height >= 0.06 && height <= 0.12))
        throw ParameterError("mug height must be in [0.06, 0.12] m");
    Rng rng(mix_seed(seed, kStreamMug));
    double ro = rng.uniform(0.025, 0.045);
    double wall = rng.uniform(0.003, 0.006);
    double ri = ro - wall;
    double floor_z = wall;

    std::vector<std::array<double, 2>> profile = {
        {0.0, 0.0}, {ro, 0.0}, {ro, height}, {ri, height}, {ri, floor_z}, {0.0, floor_z},
    };
    TriMesh mesh = revolve_closed(profile, 24);

    // handle: circular arc through two wall attach points, bulging outward
    double z1 = 0.25 * height, z2 = 0.75 * height;
    double zc = 0.5 * (z1 + z2);
    double bulge = rng.uniform(0.015, 0.025);
    double tube_r = rng.uniform(0.0035, 0.005);
    double ax = ro - 0.0015;  // attach centers sit inside the wall
    // circle in xz through (ax, z2) and (ax + bulge + tube_r? no: apex x) ...
    // center lies on z = zc; solve (cx-ax)^2 + (zc-z2)^2 = (cx-apex)^2
    double apex = ro + bulge;
    double dz = z2 - zc;
    double cx = (apex * apex - ax * ax - dz * dz) / (2.0 * (apex - ax));
    double arc_r = apex - cx;
    double u_top = std::atan2(z2 - zc, ax - cx);
    double u_bot = -u_top;
    mesh.append(handle_tube(cx, zc, arc_r, u_bot, u_top, tube_r, 10, 8));

    return finish_object(Category::mug, mesh, height);
}

RigidObject make_object(Category cat, uint64_t object_seed) {
    Rng rng(mix_seed(object_seed, kStreamHeight));
    if (cat == Category::bottle) return generate_bottle(object_seed, rng.uniform(0.10, 0.20));
    return generate_mug(object_seed, rng.uniform(0.06, 0.12));
}

RestClass classify_tilt(double tilt) {
    if (tilt < kPi / 4.0) return RestClass::upright;
    if (tilt > 3.0 * kPi / 4.0) return RestClass::upside_down;
    return RestClass::sideways;
}

Pose sample_resting_pose(const RigidObject& obj, Rng& rng) {
    std::vector<int> stable = stable_facet_ids(obj.hull, obj.com);
    if (stable.empty()) throw SceneGenError("object has no stable resting facet");

    std::array<std::vector<int>, 3> by_class;
    for (int fi : stable) {
        Pose rest = resting_pose(obj.hull, fi);
        double tilt = std::acos(std::clamp((rest.R * Vec3{0, 0, 1}).z, -1.0, 1.0));
        by_class[static_cast<int>(classify_tilt(tilt))].push_back(fi);
    }
    std::vector<const std::vector<int>*> present;
    for (const auto& cls : by_class)
        if (!cls.empty()) present.push_back(&cls);

    const auto& cls = *present[rng.uniform_int(present.size())];
    int facet = cls[rng.uniform_int(cls.size())];
    Pose rest = resting_pose(obj.hull, facet);
    double yaw = rng.uniform(0.0, 2.0 * kPi);
    return Pose{Mat3::rot_z(yaw), {0, 0, 0}} * rest;
}

namespace {

// translation interval so the posed bounds fit the workspace in x and y
void place_at(RigidObject& obj, const Aabb& ws, double x, double y) {
    obj.pose.t.x = 0.0;
    obj.pose.t.y = 0.0;
    Aabb b = posed_bounds(obj);
    double x_lo = ws.lo.x - b.lo.x, x_hi = ws.hi.x - b.hi.x;
    double y_lo = ws.lo.y - b.lo.y, y_hi = ws.hi.y - b.hi.y;
    if (x_lo > x_hi || y_lo > y_hi) throw SceneGenError("object does not fit the workspace");
    obj.pose.t.x = std::clamp(x, x_lo, x_hi);
    obj.pose.t.y = std::clamp(y, y_lo, y_hi);
}

}  // namespace

Scene spawn_isolation(Category cat, uint64_t object_seed, uint64_t pose_seed) {
    return spawn_isolation(cat, object_seed, pose_seed, standard_workspace());
}

Scene spawn_isolation(Category cat, uint64_t object_seed, uint64_t pose_seed,
                      const Aabb& workspace) {
    Scene scene;
    scene.workspace = workspace;
    scene.rng_seed = pose_seed;

    RigidObject obj = make_object(cat, object_seed);
    Rng rng(mix_seed(pose_seed, kStreamPose));
    obj.pose = sample_resting_pose(obj, rng);
    Aabb b = posed_bounds(obj);
    double x_lo = workspace.lo.x - b.lo.x, x_hi = workspace.hi.x - b.hi.x;
    double y_lo = workspace.lo.y - b.lo.y, y_hi = workspace.hi.y - b.hi.y;
    if (x_lo > x_hi || y_lo > y_hi) throw SceneGenError("object does not fit the workspace");
    place_at(obj, workspace, rng.uniform(x_lo, x_hi), rng.uniform(y_lo, y_hi));
    obj.id = 0;
    scene.objects.push_back(std::move(obj));
    return scene;
}

Scene spawn_clutter(Category cat, int n, uint64_t object_seed, uint64_t pose_seed) {
    return spawn_clutter(cat, n, object_seed, pose_seed, standard_workspace());
}

Scene spawn_clutter(Category cat, int n, uint64_t object_seed, uint64_t pose_seed,
                    const Aabb& workspace) {
    if (n < 1) throw ParameterError("clutter needs at least one object");
    if (n == 1) return spawn_isolation(cat, object_seed, pose_seed, workspace);

    Scene scene;
    scene.workspace = workspace;
    scene.rng_seed = pose_seed;
    Rng rng(mix_seed(pose_seed, kStreamPose));
    const double drop_sigma = 0.07;
    double cx = workspace.center().x, cy = workspace.center().y;

    for (int i = 0; i < n; ++i) {
        RigidObject obj = make_object(cat, mix_seed(object_seed, i));
        obj.id = i;
        bool placed = false;
        for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
            obj.pose = sample_resting_pose(obj, rng);
            place_at(obj, workspace, cx + rng.normal(0.0, drop_sigma),
                     cy + rng.normal(0.0, drop_sigma));
            placed = true;
            for (const auto& other : scene.objects) {
                if (objects_collide(obj, other)) {
                    placed = false;
                    break;
                }
            }
        }
        if (!placed) throw SceneGenError("clutter placement failed after 100 retries");
        scene.objects.push_back(std::move(obj));
    }
    return scene;
}

SettleReport settle_state(const Scene& scene, int object_id) {
    const RigidObject* obj = scene.find(object_id);
    if (!obj) throw ParameterError("no such object id");
    SettleReport rep;
    double min_z = std::numeric_limits<double>::infinity();
    for (const Vec3& v : obj->mesh.vertices) min_z = std::min(min_z, obj->pose.apply(v).z);
    rep.clearance = min_z - scene.table_height;
    rep.tilt = std::acos(std::clamp((obj->pose.R * Vec3{0, 0, 1}).z, -1.0, 1.0));
    return rep;
}

}  // namespace regrasp
