#include "regrasp/grasp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <unordered_map>
#include <vector>

#include "regrasp/errors.hpp"
#include "regrasp/mesh.hpp"
#include "regrasp/rng.hpp"

namespace regrasp {
namespace {

constexpr uint32_t kStreamGrasp = 21;
constexpr double kNeighborRadius = 0.01;
// per-band limits on the mean normal's tilt off the closing axis. The near
// band faces the cameras and is held to a tight cone; the far band is often
// seen obliquely or only at its fringe, so it gets a wider one.
const double kCosBandNear = std::cos(12.0 * kPi / 180.0);
const double kCosBandFar = std::cos(22.0 * kPi / 180.0);
// the spanning and pinch tiers run on a looser slope for the near band; a
// sparse far band (fewer visible points than kFarAttested) is silhouette
// fringe whose estimated normal carries no signal, so it is not consulted
const double kCosBandWide = std::cos(22.0 * kPi / 180.0);
constexpr double kHiddenLoose = 0.0103;
// score ramp for far sides the cameras never attested: believability of the
// far contact decays with how much matter could hide past the visible edge
constexpr double kHiddenRamp = 0.030;
// a far band needs this many visible points before its mean normal is
// trusted at the tight slope; below it the silhouette fringe dominates
constexpr int kFarAttested = 6;
// bands with fewer visible points than this carry mostly silhouette noise
constexpr int kMinBandVis = 4;
// fingers must close across a body, not a single wall; a plate inside a
// curved cavity lands on the cavity flanks and torques out
constexpr double kMinSpan = 0.0147;
// how far occluded matter may extend past the visible far edge before the
// far contact stops being believable
constexpr double kHiddenDepth = 0.006;
// cos of the friction cone half-angle for coefficient 0.3, atan(0.3)
// fused points sit on a voxel lattice, so hand-sized windows land exactly on
// point coordinates; the windows below get this much slack so membership is
// decided by the geometry, not by how the coordinates were rounded
constexpr double kGeomEps = 3e-4;
const double kCosFriction = 1.0 / std::sqrt(1.0 + 0.3 * 0.3);
// thickness of the predicted finger contact bands at the span ends
constexpr double kContactBand = 0.0053;  // one voxel plus rounding slack
// cos of the maximum predicted line-of-centers tilt off the closing axis
const double kCosCenters = std::cos(10.0 * kPi / 180.0);
constexpr double kContactPitch = 0.002;
// surface within this of the first touch belongs to a finger's contact patch
constexpr double kPatchTol = 0.003;

uint64_t cell_key(int x, int y, int z) {
    uint64_t h = 1469598103934665603ull;
    for (int v : {x, y, z}) {
        h ^= static_cast<uint32_t>(v);
        h *= 1099511628211ull;
    }
    return h;
}

// Coarse uniform-cell index over a point set. Cells may alias through the
// hash; every query re-tests the points it visits, so aliasing only costs
// time, never correctness.
class CellIndex {
  public:
    CellIndex(const std::vector<Vec3>& pts, double cell) : pts_(pts), cell_(cell) {
        for (int i = 0; i < static_cast<int>(pts.size()); ++i)
            cells_[key_of(pts[static_cast<size_t>(i)])].push_back(i);
    }

    template <typename F>
    void each_in_box(const Vec3& lo, const Vec3& hi, F&& f) const {
        int x0 = coord(lo.x), x1 = coord(hi.x);
        int y0 = coord(lo.y), y1 = coord(hi.y);
        int z0 = coord(lo.z), z1 = coord(hi.z);
        for (int x = x0; x <= x1; ++x)
            for (int y = y0; y <= y1; ++y)
                for (int z = z0; z <= z1; ++z) {
                    auto it = cells_.find(cell_key(x, y, z));
                    if (it == cells_.end()) continue;
                    for (int i : it->second) f(i, pts_[static_cast<size_t>(i)]);
                }
    }

  private:
    int coord(double v) const { return static_cast<int>(std::floor(v / cell_)); }
    uint64_t key_of(const Vec3& p) const {
        return cell_key(coord(p.x), coord(p.y), coord(p.z));
    }

    const std::vector<Vec3>& pts_;
    double cell_;
    std::unordered_map<uint64_t, std::vector<int>> cells_;
};

// number of free voxels along a short probe from p in direction dir; space
// outside the grid counts as free
int free_run(const OccupancyGrid& grid, const Vec3& p_grid, const Vec3& dir_grid) {
    int n = 0;
    for (int k = 1; k <= 3; ++k) {
        Vec3 q = p_grid + dir_grid * (grid.resolution * k);
        int ix = static_cast<int>(std::floor(q.x / grid.resolution));
        int iy = static_cast<int>(std::floor(q.y / grid.resolution));
        int iz = static_cast<int>(std::floor(q.z / grid.resolution));
        if (!grid.in_bounds(ix, iy, iz) || grid.at(ix, iy, iz) == VoxLabel::free) ++n;
    }
    return n;
}

// Estimates outward unit normals for visible points on demand: PCA over the
// 1 cm neighborhood, sign fixed by probing which side of the surface has
// more free space. Ties fall back to pointing up, then away from the grid
// center, so the choice stays deterministic and yaw-equivariant.
class NormalField {
  public:
    NormalField(const PointCloud& cloud, const CellIndex& index, const OccupancyGrid& grid)
        : cloud_(cloud), index_(index), grid_(grid),
          state_(cloud.size(), 0), normals_(cloud.size()) {
        center_grid_ = Vec3{grid.nx * grid.resolution / 2.0, grid.ny * grid.resolution / 2.0,
                            grid.nz * grid.resolution / 2.0};
        to_grid_ = grid.origin.inverse();
        centroid_ = Vec3{0, 0, 0};
        int nv = 0;
        for (size_t i = 0; i < cloud.size(); ++i) {
            if (cloud.labels[i] != PointLabel::visible) continue;
            centroid_ += cloud.points[i];
            ++nv;
        }
        if (nv > 0) centroid_ = centroid_ * (1.0 / nv);
    }

    std::optional<Vec3> at(int i) {
        size_t s = static_cast<size_t>(i);
        if (state_[s] == 0) {
            normals_[s] = compute(i);
            state_[s] = normals_[s] ? 1 : 2;
        }
        return state_[s] == 1 ? std::optional<Vec3>(*normals_[s]) : std::nullopt;
    }

  private:
    std::optional<Vec3> compute(int i) const {
        const Vec3 p = cloud_.points[static_cast<size_t>(i)];
        Vec3 lo = p - Vec3{kNeighborRadius, kNeighborRadius, kNeighborRadius};
        Vec3 hi = p + Vec3{kNeighborRadius, kNeighborRadius, kNeighborRadius};
        std::vector<int> nbr;
        // fused points sit on a voxel lattice, so the second ring along an
        // axis lands exactly on the radius; grow the ball a hair so that
        // shell stays in no matter how the coordinates were rounded
        const double r = kNeighborRadius + 1e-9;
        index_.each_in_box(lo, hi, [&](int j, const Vec3& q) {
            if (cloud_.labels[static_cast<size_t>(j)] != PointLabel::visible) return;
            Vec3 d = q - p;
            if (d.dot(d) <= r * r) nbr.push_back(j);
        });
        if (nbr.size() < 3) return std::nullopt;
        std::sort(nbr.begin(), nbr.end());  // accumulation order independent of cell hashing

        Vec3 mean{0, 0, 0};
        for (int j : nbr) mean = mean + cloud_.points[static_cast<size_t>(j)];
        mean = mean * (1.0 / static_cast<double>(nbr.size()));
        double cov[9] = {0, 0, 0, 0, 0, 0, 0, 0, 0};
        for (int j : nbr) {
            Vec3 d = cloud_.points[static_cast<size_t>(j)] - mean;
            cov[0] += d.x * d.x; cov[1] += d.x * d.y; cov[2] += d.x * d.z;
            cov[4] += d.y * d.y; cov[5] += d.y * d.z; cov[8] += d.z * d.z;
        }
        cov[3] = cov[1]; cov[6] = cov[2]; cov[7] = cov[5];
        Mat3 c;
        std::copy(cov, cov + 9, c.m.begin());
        std::array<double, 3> evals;
        Mat3 evecs;
        symmetric_eigen3(c, evals, evecs);
        // A strip of points one voxel wide has no tangent plane; the two
        // small eigenvalues tie to rounding error and the eigenvector is an
        // arbitrary direction across the strip. Every body here is lathed,
        // so face such rings and columns radially out from the cloud.
        if (evals[1] - evals[0] < 1e-4 * std::max(evals[2], 1e-12)) {
            Vec3 radial{p.x - centroid_.x, p.y - centroid_.y, 0.0};
            double rl = radial.norm();
            if (rl < 1e-6) return std::nullopt;
            return radial * (1.0 / rl);
        }
        Vec3 n = evecs.col(0);
        double len = n.norm();
        if (len < 1e-12) return std::nullopt;
        n = n * (1.0 / len);

        Vec3 pg = to_grid_.apply(p);
        Vec3 ng = to_grid_.rotate(n);
        int fwd = free_run(grid_, pg, ng);
        int bwd = free_run(grid_, pg, ng * -1.0);
        if (fwd < bwd) {
            n = n * -1.0;
        } else if (fwd == bwd) {
            if (n.z < 0.0) {
                n = n * -1.0;
            } else if (n.z == 0.0 && n.dot(p - grid_.origin.apply(center_grid_)) < 0.0) {
                n = n * -1.0;
            }
        }
        return n;
    }

    const PointCloud& cloud_;
    const CellIndex& index_;
    const OccupancyGrid& grid_;
    Vec3 center_grid_;
    Vec3 centroid_;
    Pose to_grid_;
    std::vector<uint8_t> state_;
    std::vector<std::optional<Vec3>> normals_;
};

// separating-axis test between an oriented box (pose * box) and an
// axis-aligned cube, both expressed in the same frame
bool obb_cube_overlap(const Pose& pose, const Aabb& box, const Vec3& cube_center, double half) {
    const Vec3 he = box.extent() * 0.5;
    const Vec3 c = pose.apply(box.center());
    const Vec3 t = c - cube_center;
    const Vec3 u[3] = {pose.R.col(0), pose.R.col(1), pose.R.col(2)};
    const double e[3] = {he.x, he.y, he.z};

    auto separated = [&](const Vec3& axis) {
        double ra = half * (std::abs(axis.x) + std::abs(axis.y) + std::abs(axis.z));
        double rb = e[0] * std::abs(axis.dot(u[0])) + e[1] * std::abs(axis.dot(u[1])) +
                    e[2] * std::abs(axis.dot(u[2]));
        return std::abs(axis.dot(t)) > ra + rb;
    };

    const Vec3 world[3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    for (const Vec3& a : world)
        if (separated(a)) return false;
    for (const Vec3& a : u)
        if (separated(a)) return false;
    for (const Vec3& w : world)
        for (const Vec3& a : u) {
            Vec3 cr = w.cross(a);
            if (cr.dot(cr) < 1e-18) continue;
            if (separated(cr)) return false;
        }
    return true;
}

Aabb world_aabb_of(const Pose& pose, const Aabb& box) {
    Aabb out;
    const Vec3 he = box.extent() * 0.5;
    const Vec3 c = pose.apply(box.center());
    Vec3 r{0, 0, 0};
    for (int k = 0; k < 3; ++k) {
        Vec3 u = pose.R.col(k);
        double ek = k == 0 ? he.x : (k == 1 ? he.y : he.z);
        r = r + Vec3{std::abs(u.x), std::abs(u.y), std::abs(u.z)} * ek;
    }
    out.expand(c - r);
    out.expand(c + r);
    return out;
}

struct RegionPoint {
    int index;
    Vec3 local;
};

}  // namespace

bool box_clear_of_grid(const OccupancyGrid& grid, const Pose& pose, const Aabb& box) {
    const Pose in_grid = grid.origin.inverse() * pose;
    Aabb wa = world_aabb_of(in_grid, box);
    if (wa.lo.z < -1e-9) return false;  // under the table surface

    const double res = grid.resolution;
    int x0 = std::max(0, static_cast<int>(std::floor(wa.lo.x / res)));
    int y0 = std::max(0, static_cast<int>(std::floor(wa.lo.y / res)));
    int z0 = std::max(0, static_cast<int>(std::floor(wa.lo.z / res)));
    int x1 = std::min(grid.nx - 1, static_cast<int>(std::floor(wa.hi.x / res)));
    int y1 = std::min(grid.ny - 1, static_cast<int>(std::floor(wa.hi.y / res)));
    int z1 = std::min(grid.nz - 1, static_cast<int>(std::floor(wa.hi.z / res)));
    const double half = res / 2.0;
    for (int iz = z0; iz <= z1; ++iz)
        for (int iy = y0; iy <= y1; ++iy)
            for (int ix = x0; ix <= x1; ++ix) {
                if (grid.at(ix, iy, iz) != VoxLabel::occupied) continue;
                Vec3 cc{(ix + 0.5) * res, (iy + 0.5) * res, (iz + 0.5) * res};
                // a face resting exactly on a voxel is a graze, not a hit
                if (obb_cube_overlap(in_grid, box, cc, half - 1e-9)) return false;
            }
    return true;
}

std::vector<GraspCandidate> sample_grasps(const PointCloud& cloud, const OccupancyGrid& grid,
                                          const HandModel& hand, int m, uint64_t seed) {
    if (m < 0) throw ParameterError("sample_grasps: negative candidate count");
    std::vector<GraspCandidate> out;
    if (m == 0 || cloud.size() == 0) return out;
    struct Scored {
        GraspCandidate cand;
        int tier;
        double score;
    };
    std::vector<Scored> found;

    std::vector<int> visible;
    for (int i = 0; i < static_cast<int>(cloud.size()); ++i)
        if (cloud.labels[static_cast<size_t>(i)] == PointLabel::visible) visible.push_back(i);
    if (visible.empty()) return out;

    CellIndex index(cloud.points, 0.02);
    NormalField normals(cloud, index, grid);

    Rng rng(mix_seed(seed, kStreamGrasp));
    std::vector<int> order = visible;
    for (size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.uniform_int(i)]);

    const double ap = hand.max_aperture;
    const double depth = hand.finger_depth;
    const double hz = hand.finger_width / 2.0;
    const auto boxes = hand.collision_boxes();

    for (int pi : order) {
        auto n_opt = normals.at(pi);
        if (!n_opt) continue;
        const Vec3 n = *n_opt;
        const Vec3 p = cloud.points[static_cast<size_t>(pi)];

        // sweep anchor: gravity projected off the closing axis. A normal
        // straight along gravity leaves no anchor; nothing the fingers can
        // straddle has one anyway (the span under a flat top is the whole
        // solid), so skip the point.
        Vec3 base = Vec3{0, 0, 1} - n * n.z;
        if (base.norm() < 1e-9) continue;
        base = base.normalized();

        for (int k = 0; k < 24; ++k) {
            const Vec3 a = Mat3::axis_angle(n, k * kPi / 12.0) * base;
            const Mat3 R = Mat3::from_cols(a, n, a.cross(n));
            Pose pose{R, p - a * (depth / 2.0)};

            // Cloud inside the closing slab, gathered wide enough to allow
            // re-centering. The hand is centered on the visible matter; what
            // the cameras never saw must not steer the pose.
            std::vector<RegionPoint> region;
            double vmin = std::numeric_limits<double>::infinity();
            double vmax = -vmin;
            Aabb slack{{0.0, -ap, -hz}, {depth, ap, hz}};
            Aabb wa = world_aabb_of(pose, slack);
            Pose inv = pose.inverse();
            index.each_in_box(wa.lo, wa.hi, [&](int j, const Vec3& q) {
                Vec3 l = inv.apply(q);
                if (l.x < -kGeomEps || l.x > depth + kGeomEps ||
                    std::abs(l.z) > hz + kGeomEps || std::abs(l.y) > ap + kGeomEps)
                    return;
                if (std::abs(l.y) <= ap / 2.0 + kGeomEps &&
                    cloud.labels[static_cast<size_t>(j)] == PointLabel::visible) {
                    vmin = std::min(vmin, l.y);
                    vmax = std::max(vmax, l.y);
                }
                region.push_back({j, l});
            });
            if (!(vmin <= vmax)) continue;

            const double shift = (vmin + vmax) / 2.0;
            pose.t = pose.t + R.col(1) * shift;

            // contacts sit at the visible extremes of the re-clipped closing
            // volume; occluded matter is tracked only for the hidden-depth
            // bound below
            vmin = std::numeric_limits<double>::infinity();
            vmax = -vmin;
            double omin = vmin;
            for (const RegionPoint& rp : region) {
                const double y = rp.local.y - shift;
                if (std::abs(y) > ap / 2.0 + kGeomEps) continue;
                omin = std::min(omin, rp.local.y);
                if (cloud.labels[static_cast<size_t>(rp.index)] != PointLabel::visible)
                    continue;
                vmin = std::min(vmin, rp.local.y);
                vmax = std::max(vmax, rp.local.y);
            }
            if (!(vmin <= vmax)) continue;
            const double ymin = vmin, ymax = vmax;

            // Predict the finger contact patches as the bands at the ends
            // of the visible span and ask the normals there how steeply the
            // surface meets the closing axis. Sign is useless on thin or
            // half-hidden geometry (the camera often sees the back face of a
            // wall), so the test is on magnitude.
            bool any_visible = false;
            Vec3 band_hi{0, 0, 0}, band_lo{0, 0, 0};
            Vec3 nsum_hi{0, 0, 0}, nsum_lo{0, 0, 0};
            int n_hi = 0, n_lo = 0, vis_hi = 0, vis_lo = 0;
            for (const RegionPoint& rp : region) {
                double y = rp.local.y - shift;
                if (std::abs(y) > ap / 2.0 + kGeomEps) continue;
                bool in_hi = ymax - rp.local.y <= kContactBand;
                bool in_lo = rp.local.y - ymin <= kContactBand;
                if (in_hi) {
                    band_hi += rp.local;
                    ++n_hi;
                }
                if (in_lo) {
                    band_lo += rp.local;
                    ++n_lo;
                }
                if (cloud.labels[static_cast<size_t>(rp.index)] != PointLabel::visible)
                    continue;
                any_visible = true;
                auto nj = normals.at(rp.index);
                if (!nj) continue;
                if (in_hi) {
                    nsum_hi += *nj;
                    ++vis_hi;
                }
                if (in_lo) {
                    nsum_lo += *nj;
                    ++vis_lo;
                }
            }
            if (!any_visible) continue;
            const double hi_mag =
                vis_hi > 0 ? std::abs(nsum_hi.normalized().dot(n)) : 0.0;
            const double lo_mag =
                vis_lo > 0 ? std::abs(nsum_lo.normalized().dot(n)) : 0.0;
            const double hidden = ymin - omin;
            const double span = ymax - ymin;

            // Grade the hypothesis instead of making one cut. Tier 0 wants
            // both contact bands attested and flat to the closing axis with
            // almost nothing unseen behind the far edge; those are stable
            // against the true shape nine times out of ten. Tier 1 spans a
            // full body on weaker far-side evidence (hidden matter may
            // extend a little past the visible edge; at the y extremum of a
            // smooth surface the true normal lines up with the axis by
            // itself). Tier 2 pinches a thin slab such as a wall or rim;
            // most of those torque out of a plate gripper, but they are the
            // only handle the cloud offers on some shapes, so they are kept
            // and ranked last.
            int tier = -1;
            if (vis_hi >= kMinBandVis && hi_mag >= kCosBandNear &&
                vis_lo >= 1 && lo_mag >= kCosBandFar &&
                hidden <= kHiddenDepth && span >= kMinSpan) {
                tier = 0;
            } else if (vis_hi >= 1 && hi_mag >= kCosBandWide && span >= kMinSpan &&
                       (vis_lo < kFarAttested || lo_mag >= kCosBandWide)) {
                tier = 1;
            } else if (vis_hi >= 1 && hi_mag >= kCosBandWide && span < kMinSpan &&
                       hidden <= kHiddenLoose) {
                tier = 2;
            }
            if (tier < 0) continue;
            // a sparse far band is silhouette fringe; its normals are noise, so
            // the far side is scored purely by how little matter could hide
            // past the visible edge, and never outranks attested evidence
            const double lo_eff =
                vis_lo >= kFarAttested
                    ? lo_mag
                    : 0.9 * std::clamp(1.0 - hidden / kHiddenRamp, 0.0, 1.0);
            const double score = std::min(hi_mag, lo_eff);

            // predicted line of centers: the fingers will meet the cloud at
            // the ends of the span, and the segment between those contact
            // bands has to run close to the closing axis or the grasp will
            // torque out of the friction cone
            if (ymax - ymin > 2.0 * kContactBand && n_hi > 0 && n_lo > 0) {
                Vec3 l = band_hi * (1.0 / n_hi) - band_lo * (1.0 / n_lo);
                double len = l.norm();
                if (len > 1e-9 && l.y / len < kCosCenters) continue;
            }

            bool clear = true;
            for (const Aabb& b : boxes) {
                if (!box_clear_of_grid(grid, pose, b)) {
                    clear = false;
                    break;
                }
            }
            if (!clear) continue;
            found.push_back({{pose, ap}, tier, score});
        }
    }

    // best evidence first; callers that cap m get the strongest hypotheses
    std::stable_sort(found.begin(), found.end(), [](const Scored& a, const Scored& b) {
        if (a.tier != b.tier) return a.tier < b.tier;
        return a.score > b.score;
    });
    if (static_cast<int>(found.size()) > m) found.resize(static_cast<size_t>(m));
    out.reserve(found.size());
    for (const Scored& s : found) out.push_back(s.cand);
    return out;
}

namespace {

struct ContactSample {
    double y;   // along the closing axis, hand frame
    Vec3 p;     // world
    Vec3 n;     // outward world normal
    int obj;
};

// dense surface samples of every true mesh inside the closing region
std::vector<ContactSample> region_samples(const Scene& scene, const GraspCandidate& cand,
                                          const HandModel& hand) {
    std::vector<ContactSample> out;
    double ap = cand.aperture > 0.0 ? std::min(cand.aperture, hand.max_aperture)
                                    : hand.max_aperture;
    Aabb region{{0.0, -ap / 2.0, -hand.finger_width / 2.0},
                {hand.finger_depth, ap / 2.0, hand.finger_width / 2.0}};
    Aabb wa = world_aabb_of(cand.pose, region);
    Pose inv = cand.pose.inverse();

    for (const RigidObject& obj : scene.objects) {
        for (const auto& tri : obj.mesh.tris) {
            Vec3 a = obj.pose.apply(obj.mesh.vertices[static_cast<size_t>(tri[0])]);
            Vec3 b = obj.pose.apply(obj.mesh.vertices[static_cast<size_t>(tri[1])]);
            Vec3 c = obj.pose.apply(obj.mesh.vertices[static_cast<size_t>(tri[2])]);
            Aabb ta;
            ta.expand(a);
            ta.expand(b);
            ta.expand(c);
            if (!ta.overlaps(wa)) continue;
            Vec3 nrm = (b - a).cross(c - a);
            double len = nrm.norm();
            if (len < 1e-16) continue;
            nrm = nrm * (1.0 / len);

            int nu = std::max(1, static_cast<int>(std::ceil((b - a).norm() / kContactPitch)));
            int nv = std::max(1, static_cast<int>(std::ceil((c - a).norm() / kContactPitch)));
            for (int i = 0; i <= nu; ++i) {
                double u = static_cast<double>(i) / nu;
                for (int j = 0; j <= nv; ++j) {
                    double v = static_cast<double>(j) / nv;
                    if (u + v > 1.0 + 1e-12) break;
                    Vec3 p = a + (b - a) * u + (c - a) * v;
                    Vec3 l = inv.apply(p);
                    if (l.x < region.lo.x || l.x > region.hi.x || l.y < region.lo.y ||
                        l.y > region.hi.y || l.z < region.lo.z || l.z > region.hi.z)
                        continue;
                    out.push_back({l.y, p, nrm, obj.id});
                }
            }
        }
    }
    return out;
}

// Each finger's contact patch is the surface within kPatchTol of where it
// first touches. A patch mixing objects counts as contact on two objects.
GraspQuality classify(const std::vector<ContactSample>& samples, const GraspCandidate& cand,
                      int* grasped) {
    if (grasped) *grasped = -1;
    if (samples.empty()) return GraspQuality::miss;

    double y_hi = -std::numeric_limits<double>::infinity();
    double y_lo = std::numeric_limits<double>::infinity();
    int obj_hi = -1, obj_lo = -1;
    for (const ContactSample& s : samples) {
        if (s.y > y_hi) {
            y_hi = s.y;
            obj_hi = s.obj;
        }
        if (s.y < y_lo) {
            y_lo = s.y;
            obj_lo = s.obj;
        }
    }
    if (y_hi - y_lo < 1e-5) return GraspQuality::miss;  // a single touch, no pinch
    if (obj_hi != obj_lo) return GraspQuality::miss;

    Vec3 c_hi{0, 0, 0}, c_lo{0, 0, 0}, n_hi{0, 0, 0}, n_lo{0, 0, 0};
    int k_hi = 0, k_lo = 0;
    for (const ContactSample& s : samples) {
        if (y_hi - s.y <= kPatchTol) {
            if (s.obj != obj_hi) return GraspQuality::miss;
            c_hi += s.p;
            n_hi += s.n;
            ++k_hi;
        }
        if (s.y - y_lo <= kPatchTol) {
            if (s.obj != obj_lo) return GraspQuality::miss;
            c_lo += s.p;
            n_lo += s.n;
            ++k_lo;
        }
    }
    c_hi = c_hi * (1.0 / k_hi);
    c_lo = c_lo * (1.0 / k_lo);
    if (n_hi.norm() < 1e-9 || n_lo.norm() < 1e-9) return GraspQuality::unstable;
    n_hi = n_hi.normalized();
    n_lo = n_lo.normalized();

    const Vec3 ydir = cand.pose.R.col(1);
    Vec3 l = c_hi - c_lo;
    double len = l.norm();
    if (len < 1e-9) return GraspQuality::miss;
    l = l * (1.0 / len);

    bool stable = n_hi.dot(ydir) >= kCosFriction && n_lo.dot(ydir) <= -kCosFriction &&
                  l.dot(ydir) >= kCosFriction;
    if (!stable) return GraspQuality::unstable;
    if (grasped) *grasped = obj_hi;
    return GraspQuality::stable;
}

}  // namespace

GraspQuality grasp_quality(const Scene& scene, const GraspCandidate& cand,
                           const HandModel& hand) {
    return classify(region_samples(scene, cand, hand), cand, nullptr);
}

int grasped_object(const Scene& scene, const GraspCandidate& cand, const HandModel& hand) {
    int id = -1;
    classify(region_samples(scene, cand, hand), cand, &id);
    return id;
}

int touched_object(const Scene& scene, const GraspCandidate& cand, const HandModel& hand) {
    std::map<int, int> hits;
    for (const ContactSample& s : region_samples(scene, cand, hand)) ++hits[s.obj];
    int best = -1, count = 0;
    for (auto [id, n] : hits)
        if (n > count) {
            best = id;
            count = n;
        }
    return best;
}

}  // namespace regrasp
