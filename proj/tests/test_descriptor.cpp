#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "regrasp/descriptor.hpp"
#include "regrasp/errors.hpp"
#include "regrasp/rng.hpp"

using namespace regrasp;

namespace {

PointCloud random_cloud(int n, uint64_t seed, double spread) {
    Rng rng(seed);
    PointCloud cloud;
    for (int i = 0; i < n; ++i) {
        Vec3 p{rng.uniform(-spread, spread), rng.uniform(-spread, spread),
               rng.uniform(-spread, spread)};
        cloud.push(p, rng.uniform(0.0, 1.0) < 0.7 ? PointLabel::visible : PointLabel::occluded);
    }
    return cloud;
}

Pose random_pose(uint64_t seed) {
    Rng rng(seed);
    Vec3 axis{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    Mat3 r = Mat3::axis_angle(axis.normalized(), rng.uniform(-3.0, 3.0));
    return Pose{r, {rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)}};
}

}  // namespace

TEST_CASE("extraction keeps cuboid points and drops the rest") {
    DescriptorConfig cfg;
    Pose t = random_pose(11);

    PointCloud cloud;
    cloud.push(t.t, PointLabel::visible);  // the pose origin itself
    Descriptor d = extract(cloud, t, cfg);
    REQUIRE(d.size() == 1);
    CHECK(d.points[0].norm() < 1e-12);
    CHECK(d.labels[0] == PointLabel::visible);

    // hand-frame points just inside and just outside the +x face
    double hx = cfg.cuboid_dims.x / 2.0;
    PointCloud edge;
    edge.push(t.apply({hx, 0.0, 0.0}), PointLabel::occluded);
    edge.push(t.apply({hx + 1e-6, 0.0, 0.0}), PointLabel::visible);
    Descriptor e = extract(edge, t, cfg);
    REQUIRE(e.size() == 1);
    CHECK(e.labels[0] == PointLabel::occluded);
    CHECK(std::abs(e.points[0].x - hx) < 1e-9);
}

TEST_CASE("extraction is invariant under a common rigid motion") {
    DescriptorConfig cfg;
    Pose t = random_pose(6);
    Pose g = random_pose(7);
    PointCloud cloud = random_cloud(400, 5, 0.08);
    for (auto& p : cloud.points) p = p + t.t;  // cluster around the pose

    Descriptor base = extract(cloud, t, cfg);
    PointCloud moved;
    for (size_t i = 0; i < cloud.size(); ++i) moved.push(g.apply(cloud.points[i]), cloud.labels[i]);
    Descriptor turned = extract(moved, g * t, cfg);

    REQUIRE(base.size() == turned.size());
    REQUIRE(base.size() > 20);  // the cuboid actually caught a sample
    for (size_t i = 0; i < base.size(); ++i) {
        CHECK((base.points[i] - turned.points[i]).norm() < 1e-9);
        CHECK(base.labels[i] == turned.labels[i]);
    }
}

TEST_CASE("truncation is idempotent and monotone in the cuboid") {
    PointCloud cloud = random_cloud(500, 13, 0.3);
    Pose t = random_pose(14);

    Descriptor small = extract(cloud, t, DescriptorConfig::standard());
    Descriptor large = extract(cloud, t, DescriptorConfig::large_volume());

    // idempotent: re-truncating the hand-frame points changes nothing
    PointCloud again;
    for (size_t i = 0; i < small.size(); ++i) again.push(small.points[i], small.labels[i]);
    Descriptor twice = extract(again, Pose{}, DescriptorConfig::standard());
    REQUIRE(twice.size() == small.size());
    for (size_t i = 0; i < small.size(); ++i) {
        CHECK(twice.points[i].x == small.points[i].x);
        CHECK(twice.points[i].y == small.points[i].y);
        CHECK(twice.points[i].z == small.points[i].z);
    }

    // monotone: every standard-cuboid point appears in the large-volume set
    REQUIRE(small.size() > 0);
    REQUIRE(large.size() > small.size());
    for (size_t i = 0; i < small.size(); ++i) {
        bool found = false;
        for (size_t j = 0; j < large.size() && !found; ++j)
            found = large.points[j].x == small.points[i].x &&
                    large.points[j].y == small.points[i].y &&
                    large.points[j].z == small.points[i].z;
        CHECK(found);
    }
}

TEST_CASE("config validation rejects degenerate settings") {
    PointCloud cloud = random_cloud(10, 3, 0.05);
    DescriptorConfig bad;
    bad.cuboid_dims.y = 0.0;
    CHECK_THROWS_AS(extract(cloud, Pose{}, bad), ParameterError);
    bad = DescriptorConfig{};
    bad.image_size = 7;
    CHECK_THROWS_AS(extract(cloud, Pose{}, bad), ParameterError);

    Descriptor d = extract(cloud, Pose{}, DescriptorConfig::standard());
    d.config.channels_per_view = 3;
    CHECK_THROWS_AS(encode_image(d), ParameterError);
}

TEST_CASE("empty descriptor encodes to the zero tensor") {
    Descriptor d;
    d.config = DescriptorConfig::standard();
    DescriptorImage img = encode_image(d);
    CHECK(img.size == 60);
    CHECK(img.channels == 12);
    REQUIRE(img.data.size() == 12u * 60 * 60);
    CHECK(std::all_of(img.data.begin(), img.data.end(), [](double v) { return v == 0.0; }));
}

TEST_CASE("a single centered point lights one pixel per view at full density") {
    Descriptor d;
    d.config = DescriptorConfig::standard();
    d.points.push_back({0.0, 0.0, 0.0});
    d.labels.push_back(PointLabel::visible);
    DescriptorImage img = encode_image(d);

    for (int v = 0; v < 3; ++v) {
        int dens = v * 4;
        int nonzero = 0;
        for (int r = 0; r < img.size; ++r)
            for (int c = 0; c < img.size; ++c)
                if (img.at(dens, r, c) != 0.0) {
                    ++nonzero;
                    CHECK(img.at(dens, r, c) == 1.0);
                    CHECK(img.at(dens + 1, r, c) == 0.5);  // centered depth
                }
        CHECK(nonzero == 1);
        // occluded channels stay dark
        for (int r = 0; r < img.size; ++r)
            for (int c = 0; c < img.size; ++c) {
                CHECK(img.at(dens + 2, r, c) == 0.0);
                CHECK(img.at(dens + 3, r, c) == 0.0);
            }
    }
}

TEST_CASE("cell density is scaled by the fullest cell") {
    Descriptor d;
    d.config = DescriptorConfig::standard();
    // two points sharing a cell in every view, one off on its own
    d.points.push_back({0.0010, 0.0010, 0.0010});
    d.points.push_back({0.0011, 0.0009, 0.0012});
    d.points.push_back({-0.0200, -0.0200, -0.0500});
    d.labels.assign(3, PointLabel::visible);
    DescriptorImage img = encode_image(d);

    for (int v = 0; v < 3; ++v) {
        std::vector<double> vals;
        for (int r = 0; r < img.size; ++r)
            for (int c = 0; c < img.size; ++c)
                if (img.at(v * 4, r, c) != 0.0) vals.push_back(img.at(v * 4, r, c));
        std::sort(vals.begin(), vals.end());
        REQUIRE(vals.size() == 2);
        CHECK(vals[0] == 0.5);
        CHECK(vals[1] == 1.0);
    }
}

TEST_CASE("encoding ignores point order and stays inside the unit interval") {
    PointCloud cloud = random_cloud(800, 21, 0.10);
    Descriptor d = extract(cloud, Pose{}, DescriptorConfig::standard());
    REQUIRE(d.size() > 100);
    DescriptorImage a = encode_image(d);

    Descriptor shuffled = d;
    Rng rng(99);
    for (size_t i = shuffled.size(); i > 1; --i) {
        size_t j = static_cast<size_t>(rng.uniform_int(i));
        std::swap(shuffled.points[i - 1], shuffled.points[j]);
        std::swap(shuffled.labels[i - 1], shuffled.labels[j]);
    }
    DescriptorImage b = encode_image(shuffled);

    REQUIRE(a.data.size() == b.data.size());
    for (size_t i = 0; i < a.data.size(); ++i) CHECK(a.data[i] == b.data[i]);
    for (double x : a.data) {
        CHECK(std::isfinite(x));
        CHECK(x >= 0.0);
        CHECK(x <= 1.0);
    }
}

TEST_CASE("boundary points fold into the last bin") {
    Descriptor d;
    d.config = DescriptorConfig::standard();
    Vec3 h = d.config.cuboid_dims * 0.5;
    d.points.push_back({h.x, h.y, h.z});  // exactly on the +++ corner
    d.labels.push_back(PointLabel::visible);
    DescriptorImage img = encode_image(d);
    int last = img.size - 1;
    for (int v = 0; v < 3; ++v) {
        CHECK(img.at(v * 4, last, last) == 1.0);
        CHECK(img.at(v * 4 + 1, last, last) == 1.0);  // full depth
    }
}
