#include "regrasp/env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "regrasp/errors.hpp"
#include "regrasp/rng.hpp"

namespace regrasp {

namespace {

constexpr uint64_t kStreamEnv = 41;

// final placements count as upright within 20 degrees of vertical
const double kCosUpright = std::cos(20.0 * kPi / 180.0);

// released objects may hover this far above the table and still count
constexpr double kClearanceMax = 0.03;

// settle noise guard: a release exactly on the table must not read as a
// collision
constexpr double kPenetrationTol = 1e-9;

DescriptorImage zero_image(const DescriptorConfig& c) {
    DescriptorImage img;
    img.size = c.image_size;
    img.channels = 3 * c.channels_per_view;
    img.data.assign(static_cast<size_t>(img.channels) * img.size * img.size, 0.0);
    return img;
}

// Open-top insertion test: the held object ends up fully inside the box and
// every hand corner below the rim stays inside the footprint, so the hand
// could only have come down through the opening.
bool fits_box_goal(const Aabb& box, const TriMesh& mesh, const Pose& obj_pose,
                   const HandModel& hand, const Pose& hand_pose) {
    for (const Vec3& v : mesh.vertices)
        if (!box.contains(obj_pose.apply(v))) return false;
    for (const Aabb& b : hand.collision_boxes()) {
        for (int corner = 0; corner < 8; ++corner) {
            Vec3 local{corner & 1 ? b.hi.x : b.lo.x, corner & 2 ? b.hi.y : b.lo.y,
                       corner & 4 ? b.hi.z : b.lo.z};
            Vec3 w = hand_pose.apply(local);
            if (w.z < box.lo.z - kPenetrationTol) return false;
            if (w.z < box.hi.z &&
                (w.x < box.lo.x || w.x > box.hi.x || w.y < box.lo.y || w.y > box.hi.y))
                return false;
        }
    }
    return true;
}

}  // namespace

PlaceSet default_place_set(const Aabb& workspace, double table_height, Scenario scenario) {
    const Vec3 c = workspace.center();
    const Mat3 turn = Mat3::rot_x(kPi / 2.0);
    PlaceSet ps;
    for (double h : {0.05, 0.10}) {
        ps.temp_places.push_back({Mat3::identity(), {c.x - 0.10, c.y - 0.10, table_height + h}});
        ps.temp_places.push_back({turn, {c.x - 0.10, c.y - 0.10, table_height + h}});
    }
    if (scenario == Scenario::multi_step_isolation) {
        ps.box = Aabb{{c.x + 0.02, c.y + 0.02, table_height},
                      {c.x + 0.20, c.y + 0.20, table_height + 0.16}};
        ps.final_places.push_back(
            {Mat3::identity(), {c.x + 0.11, c.y + 0.11, table_height + 0.13}});
    } else {
        ps.final_places.push_back(
            {Mat3::identity(), {c.x + 0.10, c.y - 0.10, table_height + 0.08}});
    }
    return ps;
}

Pose place_pose_for(const Pose& object_in_hand, const Pose& resolved_place) {
    return resolved_place * object_in_hand;
}

std::vector<MdpAction> legal_actions(const MdpState& state,
                                     const std::vector<MdpAction>& grasp_actions,
                                     const PlaceSet& places) {
    switch (state.phase) {
        case Phase::empty_hand:
        case Phase::placed:
            return grasp_actions;
        case Phase::holding: {
            std::vector<MdpAction> acts;
            acts.reserve(places.size());
            for (size_t i = 0; i < places.size(); ++i) {
                MdpAction a;
                a.kind = ActionKind::reach_place;
                a.place_index = static_cast<int>(i);
                a.grasp_image.size = state.held_descriptor.size;
                a.grasp_image.channels = state.held_descriptor.channels;
                a.grasp_image.data.assign(state.held_descriptor.data.size(), 0.0);
                acts.push_back(std::move(a));
            }
            return acts;
        }
        case Phase::goal:
        case Phase::fell_over:
            return {};
    }
    return {};
}

Environment::Environment(const EpisodeConfig& config, uint64_t object_seed, uint64_t pose_seed)
    : config_(config) {
    const bool multi = config.scenario == Scenario::multi_step_isolation;
    if (!multi && config.max_time != 2)
        throw ParameterError("max_time must be 2 for two-step scenarios");
    if (multi && config.max_time != 10)
        throw ParameterError("max_time must be 10 for the multi-step scenario");
    if (config.sample_grasps_m < 1) throw ParameterError("sample_grasps_m must be positive");
    if (config.render_px < 16) throw ParameterError("render_px must be at least 16");
    if (!(config.exp_tau > 0.0)) throw ParameterError("exp_tau must be positive");

    switch (config.scenario) {
        case Scenario::two_step_isolation:
        case Scenario::multi_step_isolation:
            scene_ = spawn_isolation(config.category, object_seed, pose_seed);
            break;
        case Scenario::two_step_clutter:
            scene_ = spawn_clutter(config.category, 7, object_seed, pose_seed);
            break;
    }

    places_ = config.places ? *config.places
                            : default_place_set(scene_.workspace, scene_.table_height,
                                                config.scenario);
    if (places_.final_places.empty())
        throw ParameterError("place set needs at least one final pose");
    for (const auto* list : {&places_.temp_places, &places_.final_places})
        for (const Pose& p : *list)
            if (!scene_.workspace.contains(p.t))
                throw ParameterError("place poses must lie within the workspace");

    grasp_seed_base_ = mix_seed(mix_seed(object_seed, kStreamEnv), pose_seed);
    Rng rig(grasp_seed_base_);
    azimuth_ = rig.uniform(0.0, 2.0 * kPi);

    state_.held_descriptor = zero_image(config_.descriptor);
    state_.last_place.assign(places_.size(), 0.0);
    state_.phase = Phase::empty_hand;
    sense_and_sample();
}

void Environment::sense_and_sample() {
    const auto cams = two_view_poses(scene_.workspace, azimuth_);
    const auto intr = default_intrinsics(config_.render_px, config_.render_px);
    const auto tris = scene_triangles(scene_);
    const DepthImage a = render_depth(tris, cams[0], intr);
    const DepthImage b = render_depth(tris, cams[1], intr);
    grid_ = fuse_views(a, b, GridSpec::for_workspace(scene_.workspace), scene_.workspace);
    cloud_ = remove_table_plane(extract_cloud(grid_), scene_.table_height);
    candidates_ = sample_grasps(cloud_, grid_, config_.hand, config_.sample_grasps_m,
                                mix_seed(grasp_seed_base_, static_cast<uint64_t>(sense_count_)));
    ++sense_count_;

    grasp_actions_.clear();
    candidate_raw_.clear();
    grasp_actions_.reserve(candidates_.size());
    candidate_raw_.reserve(candidates_.size());
    for (size_t i = 0; i < candidates_.size(); ++i) {
        Descriptor d = extract(cloud_, candidates_[i].pose, config_.descriptor);
        MdpAction a;
        a.kind = ActionKind::reach_grasp;
        a.grasp_index = static_cast<int>(i);
        a.grasp_image = encode_image(d);
        grasp_actions_.push_back(std::move(a));
        candidate_raw_.push_back(std::move(d));
    }
}

double Environment::final_place_reward(double clearance, bool tilt_ok, bool box_ok) const {
    if (!tilt_ok || !box_ok || clearance < -kPenetrationTol) return 0.0;
    if (config_.reward_mode == RewardMode::binary)
        return clearance <= kClearanceMax ? 1.0 : 0.0;
    if (clearance <= 0.02) return 1.0;
    return std::exp(-(clearance - 0.02) / config_.exp_tau);
}

StepResult Environment::step(const MdpAction& action) {
    if (state_.phase == Phase::goal || state_.phase == Phase::fell_over)
        throw ContractViolation("step on an absorbing state");
    if (steps_ >= config_.max_time) throw ContractViolation("episode is over");

    if (action.kind == ActionKind::reach_grasp) {
        if (state_.phase == Phase::holding)
            throw ContractViolation("cannot grasp while holding an object");
        if (action.grasp_index < 0 ||
            action.grasp_index >= static_cast<int>(candidates_.size()))
            throw ContractViolation("grasp index out of range");
        if (action.place_index >= 0)
            throw ContractViolation("grasp action carries a place index");
        ++steps_;

        const GraspCandidate& cand = candidates_[action.grasp_index];
        held_id_ = touched_object(scene_, cand, config_.hand);
        if (held_id_ < 0) {
            // degenerate reach into free space: attach the nearest object
            double best = std::numeric_limits<double>::infinity();
            for (const RigidObject& o : scene_.objects) {
                double d = (o.pose.t - cand.pose.t).squared_norm();
                if (d < best) {
                    best = d;
                    held_id_ = o.id;
                }
            }
        }
        const RigidObject* obj = scene_.find(held_id_);
        hand_orientation_ = cand.pose.R;
        hand_object_offset_ = cand.pose.inverse() * obj->pose;

        state_.phase = Phase::holding;
        state_.held_descriptor = action.grasp_image;
        state_.held_raw = candidate_raw_[action.grasp_index];
        std::fill(state_.last_place.begin(), state_.last_place.end(), 0.0);
        return {0.0, steps_ >= config_.max_time, false};
    }

    if (state_.phase != Phase::holding)
        throw ContractViolation("cannot place with an empty hand");
    if (action.place_index < 0 || action.place_index >= static_cast<int>(places_.size()))
        throw ContractViolation("place index out of range");
    if (action.grasp_index >= 0)
        throw ContractViolation("place action carries a grasp index");
    ++steps_;

    const bool final_place = places_.is_final(action.place_index);
    const Pose& target = final_place
        ? places_.final_places[static_cast<size_t>(action.place_index) -
                               places_.temp_places.size()]
        : places_.temp_places[static_cast<size_t>(action.place_index)];

    // the place orientation is relative to the held grasp, so the identity
    // releases the object exactly as held
    const Pose resolved{target.R * hand_orientation_, target.t};
    RigidObject* obj = scene_.find(held_id_);
    obj->pose = place_pose_for(hand_object_offset_, resolved);
    const SettleReport rep = settle_state(scene_, held_id_);
    const bool clear_ok = rep.clearance >= -kPenetrationTol && rep.clearance <= kClearanceMax;

    if (!final_place) {
        if (!clear_ok) {
            state_.phase = Phase::fell_over;
            return {0.0, true, false};
        }
        obj->pose.t.z -= rep.clearance;  // the short drop onto the table
        held_id_ = -1;
        state_.phase = Phase::placed;
        std::fill(state_.last_place.begin(), state_.last_place.end(), 0.0);
        state_.last_place[action.place_index] = 1.0;
        sense_and_sample();
        return {0.0, steps_ >= config_.max_time, true};
    }

    const Vec3 up = obj->pose.R.col(2);
    const bool tilt_ok = up.z > 0.0 && up.z >= kCosUpright;
    bool box_ok = true;
    if (places_.box)
        box_ok = fits_box_goal(*places_.box, obj->mesh, obj->pose, config_.hand, resolved);

    const double reward = final_place_reward(rep.clearance, tilt_ok, box_ok);
    if (clear_ok && tilt_ok && box_ok) {
        obj->pose.t.z -= rep.clearance;
        state_.phase = Phase::goal;
    } else {
        state_.phase = Phase::fell_over;
    }
    return {reward, true, false};
}

}  // namespace regrasp
