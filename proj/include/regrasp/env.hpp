#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "regrasp/descriptor.hpp"
#include "regrasp/grasp.hpp"
#include "regrasp/scene.hpp"
#include "regrasp/sensing.hpp"

namespace regrasp {

// Discrete place actions. A place pose is applied relative to the hand's
// orientation at grasp time: the released hand orientation is R times the
// held one and the hand moves to t, so the identity R releases the object
// exactly as held. Positions are absolute workspace coordinates.
struct PlaceSet {
    std::vector<Pose> temp_places;
    std::vector<Pose> final_places;
    std::optional<Aabb> box;  // open-top goal box, multi-step only

    size_t size() const { return temp_places.size() + final_places.size(); }
    bool is_final(int place_index) const {
        return place_index >= static_cast<int>(temp_places.size());
    }
};

enum class Phase { empty_hand, holding, placed, goal, fell_over };

// History the value function sees: the descriptor of the last grasp and a
// one-hot of the last place. Zero tensors encode "none yet".
struct MdpState {
    DescriptorImage held_descriptor;
    std::optional<Descriptor> held_raw;
    std::vector<double> last_place;
    Phase phase = Phase::empty_hand;
};

enum class ActionKind { reach_grasp, reach_place };

struct MdpAction {
    ActionKind kind = ActionKind::reach_grasp;
    int grasp_index = -1;  // valid iff reach_grasp
    int place_index = -1;  // valid iff reach_place
    DescriptorImage grasp_image;  // zero tensor iff reach_place
};

enum class Scenario { two_step_isolation, two_step_clutter, multi_step_isolation };
enum class RewardMode { binary, exp_falloff };

struct EpisodeConfig {
    Scenario scenario = Scenario::two_step_isolation;
    int max_time = 2;  // 2 for two-step, 10 for multi-step
    RewardMode reward_mode = RewardMode::binary;
    Category category = Category::bottle;
    DescriptorConfig descriptor;
    HandModel hand;
    std::optional<PlaceSet> places;  // defaults per scenario when absent
    int sample_grasps_m = 100;
    int render_px = 192;
    double exp_tau = 0.01;  // falloff length for exp rewards, meters
};

struct StepResult {
    double reward = 0.0;
    bool terminal = false;
    bool resampled = false;  // a successful temp place re-senses the scene
};

// Default discrete place set for a scenario: four temp poses (two heights by
// two orientations, as-held and quarter-turned about horizontal) and one
// final pose; the multi-step final pose descends into the goal box.
PlaceSet default_place_set(const Aabb& workspace, double table_height, Scenario scenario);

// Released object pose from the rigid hand-object offset fixed at grasp time
// and the resolved hand target pose.
Pose place_pose_for(const Pose& object_in_hand, const Pose& resolved_place);

// Phase-dependent action menu: grasp actions when the hand is free, place
// actions while holding, nothing once absorbed.
std::vector<MdpAction> legal_actions(const MdpState& state,
                                     const std::vector<MdpAction>& grasp_actions,
                                     const PlaceSet& places);

// One episode: owns the scene, the sensing pipeline, and the action menus.
// Single-writer; independent instances may run concurrently.
class Environment {
  public:
    Environment(const EpisodeConfig& config, uint64_t object_seed, uint64_t pose_seed);

    const MdpState& state() const { return state_; }
    const Scene& scene() const { return scene_; }
    const PlaceSet& places() const { return places_; }
    const PointCloud& cloud() const { return cloud_; }
    const std::vector<GraspCandidate>& candidates() const { return candidates_; }
    const std::vector<MdpAction>& grasp_actions() const { return grasp_actions_; }
    const std::vector<Descriptor>& candidate_descriptors() const { return candidate_raw_; }
    int steps_taken() const { return steps_; }
    int held_object() const { return held_id_; }

    std::vector<MdpAction> actions() const {
        return legal_actions(state_, grasp_actions_, places_);
    }

    StepResult step(const MdpAction& action);

  private:
    void sense_and_sample();
    double final_place_reward(double clearance, bool tilt_ok, bool box_ok) const;

    EpisodeConfig config_;
    Scene scene_;
    PlaceSet places_;
    double azimuth_ = 0.0;
    uint64_t grasp_seed_base_ = 0;
    int sense_count_ = 0;

    OccupancyGrid grid_;
    PointCloud cloud_;
    std::vector<GraspCandidate> candidates_;
    std::vector<MdpAction> grasp_actions_;
    std::vector<Descriptor> candidate_raw_;

    MdpState state_;
    int steps_ = 0;
    int held_id_ = -1;
    Pose hand_object_offset_;
    Mat3 hand_orientation_;  // world orientation of the hand while holding
};

}  // namespace regrasp
