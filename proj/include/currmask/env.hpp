#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <string>

#include "currmask/rng.hpp"
#include "currmask/trajectory.hpp"

namespace currmask {

enum class RewardKind { dense, sparse };

// Parameters of one of the two built-in simulators. Both integrate with explicit
// semi-implicit Euler in single precision, so re-simulating a stored trajectory
// reproduces its states bit-for-bit.
struct EnvModel {
    std::string env_id = "point_mass_2d";
    RewardKind reward = RewardKind::dense;
    float dt = 0.1f;
    float damping = 0.0f;
    float v_max = 2.0f;
    float p_max = 1.0f;
    // point_mass_2d
    float goal_x = 0.5f;
    float goal_y = 0.5f;
    float goal_radius = 0.1f;
    // chain_walker_1d
    int segments = 3;
    float spring_stiffness = 10.0f;
    float rest_length = 0.5f;
    float force_scale = 1.0f;
    float target_speed = 1.0f;

    std::size_t state_dim() const;
    std::size_t action_dim() const;

    // Throws ParameterError for unknown ids or non-positive dt.
    void validate() const;

    static EnvModel point_mass_2d(RewardKind reward = RewardKind::dense);
    static EnvModel chain_walker_1d(int segments = 3);
};

void to_json(nlohmann::json& j, const EnvModel& env);
void from_json(const nlohmann::json& j, EnvModel& env);

struct StepResult {
    VectorF next_state;
    double reward = 0.0;
};

// Deterministic transition. Throws InputError on non-finite input, an action outside
// [-1, 1]^Da, or mismatched dimensions.
StepResult env_step(const EnvModel& env, const VectorF& state, const VectorF& action);

// Reward of arriving in `next_state`; env_step uses this, and so does scoring a stored trajectory.
double env_reward(const EnvModel& env, const VectorF& next_state);

VectorF initial_state(const EnvModel& env, Rng& rng);

enum class PolicyKind { random, noisy_pd, pd };

const char* policy_name(PolicyKind kind);

// Behaviour policies used to synthesise data of mixed quality.
VectorF policy_action(const EnvModel& env, PolicyKind kind, const VectorF& state, Rng& rng,
                      float noise_std = 0.3f);

}  // namespace currmask
