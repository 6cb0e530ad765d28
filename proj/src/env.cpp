#include "currmask/env.hpp"

#include <algorithm>
#include <cmath>

#include "currmask/errors.hpp"

namespace currmask {

namespace {

bool is_point_mass(const EnvModel& env) { return env.env_id == "point_mass_2d"; }
bool is_chain(const EnvModel& env) { return env.env_id == "chain_walker_1d"; }

float clampf(float x, float bound) { return std::clamp(x, -bound, bound); }

}  // namespace

std::size_t EnvModel::state_dim() const {
    if (is_point_mass(*this)) {
        return 4;
    }
    return 2 * static_cast<std::size_t>(segments);
}

std::size_t EnvModel::action_dim() const {
    if (is_point_mass(*this)) {
        return 2;
    }
    return static_cast<std::size_t>(segments);
}

void EnvModel::validate() const {
    if (!is_point_mass(*this) && !is_chain(*this)) {
        throw ParameterError("unknown env_id '" + env_id + "'");
    }
    if (!(dt > 0.0f) || !std::isfinite(dt)) {
        throw ParameterError("env: dt must be positive");
    }
    if (!(v_max > 0.0f) || !(p_max > 0.0f)) {
        throw ParameterError("env: bounds must be positive");
    }
    if (is_chain(*this) && segments < 2) {
        throw ParameterError("chain_walker_1d needs at least two segments");
    }
}

EnvModel EnvModel::point_mass_2d(RewardKind reward) {
    EnvModel env;
    env.env_id = "point_mass_2d";
    env.reward = reward;
    return env;
}

EnvModel EnvModel::chain_walker_1d(int segments) {
    EnvModel env;
    env.env_id = "chain_walker_1d";
    env.segments = segments;
    env.damping = 0.1f;
    env.v_max = 3.0f;
    return env;
}

void to_json(nlohmann::json& j, const EnvModel& env) {
    j = nlohmann::json{{"env_id", env.env_id},
                       {"reward", env.reward == RewardKind::dense ? "dense" : "sparse"},
                       {"dt", env.dt},
                       {"damping", env.damping},
                       {"v_max", env.v_max},
                       {"p_max", env.p_max},
                       {"goal", {env.goal_x, env.goal_y}},
                       {"goal_radius", env.goal_radius},
                       {"segments", env.segments},
                       {"spring_stiffness", env.spring_stiffness},
                       {"rest_length", env.rest_length},
                       {"force_scale", env.force_scale},
                       {"target_speed", env.target_speed}};
}

void from_json(const nlohmann::json& j, EnvModel& env) {
    EnvModel d;
    d.env_id = j.value("env_id", d.env_id);
    if (d.env_id == "chain_walker_1d") {
        d = EnvModel::chain_walker_1d(j.value("segments", 3));
    }
    const std::string reward = j.value("reward", std::string("dense"));
    if (reward != "dense" && reward != "sparse") {
        throw ParameterError("env: reward must be 'dense' or 'sparse'");
    }
    d.reward = reward == "dense" ? RewardKind::dense : RewardKind::sparse;
    d.dt = j.value("dt", d.dt);
    d.damping = j.value("damping", d.damping);
    d.v_max = j.value("v_max", d.v_max);
    d.p_max = j.value("p_max", d.p_max);
    if (j.contains("goal")) {
        d.goal_x = j.at("goal").at(0).get<float>();
        d.goal_y = j.at("goal").at(1).get<float>();
    }
    d.goal_radius = j.value("goal_radius", d.goal_radius);
    d.segments = j.value("segments", d.segments);
    d.spring_stiffness = j.value("spring_stiffness", d.spring_stiffness);
    d.rest_length = j.value("rest_length", d.rest_length);
    d.force_scale = j.value("force_scale", d.force_scale);
    d.target_speed = j.value("target_speed", d.target_speed);
    d.validate();
    env = d;
}

double env_reward(const EnvModel& env, const VectorF& next_state) {
    if (is_point_mass(env)) {
        const float dx = next_state[0] - env.goal_x;
        const float dy = next_state[1] - env.goal_y;
        const double dist = std::sqrt(static_cast<double>(dx) * dx + static_cast<double>(dy) * dy);
        if (env.reward == RewardKind::dense) {
            return -dist;
        }
        return dist < env.goal_radius ? 1.0 : 0.0;
    }
    const Eigen::Index k = env.segments;
    const double com_velocity = next_state.segment(k, k).cast<double>().mean();
    if (env.reward == RewardKind::dense) {
        return com_velocity;
    }
    return com_velocity > env.target_speed ? 1.0 : 0.0;
}

StepResult env_step(const EnvModel& env, const VectorF& state, const VectorF& action) {
    if (static_cast<std::size_t>(state.size()) != env.state_dim() ||
        static_cast<std::size_t>(action.size()) != env.action_dim()) {
        throw InputError("env_step: state/action dimension mismatch for " + env.env_id);
    }
    if (!state.allFinite() || !action.allFinite()) {
        throw InputError("env_step: non-finite state or action");
    }
    if (action.size() > 0 && (action.maxCoeff() > 1.0f || action.minCoeff() < -1.0f)) {
        throw InputError("env_step: action outside [-1, 1]");
    }
    const float keep = 1.0f - env.damping * env.dt;
    VectorF next(state.size());
    if (is_point_mass(env)) {
        for (int i = 0; i < 2; ++i) {
            const float vel = clampf(state[2 + i] * keep + action[i] * env.dt, env.v_max);
            next[2 + i] = vel;
            next[i] = clampf(state[i] + vel * env.dt, env.p_max);
        }
    } else {
        const int k = env.segments;
        VectorF x(k);
        for (int i = 0; i < k; ++i) {
            float force = env.force_scale * action[i];
            if (i > 0) {
                force -= env.spring_stiffness * (state[i] - state[i - 1] - env.rest_length);
            }
            if (i + 1 < k) {
                force += env.spring_stiffness * (state[i + 1] - state[i] - env.rest_length);
            }
            const float vel = clampf(state[k + i] * keep + force * env.dt, env.v_max);
            next[k + i] = vel;
            x[i] = state[i] + vel * env.dt;
        }
        const float com = x.mean();
        for (int i = 0; i < k; ++i) {
            next[i] = x[i] - com;
        }
    }
    return StepResult{next, env_reward(env, next)};
}

VectorF initial_state(const EnvModel& env, Rng& rng) {
    VectorF s = VectorF::Zero(static_cast<Eigen::Index>(env.state_dim()));
    if (is_point_mass(env)) {
        s[0] = static_cast<float>((2.0 * uniform01(rng) - 1.0) * env.p_max);
        s[1] = static_cast<float>((2.0 * uniform01(rng) - 1.0) * env.p_max);
        return s;
    }
    const int k = env.segments;
    for (int i = 0; i < k; ++i) {
        const float rest = (static_cast<float>(i) - 0.5f * static_cast<float>(k - 1)) * env.rest_length;
        s[i] = rest + static_cast<float>(0.05 * standard_normal(rng));
    }
    const float com = s.head(k).mean();
    s.head(k).array() -= com;
    return s;
}

const char* policy_name(PolicyKind kind) {
    switch (kind) {
        case PolicyKind::random:
            return "random";
        case PolicyKind::noisy_pd:
            return "noisy_pd";
        case PolicyKind::pd:
            return "pd";
    }
    return "unknown";
}

namespace {

VectorF pd_action(const EnvModel& env, const VectorF& s) {
    VectorF a(static_cast<Eigen::Index>(env.action_dim()));
    if (is_point_mass(env)) {
        a[0] = 1.0f * (env.goal_x - s[0]) - 2.0f * s[2];
        a[1] = 1.0f * (env.goal_y - s[1]) - 2.0f * s[3];
        return a;
    }
    const int k = env.segments;
    for (int i = 0; i < k; ++i) {
        const float rest = (static_cast<float>(i) - 0.5f * static_cast<float>(k - 1)) * env.rest_length;
        a[i] = 1.0f * (env.target_speed - s[k + i]) + 1.0f * (rest - s[i]);
    }
    return a;
}

}  // namespace

VectorF policy_action(const EnvModel& env, PolicyKind kind, const VectorF& state, Rng& rng,
                      float noise_std) {
    const auto da = static_cast<Eigen::Index>(env.action_dim());
    VectorF a(da);
    if (kind == PolicyKind::random) {
        for (Eigen::Index i = 0; i < da; ++i) {
            a[i] = static_cast<float>(2.0 * uniform01(rng) - 1.0);
        }
        return a;
    }
    a = pd_action(env, state);
    if (kind == PolicyKind::noisy_pd) {
        for (Eigen::Index i = 0; i < da; ++i) {
            a[i] += noise_std * static_cast<float>(standard_normal(rng));
        }
    }
    return a.cwiseMax(-1.0f).cwiseMin(1.0f);
}

}  // namespace currmask
