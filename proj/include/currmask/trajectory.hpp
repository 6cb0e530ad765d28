#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "currmask/rng.hpp"

namespace currmask {

// Row-major so that a timestep is one contiguous row, matching the on-disk layout.
using RowMatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VectorF = Eigen::VectorXf;

// One episode: T rows of states (environment units) and T rows of actions in [-1, 1].
// Row t of `actions` is the action taken in row t of `states`.
struct Trajectory {
    RowMatrixF states;
    RowMatrixF actions;
    std::string env_id;
    std::uint64_t seed = 0;

    std::size_t length() const { return static_cast<std::size_t>(states.rows()); }
    std::size_t state_dim() const { return static_cast<std::size_t>(states.cols()); }
    std::size_t action_dim() const { return static_cast<std::size_t>(actions.cols()); }

    // Throws InputError when shapes disagree, values are non-finite or actions leave [-1, 1].
    void validate() const;
};

// W consecutive timesteps viewed as L = 2W interleaved tokens s_0, a_0, s_1, a_1, ...
struct Window {
    RowMatrixF states;
    RowMatrixF actions;
    std::size_t start_index = 0;

    std::size_t timesteps() const { return static_cast<std::size_t>(states.rows()); }
    std::size_t token_count() const { return 2 * timesteps(); }
    static bool is_state_token(std::size_t token) { return token % 2 == 0; }
    static std::size_t timestep_of(std::size_t token) { return token / 2; }
};

// Copies rows [start, start + timesteps) of a trajectory.
Window make_window(const Trajectory& traj, std::size_t start, std::size_t timesteps);

// Draws start_index uniformly over [0, T - W]. Throws LengthError when W > T or W == 0.
Window sample_window(const Trajectory& traj, std::size_t timesteps, Rng& rng);

inline constexpr float kStdFloor = 1e-6f;

struct NormStats {
    VectorF state_mean;
    VectorF state_std;
    VectorF action_mean;
    VectorF action_std;

    std::size_t state_dim() const { return static_cast<std::size_t>(state_mean.size()); }
    std::size_t action_dim() const { return static_cast<std::size_t>(action_mean.size()); }

    // Mean 0 and std 1 everywhere: normalize becomes the identity.
    static NormStats identity(std::size_t state_dim, std::size_t action_dim);
};

// Per-dimension z-score statistics over every timestep of the given (training) trajectories.
// Accumulated in double; std is the population std floored at kStdFloor.
NormStats compute_norm_stats(const std::vector<Trajectory>& train);

Window normalize(const Window& w, const NormStats& stats);
Window denormalize(const Window& w, const NormStats& stats);

}  // namespace currmask
