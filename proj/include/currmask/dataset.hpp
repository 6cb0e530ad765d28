#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "currmask/env.hpp"
#include "currmask/trajectory.hpp"

namespace currmask {

inline constexpr int kDatasetVersion = 1;

// Fractions of episodes produced by each behaviour tier, in the order random, noisy-PD, PD.
struct PolicyMixture {
    double random = 1.0 / 3.0;
    double noisy_pd = 1.0 / 3.0;
    double pd = 1.0 / 3.0;
    float noise_std = 0.3f;

    static PolicyMixture only(PolicyKind kind);
};

struct Dataset {
    EnvModel env;
    PolicyMixture mixture;
    std::uint64_t seed = 0;
    std::vector<Trajectory> episodes;
    std::vector<PolicyKind> tiers;  // one per episode
    NormStats norm;                 // statistics of `episodes`
};

// Episode i is simulated with its own stream seeded from seed + i. Tiers are assigned with
// largest-remainder counts and then shuffled by a stream derived from `seed`.
Dataset generate_dataset(const EnvModel& env, const PolicyMixture& mixture, std::size_t n_episodes,
                         std::size_t episode_len, std::uint64_t seed);

// Sum of env rewards obtained along a stored trajectory (rows 1..T-1 are the arrival states).
double trajectory_return(const EnvModel& env, const Trajectory& traj);

// Directory container: manifest.json plus ep_<idx>.traj. Refuses a non-empty directory unless
// `force` is set, in which case stale ep_*.traj files are removed first.
void write_dataset(const Dataset& ds, const std::filesystem::path& dir, bool force = false);
Dataset read_dataset(const std::filesystem::path& dir);

nlohmann::json norm_stats_to_json(const NormStats& n);
NormStats norm_stats_from_json(const nlohmann::json& j);

// Single episode file: 16-byte magic "CMTRAJ01" (zero padded), u32 T, u32 Ds, u32 Da, then
// f32 states and f32 actions, row-major, little-endian.
std::vector<std::uint8_t> encode_episode(const Trajectory& traj);
Trajectory decode_episode(const std::vector<std::uint8_t>& bytes);

}  // namespace currmask
