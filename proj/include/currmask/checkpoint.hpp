#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>

#include "currmask/learner.hpp"
#include "currmask/net.hpp"
#include "currmask/trajectory.hpp"

namespace currmask {

inline constexpr int kCheckpointVersion = 1;

// On disk: <dir>/manifest.json, <dir>/params.bin (little-endian f32 parameters in declaration
// order) and <dir>/optim.bin (Adam first then second moments, same layout).
struct Checkpoint {
    NetConfig net;
    std::uint64_t step = 0;
    std::string config_hash;
    NormStats norm;
    LearnerSnapshot learner;
    nlohmann::json run_state;  // runner-owned: scheduler, rng streams, metrics offsets
};

// Written to a sibling temporary directory and renamed into place.
void write_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt);

// Throws DataError when files are missing, truncated or of another version.
Checkpoint read_checkpoint(const std::filesystem::path& dir);

nlohmann::json net_config_to_json(const NetConfig& cfg);
NetConfig net_config_from_json(const nlohmann::json& j);

}  // namespace currmask
