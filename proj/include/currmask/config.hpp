#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "currmask/dataset.hpp"
#include "currmask/env.hpp"
#include "currmask/eval_harness.hpp"
#include "currmask/net.hpp"
#include "currmask/scheduler.hpp"

namespace currmask {

struct SplitConfig {
    std::string path;
    std::size_t episodes = 0;
    std::size_t episode_len = 0;
    std::uint64_t seed = 0;
};

// Everything one run needs. JSON sections: run, data, pool, net, train, scheduler, metrics, eval.
// Missing keys take the defaults below; unknown keys are rejected.
struct RunConfig {
    // run
    std::string run_id = "run";
    std::string output_dir = "runs/run";
    std::uint64_t seed = 0;
    Method method = Method::currmask;
    std::size_t fixed_block = 1;

    // data
    EnvModel env = EnvModel::point_mass_2d();
    PolicyMixture mixture;
    SplitConfig train{"data/train", 1000, 200, 0};
    SplitConfig validation{"data/validation", 100, 200, 1000000};

    // pool
    std::vector<double> ratios{0.15, 0.35, 0.55, 0.75, 0.95};
    std::vector<std::size_t> blocks{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20};
    bool full_blocks = false;

    NetConfig net;

    // train
    std::uint64_t steps = 20000;
    std::size_t batch_size = 16;
    double learning_rate = 1e-4;
    std::uint64_t checkpoint_every = 1000;

    // scheduler
    double epsilon = 0.2;
    double gamma = 0.1;
    std::uint64_t interval = 100;
    std::size_t eval_samples = 10;
    std::size_t eval_scheme_subsample = 0;
    RewardScaleOptions scaling;
    bool log_baseline_target_loss = false;

    // metrics
    bool record_wallclock = true;

    // eval
    std::uint64_t eval_seed = 0;
    std::size_t prompting_seeds = 10;
    std::size_t planning_seeds = 20;
    SkillPromptingOptions prompting;
    GoalPlanningOptions planning;

    std::size_t window_timesteps() const { return net.context_tokens / 2; }
    MaskingPool pool() const { return MaskingPool(ratios, blocks); }

    // Throws ConfigError on inconsistent values.
    void validate() const;
};

nlohmann::json config_to_json(const RunConfig& cfg);
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);

// 16 hex digits of FNV-1a over the canonical JSON dump.
std::string config_hash(const RunConfig& cfg);

}  // namespace currmask
