#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "currmask/masking.hpp"
#include "currmask/rng.hpp"

namespace currmask {

// The Cartesian product ratios × blocks. Arm k = ratio_index · |blocks| + block_index.
class MaskingPool {
public:
    MaskingPool();  // ratios {0.15, 0.35, 0.55, 0.75, 0.95}, blocks 1..20
    MaskingPool(std::vector<double> ratios, std::vector<std::size_t> blocks);

    std::size_t size() const { return ratios_.size() * blocks_.size(); }
    MaskScheme scheme(std::size_t arm) const;
    std::size_t arm(std::size_t ratio_index, std::size_t block_index) const;
    const std::vector<double>& ratios() const { return ratios_; }
    const std::vector<std::size_t>& blocks() const { return blocks_; }

private:
    std::vector<double> ratios_;
    std::vector<std::size_t> blocks_;
};

// EXP3 over the pool. Weights live in log space; w_i = exp(log_w_i).
class Exp3 {
public:
    Exp3(std::size_t arms, double epsilon, double gamma);

    std::size_t arms() const { return log_weights_.size(); }
    double epsilon() const { return epsilon_; }
    double gamma() const { return gamma_; }

    // π(i) = (1 - ε)·w_i / Σ_j w_j + ε / K
    std::vector<double> sampling_distribution() const;

    // w_k ← w_k·exp(γ·r / (π(k)·K)); every other weight is untouched.
    // Throws ContractError unless r ∈ [-1, 1]; ParameterError for an invalid arm.
    void update_weights(std::size_t arm, double scaled_reward);

    std::vector<double> weights() const;
    const std::vector<double>& log_weights() const { return log_weights_; }
    void set_log_weights(std::vector<double> log_weights);

private:
    std::vector<double> log_weights_;
    double epsilon_;
    double gamma_;
};

// Nearest-rank percentile: the value at rank ceil(pct/100 · n) of the sorted sample.
double nearest_rank_percentile(std::span<const double> values, double pct);

struct RewardScaleOptions {
    std::size_t cold_start = 5;  // below this many entries the raw value is clamped instead
    std::size_t window = 0;      // 0 keeps the full history; otherwise only the most recent entries
    double lo_pct = 20.0;
    double hi_pct = 80.0;
};

// Percentile rescaling of a raw learning-progress value into [-1, 1]. `history` must already
// contain `raw` as its last entry.
double scale_reward(std::span<const double> history, double raw, const RewardScaleOptions& options = {});

struct ProgressSnapshot {
    double loss_before = 0.0;
    double loss_after = 0.0;
    std::uint64_t step = 0;
};

// One evaluation-interval row of the metrics stream.
struct MetricsRecord {
    std::uint64_t step = 0;
    double wallclock = 0.0;
    std::int64_t arm_index = -1;
    double ratio = 0.0;
    std::size_t block = 0;
    double raw_reward = 0.0;
    double scaled_reward = 0.0;
    double loss_before = 0.0;
    double loss_after = 0.0;
    std::vector<double> probabilities;
};

struct SchedulerState {
    Exp3 bandit;
    RewardScaleOptions scaling;
    std::vector<double> reward_history;
    std::vector<std::uint64_t> history_steps;
    std::size_t current_arm = 0;

    SchedulerState(std::size_t arms, double epsilon, double gamma, RewardScaleOptions scaling = {})
        : bandit(arms, epsilon, gamma), scaling(scaling) {}
};

// Draws the initial arm from the (uniform) starting distribution.
void scheduler_begin(SchedulerState& state, Rng& rng);

// Evaluation branch of the curriculum: raw reward, rescale, EXP3 update, then a new arm
// drawn from the updated distribution. The record carries the pulled arm and the
// post-update probabilities.
MetricsRecord curriculum_step(SchedulerState& state, const ProgressSnapshot& snapshot, const MaskingPool& pool,
                              Rng& rng);

enum class Method { currmask, mixed, mixed_prog, mixed_inv, maskdp, mtm, fixed };

Method parse_method(const std::string& name);
std::string method_name(Method m);

enum class MaskKind { block, autoregressive };

struct SchemeChoice {
    MaskScheme scheme;
    MaskKind kind = MaskKind::block;
    std::optional<std::size_t> arm;  // pool index when the scheme belongs to the pool
};

// Mixed-prog / Mixed-inv stage in {0, 1, 2, 3} at exact quarters of total_steps.
std::size_t curriculum_stage(std::uint64_t step, std::uint64_t total_steps);

// Distribution a non-adaptive method samples pool arms from at `step`; empty for mtm.
std::vector<double> baseline_distribution(Method kind, std::uint64_t step, std::uint64_t total_steps,
                                          const MaskingPool& pool, std::size_t fixed_block = 0);

// Next scheme for a non-adaptive method. Throws ParameterError for currmask or step >= total_steps.
SchemeChoice baseline_next_scheme(Method kind, std::uint64_t step, std::uint64_t total_steps,
                                  const MaskingPool& pool, Rng& rng, std::size_t fixed_block = 0);

}  // namespace currmask
