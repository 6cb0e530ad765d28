#include "currmask/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "currmask/errors.hpp"

namespace currmask {

MaskingPool::MaskingPool() : MaskingPool({0.15, 0.35, 0.55, 0.75, 0.95}, {}) {
    blocks_.resize(20);
    std::iota(blocks_.begin(), blocks_.end(), std::size_t{1});
}

MaskingPool::MaskingPool(std::vector<double> ratios, std::vector<std::size_t> blocks)
    : ratios_(std::move(ratios)), blocks_(std::move(blocks)) {
    for (double r : ratios_) {
        if (!(r > 0.0 && r <= 1.0)) {
            throw ParameterError("pool ratios must lie in (0, 1]");
        }
    }
    for (std::size_t b : blocks_) {
        if (b < 1) {
            throw ParameterError("pool block sizes must be >= 1");
        }
    }
}

MaskScheme MaskingPool::scheme(std::size_t arm) const {
    if (arm >= size()) {
        throw ParameterError("arm " + std::to_string(arm) + " outside pool of " + std::to_string(size()));
    }
    return MaskScheme{ratios_[arm / blocks_.size()], blocks_[arm % blocks_.size()]};
}

std::size_t MaskingPool::arm(std::size_t ratio_index, std::size_t block_index) const {
    return ratio_index * blocks_.size() + block_index;
}

Exp3::Exp3(std::size_t arms, double epsilon, double gamma)
    : log_weights_(arms, 0.0), epsilon_(epsilon), gamma_(gamma) {
    if (arms == 0) {
        throw ParameterError("EXP3 needs at least one arm");
    }
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
        throw ParameterError("EXP3 epsilon must lie in [0, 1]");
    }
    if (!std::isfinite(gamma)) {
        throw ParameterError("EXP3 gamma must be finite");
    }
}

std::vector<double> Exp3::sampling_distribution() const {
    const double k = static_cast<double>(log_weights_.size());
    const double top = *std::max_element(log_weights_.begin(), log_weights_.end());
    std::vector<double> p(log_weights_.size());
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = std::exp(log_weights_[i] - top);
        total += p[i];
    }
    for (double& v : p) {
        v = (1.0 - epsilon_) * (v / total) + epsilon_ / k;
    }
    return p;
}

void Exp3::update_weights(std::size_t arm, double scaled_reward) {
    if (arm >= log_weights_.size()) {
        throw ParameterError("EXP3: arm index out of range");
    }
    if (!(scaled_reward >= -1.0 && scaled_reward <= 1.0)) {
        throw ContractError("EXP3: scaled reward " + std::to_string(scaled_reward) + " outside [-1, 1]");
    }
    const double k = static_cast<double>(log_weights_.size());
    const double pi = sampling_distribution()[arm];
    log_weights_[arm] += gamma_ * scaled_reward / (pi * k);
}

std::vector<double> Exp3::weights() const {
    std::vector<double> w(log_weights_.size());
    std::transform(log_weights_.begin(), log_weights_.end(), w.begin(), [](double lw) { return std::exp(lw); });
    return w;
}

void Exp3::set_log_weights(std::vector<double> log_weights) {
    if (log_weights.size() != log_weights_.size()) {
        throw ShapeError("EXP3: log-weight vector has the wrong arm count");
    }
    for (double v : log_weights) {
        if (!std::isfinite(v)) {
            throw InputError("EXP3: non-finite log-weight");
        }
    }
    log_weights_ = std::move(log_weights);
}

double nearest_rank_percentile(std::span<const double> values, double pct) {
    if (values.empty()) {
        throw ParameterError("percentile of an empty sample");
    }
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    // 1e-9 guard: 0.2 * 10 must rank 2, not 3.
    auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * n - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());
    return sorted[rank - 1];
}

double scale_reward(std::span<const double> history, double raw, const RewardScaleOptions& options) {
    if (!std::isfinite(raw)) {
        throw InputError("scale_reward: non-finite raw reward");
    }
    if (options.window > 0 && history.size() > options.window) {
        history = history.subspan(history.size() - options.window);
    }
    if (history.size() < options.cold_start) {
        return std::clamp(raw, -1.0, 1.0);
    }
    const double lo = nearest_rank_percentile(history, options.lo_pct);
    const double hi = nearest_rank_percentile(history, options.hi_pct);
    if (!(hi > lo)) {
        return 0.0;
    }
    return std::max(-1.0, std::min(1.0, 2.0 * (raw - lo) / (hi - lo) - 1.0));
}

void scheduler_begin(SchedulerState& state, Rng& rng) {
    const auto p = state.bandit.sampling_distribution();
    state.current_arm = sample_categorical(p, rng);
}

MetricsRecord curriculum_step(SchedulerState& state, const ProgressSnapshot& snapshot, const MaskingPool& pool,
                              Rng& rng) {
    if (!std::isfinite(snapshot.loss_before) || !std::isfinite(snapshot.loss_after)) {
        throw NumericError("curriculum_step: non-finite target loss");
    }
    if (pool.size() != state.bandit.arms()) {
        throw ShapeError("curriculum_step: pool size differs from bandit arm count");
    }
    MetricsRecord rec;
    rec.step = snapshot.step;
    rec.loss_before = snapshot.loss_before;
    rec.loss_after = snapshot.loss_after;
    rec.arm_index = static_cast<std::int64_t>(state.current_arm);
    const MaskScheme s = pool.scheme(state.current_arm);
    rec.ratio = s.ratio;
    rec.block = s.block;

    rec.raw_reward = snapshot.loss_before - snapshot.loss_after;
    state.reward_history.push_back(rec.raw_reward);
    state.history_steps.push_back(snapshot.step);
    rec.scaled_reward = scale_reward(state.reward_history, rec.raw_reward, state.scaling);
    state.bandit.update_weights(state.current_arm, rec.scaled_reward);

    rec.probabilities = state.bandit.sampling_distribution();
    state.current_arm = sample_categorical(rec.probabilities, rng);
    return rec;
}

Method parse_method(const std::string& name) {
    if (name == "currmask") return Method::currmask;
    if (name == "mixed") return Method::mixed;
    if (name == "mixed_prog") return Method::mixed_prog;
    if (name == "mixed_inv") return Method::mixed_inv;
    if (name == "maskdp") return Method::maskdp;
    if (name == "mtm") return Method::mtm;
    if (name == "fixed") return Method::fixed;
    throw ConfigError("unknown method '" + name + "'");
}

std::string method_name(Method m) {
    switch (m) {
        case Method::currmask: return "currmask";
        case Method::mixed: return "mixed";
        case Method::mixed_prog: return "mixed_prog";
        case Method::mixed_inv: return "mixed_inv";
        case Method::maskdp: return "maskdp";
        case Method::mtm: return "mtm";
        case Method::fixed: return "fixed";
    }
    return "unknown";
}

std::size_t curriculum_stage(std::uint64_t step, std::uint64_t total_steps) {
    if (total_steps == 0 || step >= total_steps) {
        throw ParameterError("curriculum_stage: step must be < total_steps");
    }
    return static_cast<std::size_t>((4 * step) / total_steps);
}

namespace {

std::optional<std::size_t> block_index(const MaskingPool& pool, std::size_t block) {
    const auto& b = pool.blocks();
    const auto it = std::find(b.begin(), b.end(), block);
    if (it == b.end()) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it - b.begin());
}

// Uniform over arms whose block index lies in [0, allowed_blocks).
std::vector<double> uniform_over_prefix(const MaskingPool& pool, std::size_t allowed_blocks) {
    std::vector<double> p(pool.size(), 0.0);
    const double mass = 1.0 / static_cast<double>(pool.ratios().size() * allowed_blocks);
    for (std::size_t r = 0; r < pool.ratios().size(); ++r) {
        for (std::size_t b = 0; b < allowed_blocks; ++b) {
            p[pool.arm(r, b)] = mass;
        }
    }
    return p;
}

// Stage s of four admits the first ceil(|B|·(s+1)/4) block sizes ({1..5}, ..., {1..20} for B = 1..20).
std::size_t stage_blocks(const MaskingPool& pool, std::size_t stage) {
    return (pool.blocks().size() * (stage + 1) + 3) / 4;
}

std::vector<double> uniform_ratios(const MaskingPool& pool) {
    return std::vector<double>(pool.ratios().size(), 1.0 / static_cast<double>(pool.ratios().size()));
}

}  // namespace

std::vector<double> baseline_distribution(Method kind, std::uint64_t step, std::uint64_t total_steps,
                                          const MaskingPool& pool, std::size_t fixed_block) {
    switch (kind) {
        case Method::mixed:
            return std::vector<double>(pool.size(), 1.0 / static_cast<double>(pool.size()));
        case Method::mixed_prog:
            return uniform_over_prefix(pool, stage_blocks(pool, curriculum_stage(step, total_steps)));
        case Method::mixed_inv:
            return uniform_over_prefix(pool, stage_blocks(pool, 3 - curriculum_stage(step, total_steps)));
        case Method::maskdp:
        case Method::fixed: {
            const std::size_t block = kind == Method::maskdp ? 1 : fixed_block;
            const auto bi = block_index(pool, block);
            if (!bi) {
                return {};
            }
            std::vector<double> p(pool.size(), 0.0);
            for (std::size_t r = 0; r < pool.ratios().size(); ++r) {
                p[pool.arm(r, *bi)] = 1.0 / static_cast<double>(pool.ratios().size());
            }
            return p;
        }
        case Method::mtm:
            return {};
        case Method::currmask:
            break;
    }
    throw ParameterError("baseline_distribution: currmask is adaptive");
}

SchemeChoice baseline_next_scheme(Method kind, std::uint64_t step, std::uint64_t total_steps,
                                  const MaskingPool& pool, Rng& rng, std::size_t fixed_block) {
    if (step >= total_steps) {
        throw ParameterError("baseline_next_scheme: step must be < total_steps");
    }
    SchemeChoice choice;
    switch (kind) {
        case Method::mixed:
        case Method::mixed_prog:
        case Method::mixed_inv: {
            const auto p = baseline_distribution(kind, step, total_steps, pool);
            const std::size_t arm = sample_categorical(p, rng);
            choice.scheme = pool.scheme(arm);
            choice.arm = arm;
            return choice;
        }
        case Method::maskdp:
        case Method::mtm:
        case Method::fixed: {
            const std::size_t block = kind == Method::fixed ? fixed_block : 1;
            if (block < 1) {
                throw ConfigError("fixed method needs a block size >= 1");
            }
            const auto ratios = uniform_ratios(pool);
            const std::size_t ri = sample_categorical(ratios, rng);
            choice.scheme = MaskScheme{pool.ratios()[ri], block};
            choice.kind = kind == Method::mtm ? MaskKind::autoregressive : MaskKind::block;
            if (kind != Method::mtm) {
                if (const auto bi = block_index(pool, block)) {
                    choice.arm = pool.arm(ri, *bi);
                }
            }
            return choice;
        }
        case Method::currmask:
            break;
    }
    throw ParameterError("baseline_next_scheme: currmask is adaptive");
}

}  // namespace currmask
