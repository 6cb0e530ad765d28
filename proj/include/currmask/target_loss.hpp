#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "currmask/learner.hpp"
#include "currmask/scheduler.hpp"
#include "currmask/trajectory.hpp"

namespace currmask {

struct TargetLossOptions {
    std::size_t samples = 10;           // validation windows N
    std::size_t scheme_subsample = 0;   // 0 evaluates every pool scheme
    std::size_t window_timesteps = 16;  // W; masks cover 2W tokens
    BlockMaskOptions block_options;
    std::size_t threads = 1;
};

// A fixed evaluation set for L_target: N validation windows shared by every scheme, plus N
// masks per scheme, all drawn once from the probe's seed. Re-evaluating the same probe before
// and after an interval therefore uses common random numbers.
class TargetLossProbe {
public:
    TargetLossProbe(const std::vector<Trajectory>& validation, const NormStats& stats, const MaskingPool& pool,
                    const TargetLossOptions& options, std::uint64_t seed);

    // For learners that ignore data (SyntheticLearner): batches carry only the scheme index.
    static TargetLossProbe schemes_only(const MaskingPool& pool, std::size_t scheme_subsample, std::uint64_t seed);

    // (1/K')·Σ_k eval_loss over the probe's schemes, reduced in scheme order.
    double evaluate(const Learner& learner) const;
    std::vector<double> per_scheme(const Learner& learner) const;

    const std::vector<std::size_t>& schemes() const { return schemes_; }
    const std::vector<MaskedBatch>& batches() const { return batches_; }

private:
    TargetLossProbe() = default;
    std::vector<std::size_t> schemes_;
    std::vector<MaskedBatch> batches_;
    std::size_t threads_ = 1;
};

// One-shot L_target with masks and windows drawn from `rng`.
double compute_target_loss(const Learner& learner, const std::vector<Trajectory>& validation,
                           const NormStats& stats, const MaskingPool& pool, std::size_t samples,
                           std::size_t window_timesteps, Rng& rng);

// Draws the mask for one window under a scheme.
MaskMatrix draw_mask(const MaskScheme& scheme, MaskKind kind, std::size_t tokens, Rng& rng,
                     const BlockMaskOptions& options = {});

}  // namespace currmask
