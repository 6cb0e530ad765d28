#include "currmask/target_loss.hpp"

#include <algorithm>
#include <numeric>
#include <thread>

#include "currmask/errors.hpp"

namespace currmask {

MaskMatrix draw_mask(const MaskScheme& scheme, MaskKind kind, std::size_t tokens, Rng& rng,
                     const BlockMaskOptions& options) {
    if (kind == MaskKind::autoregressive) {
        return random_autoregressive_mask(tokens, scheme.ratio, rng);
    }
    return block_mask(tokens, scheme.ratio, scheme.block, rng, options);
}

namespace {

std::vector<std::size_t> choose_schemes(std::size_t pool_size, std::size_t subsample, Rng& rng) {
    std::vector<std::size_t> all(pool_size);
    std::iota(all.begin(), all.end(), std::size_t{0});
    if (subsample == 0 || subsample >= pool_size) {
        return all;
    }
    for (std::size_t i = 0; i < subsample; ++i) {
        std::swap(all[i], all[i + uniform_index(rng, pool_size - i)]);
    }
    all.resize(subsample);
    std::sort(all.begin(), all.end());
    return all;
}

}  // namespace

TargetLossProbe::TargetLossProbe(const std::vector<Trajectory>& validation, const NormStats& stats,
                                 const MaskingPool& pool, const TargetLossOptions& options, std::uint64_t seed)
    : threads_(std::max<std::size_t>(1, options.threads)) {
    if (validation.empty()) {
        throw DataError("target loss: empty validation set");
    }
    if (options.samples < 1) {
        throw ParameterError("target loss: need at least one evaluation sample");
    }
    Rng rng = make_rng(seed);
    schemes_ = choose_schemes(pool.size(), options.scheme_subsample, rng);
    std::vector<Window> windows;
    windows.reserve(options.samples);
    for (std::size_t i = 0; i < options.samples; ++i) {
        const Trajectory& traj = validation[uniform_index(rng, validation.size())];
        windows.push_back(normalize(sample_window(traj, options.window_timesteps, rng), stats));
    }
    const std::size_t tokens = 2 * options.window_timesteps;
    for (std::size_t k : schemes_) {
        MaskedBatch batch;
        batch.windows = windows;
        batch.scheme = k;
        for (std::size_t i = 0; i < options.samples; ++i) {
            batch.masks.push_back(draw_mask(pool.scheme(k), MaskKind::block, tokens, rng, options.block_options));
        }
        batches_.push_back(std::move(batch));
    }
}

TargetLossProbe TargetLossProbe::schemes_only(const MaskingPool& pool, std::size_t scheme_subsample,
                                              std::uint64_t seed) {
    TargetLossProbe probe;
    Rng rng = make_rng(seed);
    probe.schemes_ = choose_schemes(pool.size(), scheme_subsample, rng);
    for (std::size_t k : probe.schemes_) {
        MaskedBatch batch;
        batch.scheme = k;
        probe.batches_.push_back(std::move(batch));
    }
    return probe;
}

std::vector<double> TargetLossProbe::per_scheme(const Learner& learner) const {
    std::vector<double> losses(batches_.size(), 0.0);
    const std::size_t workers = std::min(threads_, batches_.size());
    if (workers <= 1) {
        for (std::size_t i = 0; i < batches_.size(); ++i) {
            losses[i] = learner.eval_loss(batches_[i]);
        }
        return losses;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < batches_.size(); i += workers) {
                    losses[i] = learner.eval_loss(batches_[i]);
                }
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
    return losses;
}

double TargetLossProbe::evaluate(const Learner& learner) const {
    const auto losses = per_scheme(learner);
    double total = 0.0;
    for (double l : losses) {
        total += l;
    }
    return total / static_cast<double>(losses.size());
}

double compute_target_loss(const Learner& learner, const std::vector<Trajectory>& validation,
                           const NormStats& stats, const MaskingPool& pool, std::size_t samples,
                           std::size_t window_timesteps, Rng& rng) {
    TargetLossOptions options;
    options.samples = samples;
    options.window_timesteps = window_timesteps;
    const TargetLossProbe probe(validation, stats, pool, options, rng());
    return probe.evaluate(learner);
}

}  // namespace currmask
