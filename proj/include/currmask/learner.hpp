#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "currmask/masking.hpp"
#include "currmask/net.hpp"
#include "currmask/trajectory.hpp"

namespace currmask {

// Normalized windows, one mask per window, and the pool arm the masks were drawn from
// (if any). Learners that model progress per scheme only look at `scheme`.
struct MaskedBatch {
    std::vector<Window> windows;
    std::vector<MaskMatrix> masks;
    std::optional<std::size_t> scheme;
};

// Opaque copy of a learner's full trainable state.
struct LearnerSnapshot {
    std::vector<float> parameters;
    std::vector<float> adam_m;
    std::vector<float> adam_v;
    std::uint64_t adam_step = 0;
    std::vector<std::uint64_t> counts;  // SyntheticLearner
};

class Learner {
public:
    virtual ~Learner() = default;
    // One optimisation step; returns the loss measured before the step.
    virtual double train_step(const MaskedBatch& batch) = 0;
    // Side-effect free.
    virtual double eval_loss(const MaskedBatch& batch) const = 0;
    virtual LearnerSnapshot snapshot() const = 0;
    virtual void restore(const LearnerSnapshot& snap) = 0;
};

// Closed-form learning-progress model: loss_k(n) = a_k · exp(-Σ_j T_kj · n_j) + c_k, where
// n_j counts training steps taken on scheme j.
class SyntheticLearner final : public Learner {
public:
    SyntheticLearner(std::vector<double> base, std::vector<double> floor, std::vector<std::vector<double>> transfer);

    std::size_t schemes() const { return base_.size(); }
    double synthetic_loss(std::size_t scheme) const;
    void synthetic_train(std::size_t scheme, std::uint64_t steps = 1);
    const std::vector<std::uint64_t>& counts() const { return counts_; }
    // (1/K)·Σ_k loss_k
    double mean_loss() const;

    double train_step(const MaskedBatch& batch) override;
    double eval_loss(const MaskedBatch& batch) const override;
    LearnerSnapshot snapshot() const override;
    void restore(const LearnerSnapshot& snap) override;

private:
    std::size_t require_scheme(const MaskedBatch& batch) const;

    std::vector<double> base_;
    std::vector<double> floor_;
    std::vector<std::vector<double>> transfer_;
    std::vector<std::uint64_t> counts_;
};

// The masked-prediction objective: MSE per token dimension (all tokens, or masked tokens
// only when the net is configured so).
template <typename Scalar>
double masked_prediction_loss(const MaskedPredictionNet<Scalar>& net, const std::vector<Window>& windows,
                              const std::vector<MaskMatrix>& masks) {
    return net.loss(windows, masks);
}

// MaskedPredictionNet<float> trained with Adam.
class NetLearner final : public Learner {
public:
    NetLearner(const NetConfig& config, const AdamConfig& adam, std::uint64_t seed);

    // Throws NumericError if the loss or any gradient is non-finite; parameters are then untouched.
    double train_step(const MaskedBatch& batch) override;
    double eval_loss(const MaskedBatch& batch) const override;
    LearnerSnapshot snapshot() const override;
    void restore(const LearnerSnapshot& snap) override;

    MaskedPredictionNet<float>& net() { return net_; }
    const MaskedPredictionNet<float>& net() const { return net_; }
    const AdamConfig& adam_config() const { return adam_; }
    void set_learning_rate(double lr) { adam_.learning_rate = lr; }
    const AdamState& adam_state() const { return state_; }

private:
    MaskedPredictionNet<float> net_;
    AdamConfig adam_;
    AdamState state_;
};

// Completes a window given in environment units: masked tokens take the net's predictions
// (denormalized, actions clamped to [-1, 1]); visible tokens are copied from the input unchanged.
Window predict_tokens(const MaskedPredictionNet<float>& net, const NormStats& stats, const Window& window,
                      const MaskMatrix& mask);

}  // namespace currmask
