#include "currmask/learner.hpp"

#include <cmath>
#include <numeric>

#include "currmask/errors.hpp"

namespace currmask {

SyntheticLearner::SyntheticLearner(std::vector<double> base, std::vector<double> floor,
                                   std::vector<std::vector<double>> transfer)
    : base_(std::move(base)), floor_(std::move(floor)), transfer_(std::move(transfer)) {
    const std::size_t k = base_.size();
    if (k == 0 || floor_.size() != k || transfer_.size() != k) {
        throw ShapeError("SyntheticLearner: base, floor and transfer must describe the same K > 0 schemes");
    }
    for (std::size_t i = 0; i < k; ++i) {
        if (base_[i] < 0.0 || floor_[i] < 0.0) {
            throw ParameterError("SyntheticLearner: base losses and floors must be non-negative");
        }
        if (transfer_[i].size() != k) {
            throw ShapeError("SyntheticLearner: transfer matrix must be K x K");
        }
        for (double t : transfer_[i]) {
            if (t < 0.0) {
                throw ParameterError("SyntheticLearner: transfer entries must be non-negative");
            }
        }
    }
    counts_.assign(k, 0);
}

double SyntheticLearner::synthetic_loss(std::size_t scheme) const {
    if (scheme >= base_.size()) {
        throw ParameterError("SyntheticLearner: scheme index out of range");
    }
    double exponent = 0.0;
    for (std::size_t j = 0; j < counts_.size(); ++j) {
        exponent += transfer_[scheme][j] * static_cast<double>(counts_[j]);
    }
    return base_[scheme] * std::exp(-exponent) + floor_[scheme];
}

void SyntheticLearner::synthetic_train(std::size_t scheme, std::uint64_t steps) {
    if (scheme >= base_.size()) {
        throw ParameterError("SyntheticLearner: scheme index out of range");
    }
    counts_[scheme] += steps;
}

double SyntheticLearner::mean_loss() const {
    double total = 0.0;
    for (std::size_t k = 0; k < base_.size(); ++k) {
        total += synthetic_loss(k);
    }
    return total / static_cast<double>(base_.size());
}

std::size_t SyntheticLearner::require_scheme(const MaskedBatch& batch) const {
    if (!batch.scheme) {
        throw ParameterError("SyntheticLearner: batch carries no scheme index");
    }
    return *batch.scheme;
}

double SyntheticLearner::train_step(const MaskedBatch& batch) {
    const std::size_t k = require_scheme(batch);
    const double before = synthetic_loss(k);
    synthetic_train(k);
    return before;
}

double SyntheticLearner::eval_loss(const MaskedBatch& batch) const { return synthetic_loss(require_scheme(batch)); }

LearnerSnapshot SyntheticLearner::snapshot() const {
    LearnerSnapshot s;
    s.counts = counts_;
    return s;
}

void SyntheticLearner::restore(const LearnerSnapshot& snap) {
    if (snap.counts.size() != counts_.size()) {
        throw ShapeError("SyntheticLearner: snapshot has the wrong scheme count");
    }
    counts_ = snap.counts;
}

NetLearner::NetLearner(const NetConfig& config, const AdamConfig& adam, std::uint64_t seed)
    : net_(config, seed), adam_(adam) {}

double NetLearner::train_step(const MaskedBatch& batch) {
    const double loss = net_.loss_and_gradient(batch.windows, batch.masks);
    if (!std::isfinite(loss)) {
        throw NumericError("train_step: non-finite loss " + std::to_string(loss));
    }
    for (float g : net_.gradients()) {
        if (!std::isfinite(g)) {
            throw NumericError("train_step: non-finite gradient");
        }
    }
    adam_step(net_.parameters(), net_.gradients(), state_, adam_);
    return loss;
}

double NetLearner::eval_loss(const MaskedBatch& batch) const { return net_.loss(batch.windows, batch.masks); }

LearnerSnapshot NetLearner::snapshot() const {
    LearnerSnapshot s;
    s.parameters.assign(net_.parameters().begin(), net_.parameters().end());
    s.adam_m = state_.m;
    s.adam_v = state_.v;
    s.adam_m.resize(s.parameters.size(), 0.0f);
    s.adam_v.resize(s.parameters.size(), 0.0f);
    s.adam_step = state_.step;
    return s;
}

void NetLearner::restore(const LearnerSnapshot& snap) {
    if (snap.parameters.size() != net_.parameter_count()) {
        throw ShapeError("NetLearner: snapshot parameter count " + std::to_string(snap.parameters.size()) +
                         " differs from the architecture's " + std::to_string(net_.parameter_count()));
    }
    std::copy(snap.parameters.begin(), snap.parameters.end(), net_.parameters().begin());
    state_.m = snap.adam_m;
    state_.v = snap.adam_v;
    state_.step = snap.adam_step;
}

Window predict_tokens(const MaskedPredictionNet<float>& net, const NormStats& stats, const Window& window,
                      const MaskMatrix& mask) {
    if (mask.size() != window.token_count()) {
        throw ShapeError("predict_tokens: mask length differs from window token count");
    }
    const Window recon = denormalize(net.reconstruct(normalize(window, stats), mask), stats);
    Window out = window;
    for (std::size_t t = 0; t < window.timesteps(); ++t) {
        const auto row = static_cast<Eigen::Index>(t);
        if (mask.masked(2 * t)) {
            out.states.row(row) = recon.states.row(row);
        }
        if (mask.masked(2 * t + 1)) {
            out.actions.row(row) = recon.actions.row(row).cwiseMax(-1.0f).cwiseMin(1.0f);
        }
    }
    return out;
}

}  // namespace currmask
