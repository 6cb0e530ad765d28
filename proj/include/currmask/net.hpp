#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "currmask/masking.hpp"
#include "currmask/trajectory.hpp"

namespace currmask {

struct NetConfig {
    std::size_t state_dim = 4;
    std::size_t action_dim = 2;
    std::size_t hidden = 64;
    std::size_t heads = 2;
    std::size_t encoder_layers = 2;
    std::size_t decoder_layers = 1;
    std::size_t ffn_multiplier = 4;
    std::size_t context_tokens = 32;  // longest token window the positional tables cover
    bool masked_only_loss = false;    // default: loss over every token

    void validate() const;
    friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

// One named tensor inside the flat parameter blob.
struct ParamEntry {
    std::string name;
    std::size_t offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t size() const { return rows * cols; }
};

// Bidirectional encoder-decoder for masked prediction over interleaved state/action tokens.
//
// The encoder attends over visible tokens only (input projection + positional + modality
// embeddings, pre-LN transformer blocks, final LayerNorm). Its outputs are projected and
// scattered back into the full token grid, masked slots take a learnable mask embedding, and
// the decoder runs over the whole grid before the state and action heads.
//
// Every parameter lives in one contiguous vector in declaration order; gradients mirror it.
// Scalar is float for training and double for gradient checks.
template <typename Scalar>
class MaskedPredictionNet {
public:
    MaskedPredictionNet(const NetConfig& config, std::uint64_t seed);
    ~MaskedPredictionNet();
    MaskedPredictionNet(const MaskedPredictionNet&);
    MaskedPredictionNet& operator=(const MaskedPredictionNet&);
    MaskedPredictionNet(MaskedPredictionNet&&) noexcept;
    MaskedPredictionNet& operator=(MaskedPredictionNet&&) noexcept;

    const NetConfig& config() const { return config_; }
    std::size_t parameter_count() const { return params_.size(); }
    const std::vector<ParamEntry>& parameter_table() const { return table_; }
    std::span<Scalar> parameters() { return params_; }
    std::span<const Scalar> parameters() const { return params_; }
    std::span<Scalar> gradients() { return grads_; }
    std::span<const Scalar> gradients() const { return grads_; }
    const ParamEntry& entry(const std::string& name) const;

    // Mean squared error per token dimension over the batch. Windows must be normalized,
    // share one length L = 2W <= context_tokens, and masks must have length L.
    double loss(const std::vector<Window>& windows, const std::vector<MaskMatrix>& masks) const;

    // Same loss; overwrites gradients() with d loss / d parameters.
    double loss_and_gradient(const std::vector<Window>& windows, const std::vector<MaskMatrix>& masks);

    // Head outputs at every token (normalized units). Inputs at masked tokens are never read.
    Window reconstruct(const Window& window, const MaskMatrix& mask) const;

private:
    struct Impl;
    NetConfig config_;
    std::vector<ParamEntry> table_;
    std::vector<Scalar> params_;
    std::vector<Scalar> grads_;
    std::unique_ptr<Impl> impl_;
};

extern template class MaskedPredictionNet<float>;
extern template class MaskedPredictionNet<double>;

struct AdamConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<float> m;
    std::vector<float> v;
    std::uint64_t step = 0;
};

// One bias-corrected Adam update without weight decay.
void adam_step(std::span<float> params, std::span<const float> grads, AdamState& state, const AdamConfig& cfg);

}  // namespace currmask
