#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "currmask/rng.hpp"

namespace currmask {

// A (mask ratio, block size) pair; one arm of the curriculum bandit.
struct MaskScheme {
    double ratio = 0.15;
    std::size_t block = 1;

    friend bool operator==(const MaskScheme&, const MaskScheme&) = default;
};

// Binary per-token mask over an interleaved window: 1 keeps the token, 0 masks it.
class MaskMatrix {
public:
    MaskMatrix() = default;
    explicit MaskMatrix(std::size_t length, std::uint8_t fill = 1) : bits_(length, fill) {}

    std::size_t size() const { return bits_.size(); }
    bool visible(std::size_t i) const { return bits_[i] != 0; }
    bool masked(std::size_t i) const { return bits_[i] == 0; }
    void set_masked(std::size_t i) { bits_[i] = 0; }
    void set_visible(std::size_t i) { bits_[i] = 1; }

    std::size_t masked_count() const;
    std::vector<std::size_t> masked_indices() const;
    const std::vector<std::uint8_t>& bits() const { return bits_; }

    // u32 L (little-endian) followed by ceil(L/8) bytes; token i is bit (i % 8) of byte i / 8.
    std::vector<std::uint8_t> serialize() const;
    static MaskMatrix deserialize(std::span<const std::uint8_t> bytes);

    friend bool operator==(const MaskMatrix&, const MaskMatrix&) = default;

private:
    std::vector<std::uint8_t> bits_;
};

// Collects non-fatal conditions such as degenerate ratios.
struct MaskDiagnostics {
    std::vector<std::string> warnings;
};

// floor(p·L) with a 1e-9 guard against binary rounding of products like 0.35·180.
std::size_t masked_token_count(std::size_t length, double ratio);

// Uniform random subset of exactly masked_token_count(L, p) tokens.
MaskMatrix random_mask(std::size_t length, double ratio, Rng& rng, MaskDiagnostics* diag = nullptr);

struct BlockMaskOptions {
    // false: each block masks offsets 1..b-1 after its anchor (b-1 tokens).
    // true: each block masks offsets 0..b-1 (b contiguous tokens).
    bool full_blocks = false;
};

// The random draws of one block-mask call, exposed so a trace can be pinned in tests.
struct BlockDraw {
    std::size_t start = 0;                 // s in [0, b)
    std::vector<std::size_t> block_order;  // permutation of 0..c-1
};

// Block-wise masking. b == 1 delegates to random_mask with the same rng.
MaskMatrix block_mask(std::size_t length, double ratio, std::size_t block, Rng& rng,
                      const BlockMaskOptions& options = {}, MaskDiagnostics* diag = nullptr);

// Deterministic core of block_mask given explicit draws (b >= 2).
MaskMatrix block_mask_from_draw(std::size_t length, double ratio, std::size_t block, const BlockDraw& draw,
                                const BlockMaskOptions& options = {});

// Number of blocks c = floor((L - 1) / b).
std::size_t block_count(std::size_t length, std::size_t block);

// Random mask followed by masking every token after the last masked one.
MaskMatrix random_autoregressive_mask(std::size_t length, double ratio, Rng& rng,
                                      MaskDiagnostics* diag = nullptr);

// Tokens [0, visible_tokens) visible, the rest masked.
MaskMatrix prefix_mask(std::size_t length, std::size_t visible_tokens);

// Visible exactly on the first 2·prompt_timesteps tokens; requires 2·prompt_timesteps < L.
MaskMatrix prompt_mask(std::size_t length, std::size_t prompt_timesteps);

// Visible at token 0 and at each goal token; goal tokens must be even, increasing and < L.
MaskMatrix goal_mask(std::size_t length, std::span<const std::size_t> goal_token_indices);

}  // namespace currmask
