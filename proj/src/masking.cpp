#include "currmask/masking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "currmask/errors.hpp"

namespace currmask {

std::size_t MaskMatrix::masked_count() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{0}));
}

std::vector<std::size_t> MaskMatrix::masked_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < bits_.size(); ++i) {
        if (bits_[i] == 0) {
            out.push_back(i);
        }
    }
    return out;
}

std::vector<std::uint8_t> MaskMatrix::serialize() const {
    const auto n = static_cast<std::uint32_t>(bits_.size());
    std::vector<std::uint8_t> out{static_cast<std::uint8_t>(n), static_cast<std::uint8_t>(n >> 8),
                                  static_cast<std::uint8_t>(n >> 16), static_cast<std::uint8_t>(n >> 24)};
    out.resize(4 + (bits_.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < bits_.size(); ++i) {
        if (bits_[i] != 0) {
            out[4 + i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
        }
    }
    return out;
}

MaskMatrix MaskMatrix::deserialize(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4) {
        throw CorruptHeaderError("mask: missing length prefix");
    }
    const std::uint32_t n = static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
                            (static_cast<std::uint32_t>(bytes[2]) << 16) |
                            (static_cast<std::uint32_t>(bytes[3]) << 24);
    if (bytes.size() != 4 + (static_cast<std::size_t>(n) + 7) / 8) {
        throw PayloadLengthError("mask: payload length does not match L=" + std::to_string(n));
    }
    MaskMatrix m(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        m.bits_[i] = (bytes[4 + i / 8] >> (i % 8)) & 1u;
    }
    return m;
}

std::size_t masked_token_count(std::size_t length, double ratio) {
    return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(length) + 1e-9));
}

namespace {

void check_ratio(std::size_t length, double ratio) {
    if (!(ratio > 0.0 && ratio <= 1.0)) {
        throw ParameterError("mask ratio must lie in (0, 1], got " + std::to_string(ratio));
    }
    if (length < 2) {
        throw ParameterError("mask length must be >= 2");
    }
}

// floor(p·L) == 0: nothing to hide.
bool degenerate(std::size_t length, double ratio, MaskDiagnostics* diag) {
    if (masked_token_count(length, ratio) > 0) {
        return false;
    }
    if (diag != nullptr) {
        diag->warnings.push_back("degenerate mask: floor(" + std::to_string(ratio) + " * " +
                                 std::to_string(length) + ") = 0, returning all-visible mask");
    }
    return true;
}

}  // namespace

MaskMatrix random_mask(std::size_t length, double ratio, Rng& rng, MaskDiagnostics* diag) {
    check_ratio(length, ratio);
    MaskMatrix m(length);
    if (degenerate(length, ratio, diag)) {
        return m;
    }
    const std::size_t l = masked_token_count(length, ratio);
    std::vector<std::size_t> idx(length);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    // Partial Fisher-Yates: the first l slots become a uniform l-subset.
    for (std::size_t i = 0; i < l; ++i) {
        const std::size_t j = i + uniform_index(rng, length - i);
        std::swap(idx[i], idx[j]);
        m.set_masked(idx[i]);
    }
    return m;
}

std::size_t block_count(std::size_t length, std::size_t block) { return (length - 1) / block; }

MaskMatrix block_mask_from_draw(std::size_t length, double ratio, std::size_t block, const BlockDraw& draw,
                                const BlockMaskOptions& options) {
    check_ratio(length, ratio);
    if (block < 2 || block > length) {
        throw ParameterError("block_mask_from_draw: block size must lie in [2, L]");
    }
    MaskMatrix m(length);
    const std::size_t l = masked_token_count(length, ratio);
    if (l == 0) {
        return m;
    }
    const std::size_t first = options.full_blocks ? 0 : 1;
    std::vector<std::size_t> ts;
    ts.reserve(draw.block_order.size() * block);
    for (std::size_t i : draw.block_order) {
        for (std::size_t j = first; j < block; ++j) {
            const std::size_t token = i * block + j + draw.start;
            if (token < length) {
                ts.push_back(token);
            }
        }
    }
    // ts[-l:]
    const std::size_t take = std::min(l, ts.size());
    std::vector<std::uint8_t> in_ts(length, 0);
    for (std::size_t k = ts.size() - take; k < ts.size(); ++k) {
        m.set_masked(ts[k]);
    }
    if (ts.size() < l) {
        // ((0..L-1) - ts)[len(ts) - l:] is the tail of the ascending complement.
        for (std::size_t t : ts) {
            in_ts[t] = 1;
        }
        std::vector<std::size_t> complement;
        for (std::size_t t = 0; t < length; ++t) {
            if (in_ts[t] == 0) {
                complement.push_back(t);
            }
        }
        const std::size_t shortfall = l - ts.size();
        for (std::size_t k = complement.size() - shortfall; k < complement.size(); ++k) {
            m.set_masked(complement[k]);
        }
    }
    return m;
}

MaskMatrix block_mask(std::size_t length, double ratio, std::size_t block, Rng& rng,
                      const BlockMaskOptions& options, MaskDiagnostics* diag) {
    check_ratio(length, ratio);
    if (block < 1) {
        throw ParameterError("block size must be >= 1");
    }
    if (block > length) {
        throw ParameterError("block size " + std::to_string(block) + " exceeds sequence length " +
                             std::to_string(length));
    }
    if (block == 1) {
        return random_mask(length, ratio, rng, diag);
    }
    if (degenerate(length, ratio, diag)) {
        return MaskMatrix(length);
    }
    BlockDraw draw;
    draw.start = uniform_index(rng, block);
    draw.block_order.resize(block_count(length, block));
    std::iota(draw.block_order.begin(), draw.block_order.end(), std::size_t{0});
    for (std::size_t i = draw.block_order.size(); i > 1; --i) {
        std::swap(draw.block_order[i - 1], draw.block_order[uniform_index(rng, i)]);
    }
    return block_mask_from_draw(length, ratio, block, draw, options);
}

MaskMatrix random_autoregressive_mask(std::size_t length, double ratio, Rng& rng, MaskDiagnostics* diag) {
    MaskMatrix m = random_mask(length, ratio, rng, diag);
    std::size_t last = length;
    for (std::size_t i = length; i-- > 0;) {
        if (m.masked(i)) {
            last = i;
            break;
        }
    }
    if (last == length) {
        return m;
    }
    for (std::size_t i = last + 1; i < length; ++i) {
        m.set_masked(i);
    }
    return m;
}

MaskMatrix prefix_mask(std::size_t length, std::size_t visible_tokens) {
    if (visible_tokens > length) {
        throw ParameterError("prefix_mask: visible prefix longer than sequence");
    }
    MaskMatrix m(length, 0);
    for (std::size_t i = 0; i < visible_tokens; ++i) {
        m.set_visible(i);
    }
    return m;
}

MaskMatrix prompt_mask(std::size_t length, std::size_t prompt_timesteps) {
    if (2 * prompt_timesteps >= length) {
        throw ParameterError("prompt_mask: prompt of " + std::to_string(prompt_timesteps) +
                             " timesteps leaves nothing to predict in L=" + std::to_string(length));
    }
    return prefix_mask(length, 2 * prompt_timesteps);
}

MaskMatrix goal_mask(std::size_t length, std::span<const std::size_t> goal_token_indices) {
    if (length < 1) {
        throw ParameterError("goal_mask: empty sequence");
    }
    MaskMatrix m(length, 0);
    m.set_visible(0);
    std::size_t previous = 0;
    for (std::size_t g : goal_token_indices) {
        if (g % 2 != 0) {
            throw ParameterError("goal_mask: goal token " + std::to_string(g) + " is an action position");
        }
        if (g >= length || g <= previous) {
            throw ParameterError("goal_mask: goal tokens must be strictly increasing, positive and < L");
        }
        m.set_visible(g);
        previous = g;
    }
    return m;
}

}  // namespace currmask
