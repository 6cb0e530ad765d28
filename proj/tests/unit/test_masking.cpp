#include <doctest.h>

#include <array>
#include <map>
#include <set>

#include "currmask/errors.hpp"
#include "currmask/masking.hpp"

using namespace currmask;

namespace {

std::set<std::size_t> zeros(const MaskMatrix& m) {
    const auto v = m.masked_indices();
    return {v.begin(), v.end()};
}

// Expanded block tokens before indices past L are dropped.
std::size_t expanded_count(std::size_t L, std::size_t b, bool full) { return block_count(L, b) * (full ? b : b - 1); }

}  // namespace

TEST_SUITE("masking") {
    TEST_CASE("masked_token_count floors p*L") {
        CHECK(masked_token_count(10, 0.5) == 5);
        CHECK(masked_token_count(5, 0.2) == 1);
        CHECK(masked_token_count(7, 0.15) == 1);
        CHECK(masked_token_count(180, 0.35) == 63);  // 0.35*180 evaluates to 62.99999...
        CHECK(masked_token_count(6, 0.15) == 0);
    }

    TEST_CASE("hand trace L=8 p=0.5 b=2 from explicit draws") {
        const BlockDraw draw{0, {2, 0, 1}};
        const MaskMatrix m = block_mask_from_draw(8, 0.5, 2, draw);
        // Expanded indices [5, 1, 3]; the fourth zero is the tail of the complement {0, 2, 4, 6, 7}.
        CHECK(zeros(m) == std::set<std::size_t>{1, 3, 5, 7});
        CHECK(m.bits() == std::vector<std::uint8_t>{1, 0, 1, 0, 1, 0, 1, 0});
    }

    TEST_CASE("hand trace with a pinned rng") {
        Rng rng = make_rng(13);  // draws s = 0, block order [2, 0, 1]
        const MaskMatrix m = block_mask(8, 0.5, 2, rng);
        CHECK(zeros(m) == std::set<std::size_t>{1, 3, 5, 7});
    }

    TEST_CASE("b = 1 is token-wise masking with exact frequencies") {
        Rng rng = make_rng(1);
        std::array<int, 10> hits{};
        const int n = 20000;
        for (int i = 0; i < n; ++i) {
            const MaskMatrix m = block_mask(10, 0.5, 1, rng);
            REQUIRE(m.masked_count() == 5);
            for (auto z : m.masked_indices()) ++hits[z];
        }
        for (int h : hits) CHECK(std::abs(h / double(n) - 0.5) <= 0.02);
    }

    TEST_CASE("b = 1 consumes the rng exactly like random_mask") {
        Rng a = make_rng(77), b = make_rng(77);
        for (int i = 0; i < 100; ++i) {
            CHECK(block_mask(16, 0.35, 1, a) == random_mask(16, 0.35, b));
        }
    }

    TEST_CASE("degenerate ratio returns an all-visible mask with a warning") {
        Rng rng = make_rng(2);
        MaskDiagnostics diag;
        const MaskMatrix m = block_mask(6, 0.15, 3, rng, {}, &diag);
        CHECK(m.masked_count() == 0);
        CHECK(m.size() == 6);
        CHECK(diag.warnings.size() == 1);
        CHECK(random_mask(4, 0.2, rng).masked_count() == 0);
    }

    TEST_CASE("p = 1 masks everything for every block size") {
        Rng rng = make_rng(3);
        for (std::size_t b = 1; b <= 20; ++b) {
            for (bool full : {false, true}) {
                CHECK(block_mask(20, 1.0, b, rng, BlockMaskOptions{full}).masked_count() == 20);
            }
        }
        CHECK(random_mask(9, 1.0, rng).masked_count() == 9);
    }

    TEST_CASE("zero-count law on a small sweep") {
        Rng rng = make_rng(4);
        const std::array<double, 5> ratios{0.15, 0.35, 0.55, 0.75, 0.95};
        for (std::size_t L = 2; L <= 64; ++L) {
            for (double p : ratios) {
                for (std::size_t b = 1; b <= std::min<std::size_t>(20, L); ++b) {
                    for (bool full : {false, true}) {
                        CHECK(block_mask(L, p, b, rng, BlockMaskOptions{full}).masked_count() ==
                              masked_token_count(L, p));
                    }
                }
                CHECK(random_mask(L, p, rng).masked_count() == masked_token_count(L, p));
            }
        }
    }

    TEST_CASE("block structure when no complement fill is needed") {
        Rng rng = make_rng(5);
        int checked = 0;
        for (int trial = 0; trial < 2000; ++trial) {
            const std::size_t L = 8 + uniform_index(rng, 57);
            const std::size_t b = 2 + uniform_index(rng, std::min<std::size_t>(19, L - 1));
            const double p = std::array<double, 5>{0.15, 0.35, 0.55, 0.75, 0.95}[uniform_index(rng, 5)];
            Rng replay = rng;
            const std::size_t s = uniform_index(replay, b);
            const MaskMatrix m = block_mask(L, p, b, rng);
            const std::size_t l = masked_token_count(L, p);
            if (l == 0 || expanded_count(L, b, false) < l + b) {
                continue;  // truncation at L may trigger the complement fill
            }
            ++checked;
            for (auto z : m.masked_indices()) {
                REQUIRE(z >= s + 1);
                CHECK((z - s) % b != 0);
            }
        }
        CHECK(checked > 100);
    }

    TEST_CASE("full blocks mask contiguous runs of b tokens") {
        const BlockDraw draw{1, {1, 0, 2}};
        const MaskMatrix m = block_mask_from_draw(12, 0.5, 3, draw, BlockMaskOptions{true});
        // blocks -> tokens {4,5,6}, {1,2,3}, {7,8,9}; the last 6 expanded indices are masked.
        CHECK(zeros(m) == std::set<std::size_t>{1, 2, 3, 7, 8, 9});
    }

    TEST_CASE("parameter errors") {
        Rng rng = make_rng(6);
        CHECK_THROWS_AS(block_mask(4, 0.5, 5, rng), ParameterError);
        CHECK_THROWS_AS(block_mask(4, 0.0, 2, rng), ParameterError);
        CHECK_THROWS_AS(block_mask(4, 1.5, 2, rng), ParameterError);
        CHECK_THROWS_AS(block_mask(1, 0.5, 1, rng), ParameterError);
        CHECK_THROWS_AS(block_mask(4, 0.5, 0, rng), ParameterError);
        CHECK_THROWS_AS(random_mask(10, -0.1, rng), ParameterError);
    }

    TEST_CASE("random_mask subsets are uniform") {
        Rng rng = make_rng(7);
        std::map<std::set<std::size_t>, int> counts;
        const int n = 60000;
        for (int i = 0; i < n; ++i) ++counts[zeros(random_mask(4, 0.5, rng))];
        CHECK(counts.size() == 6);
        for (const auto& [subset, c] : counts) CHECK(std::abs(c / double(n) - 1.0 / 6.0) <= 0.01);
    }

    TEST_CASE("single zero for L=5 p=0.2") {
        Rng rng = make_rng(8);
        CHECK(random_mask(5, 0.2, rng).masked_count() == 1);
    }

    TEST_CASE("random autoregressive: pinned draw") {
        Rng probe = make_rng(11);
        CHECK(zeros(random_mask(8, 0.25, probe)) == std::set<std::size_t>{2, 5});
        Rng rng = make_rng(11);
        CHECK(zeros(random_autoregressive_mask(8, 0.25, rng)) == std::set<std::size_t>{2, 5, 6, 7});
    }

    TEST_CASE("random autoregressive: suffix law") {
        Rng rng = make_rng(9);
        for (int i = 0; i < 2000; ++i) {
            const std::size_t L = 2 + uniform_index(rng, 63);
            const double p = 0.05 + 0.95 * uniform01(rng);
            const MaskMatrix m = random_autoregressive_mask(L, p, rng);
            const auto z = m.masked_indices();
            CHECK(m.masked_count() >= masked_token_count(L, p));
            if (!z.empty()) {
                for (std::size_t t = z.back(); t < L; ++t) CHECK(m.masked(t));
            }
        }
        CHECK(random_autoregressive_mask(6, 0.1, rng).masked_count() == 0);
    }

    TEST_CASE("random autoregressive: tail-only zeros unchanged") {
        // Whenever the random draw already masks a suffix, the result equals it.
        Rng rng = make_rng(10);
        for (int i = 0; i < 500; ++i) {
            Rng copy = rng;
            const MaskMatrix base = random_mask(6, 0.5, copy);
            const MaskMatrix ar = random_autoregressive_mask(6, 0.5, rng);
            if (zeros(base) == std::set<std::size_t>{3, 4, 5}) CHECK(ar == base);
        }
    }

    TEST_CASE("prompt masks") {
        CHECK(prompt_mask(12, 3).bits() == std::vector<std::uint8_t>{1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0});
        CHECK(prompt_mask(4, 1).bits() == std::vector<std::uint8_t>{1, 1, 0, 0});
        CHECK_THROWS_AS(prompt_mask(4, 2), ParameterError);
    }

    TEST_CASE("goal masks") {
        const std::array<std::size_t, 2> g{4, 8};
        CHECK(zeros(goal_mask(10, g)).size() == 7);
        CHECK(goal_mask(10, g).bits() == std::vector<std::uint8_t>{1, 0, 0, 0, 1, 0, 0, 0, 1, 0});
        CHECK(goal_mask(10, {}).masked_count() == 9);
        const std::array<std::size_t, 4> paper{40, 80, 120, 160};
        const MaskMatrix m = goal_mask(200, paper);
        for (std::size_t i = 0; i < 200; ++i) {
            CHECK(m.visible(i) == (i == 0 || i == 40 || i == 80 || i == 120 || i == 160));
        }
        const std::array<std::size_t, 1> odd{3};
        CHECK_THROWS_AS(goal_mask(10, odd), ParameterError);
        const std::array<std::size_t, 2> unsorted{8, 4};
        CHECK_THROWS_AS(goal_mask(10, unsorted), ParameterError);
    }

    TEST_CASE("determinism under a pinned rng") {
        Rng a = make_rng(42), b = make_rng(42);
        for (int i = 0; i < 200; ++i) {
            CHECK(block_mask(40, 0.55, 7, a) == block_mask(40, 0.55, 7, b));
        }
    }

    TEST_CASE("serialization") {
        const MaskMatrix m = block_mask_from_draw(8, 0.5, 2, BlockDraw{0, {2, 0, 1}});
        // L = 8 little-endian, then bits 0..7 LSB first: 1,0,1,0,1,0,1,0 -> 0x55.
        CHECK(m.serialize() == std::vector<std::uint8_t>{8, 0, 0, 0, 0x55});
        Rng rng = make_rng(12);
        for (std::size_t L : {2, 9, 31, 64, 255}) {
            const MaskMatrix r = random_mask(L, 0.55, rng);
            const auto bytes = r.serialize();
            CHECK(MaskMatrix::deserialize(bytes) == r);
        }
        std::vector<std::uint8_t> short_payload{9, 0, 0, 0, 0xff};
        CHECK_THROWS_AS(MaskMatrix::deserialize(short_payload), PayloadLengthError);
    }
}
