// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any criterion fails.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "currmask/checkpoint.hpp"
#include "currmask/config.hpp"
#include "currmask/dataset.hpp"
#include "currmask/errors.hpp"
#include "currmask/eval_harness.hpp"
#include "currmask/learner.hpp"
#include "currmask/masking.hpp"
#include "currmask/runner.hpp"
#include "currmask/scheduler.hpp"
#include "currmask/target_loss.hpp"
#include "stats.hpp"

using namespace currmask;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            if (pass) {
                detail << "first failure: " << what << "; ";
            }
            pass = false;
        }
    }
};

const std::vector<double> kRatios{0.15, 0.35, 0.55, 0.75, 0.95};

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// ---------------------------------------------------------------------------------------------
// 1. Masking exactness

void masking_exactness(Outcome& out) {
    std::size_t checked = 0;
    for (std::size_t len = 2; len <= 256; ++len) {
        for (double p : kRatios) {
            const std::size_t expect = static_cast<std::size_t>(std::floor(p * static_cast<double>(len) + 1e-9));
            for (std::size_t b = 1; b <= 20; ++b) {
                for (std::uint64_t seed = 0; seed < 100; ++seed) {
                    Rng rng = make_rng(seed * 7919 + len * 31 + b);
                    if (b > len) {
                        bool threw = false;
                        try {
                            (void)block_mask(len, p, b, rng);
                        } catch (const ParameterError&) {
                            threw = true;
                        }
                        out.require(threw, "b > L must be rejected");
                        break;
                    }
                    const MaskMatrix m = block_mask(len, p, b, rng);
                    out.require(m.masked_count() == expect, "block_mask count L=" + std::to_string(len) +
                                                                " b=" + std::to_string(b));
                    const MaskMatrix full = block_mask(len, p, b, rng, BlockMaskOptions{true});
                    out.require(full.masked_count() == expect, "full-block count");
                    ++checked;
                }
            }
            for (std::uint64_t seed = 0; seed < 100; ++seed) {
                Rng rng = make_rng(seed + 1000 * len);
                out.require(random_mask(len, p, rng).masked_count() == expect, "random_mask count");
            }
        }
    }

    // b = 1 against random_mask: distribution over masked subsets, L <= 8, 100k samples each.
    double worst = 1.0;
    std::string worst_case;
    for (std::size_t len = 2; len <= 8; ++len) {
        for (double p : kRatios) {
            const std::size_t n = 100000;
            std::vector<double> a(std::size_t{1} << len, 0.0), r(std::size_t{1} << len, 0.0);
            Rng ra = make_rng(derive_seed(len * 100 + static_cast<std::uint64_t>(p * 100), "block"));
            Rng rb = make_rng(derive_seed(len * 100 + static_cast<std::uint64_t>(p * 100), "random"));
            auto code = [](const MaskMatrix& m) {
                std::size_t c = 0;
                for (std::size_t i = 0; i < m.size(); ++i) c |= static_cast<std::size_t>(m.masked(i)) << i;
                return c;
            };
            for (std::size_t i = 0; i < n; ++i) {
                a[code(block_mask(len, p, 1, ra))] += 1;
                r[code(random_mask(len, p, rb))] += 1;
            }
            const double pv = test::chi_square_homogeneity_p(a, r);
            if (pv < worst) {
                worst = pv;
                worst_case = "L=" + std::to_string(len) + " p=" + std::to_string(p);
            }
        }
    }
    out.require(worst > 0.01, "chi-square b=1 vs random_mask p=" + std::to_string(worst) + " at " + worst_case);
    out.detail << checked << " block masks checked; min chi-square p " << worst << " (" << worst_case << ")";
}

// ---------------------------------------------------------------------------------------------
// 2. Block-mask algorithm fidelity

// Independent transcription of the block algorithm used as the oracle.
std::set<std::size_t> oracle_block_zeros(std::size_t len, double p, std::size_t b, const BlockDraw& d, bool full) {
    const std::size_t l = static_cast<std::size_t>(std::floor(p * static_cast<double>(len) + 1e-9));
    std::vector<std::size_t> ts;
    for (std::size_t i : d.block_order)
        for (std::size_t j = full ? 0 : 1; j < b; ++j)
            if (i * b + j + d.start < len) ts.push_back(i * b + j + d.start);
    std::set<std::size_t> zeros;
    if (ts.size() >= l) {
        zeros.insert(ts.end() - static_cast<std::ptrdiff_t>(l), ts.end());
    } else {
        zeros.insert(ts.begin(), ts.end());
        std::vector<std::size_t> rest;
        for (std::size_t t = 0; t < len; ++t)
            if (!zeros.count(t)) rest.push_back(t);
        zeros.insert(rest.end() - static_cast<std::ptrdiff_t>(l - ts.size()), rest.end());
    }
    return zeros;
}

std::set<std::size_t> zeros_of(const MaskMatrix& m) {
    const auto v = m.masked_indices();
    return {v.begin(), v.end()};
}

void block_fidelity(Outcome& out) {
    Rng pinned = make_rng(13);
    const MaskMatrix traced = block_mask(8, 0.5, 2, pinned);
    const std::set<std::size_t> hand{1, 3, 5, 7};
    out.require(zeros_of(traced) == hand, "pinned trace zeros != {1,3,5,7}");
    const MaskMatrix from_draw = block_mask_from_draw(8, 0.5, 2, BlockDraw{0, {2, 0, 1}});
    out.require(zeros_of(from_draw) == hand, "explicit draw zeros != {1,3,5,7}");

    Rng rng = make_rng(2024);
    std::size_t fills = 0;
    for (int c = 0; c < 10000; ++c) {
        const std::size_t len = 4 + uniform_index(rng, 253);
        const std::size_t b = 2 + uniform_index(rng, std::min<std::size_t>(19, len - 1));
        const double p = kRatios[uniform_index(rng, kRatios.size())];
        const bool full = uniform_index(rng, 2) == 1;
        BlockDraw d;
        d.start = uniform_index(rng, b);
        d.block_order.resize(block_count(len, b));
        std::iota(d.block_order.begin(), d.block_order.end(), std::size_t{0});
        for (std::size_t i = d.block_order.size(); i > 1; --i) std::swap(d.block_order[i - 1], d.block_order[uniform_index(rng, i)]);
        const MaskMatrix m = block_mask_from_draw(len, p, b, d, BlockMaskOptions{full});
        out.require(zeros_of(m) == oracle_block_zeros(len, p, b, d, full), "oracle mismatch");

        // Structure: without complement fill, masked tokens lie inside blocks, at most one block is
        // partially masked, and in the verbatim variant every block anchor stays visible.
        std::size_t block_tokens = 0;
        for (std::size_t i = 0; i < d.block_order.size(); ++i)
            for (std::size_t j = full ? 0 : 1; j < b; ++j) block_tokens += (i * b + j + d.start < len);
        if (block_tokens < m.masked_count()) {
            ++fills;
            continue;
        }
        std::vector<std::uint8_t> in_block(len, 0);
        std::size_t partial = 0;
        for (std::size_t i = 0; i < d.block_order.size(); ++i) {
            std::size_t size = 0, hit = 0;
            for (std::size_t j = full ? 0 : 1; j < b; ++j) {
                const std::size_t t = i * b + j + d.start;
                if (t >= len) continue;
                in_block[t] = 1;
                ++size;
                hit += m.masked(t);
            }
            if (hit > 0 && hit < size) ++partial;
            const std::size_t anchor = i * b + d.start;
            if (!full && anchor < len) out.require(m.visible(anchor), "anchor masked");
        }
        out.require(partial <= 1, "more than one partial block");
        for (std::size_t t = 0; t < len; ++t)
            if (!in_block[t]) out.require(m.visible(t), "token outside every block masked");
    }
    out.detail << "hand trace {1,3,5,7}; 10000 random draws (" << fills << " with complement fill)";
}

// ---------------------------------------------------------------------------------------------
// 3. EXP3 math

void exp3_math(Outcome& out) {
    auto close = [](double a, double b) { return std::abs(a - b) <= 1e-12; };
    {
        Exp3 e(2, 0.2, 0.1);
        const auto p = e.sampling_distribution();
        out.require(close(p[0], 0.5) && close(p[1], 0.5), "symmetric weights");
        e.update_weights(0, 1.0);
        const auto w = e.weights();
        out.require(close(w[0], std::exp(0.1)) && close(w[1], 1.0), "update example e^0.1");
    }
    {
        Exp3 e(2, 0.2, 0.1);
        e.set_log_weights({std::log(3.0), 0.0});
        const auto p = e.sampling_distribution();
        out.require(close(p[0], 0.7) && close(p[1], 0.3), "(3,1) -> (0.7, 0.3)");
        Exp3 u(5, 1.0, 0.1);
        u.set_log_weights({1, -2, 3, 0.5, 7});
        for (double v : u.sampling_distribution()) out.require(close(v, 0.2), "epsilon=1 uniform");
        const auto before = e.log_weights();
        e.update_weights(1, 0.0);
        out.require(e.log_weights() == before, "r=0 leaves state unchanged");
        e.update_weights(1, -1.0);
        out.require(e.weights()[1] < 1.0, "r=-1 shrinks");
    }

    Rng rng = make_rng(77);
    for (int c = 0; c < 10000; ++c) {
        const std::size_t k = 2 + uniform_index(rng, 99);
        const double eps = uniform01(rng);
        const double gamma = 0.01 + uniform01(rng);
        Exp3 e(k, eps, gamma);
        std::vector<double> lw(k);
        for (double& v : lw) v = 3.0 * standard_normal(rng);
        e.set_log_weights(lw);
        const auto p = e.sampling_distribution();
        const double total = std::accumulate(p.begin(), p.end(), 0.0);
        out.require(std::abs(total - 1.0) <= 1e-12, "distribution sums to 1");
        for (double v : p) out.require(v >= eps / static_cast<double>(k) - 1e-15, "floor eps/K");
        const std::size_t arm = uniform_index(rng, k);
        const double r = 2.0 * uniform01(rng) - 1.0;
        e.update_weights(arm, r);
        const auto& after = e.log_weights();
        for (std::size_t i = 0; i < k; ++i) {
            if (i == arm) {
                const double expect = gamma * r / (p[arm] * static_cast<double>(k));
                out.require(std::abs((after[i] - lw[i]) - expect) <= 1e-12, "log-weight step");
            } else {
                out.require(after[i] == lw[i], "only the pulled weight changes");
            }
        }
    }
    out.detail << "worked examples exact; 10000 fuzz cases";
}

// ---------------------------------------------------------------------------------------------
// 4. Reward rescaler

void rescaler(Outcome& out) {
    const RewardScaleOptions o;
    auto scale_with = [&](std::vector<double> hist, double raw) {
        hist.push_back(raw);
        return scale_reward(hist, raw, o);
    };
    // With the value appended, the 20th/80th nearest-rank percentiles are 0.2 and 0.8.
    // 0.8 - 0.2 rounds to 0.6000000000000001, so the midpoint is compared at 1e-12.
    const std::vector<double> base{0.2, 0.2, 0.2, 0.2, 0.8, 0.8, 0.8, 0.8, 0.5};
    out.require(std::abs(scale_with(base, 0.5)) <= 1e-12, "midpoint");
    out.require(scale_with(base, 0.8) == 1.0, "upper endpoint");
    out.require(scale_with(base, 0.2) == -1.0, "lower endpoint");
    out.require(scale_with(base, 8.0) == 1.0, "clip high");
    std::vector<double> ten(10);
    std::iota(ten.begin(), ten.end(), 1.0);
    out.require(nearest_rank_percentile(ten, 20) == 2.0 && nearest_rank_percentile(ten, 80) == 8.0,
                "nearest-rank percentiles of 1..10");
    out.require(scale_reward(ten, 5.0, o) == 0.0, "history 1..10, raw 5");
    out.require(scale_reward(std::vector<double>(6, 0.3), 0.3, o) == 0.0, "flat history");

    Rng rng = make_rng(99);
    for (int c = 0; c < 10000; ++c) {
        const std::size_t n = 5 + uniform_index(rng, 60);
        std::vector<double> hist(n);
        for (double& v : hist) v = standard_normal(rng) * 0.01;
        const double raw = hist.back();
        const double a = std::exp(4.0 * uniform01(rng) - 2.0);
        const double shift = standard_normal(rng);
        std::vector<double> moved(n);
        for (std::size_t i = 0; i < n; ++i) moved[i] = a * hist[i] + shift;
        const double s1 = scale_reward(hist, raw, o);
        const double s2 = scale_reward(moved, moved.back(), o);
        out.require(s1 >= -1.0 && s1 <= 1.0, "range");
        out.require(std::abs(s1 - s2) <= 1e-9, "affine invariance");
    }
    out.detail << "examples exact; 10000 affine cases within 1e-9";
}

// ---------------------------------------------------------------------------------------------
// 5. Scheduler efficacy on the synthetic learner

double synthetic_run(bool curriculum, std::uint64_t seed, std::size_t intervals) {
    const MaskingPool pool(kRatios, {1, 2});
    const std::size_t k = pool.size();
    Rng world = make_rng(derive_seed(seed, "world"));
    const std::size_t star = uniform_index(world, k);
    std::vector<double> base(k), floor(k, 0.0);
    std::vector<std::vector<double>> transfer(k, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < k; ++i) {
        base[i] = 0.5 + uniform01(world);
        transfer[i][i] = 1e-5 * (0.5 + uniform01(world));
        // Training on the dominant arm lowers every scheme's loss.
        transfer[i][star] = 1e-5 * (0.5 + uniform01(world));
    }
    SyntheticLearner learner(base, floor, transfer);
    const TargetLossProbe probe = TargetLossProbe::schemes_only(pool, 0, seed);
    const std::uint64_t interval = 100;
    const std::uint64_t total = interval * intervals;
    Rng rng = make_rng(derive_seed(seed, "scheduler"));
    SchedulerState sched(k, 0.2, 0.1);
    std::size_t arm = 0;
    double before = probe.evaluate(learner);
    if (curriculum) {
        scheduler_begin(sched, rng);
        arm = sched.current_arm;
    }
    for (std::uint64_t it = 0; it < intervals; ++it) {
        if (!curriculum) arm = *baseline_next_scheme(Method::mixed, it * interval, total, pool, rng).arm;
        MaskedBatch batch;
        batch.scheme = arm;
        for (std::uint64_t s = 0; s < interval; ++s) learner.train_step(batch);
        const double after = probe.evaluate(learner);
        if (curriculum) {
            curriculum_step(sched, ProgressSnapshot{before, after, (it + 1) * interval}, pool, rng);
            arm = sched.current_arm;
        }
        before = after;
    }
    return before;
}

void scheduler_efficacy(Outcome& out) {
    std::vector<double> curr, mixed;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        curr.push_back(synthetic_run(true, seed, 1000));
        mixed.push_back(synthetic_run(false, seed, 1000));
    }
    const double mc = test::mean_of(curr), mm = test::mean_of(mixed);
    const double pv = test::mann_whitney_less_p(curr, mixed);
    out.require(mc <= 0.9 * mm, "curriculum mean not 10% below mixed");
    out.require(pv < 0.05, "Mann-Whitney p >= 0.05");
    out.detail << "final L_target curriculum " << mc << " vs mixed " << mm << " (" << 100.0 * (1.0 - mc / mm)
               << "% lower), Mann-Whitney p " << pv;
}

// ---------------------------------------------------------------------------------------------
// 6. Bandit regret sanity

void bandit_regret(Outcome& out) {
    double pulls = 0.0, rounds = 0.0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Exp3 e(2, 0.2, 0.1);
        Rng rng = make_rng(derive_seed(seed, "bandit"));
        for (int t = 1; t <= 1000; ++t) {
            const std::size_t arm = sample_categorical(e.sampling_distribution(), rng);
            // +1/-1 rewards with means +0.5 (arm 0) and -0.5 (arm 1).
            const double win = arm == 0 ? 0.75 : 0.25;
            const double r = uniform01(rng) < win ? 1.0 : -1.0;
            e.update_weights(arm, r);
            if (t >= 500) {
                pulls += arm == 0;
                rounds += 1;
            }
        }
    }
    const double rate = pulls / rounds;
    out.require(rate >= 0.7, "best-arm rate below 0.7");
    out.detail << "best-arm pull rate over rounds 500-1000: " << rate;
}

// ---------------------------------------------------------------------------------------------
// 7. Learner numerics

Window random_window(std::size_t w, Rng& rng) {
    Window win;
    win.states.resize(static_cast<Eigen::Index>(w), 4);
    win.actions.resize(static_cast<Eigen::Index>(w), 2);
    for (Eigen::Index i = 0; i < win.states.size(); ++i) win.states.data()[i] = static_cast<float>(standard_normal(rng));
    for (Eigen::Index i = 0; i < win.actions.size(); ++i)
        win.actions.data()[i] = static_cast<float>(std::tanh(standard_normal(rng)));
    return win;
}

NetConfig tiny_net(std::size_t hidden, std::size_t context) {
    NetConfig c;
    c.hidden = hidden;
    c.heads = 2;
    c.encoder_layers = 1;
    c.decoder_layers = 1;
    c.ffn_multiplier = 2;
    c.context_tokens = context;
    return c;
}

void learner_numerics(Outcome& out) {
    // Finite differences in double precision.
    {
        MaskedPredictionNet<double> net(tiny_net(8, 8), 3);
        Rng rng = make_rng(5);
        for (auto& p : net.parameters()) p += 0.05 * standard_normal(rng);
        const std::vector<Window> w{random_window(4, rng), random_window(4, rng)};
        const std::vector<MaskMatrix> m{random_mask(8, 0.5, rng), block_mask(8, 0.55, 2, rng)};
        net.loss_and_gradient(w, m);
        const std::vector<double> g(net.gradients().begin(), net.gradients().end());
        double worst = 0.0;
        for (int i = 0; i < 20; ++i) {
            const std::size_t idx = uniform_index(rng, net.parameter_count());
            const double saved = net.parameters()[idx];
            net.parameters()[idx] = saved + 1e-4;
            const double up = net.loss(w, m);
            net.parameters()[idx] = saved - 1e-4;
            const double down = net.loss(w, m);
            net.parameters()[idx] = saved;
            const double fd = (up - down) / 2e-4;
            worst = std::max(worst, std::abs(fd - g[idx]) / std::max({std::abs(fd), std::abs(g[idx]), 1e-6}));
        }
        out.require(worst <= 1e-3, "finite-difference mismatch " + std::to_string(worst));
        out.detail << "worst FD relative error " << worst << "; ";
    }
    // Overfit one batch.
    {
        Rng rng = make_rng(7);
        MaskedBatch batch;
        for (int i = 0; i < 4; ++i) {
            batch.windows.push_back(random_window(8, rng));
            batch.masks.push_back(block_mask(16, 0.35, 2, rng));
        }
        NetLearner learner(tiny_net(32, 16), AdamConfig{1e-3}, 8);
        const double first = learner.eval_loss(batch);
        for (int s = 0; s < 500; ++s) learner.train_step(batch);
        const double last = learner.eval_loss(batch);
        out.require(last < 0.1 * first, "overfit ratio " + std::to_string(last / first));
        out.detail << "overfit loss ratio " << last / first << "; ";
    }
    // Information flow: masked inputs never reach the outputs.
    {
        MaskedPredictionNet<float> net(tiny_net(16, 16), 9);
        Rng rng = make_rng(10);
        for (int c = 0; c < 50; ++c) {
            const Window w = random_window(8, rng);
            const MaskMatrix m = block_mask(16, kRatios[uniform_index(rng, 5)], 1 + uniform_index(rng, 6), rng);
            Window poked = w;
            for (std::size_t t = 0; t < 8; ++t) {
                const auto r = static_cast<Eigen::Index>(t);
                if (m.masked(2 * t)) poked.states.row(r).setConstant(static_cast<float>(standard_normal(rng) * 50));
                if (m.masked(2 * t + 1)) poked.actions.row(r).setConstant(static_cast<float>(standard_normal(rng) * 50));
            }
            const Window a = net.reconstruct(w, m), b = net.reconstruct(poked, m);
            out.require(a.states == b.states && a.actions == b.actions, "masked input changed an output");
        }
    }
    // Snapshot/restore.
    {
        Rng rng = make_rng(11);
        MaskedBatch batch;
        batch.windows = {random_window(8, rng), random_window(8, rng)};
        batch.masks = {random_mask(16, 0.55, rng), random_mask(16, 0.15, rng)};
        NetLearner learner(tiny_net(16, 16), AdamConfig{1e-3}, 12);
        for (int s = 0; s < 3; ++s) learner.train_step(batch);
        const LearnerSnapshot snap = learner.snapshot();
        std::vector<double> a, b;
        for (int s = 0; s < 5; ++s) a.push_back(learner.train_step(batch));
        const LearnerSnapshot end_a = learner.snapshot();
        learner.restore(snap);
        for (int s = 0; s < 5; ++s) b.push_back(learner.train_step(batch));
        const LearnerSnapshot end_b = learner.snapshot();
        out.require(a == b && end_a.parameters == end_b.parameters && end_a.adam_m == end_b.adam_m &&
                        end_a.adam_v == end_b.adam_v,
                    "restore not bit-exact");
    }
    out.detail << "information flow and snapshot/restore exact";
}

// ---------------------------------------------------------------------------------------------
// 8. Harness fidelity

void harness_fidelity(Outcome& out) {
    const Dataset ds = generate_dataset(EnvModel::point_mass_2d(), PolicyMixture{}, 10, 1000, 31);
    ReplayOracle oracle;
    SkillPromptingOptions po;
    po.episodes = 20;
    const auto pr = skill_prompting_eval(oracle, ds.env, ds.episodes, po);
    double worst_gap = 0.0;
    for (const auto& ep : pr.episodes) {
        const double expect =
            prompt_segment_reward(ds.env, ds.episodes[ep.source_episode], ep.start_offset, po.prompt_len, po.rollout);
        worst_gap = std::max(worst_gap, std::abs(ep.cumulative_reward - expect));
    }
    out.require(pr.episodes.size() == 20 && worst_gap == 0.0, "prompting reward differs from the source");
    GoalPlanningOptions go;
    go.episodes = 20;
    const auto gr = goal_planning_eval(oracle, ds.env, ds.episodes, go);
    double worst = 0.0;
    for (const auto& ep : gr.episodes)
        for (double d : ep.distances) worst = std::max(worst, d);
    out.require(gr.episodes.size() == 20 && worst == 0.0, "oracle goal distance nonzero");
    out.detail << "20 prompting episodes, max |reward gap| " << worst_gap << "; 20 planning episodes, max distance "
               << worst;
}

// ---------------------------------------------------------------------------------------------
// 9. Directional end-to-end

struct E2EResult {
    std::vector<double> prompting;  // 5 seeds x 20 episodes
    std::vector<double> planning;   // per-episode mean distance over the four goals
};

RunConfig e2e_config(const fs::path& work, Method method, std::uint64_t seed) {
    RunConfig c;
    c.method = method;
    c.seed = seed;
    c.run_id = method_name(method) + "_s" + std::to_string(seed);
    c.output_dir = (work / "e2e" / c.run_id).string();
    // 500 episodes x 200 steps x 2 tokens = 200k tokens.
    c.train = SplitConfig{(work / "e2e_data/train").string(), 500, 200, 0};
    c.validation = SplitConfig{(work / "e2e_data/validation").string(), 100, 200, 1000000};
    c.steps = 20000;
    c.batch_size = 16;
    c.learning_rate = 3e-4;
    c.checkpoint_every = 20000;
    c.record_wallclock = true;
    c.validate();
    return c;
}

void e2e_eval(const RunConfig& c, const Dataset& validation, E2EResult& res) {
    const Checkpoint ckpt = read_checkpoint(fs::path(c.output_dir) / "checkpoint");
    MaskedPredictionNet<float> net(ckpt.net, 0);
    std::copy(ckpt.learner.parameters.begin(), ckpt.learner.parameters.end(), net.parameters().begin());
    NetActionModel model(net, ckpt.norm);
    SkillPromptingOptions po = c.prompting;
    po.episodes = 20;
    po.seed = 4242;
    for (const auto& ep : skill_prompting_eval(model, validation.env, validation.episodes, po).episodes)
        res.prompting.push_back(ep.cumulative_reward);
    GoalPlanningOptions go = c.planning;
    go.episodes = 20;
    go.seed = 4242;
    for (const auto& ep : goal_planning_eval(model, validation.env, validation.episodes, go).episodes)
        res.planning.push_back(test::mean_of(ep.distances));
}

void end_to_end(Outcome& out, const fs::path& work) {
    gen_data(e2e_config(work, Method::currmask, 0), true);
    const Dataset validation = read_dataset(work / "e2e_data/validation");
    std::map<Method, E2EResult> results;
    for (Method m : {Method::currmask, Method::maskdp}) {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const RunConfig c = e2e_config(work, m, seed);
            const auto t0 = std::chrono::steady_clock::now();
            run_pretraining(c, PretrainOptions{.force = true, .threads = threads_from_env()});
            e2e_eval(c, validation, results[m]);
            std::cerr << "  e2e " << c.run_id << " done in "
                      << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s\n";
        }
    }
    const auto cp = summarize(results[Method::currmask].prompting);
    const auto bp = summarize(results[Method::maskdp].prompting);
    const auto cg = summarize(results[Method::currmask].planning);
    const auto bg = summarize(results[Method::maskdp].planning);
    const double tol_p = std::hypot(cp.std_error, bp.std_error);
    const double tol_g = std::hypot(cg.std_error, bg.std_error);
    const bool prompting_ok = cp.mean >= bp.mean - tol_p;
    const bool planning_ok = cg.mean <= bg.mean + tol_g;
    out.require(prompting_ok, "skill-prompting reward below the baseline by more than 1 stderr");
    out.require(planning_ok, "goal-planning distance above the baseline by more than 1 stderr");
    out.detail << "prompting reward currmask " << cp.mean << " +- " << cp.std_error << " vs maskdp " << bp.mean
               << " +- " << bp.std_error << "; planning distance currmask " << cg.mean << " +- " << cg.std_error
               << " vs maskdp " << bg.mean << " +- " << bg.std_error << " (n=" << cg.n << ")";
}

// ---------------------------------------------------------------------------------------------
// 10. Determinism and resume equivalence

void determinism(Outcome& out, const fs::path& work) {
    RunConfig c;
    c.run_id = "det";
    c.output_dir = (work / "det/run").string();
    c.train = SplitConfig{(work / "det_data/train").string(), 50, 200, 0};
    c.validation = SplitConfig{(work / "det_data/validation").string(), 10, 200, 1000000};
    c.steps = 500;
    c.checkpoint_every = 100;
    c.eval_scheme_subsample = 20;
    c.record_wallclock = false;
    c.validate();
    gen_data(c, true);
    const fs::path dir = c.output_dir;
    auto capture = [&] {
        return std::vector<std::string>{read_file(dir / "metrics.csv"), read_file(dir / "metrics.jsonl"),
                                        read_file(dir / "checkpoint/params.bin"),
                                        read_file(dir / "checkpoint/optim.bin")};
    };
    run_pretraining(c, {.force = true});
    const auto first = capture();
    run_pretraining(c, {.force = true});
    out.require(capture() == first, "rerun differs");
    run_pretraining(c, {.force = true, .stop_after = 250});
    run_pretraining(c, {.resume = true});
    out.require(capture() == first, "resumed run differs");
    out.require(std::count(first[0].begin(), first[0].end(), '\n') == 7, "expected 5 metric rows");
    out.detail << "two full runs and a 250+250 resumed run byte-identical";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::string criteria = "1,2,3,4,5,6,7,8,9,10";
    std::string workdir = "acceptance_work";
    app.add_option("--criteria", criteria, "Comma-separated criterion numbers");
    app.add_option("--workdir", workdir, "Scratch directory for datasets and runs");
    CLI11_PARSE(app, argc, argv);

    std::set<int> wanted;
    {
        std::stringstream ss(criteria);
        for (std::string tok; std::getline(ss, tok, ',');) wanted.insert(std::stoi(tok));
    }
    const fs::path work = fs::absolute(workdir);
    fs::create_directories(work);

    struct Criterion {
        int id;
        const char* name;
        double budget_s;
        std::function<void(Outcome&)> run;
    };
    const std::vector<Criterion> all{
        {1, "masking exactness", 60, masking_exactness},
        {2, "block-mask fidelity", 10, block_fidelity},
        {3, "EXP3 math", 10, exp3_math},
        {4, "reward rescaler", 10, rescaler},
        {5, "scheduler efficacy (synthetic)", 60, scheduler_efficacy},
        {6, "bandit regret sanity", 10, bandit_regret},
        {7, "learner numerics", 300, learner_numerics},
        {8, "harness fidelity", 60, harness_fidelity},
        {9, "directional end-to-end", 3600, [&](Outcome& o) { end_to_end(o, work); }},
        {10, "determinism and resume", 120, [&](Outcome& o) { determinism(o, work); }},
    };

    bool all_pass = true;
    for (const auto& c : all) {
        if (!wanted.count(c.id)) continue;
        Outcome out;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            c.run(out);
        } catch (const std::exception& e) {
            out.require(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out.require(secs <= c.budget_s, "runtime over budget");
        all_pass = all_pass && out.pass;
        std::printf("criterion %d (%s): %s [%.1f s] %s\n", c.id, c.name, out.pass ? "PASS" : "FAIL", secs,
                    out.detail.str().c_str());
        std::fflush(stdout);
    }
    return all_pass ? 0 : 1;
}
