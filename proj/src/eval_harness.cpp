#include "currmask/eval_harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "currmask/errors.hpp"

namespace currmask {

VectorF NetActionModel::act(const RolloutQuery& query) {
    max_tokens_ = std::max(max_tokens_, query.window.token_count());
    if (query.window.token_count() > net_.config().context_tokens) {
        throw ShapeError("rollout query of " + std::to_string(query.window.token_count()) +
                         " tokens exceeds the net context");
    }
    const Window done = predict_tokens(net_, stats_, query.window, query.mask);
    return done.actions.row(static_cast<Eigen::Index>(query.action_timestep)).transpose();
}

VectorF ReplayOracle::act(const RolloutQuery& query) {
    if (source_ == nullptr) {
        throw ContractError("replay oracle used outside an episode");
    }
    const std::size_t t = offset_ + query.step;
    if (t >= source_->length()) {
        throw LengthError("replay oracle ran past the end of its source trajectory");
    }
    return source_->actions.row(static_cast<Eigen::Index>(t)).transpose();
}

RolloutResult rollout_closed_loop(ActionModel& model, const EnvModel& env, const VectorF& start_state,
                                  const QueryBuilder& builder, std::size_t horizon) {
    const auto ds = static_cast<Eigen::Index>(env.state_dim());
    const auto da = static_cast<Eigen::Index>(env.action_dim());
    if (start_state.size() != ds) {
        throw ShapeError("rollout: start state dimension mismatch");
    }
    RolloutResult out;
    out.states.resize(static_cast<Eigen::Index>(horizon) + 1, ds);
    out.actions.resize(static_cast<Eigen::Index>(horizon), da);
    out.rewards.reserve(horizon);
    out.states.row(0) = start_state.transpose();
    for (std::size_t k = 0; k < horizon; ++k) {
        const auto row = static_cast<Eigen::Index>(k);
        const RowMatrixF states_so_far = out.states.topRows(row + 1);
        const RowMatrixF actions_so_far = out.actions.topRows(row);
        const RolloutQuery query = builder(k, states_so_far, actions_so_far);
        const VectorF action = model.act(query);
        const VectorF state = out.states.row(row).transpose();
        const StepResult res = env_step(env, state, action);
        out.actions.row(row) = action.transpose();
        out.states.row(row + 1) = res.next_state.transpose();
        out.rewards.push_back(res.reward);
    }
    return out;
}

EvalSummary summarize(const std::vector<double>& values) {
    EvalSummary s;
    s.n = values.size();
    if (values.empty()) {
        s.mean = std::nan("");
        return s;
    }
    double total = 0.0;
    for (double v : values) {
        total += v;
    }
    s.mean = total / static_cast<double>(s.n);
    if (s.n > 1) {
        double ss = 0.0;
        for (double v : values) {
            ss += (v - s.mean) * (v - s.mean);
        }
        s.std_error = std::sqrt(ss / static_cast<double>(s.n - 1)) / std::sqrt(static_cast<double>(s.n));
    }
    return s;
}

namespace {

std::size_t window_timesteps(std::size_t context_tokens) {
    if (context_tokens < 4 || context_tokens % 2 != 0) {
        throw ParameterError("eval: context must be an even token count >= 4");
    }
    return context_tokens / 2;
}

Window blank_window(std::size_t timesteps, std::size_t ds, std::size_t da) {
    Window w;
    w.states = RowMatrixF::Zero(static_cast<Eigen::Index>(timesteps), static_cast<Eigen::Index>(ds));
    w.actions = RowMatrixF::Zero(static_cast<Eigen::Index>(timesteps), static_cast<Eigen::Index>(da));
    return w;
}

}  // namespace

double prompt_segment_reward(const EnvModel& env, const Trajectory& traj, std::size_t start_offset,
                             std::size_t prompt_len, std::size_t rollout) {
    if (rollout == 0) {
        return 0.0;
    }
    const std::size_t first = start_offset + prompt_len;  // arrival state of the first executed action
    if (first + rollout > traj.length()) {
        throw LengthError("prompt segment runs past the end of the trajectory");
    }
    double total = 0.0;
    for (std::size_t t = first; t < first + rollout; ++t) {
        total += env_reward(env, traj.states.row(static_cast<Eigen::Index>(t)).transpose());
    }
    return total;
}

SkillPromptingReport skill_prompting_eval(ActionModel& model, const EnvModel& env,
                                          const std::vector<Trajectory>& validation,
                                          const SkillPromptingOptions& options) {
    if (validation.empty()) {
        throw DataError("skill prompting: empty validation set");
    }
    if (options.prompt_len < 1) {
        throw ParameterError("skill prompting: prompt_len must be >= 1");
    }
    if (!(options.start_lo >= 0.0 && options.start_lo <= options.start_hi && options.start_hi <= 1.0)) {
        throw ParameterError("skill prompting: start range must satisfy 0 <= lo <= hi <= 1");
    }
    const std::size_t w = window_timesteps(options.context_tokens);
    if (options.prompt_len >= w) {
        throw ParameterError("skill prompting: prompt does not fit in the context window");
    }
    for (const auto& traj : validation) {
        if (traj.length() < options.prompt_len + 1) {
            throw LengthError("skill prompting: validation trajectory shorter than prompt + 1");
        }
    }
    const std::size_t ds = env.state_dim();
    const std::size_t da = env.action_dim();
    const std::size_t p = options.prompt_len;
    const std::size_t tokens = 2 * w;

    SkillPromptingReport report;
    std::vector<double> totals;
    for (std::size_t e = 0; e < options.episodes; ++e) {
        Rng rng = make_rng(derive_seed(options.seed, "skill_prompting") + e);
        const std::size_t idx = uniform_index(rng, validation.size());
        const Trajectory& traj = validation[idx];
        const std::size_t t_len = traj.length();
        const auto lo = static_cast<std::size_t>(std::floor(options.start_lo * static_cast<double>(t_len)));
        std::size_t hi = std::min(static_cast<std::size_t>(std::floor(options.start_hi * static_cast<double>(t_len))),
                                  t_len - p);
        if (options.clip_to_source) {
            if (t_len < p + options.rollout) {
                throw LengthError("skill prompting: source episode too short to replay the rollout");
            }
            hi = std::min(hi, t_len - p - options.rollout);
        }
        const std::size_t first = std::min(lo, hi);
        const std::size_t p0 = first + uniform_index(rng, hi - first + 1);

        // Prompt history in environment units; slot p - 1 holds the pinned final pair.
        const Window prompt = make_window(traj, p0, p);
        PromptEpisodeResult result;
        result.source_episode = idx;
        result.start_offset = p0;
        result.rollout_length = options.rollout;

        if (options.rollout > 0) {
            const VectorF s_last = prompt.states.row(static_cast<Eigen::Index>(p - 1)).transpose();
            const VectorF a_last = prompt.actions.row(static_cast<Eigen::Index>(p - 1)).transpose();
            const StepResult first_step = env_step(env, s_last, a_last);
            result.rewards.push_back(first_step.reward);
            model.begin_episode(traj, p0 + p);

            auto builder = [&](std::size_t k, const RowMatrixF& states, const RowMatrixF& actions) {
                // Full history: prompt (p pairs) followed by rollout states/actions.
                const std::size_t h = p + k + 1;  // timesteps with a known state
                RolloutQuery q;
                q.step = k;
                q.window = blank_window(w, ds, da);
                auto state_at = [&](std::size_t i) -> Eigen::Matrix<float, 1, Eigen::Dynamic> {
                    return i < p ? prompt.states.row(static_cast<Eigen::Index>(i))
                                 : states.row(static_cast<Eigen::Index>(i - p));
                };
                auto action_at = [&](std::size_t i) -> Eigen::Matrix<float, 1, Eigen::Dynamic> {
                    return i < p ? prompt.actions.row(static_cast<Eigen::Index>(i))
                                 : actions.row(static_cast<Eigen::Index>(i - p));
                };
                if (h <= w) {
                    for (std::size_t i = 0; i < h; ++i) {
                        q.window.states.row(static_cast<Eigen::Index>(i)) = state_at(i);
                        if (i + 1 < h) {
                            q.window.actions.row(static_cast<Eigen::Index>(i)) = action_at(i);
                        }
                    }
                    q.action_timestep = h - 1;
                    q.mask = prefix_mask(tokens, 2 * h - 1);
                } else {
                    q.window.states.row(0) = state_at(p - 1);
                    q.window.actions.row(0) = action_at(p - 1);
                    const std::size_t first_recent = h - (w - 1);
                    for (std::size_t slot = 1; slot < w; ++slot) {
                        const std::size_t i = first_recent + slot - 1;
                        q.window.states.row(static_cast<Eigen::Index>(slot)) = state_at(i);
                        if (i + 1 < h) {
                            q.window.actions.row(static_cast<Eigen::Index>(slot)) = action_at(i);
                        }
                    }
                    q.action_timestep = w - 1;
                    q.mask = prefix_mask(tokens, tokens - 1);
                }
                return q;
            };
            const RolloutResult roll =
                rollout_closed_loop(model, env, first_step.next_state, builder, options.rollout - 1);
            result.rewards.insert(result.rewards.end(), roll.rewards.begin(), roll.rewards.end());
        }
        for (double r : result.rewards) {
            result.cumulative_reward += r;
        }
        totals.push_back(result.cumulative_reward);
        report.episodes.push_back(std::move(result));
    }
    report.reward = summarize(totals);
    return report;
}

GoalPlanningReport goal_planning_eval(ActionModel& model, const EnvModel& env,
                                      const std::vector<Trajectory>& validation, const GoalPlanningOptions& options) {
    if (validation.empty()) {
        throw DataError("goal planning: empty validation set");
    }
    if (options.goal_steps.empty()) {
        throw ParameterError("goal planning: no goals");
    }
    for (std::size_t g : options.goal_steps) {
        if (g == 0 || g > options.horizon) {
            throw ParameterError("goal planning: goal steps must lie in [1, horizon]");
        }
    }
    for (const auto& traj : validation) {
        if (traj.length() < options.horizon + 1) {
            throw LengthError("goal planning: validation trajectory shorter than horizon + 1");
        }
    }
    const std::size_t w = window_timesteps(options.context_tokens);
    const std::size_t ds = env.state_dim();
    const std::size_t da = env.action_dim();
    std::vector<std::size_t> sorted_goals = options.goal_steps;
    std::sort(sorted_goals.begin(), sorted_goals.end());

    GoalPlanningReport report;
    std::vector<std::vector<double>> per_goal(options.goal_steps.size());
    std::vector<double> all;
    for (std::size_t e = 0; e < options.episodes; ++e) {
        Rng rng = make_rng(derive_seed(options.seed, "goal_planning") + e);
        const std::size_t idx = uniform_index(rng, validation.size());
        const Trajectory& traj = validation[idx];
        const std::size_t offset = uniform_index(rng, traj.length() - options.horizon);

        auto goal_state = [&](std::size_t g) -> Eigen::Matrix<float, 1, Eigen::Dynamic> {
            return traj.states.row(static_cast<Eigen::Index>(offset + g));
        };
        auto builder = [&](std::size_t k, const RowMatrixF& states, const RowMatrixF&) {
            RolloutQuery q;
            q.step = k;
            q.action_timestep = 0;
            q.window = blank_window(w, ds, da);
            q.window.states.row(0) = states.row(static_cast<Eigen::Index>(k));
            std::vector<std::size_t> goal_tokens;
            for (std::size_t g : sorted_goals) {
                if (g <= k) {
                    continue;
                }
                std::size_t slot = g - k;
                if (slot > w - 1) {
                    if (!goal_tokens.empty()) {
                        break;
                    }
                    slot = w - 1;
                }
                q.window.states.row(static_cast<Eigen::Index>(slot)) = goal_state(g);
                goal_tokens.push_back(2 * slot);
                if (slot == w - 1) {
                    break;
                }
            }
            q.mask = goal_mask(2 * w, goal_tokens);
            return q;
        };
        const VectorF start = traj.states.row(static_cast<Eigen::Index>(offset)).transpose();
        model.begin_episode(traj, offset);
        const RolloutResult roll = rollout_closed_loop(model, env, start, builder, options.horizon);

        GoalPlanResult result;
        result.goal_steps = options.goal_steps;
        result.source_episode = idx;
        result.start_offset = offset;
        for (std::size_t gi = 0; gi < options.goal_steps.size(); ++gi) {
            const auto target = goal_state(options.goal_steps[gi]);
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t i = 1; i <= options.horizon; ++i) {
                const auto diff = (roll.states.row(static_cast<Eigen::Index>(i)) - target).template cast<double>();
                best = std::min(best, diff.norm());
            }
            result.distances.push_back(best);
            per_goal[gi].push_back(best);
            all.push_back(best);
        }
        report.episodes.push_back(std::move(result));
    }
    for (const auto& d : per_goal) {
        report.per_goal.push_back(summarize(d));
    }
    report.overall = summarize(all);
    return report;
}

}  // namespace currmask
