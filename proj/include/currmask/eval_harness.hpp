#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "currmask/env.hpp"
#include "currmask/learner.hpp"
#include "currmask/masking.hpp"
#include "currmask/trajectory.hpp"

namespace currmask {

// What an action model is shown at one rollout step: a raw (environment-unit) window, the
// visibility mask over its 2W tokens, and the timestep whose action is requested.
struct RolloutQuery {
    Window window;
    MaskMatrix mask;
    std::size_t action_timestep = 0;
    std::size_t step = 0;  // rollout step index, 0-based
};

class ActionModel {
public:
    virtual ~ActionModel() = default;
    // Called before each evaluation episode with the source trajectory and the index of the
    // source action aligned with rollout step 0.
    virtual void begin_episode(const Trajectory& /*source*/, std::size_t /*first_action*/) {}
    virtual VectorF act(const RolloutQuery& query) = 0;
};

// Net-backed policy: the mean prediction of predict_tokens at the requested action slot.
class NetActionModel final : public ActionModel {
public:
    NetActionModel(const MaskedPredictionNet<float>& net, const NormStats& stats) : net_(net), stats_(stats) {}
    VectorF act(const RolloutQuery& query) override;
    // Largest token count any query has carried so far.
    std::size_t max_tokens_seen() const { return max_tokens_; }

private:
    const MaskedPredictionNet<float>& net_;
    const NormStats& stats_;
    std::size_t max_tokens_ = 0;
};

// Pseudo-learner replaying stored actions: step k returns source.actions[offset + k].
class ReplayOracle final : public ActionModel {
public:
    void begin_episode(const Trajectory& source, std::size_t first_action) override {
        source_ = &source;
        offset_ = first_action;
    }
    VectorF act(const RolloutQuery& query) override;

private:
    const Trajectory* source_ = nullptr;
    std::size_t offset_ = 0;
};

struct RolloutResult {
    RowMatrixF states;   // horizon + 1 rows: the start state, then each arrival state
    RowMatrixF actions;  // horizon rows
    std::vector<double> rewards;
};

// Builds the query for step k from the streams recorded so far (states has k + 1 rows,
// actions has k rows).
using QueryBuilder = std::function<RolloutQuery(std::size_t step, const RowMatrixF& states, const RowMatrixF& actions)>;

RolloutResult rollout_closed_loop(ActionModel& model, const EnvModel& env, const VectorF& start_state,
                                  const QueryBuilder& builder, std::size_t horizon);

struct EvalSummary {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n = 0;
};

// Mean and standard error of the mean (sample std / sqrt(n); 0 when n < 2).
EvalSummary summarize(const std::vector<double>& values);

struct PromptEpisodeResult {
    double cumulative_reward = 0.0;
    std::vector<double> rewards;
    std::size_t rollout_length = 0;
    std::size_t source_episode = 0;
    std::size_t start_offset = 0;
};

struct SkillPromptingOptions {
    std::size_t prompt_len = 8;
    std::size_t rollout = 120;
    std::size_t episodes = 100;
    std::size_t context_tokens = 32;
    double start_lo = 0.1;
    double start_hi = 0.85;
    std::uint64_t seed = 0;
    // Also keep start + prompt_len + rollout within the source episode (needed by the replay oracle).
    bool clip_to_source = false;
};

struct SkillPromptingReport {
    std::vector<PromptEpisodeResult> episodes;
    EvalSummary reward;
};

// Per episode: a prompt of prompt_len timesteps starting uniformly in [start_lo·T, start_hi·T];
// the env is placed at the prompt's final state and the prompt's own final action is executed
// first. Every later action is predicted from the prompt plus generated history under a
// prompt-style mask. Once the history outgrows the context, the window keeps the prompt's final
// state-action pair in slot 0 followed by the most recent W - 1 timesteps.
SkillPromptingReport skill_prompting_eval(ActionModel& model, const EnvModel& env,
                                          const std::vector<Trajectory>& validation,
                                          const SkillPromptingOptions& options);

// Sum of rewards the stored trajectory collects over the same steps a prompting episode with
// this prompt would execute.
double prompt_segment_reward(const EnvModel& env, const Trajectory& traj, std::size_t start_offset,
                             std::size_t prompt_len, std::size_t rollout);

struct GoalPlanResult {
    std::vector<double> distances;      // one per goal
    std::vector<std::size_t> goal_steps;
    std::size_t source_episode = 0;
    std::size_t start_offset = 0;
};

struct GoalPlanningOptions {
    std::vector<std::size_t> goal_steps{20, 40, 60, 80};
    std::size_t horizon = 100;
    std::size_t episodes = 100;
    std::size_t context_tokens = 32;
    std::uint64_t seed = 0;
};

struct GoalPlanningReport {
    std::vector<GoalPlanResult> episodes;
    std::vector<EvalSummary> per_goal;
    EvalSummary overall;  // over every (episode, goal) distance
};

// Per episode: a start offset o and goals s_{o+g}. At each step the window holds the current
// state in slot 0 and every remaining goal that falls inside it at its relative slot; when the
// next goal lies beyond the window it is placed in the last state slot. The metric per goal is
// the closest L2 approach over the visited states s_1..s_horizon.
GoalPlanningReport goal_planning_eval(ActionModel& model, const EnvModel& env,
                                      const std::vector<Trajectory>& validation, const GoalPlanningOptions& options);

}  // namespace currmask
