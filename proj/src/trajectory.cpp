#include "currmask/trajectory.hpp"

#include <cmath>

#include "currmask/errors.hpp"

namespace currmask {

void Trajectory::validate() const {
    if (states.rows() < 1 || states.rows() != actions.rows()) {
        throw InputError("trajectory: states and actions must share a row count >= 1");
    }
    if (!states.allFinite() || !actions.allFinite()) {
        throw InputError("trajectory: non-finite entry");
    }
    if (actions.size() > 0 && (actions.maxCoeff() > 1.0f || actions.minCoeff() < -1.0f)) {
        throw InputError("trajectory: action outside [-1, 1]");
    }
}

Window make_window(const Trajectory& traj, std::size_t start, std::size_t timesteps) {
    if (timesteps == 0 || start + timesteps > traj.length()) {
        throw LengthError("window [" + std::to_string(start) + ", " +
                          std::to_string(start + timesteps) + ") exceeds trajectory of length " +
                          std::to_string(traj.length()));
    }
    const auto s = static_cast<Eigen::Index>(start);
    const auto n = static_cast<Eigen::Index>(timesteps);
    Window w;
    w.states = traj.states.middleRows(s, n);
    w.actions = traj.actions.middleRows(s, n);
    w.start_index = start;
    return w;
}

Window sample_window(const Trajectory& traj, std::size_t timesteps, Rng& rng) {
    if (timesteps == 0 || timesteps > traj.length()) {
        throw LengthError("sample_window: W=" + std::to_string(timesteps) +
                          " does not fit trajectory of length " + std::to_string(traj.length()));
    }
    const std::size_t start = uniform_index(rng, traj.length() - timesteps + 1);
    return make_window(traj, start, timesteps);
}

NormStats NormStats::identity(std::size_t state_dim, std::size_t action_dim) {
    const auto ds = static_cast<Eigen::Index>(state_dim);
    const auto da = static_cast<Eigen::Index>(action_dim);
    return NormStats{VectorF::Zero(ds), VectorF::Ones(ds), VectorF::Zero(da), VectorF::Ones(da)};
}

namespace {

void column_stats(const std::vector<Trajectory>& train, bool states, VectorF& mean, VectorF& stddev) {
    const Eigen::Index dim = states ? train.front().states.cols() : train.front().actions.cols();
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd sq = Eigen::VectorXd::Zero(dim);
    double count = 0.0;
    for (const auto& t : train) {
        const RowMatrixF& m = states ? t.states : t.actions;
        if (m.cols() != dim) {
            throw ShapeError("compute_norm_stats: inconsistent dimensions across trajectories");
        }
        const Eigen::MatrixXd md = m.cast<double>();
        sum += md.colwise().sum().transpose();
        count += static_cast<double>(m.rows());
    }
    const Eigen::VectorXd mu = sum / count;
    for (const auto& t : train) {
        const RowMatrixF& m = states ? t.states : t.actions;
        const Eigen::MatrixXd centered = m.cast<double>().rowwise() - mu.transpose();
        sq += centered.array().square().colwise().sum().matrix().transpose();
    }
    mean = mu.cast<float>();
    stddev = (sq / count).array().sqrt().cast<float>().max(kStdFloor).matrix();
}

}  // namespace

NormStats compute_norm_stats(const std::vector<Trajectory>& train) {
    if (train.empty()) {
        throw ParameterError("compute_norm_stats: empty training split");
    }
    NormStats s;
    column_stats(train, true, s.state_mean, s.state_std);
    column_stats(train, false, s.action_mean, s.action_std);
    return s;
}

namespace {

void check_dims(const Window& w, const NormStats& stats) {
    if (static_cast<std::size_t>(w.states.cols()) != stats.state_dim() ||
        static_cast<std::size_t>(w.actions.cols()) != stats.action_dim()) {
        throw ShapeError("normalize: window dimensions do not match statistics");
    }
}

}  // namespace

Window normalize(const Window& w, const NormStats& stats) {
    check_dims(w, stats);
    Window out;
    out.start_index = w.start_index;
    out.states = ((w.states.rowwise() - stats.state_mean.transpose()).array().rowwise() /
                  stats.state_std.transpose().array())
                     .matrix();
    out.actions = ((w.actions.rowwise() - stats.action_mean.transpose()).array().rowwise() /
                   stats.action_std.transpose().array())
                      .matrix();
    return out;
}

Window denormalize(const Window& w, const NormStats& stats) {
    check_dims(w, stats);
    Window out;
    out.start_index = w.start_index;
    out.states = (w.states.array().rowwise() * stats.state_std.transpose().array()).matrix().rowwise() +
                 stats.state_mean.transpose();
    out.actions =
        (w.actions.array().rowwise() * stats.action_std.transpose().array()).matrix().rowwise() +
        stats.action_mean.transpose();
    return out;
}

}  // namespace currmask
