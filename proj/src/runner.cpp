#include "currmask/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "currmask/checkpoint.hpp"
#include "currmask/dataset.hpp"
#include "currmask/errors.hpp"
#include "currmask/eval_harness.hpp"
#include "currmask/learner.hpp"
#include "currmask/metrics.hpp"
#include "currmask/target_loss.hpp"

namespace currmask {

namespace fs = std::filesystem;
using nlohmann::json;

std::size_t threads_from_env() {
    const char* v = std::getenv("CURRMASK_THREADS");
    if (v == nullptr || *v == '\0') {
        return 1;
    }
    char* end = nullptr;
    const long n = std::strtol(v, &end, 10);
    if (end == v || *end != '\0' || n < 1) {
        throw ConfigError("CURRMASK_THREADS must be a positive integer");
    }
    return static_cast<std::size_t>(n);
}

namespace {

std::string rng_text(const Rng& rng) {
    std::ostringstream os;
    os << rng;
    return os.str();
}

void rng_from_text(Rng& rng, const std::string& text) {
    std::istringstream is(text);
    is >> rng;
    if (!is) {
        throw CorruptHeaderError("checkpoint: unreadable rng state");
    }
}

json choice_to_json(const SchemeChoice& c) {
    return {{"ratio", c.scheme.ratio},
            {"block", c.scheme.block},
            {"kind", c.kind == MaskKind::block ? "block" : "autoregressive"},
            {"arm", c.arm ? json(*c.arm) : json(nullptr)}};
}

SchemeChoice choice_from_json(const json& j) {
    SchemeChoice c;
    c.scheme.ratio = j.at("ratio").get<double>();
    c.scheme.block = j.at("block").get<std::size_t>();
    c.kind = j.at("kind").get<std::string>() == "block" ? MaskKind::block : MaskKind::autoregressive;
    if (!j.at("arm").is_null()) {
        c.arm = j.at("arm").get<std::size_t>();
    }
    return c;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double number_or_nan(const json& j) { return j.is_null() ? std::nan("") : j.get<double>(); }

Dataset load_split(const SplitConfig& split, const RunConfig& cfg, const char* name) {
    if (!fs::exists(split.path)) {
        throw DataError(std::string(name) + " dataset '" + split.path + "' does not exist (run gen-data first)");
    }
    Dataset ds = read_dataset(split.path);
    if (ds.env.env_id != cfg.env.env_id || ds.env.state_dim() != cfg.env.state_dim() ||
        ds.env.action_dim() != cfg.env.action_dim()) {
        throw DataError(std::string(name) + " dataset was generated for a different environment");
    }
    if (ds.episodes.empty()) {
        throw DataError(std::string(name) + " dataset is empty");
    }
    return ds;
}

bool interval_cadence(Method m) {
    return m == Method::mixed || m == Method::mixed_prog || m == Method::mixed_inv || m == Method::fixed;
}

void write_json_file(const fs::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << j.dump(2) << '\n';
    if (!out) {
        throw DataError("cannot write '" + path.string() + "'");
    }
}

}  // namespace

PretrainResult run_pretraining(const RunConfig& cfg, const PretrainOptions& options) {
    cfg.validate();
    const std::string hash = config_hash(cfg);
    const fs::path out_dir = cfg.output_dir;
    const fs::path ckpt_dir = out_dir / "checkpoint";

    if (!options.resume) {
        const bool occupied = fs::exists(out_dir / "metrics.csv") || fs::exists(ckpt_dir);
        if (occupied && !options.force) {
            throw ConfigError("output directory '" + out_dir.string() +
                              "' already holds a run (use --resume or --force)");
        }
        for (const char* f : {"metrics.csv", "metrics.jsonl", "run_manifest.json", "diagnostics.json"}) {
            fs::remove(out_dir / f);
        }
        fs::remove_all(ckpt_dir);
    }
    fs::create_directories(out_dir);

    const Dataset train = load_split(cfg.train, cfg, "train");
    const MaskingPool pool = cfg.pool();
    const std::size_t arms = pool.size();
    const std::size_t w = cfg.window_timesteps();
    const std::size_t tokens = 2 * w;
    BlockMaskOptions block_options;
    block_options.full_blocks = cfg.full_blocks;

    const bool currmask = cfg.method == Method::currmask;
    const bool track_target = currmask || cfg.log_baseline_target_loss;
    std::optional<TargetLossProbe> probe;
    if (track_target) {
        const Dataset validation = load_split(cfg.validation, cfg, "validation");
        TargetLossOptions t;
        t.samples = cfg.eval_samples;
        t.scheme_subsample = cfg.eval_scheme_subsample;
        t.window_timesteps = w;
        t.block_options = block_options;
        t.threads = options.threads;
        probe.emplace(validation.episodes, train.norm, pool, t, derive_seed(cfg.seed, "eval"));
    }

    NetConfig net_cfg = cfg.net;
    AdamConfig adam;
    adam.learning_rate = cfg.learning_rate;
    NetLearner learner(net_cfg, adam, derive_seed(cfg.seed, "init"));

    Rng data_rng = make_rng(derive_seed(cfg.seed, "data"));
    Rng mask_rng = make_rng(derive_seed(cfg.seed, "mask"));
    Rng sched_rng = make_rng(derive_seed(cfg.seed, "scheduler"));
    SchedulerState sched(arms, cfg.epsilon, cfg.gamma, cfg.scaling);
    SchemeChoice choice;
    double loss_before = std::nan("");
    std::uint64_t start_step = 0;
    double wallclock_offset = 0.0;

    if (options.resume) {
        const Checkpoint ckpt = read_checkpoint(ckpt_dir);
        if (ckpt.config_hash != hash) {
            throw ConfigError("checkpoint config hash " + ckpt.config_hash + " differs from this config (" + hash +
                              "); refusing to resume");
        }
        if (!(ckpt.net == net_cfg)) {
            throw ConfigError("checkpoint architecture differs from the config");
        }
        learner.restore(ckpt.learner);
        const json& st = ckpt.run_state;
        try {
            rng_from_text(data_rng, st.at("rng").at("data").get<std::string>());
            rng_from_text(mask_rng, st.at("rng").at("mask").get<std::string>());
            rng_from_text(sched_rng, st.at("rng").at("scheduler").get<std::string>());
            sched.bandit.set_log_weights(st.at("scheduler").at("log_weights").get<std::vector<double>>());
            sched.reward_history = st.at("scheduler").at("reward_history").get<std::vector<double>>();
            sched.history_steps = st.at("scheduler").at("history_steps").get<std::vector<std::uint64_t>>();
            sched.current_arm = st.at("scheduler").at("current_arm").get<std::size_t>();
            choice = choice_from_json(st.at("choice"));
            loss_before = number_or_nan(st.at("loss_before"));
            wallclock_offset = st.at("wallclock").get<double>();
            fs::resize_file(out_dir / "metrics.csv", st.at("metrics_bytes").at("csv").get<std::uintmax_t>());
            fs::resize_file(out_dir / "metrics.jsonl", st.at("metrics_bytes").at("jsonl").get<std::uintmax_t>());
        } catch (const json::exception& e) {
            throw CorruptHeaderError("checkpoint run state: " + std::string(e.what()));
        } catch (const fs::filesystem_error& e) {
            throw DataError(std::string("cannot truncate metrics files: ") + e.what());
        }
        start_step = ckpt.step;
    } else {
        write_json_file(out_dir / "config.json", config_to_json(cfg));
    }

    MetricsWriter metrics(out_dir, arms, hash, !options.resume);
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        return wallclock_offset + std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };

    auto save = [&](std::uint64_t step) {
        Checkpoint ckpt;
        ckpt.net = net_cfg;
        ckpt.step = step;
        ckpt.config_hash = hash;
        ckpt.norm = train.norm;
        ckpt.learner = learner.snapshot();
        ckpt.run_state = json{
            {"rng", {{"data", rng_text(data_rng)}, {"mask", rng_text(mask_rng)}, {"scheduler", rng_text(sched_rng)}}},
            {"scheduler",
             {{"log_weights", sched.bandit.log_weights()},
              {"reward_history", sched.reward_history},
              {"history_steps", sched.history_steps},
              {"current_arm", sched.current_arm}}},
            {"choice", choice_to_json(choice)},
            {"loss_before", number_or_null(loss_before)},
            {"wallclock", cfg.record_wallclock ? elapsed() : 0.0},
            {"metrics_bytes", {{"csv", metrics.csv_bytes()}, {"jsonl", metrics.jsonl_bytes()}}}};
        write_checkpoint(ckpt_dir, ckpt);
    };

    if (start_step == 0) {
        if (currmask) {
            loss_before = probe->evaluate(learner);
            scheduler_begin(sched, sched_rng);
            choice = SchemeChoice{pool.scheme(sched.current_arm), MaskKind::block, sched.current_arm};
        } else {
            choice = baseline_next_scheme(cfg.method, 0, cfg.steps, pool, sched_rng, cfg.fixed_block);
            if (track_target) {
                loss_before = probe->evaluate(learner);
            }
        }
    }

    PretrainResult result;
    result.config_hash = hash;
    result.checkpoint = ckpt_dir;
    MaskedBatch batch;
    batch.windows.resize(cfg.batch_size);
    batch.masks.resize(cfg.batch_size);

    for (std::uint64_t t = start_step + 1; t <= cfg.steps; ++t) {
        const std::uint64_t s = t - 1;
        if (!currmask && s > 0) {
            const bool redraw = interval_cadence(cfg.method) ? (s % cfg.interval == 0) : true;
            if (redraw) {
                choice = baseline_next_scheme(cfg.method, s, cfg.steps, pool, sched_rng, cfg.fixed_block);
            }
        }
        for (std::size_t i = 0; i < cfg.batch_size; ++i) {
            const Trajectory& traj = train.episodes[uniform_index(data_rng, train.episodes.size())];
            batch.windows[i] = normalize(sample_window(traj, w, data_rng), train.norm);
            batch.masks[i] = draw_mask(choice.scheme, choice.kind, tokens, mask_rng, block_options);
        }
        batch.scheme = choice.arm;
        try {
            (void)learner.train_step(batch);
        } catch (const NumericError& e) {
            write_json_file(out_dir / "diagnostics.json",
                            json{{"step", t},
                                 {"config_hash", hash},
                                 {"method", method_name(cfg.method)},
                                 {"ratio", choice.scheme.ratio},
                                 {"block", choice.scheme.block},
                                 {"error", e.what()}});
            metrics.flush();
            throw;
        }

        if (t % cfg.interval == 0) {
            MetricsRecord rec;
            if (currmask) {
                const double loss_after = probe->evaluate(learner);
                rec = curriculum_step(sched, ProgressSnapshot{loss_before, loss_after, t}, pool, sched_rng);
                loss_before = loss_after;
                choice = SchemeChoice{pool.scheme(sched.current_arm), MaskKind::block, sched.current_arm};
            } else {
                rec.step = t;
                rec.arm_index = choice.arm ? static_cast<std::int64_t>(*choice.arm) : -1;
                rec.ratio = choice.scheme.ratio;
                rec.block = choice.scheme.block;
                rec.raw_reward = std::nan("");
                rec.scaled_reward = std::nan("");
                rec.loss_before = loss_before;
                rec.loss_after = std::nan("");
                if (track_target) {
                    rec.loss_after = probe->evaluate(learner);
                    loss_before = rec.loss_after;
                }
                rec.probabilities = baseline_distribution(cfg.method, s, cfg.steps, pool, cfg.fixed_block);
            }
            rec.wallclock = cfg.record_wallclock ? elapsed() : 0.0;
            metrics.write(rec);
            metrics.flush();
            if (options.log != nullptr) {
                *options.log << "step " << t << " scheme (" << rec.ratio << ", " << rec.block << ") target "
                             << rec.loss_after << '\n';
            }
            result.records.push_back(std::move(rec));
            if (t % cfg.checkpoint_every == 0 && t != options.stop_after) {
                save(t);
            }
        }
        result.steps_done = t;
        if (options.stop_after != 0 && t == options.stop_after && t < cfg.steps) {
            save(t);
            return result;
        }
    }
    save(cfg.steps);
    metrics.flush();
    write_json_file(out_dir / "run_manifest.json",
                    json{{"config_hash", hash},
                         {"run_id", cfg.run_id},
                         {"method", method_name(cfg.method)},
                         {"steps", cfg.steps},
                         {"parameter_count", learner.net().parameter_count()},
                         {"checkpoint", "checkpoint"}});
    result.steps_done = cfg.steps;
    result.completed = true;
    return result;
}

namespace {

std::vector<EvalRow> eval_rows(const RunConfig& cfg, const std::string& method, ActionModel& model,
                               const EnvModel& env, const std::vector<Trajectory>& validation, bool clip_to_source) {
    std::vector<EvalRow> rows;
    auto row = [&](const std::string& task, const std::string& metric, const EvalSummary& s) {
        rows.push_back(EvalRow{cfg.run_id, method, task, metric, s.mean, s.std_error, s.n, cfg.eval_seed});
    };

    std::vector<double> rewards;
    for (std::size_t k = 0; k < cfg.prompting_seeds; ++k) {
        SkillPromptingOptions o = cfg.prompting;
        o.seed = cfg.eval_seed + k;
        o.context_tokens = cfg.net.context_tokens;
        o.clip_to_source = clip_to_source;
        const auto rep = skill_prompting_eval(model, env, validation, o);
        for (const auto& e : rep.episodes) {
            rewards.push_back(e.cumulative_reward);
        }
    }
    row("skill_prompting", "cumulative_reward", summarize(rewards));

    std::vector<std::vector<double>> per_goal(cfg.planning.goal_steps.size());
    std::vector<double> all;
    for (std::size_t k = 0; k < cfg.planning_seeds; ++k) {
        GoalPlanningOptions o = cfg.planning;
        o.seed = cfg.eval_seed + k;
        o.context_tokens = cfg.net.context_tokens;
        const auto rep = goal_planning_eval(model, env, validation, o);
        for (const auto& e : rep.episodes) {
            for (std::size_t g = 0; g < e.distances.size(); ++g) {
                per_goal[g].push_back(e.distances[g]);
            }
            double mean = 0.0;
            for (double d : e.distances) {
                mean += d;
            }
            all.push_back(mean / static_cast<double>(e.distances.size()));
        }
    }
    for (std::size_t g = 0; g < per_goal.size(); ++g) {
        row("goal_planning", "distance_t" + std::to_string(cfg.planning.goal_steps[g]), summarize(per_goal[g]));
    }
    row("goal_planning", "distance_mean", summarize(all));
    return rows;
}

}  // namespace

std::vector<EvalRow> run_eval(const RunConfig& cfg, const EvalOptions& options) {
    cfg.validate();
    const Dataset validation = load_split(cfg.validation, cfg, "validation");
    std::vector<EvalRow> rows;
    if (options.replay_oracle) {
        ReplayOracle oracle;
        rows = eval_rows(cfg, "replay_oracle", oracle, validation.env, validation.episodes, true);
    } else {
        const fs::path ckpt_dir = options.checkpoint.value_or(fs::path(cfg.output_dir) / "checkpoint");
        const Checkpoint ckpt = read_checkpoint(ckpt_dir);
        if (!(ckpt.net == cfg.net)) {
            throw ConfigError("checkpoint architecture does not match the config's net section");
        }
        NetLearner learner(ckpt.net, AdamConfig{}, 0);
        try {
            learner.restore(ckpt.learner);
        } catch (const ParameterError& e) {
            throw DataError(std::string("checkpoint: ") + e.what());
        }
        NetActionModel model(learner.net(), ckpt.norm);
        rows = eval_rows(cfg, method_name(cfg.method), model, validation.env, validation.episodes, false);
    }
    append_eval_csv(options.eval_csv.value_or(fs::path(cfg.output_dir) / "eval.csv"), rows);
    if (options.log != nullptr) {
        *options.log << format_report(rows);
    }
    return rows;
}

void append_eval_csv(const fs::path& path, const std::vector<EvalRow>& rows) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    const bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) {
        throw DataError("cannot write '" + path.string() + "'");
    }
    if (fresh) {
        out << kEvalCsvHeader << '\n';
    }
    for (const auto& r : rows) {
        for (const auto* field : {&r.run_id, &r.method, &r.task, &r.metric}) {
            if (field->find_first_of(",\n") != std::string::npos) {
                throw ConfigError("eval.csv fields may not contain commas or newlines: '" + *field + "'");
            }
        }
        out << r.run_id << ',' << r.method << ',' << r.task << ',' << r.metric << ',' << format_double(r.mean) << ','
            << format_double(r.std_error) << ',' << r.n << ',' << r.seed_base << '\n';
    }
}

std::vector<EvalRow> read_eval_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot read '" + path.string() + "'");
    }
    std::string line;
    if (!std::getline(in, line) || line != kEvalCsvHeader) {
        throw CorruptHeaderError("'" + path.string() + "' does not start with the eval.csv header");
    }
    std::vector<EvalRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            f.push_back(cell);
        }
        if (f.size() != 8) {
            throw DataError("malformed eval.csv row: " + line);
        }
        try {
            rows.push_back(EvalRow{f[0], f[1], f[2], f[3], std::stod(f[4]), std::stod(f[5]), std::stoul(f[6]),
                                   std::stoull(f[7])});
        } catch (const std::exception&) {
            throw DataError("malformed eval.csv row: " + line);
        }
    }
    return rows;
}

std::string format_report(const std::vector<EvalRow>& rows) {
    std::vector<std::string> methods;
    std::vector<std::pair<std::string, std::string>> keys;
    // (task, metric, method) -> pooled values
    std::map<std::tuple<std::string, std::string, std::string>, std::vector<const EvalRow*>> cells;
    for (const auto& r : rows) {
        if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) {
            methods.push_back(r.method);
        }
        const auto key = std::make_pair(r.task, r.metric);
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
            keys.push_back(key);
        }
        cells[{r.task, r.metric, r.method}].push_back(&r);
    }
    auto cell_text = [&](const std::vector<const EvalRow*>& rs) {
        // Several runs of one method are averaged; the spread reported is the stderr across runs
        // when there are several, otherwise the run's own stderr.
        std::vector<double> means;
        for (const auto* r : rs) {
            means.push_back(r->mean);
        }
        const EvalSummary s = summarize(means);
        const double err = rs.size() > 1 ? s.std_error : rs.front()->std_error;
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%.4g ± %.2g (%zu)", s.mean, err, rs.size());
        return std::string(buf);
    };

    std::vector<std::vector<std::string>> table;
    std::vector<std::string> header{"task", "metric"};
    header.insert(header.end(), methods.begin(), methods.end());
    table.push_back(header);
    for (const auto& [task, metric] : keys) {
        std::vector<std::string> line{task, metric};
        for (const auto& m : methods) {
            const auto it = cells.find({task, metric, m});
            line.push_back(it == cells.end() ? "-" : cell_text(it->second));
        }
        table.push_back(line);
    }
    std::vector<std::size_t> widths(header.size(), 0);
    for (const auto& line : table) {
        for (std::size_t c = 0; c < line.size(); ++c) {
            widths[c] = std::max(widths[c], line[c].size());
        }
    }
    std::ostringstream os;
    for (std::size_t r = 0; r < table.size(); ++r) {
        for (std::size_t c = 0; c < table[r].size(); ++c) {
            os << (c ? "  " : "") << table[r][c] << std::string(widths[c] - table[r][c].size(), ' ');
        }
        os << '\n';
        if (r == 0) {
            std::size_t total = 0;
            for (auto wdt : widths) {
                total += wdt + 2;
            }
            os << std::string(total - 2, '-') << '\n';
        }
    }
    return os.str();
}

void gen_data(const RunConfig& cfg, bool force) {
    cfg.validate();
    const Dataset train =
        generate_dataset(cfg.env, cfg.mixture, cfg.train.episodes, cfg.train.episode_len, cfg.train.seed);
    const Dataset validation = generate_dataset(cfg.env, cfg.mixture, cfg.validation.episodes,
                                                cfg.validation.episode_len, cfg.validation.seed);
    write_dataset(train, cfg.train.path, force);
    write_dataset(validation, cfg.validation.path, force);
}

}  // namespace currmask
