#include "currmask/config.hpp"

#include <cstdio>
#include <fstream>

#include "currmask/errors.hpp"
#include "currmask/rng.hpp"

namespace currmask {

namespace {

using nlohmann::json;

json split_to_json(const SplitConfig& s) {
    return {{"path", s.path}, {"episodes", s.episodes}, {"episode_len", s.episode_len}, {"seed", s.seed}};
}

SplitConfig split_from_json(const json& j) {
    return SplitConfig{j.at("path").get<std::string>(), j.at("episodes").get<std::size_t>(),
                       j.at("episode_len").get<std::size_t>(), j.at("seed").get<std::uint64_t>()};
}

// Every key of `given` must exist in `reference`; nested objects are checked recursively.
void check_keys(const json& given, const json& reference, const std::string& where) {
    if (!given.is_object()) {
        return;
    }
    for (auto it = given.begin(); it != given.end(); ++it) {
        const std::string path = where.empty() ? it.key() : where + "." + it.key();
        if (!reference.contains(it.key())) {
            throw ConfigError("unknown config key '" + path + "'");
        }
        const json& ref = reference.at(it.key());
        if (ref.is_object() && path != "data.env") {
            if (!it.value().is_object()) {
                throw ConfigError("config key '" + path + "' must be an object");
            }
            check_keys(it.value(), ref, path);
        }
    }
}

}  // namespace

json config_to_json(const RunConfig& c) {
    json env;
    to_json(env, c.env);
    return {
        {"run",
         {{"run_id", c.run_id},
          {"output_dir", c.output_dir},
          {"seed", c.seed},
          {"method", method_name(c.method)},
          {"fixed_block", c.fixed_block}}},
        {"data",
         {{"env", env},
          {"mixture",
           {{"random", c.mixture.random},
            {"noisy_pd", c.mixture.noisy_pd},
            {"pd", c.mixture.pd},
            {"noise_std", c.mixture.noise_std}}},
          {"train", split_to_json(c.train)},
          {"validation", split_to_json(c.validation)}}},
        {"pool", {{"ratios", c.ratios}, {"blocks", c.blocks}, {"full_blocks", c.full_blocks}}},
        {"net",
         {{"hidden", c.net.hidden},
          {"heads", c.net.heads},
          {"encoder_layers", c.net.encoder_layers},
          {"decoder_layers", c.net.decoder_layers},
          {"ffn_multiplier", c.net.ffn_multiplier},
          {"context_tokens", c.net.context_tokens},
          {"masked_only_loss", c.net.masked_only_loss}}},
        {"train",
         {{"steps", c.steps},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"checkpoint_every", c.checkpoint_every}}},
        {"scheduler",
         {{"epsilon", c.epsilon},
          {"gamma", c.gamma},
          {"interval", c.interval},
          {"eval_samples", c.eval_samples},
          {"eval_scheme_subsample", c.eval_scheme_subsample},
          {"reward_cold_start", c.scaling.cold_start},
          {"reward_window", c.scaling.window},
          {"log_baseline_target_loss", c.log_baseline_target_loss}}},
        {"metrics", {{"record_wallclock", c.record_wallclock}}},
        {"eval",
         {{"seed", c.eval_seed},
          {"prompting",
           {{"seeds", c.prompting_seeds},
            {"episodes", c.prompting.episodes},
            {"prompt_len", c.prompting.prompt_len},
            {"rollout", c.prompting.rollout},
            {"start_lo", c.prompting.start_lo},
            {"start_hi", c.prompting.start_hi}}},
          {"planning",
           {{"seeds", c.planning_seeds},
            {"episodes", c.planning.episodes},
            {"goal_steps", c.planning.goal_steps},
            {"horizon", c.planning.horizon}}}}},
    };
}

RunConfig config_from_json(const json& given) {
    if (!given.is_object()) {
        throw ConfigError("config root must be an object");
    }
    const RunConfig defaults;
    json j = config_to_json(defaults);
    check_keys(given, j, "");
    if (given.contains("data") && given.at("data").contains("env")) {
        // The env section is replaced wholesale so that env_id picks its own defaults.
        j["data"]["env"] = given.at("data").at("env");
        json rest = given;
        rest["data"].erase("env");
        j.merge_patch(rest);
    } else {
        j.merge_patch(given);
    }

    RunConfig c;
    try {
        const auto& run = j.at("run");
        c.run_id = run.at("run_id").get<std::string>();
        c.output_dir = run.at("output_dir").get<std::string>();
        c.seed = run.at("seed").get<std::uint64_t>();
        c.method = parse_method(run.at("method").get<std::string>());
        c.fixed_block = run.at("fixed_block").get<std::size_t>();

        const auto& data = j.at("data");
        c.env = data.at("env").get<EnvModel>();
        const auto& mix = data.at("mixture");
        c.mixture.random = mix.at("random").get<double>();
        c.mixture.noisy_pd = mix.at("noisy_pd").get<double>();
        c.mixture.pd = mix.at("pd").get<double>();
        c.mixture.noise_std = mix.at("noise_std").get<float>();
        c.train = split_from_json(data.at("train"));
        c.validation = split_from_json(data.at("validation"));

        const auto& pool = j.at("pool");
        c.ratios = pool.at("ratios").get<std::vector<double>>();
        c.blocks = pool.at("blocks").get<std::vector<std::size_t>>();
        c.full_blocks = pool.at("full_blocks").get<bool>();

        const auto& net = j.at("net");
        c.net.hidden = net.at("hidden").get<std::size_t>();
        c.net.heads = net.at("heads").get<std::size_t>();
        c.net.encoder_layers = net.at("encoder_layers").get<std::size_t>();
        c.net.decoder_layers = net.at("decoder_layers").get<std::size_t>();
        c.net.ffn_multiplier = net.at("ffn_multiplier").get<std::size_t>();
        c.net.context_tokens = net.at("context_tokens").get<std::size_t>();
        c.net.masked_only_loss = net.at("masked_only_loss").get<bool>();
        c.net.state_dim = c.env.state_dim();
        c.net.action_dim = c.env.action_dim();

        const auto& train = j.at("train");
        c.steps = train.at("steps").get<std::uint64_t>();
        c.batch_size = train.at("batch_size").get<std::size_t>();
        c.learning_rate = train.at("learning_rate").get<double>();
        c.checkpoint_every = train.at("checkpoint_every").get<std::uint64_t>();

        const auto& sched = j.at("scheduler");
        c.epsilon = sched.at("epsilon").get<double>();
        c.gamma = sched.at("gamma").get<double>();
        c.interval = sched.at("interval").get<std::uint64_t>();
        c.eval_samples = sched.at("eval_samples").get<std::size_t>();
        c.eval_scheme_subsample = sched.at("eval_scheme_subsample").get<std::size_t>();
        c.scaling.cold_start = sched.at("reward_cold_start").get<std::size_t>();
        c.scaling.window = sched.at("reward_window").get<std::size_t>();
        c.log_baseline_target_loss = sched.at("log_baseline_target_loss").get<bool>();

        c.record_wallclock = j.at("metrics").at("record_wallclock").get<bool>();

        const auto& ev = j.at("eval");
        c.eval_seed = ev.at("seed").get<std::uint64_t>();
        const auto& pr = ev.at("prompting");
        c.prompting_seeds = pr.at("seeds").get<std::size_t>();
        c.prompting.episodes = pr.at("episodes").get<std::size_t>();
        c.prompting.prompt_len = pr.at("prompt_len").get<std::size_t>();
        c.prompting.rollout = pr.at("rollout").get<std::size_t>();
        c.prompting.start_lo = pr.at("start_lo").get<double>();
        c.prompting.start_hi = pr.at("start_hi").get<double>();
        const auto& pl = ev.at("planning");
        c.planning_seeds = pl.at("seeds").get<std::size_t>();
        c.planning.episodes = pl.at("episodes").get<std::size_t>();
        c.planning.goal_steps = pl.at("goal_steps").get<std::vector<std::size_t>>();
        c.planning.horizon = pl.at("horizon").get<std::size_t>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const ParameterError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.prompting.context_tokens = c.net.context_tokens;
    c.planning.context_tokens = c.net.context_tokens;
    c.validate();
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config file '" + path.string() + "'");
    }
    json j;
    try {
        j = json::parse(in, nullptr, true, true);
    } catch (const json::exception& e) {
        throw ConfigError("config '" + path.string() + "': " + e.what());
    }
    return config_from_json(j);
}

void RunConfig::validate() const {
    try {
        env.validate();
        net.validate();
        (void)pool();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    if (net.state_dim != env.state_dim() || net.action_dim != env.action_dim()) {
        throw ConfigError("net dimensions do not match the environment");
    }
    if (steps < 1 || interval < 1 || batch_size < 1) {
        throw ConfigError("train.steps, scheduler.interval and train.batch_size must be >= 1");
    }
    if (checkpoint_every % interval != 0) {
        throw ConfigError("train.checkpoint_every must be a multiple of scheduler.interval");
    }
    if (!(learning_rate >= 0.0)) {
        throw ConfigError("train.learning_rate must be >= 0");
    }
    if (!(epsilon >= 0.0 && epsilon <= 1.0) || !(gamma > 0.0)) {
        throw ConfigError("scheduler: need 0 <= epsilon <= 1 and gamma > 0");
    }
    if (eval_samples < 1) {
        throw ConfigError("scheduler.eval_samples must be >= 1");
    }
    if (method == Method::fixed && fixed_block < 1) {
        throw ConfigError("run.fixed_block must be >= 1 for method 'fixed'");
    }
    for (std::size_t b : blocks) {
        if (b > net.context_tokens) {
            throw ConfigError("pool block size " + std::to_string(b) + " exceeds the context length");
        }
    }
    if (train.episode_len < window_timesteps() || validation.episode_len < window_timesteps()) {
        throw ConfigError("episodes are shorter than the training window");
    }
    if (prompting.prompt_len >= window_timesteps()) {
        throw ConfigError("eval.prompting.prompt_len must be shorter than the context window");
    }
}

std::string config_hash(const RunConfig& cfg) {
    const std::uint64_t h = fnv1a64(config_to_json(cfg).dump());
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace currmask
