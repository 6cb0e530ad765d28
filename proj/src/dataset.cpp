#include "currmask/dataset.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>

#include "currmask/errors.hpp"

namespace currmask {

static_assert(std::endian::native == std::endian::little, "episode files assume a little-endian host");

namespace fs = std::filesystem;

PolicyMixture PolicyMixture::only(PolicyKind kind) {
    PolicyMixture m;
    m.random = kind == PolicyKind::random ? 1.0 : 0.0;
    m.noisy_pd = kind == PolicyKind::noisy_pd ? 1.0 : 0.0;
    m.pd = kind == PolicyKind::pd ? 1.0 : 0.0;
    return m;
}

namespace {

std::vector<PolicyKind> assign_tiers(const PolicyMixture& mix, std::size_t n, std::uint64_t seed) {
    const std::array<double, 3> frac{mix.random, mix.noisy_pd, mix.pd};
    const double total = frac[0] + frac[1] + frac[2];
    if (!(total > 0.0) || *std::min_element(frac.begin(), frac.end()) < 0.0) {
        throw ParameterError("policy mixture must be non-negative with a positive sum");
    }
    std::array<std::size_t, 3> counts{};
    std::array<double, 3> remainder{};
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        const double exact = frac[i] / total * static_cast<double>(n);
        counts[i] = static_cast<std::size_t>(std::floor(exact));
        remainder[i] = exact - static_cast<double>(counts[i]);
        assigned += counts[i];
    }
    while (assigned < n) {
        const auto it = std::max_element(remainder.begin(), remainder.end());
        ++counts[static_cast<std::size_t>(it - remainder.begin())];
        *it = -1.0;
        ++assigned;
    }
    std::vector<PolicyKind> tiers;
    tiers.reserve(n);
    for (std::size_t i = 0; i < 3; ++i) {
        tiers.insert(tiers.end(), counts[i], static_cast<PolicyKind>(i));
    }
    Rng rng = make_rng(derive_seed(seed, "tiers"));
    for (std::size_t i = tiers.size(); i > 1; --i) {
        std::swap(tiers[i - 1], tiers[uniform_index(rng, i)]);
    }
    return tiers;
}

}  // namespace

Dataset generate_dataset(const EnvModel& env, const PolicyMixture& mixture, std::size_t n_episodes,
                         std::size_t episode_len, std::uint64_t seed) {
    env.validate();
    if (n_episodes < 1) {
        throw ParameterError("generate_dataset: n_episodes must be >= 1");
    }
    if (episode_len < 2) {
        throw ParameterError("generate_dataset: episode_len must be >= 2");
    }
    Dataset ds;
    ds.env = env;
    ds.mixture = mixture;
    ds.seed = seed;
    ds.tiers = assign_tiers(mixture, n_episodes, seed);
    ds.episodes.reserve(n_episodes);
    const auto rows = static_cast<Eigen::Index>(episode_len);
    for (std::size_t i = 0; i < n_episodes; ++i) {
        Rng rng = make_rng(seed + i);
        Trajectory traj;
        traj.env_id = env.env_id;
        traj.seed = seed + i;
        traj.states.resize(rows, static_cast<Eigen::Index>(env.state_dim()));
        traj.actions.resize(rows, static_cast<Eigen::Index>(env.action_dim()));
        VectorF s = initial_state(env, rng);
        for (Eigen::Index t = 0; t < rows; ++t) {
            const VectorF a = policy_action(env, ds.tiers[i], s, rng, mixture.noise_std);
            traj.states.row(t) = s.transpose();
            traj.actions.row(t) = a.transpose();
            s = env_step(env, s, a).next_state;
        }
        ds.episodes.push_back(std::move(traj));
    }
    ds.norm = compute_norm_stats(ds.episodes);
    return ds;
}

double trajectory_return(const EnvModel& env, const Trajectory& traj) {
    double total = 0.0;
    for (Eigen::Index t = 1; t < traj.states.rows(); ++t) {
        total += env_reward(env, traj.states.row(t).transpose());
    }
    return total;
}

namespace {

constexpr std::array<char, 16> kMagic{'C', 'M', 'T', 'R', 'A', 'J', '0', '1'};
constexpr std::size_t kHeaderBytes = 16 + 3 * sizeof(std::uint32_t);

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_floats(std::vector<std::uint8_t>& out, const RowMatrixF& m) {
    const std::size_t bytes = static_cast<std::size_t>(m.size()) * sizeof(float);
    const std::size_t offset = out.size();
    out.resize(offset + bytes);
    if (bytes > 0) {
        std::memcpy(out.data() + offset, m.data(), bytes);
    }
}

}  // namespace

nlohmann::json norm_stats_to_json(const NormStats& n) {
    auto vec = [](const VectorF& v) { return std::vector<float>(v.data(), v.data() + v.size()); };
    return {{"state_mean", vec(n.state_mean)},
            {"state_std", vec(n.state_std)},
            {"action_mean", vec(n.action_mean)},
            {"action_std", vec(n.action_std)}};
}

static VectorF vec_from_json(const nlohmann::json& j) {
    const auto v = j.get<std::vector<float>>();
    return Eigen::Map<const VectorF>(v.data(), static_cast<Eigen::Index>(v.size()));
}

NormStats norm_stats_from_json(const nlohmann::json& j) {
    return NormStats{vec_from_json(j.at("state_mean")), vec_from_json(j.at("state_std")),
                     vec_from_json(j.at("action_mean")), vec_from_json(j.at("action_std"))};
}

std::vector<std::uint8_t> encode_episode(const Trajectory& traj) {
    std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
    put_u32(out, static_cast<std::uint32_t>(traj.length()));
    put_u32(out, static_cast<std::uint32_t>(traj.state_dim()));
    put_u32(out, static_cast<std::uint32_t>(traj.action_dim()));
    put_floats(out, traj.states);
    put_floats(out, traj.actions);
    return out;
}

Trajectory decode_episode(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < kHeaderBytes) {
        throw CorruptHeaderError("episode: file shorter than the 28-byte header");
    }
    if (std::memcmp(bytes.data(), kMagic.data(), 6) != 0 ||
        !std::all_of(bytes.begin() + 8, bytes.begin() + 16, [](std::uint8_t b) { return b == 0; })) {
        throw CorruptHeaderError("episode: bad magic");
    }
    if (std::memcmp(bytes.data() + 6, kMagic.data() + 6, 2) != 0) {
        throw VersionError("episode: unsupported format version '" +
                           std::string(reinterpret_cast<const char*>(bytes.data()) + 6, 2) + "'");
    }
    const std::uint32_t t = get_u32(bytes.data() + 16);
    const std::uint32_t ds = get_u32(bytes.data() + 20);
    const std::uint32_t da = get_u32(bytes.data() + 24);
    if (t == 0) {
        throw CorruptHeaderError("episode: zero-length trajectory");
    }
    const std::uint64_t payload = (static_cast<std::uint64_t>(t) * ds + static_cast<std::uint64_t>(t) * da) *
                                  sizeof(float);
    if (bytes.size() - kHeaderBytes != payload) {
        throw PayloadLengthError("episode: payload has " + std::to_string(bytes.size() - kHeaderBytes) +
                                 " bytes, header implies " + std::to_string(payload));
    }
    Trajectory traj;
    traj.states.resize(t, ds);
    traj.actions.resize(t, da);
    const std::size_t state_bytes = static_cast<std::size_t>(t) * ds * sizeof(float);
    if (state_bytes > 0) {
        std::memcpy(traj.states.data(), bytes.data() + kHeaderBytes, state_bytes);
    }
    if (payload - state_bytes > 0) {
        std::memcpy(traj.actions.data(), bytes.data() + kHeaderBytes + state_bytes, payload - state_bytes);
    }
    return traj;
}

void write_dataset(const Dataset& ds, const fs::path& dir, bool force) {
    if (fs::exists(dir) && !fs::is_empty(dir)) {
        if (!force) {
            throw DataError("dataset directory '" + dir.string() + "' is not empty (use --force)");
        }
        for (const auto& entry : fs::directory_iterator(dir)) {
            const auto name = entry.path().filename().string();
            if (name == "manifest.json" || (name.starts_with("ep_") && name.ends_with(".traj"))) {
                fs::remove(entry.path());
            }
        }
    }
    fs::create_directories(dir);
    std::vector<std::string> tiers;
    for (auto k : ds.tiers) {
        tiers.emplace_back(policy_name(k));
    }
    nlohmann::json manifest{
        {"version", kDatasetVersion},
        {"env_id", ds.env.env_id},
        {"env", ds.env},
        {"Ds", ds.env.state_dim()},
        {"Da", ds.env.action_dim()},
        {"episodes", ds.episodes.size()},
        {"episode_len", ds.episodes.empty() ? 0 : ds.episodes.front().length()},
        {"seed", ds.seed},
        {"policy_mixture",
         {{"random", ds.mixture.random},
          {"noisy_pd", ds.mixture.noisy_pd},
          {"pd", ds.mixture.pd},
          {"noise_std", ds.mixture.noise_std}}},
        {"tiers", tiers},
        {"norm_stats", norm_stats_to_json(ds.norm)}};
    {
        std::ofstream out(dir / "manifest.json", std::ios::binary);
        out << manifest.dump(2) << '\n';
        if (!out) {
            throw DataError("failed to write manifest in " + dir.string());
        }
    }
    for (std::size_t i = 0; i < ds.episodes.size(); ++i) {
        const auto bytes = encode_episode(ds.episodes[i]);
        std::ofstream out(dir / ("ep_" + std::to_string(i) + ".traj"), std::ios::binary);
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            throw DataError("failed to write episode " + std::to_string(i));
        }
    }
}

Dataset read_dataset(const fs::path& dir) {
    const fs::path manifest_path = dir / "manifest.json";
    std::ifstream in(manifest_path, std::ios::binary);
    if (!in) {
        throw DataError("no manifest.json in '" + dir.string() + "'");
    }
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw CorruptHeaderError("manifest.json: " + std::string(e.what()));
    }
    if (manifest.value("version", -1) != kDatasetVersion) {
        throw VersionError("dataset version " + manifest.value("version", nlohmann::json(-1)).dump() +
                           " is not supported (expected 1)");
    }
    Dataset ds;
    try {
        ds.env = manifest.at("env").get<EnvModel>();
        ds.seed = manifest.at("seed").get<std::uint64_t>();
        const auto& mix = manifest.at("policy_mixture");
        ds.mixture.random = mix.at("random").get<double>();
        ds.mixture.noisy_pd = mix.at("noisy_pd").get<double>();
        ds.mixture.pd = mix.at("pd").get<double>();
        ds.mixture.noise_std = mix.at("noise_std").get<float>();
        for (const auto& name : manifest.at("tiers")) {
            const auto s = name.get<std::string>();
            ds.tiers.push_back(s == "random" ? PolicyKind::random
                                             : (s == "noisy_pd" ? PolicyKind::noisy_pd : PolicyKind::pd));
        }
        const auto& n = manifest.at("norm_stats");
        ds.norm = norm_stats_from_json(n);
    } catch (const nlohmann::json::exception& e) {
        throw CorruptHeaderError("manifest.json: " + std::string(e.what()));
    }
    const auto count = manifest.at("episodes").get<std::size_t>();
    ds.episodes.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const fs::path p = dir / ("ep_" + std::to_string(i) + ".traj");
        std::ifstream ep(p, std::ios::binary);
        if (!ep) {
            throw DataError("missing episode file " + p.string());
        }
        std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(ep)), std::istreambuf_iterator<char>());
        Trajectory traj = decode_episode(bytes);
        if (traj.state_dim() != ds.env.state_dim() || traj.action_dim() != ds.env.action_dim()) {
            throw CorruptHeaderError(p.string() + ": dimensions disagree with manifest");
        }
        traj.env_id = ds.env.env_id;
        traj.seed = ds.seed + i;
        ds.episodes.push_back(std::move(traj));
    }
    return ds;
}

}  // namespace currmask
