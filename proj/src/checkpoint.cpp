#include "currmask/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "currmask/dataset.hpp"
#include "currmask/errors.hpp"

namespace currmask {

namespace fs = std::filesystem;

namespace {

static_assert(sizeof(float) == 4);

void write_floats(const fs::path& path, std::initializer_list<const std::vector<float>*> parts) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError("cannot write '" + path.string() + "'");
    }
    for (const auto* part : parts) {
        out.write(reinterpret_cast<const char*>(part->data()),
                  static_cast<std::streamsize>(part->size() * sizeof(float)));
    }
    if (!out) {
        throw DataError("short write to '" + path.string() + "'");
    }
}

std::vector<float> read_floats(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("missing checkpoint file '" + path.string() + "'");
    }
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() % sizeof(float) != 0) {
        throw PayloadLengthError("'" + path.string() + "' is not a whole number of f32 values");
    }
    std::vector<float> out(bytes.size() / sizeof(float));
    std::memcpy(out.data(), bytes.data(), bytes.size());
    return out;
}

}  // namespace

nlohmann::json net_config_to_json(const NetConfig& c) {
    return {{"state_dim", c.state_dim},
            {"action_dim", c.action_dim},
            {"hidden", c.hidden},
            {"heads", c.heads},
            {"encoder_layers", c.encoder_layers},
            {"decoder_layers", c.decoder_layers},
            {"ffn_multiplier", c.ffn_multiplier},
            {"context_tokens", c.context_tokens},
            {"masked_only_loss", c.masked_only_loss}};
}

NetConfig net_config_from_json(const nlohmann::json& j) {
    NetConfig c;
    c.state_dim = j.at("state_dim").get<std::size_t>();
    c.action_dim = j.at("action_dim").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::size_t>();
    c.heads = j.at("heads").get<std::size_t>();
    c.encoder_layers = j.at("encoder_layers").get<std::size_t>();
    c.decoder_layers = j.at("decoder_layers").get<std::size_t>();
    c.ffn_multiplier = j.at("ffn_multiplier").get<std::size_t>();
    c.context_tokens = j.at("context_tokens").get<std::size_t>();
    c.masked_only_loss = j.at("masked_only_loss").get<bool>();
    return c;
}

void write_checkpoint(const fs::path& dir, const Checkpoint& ckpt) {
    if (ckpt.learner.adam_m.size() != ckpt.learner.parameters.size() ||
        ckpt.learner.adam_v.size() != ckpt.learner.parameters.size()) {
        throw ShapeError("checkpoint: optimizer state does not match parameter count");
    }
    fs::path tmp = dir;
    tmp += ".tmp";
    fs::remove_all(tmp);
    fs::create_directories(tmp);
    const nlohmann::json manifest{{"version", kCheckpointVersion},
                                  {"architecture", net_config_to_json(ckpt.net)},
                                  {"parameter_count", ckpt.learner.parameters.size()},
                                  {"step", ckpt.step},
                                  {"adam_step", ckpt.learner.adam_step},
                                  {"config_hash", ckpt.config_hash},
                                  {"norm_stats", norm_stats_to_json(ckpt.norm)},
                                  {"run_state", ckpt.run_state}};
    {
        std::ofstream out(tmp / "manifest.json", std::ios::binary | std::ios::trunc);
        out << manifest.dump(2) << '\n';
        if (!out) {
            throw DataError("cannot write checkpoint manifest in '" + tmp.string() + "'");
        }
    }
    write_floats(tmp / "params.bin", {&ckpt.learner.parameters});
    write_floats(tmp / "optim.bin", {&ckpt.learner.adam_m, &ckpt.learner.adam_v});
    fs::remove_all(dir);
    fs::rename(tmp, dir);
}

Checkpoint read_checkpoint(const fs::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) {
        throw DataError("no checkpoint at '" + dir.string() + "'");
    }
    Checkpoint ckpt;
    std::size_t count = 0;
    try {
        const auto manifest = nlohmann::json::parse(in);
        if (manifest.value("version", -1) != kCheckpointVersion) {
            throw VersionError("unsupported checkpoint version in '" + dir.string() + "'");
        }
        ckpt.net = net_config_from_json(manifest.at("architecture"));
        count = manifest.at("parameter_count").get<std::size_t>();
        ckpt.step = manifest.at("step").get<std::uint64_t>();
        ckpt.learner.adam_step = manifest.at("adam_step").get<std::uint64_t>();
        ckpt.config_hash = manifest.at("config_hash").get<std::string>();
        ckpt.norm = norm_stats_from_json(manifest.at("norm_stats"));
        ckpt.run_state = manifest.at("run_state");
    } catch (const nlohmann::json::exception& e) {
        throw CorruptHeaderError("checkpoint manifest: " + std::string(e.what()));
    }
    ckpt.learner.parameters = read_floats(dir / "params.bin");
    if (ckpt.learner.parameters.size() != count) {
        throw PayloadLengthError("params.bin holds " + std::to_string(ckpt.learner.parameters.size()) +
                                 " values, manifest says " + std::to_string(count));
    }
    auto optim = read_floats(dir / "optim.bin");
    if (optim.size() != 2 * count) {
        throw PayloadLengthError("optim.bin has the wrong length");
    }
    ckpt.learner.adam_m.assign(optim.begin(), optim.begin() + static_cast<std::ptrdiff_t>(count));
    ckpt.learner.adam_v.assign(optim.begin() + static_cast<std::ptrdiff_t>(count), optim.end());
    return ckpt;
}

}  // namespace currmask
