#include "currmask/metrics.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>

#include "currmask/errors.hpp"

namespace currmask {

std::string format_double(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string MetricsWriter::csv_header(std::size_t arms) {
    std::string h = "step,wallclock,arm_index,ratio,block,raw_reward,scaled_reward,loss_before,loss_after";
    for (std::size_t k = 0; k < arms; ++k) {
        h += ",p" + std::to_string(k);
    }
    return h;
}

MetricsWriter::MetricsWriter(const std::filesystem::path& dir, std::size_t arms, const std::string& config_hash,
                             bool fresh)
    : arms_(arms), config_hash_(config_hash) {
    const auto mode = std::ios::binary | (fresh ? std::ios::trunc : std::ios::app);
    csv_.open(dir / "metrics.csv", std::ios::out | mode);
    jsonl_.open(dir / "metrics.jsonl", std::ios::out | mode);
    if (!csv_ || !jsonl_) {
        throw DataError("cannot open metrics files in " + dir.string());
    }
    if (fresh) {
        csv_ << "# config_hash=" << config_hash_ << '\n' << csv_header(arms_) << '\n';
    }
}

namespace {

nlohmann::json json_number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

void MetricsWriter::write(const MetricsRecord& rec) {
    csv_ << rec.step << ',' << format_double(rec.wallclock) << ',' << rec.arm_index << ',' << format_double(rec.ratio)
         << ',' << rec.block << ',' << format_double(rec.raw_reward) << ',' << format_double(rec.scaled_reward) << ','
         << format_double(rec.loss_before) << ',' << format_double(rec.loss_after);
    for (std::size_t k = 0; k < arms_; ++k) {
        const double p = k < rec.probabilities.size() ? rec.probabilities[k] : std::nan("");
        csv_ << ',' << format_double(p);
    }
    csv_ << '\n';

    nlohmann::json probs = nlohmann::json::array();
    for (std::size_t k = 0; k < arms_; ++k) {
        probs.push_back(json_number(k < rec.probabilities.size() ? rec.probabilities[k] : std::nan("")));
    }
    const nlohmann::json j{{"config_hash", config_hash_},
                           {"step", rec.step},
                           {"wallclock", json_number(rec.wallclock)},
                           {"arm_index", rec.arm_index},
                           {"ratio", json_number(rec.ratio)},
                           {"block", rec.block},
                           {"raw_reward", json_number(rec.raw_reward)},
                           {"scaled_reward", json_number(rec.scaled_reward)},
                           {"loss_before", json_number(rec.loss_before)},
                           {"loss_after", json_number(rec.loss_after)},
                           {"probabilities", probs}};
    jsonl_ << j.dump() << '\n';
}

void MetricsWriter::flush() {
    csv_.flush();
    jsonl_.flush();
}

std::uintmax_t MetricsWriter::csv_bytes() {
    csv_.flush();
    return static_cast<std::uintmax_t>(csv_.tellp());
}

std::uintmax_t MetricsWriter::jsonl_bytes() {
    jsonl_.flush();
    return static_cast<std::uintmax_t>(jsonl_.tellp());
}

}  // namespace currmask
