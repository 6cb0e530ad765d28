#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "currmask/config.hpp"
#include "currmask/errors.hpp"
#include "currmask/learner.hpp"
#include "currmask/masking.hpp"
#include "currmask/rng.hpp"
#include "currmask/runner.hpp"
#include "currmask/scheduler.hpp"

namespace py = pybind11;
using namespace currmask;

namespace {

RunConfig parse_config(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return config_from_json(j);
}

std::vector<bool> to_bools(const MaskMatrix& m) {
    std::vector<bool> out(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) out[i] = m.visible(i);
    return out;
}

py::dict record_to_dict(const MetricsRecord& r) {
    py::dict d;
    d["step"] = r.step;
    d["wallclock"] = r.wallclock;
    d["arm_index"] = r.arm_index;
    d["ratio"] = r.ratio;
    d["block"] = r.block;
    d["raw_reward"] = r.raw_reward;
    d["scaled_reward"] = r.scaled_reward;
    d["loss_before"] = r.loss_before;
    d["loss_after"] = r.loss_after;
    d["probabilities"] = r.probabilities;
    return d;
}

py::dict row_to_dict(const EvalRow& r) {
    py::dict d;
    d["run_id"] = r.run_id;
    d["method"] = r.method;
    d["task"] = r.task;
    d["metric"] = r.metric;
    d["mean"] = r.mean;
    d["std_error"] = r.std_error;
    d["n"] = r.n;
    d["seed_base"] = r.seed_base;
    return d;
}

}  // namespace

PYBIND11_MODULE(_currmask, m) {
    m.doc() = "Curriculum masked-prediction pretraining for trajectory models";

    auto base = py::register_exception<Error>(m, "Error");
    auto param = py::register_exception<ParameterError>(m, "ParameterError", base.ptr());
    py::register_exception<LengthError>(m, "LengthError", param.ptr());
    py::register_exception<InputError>(m, "InputError", param.ptr());
    py::register_exception<ShapeError>(m, "ShapeError", param.ptr());
    py::register_exception<ContractError>(m, "ContractError", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    auto data = py::register_exception<DataError>(m, "DataError", base.ptr());
    py::register_exception<CorruptHeaderError>(m, "CorruptHeaderError", data.ptr());
    py::register_exception<PayloadLengthError>(m, "PayloadLengthError", data.ptr());
    py::register_exception<VersionError>(m, "VersionError", data.ptr());
    py::register_exception<NumericError>(m, "NumericError", base.ptr());

    py::class_<Rng>(m, "Rng", "Seeded 64-bit Mersenne Twister stream")
        .def(py::init([](std::uint64_t seed) { return make_rng(seed); }), py::arg("seed"))
        .def("next", [](Rng& r) { return r(); });
    m.def("derive_seed", [](std::uint64_t base, const std::string& name) { return derive_seed(base, name); },
          py::arg("base"), py::arg("component"));

    m.def("masked_token_count", &masked_token_count, py::arg("length"), py::arg("ratio"));
    m.def("block_count", &block_count, py::arg("length"), py::arg("block"));
    m.def(
        "random_mask", [](std::size_t length, double ratio, Rng& rng) { return to_bools(random_mask(length, ratio, rng)); },
        py::arg("length"), py::arg("ratio"), py::arg("rng"), "Visibility flags (True = visible)");
    m.def(
        "block_mask",
        [](std::size_t length, double ratio, std::size_t block, Rng& rng, bool full_blocks) {
            return to_bools(block_mask(length, ratio, block, rng, BlockMaskOptions{full_blocks}));
        },
        py::arg("length"), py::arg("ratio"), py::arg("block"), py::arg("rng"), py::arg("full_blocks") = false,
        "Visibility flags (True = visible)");

    py::class_<MaskingPool>(m, "MaskingPool")
        .def(py::init<>())
        .def(py::init<std::vector<double>, std::vector<std::size_t>>(), py::arg("ratios"), py::arg("blocks"))
        .def("__len__", &MaskingPool::size)
        .def("scheme",
             [](const MaskingPool& p, std::size_t arm) {
                 const MaskScheme s = p.scheme(arm);
                 return py::make_tuple(s.ratio, s.block);
             })
        .def_property_readonly("ratios", &MaskingPool::ratios)
        .def_property_readonly("blocks", &MaskingPool::blocks);

    py::class_<Exp3>(m, "Exp3")
        .def(py::init<std::size_t, double, double>(), py::arg("arms"), py::arg("epsilon"), py::arg("gamma"))
        .def_property_readonly("arms", &Exp3::arms)
        .def("sampling_distribution", &Exp3::sampling_distribution)
        .def("update_weights", &Exp3::update_weights, py::arg("arm"), py::arg("scaled_reward"))
        .def("weights", &Exp3::weights)
        .def_property_readonly("log_weights", &Exp3::log_weights);

    m.def(
        "nearest_rank_percentile",
        [](const std::vector<double>& v, double pct) { return nearest_rank_percentile(v, pct); }, py::arg("values"),
        py::arg("pct"));
    m.def(
        "scale_reward",
        [](const std::vector<double>& history, double raw, std::size_t cold_start, std::size_t window) {
            RewardScaleOptions o;
            o.cold_start = cold_start;
            o.window = window;
            return scale_reward(history, raw, o);
        },
        py::arg("history"), py::arg("raw"), py::arg("cold_start") = 5, py::arg("window") = 0);

    py::class_<SyntheticLearner>(m, "SyntheticLearner")
        .def(py::init<std::vector<double>, std::vector<double>, std::vector<std::vector<double>>>(), py::arg("base"),
             py::arg("floor"), py::arg("transfer"))
        .def("loss", &SyntheticLearner::synthetic_loss, py::arg("scheme"))
        .def("train", &SyntheticLearner::synthetic_train, py::arg("scheme"), py::arg("steps") = 1)
        .def("mean_loss", &SyntheticLearner::mean_loss)
        .def_property_readonly("counts", &SyntheticLearner::counts);

    m.def(
        "effective_config", [](const std::string& text) { return config_to_json(parse_config(text)).dump(); },
        py::arg("config_json"), "Config JSON with every default filled in");
    m.def(
        "config_hash", [](const std::string& text) { return config_hash(parse_config(text)); },
        py::arg("config_json"));
    m.def(
        "gen_data",
        [](const std::string& text, bool force) {
            const RunConfig c = parse_config(text);
            py::gil_scoped_release release;
            gen_data(c, force);
        },
        py::arg("config_json"), py::arg("force") = false);
    m.def(
        "pretrain",
        [](const std::string& text, bool resume, bool force, std::uint64_t stop_after, std::size_t threads) {
            const RunConfig c = parse_config(text);
            PretrainResult r;
            {
                py::gil_scoped_release release;
                r = run_pretraining(c, PretrainOptions{resume, force, stop_after, threads, nullptr});
            }
            py::dict d;
            d["config_hash"] = r.config_hash;
            d["steps_done"] = r.steps_done;
            d["completed"] = r.completed;
            py::list recs;
            for (const auto& rec : r.records) recs.append(record_to_dict(rec));
            d["records"] = recs;
            d["checkpoint"] = r.checkpoint;
            return d;
        },
        py::arg("config_json"), py::arg("resume") = false, py::arg("force") = false, py::arg("stop_after") = 0,
        py::arg("threads") = 1);
    m.def(
        "evaluate",
        [](const std::string& text, bool replay_oracle) {
            const RunConfig c = parse_config(text);
            std::vector<EvalRow> rows;
            {
                py::gil_scoped_release release;
                EvalOptions o;
                o.replay_oracle = replay_oracle;
                rows = run_eval(c, o);
            }
            py::list out;
            for (const auto& r : rows) out.append(row_to_dict(r));
            return out;
        },
        py::arg("config_json"), py::arg("replay_oracle") = false);
    m.def(
        "format_report",
        [](const std::vector<std::filesystem::path>& csvs) {
            std::vector<EvalRow> rows;
            for (const auto& p : csvs) {
                auto part = read_eval_csv(p);
                rows.insert(rows.end(), part.begin(), part.end());
            }
            return format_report(rows);
        },
        py::arg("eval_csvs"));
}
