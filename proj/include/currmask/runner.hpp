#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "currmask/config.hpp"
#include "currmask/scheduler.hpp"

namespace currmask {

struct PretrainOptions {
    bool resume = false;             // continue from <output_dir>/checkpoint
    bool force = false;              // wipe an existing run in output_dir
    std::uint64_t stop_after = 0;    // > 0: checkpoint and stop after this step (simulated interruption)
    std::size_t threads = 1;
    std::ostream* log = nullptr;
};

struct PretrainResult {
    std::string config_hash;
    std::uint64_t steps_done = 0;
    bool completed = false;
    std::vector<MetricsRecord> records;  // records emitted by this invocation
    std::filesystem::path checkpoint;
};

// Output directory layout: config.json, metrics.csv, metrics.jsonl, checkpoint/, run_manifest.json
// and, after a numeric abort, diagnostics.json.
PretrainResult run_pretraining(const RunConfig& cfg, const PretrainOptions& options = {});

struct EvalOptions {
    std::optional<std::filesystem::path> checkpoint;  // default <output_dir>/checkpoint
    std::optional<std::filesystem::path> eval_csv;    // default <output_dir>/eval.csv
    bool replay_oracle = false;                       // score the replay oracle instead of a net
    std::ostream* log = nullptr;
};

struct EvalRow {
    std::string run_id;
    std::string method;
    std::string task;
    std::string metric;
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n = 0;
    std::uint64_t seed_base = 0;
};

inline constexpr const char* kEvalCsvHeader = "run_id,method,task,metric,mean,stderr,n,seed_base";

// Runs skill prompting and goal planning on the validation split; rows are appended to eval.csv.
std::vector<EvalRow> run_eval(const RunConfig& cfg, const EvalOptions& options = {});

std::vector<EvalRow> read_eval_csv(const std::filesystem::path& path);
void append_eval_csv(const std::filesystem::path& path, const std::vector<EvalRow>& rows);

// Table of mean ± stderr with one row per (task, metric) and one column per method.
std::string format_report(const std::vector<EvalRow>& rows);

// Writes the train and validation splits named in the config.
void gen_data(const RunConfig& cfg, bool force);

// CURRMASK_THREADS, defaulting to 1.
std::size_t threads_from_env();

}  // namespace currmask
