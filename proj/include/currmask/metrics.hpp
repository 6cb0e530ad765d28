#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "currmask/scheduler.hpp"

namespace currmask {

// Appends MetricsRecords to metrics.csv and metrics.jsonl.
//
// CSV layout: a "# config_hash=<hex>" line, a column header
//   step,wallclock,arm_index,ratio,block,raw_reward,scaled_reward,loss_before,loss_after,p0..p{K-1}
// and one row per record. Non-finite values are written as "nan" (null in JSON).
class MetricsWriter {
public:
    // fresh = true truncates and writes headers; otherwise both files are opened for append.
    MetricsWriter(const std::filesystem::path& dir, std::size_t arms, const std::string& config_hash, bool fresh);

    void write(const MetricsRecord& rec);
    void flush();
    std::uintmax_t csv_bytes();
    std::uintmax_t jsonl_bytes();

    static std::string csv_header(std::size_t arms);

private:
    std::size_t arms_;
    std::string config_hash_;
    std::ofstream csv_;
    std::ofstream jsonl_;
};

// Shortest decimal text that reads back to the same double ("nan" for NaN).
std::string format_double(double v);

}  // namespace currmask
