#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "currmask/metrics.hpp"

using namespace currmask;

namespace {

std::vector<std::string> lines_of(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string f; std::getline(ss, f, ',');) out.push_back(f);
    return out;
}

}  // namespace

TEST_SUITE("metrics") {
    TEST_CASE("csv and jsonl carry the same records") {
        const auto dir = std::filesystem::temp_directory_path() / "currmask_metrics_test";
        std::filesystem::remove_all(dir);
        std::filesystem::create_directories(dir);
        {
            MetricsWriter w(dir, 3, "00112233aabbccdd", true);
            MetricsRecord r;
            r.step = 100;
            r.wallclock = 1.5;
            r.arm_index = 2;
            r.ratio = 0.35;
            r.block = 4;
            r.raw_reward = 0.1;
            r.scaled_reward = -0.25;
            r.loss_before = 1.0 / 3.0;
            r.loss_after = 0.3;
            r.probabilities = {0.2, 0.3, 0.5};
            w.write(r);
            MetricsRecord baseline;
            baseline.step = 200;
            baseline.raw_reward = std::nan("");
            baseline.scaled_reward = std::nan("");
            baseline.loss_before = std::nan("");
            baseline.loss_after = std::nan("");
            baseline.probabilities = {1.0, 0.0};
            w.write(baseline);
            w.flush();
            CHECK(w.csv_bytes() == std::filesystem::file_size(dir / "metrics.csv"));
        }
        const auto csv = lines_of(dir / "metrics.csv");
        REQUIRE(csv.size() == 4);
        CHECK(csv[0] == "# config_hash=00112233aabbccdd");
        CHECK(csv[1] == "step,wallclock,arm_index,ratio,block,raw_reward,scaled_reward,loss_before,loss_after,p0,p1,p2");
        CHECK(csv[2] == "100,1.5,2,0.35,4,0.1,-0.25,0.3333333333333333,0.3,0.2,0.3,0.5");
        const auto row = split(csv[3]);
        REQUIRE(row.size() == 12);
        CHECK(row[2] == "-1");
        CHECK(row[5] == "nan");
        CHECK(row[11] == "nan");
        CHECK(std::stod(split(csv[2])[7]) == 1.0 / 3.0);

        const auto jl = lines_of(dir / "metrics.jsonl");
        REQUIRE(jl.size() == 2);
        const auto a = nlohmann::json::parse(jl[0]);
        CHECK(a.at("config_hash") == "00112233aabbccdd");
        CHECK(a.at("step") == 100);
        CHECK(a.at("loss_before").get<double>() == 1.0 / 3.0);
        CHECK(a.at("probabilities").size() == 3);
        const auto b = nlohmann::json::parse(jl[1]);
        CHECK(b.at("raw_reward").is_null());
        CHECK(b.at("probabilities")[2].is_null());

        {
            MetricsWriter more(dir, 3, "00112233aabbccdd", false);
            MetricsRecord r;
            r.step = 300;
            more.write(r);
        }
        CHECK(lines_of(dir / "metrics.csv").size() == 5);
        CHECK(lines_of(dir / "metrics.jsonl").size() == 3);
        std::filesystem::remove_all(dir);
    }

    TEST_CASE("number formatting round-trips") {
        for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0}) CHECK(std::stod(format_double(v)) == v);
        CHECK(format_double(std::nan("")) == "nan");
        CHECK(format_double(1.0) == "1");
        CHECK(MetricsWriter::csv_header(0) ==
              "step,wallclock,arm_index,ratio,block,raw_reward,scaled_reward,loss_before,loss_after");
    }
}
