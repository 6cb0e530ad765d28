// currmask: gen-data, pretrain, eval and report subcommands.
#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "currmask/config.hpp"
#include "currmask/errors.hpp"
#include "currmask/runner.hpp"

namespace fs = std::filesystem;
using namespace currmask;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

RunConfig config_or_defaults(const std::string& path) {
    return path.empty() ? config_from_json(nlohmann::json::object()) : load_config(path);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Curriculum masked-prediction pretraining for trajectory models"};
    app.require_subcommand(1);
    app.allow_windows_style_options(false);

    std::string config_path;
    bool force = false;
    bool resume = false;
    bool print_config = false;
    bool oracle = false;
    std::uint64_t stop_after = 0;
    std::string checkpoint;
    std::string eval_csv;
    std::vector<std::string> report_inputs;

    auto* gen = app.add_subcommand("gen-data", "Generate the train and validation datasets");
    gen->add_option("--config", config_path, "Run config (JSON)");
    gen->add_flag("--force", force, "Overwrite non-empty dataset directories");

    auto* pre = app.add_subcommand("pretrain", "Run masked-prediction pretraining");
    pre->add_option("--config", config_path, "Run config (JSON)");
    pre->add_flag("--resume", resume, "Continue from <output_dir>/checkpoint");
    pre->add_flag("--force", force, "Replace an existing run in the output directory");
    pre->add_flag("--print-config", print_config, "Print the effective config with every default and exit");
    pre->add_option("--stop-after-step", stop_after, "Checkpoint and stop after this step");

    auto* ev = app.add_subcommand("eval", "Zero-shot skill prompting and goal planning");
    ev->add_option("--config", config_path, "Run config (JSON)");
    ev->add_option("--checkpoint", checkpoint, "Checkpoint directory (default <output_dir>/checkpoint)");
    ev->add_option("--eval-csv", eval_csv, "Output table (default <output_dir>/eval.csv)");
    ev->add_flag("--replay-oracle", oracle, "Score the replay oracle instead of a trained net");

    auto* rep = app.add_subcommand("report", "Tabulate one or more eval.csv files");
    rep->add_option("--input", report_inputs, "eval.csv files")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (gen->parsed()) {
            gen_data(config_or_defaults(config_path), force);
        } else if (pre->parsed()) {
            const RunConfig cfg = config_or_defaults(config_path);
            if (print_config) {
                std::cout << config_to_json(cfg).dump(2) << '\n';
                return 0;
            }
            PretrainOptions opt;
            opt.resume = resume;
            opt.force = force;
            opt.stop_after = stop_after;
            opt.threads = threads_from_env();
            opt.log = &std::cerr;
            const auto res = run_pretraining(cfg, opt);
            std::cout << "config_hash " << res.config_hash << " steps " << res.steps_done
                      << (res.completed ? " complete" : " stopped") << '\n';
        } else if (ev->parsed()) {
            const RunConfig cfg = config_or_defaults(config_path);
            EvalOptions opt;
            if (!checkpoint.empty()) {
                opt.checkpoint = checkpoint;
            }
            if (!eval_csv.empty()) {
                opt.eval_csv = eval_csv;
            }
            opt.replay_oracle = oracle;
            const auto rows = run_eval(cfg, opt);
            std::cout << format_report(rows);
        } else if (rep->parsed()) {
            std::vector<EvalRow> rows;
            for (const auto& p : report_inputs) {
                auto more = read_eval_csv(p);
                rows.insert(rows.end(), more.begin(), more.end());
            }
            std::cout << format_report(rows);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const NumericError& e) {
        std::cerr << "numeric abort: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const ParameterError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
