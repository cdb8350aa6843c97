#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include "safecharge/checkpoint.hpp"
#include "safecharge/config_io.hpp"
#include "safecharge/csv.hpp"
#include "safecharge/eval.hpp"
#include "safecharge/report.hpp"
#include "safecharge/trainer.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct TrainArgs {
    std::string run_config;
    std::string output_dir = "train_output";
    std::vector<std::uint64_t> seeds;
    int episodes = 0;
    bool no_safety = false;
    int max_parallel = 0;
};

struct EvaluateArgs {
    std::string checkpoint;
    std::string battery_config;
    std::string output_dir = "eval_output";
    double charging_soc = 0.8;
};

struct CompareArgs {
    std::vector<std::string> metrics;
    std::string output;
};

int run_train(const TrainArgs& args) {
    safecharge::RunConfig run = safecharge::load_run_config(args.run_config);
    if (args.episodes > 0) run.episodes = args.episodes;
    if (!args.seeds.empty()) {
        run.seeds = args.seeds;
    } else if (const char* env = std::getenv("SAFECHARGE_SEED")) {
        run.seeds = {static_cast<std::uint64_t>(std::stoull(env))};
    }
    if (args.no_safety) run.safety_enabled = false;

    safecharge::TrainRun train;
    train.run = std::move(run);
    train.output_dir = args.output_dir;
    train.max_parallel_seeds = args.max_parallel;

    auto metrics = safecharge::run_training(train);
    std::cout << "wrote " << metrics.size() << " episode metrics to "
              << (train.output_dir / "metrics.csv").string() << "\n";
    return kExitOk;
}

int run_evaluate(const EvaluateArgs& args) {
    safecharge::AgentCheckpoint cp =
        safecharge::load_agent_checkpoint(args.checkpoint);
    safecharge::BatteryConfig config =
        safecharge::load_battery_config(args.battery_config);
    safecharge::EvalResult res =
        safecharge::evaluate_policy(cp, config, args.charging_soc);

    std::filesystem::path out_dir(args.output_dir);
    std::filesystem::create_directories(out_dir);
    safecharge::write_trajectory_csv(out_dir / "trajectory.csv", res.rows);
    std::string summary = safecharge::eval_summary_line(res);
    safecharge::write_file(out_dir / "summary.txt", summary + "\n");
    std::cout << summary << "\n";
    return kExitOk;
}

int run_compare(const CompareArgs& args) {
    if (args.metrics.size() < 2) {
        std::cerr << "compare needs at least two metrics files\n";
        return kExitUsage;
    }
    std::vector<safecharge::RunStats> stats;
    for (const auto& path : args.metrics) {
        auto rows = safecharge::read_metrics_csv(path);
        stats.push_back(safecharge::compute_run_stats(rows, path));
    }
    std::string report = safecharge::render_comparison(stats);
    safecharge::write_file(args.output, report);
    std::cout << "report written to " << args.output << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"safe fast-charging: training, evaluation and comparison"};
    app.require_subcommand(1);

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "run a training run");
    train->add_option("--run-config", train_args.run_config, "run config file")
        ->required();
    train->add_option("--output-dir", train_args.output_dir, "output directory");
    train->add_option("--seeds", train_args.seeds, "override seeds")
        ->delimiter(',');
    train->add_option("--episodes", train_args.episodes,
                      "override episode count");
    train->add_flag("--no-safety", train_args.no_safety,
                    "baseline mode: execute raw clamped actions");
    train->add_option("--max-parallel", train_args.max_parallel,
                      "cap on concurrent seed workers");

    EvaluateArgs eval_args;
    auto* evaluate = app.add_subcommand("evaluate",
                                        "roll out a trained policy once");
    evaluate->add_option("--checkpoint", eval_args.checkpoint,
                         "agent checkpoint directory")
        ->required();
    evaluate->add_option("--battery-config", eval_args.battery_config,
                         "battery config file")
        ->required();
    evaluate->add_option("--output-dir", eval_args.output_dir,
                         "output directory");
    evaluate->add_option("--charging-soc", eval_args.charging_soc,
                         "soc level for the charging-time metric");

    CompareArgs compare_args;
    auto* compare = app.add_subcommand("compare", "compare metrics files");
    compare->add_option("metrics", compare_args.metrics,
                        "two or more metrics.csv paths");
    compare->add_option("--output", compare_args.output, "report path")
        ->required();

    std::string validate_path;
    auto* validate = app.add_subcommand("validate-config",
                                        "check a config file");
    validate->add_option("path", validate_path, "config file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (train->parsed()) return run_train(train_args);
        if (evaluate->parsed()) return run_evaluate(eval_args);
        if (compare->parsed()) return run_compare(compare_args);
        if (validate->parsed()) {
            std::cout << safecharge::validate_config_file(validate_path) << "\n";
            return kExitOk;
        }
    } catch (const safecharge::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const safecharge::CheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
