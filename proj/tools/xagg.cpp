// Command-line driver: xagg prepare|train|run --config <path> [--out <dir>] [--seed <u64>] [--stage <name>]
//
// Exit codes: 0 success, 2 usage or input error, 3 runtime failure.

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "xagg/pipeline.hpp"

namespace {

struct Options {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::string stage = "all";
};

void add_common(CLI::App* cmd, Options& o) {
    cmd->add_option("--config", o.config, "experiment config (JSON)")->required();
    cmd->add_option("--out", o.out, "output directory (default: from config)");
    cmd->add_option("--seed", o.seed, "master seed override");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-model explanation aggregation and robustness"};
    app.require_subcommand(1);
    Options o;
    auto* prepare = app.add_subcommand("prepare", "load, clean, encode and split the dataset");
    auto* train = app.add_subcommand("train", "fit the three classifiers");
    auto* run = app.add_subcommand("run", "explain, perturb, score and report");
    add_common(prepare, o);
    add_common(train, o);
    add_common(run, o);
    run->add_option("--stage", o.stage, "explain|perturb|robustness|validate|report|all")
        ->check(CLI::IsMember({"all", "explain", "perturb", "robustness", "validate", "report"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    xagg::warning_handler() = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
    try {
        auto cfg = xagg::load_config(o.config);
        if (o.seed) cfg.seed = *o.seed;
        const std::filesystem::path out = o.out.empty() ? cfg.output : std::filesystem::path(o.out);
        const unsigned threads = xagg::worker_threads();

        if (*prepare) {
            const auto ds = xagg::cmd_prepare(cfg, out);
            std::cout << "prepared " << ds.x.rows() << " rows, " << ds.features() << " features -> "
                      << (out / "prepared").string() << '\n';
        } else if (*train) {
            if (!std::filesystem::exists(out / "prepared" / "dataset.json"))
                throw xagg::InputError("no prepared dataset in " + out.string() + "; run 'xagg prepare' first");
            const auto row = xagg::cmd_train(cfg, out, threads);
            std::cout << "train accuracy knn " << row.accuracy[0] << " rf " << row.accuracy[1] << " nn "
                      << row.accuracy[2] << '\n';
        } else if (*run) {
            xagg::cmd_run(cfg, out, o.stage, threads);
            std::cout << "run (" << o.stage << ") complete -> " << out.string() << '\n';
        }
    } catch (const xagg::InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const xagg::RuntimeFailure& e) {
        std::cerr << "failure: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
