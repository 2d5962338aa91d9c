#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rdl/checks.hpp"
#include "rdl/config.hpp"
#include "rdl/errors.hpp"
#include "rdl/training.hpp"

namespace {

int run_train(const std::string& config_path, bool seed_set, std::uint64_t seed,
              const std::string& out_dir) {
    rdl::cli::RunConfig cfg = rdl::cli::parse_config(config_path);
    if (seed_set) cfg.seed = seed;
    if (!out_dir.empty()) cfg.output_dir = out_dir;

    rdl::cli::TrainResult result = rdl::cli::run_training(cfg);
    for (const auto& r : result.records) {
        std::cout << "epoch " << r.epoch << "  loss " << rdl::format_double(r.loss)
                  << "  residual " << rdl::format_double(r.constraint_residual) << "  accuracy "
                  << rdl::format_double(r.accuracy) << '\n';
    }
    std::cout << "wrote " << cfg.output_dir << "/metrics.csv and " << cfg.output_dir
              << "/checkpoint.txt\n";
    return 0;
}

int run_check(const std::string& suite) {
    rdl::checks::CheckResult r = rdl::checks::run_suite(suite);
    std::cout << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.detail << '\n';
    return r.passed ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Manifold-constrained neural network training"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed = 0;
    std::string out_dir;
    auto* train = app.add_subcommand("train", "Train a model from a config file");
    train->add_option("--config", config_path, "Config file path")->required();
    auto* seed_opt = train->add_option("--seed", seed, "Override the config seed");
    train->add_option("--out", out_dir, "Override the output directory");

    std::string suite;
    auto* check = app.add_subcommand("check", "Run a named check suite");
    check->add_option("--suite", suite, "One of: gradcheck, retraction, rayleigh, karcher, mlp, conv, determinism")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (train->parsed()) return run_train(config_path, seed_opt->count() > 0, seed, out_dir);
        return run_check(suite);
    } catch (const rdl::ParseError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const rdl::ValidationError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const rdl::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
