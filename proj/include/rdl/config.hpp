#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rdl/nn.hpp"
#include "rdl/optim.hpp"

namespace rdl::cli {

enum class Task { mlp_classify, rayleigh, karcher_mean };
enum class OptimizerKind { sgd, adagrad, conjugate_gradient };

Task task_from_string(const std::string& s);
std::string to_string(Task t);
OptimizerKind optimizer_kind_from_string(const std::string& s);
std::string to_string(OptimizerKind k);

// One training run, as read from a flat "key = value" config file.
struct RunConfig {
    Task task = Task::mlp_classify;

    // CSV path or "synthetic(clusters, dim, n)".
    std::string dataset = "synthetic(4, 64, 512)";
    int classes = 0; // 0: infer from the dataset

    std::vector<int> hidden = {32, 32, 32};
    nn::ManifoldRequest weight_manifold = nn::ManifoldRequest::stiefel;
    bool bias = true;

    OptimizerKind optimizer = OptimizerKind::adagrad;
    double lr = 1e-2;
    double momentum = 0.0;
    double eps = 1e-10;
    optim::BetaRule beta_rule = optim::BetaRule::fletcher_reeves;

    int epochs = 10;
    int batch_size = 32;
    bool batch_size_set = false; // explicit in the file (full-batch rule)
    std::uint64_t seed = 0;
    std::string output_dir = "run_out";

    // rayleigh / karcher_mean problem sizes
    int rayleigh_n = 50;
    int rayleigh_p = 5;
    int karcher_n = 5;
    int karcher_k = 2;

    optim::Optimizer::Config optimizer_config() const;
};

// Parses and validates a config file. Unknown keys, malformed values, and
// violated invariants are errors; nothing is silently ignored.
RunConfig parse_config(const std::string& path);
RunConfig parse_config_text(const std::string& text, const std::string& origin = "<string>");

// Invariants that need the dataset size: batch_size <= n, and conjugate
// gradient must run full batch. When batch_size was not set explicitly,
// conjugate gradient adopts the full batch instead of failing.
void resolve_batch_size(RunConfig& cfg, int dataset_size);

} // namespace rdl::cli
