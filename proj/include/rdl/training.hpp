#pragma once

#include <string>
#include <vector>

#include "rdl/autodiff.hpp"
#include "rdl/config.hpp"
#include "rdl/dataset.hpp"
#include "rdl/nn.hpp"

namespace rdl::cli {

struct EpochRecord {
    int epoch = 0;              // 1-based
    double loss = 0.0;          // mean loss over the full dataset at epoch end
    double constraint_residual = 0.0; // max membership residual over parameters
    double accuracy = 0.0;      // fraction correct; 0 for non-classification tasks
};

struct TrainResult {
    std::vector<EpochRecord> records;
    std::vector<autodiff::ParamPtr> params; // final values
};

// Input dim -> hidden... -> classes, ReLU between layers, log-softmax last;
// every Linear weight carries the requested manifold.
nn::Sequential build_mlp(int in_dim, const std::vector<int>& hidden, int classes,
                         nn::ManifoldRequest request, bool with_bias, Rng& rng);

struct EvalResult {
    double loss = 0.0;
    double accuracy = 0.0;
};

// Mean nll loss (and accuracy) of the model over selected rows; accumulates
// egrads when backward is requested.
double batch_loss(const nn::Sequential& model, const Dataset& ds, const std::vector<int>& rows,
                  bool with_backward);
EvalResult evaluate(const nn::Sequential& model, const Dataset& ds);

double max_constraint_residual(const std::vector<autodiff::ParamPtr>& params);

// Runs the configured task, writes <output_dir>/metrics.csv and
// <output_dir>/checkpoint.txt, and returns the records with the final
// parameters.
TrainResult run_training(RunConfig cfg);

void write_metrics(const std::vector<EpochRecord>& records, const std::string& path);
std::vector<EpochRecord> read_metrics(const std::string& path);

// One section per parameter: "param: <name> manifold: <descriptor>" then the
// tensor in text form. Loading matches sections to parameters by name and
// requires identical descriptors.
void save_checkpoint(const std::vector<autodiff::ParamPtr>& params, const std::string& path);
void load_checkpoint(const std::vector<autodiff::ParamPtr>& params, const std::string& path);

} // namespace rdl::cli
