#pragma once

#include <string>
#include <vector>

#include "rdl/rng.hpp"
#include "rdl/tensor.hpp"

namespace rdl::cli {

// A classification dataset: one feature row per example.
struct Dataset {
    Tensor features; // n x d
    std::vector<int> labels;
    int classes = 0;

    int size() const { return features.defined() ? features.dim(0) : 0; }
    int dim() const { return features.defined() ? features.dim(1) : 0; }
};

// Recognizes "synthetic(clusters, dim, n)"; fills the three values.
bool parse_synthetic_spec(const std::string& s, int& clusters, int& dim, int& n);

// c Gaussian clusters with unit variance whose means are drawn (from rng)
// at mutual Euclidean distance >= 6, n points total assigned round-robin,
// labels = cluster index.
Dataset make_synthetic(int clusters, int dim, int n, Rng& rng);

// CSV rows "f1,f2,...,fk,label" with an integer label in the last column.
// classes = 0 infers max label + 1.
Dataset load_csv(const std::string& path, int classes);

// Dispatches on the dataset string (synthetic spec or CSV path).
Dataset load_dataset(const std::string& spec, int classes, Rng& rng);

} // namespace rdl::cli
