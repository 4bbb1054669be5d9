#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "treelearn/adaptation.hpp"

namespace treelearn {

// Synthetic targets on [-1,1]^d.
//   i    1/(10 + 2x1 + x3 + 2x4 - x5)^2                     d = 6,  degree 10
//   ii   g(x1,x2) + g(x3,x4) + ... + g(x9,x10)              d = 10, degree 5
//   iii  log(1 + (g(x1,x2) + ... + g(x9,x10))^2)            d = 10, degree 10
//   iv   g(x1,x2) + g(x2,x3) + ... + g(x15,x16)             d = 16, degree 5
//   v    h(h(h(x1,x2),h(x3,x4)),h(h(x5,x6),h(x7,x8)))       d = 8,  degree 8
// with g(a,b) = sum_{i=0}^{3} a^i b^i and h(t,s) = (2+ts)^2/9.
enum class FunctionId { i, ii, iii, iv, v };

std::string function_name(FunctionId f);
FunctionId parse_function(const std::string& name);
std::size_t function_dimension(FunctionId f);
std::size_t function_degree(FunctionId f);

double test_function(FunctionId f, std::span<const double> x);
Vector test_function(FunctionId f, const Matrix& xs);

// Whether the tree has the structure the function favors; nullopt when no
// criterion is defined (function iv).
std::optional<bool> is_optimal_tree(FunctionId f, const DimensionTree& tree);

struct ExperimentSpec {
    FunctionId function = FunctionId::ii;
    std::size_t n_train = 1000;  // total sample, validation carved from it
    std::size_t n_test = 10000;
    double noise = 0.0;  // standard deviation of the additive Gaussian noise
    TreeKind tree = TreeKind::balanced;
    bool permute_leaves = true;
    std::size_t trials = 10;
    std::uint64_t seed = 0;
    AdaptConfig adapt;

    void check() const;
};

// Spec with the function's dimension and degree filled in.
ExperimentSpec default_spec(FunctionId f);

struct DataSet {
    TrainingData train;
    Sample test;       // outputs include noise
    Vector test_clean; // noiseless target values at the test inputs
};
DataSet sample_data(const ExperimentSpec& spec, Rng& rng);

struct TrialReport {
    std::size_t trial = 0;
    double test_error = 0.0;     // relative, against the (possibly noisy) test outputs
    double squared_error = 0.0;  // mean (u - v)^2 against the noiseless target
    double cv_error = 0.0;       // relative, from the corrected LOO risk
    std::size_t complexity = 0;
    std::string start_tree;
    std::string final_tree;
    std::vector<std::string> subsets;
    std::optional<bool> optimal;
    std::vector<IterationRecord> records;
    std::size_t selected = 0;
    TreeTensorNetwork model;
};

struct ExperimentReport {
    ExperimentSpec spec;
    std::vector<TrialReport> trials;
};

TrialReport run_trial(const ExperimentSpec& spec, std::size_t trial);
// Trials run concurrently; results do not depend on scheduling.
ExperimentReport run_experiment(const ExperimentSpec& spec);

std::string report_json(const ExperimentReport& report);
std::string spec_json(const ExperimentSpec& spec);
ExperimentSpec parse_spec(const std::string& json_text);

}  // namespace treelearn
