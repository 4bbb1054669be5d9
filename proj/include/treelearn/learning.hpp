#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "treelearn/kernels.hpp"
#include "treelearn/tree_network.hpp"

namespace treelearn {

struct Sample {
    Matrix x;  // one point per row
    Vector y;
    std::size_t size() const { return static_cast<std::size_t>(y.size()); }
};

struct TrainingData {
    Matrix inputs;
    Vector outputs;
    std::vector<std::size_t> validation;  // row indices held out, sorted

    void check() const;
    Sample training() const;
    Sample held_out() const;
};

Sample subsample(const Sample& s, const std::vector<std::size_t>& rows);

struct RiskEstimate {
    double empirical = 0.0;
    double loo = 0.0;
    double corrected_loo = 0.0;
    std::optional<double> holdout;
};

struct PatternFit {
    Vector coefficients;      // full length, zero outside the selected pattern
    std::size_t pattern = 0;  // index into the pattern sequence
    double empirical = 0.0;
    double loo = 0.0;
    double corrected_loo = 0.0;
    bool flagged = false;  // rank deficiency, interpolation or regularized solve
};

// OLS on each pattern's columns; keeps the smallest corrected LOO risk
// (ties go to the smaller pattern).
PatternFit solve_with_pattern_selection(const Matrix& a, const Vector& y, const PatternSequence& patterns);
PatternFit solve_least_squares(const Matrix& a, const Vector& y);
// Cholesky solve of the normal equations for designs with nearly orthonormal
// columns; returns coefficients and empirical risk only (LOO fields NaN) and
// falls back to solve_least_squares when the Gram is poorly conditioned.
PatternFit solve_normal_equations(const Matrix& a, const Vector& y);

// Leave-one-out risk from leverages; +inf when a leverage reaches one.
double loo_risk(const Matrix& a, const Vector& y, const Vector& coefficients);
// LOO risk times (1 - m/n)^-1 (1 + trace(G^-1 Gbar)/n) with G = A^T A / n and
// Gbar the exact feature Gram (identity when omitted).
double corrected_loo_risk(const Matrix& a, const Vector& y, const Vector& coefficients,
                          const Matrix* feature_gram = nullptr);
double correction_factor(std::size_t m, std::size_t n, double trace_term);

struct SampleRisk {
    double empirical = 0.0;
    double relative_error = 0.0;
    bool flagged = false;  // targets all zero: relative_error is the RMSE
};
SampleRisk risks(const Vector& predictions, const Vector& targets);
SampleRisk risks(const TreeTensorNetwork& v, const Sample& s);

struct AlsConfig {
    std::size_t max_sweeps = 30;
    double stagnation_tol = 1e-10;
    bool leaf_patterns = true;
    kernels::Exec exec = kernels::Exec::parallel;
};

struct AlsResult {
    TreeTensorNetwork net;
    RiskEstimate risk;
    std::size_t sweeps = 0;
    std::size_t flagged_solves = 0;
    std::vector<double> node_risks;  // empirical risk after every node update
};

// Design matrix of node alpha on the points xs: row i holds phi^a(x_i) (x) w^a(x_i)
// over the core's index set. Alpha-orthogonalizes a copy internally.
Matrix node_design_matrix(const TreeTensorNetwork& net, NodeId alpha, const Matrix& xs,
                          kernels::Exec exec = kernels::Exec::parallel);

AlsResult als_fit(TreeTensorNetwork net0, const Sample& train, const AlsConfig& config = {});

}  // namespace treelearn
