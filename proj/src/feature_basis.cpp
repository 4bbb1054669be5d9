#include "treelearn/feature_basis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace treelearn {

std::string family_name(BasisFamily f) {
    switch (f) {
    case BasisFamily::legendre: return "legendre";
    }
    return "unknown";
}

BasisFamily parse_family(const std::string& name) {
    if (name == "legendre") return BasisFamily::legendre;
    throw std::invalid_argument("unknown basis family '" + name + "'");
}

void basis_eval(const FeatureBasis& b, double x, std::size_t up_to_degree, std::span<double> out) {
    if (up_to_degree > b.degree) throw std::invalid_argument("requested degree above basis degree");
    if (out.size() < up_to_degree + 1) throw std::invalid_argument("output buffer too small");
    if (!(std::abs(x) <= 1.0 + 1e-12)) throw std::domain_error("point " + std::to_string(x) + " outside [-1,1]");
    x = std::clamp(x, -1.0, 1.0);
    double p_prev = 1.0, p = x;
    out[0] = 1.0;
    if (up_to_degree >= 1) out[1] = std::sqrt(3.0) * x;
    for (std::size_t k = 1; k < up_to_degree; ++k) {
        const double kd = static_cast<double>(k);
        const double next = ((2 * kd + 1) * x * p - kd * p_prev) / (kd + 1);
        p_prev = p;
        p = next;
        out[k + 1] = std::sqrt(2 * kd + 3) * p;
    }
}

std::vector<double> basis_eval(const FeatureBasis& b, double x, std::size_t up_to_degree) {
    std::vector<double> out(up_to_degree + 1);
    basis_eval(b, x, up_to_degree, out);
    return out;
}

PatternSequence leaf_patterns(std::size_t p, std::size_t r) {
    if (r == 0) throw std::invalid_argument("rank must be positive");
    PatternSequence seq(p + 1);
    for (std::size_t lambda = 0; lambda <= p; ++lambda)
        for (std::size_t i = 0; i < (lambda + 1) * r; ++i) seq[lambda].push_back(i);
    return seq;
}

bool is_prefix_sequence(const PatternSequence& patterns) {
    for (const auto& s : patterns)
        for (std::size_t i = 0; i < s.size(); ++i)
            if (s[i] != i) return false;
    return true;
}

}  // namespace treelearn
