#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "treelearn/tensor.hpp"

namespace treelearn {

enum class BasisFamily { legendre };

// Orthonormal polynomials for the uniform probability measure on [-1,1]:
// phi_i = sqrt(2i+1) P_i.
struct FeatureBasis {
    BasisFamily family = BasisFamily::legendre;
    std::size_t degree = 0;

    std::size_t size() const { return degree + 1; }
    bool operator==(const FeatureBasis&) const = default;
};

std::string family_name(BasisFamily f);
BasisFamily parse_family(const std::string& name);

// Writes phi_0..phi_{up_to_degree}(x) into out.
void basis_eval(const FeatureBasis& b, double x, std::size_t up_to_degree, std::span<double> out);
std::vector<double> basis_eval(const FeatureBasis& b, double x, std::size_t up_to_degree);

// Nested index sets over the coefficients of a core; the last set is complete.
using PatternSequence = std::vector<std::vector<std::size_t>>;

// Leaf core of shape (p+1, r) stored row-major: coefficient (a, k) has index
// a*r + k, so pattern lambda (degrees <= lambda) is the prefix of length (lambda+1)*r.
PatternSequence leaf_patterns(std::size_t p, std::size_t r);

// True when every pattern is a prefix 0..k-1 of the coefficient list.
bool is_prefix_sequence(const PatternSequence& patterns);

}  // namespace treelearn
