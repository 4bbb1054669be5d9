#pragma once

#include <cstddef>
#include <cstdint>

namespace treelearn::testing {

// Worst observed values over a batch of random networks.
struct FormatReport {
    std::size_t networks = 0;
    double gauge = 0.0;        // relative change of point values after gauge moves and exact permutations
    double parseval = 0.0;     // |sum of squared node singular values - norm^2| / norm^2
    double truncation = 0.0;   // max ||u - u_eps|| / (eps ||u||), must stay <= 1
    double seconds = 0.0;
};
FormatReport check_format_algebra(std::size_t networks, std::uint64_t seed);

struct OracleReport {
    double spectra = 0.0;     // max deviation from brute-force singular values
    double loo = 0.0;         // max relative gap between closed-form and refit LOO
    bool roundtrip = true;    // matricize / unmatricize exact
    double seconds = 0.0;
};
OracleReport check_oracles(std::size_t cases, std::uint64_t seed);

}  // namespace treelearn::testing
