#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace qdiff {

// Randomised checks of the kernel norm algebra. Each entry counts violations
// out of `instances` draws.
struct PropertyReport {
    int instances = 0;
    std::map<std::string, int> violations;
    int total() const;
};

PropertyReport kernel_property_suite(std::uint64_t seed, int instances = 500);

// Perturbation bounds against dense eigensolves on random diagonalisable
// matrices with an isolated eigenvalue.
struct PersistenceReport {
    int instances = 0;   // draws satisfying the hypotheses
    int attempts = 0;
    int violations = 0;
    double worst_eig_ratio = 0;   // |a - a0| / bound
    double worst_proj_ratio = 0;  // ||P - P0|| / bound
};

PersistenceReport persistence_suite(std::uint64_t seed, int instances = 200, int n = 8);

}  // namespace qdiff
