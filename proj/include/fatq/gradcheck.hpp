#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fatq::gradcheck {

struct CheckResult {
    std::string name;
    std::size_t instances = 0;
    double max_rel_err = 0.0;
    double tolerance = 0.0;
    std::string worst;  // "(check, instance, index)" of the worst entry
    bool passed = false;
};

struct SuiteResult {
    std::vector<CheckResult> checks;
    bool all_passed = false;
};

// Analytic-vs-finite-difference verification: the two transform Jacobians, the
// full spectral backward, and the end-to-end layer backward under the clip
// surrogate. `negative_control` swaps in a deliberately broken fixture that
// must fail, exercising the diagnostic path.
SuiteResult run_suite(std::uint64_t seed, std::size_t instances_per_check = 50,
                      bool negative_control = false);

}  // namespace fatq::gradcheck
