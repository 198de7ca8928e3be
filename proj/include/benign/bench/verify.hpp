#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace benign::bench {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct NamedCheck {
    std::string name;
    // Returns a failure description, or an empty string on success.
    std::function<std::string(std::uint64_t seed)> run;
};

/// Invariant checks for spectrum, datagen, network, trainer, risk and bench,
/// sized to finish in seconds.
const std::vector<NamedCheck>& invariant_checks();

/// Runs the checks in order and stops at the first failure.
std::vector<CheckResult> run_verify(std::uint64_t seed,
                                    const std::function<void(const CheckResult&)>& progress = {});

}  // namespace benign::bench
