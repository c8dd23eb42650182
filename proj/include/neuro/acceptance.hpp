#pragma once

// The fourteen acceptance criteria as callable checks.

#include <cstdint>
#include <string>
#include <vector>

namespace neuro::acceptance {

struct CriterionResult {
    int id = 0;
    std::string title;
    bool pass = false;
    /// The only failing part is a sub-check documented as unattainable with
    /// the stated protocol (see README). Never set when anything else fails.
    bool known_gap = false;
    std::string detail;
    double seconds = 0.0;
};

inline constexpr int criterion_count = 14;

/// Runs criterion `id` (1..14) with fixed seeds derived from `seed`.
CriterionResult check(int id, std::uint64_t seed = 1);

/// "PASS"/"FAIL" line: "[PASS] 3 scalar mean-field: ... (0.01 s)".
std::string format(const CriterionResult& result);

}  // namespace neuro::acceptance
