#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shellforms/cell.hpp"

namespace shf {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;  // deterministic, no wall-clock content
};

struct CheckOptions {
    std::uint64_t seed = 0;
    double solver_tol = 1e-10;
    int max_iter = 10000;
    int jobs = 1;
    // Chart used by the recovery check; "sphere-cap" by default, "flat"
    // exercises the NotConvex rejection path.
    std::string recovery_chart = "sphere-cap";
};

// The verification suite behind `check`: Egregium convergence, homogeneous
// closed form, Q_2 Schur vs brute force, oracle equivalence, regime-0
// equivalence, gamma continuity, SPD audit + feasibility bound, minimizer
// optimality, rigid-motion invariance, recovery manufactured solution.
// Deterministic for a fixed seed.
std::vector<CheckResult> run_check_suite(const CheckOptions& opts);

// Names accepted by run_single_check, in report order.
std::vector<std::string> check_names();
CheckResult run_single_check(const std::string& name, const CheckOptions& opts);

// Formats results as the report text: one "PASS|FAIL name: detail" line per
// check plus a summary line. Bitwise deterministic for fixed inputs.
std::string format_check_report(const std::vector<CheckResult>& results, std::uint64_t seed);

}  // namespace shf
