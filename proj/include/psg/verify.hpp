#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace psg {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail; // measured quantities
};

struct SuiteReport {
    std::string suite;
    std::vector<CheckResult> checks;
    bool passed() const;
};

/// stationarity, constraints, hellinger, consensus, ergodicity, floor, lln, orbit
const std::vector<std::string>& verify_suite_names();

/// Runs one suite. Throws std::invalid_argument for an unknown name.
/// Suites that produce traces (ergodicity) write them to `trace` when given.
SuiteReport run_verify_suite(const std::string& name, std::uint64_t seed, std::ostream* trace = nullptr);

} // namespace psg
