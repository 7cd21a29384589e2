#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace asmrh {

// Override points so tests can inject faults and watch the suite catch them.
struct SelftestHooks {
    // stands in for the Hermitian forward transform when set
    std::function<std::vector<double>(const std::vector<double>&, std::size_t)> hfft;
};

struct PropertyResult {
    std::string name;
    bool pass = false;
    double worst = 0.0;  // worst-case error observed
    std::string detail;
};

// Oracle suite: FFT vs naive DFT, Hermitian realness/round-trip, roll
// permutation properties, gradient checks, AUC rank-vs-pairwise. Each
// property is seeded and deterministic; the full run stays well under a
// minute.
std::vector<PropertyResult> run_selftest(const SelftestHooks& hooks = {});

bool selftest_ok(const std::vector<PropertyResult>& results);

void print_selftest(std::ostream& os, const std::vector<PropertyResult>& results);

}  // namespace asmrh
