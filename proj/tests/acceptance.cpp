// Runs every acceptance criterion and prints one PASS/FAIL line per
// criterion, followed by its metrics. Optional arguments select criteria by
// number.
#include <cstdio>
#include <cstdlib>
#include <string>

#include "rqdet/acceptance.hpp"
#include "rqdet/numerics.hpp"

int main(int argc, char** argv) {
  rqdet::AcceptanceOptions options;
  options.threads = rqdet::resolve_thread_count(0);
  for (int i = 1; i < argc; ++i) options.only.push_back(std::atoi(argv[i]));
  bool ok = true;
  for (const auto& r : rqdet::run_acceptance(options)) {
    std::printf("%s  %2d  %s  (%.1f s)\n", r.passed ? "PASS" : "FAIL", r.id, r.name.c_str(), r.seconds);
    for (const auto& m : r.metrics)
      std::printf("        %-4s %s = %.6g %s %.3g\n", m.passed() ? "ok" : "FAIL", m.name.c_str(), m.value,
                  m.exact ? "==" : "<", m.exact ? 0.0 : m.limit);
    if (!r.detail.empty()) std::printf("        %s\n", r.detail.c_str());
    ok = ok && r.passed;
  }
  return ok ? EXIT_SUCCESS : EXIT_FAILURE;
}
