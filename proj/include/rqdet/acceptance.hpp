#pragma once

#include <string>
#include <vector>

namespace rqdet {

/// One reported quantity. Passes when |value| < limit, or value == 0 for
/// exact checks. `grid_sensitive` quantities take part in the grid-doubling
/// check, which requires them to move by less than `limit`.
struct AcceptanceMetric {
  std::string name;
  double value = 0.0;
  double limit = 0.0;
  bool exact = false;
  bool grid_sensitive = true;

  [[nodiscard]] bool passed() const;
};

struct AcceptanceResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::vector<AcceptanceMetric> metrics;
  std::string detail;
  double max_imag_residue = 0.0;  // over every Hermitian-input density evaluated
  double seconds = 0.0;
};

struct AcceptanceOptions {
  unsigned threads = 1;
  std::vector<int> only;  // empty: all criteria
};

/// Criteria 1-10 at base resolution (refine = 1) or with every momentum grid
/// and quadrature doubled (refine = 2).
AcceptanceResult run_criterion(int id, int refine, unsigned threads);

/// Runs the requested criteria; criterion 11 reruns 1-10 on doubled grids.
std::vector<AcceptanceResult> run_acceptance(const AcceptanceOptions& options = {});

}  // namespace rqdet
