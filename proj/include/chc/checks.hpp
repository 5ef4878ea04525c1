// ============================================================================
// chc/checks.hpp - pass/fail tolerances applied to study results
// ============================================================================
#pragma once

#include "chc/experiments.hpp"

#include <string>
#include <vector>

namespace chc {

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

bool all_pass(const std::vector<Check>& checks);

Check slope_in(const RateStudyResult& r, double lo, double hi, double min_r2 = 0.0);
Check slope_at_least(const RateStudyResult& r, double lo, double min_r2 = 0.0);

/// Coarse-to-fine errors decrease up to the relative slack, and the coarsest
/// and finest compared levels are separated by mean +- 2 SE. The last level
/// is the reference and is excluded.
Check strong_decay(const RateStudyResult& r, double slack = 0.1);

std::vector<Check> det_linear_checks(const RateStudyResult& space, const RateStudyResult& time);
std::vector<Check> det_derivative_checks(const RateStudyResult& space, const RateStudyResult& time);
std::vector<Check> stoch_conv_checks(const RateStudyResult& space, const RateStudyResult& time);
std::vector<Check> moment_checks(const MomentStudyResult& r);
std::vector<Check> holder_checks(const HolderResult& r);

}  // namespace chc
