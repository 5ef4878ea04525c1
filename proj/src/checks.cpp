#include "chc/checks.hpp"

#include <cmath>
#include <sstream>

namespace chc {

namespace {

std::string fit_detail(const RateStudyResult& r)
{
  std::ostringstream os;
  os << r.name << " slope=" << r.fit.slope << " r2=" << r.fit.r2;
  return os.str();
}

}  // namespace

bool all_pass(const std::vector<Check>& checks)
{
  for (const auto& c : checks)
    if (!c.pass)
      return false;
  return true;
}

Check slope_in(const RateStudyResult& r, double lo, double hi, double min_r2)
{
  const bool ok = r.fit.slope >= lo && r.fit.slope <= hi && r.fit.r2 >= min_r2;
  std::ostringstream os;
  os << fit_detail(r) << " want [" << lo << ", " << hi << "]";
  if (min_r2 > 0.0)
    os << " r2>=" << min_r2;
  return {r.name, ok, os.str()};
}

Check slope_at_least(const RateStudyResult& r, double lo, double min_r2)
{
  const bool ok = r.fit.slope >= lo && r.fit.r2 >= min_r2;
  std::ostringstream os;
  os << fit_detail(r) << " want >=" << lo;
  if (min_r2 > 0.0)
    os << " r2>=" << min_r2;
  return {r.name, ok, os.str()};
}

Check strong_decay(const RateStudyResult& r, double slack)
{
  std::ostringstream os;
  os << r.name << " errors";
  bool ok = r.levels.size() >= 3 && r.failed_samples == 0;
  const std::size_t compared = r.levels.empty() ? 0 : r.levels.size() - 1;
  for (std::size_t l = 0; l < compared; ++l) {
    os << ' ' << r.levels[l].error << "(+-" << r.levels[l].stderr_ << ')';
    if (l > 0 && !(r.levels[l].error < (1.0 + slack) * r.levels[l - 1].error))
      ok = false;
  }
  if (compared >= 2) {
    const auto& coarse = r.levels.front();
    const auto& fine = r.levels[compared - 1];
    if (!(coarse.error - 2.0 * coarse.stderr_ > fine.error + 2.0 * fine.stderr_))
      ok = false;
  }
  os << " failed_samples=" << r.failed_samples;
  return {r.name, ok, os.str()};
}

std::vector<Check> det_linear_checks(const RateStudyResult& space, const RateStudyResult& time)
{
  return {slope_in(space, 1.85, 2.15, 0.98), slope_in(time, 0.4, 0.6)};
}

std::vector<Check> det_derivative_checks(const RateStudyResult& space, const RateStudyResult& time)
{
  return {slope_at_least(space, 1.7, 0.98), slope_at_least(time, 0.4, 0.98)};
}

std::vector<Check> stoch_conv_checks(const RateStudyResult& space, const RateStudyResult& time)
{
  return {slope_in(space, 1.6, 2.4), slope_in(time, 0.35, 0.65)};
}

std::vector<Check> moment_checks(const MomentStudyResult& r)
{
  std::vector<Check> out;
  for (const char* key : {"sup_J:1", "sum_k_Y_h1_sq:1"}) {
    const auto it = r.ratio.find(key);
    const double ratio = it == r.ratio.end() ? NAN : it->second;
    std::ostringstream os;
    os << key << " max/min=" << ratio << " want <=3";
    out.push_back({std::string("moment ") + key, ratio <= 3.0, os.str()});
  }
  std::ostringstream os;
  os << "newton_failures=" << r.newton_failures << " of " << r.total_steps << " steps";
  out.push_back({"moment newton", r.newton_failures == 0, os.str()});
  return out;
}

std::vector<Check> holder_checks(const HolderResult& r)
{
  bool finite = !r.rows.empty();
  for (const auto& row : r.rows)
    finite = finite && std::isfinite(row.quotient);
  std::ostringstream os;
  os << "stability ratio=" << r.stability_ratio << " want <=3, quotients finite=" << (finite ? "yes" : "no");
  return {{"holder", finite && r.stability_ratio <= 3.0, os.str()}};
}

}  // namespace chc
