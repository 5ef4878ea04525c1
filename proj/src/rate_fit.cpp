// ============================================================================
// rate_fit.cpp
// ============================================================================
#include "chc/rate_fit.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace chc {

LogLogFit fit_loglog(std::span<const double> x, std::span<const double> y)
{
  LogLogFit fit;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  fit.slope = fit.intercept = fit.r2 = fit.residual = nan;
  if (x.size() != y.size() || x.size() < 2)
    return fit;
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0))
      return fit;
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
  }
  const double n = static_cast<double>(lx.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double r = ly[i] - (fit.intercept + fit.slope * lx[i]);
    ss_res += r * r;
  }
  fit.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  fit.residual = std::sqrt(ss_res / n);
  return fit;
}

}  // namespace chc
