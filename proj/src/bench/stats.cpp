#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>

#include "mqttz/bench.hpp"
#include "mqttz/error.hpp"

namespace mqttz::bench {

double nearest_rank(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw Error(Errc::Empty, "no samples");
  auto n = sorted.size();
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return sorted[rank - 1];
}

Summary summarize(std::span<const double> samples) {
  if (samples.empty()) throw Error(Errc::Empty, "no samples");
  std::vector<double> v(samples.begin(), samples.end());
  std::sort(v.begin(), v.end());

  Summary s;
  s.count = v.size();
  s.min = v.front();
  s.max = v.back();
  s.p25 = nearest_rank(v, 25);
  s.p50 = nearest_rank(v, 50);
  s.p75 = nearest_rank(v, 75);
  s.p90 = nearest_rank(v, 90);
  s.p99 = nearest_rank(v, 99);
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw Error(Errc::InvalidArgument, "linear fit needs two or more paired points");
  auto n = static_cast<double>(x.size());
  double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0) throw Error(Errc::InvalidArgument, "x values are all equal");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double r = y[i] - (fit.slope * x[i] + fit.intercept);
    ss_res += r * r;
  }
  fit.r2 = syy == 0 ? 1.0 : 1.0 - ss_res / syy;
  return fit;
}

std::ostream& operator<<(std::ostream& os, const Summary& s) {
  auto flags = os.flags();
  auto precision = os.precision();
  os << std::fixed << std::setprecision(1) << "n=" << s.count << " min=" << s.min
     << " p25=" << s.p25 << " p50=" << s.p50 << " p75=" << s.p75 << " p90=" << s.p90
     << " p99=" << s.p99 << " max=" << s.max << " mean=" << s.mean << " sd=" << s.stddev;
  os.flags(flags);
  os.precision(precision);
  return os;
}

}  // namespace mqttz::bench
