#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "mqttz/bench.hpp"
#include "mqttz/error.hpp"

using namespace mqttz;
using namespace mqttz::bench;

namespace {

// Percentile from its definition: the smallest sample x with at least
// ceil(p/100 * n) samples <= x.
double percentile_by_count(const std::vector<double>& v, double p) {
  auto need = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(v.size()))));
  double best = INFINITY;
  for (double x : v) {
    auto le = static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [&](double y) { return y <= x; }));
    if (le >= need) best = std::min(best, x);
  }
  return best;
}

std::size_t line_count(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST_CASE("summarize basics") {
  std::vector<double> v{1, 2, 3, 4, 5};
  auto s = summarize(v);
  CHECK(s.count == 5);
  CHECK(s.p50 == 3);
  CHECK(s.min == 1);
  CHECK(s.max == 5);
  CHECK(s.p25 == 2);
  CHECK(s.p75 == 4);
  CHECK(s.mean == doctest::Approx(3));
  CHECK(s.stddev == doctest::Approx(std::sqrt(2.5)));

  std::vector<double> one{7.25};
  auto o = summarize(one);
  for (double x : {o.min, o.p25, o.p50, o.p75, o.p90, o.p99, o.max, o.mean}) CHECK(x == 7.25);
  CHECK(o.stddev == 0);

  CHECK_THROWS_WITH_AS(summarize(std::vector<double>{}), doctest::Contains("EMPTY"), Error);
}

TEST_CASE("summarize agrees with an independent computation") {
  std::mt19937_64 rng(99);
  std::lognormal_distribution<double> dist(3.0, 0.8);
  std::vector<double> v(1000);
  for (auto& x : v) x = dist(rng);

  auto s = summarize(v);
  CHECK(s.min == percentile_by_count(v, 0));
  CHECK(s.p25 == percentile_by_count(v, 25));
  CHECK(s.p50 == percentile_by_count(v, 50));
  CHECK(s.p75 == percentile_by_count(v, 75));
  CHECK(s.p90 == percentile_by_count(v, 90));
  CHECK(s.p99 == percentile_by_count(v, 99));
  CHECK(s.max == percentile_by_count(v, 100));

  // Welford
  double mean = 0, m2 = 0;
  std::size_t n = 0;
  for (double x : v) {
    ++n;
    double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  CHECK(s.mean == doctest::Approx(mean).epsilon(1e-12));
  CHECK(s.stddev == doctest::Approx(std::sqrt(m2 / static_cast<double>(n - 1))).epsilon(1e-12));

  auto shuffled = v;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  auto s2 = summarize(shuffled);
  CHECK(s2.p50 == s.p50);
  CHECK(s2.p99 == s.p99);
  CHECK(s2.mean == doctest::Approx(s.mean).epsilon(1e-12));
}

TEST_CASE("linear fit") {
  std::vector<double> x{1, 2, 3, 4, 5}, y{2.1, 3.9, 6.2, 7.8, 10.1};
  auto f = linear_fit(x, y);
  CHECK(f.slope == doctest::Approx(1.99));
  CHECK(f.intercept == doctest::Approx(0.05));
  CHECK(f.r2 == doctest::Approx(0.997305328900977));

  std::vector<double> exact{3, 5, 7, 9, 11};
  auto e = linear_fit(x, exact);
  CHECK(e.slope == doctest::Approx(2));
  CHECK(e.intercept == doctest::Approx(1));
  CHECK(e.r2 == doctest::Approx(1));

  CHECK_THROWS_AS(linear_fit(std::vector<double>{1}, std::vector<double>{1}), Error);
  CHECK_THROWS_AS(linear_fit(std::vector<double>{1, 2}, std::vector<double>{1}), Error);
  CHECK_THROWS_AS(linear_fit(std::vector<double>{2, 2}, std::vector<double>{1, 3}), Error);
}

TEST_CASE("micro benchmark output") {
  MicroOptions opt;
  opt.runs = 3;
  auto samples = run_reencrypt_micro(opt);
  CHECK(samples.size() == 3 * opt.block_sizes.size() * 3);
  for (const auto& s : samples) {
    const auto& t = s.timing;
    for (double v : {t.retrieve_dec_key_us, t.retrieve_enc_key_us, t.decrypt_us, t.encrypt_us})
      CHECK(v >= 0);
    double parts = t.retrieve_dec_key_us + t.retrieve_enc_key_us + t.decrypt_us + t.encrypt_us;
    CHECK(std::abs(parts - t.total_us) <= 0.05 * t.total_us);
  }
  std::ostringstream csv;
  write_micro_csv(csv, samples);
  CHECK(line_count(csv.str()) == 1 + samples.size() * 5);
  CHECK(csv.str().rfind("scenario,run,phase,block_size,value_us\n", 0) == 0);
}

TEST_CASE("cache benchmark output") {
  CacheOptions opt;
  opt.total_keys = 16;
  opt.capacities = {4, 16};
  opt.queries = 32;
  opt.runs = 2;
  auto runs = run_cache_bench(opt);
  REQUIRE(runs.size() == 4);
  for (const auto& r : runs) {
    CHECK(r.hits + r.misses == opt.queries);
    CHECK(r.lookup_us.size() == opt.queries);
    if (r.capacity == 16) CHECK(r.misses == 0);
    if (r.capacity == 4) CHECK(r.misses > 0);
  }
  std::ostringstream csv;
  write_cache_csv(csv, runs);
  CHECK(line_count(csv.str()) == 1 + 4 * opt.queries);
}

TEST_CASE("latency benchmark accounts for every message") {
  for (auto mode : {BrokerMode::Vanilla, BrokerMode::Ree, BrokerMode::Tee}) {
    CAPTURE(broker_mode_name(mode));
    LatencyOptions opt;
    opt.mode = mode;
    opt.messages = 30;
    opt.subscribers = 2;
    auto r = run_latency_macro(opt);
    CHECK(r.lost == 0);
    CHECK(r.delay_us.size() == 30);
    CHECK(std::all_of(r.delay_us.begin(), r.delay_us.end(), [](double d) { return d >= 0; }));
    CHECK(r.reencrypt_calls == (mode == BrokerMode::Vanilla ? 0u : 60u));
  }
}

TEST_CASE("medtech generator respects the per-publisher cap") {
  MedtechOptions opt;
  opt.broker_binary = MQTTZ_BROKER_BIN;
  opt.publishers = 6;
  opt.duration_s = 4;
  auto rep = run_medtech_workload(opt);
  CHECK(rep.seconds == 4);
  CHECK(rep.sent > 0);
  CHECK(rep.lost == 0);
  CHECK(rep.max_window_bytes <= opt.max_rate_bps);
  CHECK(rep.broker_cpu_percent.size() <= 4);
  std::ostringstream csv;
  write_medtech_csv(csv, rep);
  CHECK(line_count(csv.str()) == 1 + 4 * 6);
}
