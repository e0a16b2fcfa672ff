#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "reorient/metrics.hpp"

using namespace reorient;
using namespace reorient::metrics;

TEST_SUITE_BEGIN("metrics");

TEST_CASE("ecdf counts correctly") {
  Ecdf ecdf({0.1, 0.1, 0.3});
  CHECK(ecdf(0.1) == doctest::Approx(2.0 / 3.0));
  CHECK(ecdf(0.3) == doctest::Approx(1.0));
  CHECK(ecdf(0.05) == 0.0);
  CHECK(ecdf(0.2) == doctest::Approx(2.0 / 3.0));  // right continuity
  CHECK(ecdf(1.0) == doctest::Approx(1.0));        // F(max) = 1
  CHECK_THROWS_AS(Ecdf({}), std::invalid_argument);
}

TEST_CASE("ecdf matches the counting oracle on random data") {
  Rng rng(5001);
  std::vector<double> values(500);
  for (auto& v : values) v = rng.uniform(0.0, M_PI);
  Ecdf ecdf(values);
  for (int i = 0; i < 100; ++i) {
    const double x = rng.uniform(-0.5, M_PI + 0.5);
    int count = 0;
    for (double v : values) {
      if (v <= x) ++count;
    }
    CHECK(ecdf(x) == doctest::Approx(double(count) / values.size()));
  }
  // Monotone, bounded.
  double prev = -1.0;
  for (double x = -0.1; x < M_PI + 0.2; x += 0.01) {
    const double f = ecdf(x);
    CHECK(f >= prev);
    CHECK(f >= 0.0);
    CHECK(f <= 1.0);
    prev = f;
  }
}

TEST_CASE("success_rate counts inclusively") {
  CHECK(success_rate({0.1, 0.5, 0.3}, 0.4) == doctest::Approx(2.0 / 3.0));
  CHECK(success_rate({0.0, 0.0}, 0.4) == 1.0);
  CHECK(success_rate({0.1, 0.9, 2.0}, M_PI) == 1.0);
  CHECK(success_rate({0.4}, 0.4) == 1.0);  // threshold inclusive
  CHECK_THROWS_AS(success_rate({}, 0.4), std::invalid_argument);
}

TEST_CASE("normal quantile inverts the cdf") {
  for (double p : {0.001, 0.025, 0.2, 0.5, 0.8, 0.975, 0.999}) {
    CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-8));
  }
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0).scale(1.0));
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959964).epsilon(1e-5));
}

TEST_CASE("bca interval on a constant sample is degenerate") {
  Rng rng(5002);
  const auto interval =
      bca_ci({2.5, 2.5, 2.5, 2.5, 2.5}, [](const std::vector<double>& v) {
        return metrics::median(v);
      }, 0.95, 200, rng);
  CHECK(interval.low == 2.5);
  CHECK(interval.high == 2.5);
}

TEST_CASE("bca approximates the percentile interval for symmetric data") {
  // Symmetric sample + mean statistic: z0 ~ 0 and accel ~ 0, so BCa and
  // percentile endpoints agree within Monte-Carlo noise.
  Rng rng(5003);
  std::vector<double> sample(200);
  for (auto& v : sample) v = rng.normal();
  const Statistic mean_stat = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / double(v.size());
  };
  Rng boot_a(77), boot_b(77);
  const auto bca = bca_ci(sample, mean_stat, 0.95, 4000, boot_a);

  // Percentile endpoints from an identical bootstrap stream.
  std::vector<double> boot(4000);
  std::vector<double> resample(sample.size());
  for (int b = 0; b < 4000; ++b) {
    for (auto& v : resample) v = sample[boot_b.uniform_index(sample.size())];
    boot[b] = mean_stat(resample);
  }
  std::sort(boot.begin(), boot.end());
  const double lo = boot[std::size_t(0.025 * 3999)];
  const double hi = boot[std::size_t(0.975 * 3999)];
  const double sd = 1.0 / std::sqrt(double(sample.size()));
  CHECK(std::abs(bca.low - lo) <= 0.15 * sd);
  CHECK(std::abs(bca.high - hi) <= 0.15 * sd);
  CHECK(bca.low < bca.high);
}

TEST_CASE("bca endpoints stay within the bootstrap range") {
  Rng rng(5004);
  std::vector<double> sample(60);
  for (auto& v : sample) v = std::abs(rng.normal()) + 0.1;
  Rng boot_rng(5005);
  const auto interval = bca_ci(
      sample, [](const std::vector<double>& v) { return metrics::median(v); },
      0.95, 500, boot_rng);
  double lo = 1e18, hi = -1e18;
  for (double v : sample) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(interval.low >= lo);
  CHECK(interval.high <= hi);
  CHECK(interval.low <= interval.high);
  CHECK_THROWS_AS(bca_ci({1.0},
                         [](const std::vector<double>& v) { return v[0]; },
                         0.95, 100, boot_rng),
                  std::invalid_argument);
}

namespace {

std::vector<EpisodeRecord> fixture_records() {
  // Hand-built set: object "a" 3 episodes, object "b" 2 episodes.
  std::vector<EpisodeRecord> records;
  records.push_back({"a", 0.1, 3.0, Outcome::kSuccess, 1.0});
  records.push_back({"a", 0.5, 15.0, Outcome::kTimeOut, 2.0});
  records.push_back({"a", 0.3, 5.0, Outcome::kSuccess, 1.5});
  records.push_back({"b", 0.9, 15.0, Outcome::kOrientationError, 2.5});
  records.push_back({"b", 0.2, 4.0, Outcome::kSuccess, 0.8});
  return records;
}

}  // namespace

TEST_CASE("summarize matches the hand-computed fixture") {
  SummaryConfig config;
  config.n_boot = 200;
  const auto report = summarize(fixture_records(), config);

  CHECK(report.pooled.episodes == 5);
  // errors: 0.1, 0.5, 0.3, 0.9, 0.2 -> <=0.4: 3/5; <=0.8: 4/5.
  CHECK(report.pooled.success_rate_04 == doctest::Approx(0.6));
  CHECK(report.pooled.success_rate_08 == doctest::Approx(0.8));
  CHECK(report.pooled.median_error == doctest::Approx(0.3));
  CHECK(report.pooled.outcome_fractions.at("Success") == doctest::Approx(0.6));
  CHECK(report.pooled.outcome_fractions.at("TimeOut") == doctest::Approx(0.2));

  // Outcome fractions sum to one exactly.
  double total = 0.0;
  for (const auto& [name, fraction] : report.pooled.outcome_fractions) {
    total += fraction;
  }
  CHECK(total == 1.0);

  REQUIRE(report.per_object.size() == 2);
  const auto& a = report.per_object[0];
  CHECK(a.object == "a");
  CHECK(a.episodes == 3);
  CHECK(a.success_rate_04 == doctest::Approx(2.0 / 3.0));

  // Pooled success rate equals the record-weighted mean of per-object rates.
  double weighted = 0.0;
  for (const auto& group : report.per_object) {
    weighted += group.success_rate_04 * group.episodes;
  }
  CHECK(report.pooled.success_rate_04 ==
        doctest::Approx(weighted / report.pooled.episodes));
}

TEST_CASE("summarize is permutation invariant") {
  SummaryConfig config;
  config.n_boot = 100;
  auto records = fixture_records();
  const auto report_a = summarize(records, config);
  std::reverse(records.begin(), records.end());
  const auto report_b = summarize(records, config);
  CHECK(report_a.pooled.success_rate_04 == report_b.pooled.success_rate_04);
  CHECK(report_a.pooled.median_error == report_b.pooled.median_error);
  CHECK(report_a.pooled.median_error_ci.low ==
        report_b.pooled.median_error_ci.low);
}

TEST_CASE("episode records round trip through jsonl") {
  const auto records = fixture_records();
  save_records_jsonl(records, "records_test.jsonl");
  const auto loaded = load_records_jsonl("records_test.jsonl");
  REQUIRE(loaded.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(loaded[i].object == records[i].object);
    CHECK(loaded[i].final_error == records[i].final_error);
    CHECK(loaded[i].outcome == records[i].outcome);
  }
  std::remove("records_test.jsonl");

  EpisodeRecord bad{"x", 4.0, 1.0, Outcome::kSuccess, 0.0};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("report csv and svg are written") {
  SummaryConfig config;
  config.n_boot = 100;
  const auto report = summarize(fixture_records(), config);
  save_report_csv(report, "report_test.csv");
  std::ifstream in("report_test.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header.find("success_04") != std::string::npos);
  int rows = 0;
  std::string line;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 3);  // pooled + 2 objects
  std::remove("report_test.csv");

  Ecdf ecdf({0.1, 0.2, 0.2, 0.5, 0.9});
  save_ecdf_svg(ecdf, "ecdf_test.svg");
  std::ifstream svg("ecdf_test.svg");
  std::string content((std::istreambuf_iterator<char>(svg)),
                      std::istreambuf_iterator<char>());
  CHECK(content.find("polyline") != std::string::npos);
  std::remove("ecdf_test.svg");

  const auto j = report_to_json(report);
  CHECK(j.at("pooled").at("episodes") == 5);
}

TEST_SUITE_END();
