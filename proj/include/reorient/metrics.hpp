// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "reorient/rng.hpp"

namespace reorient::metrics {

// ---------------------------------------------------------------------------
// Episode records

enum class Outcome { kSuccess, kOrientationError, kTimeOut, kObjectFalls };

std::string outcome_name(Outcome outcome);
Outcome outcome_from_name(const std::string& name);

struct EpisodeRecord {
  std::string object;
  double final_error = 0.0;       // rad
  double elapsed_time = 0.0;      // s
  Outcome outcome = Outcome::kTimeOut;
  double initial_distance = 0.0;  // rad

  void validate() const;  // error in [0, pi]
};

void save_records_jsonl(const std::vector<EpisodeRecord>& records,
                        const std::string& path);
std::vector<EpisodeRecord> load_records_jsonl(const std::string& path);

// ---------------------------------------------------------------------------
// Distribution statistics

// Right-continuous empirical CDF.
class Ecdf {
 public:
  explicit Ecdf(std::vector<double> values);

  double operator()(double x) const;  // fraction of values <= x
  const std::vector<double>& support() const { return support_; }
  const std::vector<double>& cumulative() const { return cumulative_; }

 private:
  std::vector<double> support_;     // sorted unique values
  std::vector<double> cumulative_;  // fraction <= support_[i]
};

double success_rate(const std::vector<double>& errors, double threshold);

double quantile(std::vector<double> values, double q);
double median(std::vector<double> values);

// Standard normal CDF and its inverse (Acklam's rational approximation).
double normal_cdf(double x);
double normal_quantile(double p);

using Statistic = std::function<double(const std::vector<double>&)>;

struct BcaInterval {
  double low = 0.0;
  double high = 0.0;
  bool percentile_fallback = false;  // degenerate jackknife variance
};

// Bias-corrected and accelerated bootstrap confidence interval.
BcaInterval bca_ci(const std::vector<double>& sample,
                   const Statistic& statistic, double level, int n_boot,
                   Rng& rng);

// ---------------------------------------------------------------------------
// Reports

struct GroupSummary {
  std::string object;  // "pooled" for the aggregate row
  int episodes = 0;
  std::map<std::string, double> outcome_fractions;
  double success_rate_04 = 0.0;
  BcaInterval success_ci_04;
  double success_rate_08 = 0.0;
  BcaInterval success_ci_08;
  double median_error = 0.0;
  BcaInterval median_error_ci;
  double error_q25 = 0.0, error_q50 = 0.0, error_q75 = 0.0;
  double time_q25 = 0.0, time_q50 = 0.0, time_q75 = 0.0;
};

struct SummaryConfig {
  double threshold_low = 0.4;   // rad
  double threshold_high = 0.8;  // rad
  double level = 0.95;
  int n_boot = 2000;
  std::uint64_t seed = 1;
};

struct Report {
  std::vector<GroupSummary> per_object;
  GroupSummary pooled;
};

Report summarize(const std::vector<EpisodeRecord>& records,
                 const SummaryConfig& config);

void save_report_csv(const Report& report, const std::string& path);
nlohmann::json report_to_json(const Report& report);

// Simple polyline ECDF rendering.
void save_ecdf_svg(const Ecdf& ecdf, const std::string& path, int width = 480,
                   int height = 320);

}  // namespace reorient::metrics
