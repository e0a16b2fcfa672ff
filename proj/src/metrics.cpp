// SPDX-License-Identifier: Apache-2.0
#include "reorient/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "reorient/io.hpp"

namespace reorient::metrics {

std::string outcome_name(Outcome outcome) {
  switch (outcome) {
    case Outcome::kSuccess: return "Success";
    case Outcome::kOrientationError: return "OrientationError";
    case Outcome::kTimeOut: return "TimeOut";
    case Outcome::kObjectFalls: return "ObjectFalls";
  }
  return "TimeOut";
}

Outcome outcome_from_name(const std::string& name) {
  if (name == "Success") return Outcome::kSuccess;
  if (name == "OrientationError") return Outcome::kOrientationError;
  if (name == "TimeOut") return Outcome::kTimeOut;
  if (name == "ObjectFalls") return Outcome::kObjectFalls;
  throw std::invalid_argument("unknown outcome: " + name);
}

void EpisodeRecord::validate() const {
  if (final_error < 0.0 || final_error > M_PI + 1e-9) {
    throw std::invalid_argument("EpisodeRecord: error outside [0, pi]");
  }
  if (elapsed_time < 0.0) {
    throw std::invalid_argument("EpisodeRecord: negative elapsed time");
  }
}

void save_records_jsonl(const std::vector<EpisodeRecord>& records,
                        const std::string& path) {
  io::JsonlWriter writer(path);
  for (const auto& r : records) {
    writer.write({{"object", r.object},
                  {"final_error", r.final_error},
                  {"elapsed_time", r.elapsed_time},
                  {"outcome", outcome_name(r.outcome)},
                  {"initial_distance", r.initial_distance}});
  }
}

std::vector<EpisodeRecord> load_records_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_records_jsonl: cannot open " + path);
  std::vector<EpisodeRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    EpisodeRecord r;
    r.object = j.at("object").get<std::string>();
    r.final_error = j.at("final_error").get<double>();
    r.elapsed_time = j.at("elapsed_time").get<double>();
    r.outcome = outcome_from_name(j.at("outcome").get<std::string>());
    r.initial_distance = j.at("initial_distance").get<double>();
    r.validate();
    records.push_back(r);
  }
  return records;
}

Ecdf::Ecdf(std::vector<double> values) {
  if (values.empty()) {
    throw std::invalid_argument("Ecdf: empty sample");
  }
  std::sort(values.begin(), values.end());
  const double n = double(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i + 1 < values.size() && values[i + 1] == values[i]) continue;
    support_.push_back(values[i]);
    cumulative_.push_back(double(i + 1) / n);
  }
}

double Ecdf::operator()(double x) const {
  const auto it = std::upper_bound(support_.begin(), support_.end(), x);
  if (it == support_.begin()) return 0.0;
  return cumulative_[std::size_t(it - support_.begin()) - 1];
}

double success_rate(const std::vector<double>& errors, double threshold) {
  if (errors.empty()) {
    throw std::invalid_argument("success_rate: empty sample");
  }
  if (!(threshold > 0.0)) {
    throw std::invalid_argument("success_rate: threshold must be positive");
  }
  std::size_t hits = 0;
  for (double e : errors) {
    if (e <= threshold) ++hits;
  }
  return double(hits) / double(errors.size());
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile: empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * double(values.size() - 1);
  const std::size_t lo = std::size_t(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double alpha = pos - double(lo);
  return values[lo] + alpha * (values[hi] - values[lo]);
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
  // Acklam's rational approximation, |relative error| < 1.15e-9.
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("normal_quantile: p must be in (0, 1)");
  }
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double p_low = 0.02425;
  double q, r;
  if (p < p_low) {
    q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p <= 1.0 - p_low) {
    q = p - 0.5;
    r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
           q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  q = std::sqrt(-2.0 * std::log(1.0 - p));
  return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
         ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
}

BcaInterval bca_ci(const std::vector<double>& sample,
                   const Statistic& statistic, double level, int n_boot,
                   Rng& rng) {
  if (sample.size() < 2) {
    throw std::invalid_argument("bca_ci: need at least two observations");
  }
  if (!(level > 0.0 && level < 1.0)) {
    throw std::invalid_argument("bca_ci: level must be in (0, 1)");
  }
  if (n_boot < 2) throw std::invalid_argument("bca_ci: n_boot too small");

  const std::size_t n = sample.size();
  const double theta_hat = statistic(sample);

  std::vector<double> boot(n_boot);
  std::vector<double> resample(n);
  for (int b = 0; b < n_boot; ++b) {
    for (std::size_t i = 0; i < n; ++i) {
      resample[i] = sample[rng.uniform_index(n)];
    }
    boot[b] = statistic(resample);
  }
  std::sort(boot.begin(), boot.end());

  // Degenerate bootstrap distribution: nothing to correct.
  if (boot.front() == boot.back()) {
    return {boot.front(), boot.back(), false};
  }

  // Bias correction.
  std::size_t below = 0;
  for (double v : boot) {
    if (v < theta_hat) ++below;
  }
  double proportion = double(below) / double(n_boot);
  proportion = std::clamp(proportion, 1.0 / (n_boot + 1.0),
                          double(n_boot) / (n_boot + 1.0));
  const double z0 = normal_quantile(proportion);

  // Acceleration from the jackknife.
  std::vector<double> jackknife(n);
  std::vector<double> loo(sample.begin() + 1, sample.end());
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) loo[i - 1] = sample[i - 1];
    jackknife[i] = statistic(loo);
  }
  double jack_mean = 0.0;
  for (double v : jackknife) jack_mean += v;
  jack_mean /= double(n);
  double sum_sq = 0.0, sum_cu = 0.0;
  for (double v : jackknife) {
    const double d = jack_mean - v;
    sum_sq += d * d;
    sum_cu += d * d * d;
  }

  const auto percentile_endpoint = [&](double alpha) {
    const double pos = alpha * (n_boot - 1);
    const std::size_t lo = std::size_t(std::clamp(std::floor(pos), 0.0,
                                                  double(n_boot - 1)));
    const std::size_t hi = std::min(lo + 1, std::size_t(n_boot - 1));
    const double frac = pos - double(lo);
    return boot[lo] + frac * (boot[hi] - boot[lo]);
  };

  const double alpha = 1.0 - level;
  BcaInterval out;
  if (sum_sq <= 1e-300) {
    // Jackknife variance collapsed; fall back to the percentile interval.
    out.percentile_fallback = true;
    out.low = percentile_endpoint(alpha / 2.0);
    out.high = percentile_endpoint(1.0 - alpha / 2.0);
    return out;
  }
  const double accel = sum_cu / (6.0 * std::pow(sum_sq, 1.5));

  const auto adjusted = [&](double a) {
    const double z = normal_quantile(a);
    const double num = z0 + z;
    const double q = normal_cdf(z0 + num / (1.0 - accel * num));
    return std::clamp(q, 0.0, 1.0);
  };
  out.low = percentile_endpoint(adjusted(alpha / 2.0));
  out.high = percentile_endpoint(adjusted(1.0 - alpha / 2.0));
  if (out.low > out.high) std::swap(out.low, out.high);
  return out;
}

namespace {

GroupSummary summarize_group(const std::string& name,
                             const std::vector<EpisodeRecord>& records,
                             const SummaryConfig& config, Rng& rng) {
  GroupSummary summary;
  summary.object = name;
  summary.episodes = int(records.size());

  std::vector<double> errors, times;
  errors.reserve(records.size());
  times.reserve(records.size());
  std::map<std::string, int> outcome_counts = {
      {outcome_name(Outcome::kSuccess), 0},
      {outcome_name(Outcome::kOrientationError), 0},
      {outcome_name(Outcome::kTimeOut), 0},
      {outcome_name(Outcome::kObjectFalls), 0}};
  for (const auto& r : records) {
    errors.push_back(r.final_error);
    times.push_back(r.elapsed_time);
    ++outcome_counts[outcome_name(r.outcome)];
  }
  for (const auto& [key, count] : outcome_counts) {
    summary.outcome_fractions[key] = double(count) / double(records.size());
  }

  summary.success_rate_04 = success_rate(errors, config.threshold_low);
  summary.success_rate_08 = success_rate(errors, config.threshold_high);
  summary.median_error = median(errors);
  summary.error_q25 = quantile(errors, 0.25);
  summary.error_q50 = quantile(errors, 0.50);
  summary.error_q75 = quantile(errors, 0.75);
  summary.time_q25 = quantile(times, 0.25);
  summary.time_q50 = quantile(times, 0.50);
  summary.time_q75 = quantile(times, 0.75);

  if (records.size() >= 2) {
    const auto rate_low = [&](const std::vector<double>& v) {
      return success_rate(v, config.threshold_low);
    };
    const auto rate_high = [&](const std::vector<double>& v) {
      return success_rate(v, config.threshold_high);
    };
    const auto med = [](const std::vector<double>& v) {
      return median(v);
    };
    summary.success_ci_04 = bca_ci(errors, rate_low, config.level,
                                   config.n_boot, rng);
    summary.success_ci_08 = bca_ci(errors, rate_high, config.level,
                                   config.n_boot, rng);
    summary.median_error_ci = bca_ci(errors, med, config.level, config.n_boot,
                                     rng);
  } else {
    summary.success_ci_04 = {summary.success_rate_04, summary.success_rate_04,
                             true};
    summary.success_ci_08 = {summary.success_rate_08, summary.success_rate_08,
                             true};
    summary.median_error_ci = {summary.median_error, summary.median_error,
                               true};
  }
  return summary;
}

}  // namespace

Report summarize(const std::vector<EpisodeRecord>& records,
                 const SummaryConfig& config) {
  if (records.empty()) {
    throw std::invalid_argument("summarize: empty record list");
  }
  for (const auto& r : records) r.validate();

  Rng rng(config.seed);
  Report report;
  report.pooled = summarize_group("pooled", records, config, rng);

  std::set<std::string> names;
  for (const auto& r : records) names.insert(r.object);
  for (const auto& name : names) {
    std::vector<EpisodeRecord> group;
    for (const auto& r : records) {
      if (r.object == name) group.push_back(r);
    }
    report.per_object.push_back(summarize_group(name, group, config, rng));
  }
  return report;
}

namespace {

std::vector<double> summary_row(const GroupSummary& s) {
  return {double(s.episodes),
          s.outcome_fractions.at("Success"),
          s.outcome_fractions.at("OrientationError"),
          s.outcome_fractions.at("TimeOut"),
          s.outcome_fractions.at("ObjectFalls"),
          s.success_rate_04,
          s.success_ci_04.low,
          s.success_ci_04.high,
          s.success_rate_08,
          s.success_ci_08.low,
          s.success_ci_08.high,
          s.median_error,
          s.median_error_ci.low,
          s.median_error_ci.high,
          s.error_q25,
          s.error_q50,
          s.error_q75,
          s.time_q25,
          s.time_q50,
          s.time_q75};
}

}  // namespace

void save_report_csv(const Report& report, const std::string& path) {
  io::CsvWriter csv(
      path, {"object",          "episodes",        "frac_success",
             "frac_orientation", "frac_timeout",   "frac_falls",
             "success_04",      "success_04_lo",   "success_04_hi",
             "success_08",      "success_08_lo",   "success_08_hi",
             "median_error",    "median_error_lo", "median_error_hi",
             "error_q25",       "error_q50",       "error_q75",
             "time_q25",        "time_q50",        "time_q75"});
  const auto write_group = [&](const GroupSummary& s) {
    std::vector<std::string> cells = {s.object};
    for (double v : summary_row(s)) cells.push_back(io::format_double(v));
    csv.row(cells);
  };
  write_group(report.pooled);
  for (const auto& s : report.per_object) write_group(s);
}

nlohmann::json report_to_json(const Report& report) {
  const auto group_json = [](const GroupSummary& s) {
    return nlohmann::json{
        {"object", s.object},
        {"episodes", s.episodes},
        {"outcome_fractions", s.outcome_fractions},
        {"success_rate_0.4", s.success_rate_04},
        {"success_ci_0.4", {s.success_ci_04.low, s.success_ci_04.high}},
        {"success_rate_0.8", s.success_rate_08},
        {"success_ci_0.8", {s.success_ci_08.low, s.success_ci_08.high}},
        {"median_error", s.median_error},
        {"median_error_ci",
         {s.median_error_ci.low, s.median_error_ci.high}},
        {"error_quantiles", {s.error_q25, s.error_q50, s.error_q75}},
        {"time_quantiles", {s.time_q25, s.time_q50, s.time_q75}}};
  };
  nlohmann::json j;
  j["pooled"] = group_json(report.pooled);
  j["per_object"] = nlohmann::json::array();
  for (const auto& s : report.per_object) j["per_object"].push_back(group_json(s));
  return j;
}

void save_ecdf_svg(const Ecdf& ecdf, const std::string& path, int width,
                   int height) {
  const auto& support = ecdf.support();
  const auto& cumulative = ecdf.cumulative();
  const double x_min = support.front();
  const double x_max = support.back();
  const double span = std::max(x_max - x_min, 1e-12);
  const int margin = 30;
  const auto map_x = [&](double x) {
    return margin + (x - x_min) / span * (width - 2 * margin);
  };
  const auto map_y = [&](double f) {
    return height - margin - f * (height - 2 * margin);
  };

  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_ecdf_svg: cannot write " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\""
      << width - margin << "\" y2=\"" << height - margin
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin
      << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
  out << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" "
         "points=\"";
  double prev_f = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i) {
    out << map_x(support[i]) << "," << map_y(prev_f) << " ";
    out << map_x(support[i]) << "," << map_y(cumulative[i]) << " ";
    prev_f = cumulative[i];
  }
  out << map_x(x_max) << "," << map_y(1.0);
  out << "\"/>\n</svg>\n";
}

}  // namespace reorient::metrics
