// Copyright 2026 The Prosody Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "prosody/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "prosody/corpus.hpp"
#include "prosody/random.hpp"

namespace prosody::eval {

namespace {

void require_aligned(std::span<const double> pred, std::span<const double> ref, const char* op) {
  if (pred.size() != ref.size()) {
    throw MetricError(std::string(op) + ": length mismatch " + std::to_string(pred.size()) + " vs " +
                      std::to_string(ref.size()));
  }
  if (pred.empty()) throw MetricError(std::string(op) + ": empty input");
}

std::string format_optional(const std::optional<double>& v, const char* fmt) {
  if (!v) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, *v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_double(const std::string& text, std::size_t line, const char* field) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw MetricError("line " + std::to_string(line) + ": field '" + field + "' is not a number: '" +
                      text + "'");
  }
}

double log_binomial_pmf_half(std::int64_t n, std::int64_t k) {
  return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0) - static_cast<double>(n) * std::log(2.0);
}

}  // namespace

DurationCategory category_of(std::string_view symbol) {
  if (symbol == kPauseIntra) return DurationCategory::intra_pause;
  if (symbol == kPauseInter) return DurationCategory::inter_pause;
  return DurationCategory::non_pause;
}

std::string_view to_string(DurationCategory category) {
  switch (category) {
    case DurationCategory::non_pause: return "non_pause";
    case DurationCategory::intra_pause: return "intra_pause";
    case DurationCategory::inter_pause: return "inter_pause";
  }
  return "unknown";
}

double mean(std::span<const double> values) {
  if (values.empty()) throw MetricError("mean: empty input");
  double total = 0.0;
  for (double v : values) total += v;
  return total / static_cast<double>(values.size());
}

double mse(std::span<const double> pred, std::span<const double> ref) {
  require_aligned(pred, ref, "mse");
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) total += (pred[i] - ref[i]) * (pred[i] - ref[i]);
  return total / static_cast<double>(pred.size());
}

double mae(std::span<const double> pred, std::span<const double> ref) {
  require_aligned(pred, ref, "mae");
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) total += std::fabs(pred[i] - ref[i]);
  return total / static_cast<double>(pred.size());
}

double r_squared(std::span<const double> pred, std::span<const double> ref) {
  require_aligned(pred, ref, "r_squared");
  const double ref_mean = mean(ref);
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    ss_res += (pred[i] - ref[i]) * (pred[i] - ref[i]);
    ss_tot += (ref[i] - ref_mean) * (ref[i] - ref_mean);
  }
  if (ss_tot == 0.0) throw MetricError("r_squared: reference is constant, R^2 undefined");
  return 1.0 - ss_res / ss_tot;
}

std::size_t MetricsReport::total_count() const {
  std::size_t n = 0;
  for (const auto& c : categories) n += c.count;
  return n;
}

MetricsReport duration_metrics(std::span<const double> pred, std::span<const double> ref,
                               std::span<const std::string> symbols) {
  if (pred.size() != ref.size() || pred.size() != symbols.size()) {
    throw MetricError("duration_metrics: predicted, reference and symbol sequences differ in length");
  }
  std::array<std::vector<double>, kCategoryCount> p, r;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    const auto c = static_cast<std::size_t>(category_of(symbols[i]));
    p[c].push_back(pred[i]);
    r[c].push_back(ref[i]);
  }
  MetricsReport report;
  for (std::size_t c = 0; c < kCategoryCount; ++c) {
    auto& out = report.categories[c];
    out.count = p[c].size();
    if (out.count == 0) continue;
    out.mse = mse(p[c], r[c]);
    if (static_cast<DurationCategory>(c) == DurationCategory::inter_pause && out.count >= 2) {
      try {
        out.r_squared = r_squared(p[c], r[c]);
      } catch (const MetricError&) {
        // constant reference: leave absent
      }
    }
  }
  return report;
}

void DurationRecords::append(const DurationRecords& other) {
  utterance_ids.insert(utterance_ids.end(), other.utterance_ids.begin(), other.utterance_ids.end());
  phoneme_indices.insert(phoneme_indices.end(), other.phoneme_indices.begin(), other.phoneme_indices.end());
  symbols.insert(symbols.end(), other.symbols.begin(), other.symbols.end());
  predicted.insert(predicted.end(), other.predicted.begin(), other.predicted.end());
  reference.insert(reference.end(), other.reference.begin(), other.reference.end());
}

void write_duration_csv(std::ostream& out, const DurationRecords& records) {
  out << "utterance_id,phoneme_index,symbol,pred,ref\n";
  char buf[64];
  for (std::size_t i = 0; i < records.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.6g,%.6g", records.predicted[i], records.reference[i]);
    out << records.utterance_ids[i] << ',' << records.phoneme_indices[i] << ',' << records.symbols[i]
        << ',' << buf << '\n';
  }
}

DurationRecords read_duration_csv(std::istream& in) {
  DurationRecords records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    if (line_no == 1 && line.rfind("utterance_id", 0) == 0) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 5) {
      throw MetricError("line " + std::to_string(line_no) + ": expected 5 fields, got " +
                        std::to_string(cells.size()));
    }
    records.utterance_ids.push_back(cells[0]);
    records.phoneme_indices.push_back(static_cast<std::size_t>(parse_double(cells[1], line_no, "phoneme_index")));
    records.symbols.push_back(cells[2]);
    records.predicted.push_back(parse_double(cells[3], line_no, "pred"));
    records.reference.push_back(parse_double(cells[4], line_no, "ref"));
  }
  return records;
}

void write_metrics_csv(std::ostream& out, const MetricsReport& report) {
  out << "category,count,mse,r_squared\n";
  for (std::size_t c = 0; c < kCategoryCount; ++c) {
    const auto& m = report.categories[c];
    out << to_string(static_cast<DurationCategory>(c)) << ',' << m.count << ','
        << format_optional(m.mse, "%.6f") << ',' << format_optional(m.r_squared, "%.6f") << '\n';
  }
}

void write_metrics_table(std::ostream& out, const MetricsReport& report) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-12s %8s %12s %10s\n", "category", "count", "MSE", "R^2");
  out << buf;
  for (std::size_t c = 0; c < kCategoryCount; ++c) {
    const auto& m = report.categories[c];
    const std::string mse_text = m.mse ? format_optional(m.mse, "%.3f") : "absent";
    const std::string r2_text = m.r_squared ? format_optional(m.r_squared, "%.3f") : "-";
    std::snprintf(buf, sizeof buf, "%-12s %8zu %12s %10s\n",
                  std::string(to_string(static_cast<DurationCategory>(c))).c_str(), m.count,
                  mse_text.c_str(), r2_text.c_str());
    out << buf;
  }
}

void write_comparison_csv(std::ostream& out,
                          std::span<const std::pair<std::string, MetricsReport>> rows) {
  out << "system,non_pause_mse,within_pause_mse,between_pause_mse,between_pause_r2\n";
  for (const auto& [label, r] : rows) {
    out << label << ',' << format_optional(r[DurationCategory::non_pause].mse, "%.4f") << ','
        << format_optional(r[DurationCategory::intra_pause].mse, "%.4f") << ','
        << format_optional(r[DurationCategory::inter_pause].mse, "%.4f") << ','
        << format_optional(r[DurationCategory::inter_pause].r_squared, "%.4f") << '\n';
  }
}

void write_comparison_table(std::ostream& out,
                            std::span<const std::pair<std::string, MetricsReport>> rows) {
  char buf[200];
  std::snprintf(buf, sizeof buf, "%-10s | %12s | %12s %12s %12s\n", "", "non-pauses", "within",
                "between", "between");
  out << buf;
  std::snprintf(buf, sizeof buf, "%-10s | %12s | %12s %12s %12s\n", "system", "MSE", "MSE", "MSE", "R^2");
  out << buf;
  for (const auto& [label, r] : rows) {
    auto cell = [](const std::optional<double>& v, const char* fmt) {
      return v ? format_optional(v, fmt) : std::string("-");
    };
    std::snprintf(buf, sizeof buf, "%-10s | %12s | %12s %12s %12s\n", label.c_str(),
                  cell(r[DurationCategory::non_pause].mse, "%.1f").c_str(),
                  cell(r[DurationCategory::intra_pause].mse, "%.1f").c_str(),
                  cell(r[DurationCategory::inter_pause].mse, "%.1f").c_str(),
                  cell(r[DurationCategory::inter_pause].r_squared, "%.2f").c_str());
    out << buf;
  }
}

std::vector<int> durations_in_category(std::span<const int> durations,
                                       std::span<const std::string> symbols,
                                       DurationCategory category) {
  if (durations.size() != symbols.size()) throw MetricError("durations_in_category: length mismatch");
  std::vector<int> out;
  for (std::size_t i = 0; i < durations.size(); ++i) {
    if (category_of(symbols[i]) == category) out.push_back(durations[i]);
  }
  return out;
}

Histogram pause_histogram(std::span<const int> durations, DurationCategory category, int bin_width) {
  if (bin_width < 1) throw MetricError("pause_histogram: bin width must be >= 1");
  Histogram h;
  h.category = category;
  h.bin_width = bin_width;
  if (durations.empty()) return h;
  auto bin_of = [bin_width](int d) {
    // floor division so negative values land in the right bin
    return (d >= 0 ? d / bin_width : -((-d + bin_width - 1) / bin_width)) * bin_width;
  };
  const auto [lo, hi] = std::minmax_element(durations.begin(), durations.end());
  const int first = bin_of(*lo), last = bin_of(*hi);
  for (int start = first; start <= last; start += bin_width) h.bins.push_back({start, 0});
  for (int d : durations) h.bins[static_cast<std::size_t>((bin_of(d) - first) / bin_width)].count++;
  return h;
}

void write_histogram_csv(std::ostream& out, const Histogram& histogram) {
  out << "category,bin_start,bin_end,count\n";
  for (const auto& b : histogram.bins) {
    out << to_string(histogram.category) << ',' << b.bin_start << ','
        << b.bin_start + histogram.bin_width << ',' << b.count << '\n';
  }
}

PairingUnit pairing_unit_from_string(std::string_view name) {
  if (name == "rating") return PairingUnit::rating;
  if (name == "sample") return PairingUnit::sample;
  if (name == "rater") return PairingUnit::rater;
  throw MetricError("unknown pairing unit '" + std::string(name) + "' (rating|sample|rater)");
}

std::size_t MushraTable::intern(std::vector<std::string>& names, std::map<std::string, std::size_t>& index,
                                const std::string& name) {
  auto [it, inserted] = index.emplace(name, names.size());
  if (inserted) names.push_back(name);
  return it->second;
}

void MushraTable::add(const MushraRating& rating) {
  if (!(rating.score >= 0.0 && rating.score <= 100.0)) {
    throw MetricError("MUSHRA score " + std::to_string(rating.score) + " outside [0, 100]");
  }
  const std::array<std::size_t, 3> key = {intern(raters_, rater_index_, rating.rater),
                                          intern(samples_, sample_index_, rating.sample),
                                          intern(systems_, system_index_, rating.system)};
  if (!ratings_.emplace(key, rating.score).second) {
    throw MetricError("duplicate MUSHRA rating for rater " + rating.rater + ", sample " +
                      rating.sample + ", system " + rating.system);
  }
  insertion_.emplace_back(key[2], rating.score);
}

std::vector<double> MushraTable::scores(const std::string& system) const {
  auto it = system_index_.find(system);
  if (it == system_index_.end()) throw MetricError("unknown system '" + system + "'");
  std::vector<double> out;
  for (const auto& [sys, score] : insertion_) {
    if (sys == it->second) out.push_back(score);
  }
  return out;
}

std::pair<std::vector<double>, std::vector<double>> MushraTable::paired(const std::string& system_a,
                                                                        const std::string& system_b,
                                                                        PairingUnit unit) const {
  auto ia = system_index_.find(system_a);
  auto ib = system_index_.find(system_b);
  if (ia == system_index_.end()) throw MetricError("unknown system '" + system_a + "'");
  if (ib == system_index_.end()) throw MetricError("unknown system '" + system_b + "'");
  const std::size_t nr = raters_.size(), ns = samples_.size();
  auto cell = [&](std::size_t r, std::size_t s, std::size_t sys) {
    auto it = ratings_.find({r, s, sys});
    if (it == ratings_.end()) {
      throw MetricError("MUSHRA table incomplete: no rating by " + raters_[r] + " of sample " +
                        samples_[s] + " for system " + systems_[sys]);
    }
    return it->second;
  };
  std::vector<double> a, b;
  switch (unit) {
    case PairingUnit::rating:
      for (std::size_t r = 0; r < nr; ++r)
        for (std::size_t s = 0; s < ns; ++s) {
          a.push_back(cell(r, s, ia->second));
          b.push_back(cell(r, s, ib->second));
        }
      break;
    case PairingUnit::sample:
      for (std::size_t s = 0; s < ns; ++s) {
        double sa = 0.0, sb = 0.0;
        for (std::size_t r = 0; r < nr; ++r) {
          sa += cell(r, s, ia->second);
          sb += cell(r, s, ib->second);
        }
        a.push_back(sa / static_cast<double>(nr));
        b.push_back(sb / static_cast<double>(nr));
      }
      break;
    case PairingUnit::rater:
      for (std::size_t r = 0; r < nr; ++r) {
        double sa = 0.0, sb = 0.0;
        for (std::size_t s = 0; s < ns; ++s) {
          sa += cell(r, s, ia->second);
          sb += cell(r, s, ib->second);
        }
        a.push_back(sa / static_cast<double>(ns));
        b.push_back(sb / static_cast<double>(ns));
      }
      break;
  }
  return {std::move(a), std::move(b)};
}

MushraTable read_mushra_csv(std::istream& in) {
  MushraTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    if (line_no == 1 && line.rfind("rater", 0) == 0) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 4) {
      throw MetricError("line " + std::to_string(line_no) + ": expected rater,sample,system,score");
    }
    table.add({cells[0], cells[1], cells[2], parse_double(cells[3], line_no, "score")});
  }
  return table;
}

MushraSummary mushra_summary(const MushraTable& table, const std::string& system) {
  const auto values = table.scores(system);
  if (values.empty()) throw MetricError("mushra_summary: no ratings for '" + system + "'");
  MushraSummary s;
  s.count = values.size();
  s.mean = mean(values);
  if (s.count >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    const double sd = std::sqrt(ss / static_cast<double>(s.count - 1));
    s.half_width = 1.96 * sd / std::sqrt(static_cast<double>(s.count));
  }
  return s;
}

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw MetricError("incomplete beta: a and b must be positive");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  // The continued fraction converges fast for x < (a+1)/(a+b+2); use the
  // symmetry I_x(a,b) = 1 - I_{1-x}(b,a) otherwise.
  if (x > (a + 1.0) / (a + b + 2.0)) return 1.0 - regularized_incomplete_beta(b, a, 1.0 - x);

  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                           b * std::log1p(-x);
  constexpr double kTiny = 1e-300;
  constexpr double kEps = 1e-15;
  double c = 1.0;
  double d = 1.0 - (a + b) * x / (a + 1.0);
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double f = d;
  for (int m = 1; m <= 10000; ++m) {
    const double m2 = 2.0 * m;
    double num = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
    d = 1.0 + num * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + num / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    f *= d * c;
    num = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
    d = 1.0 + num * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + num / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    f *= delta;
    if (std::fabs(delta - 1.0) < kEps) break;
  }
  return std::exp(log_front) * f / a;
}

double student_t_two_sided_p(double t, double dof) {
  if (!(dof > 0.0)) throw MetricError("student t: degrees of freedom must be positive");
  if (std::isinf(t)) return 0.0;
  if (std::isnan(t)) throw MetricError("student t: t is NaN");
  return regularized_incomplete_beta(0.5 * dof, 0.5, dof / (dof + t * t));
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw MetricError("paired_t_test: length mismatch");
  if (a.size() < 2) throw MetricError("paired_t_test: need at least two pairs");
  const std::size_t n = a.size();
  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) diff[i] = a[i] - b[i];
  TTestResult result;
  result.degrees_of_freedom = n - 1;
  result.mean_difference = mean(diff);
  double ss = 0.0;
  for (double d : diff) ss += (d - result.mean_difference) * (d - result.mean_difference);
  if (ss == 0.0) {
    if (result.mean_difference == 0.0) throw DegenerateTestError();
    result.t_statistic = std::copysign(std::numeric_limits<double>::infinity(), result.mean_difference);
    result.p_value = 0.0;
    return result;
  }
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  result.t_statistic = result.mean_difference / (sd / std::sqrt(static_cast<double>(n)));
  result.p_value = student_t_two_sided_p(result.t_statistic, static_cast<double>(n - 1));
  return result;
}

double gap_reduction(double system1, double system2, double reference) {
  if (reference == system2) {
    throw MetricError("gap_reduction: reference equals system 2, gap is undefined");
  }
  return 100.0 * (system1 - system2) / (reference - system2);
}

double preference_test(std::int64_t prefer_a, std::int64_t prefer_b) {
  if (prefer_a < 0 || prefer_b < 0 || prefer_a + prefer_b < 1) {
    throw MetricError("preference_test: need non-negative counts with at least one vote");
  }
  const std::int64_t n = prefer_a + prefer_b;
  const std::int64_t k = std::min(prefer_a, prefer_b);
  // log-sum-exp of the lower tail P(X <= k)
  double peak = -std::numeric_limits<double>::infinity();
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(k + 1));
  for (std::int64_t i = 0; i <= k; ++i) {
    terms.push_back(log_binomial_pmf_half(n, i));
    peak = std::max(peak, terms.back());
  }
  double total = 0.0;
  for (double t : terms) total += std::exp(t - peak);
  const double tail = std::exp(peak) * total;
  return std::min(1.0, 2.0 * tail);
}

MushraTable synthetic_mushra_table(const SyntheticMushraSpec& spec) {
  Rng rng(spec.seed);
  MushraTable table;
  std::vector<double> rater_offset(spec.raters);
  for (auto& o : rater_offset) o = rng.normal(0.0, spec.rater_stddev);
  for (std::size_t r = 0; r < spec.raters; ++r) {
    for (std::size_t s = 0; s < spec.samples; ++s) {
      for (const auto& [system, mu] : spec.system_means) {
        const double score = std::clamp(mu + rater_offset[r] + rng.normal(0.0, spec.noise_stddev), 0.0, 100.0);
        table.add({"r" + std::to_string(r), "s" + std::to_string(s), system, score});
      }
    }
  }
  return table;
}

}  // namespace prosody::eval
