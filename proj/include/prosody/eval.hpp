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

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace prosody::eval {

class MetricError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// The paired differences are all exactly zero: t is 0/0.
class DegenerateTestError : public MetricError {
 public:
  DegenerateTestError() : MetricError("paired t-test: no difference (all differences are zero)") {}
};

// ---- Objective duration metrics -------------------------------------------

enum class DurationCategory { non_pause, intra_pause, inter_pause };
inline constexpr std::size_t kCategoryCount = 3;

DurationCategory category_of(std::string_view symbol);
std::string_view to_string(DurationCategory category);

double mean(std::span<const double> values);
double mse(std::span<const double> pred, std::span<const double> ref);
double mae(std::span<const double> pred, std::span<const double> ref);
// 1 - SS_res / SS_tot. Negative when worse than predicting mean(ref).
double r_squared(std::span<const double> pred, std::span<const double> ref);

struct CategoryMetrics {
  std::size_t count = 0;
  std::optional<double> mse;        // absent for an empty bucket
  std::optional<double> r_squared;  // inter-sentence pauses only
};

struct MetricsReport {
  std::array<CategoryMetrics, kCategoryCount> categories;

  const CategoryMetrics& operator[](DurationCategory c) const {
    return categories[static_cast<std::size_t>(c)];
  }
  std::size_t total_count() const;
};

MetricsReport duration_metrics(std::span<const double> pred, std::span<const double> ref,
                               std::span<const std::string> symbols);

// Per-phoneme rows as exchanged between synthesis and evaluation.
struct DurationRecords {
  std::vector<std::string> utterance_ids;
  std::vector<std::size_t> phoneme_indices;
  std::vector<std::string> symbols;
  std::vector<double> predicted;
  std::vector<double> reference;

  std::size_t size() const { return symbols.size(); }
  void append(const DurationRecords& other);
};

// utterance_id,phoneme_index,symbol,pred,ref
void write_duration_csv(std::ostream& out, const DurationRecords& records);
DurationRecords read_duration_csv(std::istream& in);

void write_metrics_csv(std::ostream& out, const MetricsReport& report);
void write_metrics_table(std::ostream& out, const MetricsReport& report);

// Rows of (system label, report) laid out as non-pause MSE, within-sentence
// pause MSE, between-sentence pause MSE and between-sentence R^2.
void write_comparison_csv(std::ostream& out,
                          std::span<const std::pair<std::string, MetricsReport>> rows);
void write_comparison_table(std::ostream& out,
                            std::span<const std::pair<std::string, MetricsReport>> rows);

// ---- Pause distributions ----------------------------------------------------

struct HistogramBin {
  int bin_start = 0;
  std::size_t count = 0;
  bool operator==(const HistogramBin&) const = default;
};

struct Histogram {
  DurationCategory category = DurationCategory::inter_pause;
  int bin_width = 1;
  std::vector<HistogramBin> bins;  // contiguous from the lowest to the highest occupied bin
};

std::vector<int> durations_in_category(std::span<const int> durations,
                                       std::span<const std::string> symbols,
                                       DurationCategory category);

// `durations` are the values of one category; bin_width must be >= 1.
Histogram pause_histogram(std::span<const int> durations, DurationCategory category, int bin_width);
void write_histogram_csv(std::ostream& out, const Histogram& histogram);

// ---- Listening tests --------------------------------------------------------

enum class PairingUnit { rating, sample, rater };
PairingUnit pairing_unit_from_string(std::string_view name);

struct MushraRating {
  std::string rater;
  std::string sample;
  std::string system;
  double score = 0.0;
};

// Scores indexed [rater x sample x system], each in [0, 100].
class MushraTable {
 public:
  void add(const MushraRating& rating);

  const std::vector<std::string>& raters() const { return raters_; }
  const std::vector<std::string>& samples() const { return samples_; }
  const std::vector<std::string>& systems() const { return systems_; }
  std::size_t rating_count() const { return ratings_.size(); }

  // All ratings of one system in insertion order.
  std::vector<double> scores(const std::string& system) const;
  // Aligned score vectors for two systems, averaged per pairing unit.
  // Throws MetricError if any (rater, sample) cell is missing for either.
  std::pair<std::vector<double>, std::vector<double>> paired(const std::string& system_a,
                                                             const std::string& system_b,
                                                             PairingUnit unit) const;

 private:
  static std::size_t intern(std::vector<std::string>& names, std::map<std::string, std::size_t>& index,
                            const std::string& name);

  std::vector<std::string> raters_, samples_, systems_;
  std::map<std::string, std::size_t> rater_index_, sample_index_, system_index_;
  // (rater, sample, system) -> score
  std::map<std::array<std::size_t, 3>, double> ratings_;
  std::vector<std::pair<std::size_t, double>> insertion_;
};

// rater,sample,system,score with a header row.
MushraTable read_mushra_csv(std::istream& in);

struct MushraSummary {
  double mean = 0.0;
  // 1.96 * sample standard deviation / sqrt(count): a normal-approximation
  // 95% confidence half-width over all ratings of the system.
  double half_width = 0.0;
  std::size_t count = 0;
};

inline constexpr std::string_view kHalfWidthDefinition =
    "+/- is the 95% normal-approximation confidence half-width (1.96 * SE) over all ratings";

MushraSummary mushra_summary(const MushraTable& table, const std::string& system);

struct TTestResult {
  double t_statistic = 0.0;
  double p_value = 1.0;  // two-sided
  std::size_t degrees_of_freedom = 0;
  double mean_difference = 0.0;
};

// Paired t-test on a - b. Zero-variance non-zero differences give an
// infinite t and p = 0; all-zero differences throw DegenerateTestError.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

// I_x(a, b) via Lentz's continued fraction.
double regularized_incomplete_beta(double a, double b, double x);
// P(|T| >= |t|) for Student's t with `dof` degrees of freedom.
double student_t_two_sided_p(double t, double dof);

// 100 * (s1 - s2) / (ref - s2). Throws when ref == s2.
double gap_reduction(double system1, double system2, double reference);

// Exact two-sided binomial sign test of prefer_a vs prefer_b against p = 0.5.
double preference_test(std::int64_t prefer_a, std::int64_t prefer_b);

// Seeded synthetic MUSHRA ratings for exercising the pipeline. Each score is
// clamp(system_mean + rater_offset + noise, 0, 100).
struct SyntheticMushraSpec {
  std::size_t raters = 24;
  std::size_t samples = 50;
  std::vector<std::pair<std::string, double>> system_means;
  double rater_stddev = 5.0;
  double noise_stddev = 8.0;
  std::uint64_t seed = 1;
};
MushraTable synthetic_mushra_table(const SyntheticMushraSpec& spec);

}  // namespace prosody::eval
