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


#include <cmath>
#include <sstream>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <gtest/gtest.h>

#include "prosody/eval.hpp"
#include "prosody/random.hpp"

namespace prosody::eval {
namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

TEST(Metrics, SmallExamples) {
  const std::vector<double> ref{1, 2, 3};
  const std::vector<double> pred{1, 2, 4};
  EXPECT_NEAR(mse(pred, ref), 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(mae(pred, ref), 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(r_squared(pred, ref), 0.5, 1e-12);
  const std::vector<double> mean_pred{2, 2, 2};
  EXPECT_NEAR(r_squared(mean_pred, ref), 0.0, 1e-12);
  EXPECT_EQ(r_squared(ref, ref), 1.0);
  const std::vector<double> flat{4, 4, 4};
  EXPECT_THROW(r_squared(pred, flat), MetricError);
  EXPECT_THROW(mse(std::vector<double>{}, std::vector<double>{}), MetricError);
  EXPECT_THROW(mse(pred, std::vector<double>{1, 2}), MetricError);
}

TEST(Metrics, CategoryOfSymbols) {
  EXPECT_EQ(category_of("AH"), DurationCategory::non_pause);
  EXPECT_EQ(category_of("PAU_INTRA"), DurationCategory::intra_pause);
  EXPECT_EQ(category_of("PAU_INTER"), DurationCategory::inter_pause);
}

TEST(Metrics, DurationMetricsByCategory) {
  const std::vector<std::string> sym{"A", "PAU_INTRA", "B", "PAU_INTER", "C", "PAU_INTER"};
  const std::vector<double> ref{5, 10, 7, 40, 3, 60};
  const std::vector<double> pred{6, 10, 5, 50, 3, 50};
  const auto r = duration_metrics(pred, ref, sym);
  EXPECT_EQ(r.total_count(), 6u);
  EXPECT_EQ(r[DurationCategory::non_pause].count, 3u);
  EXPECT_NEAR(*r[DurationCategory::non_pause].mse, 5.0 / 3.0, 1e-12);
  EXPECT_FALSE(r[DurationCategory::non_pause].r_squared);
  EXPECT_NEAR(*r[DurationCategory::intra_pause].mse, 0.0, 1e-12);
  EXPECT_NEAR(*r[DurationCategory::inter_pause].mse, 100.0, 1e-12);
  // ref mean 50, ss_tot 200, ss_res 200
  EXPECT_NEAR(*r[DurationCategory::inter_pause].r_squared, 0.0, 1e-12);
}

TEST(Metrics, EmptyBucketsAreAbsent) {
  const std::vector<std::string> sym{"A", "B"};
  const std::vector<double> v{1, 2};
  const auto r = duration_metrics(v, v, sym);
  EXPECT_FALSE(r[DurationCategory::inter_pause].mse);
  EXPECT_FALSE(r[DurationCategory::inter_pause].r_squared);
  EXPECT_EQ(r[DurationCategory::intra_pause].count, 0u);
  std::ostringstream table;
  write_metrics_table(table, r);
  EXPECT_NE(table.str().find("absent"), std::string::npos) << table.str();
}

TEST(Metrics, RandomFixturesMatchDirectFormulas) {
  Rng rng(77);
  for (int c = 0; c < 200; ++c) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(2, 60));
    const auto p = random_vec(rng, n, -50, 50);
    const auto r = random_vec(rng, n, -50, 50);
    double m = 0, se = 0, tot = 0;
    for (double x : r) m += x;
    m /= n;
    for (std::size_t i = 0; i < n; ++i) {
      se += (p[i] - r[i]) * (p[i] - r[i]);
      tot += (r[i] - m) * (r[i] - m);
    }
    EXPECT_NEAR(mse(p, r), se / n, 1e-9 * se / n);
    const double r2 = 1.0 - se / tot;
    EXPECT_NEAR(r_squared(p, r), r2, 1e-9 * std::abs(r2));
  }
}

TEST(Histogram, SingleBin) {
  const std::vector<int> d{5, 5, 5};
  const auto h = pause_histogram(d, DurationCategory::inter_pause, 10);
  EXPECT_EQ(h.bins, (std::vector<HistogramBin>{{0, 3}}));
}

TEST(Histogram, ContiguousBinsAndFiltering) {
  const std::vector<int> d{3, 50, 12, 25, 7};
  const std::vector<std::string> sym{"A", "PAU_INTER", "PAU_INTER", "PAU_INTER", "PAU_INTRA"};
  const auto inter = durations_in_category(d, sym, DurationCategory::inter_pause);
  EXPECT_EQ(inter, (std::vector<int>{50, 12, 25}));
  const auto h = pause_histogram(inter, DurationCategory::inter_pause, 20);
  EXPECT_EQ(h.bins, (std::vector<HistogramBin>{{0, 1}, {20, 1}, {40, 1}}));
  EXPECT_TRUE(pause_histogram({}, DurationCategory::inter_pause, 5).bins.empty());
  EXPECT_THROW(pause_histogram(d, DurationCategory::inter_pause, 0), MetricError);
}

TEST(Mushra, SummaryOfTwoRatings) {
  MushraTable t;
  t.add({"r1", "s1", "X", 60});
  t.add({"r2", "s1", "X", 80});
  const auto s = mushra_summary(t, "X");
  EXPECT_EQ(s.count, 2u);
  EXPECT_DOUBLE_EQ(s.mean, 70.0);
  // sd = sqrt(200), se = 10
  EXPECT_NEAR(s.half_width, 19.6, 1e-9);
  EXPECT_THROW(mushra_summary(t, "Y"), MetricError);
  EXPECT_THROW(t.add({"r1", "s1", "X", 70}), MetricError);
  EXPECT_THROW(t.add({"r3", "s1", "X", 101}), MetricError);
}

TEST(Mushra, PairingUnits) {
  MushraTable t;
  // rater r, sample s: A = 10r + s, B = 0
  for (int r = 1; r <= 2; ++r)
    for (int s = 1; s <= 3; ++s) {
      t.add({"r" + std::to_string(r), "s" + std::to_string(s), "A", 10.0 * r + s});
      t.add({"r" + std::to_string(r), "s" + std::to_string(s), "B", 0});
    }
  EXPECT_EQ(t.paired("A", "B", PairingUnit::rating).first,
            (std::vector<double>{11, 12, 13, 21, 22, 23}));
  EXPECT_EQ(t.paired("A", "B", PairingUnit::sample).first, (std::vector<double>{16, 17, 18}));
  EXPECT_EQ(t.paired("A", "B", PairingUnit::rater).first, (std::vector<double>{12, 22}));
  EXPECT_EQ(pairing_unit_from_string("rater"), PairingUnit::rater);
  EXPECT_THROW(pairing_unit_from_string("nope"), MetricError);

  t.add({"r3", "s1", "A", 50});
  EXPECT_THROW(t.paired("A", "B", PairingUnit::rating), MetricError);
}

TEST(Mushra, CsvRead) {
  std::istringstream in("rater,sample,system,score\nr1,s1,A,50\nr1,s1,B,40.5\n");
  const auto t = read_mushra_csv(in);
  EXPECT_EQ(t.rating_count(), 2u);
  EXPECT_EQ(t.scores("B"), (std::vector<double>{40.5}));
  std::istringstream bad("r1,s1,A\n");
  EXPECT_THROW(read_mushra_csv(bad), MetricError);
  std::istringstream nan("r1,s1,A,abc\n");
  EXPECT_THROW(read_mushra_csv(nan), MetricError);
}

TEST(TTest, DegenerateCases) {
  const std::vector<double> a{1, 2, 3};
  EXPECT_THROW(paired_t_test(a, a), DegenerateTestError);
  const std::vector<double> b{0, 1, 2};
  const auto r = paired_t_test(a, b);
  EXPECT_TRUE(std::isinf(r.t_statistic));
  EXPECT_GT(r.t_statistic, 0);
  EXPECT_EQ(r.p_value, 0.0);
  EXPECT_THROW(paired_t_test(std::vector<double>{1}, std::vector<double>{2}), MetricError);
  EXPECT_THROW(paired_t_test(a, std::vector<double>{1, 2}), MetricError);
}

TEST(TTest, AntisymmetricAndMatchesBoost) {
  Rng rng(5);
  for (int c = 0; c < 200; ++c) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(2, 80));
    const auto a = random_vec(rng, n, 0, 100);
    auto b = random_vec(rng, n, 0, 100);
    const double shift = rng.uniform(-20, 20);
    for (std::size_t i = 0; i < n; ++i) b[i] = a[i] + shift + 0.3 * (b[i] - 50);
    const auto ab = paired_t_test(a, b);
    const auto ba = paired_t_test(b, a);
    EXPECT_NEAR(ab.t_statistic, -ba.t_statistic, 1e-9 * std::abs(ab.t_statistic));
    EXPECT_EQ(ab.p_value, ba.p_value);
    EXPECT_EQ(ab.degrees_of_freedom, n - 1);

    double md = 0, ss = 0;
    for (std::size_t i = 0; i < n; ++i) md += a[i] - b[i];
    md /= n;
    for (std::size_t i = 0; i < n; ++i) ss += (a[i] - b[i] - md) * (a[i] - b[i] - md);
    const double t = md / std::sqrt(ss / (n - 1) / n);
    EXPECT_NEAR(ab.t_statistic, t, 1e-9 * std::abs(t));
    const boost::math::students_t dist(static_cast<double>(n - 1));
    const double p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
    if (p > 1e-280) EXPECT_NEAR(ab.p_value, p, 1e-6 * p) << "n=" << n << " t=" << t;
  }
}

TEST(Preference, Examples) {
  EXPECT_EQ(preference_test(5, 5), 1.0);
  EXPECT_NEAR(preference_test(10, 0), 2.0 / 1024.0, 1e-12);
  EXPECT_EQ(preference_test(7, 2), preference_test(2, 7));
  EXPECT_THROW(preference_test(0, 0), MetricError);
  EXPECT_THROW(preference_test(-1, 3), MetricError);
}

TEST(Preference, MatchesBoostBinomial) {
  Rng rng(6);
  for (int c = 0; c < 200; ++c) {
    const int n = rng.uniform_int(1, 400);
    const int k = rng.uniform_int(0, n);
    const boost::math::binomial dist(n, 0.5);
    const double lo = std::min(k, n - k);
    const double p = std::min(1.0, 2.0 * boost::math::cdf(dist, lo));
    const double got = preference_test(k, n - k);
    EXPECT_NEAR(got, p, 1e-6 * p) << n << " " << k;
  }
}

TEST(GapReduction, Examples) {
  EXPECT_NEAR(gap_reduction(73.4, 72.1, 74.3), 59.09, 0.05);
  EXPECT_NEAR(gap_reduction(71.0, 69.2, 72.3), 58.06, 0.05);
  EXPECT_DOUBLE_EQ(gap_reduction(5, 5, 10), 0.0);
  EXPECT_DOUBLE_EQ(gap_reduction(10, 5, 10), 100.0);
  EXPECT_THROW(gap_reduction(1, 2, 2), MetricError);
}

TEST(GapReduction, AffineInvariant) {
  Rng rng(8);
  for (int c = 0; c < 100; ++c) {
    const double s1 = rng.uniform(0, 100), s2 = rng.uniform(0, 100), ref = rng.uniform(0, 100);
    const double k = rng.uniform(0.1, 10), off = rng.uniform(-50, 50);
    const double g = gap_reduction(s1, s2, ref);
    EXPECT_NEAR(gap_reduction(k * s1 + off, k * s2 + off, k * ref + off), g, 1e-6 * std::max(1.0, std::abs(g)));
  }
}

TEST(DurationCsv, RoundTrip) {
  DurationRecords r;
  r.utterance_ids = {"u1", "u1", "u2"};
  r.phoneme_indices = {0, 1, 0};
  r.symbols = {"AH", "PAU_INTER", "B"};
  r.predicted = {3.5, 40, 2};
  r.reference = {4, 38, 2};
  std::stringstream s;
  write_duration_csv(s, r);
  const auto back = read_duration_csv(s);
  EXPECT_EQ(back.utterance_ids, r.utterance_ids);
  EXPECT_EQ(back.phoneme_indices, r.phoneme_indices);
  EXPECT_EQ(back.symbols, r.symbols);
  EXPECT_EQ(back.predicted, r.predicted);
  EXPECT_EQ(back.reference, r.reference);

  std::istringstream bad("utterance_id,phoneme_index,symbol,pred,ref\nu1,0,AH,3\n");
  EXPECT_THROW(read_duration_csv(bad), MetricError);
}

TEST(Comparison, CsvHasOneRowPerSystem) {
  const std::vector<std::string> sym{"A", "PAU_INTER", "PAU_INTER"};
  const std::vector<double> ref{1, 10, 20};
  const std::vector<double> p1{1, 12, 18};
  std::vector<std::pair<std::string, MetricsReport>> rows{{"MTB", duration_metrics(p1, ref, sym)},
                                                          {"MLTB", duration_metrics(ref, ref, sym)}};
  std::ostringstream csv;
  write_comparison_csv(csv, rows);
  const std::string text = csv.str();
  EXPECT_EQ(text.rfind("system,", 0), 0u);
  EXPECT_NE(text.find("\nMTB,"), std::string::npos);
  EXPECT_NE(text.find("\nMLTB,"), std::string::npos);
}

TEST(SyntheticMushra, DeterministicAndComplete) {
  SyntheticMushraSpec spec;
  spec.raters = 4;
  spec.samples = 5;
  spec.system_means = {{"A", 70}, {"B", 60}};
  const auto t1 = synthetic_mushra_table(spec);
  const auto t2 = synthetic_mushra_table(spec);
  EXPECT_EQ(t1.rating_count(), 40u);
  EXPECT_EQ(t1.scores("A"), t2.scores("A"));
  EXPECT_NO_THROW(t1.paired("A", "B", PairingUnit::rating));
}

}  // namespace
}  // namespace prosody::eval
