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


// Acceptance run: one [PASS]/[FAIL] line per criterion, nonzero exit on any
// failure. Long (~9 min on one core); registered with a generous timeout.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "prosody/chunker.hpp"
#include "prosody/models.hpp"
#include "support/grad_cases.hpp"

namespace prosody {
namespace {

using Clock = std::chrono::steady_clock;

int g_failures = 0;

void report(int id, bool ok, const std::string& what, Clock::time_point start) {
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  std::printf("[%s] %d %s (%.1f s)\n", ok ? "PASS" : "FAIL", id, what.c_str(), secs);
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

bool rel_close(double got, double want, double tol = 1e-6) {
  if (want == 0.0) return std::abs(got) <= tol;
  return std::abs(got - want) <= tol * std::abs(want);
}

// ---- 1 --------------------------------------------------------------------------
void gap_reduction_examples() {
  const auto t0 = Clock::now();
  const double a = eval::gap_reduction(73.4, 72.1, 74.3);
  const double b = eval::gap_reduction(71.0, 69.2, 72.3);
  char buf[160];
  std::snprintf(buf, sizeof buf, "gap reduction examples: %.4f (want 59.09), %.4f (want 58.06)", a, b);
  report(1, std::abs(a - 59.09) <= 0.05 && std::abs(b - 58.06) <= 0.05, buf, t0);
}

// ---- 2 --------------------------------------------------------------------------
void metrics_match_formulas() {
  const auto t0 = Clock::now();
  Rng rng(2);
  int bad = 0, cases = 0;
  for (int c = 0; c < 200; ++c, ++cases) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(3, 80));
    std::vector<double> p(n), r(n), a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = rng.uniform(0, 60);
      r[i] = rng.uniform(0, 60);
      a[i] = rng.uniform(20, 100);
      b[i] = a[i] + rng.uniform(-15, 10);
    }
    double m = 0, se = 0, tot = 0;
    for (double x : r) m += x;
    m /= n;
    for (std::size_t i = 0; i < n; ++i) {
      se += (p[i] - r[i]) * (p[i] - r[i]);
      tot += (r[i] - m) * (r[i] - m);
    }
    bad += !rel_close(eval::mse(p, r), se / n);
    bad += !rel_close(eval::r_squared(p, r), 1.0 - se / tot);

    double md = 0, ss = 0;
    for (std::size_t i = 0; i < n; ++i) md += a[i] - b[i];
    md /= n;
    for (std::size_t i = 0; i < n; ++i) ss += (a[i] - b[i] - md) * (a[i] - b[i] - md);
    const double t = md / std::sqrt(ss / (n - 1) / n);
    const boost::math::students_t dist(static_cast<double>(n - 1));
    const double pt = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
    const auto tt = eval::paired_t_test(a, b);
    bad += !rel_close(tt.t_statistic, t);
    bad += !rel_close(tt.p_value, pt);

    const int votes = rng.uniform_int(1, 300);
    const int k = rng.uniform_int(0, votes);
    const boost::math::binomial bin(votes, 0.5);
    const double pb = std::min(1.0, 2.0 * boost::math::cdf(bin, std::min(k, votes - k)));
    bad += !rel_close(eval::preference_test(k, votes - k), pb);
  }
  report(2, bad == 0,
         "mse / r_squared / paired_t_test / preference_test vs direct formulas on " + std::to_string(cases) +
             " fixtures (" + std::to_string(bad) + " mismatches)",
         t0);
}

// ---- 3 --------------------------------------------------------------------------
void gradient_checks() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string worst_name;
  int checks = 0;
  for (const auto& c : testing::gradient_cases()) {
    for (int s = 0; s < 3; ++s, ++checks) {
      Rng rng(1000 + static_cast<std::uint64_t>(s));
      auto inst = c.make(rng, s);
      const auto r = testing::check_gradients(inst.fn, inst.inputs, 7 + static_cast<std::uint64_t>(s), 1e-3);
      if (!(r.relative_error <= worst)) {
        worst = r.relative_error;
        worst_name = c.name + " shape " + std::to_string(s);
      }
    }
  }
  char buf[200];
  std::snprintf(buf, sizeof buf, "finite-difference gradients, %d checks, worst %.2e (%s)", checks, worst,
                worst_name.c_str());
  report(3, worst < 1e-3, buf, t0);
}

// ---- 4 --------------------------------------------------------------------------
void length_properties() {
  const auto t0 = Clock::now();
  Rng rng(4);
  int bad = 0;
  for (int c = 0; c < 1000; ++c) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(1, 50));
    std::vector<int> d(n);
    for (auto& v : d) v = rng.uniform_int(0, 40);
    const auto x = testing::random_tensor({n, 4}, rng, false);
    bad += length_regulate(x, d).rows() != static_cast<std::size_t>(std::accumulate(d.begin(), d.end(), 0));
  }

  CorpusSpec spec;
  spec.num_utterances = 8;
  const Corpus corpus = generate_corpus(spec);
  const auto f = flags_of(Variant::mltb);
  ModelConfig cfg = ModelConfig::desk(f);
  const ModelBundle bundle = make_bundle(corpus, cfg, f, 4);
  std::vector<ModelInput> inputs;
  for (const auto& u : corpus.utterances) {
    for (const auto& s : u.sentences) {
      Utterance one{u.id, u.speaker_id, {s}, {}};
      inputs.push_back(make_model_input(one, bundle.inventory));
    }
  }
  for (int c = 0; c < 1000; ++c) {
    const auto& in = inputs[static_cast<std::size_t>(c) % inputs.size()];
    std::vector<int> d(in.size());
    for (auto& v : d) v = rng.uniform_int(0, 6);
    const auto mel = acoustic_forward(*bundle.acoustic, in, d);
    bad += mel.frames != static_cast<std::size_t>(std::accumulate(d.begin(), d.end(), 0));
  }

  for (int c = 0; c < 1000; ++c) {
    CorpusSpec cs;
    cs.num_utterances = rng.uniform_int(1, 4);
    cs.min_sentences = 1;
    cs.max_sentences = rng.uniform_int(1, 10);
    cs.num_speakers = 2;
    cs.seed = 10'000 + static_cast<std::uint64_t>(c);
    const Corpus rc = generate_corpus(cs);
    const double budget = rng.uniform(2.0, 30.0);
    const auto chunks = chunk_corpus(rc, ChunkPolicy{budget}).chunks;
    std::size_t next_utt = 0, next_sentence = 0;
    for (const auto& ch : chunks) {
      if (ch.utterance_index != next_utt) {
        bad += next_sentence != rc.utterances[next_utt].sentences.size();
        next_utt = ch.utterance_index;
        next_sentence = 0;
      }
      bad += ch.first_sentence != next_sentence || ch.last_sentence < ch.first_sentence;
      next_sentence = ch.last_sentence + 1;
      if (ch.sentence_count() > 1) bad += ch.total_seconds > budget;
    }
    bad += next_utt + 1 != rc.utterances.size() || next_sentence != rc.utterances.back().sentences.size();
  }
  report(4, bad == 0,
         "length_regulate, acoustic_forward and chunk partition/budget laws, 3 x 1000 cases (" +
             std::to_string(bad) + " violations)",
         t0);
}

// ---- 5 --------------------------------------------------------------------------
struct OverfitRun {
  std::vector<HistoryEntry> duration_history, acoustic_history;
  double mae = 0.0, mse = 0.0;
  std::size_t duration_steps = 0, acoustic_steps = 0;
};

OverfitRun overfit_once() {
  CorpusSpec spec;
  spec.seed = 3;
  spec.num_utterances = 5;
  spec.min_sentences = 1;
  spec.max_sentences = 2;
  const Corpus corpus = generate_corpus(spec);
  const auto f = flags_of(Variant::mtb);
  ModelConfig cfg = ModelConfig::desk(f);
  cfg.dims.dropout = 0.0f;
  ModelBundle b = make_bundle(corpus, cfg, f, 1);
  std::vector<ModelInput> in;
  for (const auto& u : corpus.utterances) in.push_back(make_model_input(u, b.inventory));

  TrainConfig tc = TrainConfig::desk();
  tc.max_steps = 5000;
  tc.batch_size = 5;
  tc.eval_every = 100;
  OverfitRun run;
  tc.stop_below = 0.5;
  auto rd = train_duration(*b.duration, in, in, tc);
  tc.stop_below = 0.01;
  auto ra = train_acoustic(*b.acoustic, in, in, tc);
  run.duration_history = rd.history;
  run.acoustic_history = ra.history;
  run.duration_steps = rd.history.back().step;
  run.acoustic_steps = ra.history.back().step;
  run.mae = duration_mae(*b.duration, in);
  run.mse = acoustic_mse(*b.acoustic, in);
  return run;
}

bool same_history(const std::vector<HistoryEntry>& a, const std::vector<HistoryEntry>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].step != b[i].step || a[i].train_loss != b[i].train_loss ||
        a[i].validation_metric != b[i].validation_metric) {
      return false;
    }
  }
  return true;
}

void overfit() {
  const auto t0 = Clock::now();
  const auto first = overfit_once();
  const double once = std::chrono::duration<double>(Clock::now() - t0).count();
  const auto second = overfit_once();
  const bool repeat = same_history(first.duration_history, second.duration_history) &&
                      same_history(first.acoustic_history, second.acoustic_history) &&
                      first.mae == second.mae && first.mse == second.mse;
  char buf[240];
  std::snprintf(buf, sizeof buf,
                "desk overfit on 5 utterances: duration MAE %.3f at step %zu, mel MSE %.4f at step %zu, "
                "%.0f s per run, repeat %s",
                first.mae, first.duration_steps, first.mse, first.acoustic_steps, once,
                repeat ? "bit-identical" : "DIFFERS");
  report(5, first.mae < 0.5 && first.mse < 0.01 && first.duration_steps <= 5000 &&
                first.acoustic_steps <= 5000 && repeat && once < 600.0,
         buf, t0);
}

// ---- 6 and 7 --------------------------------------------------------------------
struct SeedResult {
  double mtb_mse = 0, mtb_r2 = 0, mltb_mse = 0, mltb_r2 = 0, mismatch_mse = 0;
};

eval::CategoryMetrics inter_pause(const ModelBundle& b, const Corpus& test, const std::optional<ChunkPolicy>& p) {
  const auto chunks = chunks_for_policy(test, p);
  const auto rec = predict_durations(b, test, chunks);
  return eval::duration_metrics(rec.predicted, rec.reference, rec.symbols)[eval::DurationCategory::inter_pause];
}

SeedResult long_context_seed(std::uint64_t seed) {
  CorpusSpec spec;
  spec.seed = seed;
  spec.num_utterances = 120;
  spec.context_coupling = 1.0;
  const Corpus all = generate_corpus(spec);
  Corpus train, test;
  // every fifth utterance is held out
  for (std::size_t i = 0; i < all.utterances.size(); ++i) {
    (i % 5 == 4 ? test : train).utterances.push_back(all.utterances[i]);
  }
  SeedResult out;
  for (bool long_context : {false, true}) {
    const VariantFlags f{true, true, long_context};
    ModelBundle b = make_bundle(all, ModelConfig::desk(f), f, seed);
    b.acoustic.reset();
    const auto inputs = make_model_inputs(train, chunks_for_policy(train, b.chunk_policy), b.inventory);
    auto [tr, va] = split_train_validation(inputs, 0.1, seed);
    TrainConfig tc = TrainConfig::desk();
    tc.max_steps = 2000;
    tc.seed = seed;
    train_duration(*b.duration, tr, va, tc);
    const auto m = inter_pause(b, test, b.chunk_policy);
    if (long_context) {
      out.mltb_mse = m.mse.value_or(NAN);
      out.mltb_r2 = m.r_squared.value_or(NAN);
    } else {
      out.mtb_mse = m.mse.value_or(NAN);
      out.mtb_r2 = m.r_squared.value_or(NAN);
      out.mismatch_mse = inter_pause(b, test, ChunkPolicy{}).mse.value_or(NAN);
    }
  }
  return out;
}

void long_context() {
  const auto t0 = Clock::now();
  std::vector<SeedResult> results;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    results.push_back(long_context_seed(seed));
    const auto& r = results.back();
    std::printf("  seed %llu: MTB inter-pause MSE %.1f R2 %.3f | MLTB MSE %.1f R2 %.3f | MTB on chunks MSE %.1f\n",
                static_cast<unsigned long long>(seed), r.mtb_mse, r.mtb_r2, r.mltb_mse, r.mltb_r2,
                r.mismatch_mse);
    std::fflush(stdout);
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  int wins = 0, mismatch_ok = 0;
  for (const auto& r : results) {
    wins += r.mltb_mse < r.mtb_mse && r.mltb_r2 > r.mtb_r2;
    mismatch_ok += r.mismatch_mse >= r.mltb_mse;
  }
  report(6, wins >= 2 && secs < 1800.0,
         "MLTB beats MTB on held-out inter-sentence pauses (lower MSE and higher R^2) in " + std::to_string(wins) +
             "/3 seeds",
         t0);
  report(7, mismatch_ok == 3,
         "single-sentence model on chunked input is no better than MLTB in " + std::to_string(mismatch_ok) +
             "/3 seeds",
         t0);
}

// ---- 8 --------------------------------------------------------------------------
void checkpoint_selection() {
  const auto t0 = Clock::now();
  Rng rng(8);
  int bad = 0;
  for (int c = 0; c < 1000; ++c) {
    const int n = rng.uniform_int(1, 30);
    std::vector<HistoryEntry> h;
    for (int i = 0; i < n; ++i) {
      // few distinct values, so ties are common
      h.push_back({static_cast<std::size_t>(i) * 100, 0.0, static_cast<double>(rng.uniform_int(0, 5))});
    }
    for (int i = n - 1; i > 0; --i) std::swap(h[i], h[rng.uniform_int(0, i)]);
    std::size_t want = 0;
    double best = INFINITY;
    for (const auto& e : h) {
      if (e.validation_metric < best || (e.validation_metric == best && e.step < want)) {
        best = e.validation_metric;
        want = e.step;
      }
    }
    bad += select_checkpoint(h) != want;
  }
  const std::vector<HistoryEntry> tie{{0, 0, 3.0}, {100, 0, 1.0}, {200, 0, 1.0}};
  bad += select_checkpoint(tie) != 100;
  report(8, bad == 0, "select_checkpoint returns the argmin, earliest step on ties, 1000 cases", t0);
}

}  // namespace
}  // namespace prosody

int main() {
  using namespace prosody;
  gap_reduction_examples();
  metrics_match_formulas();
  gradient_checks();
  length_properties();
  overfit();
  long_context();
  checkpoint_selection();
  std::printf("%s: %d criterion failure(s)\n", g_failures ? "FAILED" : "OK", g_failures);
  return g_failures ? 1 : 0;
}
