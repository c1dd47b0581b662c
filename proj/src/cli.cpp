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

#include "prosody/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "prosody/corpus.hpp"
#include "prosody/eval.hpp"
#include "prosody/nnet/checkpoint.hpp"

namespace prosody::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

Variant RunConfig::variant() const {
  if (auto v = variant_of(flags)) return *v;
  throw std::invalid_argument("flag combination matches no system");
}

std::string row_label(Variant variant) {
  switch (variant) {
    case Variant::baseline: return "Baseline";
    case Variant::mt: return "MT";
    case Variant::mtb: return "MTB";
    case Variant::mltb: return "MLTB";
  }
  return "?";
}

namespace {

void require_file(const fs::path& path, const char* what) {
  if (path.empty()) throw IoError(std::string(what) + " path is empty");
  if (!fs::is_regular_file(path)) throw IoError(std::string(what) + " not found: " + path.string());
}

std::ifstream open_in(const fs::path& path, const char* what) {
  require_file(path, what);
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  return in;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

// "<dir>/<stem>_manifest.json" next to a single output file.
fs::path sidecar_manifest(const fs::path& output) {
  return output.parent_path() / (output.stem().string() + "_manifest.json");
}

void write_json(const fs::path& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

std::string format_fixed(double value, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, value);
  return buf;
}

Corpus load_corpus_checked(const fs::path& path) {
  require_file(path, "corpus");
  return load_corpus(path);
}

std::optional<ChunkPolicy> input_policy(double max_seconds, bool single_sentence) {
  if (single_sentence || max_seconds <= 0.0) return std::nullopt;
  return ChunkPolicy{max_seconds, kFrameShiftMs};
}

json policy_json(const std::optional<ChunkPolicy>& policy) {
  if (!policy) return nullptr;
  return {{"max_seconds", policy->max_seconds}, {"frame_shift_ms", policy->frame_shift_ms}};
}

// ---- Subcommand options --------------------------------------------------------

struct GenCorpusOptions {
  std::string out;
  CorpusSpec spec;
};

struct ChunkOptions {
  std::string corpus;
  std::string out;
  double max_seconds = 24.0;
  bool single_sentence = false;
};

struct TrainOptions {
  std::string corpus;
  std::string bundle;
  std::string variant = "mltb";
  std::string preset = "desk";
  double max_seconds = 24.0;
  std::optional<std::size_t> steps, batch_size, eval_every;
  std::optional<float> learning_rate;
  std::optional<double> validation_fraction;
  std::optional<bool> select_best;
};

struct SynthOptions {
  std::string bundle;
  std::string corpus;
  std::string out;
  std::string speaker;
  std::optional<double> max_seconds;
  bool single_sentence = false;
  int jobs = 1;
};

struct EvalDurationOptions {
  std::string input;
  std::string out;
  std::string histogram;
  std::string category = "inter_pause";
  int bin_width = 5;
};

struct EvalMushraOptions {
  std::string input;
  std::vector<std::string> systems;
  std::string system_a, system_b, reference;
  std::string pairing = "rating";
  double alpha = 0.01;
  std::optional<std::int64_t> prefer_a, prefer_b;
};

struct ReportOptions {
  std::vector<std::string> durations;
  std::vector<std::string> bundles;
  std::string corpus;
  std::string out;
};

// ---- gen-corpus ------------------------------------------------------------------

int cmd_gen_corpus(GenCorpusOptions& o, std::uint64_t seed, std::ostream& out) {
  o.spec.seed = seed;
  const Corpus corpus = generate_corpus(o.spec);
  const fs::path path(o.out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_corpus(corpus, path);
  write_json(sidecar_manifest(path),
             {{"command", "gen-corpus"},
              {"seed", seed},
              {"speakers", o.spec.num_speakers},
              {"utterances", o.spec.num_utterances},
              {"min_sentences", o.spec.min_sentences},
              {"max_sentences", o.spec.max_sentences},
              {"inventory", o.spec.phoneme_inventory_size},
              {"context_coupling", o.spec.context_coupling}});
  out << "wrote " << corpus.utterances.size() << " utterances to " << path.string() << '\n';
  return kSuccess;
}

// ---- chunk -------------------------------------------------------------------------

int cmd_chunk(const ChunkOptions& o, std::uint64_t seed, std::ostream& out, std::ostream& err) {
  const Corpus corpus = load_corpus_checked(o.corpus);
  const auto policy = input_policy(o.max_seconds, o.single_sentence);
  std::vector<std::string> warnings;
  const auto chunks = chunks_for_policy(corpus, policy, &warnings);
  for (const auto& w : warnings) err << "warning: " << w << '\n';
  const fs::path path(o.out);
  {
    auto file = open_out(path);
    write_chunk_manifest(file, chunks);
  }
  std::size_t multi = 0;
  for (const auto& c : chunks) multi += c.sentence_count() > 1;
  write_json(sidecar_manifest(path), {{"command", "chunk"},
                                      {"seed", seed},
                                      {"corpus", o.corpus},
                                      {"chunk_policy", policy_json(policy)},
                                      {"chunks", chunks.size()},
                                      {"multi_sentence_chunks", multi},
                                      {"warnings", warnings}});
  out << chunks.size() << " chunks (" << multi << " multi-sentence) written to " << path.string()
      << '\n';
  return kSuccess;
}

// ---- training --------------------------------------------------------------------------

RunConfig make_run_config(const TrainOptions& o, std::uint64_t seed, bool acoustic) {
  RunConfig rc;
  rc.paths = {o.corpus, o.bundle, o.bundle};
  rc.flags = flags_of(variant_from_string(o.variant));
  rc.chunk_policy = ChunkPolicy{o.max_seconds, kFrameShiftMs};
  rc.seed = seed;
  if (o.preset == "paper") {
    rc.train = acoustic ? TrainConfig::paper_acoustic(rc.flags.long_context)
                        : TrainConfig::paper_duration(rc.flags.long_context);
  } else if (o.preset == "desk") {
    rc.train = TrainConfig::desk();
    // The acoustic model keeps its final weights.
    if (acoustic) rc.train.select_best = false;
  } else {
    throw std::invalid_argument("unknown preset '" + o.preset + "' (desk|paper)");
  }
  if (o.steps) rc.train.max_steps = *o.steps;
  if (o.batch_size) rc.train.batch_size = *o.batch_size;
  if (o.eval_every) rc.train.eval_every = *o.eval_every;
  if (o.learning_rate) rc.train.learning_rate = *o.learning_rate;
  if (o.validation_fraction) rc.train.validation_fraction = *o.validation_fraction;
  if (o.select_best) rc.train.select_best = *o.select_best;
  rc.train.seed = seed;
  return rc;
}

ModelBundle open_or_create_bundle(const RunConfig& rc, const Corpus& corpus, const std::string& preset) {
  const fs::path dir = rc.paths.bundle;
  if (fs::exists(dir / "manifest.json")) {
    ModelBundle b = load_bundle(dir);
    if (!(b.flags() == rc.flags)) {
      throw ValidationError("bundle " + dir.string() + " holds a different variant than '" +
                            std::string(to_string(rc.variant())) + "'");
    }
    if (b.flags().long_context && b.chunk_policy != rc.chunk_policy) {
      throw ValidationError("bundle " + dir.string() + " was built with a different chunk policy");
    }
    if (!(b.inventory == PhonemeInventory::from_corpus(corpus))) {
      throw ValidationError("corpus phoneme inventory differs from bundle " + dir.string());
    }
    return b;
  }
  const ModelConfig config = preset == "paper" ? ModelConfig::paper(rc.flags) : ModelConfig::desk(rc.flags);
  ModelBundle b = make_bundle(corpus, config, rc.flags, rc.seed, rc.chunk_policy);
  b.duration.reset();
  b.acoustic.reset();
  return b;
}

void write_history(const fs::path& path, const TrainingResult& result) {
  auto out = open_out(path);
  out << "step,train_loss,validation_metric\n";
  for (const auto& e : result.history) {
    out << e.step << ',' << format_fixed(e.train_loss, 6) << ',' << format_fixed(e.validation_metric, 6)
        << '\n';
  }
}

int cmd_train(const TrainOptions& o, std::uint64_t seed, bool acoustic, std::ostream& out) {
  const RunConfig rc = make_run_config(o, seed, acoustic);
  if (rc.paths.bundle.empty()) throw IoError("bundle path is empty");
  const Corpus corpus = load_corpus_checked(rc.paths.corpus);
  ModelBundle bundle = open_or_create_bundle(rc, corpus, o.preset);

  const auto chunks = chunks_for_policy(corpus, bundle.chunk_policy);
  auto [train, valid] = split_train_validation(make_model_inputs(corpus, chunks, bundle.inventory),
                                               rc.train.validation_fraction, seed);
  const char* name = acoustic ? "acoustic" : "duration";
  out << "training " << name << " model (" << to_string(rc.variant()) << ") on " << train.size()
      << " items, " << valid.size() << " held out\n";
  auto progress = [&out](const HistoryEntry& e) {
    out << "  step " << e.step << "  train " << format_fixed(e.train_loss, 4) << "  validation "
        << format_fixed(e.validation_metric, 4) << '\n';
  };

  TrainingResult result;
  if (acoustic) {
    bundle.acoustic.emplace(bundle.config, bundle.inventory, bundle.speakers, bundle.tokenizer, bundle.seed);
    result = train_acoustic(*bundle.acoustic, train, valid, rc.train, progress);
  } else {
    bundle.duration.emplace(bundle.config, bundle.inventory, bundle.speakers, bundle.tokenizer, bundle.seed);
    result = train_duration(*bundle.duration, train, valid, rc.train, progress);
  }
  save_bundle(bundle, rc.paths.bundle);
  write_history(rc.paths.bundle / (std::string(name) + "_history.csv"), result);
  out << "selected step " << result.selected_step << "; bundle saved to " << rc.paths.bundle.string()
      << '\n';
  return kSuccess;
}

// ---- synthesize -------------------------------------------------------------------------

int cmd_synthesize(const SynthOptions& o, std::uint64_t seed, std::ostream& out, std::ostream& err) {
  require_file(fs::path(o.bundle) / "manifest.json", "bundle manifest");
  const ModelBundle bundle = load_bundle(o.bundle);
  if (!bundle.duration) throw ValidationError("bundle " + o.bundle + " has no trained duration model");
  const Corpus corpus = load_corpus_checked(o.corpus);
  if (o.jobs < 1) throw std::invalid_argument("--jobs must be at least 1");

  std::optional<ChunkPolicy> policy = bundle.chunk_policy;
  if (o.single_sentence) {
    policy.reset();
  } else if (o.max_seconds) {
    policy = input_policy(*o.max_seconds, false);
  }
  std::vector<std::string> warnings;
  const auto chunks = chunks_for_policy(corpus, policy, &warnings);
  if (!o.speaker.empty() && bundle.config.conditioning.use_speaker && !bundle.speakers.contains(o.speaker)) {
    throw ValidationError("unknown speaker '" + o.speaker + "'");
  }

  std::vector<SynthesisOutput> results(chunks.size());
  std::vector<Utterance> texts(chunks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < chunks.size(); i = next++) {
      texts[i] = concatenate_chunk(corpus, chunks[i]);
      const std::string speaker = o.speaker.empty() ? texts[i].speaker_id : o.speaker;
      results[i] = synthesize(bundle, texts[i], speaker, policy);
    }
  };
  const auto jobs = static_cast<std::size_t>(std::min<int>(o.jobs, static_cast<int>(std::max<std::size_t>(chunks.size(), 1))));
  std::vector<std::exception_ptr> failures(jobs);
  std::vector<std::thread> threads;
  for (std::size_t j = 1; j < jobs; ++j) {
    threads.emplace_back([&, j] {
      try {
        worker();
      } catch (...) {
        failures[j] = std::current_exception();
        next = chunks.size();
      }
    });
  }
  try {
    worker();
  } catch (...) {
    failures[0] = std::current_exception();
    next = chunks.size();
  }
  for (auto& t : threads) t.join();
  for (auto& f : failures)
    if (f) std::rethrow_exception(f);

  const fs::path dir(o.out);
  fs::create_directories(dir);
  eval::DurationRecords records;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    const Utterance& source = corpus.utterances.at(chunks[i].utterance_index);
    std::size_t offset = 0;
    for (std::size_t s = 0; s < chunks[i].first_sentence; ++s) offset += source.sentences[s].phonemes.size();
    std::size_t p = 0;
    for (const auto& sentence : texts[i].sentences) {
      for (const auto& ph : sentence.phonemes) {
        records.utterance_ids.push_back(chunks[i].source_utterance_id);
        records.phoneme_indices.push_back(offset + p);
        records.symbols.push_back(ph.symbol);
        records.predicted.push_back(results[i].durations[p]);
        records.reference.push_back(ph.duration_frames);
        ++p;
      }
    }
    if (bundle.acoustic) write_mel(results[i].mel, dir / "mel" / (texts[i].id + ".mel"));
  }
  {
    auto file = open_out(dir / "durations.csv");
    eval::write_duration_csv(file, records);
  }
  // Every chunk reports the same mismatch; keep one copy.
  if (!results.empty()) warnings.insert(warnings.end(), results[0].warnings.begin(), results[0].warnings.end());
  for (const auto& w : warnings) err << "warning: " << w << '\n';

  const auto variant = variant_of(bundle.flags());
  write_json(dir / "manifest.json", {{"command", "synthesize"},
                                     {"seed", seed},
                                     {"bundle_seed", bundle.seed},
                                     {"bundle", o.bundle},
                                     {"variant", variant ? std::string(to_string(*variant)) : "custom"},
                                     {"corpus", o.corpus},
                                     {"speaker", o.speaker.empty() ? json(nullptr) : json(o.speaker)},
                                     {"chunk_policy", policy_json(policy)},
                                     {"chunks", chunks.size()},
                                     {"has_mel", bundle.acoustic.has_value()},
                                     {"warnings", warnings}});
  out << "synthesized " << chunks.size() << " chunks into " << dir.string() << '\n';
  return kSuccess;
}

// ---- eval-durations ----------------------------------------------------------------------

eval::DurationCategory category_from_string(const std::string& name) {
  for (auto c : {eval::DurationCategory::non_pause, eval::DurationCategory::intra_pause,
                 eval::DurationCategory::inter_pause}) {
    if (eval::to_string(c) == name) return c;
  }
  throw std::invalid_argument("unknown category '" + name + "' (non_pause|intra_pause|inter_pause)");
}

int cmd_eval_durations(const EvalDurationOptions& o, std::ostream& out) {
  auto in = open_in(o.input, "duration CSV");
  const auto records = eval::read_duration_csv(in);
  const auto report = eval::duration_metrics(records.predicted, records.reference, records.symbols);
  eval::write_metrics_table(out, report);
  if (!o.out.empty()) {
    auto file = open_out(o.out);
    eval::write_metrics_csv(file, report);
  }
  if (!o.histogram.empty()) {
    const auto category = category_from_string(o.category);
    std::vector<int> ints;
    ints.reserve(records.size());
    for (double v : records.predicted) ints.push_back(static_cast<int>(std::lround(v)));
    const auto values = eval::durations_in_category(ints, records.symbols, category);
    auto file = open_out(o.histogram);
    eval::write_histogram_csv(file, eval::pause_histogram(values, category, o.bin_width));
  }
  return kSuccess;
}

// ---- eval-mushra ---------------------------------------------------------------------------

int cmd_eval_mushra(const EvalMushraOptions& o, std::ostream& out) {
  bool did_something = false;
  if (!o.input.empty()) {
    auto in = open_in(o.input, "MUSHRA CSV");
    const auto table = eval::read_mushra_csv(in);
    const auto systems = o.systems.empty() ? table.systems() : o.systems;
    out << "system,mean,half_width,count\n";
    std::map<std::string, eval::MushraSummary> summaries;
    for (const auto& s : systems) {
      summaries[s] = eval::mushra_summary(table, s);
      out << s << ',' << format_fixed(summaries[s].mean, 2) << ',' << format_fixed(summaries[s].half_width, 2)
          << ',' << summaries[s].count << '\n';
    }
    out << "note: " << eval::kHalfWidthDefinition << '\n';
    did_something = true;

    if (!o.system_a.empty() && !o.system_b.empty()) {
      const auto unit = eval::pairing_unit_from_string(o.pairing);
      const auto [a, b] = table.paired(o.system_a, o.system_b, unit);
      const auto t = eval::paired_t_test(a, b);
      out << "paired t-test " << o.system_a << " vs " << o.system_b << " (pairing " << o.pairing
          << "): t = " << format_fixed(t.t_statistic, 4) << ", df = " << t.degrees_of_freedom
          << ", p = " << format_fixed(t.p_value, 6) << (t.p_value < o.alpha ? ", significant" : ", not significant")
          << " at alpha " << o.alpha << '\n';
      if (!o.reference.empty()) {
        const double s1 = eval::mushra_summary(table, o.system_a).mean;
        const double s2 = eval::mushra_summary(table, o.system_b).mean;
        const double ref = eval::mushra_summary(table, o.reference).mean;
        out << "gap reduction of " << o.system_a << " over " << o.system_b << " towards " << o.reference
            << ": " << format_fixed(eval::gap_reduction(s1, s2, ref), 1) << "%\n";
      }
    } else if (!o.system_a.empty() || !o.system_b.empty()) {
      throw std::invalid_argument("--a and --b must be given together");
    }
  }
  if (o.prefer_a || o.prefer_b) {
    const std::int64_t a = o.prefer_a.value_or(0), b = o.prefer_b.value_or(0);
    const double p = eval::preference_test(a, b);
    out << "preference test " << a << " vs " << b << ": p = " << format_fixed(p, 6)
        << (p < 0.05 ? ", significant" : ", not significant") << " at alpha 0.05\n";
    did_something = true;
  }
  if (!did_something) throw std::invalid_argument("eval-mushra needs --input or --prefer-a/--prefer-b");
  return kSuccess;
}

// ---- report ----------------------------------------------------------------------------------

int cmd_report(const ReportOptions& o, std::ostream& out) {
  std::vector<std::pair<std::string, eval::MetricsReport>> rows;
  for (const auto& spec : o.durations) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw std::invalid_argument("--durations expects LABEL=PATH, got '" + spec + "'");
    }
    auto in = open_in(spec.substr(eq + 1), "duration CSV");
    const auto records = eval::read_duration_csv(in);
    rows.emplace_back(spec.substr(0, eq),
                      eval::duration_metrics(records.predicted, records.reference, records.symbols));
  }
  if (!o.bundles.empty()) {
    const Corpus corpus = load_corpus_checked(o.corpus);
    for (const auto& dir : o.bundles) {
      require_file(fs::path(dir) / "manifest.json", "bundle manifest");
      const ModelBundle bundle = load_bundle(dir);
      const auto variant = variant_of(bundle.flags());
      const auto chunks = chunks_for_policy(corpus, bundle.chunk_policy);
      const auto records = predict_durations(bundle, corpus, chunks);
      rows.emplace_back(variant ? row_label(*variant) : fs::path(dir).filename().string(),
                        eval::duration_metrics(records.predicted, records.reference, records.symbols));
    }
  }
  if (rows.empty()) throw std::invalid_argument("report needs --durations or --bundle inputs");
  eval::write_comparison_table(out, rows);
  if (!o.out.empty()) {
    auto file = open_out(o.out);
    eval::write_comparison_csv(file, rows);
  }
  return kSuccess;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const NumericError*>(&e)) return kNumeric;
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const fs::filesystem_error*>(&e)) return kIo;
  if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const CorpusFormatError*>(&e) ||
      dynamic_cast<const nn::CheckpointError*>(&e) || dynamic_cast<const std::invalid_argument*>(&e) ||
      dynamic_cast<const std::out_of_range*>(&e)) {
    return kValidation;
  }
  // Remaining library runtime errors come from unreadable or malformed files.
  return kIo;
}

}  // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Prosody: long-context duration modelling toolkit", "prosody"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read defaults from a key = value file; [section] names are subcommands");
  std::uint64_t seed = 1;
  app.add_option("--seed", seed, "Root seed recorded in every output manifest")->capture_default_str();

  GenCorpusOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-corpus", "Generate a synthetic multi-sentence corpus");
  gen_cmd->add_option("--out", gen.out, "Output JSON Lines index")->required();
  gen_cmd->add_option("--speakers", gen.spec.num_speakers, "Number of speakers")->capture_default_str();
  gen_cmd->add_option("--utterances", gen.spec.num_utterances, "Number of utterances")->capture_default_str();
  gen_cmd->add_option("--min-sentences", gen.spec.min_sentences)->capture_default_str();
  gen_cmd->add_option("--max-sentences", gen.spec.max_sentences)->capture_default_str();
  gen_cmd->add_option("--inventory", gen.spec.phoneme_inventory_size, "Non-pause phoneme count")
      ->capture_default_str();
  gen_cmd->add_option("--coupling", gen.spec.context_coupling,
                      "How strongly pauses depend on the next sentence, in [0, 1]")
      ->capture_default_str();

  ChunkOptions chunk;
  auto* chunk_cmd = app.add_subcommand("chunk", "Pack consecutive sentences into chunks");
  chunk_cmd->add_option("--corpus", chunk.corpus, "Corpus index")->required();
  chunk_cmd->add_option("--out", chunk.out, "Chunk manifest CSV")->required();
  chunk_cmd->add_option("--max-seconds", chunk.max_seconds, "Chunk duration budget")->capture_default_str();
  chunk_cmd->add_flag("--single-sentence", chunk.single_sentence, "One chunk per sentence");

  TrainOptions train_opts[2];
  const char* train_names[2] = {"train-duration", "train-acoustic"};
  CLI::App* train_cmds[2];
  for (int i = 0; i < 2; ++i) {
    auto& t = train_opts[i];
    auto* cmd = app.add_subcommand(train_names[i], i == 0 ? "Train the duration model of a bundle"
                                                          : "Train the acoustic model of a bundle");
    cmd->add_option("--corpus", t.corpus, "Training corpus index")->required();
    cmd->add_option("--bundle", t.bundle, "Bundle directory (created or extended)")->required();
    cmd->add_option("--variant", t.variant, "baseline|mt|mtb|mltb")->capture_default_str();
    cmd->add_option("--preset", t.preset, "desk|paper")->capture_default_str();
    cmd->add_option("--max-seconds", t.max_seconds, "Chunk budget for long-context variants")
        ->capture_default_str();
    cmd->add_option("--steps", t.steps, "Optimizer steps");
    cmd->add_option("--batch-size", t.batch_size);
    cmd->add_option("--lr", t.learning_rate, "Adam learning rate");
    cmd->add_option("--eval-every", t.eval_every, "Steps between validation passes");
    cmd->add_option("--validation-fraction", t.validation_fraction);
    cmd->add_option("--select-best", t.select_best, "Restore the best validation checkpoint (true|false)");
    train_cmds[i] = cmd;
  }

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synthesize", "Predict durations (and mels) for a corpus");
  synth_cmd->add_option("--bundle", synth.bundle, "Trained bundle directory")->required();
  synth_cmd->add_option("--corpus", synth.corpus, "Corpus whose text is synthesized")->required();
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_cmd->add_option("--speaker", synth.speaker, "Speaker id for every chunk (default: the corpus speaker)");
  synth_cmd->add_option("--max-seconds", synth.max_seconds,
                        "Input chunk budget; defaults to the bundle's training policy, 0 = single sentences");
  synth_cmd->add_flag("--single-sentence", synth.single_sentence, "Synthesize sentence by sentence");
  synth_cmd->add_option("--jobs", synth.jobs, "Parallel workers")->capture_default_str();

  EvalDurationOptions ed;
  auto* ed_cmd = app.add_subcommand("eval-durations", "Duration metrics by pause category");
  ed_cmd->add_option("--input", ed.input, "Duration CSV (utterance_id,phoneme_index,symbol,pred,ref)")
      ->required();
  ed_cmd->add_option("--out", ed.out, "Metrics CSV");
  ed_cmd->add_option("--histogram", ed.histogram, "Histogram CSV of predicted durations");
  ed_cmd->add_option("--category", ed.category, "Histogram category")->capture_default_str();
  ed_cmd->add_option("--bin-width", ed.bin_width, "Histogram bin width in frames")->capture_default_str();

  EvalMushraOptions em;
  auto* em_cmd = app.add_subcommand("eval-mushra", "Listening-test summaries and significance tests");
  em_cmd->add_option("--input", em.input, "MUSHRA CSV (rater,sample,system,score)");
  em_cmd->add_option("--system", em.systems, "Systems to summarize (default: all)");
  em_cmd->add_option("--a", em.system_a, "First system of the paired test");
  em_cmd->add_option("--b", em.system_b, "Second system of the paired test");
  em_cmd->add_option("--reference", em.reference, "Reference system for gap reduction");
  em_cmd->add_option("--pairing", em.pairing, "rating|sample|rater")->capture_default_str();
  em_cmd->add_option("--alpha", em.alpha, "Significance level of the t-test")->capture_default_str();
  em_cmd->add_option("--prefer-a", em.prefer_a, "Preference votes for A");
  em_cmd->add_option("--prefer-b", em.prefer_b, "Preference votes for B");

  ReportOptions rep;
  auto* rep_cmd = app.add_subcommand("report", "Comparison table across systems");
  rep_cmd->add_option("--durations", rep.durations, "LABEL=PATH duration CSV (repeatable)");
  rep_cmd->add_option("--bundle", rep.bundles, "Trained bundle (repeatable); needs --corpus");
  rep_cmd->add_option("--corpus", rep.corpus, "Held-out corpus for --bundle rows");
  rep_cmd->add_option("--out", rep.out, "Comparison CSV");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen_corpus(gen, seed, out);
    if (chunk_cmd->parsed()) return cmd_chunk(chunk, seed, out, err);
    if (train_cmds[0]->parsed()) return cmd_train(train_opts[0], seed, false, out);
    if (train_cmds[1]->parsed()) return cmd_train(train_opts[1], seed, true, out);
    if (synth_cmd->parsed()) return cmd_synthesize(synth, seed, out, err);
    if (ed_cmd->parsed()) return cmd_eval_durations(ed, out);
    if (em_cmd->parsed()) return cmd_eval_mushra(em, out);
    if (rep_cmd->parsed()) return cmd_report(rep, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  err << app.help();
  return kUsage;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace prosody::cli
