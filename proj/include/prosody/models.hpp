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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "prosody/chunker.hpp"
#include "prosody/conditioning.hpp"
#include "prosody/corpus.hpp"
#include "prosody/encoder.hpp"
#include "prosody/eval.hpp"
#include "prosody/nnet/checkpoint.hpp"
#include "prosody/nnet/ops.hpp"

namespace prosody {

class UnknownPhonemeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Training diverged (NaN/Inf loss).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PhonemeInventory {
 public:
  PhonemeInventory() = default;
  // Pause symbols are appended when absent.
  explicit PhonemeInventory(std::vector<std::string> symbols);
  // Sorted unique symbols of the corpus plus both pauses.
  static PhonemeInventory from_corpus(const Corpus& corpus);

  int index(std::string_view symbol) const;
  std::size_t size() const { return symbols_.size(); }
  const std::vector<std::string>& symbols() const { return symbols_; }
  std::uint64_t hash() const;

  bool operator==(const PhonemeInventory&) const = default;

 private:
  std::vector<std::string> symbols_;
};

// The four systems compared throughout: single-speaker baseline, plus
// speaker conditioning (MT), plus word embeddings (MTB), plus long-context
// training and synthesis (MLTB).
enum class Variant { baseline, mt, mtb, mltb };

struct VariantFlags {
  bool use_speaker = false;
  bool use_word_embeddings = false;
  bool long_context = false;

  bool operator==(const VariantFlags&) const = default;
};

VariantFlags flags_of(Variant variant);
std::optional<Variant> variant_of(const VariantFlags& flags);
std::string_view to_string(Variant variant);
Variant variant_from_string(std::string_view name);

struct ModelConfig {
  EncoderDims dims;
  ConditioningConfig conditioning;
  WordEmbeddingMode word_mode = WordEmbeddingMode::trainable_table;

  static ModelConfig paper(const VariantFlags& flags);
  static ModelConfig desk(const VariantFlags& flags);
};

// Model-ready view of one (possibly concatenated) utterance.
struct ModelInput {
  std::string id;
  std::string speaker_id;
  std::vector<std::string> symbols;
  std::vector<int> phoneme_ids;
  std::vector<Word> words;      // spans index the flattened phoneme sequence
  std::vector<int> durations;   // reference durations, one per phoneme
  std::vector<float> mel;       // reference mel [sum(durations) x 80]; may be empty

  std::size_t size() const { return symbols.size(); }
};

ModelInput make_model_input(const Utterance& utterance, const PhonemeInventory& inventory);

// Chunked utterances for long-context models, single sentences otherwise.
std::vector<Chunk> chunks_for_policy(const Corpus& corpus, const std::optional<ChunkPolicy>& policy,
                                     std::vector<std::string>* warnings = nullptr);
std::vector<ModelInput> make_model_inputs(const Corpus& corpus, std::span<const Chunk> chunks,
                                          const PhonemeInventory& inventory);

// Phoneme embedding, phoneme FFT encoder and the conditioning projection.
// Each model owns its own instance.
struct PhonemeFrontEnd {
  nn::Tensor embedding;  // [inventory x model_dim]
  Encoder encoder;
  ConditioningParams conditioning;
  std::optional<WordEmbeddingProvider> words;

  static PhonemeFrontEnd init(const ModelConfig& config, std::size_t inventory_size,
                              const SubTokenizer& tokenizer, std::uint64_t seed, Rng& rng);
  nn::Tensor forward(const ModelInput& input, const ModelConfig& config, const SpeakerTable& speakers,
                     nn::ForwardMode& mode) const;
  void collect(const std::string& prefix, nn::ParameterList& out) const;
};

class DurationModel {
 public:
  DurationModel(ModelConfig config, PhonemeInventory inventory, SpeakerTable speakers,
                const SubTokenizer& tokenizer, std::uint64_t seed);

  // [phonemes x 1] frame counts, unclamped.
  nn::Tensor forward(const ModelInput& input, nn::ForwardMode& mode) const;
  std::vector<float> predict(const ModelInput& input) const;

  nn::ParameterList parameters() const;
  void set_output_bias(float value);

  const ModelConfig& config() const { return config_; }
  const PhonemeInventory& inventory() const { return inventory_; }
  const SpeakerTable& speakers() const { return speakers_; }
  const std::optional<WordEmbeddingProvider>& word_provider() const { return front_.words; }

 private:
  ModelConfig config_;
  PhonemeInventory inventory_;
  SpeakerTable speakers_;
  PhonemeFrontEnd front_;
  nn::Tensor regressor_weight_, regressor_bias_;
};

class AcousticModel {
 public:
  AcousticModel(ModelConfig config, PhonemeInventory inventory, SpeakerTable speakers,
                const SubTokenizer& tokenizer, std::uint64_t seed);

  // [sum(durations) x 80]; durations must be non-negative, one per phoneme.
  nn::Tensor forward(const ModelInput& input, std::span<const int> durations,
                     nn::ForwardMode& mode) const;
  MelSpectrogram predict(const ModelInput& input, std::span<const int> durations) const;

  nn::ParameterList parameters() const;
  void set_output_bias(std::span<const float> per_band);

  const ModelConfig& config() const { return config_; }
  const PhonemeInventory& inventory() const { return inventory_; }

 private:
  ModelConfig config_;
  PhonemeInventory inventory_;
  SpeakerTable speakers_;
  PhonemeFrontEnd front_;
  Encoder frame_encoder_;
  nn::Tensor mel_weight_, mel_bias_;
};

// Free-function views of the two forward passes.
std::vector<float> duration_forward(const DurationModel& model, const ModelInput& input);
MelSpectrogram acoustic_forward(const AcousticModel& model, const ModelInput& input,
                                std::span<const int> durations);

// ---- Training ---------------------------------------------------------------

enum class Preset { paper, desk };

struct TrainConfig {
  Preset preset = Preset::desk;
  std::size_t batch_size = 8;
  float learning_rate = 1e-3f;
  std::size_t max_steps = 2000;
  std::uint64_t seed = 1;
  double validation_fraction = 0.1;
  std::size_t eval_every = 100;
  // Restore the lowest-validation checkpoint when training ends.
  bool select_best = true;
  // Initialise the output bias from training-target means before step 1.
  bool init_output_bias = true;
  // Stop once the validation metric drops below this value.
  std::optional<double> stop_below;

  static TrainConfig desk();
  static TrainConfig paper_duration(bool long_context);
  static TrainConfig paper_acoustic(bool long_context);
};

struct HistoryEntry {
  std::size_t step = 0;
  double train_loss = 0.0;         // mean loss of the batches since the previous entry
  double validation_metric = 0.0;  // MAE (duration) or MSE (acoustic)
};

struct TrainingResult {
  std::vector<HistoryEntry> history;
  std::size_t selected_step = 0;
};

using ProgressCallback = std::function<void(const HistoryEntry&)>;

// L1 on linear-domain frame counts against the reference durations.
TrainingResult train_duration(DurationModel& model, std::span<const ModelInput> train,
                              std::span<const ModelInput> validation, const TrainConfig& config,
                              const ProgressCallback& progress = {});

// MSE on mel frames, upsampled with the reference (teacher) durations.
TrainingResult train_acoustic(AcousticModel& model, std::span<const ModelInput> train,
                              std::span<const ModelInput> validation, const TrainConfig& config,
                              const ProgressCallback& progress = {});

// Step with the lowest validation metric; the earliest step wins ties.
std::size_t select_checkpoint(std::span<const HistoryEntry> history);

// Mean absolute error over every phoneme of `inputs` (eval mode, raw outputs).
double duration_mae(const DurationModel& model, std::span<const ModelInput> inputs);
// Mean squared error over every mel value, teacher durations.
double acoustic_mse(const AcousticModel& model, std::span<const ModelInput> inputs);

// Deterministic split; the validation share is rounded down but kept >= 1
// when fraction > 0 and there are at least two inputs.
std::pair<std::vector<ModelInput>, std::vector<ModelInput>> split_train_validation(
    std::vector<ModelInput> inputs, double validation_fraction, std::uint64_t seed);

// ---- Bundles and synthesis --------------------------------------------------

struct ModelBundle {
  ModelConfig config;
  // Chunking used at training; nullopt means single-sentence training.
  std::optional<ChunkPolicy> chunk_policy;
  PhonemeInventory inventory;
  SpeakerTable speakers;
  SubTokenizer tokenizer;
  std::uint64_t seed = 1;
  std::optional<DurationModel> duration;
  std::optional<AcousticModel> acoustic;

  VariantFlags flags() const;
};

// Builds untrained models for `flags` sized by `config`, with the inventory,
// speakers and sub-token vocabulary taken from `corpus`.
ModelBundle make_bundle(const Corpus& corpus, const ModelConfig& config, const VariantFlags& flags,
                        std::uint64_t seed, const ChunkPolicy& long_context_policy = {});

// Directory layout: manifest.json, speakers.csv, duration.ckpt, acoustic.ckpt.
void save_bundle(const ModelBundle& bundle, const std::filesystem::path& dir);
ModelBundle load_bundle(const std::filesystem::path& dir);

struct SynthesisOutput {
  std::vector<float> raw_durations;
  std::vector<int> durations;  // rounded, clamped to >= 1
  MelSpectrogram mel;          // empty when the bundle has no acoustic model
  std::vector<std::string> warnings;
};

// Human-readable mismatch description, or nullopt when the input was chunked
// the way the bundle was trained.
std::optional<std::string> chunking_mismatch(const std::optional<ChunkPolicy>& trained,
                                             const std::optional<ChunkPolicy>& input);

std::vector<int> round_durations(std::span<const float> raw);

SynthesisOutput synthesize(const ModelBundle& bundle, const Utterance& text_chunk,
                           const std::string& speaker_id,
                           const std::optional<ChunkPolicy>& input_policy);

// Predicts integer durations for every chunk and returns them per phoneme of
// the source utterances, next to the reference durations.
eval::DurationRecords predict_durations(const ModelBundle& bundle, const Corpus& corpus,
                                        std::span<const Chunk> chunks);

}  // namespace prosody
