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

#include "prosody/models.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "prosody/nnet/optim.hpp"

namespace prosody {

namespace {

using json = nlohmann::json;

constexpr std::uint64_t kDurationStream = 0xD1;
constexpr std::uint64_t kAcousticStream = 0xAC;
constexpr std::uint64_t kWordStream = 0x3B;
constexpr std::uint64_t kSpeakerStream = 0x5E;
constexpr std::uint64_t kShuffleStream = 0x5F;
constexpr std::uint64_t kDropoutStream = 0xD0;
constexpr int kManifestVersion = 1;
// Cap on the training items scored at each history entry.
constexpr std::size_t kTrainLossSample = 64;

std::string lower(std::string_view text) {
  std::string out(text);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

nn::Tensor embedding_table(std::size_t rows, std::size_t dim, Rng& rng) {
  std::vector<float> data(rows * dim);
  for (auto& v : data) v = static_cast<float>(rng.normal(0.0, 0.5));
  return nn::Tensor::from_data({rows, dim}, std::move(data), true);
}

void shuffle(std::vector<std::size_t>& order, Rng& rng) {
  for (std::size_t i = order.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1));
    std::swap(order[i - 1], order[j]);
  }
}

std::vector<nn::Tensor> tensors_of(const nn::ParameterList& params) {
  std::vector<nn::Tensor> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(p.tensor);
  return out;
}

// Shared optimisation loop. `loss_of` returns (loss tensor, element count)
// for one input; `metric` scores a whole split in eval mode.
template <typename LossFn, typename MetricFn>
TrainingResult run_training(nn::ParameterList params, std::span<const ModelInput> train,
                            std::span<const ModelInput> validation, const TrainConfig& config,
                            LossFn loss_of, MetricFn metric, const ProgressCallback& progress) {
  if (train.empty()) throw std::invalid_argument("training split is empty");
  if (config.batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (config.eval_every == 0) throw std::invalid_argument("eval_every must be positive");
  const auto valid = validation.empty() ? train : validation;
  const auto train_sample = train.first(std::min(train.size(), kTrainLossSample));

  auto tensors = tensors_of(params);
  auto adam = nn::make_adam_state(tensors, config.learning_rate);
  nn::DropoutKeys keys(derive_seed(config.seed, kDropoutStream));
  Rng order_rng(derive_seed(config.seed, kShuffleStream));

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  shuffle(order, order_rng);
  std::size_t cursor = 0;

  auto eval_loss = [&](std::span<const ModelInput> items) {
    nn::NoGradGuard no_grad;
    nn::ForwardMode mode = nn::ForwardMode::eval();
    double total = 0.0, elements = 0.0;
    for (const auto& item : items) {
      auto [loss, count] = loss_of(item, mode);
      if (count == 0) continue;
      total += static_cast<double>(loss.item()) * count;
      elements += count;
    }
    return elements > 0 ? total / elements : 0.0;
  };

  TrainingResult result;
  std::vector<std::vector<float>> best_values;
  double best_metric = 0.0;
  auto record = [&](std::size_t step, double train_loss) {
    HistoryEntry entry{step, train_loss, metric(valid)};
    if (!std::isfinite(entry.validation_metric)) {
      throw NumericError("validation metric is not finite at step " + std::to_string(step));
    }
    result.history.push_back(entry);
    if (result.history.size() == 1 || entry.validation_metric < best_metric) {
      best_metric = entry.validation_metric;
      if (config.select_best) best_values = nn::snapshot_values(params);
    }
    if (progress) progress(entry);
    return entry;
  };

  record(0, eval_loss(train_sample));
  double window_loss = 0.0;
  std::size_t window_steps = 0;
  for (std::size_t step = 1; step <= config.max_steps; ++step) {
    nn::zero_grads(tensors);
    std::vector<std::size_t> batch;
    for (std::size_t b = 0; b < std::min(config.batch_size, train.size()); ++b) {
      if (cursor == order.size()) {
        shuffle(order, order_rng);
        cursor = 0;
      }
      batch.push_back(order[cursor++]);
    }
    nn::ForwardMode mode{true, &keys};
    std::vector<std::pair<nn::Tensor, std::size_t>> losses;
    double elements = 0.0;
    for (std::size_t idx : batch) {
      losses.push_back(loss_of(train[idx], mode));
      elements += static_cast<double>(losses.back().second);
    }
    double batch_loss = 0.0;
    for (auto& [loss, count] : losses) {
      if (count == 0) continue;
      const float weight = static_cast<float>(count / elements);
      batch_loss += static_cast<double>(loss.item()) * weight;
      nn::scale(loss, weight).backward();
    }
    if (!std::isfinite(batch_loss)) {
      throw NumericError("non-finite training loss at step " + std::to_string(step));
    }
    losses.clear();
    nn::adam_step(tensors, adam);
    window_loss += batch_loss;
    ++window_steps;

    if (step % config.eval_every == 0 || step == config.max_steps) {
      const auto entry = record(step, window_loss / static_cast<double>(window_steps));
      window_loss = 0.0;
      window_steps = 0;
      if (config.stop_below && entry.validation_metric < *config.stop_below) break;
    }
  }

  if (config.select_best) {
    result.selected_step = select_checkpoint(result.history);
    nn::restore_values(params, best_values);
  } else {
    result.selected_step = result.history.back().step;
  }
  return result;
}

json dims_to_json(const EncoderDims& d) {
  return {{"model_dim", d.model_dim}, {"filter_dim", d.filter_dim}, {"kernel_size", d.kernel_size},
          {"heads", d.heads},         {"blocks", d.blocks},         {"dropout", d.dropout}};
}

EncoderDims dims_from_json(const json& j) {
  EncoderDims d;
  d.model_dim = j.at("model_dim").get<std::size_t>();
  d.filter_dim = j.at("filter_dim").get<std::size_t>();
  d.kernel_size = j.at("kernel_size").get<std::size_t>();
  d.heads = j.at("heads").get<std::size_t>();
  d.blocks = j.at("blocks").get<std::size_t>();
  d.dropout = j.at("dropout").get<float>();
  return d;
}

}  // namespace

// ---- Inventory and variants ---------------------------------------------------

PhonemeInventory::PhonemeInventory(std::vector<std::string> symbols) {
  std::set<std::string> seen;
  for (auto& s : symbols) {
    if (seen.insert(s).second) symbols_.push_back(std::move(s));
  }
  for (auto pause : {kPauseIntra, kPauseInter}) {
    if (seen.insert(std::string(pause)).second) symbols_.emplace_back(pause);
  }
}

PhonemeInventory PhonemeInventory::from_corpus(const Corpus& corpus) {
  std::set<std::string> symbols;
  for (const auto& utt : corpus.utterances)
    for (const auto& s : utt.sentences)
      for (const auto& ph : s.phonemes)
        if (!is_pause(ph.symbol)) symbols.insert(ph.symbol);
  return PhonemeInventory(std::vector<std::string>(symbols.begin(), symbols.end()));
}

int PhonemeInventory::index(std::string_view symbol) const {
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    if (symbols_[i] == symbol) return static_cast<int>(i);
  }
  throw UnknownPhonemeError("unknown phoneme '" + std::string(symbol) + "'");
}

std::uint64_t PhonemeInventory::hash() const {
  std::string joined;
  for (const auto& s : symbols_) joined += s + '\n';
  return fnv1a64(joined);
}

VariantFlags flags_of(Variant variant) {
  switch (variant) {
    case Variant::baseline: return {false, false, false};
    case Variant::mt: return {true, false, false};
    case Variant::mtb: return {true, true, false};
    case Variant::mltb: return {true, true, true};
  }
  return {};
}

std::optional<Variant> variant_of(const VariantFlags& flags) {
  for (auto v : {Variant::baseline, Variant::mt, Variant::mtb, Variant::mltb}) {
    if (flags_of(v) == flags) return v;
  }
  return std::nullopt;
}

std::string_view to_string(Variant variant) {
  switch (variant) {
    case Variant::baseline: return "baseline";
    case Variant::mt: return "mt";
    case Variant::mtb: return "mtb";
    case Variant::mltb: return "mltb";
  }
  return "unknown";
}

Variant variant_from_string(std::string_view name) {
  const std::string key = lower(name);
  for (auto v : {Variant::baseline, Variant::mt, Variant::mtb, Variant::mltb}) {
    if (to_string(v) == key) return v;
  }
  throw std::invalid_argument("unknown variant '" + std::string(name) + "' (baseline|mt|mtb|mltb)");
}

ModelConfig ModelConfig::paper(const VariantFlags& flags) {
  ModelConfig c;
  c.dims = EncoderDims::paper();
  c.conditioning = {flags.use_speaker, flags.use_word_embeddings, 256, 768};
  return c;
}

ModelConfig ModelConfig::desk(const VariantFlags& flags) {
  ModelConfig c;
  c.dims = EncoderDims::desk();
  c.conditioning = {flags.use_speaker, flags.use_word_embeddings, 16, 32};
  return c;
}

// ---- Inputs ---------------------------------------------------------------------

ModelInput make_model_input(const Utterance& utterance, const PhonemeInventory& inventory) {
  ModelInput in;
  in.id = utterance.id;
  in.speaker_id = utterance.speaker_id;
  for (const auto& sentence : utterance.sentences) {
    const std::size_t offset = in.symbols.size();
    for (const auto& ph : sentence.phonemes) {
      in.symbols.push_back(ph.symbol);
      in.phoneme_ids.push_back(inventory.index(ph.symbol));
      in.durations.push_back(ph.duration_frames);
    }
    for (const auto& w : sentence.words) in.words.push_back({w.text, w.begin + offset, w.end + offset});
  }
  in.mel = utterance.mel.values;
  return in;
}

std::vector<Chunk> chunks_for_policy(const Corpus& corpus, const std::optional<ChunkPolicy>& policy,
                                     std::vector<std::string>* warnings) {
  if (!policy) return sentence_chunks(corpus);
  auto result = chunk_corpus(corpus, *policy);
  if (warnings) warnings->insert(warnings->end(), result.warnings.begin(), result.warnings.end());
  return std::move(result.chunks);
}

std::vector<ModelInput> make_model_inputs(const Corpus& corpus, std::span<const Chunk> chunks,
                                          const PhonemeInventory& inventory) {
  std::vector<ModelInput> inputs;
  inputs.reserve(chunks.size());
  for (const auto& c : chunks) inputs.push_back(make_model_input(concatenate_chunk(corpus, c), inventory));
  return inputs;
}

// ---- Models -----------------------------------------------------------------------

PhonemeFrontEnd PhonemeFrontEnd::init(const ModelConfig& config, std::size_t inventory_size,
                                      const SubTokenizer& tokenizer, std::uint64_t seed, Rng& rng) {
  PhonemeFrontEnd f;
  f.embedding = embedding_table(inventory_size, config.dims.model_dim, rng);
  f.encoder = Encoder::init(config.dims, rng);
  f.conditioning = ConditioningParams::init(config.conditioning, config.dims.model_dim, rng);
  if (config.conditioning.use_word_embeddings) {
    f.words.emplace(config.word_mode, config.conditioning.word_dim, tokenizer,
                    derive_seed(seed, kWordStream));
  }
  return f;
}

nn::Tensor PhonemeFrontEnd::forward(const ModelInput& input, const ModelConfig& config,
                                    const SpeakerTable& speakers, nn::ForwardMode& mode) const {
  if (input.phoneme_ids.size() != input.symbols.size()) {
    throw std::invalid_argument("model input has mismatched symbol and id sequences");
  }
  const nn::Tensor encoded = encoder.forward(nn::gather_rows(embedding, input.phoneme_ids), {}, mode);
  std::span<const float> speaker;
  if (config.conditioning.use_speaker) speaker = speakers.embedding(input.speaker_id);
  nn::Tensor word_matrix;
  if (config.conditioning.use_word_embeddings) {
    word_matrix = align_word_embeddings(input.words, input.symbols, *words);
  }
  return attach_conditioning(encoded, speaker, word_matrix, config.conditioning, conditioning);
}

void PhonemeFrontEnd::collect(const std::string& prefix, nn::ParameterList& out) const {
  out.push_back({prefix + "phoneme_embedding", embedding});
  encoder.collect(prefix + "encoder.", out);
  conditioning.collect(prefix, out);
  if (words) words->collect(prefix, out);
}

DurationModel::DurationModel(ModelConfig config, PhonemeInventory inventory, SpeakerTable speakers,
                             const SubTokenizer& tokenizer, std::uint64_t seed)
    : config_(std::move(config)), inventory_(std::move(inventory)), speakers_(std::move(speakers)) {
  Rng rng(derive_seed(seed, kDurationStream));
  front_ = PhonemeFrontEnd::init(config_, inventory_.size(), tokenizer, seed, rng);
  regressor_weight_ = glorot_uniform({config_.dims.model_dim, 1}, rng);
  regressor_bias_ = zeros_parameter({1});
}

nn::Tensor DurationModel::forward(const ModelInput& input, nn::ForwardMode& mode) const {
  return nn::linear(front_.forward(input, config_, speakers_, mode), regressor_weight_, regressor_bias_);
}

std::vector<float> DurationModel::predict(const ModelInput& input) const {
  nn::NoGradGuard no_grad;
  nn::ForwardMode mode = nn::ForwardMode::eval();
  const nn::Tensor out = forward(input, mode);
  return {out.data().begin(), out.data().end()};
}

nn::ParameterList DurationModel::parameters() const {
  nn::ParameterList out;
  front_.collect("duration.", out);
  out.push_back({"duration.regressor.w", regressor_weight_});
  out.push_back({"duration.regressor.b", regressor_bias_});
  return out;
}

void DurationModel::set_output_bias(float value) { regressor_bias_.mutable_data()[0] = value; }

AcousticModel::AcousticModel(ModelConfig config, PhonemeInventory inventory, SpeakerTable speakers,
                             const SubTokenizer& tokenizer, std::uint64_t seed)
    : config_(std::move(config)), inventory_(std::move(inventory)), speakers_(std::move(speakers)) {
  Rng rng(derive_seed(seed, kAcousticStream));
  front_ = PhonemeFrontEnd::init(config_, inventory_.size(), tokenizer, seed, rng);
  frame_encoder_ = Encoder::init(config_.dims, rng);
  mel_weight_ = glorot_uniform({config_.dims.model_dim, kMelBands}, rng);
  mel_bias_ = zeros_parameter({kMelBands});
}

nn::Tensor AcousticModel::forward(const ModelInput& input, std::span<const int> durations,
                                  nn::ForwardMode& mode) const {
  if (durations.size() != input.size()) {
    throw std::invalid_argument("acoustic model: " + std::to_string(durations.size()) +
                                " durations for " + std::to_string(input.size()) + " phonemes");
  }
  const nn::Tensor phonemes = front_.forward(input, config_, speakers_, mode);
  const nn::Tensor frames = length_regulate(phonemes, durations);
  if (frames.rows() == 0) return nn::Tensor::zeros({0, kMelBands});
  return nn::linear(frame_encoder_.forward(frames, {}, mode), mel_weight_, mel_bias_);
}

MelSpectrogram AcousticModel::predict(const ModelInput& input, std::span<const int> durations) const {
  nn::NoGradGuard no_grad;
  nn::ForwardMode mode = nn::ForwardMode::eval();
  const nn::Tensor out = forward(input, durations, mode);
  return {out.rows(), {out.data().begin(), out.data().end()}};
}

nn::ParameterList AcousticModel::parameters() const {
  nn::ParameterList out;
  front_.collect("acoustic.", out);
  frame_encoder_.collect("acoustic.frame_encoder.", out);
  out.push_back({"acoustic.mel.w", mel_weight_});
  out.push_back({"acoustic.mel.b", mel_bias_});
  return out;
}

void AcousticModel::set_output_bias(std::span<const float> per_band) {
  if (per_band.size() != kMelBands) throw std::invalid_argument("mel bias needs 80 values");
  std::copy(per_band.begin(), per_band.end(), mel_bias_.mutable_data().begin());
}

std::vector<float> duration_forward(const DurationModel& model, const ModelInput& input) {
  return model.predict(input);
}

MelSpectrogram acoustic_forward(const AcousticModel& model, const ModelInput& input,
                                std::span<const int> durations) {
  return model.predict(input, durations);
}

// ---- Training -------------------------------------------------------------------

TrainConfig TrainConfig::desk() { return {}; }

TrainConfig TrainConfig::paper_duration(bool long_context) {
  TrainConfig c;
  c.preset = Preset::paper;
  c.batch_size = long_context ? 24 : 48;
  c.learning_rate = 1e-5f;
  c.max_steps = 2'000'000;
  c.eval_every = 10'000;
  c.select_best = true;
  return c;
}

TrainConfig TrainConfig::paper_acoustic(bool long_context) {
  TrainConfig c;
  c.preset = Preset::paper;
  c.batch_size = long_context ? 45 : 60;
  c.learning_rate = 2e-5f;
  c.max_steps = long_context ? 120'000 : 200'000;
  c.eval_every = 10'000;
  c.select_best = false;
  return c;
}

double duration_mae(const DurationModel& model, std::span<const ModelInput> inputs) {
  std::vector<double> pred, ref;
  for (const auto& in : inputs) {
    const auto out = model.predict(in);
    pred.insert(pred.end(), out.begin(), out.end());
    ref.insert(ref.end(), in.durations.begin(), in.durations.end());
  }
  return eval::mae(pred, ref);
}

double acoustic_mse(const AcousticModel& model, std::span<const ModelInput> inputs) {
  std::vector<double> pred, ref;
  for (const auto& in : inputs) {
    const auto mel = model.predict(in, in.durations);
    pred.insert(pred.end(), mel.values.begin(), mel.values.end());
    ref.insert(ref.end(), in.mel.begin(), in.mel.end());
  }
  return eval::mse(pred, ref);
}

TrainingResult train_duration(DurationModel& model, std::span<const ModelInput> train,
                              std::span<const ModelInput> validation, const TrainConfig& config,
                              const ProgressCallback& progress) {
  if (train.empty()) throw std::invalid_argument("training split is empty");
  if (config.init_output_bias) {
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& in : train) {
      for (int d : in.durations) total += d;
      count += in.durations.size();
    }
    if (count) model.set_output_bias(static_cast<float>(total / static_cast<double>(count)));
  }
  auto loss_of = [&model](const ModelInput& in, nn::ForwardMode& mode) {
    const nn::Tensor pred = model.forward(in, mode);
    std::vector<float> target(in.durations.begin(), in.durations.end());
    const nn::Tensor ref = nn::Tensor::from_data({in.size(), 1}, std::move(target));
    return std::pair{nn::l1_loss(pred, ref), in.size()};
  };
  auto metric = [&model](std::span<const ModelInput> items) { return duration_mae(model, items); };
  return run_training(model.parameters(), train, validation, config, loss_of, metric, progress);
}

TrainingResult train_acoustic(AcousticModel& model, std::span<const ModelInput> train,
                              std::span<const ModelInput> validation, const TrainConfig& config,
                              const ProgressCallback& progress) {
  if (train.empty()) throw std::invalid_argument("training split is empty");
  for (const auto& in : train) {
    if (in.mel.size() != static_cast<std::size_t>(std::accumulate(in.durations.begin(), in.durations.end(), 0)) * kMelBands) {
      throw std::invalid_argument("training input " + in.id + " has no mel matching its durations");
    }
  }
  if (config.init_output_bias) {
    std::vector<double> sums(kMelBands, 0.0);
    std::size_t frames = 0;
    for (const auto& in : train) {
      for (std::size_t i = 0; i < in.mel.size(); ++i) sums[i % kMelBands] += in.mel[i];
      frames += in.mel.size() / kMelBands;
    }
    if (frames) {
      std::vector<float> bias(kMelBands);
      for (std::size_t b = 0; b < kMelBands; ++b) bias[b] = static_cast<float>(sums[b] / static_cast<double>(frames));
      model.set_output_bias(bias);
    }
  }
  auto loss_of = [&model](const ModelInput& in, nn::ForwardMode& mode) {
    const nn::Tensor pred = model.forward(in, in.durations, mode);
    const nn::Tensor ref = nn::Tensor::from_data({pred.rows(), kMelBands}, in.mel);
    return std::pair{nn::mse_loss(pred, ref), in.mel.size()};
  };
  auto metric = [&model](std::span<const ModelInput> items) { return acoustic_mse(model, items); };
  return run_training(model.parameters(), train, validation, config, loss_of, metric, progress);
}

std::size_t select_checkpoint(std::span<const HistoryEntry> history) {
  if (history.empty()) throw std::invalid_argument("select_checkpoint: empty history");
  const HistoryEntry* best = &history.front();
  for (const auto& e : history) {
    if (e.validation_metric < best->validation_metric ||
        (e.validation_metric == best->validation_metric && e.step < best->step)) {
      best = &e;
    }
  }
  return best->step;
}

std::pair<std::vector<ModelInput>, std::vector<ModelInput>> split_train_validation(
    std::vector<ModelInput> inputs, double validation_fraction, std::uint64_t seed) {
  if (validation_fraction < 0.0 || validation_fraction >= 1.0) {
    throw std::invalid_argument("validation fraction must lie in [0, 1)");
  }
  std::size_t held = static_cast<std::size_t>(validation_fraction * static_cast<double>(inputs.size()));
  if (validation_fraction > 0.0 && held == 0 && inputs.size() >= 2) held = 1;
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, kShuffleStream + 1));
  shuffle(order, rng);
  std::vector<bool> is_valid(inputs.size(), false);
  for (std::size_t i = 0; i < held; ++i) is_valid[order[i]] = true;
  std::vector<ModelInput> train, valid;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    (is_valid[i] ? valid : train).push_back(std::move(inputs[i]));
  }
  return {std::move(train), std::move(valid)};
}

// ---- Bundles ------------------------------------------------------------------------

VariantFlags ModelBundle::flags() const {
  return {config.conditioning.use_speaker, config.conditioning.use_word_embeddings,
          chunk_policy.has_value()};
}

ModelBundle make_bundle(const Corpus& corpus, const ModelConfig& config, const VariantFlags& flags,
                        std::uint64_t seed, const ChunkPolicy& long_context_policy) {
  ModelBundle b;
  b.config = config;
  b.config.conditioning.use_speaker = flags.use_speaker;
  b.config.conditioning.use_word_embeddings = flags.use_word_embeddings;
  if (flags.long_context) b.chunk_policy = long_context_policy;
  b.inventory = PhonemeInventory::from_corpus(corpus);
  b.seed = seed;

  std::set<std::string> speaker_ids, words;
  for (const auto& utt : corpus.utterances) {
    speaker_ids.insert(utt.speaker_id);
    for (const auto& s : utt.sentences)
      for (const auto& w : s.words) words.insert(w.text);
  }
  const std::vector<std::string> ids(speaker_ids.begin(), speaker_ids.end());
  b.speakers = SpeakerTable::random(ids, b.config.conditioning.speaker_dim, derive_seed(seed, kSpeakerStream));
  const std::vector<std::string> word_list(words.begin(), words.end());
  b.tokenizer = SubTokenizer::build(word_list);
  b.duration.emplace(b.config, b.inventory, b.speakers, b.tokenizer, seed);
  b.acoustic.emplace(b.config, b.inventory, b.speakers, b.tokenizer, seed);
  return b;
}

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json manifest;
  manifest["format_version"] = kManifestVersion;
  const auto flags = bundle.flags();
  const auto variant = variant_of(flags);
  manifest["variant"] = variant ? std::string(to_string(*variant)) : std::string("custom");
  manifest["flags"] = {{"use_speaker", flags.use_speaker},
                       {"use_word_embeddings", flags.use_word_embeddings},
                       {"long_context", flags.long_context}};
  manifest["dims"] = dims_to_json(bundle.config.dims);
  manifest["speaker_dim"] = bundle.config.conditioning.speaker_dim;
  manifest["word_dim"] = bundle.config.conditioning.word_dim;
  manifest["word_mode"] = std::string(to_string(bundle.config.word_mode));
  manifest["chunk_policy"] = bundle.chunk_policy
                                 ? json{{"max_seconds", bundle.chunk_policy->max_seconds},
                                        {"frame_shift_ms", bundle.chunk_policy->frame_shift_ms}}
                                 : json(nullptr);
  manifest["inventory"] = bundle.inventory.symbols();
  char hash[24];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(bundle.inventory.hash()));
  manifest["inventory_hash"] = hash;
  manifest["tokenizer"] = {{"max_piece", bundle.tokenizer.max_piece()},
                           {"vocabulary", bundle.tokenizer.vocabulary()}};
  manifest["seed"] = bundle.seed;
  manifest["has_duration"] = bundle.duration.has_value();
  manifest["has_acoustic"] = bundle.acoustic.has_value();

  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
  bundle.speakers.save_csv(dir / "speakers.csv");
  if (bundle.duration) nn::save_checkpoint(dir / "duration.ckpt", bundle.duration->parameters());
  if (bundle.acoustic) nn::save_checkpoint(dir / "acoustic.ckpt", bundle.acoustic->parameters());
}

ModelBundle load_bundle(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw std::runtime_error("cannot open bundle manifest " + (dir / "manifest.json").string());
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error((dir / "manifest.json").string() + ": " + e.what());
  }
  ModelBundle b;
  try {
    if (manifest.at("format_version").get<int>() != kManifestVersion) {
      throw std::runtime_error("unsupported bundle format version");
    }
    const auto& flags = manifest.at("flags");
    b.config.dims = dims_from_json(manifest.at("dims"));
    b.config.conditioning.use_speaker = flags.at("use_speaker").get<bool>();
    b.config.conditioning.use_word_embeddings = flags.at("use_word_embeddings").get<bool>();
    b.config.conditioning.speaker_dim = manifest.at("speaker_dim").get<std::size_t>();
    b.config.conditioning.word_dim = manifest.at("word_dim").get<std::size_t>();
    b.config.word_mode = word_embedding_mode_from_string(manifest.at("word_mode").get<std::string>());
    if (!manifest.at("chunk_policy").is_null()) {
      b.chunk_policy = ChunkPolicy{manifest["chunk_policy"].at("max_seconds").get<double>(),
                                   manifest["chunk_policy"].at("frame_shift_ms").get<double>()};
    }
    b.inventory = PhonemeInventory(manifest.at("inventory").get<std::vector<std::string>>());
    b.tokenizer = SubTokenizer(manifest.at("tokenizer").at("vocabulary").get<std::vector<std::string>>(),
                               manifest.at("tokenizer").at("max_piece").get<std::size_t>());
    b.seed = manifest.at("seed").get<std::uint64_t>();
    b.speakers = SpeakerTable::load_csv(dir / "speakers.csv");
    if (manifest.at("has_duration").get<bool>()) {
      b.duration.emplace(b.config, b.inventory, b.speakers, b.tokenizer, b.seed);
      auto params = b.duration->parameters();
      nn::load_checkpoint(dir / "duration.ckpt", params);
    }
    if (manifest.at("has_acoustic").get<bool>()) {
      b.acoustic.emplace(b.config, b.inventory, b.speakers, b.tokenizer, b.seed);
      auto params = b.acoustic->parameters();
      nn::load_checkpoint(dir / "acoustic.ckpt", params);
    }
  } catch (const json::exception& e) {
    throw std::runtime_error((dir / "manifest.json").string() + ": " + e.what());
  }
  return b;
}

// ---- Synthesis ------------------------------------------------------------------------

std::optional<std::string> chunking_mismatch(const std::optional<ChunkPolicy>& trained,
                                             const std::optional<ChunkPolicy>& input) {
  char msg[200];
  if (!trained && !input) return std::nullopt;
  if (!trained) {
    std::snprintf(msg, sizeof msg,
                  "model was trained on single sentences but the input is chunked up to %.2f s",
                  input->max_seconds);
    return msg;
  }
  if (!input) {
    std::snprintf(msg, sizeof msg,
                  "model was trained on chunks up to %.2f s but the input is single sentences",
                  trained->max_seconds);
    return msg;
  }
  if (*trained != *input) {
    std::snprintf(msg, sizeof msg, "model was trained on chunks up to %.2f s but the input uses %.2f s",
                  trained->max_seconds, input->max_seconds);
    return msg;
  }
  return std::nullopt;
}

std::vector<int> round_durations(std::span<const float> raw) {
  std::vector<int> out;
  out.reserve(raw.size());
  for (float d : raw) {
    const long r = std::isfinite(d) ? std::lround(d) : 1;
    out.push_back(static_cast<int>(std::max(1L, r)));
  }
  return out;
}

SynthesisOutput synthesize(const ModelBundle& bundle, const Utterance& text_chunk,
                           const std::string& speaker_id,
                           const std::optional<ChunkPolicy>& input_policy) {
  if (!bundle.duration) throw std::invalid_argument("bundle has no duration model");
  SynthesisOutput out;
  if (auto mismatch = chunking_mismatch(bundle.chunk_policy, input_policy)) {
    out.warnings.push_back(*mismatch);
  }
  ModelInput input = make_model_input(text_chunk, bundle.inventory);
  input.speaker_id = speaker_id;
  if (bundle.config.conditioning.use_speaker && !bundle.speakers.contains(speaker_id)) {
    throw std::invalid_argument("unknown speaker '" + speaker_id + "'");
  }
  out.raw_durations = bundle.duration->predict(input);
  out.durations = round_durations(out.raw_durations);
  if (bundle.acoustic) out.mel = bundle.acoustic->predict(input, out.durations);
  return out;
}

eval::DurationRecords predict_durations(const ModelBundle& bundle, const Corpus& corpus,
                                        std::span<const Chunk> chunks) {
  if (!bundle.duration) throw std::invalid_argument("bundle has no duration model");
  eval::DurationRecords records;
  for (const auto& chunk : chunks) {
    const Utterance& source = corpus.utterances.at(chunk.utterance_index);
    std::size_t offset = 0;
    for (std::size_t s = 0; s < chunk.first_sentence; ++s) offset += source.sentences[s].phonemes.size();
    const ModelInput input = make_model_input(concatenate_chunk(corpus, chunk), bundle.inventory);
    const auto predicted = round_durations(bundle.duration->predict(input));
    for (std::size_t i = 0; i < input.size(); ++i) {
      records.utterance_ids.push_back(chunk.source_utterance_id);
      records.phoneme_indices.push_back(offset + i);
      records.symbols.push_back(input.symbols[i]);
      records.predicted.push_back(predicted[i]);
      records.reference.push_back(input.durations[i]);
    }
  }
  return records;
}

}  // namespace prosody
