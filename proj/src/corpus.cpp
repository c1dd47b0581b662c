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

#include "prosody/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "prosody/random.hpp"

namespace prosody {

static_assert(std::endian::native == std::endian::little,
              "mel I/O assumes a little-endian host");

namespace {

using json = nlohmann::json;

constexpr std::array<std::string_view, kSentenceKindCount> kKindNames = {
    "declarative", "wh_question", "yn_question", "topic_shift"};

// Sentence-opening words; the first word of every sentence comes from its
// kind's list, which is what makes a sentence's kind visible in its text.
constexpr std::array<std::array<std::string_view, 4>, kSentenceKindCount> kMarkers = {{
    {"the", "a", "this", "our"},
    {"what", "where", "why", "who"},
    {"is", "does", "can", "will"},
    {"meanwhile", "however", "anyway", "later"},
}};

// Prosody of the synthetic speakers, per sentence kind.
constexpr std::array<double, kSentenceKindCount> kKindRate = {1.0, 0.95, 1.05, 1.1};
constexpr std::array<double, kSentenceKindCount> kKindAmplitude = {1.0, 1.05, 0.95, 1.1};
// Effect of the NEXT sentence's kind on the boundary pause and on the pace of
// the current sentence's opening word.
constexpr std::array<double, kSentenceKindCount> kInterPauseOffset = {0.0, 24.0, -12.0, 48.0};
constexpr std::array<double, kSentenceKindCount> kOpeningPaceOffset = {0.0, -0.15, 0.1, 0.25};

constexpr double kInterPauseBase = 30.0;
constexpr double kInterPauseNoise = 4.0;
constexpr double kIntraPauseBase = 12.0;
constexpr double kIntraPauseNoise = 2.5;
constexpr double kPhonemeNoise = 0.4;
constexpr double kIntraPauseProbability = 0.12;
constexpr int kMinWords = 3;
constexpr int kMaxWords = 8;
constexpr int kLexiconSize = 240;

struct SpectralTemplate {
  double center;
  double width;
  double amplitude;
  double drift;
};

struct SpeakerVoice {
  double rate;
  double shift;
  double tilt;
};

struct LexiconEntry {
  std::string text;
  std::vector<int> phonemes;
};

// Everything shared by all utterances of one corpus.
struct Lexicon {
  std::vector<std::string> symbols;  // non-pause symbols
  std::vector<int> base_duration;
  std::vector<SpectralTemplate> templates;
  std::vector<SpeakerVoice> speakers;
  std::vector<LexiconEntry> words;
  std::array<std::array<LexiconEntry, 4>, kSentenceKindCount> markers;
};

std::vector<int> random_spelling(Rng& rng, int inventory) {
  std::vector<int> ids(static_cast<std::size_t>(rng.uniform_int(2, 5)));
  for (auto& id : ids) id = rng.uniform_int(0, inventory - 1);
  return ids;
}

Lexicon build_lexicon(const CorpusSpec& spec) {
  Rng rng(derive_seed(spec.seed, 0xC0FFEE));
  Lexicon lex;
  const int inventory = spec.phoneme_inventory_size;
  for (int i = 0; i < inventory; ++i) {
    lex.symbols.push_back("p" + std::to_string(i));
    lex.base_duration.push_back(rng.uniform_int(3, 9));
    lex.templates.push_back({rng.uniform(8.0, 72.0), rng.uniform(3.0, 9.0),
                             rng.uniform(0.5, 0.9), rng.uniform(-2.0, 2.0)});
  }
  for (int s = 0; s < spec.num_speakers; ++s) {
    lex.speakers.push_back({rng.uniform(0.85, 1.15), rng.uniform(-3.0, 3.0),
                            rng.uniform(-0.08, 0.08)});
  }
  std::set<std::string> taken;
  for (std::size_t k = 0; k < kSentenceKindCount; ++k) {
    for (std::size_t m = 0; m < 4; ++m) {
      lex.markers[k][m] = {std::string(kMarkers[k][m]), random_spelling(rng, inventory)};
      taken.insert(lex.markers[k][m].text);
    }
  }
  static constexpr std::string_view kOnsets = "bdfgklmnprstvz";
  static constexpr std::string_view kVowels = "aeiou";
  while (static_cast<int>(lex.words.size()) < kLexiconSize) {
    std::string text;
    const int syllables = rng.uniform_int(1, 3);
    for (int s = 0; s < syllables; ++s) {
      text += kOnsets[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(kOnsets.size()) - 1))];
      text += kVowels[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(kVowels.size()) - 1))];
    }
    if (!taken.insert(text).second) continue;
    lex.words.push_back({std::move(text), random_spelling(rng, inventory)});
  }
  return lex;
}

int round_duration(double frames) {
  return std::max(1, static_cast<int>(std::lround(frames)));
}

void render_phoneme(const Lexicon& lex, const std::string& symbol, int duration,
                    const SpeakerVoice& voice, SentenceKind kind, std::vector<float>& out) {
  const bool pause = is_pause(symbol);
  const SpectralTemplate* tpl = nullptr;
  if (!pause) tpl = &lex.templates[static_cast<std::size_t>(std::stoi(symbol.substr(1)))];
  const double kind_amp = kKindAmplitude[static_cast<std::size_t>(kind)];
  for (int j = 0; j < duration; ++j) {
    const double t = (j + 0.5) / duration;
    for (std::size_t b = 0; b < kMelBands; ++b) {
      double v = 0.1 + voice.tilt * (static_cast<double>(b) / (kMelBands - 1) - 0.5);
      if (tpl) {
        const double center = tpl->center + voice.shift + tpl->drift * (t - 0.5);
        const double z = (static_cast<double>(b) - center) / tpl->width;
        v += tpl->amplitude * kind_amp * (0.92 + 0.08 * std::sin(std::numbers::pi * t)) *
             std::exp(-0.5 * z * z);
      }
      out.push_back(static_cast<float>(v));
    }
  }
}

Utterance generate_utterance(const CorpusSpec& spec, const Lexicon& lex, int index) {
  Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(index) + 1));
  const int speaker = index % spec.num_speakers;
  const SpeakerVoice& voice = lex.speakers[static_cast<std::size_t>(speaker)];
  const double coupling = spec.context_coupling;

  Utterance utt;
  char id[32];
  std::snprintf(id, sizeof id, "utt%05d", index);
  utt.id = id;
  utt.speaker_id = "spk" + std::to_string(speaker);

  const int count = rng.uniform_int(spec.min_sentences, spec.max_sentences);
  std::vector<SentenceKind> kinds(static_cast<std::size_t>(count));
  for (auto& k : kinds) k = static_cast<SentenceKind>(rng.uniform_int(0, static_cast<int>(kSentenceKindCount) - 1));

  double mean_inter_offset = 0.0;
  for (double o : kInterPauseOffset) mean_inter_offset += o / kSentenceKindCount;

  for (int s = 0; s < count; ++s) {
    Sentence sentence;
    sentence.kind = kinds[static_cast<std::size_t>(s)];
    const bool has_next = s + 1 < count;
    const auto next_kind = has_next ? static_cast<std::size_t>(kinds[static_cast<std::size_t>(s) + 1]) : 0;
    const double kind_rate = kKindRate[static_cast<std::size_t>(sentence.kind)];
    const int words = rng.uniform_int(kMinWords, kMaxWords);

    for (int w = 0; w < words; ++w) {
      const LexiconEntry& entry =
          w == 0 ? lex.markers[static_cast<std::size_t>(sentence.kind)]
                              [static_cast<std::size_t>(rng.uniform_int(0, 3))]
                 : lex.words[static_cast<std::size_t>(rng.uniform_int(0, kLexiconSize - 1))];
      const double pace = (w == 0 && has_next) ? 1.0 + coupling * kOpeningPaceOffset[next_kind] : 1.0;
      Word word{entry.text, sentence.phonemes.size(), 0};
      for (int id : entry.phonemes) {
        const double mean = lex.base_duration[static_cast<std::size_t>(id)] * voice.rate * kind_rate * pace;
        sentence.phonemes.push_back(
            {lex.symbols[static_cast<std::size_t>(id)], round_duration(rng.normal(mean, kPhonemeNoise))});
      }
      word.end = sentence.phonemes.size();
      sentence.words.push_back(std::move(word));
      if (w + 1 < words && rng.bernoulli(kIntraPauseProbability)) {
        sentence.phonemes.push_back(
            {std::string(kPauseIntra),
             round_duration(rng.normal(kIntraPauseBase * voice.rate, kIntraPauseNoise))});
      }
    }
    if (has_next) {
      const double mean = kInterPauseBase * voice.rate + coupling * kInterPauseOffset[next_kind] +
                          (1.0 - coupling) * mean_inter_offset;
      sentence.phonemes.push_back(
          {std::string(kPauseInter), round_duration(rng.normal(mean, kInterPauseNoise))});
    }
    utt.sentences.push_back(std::move(sentence));
  }

  std::vector<float> mel;
  mel.reserve(static_cast<std::size_t>(utt.total_frames()) * kMelBands);
  for (const auto& sentence : utt.sentences) {
    for (const auto& ph : sentence.phonemes) {
      render_phoneme(lex, ph.symbol, ph.duration_frames, voice, sentence.kind, mel);
    }
  }
  utt.mel.frames = mel.size() / kMelBands;
  utt.mel.values = std::move(mel);
  return utt;
}

// ---- JSON helpers ---------------------------------------------------------

const json& require_field(const json& obj, const std::string& key, const std::string& path,
                          std::size_t line) {
  if (!obj.is_object()) throw CorpusFormatError(line, path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw CorpusFormatError(line, path + key, "missing field");
  return *it;
}

std::string require_string(const json& obj, const std::string& key, const std::string& path,
                           std::size_t line) {
  const json& v = require_field(obj, key, path, line);
  if (!v.is_string()) throw CorpusFormatError(line, path + key, "expected a string");
  return v.get<std::string>();
}

const json& require_array(const json& obj, const std::string& key, const std::string& path,
                          std::size_t line) {
  const json& v = require_field(obj, key, path, line);
  if (!v.is_array()) throw CorpusFormatError(line, path + key, "expected an array");
  return v;
}

std::string sanitize(const std::string& id) {
  std::string out = id;
  for (auto& c : out) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  }
  return out;
}

json utterance_to_json(const Utterance& utt, const std::string& mel_path) {
  json sentences = json::array();
  json durations = json::array();
  for (const auto& sentence : utt.sentences) {
    json words = json::array();
    json pauses = json::array();
    // Map each phoneme to its word; pauses record the word they follow.
    std::vector<int> owner(sentence.phonemes.size(), -1);
    for (std::size_t w = 0; w < sentence.words.size(); ++w) {
      for (std::size_t i = sentence.words[w].begin; i < sentence.words[w].end; ++i) {
        owner[i] = static_cast<int>(w);
      }
    }
    int last_word = -1;
    for (std::size_t i = 0; i < sentence.phonemes.size(); ++i) {
      if (owner[i] >= 0) {
        last_word = owner[i];
      } else {
        pauses.push_back({{"after_word", last_word}, {"symbol", sentence.phonemes[i].symbol}});
      }
      durations.push_back(sentence.phonemes[i].duration_frames);
    }
    for (const auto& word : sentence.words) {
      json phonemes = json::array();
      for (std::size_t i = word.begin; i < word.end; ++i) phonemes.push_back(sentence.phonemes[i].symbol);
      words.push_back({{"text", word.text}, {"phonemes", std::move(phonemes)}});
    }
    sentences.push_back({{"kind", std::string(to_string(sentence.kind))},
                         {"words", std::move(words)},
                         {"pauses", std::move(pauses)}});
  }
  json record;
  record["id"] = utt.id;
  record["speaker_id"] = utt.speaker_id;
  record["sentences"] = std::move(sentences);
  record["durations"] = std::move(durations);
  record["mel_path"] = mel_path;
  return record;
}

Utterance utterance_from_json(const json& record, std::size_t line,
                              const std::filesystem::path& base_dir) {
  Utterance utt;
  utt.id = require_string(record, "id", "", line);
  utt.speaker_id = require_string(record, "speaker_id", "", line);
  const json& sentences = require_array(record, "sentences", "", line);
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    const std::string path = "sentences[" + std::to_string(s) + "].";
    const json& js = sentences[s];
    Sentence sentence;
    const std::string kind = require_string(js, "kind", path, line);
    try {
      sentence.kind = sentence_kind_from_string(kind);
    } catch (const std::invalid_argument&) {
      throw CorpusFormatError(line, path + "kind", "unknown sentence kind '" + kind + "'");
    }
    const json& words = require_array(js, "words", path, line);
    const json& pauses = require_array(js, "pauses", path, line);
    std::unordered_map<int, std::vector<std::string>> pauses_after;
    for (std::size_t p = 0; p < pauses.size(); ++p) {
      const std::string ppath = path + "pauses[" + std::to_string(p) + "].";
      const json& after = require_field(pauses[p], "after_word", ppath, line);
      if (!after.is_number_integer()) throw CorpusFormatError(line, ppath + "after_word", "expected an integer");
      const int after_word = after.get<int>();
      if (after_word < -1 || after_word >= static_cast<int>(words.size())) {
        throw CorpusFormatError(line, ppath + "after_word", "word index out of range");
      }
      std::string symbol = require_string(pauses[p], "symbol", ppath, line);
      if (!is_pause(symbol)) throw CorpusFormatError(line, ppath + "symbol", "not a pause symbol");
      pauses_after[after_word].push_back(std::move(symbol));
    }
    auto emit_pauses = [&](int after) {
      auto it = pauses_after.find(after);
      if (it == pauses_after.end()) return;
      for (auto& sym : it->second) sentence.phonemes.push_back({sym, 0});
    };
    emit_pauses(-1);
    for (std::size_t w = 0; w < words.size(); ++w) {
      const std::string wpath = path + "words[" + std::to_string(w) + "].";
      Word word{require_string(words[w], "text", wpath, line), sentence.phonemes.size(), 0};
      const json& phonemes = require_array(words[w], "phonemes", wpath, line);
      for (std::size_t i = 0; i < phonemes.size(); ++i) {
        if (!phonemes[i].is_string()) {
          throw CorpusFormatError(line, wpath + "phonemes[" + std::to_string(i) + "]", "expected a string");
        }
        sentence.phonemes.push_back({phonemes[i].get<std::string>(), 0});
      }
      word.end = sentence.phonemes.size();
      sentence.words.push_back(std::move(word));
      emit_pauses(static_cast<int>(w));
    }
    utt.sentences.push_back(std::move(sentence));
  }

  const json& durations = require_array(record, "durations", "", line);
  if (durations.size() != utt.phoneme_count()) {
    throw CorpusFormatError(line, "durations",
                            std::to_string(durations.size()) + " durations for " +
                                std::to_string(utt.phoneme_count()) + " phonemes");
  }
  std::size_t k = 0;
  for (auto& sentence : utt.sentences) {
    for (auto& ph : sentence.phonemes) {
      const json& d = durations[k];
      if (!d.is_number_integer() || d.get<long long>() < 0) {
        throw CorpusFormatError(line, "durations[" + std::to_string(k) + "]",
                                "expected a non-negative integer");
      }
      ph.duration_frames = d.get<int>();
      ++k;
    }
  }
  const std::string mel_path = require_string(record, "mel_path", "", line);
  try {
    utt.mel = read_mel(base_dir / mel_path);
  } catch (const std::runtime_error& e) {
    throw CorpusFormatError(line, "mel_path", e.what());
  }
  try {
    validate_utterance(utt);
  } catch (const ValidationError& e) {
    throw ValidationError("line " + std::to_string(line) + ": " + e.what());
  }
  return utt;
}

}  // namespace

std::string_view to_string(SentenceKind kind) { return kKindNames[static_cast<std::size_t>(kind)]; }

SentenceKind sentence_kind_from_string(std::string_view name) {
  for (std::size_t k = 0; k < kKindNames.size(); ++k) {
    if (kKindNames[k] == name) return static_cast<SentenceKind>(k);
  }
  throw std::invalid_argument("unknown sentence kind '" + std::string(name) + "'");
}

int Sentence::total_frames() const {
  int total = 0;
  for (const auto& ph : phonemes) total += ph.duration_frames;
  return total;
}

int Utterance::total_frames() const {
  int total = 0;
  for (const auto& s : sentences) total += s.total_frames();
  return total;
}

std::size_t Utterance::phoneme_count() const {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.phonemes.size();
  return n;
}

CorpusFormatError::CorpusFormatError(std::size_t line, std::string field, const std::string& detail)
    : std::runtime_error("line " + std::to_string(line) + ", field '" + field + "': " + detail),
      line_(line),
      field_(std::move(field)) {}

void validate_utterance(const Utterance& utt) {
  const std::string where = "utterance '" + utt.id + "'";
  for (std::size_t s = 0; s < utt.sentences.size(); ++s) {
    const Sentence& sentence = utt.sentences[s];
    const std::string here = where + " sentence " + std::to_string(s);
    const std::size_t n = sentence.phonemes.size();
    std::vector<int> owner(n, -1);
    std::size_t previous_end = 0;
    for (std::size_t w = 0; w < sentence.words.size(); ++w) {
      const Word& word = sentence.words[w];
      if (word.begin >= word.end || word.end > n || word.begin < previous_end) {
        throw ValidationError(here + ": word " + std::to_string(w) + " has an invalid span");
      }
      previous_end = word.end;
      for (std::size_t i = word.begin; i < word.end; ++i) owner[i] = static_cast<int>(w);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto& ph = sentence.phonemes[i];
      if (ph.duration_frames < 0) throw ValidationError(here + ": negative duration");
      if (is_pause(ph.symbol) && owner[i] >= 0) {
        throw ValidationError(here + ": pause inside word " + std::to_string(owner[i]));
      }
      if (!is_pause(ph.symbol) && owner[i] < 0) {
        throw ValidationError(here + ": phoneme " + std::to_string(i) + " belongs to no word");
      }
      if (ph.symbol == kPauseInter && i + 1 != n) {
        throw ValidationError(here + ": PAU_INTER before sentence end");
      }
    }
  }
  if (utt.mel.frames != static_cast<std::size_t>(utt.total_frames())) {
    throw ValidationError(where + ": mel has " + std::to_string(utt.mel.frames) +
                          " frames but durations sum to " + std::to_string(utt.total_frames()));
  }
  if (utt.mel.values.size() != utt.mel.frames * kMelBands) {
    throw ValidationError(where + ": mel buffer is not frames x 80");
  }
}

std::vector<std::string> standard_inventory(int size) {
  std::vector<std::string> symbols;
  for (int i = 0; i < size; ++i) symbols.push_back("p" + std::to_string(i));
  symbols.emplace_back(kPauseIntra);
  symbols.emplace_back(kPauseInter);
  return symbols;
}

Corpus generate_corpus(const CorpusSpec& spec) {
  if (spec.num_speakers < 1 || spec.num_utterances < 1 || spec.min_sentences < 1 ||
      spec.max_sentences < spec.min_sentences || spec.phoneme_inventory_size < 1) {
    throw std::invalid_argument("corpus spec counts must be >= 1 with min_sentences <= max_sentences");
  }
  if (!(spec.context_coupling >= 0.0 && spec.context_coupling <= 1.0)) {
    throw std::invalid_argument("context_coupling must lie in [0, 1]");
  }
  const Lexicon lex = build_lexicon(spec);
  Corpus corpus;
  corpus.utterances.reserve(static_cast<std::size_t>(spec.num_utterances));
  for (int i = 0; i < spec.num_utterances; ++i) {
    corpus.utterances.push_back(generate_utterance(spec, lex, i));
  }
  return corpus;
}

void write_mel(const MelSpectrogram& mel, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  const std::uint32_t header[2] = {static_cast<std::uint32_t>(mel.frames),
                                   static_cast<std::uint32_t>(kMelBands)};
  out.write(reinterpret_cast<const char*>(header), sizeof header);
  out.write(reinterpret_cast<const char*>(mel.values.data()),
            static_cast<std::streamsize>(mel.values.size() * sizeof(float)));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

MelSpectrogram read_mel(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open mel file " + path.string());
  std::uint32_t header[2] = {0, 0};
  if (!in.read(reinterpret_cast<char*>(header), sizeof header)) {
    throw std::runtime_error(path.string() + ": truncated mel header");
  }
  if (header[1] != kMelBands) {
    throw std::runtime_error(path.string() + ": expected 80 bands, found " + std::to_string(header[1]));
  }
  MelSpectrogram mel;
  mel.frames = header[0];
  mel.values.resize(mel.frames * kMelBands);
  if (!in.read(reinterpret_cast<char*>(mel.values.data()),
               static_cast<std::streamsize>(mel.values.size() * sizeof(float)))) {
    throw std::runtime_error(path.string() + ": truncated mel data");
  }
  return mel;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  const fs::path base = path.parent_path();
  const std::string mel_dir = path.stem().string() + "_mel";
  if (!base.empty()) fs::create_directories(base);
  fs::create_directories(base / mel_dir);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  for (const auto& utt : corpus.utterances) {
    const std::string rel = mel_dir + "/" + sanitize(utt.id) + ".bin";
    write_mel(utt.mel, base / rel);
    out << utterance_to_json(utt, rel).dump() << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus " + path.string());
  Corpus corpus;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(text);
    } catch (const json::parse_error& e) {
      throw CorpusFormatError(line, "<record>", e.what());
    }
    corpus.utterances.push_back(utterance_from_json(record, line, path.parent_path()));
  }
  return corpus;
}

}  // namespace prosody
