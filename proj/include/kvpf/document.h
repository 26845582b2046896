// Copyright 2026 The kvpf Authors.
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

#ifndef KVPF_DOCUMENT_H_
#define KVPF_DOCUMENT_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kvpf/geometry.h"

namespace kvpf {

enum class Label : int { kQuestion = 0, kAnswer = 1, kHeader = 2, kOther = 3 };
inline constexpr int kNumLabels = 4;

std::string_view label_name(Label label);
// Case-insensitive; returns nullopt for unknown strings.
std::optional<Label> parse_label(std::string_view name);

struct Word {
  std::string text;
  BBox box;

  friend bool operator==(const Word&, const Word&) = default;
};

// Directed key -> value link between two entities of one document.
struct RelationPair {
  int key_id = 0;
  int value_id = 0;

  friend auto operator<=>(const RelationPair&, const RelationPair&) = default;
};

using PairSet = std::set<RelationPair>;

struct Entity {
  int id = 0;
  std::string text;
  std::vector<Word> words;
  BBox box;
  Label label = Label::kOther;
  // Raw [from, to] linking entries as they appear in the annotation,
  // duplicates included.
  std::vector<RelationPair> links;

  friend bool operator==(const Entity&, const Entity&) = default;
};

struct Document {
  std::string id;
  std::vector<Entity> entities;
  PairSet gold_pairs;

  // Index of the entity with the given id, or -1.
  int index_of(int entity_id) const;

  friend bool operator==(const Document&, const Document&) = default;
};

// Checks id uniqueness and that every gold pair references two distinct
// entities. Throws std::invalid_argument naming the offending id.
void validate(const Document& doc);

// Position of a word inside a document: (entity id, index into its words).
using WordRef = std::pair<int, int>;

// Words serialized top-left to bottom-right. Lines are formed by bucketing the
// vertical word center by the median word height; within a line words run by
// x1, remaining ties by (entity id, word index).
std::vector<WordRef> reading_order(const Document& doc);

// --- FUNSD / XFUND JSON schema ------------------------------------------

// Parses one annotation file. Throws std::runtime_error mentioning the file
// and the offending field on malformed input.
Document load_funsd_file(const std::filesystem::path& file);

// Parses every *.json file under `path` (or `path` itself if it is a file),
// sorted by file name.
std::vector<Document> load_funsd(const std::filesystem::path& path);

// Serializes in the FUNSD schema; boxes are written on the normalized grid
// together with an "img" block declaring a 1000x1000 page.
std::string to_funsd_json(const Document& doc);
Document parse_funsd_json(std::string_view json, const std::string& doc_id,
                          const std::string& origin);

void write_funsd(const std::filesystem::path& dir,
                 const std::vector<Document>& docs);

// --- synthetic forms ----------------------------------------------------

struct SynthOptions {
  int rows = 2;
  int cols = 2;
  // Other entities added, as a fraction of the key/value entity count,
  // rounded to nearest.
  double distractor_fraction = 0.5;
};

// Deterministic per seed. Every grid cell holds a key "field_k:" and a value
// placed to its right or below, linked key -> value.
std::vector<Document> synth_forms(std::uint64_t seed, int count,
                                  const SynthOptions& options = {});

}  // namespace kvpf

#endif  // KVPF_DOCUMENT_H_
