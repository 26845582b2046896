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

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <string>

#include "kvpf/document.h"

namespace kvpf {
namespace {

constexpr std::array<const char*, 16> kValueWords = {
    "alpha", "bravo", "smith", "2019",  "paris", "blue",  "42",    "acme",
    "north", "yes",   "none",  "13.50", "jones", "march", "kg",    "boston"};
constexpr std::array<const char*, 8> kOtherWords = {
    "page", "confidential", "see", "reverse", "form", "rev", "notes", "draft"};
constexpr int kCharWidth = 7;

// Portable draws; std distributions differ between standard libraries.
int draw(std::mt19937_64& rng, int n) {
  return static_cast<int>(rng() % static_cast<std::uint64_t>(n));
}

Entity make_entity(const std::vector<std::string>& tokens, int x, int y,
                   int line_height, Label label) {
  Entity e;
  e.label = label;
  int cursor = x;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) {
      e.text += ' ';
      cursor += kCharWidth;
    }
    e.text += tokens[i];
    const int w = kCharWidth * static_cast<int>(tokens[i].size());
    e.words.push_back({tokens[i], BBox::make(cursor, y, cursor + w, y + line_height)});
    cursor += w;
  }
  e.box = e.words.front().box;
  for (const Word& w : e.words) e.box = union_box(e.box, w.box);
  return e;
}

}  // namespace

std::vector<Document> synth_forms(std::uint64_t seed, int count,
                                  const SynthOptions& options) {
  std::vector<Document> docs;
  if (count < 1 || options.rows < 1 || options.cols < 1) return docs;
  std::mt19937_64 rng(seed);
  const int cells = options.rows * options.cols;
  const int cell_w = kPageScale / options.cols;
  const int cell_h = kPageScale / options.rows;
  const int line_h = std::clamp(cell_h / 8, 4, 24);
  const int num_other = static_cast<int>(
      std::lround(options.distractor_fraction * 2.0 * cells));

  for (int d = 0; d < count; ++d) {
    std::vector<Entity> ents;
    std::vector<std::pair<size_t, size_t>> links;
    for (int cell = 0; cell < cells; ++cell) {
      const int x0 = (cell % options.cols) * cell_w + 5 + draw(rng, 10);
      const int y0 = (cell / options.cols) * cell_h + 5 + draw(rng, 10);
      const int field = draw(rng, 100);
      Entity key = make_entity({"field_" + std::to_string(field) + ":"}, x0,
                               y0, line_h, Label::kQuestion);
      std::vector<std::string> value_tokens = {kValueWords[draw(rng, kValueWords.size())]};
      if (draw(rng, 2) == 0) value_tokens.push_back(kValueWords[draw(rng, kValueWords.size())]);
      const bool right = draw(rng, 2) == 0;
      const int vx = right ? key.box.x2 + 8 + draw(rng, 20) : x0 + draw(rng, 10);
      const int vy = right ? y0 : key.box.y2 + 4 + draw(rng, 6);
      Entity value = make_entity(value_tokens, vx, vy, line_h, Label::kAnswer);
      ents.push_back(std::move(key));
      ents.push_back(std::move(value));
      links.emplace_back(ents.size() - 2, ents.size() - 1);
    }
    for (int k = 0; k < num_other; ++k) {
      const int cell = k % cells;
      const int slot = k / cells;
      const int x = (cell % options.cols) * cell_w + 5 + slot * (cell_w / 3) + draw(rng, 8);
      const int y = (cell / options.cols) * cell_h + cell_h * 2 / 3 + draw(rng, 8);
      ents.push_back(make_entity({kOtherWords[draw(rng, kOtherWords.size())]}, x, y,
                                 line_h, Label::kOther));
    }

    // Shuffle id assignment so ids carry no layout information.
    std::vector<int> ids(ents.size());
    for (size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
    for (size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[draw(rng, static_cast<int>(i))]);
    for (size_t i = 0; i < ents.size(); ++i) ents[i].id = ids[i];

    Document doc;
    doc.id = "synth_" + std::to_string(seed) + "_" + std::to_string(d);
    for (auto [k, v] : links) {
      RelationPair p{ents[k].id, ents[v].id};
      ents[k].links.push_back(p);
      ents[v].links.push_back(p);
      doc.gold_pairs.insert(p);
    }
    std::sort(ents.begin(), ents.end(),
              [](const Entity& a, const Entity& b) { return a.id < b.id; });
    doc.entities = std::move(ents);
    docs.push_back(std::move(doc));
  }
  return docs;
}

}  // namespace kvpf
