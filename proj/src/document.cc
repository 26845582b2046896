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
#include <cctype>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>

#include "kvpf/document.h"

namespace kvpf {

std::string_view label_name(Label label) {
  switch (label) {
    case Label::kQuestion: return "question";
    case Label::kAnswer: return "answer";
    case Label::kHeader: return "header";
    case Label::kOther: return "other";
  }
  return "other";
}

std::optional<Label> parse_label(std::string_view name) {
  std::string lower(name);
  for (char& c : lower) c = static_cast<char>(std::tolower(c));
  for (int i = 0; i < kNumLabels; ++i) {
    Label label = static_cast<Label>(i);
    if (lower == label_name(label)) return label;
  }
  return std::nullopt;
}

int Document::index_of(int entity_id) const {
  for (size_t i = 0; i < entities.size(); ++i) {
    if (entities[i].id == entity_id) return static_cast<int>(i);
  }
  return -1;
}

void validate(const Document& doc) {
  std::set<int> ids;
  for (const Entity& e : doc.entities) {
    if (!ids.insert(e.id).second) {
      throw std::invalid_argument("document " + doc.id +
                                  ": duplicate entity id " +
                                  std::to_string(e.id));
    }
  }
  for (const RelationPair& p : doc.gold_pairs) {
    if (p.key_id == p.value_id) {
      throw std::invalid_argument("document " + doc.id + ": self link on " +
                                  std::to_string(p.key_id));
    }
    for (int id : {p.key_id, p.value_id}) {
      if (!ids.count(id)) {
        throw std::invalid_argument("document " + doc.id +
                                    ": link references unknown entity " +
                                    std::to_string(id));
      }
    }
  }
}

std::vector<WordRef> reading_order(const Document& doc) {
  struct Item {
    long line;
    int x1;
    int entity_id;
    int word_index;
  };
  std::vector<int> heights;
  for (const Entity& e : doc.entities) {
    for (const Word& w : e.words) heights.push_back(w.box.height());
  }
  if (heights.empty()) return {};
  std::nth_element(heights.begin(), heights.begin() + heights.size() / 2,
                   heights.end());
  const double line_height = std::max(1, heights[heights.size() / 2]);

  std::vector<Item> items;
  items.reserve(heights.size());
  for (const Entity& e : doc.entities) {
    for (size_t k = 0; k < e.words.size(); ++k) {
      const BBox& b = e.words[k].box;
      items.push_back({static_cast<long>(std::floor(b.center_y() / line_height)),
                       b.x1, e.id, static_cast<int>(k)});
    }
  }
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
    return std::tie(a.line, a.x1, a.entity_id, a.word_index) <
           std::tie(b.line, b.x1, b.entity_id, b.word_index);
  });
  std::vector<WordRef> order;
  order.reserve(items.size());
  for (const Item& it : items) order.emplace_back(it.entity_id, it.word_index);
  return order;
}

}  // namespace kvpf
