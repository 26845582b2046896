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
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "kvpf/document.h"

namespace kvpf {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& origin, const std::string& field,
                       const std::string& what) {
  throw std::runtime_error(origin + ": field '" + field + "': " + what);
}

std::string trim(const std::string& s) {
  const char* ws = " \t\r\n\f\v";
  auto b = s.find_first_not_of(ws);
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

BBox read_box(const json& j, double page_w, double page_h,
              const std::string& origin, const std::string& field) {
  if (!j.is_array() || j.size() != 4) fail(origin, field, "expected [x1,y1,x2,y2]");
  double v[4];
  for (int i = 0; i < 4; ++i) {
    if (!j[i].is_number()) fail(origin, field, "coordinate is not a number");
    v[i] = j[i].get<double>();
  }
  try {
    return normalize_box(v[0], v[1], v[2], v[3], page_w, page_h);
  } catch (const std::invalid_argument& e) {
    fail(origin, field, e.what());
  }
}

Entity read_entity(const json& j, double page_w, double page_h,
                   const std::string& origin, size_t index) {
  const std::string at = "form[" + std::to_string(index) + "]";
  if (!j.is_object()) fail(origin, at, "entity is not an object");
  Entity e;
  if (!j.contains("id") || !j["id"].is_number_integer()) {
    fail(origin, at + ".id", "missing or not an integer");
  }
  e.id = j["id"].get<int>();
  if (j.contains("text")) {
    if (!j["text"].is_string()) fail(origin, at + ".text", "not a string");
    e.text = j["text"].get<std::string>();
  }
  if (!j.contains("box")) fail(origin, at + ".box", "missing");
  e.box = read_box(j["box"], page_w, page_h, origin, at + ".box");

  if (!j.contains("label") || !j["label"].is_string()) {
    fail(origin, at + ".label", "missing or not a string");
  }
  auto label = parse_label(j["label"].get<std::string>());
  if (!label) {
    fail(origin, at + ".label",
         "unknown label '" + j["label"].get<std::string>() + "'");
  }
  e.label = *label;

  if (j.contains("words")) {
    const json& words = j["words"];
    if (!words.is_array()) fail(origin, at + ".words", "not an array");
    for (size_t k = 0; k < words.size(); ++k) {
      const std::string wat = at + ".words[" + std::to_string(k) + "]";
      const json& w = words[k];
      if (!w.is_object() || !w.contains("text") || !w["text"].is_string()) {
        fail(origin, wat, "word without text");
      }
      std::string text = trim(w["text"].get<std::string>());
      if (text.empty()) continue;
      BBox box = w.contains("box")
                     ? read_box(w["box"], page_w, page_h, origin, wat + ".box")
                     : e.box;
      e.words.push_back({std::move(text), box});
    }
  }
  for (const Word& w : e.words) e.box = union_box(e.box, w.box);

  if (j.contains("linking")) {
    const json& links = j["linking"];
    if (!links.is_array()) fail(origin, at + ".linking", "not an array");
    for (size_t k = 0; k < links.size(); ++k) {
      const json& l = links[k];
      if (!l.is_array() || l.size() != 2 || !l[0].is_number_integer() ||
          !l[1].is_number_integer()) {
        fail(origin, at + ".linking[" + std::to_string(k) + "]",
             "expected [from_id, to_id]");
      }
      e.links.push_back({l[0].get<int>(), l[1].get<int>()});
    }
  }
  return e;
}

Document read_document(const json& form, double page_w, double page_h,
                       const std::string& doc_id, const std::string& origin) {
  if (!form.is_array()) fail(origin, "form", "not an array");
  Document doc;
  doc.id = doc_id;
  std::set<int> ids;
  for (size_t i = 0; i < form.size(); ++i) {
    doc.entities.push_back(read_entity(form[i], page_w, page_h, origin, i));
    if (!ids.insert(doc.entities.back().id).second) {
      fail(origin, "form[" + std::to_string(i) + "].id",
           "duplicate id " + std::to_string(doc.entities.back().id));
    }
  }
  for (const Entity& e : doc.entities) {
    for (const RelationPair& p : e.links) {
      const std::string at = "linking of entity " + std::to_string(e.id);
      if (!ids.count(p.key_id) || !ids.count(p.value_id)) {
        fail(origin, at,
             "dangling id in [" + std::to_string(p.key_id) + ", " +
                 std::to_string(p.value_id) + "]");
      }
      if (p.key_id == p.value_id) {
        fail(origin, at, "self link on " + std::to_string(p.key_id));
      }
      doc.gold_pairs.insert(p);
    }
  }
  return doc;
}

void page_size(const json& root, double& w, double& h) {
  w = h = kPageScale;
  if (root.contains("img") && root["img"].is_object()) {
    const json& img = root["img"];
    if (img.contains("width") && img["width"].is_number()) w = img["width"].get<double>();
    if (img.contains("height") && img["height"].is_number()) h = img["height"].get<double>();
  }
}

json box_json(const BBox& b) { return json::array({b.x1, b.y1, b.x2, b.y2}); }

std::string read_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error(file.string() + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

Document parse_funsd_json(std::string_view text, const std::string& doc_id,
                          const std::string& origin) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(origin + ": malformed JSON: " + e.what());
  }
  if (!root.is_object() || !root.contains("form")) {
    fail(origin, "form", "missing top-level array");
  }
  double w, h;
  page_size(root, w, h);
  return read_document(root["form"], w, h, doc_id, origin);
}

Document load_funsd_file(const std::filesystem::path& file) {
  return parse_funsd_json(read_file(file), file.stem().string(), file.string());
}

std::vector<Document> load_funsd(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  if (fs::is_regular_file(path)) {
    files.push_back(path);
  } else if (fs::is_directory(path)) {
    for (const auto& entry : fs::directory_iterator(path)) {
      if (entry.is_regular_file() && entry.path().extension() == ".json") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
  } else {
    throw std::runtime_error(path.string() + ": no such file or directory");
  }

  std::vector<Document> docs;
  for (const fs::path& f : files) {
    const std::string text = read_file(f);
    json root;
    try {
      root = json::parse(text);
    } catch (const json::parse_error& e) {
      throw std::runtime_error(f.string() + ": malformed JSON: " + e.what());
    }
    // XFUND bundles many documents per file under "documents".
    if (root.is_object() && root.contains("documents")) {
      const json& list = root["documents"];
      if (!list.is_array()) fail(f.string(), "documents", "not an array");
      for (size_t i = 0; i < list.size(); ++i) {
        const json& d = list[i];
        const std::string origin = f.string() + " documents[" + std::to_string(i) + "]";
        if (!d.is_object() || !d.contains("document")) {
          fail(origin, "document", "missing entity array");
        }
        std::string id = d.contains("id") && d["id"].is_string()
                             ? d["id"].get<std::string>()
                             : f.stem().string() + "_" + std::to_string(i);
        double w, h;
        page_size(d, w, h);
        docs.push_back(read_document(d["document"], w, h, id, origin));
      }
      continue;
    }
    docs.push_back(parse_funsd_json(text, f.stem().string(), f.string()));
  }
  return docs;
}

std::string to_funsd_json(const Document& doc) {
  nlohmann::ordered_json root;
  root["img"] = {{"width", kPageScale}, {"height", kPageScale}};
  auto form = nlohmann::ordered_json::array();
  for (const Entity& e : doc.entities) {
    nlohmann::ordered_json j;
    j["id"] = e.id;
    j["text"] = e.text;
    j["box"] = box_json(e.box);
    j["label"] = std::string(label_name(e.label));
    auto words = nlohmann::ordered_json::array();
    for (const Word& w : e.words) {
      nlohmann::ordered_json wj;
      wj["text"] = w.text;
      wj["box"] = box_json(w.box);
      words.push_back(std::move(wj));
    }
    j["words"] = std::move(words);
    auto links = nlohmann::ordered_json::array();
    for (const RelationPair& p : e.links) links.push_back({p.key_id, p.value_id});
    j["linking"] = std::move(links);
    form.push_back(std::move(j));
  }
  root["form"] = std::move(form);
  return root.dump(1);
}

void write_funsd(const std::filesystem::path& dir,
                 const std::vector<Document>& docs) {
  std::filesystem::create_directories(dir);
  for (const Document& d : docs) {
    std::ofstream out(dir / (d.id + ".json"), std::ios::binary);
    if (!out) throw std::runtime_error((dir / (d.id + ".json")).string() + ": cannot write");
    out << to_funsd_json(d) << "\n";
  }
}

}  // namespace kvpf
