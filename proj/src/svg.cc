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

#include "kvpf/svg.h"

#include <sstream>

namespace kvpf {
namespace {

const char* label_color(Label label) {
  switch (label) {
    case Label::kQuestion: return "blue";
    case Label::kAnswer: return "green";
    case Label::kHeader: return "gold";
    case Label::kOther: return "black";
  }
  return "black";
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_svg(const Document& doc, const PairSet& pairs) {
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kPageScale << "\" height=\""
    << kPageScale << "\" viewBox=\"0 0 " << kPageScale << " " << kPageScale << "\">\n";
  s << "<defs><marker id=\"head\" markerWidth=\"8\" markerHeight=\"8\" refX=\"7\" refY=\"4\" "
       "orient=\"auto\"><path d=\"M0,0 L8,4 L0,8 z\" fill=\"red\"/></marker></defs>\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (const Entity& e : doc.entities) {
    s << "<rect x=\"" << e.box.x1 << "\" y=\"" << e.box.y1 << "\" width=\"" << e.box.width()
      << "\" height=\"" << e.box.height() << "\" fill=\"none\" stroke=\"" << label_color(e.label)
      << "\" stroke-width=\"2\"><title>" << e.id << " " << label_name(e.label) << ": "
      << escape(e.text) << "</title></rect>\n";
  }
  for (const RelationPair& p : pairs) {
    const int k = doc.index_of(p.key_id), v = doc.index_of(p.value_id);
    if (k < 0 || v < 0) continue;
    const BBox& a = doc.entities[k].box;
    const BBox& b = doc.entities[v].box;
    s << "<line class=\"kvp\" x1=\"" << a.center_x() << "\" y1=\"" << a.center_y() << "\" x2=\""
      << b.center_x() << "\" y2=\"" << b.center_y()
      << "\" stroke=\"red\" stroke-width=\"2\" marker-end=\"url(#head)\"/>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace kvpf
