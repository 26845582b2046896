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

#ifndef KVPF_SVG_H_
#define KVPF_SVG_H_

#include <string>

#include "kvpf/document.h"

namespace kvpf {

// Entity boxes colored by label (question blue, answer green, header yellow,
// other black) and one red <line> arrow per pair, drawn key -> value.
std::string render_svg(const Document& doc, const PairSet& pairs);

}  // namespace kvpf

#endif  // KVPF_SVG_H_
