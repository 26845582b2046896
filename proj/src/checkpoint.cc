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

#include "kvpf/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace kvpf {
namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::string_view take(size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw std::runtime_error(std::string("checkpoint: truncated while reading ") + what);
    }
    std::string_view s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint32_t u32(const char* what) {
    std::string_view s = take(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[i])) << (8 * i);
    return v;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::string out(kCheckpointMagic);
  const std::string config = run_config_json(ckpt.config);
  put_u32(out, static_cast<std::uint32_t>(config.size()));
  out += config;
  put_u32(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const NamedTensor& t : ckpt.tensors) {
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (std::uint32_t d : t.shape) put_u32(out, d);
    for (float f : t.values) put_f32(out, f);
  }
  return out;
}

std::string encode_checkpoint(const RunConfig& config, const std::vector<Parameter>& params) {
  Checkpoint ckpt;
  ckpt.config = config;
  for (const Parameter& p : params) {
    NamedTensor t;
    t.name = p.name;
    for (size_t d : p.tensor.shape()) t.shape.push_back(static_cast<std::uint32_t>(d));
    for (Real v : p.tensor.values()) t.values.push_back(static_cast<float>(v));
    ckpt.tensors.push_back(std::move(t));
  }
  return encode_checkpoint(ckpt);
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(kCheckpointMagic.size(), "magic") != kCheckpointMagic) {
    throw std::runtime_error("checkpoint: bad magic, expected KVPF1");
  }
  Checkpoint ckpt;
  const std::uint32_t config_len = r.u32("config length");
  try {
    ckpt.config = parse_run_config(r.take(config_len, "config"));
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("checkpoint: ") + e.what());
  }
  const std::uint32_t count = r.u32("tensor count");
  for (std::uint32_t k = 0; k < count; ++k) {
    NamedTensor t;
    t.name = std::string(r.take(r.u32("name length"), "tensor name"));
    const std::uint32_t rank = r.u32("rank");
    size_t n = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      t.shape.push_back(r.u32("dims"));
      n *= t.shape.back();
    }
    std::string_view raw = r.take(4 * n, t.name.c_str());
    t.values.resize(n);
    for (size_t i = 0; i < n; ++i) {
      std::uint32_t v = 0;
      for (int b = 0; b < 4; ++b) {
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(raw[4 * i + b])) << (8 * b);
      }
      t.values[i] = std::bit_cast<float>(v);
    }
    ckpt.tensors.push_back(std::move(t));
  }
  if (!r.done()) throw std::runtime_error("checkpoint: trailing bytes after last tensor");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& file, const RunConfig& config,
                     const std::vector<Parameter>& params) {
  const std::string bytes = encode_checkpoint(config, params);
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error(file.string() + ": cannot write");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint load_checkpoint(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error(file.string() + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

KvpModel restore_model(const Checkpoint& ckpt) {
  InitOptions init;
  init.seed = ckpt.config.train.seed;
  init.init_std = 0.0;
  init.backbone_init_std = 0.0;
  KvpModel model(ckpt.config.model, init);
  auto& params = model.parameters();
  if (params.size() != ckpt.tensors.size()) {
    for (const Parameter& p : params) {
      bool found = false;
      for (const NamedTensor& t : ckpt.tensors) found |= t.name == p.name;
      if (!found) throw std::runtime_error("checkpoint: missing tensor " + p.name);
    }
    for (const NamedTensor& t : ckpt.tensors) {
      if (!model.store().find(t.name)) throw std::runtime_error("checkpoint: unexpected tensor " + t.name);
    }
  }
  for (const NamedTensor& t : ckpt.tensors) {
    Parameter* p = model.store().find(t.name);
    if (!p) throw std::runtime_error("checkpoint: unexpected tensor " + t.name);
    Shape shape(t.shape.begin(), t.shape.end());
    if (shape != p->tensor.shape()) {
      throw std::runtime_error("checkpoint: tensor " + t.name + " has shape " + shape_string(shape) +
                               " but the config expects " + shape_string(p->tensor.shape()));
    }
    auto dst = p->tensor.mutable_values();
    for (size_t i = 0; i < dst.size(); ++i) dst[i] = t.values[i];
  }
  return model;
}

}  // namespace kvpf
