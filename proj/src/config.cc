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

#include "kvpf/config.h"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace kvpf {
namespace {

using nlohmann::json;

template <typename T>
void read_field(const json& obj, const std::string& section, const std::string& key, T& out) {
  const json& v = obj.at(key);
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw std::invalid_argument("expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw std::invalid_argument("expected an integer");
    } else {
      if (!v.is_number()) throw std::invalid_argument("expected a number");
    }
    out = v.get<T>();
  } catch (const std::exception& e) {
    throw std::invalid_argument("config: " + section + "." + key + ": " + e.what());
  }
}

void parse_model(const json& obj, ModelConfig& m) {
  for (const auto& [key, value] : obj.items()) {
    if (key == "num_encoder_layers") read_field(obj, "model", key, m.num_encoder_layers);
    else if (key == "num_decoder_layers") read_field(obj, "model", key, m.num_decoder_layers);
    else if (key == "num_heads") read_field(obj, "model", key, m.num_heads);
    else if (key == "d_model") read_field(obj, "model", key, m.d_model);
    else if (key == "d_ffn") read_field(obj, "model", key, m.d_ffn);
    else if (key == "top_k") read_field(obj, "model", key, m.top_k);
    else if (key == "hash_vocab_size") read_field(obj, "model", key, m.hash_vocab_size);
    else if (key == "spatial_hidden") read_field(obj, "model", key, m.spatial_hidden);
    else if (key == "dropout_rate") read_field(obj, "model", key, m.dropout_rate);
    else if (key == "use_gold_labels") read_field(obj, "model", key, m.use_gold_labels);
    else if (key == "use_spatial_bias") read_field(obj, "model", key, m.use_spatial_bias);
    else if (key == "use_coarse_to_fine") read_field(obj, "model", key, m.use_coarse_to_fine);
    else if (key == "coarse_accept_threshold") read_field(obj, "model", key, m.coarse_accept_threshold);
    else if (key == "question_role") {
      auto role = value.is_string() ? parse_question_role(value.get<std::string>()) : std::nullopt;
      if (!role) {
        throw std::invalid_argument(
            "config: model.question_role: expected \"answer_as_question\" or \"non_other\"");
      }
      m.question_role = *role;
    } else {
      throw std::invalid_argument("config: unknown key model." + key);
    }
  }
}

void parse_train(const json& obj, TrainConfig& t) {
  for (const auto& [key, value] : obj.items()) {
    if (key == "batch_size") read_field(obj, "train", key, t.batch_size);
    else if (key == "epochs") read_field(obj, "train", key, t.epochs);
    else if (key == "lr_backbone") read_field(obj, "train", key, t.lr_backbone);
    else if (key == "lr_new") read_field(obj, "train", key, t.lr_new);
    else if (key == "betas") {
      if (!value.is_array() || value.size() != 2 || !value[0].is_number() || !value[1].is_number()) {
        throw std::invalid_argument("config: train.betas: expected [beta1, beta2]");
      }
      t.beta1 = value[0].get<double>();
      t.beta2 = value[1].get<double>();
    } else if (key == "eps") read_field(obj, "train", key, t.eps);
    else if (key == "weight_decay") read_field(obj, "train", key, t.weight_decay);
    else if (key == "seed") read_field(obj, "train", key, t.seed);
    else if (key == "init_std") read_field(obj, "train", key, t.init_std);
    else if (key == "backbone_init_std") read_field(obj, "train", key, t.backbone_init_std);
    else if (key == "shuffle") read_field(obj, "train", key, t.shuffle);
    else throw std::invalid_argument("config: unknown key train." + key);
  }
}

}  // namespace

RunConfig parse_run_config(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: malformed JSON: ") + e.what());
  }
  if (!root.is_object()) throw std::invalid_argument("config: top level must be an object");
  RunConfig c;
  for (const auto& [key, value] : root.items()) {
    if (!value.is_object()) throw std::invalid_argument("config: " + key + " must be an object");
    if (key == "model") parse_model(value, c.model);
    else if (key == "train") parse_train(value, c.train);
    else throw std::invalid_argument("config: unknown section " + key);
  }
  validate(c.model);
  validate(c.train);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::invalid_argument("config: cannot open " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string run_config_json(const RunConfig& c) {
  const ModelConfig& m = c.model;
  const TrainConfig& t = c.train;
  json root;
  root["model"] = {
      {"num_encoder_layers", m.num_encoder_layers},
      {"num_decoder_layers", m.num_decoder_layers},
      {"num_heads", m.num_heads},
      {"d_model", m.d_model},
      {"d_ffn", m.d_ffn},
      {"top_k", m.top_k},
      {"hash_vocab_size", m.hash_vocab_size},
      {"spatial_hidden", m.spatial_hidden},
      {"dropout_rate", m.dropout_rate},
      {"use_gold_labels", m.use_gold_labels},
      {"use_spatial_bias", m.use_spatial_bias},
      {"use_coarse_to_fine", m.use_coarse_to_fine},
      {"coarse_accept_threshold", m.coarse_accept_threshold},
      {"question_role", std::string(question_role_name(m.question_role))},
  };
  root["train"] = {
      {"batch_size", t.batch_size},
      {"epochs", t.epochs},
      {"lr_backbone", t.lr_backbone},
      {"lr_new", t.lr_new},
      {"betas", {t.beta1, t.beta2}},
      {"eps", t.eps},
      {"weight_decay", t.weight_decay},
      {"seed", t.seed},
      {"init_std", t.init_std},
      {"backbone_init_std", t.backbone_init_std},
      {"shuffle", t.shuffle},
  };
  return root.dump(2);
}

RunConfig toy_config() {
  RunConfig c;
  c.model.num_encoder_layers = 1;
  c.model.num_decoder_layers = 1;
  c.model.num_heads = 2;
  c.model.d_model = 16;
  c.model.d_ffn = 32;
  c.model.top_k = 3;
  c.model.hash_vocab_size = 32;
  c.model.spatial_hidden = 8;
  c.model.dropout_rate = 0.0;
  c.train.init_std = 0.1;
  c.train.backbone_init_std = 0.1;
  return c;
}

}  // namespace kvpf
