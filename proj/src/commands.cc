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

#include "kvpf/commands.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "kvpf/checkpoint.h"
#include "kvpf/eval.h"
#include "kvpf/gradcheck.h"
#include "kvpf/model.h"
#include "kvpf/svg.h"
#include "kvpf/training.h"

namespace kvpf {
namespace {

namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_text(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error(file.string() + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& file, const std::string& text) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error(file.string() + ": cannot write");
  out << text;
}

// "ROWSxCOLS" -> (rows, cols)
std::pair<int, int> parse_grid(const std::string& spec) {
  int rows = 0, cols = 0;
  char x = 0, extra = 0;
  std::istringstream in(spec);
  if (!(in >> rows >> x >> cols) || (x != 'x' && x != 'X') || (in >> extra) || rows < 1 || cols < 1) {
    throw UsageError("bad grid '" + spec + "', expected ROWSxCOLS");
  }
  return {rows, cols};
}

// "ROWSxCOLS:COUNT"
std::tuple<int, int, int> parse_synthetic(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw UsageError("bad --synthetic '" + spec + "', expected ROWSxCOLS:COUNT");
  auto [rows, cols] = parse_grid(spec.substr(0, colon));
  int count = 0;
  try {
    size_t used = 0;
    count = std::stoi(spec.substr(colon + 1), &used);
    if (used != spec.size() - colon - 1) count = 0;
  } catch (const std::exception&) {
  }
  if (count < 1) throw UsageError("bad --synthetic count in '" + spec + "'");
  return {rows, cols, count};
}

std::vector<Label> argmax_labels(const Prediction& p) {
  std::vector<Label> out;
  for (const auto& probs : p.entity_labels) {
    out.push_back(static_cast<Label>(std::max_element(probs.begin(), probs.end()) - probs.begin()));
  }
  return out;
}

double normal_draw(std::mt19937_64& rng) {
  const double u1 = (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

std::string group_of(const std::string& name) { return name.substr(0, name.find('.')); }

// --- verbs ------------------------------------------------------------------

struct TrainArgs {
  std::string data, config, out, synthetic, loss_csv;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int epochs = -1;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  if (a.data.empty() && a.synthetic.empty()) throw UsageError("train: one of --data or --synthetic is required");
  if (!a.data.empty() && !a.synthetic.empty()) throw UsageError("train: --data and --synthetic are exclusive");

  RunConfig config = a.config.empty() ? RunConfig{} : load_run_config(a.config);
  if (a.seed_set) config.train.seed = a.seed;
  if (a.epochs >= 0) config.train.epochs = a.epochs;
  std::vector<Document> docs;
  if (!a.synthetic.empty()) {
    auto [rows, cols, count] = parse_synthetic(a.synthetic);
    SynthOptions opts;
    opts.rows = rows;
    opts.cols = cols;
    docs = synth_forms(config.train.seed, count, opts);
  } else {
    docs = load_funsd(a.data);
  }
  if (docs.empty()) throw std::runtime_error("train: no documents found");

  KvpModel model(config.model, {config.train.seed, config.train.init_std, config.train.backbone_init_std});
  TrainCallbacks callbacks;
  callbacks.on_epoch = [&](int epoch, const LossRecord& r) {
    err << "epoch " << epoch + 1 << "/" << config.train.epochs << " loss " << r.total << "\n";
  };
  const TrainState state = train(docs, model, config.train, callbacks);

  save_checkpoint(a.out, config, model.parameters());
  write_text(a.loss_csv.empty() ? a.out + ".loss.csv" : a.loss_csv, loss_csv(state.history));
  out << metrics_json(evaluate(model, docs)) << "\n";
  return 0;
}

struct PredictArgs {
  std::string ckpt, data, out, render;
};

int cmd_predict(const PredictArgs& a, std::ostream& out, std::ostream&) {
  const KvpModel model = restore_model(load_checkpoint(a.ckpt));
  const std::vector<Document> docs = load_funsd(a.data);
  PredictionMap predictions;
  RelationCounter counter;
  for (const Document& d : docs) {
    const Prediction p = predict(model, d);
    predictions[d.id] = p.pairs;
    counter.add(p.pairs, d.gold_pairs);
    std::vector<Label> gold;
    for (const Entity& e : d.entities) gold.push_back(e.label);
    counter.add_labels(argmax_labels(p), gold);
  }
  write_text(a.out, predictions_json(predictions) + "\n");
  if (!a.render.empty()) {
    for (const Document& d : docs) write_text(fs::path(a.render) / (d.id + ".svg"), render_svg(d, predictions[d.id]));
  }
  out << metrics_json(counter.metrics()) << "\n";
  return 0;
}

int cmd_eval(const std::string& pred_file, const std::string& gold_dir, std::ostream& out) {
  const PredictionMap predictions = parse_predictions_json(read_text(pred_file));
  const std::vector<Document> gold = load_funsd(gold_dir);
  std::set<std::string> gold_ids;
  for (const Document& d : gold) gold_ids.insert(d.id);
  std::string missing;
  for (const auto& [id, pairs] : predictions) {
    if (!gold_ids.count(id)) missing += (missing.empty() ? "" : ", ") + id;
  }
  if (!missing.empty()) throw std::runtime_error("eval: predictions for documents absent from gold: " + missing);

  RelationCounter counter;
  for (const Document& d : gold) {
    auto it = predictions.find(d.id);
    counter.add(it == predictions.end() ? PairSet{} : it->second, d.gold_pairs);
  }
  out << metrics_json(counter.metrics()) << "\n";
  return 0;
}

int cmd_gradcheck(const std::string& config_file, std::uint64_t seed, const std::string& fault_op,
                  double fault_factor, std::ostream& out) {
  const RunConfig config = config_file.empty() ? toy_config() : load_run_config(config_file);
  if (config.model.d_model > 32) throw std::runtime_error("gradcheck: d_model above 32 is not a toy config");
  if (!fault_op.empty()) testing::set_backward_fault(fault_op, fault_factor);
  GradcheckOutcome result;
  try {
    result = run_gradcheck(config, seed);
  } catch (...) {
    testing::set_backward_fault("", 1.0);
    throw;
  }
  testing::set_backward_fault("", 1.0);
  char line[128];
  for (const auto& [group, error] : result.group_errors) {
    std::snprintf(line, sizeof line, "%-20s max_rel_error %.3e\n", group.c_str(), error);
    out << line;
  }
  std::snprintf(line, sizeof line,
                "%-20s max_rel_error %.3e over %zu coordinates, %zu skipped at kinks (tolerance %.0e): %s\n",
                "overall", result.max_error, result.coords_checked, result.coords_skipped, kGradTolerance,
                result.passed ? "PASS" : "FAIL");
  out << line;
  return result.passed ? 0 : 1;
}

int cmd_synth(std::uint64_t seed, int count, const std::string& grid, double distractors,
              const std::string& dir, std::ostream& out) {
  auto [rows, cols] = parse_grid(grid);
  if (count < 1) throw UsageError("synth: --count must be >= 1");
  SynthOptions opts{rows, cols, distractors};
  const auto docs = synth_forms(seed, count, opts);
  write_funsd(dir, docs);
  out << "wrote " << docs.size() << " documents to " << dir << "\n";
  return 0;
}

int cmd_render(const std::string& data, const std::string& pred_file, const std::string& dir,
               std::ostream& out) {
  const std::vector<Document> docs = load_funsd(data);
  const PredictionMap predictions =
      pred_file.empty() ? PredictionMap{} : parse_predictions_json(read_text(pred_file));
  fs::create_directories(dir);
  for (const Document& d : docs) {
    auto it = predictions.find(d.id);
    const PairSet& pairs = pred_file.empty() ? d.gold_pairs : (it == predictions.end() ? PairSet{} : it->second);
    write_text(fs::path(dir) / (d.id + ".svg"), render_svg(d, pairs));
  }
  out << "rendered " << docs.size() << " documents to " << dir << "\n";
  return 0;
}

}  // namespace

std::string predictions_json(const PredictionMap& predictions) {
  nlohmann::json root = nlohmann::json::object();
  for (const auto& [id, pairs] : predictions) {
    nlohmann::json list = nlohmann::json::array();
    for (const RelationPair& p : pairs) list.push_back({p.key_id, p.value_id});
    root[id] = std::move(list);
  }
  return root.dump();
}

PredictionMap parse_predictions_json(std::string_view text) {
  if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) return {};
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(std::string("predictions: malformed JSON: ") + e.what());
  }
  if (!root.is_object()) throw std::runtime_error("predictions: top level must be an object");
  PredictionMap out;
  for (const auto& [id, list] : root.items()) {
    if (!list.is_array()) throw std::runtime_error("predictions: " + id + " is not an array");
    PairSet& pairs = out[id];
    for (const auto& p : list) {
      if (!p.is_array() || p.size() != 2 || !p[0].is_number_integer() || !p[1].is_number_integer()) {
        throw std::runtime_error("predictions: " + id + " holds an entry that is not [key_id, value_id]");
      }
      pairs.insert({p[0].get<int>(), p[1].get<int>()});
    }
  }
  return out;
}

std::vector<Document> toy_documents(std::uint64_t seed, int count) {
  static const char* kWords[] = {"name", "date", "total", "smith", "2020", "city", "acme", "no"};
  std::mt19937_64 rng(seed);
  auto draw = [&rng](int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); };
  std::vector<Document> docs;
  for (int d = 0; d < count; ++d) {
    Document doc;
    doc.id = "toy_" + std::to_string(seed) + "_" + std::to_string(d);
    const int n = 2 + draw(3);
    for (int i = 0; i < n; ++i) {
      Entity e;
      e.id = i;
      e.label = i == 0 ? Label::kQuestion : i == 1 ? Label::kAnswer : static_cast<Label>(draw(kNumLabels));
      const int x = draw(900), y = draw(900);
      e.box = BBox::make(x, y, x + 10 + draw(90), y + 5 + draw(40));
      const int words = draw(3);
      for (int w = 0; w < words; ++w) {
        e.words.push_back({kWords[draw(8)], e.box});
        e.text += (w ? " " : "") + e.words.back().text;
      }
      doc.entities.push_back(std::move(e));
    }
    doc.gold_pairs.insert({0, 1});
    for (int i = 2; i < n; ++i) {
      if (doc.entities[i].label == Label::kAnswer) doc.gold_pairs.insert({0, i});
    }
    for (const RelationPair& p : doc.gold_pairs) {
      doc.entities[p.key_id].links.push_back(p);
      doc.entities[p.value_id].links.push_back(p);
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

GradcheckOutcome run_gradcheck(const RunConfig& config, std::uint64_t seed) {
  ModelConfig mc = config.model;
  mc.dropout_rate = 0.0;
  KvpModel model(mc, {seed, config.train.init_std, config.train.backbone_init_std});
  // Self pairs have an all-zero spatial feature, so zero biases would put
  // relu units exactly on their kink. Check at a generic point instead.
  std::mt19937_64 rng(seed ^ 0x5bd1e995u);
  for (Parameter& p : model.parameters()) {
    if (!p.name.ends_with(".bias")) continue;
    for (Real& v : p.tensor.mutable_values()) v += config.train.init_std * normal_draw(rng);
  }
  const std::vector<Document> docs = toy_documents(seed, 2);
  std::vector<DocumentFeatures> features;
  for (const Document& d : docs) features.push_back(featurize(d, mc));

  auto objective = [&]() {
    Pass eval;
    Tensor total = document_loss(model, features[0], eval).total;
    for (size_t i = 1; i < features.size(); ++i) total = add(total, document_loss(model, features[i], eval).total);
    return scale(total, 1.0 / features.size());
  };
  GradCheckOptions options;
  options.epsilon = 5e-3;
  options.max_coords = 3000;
  options.seed = seed;
  const GradCheckReport report = finite_diff_check(objective, model.parameters(), options);

  GradcheckOutcome outcome;
  for (const ParamGradError& e : report.per_param) {
    double& g = outcome.group_errors[group_of(e.name)];
    g = std::max(g, e.max_rel_error);
  }
  outcome.max_error = report.max_rel_error;
  outcome.coords_checked = report.coords_checked;
  outcome.coords_skipped = report.coords_skipped;
  outcome.passed = report.max_rel_error < kGradTolerance;
  return outcome;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Key-value pair extraction from form documents"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train a model and write a checkpoint");
  train->add_option("--data", train_args.data, "Directory of FUNSD-format annotations");
  train->add_option("--config", train_args.config, "JSON config file");
  train->add_option("--out", train_args.out, "Checkpoint output path")->required();
  train->add_option("--seed", train_args.seed, "Random seed")->each([&](const std::string&) { train_args.seed_set = true; });
  train->add_option("--synthetic", train_args.synthetic, "Synthetic data ROWSxCOLS:COUNT");
  train->add_option("--loss-csv", train_args.loss_csv, "Loss history path (default <out>.loss.csv)");
  train->add_option("--epochs", train_args.epochs, "Override the configured epoch count");

  PredictArgs predict_args;
  auto* pred = app.add_subcommand("predict", "Predict key-value pairs");
  pred->add_option("--ckpt", predict_args.ckpt, "Checkpoint")->required();
  pred->add_option("--data", predict_args.data, "Directory of FUNSD-format annotations")->required();
  pred->add_option("--out", predict_args.out, "Predictions JSON output")->required();
  pred->add_option("--render", predict_args.render, "Directory for SVG renderings");

  std::string eval_pred, eval_gold;
  auto* eval = app.add_subcommand("eval", "Score a predictions file");
  eval->add_option("--pred", eval_pred, "Predictions JSON")->required();
  eval->add_option("--gold", eval_gold, "Directory of gold annotations")->required();

  std::string gc_config, fault_op;
  std::uint64_t gc_seed = 0;
  double fault_factor = 1.0;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient check on a toy model");
  gc->add_option("--config", gc_config, "JSON config file (default: built-in toy config)");
  gc->add_option("--seed", gc_seed, "Random seed");
  gc->add_option("--fault-op", fault_op)->group("");
  gc->add_option("--fault-factor", fault_factor)->group("");

  std::uint64_t synth_seed = 0;
  int synth_count = 8;
  std::string synth_grid = "2x2", synth_out;
  double synth_distractors = 0.5;
  auto* synth = app.add_subcommand("synth", "Write synthetic forms in the FUNSD schema");
  synth->add_option("--seed", synth_seed, "Random seed");
  synth->add_option("--count", synth_count, "Number of documents");
  synth->add_option("--grid", synth_grid, "ROWSxCOLS key/value cells");
  synth->add_option("--distractors", synth_distractors, "Other entities per key/value entity");
  synth->add_option("--out", synth_out, "Output directory")->required();

  std::string render_data, render_pred, render_out;
  auto* render = app.add_subcommand("render-only", "Render SVGs from annotations and optional predictions");
  render->add_option("--data", render_data, "Directory of FUNSD-format annotations")->required();
  render->add_option("--pred", render_pred, "Predictions JSON (default: gold links)");
  render->add_option("--out", render_out, "Output directory")->required();

  std::vector<std::string> argv_storage = args;
  argv_storage.insert(argv_storage.begin(), "kvpf");
  std::vector<char*> argv;
  for (std::string& s : argv_storage) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    if (*train) return cmd_train(train_args, out, err);
    if (*pred) return cmd_predict(predict_args, out, err);
    if (*eval) return cmd_eval(eval_pred, eval_gold, out);
    if (*gc) return cmd_gradcheck(gc_config, gc_seed, fault_op, fault_factor, out);
    if (*synth) return cmd_synth(synth_seed, synth_count, synth_grid, synth_distractors, synth_out, out);
    if (*render) return cmd_render(render_data, render_pred, render_out, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace kvpf
