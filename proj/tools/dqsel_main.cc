// Copyright 2026 The dqsel Authors.
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

// dqsel: prune, evaluate, serve and generate synthetic corpora.
//
// Exit status: 0 success, 1 unexpected failure, 2 configuration error,
// 3 data error.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dqsel/corpus.h"
#include "dqsel/dqi.h"
#include "dqsel/embeddings.h"
#include "dqsel/error.h"
#include "dqsel/evalharness.h"
#include "dqsel/http_api.h"
#include "dqsel/pruner.h"
#include "dqsel/service.h"
#include "dqsel/synthetic.h"

namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

dqsel::TaskSchema SchemaFor(const std::string& dataset, const std::string& schema_path) {
  if (!schema_path.empty()) return dqsel::LoadSchema(schema_path);
  return dqsel::InferSchema(dataset);
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw dqsel::Error(dqsel::ErrorCode::kIoFailure, "cannot write " + path.string());
}

struct PruneArgs {
  std::string dataset, schema, embeddings, config, out, trace;
  bool no_coarse = false;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
};

int RunPrune(const PruneArgs& a) {
  dqsel::PruneConfig cfg;
  if (!a.config.empty()) cfg = dqsel::LoadPruneConfig(a.config);
  if (a.no_coarse) cfg.coarse_enabled = false;
  if (a.seed) cfg.seed = *a.seed;
  if (a.threads) cfg.threads = *a.threads;
  cfg.Validate();
  dqsel::Dataset d = dqsel::LoadDataset(a.dataset, SchemaFor(a.dataset, a.schema));
  auto [emb, manifest] = dqsel::ReadEmb(a.embeddings);
  dqsel::PruneResult result = dqsel::Prune(d, emb, manifest.burned, cfg);
  dqsel::WriteDataset(result.kept, a.out);
  if (!a.trace.empty()) WriteText(a.trace, result.trace.ToJsonl());
  std::cerr << "kept " << result.kept.size() << " of " << d.size() << " samples ("
            << result.trace.iterations.size() << " iterations, stop: "
            << result.trace.stop_reason << ")\n";
  return 0;
}

struct EvalArgs {
  std::string train, dev, schema, format = "markdown", name, config;
  std::vector<std::string> ood, embeddings;
};

int RunEval(const EvalArgs& a) {
  auto format = dqsel::ParseTableFormat(a.format);
  if (!format) throw dqsel::Error(dqsel::ErrorCode::kInvalidConfig, "unknown format " + a.format);
  dqsel::TrainConfig probe;
  if (!a.config.empty()) probe = dqsel::LoadPruneConfig(a.config).probe;
  std::vector<std::pair<std::string, std::string>> ood_paths;
  for (const auto& entry : a.ood) {
    auto eq = entry.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw dqsel::Error(dqsel::ErrorCode::kInvalidConfig, "--ood expects name=path: " + entry);
    }
    ood_paths.emplace_back(entry.substr(0, eq), entry.substr(eq + 1));
  }
  dqsel::Dataset train = dqsel::LoadDataset(a.train, SchemaFor(a.train, a.schema));
  dqsel::Dataset dev = dqsel::LoadDataset(a.dev, dqsel::InferSchema(a.dev));
  std::vector<dqsel::NamedDataset> ood;
  for (const auto& [name, path] : ood_paths) {
    ood.push_back({name, dqsel::LoadDataset(path, dqsel::InferSchema(path))});
  }
  std::vector<dqsel::EmbeddingMatrix> matrices;
  for (const auto& path : a.embeddings) matrices.push_back(dqsel::ReadEmb(path).first);
  dqsel::FeatureIndex index;
  for (const auto& m : matrices) index.Add(m);
  dqsel::EvalReport report;
  std::string name = a.name.empty() ? fs::path(a.train).stem().string() : a.name;
  report.AddRow(dqsel::Evaluate(name, train, dev, ood, index, probe));
  std::cout << dqsel::RenderTable(report, *format);
  return 0;
}

dqsel::HttpServer* g_server = nullptr;

void OnSignal(int) {
  if (g_server) g_server->Stop();
}

struct ServeArgs {
  std::string state, seed_dataset, schema, config, host = "127.0.0.1";
  int port = 8080;
};

int RunServe(const ServeArgs& a) {
  dqsel::ServiceOptions options;
  options.state_dir = a.state;
  if (!a.config.empty()) options.dqi = dqsel::LoadDqiConfig(a.config);
  std::optional<dqsel::Dataset> seed;
  if (!a.seed_dataset.empty()) {
    seed = dqsel::LoadDataset(a.seed_dataset, SchemaFor(a.seed_dataset, a.schema));
  }
  auto svc = dqsel::CreationService::Open(options, seed);
  dqsel::HttpServer server(*svc);
  int port = server.Bind(a.host, a.port);
  g_server = &server;
  std::signal(SIGINT, OnSignal);
  std::signal(SIGTERM, OnSignal);
  std::cerr << "serving on http://" << a.host << ":" << port << "\n";
  server.Run();
  g_server = nullptr;
  return 0;
}

struct SynthArgs {
  std::string out, embeddings, planted_ids;
  dqsel::PlantedConfig cfg;
};

int RunSynth(const SynthArgs& a) {
  dqsel::PlantedCorpus corpus = dqsel::MakePlantedCorpus(a.cfg);
  dqsel::WriteDataset(corpus.dataset, a.out);
  dqsel::EmbManifest manifest;
  manifest.order = corpus.embeddings.order();
  manifest.dim = corpus.embeddings.dim();
  manifest.source = "synthetic:planted";
  dqsel::WriteEmb(corpus.embeddings, manifest, a.embeddings);
  if (!a.planted_ids.empty()) {
    std::string text;
    for (const auto& id : corpus.planted_ids) text += id + "\n";
    WriteText(a.planted_ids, text);
  }
  return 0;
}

struct ScoreArgs {
  std::string dataset, schema, embeddings, config;
};

int RunScore(const ScoreArgs& a) {
  dqsel::DqiConfig cfg;
  if (!a.config.empty()) cfg = dqsel::LoadDqiConfig(a.config);
  dqsel::Dataset d = dqsel::LoadDataset(a.dataset, SchemaFor(a.dataset, a.schema));
  std::optional<dqsel::EmbeddingMatrix> emb;
  if (!a.embeddings.empty()) emb = dqsel::ReadEmb(a.embeddings).first;
  dqsel::DqiVector v = dqsel::ComponentScores(d, emb ? &*emb : nullptr, cfg);
  std::cout << "{";
  bool first = true;
  for (dqsel::Component c : dqsel::kAllComponents) {
    std::cout << (first ? "" : ", ") << '"' << dqsel::ComponentName(c) << "\": ";
    if (v[c]) std::cout << *v[c];
    else std::cout << "null";
    first = false;
  }
  std::cout << "}\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dqsel: data-quality-guided dataset selection"};
  app.require_subcommand(1);

  PruneArgs prune;
  auto* p = app.add_subcommand("prune", "Prune a dataset with the adversarial filter");
  p->add_option("--dataset", prune.dataset, "Dataset JSONL")->required();
  p->add_option("--schema", prune.schema, "Schema JSON (default: inferred)");
  p->add_option("--embeddings", prune.embeddings, "EMB1 file")->required();
  p->add_option("--config", prune.config, "Prune config JSON");
  p->add_option("--out", prune.out, "Output JSONL")->required();
  p->add_option("--trace", prune.trace, "Trace JSONL");
  p->add_flag("--no-coarse", prune.no_coarse, "Skip the coarse selection");
  p->add_option("--seed", prune.seed, "Override the config seed");
  p->add_option("--threads", prune.threads, "Worker threads (0: all cores)");

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Linear-probe evaluation table");
  e->add_option("--train", eval.train, "Training JSONL")->required();
  e->add_option("--dev", eval.dev, "IID dev JSONL")->required();
  e->add_option("--ood", eval.ood, "OOD set as name=path (repeatable)");
  e->add_option("--embeddings", eval.embeddings, "EMB1 files covering all ids")
      ->required()
      ->expected(1, -1);
  e->add_option("--format", eval.format, "text, markdown or json");
  e->add_option("--name", eval.name, "Row name (default: train file stem)");
  e->add_option("--schema", eval.schema, "Schema JSON for the training set");
  e->add_option("--config", eval.config, "Prune config JSON whose probe section is used");

  ServeArgs serve;
  auto* s = app.add_subcommand("serve", "Run the creation service");
  s->add_option("--state", serve.state, "State directory")->required();
  s->add_option("--seed-dataset", serve.seed_dataset, "Seed JSONL (first start only)");
  s->add_option("--schema", serve.schema, "Schema JSON for the seed");
  s->add_option("--config", serve.config, "DQI config JSON");
  s->add_option("--host", serve.host, "Bind address");
  s->add_option("--port", serve.port, "Port (0: any free port)");

  SynthArgs synth;
  auto* y = app.add_subcommand("synth", "Write a planted-artifact corpus");
  y->add_option("--out", synth.out, "Dataset JSONL")->required();
  y->add_option("--embeddings", synth.embeddings, "EMB1 output")->required();
  y->add_option("--planted-ids", synth.planted_ids, "File listing planted ids");
  y->add_option("--samples", synth.cfg.samples, "Corpus size");
  y->add_option("--planted", synth.cfg.planted, "Planted samples (multiple of 8)");
  y->add_option("--dim", synth.cfg.dim, "Feature dimension");
  y->add_option("--seed", synth.cfg.seed, "Generator seed");

  ScoreArgs score;
  auto* q = app.add_subcommand("score", "Dataset-level DQI component scores");
  q->add_option("--dataset", score.dataset, "Dataset JSONL")->required();
  q->add_option("--schema", score.schema, "Schema JSON");
  q->add_option("--embeddings", score.embeddings, "EMB1 file for C5");
  q->add_option("--config", score.config, "DQI config JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    int code = app.exit(err);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*p) return RunPrune(prune);
    if (*e) return RunEval(eval);
    if (*s) return RunServe(serve);
    if (*y) return RunSynth(synth);
    if (*q) return RunScore(score);
  } catch (const dqsel::Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return dqsel::IsConfigError(err.code()) ? kExitConfig : kExitData;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
