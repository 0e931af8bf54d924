// Copyright 2026 The Undersense Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// undersense: command-line front end. Every command that writes a result
// also writes <result>.manifest.json describing how it was produced.

#include <pthread.h>
#include <signal.h>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "undersense/attack.h"
#include "undersense/benchmark.h"
#include "undersense/conformance.h"
#include "undersense/defense.h"
#include "undersense/errors.h"
#include "undersense/evaluate.h"
#include "undersense/json_util.h"
#include "undersense/lexicon.h"
#include "undersense/manifest.h"
#include "undersense/outcome_io.h"
#include "undersense/scoring.h"
#include "undersense/toy_model.h"
#include "undersense/transports.h"

namespace {

using nlohmann::json;
using namespace undersense;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitUnreachable = 3;
constexpr int kExitPartial = 4;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Unreachable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Options of one command. Values given on the command line win over the
// --config file, which wins over the defaults. Everything registered with
// `snapshot` ends up in the manifest config.
class Settings {
 public:
  explicit Settings(CLI::App* app) : app_(app) {
    app_->add_option("--config", config_path_,
                     "JSON file with option values (keys are option names "
                     "without dashes)")
        ->check(CLI::ExistingFile);
  }

  template <typename T>
  CLI::Option* Add(const std::string& name, T& value, const std::string& help,
                   bool snapshot = true) {
    CLI::Option* option = app_->add_option("--" + name, value, help);
    if constexpr (!std::is_same_v<T, std::string>) option->capture_default_str();
    Register(name, option, value, snapshot);
    return option;
  }

  CLI::Option* Flag(const std::string& name, bool& value,
                    const std::string& help, bool snapshot = true) {
    CLI::Option* option = app_->add_flag("--" + name, value, help);
    Register(name, option, value, snapshot);
    return option;
  }

  // Input files are checked for existence but never snapshotted: the
  // manifest records them by content hash instead.
  CLI::Option* Input(const std::string& name, std::string& value,
                     const std::string& help) {
    CLI::Option* option = app_->add_option("--" + name, value, help)
                              ->check(CLI::ExistingFile);
    Register(name, option, value, false);
    return option;
  }

  CLI::Option* Output(const std::string& name, std::string& value,
                      const std::string& help) {
    CLI::Option* option = app_->add_option("--" + name, value, help);
    Register(name, option, value, false);
    return option;
  }

  void ApplyConfig() {
    if (config_path_.empty()) return;
    std::ifstream in(config_path_);
    const std::string text((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    json config;
    try {
      config = ParseJson(text);
    } catch (const FormatError& e) {
      throw UsageError(config_path_ + ": " + e.what());
    }
    if (!config.is_object()) {
      throw UsageError(config_path_ + ": expected a JSON object");
    }
    for (const auto& [key, value] : config.items()) {
      const auto it = fields_.find(key);
      if (it == fields_.end()) {
        throw UsageError(config_path_ + ": unknown option '" + key + "'");
      }
      if (it->second.option->count() > 0) continue;
      try {
        it->second.load(value);
      } catch (const json::exception& e) {
        throw UsageError(config_path_ + ": bad value for '" + key +
                         "': " + e.what());
      }
    }
  }

  json Snapshot() const {
    json out = json::object();
    for (const auto& [name, field] : fields_) {
      if (field.snapshot) out[name] = field.dump();
    }
    return out;
  }

  bool Given(const std::string& name) const {
    const auto it = fields_.find(name);
    return it != fields_.end() &&
           (it->second.option->count() > 0 || it->second.from_config);
  }

 private:
  struct Field {
    CLI::Option* option = nullptr;
    std::function<void(const json&)> load;
    std::function<json()> dump;
    bool snapshot = true;
    bool from_config = false;
  };

  template <typename T>
  void Register(const std::string& name, CLI::Option* option, T& value,
                bool snapshot) {
    Field& field = fields_[name];
    field.option = option;
    field.snapshot = snapshot;
    field.load = [&value, &field](const json& j) {
      value = j.get<T>();
      field.from_config = true;
    };
    field.dump = [&value] { return json(value); };
  }

  CLI::App* app_;
  std::string config_path_;
  std::map<std::string, Field> fields_;
};

// --seed with the "generate and record one if absent" rule.
struct SeedOption {
  uint64_t value = 0;

  void Add(Settings& settings) {
    settings.Add("seed", value, "random seed (generated when omitted)", false);
  }

  uint64_t Resolve(const Settings& settings) {
    if (!settings.Given("seed")) {
      std::random_device device;
      value = (static_cast<uint64_t>(device()) << 32) ^ device();
      std::cerr << "seed: " << value << " (generated)\n";
    }
    return value;
  }
};

std::string ManifestPathFor(const std::string& result) {
  return result + ".manifest.json";
}

RunManifest StartManifest(const std::string& command, const json& config,
                          uint64_t seed) {
  RunManifest manifest;
  manifest.command = command;
  manifest.config = config;
  manifest.config["seed"] = seed;
  manifest.seed = seed;
  manifest.started_at = UtcTimestamp();
  return manifest;
}

void FinishManifest(RunManifest& manifest, const std::string& path) {
  manifest.finished_at = UtcTimestamp();
  manifest.Write(path);
}

std::vector<Sample> LoadDataset(const std::string& path) {
  DatasetReadResult result = ReadDatasetFile(path);
  for (const std::string& error : result.errors) {
    std::cerr << "warning: " << path << ": " << error << '\n';
  }
  return std::move(result.samples);
}

ContextIndex IndexContexts(const std::vector<Sample>& samples) {
  ContextIndex contexts;
  for (const Sample& sample : samples) contexts.emplace(sample.id, sample.context);
  return contexts;
}

std::ofstream OpenOutput(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write '" + path + "'");
  return out;
}

std::set<std::string, std::less<>> ParseTagList(const std::vector<std::string>& tags) {
  std::set<std::string, std::less<>> out;
  for (const std::string& item : tags) {
    std::stringstream parts(item);
    for (std::string tag; std::getline(parts, tag, ',');) {
      if (!tag.empty()) out.insert(tag);
    }
  }
  return out;
}

// Scorer transport options shared by every command that talks to a model.
struct ScorerOptions {
  std::string address = "toy:";
  size_t max_batch = 64;
  size_t timeout_ms = 60000;

  void Add(Settings& settings) {
    settings.Add("scorer", address,
                 "toy:, toy:<params.json>, exec:<command>, or http://host:port",
                 false);
    settings.Add("max-batch", max_batch, "requests per round trip", false);
    settings.Add("timeout-ms", timeout_ms, "per round trip timeout", false);
  }

  // Connects and performs the handshake; failures exit with code 3.
  std::unique_ptr<Scorer> Connect(ScorerInfo* info) const {
    TransportOptions options;
    options.max_batch = std::max<size_t>(max_batch, 1);
    options.timeout = std::chrono::milliseconds(timeout_ms);
    std::unique_ptr<Scorer> scorer;
    try {
      scorer = MakeScorer(address, options);
    } catch (const ContractViolation& e) {
      throw UsageError(e.what());
    } catch (const FormatError& e) {
      throw UsageError(e.what());
    } catch (const std::exception& e) {
      throw Unreachable(address + ": " + e.what());
    }
    try {
      ScorerInfo handshake = scorer->Info();
      if (info != nullptr) *info = std::move(handshake);
    } catch (const std::exception& e) {
      throw Unreachable(address + ": " + e.what());
    }
    return scorer;
  }
};

// Attack settings shared by attack, curve, transfer and defend.
struct AttackOptions {
  size_t eta = 32;
  size_t rho = 1;
  size_t beam = 5;
  std::string kind = "NE";
  bool exclude_context_matches = false;
  bool protect_entities = false;

  void Add(Settings& settings) {
    settings.Add("eta", eta, "candidates per beam item per depth");
    settings.Add("rho", rho, "maximum number of chained edits");
    settings.Add("beam", beam, "beam width");
    settings.Add("kind", kind, "perturbation kind: NE or POS");
    settings.Flag("exclude-context-matches", exclude_context_matches,
                  "skip replacements that occur in the context");
    settings.Flag("protect-entities", protect_entities,
                  "never PoS-swap tokens inside entity mentions");
  }

  AttackConfig Config(uint64_t seed) const {
    AttackConfig config;
    config.eta = eta;
    config.rho = rho;
    config.beam_width = beam;
    try {
      config.kind = ParseKind(kind);
      config.seed = seed;
      config.perturb.exclude_context_matches = exclude_context_matches;
      config.perturb.protect_entities = protect_entities;
      config.Validate();
    } catch (const ContractViolation& e) {
      throw UsageError(e.what());
    }
    return config;
  }
};

std::vector<size_t> ParseGrid(const std::vector<size_t>& values,
                              const char* name) {
  if (values.empty()) throw UsageError(std::string("--") + name + " is empty");
  for (size_t v : values) {
    if (v == 0) throw UsageError(std::string("--") + name + " values must be >= 1");
  }
  return values;
}

void PrintCounts(std::ostream& out, const OutcomeCounts& counts) {
  const auto rate = counts.error_rate();
  out << "vulnerable " << counts.vulnerable << ", robust " << counts.robust
      << ", skipped (NoAnswer) " << counts.skipped_noanswer
      << ", skipped (no candidates) " << counts.skipped_nocandidates
      << ", errors " << counts.errors << "; error rate ";
  if (rate) {
    out << *rate << '\n';
  } else {
    out << "undefined\n";
  }
}

// ---------------------------------------------------------------- lexicon

struct BuildLexiconCommand {
  std::string corpus, out;
  std::vector<std::string> exclude_pos;
  SeedOption seed;

  void Setup(CLI::App* app, Settings& s) {
    app->description("Build a perturbation lexicon from a tagged corpus");
    s.Input("corpus", corpus, "tagged-corpus JSON lines")->required();
    s.Output("out", out, "lexicon JSON")->required();
    exclude_pos.assign(DefaultExcludedPos().begin(), DefaultExcludedPos().end());
    s.Add("exclude-pos", exclude_pos, "PoS tags left out of the PoS space")
        ->delimiter(',');
    seed.Add(s);
  }

  int Run(Settings& s) {
    RunManifest manifest =
        StartManifest("build-lexicon", s.Snapshot(), seed.Resolve(s));
    manifest.AddInput("corpus", corpus);
    std::ifstream in(corpus);
    if (!in) throw UsageError("cannot open '" + corpus + "'");
    LexiconBuilder builder(ParseTagList(exclude_pos));
    size_t line_number = 0;
    for (std::string line; std::getline(in, line);) {
      ++line_number;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      builder.AddJsonLine(line, line_number);
    }
    for (const RecordError& error : builder.errors()) {
      std::cerr << "warning: line " << error.line
                << (error.doc_id.empty() ? "" : " (" + error.doc_id + ")")
                << ": " << error.message << '\n';
    }
    const PerturbationLexicon lexicon = builder.Build();
    manifest.lexicon_fingerprint = lexicon.fingerprint();
    manifest.runtime["out"] = out;
    manifest.Write(ManifestPathFor(out));
    WriteLexiconFile(out, lexicon);
    manifest.AddOutput("lexicon", out);
    FinishManifest(manifest, ManifestPathFor(out));
    std::cout << "records " << builder.records_accepted() << ", rejected "
              << builder.errors().size() << ", fingerprint "
              << lexicon.fingerprint() << '\n';
    return kExitOk;
  }
};

struct SplitLexiconCommand {
  std::string lexicon, train_out, heldout_out;
  SeedOption seed;

  void Setup(CLI::App* app, Settings& s) {
    app->description("Split a lexicon into two disjoint halves");
    s.Input("lexicon", lexicon, "lexicon JSON")->required();
    s.Output("train-out", train_out, "train-half lexicon")->required();
    s.Output("heldout-out", heldout_out, "held-out-half lexicon")->required();
    seed.Add(s);
  }

  int Run(Settings& s) {
    const uint64_t used_seed = seed.Resolve(s);
    RunManifest manifest = StartManifest("split-lexicon", s.Snapshot(), used_seed);
    manifest.AddInput("lexicon", lexicon);
    const PerturbationLexicon full = ReadLexiconFile(lexicon);
    manifest.lexicon_fingerprint = full.fingerprint();
    manifest.runtime = {{"train_out", train_out}, {"heldout_out", heldout_out}};
    manifest.Write(ManifestPathFor(train_out));
    const LexiconSplit split = SplitLexicon(full, used_seed);
    WriteLexiconFile(train_out, split.train);
    WriteLexiconFile(heldout_out, split.heldout);
    manifest.AddOutput("train", train_out);
    manifest.AddOutput("heldout", heldout_out);
    FinishManifest(manifest, ManifestPathFor(train_out));
    for (const std::string& type : split.degenerate_types) {
      std::cerr << "warning: entity type " << type
                << " has fewer than two strings; kept in the train half\n";
    }
    std::cout << "train " << split.train.fingerprint() << "\nheldout "
              << split.heldout.fingerprint() << '\n';
    return kExitOk;
  }
};

struct LexiconStatsCommand {
  std::string lexicon, out;

  void Setup(CLI::App* app, Settings& s) {
    app->description("Print per-type and per-tag vocabulary sizes");
    s.Input("lexicon", lexicon, "lexicon JSON")->required();
    s.Output("out", out, "write the JSON here instead of stdout");
  }

  int Run(Settings&) {
    const PerturbationLexicon lex = ReadLexiconFile(lexicon);
    json stats = ComputeLexiconStats(lex).ToJson();
    stats["fingerprint"] = lex.fingerprint();
    if (out.empty()) {
      std::cout << stats.dump(2) << '\n';
    } else {
      OpenOutput(out) << stats.dump(2) << '\n';
    }
    return kExitOk;
  }
};

// ----------------------------------------------------------------- attack

// Reads a possibly interrupted outcome file, ignoring a torn last line.
OutcomeFile ReadForResume(const std::string& path, const ContextIndex& contexts) {
  std::ifstream in(path, std::ios::binary);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  const size_t last_newline = text.rfind('\n');
  text.resize(last_newline == std::string::npos ? 0 : last_newline + 1);
  std::istringstream stream(text);
  return ReadOutcomes(stream, &contexts);
}

struct AttackCommand {
  std::string dataset, lexicon, out;
  size_t workers = 1;
  bool resume = false;
  bool trace = false;
  AttackOptions attack;
  ScorerOptions scorer;
  SeedOption seed;

  void Setup(CLI::App* app, Settings& s) {
    app->description("Attack every sample of a dataset");
    s.Input("dataset", dataset, "dataset JSON lines")->required();
    s.Input("lexicon", lexicon, "lexicon JSON")->required();
    s.Output("out", out, "outcome JSON lines")->required();
    attack.Add(s);
    scorer.Add(s);
    seed.Add(s);
    s.Add("workers", workers, "worker threads", false);
    s.Flag("resume", resume, "keep outcomes already in --out", false);
    s.Flag("trace", trace, "record per-depth search traces");
  }

  int Run(Settings& s) {
    const uint64_t used_seed = seed.Resolve(s);
    AttackConfig config = attack.Config(used_seed);
    config.record_trace = trace;
    if (workers == 0) throw UsageError("--workers must be >= 1");

    const std::vector<Sample> samples = LoadDataset(dataset);
    const PerturbationLexicon lex = ReadLexiconFile(lexicon);
    const ContextIndex contexts = IndexContexts(samples);
    ScorerInfo info;
    std::unique_ptr<Scorer> model = scorer.Connect(&info);

    RunManifest manifest = StartManifest("attack", s.Snapshot(), used_seed);
    manifest.config["attack"] = config.ToJson();
    manifest.AddInput("dataset", dataset);
    manifest.AddInput("lexicon", lexicon);
    manifest.lexicon_fingerprint = lex.fingerprint();
    manifest.model_id = info.model_id;
    manifest.runtime = {{"workers", workers}, {"scorer", scorer.address},
                        {"out", out}, {"resume", resume}};

    RunHeader header;
    header.config = config;
    header.lexicon_fingerprint = lex.fingerprint();
    header.model_id = info.model_id;
    header.code_version = CodeVersion();
    header.manifest_id = manifest.Id();

    std::map<std::string, AttackOutcome> done;
    if (resume && std::filesystem::exists(out)) {
      OutcomeFile previous = ReadForResume(out, contexts);
      if (previous.header && !previous.header->SameRun(header)) {
        throw UsageError(out + " was written by a different run (config, "
                               "lexicon, model or code differ)");
      }
      for (AttackOutcome& outcome : previous.outcomes) {
        // Errors are retried.
        if (outcome.status == AttackStatus::kError) continue;
        done.emplace(outcome.sample_id, std::move(outcome));
      }
      std::cerr << "resuming: " << done.size() << " outcomes kept\n";
    }

    manifest.Write(ManifestPathFor(out));

    std::vector<Sample> todo;
    for (const Sample& sample : samples) {
      if (!done.contains(sample.id)) todo.push_back(sample);
    }

    // A resumed run writes next to the old file and swaps at the end so an
    // interruption never loses finished outcomes.
    const std::string target = done.empty() ? out : out + ".resume";
    std::ofstream stream = OpenOutput(target);
    WriteHeaderLine(stream, header);
    stream.flush();

    OutcomeCounts counts;
    size_t next = 0;  // position in `samples`
    auto emit_done_until = [&](std::string_view stop_id) {
      for (; next < samples.size() && samples[next].id != stop_id; ++next) {
        const auto it = done.find(samples[next].id);
        if (it == done.end()) continue;
        WriteOutcomeLine(stream, it->second, &contexts);
        counts.Add(it->second.status);
      }
    };
    AttackDataset(todo, lex, config, *model, workers,
                  [&](size_t, const AttackOutcome& outcome) {
                    emit_done_until(outcome.sample_id);
                    ++next;
                    WriteOutcomeLine(stream, outcome, &contexts);
                    stream.flush();
                    counts.Add(outcome.status);
                  });
    emit_done_until({});
    WriteFooterLine(stream, counts);
    stream.close();
    if (!stream) throw UsageError("failed writing '" + target + "'");
    if (target != out) std::filesystem::rename(target, out);

    manifest.AddOutput("outcomes", out);
    FinishManifest(manifest, ManifestPathFor(out));
    PrintCounts(std::cout, counts);
    if (counts.errors > 0) {
      std::cerr << counts.errors << " of " << counts.total()
                << " samples failed\n";
      return kExitPartial;
    }
    return kExitOk;
  }
};

// ------------------------------------------------------------------ curve

struct CurveCommand {
  std::string dataset, lexicon, outcomes, out, json_out;
  std::vector<size_t> eta_grid = {8, 16, 32};
  std::vector<size_t> rho_grid = {1};
  size_t workers = 1;
  bool independent = false;
  AttackOptions attack;
  ScorerOptions scorer;
  SeedOption seed;

  void Setup(CLI::App* app, Settings& s) {
    app->description(
        "Error rate over a budget grid, derived from one run at the largest "
        "budget (or read off an existing outcome file)");
    s.Input("dataset", dataset, "dataset JSON lines");
    s.Input("lexicon", lexicon, "lexicon JSON");
    s.Input("outcomes", outcomes,
            "derive from this outcome file instead of attacking");
    s.Output("out", out, "CSV output")->required();
    s.Output("json-out", json_out, "also write the curve as JSON");
    s.Add("eta-grid", eta_grid, "eta values")->delimiter(',');
    s.Add("rho-grid", rho_grid, "rho values")->delimiter(',');
    s.Flag("independent-runs", independent,
           "attack once per grid point instead of deriving");
    attack.Add(s);
    scorer.Add(s);
    seed.Add(s);
    s.Add("workers", workers, "worker threads", false);
  }

  int Run(Settings& s) {
    const std::vector<size_t> etas = ParseGrid(eta_grid, "eta-grid");
    const std::vector<size_t> rhos = ParseGrid(rho_grid, "rho-grid");
    const uint64_t used_seed = seed.Resolve(s);
    RunManifest manifest = StartManifest("curve", s.Snapshot(), used_seed);
    manifest.runtime = {{"workers", workers}, {"out", out}};
    std::vector<CurvePoint> points;

    if (!outcomes.empty()) {
      manifest.AddInput("outcomes", outcomes);
      OutcomeFile file = ReadOutcomeFile(outcomes, nullptr);
      if (!file.header) throw UsageError(outcomes + ": no run header");
      manifest.lexicon_fingerprint = file.header->lexicon_fingerprint;
      manifest.model_id = file.header->model_id;
      manifest.Write(ManifestPathFor(out));
      try {
        points = DeriveCurve(file.outcomes, file.header->config, etas, rhos);
      } catch (const ContractViolation& e) {
        throw UsageError(e.what());
      }
    } else {
      if (dataset.empty() || lexicon.empty()) {
        throw UsageError("either --outcomes or --dataset and --lexicon are required");
      }
      AttackConfig config = attack.Config(used_seed);
      const std::vector<Sample> samples = LoadDataset(dataset);
      const PerturbationLexicon lex = ReadLexiconFile(lexicon);
      ScorerInfo info;
      std::unique_ptr<Scorer> model = scorer.Connect(&info);
      manifest.AddInput("dataset", dataset);
      manifest.AddInput("lexicon", lexicon);
      manifest.lexicon_fingerprint = lex.fingerprint();
      manifest.model_id = info.model_id;
      manifest.Write(ManifestPathFor(out));
      points = ErrorRateCurve(samples, lex, config, *model, etas, rhos, workers,
                              independent);
    }

    std::ofstream csv = OpenOutput(out);
    WriteCurveCsv(csv, points);
    csv.close();
    manifest.AddOutput("curve", out);
    if (!json_out.empty()) {
      json body = {{"manifest_id", manifest.Id()}, {"points", CurveToJson(points)}};
      OpenOutput(json_out) << body.dump(2) << '\n';
      manifest.AddOutput("curve_json", json_out);
    }
    FinishManifest(manifest, ManifestPathFor(out));
    for (const CurvePoint& point : points) {
      std::cout << "eta " << point.eta << " rho " << point.rho << ": ";
      PrintCounts(std::cout, point.counts);
    }
    size_t errors = 0;
    for (const CurvePoint& point : points) errors += point.counts.errors;
    return errors > 0 ? kExitPartial : kExitOk;
  }
};

// ------------------------------------------------------------------- eval

std::map<std::string, std::string, std::less<>> ReadPredictions(
    const std::string& path) {
  std::ifstream in(path);
  const std::string text((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
  const json object = ParseJson(text);
  if (!object.is_object()) throw FormatError(path + ": expected {id: answer}");
  std::map<std::string, std::string, std::less<>> predictions;
  for (const auto& [id, answer] : object.items()) {
    if (!answer.is_string()) {
      throw FormatError(path + ": prediction for '" + id + "' is not a string");
    }
    predictions.emplace(id, answer.get<std::string>());
  }
  return predictions;
}

struct EvalCommand {
  std::string outcomes, dataset, predictions, out, histogram;

  void Setup(CLI::App* app, Settings& s) {
    app->description("Error rate, EM/F1 and characteristics of an attack run");
    s.Input("outcomes", outcomes, "outcome JSON lines")->required();
    s.Input("dataset", dataset, "dataset JSON lines")->required();
    s.Input("predictions", predictions,
            "JSON object {sample id: answer} (\"\" = NoAnswer)");
    s.Output("out", out, "report JSON (stdout when omitted)");
    s.Output("histogram", histogram, "entity-type histogram CSV");
  }

  int Run(Settings& s) {
    const std::vector<Sample> samples = LoadDataset(dataset);
    const ContextIndex contexts = IndexContexts(samples);
    const OutcomeFile file = ReadOutcomeFile(outcomes, &contexts);
    RunManifest manifest = StartManifest("eval", s.Snapshot(), 0);
    manifest.AddInput("outcomes", outcomes);
    manifest.AddInput("dataset", dataset);
    std::map<std::string, std::string, std::less<>> predicted;
    if (!predictions.empty()) {
      manifest.AddInput("predictions", predictions);
      predicted = ReadPredictions(predictions);
    }
    if (file.header) {
      manifest.lexicon_fingerprint = file.header->lexicon_fingerprint;
      manifest.model_id = file.header->model_id;
    }
    if (!out.empty()) manifest.Write(ManifestPathFor(out));

    const EvalReport report = CharacteristicsReport(file.outcomes, samples, predicted);
    for (const std::string& warning : report.warnings) {
      std::cerr << "warning: " << warning << '\n';
    }
    json body = report.ToJson();
    body["manifest_id"] = manifest.Id();
    if (out.empty()) {
      std::cout << body.dump(2) << '\n';
    } else {
      OpenOutput(out) << body.dump(2) << '\n';
      manifest.AddOutput("report", out);
    }
    if (!histogram.empty()) {
      std::ofstream csv = OpenOutput(histogram);
      report.WriteHistogramCsv(csv);
      csv.close();
      if (!out.empty()) manifest.AddOutput("histogram", histogram);
    }
    if (!out.empty()) {
      FinishManifest(manifest, ManifestPathFor(out));
      PrintCounts(std::cout, report.counts);
    }
    return kExitOk;
  }
};

// --------------------------------------------------------------- transfer

struct TransferCommand {
  std::string outcomes, dataset, lexicon, out;
  size_t workers = 1;
  ScorerOptions scorer;

  void Setup(CLI::App* app, Settings& s) {
    app->description(
        "Replay the successful attacks of one model against another scorer");
    s.Input("outcomes", outcomes, "outcome file of the source model")->required();
    s.Input("dataset", dataset, "dataset JSON lines")->required();
    s.Input("lexicon", lexicon,
            "also attack the target directly with the source run's config");
    s.Output("out", out, "report JSON (stdout when omitted)");
    scorer.Add(s);
    s.Add("workers", workers, "worker threads", false);
  }

  int Run(Settings& s) {
    const std::vector<Sample> samples = LoadDataset(dataset);
    const ContextIndex contexts = IndexContexts(samples);
    const OutcomeFile file = ReadOutcomeFile(outcomes, &contexts);
    ScorerInfo info;
    std::unique_ptr<Scorer> target = scorer.Connect(&info);
    RunManifest manifest = StartManifest("transfer", s.Snapshot(), 0);
    manifest.AddInput("outcomes", outcomes);
    manifest.AddInput("dataset", dataset);
    manifest.model_id = info.model_id;
    manifest.runtime = {{"scorer", scorer.address}, {"workers", workers}};
    std::optional<PerturbationLexicon> lex;
    if (!lexicon.empty()) {
      if (!file.header) throw UsageError(outcomes + ": no run header");
      manifest.AddInput("lexicon", lexicon);
      lex = ReadLexiconFile(lexicon);
      manifest.lexicon_fingerprint = lex->fingerprint();
    }
    if (!out.empty()) manifest.Write(ManifestPathFor(out));
    const TransferReport report = TransferEval(
        file.outcomes, samples, *target, lex ? &*lex : nullptr,
        lex ? &file.header->config : nullptr, workers);
    json body = report.ToJson();
    body["manifest_id"] = manifest.Id();
    body["source_model_id"] = file.header ? file.header->model_id : "";
    body["target_model_id"] = info.model_id;
    if (out.empty()) {
      std::cout << body.dump(2) << '\n';
    } else {
      OpenOutput(out) << body.dump(2) << '\n';
      manifest.AddOutput("report", out);
      FinishManifest(manifest, ManifestPathFor(out));
      std::cout << "transferred " << report.transferred << " of "
                << report.source_vulnerable << '\n';
    }
    return kExitOk;
  }
};

// ---------------------------------------------------------------- defense

struct DefendCommand {
  std::string mode = "augment";
  std::string train, lexicon, out;
  size_t k = 1;
  size_t workers = 1;
  AttackOptions attack;
  ScorerOptions scorer;
  SeedOption seed;

  void Setup(CLI::App* app, Settings& s) {
    app->description(
        "Write defense examples: random perturbations (augment) or successful "
        "attacks on a model (mine), all labelled NoAnswer");
    s.Add("mode", mode, "augment or mine");
    s.Input("train", train, "training dataset JSON lines")->required();
    s.Input("lexicon", lexicon, "lexicon JSON")->required();
    s.Output("out", out, "defense examples JSON lines")->required();
    s.Add("k", k, "perturbations per sample (augment)");
    attack.Add(s);
    scorer.Add(s);
    seed.Add(s);
    s.Add("workers", workers, "worker threads", false);
  }

  int Run(Settings& s) {
    const uint64_t used_seed = seed.Resolve(s);
    DefenseMode parsed;
    try {
      parsed = ParseMode(mode);
    } catch (const ContractViolation& e) {
      throw UsageError(e.what());
    }
    if (k == 0) throw UsageError("--k must be >= 1");
    const std::vector<Sample> samples = LoadDataset(train);
    const PerturbationLexicon lex = ReadLexiconFile(lexicon);
    RunManifest manifest = StartManifest("defend", s.Snapshot(), used_seed);
    manifest.AddInput("train", train);
    manifest.AddInput("lexicon", lexicon);
    manifest.lexicon_fingerprint = lex.fingerprint();
    manifest.runtime = {{"workers", workers}, {"out", out}};

    std::vector<DefenseItem> items;
    if (parsed == DefenseMode::kAugment) {
      manifest.config.erase("scorer");
      manifest.Write(ManifestPathFor(out));
      const AttackConfig config = attack.Config(used_seed);
      AugmentationResult result = SampleAugmentation(
          samples, lex, k, used_seed, config.kind, config.perturb);
      for (DefenseExample& example : result.examples) items.push_back(std::move(example));
      std::cout << "examples " << items.size() << ", samples without candidates "
                << result.skipped << '\n';
    } else {
      ScorerInfo info;
      std::unique_ptr<Scorer> model = scorer.Connect(&info);
      manifest.model_id = info.model_id;
      manifest.runtime["scorer"] = scorer.address;
      manifest.Write(ManifestPathFor(out));
      items = MineAdversarial(samples, lex, *model, attack.Config(used_seed), workers);
      size_t mined = 0;
      for (const DefenseItem& item : items) {
        mined += std::holds_alternative<DefenseExample>(item);
      }
      std::cout << "mined " << mined << ", fallbacks " << items.size() - mined
                << '\n';
    }
    std::ofstream stream = OpenOutput(out);
    WriteDefenseItems(stream, items);
    stream.close();
    manifest.AddOutput("defense", out);
    FinishManifest(manifest, ManifestPathFor(out));
    return kExitOk;
  }
};

struct TrainToyCommand {
  std::string train, dev, lexicon, out, log, init;
  double lambda = 0.25;
  std::string mode = "augment";
  size_t k = 1;
  size_t refresh_epochs = 1;
  double learning_rate = TrainOptions{}.learning_rate;
  size_t batch_size = TrainOptions{}.batch_size;
  size_t max_epochs = TrainOptions{}.max_epochs;
  size_t patience = TrainOptions{}.patience;
  size_t workers = 1;
  AttackOptions attack;
  SeedOption seed;

  void Setup(CLI::App* app, Settings& s) {
    app->description(
        "Train the toy scorer; with --lexicon the defense term is added "
        "(loss = base + lambda * defense)");
    s.Input("train", train, "training dataset")->required();
    s.Input("dev", dev, "dev dataset for early stopping")->required();
    s.Input("lexicon", lexicon, "perturbation lexicon (enables the defense)");
    s.Input("init", init, "initial parameters JSON");
    s.Output("out", out, "parameters JSON")->required();
    s.Output("log", log, "training log JSON");
    s.Add("lambda", lambda, "defense weight");
    s.Add("mode", mode, "augment or adversarial");
    s.Add("k", k, "defense examples per sample (augment)");
    s.Add("refresh-epochs", refresh_epochs, "epochs between defense set refreshes");
    s.Add("lr", learning_rate, "learning rate");
    s.Add("batch", batch_size, "mini-batch size");
    s.Add("epochs", max_epochs, "maximum epochs");
    s.Add("patience", patience, "early stopping patience (epochs)");
    attack.Add(s);
    seed.Add(s);
    s.Add("workers", workers, "worker threads for mining", false);
  }

  int Run(Settings& s) {
    const uint64_t used_seed = seed.Resolve(s);
    TrainOptions options;
    options.learning_rate = learning_rate;
    options.batch_size = batch_size;
    options.max_epochs = max_epochs;
    options.patience = patience;
    options.seed = used_seed;
    options.workers = workers;
    if (batch_size == 0 || max_epochs == 0) {
      throw UsageError("--batch and --epochs must be >= 1");
    }

    const std::vector<Sample> train_set = LoadDataset(train);
    const std::vector<Sample> dev_set = LoadDataset(dev);
    RunManifest manifest = StartManifest("train-toy", s.Snapshot(), used_seed);
    manifest.AddInput("train", train);
    manifest.AddInput("dev", dev);
    manifest.runtime = {{"workers", workers}, {"out", out}};
    if (!init.empty()) {
      manifest.AddInput("init", init);
      options.init = ReadToyParams(init);
    }

    TrainResult result;
    if (lexicon.empty()) {
      for (const char* key : {"lambda", "mode", "k", "refresh-epochs", "eta",
                              "rho", "beam", "kind", "exclude-context-matches",
                              "protect-entities"}) {
        manifest.config.erase(key);
      }
      manifest.Write(ManifestPathFor(out));
      result = TrainToy(train_set, dev_set, options);
    } else {
      const PerturbationLexicon lex = ReadLexiconFile(lexicon);
      manifest.AddInput("lexicon", lexicon);
      manifest.lexicon_fingerprint = lex.fingerprint();
      DefenseConfig config;
      config.lambda = lambda;
      config.k_per_sample = k;
      config.refresh_epochs = refresh_epochs;
      config.mining_eta = attack.eta;
      config.mining_rho = attack.rho;
      config.mining_beam_width = attack.beam;
      try {
        config.mode = ParseMode(mode);
        config.kind = ParseKind(attack.kind);
        config.perturb.exclude_context_matches = attack.exclude_context_matches;
        config.perturb.protect_entities = attack.protect_entities;
        config.Validate();
      } catch (const ContractViolation& e) {
        throw UsageError(e.what());
      }
      manifest.config["defense"] = config.ToJson();
      manifest.Write(ManifestPathFor(out));
      result = TrainToyDefended(train_set, dev_set, lex, config, options);
    }

    json params = result.params.ToJson();
    params["model_id"] = result.params.ModelId();
    params["manifest_id"] = manifest.Id();
    OpenOutput(out) << params.dump(2) << '\n';
    manifest.model_id = result.params.ModelId();
    manifest.AddOutput("params", out);
    if (!log.empty()) {
      json body = result.LogJson();
      body["manifest_id"] = manifest.Id();
      OpenOutput(log) << body.dump(2) << '\n';
      manifest.AddOutput("log", log);
    }
    FinishManifest(manifest, ManifestPathFor(out));
    const ToyEval eval = EvaluateToy(result.params, dev_set);
    std::cout << "epochs " << result.log.size() << ", best " << result.best_epoch
              << ", dev loss " << eval.loss << ", dev EM " << eval.em
              << ", dev F1 " << eval.f1 << ", model " << result.params.ModelId()
              << '\n';
    if (result.diverged) {
      std::cerr << "training diverged; kept the best parameters before it\n";
      return kExitPartial;
    }
    return kExitOk;
  }
};

// ---------------------------------------------------------------- predict

struct PredictCommand {
  std::string dataset, out;
  ScorerOptions scorer;

  void Setup(CLI::App* app, Settings& s) {
    app->description("Predict answers with a scorer and report EM/F1");
    s.Input("dataset", dataset, "dataset JSON lines")->required();
    s.Output("out", out, "predictions JSON {sample id: answer}")->required();
    scorer.Add(s);
  }

  int Run(Settings& s) {
    const std::vector<Sample> samples = LoadDataset(dataset);
    ScorerInfo info;
    std::unique_ptr<Scorer> model = scorer.Connect(&info);
    RunManifest manifest = StartManifest("predict", s.Snapshot(), 0);
    manifest.AddInput("dataset", dataset);
    manifest.model_id = info.model_id;
    manifest.runtime = {{"scorer", scorer.address}, {"out", out}};
    manifest.Write(ManifestPathFor(out));

    json predictions = json::object();
    double em = 0.0, f1 = 0.0;
    size_t failed = 0;
    const size_t chunk = 64;
    for (size_t begin = 0; begin < samples.size(); begin += chunk) {
      const size_t end = std::min(samples.size(), begin + chunk);
      std::vector<ScoreRequest> requests;
      for (size_t i = begin; i < end; ++i) {
        requests.push_back({samples[i].id, samples[i].context,
                            samples[i].question.text, {}});
      }
      const std::vector<ScoreResponse> responses = ScoreEachSafely(*model, requests);
      for (size_t i = begin; i < end; ++i) {
        const ScoreResponse& response = responses[i - begin];
        if (response.error) {
          ++failed;
          std::cerr << "warning: " << samples[i].id << ": " << *response.error << '\n';
          continue;
        }
        std::string answer;
        if (!response.PredictsNoAnswer()) {
          const SpanRef& span = *response.best_span;
          answer = samples[i].context.substr(span.char_start,
                                             span.char_end - span.char_start);
        }
        const EmF1 score = ScoreAnswer(answer, GoldAnswers(samples[i]));
        em += score.em;
        f1 += score.f1;
        predictions[samples[i].id] = answer;
      }
    }
    OpenOutput(out) << predictions.dump(2) << '\n';
    manifest.AddOutput("predictions", out);
    FinishManifest(manifest, ManifestPathFor(out));
    const size_t n = samples.size() - failed;
    std::cout << "EM " << (n ? em / n : 0.0) << ", F1 " << (n ? f1 / n : 0.0)
              << " over " << n << " samples\n";
    return failed > 0 ? kExitPartial : kExitOk;
  }
};

// ------------------------------------------------------------------ serve

struct ServeCommand {
  std::string host = "127.0.0.1";
  int port = 8080;
  bool stdio = false;
  size_t max_request_batch = 256;
  ScorerOptions scorer;

  void Setup(CLI::App* app, Settings& s) {
    app->description(
        "Serve a scorer over HTTP (POST /score, GET /meta) or JSON lines on "
        "stdin/stdout");
    s.Add("host", host, "bind address", false);
    s.Add("port", port, "port (0 picks a free one)", false);
    s.Flag("stdio", stdio, "serve JSON lines on stdin/stdout", false);
    s.Add("max-request-batch", max_request_batch,
          "largest batch accepted per HTTP request", false);
    scorer.Add(s);
  }

  int Run(Settings&) {
    if (stdio) {
      std::unique_ptr<Scorer> model = scorer.Connect(nullptr);
      std::ios::sync_with_stdio(false);
      ServeStdio(*model, std::cin, std::cout);
      return kExitOk;
    }
    // Block termination signals before any thread starts; one thread waits
    // for them and stops the server.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    std::unique_ptr<Scorer> model = scorer.Connect(nullptr);
    HttpScoringServer server(*model, max_request_batch);
    const int bound = server.Bind(host, port);
    if (bound < 0) {
      std::cerr << "cannot bind " << host << ':' << port << '\n';
      return kExitUsage;
    }
    std::cout << "listening on http://" << host << ':' << bound << std::endl;
    std::atomic<bool> stopping = false;
    std::thread waiter([&] {
      int received = 0;
      sigwait(&signals, &received);
      stopping = true;
      server.Stop();
    });
    server.Run();
    if (!stopping) pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    return kExitOk;
  }
};

struct ConformanceCommand {
  std::string out;
  ScorerOptions scorer;

  void Setup(CLI::App* app, Settings& s) {
    app->description("Run the wire-protocol conformance suite against a scorer");
    scorer.Add(s);
    s.Output("out", out, "report JSON");
  }

  int Run(Settings& s) {
    ScorerInfo info;
    std::unique_ptr<Scorer> model = scorer.Connect(&info);
    const ConformanceReport report = RunConformance(*model);
    for (const ConformanceCheck& check : report.checks) {
      std::cout << (check.passed ? "PASS " : "FAIL ") << check.name;
      if (!check.passed && !check.detail.empty()) std::cout << ": " << check.detail;
      std::cout << '\n';
    }
    if (!out.empty()) {
      RunManifest manifest = StartManifest("conformance", s.Snapshot(), 0);
      manifest.model_id = info.model_id;
      manifest.runtime = {{"scorer", scorer.address}};
      manifest.Write(ManifestPathFor(out));
      json body = report.ToJson();
      body["model_id"] = info.model_id;
      body["manifest_id"] = manifest.Id();
      OpenOutput(out) << body.dump(2) << '\n';
      manifest.AddOutput("report", out);
      FinishManifest(manifest, ManifestPathFor(out));
    }
    return report.passed() ? kExitOk : kExitPartial;
  }
};

// -------------------------------------------------------------- benchmark

struct MakeBenchmarkCommand {
  std::string out_dir;
  BenchmarkOptions options;
  SeedOption seed;

  void Setup(CLI::App* app, Settings& s) {
    app->description("Generate the synthetic toy benchmark");
    s.Output("out-dir", out_dir, "directory for train/dev/test/corpus files")
        ->required();
    s.Add("train", options.train, "training samples");
    s.Add("dev", options.dev, "dev samples");
    s.Add("test", options.test, "test samples");
    s.Add("near-miss", options.near_miss_fraction,
          "fraction of near-miss unanswerable questions");
    s.Add("unrelated", options.unrelated_fraction,
          "fraction of unrelated unanswerable questions");
    s.Add("uncovered", options.uncovered_fraction,
          "fraction of answerable questions with cues far from the answer");
    seed.value = options.seed;
    seed.Add(s);
  }

  int Run(Settings& s) {
    options.seed = seed.Resolve(s);
    if (options.near_miss_fraction < 0 || options.unrelated_fraction < 0 ||
        options.near_miss_fraction + options.unrelated_fraction > 1 ||
        options.uncovered_fraction < 0 || options.uncovered_fraction > 1) {
      throw UsageError("fractions must lie in [0, 1] and sum to at most 1");
    }
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path dir(out_dir);
    RunManifest manifest = StartManifest("make-benchmark", s.Snapshot(), options.seed);
    const std::string manifest_path = (dir / "manifest.json").string();
    manifest.Write(manifest_path);
    const Benchmark benchmark = MakeBenchmark(options);
    for (const auto& [name, samples] :
         {std::pair<const char*, const std::vector<Sample>*>{"train", &benchmark.train},
          {"dev", &benchmark.dev},
          {"test", &benchmark.test}}) {
      const std::string path = (dir / (std::string(name) + ".jsonl")).string();
      std::ofstream stream = OpenOutput(path);
      WriteDataset(stream, *samples);
      stream.close();
      manifest.AddOutput(name, path);
    }
    const std::string corpus_path = (dir / "corpus.jsonl").string();
    {
      std::ofstream stream = OpenOutput(corpus_path);
      for (const TaggedCorpusRecord& record : benchmark.corpus) {
        stream << CorpusRecordToJson(record).dump() << '\n';
      }
    }
    manifest.AddOutput("corpus", corpus_path);
    FinishManifest(manifest, manifest_path);
    std::cout << "train " << benchmark.train.size() << ", dev "
              << benchmark.dev.size() << ", test " << benchmark.test.size()
              << ", corpus " << benchmark.corpus.size() << '\n';
    return kExitOk;
  }
};

// ------------------------------------------------------- collection attack

struct CollectionAttackCommand {
  std::string dataset, collection, out;
  ScorerOptions scorer;

  void Setup(CLI::App* app, Settings& s) {
    app->description(
        "Baseline: try unrelated questions from a fixed collection instead of "
        "perturbations");
    s.Input("dataset", dataset, "dataset JSON lines")->required();
    s.Input("collection", collection, "text file, one question per line")
        ->required();
    s.Output("out", out, "outcome JSON lines")->required();
    scorer.Add(s);
  }

  int Run(Settings& s) {
    const std::vector<Sample> samples = LoadDataset(dataset);
    const ContextIndex contexts = IndexContexts(samples);
    std::vector<std::string> questions;
    {
      std::ifstream in(collection);
      for (std::string line; std::getline(in, line);) {
        const std::string question = NormalizeWhitespace(line);
        if (!question.empty()) questions.push_back(question);
      }
    }
    if (questions.empty()) throw UsageError(collection + ": no questions");
    ScorerInfo info;
    std::unique_ptr<Scorer> model = scorer.Connect(&info);
    RunManifest manifest = StartManifest("collection-attack", s.Snapshot(), 0);
    manifest.AddInput("dataset", dataset);
    manifest.AddInput("collection", collection);
    manifest.model_id = info.model_id;
    manifest.runtime = {{"scorer", scorer.address}, {"out", out}};
    manifest.Write(ManifestPathFor(out));

    std::vector<AttackOutcome> outcomes;
    std::ofstream stream = OpenOutput(out);
    for (const Sample& sample : samples) {
      AttackOutcome outcome;
      try {
        outcome = CollectionAttack(sample, questions, *model);
      } catch (const std::exception& e) {
        outcome.sample_id = sample.id;
        outcome.status = AttackStatus::kError;
        outcome.error = e.what();
      }
      WriteOutcomeLine(stream, outcome, &contexts);
      outcomes.push_back(std::move(outcome));
    }
    const OutcomeCounts counts = CountOutcomes(outcomes);
    WriteFooterLine(stream, counts);
    stream.close();
    manifest.AddOutput("outcomes", out);
    FinishManifest(manifest, ManifestPathFor(out));
    std::cout << SummarizeCollection(outcomes).ToJson().dump() << '\n';
    return counts.errors > 0 ? kExitPartial : kExitOk;
  }
};

// ------------------------------------------------------------------- main

template <typename Command>
void AddCommand(CLI::App& app, const std::string& name,
                std::vector<std::function<int()>>& runners,
                std::vector<CLI::App*>& subcommands) {
  CLI::App* sub = app.add_subcommand(name);
  auto command = std::make_shared<Command>();
  auto settings = std::make_shared<Settings>(sub);
  command->Setup(sub, *settings);
  subcommands.push_back(sub);
  runners.push_back([command, settings] {
    settings->ApplyConfig();
    return command->Run(*settings);
  });
}

int Main(int argc, char** argv) {
  CLI::App app{"Undersensitivity attacks and defenses for reading comprehension"};
  app.set_version_flag("--version", CodeVersion());
  app.require_subcommand(1);
  std::vector<std::function<int()>> runners;
  std::vector<CLI::App*> subcommands;
  AddCommand<BuildLexiconCommand>(app, "build-lexicon", runners, subcommands);
  AddCommand<SplitLexiconCommand>(app, "split-lexicon", runners, subcommands);
  AddCommand<LexiconStatsCommand>(app, "lexicon-stats", runners, subcommands);
  AddCommand<AttackCommand>(app, "attack", runners, subcommands);
  AddCommand<CurveCommand>(app, "curve", runners, subcommands);
  AddCommand<EvalCommand>(app, "eval", runners, subcommands);
  AddCommand<TransferCommand>(app, "transfer", runners, subcommands);
  AddCommand<DefendCommand>(app, "defend", runners, subcommands);
  AddCommand<TrainToyCommand>(app, "train-toy", runners, subcommands);
  AddCommand<PredictCommand>(app, "predict", runners, subcommands);
  AddCommand<ServeCommand>(app, "serve", runners, subcommands);
  AddCommand<ConformanceCommand>(app, "conformance", runners, subcommands);
  AddCommand<MakeBenchmarkCommand>(app, "make-benchmark", runners, subcommands);
  AddCommand<CollectionAttackCommand>(app, "collection-attack", runners, subcommands);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  for (size_t i = 0; i < subcommands.size(); ++i) {
    if (!subcommands[i]->parsed()) continue;
    try {
      return runners[i]();
    } catch (const UsageError& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kExitUsage;
    } catch (const FormatError& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kExitUsage;
    } catch (const ContractViolation& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kExitUsage;
    } catch (const Unreachable& e) {
      std::cerr << "error: scorer unreachable: " << e.what() << '\n';
      return kExitUnreachable;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kExitPartial;
    }
  }
  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) { return Main(argc, argv); }
