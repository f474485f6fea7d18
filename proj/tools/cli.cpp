// Copyright 2026 The poirec Authors.
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

#include "cli.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "poirec/error.hpp"
#include "poirec/eval.hpp"
#include "poirec/foodtext.hpp"
#include "poirec/ingest.hpp"
#include "poirec/parallel.hpp"
#include "poirec/pipeline.hpp"
#include "poirec/rank.hpp"
#include "poirec/synth.hpp"

namespace poirec::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Settings

struct Settings {
  AblationConfig ablation = desk_scale_ablation(0);
  SynthConfig synth;
  std::size_t min_checkins = PrepareOptions{}.min_checkins;
  int h3_resolution = kDefaultCellResolution;
  std::uint64_t seed = 0;
  int threads = default_threads();

  // Copies the seed and thread count into every stage.
  void propagate() {
    ablation.model.seed = ablation.train.seed = ablation.split.seed = synth.seed = seed;
    ablation.train.threads = ablation.eval.threads = threads;
  }
};

template <typename T>
T parse_value(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("invalid value '" + text + "' for config key " + key);
  }
  return value;
}

struct Knob {
  std::string key;
  std::function<void(Settings&, const std::string&)> set;
  std::function<ordered_json(const Settings&)> get;
};

template <typename T, typename Ref>
Knob knob(const char* key, Ref ref) {
  return {key,
          [key, ref](Settings& s, const std::string& v) { ref(s) = parse_value<T>(key, v); },
          [ref](const Settings& s) { return ordered_json(ref(const_cast<Settings&>(s))); }};
}

#define POIREC_KNOB(T, key, member) \
  knob<T>(key, [](Settings& s) -> T& { return s.member; })

const std::vector<Knob>& knobs() {
  static const std::vector<Knob> table = {
      POIREC_KNOB(std::uint64_t, "seed", seed),
      POIREC_KNOB(int, "threads", threads),
      POIREC_KNOB(int, "d_model", ablation.model.d_model),
      POIREC_KNOB(int, "n_layers", ablation.model.n_layers),
      POIREC_KNOB(int, "n_heads", ablation.model.n_heads),
      POIREC_KNOB(int, "d_ff", ablation.model.d_ff),
      POIREC_KNOB(int, "max_items", ablation.model.max_items),
      POIREC_KNOB(double, "dropout", ablation.model.dropout),
      POIREC_KNOB(std::size_t, "per_attribute", ablation.budgets.per_attribute),
      POIREC_KNOB(std::size_t, "per_sequence", ablation.budgets.per_sequence),
      POIREC_KNOB(std::size_t, "max_vocab", ablation.max_vocab),
      POIREC_KNOB(std::size_t, "min_freq", ablation.min_freq),
      POIREC_KNOB(int, "batch_size", ablation.train.batch_size),
      POIREC_KNOB(int, "pretrain_epochs", ablation.train.pretrain_epochs),
      POIREC_KNOB(int, "finetune_epochs", ablation.train.finetune_epochs),
      POIREC_KNOB(double, "learning_rate", ablation.train.learning_rate),
      POIREC_KNOB(int, "warmup_steps", ablation.train.warmup_steps),
      POIREC_KNOB(double, "weight_decay", ablation.train.weight_decay),
      POIREC_KNOB(double, "max_grad_norm", ablation.train.max_grad_norm),
      POIREC_KNOB(double, "mask_prob", ablation.train.mask_prob),
      POIREC_KNOB(double, "temperature", ablation.train.temperature),
      POIREC_KNOB(double, "lambda", ablation.train.lambda),
      POIREC_KNOB(int, "patience", ablation.train.patience),
      POIREC_KNOB(double, "validation_fraction", ablation.train.validation_fraction),
      POIREC_KNOB(int, "pairs_per_user", ablation.train.pairs_per_user),
      POIREC_KNOB(double, "train_fraction", ablation.split.train_fraction),
      POIREC_KNOB(std::size_t, "min_checkins", min_checkins),
      POIREC_KNOB(int, "h3_resolution", h3_resolution),
      POIREC_KNOB(std::size_t, "synth.users", synth.users),
      POIREC_KNOB(std::size_t, "synth.venues", synth.venues),
      POIREC_KNOB(std::size_t, "synth.categories", synth.categories),
      POIREC_KNOB(std::size_t, "synth.geo_cells", synth.geo_cells),
      POIREC_KNOB(std::size_t, "synth.topics", synth.topics),
      POIREC_KNOB(std::size_t, "synth.keywords_per_topic", synth.keywords_per_topic),
      POIREC_KNOB(std::size_t, "synth.keywords_per_caption", synth.keywords_per_caption),
      POIREC_KNOB(std::size_t, "synth.filler_per_caption", synth.filler_per_caption),
      POIREC_KNOB(std::size_t, "synth.images_per_venue", synth.images_per_venue),
      POIREC_KNOB(std::size_t, "synth.min_length", synth.min_length),
      POIREC_KNOB(std::size_t, "synth.max_length", synth.max_length),
      POIREC_KNOB(double, "synth.fidelity", synth.fidelity),
      {"synth.mode",
       [](Settings& s, const std::string& v) { s.synth.mode = parse_signal_mode(v); },
       [](const Settings& s) { return ordered_json(to_string(s.synth.mode)); }},
  };
  return table;
}

#undef POIREC_KNOB

void set_knob(Settings& s, const std::string& key, const std::string& value) {
  for (const auto& k : knobs()) {
    if (k.key == key) return k.set(s, value);
  }
  throw ConfigError("unknown config key '" + key + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

// Flat "key = value" lines; '#' starts a comment.
void apply_config_file(Settings& s, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config: cannot read " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
    }
    set_knob(s, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

ordered_json snapshot(const Settings& s) {
  ordered_json j = ordered_json::object();
  for (const auto& k : knobs()) j[k.key] = k.get(s);
  return j;
}

// ---------------------------------------------------------------------------
// Files and manifests

std::string fnv1a64_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::uint64_t h = 1469598103934665603ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  return in;
}

class Run {
 public:
  Run(std::string command, const std::vector<std::string>& args, const Settings& settings,
      fs::path out)
      : command_(std::move(command)), args_(args), settings_(settings), out_(std::move(out)),
        started_(utc_now()) {
    fs::create_directories(out_);
  }

  const fs::path& dir() const { return out_; }

  void input(const fs::path& path) {
    if (fs::is_directory(path)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(path)) {
        if (e.is_regular_file() && e.path().filename() != "manifest.json") {
          files.push_back(e.path());
        }
      }
      std::sort(files.begin(), files.end());
      for (const auto& f : files) inputs_.push_back({f.string(), fnv1a64_file(f)});
    } else {
      inputs_.push_back({path.string(), fnv1a64_file(path)});
    }
  }

  // Writes `content` to dir/name and records it as an artifact.
  void write(const std::string& name, const std::string& content) {
    std::ofstream f(out_ / name, std::ios::binary);
    f << content;
    if (!f) throw IoError("cannot write " + (out_ / name).string());
    artifact(name);
  }

  template <typename F>
  void write_with(const std::string& name, F&& writer) {
    std::ofstream f(out_ / name, std::ios::binary);
    writer(f);
    if (!f) throw IoError("cannot write " + (out_ / name).string());
    artifact(name);
  }

  void artifact(const std::string& name) { artifacts_.push_back(name); }

  void finish() const {
    ordered_json m;
    m["command"] = command_;
    m["args"] = args_;
    m["config"] = snapshot(settings_);
    m["seed"] = settings_.seed;
    m["threads"] = settings_.threads;
    ordered_json inputs = ordered_json::array();
    for (const auto& [path, digest] : inputs_) {
      inputs.push_back({{"path", path}, {"fnv1a64", digest}});
    }
    m["inputs"] = inputs;
    ordered_json artifacts = ordered_json::array();
    for (const auto& name : artifacts_) {
      artifacts.push_back({{"path", name}, {"fnv1a64", fnv1a64_file(out_ / name)}});
    }
    m["artifacts"] = artifacts;
    m["started_at"] = started_;
    m["finished_at"] = utc_now();
    std::ofstream f(out_ / "manifest.json", std::ios::binary);
    f << m.dump(2) << '\n';
    if (!f) throw IoError("cannot write manifest in " + out_.string());
  }

 private:
  std::string command_;
  std::vector<std::string> args_;
  Settings settings_;
  fs::path out_;
  std::string started_;
  std::vector<std::pair<std::string, std::string>> inputs_;
  std::vector<std::string> artifacts_;
};

// Failure inside a named pipeline stage.
class StageError : public Error {
 public:
  StageError(const std::string& stage, const std::string& what)
      : Error("stage " + stage + ": " + what) {}
};

template <typename F>
auto in_stage(const std::string& stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

// ---------------------------------------------------------------------------
// Model run directories

namespace files {
constexpr const char* kVocab = "vocab.txt";
constexpr const char* kSplit = "split.json";
constexpr const char* kRun = "run.json";
constexpr const char* kPretrained = "pretrained.bin";
constexpr const char* kQueryEncoder = "query_encoder.bin";
constexpr const char* kItemEncoder = "item_encoder.bin";
constexpr const char* kIndex = "index.bin";
}  // namespace files

std::string split_json(const Split& split) {
  ordered_json j;
  j["train"] = ordered_json::array();
  j["test"] = ordered_json::array();
  for (const auto& s : split.train) j["train"].push_back(s.user_id);
  for (const auto& s : split.test) j["test"].push_back(s.user_id);
  return j.dump(2) + "\n";
}

// Rebuilds a saved split from the corpus, keeping corpus order on each side.
Split load_split(const fs::path& path, const Corpus& corpus) {
  const auto j = nlohmann::json::parse(slurp(path));
  std::set<std::string> train(j.at("train").begin(), j.at("train").end());
  std::set<std::string> test(j.at("test").begin(), j.at("test").end());
  Split split;
  for (const auto& s : corpus.sequences) {
    if (train.count(s.user_id)) split.train.push_back(s);
    if (test.count(s.user_id)) split.test.push_back(s);
  }
  if (split.train.size() != train.size() || split.test.size() != test.size()) {
    throw ValidationError("split in " + path.string() + " names users missing from the corpus");
  }
  return split;
}

bool run_with_desc(const fs::path& dir) {
  return nlohmann::json::parse(slurp(dir / files::kRun)).at("with_desc").get<bool>();
}

ModelParams<float> load_params(const fs::path& path) {
  auto in = open_in(path);
  return load_checkpoint(in);
}

void save_params(Run& run, const std::string& name, const ModelParams<float>& params) {
  run.write_with(name, [&](std::ostream& o) { save_checkpoint(params, o); });
}

std::map<std::string, TokenizedItem> run_items(const Corpus& corpus, const fs::path& run_dir,
                                               const Settings& s) {
  auto in = open_in(run_dir / files::kVocab);
  const Vocab vocab = Vocab::load(in);
  return tokenize_pois(arm_pois(corpus, run_with_desc(run_dir)), vocab,
                       s.ablation.budgets.per_attribute, true);
}

void copy_run_files(Run& run, const fs::path& from) {
  for (const char* name : {files::kVocab, files::kSplit, files::kRun}) {
    run.write(name, slurp(from / name));
  }
}

ItemIndex model_index(const fs::path& model_dir, const std::optional<std::string>& index_path) {
  auto in = open_in(index_path ? fs::path(*index_path) : model_dir / files::kIndex);
  return load_index(in);
}

// ---------------------------------------------------------------------------
// Commands

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out;

  std::string mode = "desc_only";
  std::optional<std::size_t> min_checkins;

  std::string checkins, postal, allowlist, fixtures, descriptions, captions, allocation;
  std::string class_images, class_mapping, summaries, summary_requests, emit_requests;

  std::string corpus, pretrained, model;
  std::optional<std::string> index;
  bool with_desc = true;
  bool exclude_seen = false;
  std::size_t top_k = 10;
  std::string history;

  std::optional<std::string> synth;
  bool no_desc_both = false;
};

void cmd_synth(Run& run, const Settings& s) {
  const SynthData data = generate(s.synth);
  write_synth_files(data, run.dir());
  for (auto name : {synth_files::kCheckins, synth_files::kPostal, synth_files::kGeocoder,
                    synth_files::kCaptions, synth_files::kAllocation,
                    synth_files::kGroundTruth}) {
    run.artifact(std::string(name));
  }
}

// Records every caption record it is asked to summarize.
class RecordingSummarizer : public Summarizer {
 public:
  std::string summarize(const std::vector<std::string>& captions) override {
    records.push_back(combine_captions(captions));
    return inner_.summarize(captions);
  }
  std::vector<std::string> records;

 private:
  NumberedSummarizer inner_;
};

std::vector<std::string> read_lines(const fs::path& path) {
  auto in = open_in(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

void cmd_prepare(Run& run, const Settings& s, const Options& o, std::ostream& out) {
  for (const auto& p : {o.checkins, o.postal, o.allowlist, o.fixtures, o.descriptions,
                        o.captions, o.allocation, o.class_images, o.class_mapping,
                        o.summaries, o.summary_requests}) {
    if (!p.empty()) run.input(p);
  }
  CheckInParseResult parsed = in_stage("ingest", [&] {
    auto in = open_in(o.checkins);
    return parse_checkins(in);
  });
  const PostalTable postal = in_stage("ingest", [&] {
    auto in = open_in(o.postal);
    return parse_postal_table(in).table;
  });
  const CategoryAllowlist allowlist = in_stage("ingest", [&] {
    if (o.allowlist.empty()) return CategoryAllowlist::food_categories();
    auto in = open_in(o.allowlist);
    return CategoryAllowlist::load(in);
  });
  std::unique_ptr<GeocoderBackend> backend;
  if (!o.fixtures.empty()) {
    backend = in_stage("ingest", [&] {
      auto in = open_in(o.fixtures);
      return std::unique_ptr<GeocoderBackend>(FixtureBackend::load(in));
    });
  } else {
    backend = std::make_unique<HttpBackend>(HttpBackendConfig::from_environment());
  }
  GeocoderClient geocoder(std::move(backend));

  std::unique_ptr<DescriptionProvider> provider;
  std::optional<CaptionStore> captions;
  std::unique_ptr<Summarizer> summarizer;
  RecordingSummarizer* recorder = nullptr;
  if (!o.descriptions.empty()) {
    provider = in_stage("foodtext", [&] {
      auto in = open_in(o.descriptions);
      return std::unique_ptr<DescriptionProvider>(
          std::make_unique<ReadyDescriptions>(load_descriptions(in)));
    });
  } else if (!o.captions.empty()) {
    in_stage("foodtext", [&] {
      auto in = open_in(o.captions);
      captions = CaptionStore::load(in);
      return 0;
    });
    Allocation allocation = in_stage("foodtext", [&] {
      if (!o.allocation.empty()) {
        auto in = open_in(o.allocation);
        return load_allocation(in);
      }
      auto images_in = open_in(o.class_images);
      const ClassImages images = load_class_images(images_in);
      ClassMapping mapping = ClassMapping::builtin();
      if (!o.class_mapping.empty()) {
        auto in = open_in(o.class_mapping);
        mapping = ClassMapping::load(in);
      }
      std::map<std::string, std::set<std::string>> venues;
      for (const auto& c : filter_by_category(parsed.checkins, allowlist)) {
        venues[c.category_name].insert(c.venue_id);
      }
      std::map<std::string, std::vector<std::string>> by_category;
      for (const auto& [cat, ids] : venues) by_category[cat].assign(ids.begin(), ids.end());
      return allocate_by_category(mapping, images, by_category, s.seed);
    });
    if (o.allocation.empty()) {
      run.write_with("allocation.jsonl", [&](std::ostream& f) { save_allocation(allocation, f); });
    }
    if (!o.summaries.empty()) {
      summarizer = in_stage("foodtext", [&] {
        const auto requests = read_lines(o.summary_requests);
        auto in = open_in(o.summaries);
        return std::unique_ptr<Summarizer>(std::make_unique<PrecomputedSummarizer>(
            requests, read_summaries(in, requests.size())));
      });
    } else if (!o.emit_requests.empty()) {
      auto r = std::make_unique<RecordingSummarizer>();
      recorder = r.get();
      summarizer = std::move(r);
    } else {
      summarizer = std::make_unique<NumberedSummarizer>();
    }
    provider = std::make_unique<CaptionDescriptions>(std::move(allocation), *captions,
                                                     *summarizer);
  }

  PrepareOptions options;
  options.min_checkins = s.min_checkins;
  options.cell.resolution = s.h3_resolution;
  const PrepareResult result = in_stage("prepare", [&] {
    return prepare(parsed.checkins, allowlist, postal, geocoder, provider.get(), options,
                   parsed.malformed.size());
  });
  in_stage("write", [&] {
    save_corpus(result.corpus, run.dir());
    return 0;
  });
  run.artifact("pois.jsonl");
  run.artifact("sequences.jsonl");
  run.write("prepare_report.json", result.report.to_json());
  if (recorder != nullptr) {
    std::ofstream f(o.emit_requests, std::ios::binary);
    write_summary_requests(recorder->records, f);
    if (!f) throw IoError("cannot write " + o.emit_requests);
  }
  out << result.report.to_json();
}

void cmd_pretrain(Run& run, const Settings& s, const Options& o) {
  run.input(o.corpus);
  const Corpus corpus = load_corpus(o.corpus);
  const Split split = group_split(corpus.sequences, s.ablation.split);
  const auto pois = arm_pois(corpus, o.with_desc);
  const Vocab vocab = arm_vocab(pois, s.ablation);

  TrainingSet data;
  data.items = tokenize_pois(pois, vocab, s.ablation.budgets.per_attribute, true);
  data.sequences = split.train;
  ModelParams<float> params =
      ModelParams<float>::init(arm_model_config(s.ablation, vocab.size()));
  const TrainReport report = pretrain(data, params, s.ablation.train);

  run.write_with(files::kVocab, [&](std::ostream& f) { vocab.save(f); });
  run.write(files::kSplit, split_json(split));
  run.write(files::kRun, ordered_json{{"with_desc", o.with_desc}}.dump(2) + "\n");
  save_params(run, files::kPretrained, params);
  run.write_with("train_log.jsonl", [&](std::ostream& f) { report.write_jsonl(f); });
}

void cmd_finetune(Run& run, const Settings& s, const Options& o) {
  run.input(o.corpus);
  run.input(o.pretrained);
  const Corpus corpus = load_corpus(o.corpus);
  TrainingSet data;
  data.items = run_items(corpus, o.pretrained, s);
  data.sequences = load_split(fs::path(o.pretrained) / files::kSplit, corpus).train;
  const ModelParams<float> pretrained = load_params(fs::path(o.pretrained) / files::kPretrained);
  const FinetuneResult ft = finetune_two_stage(data, pretrained, s.ablation.train);

  copy_run_files(run, o.pretrained);
  save_params(run, files::kQueryEncoder, ft.params);
  save_params(run, files::kItemEncoder, ft.stage1_params);
  run.write_with(files::kIndex, [&](std::ostream& f) { save_index(ft.index, f); });
  run.write_with("train_log.jsonl", [&](std::ostream& f) { ft.report.write_jsonl(f); });
}

void cmd_encode(Run& run, const Settings& s, const Options& o) {
  run.input(o.corpus);
  run.input(o.model);
  const Corpus corpus = load_corpus(o.corpus);
  const auto items = run_items(corpus, o.model, s);
  const ItemIndex index =
      build_index(items, load_params(fs::path(o.model) / files::kItemEncoder), s.threads);
  run.write_with(files::kIndex, [&](std::ostream& f) { save_index(index, f); });
}

void cmd_evaluate(Run& run, const Settings& s, const Options& o, std::ostream& out) {
  run.input(o.corpus);
  run.input(o.model);
  if (o.index) run.input(*o.index);
  const Corpus corpus = load_corpus(o.corpus);
  const auto items = run_items(corpus, o.model, s);
  const Split split = load_split(fs::path(o.model) / files::kSplit, corpus);
  const ItemIndex index = model_index(o.model, o.index);
  EvalOptions eval = s.ablation.eval;
  eval.exclude_seen = o.exclude_seen;
  const MetricsReport report = evaluate(
      split.test, items, index, load_params(fs::path(o.model) / files::kQueryEncoder), eval);
  const std::string label = run_with_desc(o.model) ? "With" : "Without";
  const std::string table = format_metrics_table({{label, report}});
  run.write("report.json", report.to_json());
  run.write("report.txt", table);
  out << table;
}

void cmd_recommend(const Settings& s, const Options& o, std::ostream& out, std::ostream& err) {
  const Corpus corpus = load_corpus(o.corpus);
  const auto items = run_items(corpus, o.model, s);
  const ItemIndex index = model_index(o.model, o.index);
  std::vector<std::string> prefix;
  for (const auto& line : read_lines(o.history)) {
    const std::string id = trim(line.substr(0, line.find('\t')));
    if (id.empty()) continue;
    if (!items.count(id)) {
      err << "warning: unknown venue " << id << " in history, skipped\n";
      continue;
    }
    prefix.push_back(id);
  }
  if (prefix.empty()) throw ValidationError("history has no known venue");
  const Ranking ranking =
      rank(prefix, items, index, load_params(fs::path(o.model) / files::kQueryEncoder),
           {o.top_k, o.exclude_seen});
  for (const auto& r : ranking) {
    const PoiMeta& meta = corpus.pois.at(r.venue_id);
    char score[32];
    std::snprintf(score, sizeof(score), "%.6f", r.score);
    out << r.venue_id << '\t' << score << '\t' << meta.find(attr::kName).value_or("") << '\t'
        << meta.find(attr::kArea).value_or("") << '\n';
  }
}

void cmd_ablate(Run& run, const Settings& s, const Options& o, std::ostream& out) {
  Corpus corpus;
  if (o.synth) {
    SynthConfig sc = s.synth;
    sc.mode = parse_signal_mode(*o.synth);
    corpus = prepare_synth(generate(sc)).corpus;
  } else {
    run.input(o.corpus);
    corpus = load_corpus(o.corpus);
  }
  AblationConfig config = s.ablation;
  config.no_desc_both = o.no_desc_both;
  config.eval.exclude_seen = o.exclude_seen;
  const AblationReport report = run_ablation(corpus, config);
  run.write("report.json", report.to_json());
  run.write("report.txt", report.to_table());
  for (const AblationArm* arm : {&report.with_desc, &report.without_desc}) {
    const std::string suffix = arm == &report.with_desc ? "with" : "without";
    run.write_with("pretrain_log_" + suffix + ".jsonl",
                   [&](std::ostream& f) { arm->pretrain_report.write_jsonl(f); });
    run.write_with("finetune_log_" + suffix + ".jsonl",
                   [&](std::ostream& f) { arm->finetune_report.write_jsonl(f); });
  }
  out << report.to_table();
}

// ---------------------------------------------------------------------------
// Parsing

void add_common(CLI::App* app, Options& o, bool needs_out) {
  app->add_option("--config", o.config, "Flat key = value settings file")
      ->check(CLI::ExistingFile);
  app->add_option("--seed", o.seed, "Seed of every random stream");
  app->add_option("--threads", o.threads, "Worker threads (1 for bitwise determinism)")
      ->check(CLI::PositiveNumber);
  auto* out = app->add_option("--out", o.out, "Output directory");
  if (needs_out) out->required();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Next-venue recommendation from venue text"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");
  Options o;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  add_common(synth, o, true);
  synth->add_option("--mode", o.mode, "desc_only, category or geo");

  auto* prep = app.add_subcommand("prepare", "Build a corpus from raw inputs");
  add_common(prep, o, true);
  prep->add_option("--checkins", o.checkins, "Check-in TSV")->required()->check(CLI::ExistingFile);
  prep->add_option("--postal", o.postal, "Postal table CSV")->required()->check(CLI::ExistingFile);
  prep->add_option("--allowlist", o.allowlist, "Category allowlist")->check(CLI::ExistingFile);
  prep->add_option("--geocoder-fixtures", o.fixtures, "Offline geocoder JSON Lines")
      ->check(CLI::ExistingFile);
  auto* desc = prep->add_option("--descriptions", o.descriptions, "Ready venue descriptions")
                   ->check(CLI::ExistingFile);
  auto* caps = prep->add_option("--captions", o.captions, "Image captions JSON Lines")
                   ->check(CLI::ExistingFile);
  desc->excludes(caps);
  auto* alloc = prep->add_option("--allocation", o.allocation, "Venue image allocation")
                    ->check(CLI::ExistingFile)
                    ->needs(caps);
  auto* cls = prep->add_option("--class-images", o.class_images, "image_id,image_class CSV")
                  ->check(CLI::ExistingFile)
                  ->needs(caps)
                  ->excludes(alloc);
  prep->add_option("--class-mapping", o.class_mapping, "Category to image classes")
      ->check(CLI::ExistingFile)
      ->needs(cls);
  auto* reqs = prep->add_option("--summary-requests", o.summary_requests,
                                "Caption records sent to the summarizer")
                   ->check(CLI::ExistingFile)
                   ->needs(caps);
  prep->add_option("--summaries", o.summaries, "Summarizer answers, one per request line")
      ->check(CLI::ExistingFile)
      ->needs(reqs);
  reqs->needs(prep->get_option("--summaries"));
  prep->add_option("--emit-summary-requests", o.emit_requests,
                   "Write the caption records to summarize")
      ->needs(caps)
      ->excludes(reqs);
  prep->add_option("--min-checkins", o.min_checkins, "Loyalty threshold");

  auto* pre = app.add_subcommand("pretrain", "Pretrain on the training users of a corpus");
  add_common(pre, o, true);
  pre->add_option("--corpus", o.corpus, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  pre->add_flag("--with-desc,!--without-desc", o.with_desc, "Include venue_desc (default)");

  auto* fine = app.add_subcommand("finetune", "Two-stage finetuning of a pretrained model");
  add_common(fine, o, true);
  fine->add_option("--corpus", o.corpus, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  fine->add_option("--pretrained", o.pretrained, "pretrain output directory")
      ->required()
      ->check(CLI::ExistingDirectory);

  auto* enc = app.add_subcommand("encode", "Encode every corpus venue into an index");
  add_common(enc, o, true);
  enc->add_option("--corpus", o.corpus, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  enc->add_option("--model", o.model, "finetune output directory")
      ->required()
      ->check(CLI::ExistingDirectory);

  auto* ev = app.add_subcommand("evaluate", "Leave-last-out evaluation on the test users");
  add_common(ev, o, true);
  ev->add_option("--corpus", o.corpus, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--model", o.model, "finetune output directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  ev->add_option("--index", o.index, "Index file (default: the model's)")->check(CLI::ExistingFile);
  ev->add_flag("--exclude-seen", o.exclude_seen, "Drop prefix venues from the candidates");

  auto* rec = app.add_subcommand("recommend", "Top-k venues after a check-in history");
  add_common(rec, o, false);
  rec->add_option("--corpus", o.corpus, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  rec->add_option("--model", o.model, "finetune output directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  rec->add_option("--index", o.index, "Index file (default: the model's)")->check(CLI::ExistingFile);
  rec->add_option("--history", o.history, "Venue ids, oldest first, one per line")
      ->required()
      ->check(CLI::ExistingFile);
  rec->add_option("--top-k", o.top_k, "Number of rows")->check(CLI::PositiveNumber);
  rec->add_flag("--exclude-seen", o.exclude_seen, "Drop history venues from the candidates");

  auto* abl = app.add_subcommand("ablate", "Train and compare models with and without venue_desc");
  add_common(abl, o, true);
  auto* abl_synth = abl->add_option("--synth", o.synth, "Generate the corpus in this signal mode");
  auto* abl_corpus = abl->add_option("--corpus", o.corpus, "Corpus directory")
                         ->check(CLI::ExistingDirectory);
  abl_synth->excludes(abl_corpus);
  abl->add_flag("--no-desc-both", o.no_desc_both, "Drop venue_desc from both arms");
  abl->add_flag("--exclude-seen", o.exclude_seen, "Drop prefix venues from the candidates");

  std::vector<const char*> argv{"poirec"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kExitOk;
    }
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  if (abl->parsed() && !o.synth && o.corpus.empty()) {
    err << "error: ablate needs --synth MODE or --corpus DIR\n";
    return kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    Settings s;
    if (!o.config.empty()) apply_config_file(s, o.config);
    if (o.seed) s.seed = *o.seed;
    if (o.threads) s.threads = *o.threads;
    if (o.min_checkins) s.min_checkins = *o.min_checkins;
    if (synth->parsed()) s.synth.mode = parse_signal_mode(o.mode);
    s.propagate();
    s.synth.validate();
    s.ablation.train.validate();

    const std::string name = sub->get_name();
    if (name == "recommend") {
      cmd_recommend(s, o, out, err);
      return kExitOk;
    }
    Run r(name, args, s, o.out);
    if (name == "synth") cmd_synth(r, s);
    if (name == "prepare") cmd_prepare(r, s, o, out);
    if (name == "pretrain") cmd_pretrain(r, s, o);
    if (name == "finetune") cmd_finetune(r, s, o);
    if (name == "encode") cmd_encode(r, s, o);
    if (name == "evaluate") cmd_evaluate(r, s, o, out);
    if (name == "ablate") cmd_ablate(r, s, o, out);
    r.finish();
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace poirec::cli
