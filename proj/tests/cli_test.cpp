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

#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "poirec/pipeline.hpp"
#include "poirec/synth.hpp"

namespace poirec {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out, err;
};

Result cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream(p, std::ios::binary) << s;
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

// Scratch directory with a tiny settings file.
struct Workspace {
  fs::path dir;
  std::string config;

  explicit Workspace(const std::string& name)
      : dir(fs::temp_directory_path() / ("poirec_cli_" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
    config = (dir / "tiny.cfg").string();
    spit(config,
         "# tiny model\n"
         "synth.users = 40\n"
         "d_model = 16\n"
         "d_ff = 32\n"
         "n_layers = 1\n"
         "pretrain_epochs = 1\n"
         "finetune_epochs = 1\n"
         "pairs_per_user = 2\n");
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string at(const std::string& name) const { return (dir / name).string(); }

  Result synth_and_prepare() {
    const Result s = cli({"synth", "--config", config, "--seed", "3", "--out", at("syn")});
    if (s.code != 0) return s;
    return cli({"prepare", "--config", config, "--checkins", at("syn/checkins.tsv"),
                "--postal", at("syn/postal.csv"), "--geocoder-fixtures",
                at("syn/geocoder.jsonl"), "--captions", at("syn/captions.jsonl"),
                "--allocation", at("syn/allocation.jsonl"), "--min-checkins", "20", "--out",
                at("corpus")});
  }
};

TEST_CASE("usage errors exit with 2") {
  Workspace w("usage");
  CHECK(cli({}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({"synth"}).code == 2);
  CHECK(cli({"synth", "--help"}).code == 0);

  const Result no_postal = cli({"prepare", "--checkins", w.config, "--out", w.at("x")});
  CHECK(no_postal.code == 2);
  CHECK(no_postal.err.find("--postal") != std::string::npos);

  const Result missing_file =
      cli({"prepare", "--checkins", w.config, "--postal", w.at("nope.csv"), "--out", w.at("x")});
  CHECK(missing_file.code == 2);
  CHECK(missing_file.err.find("--postal") != std::string::npos);

  spit(w.at("bad.cfg"), "colour = blue\n");
  const Result bad_key = cli({"synth", "--config", w.at("bad.cfg"), "--out", w.at("y")});
  CHECK(bad_key.code == 2);
  CHECK(bad_key.err.find("colour") != std::string::npos);
  spit(w.at("bad.cfg"), "d_model = many\n");
  CHECK(cli({"synth", "--config", w.at("bad.cfg"), "--out", w.at("y")}).code == 2);
  spit(w.at("bad.cfg"), "synth.fidelity = 1.5\n");
  CHECK(cli({"synth", "--config", w.at("bad.cfg"), "--out", w.at("y")}).code == 2);

  CHECK(cli({"ablate", "--out", w.at("z")}).code == 2);
  CHECK(cli({"ablate", "--synth", "colour", "--out", w.at("z")}).code == 2);
}

TEST_CASE("runtime failures exit with 1 and name the stage") {
  Workspace w("runtime");
  REQUIRE(cli({"synth", "--config", w.config, "--seed", "3", "--out", w.at("syn")}).code == 0);
  spit(w.at("broken.jsonl"), "{not json\n");
  const Result r = cli({"prepare", "--checkins", w.at("syn/checkins.tsv"), "--postal",
                        w.at("syn/postal.csv"), "--geocoder-fixtures", w.at("broken.jsonl"),
                        "--out", w.at("corpus")});
  CHECK(r.code == 1);
  CHECK(r.err.find("stage ingest") != std::string::npos);
}

TEST_CASE("prepare on synthetic inputs reproduces the generator counts") {
  Workspace w("prepare");
  const Result r = w.synth_and_prepare();
  REQUIRE(r.code == 0);
  SynthConfig c;
  c.users = 40;
  c.seed = 3;
  const SynthData data = generate(c);
  std::set<std::string> venues;
  for (const auto& ci : data.checkins) venues.insert(ci.venue_id);

  const auto report = nlohmann::json::parse(slurp(w.at("corpus/prepare_report.json")));
  const auto& final_stage = report["stages"].back();
  CHECK(final_stage["stage"] == "final");
  CHECK(final_stage["users"].get<std::size_t>() == c.users);
  CHECK(final_stage["checkins"].get<std::size_t>() == data.checkins.size());
  CHECK(final_stage["pois"].get<std::size_t>() == venues.size());
  CHECK(load_corpus(w.at("corpus")).sequences == prepare_synth(data).corpus.sequences);

  // Manifest digests match the files on disk.
  const auto manifest = nlohmann::json::parse(slurp(w.at("corpus/manifest.json")));
  CHECK(manifest["command"] == "prepare");
  CHECK(manifest["config"]["min_checkins"] == 20);
  CHECK(manifest["inputs"].size() == 5);
  for (const auto& a : manifest["artifacts"]) {
    CHECK(fs::exists(w.dir / "corpus" / a["path"].get<std::string>()));
    CHECK(a["fnv1a64"].get<std::string>().size() == 16);
  }
  const std::string first = slurp(w.at("corpus/pois.jsonl"));
  REQUIRE(w.synth_and_prepare().code == 0);
  CHECK(slurp(w.at("corpus/pois.jsonl")) == first);
  const auto again = nlohmann::json::parse(slurp(w.at("corpus/manifest.json")));
  CHECK(again["artifacts"] == manifest["artifacts"]);
}

TEST_CASE("pretrain, finetune, encode, evaluate and recommend") {
  Workspace w("chain");
  REQUIRE(w.synth_and_prepare().code == 0);
  const std::vector<std::string> common{"--config", w.config, "--seed", "3", "--threads", "1"};
  auto with = [&](std::vector<std::string> args) {
    args.insert(args.begin() + 1, common.begin(), common.end());
    return cli(args);
  };
  REQUIRE(with({"pretrain", "--corpus", w.at("corpus"), "--out", w.at("pre")}).code == 0);
  REQUIRE(with({"finetune", "--corpus", w.at("corpus"), "--pretrained", w.at("pre"), "--out",
                w.at("ft")})
              .code == 0);
  REQUIRE(with({"encode", "--corpus", w.at("corpus"), "--model", w.at("ft"), "--out",
                w.at("enc")})
              .code == 0);
  CHECK(slurp(w.at("enc/index.bin")) == slurp(w.at("ft/index.bin")));

  const Result ev =
      with({"evaluate", "--corpus", w.at("corpus"), "--model", w.at("ft"), "--out", w.at("ev")});
  REQUIRE(ev.code == 0);
  const auto report = nlohmann::json::parse(slurp(w.at("ev/report.json")));
  CHECK(report["n_sequences"].get<int>() == 8);
  CHECK(ev.out.find("With") != std::string::npos);

  const auto corpus = load_corpus(w.at("corpus"));
  const auto& items = corpus.sequences.front().items;
  spit(w.at("hist.txt"), items[0].venue_id + "\n" + items[1].venue_id + "\nunknown-venue\n");
  const Result rec = with({"recommend", "--corpus", w.at("corpus"), "--model", w.at("ft"),
                           "--history", w.at("hist.txt"), "--top-k", "10"});
  REQUIRE(rec.code == 0);
  CHECK(rec.err.find("unknown-venue") != std::string::npos);
  const auto rows = lines(rec.out);
  REQUIRE(rows.size() == 10);
  double last = 2.0;
  for (const auto& row : rows) {
    std::vector<std::string> cols;
    std::istringstream in(row);
    for (std::string c; std::getline(in, c, '\t');) cols.push_back(c);
    REQUIRE(cols.size() == 4);
    CHECK(corpus.pois.count(cols[0]) == 1);
    const double score = std::stod(cols[1]);
    CHECK(score <= last);
    last = score;
    CHECK(cols[3].find("Area") == 0);
  }
  CHECK(with({"recommend", "--corpus", w.at("corpus"), "--model", w.at("ft"), "--history",
              w.at("hist.txt"), "--top-k", "10"})
            .out == rec.out);

  spit(w.at("one.txt"), items[0].venue_id + "\n");
  const Result one = with({"recommend", "--corpus", w.at("corpus"), "--model", w.at("ft"),
                           "--history", w.at("one.txt"), "--top-k", "3", "--exclude-seen"});
  CHECK(one.code == 0);
  CHECK(lines(one.out).size() == 3);
  CHECK(one.out.find(items[0].venue_id) == std::string::npos);

  spit(w.at("none.txt"), "unknown-venue\n");
  CHECK(with({"recommend", "--corpus", w.at("corpus"), "--model", w.at("ft"), "--history",
              w.at("none.txt")})
            .code == 1);

  REQUIRE(with({"pretrain", "--corpus", w.at("corpus"), "--without-desc", "--out",
                w.at("pre2")})
              .code == 0);
  CHECK(slurp(w.at("pre2/vocab.txt")).size() < slurp(w.at("pre/vocab.txt")).size());
  CHECK(slurp(w.at("pre2/split.json")) == slurp(w.at("pre/split.json")));
}

TEST_CASE("ablate is deterministic and --no-desc-both gives identical rows") {
  Workspace w("ablate");
  const std::vector<std::string> base{"ablate", "--synth", "desc_only", "--config", w.config,
                                      "--seed", "7", "--threads", "1"};
  auto run = [&](const std::string& out, bool both) {
    auto args = base;
    args.push_back("--out");
    args.push_back(w.at(out));
    if (both) args.push_back("--no-desc-both");
    return cli(args);
  };
  REQUIRE(run("a", false).code == 0);
  REQUIRE(run("b", false).code == 0);
  CHECK(slurp(w.at("a/report.json")) == slurp(w.at("b/report.json")));
  CHECK(slurp(w.at("a/report.txt")) == slurp(w.at("b/report.txt")));

  REQUIRE(run("c", true).code == 0);
  const auto j = nlohmann::json::parse(slurp(w.at("c/report.json")));
  for (const char* key : {"ndcg@10", "ndcg@50", "recall@10", "recall@50", "mrr", "auc"}) {
    CHECK(j["with_desc"][key] == j["without_desc"][key]);
  }
  const auto table = lines(slurp(w.at("c/report.txt")));
  REQUIRE(table.size() == 4);
  CHECK(table[1].substr(13) == table[2].substr(13));
}

}  // namespace
}  // namespace poirec
