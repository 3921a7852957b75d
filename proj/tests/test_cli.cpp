#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

int run(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) {
    path = fs::temp_directory_path() / name;
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

const std::string kCli = TOPK_CLI_PATH;

const char* kConfig = R"({
  "vocab_size": 12, "n_samples": 25, "m_runs": 3, "k": 5,
  "concentration": 2.0, "decode_temperature": 0.8,
  "confidence_bias": 0.0, "seed": 7
})";

}  // namespace

TEST_CASE("cli generate writes the dataset, a manifest sidecar, and is reproducible") {
  TempDir tmp("topk_cli_generate");
  spit(tmp.path / "cfg.json", kConfig);

  const std::string out1 = (tmp.path / "d1.jsonl").string();
  const std::string out2 = (tmp.path / "d2.jsonl").string();
  CHECK(run(kCli + " generate --config " + (tmp.path / "cfg.json").string() + " --out " + out1 +
            " > /dev/null") == 0);
  CHECK(run(kCli + " generate --config " + (tmp.path / "cfg.json").string() + " --out " + out2 +
            " > /dev/null") == 0);

  const std::string body = slurp(out1);
  CHECK(body == slurp(out2));
  std::size_t lines = 0;
  for (char c : body) lines += c == '\n' ? 1 : 0;
  CHECK(lines == 25);
  CHECK(fs::exists(out1 + ".manifest.json"));
  CHECK(slurp(out1 + ".manifest.json").find("\"seed\":7") != std::string::npos);
}

TEST_CASE("cli generate rejects a bad config naming the field") {
  TempDir tmp("topk_cli_badcfg");
  spit(tmp.path / "cfg.json", R"({"vocab_size": 12, "n_samples": 5, "m_runs": 0})");
  const std::string err = (tmp.path / "err.txt").string();
  CHECK(run(kCli + " generate --config " + (tmp.path / "cfg.json").string() + " --out " +
            (tmp.path / "d.jsonl").string() + " 2> " + err) == 2);
  CHECK(slurp(err).find("m_runs") != std::string::npos);
}

TEST_CASE("cli generate reports io failures") {
  TempDir tmp("topk_cli_io");
  spit(tmp.path / "cfg.json", kConfig);
  CHECK(run(kCli + " generate --config " + (tmp.path / "cfg.json").string() +
            " --out /nonexistent-dir/out.jsonl 2> /dev/null") == 3);
  CHECK(run(kCli + " generate --config " + (tmp.path / "missing.json").string() + " --out " +
            (tmp.path / "d.jsonl").string() + " 2> /dev/null") == 3);
}

TEST_CASE("cli evaluate handles strategy preconditions and schema errors") {
  TempDir tmp("topk_cli_eval");
  // Two confidence-free records.
  spit(tmp.path / "noconf.jsonl",
       "{\"segment_id\":\"s1\",\"ground_truth\":\"a\",\"runs\":[[{\"action\":\"a\"},{\"action\":\"b\"}]]}\n"
       "{\"segment_id\":\"s2\",\"ground_truth\":\"b\",\"runs\":[[{\"action\":\"b\"},{\"action\":\"a\"}]]}\n");

  const std::string base = kCli + " evaluate --in " + (tmp.path / "noconf.jsonl").string() +
                           " --k 2 --out " + (tmp.path / "rep").string();
  SECTION("weighted without confidences fails with exit 5") {
    CHECK(run(base + " --strategy weighted 2> /dev/null") == 5);
    CHECK(run(base + " --strategy weighted --default-conf > /dev/null") == 0);
  }
  SECTION("unknown strategy is an argument error") {
    CHECK(run(base + " --strategy bogus 2> /dev/null") == 2);
  }
  SECTION("schema errors exit 4 and name the line") {
    spit(tmp.path / "broken.jsonl", "{\"segment_id\":\"s1\"}\n");
    const std::string err = (tmp.path / "err.txt").string();
    CHECK(run(kCli + " evaluate --in " + (tmp.path / "broken.jsonl").string() + " --out " +
              (tmp.path / "rep2").string() + " 2> " + err) == 4);
    CHECK(slurp(err).find("line 1") != std::string::npos);
  }
  SECTION("missing input exits 3") {
    CHECK(run(kCli + " evaluate --in " + (tmp.path / "nope.jsonl").string() + " --out " +
              (tmp.path / "rep3").string() + " 2> /dev/null") == 3);
  }
}

TEST_CASE("cli evaluate --strategy all emits four reports plus csv companions") {
  TempDir tmp("topk_cli_all");
  spit(tmp.path / "cfg.json", kConfig);
  const std::string data = (tmp.path / "d.jsonl").string();
  REQUIRE(run(kCli + " generate --config " + (tmp.path / "cfg.json").string() + " --out " +
              data + " > /dev/null") == 0);
  const std::string rep = (tmp.path / "rep").string();
  REQUIRE(run(kCli + " evaluate --in " + data + " --strategy all --k 5 --out " + rep +
              " > /dev/null") == 0);
  for (const char* tag : {"consistency", "weighted", "pairrank", "single"}) {
    CHECK(fs::exists(fs::path(rep) / ("report_" + std::string(tag) + ".json")));
    CHECK(fs::exists(fs::path(rep) / ("selective_" + std::string(tag) + ".csv")));
    CHECK(fs::exists(fs::path(rep) / ("set_ece_" + std::string(tag) + ".csv")));
    CHECK(fs::exists(fs::path(rep) / ("rankwise_" + std::string(tag) + ".csv")));
  }
  // Seed provenance flows from the generator sidecar into the report manifest.
  CHECK(slurp(fs::path(rep) / "report_consistency.json").find("\"seed\":7") !=
        std::string::npos);
}

TEST_CASE("cli report builds a comparison table and rejects mismatched reports") {
  TempDir tmp("topk_cli_report");
  spit(tmp.path / "cfg.json", kConfig);
  const std::string data = (tmp.path / "d.jsonl").string();
  REQUIRE(run(kCli + " generate --config " + (tmp.path / "cfg.json").string() + " --out " +
              data + " > /dev/null") == 0);
  const std::string rep = (tmp.path / "rep").string();
  REQUIRE(run(kCli + " evaluate --in " + data + " --strategy all --k 5 --out " + rep +
              " > /dev/null") == 0);

  SECTION("four-report table") {
    const std::string out = (tmp.path / "cmp").string();
    REQUIRE(run(kCli + " report " + rep + "/report_consistency.json " + rep +
                "/report_weighted.json " + rep + "/report_pairrank.json " + rep +
                "/report_single.json --out " + out + " > /dev/null") == 0);
    const std::string csv = slurp(out + ".csv");
    std::size_t lines = 0;
    for (char c : csv) lines += c == '\n' ? 1 : 0;
    CHECK(lines == 5);  // header + one row per strategy
    CHECK(fs::exists(out + ".txt"));
  }
  SECTION("single-report table degenerates to one row") {
    const std::string out = (tmp.path / "cmp1").string();
    REQUIRE(run(kCli + " report " + rep + "/report_single.json --out " + out +
                " > /dev/null") == 0);
    std::size_t lines = 0;
    for (char c : slurp(out + ".csv")) lines += c == '\n' ? 1 : 0;
    CHECK(lines == 2);
  }
  SECTION("mismatched K exits 2") {
    const std::string rep3 = (tmp.path / "rep3").string();
    REQUIRE(run(kCli + " evaluate --in " + data + " --strategy consistency --k 3 --out " +
                rep3 + " > /dev/null") == 0);
    CHECK(run(kCli + " report " + rep + "/report_consistency.json " + rep3 +
              "/report_consistency.json --out " + (tmp.path / "cmpx").string() +
              " 2> /dev/null") == 2);
  }
}
