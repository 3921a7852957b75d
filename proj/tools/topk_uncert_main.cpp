// Command-line front end: synthetic dataset generation, aggregation +
// evaluation of multi-run Top-K prediction logs, and side-by-side strategy
// comparison tables.
//
// Exit codes: 0 success, 2 argument/config error, 3 I/O failure,
// 4 input schema error, 5 strategy precondition failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "topk_uncert/aggregate.hpp"
#include "topk_uncert/canonical_json.hpp"
#include "topk_uncert/core.hpp"
#include "topk_uncert/jsonl.hpp"
#include "topk_uncert/report.hpp"
#include "topk_uncert/synthgen.hpp"
#include "topk_uncert/version.hpp"

namespace fs = std::filesystem;
using namespace topk_uncert;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitArgs = 2;
constexpr int kExitIo = 3;
constexpr int kExitSchema = 4;
constexpr int kExitStrategy = 5;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed on '" + path.string() + "'");
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << content;
  out.flush();
  if (!out) throw IoError("write failed on '" + path.string() + "'");
}

template <typename T>
T config_number(const nlohmann::json& j, const char* field, T fallback, bool required = false) {
  if (!j.contains(field)) {
    if (required) throw InvalidConfigError(field, "missing");
    return fallback;
  }
  if (!j[field].is_number()) throw InvalidConfigError(field, "not a number");
  return j[field].get<T>();
}

GeneratorConfig parse_generator_config(const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidConfigError("<root>", "config is not a JSON object");
  GeneratorConfig cfg;
  cfg.vocab_size = config_number<std::size_t>(j, "vocab_size", 0, /*required=*/true);
  cfg.n_samples = config_number<std::size_t>(j, "n_samples", 0, /*required=*/true);
  cfg.m_runs = config_number<std::size_t>(j, "m_runs", cfg.m_runs);
  cfg.k = config_number<std::size_t>(j, "k", cfg.k);
  cfg.concentration = config_number<double>(j, "concentration", cfg.concentration);
  cfg.decode_temperature = config_number<double>(j, "decode_temperature", cfg.decode_temperature);
  cfg.confidence_bias = config_number<double>(j, "confidence_bias", cfg.confidence_bias);
  cfg.seed = config_number<std::uint64_t>(j, "seed", cfg.seed);
  validate_config(cfg);
  return cfg;
}

std::string generator_manifest_json(const GeneratorConfig& cfg, const std::string& content_hash) {
  canonical::Writer w;
  w.begin_object();
  w.key("confidence_bias");
  w.value(cfg.confidence_bias);
  w.key("concentration");
  w.value(cfg.concentration);
  w.key("content_hash");
  w.value(std::string_view(content_hash));
  w.key("decode_temperature");
  w.value(cfg.decode_temperature);
  w.key("k");
  w.value(static_cast<std::uint64_t>(cfg.k));
  w.key("m_runs");
  w.value(static_cast<std::uint64_t>(cfg.m_runs));
  w.key("n_samples");
  w.value(static_cast<std::uint64_t>(cfg.n_samples));
  w.key("seed");
  w.value(static_cast<std::uint64_t>(cfg.seed));
  w.key("tool_version");
  w.value(kVersion);
  w.key("vocab_size");
  w.value(static_cast<std::uint64_t>(cfg.vocab_size));
  w.end_object();
  return w.take();
}

int cmd_generate(const std::string& config_path, const std::string& out_path,
                 std::optional<std::uint64_t> seed_override) {
  GeneratorConfig cfg;
  try {
    nlohmann::json j = nlohmann::json::parse(read_file(config_path));
    cfg = parse_generator_config(j);
    if (seed_override) cfg.seed = *seed_override;
    validate_config(cfg);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const InvalidConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitArgs;
  } catch (const nlohmann::json::parse_error& e) {
    std::cerr << "error: config parse: " << e.what() << "\n";
    return kExitArgs;
  }

  try {
    const Dataset ds = generate_dataset(cfg);
    std::ostringstream body;
    serialize_dataset(ds, body);
    const std::string jsonl = body.str();
    write_file(out_path, jsonl);
    write_file(out_path + ".manifest.json",
               generator_manifest_json(cfg, fnv1a64_hex(jsonl)) + "\n");
    std::cout << "generated " << cfg.n_samples << " samples (M=" << cfg.m_runs
              << ", K=" << cfg.k << ", vocab=" << cfg.vocab_size << ", seed=" << cfg.seed
              << ") -> " << out_path << "\n";
    return kExitOk;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
}

std::vector<StrategyId> resolve_strategies(const std::string& name) {
  if (name == "all") {
    return {StrategyId::kConsistency, StrategyId::kConfidenceWeighted, StrategyId::kPairRank,
            StrategyId::kSingleRun};
  }
  const auto s = strategy_from_string(name);
  if (!s) throw InvalidArgumentError("unknown strategy '" + name + "'");
  return {*s};
}

std::optional<std::uint64_t> sidecar_seed(const std::string& in_path) {
  const fs::path sidecar = in_path + ".manifest.json";
  if (!fs::exists(sidecar)) return std::nullopt;
  try {
    nlohmann::json j = nlohmann::json::parse(read_file(sidecar));
    if (j.is_object() && j.contains("seed") && j["seed"].is_number_unsigned()) {
      return j["seed"].get<std::uint64_t>();
    }
  } catch (...) {
    // A broken sidecar only costs the seed provenance field.
  }
  return std::nullopt;
}

int cmd_evaluate(const std::string& in_path, const std::string& strategy_name, std::size_t k,
                 std::size_t bins, const std::string& grid_spec, double epsilon,
                 bool default_conf, bool dedup, const std::string& out_dir) {
  std::vector<StrategyId> strategies;
  GridSpec grid;
  try {
    strategies = resolve_strategies(strategy_name);
    grid = GridSpec::parse(grid_spec);
    if (k < 1) throw InvalidKError{};
    if (bins < 1) throw InvalidArgumentError("bins must be >= 1");
    if (epsilon < 0.0) throw InvalidArgumentError("epsilon must be >= 0");
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitArgs;
  }

  Dataset ds;
  std::string content_hash;
  try {
    const std::string content = read_file(in_path);
    content_hash = fnv1a64_hex(content);
    std::istringstream in(content);
    ds = parse_dataset(in, in_path);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    std::cerr << "error: schema: " << e.what() << "\n";
    return kExitSchema;
  }

  try {
    fs::create_directories(out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: cannot create '" << out_dir << "': " << e.what() << "\n";
    return kExitIo;
  }

  const auto seed = sidecar_seed(in_path);
  for (const StrategyId strategy : strategies) {
    EvalOptions opt;
    opt.strategy = strategy;
    opt.k = k;
    opt.bins = bins;
    opt.grid = grid;
    opt.bt.epsilon = epsilon;
    opt.default_confidence = default_conf;
    opt.dedup = dedup;

    RunManifest manifest;
    manifest.input_path = in_path;
    manifest.strategy = strategy;
    manifest.k = k;
    manifest.bins = bins;
    manifest.grid = grid;
    manifest.bt = opt.bt;
    manifest.default_confidence = default_conf;
    manifest.dedup = dedup;
    manifest.seed = seed;
    manifest.content_hash = content_hash;

    EvalReport report;
    try {
      report = build_eval_report(ds, opt, manifest);
    } catch (const MissingConfidenceError& e) {
      std::cerr << "error: strategy '" << to_string(strategy) << "': " << e.what()
                << " (use --default-conf to substitute 1.0)\n";
      return kExitStrategy;
    } catch (const Error& e) {
      std::cerr << "error: strategy '" << to_string(strategy) << "': " << e.what() << "\n";
      return kExitStrategy;
    }

    const std::string tag(to_string(strategy));
    try {
      const fs::path dir(out_dir);
      write_file(dir / ("report_" + tag + ".json"), to_canonical_json(report) + "\n");
      write_file(dir / ("selective_" + tag + ".csv"), selective_csv(report));
      write_file(dir / ("set_ece_" + tag + ".csv"), set_ece_csv(report));
      write_file(dir / ("rankwise_" + tag + ".csv"), rankwise_csv(report));
    } catch (const IoError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitIo;
    }
    std::cout << tag << ": top1=" << canonical::format_double(report.top1)
              << " recall@" << k << "=" << canonical::format_double(report.recall_at_k())
              << " top1_ece=" << canonical::format_double(report.top1_calibration.ece)
              << " set_ece@" << k << "=" << canonical::format_double(report.set_ece_at_k())
              << " entropy=" << canonical::format_double(report.geometry.mean_normalized_entropy)
              << "\n";
  }
  return kExitOk;
}

struct ReportRow {
  std::string strategy;
  double top1 = 0.0;
  double recall = 0.0;
  double top1_ece = 0.0;
  double set_ece = 0.0;
  double entropy = 0.0;
  std::uint64_t k = 0;
  std::uint64_t bins = 0;
};

ReportRow load_report_row(const std::string& path) {
  nlohmann::json j = nlohmann::json::parse(read_file(path));
  ReportRow row;
  row.strategy = j.at("manifest").at("strategy").get<std::string>();
  row.k = j.at("manifest").at("k").get<std::uint64_t>();
  row.bins = j.at("manifest").at("bins").get<std::uint64_t>();
  row.top1 = j.at("correctness").at("top1_accuracy").get<double>();
  row.recall = j.at("correctness").at("recall_at_k").back().at("recall").get<double>();
  row.set_ece = j.at("calibration").at("set_ece_curve").back().at("set_ece").get<double>();
  row.top1_ece = j.at("calibration").at("top1").at("ece").get<double>();
  row.entropy = j.at("geometry").at("mean_normalized_entropy").get<double>();
  return row;
}

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

int cmd_report(const std::vector<std::string>& report_paths, const std::string& out_base) {
  std::vector<ReportRow> rows;
  try {
    for (const auto& p : report_paths) rows.push_back(load_report_row(p));
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: cannot read report: " << e.what() << "\n";
    return kExitArgs;
  }
  for (const auto& row : rows) {
    if (row.k != rows.front().k || row.bins != rows.front().bins) {
      std::cerr << "error: reports disagree on K or bins (" << rows.front().strategy << ": K="
                << rows.front().k << " bins=" << rows.front().bins << " vs " << row.strategy
                << ": K=" << row.k << " bins=" << row.bins << ")\n";
      return kExitArgs;
    }
  }

  const std::string k_str = std::to_string(rows.front().k);
  std::string csv = "strategy,top1,recall_at_" + k_str + ",top1_ece,set_ece_at_" + k_str +
                    ",entropy\n";
  for (const auto& r : rows) {
    csv += r.strategy + "," + canonical::format_double(r.top1) + "," +
           canonical::format_double(r.recall) + "," + canonical::format_double(r.top1_ece) +
           "," + canonical::format_double(r.set_ece) + "," +
           canonical::format_double(r.entropy) + "\n";
  }

  std::string txt;
  {
    char line[256];
    std::snprintf(line, sizeof(line), "%-14s %8s %12s %10s %12s %9s\n", "strategy", "top1",
                  ("recall@" + k_str).c_str(), "top1_ece", ("set_ece@" + k_str).c_str(),
                  "entropy");
    txt += line;
    for (const auto& r : rows) {
      std::snprintf(line, sizeof(line), "%-14s %8s %12s %10s %12s %9s\n", r.strategy.c_str(),
                    fixed4(r.top1).c_str(), fixed4(r.recall).c_str(),
                    fixed4(r.top1_ece).c_str(), fixed4(r.set_ece).c_str(),
                    fixed4(r.entropy).c_str());
      txt += line;
    }
  }

  try {
    write_file(out_base + ".csv", csv);
    write_file(out_base + ".txt", txt);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  std::cout << txt;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Aggregation and decision-aware uncertainty evaluation for multi-run Top-K "
               "prediction logs"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Generate a synthetic JSONL dataset");
  std::string gen_config;
  std::string gen_out;
  std::optional<std::uint64_t> gen_seed;
  gen->add_option("--config", gen_config, "Generator config (JSON)")->required();
  gen->add_option("--out", gen_out, "Output JSONL path")->required();
  gen->add_option("--seed", gen_seed, "Override the config seed");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Aggregate runs and compute the metric suite");
  std::string eval_in;
  std::string eval_strategy = "consistency";
  std::size_t eval_k = 10;
  std::size_t eval_bins = 10;
  std::string eval_grid = "0:1:0.01";
  double eval_epsilon = 0.01;
  bool eval_default_conf = false;
  bool eval_dedup = false;
  std::string eval_out;
  eval->add_option("--in", eval_in, "Input JSONL path")->required();
  eval->add_option("--strategy", eval_strategy,
                   "consistency|weighted|pairrank|single|all (default consistency)");
  eval->add_option("--k", eval_k, "Top-K size (default 10)");
  eval->add_option("--bins", eval_bins, "Calibration bins (default 10)");
  eval->add_option("--grid", eval_grid, "Threshold grid start:stop:step (default 0:1:0.01)");
  eval->add_option("--epsilon", eval_epsilon, "Bradley-Terry pseudo-count (default 0.01)");
  eval->add_flag("--default-conf", eval_default_conf,
                 "Treat missing verbalized confidences as 1.0");
  eval->add_flag("--dedup", eval_dedup, "Drop duplicate actions across ranks");
  eval->add_option("--out", eval_out, "Output directory")->required();

  // report
  auto* rep = app.add_subcommand("report", "Side-by-side comparison of evaluation reports");
  std::vector<std::string> rep_inputs;
  std::string rep_out;
  rep->add_option("reports", rep_inputs, "report_<strategy>.json files")->required();
  rep->add_option("--out", rep_out, "Output base path (.csv and .txt appended)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitArgs;
  }

  try {
    if (gen->parsed()) return cmd_generate(gen_config, gen_out, gen_seed);
    if (eval->parsed()) {
      return cmd_evaluate(eval_in, eval_strategy, eval_k, eval_bins, eval_grid, eval_epsilon,
                          eval_default_conf, eval_dedup, eval_out);
    }
    if (rep->parsed()) return cmd_report(rep_inputs, rep_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitArgs;
  }
  return kExitArgs;
}
