#include "shiftband/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "shiftband/harness.hpp"

namespace shiftband::cli {

namespace {

using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << contents;
}

std::uint64_t seed_offset_from_env() {
  const char* raw = std::getenv("SHIFTBAND_SEED_OFFSET");
  if (!raw || !*raw) return 0;
  return std::strtoull(raw, nullptr, 10);
}

void reject_unknown(const json& j, const std::vector<std::string>& allowed,
                    const std::string& path) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
      throw std::invalid_argument("unknown field " + path + "." + it.key());
    }
  }
}

struct RunFiles {
  std::string out_csv;
  std::string out_json;
  std::string events_jsonl;
};

harness::ExperimentConfig parse_experiment_config(const std::string& text,
                                                  RunFiles& files) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }
  reject_unknown(j,
                 {"env", "policy", "eviction", "horizons", "seeds", "parallel",
                  "ground_truth", "ground_truth_cap", "record_curve",
                  "curve_stride", "out_csv", "out_json", "events_jsonl"},
                 "config");

  harness::ExperimentConfig cfg;
  cfg.env = env::parse_env_spec(j.at("env").dump());
  cfg.policy_name = j.value("policy", std::string("meta"));

  if (j.contains("eviction")) {
    const json& e = j.at("eviction");
    reject_unknown(e, {"C0", "threshold_variant", "scan_mode"}, "config.eviction");
    cfg.eviction.c0 = e.value("C0", meta::kDefaultC0);
    if (!(cfg.eviction.c0 > 0.0)) {
      throw std::invalid_argument("config.eviction.C0 must be > 0");
    }
    const std::string variant = e.value("threshold_variant", std::string("main"));
    if (variant == "main") cfg.eviction.variant = meta::ThresholdVariant::kMain;
    else if (variant == "remark") cfg.eviction.variant = meta::ThresholdVariant::kRemark;
    else throw std::invalid_argument("config.eviction.threshold_variant: '" +
                                     variant + "'");
    const std::string scan = e.value("scan_mode", std::string("dyadic"));
    if (scan == "exact") cfg.eviction.scan = meta::ScanMode::kExact;
    else if (scan == "dyadic") cfg.eviction.scan = meta::ScanMode::kDyadic;
    else throw std::invalid_argument("config.eviction.scan_mode: '" + scan + "'");
  }

  cfg.horizons = j.at("horizons").get<std::vector<Round>>();

  const std::uint64_t offset = seed_offset_from_env();
  const json& seeds = j.at("seeds");
  if (seeds.is_number_unsigned() || seeds.is_number_integer()) {
    const long n = seeds.get<long>();
    if (n < 1) throw std::invalid_argument("config.seeds must be >= 1");
    for (long i = 0; i < n; ++i) {
      cfg.seeds.push_back(offset + static_cast<std::uint64_t>(i));
    }
  } else if (seeds.is_array()) {
    for (const auto& s : seeds) {
      cfg.seeds.push_back(offset + s.get<std::uint64_t>());
    }
    if (cfg.seeds.empty()) throw std::invalid_argument("config.seeds is empty");
  } else {
    throw std::invalid_argument("config.seeds must be a count or a list");
  }

  cfg.parallelism = j.value("parallel", 1);
  cfg.with_ground_truth = j.value("ground_truth", true);
  cfg.ground_truth_cap = j.value("ground_truth_cap", ground_truth::kDefaultShiftScanCap);
  cfg.record_curve = j.value("record_curve", false);
  cfg.curve_stride = j.value("curve_stride", Round{1});
  files.out_csv = j.value("out_csv", std::string{});
  files.out_json = j.value("out_json", std::string{});
  files.events_jsonl = j.value("events_jsonl", std::string{});
  return cfg;
}

int cmd_generate_env(const std::string& spec_path, const std::string& out_path) {
  const auto spec = env::parse_env_spec(read_file(spec_path));
  const auto model = env::expand(spec);
  std::ostringstream csv;
  env::write_mean_matrix_csv(csv, model);
  write_file(out_path, csv.str());
  std::cout << env::env_spec_to_json(spec) << "\n";
  return 0;
}

int cmd_ground_truth(const std::string& spec_path, const std::string& out_path,
                     Round cap) {
  const auto spec = env::parse_env_spec(read_file(spec_path));
  const auto model = env::expand(spec);
  const auto annotation = ground_truth::annotate(model, cap);
  const std::string text = ground_truth::annotation_to_json(annotation);
  if (out_path.empty()) std::cout << text << "\n";
  else write_file(out_path, text);
  return 0;
}

int cmd_run(const std::string& config_path, const std::string& csv_override,
            const std::string& json_override, int parallel_override,
            bool dry_run) {
  RunFiles files;
  auto cfg = parse_experiment_config(read_file(config_path), files);
  if (!csv_override.empty()) files.out_csv = csv_override;
  if (!json_override.empty()) files.out_json = json_override;
  if (parallel_override > 0) cfg.parallelism = parallel_override;

  if (dry_run) {
    for (Round T : cfg.horizons) {
      for (std::uint64_t seed : cfg.seeds) {
        std::cout << "T=" << T << " seed=" << seed << "\n";
      }
    }
    std::cout << cfg.horizons.size() * cfg.seeds.size() << " trials ("
              << cfg.horizons.size() << " horizons x " << cfg.seeds.size()
              << " seeds)\n";
    return 0;
  }

  const auto result = harness::run_experiment(cfg);
  if (!files.out_csv.empty()) {
    std::ostringstream csv;
    harness::write_trials_csv(csv, result);
    write_file(files.out_csv, csv.str());
  }
  const std::string summary = harness::result_to_json(result, cfg);
  if (!files.out_json.empty()) write_file(files.out_json, summary);
  else std::cout << summary << "\n";

  if (!files.events_jsonl.empty()) {
    // Event log of the first (horizon, seed) cell, re-run in isolation.
    const Round T = cfg.horizons.front();
    auto model = env::expand_for_horizon(cfg.env, T);
    std::optional<ground_truth::PhaseAnnotation> ann;
    if (cfg.with_ground_truth || cfg.policy_name == "oracle" ||
        cfg.policy_name == "safe-singleton") {
      ann = ground_truth::annotate(model, cfg.ground_truth_cap);
    }
    auto policy = harness::make_policy(cfg.policy_name, model.num_arms(), T,
                                       cfg.eviction, cfg.seeds.front(),
                                       ann ? &*ann : nullptr);
    const auto trace = harness::run_trial(model, *policy, cfg.seeds.front(), T);
    std::ostringstream out;
    write_event_log(out, trace.extras.events);
    write_file(files.events_jsonl, out.str());
  }
  return 0;
}

int cmd_report(const std::string& summary_path) {
  const json j = json::parse(read_file(summary_path));
  std::cout << "policy: " << j.at("policy").get<std::string>() << "\n";
  std::printf("%10s %14s %12s %10s %10s %8s %8s %12s\n", "T", "mean_regret",
              "std_error", "restarts", "replays", "L", "V", "bound_ratio");
  for (const auto& h : j.at("per_horizon")) {
    long replays = 0;
    for (const auto& [m, c] : h.at("replay_counts").items()) {
      replays += c.get<long>();
    }
    std::printf("%10lld %14.3f %12.3f %10ld %10ld", h.at("T").get<long long>(),
                h.at("mean_regret").get<double>(), h.at("std_error").get<double>(),
                h.at("total_restarts").get<long>(), replays);
    if (h.contains("num_significant_shifts")) {
      std::printf(" %8ld %8.3f %12.4f", h.at("num_significant_shifts").get<long>(),
                  h.at("total_variation").get<double>(),
                  h.at("bound_ratio").get<double>());
    }
    std::printf("\n");
  }
  if (j.contains("scaling_exponent")) {
    std::cout << "scaling exponent: " << j.at("scaling_exponent").get<double>()
              << "\n";
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"non-stationary bandit experiments: environments, ground truth, "
               "adaptive-restart policies, regret harness"};
  app.require_subcommand(1);

  std::string spec_path, out_path, config_path, summary_path;
  std::string csv_override, json_override;
  int parallel = 0;
  bool dry_run = false;
  Round cap = ground_truth::kDefaultShiftScanCap;

  auto* gen = app.add_subcommand("generate-env",
                                 "expand an env spec to a mean-matrix CSV");
  gen->add_option("--spec", spec_path, "EnvSpec JSON file")->required();
  gen->add_option("--out", out_path, "output CSV path")->required();

  auto* gt = app.add_subcommand("ground-truth",
                                "compute significant shifts, V, S and bounds");
  gt->add_option("--spec", spec_path, "EnvSpec JSON file")->required();
  gt->add_option("--out", out_path, "output JSON path (stdout if omitted)");
  gt->add_option("--cap", cap, "exact-scan horizon cap");

  auto* runcmd = app.add_subcommand("run", "run an experiment config");
  runcmd->add_option("--config", config_path, "experiment config JSON")->required();
  runcmd->add_option("--out", csv_override, "override out_csv");
  runcmd->add_option("--out-json", json_override, "override out_json");
  runcmd->add_option("--parallel", parallel, "worker threads");
  runcmd->add_flag("--dry-run", dry_run, "print the trial grid and exit");

  auto* report = app.add_subcommand("report", "summarize a results JSON");
  report->add_option("summary", summary_path, "summary JSON from run")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (gen->parsed()) return cmd_generate_env(spec_path, out_path);
    if (gt->parsed()) return cmd_ground_truth(spec_path, out_path, cap);
    if (runcmd->parsed()) {
      return cmd_run(config_path, csv_override, json_override, parallel, dry_run);
    }
    if (report->parsed()) return cmd_report(summary_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace shiftband::cli
