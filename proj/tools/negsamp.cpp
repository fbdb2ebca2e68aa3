// negsamp: negative-sampling schemes, their implicit losses, and a synthetic
// long-tail training harness.
//
// Subcommands:
//   verify   run closed-form-vs-oracle check suites, emit a CSV/JSON report
//   train    train one configuration, emit metrics/trace/summary + manifest
//   sweep    run a (sampler x weighting x m x seed) grid in parallel
//   catalog  print the implicit loss of every stock (sampler, weighting) pair

#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "negsamp/catalog.hpp"
#include "negsamp/config.hpp"
#include "negsamp/report.hpp"
#include "negsamp/sweep.hpp"
#include "negsamp/train.hpp"
#include "negsamp/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

void write_verify_report(const std::string& path, const std::string& format,
                         const std::vector<negsamp::verify::CheckRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report: " + path);
  if (format == "json") {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : rows)
      j.push_back({{"check_name", r.check_name},
                   {"instance_id", r.instance_id},
                   {"statistic", r.statistic},
                   {"closed_form", r.closed_form},
                   {"estimate", r.estimate},
                   {"stderr", r.stderr_},
                   {"pass", r.pass}});
    out << j.dump(2) << "\n";
    return;
  }
  out.precision(std::numeric_limits<double>::max_digits10);
  out << "check_name,instance_id,statistic,closed_form,estimate,stderr,pass\n";
  for (const auto& r : rows) {
    std::string statistic = r.statistic;
    for (auto& c : statistic)
      if (c == ',') c = ';';
    out << r.check_name << ',' << r.instance_id << ',' << statistic << ','
        << r.closed_form << ',' << r.estimate << ',' << r.stderr_ << ','
        << (r.pass ? "true" : "false") << "\n";
  }
}

int cmd_verify(const std::string& suite, long trials, std::uint64_t seed,
               const std::string& format, std::string out_path) {
  const auto known = negsamp::verify::known_suites();
  if (std::find(known.begin(), known.end(), suite) == known.end()) {
    std::cerr << "unknown suite: " << suite << " (expected one of:";
    for (const auto& s : known) std::cerr << ' ' << s;
    std::cerr << ")\n";
    return kExitUsage;
  }
  negsamp::verify::Options opt;
  opt.seed = seed;
  opt.trials = trials;
  const auto rows = negsamp::verify::run_suite(suite, opt);

  if (out_path.empty()) out_path = "verify_report." + format;
  write_verify_report(out_path, format, rows);

  long passed = 0;
  for (const auto& r : rows) passed += r.pass ? 1 : 0;
  std::cout << "suite " << suite << ": " << passed << "/" << rows.size()
            << " checks passed; report written to " << out_path << "\n";
  for (const auto& r : rows)
    if (!r.pass)
      std::cout << "  FAIL " << r.check_name << " #" << r.instance_id << " ("
                << r.statistic << "): closed_form=" << r.closed_form
                << " estimate=" << r.estimate << "\n";
  return negsamp::verify::all_pass(rows) ? kExitOk : kExitCheckFailed;
}

std::string bias_name(negsamp::BiasDirection b) {
  switch (b) {
    case negsamp::BiasDirection::Unbiased: return "unbiased";
    case negsamp::BiasDirection::HeadBenefiting: return "head-benefiting";
    case negsamp::BiasDirection::TailBenefiting: return "tail-benefiting";
    case negsamp::BiasDirection::ScaledNegatives: return "scaled-negatives";
  }
  return "?";
}

std::string implicit_formula(const negsamp::CatalogRow& row) {
  if (row.family == negsamp::LossFamily::SoftmaxCE)
    return "log[1 + sum_{y'!=y} " + row.margin_pattern + " * exp(f(y')-f(y))]";
  return "phi(f(y)) + sum_{y'!=y} " + row.margin_pattern + " * varphi(-f(y'))";
}

int cmd_catalog(const std::string& format, const std::string& convention_name) {
  negsamp::QConvention convention;
  if (convention_name == "inclusive")
    convention = negsamp::QConvention::Inclusive;
  else if (convention_name == "exclusive")
    convention = negsamp::QConvention::Exclusive;
  else {
    std::cerr << "unknown convention: " << convention_name
              << " (expected inclusive or exclusive)\n";
    return kExitUsage;
  }
  // Patterns are symbolic; the pi used here only keeps construction valid.
  const auto rows =
      negsamp::full_catalog(negsamp::LabelDistribution::uniform(10), 1, convention);

  if (format == "json") {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& row : rows)
      j.push_back({{"family", row.family == negsamp::LossFamily::SoftmaxCE
                                  ? "softmax_ce"
                                  : "decoupled"},
                   {"sampler", row.sampler_name},
                   {"weighting", row.weighting_name},
                   {"margin", row.margin_pattern},
                   {"implicit_loss", implicit_formula(row)},
                   {"bias", bias_name(row.bias)},
                   {"comment", row.comment}});
    std::cout << j.dump(2) << "\n";
    return kExitOk;
  }
  std::printf("%-11s %-13s %-11s %-20s %-17s %s\n", "family", "sampler", "weighting",
              "margin rho(y,y')", "bias", "implicit loss");
  for (const auto& row : rows)
    std::printf("%-11s %-13s %-11s %-20s %-17s %s\n",
                row.family == negsamp::LossFamily::SoftmaxCE ? "softmax_ce" : "decoupled",
                row.sampler_name.c_str(), row.weighting_name.c_str(),
                row.margin_pattern.c_str(), bias_name(row.bias).c_str(),
                implicit_formula(row).c_str());
  return kExitOk;
}

int cmd_train(const std::string& config_path, std::int64_t seed_override,
              const std::string& out_dir, const std::string& format) {
  negsamp::KVConfig kv = negsamp::KVConfig::parse_file(config_path);
  if (seed_override >= 0) kv.set("seed", seed_override);
  const auto cfg = negsamp::ExperimentConfig::from_kv(kv);

  negsamp::RunManifest manifest;
  manifest.config = cfg.to_kv();
  manifest.seed = cfg.seed;
  manifest.started = std::chrono::system_clock::now();

  negsamp::SweepOutcome outcome;
  outcome.config_id = 0;
  outcome.config = cfg;
  outcome.result = negsamp::run_experiment(cfg);
  outcome.ok = true;
  manifest.finished = std::chrono::system_clock::now();

  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  negsamp::write_metrics_csv(dir / "metrics.csv", {outcome});
  negsamp::write_trace_csv(dir / "trace.csv", outcome.result.trace);
  negsamp::write_summary_json(dir / "summary.json", {outcome});
  manifest.write(dir, {"metrics.csv", "trace.csv", "summary.json"});

  const auto& m = outcome.result.metrics.overall;
  if (format == "json") {
    nlohmann::json j{{"out", out_dir},
                     {"balanced_error", m.balanced_error},
                     {"recall@1", m.recall_at_1},
                     {"recall@5", m.recall_at_5}};
    std::cout << j.dump() << "\n";
  } else {
    std::cout << "trained " << cfg.loss.name() << " [" << cfg.sampler_name() << " + "
              << cfg.weighting << ", m=" << cfg.negatives << "]"
              << "  balanced_error=" << m.balanced_error
              << "  recall@1=" << m.recall_at_1 << "  outputs in " << out_dir << "\n";
  }
  return kExitOk;
}

int cmd_sweep(const std::string& grid_path, const std::string& out_dir, int jobs,
              const std::string& format) {
  const negsamp::KVConfig kv = negsamp::KVConfig::parse_file(grid_path);
  const auto configs = negsamp::expand_grid(kv);

  negsamp::RunManifest manifest;
  manifest.config = kv;
  manifest.seed = static_cast<std::uint64_t>(kv.get_int("seed", 1));
  manifest.started = std::chrono::system_clock::now();

  const auto outcomes = negsamp::run_sweep(configs, jobs);
  manifest.finished = std::chrono::system_clock::now();

  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  negsamp::write_metrics_csv(dir / "metrics.csv", outcomes);
  negsamp::write_summary_json(dir / "summary.json", outcomes);
  manifest.write(dir, {"metrics.csv", "summary.json"});

  int failed = 0;
  for (const auto& o : outcomes)
    if (!o.ok) {
      ++failed;
      std::cerr << "run " << o.config_id << " failed: " << o.error << "\n";
    }
  if (format == "json") {
    nlohmann::json j{{"out", out_dir},
                     {"runs", outcomes.size()},
                     {"failed", failed}};
    std::cout << j.dump() << "\n";
  } else {
    std::cout << "sweep: " << outcomes.size() - failed << "/" << outcomes.size()
              << " runs succeeded; outputs in " << out_dir << "\n";
  }
  return failed == 0 ? kExitOk : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"negative sampling schemes, implicit losses, and a long-tail harness"};
  app.require_subcommand(1);

  // verify
  auto* verify = app.add_subcommand("verify", "run verification suites");
  std::string suite = "all";
  long trials = 100000;
  std::int64_t seed = 1;
  std::string format = "csv";
  std::string out_path;
  verify->add_option("--suite", suite,
                     "lemma1|lemma2|theorem1|prop1|variance_opt|gradients|all");
  verify->add_option("--trials", trials, "Monte-Carlo trials per instance");
  verify->add_option("--seed", seed, "master seed");
  verify->add_option("--format", format)->check(CLI::IsMember({"csv", "json"}));
  verify->add_option("--out", out_path, "report path (default verify_report.<format>)");

  // train
  auto* train = app.add_subcommand("train", "train one configuration");
  std::string config_path;
  std::int64_t train_seed = -1;
  std::string train_out = "run_out";
  std::string train_format = "csv";
  train->add_option("--config", config_path, "key-value config file")->required();
  train->add_option("--seed", train_seed, "override the config seed");
  train->add_option("--out", train_out, "output directory");
  train->add_option("--format", train_format)->check(CLI::IsMember({"csv", "json"}));

  // sweep
  auto* sweep = app.add_subcommand("sweep", "run a sampler x weighting x m grid");
  std::string grid_path;
  std::string sweep_out = "sweep_out";
  int jobs = 0;
  std::string sweep_format = "csv";
  sweep->add_option("--grid", grid_path, "grid config file")->required();
  sweep->add_option("--out", sweep_out, "output directory");
  sweep->add_option("--jobs", jobs, "parallel runs (default: hardware)");
  sweep->add_option("--format", sweep_format)->check(CLI::IsMember({"csv", "json"}));

  // catalog
  auto* catalog = app.add_subcommand("catalog", "print implicit-loss catalog rows");
  std::string catalog_format = "csv";
  std::string convention = "inclusive";
  catalog->add_option("--format", catalog_format)->check(CLI::IsMember({"csv", "json"}));
  catalog->add_option("--convention", convention, "inclusive|exclusive");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (verify->parsed())
      return cmd_verify(suite, trials, static_cast<std::uint64_t>(seed), format, out_path);
    if (train->parsed())
      return cmd_train(config_path, train_seed, train_out, train_format);
    if (sweep->parsed()) return cmd_sweep(grid_path, sweep_out, jobs, sweep_format);
    if (catalog->parsed()) return cmd_catalog(catalog_format, convention);
  } catch (const negsamp::DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCheckFailed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
