#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "dualgate/errors.hpp"
#include "dualgate/report.hpp"
#include "dualgate/version.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitConfig = 2;

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw dualgate::ConfigError(fmt::format("cannot read {}", path));
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

int run(const std::string& experiment, const std::string& config_path, std::uint64_t seed,
        const std::string& out) {
  const std::string text = config_path.empty() ? "{}" : read_file(config_path);
  const dualgate::ExperimentConfig cfg = dualgate::resolve_config(experiment, text, seed, out);
  const dualgate::ExperimentResult result = dualgate::run_experiment(cfg);
  dualgate::write_artifacts(cfg, result);
  for (const auto& c : result.checks) {
    fmt::print("{} {}{}\n", c.passed ? "PASS" : "FAIL", c.name,
               c.detail.empty() ? "" : "  (" + c.detail + ")");
  }
  return result.all_passed() ? kExitOk : kExitCheckFailed;
}

int compare(const std::string& produced, const std::string& reference,
            const std::string& tolerances, const std::string& out) {
  const auto tol = tolerances.empty() ? dualgate::Json::object()
                                      : dualgate::Json::parse(read_file(tolerances));
  const auto report = dualgate::compare_tables(dualgate::Table::from_csv(read_file(produced)),
                                               dualgate::Table::from_csv(read_file(reference)), tol);
  for (const auto& c : report.cells) {
    const char* tag = !c.counts ? "KNOWN" : (c.within_tolerance ? "ok" : "FLAG");
    fmt::print("{:5} {} {}: produced {} reference {} (rel {:.3g}, {})\n", tag, c.row_key, c.column,
               dualgate::format_number(c.produced), dualgate::format_number(c.reference),
               c.rel_dev, dualgate::to_string(c.status));
  }
  if (!out.empty()) {
    std::ofstream f(out, std::ios::binary);
    f << report.to_json().dump(2) << "\n";
  }
  return report.passed() ? kExitOk : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Risk-budget gate experiments"};
  app.set_version_flag("--version", std::string(dualgate::kVersion));
  app.require_subcommand(1);

  std::string config_path, out_dir = "out";
  std::uint64_t seed = 0;
  std::string selected;
  for (const auto& name : dualgate::experiment_names()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "random seed");
    sub->add_option("--out", out_dir, "artifact directory");
    sub->callback([&selected, name] { selected = name; });
  }

  std::string produced, reference, tolerances, report_out;
  auto* cmp = app.add_subcommand("compare", "compare a produced CSV against a reference CSV");
  cmp->add_option("produced", produced)->required()->check(CLI::ExistingFile);
  cmp->add_option("reference", reference)->required()->check(CLI::ExistingFile);
  cmp->add_option("--tolerances", tolerances, "tolerance JSON")->check(CLI::ExistingFile);
  cmp->add_option("--report", report_out, "write the per-cell report as JSON");
  cmp->callback([&selected] { selected = "compare"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (selected == "compare") return compare(produced, reference, tolerances, report_out);
    return run(selected, config_path, seed, out_dir);
  } catch (const dualgate::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
  } catch (const dualgate::SchemaMismatch& e) {
    std::cerr << "schema mismatch: " << e.what() << "\n";
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid parameter: " << e.what() << "\n";
  } catch (const std::domain_error& e) {
    std::cerr << "invalid parameter: " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
  }
  return kExitConfig;
}
