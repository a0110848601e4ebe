#pragma once

// Experiment runner behind the dualgate command line: config resolution,
// per-experiment tables/checks/figures, artifact writing and table comparison.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace dualgate {

using Json = nlohmann::ordered_json;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row);
  std::string to_csv() const;
  /// Header row plus data rows; no quoting (cells never contain commas).
  static Table from_csv(const std::string& text);
  std::size_t column_index(const std::string& name) const;  // throws SchemaMismatch
};

/// Fixed-precision number formatting shared by every table.
std::string format_number(double v);

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ExperimentResult {
  Table table;
  std::vector<Check> checks;
  Json results = Json::object();
  std::string svg;

  bool all_passed() const;
};

const std::vector<std::string>& experiment_names();

/// Full parameter record with defaults; throws ConfigError for an unknown
/// experiment.
Json default_parameters(const std::string& experiment);

struct ExperimentConfig {
  std::string experiment;
  Json parameters;  // resolved: defaults overridden by the file
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;
};

/// Parses {"experiment": ..., "parameters": {...}}. Both keys are optional;
/// any other key, an unknown parameter, a type change relative to the
/// default, or an experiment name that disagrees with `experiment` throws
/// ConfigError.
ExperimentConfig resolve_config(const std::string& experiment, const std::string& config_text,
                                std::uint64_t seed, std::filesystem::path output_dir);

ExperimentResult run_experiment(const ExperimentConfig& config);

/// Writes table.csv, summary.json, figure.svg and manifest.json.
void write_artifacts(const ExperimentConfig& config, const ExperimentResult& result);

Json manifest_json(const ExperimentConfig& config);
Json summary_json(const ExperimentConfig& config, const ExperimentResult& result);

enum class CellStatus { Reproducible, Conditional, KnownDiscrepancy };

std::string to_string(CellStatus status);

struct CellComparison {
  std::string row_key;
  std::string column;
  double produced = 0.0;
  double reference = 0.0;
  double abs_dev = 0.0;
  double rel_dev = 0.0;
  CellStatus status = CellStatus::Reproducible;
  bool within_tolerance = false;
  bool counts = true;  // known discrepancies are reported but not scored
};

struct CompareReport {
  std::vector<CellComparison> cells;
  bool passed() const;
  Json to_json() const;
};

/// Reference cells are "value|status" (status defaults to reproducible;
/// "-" or an empty cell is skipped). Tolerances:
///   {"keys": [col, ...], "default": {"abs": a, "rel": r},
///    "columns": {col: {"abs": a, "rel": r}, ...}}
/// A cell passes when abs_dev <= abs or rel_dev <= rel. Reference rows are
/// matched to produced rows by the key columns. Throws SchemaMismatch for a
/// missing column or row.
CompareReport compare_tables(const Table& produced, const Table& reference,
                             const Json& tolerances);

}  // namespace dualgate
