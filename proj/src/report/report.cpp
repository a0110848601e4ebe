#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <fmt/format.h>

#include "dualgate/errors.hpp"
#include "dualgate/report.hpp"
#include "dualgate/version.hpp"

namespace dualgate {

void Table::add_row(std::vector<std::string> row) {
  if (row.size() != columns.size()) {
    throw SchemaMismatch(fmt::format("row has {} cells, table has {} columns", row.size(),
                                     columns.size()));
  }
  rows.push_back(std::move(row));
}

std::string Table::to_csv() const {
  auto join = [](const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) line += ',';
      line += cells[i];
    }
    return line + '\n';
  };
  std::string out = join(columns);
  for (const auto& r : rows) out += join(r);
  return out;
}

Table Table::from_csv(const std::string& text) {
  Table t;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (header) {
      t.columns = std::move(cells);
      header = false;
    } else {
      t.add_row(std::move(cells));
    }
  }
  if (header) throw SchemaMismatch("empty CSV");
  return t;
}

std::size_t Table::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return i;
  }
  throw SchemaMismatch(fmt::format("no column '{}'", name));
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";
  return fmt::format("{:.10g}", v);
}

bool ExperimentResult::all_passed() const {
  for (const auto& c : checks) {
    if (!c.passed) return false;
  }
  return true;
}

namespace {

bool same_kind(const Json& a, const Json& b) {
  if (a.is_number() && b.is_number()) return !(a.is_number_integer() && b.is_number_float());
  if (a.is_boolean() || b.is_boolean()) return a.is_boolean() && b.is_boolean();
  if (a.is_string() || b.is_string()) return a.is_string() && b.is_string();
  if (a.is_array() && b.is_array()) {
    if (a.empty()) return true;
    for (const auto& e : b) {
      if (!same_kind(a.front(), e)) return false;
    }
    return true;
  }
  return a.is_object() && b.is_object();
}

}  // namespace

ExperimentConfig resolve_config(const std::string& experiment, const std::string& config_text,
                                std::uint64_t seed, std::filesystem::path output_dir) {
  ExperimentConfig cfg;
  cfg.experiment = experiment;
  cfg.seed = seed;
  cfg.output_dir = std::move(output_dir);
  cfg.parameters = default_parameters(experiment);

  Json doc;
  try {
    doc = Json::parse(config_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(fmt::format("config is not valid JSON: {}", e.what()));
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (key == "experiment") {
      if (!value.is_string() || value.get<std::string>() != experiment) {
        throw ConfigError(fmt::format("config names experiment {}, command line says '{}'",
                                      value.dump(), experiment));
      }
    } else if (key == "parameters") {
      if (!value.is_object()) throw ConfigError("'parameters' must be an object");
      for (const auto& [name, v] : value.items()) {
        if (!cfg.parameters.contains(name)) {
          throw ConfigError(fmt::format("unknown parameter '{}' for {}", name, experiment));
        }
        if (!same_kind(cfg.parameters[name], v)) {
          throw ConfigError(fmt::format("parameter '{}' has the wrong type (expected like {})",
                                        name, cfg.parameters[name].dump()));
        }
        cfg.parameters[name] = v;
      }
    } else {
      throw ConfigError(fmt::format("unknown config key '{}'", key));
    }
  }
  return cfg;
}

Json manifest_json(const ExperimentConfig& config) {
  Json m;
  m["tool"] = "dualgate";
  m["version"] = std::string(kVersion);
  m["experiment"] = config.experiment;
  m["seed"] = config.seed;
  m["config"] = {{"experiment", config.experiment}, {"parameters", config.parameters}};
  m["artifacts"] = {"table.csv", "summary.json", "figure.svg", "manifest.json"};
  return m;
}

Json summary_json(const ExperimentConfig& config, const ExperimentResult& result) {
  Json s;
  s["experiment"] = config.experiment;
  s["seed"] = config.seed;
  s["passed"] = result.all_passed();
  Json checks = Json::array();
  for (const auto& c : result.checks) {
    checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  }
  s["checks"] = checks;
  s["results"] = result.results;
  return s;
}

void write_artifacts(const ExperimentConfig& config, const ExperimentResult& result) {
  std::filesystem::create_directories(config.output_dir);
  auto write = [&](const char* name, const std::string& text) {
    std::ofstream f(config.output_dir / name, std::ios::binary);
    if (!f) throw std::runtime_error(fmt::format("cannot write {}", (config.output_dir / name).string()));
    f << text;
  };
  write("table.csv", result.table.to_csv());
  write("summary.json", summary_json(config, result).dump(2) + "\n");
  write("figure.svg", result.svg);
  write("manifest.json", manifest_json(config).dump(2) + "\n");
}

std::string to_string(CellStatus status) {
  switch (status) {
    case CellStatus::Reproducible: return "reproducible";
    case CellStatus::Conditional: return "conditional";
    case CellStatus::KnownDiscrepancy: return "known-discrepancy";
  }
  return "?";
}

bool CompareReport::passed() const {
  for (const auto& c : cells) {
    if (c.counts && !c.within_tolerance) return false;
  }
  return true;
}

Json CompareReport::to_json() const {
  Json cells_json = Json::array();
  for (const auto& c : cells) {
    cells_json.push_back({{"row", c.row_key},
                          {"column", c.column},
                          {"produced", c.produced},
                          {"reference", c.reference},
                          {"abs_dev", c.abs_dev},
                          {"rel_dev", c.rel_dev},
                          {"status", to_string(c.status)},
                          {"within_tolerance", c.within_tolerance},
                          {"flagged", !c.within_tolerance || !c.counts}});
  }
  return {{"passed", passed()}, {"cells", cells_json}};
}

namespace {

struct Tolerance {
  double abs = 0.0;
  double rel = 0.0;
};

Tolerance read_tolerance(const Json& j, Tolerance fallback) {
  if (j.contains("abs")) fallback.abs = j.at("abs").get<double>();
  if (j.contains("rel")) fallback.rel = j.at("rel").get<double>();
  return fallback;
}

std::optional<double> try_number(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    return std::nullopt;
  }
  if (used != s.size()) return std::nullopt;
  return v;
}

double parse_cell(const std::string& s, const std::string& where) {
  const auto v = try_number(s);
  if (!v) throw SchemaMismatch(fmt::format("{}: '{}' is not a number", where, s));
  return *v;
}

}  // namespace

CompareReport compare_tables(const Table& produced, const Table& reference,
                             const Json& tolerances) {
  std::vector<std::string> keys;
  Tolerance base;
  std::map<std::string, Tolerance> per_column;
  try {
    if (tolerances.contains("keys")) keys = tolerances.at("keys").get<std::vector<std::string>>();
    if (tolerances.contains("default")) base = read_tolerance(tolerances.at("default"), base);
    if (tolerances.contains("columns")) {
      for (const auto& [col, t] : tolerances.at("columns").items()) {
        per_column[col] = read_tolerance(t, base);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("bad tolerance record: {}", e.what()));
  }
  if (keys.empty()) keys.push_back(reference.columns.at(0));

  std::vector<std::size_t> ref_keys, out_keys;
  for (const auto& k : keys) {
    ref_keys.push_back(reference.column_index(k));
    out_keys.push_back(produced.column_index(k));
  }
  for (const auto& col : reference.columns) produced.column_index(col);

  CompareReport report;
  for (const auto& ref_row : reference.rows) {
    std::string key;
    const std::vector<std::string>* match = nullptr;
    for (const auto& row : produced.rows) {
      bool same = true;
      for (std::size_t i = 0; i < keys.size() && same; ++i) {
        const std::string rk = ref_row[ref_keys[i]].substr(0, ref_row[ref_keys[i]].find('|'));
        const std::string& pk = row[out_keys[i]];
        if (rk != pk) {
          const auto a = try_number(rk), b = try_number(pk);
          same = a && b && std::abs(*a - *b) <= 1e-12 * std::abs(*a);
        }
      }
      if (same) {
        match = &row;
        break;
      }
    }
    for (std::size_t i = 0; i < keys.size(); ++i) {
      if (i) key += '/';
      key += ref_row[ref_keys[i]];
    }
    if (!match) throw SchemaMismatch(fmt::format("no produced row for key {}", key));

    for (std::size_t c = 0; c < reference.columns.size(); ++c) {
      const std::string& col = reference.columns[c];
      if (std::find(keys.begin(), keys.end(), col) != keys.end()) continue;
      const std::string& cell = ref_row[c];
      if (cell.empty() || cell == "-") continue;
      CellComparison cmp;
      cmp.row_key = key;
      cmp.column = col;
      const auto bar = cell.find('|');
      const std::string status = bar == std::string::npos ? "reproducible" : cell.substr(bar + 1);
      if (status == "reproducible") {
        cmp.status = CellStatus::Reproducible;
      } else if (status == "conditional") {
        cmp.status = CellStatus::Conditional;
      } else if (status == "known-discrepancy") {
        cmp.status = CellStatus::KnownDiscrepancy;
        cmp.counts = false;
      } else {
        throw SchemaMismatch(fmt::format("unknown cell status '{}'", status));
      }
      cmp.reference = parse_cell(cell.substr(0, bar), col);
      cmp.produced = parse_cell((*match)[produced.column_index(col)], col);
      cmp.abs_dev = std::abs(cmp.produced - cmp.reference);
      cmp.rel_dev = cmp.reference != 0.0 ? cmp.abs_dev / std::abs(cmp.reference)
                                         : (cmp.abs_dev == 0.0 ? 0.0 : INFINITY);
      const auto it = per_column.find(col);
      const Tolerance tol = it != per_column.end() ? it->second : base;
      cmp.within_tolerance = cmp.abs_dev <= tol.abs || cmp.rel_dev <= tol.rel;
      report.cells.push_back(cmp);
    }
  }
  return report;
}

}  // namespace dualgate
