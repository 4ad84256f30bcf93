#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "etm/baseline.hpp"
#include "etm/database.hpp"
#include "etm/dbgen.hpp"
#include "etm/matcher.hpp"
#include "etm/normalize.hpp"
#include "etm/schema.hpp"
#include "json.hpp"

namespace etm {

struct Example {
  int index = 0;
  std::string db_id;
  std::string gold;
  std::string pred;
};

/// Gold lines are `SQL<TAB>db_id`; predictions are one SQL per line, aligned
/// by line number. Database instances, when given, live at
/// `<dir>/<db_id>/<db_id>.sqlite` (or `.db`), or as a `.sql` script that is
/// loaded into memory.
struct Dataset {
  std::vector<Example> examples;
  std::map<std::string, Schema> schemas;  // keyed by lower-case db_id
  std::optional<std::filesystem::path> db_dir;
};

/// Throws IoError, AlignmentError (line counts differ) and SchemaError
/// (a db_id without a schema).
Dataset load_dataset(const std::filesystem::path& gold, const std::filesystem::path& pred,
                     const std::filesystem::path& schemas, const std::optional<std::filesystem::path>& dbs = {});

/// Opens the instance for `db_id` under `dir`; nullopt when none exists.
std::optional<Database> open_instance(const std::filesystem::path& dir, const std::string& db_id);

struct EvalOptions {
  std::set<Metric> metrics = {Metric::kEtm, Metric::kEsm, Metric::kExe};
  RuleSelection rules = RuleSelection::all();
  EsmFlags esm;
  int workers = 1;
  std::chrono::milliseconds timeout = std::chrono::seconds(30);
};

struct ExampleResult {
  int index = 0;
  std::string db_id;
  std::map<Metric, MetricVerdict> verdicts;
};

struct RateRow {
  double fp = 0;  // percent of all examples
  double fn = 0;
  int fp_count = 0;
  int fn_count = 0;
};

struct ErrorAnalysis {
  bool labeled = false;               // rates against reference labels
  std::map<Metric, RateRow> rates;    // labeled mode
  std::map<Metric, int> confirmed_fp; // oracle mode: matches refuted by a counterexample
  std::map<Metric, std::vector<int>> fp_examples;
  std::map<Metric, std::vector<int>> fn_examples;
};

struct AblationPoint {
  std::string label;  // "P0".."P8", then "1".."26"
  double fn = 0;      // percent
  int fn_count = 0;
  std::vector<int> newly_matched;  // example indexes that first match at this point
};

struct EvaluationReport {
  int total = 0;
  std::string rules;  // RuleSelection::describe()
  std::map<Metric, double> accuracy;  // percent, one decimal
  std::vector<ExampleResult> examples;
  std::map<std::string, int> errors;  // "<metric>:<kind>" -> count
  std::map<int, int> rule_hits;       // rule id -> applications over all examples
  std::optional<ErrorAnalysis> analysis;
  std::optional<std::vector<AblationPoint>> ablation;

  nlohmann::json to_json() const;
  static EvaluationReport from_json(const nlohmann::json& doc);
  /// Plain-text summary table.
  std::string to_table() const;
};

inline constexpr int kReportVersion = 1;

double round1(double percent);

/// Evaluates every example with the selected metrics. Output is ordered by
/// example index and does not depend on `workers`.
EvaluationReport evaluate(const Dataset& data, const EvalOptions& options);

/// Loads the dataset, evaluates it and writes the JSON report to `out`
/// (and the table next to it as `<out>.txt`).
EvaluationReport run_eval(const std::filesystem::path& gold, const std::filesystem::path& pred,
                          const std::filesystem::path& schemas, const std::optional<std::filesystem::path>& dbs,
                          const EvalOptions& options, const std::filesystem::path& out);

/// One `equivalent` or `distinct` per line. Throws IoError or
/// AlignmentError.
std::vector<bool> load_labels(const std::filesystem::path& path, std::size_t expected);

/// FP/FN rates against labels (`equivalent[i]` for example i).
ErrorAnalysis analyze_with_labels(const EvaluationReport& report, const std::vector<bool>& equivalent);

/// Oracle mode: every metric match is checked with counterexample_search;
/// a found instance confirms a false positive.
ErrorAnalysis analyze_with_oracle(const EvaluationReport& report, const Dataset& data, int trials,
                                  const GenConfig& cfg);

/// FN rate at P0..P8 and then at rule prefixes 1..26.
std::vector<AblationPoint> ablation(const Dataset& data, const std::vector<bool>& equivalent, int workers = 1);

/// Competition ranking, best score first: equal scores share a rank.
std::map<std::string, int> compute_ranks(const std::map<std::string, double>& scores);

/// Default oracle seed, overridden by the ETM_SEED environment variable.
std::uint64_t oracle_seed();

}  // namespace etm
