#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "etm/errors.hpp"
#include "etm/harness.hpp"
#include "etm/rewrite.hpp"

namespace {

using namespace etm;
namespace fs = std::filesystem;

std::set<Metric> parse_metrics(const std::string& list) {
  std::set<Metric> out;
  std::stringstream ss(list);
  for (std::string item; std::getline(ss, item, ',');) {
    item = lower(item);
    if (item == "etm") {
      out.insert(Metric::kEtm);
    } else if (item == "esm") {
      out.insert(Metric::kEsm);
    } else if (item == "exe") {
      out.insert(Metric::kExe);
    } else {
      throw std::invalid_argument("unknown metric: " + item);
    }
  }
  if (out.empty()) throw std::invalid_argument("no metrics selected");
  return out;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  return nlohmann::json::parse(in);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

struct DataArgs {
  std::string gold, pred, schemas, dbs;
  void add(CLI::App* cmd, bool required) {
    cmd->add_option("--gold", gold, "gold file: SQL<TAB>db_id per line")->required(required);
    cmd->add_option("--pred", pred, "predictions, one SQL per line")->required(required);
    cmd->add_option("--schemas", schemas, "schema directory or combined JSON")->required(required);
    cmd->add_option("--dbs", dbs, "database directory");
  }
  std::optional<fs::path> db_dir() const { return dbs.empty() ? std::nullopt : std::optional<fs::path>(dbs); }
  Dataset load() const { return load_dataset(gold, pred, schemas, db_dir()); }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Text-to-SQL evaluation with enhanced tree matching"};
  app.require_subcommand(1);

  auto* eval = app.add_subcommand("eval", "score predictions against gold queries");
  DataArgs eval_data;
  eval_data.add(eval, true);
  std::string metrics = "etm,esm,exe", rules = "all", out;
  int workers = 1, timeout_secs = 30;
  bool no_value_check = false, no_distinct_check = false;
  eval->add_option("--metrics", metrics, "comma list of etm, esm, exe");
  eval->add_option("--rules", rules, "all, P, P<n>, <n> or a comma list of rule ids");
  eval->add_option("--workers", workers)->check(CLI::PositiveNumber);
  eval->add_option("--timeout-secs", timeout_secs)->check(CLI::PositiveNumber);
  eval->add_flag("--no-value-check", no_value_check, "ESM: ignore literal values");
  eval->add_flag("--no-distinct-check", no_distinct_check, "ESM: ignore DISTINCT in aggregates");
  eval->add_option("--out", out, "report path (JSON)")->required();

  auto* analyze = app.add_subcommand("analyze", "false positive and negative rates for a report");
  DataArgs analyze_data;
  analyze_data.add(analyze, false);
  std::string report_path, labels, analyze_out;
  int oracle_trials = 0;
  analyze->add_option("--report", report_path)->required();
  analyze->add_option("--labels", labels, "equivalent|distinct per line");
  analyze->add_option("--oracle-trials", oracle_trials, "audit matches on generated instances (needs --gold/--pred/--schemas)");
  analyze->add_option("--out", analyze_out, "where to write the extended report (default: overwrite)");

  auto* ablate = app.add_subcommand("ablate", "false negative rate per cumulative rule prefix");
  DataArgs ablate_data;
  ablate_data.add(ablate, true);
  std::string ablate_labels, ablate_out;
  int ablate_workers = 1;
  ablate->add_option("--labels", ablate_labels)->required();
  ablate->add_option("--workers", ablate_workers)->check(CLI::PositiveNumber);
  ablate->add_option("--out", ablate_out)->required();

  auto* explain_cmd = app.add_subcommand("explain", "show the rewrite trace for one pair");
  std::string gold_sql, pred_sql, schema_path, db_path;
  explain_cmd->add_option("--gold", gold_sql)->required();
  explain_cmd->add_option("--pred", pred_sql)->required();
  explain_cmd->add_option("--schema", schema_path)->required();
  explain_cmd->add_option("--db", db_path, "database file or .sql script");

  auto* rules_cmd = app.add_subcommand("rules", "list the rewrite rules");

  auto* rank = app.add_subcommand("rank", "rank several reports by accuracy");
  std::vector<std::string> rank_reports;
  std::string rank_metric = "ETM";
  rank->add_option("--report", rank_reports)->required();
  rank->add_option("--metric", rank_metric);

  CLI11_PARSE(app, argc, argv);

  try {
    if (eval->parsed()) {
      EvalOptions opt;
      opt.metrics = parse_metrics(metrics);
      opt.rules = RuleSelection::parse(rules);
      opt.workers = workers;
      opt.timeout = std::chrono::seconds(timeout_secs);
      opt.esm = {!no_value_check, !no_distinct_check};
      const EvaluationReport r = run_eval(eval_data.gold, eval_data.pred, eval_data.schemas, eval_data.db_dir(), opt, out);
      std::cout << r.to_table();
    } else if (analyze->parsed()) {
      EvaluationReport r = EvaluationReport::from_json(read_json(report_path));
      if (!labels.empty()) {
        r.analysis = analyze_with_labels(r, load_labels(labels, r.examples.size()));
      } else if (oracle_trials > 0) {
        if (analyze_data.gold.empty() || analyze_data.pred.empty() || analyze_data.schemas.empty()) {
          throw std::invalid_argument("oracle mode needs --gold, --pred and --schemas");
        }
        GenConfig cfg;
        cfg.seed = oracle_seed();
        r.analysis = analyze_with_oracle(r, analyze_data.load(), oracle_trials, cfg);
      } else {
        throw std::invalid_argument("give --labels or --oracle-trials");
      }
      const fs::path target = analyze_out.empty() ? fs::path(report_path) : fs::path(analyze_out);
      write_text(target, r.to_json().dump(2) + "\n");
      std::cout << r.to_table();
    } else if (ablate->parsed()) {
      const Dataset data = ablate_data.load();
      EvaluationReport r;
      r.total = static_cast<int>(data.examples.size());
      r.rules = "ablation";
      r.ablation = ablation(data, load_labels(ablate_labels, data.examples.size()), ablate_workers);
      write_text(ablate_out, r.to_json().dump(2) + "\n");
      std::cout << r.to_table();
    } else if (explain_cmd->parsed()) {
      const Schema schema = load_schema_file(schema_path);
      std::optional<Database> db;
      if (!db_path.empty()) {
        const fs::path p(db_path);
        if (p.extension() == ".sql") {
          std::ifstream in(p);
          std::stringstream ss;
          ss << in.rdbuf();
          db = Database::from_script(ss.str());
        } else {
          db = Database::open(p);
        }
      }
      const MetricVerdict v = etm_match(gold_sql, pred_sql, schema, db ? &*db : nullptr);
      std::cout << "verdict: " << to_string(v.outcome);
      if (v.outcome == Outcome::kInvalid) std::cout << " (" << to_string(v.invalid) << ": " << v.detail << ")";
      std::cout << "\n" << v.trace << "\n";
    } else if (rules_cmd->parsed()) {
      for (const RuleInfo& info : rule_catalog()) {
        std::cout << info.id << "\t" << info.canonical << "\t<=\t" << info.other << "\t[" << info.assumption << "]\n";
      }
    } else if (rank->parsed()) {
      std::map<std::string, double> scores;
      const Metric m = *parse_metrics(rank_metric).begin();
      for (const std::string& path : rank_reports) {
        const EvaluationReport r = EvaluationReport::from_json(read_json(path));
        scores[path] = r.accuracy.at(m);
      }
      std::vector<std::pair<int, std::string>> order;
      for (const auto& [path, place] : compute_ranks(scores)) order.emplace_back(place, path);
      std::sort(order.begin(), order.end());
      std::cout << std::fixed << std::setprecision(1);
      for (const auto& [place, path] : order) std::cout << place << "\t" << scores[path] << "\t" << path << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
