#include "etm/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "etm/errors.hpp"

namespace etm {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  while (!lines.empty() && lines.back().find_first_not_of(" \t") == std::string::npos) lines.pop_back();
  return lines;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

// Runs fn(i) for i in [0, n) on up to `workers` threads. Each worker owns
// its state, created by make_state.
template <typename State, typename MakeState, typename Fn>
void parallel_for(std::size_t n, int workers, MakeState make_state, Fn fn) {
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    State state = make_state();
    for (std::size_t i = next++; i < n; i = next++) fn(state, i);
  };
  const int count = std::max(1, std::min<int>(workers, static_cast<int>(n)));
  if (count == 1) {
    work();
    return;
  }
  std::vector<std::thread> threads;
  for (int i = 0; i < count; ++i) threads.emplace_back(work);
  for (auto& t : threads) t.join();
}

// Instances opened lazily, one set per worker.
class InstanceCache {
 public:
  explicit InstanceCache(const std::optional<fs::path>& dir) : dir_(dir) {}
  const Database* get(const std::string& db_id) {
    if (!dir_) return nullptr;
    auto it = cache_.find(lower(db_id));
    if (it == cache_.end()) it = cache_.emplace(lower(db_id), open_instance(*dir_, db_id)).first;
    return it->second ? &*it->second : nullptr;
  }

 private:
  std::optional<fs::path> dir_;
  std::map<std::string, std::optional<Database>> cache_;
};

Metric metric_from(const std::string& s) {
  if (s == "ETM") return Metric::kEtm;
  if (s == "ESM") return Metric::kEsm;
  if (s == "EXE") return Metric::kExe;
  throw std::invalid_argument("unknown metric " + s);
}

Outcome outcome_from(const std::string& s) {
  if (s == "match") return Outcome::kMatch;
  if (s == "mismatch") return Outcome::kMismatch;
  return Outcome::kInvalid;
}

InvalidKind invalid_from(const std::string& s) {
  for (InvalidKind k : {InvalidKind::kNone, InvalidKind::kParse, InvalidKind::kResolve, InvalidKind::kExecute,
                        InvalidKind::kDiverge}) {
    if (to_string(k) == s) return k;
  }
  return InvalidKind::kNone;
}

std::string error_key(const MetricVerdict& v) {
  return lower(to_string(v.metric)) + ":" + (v.gold_defect ? "gold-" : "") + to_string(v.invalid);
}

}  // namespace

double round1(double percent) { return std::round(percent * 10.0) / 10.0; }

Dataset load_dataset(const fs::path& gold, const fs::path& pred, const fs::path& schemas,
                     const std::optional<fs::path>& dbs) {
  const auto gold_lines = read_lines(gold);
  const auto pred_lines = read_lines(pred);
  if (gold_lines.size() != pred_lines.size()) {
    throw AlignmentError(std::to_string(gold_lines.size()) + " gold lines but " + std::to_string(pred_lines.size()) +
                         " predictions");
  }
  Dataset data;
  data.schemas = load_schema_collection(schemas);
  data.db_dir = dbs;
  for (std::size_t i = 0; i < gold_lines.size(); ++i) {
    const std::string& line = gold_lines[i];
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) throw IoError("gold line " + std::to_string(i + 1) + " has no db_id");
    Example ex{static_cast<int>(i), line.substr(tab + 1), line.substr(0, tab), pred_lines[i]};
    if (!data.schemas.count(lower(ex.db_id))) throw SchemaError("no schema for database " + ex.db_id);
    data.examples.push_back(std::move(ex));
  }
  return data;
}

std::optional<Database> open_instance(const fs::path& dir, const std::string& db_id) {
  for (const fs::path& p : {dir / db_id / (db_id + ".sqlite"), dir / db_id / (db_id + ".db"), dir / (db_id + ".sqlite"),
                            dir / (db_id + ".db")}) {
    if (fs::exists(p)) return Database::open(p);
  }
  for (const fs::path& p : {dir / db_id / (db_id + ".sql"), dir / (db_id + ".sql")}) {
    if (!fs::exists(p)) continue;
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return Database::from_script(ss.str());
  }
  return std::nullopt;
}

EvaluationReport evaluate(const Dataset& data, const EvalOptions& options) {
  EvaluationReport report;
  report.total = static_cast<int>(data.examples.size());
  report.rules = options.rules.describe();
  report.examples.resize(data.examples.size());
  parallel_for<InstanceCache>(
      data.examples.size(), options.workers, [&] { return InstanceCache(data.db_dir); },
      [&](InstanceCache& cache, std::size_t i) {
        const Example& ex = data.examples[i];
        ExampleResult& r = report.examples[i];
        r.index = ex.index;
        r.db_id = ex.db_id;
        const Schema& schema = data.schemas.at(lower(ex.db_id));
        const Database* db = cache.get(ex.db_id);
        for (Metric m : options.metrics) {
          MetricVerdict v;
          if (m == Metric::kEtm) {
            v = etm_match(ex.gold, ex.pred, schema, db, options.rules);
          } else if (m == Metric::kEsm) {
            v = esm_match(ex.gold, ex.pred, schema, options.esm);
          } else if (db) {
            v = exe_match(ex.gold, ex.pred, *db, options.timeout);
          } else {
            v.metric = Metric::kExe;
            v.outcome = Outcome::kInvalid;
            v.invalid = InvalidKind::kExecute;
            v.gold_defect = true;
            v.detail = "no database instance for " + ex.db_id;
          }
          r.verdicts[m] = std::move(v);
        }
      });
  for (Metric m : options.metrics) {
    int matches = 0;
    for (const ExampleResult& r : report.examples) {
      const MetricVerdict& v = r.verdicts.at(m);
      if (v.matched()) ++matches;
      if (v.outcome == Outcome::kInvalid) ++report.errors[error_key(v)];
      for (int id : v.rules_applied) ++report.rule_hits[id];
    }
    report.accuracy[m] = report.total ? round1(100.0 * matches / report.total) : 0.0;
  }
  return report;
}

json EvaluationReport::to_json() const {
  json doc;
  doc["report_version"] = kReportVersion;
  doc["total"] = total;
  doc["rules"] = rules;
  doc["accuracy"] = json::object();
  for (const auto& [m, acc] : accuracy) doc["accuracy"][etm::to_string(m)] = acc;
  doc["errors"] = errors;
  doc["rule_hits"] = json::object();
  for (const auto& [id, n] : rule_hits) doc["rule_hits"][std::to_string(id)] = n;
  json list = json::array();
  for (const ExampleResult& r : examples) {
    json e{{"index", r.index}, {"db_id", r.db_id}, {"verdicts", json::object()}};
    for (const auto& [m, v] : r.verdicts) {
      json jv{{"outcome", etm::to_string(v.outcome)}, {"invalid", etm::to_string(v.invalid)},
              {"gold_defect", v.gold_defect}, {"detail", v.detail}};
      if (m == Metric::kEtm) jv["rules"] = v.rules_applied;
      e["verdicts"][etm::to_string(m)] = std::move(jv);
    }
    list.push_back(std::move(e));
  }
  doc["examples"] = std::move(list);
  if (analysis) {
    json a{{"labeled", analysis->labeled}, {"metrics", json::object()}};
    for (const auto& [m, rate] : analysis->rates) {
      a["metrics"][etm::to_string(m)] = {
          {"fp", rate.fp}, {"fn", rate.fn}, {"fp_count", rate.fp_count}, {"fn_count", rate.fn_count}};
    }
    for (const auto& [m, n] : analysis->confirmed_fp) a["metrics"][etm::to_string(m)]["confirmed_fp"] = n;
    for (const auto& [m, ids] : analysis->fp_examples) a["metrics"][etm::to_string(m)]["fp_examples"] = ids;
    for (const auto& [m, ids] : analysis->fn_examples) a["metrics"][etm::to_string(m)]["fn_examples"] = ids;
    doc["analysis"] = std::move(a);
  }
  if (ablation) {
    json points = json::array();
    for (const AblationPoint& p : *ablation) {
      points.push_back({{"label", p.label}, {"fn", p.fn}, {"fn_count", p.fn_count}, {"newly_matched", p.newly_matched}});
    }
    doc["ablation"] = std::move(points);
  }
  return doc;
}

EvaluationReport EvaluationReport::from_json(const json& doc) {
  if (doc.value("report_version", 0) != kReportVersion) throw IoError("unsupported report version");
  EvaluationReport r;
  r.total = doc.at("total");
  r.rules = doc.value("rules", "");
  for (const auto& [k, v] : doc.at("accuracy").items()) r.accuracy[metric_from(k)] = v;
  r.errors = doc.value("errors", std::map<std::string, int>{});
  const json hits = doc.value("rule_hits", json::object());
  for (const auto& [k, v] : hits.items()) r.rule_hits[std::stoi(k)] = v;
  for (const json& e : doc.at("examples")) {
    ExampleResult ex;
    ex.index = e.at("index");
    ex.db_id = e.at("db_id");
    for (const auto& [k, jv] : e.at("verdicts").items()) {
      MetricVerdict v;
      v.metric = metric_from(k);
      v.outcome = outcome_from(jv.at("outcome"));
      v.invalid = invalid_from(jv.at("invalid"));
      v.gold_defect = jv.value("gold_defect", false);
      v.detail = jv.value("detail", "");
      v.rules_applied = jv.value("rules", std::vector<int>{});
      ex.verdicts[v.metric] = std::move(v);
    }
    r.examples.push_back(std::move(ex));
  }
  return r;
}

std::string EvaluationReport::to_table() const {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(1);
  out << "examples: " << total << "\nrules: " << rules << "\n";
  if (!accuracy.empty()) {
    out << "\nmetric  accuracy";
    if (analysis && analysis->labeled) out << "     FP     FN";
    if (analysis && !analysis->labeled) out << "  confirmed FP";
    out << "\n";
  }
  for (const auto& [m, acc] : accuracy) {
    out << etm::to_string(m) << "     " << acc;
    if (analysis && analysis->labeled && analysis->rates.count(m)) {
      out << "  " << analysis->rates.at(m).fp << "  " << analysis->rates.at(m).fn;
    }
    if (analysis && !analysis->labeled && analysis->confirmed_fp.count(m)) {
      out << "  " << analysis->confirmed_fp.at(m);
    }
    out << "\n";
  }
  if (!errors.empty()) {
    out << "\ninvalid verdicts:\n";
    for (const auto& [k, n] : errors) out << "  " << k << ": " << n << "\n";
  }
  if (ablation) {
    out << "\nablation (FN %):\n";
    for (const AblationPoint& p : *ablation) out << "  " << p.label << ": " << p.fn << "\n";
  }
  return out.str();
}

EvaluationReport run_eval(const fs::path& gold, const fs::path& pred, const fs::path& schemas,
                          const std::optional<fs::path>& dbs, const EvalOptions& options, const fs::path& out) {
  const Dataset data = load_dataset(gold, pred, schemas, dbs);
  EvaluationReport report = evaluate(data, options);
  write_file(out, report.to_json().dump(2) + "\n");
  write_file(out.string() + ".txt", report.to_table());
  return report;
}

std::vector<bool> load_labels(const fs::path& path, std::size_t expected) {
  const auto lines = read_lines(path);
  if (lines.size() != expected) {
    throw AlignmentError(std::to_string(lines.size()) + " labels for " + std::to_string(expected) + " examples");
  }
  std::vector<bool> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string l = lower(lines[i]);
    if (l == "equivalent") {
      out.push_back(true);
    } else if (l == "distinct") {
      out.push_back(false);
    } else {
      throw IoError("label line " + std::to_string(i + 1) + " is neither equivalent nor distinct");
    }
  }
  return out;
}

ErrorAnalysis analyze_with_labels(const EvaluationReport& report, const std::vector<bool>& equivalent) {
  if (equivalent.size() != report.examples.size()) throw AlignmentError("label count differs from example count");
  ErrorAnalysis a;
  a.labeled = true;
  for (const auto& [m, acc] : report.accuracy) {
    RateRow row;
    auto& fps = a.fp_examples[m];
    auto& fns = a.fn_examples[m];
    for (std::size_t i = 0; i < report.examples.size(); ++i) {
      const bool match = report.examples[i].verdicts.at(m).matched();
      if (match && !equivalent[i]) fps.push_back(report.examples[i].index);
      if (!match && equivalent[i]) fns.push_back(report.examples[i].index);
    }
    row.fp_count = static_cast<int>(fps.size());
    row.fn_count = static_cast<int>(fns.size());
    const double n = report.total ? report.total : 1;
    row.fp = round1(100.0 * row.fp_count / n);
    row.fn = round1(100.0 * row.fn_count / n);
    a.rates[m] = row;
  }
  return a;
}

ErrorAnalysis analyze_with_oracle(const EvaluationReport& report, const Dataset& data, int trials,
                                  const GenConfig& cfg) {
  ErrorAnalysis a;
  std::map<int, bool> refuted;  // example index -> counterexample found
  for (const auto& [m, acc] : report.accuracy) {
    a.confirmed_fp[m] = 0;
    auto& fps = a.fp_examples[m];
    for (const ExampleResult& r : report.examples) {
      if (!r.verdicts.at(m).matched()) continue;
      auto it = refuted.find(r.index);
      if (it == refuted.end()) {
        const Example& ex = data.examples.at(static_cast<std::size_t>(r.index));
        bool found = false;
        try {
          found = counterexample_search(ex.gold, ex.pred, data.schemas.at(lower(ex.db_id)), trials, cfg).has_value();
        } catch (const Error&) {
          // Unparsable or ungeneratable pairs cannot be audited.
        }
        it = refuted.emplace(r.index, found).first;
      }
      if (it->second) {
        ++a.confirmed_fp[m];
        fps.push_back(r.index);
      }
    }
  }
  return a;
}

std::vector<AblationPoint> ablation(const Dataset& data, const std::vector<bool>& equivalent, int workers) {
  if (equivalent.size() != data.examples.size()) throw AlignmentError("label count differs from example count");
  std::vector<std::pair<std::string, RuleSelection>> points;
  for (int p = 0; p < RuleSelection::kPreprocessingCount; ++p) {
    points.emplace_back("P" + std::to_string(p), RuleSelection::preprocessing_prefix(p));
  }
  for (int n = 1; n <= RuleSelection::kRewriteCount; ++n) points.emplace_back(std::to_string(n), RuleSelection::rule_prefix(n));
  std::vector<AblationPoint> out;
  std::vector<bool> previous(data.examples.size(), false);
  for (const auto& [label, rules] : points) {
    EvalOptions opt;
    opt.metrics = {Metric::kEtm};
    opt.rules = rules;
    opt.workers = workers;
    const EvaluationReport r = evaluate(data, opt);
    AblationPoint p;
    p.label = label;
    for (std::size_t i = 0; i < r.examples.size(); ++i) {
      const bool match = r.examples[i].verdicts.at(Metric::kEtm).matched();
      if (!match && equivalent[i]) ++p.fn_count;
      if (match && !previous[i]) p.newly_matched.push_back(r.examples[i].index);
      previous[i] = match;
    }
    p.fn = r.total ? round1(100.0 * p.fn_count / r.total) : 0.0;
    out.push_back(std::move(p));
  }
  return out;
}

std::map<std::string, int> compute_ranks(const std::map<std::string, double>& scores) {
  std::map<std::string, int> out;
  for (const auto& [name, s] : scores) {
    out[name] = 1 + static_cast<int>(std::count_if(scores.begin(), scores.end(),
                                                   [&](const auto& other) { return other.second > s; }));
  }
  return out;
}

std::uint64_t oracle_seed() {
  if (const char* env = std::getenv("ETM_SEED"); env && *env) return std::stoull(env);
  return 20240521;
}

}  // namespace etm
