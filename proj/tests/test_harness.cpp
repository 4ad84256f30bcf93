#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "etm/errors.hpp"
#include "etm/harness.hpp"

namespace etm {
namespace {

namespace fs = std::filesystem;

const fs::path kEval = fs::path(ETM_FIXTURES) / "eval";

Dataset labeled() {
  return load_dataset(kEval / "labeled_gold.sql", kEval / "labeled_pred.sql", kEval / "schemas", kEval / "dbs");
}

Dataset small() {
  return load_dataset(kEval / "small_gold.sql", kEval / "small_pred.sql", kEval / "schemas", kEval / "dbs");
}

// Fresh directory per test so parallel ctest runs do not collide.
fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("etm_harness_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

TEST(Dataset, LoadsAlignedPairs) {
  const Dataset d = small();
  ASSERT_EQ(d.examples.size(), 20u);
  EXPECT_EQ(d.examples[0].db_id, "dog_kennels");
  EXPECT_EQ(d.examples[7].index, 7);
  EXPECT_TRUE(open_instance(*d.db_dir, "dog_kennels").has_value());
  EXPECT_FALSE(open_instance(*d.db_dir, "nowhere").has_value());
}

TEST(Dataset, MisalignedFilesAreRejected) {
  const fs::path dir = scratch("align");
  write(dir / "gold.sql", "SELECT name FROM dogs\tdog_kennels\nSELECT age FROM dogs\tdog_kennels\n");
  write(dir / "pred.sql", "SELECT name FROM dogs\n");
  EXPECT_THROW(load_dataset(dir / "gold.sql", dir / "pred.sql", kEval / "schemas"), AlignmentError);
  write(dir / "gold.sql", "SELECT name FROM dogs\tzoo\n");
  EXPECT_THROW(load_dataset(dir / "gold.sql", dir / "pred.sql", kEval / "schemas"), SchemaError);
  EXPECT_THROW(load_labels(kEval / "small_labels.txt", 19), AlignmentError);
}

TEST(Evaluate, SmallSetAccuracy) {
  const EvaluationReport r = evaluate(small(), {});
  EXPECT_EQ(r.total, 20);
  EXPECT_DOUBLE_EQ(r.accuracy.at(Metric::kEtm), 60.0);
  const ErrorAnalysis a = analyze_with_labels(r, load_labels(kEval / "small_labels.txt", 20));
  EXPECT_DOUBLE_EQ(a.rates.at(Metric::kExe).fp, 10.0);
  EXPECT_EQ(a.rates.at(Metric::kExe).fp_count, 2);
  EXPECT_EQ(a.rates.at(Metric::kEtm).fp_count, 0);
}

TEST(Evaluate, LabeledSetRates) {
  const EvaluationReport r = evaluate(labeled(), {});
  const ErrorAnalysis a = analyze_with_labels(r, load_labels(kEval / "labeled_labels.txt", 60));
  EXPECT_DOUBLE_EQ(a.rates.at(Metric::kExe).fp, 10.0);
  EXPECT_DOUBLE_EQ(a.rates.at(Metric::kEsm).fn, 13.3);
  EXPECT_DOUBLE_EQ(a.rates.at(Metric::kEtm).fp, 0.0);
  EXPECT_DOUBLE_EQ(a.rates.at(Metric::kEtm).fn, 1.7);
  // The one remaining miss needs an equivalence outside the catalog.
  ASSERT_EQ(a.fn_examples.at(Metric::kEtm).size(), 1u);
  EXPECT_EQ(a.fn_examples.at(Metric::kEtm)[0], 14);
}

TEST(Evaluate, WorkerCountDoesNotChangeTheReport) {
  const Dataset d = labeled();
  EvalOptions one;
  EvalOptions eight;
  eight.workers = 8;
  EXPECT_EQ(evaluate(d, one).to_json().dump(), evaluate(d, eight).to_json().dump());
}

TEST(Evaluate, AgreesWithDirectCalls) {
  const Dataset d = small();
  const EvaluationReport r = evaluate(d, {});
  const Schema& schema = d.schemas.at("dog_kennels");
  auto db = open_instance(*d.db_dir, "dog_kennels");
  ASSERT_TRUE(db.has_value());
  for (const Example& ex : d.examples) {
    const auto& v = r.examples[static_cast<std::size_t>(ex.index)].verdicts;
    EXPECT_EQ(v.at(Metric::kEtm).outcome, etm_match(ex.gold, ex.pred, schema, &*db).outcome) << ex.index;
    EXPECT_EQ(v.at(Metric::kExe).outcome, exe_match(ex.gold, ex.pred, *db).outcome) << ex.index;
    EXPECT_EQ(v.at(Metric::kEsm).outcome, esm_match(ex.gold, ex.pred, schema).outcome) << ex.index;
  }
}

TEST(Report, JsonRoundTrip) {
  EvaluationReport r = evaluate(small(), {});
  r.analysis = analyze_with_labels(r, load_labels(kEval / "small_labels.txt", 20));
  const nlohmann::json doc = r.to_json();
  EXPECT_EQ(doc.at("report_version"), kReportVersion);
  const EvaluationReport back = EvaluationReport::from_json(doc);
  EXPECT_EQ(back.total, r.total);
  EXPECT_EQ(back.accuracy, r.accuracy);
  EXPECT_EQ(back.errors, r.errors);
  EXPECT_EQ(back.rule_hits, r.rule_hits);
  ASSERT_EQ(back.examples.size(), r.examples.size());
  for (std::size_t i = 0; i < r.examples.size(); ++i) {
    for (const auto& [m, v] : r.examples[i].verdicts) {
      EXPECT_EQ(back.examples[i].verdicts.at(m).outcome, v.outcome);
      EXPECT_EQ(back.examples[i].verdicts.at(m).invalid, v.invalid);
    }
  }
  nlohmann::json bad = doc;
  bad["report_version"] = 99;
  EXPECT_THROW(EvaluationReport::from_json(bad), IoError);
}

TEST(Report, RunEvalWritesJsonAndTable) {
  const fs::path dir = scratch("run");
  run_eval(kEval / "small_gold.sql", kEval / "small_pred.sql", kEval / "schemas", kEval / "dbs", {}, dir / "r.json");
  EXPECT_TRUE(fs::exists(dir / "r.json"));
  std::ifstream table(dir / "r.json.txt");
  const std::string text((std::istreambuf_iterator<char>(table)), std::istreambuf_iterator<char>());
  EXPECT_NE(text.find("ETM     60.0"), std::string::npos) << text;
}

TEST(Ranks, CompetitionRanking) {
  const auto ranks = compute_ranks({{"a", 60.0}, {"b", 72.5}, {"c", 60.0}, {"d", 10.0}});
  EXPECT_EQ(ranks.at("b"), 1);
  EXPECT_EQ(ranks.at("a"), 2);
  EXPECT_EQ(ranks.at("c"), 2);
  EXPECT_EQ(ranks.at("d"), 4);
  EXPECT_TRUE(compute_ranks({}).empty());
}

TEST(Ablation, PrefixesOnlyAddMatches) {
  const auto points = ablation(labeled(), load_labels(kEval / "labeled_labels.txt", 60), 4);
  ASSERT_EQ(points.size(), 9u + 26u);
  EXPECT_EQ(points.front().label, "P0");
  EXPECT_EQ(points.back().label, "26");
  for (std::size_t i = 1; i < points.size(); ++i) {
    EXPECT_LE(points[i].fn_count, points[i - 1].fn_count) << points[i].label;
  }
  EXPECT_DOUBLE_EQ(points.back().fn, 1.7);
  // The count(col) pair is rescued by rule 6 and by nothing earlier.
  for (const AblationPoint& p : points) {
    const bool has_first = std::find(p.newly_matched.begin(), p.newly_matched.end(), 0) != p.newly_matched.end();
    EXPECT_EQ(has_first, p.label == "6") << p.label;
  }
}

TEST(Oracle, ConfirmsEmptyCaseFalsePositive) {
  const fs::path dir = scratch("oracle");
  write(dir / "gold.sql",
        "SELECT name FROM dogs\tdog_kennels\n"
        "SELECT count(dog_id) FROM dogs\tdog_kennels\n");
  write(dir / "pred.sql",
        "SELECT name FROM dogs WHERE age < 10\n"
        "SELECT count(*) FROM dogs\n");
  const Dataset d = load_dataset(dir / "gold.sql", dir / "pred.sql", kEval / "schemas", kEval / "dbs");
  const EvaluationReport r = evaluate(d, {});
  GenConfig cfg;
  cfg.seed = oracle_seed();
  const ErrorAnalysis a = analyze_with_oracle(r, d, 20, cfg);
  EXPECT_FALSE(a.labeled);
  EXPECT_EQ(a.confirmed_fp.at(Metric::kExe), 1);
  EXPECT_EQ(a.confirmed_fp.at(Metric::kEtm), 0);
  EXPECT_EQ(a.fp_examples.at(Metric::kExe), std::vector<int>{0});
}

}  // namespace
}  // namespace etm
