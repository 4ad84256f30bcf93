#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <string>

#include "catalog.hpp"
#include "etm/errors.hpp"
#include "etm/matcher.hpp"
#include "etm/parser.hpp"
#include "etm/rewrite.hpp"
#include "test_util.hpp"

namespace etm {
namespace {

using testing::CatalogRow;

const std::string kFixtures = ETM_FIXTURES;

const Schema& strong() {
  static const Schema s = testing::catalog_schema(kFixtures, false);
  return s;
}

const Schema& kennels() {
  static const Schema s = load_schema_file(kFixtures + "/ddl/dog_kennels.sql");
  return s;
}

CanonicalForm canon(const std::string& sql, const Schema& s, const Database* db = nullptr,
                    const RuleSelection& r = RuleSelection::all()) {
  return canonicalize(normalize(parse(sql), s, r), s, db, r);
}

std::string canon_text(const std::string& sql, const Schema& s, const Database* db = nullptr) {
  return serialize(canon(sql, s, db).tree);
}

TEST(RuleCatalog, HasEveryRow) {
  const auto rows = testing::load_catalog(kFixtures);
  ASSERT_EQ(rows.size(), 35u);
  EXPECT_EQ(std::count_if(rows.begin(), rows.end(), [](const CatalogRow& r) { return r.has_violation(); }), 16);
}

TEST(RuleCatalog, FormsMatchWhenAssumptionsHold) {
  const Database db = testing::catalog_db(kFixtures, false);
  for (const CatalogRow& row : testing::load_catalog(kFixtures)) {
    const MetricVerdict v = etm_match(row.canonical, row.other, strong(), &db);
    EXPECT_EQ(v.outcome, Outcome::kMatch)
        << "row " << row.id << ": " << v.detail << "\n  " << canon_text(row.canonical, strong(), &db) << "\n  "
        << canon_text(row.other, strong(), &db);
  }
}

TEST(RuleCatalog, FormsDifferWhenAssumptionsFail) {
  const Schema weak = testing::catalog_schema(kFixtures, true);
  const Database full = testing::catalog_db(kFixtures, false);
  const Database empty = testing::catalog_db(kFixtures, true);
  for (const CatalogRow& row : testing::load_catalog(kFixtures)) {
    if (!row.has_violation()) continue;
    const Schema& s = row.weak_schema ? weak : strong();
    const Database& db = row.empty_db ? empty : full;
    const std::string a = row.mutated ? row.mutated->first : row.canonical;
    const std::string b = row.mutated ? row.mutated->second : row.other;
    const MetricVerdict v = etm_match(a, b, s, &db);
    EXPECT_EQ(v.outcome, Outcome::kMismatch) << "row " << row.id << ": " << v.detail;
  }
}

TEST(RuleCatalog, RuleIsolation) {
  // Each rule row matches with only its own rule switched on, except where
  // another rule is needed to finish the job.
  const Database db = testing::catalog_db(kFixtures, false);
  for (const CatalogRow& row : testing::load_catalog(kFixtures)) {
    if (row.id[0] == 'P') continue;
    const int id = std::stoi(row.id);
    const MetricVerdict v = etm_match(row.canonical, row.other, strong(), &db, RuleSelection::rule_set({id}));
    EXPECT_EQ(v.outcome, Outcome::kMatch) << "row " << row.id;
  }
}

TEST(Rewrite, CountColumnBecomesCountStar) {
  const CanonicalForm f = canon("SELECT count(dog_id) FROM dogs", kennels());
  EXPECT_EQ(serialize(f.tree), "SELECT COUNT(*) FROM dogs");
  ASSERT_EQ(f.trace.size(), 1u);
  EXPECT_EQ(f.trace[0].rule_id, 6);
  const std::string text = explain(f.trace);
  EXPECT_NE(text.find("rule 6"), std::string::npos);
  EXPECT_NE(text.find("dog_id is NOT NULL"), std::string::npos) << text;
}

TEST(Rewrite, DistinctStaysWithoutUniqueness) {
  const CanonicalForm f = canon("SELECT DISTINCT name FROM dogs", kennels());
  EXPECT_EQ(serialize(f.tree), "SELECT DISTINCT dogs.name FROM dogs");
  EXPECT_TRUE(f.trace.empty());
}

TEST(Rewrite, OrderLimitBecomesMaxOnNonEmptyTable) {
  const Database db = Database::from_script(
      testing::read_text(kFixtures + "/ddl/dog_kennels.sql") +
      "INSERT INTO Dogs (dog_id, owner_id, breed_code, size_code, name, weight) VALUES (1, 1, 'B', 'S', 'a', 3);");
  EXPECT_EQ(canon_text("SELECT weight FROM dogs ORDER BY weight DESC LIMIT 1", kennels(), &db),
            "SELECT MAX(dogs.weight) FROM dogs");
  const CanonicalForm without = canon("SELECT weight FROM dogs ORDER BY weight DESC LIMIT 1", kennels());
  ASSERT_FALSE(without.blocked.empty());
  EXPECT_EQ(without.blocked[0].verdict, Verdict::kUnverifiable);
}

TEST(Rewrite, UnionWithItselfCollapses) {
  EXPECT_EQ(canon_text("SELECT c3 FROM t1 UNION SELECT c3 FROM t1", strong()), "SELECT DISTINCT t1.c3 FROM t1");
}

TEST(Rewrite, BetweenBecomesConjunction) {
  EXPECT_EQ(canon_text("SELECT c1 FROM t1 WHERE c2 BETWEEN 1 AND 5", strong()),
            "SELECT t1.c1 FROM t1 WHERE 1 <= t1.c2 AND 5 >= t1.c2");
}

TEST(Rewrite, CanonicalQueryIsFixpoint) {
  const CanonicalForm f = canon("SELECT c1 FROM t1 WHERE c2 > 3", strong());
  EXPECT_TRUE(f.trace.empty());
  EXPECT_EQ(explain(f.trace), "no rewrites applied");
  EXPECT_EQ(f.tree, canon(serialize(f.tree), strong()).tree);
}

TEST(Rewrite, TraceFollowsApplicationOrder) {
  const CanonicalForm f = canon("SELECT COUNT(c2) FROM t1 WHERE NOT c2 = 3", strong());
  ASSERT_EQ(f.trace.size(), 2u);
  EXPECT_EQ(f.trace[0].rule_id, 6);
  EXPECT_EQ(f.trace[1].rule_id, 23);
  const std::string text = explain(f.trace);
  EXPECT_LT(text.find("rule 6"), text.find("rule 23"));
}

TEST(CheckAssumption, TableExamples) {
  EXPECT_EQ(check_assumption(6, {{"t1", "dogs"}, {"c1", "dog_id"}}, kennels(), nullptr), Verdict::kHolds);
  EXPECT_EQ(check_assumption(12, {{"x", "012"}}, kennels(), nullptr), Verdict::kFails);
  EXPECT_EQ(check_assumption(12, {{"x", "12"}}, kennels(), nullptr), Verdict::kHolds);
  EXPECT_EQ(check_assumption(10, {{"t1", "dogs"}}, kennels(), nullptr), Verdict::kUnverifiable);
  EXPECT_EQ(check_assumption(15, {{"a", "2"}, {"b", "3"}}, kennels(), nullptr), Verdict::kHolds);
  EXPECT_EQ(check_assumption(15, {{"a", "2"}, {"b", "4"}}, kennels(), nullptr), Verdict::kFails);
  EXPECT_EQ(check_assumption(16, {{"x", "ab"}, {"n", "2"}}, kennels(), nullptr), Verdict::kHolds);
  EXPECT_EQ(check_assumption(2, {{"t1", "dogs"}, {"c1", "name"}}, kennels(), nullptr), Verdict::kFails);
  EXPECT_EQ(check_assumption(13, {{"t1", "breeds"}, {"c1", "breed_code"}, {"t2", "dogs"}, {"c2", "breed_code"}},
                             kennels(), nullptr),
            Verdict::kHolds);
  EXPECT_EQ(check_assumption(22, {}, kennels(), nullptr), Verdict::kHolds);
  EXPECT_THROW(check_assumption(27, {}, kennels(), nullptr), UnknownRule);
  EXPECT_THROW(check_assumption(0, {}, kennels(), nullptr), UnknownRule);
}

TEST(RewriteProperty, CanonicalizationIsIdempotentOverCorpus) {
  std::ifstream in(kFixtures + "/corpus.sql");
  const Database db = testing::catalog_db(kFixtures, false);
  const Schema toy = load_schema_file(kFixtures + "/ddl/toy.sql");
  int checked = 0;
  for (std::string sql; std::getline(in, sql);) {
    if (sql.empty()) continue;
    CanonicalForm once;
    const Schema* used = nullptr;
    for (const Schema* s : {&toy, &kennels()}) {
      try {
        once = canon(sql, *s);
        used = s;
        break;
      } catch (const ResolutionError&) {
      }
    }
    if (!used) continue;
    const CanonicalForm twice = canon(serialize(once.tree), *used);
    EXPECT_EQ(serialize(twice.tree), serialize(once.tree)) << sql;
    EXPECT_TRUE(twice.trace.empty()) << sql << "\n" << explain(twice.trace);
    ++checked;
  }
  EXPECT_GE(checked, 40);
  for (const CatalogRow& row : testing::load_catalog(kFixtures)) {
    for (const std::string& sql : {row.canonical, row.other}) {
      const CanonicalForm once = canon(sql, strong(), &db);
      EXPECT_EQ(canon(serialize(once.tree), strong(), &db).tree, once.tree) << sql;
    }
  }
}

TEST(RewriteProperty, CanonicalFormsAreFixpointsOfEveryRule) {
  // A canonical tree must not be changed by any single rule on its own.
  const Database db = testing::catalog_db(kFixtures, false);
  for (const CatalogRow& row : testing::load_catalog(kFixtures)) {
    const CanonicalForm full = canon(row.other, strong(), &db);
    for (int id = 1; id <= RuleSelection::kRewriteCount; ++id) {
      const RuleSelection one = RuleSelection::rule_set({id});
      const CanonicalForm again = canonicalize(NormalizedAst{full.tree, {}}, strong(), &db, one);
      EXPECT_TRUE(again.trace.empty()) << "row " << row.id << " rule " << id;
    }
  }
}

TEST(RuleCatalogInfo, ListsAllRules) {
  const auto& cat = rule_catalog();
  ASSERT_EQ(cat.size(), 26u);
  for (std::size_t i = 0; i < cat.size(); ++i) EXPECT_EQ(cat[i].id, static_cast<int>(i + 1));
}

}  // namespace
}  // namespace etm
