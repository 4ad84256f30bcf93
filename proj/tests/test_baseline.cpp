#include <gtest/gtest.h>

#include <chrono>
#include <string>

#include "catalog.hpp"
#include "etm/baseline.hpp"
#include "etm/errors.hpp"

namespace etm {
namespace {

const std::string kFixtures = ETM_FIXTURES;

std::string kennel_script() {
  return testing::read_text(kFixtures + "/ddl/dog_kennels.sql") +
         testing::read_text(kFixtures + "/rows/dog_kennels.sql");
}

const Schema& kennels() {
  static const Schema s = load_schema_file(kFixtures + "/ddl/dog_kennels.sql");
  return s;
}

TEST(Execute, CountsRows) {
  const Database db = Database::from_script(kennel_script());
  const ResultTable t = execute("SELECT COUNT(*) FROM dogs WHERE dog_id <= 3", db);
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(std::get<std::int64_t>(t.rows[0][0]), 3);
  EXPECT_FALSE(t.ordered);
  EXPECT_TRUE(execute("SELECT name FROM dogs ORDER BY age", db).ordered);
  EXPECT_FALSE(execute("SELECT name FROM (SELECT name FROM dogs ORDER BY age)", db).ordered);
}

TEST(Execute, ErrorKinds) {
  const Database db = Database::from_script(kennel_script());
  try {
    execute("SELEC name FROM dogs", db);
    FAIL();
  } catch (const ExecError& e) {
    EXPECT_EQ(e.kind(), ExecErrorKind::kSyntax);
  }
  EXPECT_THROW(execute("DELETE FROM dogs", db), ExecError);
}

TEST(Execute, TimeoutFires) {
  const Database db = Database::from_script(
      "CREATE TABLE a (x INTEGER); CREATE TABLE b (y INTEGER);"
      "WITH RECURSIVE n(i) AS (SELECT 1 UNION ALL SELECT i + 1 FROM n WHERE i < 10000) INSERT INTO a SELECT i FROM n;"
      "INSERT INTO b SELECT x FROM a;");
  const auto start = std::chrono::steady_clock::now();
  try {
    execute("SELECT COUNT(*) FROM a, b WHERE a.x * b.y % 7 = 3", db, std::chrono::seconds(1));
    FAIL() << "expected timeout";
  } catch (const ExecError& e) {
    EXPECT_EQ(e.kind(), ExecErrorKind::kTimeout);
  }
  EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(5));
}

TEST(TopLevelOrderBy, IgnoresNestedAndQuoted) {
  EXPECT_TRUE(has_top_level_order_by("select a from t order  by a"));
  EXPECT_FALSE(has_top_level_order_by("select a from (select a from t order by a)"));
  EXPECT_FALSE(has_top_level_order_by("select 'order by' from t"));
  EXPECT_FALSE(has_top_level_order_by("select \"order\" by from t"));
}

TEST(ExeMatch, EmptyCaseFalsePositive) {
  const Database young = Database::from_script(kennel_script());
  EXPECT_TRUE(exe_match("SELECT name FROM dogs", "SELECT name FROM dogs WHERE age < 10", young).matched());
  const Database old = Database::from_script(
      kennel_script() +
      "INSERT INTO Dogs (dog_id, owner_id, breed_code, size_code, name, age) VALUES (9, 1, 'HUS', 'SML', 'Old', 12);");
  EXPECT_FALSE(exe_match("SELECT name FROM dogs", "SELECT name FROM dogs WHERE age < 10", old).matched());
}

TEST(ExeMatch, ReflexiveAndOrderSensitive) {
  const Database db = Database::from_script(kennel_script());
  for (const char* q : {"SELECT name FROM dogs", "SELECT name, age FROM dogs ORDER BY age DESC",
                        "SELECT COUNT(*), size_code FROM dogs GROUP BY size_code"}) {
    EXPECT_TRUE(exe_match(q, q, db).matched()) << q;
  }
  EXPECT_FALSE(exe_match("SELECT name FROM dogs ORDER BY age", "SELECT name FROM dogs ORDER BY age DESC", db).matched());
  // Unordered gold: order is irrelevant, duplicates are not.
  EXPECT_TRUE(exe_match("SELECT name FROM dogs", "SELECT name FROM dogs ORDER BY name", db).matched());
  EXPECT_FALSE(exe_match("SELECT size_code FROM dogs", "SELECT DISTINCT size_code FROM dogs", db).matched());
}

TEST(ExeMatch, TiesCompareAsMultisets) {
  const Database db = Database::from_script(kennel_script());
  // Two LGE dogs tie on size_code.
  EXPECT_TRUE(exe_match("SELECT name FROM dogs ORDER BY size_code", "SELECT name FROM dogs ORDER BY size_code, name DESC",
                        db)
                  .matched());
  EXPECT_TRUE(exe_match("SELECT name, size_code FROM dogs ORDER BY size_code",
                        "SELECT name, size_code FROM dogs ORDER BY size_code, dog_id DESC", db)
                  .matched());
  EXPECT_FALSE(exe_match("SELECT name FROM dogs ORDER BY size_code", "SELECT name FROM dogs ORDER BY size_code DESC", db)
                   .matched());
}

TEST(ExeMatch, ColumnOrderAndFloats) {
  const Database db = Database::from_script(kennel_script());
  EXPECT_TRUE(exe_match("SELECT name, age FROM dogs", "SELECT age, name FROM dogs", db).matched());
  EXPECT_TRUE(exe_match("SELECT AVG(weight) FROM dogs", "SELECT CAST(SUM(weight) AS REAL) / COUNT(*) FROM dogs", db)
                  .matched());
  EXPECT_TRUE(cells_equal(Cell{1.0}, Cell{std::int64_t{1}}));
  EXPECT_TRUE(cells_equal(Cell{1.0000000001}, Cell{1.0}));
  EXPECT_FALSE(cells_equal(Cell{1.001}, Cell{1.0}));
  EXPECT_FALSE(cells_equal(Cell{std::string("1")}, Cell{std::int64_t{1}}));
  EXPECT_TRUE(cells_equal(Cell{}, Cell{}));
}

TEST(ExeMatch, ErrorsAreInvalid) {
  const Database db = Database::from_script(kennel_script());
  const auto pred_bad = exe_match("SELECT name FROM dogs", "SELECT nme FROM dogs", db);
  EXPECT_EQ(pred_bad.outcome, Outcome::kInvalid);
  EXPECT_EQ(pred_bad.invalid, InvalidKind::kExecute);
  EXPECT_FALSE(pred_bad.gold_defect);
  const auto gold_bad = exe_match("SELECT nme FROM dogs", "SELECT name FROM dogs", db);
  EXPECT_TRUE(gold_bad.gold_defect);
  const auto both_bad = exe_match("SELECT nme FROM dogs", "SELECT nme FROM dogs", db);
  EXPECT_FALSE(both_bad.matched());
  EXPECT_TRUE(both_bad.gold_defect);
}

TEST(EsmMatch, ReproducesLegacyBlindSpots) {
  const Schema transcripts = load_schema_file(kFixtures + "/ddl/student_transcripts.sql");
  const EsmFlags strict{true, true};
  // JOIN conditions are not compared.
  EXPECT_TRUE(esm_match("SELECT * FROM dogs AS t1 JOIN breeds AS t2 ON t1.breed_code = t2.breed_code",
                        "SELECT * FROM dogs AS t1 JOIN breeds AS t2 ON t1.breed_code = t2.breed_name", kennels(), strict)
                  .matched());
  // DISTINCT outside aggregates is invisible; inside it counts.
  EXPECT_TRUE(esm_match("SELECT DISTINCT name FROM dogs", "SELECT name FROM dogs", kennels(), strict).matched());
  EXPECT_FALSE(
      esm_match("SELECT COUNT(DISTINCT name) FROM dogs", "SELECT COUNT(name) FROM dogs", kennels(), strict).matched());
  EXPECT_TRUE(esm_match("SELECT COUNT(DISTINCT name) FROM dogs", "SELECT COUNT(name) FROM dogs", kennels(), {true, false})
                  .matched());
  // LIMIT values are dropped even with value checks.
  EXPECT_TRUE(esm_match("SELECT transcript_date FROM Transcripts ORDER BY transcript_date DESC LIMIT 2",
                        "SELECT transcript_date FROM Transcripts ORDER BY transcript_date DESC LIMIT 1", transcripts,
                        strict)
                  .matched());
  // Other values do count when checked.
  EXPECT_FALSE(esm_match("SELECT name FROM dogs WHERE age < 10", "SELECT name FROM dogs WHERE age < 5", kennels(), strict)
                   .matched());
  EXPECT_TRUE(esm_match("SELECT name FROM dogs WHERE age < 10", "SELECT name FROM dogs WHERE age < 5", kennels(),
                        {false, true})
                  .matched());
}

TEST(EsmMatch, SyntacticVariantsMiss) {
  EXPECT_FALSE(esm_match("SELECT MAX(weight) FROM dogs", "SELECT weight FROM dogs ORDER BY weight DESC LIMIT 1",
                         kennels())
                   .matched());
  EXPECT_FALSE(esm_match("SELECT count(dog_id) FROM dogs", "SELECT count(*) FROM dogs", kennels()).matched());
  EXPECT_TRUE(esm_match("SELECT name, age FROM dogs", "SELECT age, name FROM dogs AS d", kennels()).matched());
}

TEST(EsmMatch, UnparsableShapes) {
  const Schema toy = load_schema_file(kFixtures + "/ddl/toy.sql");
  auto invalid = [&](const std::string& sql) {
    const auto v = esm_match("SELECT c1 FROM t1", sql, toy);
    return v.outcome == Outcome::kInvalid && v.invalid == InvalidKind::kParse;
  };
  EXPECT_TRUE(invalid("SELECT c1 FROM t1 WHERE c1 IN (1, 2, 3)"));
  EXPECT_TRUE(invalid("SELECT c1 FROM t1 UNION SELECT c1 FROM t1 UNION SELECT c2 FROM t1"));
  EXPECT_TRUE(invalid("SELECT c1 FROM (SELECT * FROM t1)"));
  EXPECT_TRUE(invalid("SELECT c1 AS x FROM t1"));
  EXPECT_TRUE(invalid("SELECT t.c1 FROM t1 t"));
  EXPECT_TRUE(invalid("WITH q AS (SELECT c1 FROM t1) SELECT c1 FROM q"));
  // One alias table for the whole query: the inner t shadows the outer one.
  EXPECT_TRUE(invalid("SELECT c1 FROM t1 AS t JOIN t2 ON t.c1 = t2.c2 WHERE c1 IN (SELECT c3 FROM t3 AS t)"));
  EXPECT_FALSE(invalid("SELECT c1 FROM t1 AS a JOIN t2 ON a.c1 = t2.c2 WHERE c1 IN (SELECT c3 FROM t3 AS b)"));
  const auto gold_bad = esm_match("SELECT c1 FROM t1 WHERE c1 IN (1, 2)", "SELECT c1 FROM t1", toy);
  EXPECT_TRUE(gold_bad.gold_defect);
}

TEST(EsmMatch, ParenthesesAndQuotesCollapse) {
  const Schema toy = load_schema_file(kFixtures + "/ddl/toy.sql");
  EXPECT_TRUE(esm_match("SELECT c1 FROM t1 WHERE c1 = 1 AND (c2 = 2 OR c1 = 3)",
                        "SELECT c1 FROM t1 WHERE c1 = 1 AND c2 = 2 OR c1 = 3", toy)
                  .matched());
  EXPECT_TRUE(esm_match("SELECT c1 FROM t1 WHERE c3 = 'x'", "SELECT c1 FROM t1 WHERE c3 = \"x\"", toy).matched());
}

}  // namespace
}  // namespace etm
