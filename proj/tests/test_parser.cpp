#include <gtest/gtest.h>

#include <fstream>
#include <string>
#include <vector>

#include "etm/errors.hpp"
#include "etm/parser.hpp"
#include "test_util.hpp"

namespace etm {
namespace {

std::vector<std::string> load_corpus() {
  std::ifstream in(std::string(ETM_FIXTURES) + "/corpus.sql");
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

const Expr& where_of(const Query& q) { return *q.body.select.where; }

TEST(Parser, MinimalSelect) {
  const Query q = parse("SELECT name FROM dogs;");
  ASSERT_TRUE(q.body.is_select());
  ASSERT_EQ(q.body.select.projections.size(), 1u);
  const Expr& e = q.body.select.projections[0].expr;
  EXPECT_EQ(e.kind, ExprKind::kColumn);
  EXPECT_EQ(e.column, "name");
  EXPECT_EQ(q.body.select.from->base.name, "dogs");
}

TEST(Parser, InListKeepsItems) {
  const Query q = parse("SELECT c1 FROM t1 WHERE c1 IN (1, 2, 3);");
  const Expr& in = where_of(q);
  ASSERT_EQ(in.kind, ExprKind::kInList);
  ASSERT_EQ(in.args.size(), 4u);
  EXPECT_EQ(in.args[1].text, "1");
  EXPECT_EQ(in.args[2].text, "2");
  EXPECT_EQ(in.args[3].text, "3");
  EXPECT_EQ(serialize(q), "SELECT c1 FROM t1 WHERE c1 IN (1, 2, 3)");
}

TEST(Parser, ParenthesizedDisjunctionStaysRightChild) {
  const Query q = parse("SELECT c1 FROM t1 WHERE c1 = x AND (c2 = y OR c1 = z);");
  const Expr& w = where_of(q);
  ASSERT_EQ(w.op, "AND");
  ASSERT_EQ(w.args[1].kind, ExprKind::kParen);
  EXPECT_EQ(w.args[1].args[0].op, "OR");
}

TEST(Parser, ParenFidelity) {
  const Query with = parse("SELECT c1 FROM t1 WHERE a AND (b OR c)");
  const Query without = parse("SELECT c1 FROM t1 WHERE a AND b OR c");
  EXPECT_NE(with, without);
  EXPECT_EQ(where_of(without).op, "OR");
}

TEST(Parser, DerivedTableSource) {
  const Query q = parse("SELECT c1 FROM (SELECT * FROM t1)");
  const TableSource& src = q.body.select.from->base;
  EXPECT_TRUE(src.derived);
  ASSERT_TRUE(src.query);
  EXPECT_EQ(src.query->body.select.projections[0].expr.kind, ExprKind::kStar);
}

TEST(Parser, QuoteTyping) {
  const Query lit = parse("SELECT 'x' FROM t1");
  EXPECT_EQ(lit.body.select.projections[0].expr.kind, ExprKind::kLiteral);
  const Query col = parse(R"(SELECT "t1"."c1" FROM "t1")");
  const Expr& e = col.body.select.projections[0].expr;
  EXPECT_EQ(e.kind, ExprKind::kColumn);
  EXPECT_EQ(e.table, "t1");
  EXPECT_EQ(e.column_quote, QuoteStyle::kDouble);
}

TEST(Parser, BetweenAndInArePreserved) {
  const Query between = parse("SELECT a FROM t WHERE a BETWEEN 1 AND 2");
  EXPECT_EQ(where_of(between).kind, ExprKind::kBetween);
  const Query in = parse("SELECT a FROM t WHERE a NOT IN (SELECT b FROM u)");
  EXPECT_EQ(where_of(in).kind, ExprKind::kInSubquery);
  EXPECT_TRUE(where_of(in).negated);
}

TEST(Parser, PrecedenceNotBindsTighterThanAnd) {
  const Query q = parse("SELECT a FROM t WHERE NOT a = 1 AND b = 2");
  const Expr& w = where_of(q);
  ASSERT_EQ(w.op, "AND");
  EXPECT_EQ(w.args[0].kind, ExprKind::kUnary);
  EXPECT_EQ(w.args[0].op, "NOT");
}

TEST(Parser, LimitForms) {
  EXPECT_EQ(parse("SELECT a FROM t LIMIT 5").limit->count, 5);
  const Query off = parse("SELECT a FROM t LIMIT 5 OFFSET 2");
  EXPECT_EQ(off.limit->offset, 2);
  const Query comma = parse("SELECT a FROM t LIMIT 2, 5");
  EXPECT_EQ(comma.limit->count, 5);
  EXPECT_EQ(comma.limit->offset, 2);
}

TEST(Parser, NumbersKeepSourceText) {
  const Query q = parse("SELECT a FROM t WHERE a = 012");
  const Expr& w = where_of(q);
  EXPECT_EQ(w.args[1].text, "012");
}

TEST(Parser, RejectsMalformedInput) {
  EXPECT_THROW(parse("SELECT"), ParseError);
  EXPECT_THROW(parse("SELECT a FROM"), ParseError);
  EXPECT_THROW(parse("SELECT a FROM t WHERE"), ParseError);
  EXPECT_THROW(parse("SELECT 'abc FROM t"), ParseError);
  EXPECT_THROW(parse("DELETE FROM t"), ParseError);
  EXPECT_THROW(parse("SELECT a FROM t; SELECT b FROM t"), ParseError);
  EXPECT_THROW(parse("SELECT a FROM t NATURAL JOIN u"), ParseError);
  EXPECT_THROW(parse("WITH q AS (SELECT 1), q AS (SELECT 2) SELECT * FROM q"), ParseError);
  EXPECT_THROW(parse("SELECT a FROM t LIMIT -1"), ParseError);
}

TEST(Parser, ParseErrorCarriesPosition) {
  try {
    parse("SELECT a FROM t WHERE a = = 1");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.position(), 26u);
  }
}

TEST(Parser, KeywordCoverage) {
  for (const char* sql : {
           "SELECT a FROM t1 LEFT JOIN t2 ON t1.a = t2.a",
           "SELECT a FROM t1 RIGHT JOIN t2 ON t1.a = t2.a",
           "SELECT a FROM t1 OUTER JOIN t2 ON t1.a = t2.a",
           "SELECT a FROM t1 INNER JOIN t2 ON t1.a = t2.a",
           "SELECT CAST(a AS REAL) FROM t",
           "SELECT CASE a WHEN 1 THEN 'x' END FROM t",
           "SELECT IIF(a > 1, 1, 0) FROM t",
           "SELECT a FROM t ORDER BY JULIANDAY(a)",
           "SELECT SUBSTR(a, 1, 2) FROM t",
           "SELECT a FROM t WHERE a IS NOT NULL",
           "SELECT a FROM t EXCEPT SELECT a FROM u",
           "SELECT a FROM t INTERSECT SELECT a FROM u",
           "WITH q AS (SELECT a FROM t) SELECT a FROM q",
       }) {
    EXPECT_NO_THROW(parse(sql)) << sql;
  }
}

TEST(Parser, CorpusRoundTrip) {
  const auto corpus = load_corpus();
  ASSERT_GE(corpus.size(), 50u);
  for (const std::string& sql : corpus) {
    const Query first = parse(sql);
    const std::string text = serialize(first);
    const Query second = parse(text);
    EXPECT_EQ(first, second) << sql << "\n  -> " << text;
    EXPECT_EQ(serialize(second), text) << sql;
  }
}

TEST(Parser, SerializationIsPrecedenceFaithful) {
  Expr sum = Expr::Binary("+", Expr::Column("", "a"), Expr::Column("", "b"));
  Expr product = Expr::Binary("*", sum, Expr::Column("", "c"));
  EXPECT_EQ(serialize(product), "(a + b) * c");
  Expr diff = Expr::Binary("-", Expr::Column("", "a"), Expr::Binary("-", Expr::Column("", "b"), Expr::Column("", "c")));
  EXPECT_EQ(serialize(diff), "a - (b - c)");
  EXPECT_EQ(serialize(parse_expression(serialize(diff))), serialize(diff));
}

}  // namespace
}  // namespace etm
