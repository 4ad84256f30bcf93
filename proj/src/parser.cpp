#include "etm/parser.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <set>

#include "etm/errors.hpp"

namespace etm {

namespace {

constexpr std::array kReserved = {
    "ALL",    "AND",       "AS",     "ASC",     "BETWEEN", "BY",      "CASE",  "CAST",
    "CROSS",  "DESC",      "DISTINCT", "ELSE",  "END",     "ESCAPE",  "EXCEPT", "EXISTS",
    "FROM",   "FULL",      "GLOB",   "GROUP",   "HAVING",  "IN",      "INNER", "INTERSECT",
    "IS",     "ISNULL",    "JOIN",   "LEFT",    "LIKE",    "LIMIT",   "NATURAL", "NOT",
    "NOTNULL", "NULL",     "OFFSET", "ON",      "OR",      "ORDER",   "OUTER", "RECURSIVE",
    "RIGHT",  "SELECT",    "THEN",   "UNION",   "USING",   "WHEN",    "WHERE", "WITH",
};

std::string upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

bool ident_start(char c) {
  const auto u = static_cast<unsigned char>(c);
  return std::isalpha(u) || c == '_' || u >= 0x80;
}

bool ident_char(char c) {
  const auto u = static_cast<unsigned char>(c);
  return std::isalnum(u) || c == '_' || c == '$' || u >= 0x80;
}

}  // namespace

bool is_reserved_keyword(std::string_view upper_word) {
  return std::find(kReserved.begin(), kReserved.end(), upper_word) != kReserved.end();
}

std::vector<Token> tokenize(std::string_view sql) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  const std::size_t n = sql.size();

  auto read_quoted = [&](char close, std::size_t start) {
    std::string text;
    ++i;
    for (;;) {
      if (i >= n) throw ParseError(start, "unterminated quoted token");
      if (sql[i] == close) {
        if (close != ']' && i + 1 < n && sql[i + 1] == close) {
          text.push_back(close);
          i += 2;
          continue;
        }
        ++i;
        return text;
      }
      text.push_back(sql[i++]);
    }
  };

  while (i < n) {
    const char c = sql[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '-' && i + 1 < n && sql[i + 1] == '-') {
      while (i < n && sql[i] != '\n') ++i;
      continue;
    }
    if (c == '/' && i + 1 < n && sql[i + 1] == '*') {
      const std::size_t end = sql.find("*/", i + 2);
      if (end == std::string_view::npos) throw ParseError(i, "unterminated comment");
      i = end + 2;
      continue;
    }
    Token tok;
    tok.position = i;
    if (c == '\'') {
      tok.kind = TokenKind::kString;
      tok.text = read_quoted('\'', i);
    } else if (c == '"') {
      tok.kind = TokenKind::kIdentifier;
      tok.quote = QuoteStyle::kDouble;
      tok.text = read_quoted('"', i);
    } else if (c == '`') {
      tok.kind = TokenKind::kIdentifier;
      tok.quote = QuoteStyle::kBacktick;
      tok.text = read_quoted('`', i);
    } else if (c == '[') {
      tok.kind = TokenKind::kIdentifier;
      tok.quote = QuoteStyle::kBracket;
      tok.text = read_quoted(']', i);
    } else if (std::isdigit(static_cast<unsigned char>(c)) ||
               (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(sql[i + 1])))) {
      const std::size_t start = i;
      if (c == '0' && i + 1 < n && (sql[i + 1] == 'x' || sql[i + 1] == 'X')) {
        i += 2;
        while (i < n && std::isxdigit(static_cast<unsigned char>(sql[i]))) ++i;
      } else {
        while (i < n && std::isdigit(static_cast<unsigned char>(sql[i]))) ++i;
        if (i < n && sql[i] == '.') {
          ++i;
          while (i < n && std::isdigit(static_cast<unsigned char>(sql[i]))) ++i;
        }
        if (i < n && (sql[i] == 'e' || sql[i] == 'E')) {
          std::size_t j = i + 1;
          if (j < n && (sql[j] == '+' || sql[j] == '-')) ++j;
          if (j < n && std::isdigit(static_cast<unsigned char>(sql[j]))) {
            i = j;
            while (i < n && std::isdigit(static_cast<unsigned char>(sql[i]))) ++i;
          }
        }
      }
      if (i < n && ident_char(sql[i])) throw ParseError(start, "malformed number");
      tok.kind = TokenKind::kNumber;
      tok.text = std::string(sql.substr(start, i - start));
    } else if (ident_start(c)) {
      const std::size_t start = i;
      while (i < n && ident_char(sql[i])) ++i;
      const std::string word(sql.substr(start, i - start));
      const std::string up = upper(word);
      if (is_reserved_keyword(up)) {
        tok.kind = TokenKind::kKeyword;
        tok.text = up;
      } else {
        tok.kind = TokenKind::kIdentifier;
        tok.text = word;
      }
    } else {
      static constexpr std::array kTwoChar = {"==", "!=", "<>", "<=", ">=", "||", "<<", ">>"};
      tok.kind = TokenKind::kSymbol;
      if (i + 1 < n) {
        const std::string two(sql.substr(i, 2));
        if (std::find(kTwoChar.begin(), kTwoChar.end(), two) != kTwoChar.end()) {
          tok.text = two;
          i += 2;
          tokens.push_back(std::move(tok));
          continue;
        }
      }
      static const std::string kSingles = "(),.*+-/%=<>;&|~";
      if (kSingles.find(c) == std::string::npos) {
        throw ParseError(i, std::string("unexpected character '") + c + "'");
      }
      tok.text = std::string(1, c);
      ++i;
    }
    tokens.push_back(std::move(tok));
  }
  while (!tokens.empty() && tokens.back().kind == TokenKind::kSymbol && tokens.back().text == ";") {
    tokens.pop_back();
  }
  Token end;
  end.kind = TokenKind::kEnd;
  end.position = n;
  tokens.push_back(end);
  return tokens;
}

namespace {

class Parser {
 public:
  explicit Parser(std::string_view sql) : tokens_(tokenize(sql)) {}

  Query parse_statement() {
    if (!peek_keyword("SELECT") && !peek_keyword("WITH")) fail("expected SELECT or WITH");
    Query q = parse_query();
    if (peek().kind != TokenKind::kEnd) fail("unexpected token '" + peek().text + "'");
    return q;
  }

  Expr parse_standalone_expression() {
    Expr e = parse_expr(0);
    if (peek().kind != TokenKind::kEnd) fail("unexpected token '" + peek().text + "'");
    return e;
  }

 private:
  const Token& peek(std::size_t ahead = 0) const {
    return tokens_[std::min(pos_ + ahead, tokens_.size() - 1)];
  }
  const Token& advance() {
    const Token& t = tokens_[pos_];
    if (pos_ + 1 < tokens_.size()) ++pos_;
    return t;
  }
  bool peek_keyword(std::string_view kw, std::size_t ahead = 0) const {
    const Token& t = peek(ahead);
    return t.kind == TokenKind::kKeyword && t.text == kw;
  }
  bool peek_symbol(std::string_view sym, std::size_t ahead = 0) const {
    const Token& t = peek(ahead);
    return t.kind == TokenKind::kSymbol && t.text == sym;
  }
  bool accept_keyword(std::string_view kw) {
    if (!peek_keyword(kw)) return false;
    advance();
    return true;
  }
  bool accept_symbol(std::string_view sym) {
    if (!peek_symbol(sym)) return false;
    advance();
    return true;
  }
  void expect_keyword(std::string_view kw) {
    if (!accept_keyword(kw)) fail("expected " + std::string(kw));
  }
  void expect_symbol(std::string_view sym) {
    if (!accept_symbol(sym)) fail("expected '" + std::string(sym) + "'");
  }
  [[noreturn]] void fail(const std::string& message) const {
    throw ParseError(peek().position, message);
  }

  bool at_query_start(std::size_t ahead = 0) const {
    return peek_keyword("SELECT", ahead) || peek_keyword("WITH", ahead);
  }

  Query parse_query() {
    Query q;
    if (accept_keyword("WITH")) {
      if (peek_keyword("RECURSIVE")) fail("recursive CTEs are not supported");
      std::set<std::string> names;
      do {
        const Token& name = peek();
        if (name.kind != TokenKind::kIdentifier) fail("expected CTE name");
        advance();
        if (peek_symbol("(")) fail("CTE column lists are not supported");
        expect_keyword("AS");
        expect_symbol("(");
        Cte cte;
        cte.name = name.text;
        cte.name_quote = name.quote;
        cte.query = parse_query();
        expect_symbol(")");
        if (!names.insert(upper(cte.name)).second) fail("duplicate CTE name '" + cte.name + "'");
        q.ctes.push_back(std::move(cte));
      } while (accept_symbol(","));
    }
    q.body = parse_set_expr();
    if (accept_keyword("ORDER")) {
      expect_keyword("BY");
      do {
        OrderItem item;
        item.expr = parse_expr(0);
        if (accept_keyword("DESC")) {
          item.desc = true;
        } else {
          accept_keyword("ASC");
        }
        if (peek().kind == TokenKind::kIdentifier && upper(peek().text) == "NULLS") {
          fail("NULLS FIRST/LAST is not supported");
        }
        q.order_by.push_back(std::move(item));
      } while (accept_symbol(","));
    }
    if (accept_keyword("LIMIT")) {
      LimitSpec limit;
      const std::int64_t first = parse_limit_value();
      if (accept_keyword("OFFSET")) {
        limit.count = first;
        limit.offset = parse_limit_value();
      } else if (accept_symbol(",")) {
        limit.offset = first;
        limit.count = parse_limit_value();
      } else {
        limit.count = first;
      }
      q.limit = limit;
    }
    return q;
  }

  std::int64_t parse_limit_value() {
    const Token& t = peek();
    if (t.kind != TokenKind::kNumber || t.text.find_first_not_of("0123456789") != std::string::npos) {
      fail("LIMIT/OFFSET requires a non-negative integer literal");
    }
    advance();
    try {
      return std::stoll(t.text);
    } catch (const std::exception&) {
      throw ParseError(t.position, "LIMIT value out of range");
    }
  }

  SetExpr parse_set_expr() {
    SetExpr lhs = parse_set_operand();
    for (;;) {
      SetOp op = SetOp::kNone;
      if (accept_keyword("UNION")) {
        op = accept_keyword("ALL") ? SetOp::kUnionAll : SetOp::kUnion;
      } else if (accept_keyword("INTERSECT")) {
        op = SetOp::kIntersect;
      } else if (accept_keyword("EXCEPT")) {
        op = SetOp::kExcept;
      } else {
        break;
      }
      SetExpr rhs = parse_set_operand();
      lhs = SetExpr::Compound(op, std::move(lhs), std::move(rhs));
    }
    return lhs;
  }

  SetExpr parse_set_operand() {
    if (peek_symbol("(") && at_query_start(1)) {
      advance();
      Query inner = parse_query();
      expect_symbol(")");
      if (!inner.ctes.empty() || !inner.order_by.empty() || inner.limit) {
        fail("ORDER BY/LIMIT/WITH inside a compound operand is not supported");
      }
      return std::move(inner.body);
    }
    SetExpr s;
    s.select = parse_core();
    return s;
  }

  std::optional<std::pair<std::string, QuoteStyle>> parse_alias() {
    if (accept_keyword("AS")) {
      const Token& t = peek();
      if (t.kind != TokenKind::kIdentifier && t.kind != TokenKind::kString) fail("expected alias after AS");
      advance();
      return std::make_pair(t.text, t.kind == TokenKind::kString ? QuoteStyle::kDouble : t.quote);
    }
    if (peek().kind == TokenKind::kIdentifier) {
      const Token& t = advance();
      return std::make_pair(t.text, t.quote);
    }
    return std::nullopt;
  }

  SelectCore parse_core() {
    expect_keyword("SELECT");
    SelectCore core;
    if (accept_keyword("DISTINCT")) {
      core.distinct = true;
    } else {
      accept_keyword("ALL");
    }
    do {
      Projection p;
      p.expr = parse_expr(0);
      if (p.expr.kind != ExprKind::kStar) {
        if (auto alias = parse_alias()) {
          p.alias = alias->first;
          p.alias_quote = alias->second;
        }
      }
      core.projections.push_back(std::move(p));
    } while (accept_symbol(","));

    if (accept_keyword("FROM")) core.from = parse_from();
    if (accept_keyword("WHERE")) core.where = parse_expr(0);
    if (accept_keyword("GROUP")) {
      expect_keyword("BY");
      do {
        core.group_by.push_back(parse_expr(0));
      } while (accept_symbol(","));
    }
    if (accept_keyword("HAVING")) core.having = parse_expr(0);
    return core;
  }

  TableSource parse_table_source() {
    TableSource s;
    if (peek_symbol("(")) {
      if (!at_query_start(1)) fail("parenthesized join groups are not supported");
      advance();
      s.derived = true;
      s.query = Box<Query>(parse_query());
      expect_symbol(")");
    } else {
      const Token& t = peek();
      if (t.kind != TokenKind::kIdentifier) fail("expected table name");
      advance();
      if (peek_symbol(".")) fail("schema-qualified table names are not supported");
      if (peek_symbol("(")) fail("table-valued functions are not supported");
      s.name = t.text;
      s.name_quote = t.quote;
    }
    if (auto alias = parse_alias()) {
      s.alias = alias->first;
      s.alias_quote = alias->second;
    }
    return s;
  }

  FromClause parse_from() {
    FromClause from;
    from.base = parse_table_source();
    for (;;) {
      JoinItem join;
      if (accept_symbol(",")) {
        join.kind = JoinKind::kInner;
      } else {
        if (peek_keyword("NATURAL")) fail("NATURAL JOIN is not supported");
        if (accept_keyword("LEFT")) {
          accept_keyword("OUTER");
          join.kind = JoinKind::kLeft;
        } else if (accept_keyword("RIGHT")) {
          accept_keyword("OUTER");
          join.kind = JoinKind::kRight;
        } else if (accept_keyword("FULL")) {
          accept_keyword("OUTER");
          join.kind = JoinKind::kFull;
        } else if (accept_keyword("OUTER")) {
          join.kind = JoinKind::kFull;
        } else if (accept_keyword("INNER")) {
          join.kind = JoinKind::kInner;
        } else if (accept_keyword("CROSS")) {
          join.kind = JoinKind::kCross;
        } else if (!peek_keyword("JOIN")) {
          break;
        }
        expect_keyword("JOIN");
      }
      join.source = parse_table_source();
      if (accept_keyword("ON")) {
        join.on = parse_expr(0);
      } else if (peek_keyword("USING")) {
        fail("JOIN ... USING is not supported");
      }
      from.joins.push_back(std::move(join));
    }
    return from;
  }

  // Precedence climbing. Levels: OR 1, AND 2, NOT 3, equality-like 4,
  // relational 5, additive 7, multiplicative 8, concatenation 9.
  Expr parse_expr(int min_prec) {
    Expr lhs = parse_prefix(min_prec);
    for (;;) {
      const Token& t = peek();
      bool negated = false;
      std::size_t ahead = 0;
      if (t.kind == TokenKind::kKeyword && t.text == "NOT" &&
          (peek_keyword("IN", 1) || peek_keyword("LIKE", 1) || peek_keyword("BETWEEN", 1) ||
           peek_keyword("GLOB", 1))) {
        negated = true;
        ahead = 1;
      }
      const Token& op_tok = peek(ahead);
      if (op_tok.kind == TokenKind::kKeyword) {
        const std::string& kw = op_tok.text;
        if (kw == "OR" || kw == "AND") {
          const int p = kw == "OR" ? 1 : 2;
          if (p < min_prec) break;
          advance();
          lhs = Expr::Binary(kw, std::move(lhs), parse_expr(p + 1));
          continue;
        }
        if (kw == "IN" || kw == "LIKE" || kw == "BETWEEN" || kw == "IS" || kw == "ISNULL" ||
            kw == "NOTNULL" || kw == "GLOB") {
          if (4 < min_prec) break;
          for (std::size_t k = 0; k <= ahead; ++k) advance();
          if (kw == "GLOB") fail("GLOB is not supported");
          if (kw == "IN") {
            lhs = parse_in(std::move(lhs), negated);
          } else if (kw == "LIKE") {
            Expr rhs = parse_expr(5);
            if (peek_keyword("ESCAPE")) fail("LIKE ... ESCAPE is not supported");
            lhs = Expr::Binary("LIKE", std::move(lhs), std::move(rhs), negated);
          } else if (kw == "BETWEEN") {
            Expr between;
            between.kind = ExprKind::kBetween;
            between.negated = negated;
            between.args.push_back(std::move(lhs));
            between.args.push_back(parse_expr(5));
            expect_keyword("AND");
            between.args.push_back(parse_expr(5));
            lhs = std::move(between);
          } else if (kw == "IS") {
            const bool is_not = accept_keyword("NOT");
            lhs = Expr::Binary("IS", std::move(lhs), parse_expr(5), is_not);
          } else {
            lhs = Expr::Binary("IS", std::move(lhs), Expr::Null(), kw == "NOTNULL");
          }
          continue;
        }
        break;
      }
      if (op_tok.kind != TokenKind::kSymbol) break;
      std::string op = op_tok.text;
      if (op == "==") op = "=";
      if (op == "<>") op = "!=";
      static const std::set<std::string> kBinary = {"=", "!=", "<", "<=", ">", ">=", "+", "-",
                                                    "*", "/", "%", "||"};
      if (!kBinary.count(op)) break;
      const int p = binary_precedence(op);
      if (p < min_prec) break;
      advance();
      lhs = Expr::Binary(op, std::move(lhs), parse_expr(p + 1));
    }
    return lhs;
  }

  Expr parse_in(Expr target, bool negated) {
    expect_symbol("(");
    Expr e;
    e.negated = negated;
    e.args.push_back(std::move(target));
    if (at_query_start()) {
      e.kind = ExprKind::kInSubquery;
      e.subquery = Box<Query>(parse_query());
    } else {
      e.kind = ExprKind::kInList;
      if (peek_symbol(")")) fail("empty IN list");
      do {
        e.args.push_back(parse_expr(0));
      } while (accept_symbol(","));
    }
    expect_symbol(")");
    return e;
  }

  Expr parse_prefix(int min_prec) {
    if (peek_keyword("NOT") && !peek_keyword("EXISTS", 1)) {
      if (3 < min_prec) fail("NOT is not allowed here without parentheses");
      advance();
      return Expr::Unary("NOT", parse_expr(3));
    }
    if (peek_symbol("-") || peek_symbol("+")) {
      const std::string op = advance().text;
      return Expr::Unary(op, parse_prefix(10));
    }
    return parse_primary();
  }

  Expr parse_primary() {
    const Token& t = peek();
    switch (t.kind) {
      case TokenKind::kNumber:
        advance();
        return Expr::Number(t.text);
      case TokenKind::kString:
        advance();
        return Expr::String(t.text);
      case TokenKind::kIdentifier:
        return parse_identifier_expr();
      case TokenKind::kEnd:
        fail("unexpected end of input");
      default:
        break;
    }
    if (t.kind == TokenKind::kSymbol) {
      if (t.text == "*") {
        advance();
        return Expr::Star();
      }
      if (t.text == "(") {
        advance();
        if (at_query_start()) {
          Query q = parse_query();
          expect_symbol(")");
          return Expr::ScalarSubquery(std::move(q));
        }
        Expr inner = parse_expr(0);
        if (peek_symbol(",")) fail("row values are not supported");
        expect_symbol(")");
        return Expr::Paren(std::move(inner));
      }
      fail("unexpected symbol '" + t.text + "'");
    }
    // Keywords that start an expression.
    if (accept_keyword("NULL")) return Expr::Null();
    if (peek_keyword("CASE")) return parse_case();
    if (peek_keyword("CAST")) return parse_cast();
    if (peek_keyword("EXISTS") || peek_keyword("NOT")) {
      const bool negated = accept_keyword("NOT");
      expect_keyword("EXISTS");
      expect_symbol("(");
      Expr e;
      e.kind = ExprKind::kExists;
      e.negated = negated;
      e.subquery = Box<Query>(parse_query());
      expect_symbol(")");
      return e;
    }
    fail("unexpected keyword " + t.text);
  }

  Expr parse_identifier_expr() {
    const Token first = advance();
    if (peek_symbol("(") && first.quote == QuoteStyle::kNone) {
      advance();
      Expr fn;
      fn.kind = ExprKind::kFunction;
      fn.op = upper(first.text);
      if (accept_symbol(")")) return fn;
      if (accept_keyword("DISTINCT")) fn.distinct = true;
      if (peek_symbol("*") && peek_symbol(")", 1)) {
        advance();
        fn.args.push_back(Expr::Star());
      } else {
        do {
          fn.args.push_back(parse_expr(0));
        } while (accept_symbol(","));
      }
      expect_symbol(")");
      return fn;
    }
    if (accept_symbol(".")) {
      if (accept_symbol("*")) {
        Expr star = Expr::Star(first.text);
        star.table_quote = first.quote;
        return star;
      }
      const Token& col = peek();
      if (col.kind != TokenKind::kIdentifier) fail("expected column name after '.'");
      advance();
      if (peek_symbol(".")) fail("schema-qualified column references are not supported");
      Expr e = Expr::Column(first.text, col.text);
      e.table_quote = first.quote;
      e.column_quote = col.quote;
      return e;
    }
    Expr e = Expr::Column("", first.text);
    e.column_quote = first.quote;
    return e;
  }

  Expr parse_case() {
    expect_keyword("CASE");
    Expr e;
    e.kind = ExprKind::kCase;
    if (!peek_keyword("WHEN")) {
      e.case_operand = true;
      e.args.push_back(parse_expr(0));
    }
    if (!peek_keyword("WHEN")) fail("expected WHEN");
    while (accept_keyword("WHEN")) {
      e.args.push_back(parse_expr(0));
      expect_keyword("THEN");
      e.args.push_back(parse_expr(0));
    }
    if (accept_keyword("ELSE")) {
      e.case_else = true;
      e.args.push_back(parse_expr(0));
    }
    expect_keyword("END");
    return e;
  }

  Expr parse_cast() {
    expect_keyword("CAST");
    expect_symbol("(");
    Expr e;
    e.kind = ExprKind::kFunction;
    e.op = "CAST";
    e.args.push_back(parse_expr(0));
    expect_keyword("AS");
    std::string type;
    while (peek().kind == TokenKind::kIdentifier) {
      if (!type.empty()) type += ' ';
      type += upper(advance().text);
    }
    if (type.empty()) fail("expected type name in CAST");
    if (accept_symbol("(")) {
      type += '(';
      do {
        const Token& num = peek();
        if (num.kind != TokenKind::kNumber) fail("expected number in type size");
        type += advance().text;
        if (peek_symbol(",")) type += ',';
      } while (accept_symbol(","));
      expect_symbol(")");
      type += ')';
    }
    e.text = type;
    expect_symbol(")");
    return e;
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

}  // namespace

Query parse(std::string_view sql) { return Parser(sql).parse_statement(); }

Expr parse_expression(std::string_view sql) { return Parser(sql).parse_standalone_expression(); }

}  // namespace etm
