#include "etm/ast.hpp"

#include <sstream>

namespace etm {

Expr Expr::Column(std::string table, std::string column) {
  Expr e;
  e.kind = ExprKind::kColumn;
  e.table = std::move(table);
  e.column = std::move(column);
  return e;
}

Expr Expr::Number(std::string text) {
  Expr e;
  e.kind = ExprKind::kLiteral;
  e.literal = LiteralKind::kNumber;
  e.text = std::move(text);
  return e;
}

Expr Expr::String(std::string text) {
  Expr e;
  e.kind = ExprKind::kLiteral;
  e.literal = LiteralKind::kString;
  e.text = std::move(text);
  return e;
}

Expr Expr::Null() {
  Expr e;
  e.kind = ExprKind::kLiteral;
  e.literal = LiteralKind::kNull;
  return e;
}

Expr Expr::Star(std::string table) {
  Expr e;
  e.kind = ExprKind::kStar;
  e.table = std::move(table);
  return e;
}

Expr Expr::Unary(std::string op, Expr operand) {
  Expr e;
  e.kind = ExprKind::kUnary;
  e.op = std::move(op);
  e.args.push_back(std::move(operand));
  return e;
}

Expr Expr::Binary(std::string op, Expr lhs, Expr rhs, bool negated) {
  Expr e;
  e.kind = ExprKind::kBinary;
  e.op = std::move(op);
  e.negated = negated;
  e.args.push_back(std::move(lhs));
  e.args.push_back(std::move(rhs));
  return e;
}

Expr Expr::Function(std::string name, std::vector<Expr> args, bool distinct) {
  Expr e;
  e.kind = ExprKind::kFunction;
  e.op = std::move(name);
  e.args = std::move(args);
  e.distinct = distinct;
  return e;
}

Expr Expr::Paren(Expr inner) {
  Expr e;
  e.kind = ExprKind::kParen;
  e.args.push_back(std::move(inner));
  return e;
}

Expr Expr::ScalarSubquery(Query query) {
  Expr e;
  e.kind = ExprKind::kSubquery;
  e.subquery = Box<Query>(std::move(query));
  return e;
}

TableSource TableSource::Named(std::string name, std::string alias) {
  TableSource s;
  s.name = std::move(name);
  s.alias = std::move(alias);
  return s;
}

TableSource TableSource::Derived(Query query, std::string alias) {
  TableSource s;
  s.derived = true;
  s.query = Box<Query>(std::move(query));
  s.alias = std::move(alias);
  return s;
}

SetExpr SetExpr::Compound(SetOp op, SetExpr lhs, SetExpr rhs) {
  SetExpr s;
  s.op = op;
  s.left = Box<SetExpr>(std::move(lhs));
  s.right = Box<SetExpr>(std::move(rhs));
  return s;
}

const char* to_string(SetOp op) {
  switch (op) {
    case SetOp::kNone: return "";
    case SetOp::kUnion: return "UNION";
    case SetOp::kUnionAll: return "UNION ALL";
    case SetOp::kIntersect: return "INTERSECT";
    case SetOp::kExcept: return "EXCEPT";
  }
  return "";
}

const char* to_string(JoinKind kind) {
  switch (kind) {
    case JoinKind::kInner: return "JOIN";
    case JoinKind::kLeft: return "LEFT JOIN";
    case JoinKind::kRight: return "RIGHT JOIN";
    case JoinKind::kFull: return "FULL OUTER JOIN";
    case JoinKind::kCross: return "CROSS JOIN";
  }
  return "JOIN";
}

int binary_precedence(const std::string& op) {
  if (op == "OR") return 1;
  if (op == "AND") return 2;
  if (op == "=" || op == "!=" || op == "IS" || op == "LIKE") return 4;
  if (op == "<" || op == "<=" || op == ">" || op == ">=") return 5;
  if (op == "+" || op == "-") return 7;
  if (op == "*" || op == "/" || op == "%") return 8;
  if (op == "||") return 9;
  return 4;
}

namespace {

constexpr int kAtomPrecedence = 11;

int precedence(const Expr& e) {
  switch (e.kind) {
    case ExprKind::kBinary: return binary_precedence(e.op);
    case ExprKind::kBetween:
    case ExprKind::kInList:
    case ExprKind::kInSubquery: return 4;
    case ExprKind::kUnary: return e.op == "NOT" ? 3 : 10;
    default: return kAtomPrecedence;
  }
}

void write_ident(std::ostream& out, const std::string& name, QuoteStyle quote) {
  switch (quote) {
    case QuoteStyle::kNone:
      out << name;
      return;
    case QuoteStyle::kDouble:
      out << '"';
      for (char c : name) {
        if (c == '"') out << '"';
        out << c;
      }
      out << '"';
      return;
    case QuoteStyle::kBacktick:
      out << '`' << name << '`';
      return;
    case QuoteStyle::kBracket:
      out << '[' << name << ']';
      return;
  }
}

void write_string(std::ostream& out, const std::string& text) {
  out << '\'';
  for (char c : text) {
    if (c == '\'') out << '\'';
    out << c;
  }
  out << '\'';
}

void write_query(std::ostream& out, const Query& q);

void write_expr(std::ostream& out, const Expr& e);

void write_child(std::ostream& out, const Expr& child, bool parenthesize) {
  if (parenthesize) out << '(';
  write_expr(out, child);
  if (parenthesize) out << ')';
}

void write_expr(std::ostream& out, const Expr& e) {
  switch (e.kind) {
    case ExprKind::kColumn:
      if (!e.table.empty()) {
        write_ident(out, e.table, e.table_quote);
        out << '.';
      }
      write_ident(out, e.column, e.column_quote);
      return;
    case ExprKind::kLiteral:
      if (e.literal == LiteralKind::kNumber) {
        out << e.text;
      } else if (e.literal == LiteralKind::kString) {
        write_string(out, e.text);
      } else {
        out << "NULL";
      }
      return;
    case ExprKind::kStar:
      if (!e.table.empty()) {
        write_ident(out, e.table, e.table_quote);
        out << '.';
      }
      out << '*';
      return;
    case ExprKind::kUnary:
      if (e.op == "NOT") {
        out << "NOT ";
        write_child(out, e.args[0], precedence(e.args[0]) < 3);
      } else {
        out << e.op;
        write_child(out, e.args[0], precedence(e.args[0]) < 10);
      }
      return;
    case ExprKind::kBinary: {
      const int p = binary_precedence(e.op);
      write_child(out, e.args[0], precedence(e.args[0]) < p);
      out << ' ';
      if (e.op == "IS") {
        out << (e.negated ? "IS NOT" : "IS");
      } else if (e.negated) {
        out << "NOT " << e.op;
      } else {
        out << e.op;
      }
      out << ' ';
      write_child(out, e.args[1], precedence(e.args[1]) <= p);
      return;
    }
    case ExprKind::kBetween:
      write_child(out, e.args[0], precedence(e.args[0]) <= 4);
      out << (e.negated ? " NOT BETWEEN " : " BETWEEN ");
      write_child(out, e.args[1], precedence(e.args[1]) < 5);
      out << " AND ";
      write_child(out, e.args[2], precedence(e.args[2]) < 5);
      return;
    case ExprKind::kInList:
      write_child(out, e.args[0], precedence(e.args[0]) <= 4);
      out << (e.negated ? " NOT IN (" : " IN (");
      for (std::size_t i = 1; i < e.args.size(); ++i) {
        if (i > 1) out << ", ";
        write_expr(out, e.args[i]);
      }
      out << ')';
      return;
    case ExprKind::kInSubquery:
      write_child(out, e.args[0], precedence(e.args[0]) <= 4);
      out << (e.negated ? " NOT IN (" : " IN (");
      write_query(out, *e.subquery);
      out << ')';
      return;
    case ExprKind::kExists:
      out << (e.negated ? "NOT EXISTS (" : "EXISTS (");
      write_query(out, *e.subquery);
      out << ')';
      return;
    case ExprKind::kSubquery:
      out << '(';
      write_query(out, *e.subquery);
      out << ')';
      return;
    case ExprKind::kFunction:
      out << e.op << '(';
      if (e.op == "CAST" && e.args.size() == 1) {
        write_expr(out, e.args[0]);
        out << " AS " << e.text << ')';
        return;
      }
      if (e.distinct) out << "DISTINCT ";
      for (std::size_t i = 0; i < e.args.size(); ++i) {
        if (i > 0) out << ", ";
        write_expr(out, e.args[i]);
      }
      out << ')';
      return;
    case ExprKind::kCase: {
      out << "CASE";
      std::size_t i = 0;
      if (e.case_operand) {
        out << ' ';
        write_expr(out, e.args[i++]);
      }
      const std::size_t stop = e.args.size() - (e.case_else ? 1 : 0);
      for (; i + 2 <= stop; i += 2) {
        out << " WHEN ";
        write_expr(out, e.args[i]);
        out << " THEN ";
        write_expr(out, e.args[i + 1]);
      }
      if (e.case_else) {
        out << " ELSE ";
        write_expr(out, e.args.back());
      }
      out << " END";
      return;
    }
    case ExprKind::kParen:
      out << '(';
      write_expr(out, e.args[0]);
      out << ')';
      return;
  }
}

void write_source(std::ostream& out, const TableSource& s) {
  if (s.derived) {
    out << '(';
    write_query(out, *s.query);
    out << ')';
  } else {
    write_ident(out, s.name, s.name_quote);
  }
  if (!s.alias.empty()) {
    out << " AS ";
    write_ident(out, s.alias, s.alias_quote);
  }
}

void write_core(std::ostream& out, const SelectCore& c) {
  out << "SELECT ";
  if (c.distinct) out << "DISTINCT ";
  for (std::size_t i = 0; i < c.projections.size(); ++i) {
    if (i > 0) out << ", ";
    write_expr(out, c.projections[i].expr);
    if (!c.projections[i].alias.empty()) {
      out << " AS ";
      write_ident(out, c.projections[i].alias, c.projections[i].alias_quote);
    }
  }
  if (c.from) {
    out << " FROM ";
    write_source(out, c.from->base);
    for (const JoinItem& j : c.from->joins) {
      out << ' ' << to_string(j.kind) << ' ';
      write_source(out, j.source);
      if (j.on) {
        out << " ON ";
        write_expr(out, *j.on);
      }
    }
  }
  if (c.where) {
    out << " WHERE ";
    write_expr(out, *c.where);
  }
  if (!c.group_by.empty()) {
    out << " GROUP BY ";
    for (std::size_t i = 0; i < c.group_by.size(); ++i) {
      if (i > 0) out << ", ";
      write_expr(out, c.group_by[i]);
    }
  }
  if (c.having) {
    out << " HAVING ";
    write_expr(out, *c.having);
  }
}

void write_set(std::ostream& out, const SetExpr& s) {
  if (s.is_select()) {
    write_core(out, s.select);
    return;
  }
  write_set(out, *s.left);
  out << ' ' << to_string(s.op) << ' ';
  if (s.right->is_select()) {
    write_set(out, *s.right);
  } else {
    out << '(';
    write_set(out, *s.right);
    out << ')';
  }
}

void write_query(std::ostream& out, const Query& q) {
  if (!q.ctes.empty()) {
    out << "WITH ";
    for (std::size_t i = 0; i < q.ctes.size(); ++i) {
      if (i > 0) out << ", ";
      write_ident(out, q.ctes[i].name, q.ctes[i].name_quote);
      out << " AS (";
      write_query(out, q.ctes[i].query);
      out << ')';
    }
    out << ' ';
  }
  write_set(out, q.body);
  if (!q.order_by.empty()) {
    out << " ORDER BY ";
    for (std::size_t i = 0; i < q.order_by.size(); ++i) {
      if (i > 0) out << ", ";
      write_expr(out, q.order_by[i].expr);
      if (q.order_by[i].desc) out << " DESC";
    }
  }
  if (q.limit) {
    out << " LIMIT " << q.limit->count;
    if (q.limit->offset) out << " OFFSET " << *q.limit->offset;
  }
}

}  // namespace

std::string serialize(const Query& query) {
  std::ostringstream out;
  write_query(out, query);
  return out.str();
}

std::string serialize(const Expr& expr) {
  std::ostringstream out;
  write_expr(out, expr);
  return out.str();
}

std::string serialize(const SelectCore& core) {
  std::ostringstream out;
  write_core(out, core);
  return out.str();
}

std::string serialize(const TableSource& source) {
  std::ostringstream out;
  write_source(out, source);
  return out.str();
}

}  // namespace etm
