#include <algorithm>
#include <map>
#include <regex>
#include <set>
#include <vector>

#include "etm/baseline.hpp"
#include "etm/errors.hpp"
#include "etm/parser.hpp"

// Set-based structural comparison in the style of the legacy Spider
// evaluator. Each query becomes a string of sorted components; two queries
// match iff the strings are equal. The blind spots are deliberate and each
// one is marked "legacy:".

namespace etm {
namespace {

const std::set<std::string> kAggregates = {"MAX", "MIN", "COUNT", "SUM", "AVG"};
const std::set<std::string> kArith = {"+", "-", "*", "/"};
const std::set<std::string> kCompare = {"=", "!=", "<>", "<", ">", "<=", ">=", "LIKE", "IS"};

std::string joined(std::vector<std::string> items, bool sort) {
  if (sort) std::sort(items.begin(), items.end());
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

class EsmBuilder {
 public:
  EsmBuilder(const Schema& schema, const EsmFlags& flags, std::string text)
      : schema_(schema), flags_(flags), text_(lower(text)) {}

  std::string run(const Query& q) {
    collect_aliases(q);
    if (set_ops_ > 1) throw EsmParseError("more than one set operator");  // legacy: single IUEN only
    return query(q);
  }

 private:
  const Schema& schema_;
  EsmFlags flags_;
  std::string text_;
  std::map<std::string, std::string> aliases_;  // legacy: one table for the whole query
  int set_ops_ = 0;

  struct Core {
    std::vector<std::string> tables;  // default tables for unqualified columns
  };

  // Pre-pass in source order: later definitions of an alias win.
  void collect_aliases(const Query& q) {
    if (!q.ctes.empty()) throw EsmParseError("WITH clause");
    collect_aliases(q.body);
    for (const auto& o : q.order_by) collect_aliases(o.expr);
  }
  void collect_aliases(const SetExpr& s) {
    if (!s.is_select()) {
      ++set_ops_;
      collect_aliases(*s.left);
      collect_aliases(*s.right);
      return;
    }
    const SelectCore& c = s.select;
    for (const auto& p : c.projections) {
      if (!p.alias.empty()) throw EsmParseError("column alias " + p.alias);  // legacy: tables only
      collect_aliases(p.expr);
    }
    if (c.from) {
      collect_aliases(c.from->base);
      for (const auto& j : c.from->joins) {
        collect_aliases(j.source);
        if (j.on) collect_aliases(*j.on);
      }
    }
    if (c.where) collect_aliases(*c.where);
    for (const auto& g : c.group_by) collect_aliases(g);
    if (c.having) collect_aliases(*c.having);
  }
  void collect_aliases(const TableSource& t) {
    if (t.derived) {
      collect_aliases(*t.query);
      if (!t.alias.empty()) aliases_[lower(t.alias)] = "";
      return;
    }
    if (t.alias.empty()) return;
    // legacy: an alias must be introduced with AS.
    const std::regex with_as("\\b" + lower(t.name) + "\\s+as\\s+" + lower(t.alias) + "\\b");
    if (t.name_quote == QuoteStyle::kNone && t.alias_quote == QuoteStyle::kNone &&
        !std::regex_search(text_, with_as)) {
      throw EsmParseError("alias without AS: " + t.alias);
    }
    aliases_[lower(t.alias)] = lower(t.name);
  }
  void collect_aliases(const Expr& e) {
    if (e.subquery) collect_aliases(*e.subquery);
    for (const auto& a : e.args) collect_aliases(a);
  }

  std::string column(const Expr& e, const Core& core) {
    if (e.column_quote == QuoteStyle::kDouble) {
      throw EsmParseError("value in column position: " + e.column);  // legacy: all quotes are strings
    }
    std::string table;
    if (!e.table.empty()) {
      const std::string key = lower(e.table);
      const auto it = aliases_.find(key);
      table = it != aliases_.end() ? it->second : key;
      if (table.empty() || !schema_.find_table(table)) throw EsmParseError("unknown table " + e.table);
      const Table& t = schema_.table(table);
      const bool has = std::any_of(t.columns.begin(), t.columns.end(),
                                   [&](const Column& c) { return iequals(c.name, e.column); });
      if (!has) throw EsmParseError("unknown column " + e.table + "." + e.column);
    } else {
      for (const std::string& t : core.tables) {
        const Table& def = schema_.table(t);
        if (std::any_of(def.columns.begin(), def.columns.end(),
                        [&](const Column& c) { return iequals(c.name, e.column); })) {
          table = t;
          break;
        }
      }
      // legacy: derived-table columns are never visible.
      if (table.empty()) throw EsmParseError("unresolved column " + e.column);
    }
    return "__" + table + "." + lower(e.column) + "__";
  }

  static const Expr& unparen(const Expr& e) { return e.kind == ExprKind::kParen ? unparen(e.args[0]) : e; }

  // Column, star, or one aggregate over a column or star.
  std::string col_unit(const Expr& raw, const Core& core) {
    const Expr& e = unparen(raw);
    if (e.kind == ExprKind::kStar) return "__all__";
    if (e.kind == ExprKind::kColumn) return column(e, core);
    if (e.kind == ExprKind::kFunction && kAggregates.count(e.op) && e.args.size() == 1) {
      const bool distinct = e.distinct && flags_.distinct_check;
      return lower(e.op) + "(" + (distinct ? "distinct " : "") + val_unit(e.args[0], core) + ")";
    }
    throw EsmParseError("unsupported expression: " + serialize(e));
  }

  std::string val_unit(const Expr& raw, const Core& core) {
    const Expr& e = unparen(raw);
    if (e.kind == ExprKind::kBinary && kArith.count(e.op)) {
      return col_unit(e.args[0], core) + e.op + col_unit(e.args[1], core);
    }
    return col_unit(e, core);
  }

  std::string value(const Expr& raw, const Core& core) {
    const Expr& e = unparen(raw);
    if (e.kind == ExprKind::kSubquery) return "(" + query(*e.subquery) + ")";
    const bool literal = e.kind == ExprKind::kLiteral ||
                         (e.kind == ExprKind::kUnary && e.op == "-" && unparen(e.args[0]).kind == ExprKind::kLiteral) ||
                         (e.kind == ExprKind::kColumn && e.column_quote == QuoteStyle::kDouble);
    if (literal) {
      if (!flags_.value_check) return "value";
      if (e.kind == ExprKind::kColumn) return "'" + lower(e.column) + "'";  // legacy: "x" is 'x'
      if (e.kind == ExprKind::kUnary) return "-" + lower(unparen(e.args[0]).text);
      if (e.literal == LiteralKind::kNull) return "null";
      return e.literal == LiteralKind::kString ? "'" + lower(e.text) + "'" : e.text;
    }
    return val_unit(e, core);
  }

  struct Conds {
    std::vector<std::string> units;
    std::set<std::string> conj;
    bool has_not = false, has_in = false, has_like = false;
  };

  // legacy: AND/OR trees are flattened, so grouping parentheses vanish.
  void conditions(const Expr& raw, const Core& core, Conds& out, bool negate = false) {
    const Expr& e = unparen(raw);
    if (e.kind == ExprKind::kBinary && (e.op == "AND" || e.op == "OR") && !negate) {
      out.conj.insert(lower(e.op));
      conditions(e.args[0], core, out);
      conditions(e.args[1], core, out);
      return;
    }
    if (e.kind == ExprKind::kUnary && e.op == "NOT") {
      conditions(e.args[0], core, out, !negate);
      return;
    }
    const bool neg = negate != e.negated;
    std::string op, lhs, rhs;
    switch (e.kind) {
      case ExprKind::kBinary:
        if (!kCompare.count(e.op)) throw EsmParseError("unsupported condition: " + serialize(e));
        op = e.op == "<>" ? "!=" : lower(e.op);
        lhs = val_unit(e.args[0], core);
        rhs = value(e.args[1], core);
        out.has_like = out.has_like || op == "like";
        break;
      case ExprKind::kBetween:
        op = "between";
        lhs = val_unit(e.args[0], core);
        rhs = value(e.args[1], core) + " and " + value(e.args[2], core);
        break;
      case ExprKind::kInSubquery:
        op = "in";
        lhs = val_unit(e.args[0], core);
        rhs = "(" + query(*e.subquery) + ")";
        out.has_in = true;
        break;
      case ExprKind::kExists:
        op = "exists";
        rhs = "(" + query(*e.subquery) + ")";
        break;
      case ExprKind::kInList:
        throw EsmParseError("IN with a value list");  // legacy
      default:
        throw EsmParseError("unsupported condition: " + serialize(e));
    }
    out.has_not = out.has_not || neg;
    out.units.push_back(std::string(neg ? "not " : "") + op + "(" + lhs + ";" + rhs + ")");
  }

  std::string table_unit(const TableSource& t) {
    if (t.derived) return "(" + query(*t.query) + ")";
    if (!schema_.find_table(t.name)) throw EsmParseError("unknown table " + t.name);
    return "__" + lower(t.name) + "__";
  }

  std::string core(const SelectCore& c, const std::vector<OrderItem>& order, const std::optional<LimitSpec>& limit,
                   std::set<std::string>& keywords) {
    Core scope;
    std::vector<std::string> tables;
    if (c.from) {
      tables.push_back(table_unit(c.from->base));
      if (!c.from->base.derived) scope.tables.push_back(lower(c.from->base.name));
      for (const auto& j : c.from->joins) {
        tables.push_back(table_unit(j.source));
        if (!j.source.derived) scope.tables.push_back(lower(j.source.name));
      }
      // legacy: ON conditions are parsed for names but never compared.
      for (const auto& j : c.from->joins) {
        if (j.on) {
          Conds ignored;
          conditions(*j.on, scope, ignored);
        }
      }
    }
    std::vector<std::string> select;
    // legacy: DISTINCT on the select list is not recorded.
    for (const auto& p : c.projections) select.push_back(val_unit(p.expr, scope));
    Conds where, having;
    if (c.where) {
      keywords.insert("where");
      conditions(*c.where, scope, where);
    }
    std::vector<std::string> group;
    for (const auto& g : c.group_by) group.push_back(col_unit(g, scope));
    if (!group.empty()) keywords.insert("group");
    if (c.having) {
      keywords.insert("having");
      conditions(*c.having, scope, having);
    }
    std::vector<std::string> ord;
    for (const auto& o : order) ord.push_back(val_unit(o.expr, scope) + (o.desc ? " desc" : " asc"));
    if (!ord.empty()) {
      keywords.insert("order");
      keywords.insert(order[0].desc ? "desc" : "asc");
    }
    if (limit) keywords.insert("limit");  // legacy: the value is dropped
    for (const Conds* cs : {&where, &having}) {
      if (cs->conj.count("or")) keywords.insert("or");
      if (cs->has_not) keywords.insert("not");
      if (cs->has_in) keywords.insert("in");
      if (cs->has_like) keywords.insert("like");
    }
    std::set<std::string> conj = where.conj;
    conj.insert(having.conj.begin(), having.conj.end());
    return "select[" + joined(select, true) + "] from[" + joined(tables, true) + "] where[" + joined(where.units, true) +
           "] conj[" + joined({conj.begin(), conj.end()}, false) + "] group[" + joined(group, true) + "] having[" +
           joined(having.units, true) + "] order[" + joined(ord, false) + "] limit[" + (limit ? "yes" : "no") + "]";
  }

  std::string query(const Query& q) {
    std::set<std::string> keywords;
    std::string out;
    const SetExpr* s = &q.body;
    if (!s->is_select()) {
      // Only one operator exists here; ORDER BY and LIMIT attach to the left side.
      if (!s->left->is_select() || !s->right->is_select()) throw EsmParseError("nested set operator");
      const std::string op = lower(to_string(s->op));
      keywords.insert(op.substr(0, op.find(' ')));
      std::set<std::string> right_keywords;
      const std::string right = core(s->right->select, {}, std::nullopt, right_keywords);
      out = core(s->left->select, q.order_by, q.limit, keywords) + " " + op + "{" + right + " kw[" +
            joined({right_keywords.begin(), right_keywords.end()}, false) + "]}";
    } else {
      out = core(s->select, q.order_by, q.limit, keywords);
    }
    return out + " kw[" + joined({keywords.begin(), keywords.end()}, false) + "]";
  }
};

}  // namespace

std::string esm_signature(const std::string& sql, const Schema& schema, const EsmFlags& flags) {
  return EsmBuilder(schema, flags, sql).run(parse(sql));
}

MetricVerdict esm_match(const std::string& gold, const std::string& pred, const Schema& schema, const EsmFlags& flags) {
  MetricVerdict v;
  v.metric = Metric::kEsm;
  std::string g, p;
  try {
    g = esm_signature(gold, schema, flags);
  } catch (const Error& e) {
    v.outcome = Outcome::kInvalid;
    v.invalid = InvalidKind::kParse;
    v.gold_defect = true;
    v.detail = std::string("gold: ") + e.what();
    return v;
  }
  try {
    p = esm_signature(pred, schema, flags);
  } catch (const Error& e) {
    v.outcome = Outcome::kInvalid;
    v.invalid = InvalidKind::kParse;
    v.detail = std::string("pred: ") + e.what();
    return v;
  }
  v.outcome = g == p ? Outcome::kMatch : Outcome::kMismatch;
  return v;
}

}  // namespace etm
