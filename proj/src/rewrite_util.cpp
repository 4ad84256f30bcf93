#include <algorithm>

#include "etm/errors.hpp"
#include "rewrite_internal.hpp"

namespace etm::detail {

std::string label_of(const TableSource& source) { return source.alias.empty() ? source.name : source.alias; }

std::vector<const TableSource*> sources(const SelectCore& core) {
  std::vector<const TableSource*> out;
  if (!core.from) return out;
  out.push_back(&core.from->base);
  for (const JoinItem& j : core.from->joins) out.push_back(&j.source);
  return out;
}

const TableSource* find_source(const SelectCore& core, const std::string& label) {
  for (const TableSource* s : sources(core)) {
    if (label_of(*s) == label) return s;
  }
  return nullptr;
}

bool has_outer_join(const SelectCore& core) {
  if (!core.from) return false;
  return std::any_of(core.from->joins.begin(), core.from->joins.end(), [](const JoinItem& j) {
    return j.kind == JoinKind::kLeft || j.kind == JoinKind::kRight || j.kind == JoinKind::kFull;
  });
}

bool is_simple_select(const Query& q) { return q.ctes.empty() && q.body.is_select(); }

bool is_column(const Expr& e) { return e.kind == ExprKind::kColumn; }

bool is_aggregate_call(const Expr& e) {
  if (e.kind != ExprKind::kFunction) return false;
  if (e.op == "COUNT" || e.op == "SUM" || e.op == "AVG" || e.op == "TOTAL" || e.op == "GROUP_CONCAT") return true;
  return (e.op == "MIN" || e.op == "MAX") && e.args.size() == 1;
}

bool contains_aggregate(const Expr& e) {
  if (is_aggregate_call(e)) return true;
  return std::any_of(e.args.begin(), e.args.end(), [](const Expr& a) { return contains_aggregate(a); });
}

bool contains_subquery(const Expr& e) {
  if (e.subquery) return true;
  return std::any_of(e.args.begin(), e.args.end(), [](const Expr& a) { return contains_subquery(a); });
}

bool core_has_aggregate(const SelectCore& core) {
  if (core.having || !core.group_by.empty()) return true;
  return std::any_of(core.projections.begin(), core.projections.end(),
                     [](const Projection& p) { return contains_aggregate(p.expr); });
}

std::optional<std::int64_t> integer_value(const Expr& e) {
  if (e.kind != ExprKind::kLiteral || e.literal != LiteralKind::kNumber) return std::nullopt;
  if (e.text.empty() || !std::all_of(e.text.begin(), e.text.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    return std::nullopt;
  }
  try {
    return std::stoll(e.text);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::vector<Expr> split_chain(const Expr& e, const std::string& op) {
  if (e.kind == ExprKind::kBinary && e.op == op) {
    std::vector<Expr> out = split_chain(e.args[0], op);
    std::vector<Expr> rest = split_chain(e.args[1], op);
    out.insert(out.end(), rest.begin(), rest.end());
    return out;
  }
  if (e.kind == ExprKind::kParen) return split_chain(e.args[0], op);
  return {e};
}

Expr join_chain(const std::string& op, std::vector<Expr> parts) {
  Expr out = std::move(parts.at(0));
  for (std::size_t i = 1; i < parts.size(); ++i) out = Expr::Binary(op, std::move(out), std::move(parts[i]));
  return out;
}

std::vector<Expr> split_conjuncts(const std::optional<Expr>& e) {
  if (!e) return {};
  return split_chain(*e, "AND");
}

std::optional<Expr> join_conjuncts(std::vector<Expr> parts) {
  if (parts.empty()) return std::nullopt;
  return join_chain("AND", std::move(parts));
}

void for_each_slot(SelectCore& core, std::vector<OrderItem>* order_by, const std::function<void(Expr&)>& fn) {
  for (Projection& p : core.projections) fn(p.expr);
  if (core.from) {
    for (JoinItem& j : core.from->joins) {
      if (j.on) fn(*j.on);
    }
  }
  if (core.where) fn(*core.where);
  for (Expr& g : core.group_by) fn(g);
  if (core.having) fn(*core.having);
  if (order_by) {
    for (OrderItem& o : *order_by) fn(o.expr);
  }
}

namespace {

using ColumnFn = std::function<void(Expr&)>;

void walk(Query& q, const ColumnFn& fn);

void walk(Expr& e, const ColumnFn& fn) {
  if (e.kind == ExprKind::kColumn) fn(e);
  for (Expr& a : e.args) walk(a, fn);
  if (e.subquery) walk(*e.subquery, fn);
}

void walk(SetExpr& s, const ColumnFn& fn) {
  if (!s.is_select()) {
    walk(*s.left, fn);
    walk(*s.right, fn);
    return;
  }
  SelectCore& core = s.select;
  if (core.from) {
    if (core.from->base.derived) walk(*core.from->base.query, fn);
    for (JoinItem& j : core.from->joins) {
      if (j.source.derived) walk(*j.source.query, fn);
    }
  }
  for_each_slot(core, nullptr, [&](Expr& e) { walk(e, fn); });
}

void walk(Query& q, const ColumnFn& fn) {
  for (Cte& c : q.ctes) walk(c.query, fn);
  walk(q.body, fn);
  for (OrderItem& o : q.order_by) walk(o.expr, fn);
}

}  // namespace

// The const overloads reuse the mutable walk; the callback cannot write.
void for_each_column(const Expr& e, const std::function<void(const Expr&)>& fn) {
  walk(const_cast<Expr&>(e), [&](Expr& c) { fn(c); });
}
void for_each_column(Expr& e, const std::function<void(Expr&)>& fn) { walk(e, fn); }
void for_each_column(Query& q, const std::function<void(Expr&)>& fn) { walk(q, fn); }
void for_each_column(const Query& q, const std::function<void(const Expr&)>& fn) {
  walk(const_cast<Query&>(q), [&](Expr& c) { fn(c); });
}

std::set<std::string> referenced_labels(const Expr& e) {
  std::set<std::string> out;
  for_each_column(e, [&](const Expr& c) { out.insert(c.table); });
  return out;
}

std::set<std::string> referenced_labels(const Query& q) {
  std::set<std::string> out;
  for_each_column(q, [&](const Expr& c) { out.insert(c.table); });
  return out;
}

void relabel(Expr& e, const std::string& from, const std::string& to) {
  for_each_column(e, [&](Expr& c) {
    if (c.table == from) c.table = to;
  });
}

void relabel(Query& q, const std::string& from, const std::string& to) {
  for_each_column(q, [&](Expr& c) {
    if (c.table == from) c.table = to;
  });
}

bool is_comparator(const std::string& op) {
  return op == "=" || op == "!=" || op == "<" || op == ">" || op == "<=" || op == ">=";
}

std::string mirror_op(const std::string& op) {
  if (op == "<") return ">";
  if (op == ">") return "<";
  if (op == "<=") return ">=";
  if (op == ">=") return "<=";
  return op;
}

std::optional<Oriented> orient(const Expr& e) {
  if (e.kind != ExprKind::kBinary || !is_comparator(e.op)) return std::nullopt;
  if (is_column(e.args[0])) return Oriented{&e.args[0], e.op, &e.args[1]};
  if (is_column(e.args[1])) return Oriented{&e.args[1], mirror_op(e.op), &e.args[0]};
  return std::nullopt;
}

std::string table_of(const SelectCore& core, const Expr& col) {
  const TableSource* s = find_source(core, col.table);
  return s && !s->derived ? s->name : std::string();
}

bool column_unique(const SelectCore& core, const Expr& col, const RuleEnv& env) {
  const TableSource* s = find_source(core, col.table);
  const Table* t = s ? env.base_table(*s) : nullptr;
  return t && t->find_column(col.column) && env.schema().is_unique(t->name, col.column);
}

bool column_non_null(const SelectCore& core, const Expr& col, const RuleEnv& env) {
  const TableSource* s = find_source(core, col.table);
  const Table* t = s ? env.base_table(*s) : nullptr;
  return t && t->find_column(col.column) && env.schema().is_non_null(t->name, col.column);
}

Query single(SelectCore core) {
  Query q;
  q.body.select = std::move(core);
  return q;
}

}  // namespace etm::detail

#include "rewrite_rules.hpp"

namespace etm::detail {

std::vector<SelectCore*> cores(SetExpr& s) {
  if (s.is_select()) return {&s.select};
  std::vector<SelectCore*> out = cores(*s.left);
  for (SelectCore* c : cores(*s.right)) out.push_back(c);
  return out;
}

void collect_exprs(Expr& e, std::vector<Expr*>& out) {
  out.push_back(&e);
  for (Expr& a : e.args) collect_exprs(a, out);
}

const std::vector<RuleFn>& rule_functions() {
  static const std::vector<RuleFn> fns = {
      nullptr, rule1,  rule2,  rule3,  rule4,  rule5,  rule6,  rule7,  rule8,  rule9,  rule10, rule11, rule12, rule13,
      rule14,  rule15, rule16, rule17, rule18, rule19, rule20, rule21, rule22, rule23, rule24, rule25, rule26,
  };
  return fns;
}

}  // namespace etm::detail
