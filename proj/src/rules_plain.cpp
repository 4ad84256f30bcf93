// Rules 14..26. Rules 17..26 carry no schema assumption; their guards only
// pin down the shape that makes the two sides equal.
#include <algorithm>

#include "rewrite_rules.hpp"

namespace etm::detail {

namespace {

const Table* table_for(const SelectCore& c, const std::string& label, const RuleEnv& env) {
  const TableSource* s = find_source(c, label);
  return s ? env.base_table(*s) : nullptr;
}

bool own_column(const SelectCore& c, const Expr& e, const RuleEnv& env) {
  if (!is_column(e)) return false;
  const Table* t = table_for(c, e.table, env);
  return t && t->find_column(e.column);
}

bool is_null_literal(const Expr& e) { return e.kind == ExprKind::kLiteral && e.literal == LiteralKind::kNull; }

bool has_star(const SelectCore& c) {
  return std::any_of(c.projections.begin(), c.projections.end(),
                     [](const Projection& p) { return p.expr.kind == ExprKind::kStar; });
}

// Labels referenced anywhere in the core except its ON clauses.
std::set<std::string> labels_outside_on(SelectCore& c, std::vector<OrderItem>* order_by) {
  std::set<std::string> out;
  auto add = [&](const Expr& e) {
    for (const std::string& l : referenced_labels(e)) out.insert(l);
  };
  for (const Projection& p : c.projections) add(p.expr);
  if (c.where) add(*c.where);
  for (const Expr& g : c.group_by) add(g);
  if (c.having) add(*c.having);
  if (order_by) {
    for (const OrderItem& o : *order_by) add(o.expr);
  }
  return out;
}

std::vector<OrderItem>* own_order(Query& q, SelectCore* c) {
  return q.body.is_select() && c == &q.body.select ? &q.order_by : nullptr;
}

std::vector<Expr*> condition_exprs(SelectCore& c) {
  std::vector<Expr*> all;
  if (c.where) collect_exprs(*c.where, all);
  if (c.having) collect_exprs(*c.having, all);
  if (c.from) {
    for (JoinItem& j : c.from->joins) {
      if (j.on) collect_exprs(*j.on, all);
    }
  }
  return all;
}

std::vector<Expr*> all_exprs(Query& q, SelectCore& c) {
  std::vector<Expr*> all;
  for_each_slot(c, own_order(q, &c), [&](Expr& e) { collect_exprs(e, all); });
  return all;
}

}  // namespace

bool rule14(Query& q, RuleEnv& env) {
  for (SelectCore* c : cores(q.body)) {
    if (!c->from || c->from->joins.size() != 1 || c->from->joins[0].kind != JoinKind::kInner || has_star(*c)) continue;
    const JoinItem& join = c->from->joins[0];
    if (!join.on) continue;
    const std::vector<Expr> on = split_conjuncts(join.on);
    if (on.size() != 1 || on[0].kind != ExprKind::kBinary || on[0].op != "=") continue;
    const Expr& a = on[0].args[0];
    const Expr& b = on[0].args[1];
    if (!own_column(*c, a, env) || !own_column(*c, b, env) || a.table == b.table) continue;
    for (const auto& [pk, fk] : {std::pair{&a, &b}, std::pair{&b, &a}}) {
      const std::string pk_table = table_of(*c, *pk), fk_table = table_of(*c, *fk);
      if (env.schema().pk_fk_link({pk_table, pk->column}, {fk_table, fk->column}) != LinkDirection::kFirstIsPrimary) {
        continue;
      }
      // Rows of the FK side with a NULL key vanish from the join.
      if (!column_non_null(*c, *fk, env)) continue;
      const std::set<std::string> used = labels_outside_on(*c, own_order(q, c));
      if (used.count(pk->table)) continue;
      std::string list;
      for (const Projection& p : c->projections) {
        if (is_column(p.expr) && p.expr.table == fk->table) list += (list.empty() ? "" : ",") + p.expr.column;
      }
      if (!env.admit({{"t1", pk_table}, {"c1", pk->column}, {"t2", fk_table}, {"c2", fk->column}, {"X", list}})) {
        continue;
      }
      const TableSource keep = *find_source(*c, fk->table);
      c->from = FromClause{keep, {}};
      return true;
    }
  }
  return false;
}

namespace {

struct SubstrCmp {
  const Expr* column;
  std::int64_t start;
  std::int64_t length;
  std::string op;  // SUBSTR(...) op literal
  std::string literal;
};

std::optional<SubstrCmp> substr_compare(const Expr& e) {
  if (e.kind != ExprKind::kBinary || !is_comparator(e.op) || e.op == "!=") return std::nullopt;
  for (int side = 0; side < 2; ++side) {
    const Expr& f = e.args[side];
    const Expr& lit = e.args[1 - side];
    if (f.kind != ExprKind::kFunction || f.op != "SUBSTR" || f.args.size() != 3 || !is_column(f.args[0])) continue;
    if (lit.kind != ExprKind::kLiteral || lit.literal != LiteralKind::kString) continue;
    const auto start = integer_value(f.args[1]);
    const auto length = integer_value(f.args[2]);
    if (!start || !length) continue;
    return SubstrCmp{&f.args[0], *start, *length, side == 0 ? e.op : mirror_op(e.op), lit.text};
  }
  return std::nullopt;
}

}  // namespace

bool rule15(Query& q, RuleEnv& env) {
  for (SelectCore* c : cores(q.body)) {
    std::vector<Expr> parts = split_conjuncts(c->where);
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const auto head = substr_compare(parts[i]);
      if (!head || head->start != 1 || head->op != "=") continue;
      for (std::size_t j = 0; j < parts.size(); ++j) {
        const auto tail = substr_compare(parts[j]);
        if (j == i || !tail || tail->op == "=" || !(*tail->column == *head->column)) continue;
        Bindings b{{"c1", serialize(*head->column)},
                   {"a", std::to_string(head->length)},
                   {"b", std::to_string(tail->start)},
                   {"x", head->literal},
                   {"y", tail->literal}};
        if (!env.admit(std::move(b))) continue;
        Expr merged = Expr::Binary(tail->op, *head->column, Expr::String(head->literal + tail->literal));
        std::vector<Expr> rest;
        for (std::size_t k = 0; k < parts.size(); ++k) {
          if (k != i && k != j) rest.push_back(std::move(parts[k]));
        }
        rest.push_back(std::move(merged));
        c->where = join_conjuncts(std::move(rest));
        return true;
      }
    }
  }
  return false;
}

bool rule16(Query& q, RuleEnv& env) {
  for (SelectCore* c : cores(q.body)) {
    for (Expr* e : condition_exprs(*c)) {
      if (e->kind != ExprKind::kBinary || e->op != "LIKE" || e->negated || !is_column(e->args[0])) continue;
      const Expr& pattern = e->args[1];
      if (pattern.kind != ExprKind::kLiteral || pattern.literal != LiteralKind::kString) continue;
      const std::string& text = pattern.text;
      if (text.size() < 2 || text.back() != '%') continue;
      const std::string prefix = text.substr(0, text.size() - 1);
      // LIKE folds ASCII case and treats % and _ as wildcards; '=' does neither.
      const bool plain = std::none_of(prefix.begin(), prefix.end(), [](char ch) {
        return ch == '%' || ch == '_' || (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z');
      });
      if (!plain) continue;
      const std::size_t n = static_cast<std::size_t>(std::count_if(prefix.begin(), prefix.end(), [](char ch) {
        return (static_cast<unsigned char>(ch) & 0xC0) != 0x80;
      }));
      if (!env.admit({{"c1", serialize(e->args[0])}, {"x", prefix}, {"n", std::to_string(n)}})) continue;
      Expr sub = Expr::Function("SUBSTR", {e->args[0], Expr::Number("1"), Expr::Number(std::to_string(n))});
      *e = Expr::Binary("=", std::move(sub), Expr::String(prefix));
      return true;
    }
  }
  return false;
}

bool rule17(Query& q, RuleEnv& env) {
  for (OrderItem& o : q.order_by) {
    if (o.expr.kind != ExprKind::kFunction || o.expr.op != "JULIANDAY" || o.expr.args.size() != 1) continue;
    if (!env.admit({{"c1", serialize(o.expr.args[0])}})) continue;
    Expr inner = std::move(o.expr.args[0]);
    o.expr = std::move(inner);
    return true;
  }
  return false;
}

namespace {

struct ListMember {
  std::string key;  // serialized column
  const Expr* column;
  std::vector<const Expr*> items;
};

// col = lit (or col != lit when negated), or col [NOT] IN (literals).
std::optional<ListMember> list_member(const Expr& e, bool negated) {
  const auto literal = [](const Expr& x) { return x.kind == ExprKind::kLiteral; };
  if (const auto o = orient(e); o && o->op == (negated ? "!=" : "=") && literal(*o->other)) {
    return ListMember{serialize(*o->column), o->column, {o->other}};
  }
  if (e.kind == ExprKind::kInList && e.negated == negated && is_column(e.args[0]) &&
      std::all_of(e.args.begin() + 1, e.args.end(), literal)) {
    ListMember m{serialize(e.args[0]), &e.args[0], {}};
    for (std::size_t i = 1; i < e.args.size(); ++i) m.items.push_back(&e.args[i]);
    return m;
  }
  return std::nullopt;
}

Expr make_list(const Expr& column, std::vector<const Expr*> items, bool negated) {
  std::vector<std::pair<std::string, const Expr*>> keyed;
  for (const Expr* i : items) keyed.emplace_back(serialize(*i), i);
  std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  keyed.erase(std::unique(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.first == b.first; }),
              keyed.end());
  if (keyed.size() == 1) return Expr::Binary(negated ? "!=" : "=", column, *keyed[0].second);
  Expr e;
  e.kind = ExprKind::kInList;
  e.negated = negated;
  e.args.push_back(column);
  for (const auto& k : keyed) e.args.push_back(*k.second);
  return e;
}

// Merges list members of one chain; returns the rebuilt chain if it differs.
std::optional<Expr> merge_chain(const Expr& chain, const std::string& op, bool negated, std::string* column) {
  const std::vector<Expr> parts = split_chain(chain, op);
  std::vector<std::optional<ListMember>> members;
  std::map<std::string, int> count;
  for (const Expr& p : parts) {
    members.push_back(list_member(p, negated));
    if (members.back()) ++count[members.back()->key];
  }
  std::vector<Expr> rebuilt;
  std::set<std::string> done;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto& m = members[i];
    const bool mergeable = m && (count[m->key] > 1 || parts[i].kind == ExprKind::kInList);
    if (!mergeable) {
      rebuilt.push_back(parts[i]);
      continue;
    }
    if (!done.insert(m->key).second) continue;
    std::vector<const Expr*> items;
    for (std::size_t k = i; k < parts.size(); ++k) {
      if (members[k] && members[k]->key == m->key) items.insert(items.end(), members[k]->items.begin(), members[k]->items.end());
    }
    rebuilt.push_back(make_list(*m->column, items, negated));
    *column = m->key;
  }
  Expr out = join_chain(op, std::move(rebuilt));
  if (serialize(out) == serialize(chain)) return std::nullopt;
  return out;
}

}  // namespace

bool rule18(Query& q, RuleEnv& env) {
  for (SelectCore* c : cores(q.body)) {
    for (Expr* e : condition_exprs(*c)) {
      for (const auto& [op, negated] : {std::pair{std::string("OR"), false}, std::pair{std::string("AND"), true}}) {
        std::string column;
        std::optional<Expr> merged = merge_chain(*e, op, negated, &column);
        if (!merged || !env.admit({{"c1", column}, {"list", serialize(*merged)}})) continue;
        *e = std::move(*merged);
        return true;
      }
    }
  }
  return false;
}

namespace {

void replace_column(Expr& e, const Expr& from, const Expr& to, bool* changed) {
  for_each_column(e, [&](Expr& col) {
    if (col.table == from.table && col.column == from.column) {
      col.table = to.table;
      col.column = to.column;
      *changed = true;
    }
  });
}

}  // namespace

bool rule19(Query& q, RuleEnv& env) {
  for (SelectCore* c : cores(q.body)) {
    if (!c->from || c->from->joins.empty() || has_outer_join(*c)) continue;
    std::vector<Expr> equalities;
    for (const JoinItem& j : c->from->joins) {
      for (Expr& e : split_conjuncts(j.on)) equalities.push_back(std::move(e));
    }
    for (Expr& e : split_conjuncts(c->where)) equalities.push_back(std::move(e));
    for (const Expr& eq : equalities) {
      if (eq.kind != ExprKind::kBinary || eq.op != "=") continue;
      const Expr& a = eq.args[0];
      const Expr& b = eq.args[1];
      if (!own_column(*c, a, env) || !own_column(*c, b, env) || a.table == b.table) continue;
      for (const auto& [pk, fk] : {std::pair{&a, &b}, std::pair{&b, &a}}) {
        const std::string pk_table = table_of(*c, *pk), fk_table = table_of(*c, *fk);
        if (env.schema().pk_fk_link({pk_table, pk->column}, {fk_table, fk->column}) !=
            LinkDirection::kFirstIsPrimary) {
          continue;
        }
        if (!labels_outside_on(*c, own_order(q, c)).count(pk->table)) continue;
        SelectCore trial = *c;
        std::vector<OrderItem> order = own_order(q, c) ? q.order_by : std::vector<OrderItem>{};
        bool changed = false;
        for (Projection& p : trial.projections) replace_column(p.expr, *pk, *fk, &changed);
        std::vector<Expr> where = split_conjuncts(trial.where);
        for (Expr& w : where) {
          if (!(w == eq)) replace_column(w, *pk, *fk, &changed);
        }
        trial.where = join_conjuncts(std::move(where));
        for (Expr& g : trial.group_by) replace_column(g, *pk, *fk, &changed);
        if (trial.having) replace_column(*trial.having, *pk, *fk, &changed);
        for (OrderItem& o : order) replace_column(o.expr, *pk, *fk, &changed);
        if (!changed) continue;
        if (!env.admit({{"t1", pk_table}, {"c1", pk->column}, {"t2", fk_table}, {"c2", fk->column}})) continue;
        *c = std::move(trial);
        if (own_order(q, c)) q.order_by = std::move(order);
        return true;
      }
    }
  }
  return false;
}

bool rule20(Query& q, RuleEnv& env) {
  for (SelectCore* c : cores(q.body)) {
    if (!c->from || !c->from->joins.empty()) continue;
    const Table* outer = env.base_table(c->from->base);
    if (!outer) continue;
    const std::string outer_label = label_of(c->from->base);
    std::vector<Expr> parts = split_conjuncts(c->where);
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const Expr& in = parts[i];
      if (in.kind != ExprKind::kInSubquery || in.negated || !own_column(*c, in.args[0], env)) continue;
      const Query& sub = *in.subquery;
      if (!is_simple_select(sub) || !sub.order_by.empty() || sub.limit) continue;
      const SelectCore& s = sub.body.select;
      if (!s.from || !s.from->joins.empty() || env.base_table(s.from->base) != outer || core_has_aggregate(s)) continue;
      if (s.projections.size() != 1 || !is_column(s.projections[0].expr) ||
          s.projections[0].expr.column != in.args[0].column) {
        continue;
      }
      // Membership by key equals the row's own condition only for a unique, non-null key.
      if (!column_unique(*c, in.args[0], env) || !column_non_null(*c, in.args[0], env)) continue;
      const std::string inner_label = label_of(s.from->base);
      if (s.where) {
        const std::set<std::string> used = referenced_labels(*s.where);
        if (used.size() > 1 || (used.size() == 1 && !used.count(inner_label))) continue;
      }
      if (!env.admit({{"t1", outer->name}, {"c1", in.args[0].column}, {"d1", s.where ? serialize(*s.where) : ""}})) {
        continue;
      }
      std::vector<Expr> rest;
      for (std::size_t k = 0; k < parts.size(); ++k) {
        if (k != i) rest.push_back(parts[k]);
      }
      for (Expr& d : split_conjuncts(s.where)) {
        relabel(d, inner_label, outer_label);
        rest.push_back(std::move(d));
      }
      c->where = join_conjuncts(std::move(rest));
      return true;
    }
  }
  return false;
}

namespace {

// Finds a UNION/INTERSECT node with identical operands. `parent` is the op
// of the enclosing node, kNone at the root.
SetExpr* duplicate_node(SetExpr& s, SetOp parent, SetOp* parent_out) {
  if (s.is_select()) return nullptr;
  if ((s.op == SetOp::kUnion || s.op == SetOp::kIntersect) && *s.left == *s.right) {
    *parent_out = parent;
    return &s;
  }
  if (SetExpr* hit = duplicate_node(*s.left, s.op, parent_out)) return hit;
  return duplicate_node(*s.right, s.op, parent_out);
}

}  // namespace

bool rule21(Query& q, RuleEnv& env) {
  SetOp parent = SetOp::kNone;
  SetExpr* node = duplicate_node(q.body, SetOp::kNone, &parent);
  if (!node) return false;
  if (!env.admit({{"q1", node->left->is_select() ? serialize(node->left->select) : "compound"}})) return false;
  SetExpr kept = std::move(*node->left);
  // Only a root or a UNION ALL operand loses the implicit duplicate removal.
  if (kept.is_select() && (parent == SetOp::kNone || parent == SetOp::kUnionAll)) kept.select.distinct = true;
  *node = std::move(kept);
  if (q.body.is_select()) {
    for (OrderItem& o : q.order_by) {
      const auto pos = integer_value(o.expr);
      if (pos && *pos >= 1 && static_cast<std::size_t>(*pos) <= q.body.select.projections.size()) {
        o.expr = q.body.select.projections[static_cast<std::size_t>(*pos - 1)].expr;
      }
    }
  }
  return true;
}

bool rule22(Query& q, RuleEnv& env) {
  for (SelectCore* c : cores(q.body)) {
    for (Expr* e : all_exprs(q, *c)) {
      if (e->kind != ExprKind::kBetween) continue;
      if (!env.admit({{"c1", serialize(e->args[0])}, {"x", serialize(e->args[1])}, {"y", serialize(e->args[2])}})) {
        continue;
      }
      Expr t = e->args[0], lo = e->args[1], hi = e->args[2];
      if (e->negated) {
        *e = Expr::Binary("OR", Expr::Binary("<", t, std::move(lo)), Expr::Binary(">", t, std::move(hi)));
      } else {
        *e = Expr::Binary("AND", Expr::Binary(">=", t, std::move(lo)), Expr::Binary("<=", t, std::move(hi)));
      }
      return true;
    }
  }
  return false;
}

namespace {

std::string inverse_op(const std::string& op) {
  if (op == "=") return "!=";
  if (op == "!=") return "=";
  if (op == "<") return ">=";
  if (op == ">=") return "<";
  if (op == ">") return "<=";
  return ">";  // "<="
}

bool is_predicate(const Expr& e) {
  switch (e.kind) {
    case ExprKind::kBetween:
    case ExprKind::kInList:
    case ExprKind::kInSubquery:
    case ExprKind::kExists:
      return true;
    case ExprKind::kBinary:
      return is_comparator(e.op) || e.op == "LIKE" || e.op == "IS";
    case ExprKind::kUnary:
      return e.op == "NOT" && is_predicate(e.args[0]);
    default:
      return false;
  }
}

}  // namespace

bool rule23(Query& q, RuleEnv& env) {
  for (SelectCore* c : cores(q.body)) {
    for (Expr* e : all_exprs(q, *c)) {
      if (e->kind != ExprKind::kUnary || e->op != "NOT" || !is_predicate(e->args[0])) continue;
      if (!env.admit({{"d1", serialize(e->args[0])}})) continue;
      Expr inner = std::move(e->args[0]);
      if (inner.kind == ExprKind::kUnary) {
        Expr twice = std::move(inner.args[0]);
        *e = std::move(twice);
      } else if (inner.kind == ExprKind::kBinary && is_comparator(inner.op)) {
        inner.op = inverse_op(inner.op);
        *e = std::move(inner);
      } else {
        inner.negated = !inner.negated;
        *e = std::move(inner);
      }
      return true;
    }
  }
  return false;
}

bool rule24(Query& q, RuleEnv& env) {
  for (SelectCore* c : cores(q.body)) {
    for (Expr* e : all_exprs(q, *c)) {
      if (e->kind != ExprKind::kFunction || e->op != "IIF" || e->args.size() != 3) continue;
      if (!env.admit({{"d1", serialize(e->args[0])}})) continue;
      Expr cs;
      cs.kind = ExprKind::kCase;
      cs.case_else = true;
      cs.args = std::move(e->args);
      *e = std::move(cs);
      return true;
    }
  }
  return false;
}

bool rule25(Query& q, RuleEnv& env) {
  for (SelectCore* c : cores(q.body)) {
    if (!c->from || c->from->joins.size() != 1 || c->from->joins[0].kind != JoinKind::kLeft) continue;
    const TableSource& left = c->from->base;
    const TableSource& right = c->from->joins[0].source;
    if (!env.base_table(left) || !env.base_table(right)) continue;
    const std::vector<Expr> on = split_conjuncts(c->from->joins[0].on);
    if (on.size() != 1 || on[0].kind != ExprKind::kBinary || on[0].op != "=") continue;
    const std::string l = label_of(left), r = label_of(right);
    const Expr* c1 = nullptr;
    const Expr* c2 = nullptr;
    for (int side = 0; side < 2; ++side) {
      if (is_column(on[0].args[side]) && on[0].args[side].table == l && is_column(on[0].args[1 - side]) &&
          on[0].args[1 - side].table == r) {
        c1 = &on[0].args[side];
        c2 = &on[0].args[1 - side];
      }
    }
    if (!c1 || !column_non_null(*c, *c1, env) || !column_non_null(*c, *c2, env)) continue;
    std::vector<Expr> parts = split_conjuncts(c->where);
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const Expr& test = parts[i];
      if (test.kind != ExprKind::kBinary || test.op != "IS" || test.negated) continue;
      const Expr* tested = is_null_literal(test.args[1]) ? &test.args[0]
                           : is_null_literal(test.args[0]) ? &test.args[1]
                                                            : nullptr;
      // NULL there must mean "no partner row".
      if (!tested || !is_column(*tested) || tested->table != r || !column_non_null(*c, *tested, env)) continue;
      std::vector<Expr> rest;
      for (std::size_t k = 0; k < parts.size(); ++k) {
        if (k != i) rest.push_back(parts[k]);
      }
      SelectCore probe = *c;
      probe.where = join_conjuncts(rest);
      if (has_star(probe) || labels_outside_on(probe, own_order(q, c)).count(r)) continue;
      if (!env.admit({{"t1", left.name}, {"c1", c1->column}, {"t2", right.name}, {"c2", c2->column}})) continue;

      SelectCore sub;
      sub.projections.push_back({*c2, {}});
      sub.from = FromClause{right, {}};
      Expr anti;
      anti.kind = ExprKind::kInSubquery;
      anti.negated = true;
      anti.args.push_back(*c1);
      anti.subquery = Box<Query>(single(std::move(sub)));
      rest.push_back(std::move(anti));
      c->from->joins.clear();
      c->where = join_conjuncts(std::move(rest));
      return true;
    }
  }
  return false;
}

namespace {

void each_source(Query& q, const std::function<void(TableSource&)>& fn);

void each_source(Expr& e, const std::function<void(TableSource&)>& fn) {
  for (Expr& a : e.args) each_source(a, fn);
  if (e.subquery) each_source(*e.subquery, fn);
}

void each_source(SetExpr& s, const std::function<void(TableSource&)>& fn) {
  for (SelectCore* c : cores(s)) {
    if (c->from) {
      std::vector<TableSource*> srcs{&c->from->base};
      for (JoinItem& j : c->from->joins) srcs.push_back(&j.source);
      for (TableSource* t : srcs) {
        fn(*t);
        if (t->derived) each_source(*t->query, fn);
      }
    }
    for_each_slot(*c, nullptr, [&](Expr& e) { each_source(e, fn); });
  }
}

void each_source(Query& q, const std::function<void(TableSource&)>& fn) {
  for (Cte& c : q.ctes) each_source(c.query, fn);
  each_source(q.body, fn);
  for (OrderItem& o : q.order_by) each_source(o.expr, fn);
}

bool defines_cte(Query& q, const std::string& name) {
  bool found = false;
  std::function<void(Query&)> walk = [&](Query& sub) {
    for (Cte& c : sub.ctes) found = found || c.name == name;
  };
  each_source(q, [&](TableSource& t) {
    if (t.derived) walk(*t.query);
  });
  return found;
}

}  // namespace

bool rule26(Query& q, RuleEnv& env) {
  for (std::size_t i = 0; i < q.ctes.size(); ++i) {
    const std::string name = q.ctes[i].name;
    int uses = 0;
    for (std::size_t k = 0; k < q.ctes.size(); ++k) {
      each_source(q.ctes[k].query, [&](TableSource& t) { uses += !t.derived && t.name == name; });
    }
    // Self references or a shadowing definition deeper down: leave it alone.
    int self = 0;
    each_source(q.ctes[i].query, [&](TableSource& t) { self += !t.derived && t.name == name; });
    if (self > 0 || defines_cte(q, name)) continue;
    each_source(q.body, [&](TableSource& t) { uses += !t.derived && t.name == name; });
    for (OrderItem& o : q.order_by) each_source(o.expr, [&](TableSource& t) { uses += !t.derived && t.name == name; });
    if (uses > 1) continue;
    if (!env.admit({{"q", name}})) continue;
    Cte cte = std::move(q.ctes[i]);
    q.ctes.erase(q.ctes.begin() + static_cast<std::ptrdiff_t>(i));
    bool done = false;
    each_source(q, [&](TableSource& t) {
      if (done || t.derived || t.name != name) return;
      const std::string alias = t.alias.empty() ? name : t.alias;
      t = TableSource::Derived(cte.query, alias);
      done = true;
    });
    return true;
  }
  return false;
}

}  // namespace etm::detail
