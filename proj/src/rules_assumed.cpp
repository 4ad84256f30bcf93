// Rules 1..13. Every rule inspects one normalized query node, calls
// env.admit() for a candidate match and rewrites only when it returns true.
// Guards beyond the assumption column keep each rewrite semantics-preserving.
#include <algorithm>

#include "rewrite_rules.hpp"

namespace etm::detail {

namespace {

Expr in_subquery(Expr target, Query sub, bool negated) {
  Expr e;
  e.kind = ExprKind::kInSubquery;
  e.args.push_back(std::move(target));
  e.subquery = Box<Query>(std::move(sub));
  e.negated = negated;
  return e;
}

// Positional ORDER BY terms of a compound become the projection they name.
void resolve_positions(Query& q) {
  const SelectCore& core = q.body.select;
  for (OrderItem& o : q.order_by) {
    const auto pos = integer_value(o.expr);
    if (pos && *pos >= 1 && static_cast<std::size_t>(*pos) <= core.projections.size()) {
      o.expr = core.projections[static_cast<std::size_t>(*pos - 1)].expr;
    }
  }
}

// Single named schema table, no joins.
const Table* lone_table(const SelectCore& c, const RuleEnv& env) {
  if (!c.from || !c.from->joins.empty()) return nullptr;
  return env.base_table(c.from->base);
}

bool is_own_column(const SelectCore& c, const Expr& e, const RuleEnv& env) {
  if (!is_column(e)) return false;
  const TableSource* s = find_source(c, e.table);
  const Table* t = s ? env.base_table(*s) : nullptr;
  return t && t->find_column(e.column);
}

Bindings tc(const SelectCore& c, const Expr& col) { return {{"t1", table_of(c, col)}, {"c1", col.column}}; }

}  // namespace

bool rule1(Query& q, RuleEnv& env) {
  if (!is_simple_select(q) || q.order_by.size() != 1 || !q.limit || q.limit->count != 1 || q.limit->offset) return false;
  SelectCore& c = q.body.select;
  const Expr& key = q.order_by[0].expr;
  if (!lone_table(c, env) || c.where || core_has_aggregate(c) || !is_own_column(c, key, env)) return false;
  if (!column_non_null(c, key, env)) return false;
  // A list holding only the key itself is rule 10's shape.
  const bool only_key = std::all_of(c.projections.begin(), c.projections.end(),
                                    [&](const Projection& p) { return p.expr == key; });
  if (only_key) return false;
  if (!env.admit(tc(c, key))) return false;

  const std::string name = c.from->base.name;
  SelectCore inner;
  inner.projections.push_back({Expr::Function(q.order_by[0].desc ? "MAX" : "MIN", {Expr::Column(name, key.column)}), {}});
  inner.from = FromClause{TableSource::Named(name), {}};
  c.where = Expr::Binary("=", key, Expr::ScalarSubquery(single(std::move(inner))));
  q.order_by.clear();
  q.limit.reset();
  return true;
}

bool rule2(Query& q, RuleEnv& env) {
  for (SelectCore* c : cores(q.body)) {
    if (!c->distinct || !lone_table(*c, env) || core_has_aggregate(*c)) continue;
    const Expr* pick = nullptr;
    for (const Projection& p : c->projections) {
      if (!is_own_column(*c, p.expr, env) || !column_non_null(*c, p.expr, env)) continue;
      if (!pick || (column_unique(*c, p.expr, env) && !column_unique(*c, *pick, env))) pick = &p.expr;
    }
    if (!pick || !env.admit(tc(*c, *pick))) continue;
    c->distinct = false;
    return true;
  }
  return false;
}

bool rule3(Query& q, RuleEnv& env) {
  SetExpr& body = q.body;
  if ((body.op != SetOp::kUnion && body.op != SetOp::kIntersect) || !body.left->is_select() ||
      !body.right->is_select()) {
    return false;
  }
  SelectCore& l = body.left->select;
  SelectCore& r = body.right->select;
  const Table* lt = lone_table(l, env);
  const Table* rt = lone_table(r, env);
  if (!lt || lt != rt || !l.where || !r.where || core_has_aggregate(l) || core_has_aggregate(r)) return false;
  if (l.projections.size() != 1 || r.projections.size() != 1) return false;
  const Expr& lc = l.projections[0].expr;
  const Expr& rc = r.projections[0].expr;
  if (!is_own_column(l, lc, env) || !is_own_column(r, rc, env) || lc.column != rc.column) return false;
  if (!column_non_null(l, lc, env) || !env.admit(tc(l, lc))) return false;

  Expr right_cond = *r.where;
  relabel(right_cond, label_of(r.from->base), label_of(l.from->base));
  SelectCore merged = std::move(l);
  merged.where = Expr::Binary(body.op == SetOp::kUnion ? "OR" : "AND", std::move(*merged.where), std::move(right_cond));
  merged.distinct = false;
  q.body = SetExpr{};
  q.body.select = std::move(merged);
  resolve_positions(q);
  return true;
}

bool rule4(Query& q, RuleEnv& env) {
  for (SelectCore* c : cores(q.body)) {
    if (c->group_by.size() < 2 || !lone_table(*c, env)) continue;
    if (std::any_of(c->group_by.begin(), c->group_by.end(), [](const Expr& g) { return contains_subquery(g); })) continue;
    const Expr* pick = nullptr;
    for (const Expr& g : c->group_by) {
      if (!is_own_column(*c, g, env) || !column_non_null(*c, g, env)) continue;
      const bool better = !pick || (column_unique(*c, g, env) && !column_unique(*c, *pick, env));
      if (better) pick = &g;
    }
    if (!pick || !env.admit(tc(*c, *pick))) continue;
    Expr keep = *pick;
    c->group_by = {std::move(keep)};
    return true;
  }
  return false;
}

bool rule5(Query& q, RuleEnv& env) {
  SetExpr& body = q.body;
  if (body.op != SetOp::kExcept || !body.left->is_select() || !body.right->is_select()) return false;
  SelectCore& l = body.left->select;
  const SelectCore& r = body.right->select;
  if (!lone_table(l, env) || core_has_aggregate(l) || l.projections.size() != 1) return false;
  const Expr& lc = l.projections[0].expr;
  if (!is_own_column(l, lc, env)) return false;
  // NOT IN turns false everywhere once the right side yields a NULL.
  if (r.projections.size() != 1 || has_outer_join(r) || !is_own_column(r, r.projections[0].expr, env) ||
      !column_non_null(r, r.projections[0].expr, env)) {
    return false;
  }
  if (!env.admit(tc(l, lc))) return false;

  Expr cond = in_subquery(lc, single(r), true);
  SelectCore merged = std::move(l);
  merged.where = merged.where ? Expr::Binary("AND", std::move(*merged.where), std::move(cond)) : std::move(cond);
  merged.distinct = false;
  q.body = SetExpr{};
  q.body.select = std::move(merged);
  resolve_positions(q);
  return true;
}

namespace {

// Calls try_one on each sub-expression of every slot of every core in q
// (not inside subqueries) until it reports a rewrite.
bool scan_slots(Query& q, RuleEnv& env, bool with_order_by,
                const std::function<bool(SelectCore&, Expr&)>& try_one) {
  std::vector<OrderItem>* order = with_order_by && q.body.is_select() ? &q.order_by : nullptr;
  for (SelectCore* c : cores(q.body)) {
    std::vector<Expr*> all;
    for_each_slot(*c, c == &q.body.select ? order : nullptr, [&](Expr& e) { collect_exprs(e, all); });
    for (Expr* e : all) {
      if (try_one(*c, *e)) return true;
    }
  }
  (void)env;
  return false;
}

}  // namespace

bool rule6(Query& q, RuleEnv& env) {
  return scan_slots(q, env, true, [&](SelectCore& c, Expr& e) {
    if (e.kind != ExprKind::kFunction || e.op != "COUNT" || e.distinct || e.args.size() != 1) return false;
    if (has_outer_join(c) || !is_own_column(c, e.args[0], env)) return false;
    if (!env.admit(tc(c, e.args[0]))) return false;
    e.args[0] = Expr::Star();
    return true;
  });
}

namespace {

const Expr* is_not_null_target(const Expr& e) {
  if (e.kind != ExprKind::kBinary || e.op != "IS" || !e.negated) return nullptr;
  const auto null = [](const Expr& x) { return x.kind == ExprKind::kLiteral && x.literal == LiteralKind::kNull; };
  if (null(e.args[1])) return &e.args[0];
  if (null(e.args[0])) return &e.args[1];
  return nullptr;
}

}  // namespace

bool rule7(Query& q, RuleEnv& env) {
  for (SelectCore* c : cores(q.body)) {
    if (has_outer_join(*c)) continue;
    std::vector<Expr> parts = split_conjuncts(c->where);
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const Expr* target = is_not_null_target(parts[i]);
      if (!target || !is_own_column(*c, *target, env) || !env.admit(tc(*c, *target))) continue;
      parts.erase(parts.begin() + static_cast<std::ptrdiff_t>(i));
      c->where = join_conjuncts(std::move(parts));
      return true;
    }
  }
  return false;
}

bool rule8(Query& q, RuleEnv& env) {
  return scan_slots(q, env, true, [&](SelectCore& c, Expr& e) {
    if (e.kind != ExprKind::kBinary || e.op != "/" || has_outer_join(c)) return false;
    const Expr& cast = e.args[0];
    const Expr& count = e.args[1];
    const bool float_cast = cast.kind == ExprKind::kFunction && cast.op == "CAST" &&
                            (cast.text == "FLOAT" || cast.text == "REAL" || cast.text == "DOUBLE" ||
                             cast.text == "DOUBLE PRECISION");
    if (!float_cast) return false;
    const Expr& sum = cast.args[0];
    if (sum.kind != ExprKind::kFunction || sum.op != "SUM" || sum.distinct || sum.args.size() != 1 ||
        !is_own_column(c, sum.args[0], env)) {
      return false;
    }
    if (count.kind != ExprKind::kFunction || count.op != "COUNT" || count.distinct || count.args.size() != 1 ||
        count.args[0].kind != ExprKind::kStar) {
      return false;
    }
    if (!env.admit(tc(c, sum.args[0]))) return false;
    Expr avg = Expr::Function("AVG", {sum.args[0]});
    e = std::move(avg);
    return true;
  });
}

bool rule9(Query& q, RuleEnv& env) {
  return scan_slots(q, env, true, [&](SelectCore& c, Expr& e) {
    if (e.kind != ExprKind::kFunction || e.op != "COUNT" || e.distinct || e.args.size() != 1) return false;
    const Expr& cs = e.args[0];
    if (cs.kind != ExprKind::kCase || cs.case_operand) return false;
    const std::size_t arms = cs.args.size() - (cs.case_else ? 1 : 0);
    if (arms != 2) return false;
    if (cs.case_else) {
      const Expr& otherwise = cs.args.back();
      if (otherwise.kind != ExprKind::kLiteral || otherwise.literal != LiteralKind::kNull) return false;
    }
    const Expr& then = cs.args[1];
    const bool then_one = integer_value(then) == 1 && then.text == "1";
    if (!then_one && !is_own_column(c, then, env)) return false;
    // COUNT of nothing is 0 but SUM of nothing is NULL: every group must be non-empty.
    if (c.group_by.empty()) {
      const Table* t = lone_table(c, env);
      if (!t || c.where || !env.db()) return false;
      const auto rows = env.db()->row_count(t->name);
      if (!rows || *rows == 0) return false;
    }
    Bindings b;
    if (then_one) {
      b["t1"] = c.from ? label_of(c.from->base) : "";
    } else {
      b = tc(c, then);
    }
    b["d1"] = serialize(cs.args[0]);
    if (!env.admit(std::move(b))) return false;
    Expr when = cs.args[0];
    Expr rebuilt;
    rebuilt.kind = ExprKind::kCase;
    rebuilt.case_else = true;
    rebuilt.args = {std::move(when), Expr::Number("1"), Expr::Number("0")};
    e = Expr::Function("SUM", {std::move(rebuilt)});
    return true;
  });
}

bool rule10(Query& q, RuleEnv& env) {
  if (!is_simple_select(q) || q.order_by.size() != 1 || !q.limit || q.limit->count != 1 || q.limit->offset) return false;
  SelectCore& c = q.body.select;
  const Expr key = q.order_by[0].expr;
  const bool desc = q.order_by[0].desc;
  if (!lone_table(c, env) || c.where || c.distinct || core_has_aggregate(c) || !is_own_column(c, key, env)) {
    return false;
  }
  bool projected = false, extra = false;
  for (const Projection& p : c.projections) {
    if (p.expr == key) {
      projected = true;
    } else {
      extra = true;
    }
  }
  if (!projected) return false;
  // ASC puts NULLs first, MIN skips them.
  if (!desc && !column_non_null(c, key, env)) return false;
  // Other columns are read from the extreme row; ties would make it arbitrary.
  if (extra && !column_unique(c, key, env)) return false;
  if (!env.admit({{"t1", table_of(c, key)}, {"c1", key.column}})) return false;
  for (Projection& p : c.projections) {
    if (p.expr == key) p.expr = Expr::Function(desc ? "MAX" : "MIN", {key});
  }
  q.order_by.clear();
  q.limit.reset();
  return true;
}

bool rule11(Query& q, RuleEnv& env) {
  for (SelectCore* c : cores(q.body)) {
    for (std::size_t i = 0; i < c->projections.size(); ++i) {
      const Expr& star = c->projections[i].expr;
      if (star.kind != ExprKind::kStar) continue;
      std::vector<const TableSource*> targets;
      if (star.table.empty()) {
        targets = sources(*c);
      } else if (const TableSource* s = find_source(*c, star.table)) {
        targets.push_back(s);
      }
      const bool all_base = !targets.empty() && std::all_of(targets.begin(), targets.end(), [&](const TableSource* s) {
        return env.base_table(*s) != nullptr;
      });
      if (!all_base) continue;
      std::vector<Projection> expanded;
      bool ok = true;
      for (const TableSource* s : targets) {
        const Table* t = env.base_table(*s);
        std::string list;
        for (const Column& col : t->columns) {
          expanded.push_back({Expr::Column(label_of(*s), lower(col.name)), {}});
          list += (list.empty() ? "" : ",") + lower(col.name);
        }
        ok = ok && env.admit({{"t1", t->name}, {"X", list}});
      }
      if (!ok) continue;
      c->projections.erase(c->projections.begin() + static_cast<std::ptrdiff_t>(i));
      c->projections.insert(c->projections.begin() + static_cast<std::ptrdiff_t>(i), expanded.begin(), expanded.end());
      return true;
    }
  }
  return false;
}

namespace {

bool integer_like(const std::string& s) {
  const std::size_t start = s.size() > 1 && s[0] == '-' ? 1 : 0;
  return s.size() > start && std::all_of(s.begin() + static_cast<std::ptrdiff_t>(start), s.end(), [](char ch) {
           return ch >= '0' && ch <= '9';
         });
}

bool blob_affinity(const std::string& declared) {
  const std::string t = lower(declared);
  if (t.find("int") != std::string::npos) return false;
  if (t.find("char") != std::string::npos || t.find("clob") != std::string::npos ||
      t.find("text") != std::string::npos) {
    return false;
  }
  return t.empty() || t.find("blob") != std::string::npos;
}

bool typed_column(const SelectCore& c, const Expr& col, const RuleEnv& env) {
  if (!is_own_column(c, col, env)) return false;
  const Table* t = env.base_table(*find_source(c, col.table));
  return !blob_affinity(t->find_column(col.column)->declared_type);
}

bool quoted_integer(const Expr& e) {
  return e.kind == ExprKind::kLiteral && e.literal == LiteralKind::kString && integer_like(e.text);
}

}  // namespace

bool rule12(Query& q, RuleEnv& env) {
  for (SelectCore* c : cores(q.body)) {
    std::vector<Expr*> all;
    if (c->where) collect_exprs(*c->where, all);
    if (c->having) collect_exprs(*c->having, all);
    if (c->from) {
      for (JoinItem& j : c->from->joins) {
        if (j.on) collect_exprs(*j.on, all);
      }
    }
    for (Expr* e : all) {
      std::vector<Expr*> literals;
      if (e->kind == ExprKind::kBinary && e->op == "=") {
        for (int side = 0; side < 2; ++side) {
          if (quoted_integer(e->args[side]) && typed_column(*c, e->args[1 - side], env)) {
            literals.push_back(&e->args[side]);
          }
        }
      } else if (e->kind == ExprKind::kInList && typed_column(*c, e->args[0], env)) {
        for (std::size_t i = 1; i < e->args.size(); ++i) {
          if (quoted_integer(e->args[i])) literals.push_back(&e->args[i]);
        }
      }
      for (Expr* lit : literals) {
        if (!env.admit({{"x", lit->text}})) continue;
        *lit = Expr::Number(lit->text);
        return true;
      }
    }
  }
  return false;
}

bool rule13(Query& q, RuleEnv& env) {
  for (SelectCore* c : cores(q.body)) {
    const Table* outer = lone_table(*c, env);
    if (!outer) continue;
    if (std::any_of(c->projections.begin(), c->projections.end(),
                    [](const Projection& p) { return p.expr.kind == ExprKind::kStar; })) {
      continue;
    }
    std::vector<Expr> parts = split_conjuncts(c->where);
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const Expr& in = parts[i];
      if (in.kind != ExprKind::kInSubquery || in.negated || !is_own_column(*c, in.args[0], env)) continue;
      const Query& sub = *in.subquery;
      if (!is_simple_select(sub) || !sub.order_by.empty() || sub.limit) continue;
      const SelectCore& s = sub.body.select;
      const Table* inner = lone_table(s, env);
      if (!inner || inner == outer || core_has_aggregate(s) || s.projections.size() != 1 ||
          !is_own_column(s, s.projections[0].expr, env)) {
        continue;
      }
      const Expr& key = s.projections[0].expr;
      const Expr& fk = in.args[0];
      if (!env.admit({{"t1", inner->name}, {"c1", key.column}, {"t2", outer->name}, {"c2", fk.column}})) continue;

      JoinItem join;
      join.kind = JoinKind::kInner;
      join.source = s.from->base;
      join.on = Expr::Binary("=", key, fk);
      std::vector<Expr> rest;
      for (std::size_t k = 0; k < parts.size(); ++k) {
        if (k != i) rest.push_back(parts[k]);
      }
      for (Expr& d : split_conjuncts(s.where)) rest.push_back(std::move(d));
      c->from->joins.push_back(std::move(join));
      c->where = join_conjuncts(std::move(rest));
      return true;
    }
  }
  return false;
}

}  // namespace etm::detail
