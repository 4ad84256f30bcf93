#include "etm/rewrite.hpp"

#include <algorithm>
#include <sstream>

#include "etm/errors.hpp"
#include "rewrite_internal.hpp"

namespace etm {

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::kHolds: return "holds";
    case Verdict::kFails: return "fails";
    case Verdict::kUnverifiable: return "unverifiable";
  }
  return "?";
}

const std::vector<RuleInfo>& rule_catalog() {
  static const std::vector<RuleInfo> catalog = {
      {1, "SELECT _ FROM t1 WHERE c1 = (SELECT MIN/MAX(c1) FROM t1)", "SELECT _ FROM t1 ORDER BY c1 ASC/DESC LIMIT 1",
       "c1 is UNIQUE"},
      {2, "SELECT c1 FROM t1", "SELECT DISTINCT c1 FROM t1", "c1 is UNIQUE"},
      {3, "SELECT c1 FROM t1 WHERE d1 AND/OR d2",
       "SELECT c1 FROM t1 WHERE d1 INTERSECT/UNION SELECT c1 FROM t1 WHERE d2", "c1 is UNIQUE"},
      {4, "SELECT _ FROM t1 GROUP BY c1", "SELECT _ FROM t1 GROUP BY c1, c2, ...", "c1 is UNIQUE"},
      {5, "SELECT c1 FROM t1 WHERE c1 NOT IN (q1)", "SELECT c1 FROM t1 EXCEPT q1", "c1 is UNIQUE and NON_NULL"},
      {6, "SELECT COUNT(*) FROM t1", "SELECT COUNT(c1) FROM t1", "c1 is NON_NULL"},
      {7, "SELECT _ FROM t1", "SELECT _ FROM t1 WHERE c1 IS NOT NULL", "c1 is NON_NULL"},
      {8, "SELECT AVG(c1) FROM t1", "SELECT CAST(SUM(c1) AS FLOAT) / COUNT(*) FROM t1", "c1 is NON_NULL"},
      {9, "SELECT SUM(CASE WHEN d1 THEN 1 ELSE 0 END) FROM t1",
       "SELECT COUNT(CASE WHEN d1 THEN 1/c1 ELSE NULL END) FROM t1", "c1 is NON_NULL"},
      {10, "SELECT MIN/MAX(c1), _ FROM t1", "SELECT c1, _ FROM t1 ORDER BY c1 ASC/DESC LIMIT 1", "t1 is not empty"},
      {11, "SELECT c1, c2, ... FROM t1", "SELECT * FROM t1", "t1 consists of exactly c1, c2, ..."},
      {12, "SELECT _ FROM _ WHERE c1 = x", "SELECT _ FROM _ WHERE c1 = 'x'", "x is a number not starting with 0"},
      {13, "SELECT _ FROM t1 JOIN t2 ON t1.c1 = t2.c2 WHERE d1",
       "SELECT _ FROM t2 WHERE c2 IN (SELECT c1 FROM t1 WHERE d1)", "t1.c1 primary key, t2.c2 foreign key"},
      {14, "SELECT X FROM t2", "SELECT X FROM t1 JOIN t2 ON t1.c1 = t2.c2",
       "t1.c1 non-composite primary key of t2.c2, X columns of t2"},
      {15, "SELECT _ FROM _ WHERE c1 op xy",
       "SELECT _ FROM _ WHERE SUBSTR(c1, 1, a) = x AND SUBSTR(c1, b, c) op y", "a + 1 = b"},
      {16, "SELECT _ FROM _ WHERE SUBSTR(c1, 1, n) = 'x'", "SELECT _ FROM _ WHERE c1 LIKE 'x%'", "len(x) = n"},
      {17, "SELECT _ FROM _ ORDER BY c1", "SELECT _ FROM _ ORDER BY JULIANDAY(c1)", "none"},
      {18, "SELECT _ FROM _ WHERE c1 IN/NOT IN (x, y, ...)",
       "SELECT _ FROM _ WHERE c1 =/!= x OR/AND c1 =/!= y ...", "none"},
      {19, "SELECT t1.c1 FROM t1 JOIN t2 ON t1.c1 = t2.c2", "SELECT t2.c2 FROM t1 JOIN t2 ON t1.c1 = t2.c2", "none"},
      {20, "SELECT _ FROM t1 WHERE d1", "SELECT _ FROM t1 WHERE c1 IN (SELECT c1 FROM t1 WHERE d1)", "none"},
      {21, "q1", "q1 UNION/INTERSECT q1", "none"},
      {22, "SELECT _ FROM t1 WHERE c1 >= x AND c1 <= y", "SELECT _ FROM t1 WHERE c1 BETWEEN x AND y", "none"},
      {23, "SELECT _ FROM t1 WHERE c1 !=/>/</>=/<=/= x", "SELECT _ FROM t1 WHERE NOT c1 =/<=/>=/</>/!= x", "none"},
      {24, "SELECT CASE WHEN d1 THEN x ELSE y END", "SELECT IIF(d1, x, y)", "none"},
      {25, "SELECT _ FROM t1 WHERE t1.c1 NOT IN (SELECT c2 FROM t2)",
       "SELECT _ FROM t1 LEFT JOIN t2 ON t1.c1 = t2.c2 WHERE t2._ IS NULL", "none"},
      {26, "SELECT _ FROM (q1)", "WITH q AS (q1) SELECT _ FROM q", "none"},
  };
  return catalog;
}

namespace {

std::string need(const Bindings& b, const std::string& key) {
  auto it = b.find(key);
  if (it == b.end()) throw Error("missing binding " + key);
  return it->second;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::size_t utf8_length(const std::string& s) {
  return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) {
    return (static_cast<unsigned char>(c) & 0xC0) != 0x80;
  }));
}

Verdict from(bool ok) { return ok ? Verdict::kHolds : Verdict::kFails; }

}  // namespace

Verdict check_assumption(int rule_id, const Bindings& b, const Schema& schema, const Database* db,
                         std::string* evidence) {
  std::string note;
  Verdict v = Verdict::kHolds;
  switch (rule_id) {
    case 1: case 2: case 3: case 4: {
      const std::string t = need(b, "t1"), c = need(b, "c1");
      v = from(schema.is_unique(t, c));
      note = t + "." + c + (v == Verdict::kHolds ? " is UNIQUE" : " is not UNIQUE");
      break;
    }
    case 5: {
      const std::string t = need(b, "t1"), c = need(b, "c1");
      const bool u = schema.is_unique(t, c), nn = schema.is_non_null(t, c);
      v = from(u && nn);
      note = t + "." + c + (u ? " is UNIQUE" : " is not UNIQUE") + (nn ? " and NOT NULL" : " and nullable");
      break;
    }
    case 6: case 7: case 8: case 9: {
      if (!b.count("c1")) {
        note = "no column bound";
        break;
      }
      const std::string t = need(b, "t1"), c = need(b, "c1");
      v = from(schema.is_non_null(t, c));
      note = t + "." + c + (v == Verdict::kHolds ? " is NOT NULL" : " is nullable");
      break;
    }
    case 10: {
      const std::string t = need(b, "t1");
      if (!db) {
        v = Verdict::kUnverifiable;
        note = "no database instance to inspect " + t;
        break;
      }
      const auto rows = db->row_count(t);
      if (!rows) {
        v = Verdict::kUnverifiable;
        note = t + " is missing from the database instance";
      } else {
        v = from(*rows > 0);
        note = t + " has " + std::to_string(*rows) + " rows";
      }
      break;
    }
    case 11: {
      const std::string t = need(b, "t1");
      std::vector<std::string> bound = split_list(need(b, "X"));
      std::vector<std::string> all = schema.all_columns(t);
      for (auto* list : {&bound, &all}) {
        for (std::string& s : *list) s = lower(s);
        std::sort(list->begin(), list->end());
      }
      v = from(bound == all);
      note = t + (v == Verdict::kHolds ? " has exactly the bound columns" : " columns differ from the bound list");
      break;
    }
    case 12: {
      const std::string x = need(b, "x");
      std::string digits = x.size() > 1 && x[0] == '-' ? x.substr(1) : x;
      const bool numeric = !digits.empty() && std::all_of(digits.begin(), digits.end(), [](char c) {
        return c >= '0' && c <= '9';
      });
      v = from(numeric && digits[0] != '0');
      note = "'" + x + "'" + (!numeric ? " is not an integer" : digits[0] == '0' ? " starts with 0" : " is a number");
      break;
    }
    case 13: case 14: {
      const std::string t1 = need(b, "t1"), c1 = need(b, "c1"), t2 = need(b, "t2"), c2 = need(b, "c2");
      const bool link = schema.pk_fk_link({t1, c1}, {t2, c2}) == LinkDirection::kFirstIsPrimary;
      v = from(link);
      note = t1 + "." + c1 + (link ? " is the primary key for " : " has no key link to ") + t2 + "." + c2;
      if (rule_id == 14 && link) {
        const bool single = schema.is_single_primary_key(t1, c1);
        bool from_t2 = true;
        for (const std::string& col : split_list(need(b, "X"))) {
          from_t2 = from_t2 && schema.table(t2).find_column(col) != nullptr;
        }
        v = from(single && from_t2);
        if (!single) note += "; key is composite";
        if (!from_t2) note += "; selected columns are not all from " + t2;
      }
      break;
    }
    case 15: {
      const long a = std::stol(need(b, "a")), bb = std::stol(need(b, "b"));
      v = from(a + 1 == bb);
      note = std::to_string(a) + " + 1 " + (v == Verdict::kHolds ? "= " : "!= ") + std::to_string(bb);
      break;
    }
    case 16: {
      const std::string x = need(b, "x");
      const long n = std::stol(need(b, "n"));
      v = from(static_cast<long>(utf8_length(x)) == n);
      note = "len('" + x + "') = " + std::to_string(utf8_length(x)) + ", n = " + std::to_string(n);
      break;
    }
    default:
      if (rule_id < 17 || rule_id > 26) throw UnknownRule(rule_id);
      note = "no assumption";
  }
  if (evidence) *evidence = note;
  return v;
}

std::string explain(const std::vector<RuleBinding>& trace) {
  if (trace.empty()) return "no rewrites applied";
  std::string out;
  for (const RuleBinding& r : trace) {
    out += "rule " + std::to_string(r.rule_id) + " at " + r.location + " {";
    bool first = true;
    for (const auto& [k, v] : r.bindings) {
      out += (first ? "" : ", ") + k + "=" + v;
      first = false;
    }
    out += "} " + to_string(r.verdict);
    if (!r.evidence.empty()) out += ": " + r.evidence;
    if (!r.applied) out += " (not applied)";
    out += '\n';
  }
  return out;
}

namespace detail {

bool RuleEnv::admit(Bindings bindings) {
  RuleBinding rb;
  rb.rule_id = rule_id;
  rb.location = location;
  rb.verdict = check_assumption(rule_id, bindings, schema_, db_, &rb.evidence);
  rb.bindings = std::move(bindings);
  rb.applied = rb.verdict == Verdict::kHolds;
  if (rb.applied) {
    trace_.push_back(std::move(rb));
    return true;
  }
  const bool seen = std::any_of(blocked_.begin(), blocked_.end(), [&](const RuleBinding& o) {
    return o.rule_id == rb.rule_id && o.location == rb.location && o.bindings == rb.bindings;
  });
  if (!seen) blocked_.push_back(std::move(rb));
  return false;
}

const Table* RuleEnv::base_table(const TableSource& source) const {
  if (source.derived) return nullptr;
  for (const std::string& cte : visible_ctes) {
    if (iequals(cte, source.name)) return nullptr;
  }
  return schema_.find_table(source.name);
}

}  // namespace detail

namespace {

using detail::RuleEnv;
using detail::RuleFn;

bool visit_query(Query& q, const std::string& path, RuleEnv& env, RuleFn fn);

bool visit_expr(Expr& e, const std::string& path, RuleEnv& env, RuleFn fn) {
  for (Expr& a : e.args) {
    if (visit_expr(a, path, env, fn)) return true;
  }
  return e.subquery && visit_query(*e.subquery, path + ".subquery", env, fn);
}

bool visit_core(SelectCore& core, const std::string& path, RuleEnv& env, RuleFn fn) {
  if (core.from) {
    std::vector<TableSource*> srcs{&core.from->base};
    for (JoinItem& j : core.from->joins) srcs.push_back(&j.source);
    for (std::size_t i = 0; i < srcs.size(); ++i) {
      if (srcs[i]->derived && visit_query(*srcs[i]->query, path + ".from[" + std::to_string(i) + "]", env, fn)) {
        return true;
      }
    }
  }
  bool hit = false;
  detail::for_each_slot(core, nullptr, [&](Expr& e) {
    if (!hit) hit = visit_expr(e, path, env, fn);
  });
  return hit;
}

bool visit_set(SetExpr& s, const std::string& path, RuleEnv& env, RuleFn fn) {
  if (s.is_select()) return visit_core(s.select, path, env, fn);
  return visit_set(*s.left, path + ".left", env, fn) || visit_set(*s.right, path + ".right", env, fn);
}

bool visit_query(Query& q, const std::string& path, RuleEnv& env, RuleFn fn) {
  const std::size_t depth = env.visible_ctes.size();
  bool hit = false;
  for (Cte& c : q.ctes) {
    if (!hit) hit = visit_query(c.query, path + ".with[" + c.name + "]", env, fn);
    env.visible_ctes.push_back(c.name);
  }
  if (!hit) hit = visit_set(q.body, path, env, fn);
  for (OrderItem& o : q.order_by) {
    if (!hit) hit = visit_expr(o.expr, path + ".order_by", env, fn);
  }
  if (!hit) {
    env.location = path;
    hit = fn(q, env);
  }
  env.visible_ctes.resize(depth);
  return hit;
}

constexpr int kMaxSweeps = 32;
constexpr int kMaxApplicationsPerRule = 64;

}  // namespace

CanonicalForm canonicalize(const NormalizedAst& ast, const Schema& schema, const Database* db,
                           const RuleSelection& rules) {
  CanonicalForm out;
  out.tree = ast.tree;
  if (!rules.any_rule()) return out;
  const RuleSelection renormalize = RuleSelection::preprocessing_only();
  RuleEnv env(schema, db, out.trace, out.blocked);
  const auto& fns = detail::rule_functions();
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool changed = false;
    for (int id = 1; id <= RuleSelection::kRewriteCount; ++id) {
      if (!rules.rule(id)) continue;
      env.rule_id = id;
      for (int n = 0;; ++n) {
        env.visible_ctes.clear();
        if (!visit_query(out.tree, "query", env, fns[id])) break;
        if (n == kMaxApplicationsPerRule) throw RewriteDivergence("rule " + std::to_string(id) + " keeps applying");
        try {
          out.tree = normalize(out.tree, schema, renormalize).tree;
        } catch (const ResolutionError& e) {
          throw RewriteDivergence("rule " + std::to_string(id) + " produced an unresolvable tree: " + e.what());
        }
        changed = true;
      }
    }
    if (!changed) return out;
  }
  throw RewriteDivergence("no fixpoint after " + std::to_string(kMaxSweeps) + " sweeps");
}

}  // namespace etm
