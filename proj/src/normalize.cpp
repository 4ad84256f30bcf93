#include "etm/normalize.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "etm/errors.hpp"

namespace etm {

// ---------------------------------------------------------------------------
// RuleSelection

RuleSelection RuleSelection::all() { return rule_prefix(kRewriteCount); }

RuleSelection RuleSelection::preprocessing_only() { return preprocessing_prefix(kPreprocessingCount - 1); }

RuleSelection RuleSelection::preprocessing_prefix(int n) {
  if (n < -1 || n >= kPreprocessingCount) throw std::invalid_argument("preprocessing prefix out of range");
  RuleSelection s;
  for (int p = 0; p <= n; ++p) s.p_.set(p);
  return s;
}

RuleSelection RuleSelection::rule_prefix(int n) {
  if (n < 0 || n > kRewriteCount) throw std::invalid_argument("rule prefix out of range");
  std::vector<int> ids(n);
  std::iota(ids.begin(), ids.end(), 1);
  return rule_set(ids);
}

RuleSelection RuleSelection::rule_set(const std::vector<int>& ids) {
  RuleSelection s;
  s.p_.set();
  for (int id : ids) {
    if (id < 1 || id > kRewriteCount) throw std::invalid_argument("rule id out of range: " + std::to_string(id));
    s.rules_.set(id);
  }
  return s;
}

namespace {

int parse_int(std::string_view text) {
  int value = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw std::invalid_argument("not a number: " + std::string(text));
  }
  return value;
}

}  // namespace

RuleSelection RuleSelection::parse(std::string_view text) {
  if (text == "all") return all();
  if (text == "P" || text == "p") return preprocessing_only();
  if (!text.empty() && (text[0] == 'P' || text[0] == 'p')) return preprocessing_prefix(parse_int(text.substr(1)));
  if (text.find(',') == std::string_view::npos) return rule_prefix(parse_int(text));
  std::vector<int> ids;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = std::min(text.find(',', start), text.size());
    ids.push_back(parse_int(text.substr(start, comma - start)));
    start = comma + 1;
  }
  return rule_set(ids);
}

std::string RuleSelection::describe() const {
  std::ostringstream out;
  int p_count = 0;
  while (p_count < kPreprocessingCount && p_[p_count]) ++p_count;
  if (p_.count() != static_cast<std::size_t>(p_count)) {
    out << "P{";
    for (int p = 0; p < kPreprocessingCount; ++p) {
      if (p_[p]) out << p << ' ';
    }
    out << '}';
  } else if (p_count == 0) {
    out << "no preprocessing";
  } else {
    out << "P0-P" << p_count - 1;
  }
  if (rules_.any()) {
    out << " + rules";
    for (int id = 1; id <= kRewriteCount; ++id) {
      if (rules_[id]) out << ' ' << id;
    }
  }
  return out.str();
}

namespace {

// ---------------------------------------------------------------------------
// Expression-level canonicalization shared by the scope walker.

bool is_integer_text(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

void collect_chain(Expr& e, const std::string& op, std::vector<Expr>& out) {
  if (e.kind == ExprKind::kBinary && !e.negated && e.op == op) {
    collect_chain(e.args[0], op, out);
    collect_chain(e.args[1], op, out);
  } else {
    out.push_back(std::move(e));
  }
}

Expr rebuild_chain(const std::string& op, std::vector<Expr> items) {
  Expr acc = std::move(items[0]);
  for (std::size_t i = 1; i < items.size(); ++i) acc = Expr::Binary(op, std::move(acc), std::move(items[i]));
  return acc;
}

const char* mirrored(const std::string& op) {
  if (op == "<") return ">";
  if (op == ">") return "<";
  if (op == "<=") return ">=";
  return "<=";
}

// Sorts commutative operands by their serialization. Returns true on change.
bool order_expr(Expr& e) {
  bool changed = false;
  for (Expr& a : e.args) changed |= order_expr(a);
  if (e.kind == ExprKind::kBinary && (e.op == "AND" || e.op == "OR") && !e.negated) {
    std::vector<Expr> items;
    const std::string op = e.op;
    collect_chain(e, op, items);
    std::vector<std::string> keys;
    keys.reserve(items.size());
    for (const Expr& it : items) keys.push_back(serialize(it));
    std::vector<std::size_t> idx(items.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
    std::vector<Expr> sorted;
    sorted.reserve(items.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      changed |= idx[i] != i;
      sorted.push_back(std::move(items[idx[i]]));
    }
    e = rebuild_chain(op, std::move(sorted));
    return changed;
  }
  if (e.kind == ExprKind::kBinary && e.args.size() == 2) {
    const bool symmetric = e.op == "=" || e.op == "!=" || e.op == "IS";
    const bool ordered = e.op == "<" || e.op == ">" || e.op == "<=" || e.op == ">=";
    if ((symmetric || ordered) && serialize(e.args[1]) < serialize(e.args[0])) {
      std::swap(e.args[0], e.args[1]);
      if (ordered) e.op = mirrored(e.op);
      return true;
    }
  }
  if (e.kind == ExprKind::kInList && e.args.size() > 2) {
    std::vector<std::pair<std::string, Expr>> items;
    for (std::size_t i = 1; i < e.args.size(); ++i) items.emplace_back(serialize(e.args[i]), std::move(e.args[i]));
    const bool sorted = std::is_sorted(items.begin(), items.end(),
                                       [](const auto& a, const auto& b) { return a.first < b.first; });
    std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 1; i < e.args.size(); ++i) e.args[i] = std::move(items[i - 1].second);
    changed |= !sorted;
  }
  return changed;
}

// Removes Paren nodes; grouping survives as tree shape. Returns true on change.
bool strip_parens(Expr& e) {
  bool changed = false;
  while (e.kind == ExprKind::kParen) {
    Expr inner = std::move(e.args[0]);
    e = std::move(inner);
    changed = true;
  }
  for (Expr& a : e.args) changed |= strip_parens(a);
  return changed;
}

}  // namespace

namespace {

// ---------------------------------------------------------------------------
// Scopes

// Column names a derived table or CTE exposes. `by_original` keeps the names
// the query was written with so enclosing references survive renaming.
struct Exposure {
  std::vector<std::string> columns;
  std::vector<std::pair<std::string, std::string>> by_original;  // (as written, canonical)

  std::optional<std::string> lookup(std::string_view name) const {
    for (const auto& [original, canonical] : by_original) {
      if (!original.empty() && iequals(original, name)) return canonical;
    }
    return std::nullopt;
  }
};

struct Instance {
  std::string name;   // table or CTE name; empty for derived tables
  std::string alias;  // as written
  std::string label;  // qualifier used in the output
  const Table* table = nullptr;  // schema tables only
  Exposure exposure;             // derived tables and CTE references

  std::string ref_name() const { return alias.empty() ? name : alias; }
};

struct Scope {
  const Scope* parent = nullptr;
  int depth = 0;
  std::vector<Instance> instances;
};

struct CteEntry {
  std::string name;
  Exposure exposure;
};

struct CteFrame {
  const CteFrame* parent = nullptr;
  std::vector<CteEntry> entries;
};

const CteEntry* find_cte(const CteFrame* frame, std::string_view name) {
  for (; frame; frame = frame->parent) {
    for (const CteEntry& e : frame->entries) {
      if (iequals(e.name, name)) return &e;
    }
  }
  return nullptr;
}

const Instance* find_ref(const Scope& scope, std::string_view ref) {
  for (const Instance& inst : scope.instances) {
    if (!inst.ref_name().empty() && iequals(inst.ref_name(), ref)) return &inst;
  }
  return nullptr;
}

std::string set_key(const SetExpr& s) {
  Query wrapper;
  wrapper.body = s;
  return serialize(wrapper);
}

void collect_leaves(SetExpr& s, std::vector<SelectCore*>& out) {
  if (s.is_select()) {
    out.push_back(&s.select);
    return;
  }
  collect_leaves(*s.left, out);
  collect_leaves(*s.right, out);
}

void collect_set_chain(SetExpr& s, SetOp op, std::vector<SetExpr>& out) {
  if (s.op == op) {
    collect_set_chain(*s.left, op, out);
    collect_set_chain(*s.right, op, out);
  } else {
    out.push_back(std::move(s));
  }
}

// Orders operands of UNION, UNION ALL and INTERSECT chains; EXCEPT stays positional.
bool order_set(SetExpr& s) {
  if (s.is_select()) return false;
  bool changed = order_set(*s.left);
  changed |= order_set(*s.right);
  if (s.op == SetOp::kExcept) return changed;
  const SetOp op = s.op;
  std::vector<SetExpr> items;
  collect_set_chain(s, op, items);
  std::vector<std::pair<std::string, std::size_t>> keys;
  for (std::size_t i = 0; i < items.size(); ++i) keys.emplace_back(set_key(items[i]), i);
  std::stable_sort(keys.begin(), keys.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  SetExpr acc = std::move(items[keys[0].second]);
  for (std::size_t i = 1; i < keys.size(); ++i) {
    changed |= keys[i].second != i;
    acc = SetExpr::Compound(op, std::move(acc), std::move(items[keys[i].second]));
  }
  changed |= keys[0].second != 0;
  s = std::move(acc);
  return changed;
}

std::optional<std::size_t> positional(const Expr& e) {
  if (e.kind != ExprKind::kLiteral || e.literal != LiteralKind::kNumber || !is_integer_text(e.text)) {
    return std::nullopt;
  }
  return static_cast<std::size_t>(std::stoull(e.text));
}

// ---------------------------------------------------------------------------
// The walker

class Normalizer {
 public:
  Normalizer(const Schema& schema, const RuleSelection& rules) : schema_(schema), rules_(rules) {}

  NormalizedAst run(const Query& ast) {
    NormalizedAst out{ast, {}};
    query(out.tree, nullptr, nullptr, false);
    out.provenance.assign(applied_.begin(), applied_.end());
    return out;
  }

 private:
  struct Ctx {
    const Scope* scope;
    const CteFrame* ctes;
    std::vector<Projection>* projections;  // alias fallback; null where aliases are invisible
  };

  struct CoreOut {
    Exposure exposure;
    std::vector<std::string> original_names;  // result names as written, original order
  };

  bool p(int i) const { return rules_.preprocessing(i); }
  void mark(int i) { applied_.insert(i); }

  std::string fold(const std::string& s) {
    if (!p(0)) return s;
    std::string l = lower(s);
    if (l != s) mark(0);
    return l;
  }

  void clear_quote(QuoteStyle& q) {
    if (p(8) && q != QuoteStyle::kNone) {
      q = QuoteStyle::kNone;
      mark(8);
    }
  }

  std::string qualifier(const Instance& inst) const { return p(3) ? inst.label : inst.ref_name(); }

  std::optional<std::string> column_of(const Instance& inst, const std::string& name) {
    if (inst.table) {
      const Column* c = inst.table->find_column(name);
      if (!c) return std::nullopt;
      return p(0) ? fold(c->name) : name;
    }
    return inst.exposure.lookup(name);
  }

  // Names a projection contributes to the result, expanded for stars.
  std::vector<std::string> projection_names(const Projection& pr, const Scope& scope, bool original) const {
    auto expand = [&](const Instance& inst, std::vector<std::string>& out) {
      if (inst.table) {
        for (const Column& c : inst.table->columns) out.push_back(p(0) && !original ? lower(c.name) : c.name);
      } else {
        for (const auto& [o, c] : inst.exposure.by_original) out.push_back(original ? o : c);
      }
    };
    std::vector<std::string> out;
    if (pr.expr.kind == ExprKind::kStar) {
      for (const Instance& inst : scope.instances) {
        if (pr.expr.table.empty() || iequals(original ? inst.ref_name() : qualifier(inst), pr.expr.table)) {
          expand(inst, out);
        }
      }
      return out;
    }
    if (!pr.alias.empty()) return {pr.alias};
    if (pr.expr.kind == ExprKind::kColumn) return {pr.expr.column};
    return {std::string()};
  }

  Exposure query(Query& q, const Scope* outer, const CteFrame* ctes, bool named_output);
  CoreOut core(SelectCore& c, const Scope* outer, const CteFrame* ctes, std::vector<OrderItem>* order_by,
               bool named_output, bool compound_member);
  Exposure compound(Query& q, const Scope* outer, const CteFrame* ctes, bool named_output);

  Instance make_instance(TableSource& src, const Scope* outer, const CteFrame* ctes);
  void reorder_joins(SelectCore& c, Scope& scope, std::vector<Expr>& moved_on);
  void assign_labels(Scope& scope);
  void write_sources(SelectCore& c, const Scope& scope);
  void resolve(Expr& e, const Ctx& ctx);
  void resolve_column(Expr& e, const Ctx& ctx);
  void bind(Expr& e, const Instance& inst, const std::string& column, bool was_qualified);
  void resolve_order_term(Expr& e, const Ctx& ctx, bool alias_first);
  void finish(Expr& e) {
    if (p(7) && strip_parens(e)) mark(7);
    if (p(5) && order_expr(e)) mark(5);
  }

  const Schema& schema_;
  const RuleSelection& rules_;
  std::set<int> applied_;
};

Exposure Normalizer::query(Query& q, const Scope* outer, const CteFrame* ctes, bool named_output) {
  CteFrame frame{ctes, {}};
  for (Cte& cte : q.ctes) {
    Exposure ex = query(cte.query, outer, &frame, true);
    cte.name = fold(cte.name);
    clear_quote(cte.name_quote);
    frame.entries.push_back({cte.name, std::move(ex)});
  }
  const CteFrame* visible = q.ctes.empty() ? ctes : &frame;
  if (q.body.is_select()) return core(q.body.select, outer, visible, &q.order_by, named_output, false).exposure;
  return compound(q, outer, visible, named_output);
}

Instance Normalizer::make_instance(TableSource& src, const Scope* outer, const CteFrame* ctes) {
  Instance inst;
  inst.alias = fold(src.alias);
  if (src.derived) {
    inst.exposure = query(*src.query, outer, ctes, true);
    return inst;
  }
  inst.name = fold(src.name);
  if (const CteEntry* cte = find_cte(ctes, src.name)) {
    inst.exposure = cte->exposure;
    return inst;
  }
  inst.table = schema_.find_table(src.name);
  if (!inst.table) throw ResolutionError("no such table: " + src.name);
  return inst;
}

void Normalizer::reorder_joins(SelectCore& c, Scope& scope, std::vector<Expr>& moved_on) {
  FromClause& from = *c.from;
  struct Entry {
    std::string key;
    TableSource source;
    Instance inst;
  };
  std::vector<Entry> entries;
  entries.push_back({{}, std::move(from.base), std::move(scope.instances[0])});
  for (std::size_t i = 0; i < from.joins.size(); ++i) {
    JoinItem& j = from.joins[i];
    if (j.kind == JoinKind::kCross) mark(4);
    if (j.on) {
      moved_on.push_back(std::move(*j.on));
      if (i + 1 != from.joins.size()) mark(4);
    }
    entries.push_back({{}, std::move(j.source), std::move(scope.instances[i + 1])});
  }
  for (Entry& e : entries) e.key = e.source.derived ? "(" + serialize(*e.source.query) + ")" : lower(e.source.name);
  std::vector<std::size_t> idx(entries.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return entries[a].key < entries[b].key; });
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] != i) mark(4);
  }
  scope.instances.clear();
  from.joins.clear();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    Entry& e = entries[idx[i]];
    scope.instances.push_back(std::move(e.inst));
    if (i == 0) {
      from.base = std::move(e.source);
    } else {
      from.joins.push_back({JoinKind::kInner, std::move(e.source), std::nullopt});
    }
  }
}

void Normalizer::assign_labels(Scope& scope) {
  if (!p(3)) {
    for (Instance& inst : scope.instances) inst.label = inst.ref_name();
    return;
  }
  std::set<std::string> ancestors;
  for (const Scope* s = scope.parent; s; s = s->parent) {
    for (const Instance& inst : s->instances) ancestors.insert(lower(inst.label));
  }
  std::vector<std::string> bases;
  int derived = 0;
  for (const Instance& inst : scope.instances) {
    bases.push_back(inst.name.empty() ? "d" + std::to_string(++derived) : inst.name);
  }
  std::set<std::string> used;
  for (std::size_t i = 0; i < bases.size(); ++i) {
    const auto same = std::count_if(bases.begin(), bases.end(), [&](const std::string& b) { return iequals(b, bases[i]); });
    std::string label = bases[i];
    if (same > 1) {
      const auto ordinal = std::count_if(bases.begin(), bases.begin() + static_cast<std::ptrdiff_t>(i) + 1,
                                         [&](const std::string& b) { return iequals(b, bases[i]); });
      label += "_" + std::to_string(ordinal);
    }
    while (ancestors.count(lower(label)) || used.count(lower(label))) label += "_d" + std::to_string(scope.depth);
    used.insert(lower(label));
    scope.instances[i].label = label;
  }
}

void Normalizer::write_sources(SelectCore& c, const Scope& scope) {
  if (!c.from) return;
  auto write = [&](TableSource& src, const Instance& inst) {
    if (!src.derived) {
      src.name = inst.name;
      clear_quote(src.name_quote);
    }
    std::string alias = inst.alias;
    if (p(3)) {
      alias = (!src.derived && iequals(inst.label, inst.name)) ? std::string() : inst.label;
      if (!iequals(alias, src.alias)) mark(3);
    }
    src.alias = alias;
    if (src.alias.empty()) {
      src.alias_quote = QuoteStyle::kNone;
    } else {
      clear_quote(src.alias_quote);
    }
  };
  write(c.from->base, scope.instances[0]);
  for (std::size_t i = 0; i < c.from->joins.size(); ++i) write(c.from->joins[i].source, scope.instances[i + 1]);
}

void Normalizer::bind(Expr& e, const Instance& inst, const std::string& column, bool was_qualified) {
  e.column = column;
  clear_quote(e.column_quote);
  if (!was_qualified && !p(1)) return;
  const std::string q = qualifier(inst);
  if (!was_qualified) {
    mark(1);
  } else if (q != e.table && !iequals(q, e.table)) {
    mark(3);
  }
  e.table = q;
  clear_quote(e.table_quote);
}

void Normalizer::resolve_column(Expr& e, const Ctx& ctx) {
  if (!e.table.empty()) {
    for (const Scope* s = ctx.scope; s; s = s->parent) {
      const Instance* inst = find_ref(*s, e.table);
      if (!inst) continue;
      const auto col = column_of(*inst, e.column);
      if (!col) throw ResolutionError("no such column: " + e.table + "." + e.column);
      bind(e, *inst, *col, true);
      return;
    }
    throw ResolutionError("no such table or alias: " + e.table);
  }
  for (const Scope* s = ctx.scope; s; s = s->parent) {
    const Instance* hit = nullptr;
    std::string hit_column;
    for (const Instance& inst : s->instances) {
      if (auto col = column_of(inst, e.column)) {
        if (hit) throw ResolutionError("ambiguous column name: " + e.column);
        hit = &inst;
        hit_column = *col;
      }
    }
    if (hit) {
      bind(e, *hit, hit_column, false);
      return;
    }
    if (s == ctx.scope && ctx.projections) {
      for (const Projection& pr : *ctx.projections) {
        if (pr.alias.empty() || !iequals(pr.alias, e.column)) continue;
        if (p(6)) {
          e = pr.expr;
          mark(6);
        } else {
          e.column = fold(e.column);
          clear_quote(e.column_quote);
        }
        return;
      }
    }
  }
  if (e.column_quote == QuoteStyle::kDouble) {
    e = Expr::String(e.column);
    return;
  }
  throw ResolutionError("no such column: " + e.column);
}

void Normalizer::resolve(Expr& e, const Ctx& ctx) {
  switch (e.kind) {
    case ExprKind::kColumn:
      resolve_column(e, ctx);
      return;
    case ExprKind::kStar:
      if (!e.table.empty()) {
        const Instance* inst = find_ref(*ctx.scope, e.table);
        if (!inst) throw ResolutionError("no such table or alias: " + e.table);
        e.table = qualifier(*inst);
        clear_quote(e.table_quote);
      }
      return;
    case ExprKind::kInSubquery:
      resolve(e.args[0], ctx);
      query(*e.subquery, ctx.scope, ctx.ctes, false);
      return;
    case ExprKind::kExists:
    case ExprKind::kSubquery:
      query(*e.subquery, ctx.scope, ctx.ctes, false);
      return;
    default:
      for (Expr& a : e.args) resolve(a, ctx);
  }
}

// ORDER BY and GROUP BY terms: positions and bare aliases name result columns.
void Normalizer::resolve_order_term(Expr& e, const Ctx& ctx, bool alias_first) {
  std::vector<Projection>& projections = *ctx.projections;
  if (auto pos = positional(e)) {
    if (*pos < 1 || *pos > projections.size()) throw ResolutionError("term out of range: " + e.text);
    e = projections[*pos - 1].expr;
    return;
  }
  if (alias_first && e.kind == ExprKind::kColumn && e.table.empty()) {
    for (const Projection& pr : projections) {
      if (pr.alias.empty() || !iequals(pr.alias, e.column)) continue;
      if (p(6)) {
        e = pr.expr;
        mark(6);
      } else {
        e.column = fold(e.column);
        clear_quote(e.column_quote);
      }
      return;
    }
  }
  resolve(e, ctx);
}

Normalizer::CoreOut Normalizer::core(SelectCore& c, const Scope* outer, const CteFrame* ctes,
                                     std::vector<OrderItem>* order_by, bool named_output, bool compound_member) {
  Scope scope;
  scope.parent = outer;
  scope.depth = outer ? outer->depth + 1 : 0;

  std::vector<Expr> moved_on;
  if (c.from) {
    scope.instances.push_back(make_instance(c.from->base, outer, ctes));
    for (JoinItem& j : c.from->joins) scope.instances.push_back(make_instance(j.source, outer, ctes));
    std::set<std::string> refs;
    for (const Instance& inst : scope.instances) {
      if (inst.ref_name().empty()) continue;
      if (!refs.insert(lower(inst.ref_name())).second) {
        throw ResolutionError("duplicate table name or alias: " + inst.ref_name());
      }
    }
    const bool inner_only = std::all_of(c.from->joins.begin(), c.from->joins.end(), [](const JoinItem& j) {
      return j.kind == JoinKind::kInner || j.kind == JoinKind::kCross;
    });
    if (p(4) && inner_only && !c.from->joins.empty()) reorder_joins(c, scope, moved_on);
  }
  assign_labels(scope);
  write_sources(c, scope);

  // Result names as written, before anything is renamed or reordered.
  std::vector<std::vector<std::string>> original(c.projections.size());
  for (std::size_t i = 0; i < c.projections.size(); ++i) original[i] = projection_names(c.projections[i], scope, true);

  const Ctx plain{&scope, ctes, nullptr};
  for (Projection& pr : c.projections) resolve(pr.expr, plain);
  const Ctx with_aliases{&scope, ctes, &c.projections};
  if (c.from) {
    for (JoinItem& j : c.from->joins) {
      if (j.on) resolve(*j.on, plain);
    }
  }
  for (Expr& on : moved_on) resolve(on, plain);
  if (c.where) resolve(*c.where, with_aliases);
  for (Expr& g : c.group_by) resolve_order_term(g, with_aliases, false);
  if (c.having) resolve(*c.having, with_aliases);
  if (order_by) {
    for (OrderItem& item : *order_by) resolve_order_term(item.expr, with_aliases, true);
  }

  if (!moved_on.empty()) {
    std::vector<Expr> conjuncts;
    for (Expr& on : moved_on) {
      if (p(7) && strip_parens(on)) mark(7);
      collect_chain(on, "AND", conjuncts);
    }
    c.from->joins.back().on = rebuild_chain("AND", std::move(conjuncts));
  }

  for (Projection& pr : c.projections) finish(pr.expr);
  if (c.from) {
    for (JoinItem& j : c.from->joins) {
      if (j.on) finish(*j.on);
    }
  }
  if (c.where) finish(*c.where);
  for (Expr& g : c.group_by) finish(g);
  if (c.having) finish(*c.having);
  if (order_by) {
    for (OrderItem& item : *order_by) finish(item.expr);
  }

  if (p(2) && c.group_by.size() > 1) {
    std::vector<std::pair<std::string, Expr>> keyed;
    for (Expr& g : c.group_by) keyed.emplace_back(serialize(g), std::move(g));
    std::stable_sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 0; i < keyed.size(); ++i) {
      if (!(c.group_by[i] == keyed[i].second)) mark(2);
      c.group_by[i] = std::move(keyed[i].second);
    }
  }

  // Projection order and naming.
  std::vector<std::size_t> order(c.projections.size());
  std::iota(order.begin(), order.end(), 0);
  if (!compound_member) {
    if (p(2)) {
      std::vector<std::string> keys;
      for (const Projection& pr : c.projections) keys.push_back(serialize(pr.expr));
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
      std::vector<Projection> sorted;
      for (std::size_t i = 0; i < order.size(); ++i) {
        if (order[i] != i) mark(2);
        sorted.push_back(std::move(c.projections[order[i]]));
      }
      c.projections = std::move(sorted);
    }
    for (std::size_t i = 0; i < c.projections.size(); ++i) {
      Projection& pr = c.projections[i];
      if (p(6)) {
        const bool star = pr.expr.kind == ExprKind::kStar;
        const std::string alias = named_output && !star ? "c" + std::to_string(i + 1) : std::string();
        if (alias != pr.alias) mark(6);
        pr.alias = alias;
        pr.alias_quote = QuoteStyle::kNone;
      } else {
        pr.alias = fold(pr.alias);
        clear_quote(pr.alias_quote);
      }
    }
  } else {
    for (Projection& pr : c.projections) {
      pr.alias = fold(pr.alias);
      clear_quote(pr.alias_quote);
    }
  }

  CoreOut out;
  std::vector<std::vector<std::string>> final_names(c.projections.size());
  for (std::size_t i = 0; i < c.projections.size(); ++i) {
    final_names[i] = projection_names(c.projections[i], scope, false);
    out.exposure.columns.insert(out.exposure.columns.end(), final_names[i].begin(), final_names[i].end());
  }
  std::vector<std::size_t> position_of(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) position_of[order[i]] = i;
  for (std::size_t j = 0; j < original.size(); ++j) {
    const auto& finals = final_names[position_of[j]];
    for (std::size_t k = 0; k < original[j].size(); ++k) {
      out.exposure.by_original.emplace_back(original[j][k], k < finals.size() ? finals[k] : std::string());
      out.original_names.push_back(original[j][k]);
    }
  }
  return out;
}

Exposure Normalizer::compound(Query& q, const Scope* outer, const CteFrame* ctes, bool named_output) {
  std::vector<SelectCore*> leaves;
  collect_leaves(q.body, leaves);
  std::vector<CoreOut> outs;
  for (SelectCore* leaf : leaves) outs.push_back(core(*leaf, outer, ctes, nullptr, named_output, true));
  const std::vector<std::string> first_names = outs[0].original_names;
  const std::size_t width = first_names.size();

  // ORDER BY on a compound names result columns of the first operand.
  std::vector<std::size_t> positions;
  for (OrderItem& item : q.order_by) {
    std::optional<std::size_t> pos = positional(item.expr);
    if (pos) {
      if (*pos < 1 || *pos > width) throw ResolutionError("ORDER BY term out of range: " + item.expr.text);
      --*pos;
    } else if (item.expr.kind == ExprKind::kColumn) {
      for (std::size_t i = 0; i < width && !pos; ++i) {
        if (iequals(first_names[i], item.expr.column)) pos = i;
      }
    }
    if (!pos) throw ResolutionError("ORDER BY term does not match any result column: " + serialize(item.expr));
    positions.push_back(*pos);
  }

  std::vector<std::size_t> where(width);
  std::iota(where.begin(), where.end(), 0);
  bool has_star = false;
  bool uniform = true;
  for (const SelectCore* leaf : leaves) {
    uniform &= leaf->projections.size() == width;
    for (const Projection& pr : leaf->projections) has_star |= pr.expr.kind == ExprKind::kStar;
  }
  if (p(2) && uniform && !has_star) {
    for (int round = 0; round < 8; ++round) {
      if (p(5) && order_set(q.body)) mark(5);
      leaves.clear();
      collect_leaves(q.body, leaves);
      std::vector<std::string> keys(width);
      for (std::size_t i = 0; i < width; ++i) {
        for (const SelectCore* leaf : leaves) keys[i] += serialize(leaf->projections[i].expr) + '\x1f';
      }
      std::vector<std::size_t> idx(width);
      std::iota(idx.begin(), idx.end(), 0);
      std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
      bool identity = true;
      for (std::size_t i = 0; i < width; ++i) identity &= idx[i] == i;
      if (identity) break;
      mark(2);
      for (SelectCore* leaf : leaves) {
        std::vector<Projection> permuted;
        for (std::size_t i = 0; i < width; ++i) permuted.push_back(std::move(leaf->projections[idx[i]]));
        leaf->projections = std::move(permuted);
      }
      std::vector<std::size_t> inverse(width);
      for (std::size_t i = 0; i < width; ++i) inverse[idx[i]] = i;
      for (std::size_t& w : where) w = inverse[w];
    }
  } else if (p(5) && order_set(q.body)) {
    mark(5);
  }
  leaves.clear();
  collect_leaves(q.body, leaves);

  for (SelectCore* leaf : leaves) {
    for (std::size_t i = 0; i < leaf->projections.size(); ++i) {
      Projection& pr = leaf->projections[i];
      if (!p(6)) continue;
      const std::string alias = named_output ? "c" + std::to_string(i + 1) : std::string();
      if (alias != pr.alias) mark(6);
      pr.alias = alias;
    }
  }

  Exposure ex;
  for (const Projection& pr : leaves[0]->projections) {
    ex.columns.push_back(!pr.alias.empty() ? pr.alias : pr.expr.kind == ExprKind::kColumn ? pr.expr.column : "");
  }
  if (!has_star) {
    for (std::size_t j = 0; j < width && where[j] < ex.columns.size(); ++j) {
      ex.by_original.emplace_back(first_names[j], ex.columns[where[j]]);
    }
  }
  for (std::size_t i = 0; i < q.order_by.size(); ++i) {
    q.order_by[i].expr = Expr::Number(std::to_string(where[positions[i]] + 1));
  }
  return ex;
}

}  // namespace

NormalizedAst normalize(const Query& ast, const Schema& schema, const RuleSelection& rules) {
  return Normalizer(schema, rules).run(ast);
}

}  // namespace etm
