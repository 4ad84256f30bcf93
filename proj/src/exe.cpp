#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>

#include "etm/baseline.hpp"
#include "etm/errors.hpp"
#include "etm/parser.hpp"

namespace etm {
namespace {

bool is_number(const Cell& c) { return std::holds_alternative<std::int64_t>(c) || std::holds_alternative<double>(c); }

double as_double(const Cell& c) {
  if (const auto* i = std::get_if<std::int64_t>(&c)) return static_cast<double>(*i);
  return std::get<double>(c);
}

int rank(const Cell& c) {
  if (std::holds_alternative<std::monostate>(c)) return 0;
  return is_number(c) ? 1 : 2;
}

// Total order that keeps tolerance-equal numbers adjacent.
bool cell_less(const Cell& a, const Cell& b) {
  const int ra = rank(a), rb = rank(b);
  if (ra != rb) return ra < rb;
  if (ra == 1) return as_double(a) < as_double(b);
  if (ra == 2) return std::get<std::string>(a) < std::get<std::string>(b);
  return false;
}

bool row_less(const Row& a, const Row& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), cell_less);
}

bool rows_equal(const Row& a, const Row& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!cells_equal(a[i], b[i])) return false;
  }
  return true;
}

bool multiset_equal(std::vector<Row> a, std::vector<Row> b) {
  if (a.size() != b.size()) return false;
  std::sort(a.begin(), a.end(), row_less);
  std::sort(b.begin(), b.end(), row_less);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!rows_equal(a[i], b[i])) return false;
  }
  return true;
}

std::vector<Row> permuted(const std::vector<Row>& rows, const std::vector<std::size_t>& perm) {
  std::vector<Row> out;
  out.reserve(rows.size());
  for (const Row& r : rows) {
    Row p(perm.size());
    for (std::size_t j = 0; j < perm.size(); ++j) p[j] = r[perm[j]];
    out.push_back(std::move(p));
  }
  return out;
}

bool compare_fixed(const ResultTable& gold, const std::vector<Row>& pred, const std::vector<Row>& keys) {
  if (!gold.ordered) return multiset_equal(gold.rows, pred);
  if (keys.size() != gold.rows.size()) {
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (!rows_equal(gold.rows[i], pred[i])) return false;
    }
    return true;
  }
  std::size_t start = 0;
  while (start < gold.rows.size()) {
    std::size_t end = start + 1;
    while (end < gold.rows.size() && rows_equal(keys[end], keys[start])) ++end;
    const std::vector<Row> g(gold.rows.begin() + start, gold.rows.begin() + end);
    const std::vector<Row> p(pred.begin() + start, pred.begin() + end);
    if (!multiset_equal(g, p)) return false;
    start = end;
  }
  return true;
}

std::vector<Row> column_values(const std::vector<Row>& rows, std::size_t col) {
  std::vector<Row> out;
  out.reserve(rows.size());
  for (const Row& r : rows) out.push_back({r[col]});
  return out;
}

}  // namespace

bool cells_equal(const Cell& a, const Cell& b) {
  if (is_number(a) && is_number(b)) {
    if (std::holds_alternative<std::int64_t>(a) && std::holds_alternative<std::int64_t>(b)) {
      return std::get<std::int64_t>(a) == std::get<std::int64_t>(b);
    }
    const double x = as_double(a), y = as_double(b);
    if (x == y) return true;
    return std::fabs(x - y) <= 1e-6 * std::max(std::fabs(x), std::fabs(y));
  }
  return a == b;
}

bool has_top_level_order_by(std::string_view sql) {
  int depth = 0;
  std::string prev;
  std::size_t i = 0;
  while (i < sql.size()) {
    const char c = sql[i];
    if (c == '\'' || c == '"' || c == '`' || c == '[') {
      const char close = c == '[' ? ']' : c;
      for (++i; i < sql.size(); ++i) {
        if (sql[i] == close) {
          if (close != ']' && i + 1 < sql.size() && sql[i + 1] == close) {
            ++i;
            continue;
          }
          break;
        }
      }
      ++i;
      prev.clear();
    } else if (c == '-' && i + 1 < sql.size() && sql[i + 1] == '-') {
      while (i < sql.size() && sql[i] != '\n') ++i;
    } else if (c == '(' || c == ')') {
      depth += c == '(' ? 1 : -1;
      prev.clear();
      ++i;
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < sql.size() && (std::isalnum(static_cast<unsigned char>(sql[j])) || sql[j] == '_')) ++j;
      const std::string word = lower(sql.substr(i, j - i));
      if (depth == 0 && prev == "order" && word == "by") return true;
      prev = word;
      i = j;
    } else {
      if (!std::isspace(static_cast<unsigned char>(c))) prev.clear();
      ++i;
    }
  }
  return false;
}

ResultTable execute(const std::string& sql, const Database& db, std::chrono::milliseconds timeout) {
  ResultTable t = db.query(sql, timeout);
  t.ordered = has_top_level_order_by(sql);
  return t;
}

bool results_equal(const ResultTable& gold, const ResultTable& pred, const std::vector<Row>& gold_keys) {
  if (gold.column_count != pred.column_count || gold.rows.size() != pred.rows.size()) return false;
  const std::size_t n = gold.column_count;
  // Candidate pred columns for each gold column: equal value multisets.
  std::vector<std::vector<std::size_t>> candidates(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto g = column_values(gold.rows, j);
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t col = (j + k) % n;  // identity first
      if (multiset_equal(g, column_values(pred.rows, col))) candidates[j].push_back(col);
    }
    if (candidates[j].empty()) return false;
  }
  std::vector<std::size_t> perm(n);
  std::vector<bool> used(n, false);
  int budget = 5000;
  std::function<bool(std::size_t)> search = [&](std::size_t j) -> bool {
    if (j == n) return --budget >= 0 && compare_fixed(gold, permuted(pred.rows, perm), gold_keys);
    for (std::size_t col : candidates[j]) {
      if (used[col]) continue;
      used[col] = true;
      perm[j] = col;
      const bool ok = search(j + 1);
      used[col] = false;
      if (ok) return true;
      if (budget < 0) return false;
    }
    return false;
  };
  return search(0);
}

namespace {

const SelectCore& leftmost(const SetExpr& s) { return s.is_select() ? s.select : leftmost(*s.left); }

std::optional<std::size_t> key_column(const Expr& key, const SelectCore& core) {
  const auto& projs = core.projections;
  if (key.kind == ExprKind::kLiteral && key.literal == LiteralKind::kNumber) {
    const long long pos = std::atoll(key.text.c_str());
    if (pos >= 1 && static_cast<std::size_t>(pos) <= projs.size()) return pos - 1;
    return std::nullopt;
  }
  if (key.kind == ExprKind::kColumn && key.table.empty()) {
    for (std::size_t i = 0; i < projs.size(); ++i) {
      if (!projs[i].alias.empty() && iequals(projs[i].alias, key.column)) return i;
    }
  }
  const std::string text = lower(serialize(key));
  for (std::size_t i = 0; i < projs.size(); ++i) {
    if (lower(serialize(projs[i].expr)) == text) return i;
  }
  // Qualified on one side only: accept when the column name is unambiguous.
  if (key.kind == ExprKind::kColumn) {
    std::optional<std::size_t> hit;
    for (std::size_t i = 0; i < projs.size(); ++i) {
      const Expr& p = projs[i].expr;
      if (p.kind == ExprKind::kColumn && iequals(p.column, key.column) &&
          (p.table.empty() || key.table.empty())) {
        if (hit) return std::nullopt;
        hit = i;
      }
    }
    return hit;
  }
  return std::nullopt;
}

// Sort-key values of each gold row, or empty when they cannot be recovered
// (the comparison then falls back to strict row order).
std::vector<Row> gold_sort_keys(const std::string& gold, const ResultTable& result, const Database& db,
                                std::chrono::milliseconds timeout) {
  Query q;
  try {
    q = parse(gold);
  } catch (const Error&) {
    return {};
  }
  if (q.order_by.empty()) return {};
  const SelectCore& core = leftmost(q.body);
  std::vector<std::optional<std::size_t>> cols;
  bool all_mapped = true;
  for (const OrderItem& item : q.order_by) {
    cols.push_back(key_column(item.expr, core));
    all_mapped = all_mapped && cols.back().has_value();
  }
  std::vector<Row> keys;
  if (all_mapped) {
    for (const Row& r : result.rows) {
      Row k;
      for (const auto& c : cols) k.push_back(r[*c]);
      keys.push_back(std::move(k));
    }
    return keys;
  }
  // Unprojected keys: project them in a copy of the query. The sorted key
  // sequence does not depend on how ties are broken, so positions line up.
  if (!q.body.is_select() || q.body.select.distinct) return {};
  Query augmented = q;
  const std::size_t base = augmented.body.select.projections.size();
  for (const OrderItem& item : q.order_by) augmented.body.select.projections.push_back({item.expr, {}, {}});
  ResultTable extra;
  try {
    extra = db.query(serialize(augmented), timeout);
  } catch (const ExecError&) {
    return {};
  }
  if (extra.rows.size() != result.rows.size()) return {};
  for (const Row& r : extra.rows) keys.emplace_back(r.begin() + static_cast<std::ptrdiff_t>(base), r.end());
  return keys;
}

}  // namespace

MetricVerdict exe_match(const std::string& gold, const std::string& pred, const Database& db,
                        std::chrono::milliseconds timeout) {
  MetricVerdict v;
  v.metric = Metric::kExe;
  std::optional<ResultTable> g, p;
  std::string gold_error, pred_error;
  try {
    g = execute(gold, db, timeout);
  } catch (const ExecError& e) {
    gold_error = e.what();
  }
  try {
    p = execute(pred, db, timeout);
  } catch (const ExecError& e) {
    pred_error = e.what();
  }
  if (!g || !p) {
    v.outcome = Outcome::kInvalid;
    v.invalid = InvalidKind::kExecute;
    v.gold_defect = !g;
    v.detail = !g ? "gold: " + gold_error : "pred: " + pred_error;
    if (!g && !p) v.detail += "; pred: " + pred_error;
    return v;
  }
  const std::vector<Row> keys = g->ordered ? gold_sort_keys(gold, *g, db, timeout) : std::vector<Row>{};
  v.outcome = results_equal(*g, *p, keys) ? Outcome::kMatch : Outcome::kMismatch;
  return v;
}

}  // namespace etm
