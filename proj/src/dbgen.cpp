#include "etm/dbgen.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <random>
#include <stdexcept>

#include "etm/baseline.hpp"
#include "etm/errors.hpp"
#include "etm/parser.hpp"

namespace etm {
namespace {

enum class Domain { kInt, kReal, kText, kDate, kDateTime, kBool, kChar };

Domain domain_of(const std::string& declared) {
  const std::string t = lower(declared);
  auto has = [&](const char* s) { return t.find(s) != std::string::npos; };
  if (has("bool") || has("bit")) return Domain::kBool;
  if (has("datetime") || has("timestamp")) return Domain::kDateTime;
  if (has("date") || t == "time") return Domain::kDate;
  if (has("int")) return Domain::kInt;
  if (has("real") || has("floa") || has("doub") || has("dec")) return Domain::kReal;
  if (has("num")) return Domain::kInt;
  if (has("(1)")) return Domain::kChar;
  return Domain::kText;
}

// Number of distinct values a domain can produce; 0 means unbounded.
std::size_t domain_size(Domain d) {
  if (d == Domain::kBool) return 2;
  if (d == Domain::kChar) return 10;
  return 0;
}

const std::vector<std::string> kLexicon = {"alpha", "bravo",    "charlie", "delta", "echo",  "foxtrot", "golf",
                                           "hotel", "india",    "juliet",  "kilo",  "lima",  "mike",    "november",
                                           "oscar", "papa",     "quebec",  "romeo", "sierra", "tango"};
// Boundary strings: empty, case variants, digit strings and date prefixes
// that separate LIKE from SUBSTR and text from number comparisons.
const std::vector<std::string> kTextEdges = {"", "a", "Alpha", "ALPHA", "20", "2020", "2020-05", "2021-01", "20x",
                                             "05", "5", "a%b", "a_b"};
const std::vector<std::string> kPrefixes = {"20", "2021-", "ab", "Ab"};
const std::string kChars = "01ABYNMFxy";

class Generator {
 public:
  Generator(const Schema& schema, const GenConfig& cfg) : schema_(schema), cfg_(cfg), rng_(cfg.seed) {}

  std::string run();

 private:
  struct TableData {
    const Table* def = nullptr;
    std::vector<Row> rows;
  };
  struct FkGroup {
    std::size_t child = 0, parent = 0;
    std::vector<std::size_t> from, to;  // column indexes
  };

  const Schema& schema_;
  GenConfig cfg_;
  std::mt19937_64 rng_;
  std::vector<TableData> data_;
  std::vector<FkGroup> fks_;

  std::size_t below(std::size_t n) { return static_cast<std::size_t>(rng_() % n); }
  bool chance(double p) { return static_cast<double>(rng_() % 1000000) < p * 1000000.0; }

  std::size_t table_index(const std::string& name) const {
    for (std::size_t i = 0; i < data_.size(); ++i) {
      if (iequals(data_[i].def->name, name)) return i;
    }
    throw GenError("unknown table " + name);
  }
  static std::size_t column_index(const Table& t, const std::string& name) {
    for (std::size_t i = 0; i < t.columns.size(); ++i) {
      if (iequals(t.columns[i].name, name)) return i;
    }
    throw GenError("unknown column " + t.name + "." + name);
  }

  std::string date() {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", 2018 + static_cast<int>(below(5)), 1 + static_cast<int>(below(12)),
                  1 + static_cast<int>(below(28)));
    return buf;
  }

  Cell draw(Domain d, const std::vector<Row>& rows, std::size_t col) {
    if (chance(cfg_.edge_case_bias)) {
      // Repeat an earlier value a third of the time: duplicates break
      // uniqueness assumptions.
      if (!rows.empty() && below(3) == 0) return rows[below(rows.size())][col];
      switch (d) {
        case Domain::kInt: {
          static const std::int64_t pool[] = {0, -1, 1, -5, 99, 100};
          return pool[below(6)];
        }
        case Domain::kReal: {
          static const double pool[] = {0.0, -0.5, 0.25, 100.0};
          return pool[below(4)];
        }
        case Domain::kText:
          return kTextEdges[below(kTextEdges.size())];
        case Domain::kDate: {
          static const char* pool[] = {"2020-06-01", "2020-06-30", "2021-01-01", "2019-12-31"};
          return std::string(pool[below(4)]);
        }
        case Domain::kDateTime:
          return std::string(below(2) ? "2020-06-01 00:00:00" : "2021-01-01 12:30:00");
        default:
          break;
      }
    }
    switch (d) {
      case Domain::kInt:
        return static_cast<std::int64_t>(below(106)) - 5;
      case Domain::kReal:
        return static_cast<double>(static_cast<std::int64_t>(below(10500)) - 500) / 100.0;
      case Domain::kText: {
        const std::string& w = kLexicon[below(kLexicon.size())];
        return below(10) < 3 ? kPrefixes[below(kPrefixes.size())] + w : w;
      }
      case Domain::kDate:
        return date();
      case Domain::kDateTime: {
        char buf[32];
        std::snprintf(buf, sizeof buf, " %02d:%02d:00", static_cast<int>(below(24)), static_cast<int>(below(60)));
        return date() + buf;
      }
      case Domain::kBool:
        return static_cast<std::int64_t>(below(2));
      case Domain::kChar:
        return std::string(1, kChars[below(kChars.size())]);
    }
    return {};
  }

  // Deterministic fresh value for unique columns once random draws keep
  // colliding.
  static Cell fresh(Domain d, std::size_t n) {
    switch (d) {
      case Domain::kInt:
        return static_cast<std::int64_t>(101 + n);
      case Domain::kReal:
        return static_cast<double>(n) + 100.5;
      case Domain::kDate:
      case Domain::kDateTime: {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", 2030 + static_cast<int>(n / 336),
                      1 + static_cast<int>(n / 28 % 12), 1 + static_cast<int>(n % 28));
        return std::string(buf);
      }
      default:
        return kLexicon[n % kLexicon.size()] + "_" + std::to_string(n);
    }
  }

  void plan_foreign_keys();
  std::vector<std::size_t> table_order() const;
  void fill_table(TableData& t, std::size_t rows);
  void add_nulls(TableData& t);
  void fill_foreign_keys(std::size_t table);
  std::string script() const;
};

std::string Generator::run() {
  cfg_.validate();
  for (const Table& t : schema_.tables()) data_.push_back({&t, {}});
  plan_foreign_keys();
  for (TableData& t : data_) {
    std::size_t rows = cfg_.empty_tables.count(lower(t.def->name))
                           ? 0
                           : static_cast<std::size_t>(cfg_.rows_min) + below(cfg_.rows_max - cfg_.rows_min + 1);
    for (const Column& c : t.def->columns) {
      const std::size_t size = domain_size(domain_of(c.declared_type));
      if ((c.is_unique || c.is_primary_key) && size && rows > size) {
        if (size < static_cast<std::size_t>(cfg_.rows_min)) {
          throw GenError("unique column " + t.def->name + "." + c.name + " has only " + std::to_string(size) +
                         " values for " + std::to_string(cfg_.rows_min) + " rows");
        }
        rows = size;
      }
    }
    fill_table(t, rows);
    add_nulls(t);
  }
  for (std::size_t i : table_order()) fill_foreign_keys(i);
  return script();
}

void Generator::plan_foreign_keys() {
  for (const FkLink& link : schema_.foreign_keys()) {
    const std::size_t child = table_index(link.from.table), parent = table_index(link.to.table);
    const std::size_t from = column_index(*data_[child].def, link.from.column);
    const std::size_t to = column_index(*data_[parent].def, link.to.column);
    // Links between the same two tables on distinct columns form one
    // composite key; a repeated target column starts a separate key.
    FkGroup* group = nullptr;
    for (FkGroup& g : fks_) {
      if (g.child == child && g.parent == parent && std::find(g.from.begin(), g.from.end(), from) == g.from.end() &&
          std::find(g.to.begin(), g.to.end(), to) == g.to.end()) {
        group = &g;
        break;
      }
    }
    if (!group) group = &fks_.emplace_back(FkGroup{child, parent, {}, {}});
    group->from.push_back(from);
    group->to.push_back(to);
  }
}

std::vector<std::size_t> Generator::table_order() const {
  std::vector<int> pending(data_.size(), 0);
  for (const FkGroup& g : fks_) {
    if (g.child != g.parent) ++pending[g.child];
  }
  std::vector<std::size_t> order;
  std::vector<bool> done(data_.size(), false);
  for (bool progress = true; progress;) {
    progress = false;
    for (std::size_t i = 0; i < data_.size(); ++i) {
      if (done[i] || pending[i] > 0) continue;
      done[i] = true;
      progress = true;
      order.push_back(i);
      for (const FkGroup& g : fks_) {
        if (g.parent == i && g.child != i) --pending[g.child];
      }
    }
  }
  // Cycles: declaration order; the audit reports anything left unsatisfied.
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!done[i]) order.push_back(i);
  }
  return order;
}

void Generator::fill_table(TableData& t, std::size_t rows) {
  const auto& cols = t.def->columns;
  std::vector<std::vector<std::string>> seen(cols.size());
  std::vector<std::string> keys_seen;
  std::vector<std::size_t> pk;
  if (t.def->primary_key.size() > 1) {
    for (const auto& name : t.def->primary_key) pk.push_back(column_index(*t.def, name));
  }
  std::size_t counter = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    Row row;
    for (int attempt = 0;; ++attempt) {
      row.assign(cols.size(), {});
      for (std::size_t c = 0; c < cols.size(); ++c) {
        const Domain d = domain_of(cols[c].declared_type);
        Cell v = draw(d, t.rows, c);
        if (cols[c].is_unique || cols[c].is_primary_key) {
          auto taken = [&](const Cell& x) {
            return std::find(seen[c].begin(), seen[c].end(), sql_literal(x)) != seen[c].end();
          };
          for (int k = 0; k < 50 && taken(v); ++k) v = draw(d, {}, c);
          if (domain_size(d)) {
            for (std::size_t k = 0; k < domain_size(d) && taken(v); ++k) {
              v = d == Domain::kBool ? Cell{static_cast<std::int64_t>(k)} : Cell{std::string(1, kChars[k])};
            }
          }
          while (taken(v)) v = fresh(d, counter++);
          seen[c].push_back(sql_literal(v));
        }
        row[c] = std::move(v);
      }
      if (pk.empty()) break;
      std::string key;
      for (std::size_t c : pk) key += sql_literal(row[c]) + "|";
      if (std::find(keys_seen.begin(), keys_seen.end(), key) == keys_seen.end()) {
        keys_seen.push_back(key);
        break;
      }
      if (attempt > 50) throw GenError("cannot draw distinct composite keys for " + t.def->name);
    }
    t.rows.push_back(std::move(row));
  }
}

void Generator::add_nulls(TableData& t) {
  const auto& cols = t.def->columns;
  for (std::size_t c = 0; c < cols.size(); ++c) {
    const bool key_member = std::any_of(t.def->primary_key.begin(), t.def->primary_key.end(),
                                        [&](const std::string& k) { return iequals(k, cols[c].name); });
    if (cols[c].is_not_null || cols[c].is_primary_key || key_member) continue;
    bool any = false;
    for (Row& r : t.rows) {
      if (chance(cfg_.null_rate)) {
        r[c] = std::monostate{};
        any = true;
      }
    }
    if (!any && cfg_.null_rate > 0 && t.rows.size() >= 10) t.rows[below(t.rows.size())][c] = std::monostate{};
  }
}

void Generator::fill_foreign_keys(std::size_t table) {
  TableData& t = data_[table];
  const auto& cols = t.def->columns;
  for (const FkGroup& g : fks_) {
    if (g.child != table || t.rows.empty()) continue;
    std::vector<Row> candidates;
    for (const Row& p : data_[g.parent].rows) {
      Row values;
      for (std::size_t c : g.to) values.push_back(p[c]);
      const bool has_null =
          std::any_of(values.begin(), values.end(), [](const Cell& v) { return std::holds_alternative<std::monostate>(v); });
      if (!has_null && std::find(candidates.begin(), candidates.end(), values) == candidates.end()) {
        candidates.push_back(std::move(values));
      }
    }
    const bool nullable = std::none_of(g.from.begin(), g.from.end(), [&](std::size_t c) { return cols[c].is_not_null; });
    auto assign = [&](Row& r, const Row& values) {
      for (std::size_t k = 0; k < g.from.size(); ++k) r[g.from[k]] = values[k];
    };
    if (candidates.empty()) {
      // No parent to point at: NULL if allowed, otherwise no rows at all.
      if (!nullable) {
        t.rows.clear();
        return;
      }
      for (Row& r : t.rows) assign(r, Row(g.from.size()));
      continue;
    }
    const bool unique = g.from.size() == 1 && (cols[g.from[0]].is_unique || cols[g.from[0]].is_primary_key);
    if (unique) {
      std::shuffle(candidates.begin(), candidates.end(), rng_);
      if (t.rows.size() > candidates.size()) t.rows.resize(candidates.size());
      for (std::size_t r = 0; r < t.rows.size(); ++r) assign(t.rows[r], candidates[r]);
      continue;
    }
    for (Row& r : t.rows) {
      if (nullable && chance(cfg_.null_rate)) {
        assign(r, Row(g.from.size()));
      } else {
        assign(r, candidates[below(candidates.size())]);
      }
    }
  }
  // Copied keys may collide on a composite primary key: keep the first.
  if (t.def->primary_key.size() > 1) {
    std::vector<std::size_t> pk;
    for (const auto& name : t.def->primary_key) pk.push_back(column_index(*t.def, name));
    std::vector<Row> kept, keys;
    for (Row& r : t.rows) {
      Row key;
      for (std::size_t c : pk) key.push_back(r[c]);
      if (std::find(keys.begin(), keys.end(), key) != keys.end()) continue;
      keys.push_back(std::move(key));
      kept.push_back(std::move(r));
    }
    t.rows = std::move(kept);
  }
}

std::string quote_ident(const std::string& name) {
  std::string out = "\"";
  for (char c : name) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string Generator::script() const {
  std::string out;
  for (const TableData& t : data_) {
    out += "CREATE TABLE " + quote_ident(t.def->name) + " (";
    for (std::size_t c = 0; c < t.def->columns.size(); ++c) {
      const Column& col = t.def->columns[c];
      out += (c ? ", " : "") + quote_ident(col.name);
      if (!col.declared_type.empty()) out += " " + col.declared_type;
      if (col.is_not_null) out += " NOT NULL";
      if (col.is_unique && !col.is_primary_key) out += " UNIQUE";
    }
    if (!t.def->primary_key.empty()) {
      out += ", PRIMARY KEY (";
      for (std::size_t k = 0; k < t.def->primary_key.size(); ++k) {
        out += (k ? ", " : "") + quote_ident(t.def->primary_key[k]);
      }
      out += ")";
    }
    for (const FkLink& link : schema_.foreign_keys()) {
      if (!iequals(link.from.table, t.def->name)) continue;
      out += ", FOREIGN KEY (" + quote_ident(link.from.column) + ") REFERENCES " + quote_ident(link.to.table) + " (" +
             quote_ident(link.to.column) + ")";
    }
    out += ");\n";
  }
  for (const TableData& t : data_) {
    for (const Row& r : t.rows) {
      out += "INSERT INTO " + quote_ident(t.def->name) + " VALUES (";
      for (std::size_t c = 0; c < r.size(); ++c) out += (c ? ", " : "") + sql_literal(r[c]);
      out += ");\n";
    }
  }
  return out;
}

std::int64_t count(const Database& db, const std::string& sql) {
  const ResultTable t = db.query(sql);
  return std::get<std::int64_t>(t.rows.at(0).at(0));
}

}  // namespace

void GenConfig::validate() const {
  if (rows_min < 1 || rows_max < rows_min) throw std::invalid_argument("rows range must satisfy 1 <= min <= max");
  if (null_rate < 0 || null_rate > 1) throw std::invalid_argument("null_rate must be in [0,1]");
  if (edge_case_bias < 0 || edge_case_bias > 1) throw std::invalid_argument("edge_case_bias must be in [0,1]");
}

std::string generate_script(const Schema& schema, const GenConfig& cfg) { return Generator(schema, cfg).run(); }

Database generate_db(const Schema& schema, const GenConfig& cfg) {
  return Database::from_script(generate_script(schema, cfg));
}

std::vector<std::string> audit_constraints(const Schema& schema, const Database& db) {
  std::vector<std::string> problems;
  auto check = [&](const std::string& what, const std::string& sql) {
    if (const std::int64_t n = count(db, sql); n > 0) problems.push_back(what + ": " + std::to_string(n));
  };
  for (const Table& t : schema.tables()) {
    const std::string tn = quote_ident(t.name);
    for (const Column& c : t.columns) {
      const std::string cn = quote_ident(c.name);
      if (c.is_not_null) check(t.name + "." + c.name + " NULL", "SELECT COUNT(*) FROM " + tn + " WHERE " + cn + " IS NULL");
      if (c.is_unique || c.is_primary_key) {
        check(t.name + "." + c.name + " duplicate", "SELECT COUNT(*) FROM (SELECT 1 FROM " + tn + " WHERE " + cn +
                                                        " IS NOT NULL GROUP BY " + cn + " HAVING COUNT(*) > 1)");
      }
    }
    if (t.primary_key.size() > 1) {
      std::string key;
      for (const auto& k : t.primary_key) key += (key.empty() ? "" : ", ") + quote_ident(k);
      check(t.name + " duplicate key",
            "SELECT COUNT(*) FROM (SELECT 1 FROM " + tn + " GROUP BY " + key + " HAVING COUNT(*) > 1)");
    }
  }
  for (const FkLink& link : schema.foreign_keys()) {
    const std::string from = quote_ident(link.from.column), to = quote_ident(link.to.column);
    check(link.from.table + "." + link.from.column + " dangling",
          "SELECT COUNT(*) FROM " + quote_ident(link.from.table) + " WHERE " + from + " IS NOT NULL AND " + from +
              " NOT IN (SELECT " + to + " FROM " + quote_ident(link.to.table) + " WHERE " + to + " IS NOT NULL)");
  }
  return problems;
}

namespace {

std::string preview(const ResultTable& t) {
  std::string out = std::to_string(t.rows.size()) + " rows";
  for (std::size_t i = 0; i < t.rows.size() && i < 3; ++i) {
    out += i ? ", (" : ": (";
    for (std::size_t c = 0; c < t.rows[i].size(); ++c) out += (c ? ", " : "") + sql_literal(t.rows[i][c]);
    out += ")";
  }
  return out + (t.rows.size() > 3 ? ", ..." : "");
}

}  // namespace

std::optional<Counterexample> counterexample_search(const std::string& q1, const std::string& q2, const Schema& schema,
                                                    int trials, const GenConfig& cfg) {
  parse(q1);
  parse(q2);
  for (int i = 0; i < trials; ++i) {
    GenConfig trial = cfg;
    trial.seed = cfg.seed + static_cast<std::uint64_t>(i);
    std::string script = generate_script(schema, trial);
    const Database db = Database::from_script(script);
    std::optional<ResultTable> r1, r2;
    std::string e1, e2;
    try {
      r1 = execute(q1, db);
    } catch (const ExecError& e) {
      e1 = e.what();
    }
    try {
      r2 = execute(q2, db);
    } catch (const ExecError& e) {
      e2 = e.what();
    }
    if (!r1 && !r2) continue;
    if (!r1 || !r2) {
      return Counterexample{trial.seed, std::move(script), !r1 ? "first query failed: " + e1 : "second query failed: " + e2};
    }
    if (exe_match(q1, q2, db).matched()) continue;
    return Counterexample{trial.seed, std::move(script), "first: " + preview(*r1) + "; second: " + preview(*r2)};
  }
  return std::nullopt;
}

}  // namespace etm
