#pragma once

#include <algorithm>
#include <cctype>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "etm/schema.hpp"

namespace etm::testing {

// Template-based query pairs over one schema. A pair is either two
// renderings of the same query shape (equivalent by construction), the same
// with a small semantic mutation, or two unrelated queries.
class QueryGen {
 public:
  QueryGen(const Schema& schema, std::uint64_t seed) : schema_(schema), rng_(seed) {
    for (const Table& t : schema_.tables()) {
      if (!t.columns.empty()) tables_.push_back(&t);
    }
    for (const FkLink& fk : schema_.foreign_keys()) links_.push_back(fk);
  }

  std::string query() { return render(draw(), style()); }

  std::pair<std::string, std::string> pair() {
    const Template s = draw();
    const int kind = pick(10);
    if (kind < 5) return {render(s, style()), render(s, style())};
    if (kind < 8) return {render(s, style()), render(mutate(s), style())};
    return {render(s, style()), render(draw(), style())};
  }

 private:
  struct Atom {
    enum Kind { kCmp, kBetween, kInList, kIsNull } kind = kCmp;
    std::string col;
    std::string op = "=";
    std::vector<std::string> vals;
  };

  enum class Shape { kPlain, kAgg, kGroup, kTopK, kJoin };

  struct Template {
    const Table* table = nullptr;
    Shape shape = Shape::kPlain;
    std::vector<std::string> proj;
    bool distinct = false;
    std::string fn;  // kAgg
    std::string agg_col;
    std::vector<Atom> where;
    bool disjunction = false;
    std::string order_col;
    bool desc = false;
    int limit = 1;
    FkLink link;  // kJoin: child.from = parent.to
    std::string parent_col;
  };

  struct Style {
    bool alias = false;
    bool lower = false;
    bool shuffle = false;
    bool expand_between = false;
    bool expand_in = false;
    bool not_equal_as_not = false;
    bool flip = false;
    bool count_star = false;
    bool agg_as_order = false;
    bool explicit_asc = false;
  };

  const Schema& schema_;
  std::mt19937_64 rng_;
  std::vector<const Table*> tables_;
  std::vector<FkLink> links_;

  int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng_); }
  bool coin() { return pick(2) == 1; }
  template <class T>
  const T& one_of(const std::vector<T>& v) { return v[static_cast<std::size_t>(pick(static_cast<int>(v.size())))]; }

  static bool numeric(const Column& c) {
    std::string t = c.declared_type;
    for (char& ch : t) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    return t.find("INT") != std::string::npos || t.find("DEC") != std::string::npos ||
           t.find("REAL") != std::string::npos || t.find("NUM") != std::string::npos ||
           t.find("FLOAT") != std::string::npos || t.find("DOUBLE") != std::string::npos;
  }

  const Column& column(const Table& t) { return one_of(t.columns); }

  std::string value(const Column& c) {
    if (numeric(c)) return std::to_string(pick(40));
    static const std::vector<std::string> words = {"'a'", "'ab'", "'Ab'", "'2020'", "'2021-01-01'", "'x'"};
    return one_of(words);
  }

  Atom atom(const Table& t) {
    const Column& c = column(t);
    Atom a;
    a.col = c.name;
    const int k = pick(10);
    if (k < 5) {
      static const std::vector<std::string> ops = {"=", "!=", "<", ">", "<=", ">="};
      a.op = numeric(c) ? one_of(ops) : (coin() ? "=" : "!=");
      a.vals = {value(c)};
    } else if (k < 7 && numeric(c)) {
      a.kind = Atom::kBetween;
      int lo = pick(30);
      a.vals = {std::to_string(lo), std::to_string(lo + pick(15))};
    } else if (k < 9) {
      a.kind = Atom::kInList;
      a.vals = {value(c), value(c)};
      if (a.vals[0] == a.vals[1]) a.vals.pop_back();
    } else {
      a.kind = Atom::kIsNull;
      a.op = coin() ? "IS NULL" : "IS NOT NULL";
    }
    return a;
  }

  Template draw() {
    Template s;
    const int k = pick(links_.empty() ? 8 : 10);
    if (k >= 8) {
      s.shape = Shape::kJoin;
      s.link = one_of(links_);
      s.table = &schema_.table(s.link.from.table);
      s.parent_col = column(schema_.table(s.link.to.table)).name;
      s.proj = {column(*s.table).name};
    } else {
      s.table = one_of(tables_);
      s.shape = static_cast<Shape>(k % 4);
      const int n = 1 + pick(std::min<int>(3, static_cast<int>(s.table->columns.size())));
      for (int i = 0; i < n; ++i) {
        const std::string c = column(*s.table).name;
        if (std::find(s.proj.begin(), s.proj.end(), c) == s.proj.end()) s.proj.push_back(c);
      }
      s.distinct = s.shape == Shape::kPlain && pick(4) == 0;
      static const std::vector<std::string> fns = {"COUNT", "MAX", "MIN", "SUM", "AVG"};
      s.fn = one_of(fns);
      s.agg_col = column(*s.table).name;
      s.order_col = column(*s.table).name;
      s.desc = coin();
      s.limit = 1 + pick(3);
    }
    const int atoms = pick(3);
    for (int i = 0; i < atoms; ++i) s.where.push_back(atom(*s.table));
    s.disjunction = atoms > 1 && coin();
    return s;
  }

  Template mutate(Template s) {
    switch (pick(6)) {
      case 0:
        if (!s.where.empty()) {
          s.where.pop_back();
          break;
        }
        [[fallthrough]];
      case 1:
        s.where.push_back(atom(*s.table));
        break;
      case 2:
        s.distinct = !s.distinct;
        break;
      case 3:
        s.desc = !s.desc;
        s.limit = 1 + pick(3);
        break;
      case 4:
        s.fn = s.fn == "MAX" ? "MIN" : "MAX";
        break;
      default:
        if (!s.where.empty() && !s.where[0].vals.empty()) s.where[0].vals[0] = value(s.table->columns[0]);
        s.proj.push_back(column(*s.table).name);
        break;
    }
    return s;
  }

  Style style() {
    Style st;
    st.alias = coin();
    st.lower = pick(4) == 0;
    st.shuffle = coin();
    st.expand_between = coin();
    st.expand_in = coin();
    st.not_equal_as_not = coin();
    st.flip = pick(4) == 0;
    st.count_star = coin();
    st.agg_as_order = coin();
    st.explicit_asc = coin();
    return st;
  }

  static std::string mirror(const std::string& op) {
    if (op == "<") return ">";
    if (op == ">") return "<";
    if (op == "<=") return ">=";
    if (op == ">=") return "<=";
    return op;
  }

  std::string atom_text(const Atom& a, const std::string& col, const Style& st, bool in_or) {
    switch (a.kind) {
      case Atom::kCmp:
        if (a.op == "!=" && st.not_equal_as_not) return "NOT " + col + " = " + a.vals[0];
        if (st.flip) return a.vals[0] + " " + mirror(a.op) + " " + col;
        return col + " " + a.op + " " + a.vals[0];
      case Atom::kBetween:
        if (st.expand_between) {
          const std::string e = col + " >= " + a.vals[0] + " AND " + col + " <= " + a.vals[1];
          return in_or ? "(" + e + ")" : e;
        }
        return col + " BETWEEN " + a.vals[0] + " AND " + a.vals[1];
      case Atom::kInList: {
        if (st.expand_in) {
          std::string e;
          for (const std::string& v : a.vals) e += (e.empty() ? "" : " OR ") + col + " = " + v;
          return a.vals.size() > 1 && !in_or ? "(" + e + ")" : e;
        }
        std::string list;
        for (const std::string& v : a.vals) list += (list.empty() ? "" : ", ") + v;
        return col + " IN (" + list + ")";
      }
      case Atom::kIsNull:
        return col + " " + a.op;
    }
    return {};
  }

  std::string render(const Template& s, const Style& st) {
    const bool join = s.shape == Shape::kJoin;
    const std::string child = st.alias || join ? (st.alias ? "T1" : s.table->name) : "";
    const std::string parent = join ? (st.alias ? "T2" : s.link.to.table) : "";
    auto ref = [&](const std::string& c) { return child.empty() ? c : child + "." + c; };
    auto pref = [&](const std::string& c) { return parent + "." + c; };

    std::string from = s.table->name + (st.alias ? " AS T1" : "");
    if (join) {
      std::string lhs = ref(s.link.from.column), rhs = pref(s.link.to.column);
      if (st.flip) std::swap(lhs, rhs);
      const std::string p = s.link.to.table + (st.alias ? " AS T2" : "");
      from += " JOIN " + p + " ON " + lhs + " = " + rhs;
    }

    std::vector<std::string> conds;
    for (const Atom& a : s.where) conds.push_back(atom_text(a, ref(a.col), st, s.disjunction));
    if (st.shuffle) std::shuffle(conds.begin(), conds.end(), rng_);
    std::string where;
    for (const std::string& c : conds) where += (where.empty() ? "" : (s.disjunction ? " OR " : " AND ")) + c;
    if (!where.empty()) where = " WHERE " + where;

    std::vector<std::string> proj;
    std::string tail;
    switch (s.shape) {
      case Shape::kPlain:
      case Shape::kTopK:
        for (const std::string& c : s.proj) proj.push_back(ref(c));
        if (s.shape == Shape::kTopK) {
          tail = " ORDER BY " + ref(s.order_col) + (s.desc ? " DESC" : (st.explicit_asc ? " ASC" : "")) + " LIMIT " +
                 std::to_string(s.limit);
        }
        break;
      case Shape::kAgg: {
        const Column& c = *s.table->find_column(s.agg_col);
        if ((s.fn == "MAX" || s.fn == "MIN") && st.agg_as_order) {
          proj.push_back(ref(s.agg_col));
          tail = " ORDER BY " + ref(s.agg_col) + (s.fn == "MAX" ? " DESC" : " ASC") + " LIMIT 1";
        } else if (s.fn == "COUNT" && c.is_not_null && st.count_star) {
          proj.push_back("COUNT(*)");
        } else {
          proj.push_back(s.fn + "(" + ref(s.agg_col) + ")");
        }
        break;
      }
      case Shape::kGroup:
        proj = {ref(s.proj[0]), "COUNT(*)"};
        tail = " GROUP BY " + ref(s.proj[0]);
        break;
      case Shape::kJoin:
        proj = {ref(s.proj[0]), pref(s.parent_col)};
        break;
    }
    if (st.shuffle) std::shuffle(proj.begin(), proj.end(), rng_);
    std::string select;
    for (const std::string& p : proj) select += (select.empty() ? "" : ", ") + p;

    std::string sql = std::string(s.distinct ? "SELECT DISTINCT " : "SELECT ") + select + " FROM " + from + where + tail;
    if (st.lower) {
      for (const char* kw : {"SELECT", "FROM", "WHERE", "ORDER BY", "LIMIT", "GROUP BY", "JOIN", "DISTINCT"}) {
        std::string lower = kw;
        for (char& ch : lower) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        for (std::size_t p = sql.find(kw); p != std::string::npos; p = sql.find(kw, p + lower.size())) {
          sql.replace(p, lower.size(), lower);
        }
      }
    }
    return sql;
  }
};

}  // namespace etm::testing
