#include "etm/schema.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "etm/errors.hpp"
#include "etm/parser.hpp"
#include "json.hpp"

namespace etm {

using nlohmann::json;

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) != std::tolower(static_cast<unsigned char>(b[i]))) {
      return false;
    }
  }
  return true;
}

const Column* Table::find_column(std::string_view column) const {
  for (const Column& c : columns) {
    if (iequals(c.name, column)) return &c;
  }
  return nullptr;
}

Schema::Schema(std::string db_id, std::vector<Table> tables, std::vector<FkLink> foreign_keys)
    : db_id_(std::move(db_id)), tables_(std::move(tables)), foreign_keys_(std::move(foreign_keys)) {
  std::set<std::string> names;
  for (Table& t : tables_) {
    if (!names.insert(lower(t.name)).second) throw SchemaError("duplicate table: " + t.name);
    if (t.columns.empty()) throw SchemaError("table has no columns: " + t.name);
    std::set<std::string> cols;
    for (Column& c : t.columns) {
      if (!cols.insert(lower(c.name)).second) throw SchemaError("duplicate column: " + t.name + "." + c.name);
    }
    for (const std::string& key : t.primary_key) {
      if (!t.find_column(key)) throw SchemaError("primary key names unknown column: " + t.name + "." + key);
    }
    // A sole key column is unique and not null; composite members are only not null.
    for (Column& c : t.columns) {
      const bool member = std::any_of(t.primary_key.begin(), t.primary_key.end(),
                                      [&](const std::string& k) { return iequals(k, c.name); });
      if (c.is_primary_key && !member) t.primary_key = {c.name};
      if (member) c.is_not_null = true;
      c.is_primary_key = member && t.primary_key.size() == 1;
      if (c.is_primary_key) c.is_unique = true;
    }
  }
  for (const FkLink& fk : foreign_keys_) {
    for (const ColumnId* end : {&fk.from, &fk.to}) {
      const Table* t = find_table(end->table);
      if (!t || !t->find_column(end->column)) {
        throw SchemaError("foreign key names unknown column: " + end->table + "." + end->column);
      }
    }
  }
}

const Table* Schema::find_table(std::string_view table) const {
  for (const Table& t : tables_) {
    if (iequals(t.name, table)) return &t;
  }
  return nullptr;
}

const Table& Schema::table(std::string_view table) const {
  const Table* t = find_table(table);
  if (!t) throw UnknownTable(std::string(table));
  return *t;
}

const Column& Schema::column(std::string_view table, std::string_view column) const {
  const Column* c = this->table(table).find_column(column);
  if (!c) throw UnknownColumn(std::string(table), std::string(column));
  return *c;
}

bool Schema::is_unique(std::string_view table, std::string_view column) const {
  const Column& c = this->column(table, column);
  return c.is_unique || c.is_primary_key;
}

bool Schema::is_non_null(std::string_view table, std::string_view column) const {
  return this->column(table, column).is_not_null;
}

bool Schema::is_single_primary_key(std::string_view table, std::string_view column) const {
  return this->column(table, column).is_primary_key;
}

std::optional<LinkDirection> Schema::pk_fk_link(const ColumnId& a, const ColumnId& b) const {
  column(a.table, a.column);
  column(b.table, b.column);
  if (iequals(a.table, b.table) && iequals(a.column, b.column)) return std::nullopt;
  auto same = [](const ColumnId& x, const ColumnId& y) {
    return iequals(x.table, y.table) && iequals(x.column, y.column);
  };
  auto is_key = [&](const ColumnId& id) {
    const Table& t = table(id.table);
    return std::any_of(t.primary_key.begin(), t.primary_key.end(),
                       [&](const std::string& k) { return iequals(k, id.column); });
  };
  for (const FkLink& fk : foreign_keys_) {
    if (same(fk.from, b) && same(fk.to, a) && is_key(a)) return LinkDirection::kFirstIsPrimary;
    if (same(fk.from, a) && same(fk.to, b) && is_key(b)) return LinkDirection::kSecondIsPrimary;
  }
  return std::nullopt;
}

std::vector<std::string> Schema::all_columns(std::string_view table) const {
  std::vector<std::string> out;
  for (const Column& c : this->table(table).columns) out.push_back(c.name);
  return out;
}

std::string Schema::to_json() const {
  json doc;
  doc["db_id"] = db_id_;
  doc["tables"] = json::array();
  for (const Table& t : tables_) {
    json jt;
    jt["name"] = t.name;
    jt["columns"] = json::array();
    for (const Column& c : t.columns) {
      const bool member = std::any_of(t.primary_key.begin(), t.primary_key.end(),
                                      [&](const std::string& k) { return iequals(k, c.name); });
      jt["columns"].push_back({{"name", c.name},
                               {"type", c.declared_type},
                               {"primary_key", member},
                               {"unique", c.is_unique && !c.is_primary_key},
                               {"not_null", c.is_not_null}});
    }
    doc["tables"].push_back(jt);
  }
  doc["foreign_keys"] = json::array();
  for (const FkLink& fk : foreign_keys_) {
    doc["foreign_keys"].push_back(
        {{"from", {fk.from.table, fk.from.column}}, {"to", {fk.to.table, fk.to.column}}});
  }
  return doc.dump(2);
}

namespace {

Schema from_native(const json& doc) {
  std::vector<Table> tables;
  for (const json& jt : doc.at("tables")) {
    Table t;
    t.name = jt.at("name").get<std::string>();
    for (const json& jc : jt.at("columns")) {
      Column c;
      c.name = jc.at("name").get<std::string>();
      c.declared_type = jc.value("type", "");
      const bool pk = jc.value("primary_key", false);
      c.is_unique = jc.value("unique", false);
      c.is_not_null = jc.value("not_null", false);
      if (pk) t.primary_key.push_back(c.name);
      t.columns.push_back(std::move(c));
    }
    tables.push_back(std::move(t));
  }
  std::vector<FkLink> fks;
  if (doc.contains("foreign_keys")) {
    for (const json& jf : doc.at("foreign_keys")) {
      const json& from = jf.at("from");
      const json& to = jf.at("to");
      fks.push_back({{from.at(0).get<std::string>(), from.at(1).get<std::string>()},
                     {to.at(0).get<std::string>(), to.at(1).get<std::string>()}});
    }
  }
  return Schema(doc.at("db_id").get<std::string>(), std::move(tables), std::move(fks));
}

Schema from_spider(const json& doc) {
  std::vector<Table> tables;
  for (const json& name : doc.at("table_names_original")) {
    Table t;
    t.name = name.get<std::string>();
    tables.push_back(std::move(t));
  }
  const json& cols = doc.at("column_names_original");
  const json types = doc.value("column_types", json::array());
  std::vector<ColumnId> ids(cols.size());
  for (std::size_t i = 0; i < cols.size(); ++i) {
    const int table_index = cols[i].at(0).get<int>();
    if (table_index < 0) continue;  // the "*" pseudo column
    if (static_cast<std::size_t>(table_index) >= tables.size()) throw SchemaError("column names unknown table");
    Column c;
    c.name = cols[i].at(1).get<std::string>();
    c.declared_type = i < types.size() ? types[i].get<std::string>() : "";
    ids[i] = {tables[table_index].name, c.name};
    tables[table_index].columns.push_back(std::move(c));
  }
  auto column_at = [&](const json& idx) -> const ColumnId& {
    const auto i = idx.get<std::size_t>();
    if (i >= ids.size() || ids[i].table.empty()) throw SchemaError("key names unknown column index");
    return ids[i];
  };
  for (const json& pk : doc.value("primary_keys", json::array())) {
    std::vector<ColumnId> members;
    if (pk.is_array()) {
      for (const json& idx : pk) members.push_back(column_at(idx));
    } else {
      members.push_back(column_at(pk));
    }
    for (const ColumnId& m : members) {
      for (Table& t : tables) {
        if (t.name == m.table) t.primary_key.push_back(m.column);
      }
    }
  }
  std::vector<FkLink> fks;
  for (const json& fk : doc.value("foreign_keys", json::array())) {
    fks.push_back({column_at(fk.at(0)), column_at(fk.at(1))});
  }
  return Schema(doc.at("db_id").get<std::string>(), std::move(tables), std::move(fks));
}

Schema from_document(const json& doc) {
  try {
    if (doc.contains("table_names_original")) return from_spider(doc);
    return from_native(doc);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed schema document: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// DDL

class DdlReader {
 public:
  explicit DdlReader(std::string_view ddl) {
    try {
      tokens_ = tokenize(ddl);
    } catch (const ParseError& e) {
      throw SchemaError(std::string("unparsable DDL: ") + e.what());
    }
  }

  Schema read(std::string db_id) {
    while (!at_end()) {
      if (word_is("CREATE")) {
        std::size_t k = 1;
        if (word_is("TEMP", 1) || word_is("TEMPORARY", 1)) k = 2;
        if (word_is("TABLE", k)) {
          pos_ += k + 1;
          read_create_table();
          continue;
        }
      }
      skip_statement();
    }
    return Schema(std::move(db_id), std::move(tables_), resolve_foreign_keys());
  }

 private:
  struct PendingFk {
    std::string table;
    std::vector<std::string> columns;
    std::string target_table;
    std::vector<std::string> target_columns;
  };

  bool at_end() const { return tokens_[pos_].kind == TokenKind::kEnd; }
  const Token& peek(std::size_t ahead = 0) const {
    return tokens_[std::min(pos_ + ahead, tokens_.size() - 1)];
  }
  bool word_is(std::string_view w, std::size_t ahead = 0) const {
    const Token& t = peek(ahead);
    return (t.kind == TokenKind::kIdentifier || t.kind == TokenKind::kKeyword) && t.quote == QuoteStyle::kNone &&
           iequals(t.text, w);
  }
  bool symbol_is(std::string_view s, std::size_t ahead = 0) const {
    const Token& t = peek(ahead);
    return t.kind == TokenKind::kSymbol && t.text == s;
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw SchemaError("unparsable DDL at " + std::to_string(peek().position) + ": " + msg);
  }
  void expect_symbol(std::string_view s) {
    if (!symbol_is(s)) fail("expected '" + std::string(s) + "'");
    ++pos_;
  }
  std::string name() {
    const Token& t = peek();
    if (t.kind != TokenKind::kIdentifier && t.kind != TokenKind::kString && t.kind != TokenKind::kKeyword) {
      fail("expected a name");
    }
    ++pos_;
    return t.text;
  }
  void skip_statement() {
    while (!at_end() && !symbol_is(";")) ++pos_;
    if (!at_end()) ++pos_;
  }
  void skip_balanced() {
    expect_symbol("(");
    int depth = 1;
    while (depth > 0) {
      if (at_end()) fail("unbalanced parentheses");
      if (symbol_is("(")) ++depth;
      if (symbol_is(")")) --depth;
      ++pos_;
    }
  }
  std::vector<std::string> name_list() {
    expect_symbol("(");
    std::vector<std::string> names;
    do {
      names.push_back(name());
      while (word_is("ASC") || word_is("DESC")) ++pos_;
      if (word_is("COLLATE")) pos_ += 2;
    } while (symbol_is(",") && ++pos_);
    expect_symbol(")");
    return names;
  }
  void skip_fk_actions() {
    for (;;) {
      if (word_is("ON") && (word_is("DELETE", 1) || word_is("UPDATE", 1))) {
        pos_ += 2;
        if (word_is("SET")) {
          pos_ += 2;
        } else if (word_is("NO")) {
          pos_ += 2;
        } else {
          ++pos_;
        }
      } else if (word_is("MATCH")) {
        pos_ += 2;
      } else if (word_is("DEFERRABLE") || (word_is("NOT") && word_is("DEFERRABLE", 1))) {
        pos_ += word_is("NOT") ? 2 : 1;
        if (word_is("INITIALLY")) pos_ += 2;
      } else {
        return;
      }
    }
  }
  void skip_conflict_clause() {
    if (word_is("ON") && word_is("CONFLICT", 1)) pos_ += 3;
  }

  bool is_constraint_start() const {
    return word_is("CONSTRAINT") || word_is("PRIMARY") || word_is("NOT") || word_is("NULL") ||
           word_is("UNIQUE") || word_is("CHECK") || word_is("DEFAULT") || word_is("COLLATE") ||
           word_is("REFERENCES") || word_is("GENERATED") || word_is("AS");
  }

  void read_create_table() {
    if (word_is("IF") && word_is("NOT", 1) && word_is("EXISTS", 2)) pos_ += 3;
    Table table;
    table.name = name();
    if (symbol_is(".")) {
      ++pos_;
      table.name = name();
    }
    if (word_is("AS")) fail("CREATE TABLE ... AS SELECT is not supported");
    expect_symbol("(");
    for (;;) {
      if (word_is("CONSTRAINT")) pos_ += 2;
      if (word_is("PRIMARY") && word_is("KEY", 1)) {
        pos_ += 2;
        table.primary_key = name_list();
        skip_conflict_clause();
      } else if (word_is("UNIQUE") && symbol_is("(", 1)) {
        ++pos_;
        const auto cols = name_list();
        skip_conflict_clause();
        if (cols.size() == 1) unique_columns_.push_back({table.name, cols[0]});
      } else if (word_is("CHECK")) {
        ++pos_;
        skip_balanced();
      } else if (word_is("FOREIGN") && word_is("KEY", 1)) {
        pos_ += 2;
        PendingFk fk;
        fk.table = table.name;
        fk.columns = name_list();
        if (!word_is("REFERENCES")) fail("expected REFERENCES");
        ++pos_;
        fk.target_table = name();
        if (symbol_is("(")) fk.target_columns = name_list();
        skip_fk_actions();
        pending_.push_back(std::move(fk));
      } else {
        read_column(table);
      }
      if (symbol_is(",")) {
        ++pos_;
        continue;
      }
      expect_symbol(")");
      break;
    }
    while (!at_end() && !symbol_is(";")) ++pos_;  // WITHOUT ROWID, STRICT
    if (table.columns.empty()) fail("table " + table.name + " has no columns");
    tables_.push_back(std::move(table));
  }

  void read_column(Table& table) {
    Column col;
    col.name = name();
    std::string type;
    while (!symbol_is(",") && !symbol_is(")") && !is_constraint_start() && !at_end()) {
      if (symbol_is("(")) {
        std::string size = "(";
        ++pos_;
        while (!symbol_is(")")) {
          if (at_end()) fail("unterminated type size");
          size += peek().text;
          ++pos_;
        }
        ++pos_;
        type += size + ")";
        continue;
      }
      if (!type.empty()) type += ' ';
      type += peek().text;
      ++pos_;
    }
    col.declared_type = type;
    while (!symbol_is(",") && !symbol_is(")")) {
      if (at_end()) fail("unterminated column definition");
      if (word_is("CONSTRAINT")) {
        pos_ += 2;
      } else if (word_is("PRIMARY") && word_is("KEY", 1)) {
        pos_ += 2;
        while (word_is("ASC") || word_is("DESC")) ++pos_;
        skip_conflict_clause();
        if (word_is("AUTOINCREMENT")) ++pos_;
        table.primary_key = {col.name};
      } else if (word_is("NOT") && word_is("NULL", 1)) {
        pos_ += 2;
        skip_conflict_clause();
        col.is_not_null = true;
      } else if (word_is("NULL")) {
        ++pos_;
      } else if (word_is("UNIQUE")) {
        ++pos_;
        skip_conflict_clause();
        col.is_unique = true;
      } else if (word_is("CHECK")) {
        ++pos_;
        skip_balanced();
      } else if (word_is("DEFAULT")) {
        ++pos_;
        if (symbol_is("(")) {
          skip_balanced();
        } else {
          if (symbol_is("-") || symbol_is("+")) ++pos_;
          ++pos_;
        }
      } else if (word_is("COLLATE")) {
        pos_ += 2;
      } else if (word_is("REFERENCES")) {
        ++pos_;
        PendingFk fk;
        fk.table = table.name;
        fk.columns = {col.name};
        fk.target_table = name();
        if (symbol_is("(")) fk.target_columns = name_list();
        skip_fk_actions();
        pending_.push_back(std::move(fk));
      } else if (word_is("GENERATED") || word_is("AS")) {
        while (!symbol_is("(")) {
          if (at_end()) fail("malformed generated column");
          ++pos_;
        }
        skip_balanced();
        if (word_is("STORED") || word_is("VIRTUAL")) ++pos_;
      } else {
        fail("unexpected token '" + peek().text + "' in column definition");
      }
    }
    table.columns.push_back(std::move(col));
  }

  std::vector<FkLink> resolve_foreign_keys() {
    for (const ColumnId& u : unique_columns_) {
      for (Table& t : tables_) {
        if (!iequals(t.name, u.table)) continue;
        for (Column& c : t.columns) {
          if (iequals(c.name, u.column)) c.is_unique = true;
        }
      }
    }
    std::vector<FkLink> links;
    for (const PendingFk& fk : pending_) {
      const Table* target = nullptr;
      for (const Table& t : tables_) {
        if (iequals(t.name, fk.target_table)) target = &t;
      }
      if (!target) throw SchemaError("foreign key references unknown table: " + fk.target_table);
      std::vector<std::string> target_columns = fk.target_columns;
      if (target_columns.empty()) target_columns = target->primary_key;
      if (target_columns.size() != fk.columns.size()) {
        throw SchemaError("foreign key column count mismatch in table " + fk.table);
      }
      for (std::size_t i = 0; i < fk.columns.size(); ++i) {
        links.push_back({{fk.table, fk.columns[i]}, {target->name, target_columns[i]}});
      }
    }
    return links;
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  std::vector<Table> tables_;
  std::vector<PendingFk> pending_;
  std::vector<ColumnId> unique_columns_;
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("malformed schema JSON: ") + e.what());
  }
}

}  // namespace

Schema load_schema_json(std::string_view json_text) { return from_document(parse_json(json_text)); }

Schema load_schema_ddl(std::string_view ddl, std::string db_id) { return DdlReader(ddl).read(std::move(db_id)); }

Schema load_schema_file(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  if (path.extension() == ".sql") return load_schema_ddl(text, path.stem().string());
  return load_schema_json(text);
}

std::map<std::string, Schema> load_schema_collection(const std::filesystem::path& path) {
  std::map<std::string, Schema> out;
  auto add = [&](Schema s) {
    const std::string key = lower(s.db_id());
    if (!out.emplace(key, std::move(s)).second) throw SchemaError("duplicate db_id: " + key);
  };
  if (std::filesystem::is_directory(path)) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(path)) {
      const auto ext = entry.path().extension();
      if (entry.is_regular_file() && (ext == ".json" || ext == ".sql")) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) add(load_schema_file(f));
    return out;
  }
  if (path.extension() == ".sql") {
    add(load_schema_file(path));
    return out;
  }
  const json doc = parse_json(read_file(path));
  if (doc.is_array()) {
    for (const json& d : doc) add(from_document(d));
  } else {
    add(from_document(doc));
  }
  return out;
}

}  // namespace etm
