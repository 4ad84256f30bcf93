#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace etm {

struct Column {
  std::string name;
  std::string declared_type;
  bool is_primary_key = false;  // sole primary-key column; members of composite keys are not
  bool is_unique = false;
  bool is_not_null = false;
};

struct Table {
  std::string name;
  std::vector<Column> columns;
  std::vector<std::string> primary_key;  // all key members, declaration order

  const Column* find_column(std::string_view column) const;
};

struct ColumnId {
  std::string table;
  std::string column;
  bool operator==(const ColumnId&) const = default;
};

struct FkLink {
  ColumnId from;  // referencing column
  ColumnId to;    // referenced column
};

enum class LinkDirection { kFirstIsPrimary, kSecondIsPrimary };

/// Tables, columns and key constraints of one database. Immutable once
/// constructed; all name lookups are case-insensitive.
class Schema {
 public:
  Schema() = default;
  /// Validates uniqueness of names and FK endpoints; throws SchemaError.
  Schema(std::string db_id, std::vector<Table> tables, std::vector<FkLink> foreign_keys);

  const std::string& db_id() const { return db_id_; }
  const std::vector<Table>& tables() const { return tables_; }
  const std::vector<FkLink>& foreign_keys() const { return foreign_keys_; }

  const Table* find_table(std::string_view table) const;
  const Table& table(std::string_view table) const;
  const Column& column(std::string_view table, std::string_view column) const;

  bool is_unique(std::string_view table, std::string_view column) const;
  bool is_non_null(std::string_view table, std::string_view column) const;
  /// True iff the column alone forms the table's primary key.
  bool is_single_primary_key(std::string_view table, std::string_view column) const;
  /// Which side of the pair is the referenced primary key, if the two columns
  /// are linked by a declared foreign key whose target is a key column.
  std::optional<LinkDirection> pk_fk_link(const ColumnId& a, const ColumnId& b) const;
  std::vector<std::string> all_columns(std::string_view table) const;

  /// Renders the schema in the JSON document format accepted by load_schema_json.
  std::string to_json() const;

 private:
  std::string db_id_;
  std::vector<Table> tables_;
  std::vector<FkLink> foreign_keys_;
};

/// Accepts either the native document
/// {"db_id", "tables":[{"name","columns":[{"name","type","primary_key","unique","not_null"}]}],
///  "foreign_keys":[{"from":[t,c],"to":[t,c]}]}
/// or one Spider-style tables.json entry (table_names_original, column_names_original, ...).
Schema load_schema_json(std::string_view json_text);

/// Parses SQLite CREATE TABLE statements; other statements are skipped.
Schema load_schema_ddl(std::string_view ddl, std::string db_id);

/// .json or .sql file; the db_id of a DDL file is its stem.
Schema load_schema_file(const std::filesystem::path& path);

/// A directory of per-database files, a single JSON array of documents, or a
/// single document. Keyed by lower-cased db_id.
std::map<std::string, Schema> load_schema_collection(const std::filesystem::path& path);

std::string lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b);

}  // namespace etm
