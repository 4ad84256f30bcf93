#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

struct sqlite3;

namespace etm {

/// NULL, integer, real or text. Blobs are read as text.
using Cell = std::variant<std::monostate, std::int64_t, double, std::string>;
using Row = std::vector<Cell>;

struct ResultTable {
  std::size_t column_count = 0;
  std::vector<Row> rows;  // every row has column_count cells
  bool ordered = false;   // producing query had a top-level ORDER BY
};

/// One SQLite connection. Movable, not copyable.
class Database {
 public:
  /// Opens an existing database file read-only. Throws IoError.
  static Database open(const std::filesystem::path& path);
  /// Fresh in-memory database.
  static Database in_memory();
  /// In-memory database populated by a DDL+INSERT script. Throws ExecError.
  static Database from_script(const std::string& script);

  Database(Database&& other) noexcept;
  Database& operator=(Database&& other) noexcept;
  Database(const Database&) = delete;
  Database& operator=(const Database&) = delete;
  ~Database();

  /// Runs statements without collecting rows. Throws ExecError.
  void exec(const std::string& script);

  /// Runs one query and returns all rows. `ordered` is left false; callers
  /// that know the query shape set it. Throws ExecError (syntax, runtime or
  /// timeout).
  ResultTable query(const std::string& sql,
                    std::chrono::milliseconds timeout = std::chrono::seconds(30)) const;

  /// Row count of a table; nullopt if the table does not exist.
  std::optional<std::int64_t> row_count(const std::string& table) const;

  /// CREATE TABLE statements followed by INSERTs for every row, in a stable
  /// order.
  std::string dump() const;

  sqlite3* handle() const { return db_; }

 private:
  explicit Database(sqlite3* db) : db_(db) {}
  sqlite3* db_ = nullptr;
  // One statement at a time per connection; workers may share an instance.
  std::unique_ptr<std::mutex> mutex_ = std::make_unique<std::mutex>();
};

/// Renders a cell as SQL literal text.
std::string sql_literal(const Cell& cell);

}  // namespace etm
