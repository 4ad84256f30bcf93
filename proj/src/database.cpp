#include "etm/database.hpp"

#include <sqlite3.h>

#include <cctype>
#include <sstream>

#include "etm/errors.hpp"

namespace etm {
namespace {

struct Deadline {
  std::chrono::steady_clock::time_point until;
  bool expired = false;
};

int check_deadline(void* data) {
  auto* d = static_cast<Deadline*>(data);
  if (std::chrono::steady_clock::now() >= d->until) {
    d->expired = true;
    return 1;
  }
  return 0;
}

std::string quote_identifier(const std::string& name) {
  std::string out = "\"";
  for (char c : name) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

std::string sql_literal(const Cell& cell) {
  if (std::holds_alternative<std::monostate>(cell)) return "NULL";
  if (const auto* i = std::get_if<std::int64_t>(&cell)) return std::to_string(*i);
  if (const auto* d = std::get_if<double>(&cell)) {
    std::ostringstream out;
    out.precision(17);
    out << *d;
    std::string s = out.str();
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
  }
  std::string out = "'";
  for (char c : std::get<std::string>(cell)) {
    if (c == '\'') out += '\'';
    out += c;
  }
  return out + "'";
}

Database Database::open(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("database file not found: " + path.string());
  sqlite3* db = nullptr;
  if (sqlite3_open_v2(path.c_str(), &db, SQLITE_OPEN_READONLY | SQLITE_OPEN_NOMUTEX, nullptr) != SQLITE_OK) {
    std::string msg = db ? sqlite3_errmsg(db) : "out of memory";
    sqlite3_close(db);
    throw IoError("cannot open database " + path.string() + ": " + msg);
  }
  return Database(db);
}

Database Database::in_memory() {
  sqlite3* db = nullptr;
  if (sqlite3_open_v2(":memory:", &db, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_NOMUTEX, nullptr) !=
      SQLITE_OK) {
    sqlite3_close(db);
    throw IoError("cannot open in-memory database");
  }
  return Database(db);
}

Database Database::from_script(const std::string& script) {
  Database db = in_memory();
  db.exec(script);
  return db;
}

Database::Database(Database&& other) noexcept : db_(other.db_), mutex_(std::move(other.mutex_)) {
  other.db_ = nullptr;
}

Database& Database::operator=(Database&& other) noexcept {
  if (this != &other) {
    sqlite3_close(db_);
    db_ = other.db_;
    mutex_ = std::move(other.mutex_);
    other.db_ = nullptr;
  }
  return *this;
}

Database::~Database() { sqlite3_close(db_); }

void Database::exec(const std::string& script) {
  std::lock_guard<std::mutex> guard(*mutex_);
  char* err = nullptr;
  if (sqlite3_exec(db_, script.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
    std::string msg = err ? err : "unknown error";
    sqlite3_free(err);
    throw ExecError(ExecErrorKind::kRuntime, msg);
  }
}

ResultTable Database::query(const std::string& sql, std::chrono::milliseconds timeout) const {
  std::lock_guard<std::mutex> guard(*mutex_);
  sqlite3_stmt* stmt = nullptr;
  const char* tail = nullptr;
  if (sqlite3_prepare_v2(db_, sql.c_str(), static_cast<int>(sql.size()), &stmt, &tail) != SQLITE_OK) {
    throw ExecError(ExecErrorKind::kSyntax, sqlite3_errmsg(db_));
  }
  if (!stmt) throw ExecError(ExecErrorKind::kSyntax, "empty statement");
  for (; tail && *tail; ++tail) {
    if (!std::isspace(static_cast<unsigned char>(*tail)) && *tail != ';') {
      sqlite3_finalize(stmt);
      throw ExecError(ExecErrorKind::kSyntax, "more than one statement");
    }
  }
  if (!sqlite3_stmt_readonly(stmt)) {
    sqlite3_finalize(stmt);
    throw ExecError(ExecErrorKind::kSyntax, "statement is not read-only");
  }

  Deadline deadline{std::chrono::steady_clock::now() + timeout};
  sqlite3_progress_handler(db_, 1000, check_deadline, &deadline);
  ResultTable out;
  out.column_count = static_cast<std::size_t>(sqlite3_column_count(stmt));
  int rc;
  while ((rc = sqlite3_step(stmt)) == SQLITE_ROW) {
    Row row;
    row.reserve(out.column_count);
    for (int i = 0; i < static_cast<int>(out.column_count); ++i) {
      switch (sqlite3_column_type(stmt, i)) {
        case SQLITE_NULL: row.emplace_back(std::monostate{}); break;
        case SQLITE_INTEGER: row.emplace_back(static_cast<std::int64_t>(sqlite3_column_int64(stmt, i))); break;
        case SQLITE_FLOAT: row.emplace_back(sqlite3_column_double(stmt, i)); break;
        default: {
          const auto* text = reinterpret_cast<const char*>(sqlite3_column_text(stmt, i));
          row.emplace_back(std::string(text ? text : "", static_cast<std::size_t>(sqlite3_column_bytes(stmt, i))));
        }
      }
    }
    out.rows.push_back(std::move(row));
  }
  sqlite3_progress_handler(db_, 0, nullptr, nullptr);
  if (rc != SQLITE_DONE) {
    std::string msg = sqlite3_errmsg(db_);
    sqlite3_finalize(stmt);
    if (deadline.expired) throw ExecError(ExecErrorKind::kTimeout, "query exceeded " + std::to_string(timeout.count()) + " ms");
    throw ExecError(ExecErrorKind::kRuntime, msg);
  }
  sqlite3_finalize(stmt);
  return out;
}

std::optional<std::int64_t> Database::row_count(const std::string& table) const {
  std::unique_lock<std::mutex> guard(*mutex_);
  sqlite3_stmt* stmt = nullptr;
  const std::string check = "SELECT 1 FROM sqlite_master WHERE type = 'table' AND lower(name) = lower(?)";
  sqlite3_prepare_v2(db_, check.c_str(), -1, &stmt, nullptr);
  sqlite3_bind_text(stmt, 1, table.c_str(), -1, SQLITE_TRANSIENT);
  const bool exists = sqlite3_step(stmt) == SQLITE_ROW;
  sqlite3_finalize(stmt);
  guard.unlock();
  if (!exists) return std::nullopt;
  const ResultTable r = query("SELECT COUNT(*) FROM " + quote_identifier(table));
  return std::get<std::int64_t>(r.rows.at(0).at(0));
}

std::string Database::dump() const {
  std::string out;
  const ResultTable tables =
      query("SELECT name, sql FROM sqlite_master WHERE type = 'table' AND name NOT LIKE 'sqlite_%' ORDER BY rowid");
  for (const Row& t : tables.rows) out += std::get<std::string>(t[1]) + ";\n";
  for (const Row& t : tables.rows) {
    const std::string& name = std::get<std::string>(t[0]);
    const ResultTable rows = query("SELECT * FROM " + quote_identifier(name) + " ORDER BY rowid");
    for (const Row& r : rows.rows) {
      out += "INSERT INTO " + quote_identifier(name) + " VALUES (";
      for (std::size_t i = 0; i < r.size(); ++i) out += (i ? ", " : "") + sql_literal(r[i]);
      out += ");\n";
    }
  }
  return out;
}

}  // namespace etm
