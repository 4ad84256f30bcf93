#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "etm/database.hpp"
#include "etm/schema.hpp"
#include "json.hpp"

namespace etm::testing {

struct CatalogRow {
  std::string id;
  std::string canonical;
  std::string other;
  // Violating variant: weak schema, empty instance, or a mutated pair.
  bool weak_schema = false;
  bool empty_db = false;
  std::optional<std::pair<std::string, std::string>> mutated;

  bool has_violation() const { return weak_schema || empty_db || mutated; }
};

inline std::string read_text(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string catalog_dir(const std::string& fixtures) { return fixtures + "/catalog"; }

inline std::vector<CatalogRow> load_catalog(const std::string& fixtures) {
  const auto doc = nlohmann::json::parse(read_text(catalog_dir(fixtures) + "/catalog.json"));
  std::vector<CatalogRow> rows;
  for (const auto& r : doc) {
    CatalogRow row{r.at("id"), r.at("canonical"), r.at("other")};
    if (r.contains("violation")) {
      const auto& v = r.at("violation");
      row.weak_schema = v.value("schema", "") == "weak";
      row.empty_db = v.value("db", "") == "empty";
      if (v.contains("canonical")) row.mutated = std::make_pair(v.at("canonical"), v.at("other"));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Schema catalog_schema(const std::string& fixtures, bool weak) {
  return load_schema_ddl(read_text(catalog_dir(fixtures) + (weak ? "/weak.sql" : "/strong.sql")), "catalog");
}

inline Database catalog_db(const std::string& fixtures, bool empty) {
  std::string script = read_text(catalog_dir(fixtures) + "/strong.sql");
  if (!empty) script += read_text(catalog_dir(fixtures) + "/rows.sql");
  return Database::from_script(script);
}

}  // namespace etm::testing
