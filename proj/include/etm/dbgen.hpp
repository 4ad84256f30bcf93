#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>

#include "etm/database.hpp"
#include "etm/schema.hpp"

namespace etm {

struct GenConfig {
  std::uint64_t seed = 0;
  int rows_min = 5;
  int rows_max = 50;
  double null_rate = 0.1;       // per nullable cell
  double edge_case_bias = 0.3;  // share of values drawn from boundary pools
  // Lower-case names of tables to leave empty; used to audit rules whose
  // assumption is a non-empty table.
  std::set<std::string> empty_tables;

  /// Throws std::invalid_argument unless rates are in [0,1] and
  /// 1 <= rows_min <= rows_max.
  void validate() const;
};

/// DDL (with all declared constraints) plus INSERTs for a random instance.
/// Deterministic for fixed (schema, cfg). Throws GenError when a constraint
/// cannot be met at the requested size.
std::string generate_script(const Schema& schema, const GenConfig& cfg);

/// The instance described by generate_script, loaded in memory.
Database generate_db(const Schema& schema, const GenConfig& cfg);

/// Checks every PK/UNIQUE/NOT NULL/FK constraint of `schema` on `db` and
/// returns a description of each violation.
std::vector<std::string> audit_constraints(const Schema& schema, const Database& db);

struct Counterexample {
  std::uint64_t seed = 0;  // seed of the distinguishing instance
  std::string script;      // the instance, as DDL plus INSERTs
  std::string summary;     // how the two results differ
};

/// Runs both queries on `trials` instances with seeds cfg.seed, cfg.seed+1, ...
/// and returns the first on which they are distinguishable. An instance on
/// which exactly one query fails counts; one where both fail does not.
/// Throws ParseError if either query does not parse, and GenError.
std::optional<Counterexample> counterexample_search(const std::string& q1, const std::string& q2, const Schema& schema,
                                                    int trials, const GenConfig& cfg);

}  // namespace etm
