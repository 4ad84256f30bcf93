#pragma once

#include <chrono>
#include <string>
#include <string_view>

#include "etm/database.hpp"
#include "etm/matcher.hpp"
#include "etm/schema.hpp"

namespace etm {

/// Runs `sql` and marks the result ordered iff the query has an ORDER BY at
/// the top nesting level. Throws ExecError.
ResultTable execute(const std::string& sql, const Database& db,
                    std::chrono::milliseconds timeout = std::chrono::seconds(30));

/// True iff `sql` has an ORDER BY outside every parenthesis and string.
bool has_top_level_order_by(std::string_view sql);

/// Cell equality: NULL equals NULL, numbers compare by value with relative
/// tolerance 1e-6, text compares exactly.
bool cells_equal(const Cell& a, const Cell& b);

/// Compares two results. Duplicates always count. When `gold.ordered`, rows
/// are compared in order except within runs of equal sort keys, which compare
/// as multisets; `gold_keys` holds the key columns of each gold row (empty
/// means every row is its own run). Column order is not significant.
bool results_equal(const ResultTable& gold, const ResultTable& pred, const std::vector<Row>& gold_keys = {});

/// Execution accuracy on one instance.
MetricVerdict exe_match(const std::string& gold, const std::string& pred, const Database& db,
                        std::chrono::milliseconds timeout = std::chrono::seconds(30));

struct EsmFlags {
  bool value_check = true;
  bool distinct_check = true;
};

/// Legacy exact set matching, blind spots included: JOIN conditions are not
/// compared, DISTINCT counts only inside aggregates, LIMIT values are ignored,
/// aliases share one query-wide table, and IN lists, chained set operators,
/// WITH clauses and reads from derived tables do not parse. Unparsable input
/// gives invalid(parse).
MetricVerdict esm_match(const std::string& gold, const std::string& pred, const Schema& schema,
                        const EsmFlags& flags = {});

/// The component string the legacy matcher compares, for tests and reports.
/// Throws EsmParseError or ParseError.
std::string esm_signature(const std::string& sql, const Schema& schema, const EsmFlags& flags = {});

}  // namespace etm
