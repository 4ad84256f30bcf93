#pragma once

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "etm/ast.hpp"
#include "etm/rewrite.hpp"
#include "etm/schema.hpp"

namespace etm::detail {

/// What a rule sees while inspecting one query node.
class RuleEnv {
 public:
  RuleEnv(const Schema& schema, const Database* db, std::vector<RuleBinding>& trace,
          std::vector<RuleBinding>& blocked)
      : schema_(schema), db_(db), trace_(trace), blocked_(blocked) {}

  const Schema& schema() const { return schema_; }
  const Database* db() const { return db_; }

  /// Checks the rule's assumption for a match. Records the application when
  /// it holds, or the refusal otherwise, and returns whether to rewrite.
  bool admit(Bindings bindings);

  /// Schema table behind a named source, or nullptr for CTE names and
  /// derived tables.
  const Table* base_table(const TableSource& source) const;

  int rule_id = 0;
  std::string location;
  std::vector<std::string> visible_ctes;

 private:
  const Schema& schema_;
  const Database* db_;
  std::vector<RuleBinding>& trace_;
  std::vector<RuleBinding>& blocked_;
};

using RuleFn = bool (*)(Query& q, RuleEnv& env);

/// Rule implementations, indexed by id (entry 0 unused).
const std::vector<RuleFn>& rule_functions();

// Tree helpers shared by the rules.

std::string label_of(const TableSource& source);
std::vector<const TableSource*> sources(const SelectCore& core);
const TableSource* find_source(const SelectCore& core, const std::string& label);
bool has_outer_join(const SelectCore& core);
bool is_simple_select(const Query& q);  // no CTEs, single core
bool is_column(const Expr& e);
bool is_aggregate_call(const Expr& e);
bool contains_aggregate(const Expr& e);  // not looking into subqueries
bool contains_subquery(const Expr& e);
bool core_has_aggregate(const SelectCore& core);
std::optional<std::int64_t> integer_value(const Expr& e);

std::vector<Expr> split_conjuncts(const std::optional<Expr>& e);
std::optional<Expr> join_conjuncts(std::vector<Expr> parts);
std::vector<Expr> split_chain(const Expr& e, const std::string& op);
Expr join_chain(const std::string& op, std::vector<Expr> parts);

/// Visits every expression slot of a core (projections, ON, WHERE, GROUP BY,
/// HAVING) and, when given, the ORDER BY items of the owning query.
void for_each_slot(SelectCore& core, std::vector<OrderItem>* order_by, const std::function<void(Expr&)>& fn);

/// Calls fn on every column reference in e, including inside subqueries.
void for_each_column(const Expr& e, const std::function<void(const Expr&)>& fn);
void for_each_column(Expr& e, const std::function<void(Expr&)>& fn);
void for_each_column(Query& q, const std::function<void(Expr&)>& fn);
void for_each_column(const Query& q, const std::function<void(const Expr&)>& fn);

/// Labels of all column references in e (subqueries included).
std::set<std::string> referenced_labels(const Expr& e);
std::set<std::string> referenced_labels(const Query& q);

/// Renames the qualifier `from` to `to` in e or q.
void relabel(Expr& e, const std::string& from, const std::string& to);
void relabel(Query& q, const std::string& from, const std::string& to);

/// Comparison seen from a column's point of view: col op other.
struct Oriented {
  const Expr* column;
  std::string op;
  const Expr* other;
};
bool is_comparator(const std::string& op);
std::string mirror_op(const std::string& op);
std::optional<Oriented> orient(const Expr& e);

/// Column facts for a reference inside `core`. False when the label is not a
/// schema table of this core.
bool column_unique(const SelectCore& core, const Expr& col, const RuleEnv& env);
bool column_non_null(const SelectCore& core, const Expr& col, const RuleEnv& env);
std::string table_of(const SelectCore& core, const Expr& col);

/// Wraps a single core as a query.
Query single(SelectCore core);

}  // namespace etm::detail
