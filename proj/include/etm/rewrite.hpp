#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "etm/ast.hpp"
#include "etm/database.hpp"
#include "etm/normalize.hpp"
#include "etm/schema.hpp"

namespace etm {

enum class Verdict { kHolds, kFails, kUnverifiable };

std::string to_string(Verdict v);

/// Pattern variables bound by one rule match: t1, c1, x, a, b, n, X (comma
/// separated columns) and so on. Values are plain names or SQL text.
using Bindings = std::map<std::string, std::string>;

struct RuleBinding {
  int rule_id = 0;
  std::string location;  // path of the rewritten query node, e.g. "body.where.subquery"
  Bindings bindings;
  Verdict verdict = Verdict::kHolds;
  std::string evidence;  // what the assumption check looked at
  bool applied = true;   // false: matched, but the assumption did not hold
};

struct CanonicalForm {
  Query tree;
  std::vector<RuleBinding> trace;    // applications, in order
  std::vector<RuleBinding> blocked;  // matches refused by their assumption
};

/// Rewrites a normalized tree to its canonical form under the enabled rules.
/// Rules are tried in ascending id, innermost query first, repeating until a
/// sweep changes nothing. Throws RewriteDivergence after 32 changing sweeps.
CanonicalForm canonicalize(const NormalizedAst& ast, const Schema& schema, const Database* db,
                           const RuleSelection& rules);

/// The assumption column for one rule. Rules 17..26 always hold.
/// Throws UnknownRule for ids outside 1..26.
Verdict check_assumption(int rule_id, const Bindings& bindings, const Schema& schema, const Database* db,
                         std::string* evidence = nullptr);

/// One line per application; "no rewrites applied" when empty.
std::string explain(const std::vector<RuleBinding>& trace);

struct RuleInfo {
  int id;
  std::string_view canonical;  // the side rewritten to
  std::string_view other;      // the side rewritten from
  std::string_view assumption;
};

/// All 26 rules, ordered by id.
const std::vector<RuleInfo>& rule_catalog();

}  // namespace etm
