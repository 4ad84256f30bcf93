#pragma once

#include <bitset>
#include <string>
#include <string_view>
#include <vector>

#include "etm/ast.hpp"
#include "etm/schema.hpp"

namespace etm {

/// Which preprocessing rules (P0..P8) and rewrite rules (1..26) are active.
/// Rewrite rules operate on fully preprocessed trees, so enabling any of them
/// forces all nine preprocessing rules on.
class RuleSelection {
 public:
  static constexpr int kPreprocessingCount = 9;
  static constexpr int kRewriteCount = 26;

  /// Everything on.
  static RuleSelection all();
  /// P0..P8 on, no rewrite rules.
  static RuleSelection preprocessing_only();
  /// P0..Pn on (n in -1..8, -1 meaning none), no rewrite rules.
  static RuleSelection preprocessing_prefix(int n);
  /// P0..P8 plus rewrite rules 1..n (n in 0..26).
  static RuleSelection rule_prefix(int n);
  /// P0..P8 plus the listed rewrite rules.
  static RuleSelection rule_set(const std::vector<int>& ids);
  /// "all", "P" (preprocessing only), "P<n>" (prefix P0..Pn), "<n>" (rule
  /// prefix 1..n) or a comma list of rule ids such as "6,10,22".
  /// Throws std::invalid_argument.
  static RuleSelection parse(std::string_view text);

  bool preprocessing(int p) const { return p >= 0 && p < kPreprocessingCount && p_[p]; }
  bool rule(int id) const { return id >= 1 && id <= kRewriteCount && rules_[id]; }
  bool any_rule() const { return rules_.any(); }
  std::string describe() const;

 private:
  std::bitset<kPreprocessingCount> p_;
  std::bitset<kRewriteCount + 1> rules_;
};

struct NormalizedAst {
  Query tree;
  std::vector<int> provenance;  // ids of preprocessing rules that changed the tree, ascending
};

/// Applies the preprocessing rules enabled in `rules` to a copy of `ast`.
/// Column references are always resolved against `schema` and the lexical
/// scopes of the query; the flags only decide which canonicalizations show in
/// the output. Throws ResolutionError for unknown tables, unknown or ambiguous
/// columns and duplicate aliases.
NormalizedAst normalize(const Query& ast, const Schema& schema, const RuleSelection& rules = RuleSelection::all());

}  // namespace etm
