#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "etm/database.hpp"
#include "etm/normalize.hpp"
#include "etm/schema.hpp"

namespace etm {

enum class Metric { kEtm, kEsm, kExe };
enum class Outcome { kMatch, kMismatch, kInvalid };
enum class InvalidKind { kNone, kParse, kResolve, kExecute, kDiverge };

std::string to_string(Metric m);
std::string to_string(Outcome o);
std::string to_string(InvalidKind k);

struct MetricVerdict {
  Metric metric = Metric::kEtm;
  Outcome outcome = Outcome::kMismatch;
  InvalidKind invalid = InvalidKind::kNone;
  bool gold_defect = false;  // the gold side failed, not the prediction
  std::string detail;        // error message for invalid verdicts
  std::string trace;         // rewrite traces of both sides (ETM only)
  std::vector<int> rules_applied;  // rule ids in both traces, gold first (ETM only)

  bool matched() const { return outcome == Outcome::kMatch; }
};

/// Match iff both queries reach the same canonical tree. Parse, resolution
/// and divergence failures on either side give an invalid verdict.
MetricVerdict etm_match(std::string_view gold, std::string_view pred, const Schema& schema, const Database* db,
                        const RuleSelection& rules = RuleSelection::all());

struct PairInput {
  std::string gold;
  std::string pred;
  std::string db_id;
};

/// Verdicts in input order. A pair whose db_id has no schema gets an invalid
/// (resolve) verdict; nothing aborts the batch. `dbs` may be null.
std::vector<MetricVerdict> batch_match(const std::vector<PairInput>& pairs, const std::map<std::string, Schema>& schemas,
                                       const std::map<std::string, const Database*>* dbs, const RuleSelection& rules,
                                       int workers = 1);

}  // namespace etm
