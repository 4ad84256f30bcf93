#include "etm/matcher.hpp"

#include <algorithm>
#include <atomic>
#include <optional>
#include <thread>

#include "etm/errors.hpp"
#include "etm/parser.hpp"
#include "etm/rewrite.hpp"

namespace etm {

std::string to_string(Metric m) {
  switch (m) {
    case Metric::kEtm: return "ETM";
    case Metric::kEsm: return "ESM";
    case Metric::kExe: return "EXE";
  }
  return "?";
}

std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::kMatch: return "match";
    case Outcome::kMismatch: return "mismatch";
    case Outcome::kInvalid: return "invalid";
  }
  return "?";
}

std::string to_string(InvalidKind k) {
  switch (k) {
    case InvalidKind::kNone: return "none";
    case InvalidKind::kParse: return "parse";
    case InvalidKind::kResolve: return "resolve";
    case InvalidKind::kExecute: return "execute";
    case InvalidKind::kDiverge: return "diverge";
  }
  return "?";
}

namespace {

struct Side {
  std::optional<CanonicalForm> form;
  InvalidKind failure = InvalidKind::kNone;
  std::string message;
};

Side canonical(std::string_view sql, const Schema& schema, const Database* db, const RuleSelection& rules) {
  Side side;
  try {
    const Query ast = parse(sql);
    const NormalizedAst norm = normalize(ast, schema, rules);
    side.form = canonicalize(norm, schema, db, rules);
  } catch (const ParseError& e) {
    side.failure = InvalidKind::kParse;
    side.message = e.what();
  } catch (const RewriteDivergence& e) {
    side.failure = InvalidKind::kDiverge;
    side.message = e.what();
  } catch (const Error& e) {
    // Unknown tables or columns, ambiguous names and schema lookups.
    side.failure = InvalidKind::kResolve;
    side.message = e.what();
  }
  return side;
}

}  // namespace

MetricVerdict etm_match(std::string_view gold, std::string_view pred, const Schema& schema, const Database* db,
                        const RuleSelection& rules) {
  MetricVerdict v;
  v.metric = Metric::kEtm;
  const Side g = canonical(gold, schema, db, rules);
  const Side p = canonical(pred, schema, db, rules);
  if (g.failure != InvalidKind::kNone || p.failure != InvalidKind::kNone) {
    v.outcome = Outcome::kInvalid;
    v.gold_defect = g.failure != InvalidKind::kNone;
    v.invalid = v.gold_defect ? g.failure : p.failure;
    v.detail = v.gold_defect ? "gold: " + g.message : "pred: " + p.message;
    return v;
  }
  v.outcome = g.form->tree == p.form->tree ? Outcome::kMatch : Outcome::kMismatch;
  for (const Side* side : {&g, &p}) {
    for (const RuleBinding& b : side->form->trace) v.rules_applied.push_back(b.rule_id);
  }
  v.trace = "gold:\n" + explain(g.form->trace) + "\npred:\n" + explain(p.form->trace);
  return v;
}

std::vector<MetricVerdict> batch_match(const std::vector<PairInput>& pairs, const std::map<std::string, Schema>& schemas,
                                       const std::map<std::string, const Database*>* dbs, const RuleSelection& rules,
                                       int workers) {
  std::vector<MetricVerdict> out(pairs.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < pairs.size(); i = next++) {
      const PairInput& p = pairs[i];
      auto s = schemas.find(lower(p.db_id));
      if (s == schemas.end()) {
        out[i].outcome = Outcome::kInvalid;
        out[i].invalid = InvalidKind::kResolve;
        out[i].gold_defect = true;
        out[i].detail = "no schema for database " + p.db_id;
        continue;
      }
      const Database* db = nullptr;
      if (dbs) {
        auto d = dbs->find(lower(p.db_id));
        if (d != dbs->end()) db = d->second;
      }
      out[i] = etm_match(p.gold, p.pred, s->second, db, rules);
    }
  };
  const int n = std::max(1, std::min<int>(workers, static_cast<int>(pairs.size())));
  if (n == 1) {
    work();
    return out;
  }
  std::vector<std::thread> threads;
  for (int i = 0; i < n; ++i) threads.emplace_back(work);
  for (std::thread& t : threads) t.join();
  return out;
}

}  // namespace etm
