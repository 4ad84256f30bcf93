#pragma once

#include "rewrite_internal.hpp"

namespace etm::detail {

/// Leaf cores of a set expression, left to right.
std::vector<SelectCore*> cores(SetExpr& s);

/// e and every sub-expression of e, pre-order, not entering subqueries.
void collect_exprs(Expr& e, std::vector<Expr*>& out);

bool rule1(Query& q, RuleEnv& env);
bool rule2(Query& q, RuleEnv& env);
bool rule3(Query& q, RuleEnv& env);
bool rule4(Query& q, RuleEnv& env);
bool rule5(Query& q, RuleEnv& env);
bool rule6(Query& q, RuleEnv& env);
bool rule7(Query& q, RuleEnv& env);
bool rule8(Query& q, RuleEnv& env);
bool rule9(Query& q, RuleEnv& env);
bool rule10(Query& q, RuleEnv& env);
bool rule11(Query& q, RuleEnv& env);
bool rule12(Query& q, RuleEnv& env);
bool rule13(Query& q, RuleEnv& env);
bool rule14(Query& q, RuleEnv& env);
bool rule15(Query& q, RuleEnv& env);
bool rule16(Query& q, RuleEnv& env);
bool rule17(Query& q, RuleEnv& env);
bool rule18(Query& q, RuleEnv& env);
bool rule19(Query& q, RuleEnv& env);
bool rule20(Query& q, RuleEnv& env);
bool rule21(Query& q, RuleEnv& env);
bool rule22(Query& q, RuleEnv& env);
bool rule23(Query& q, RuleEnv& env);
bool rule24(Query& q, RuleEnv& env);
bool rule25(Query& q, RuleEnv& env);
bool rule26(Query& q, RuleEnv& env);

}  // namespace etm::detail
