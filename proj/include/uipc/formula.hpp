#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "uipc/common.hpp"

namespace uipc {

enum class FKind : uint8_t { Var, Bottom, Top, And, Or, Imp };

// Hash-consed immutable formula handle. Structural equality is id equality.
struct Formula {
  uint32_t id = 0;
  bool operator==(const Formula&) const = default;
};

Formula f_var(VarId v);
Formula f_var(const std::string& name);
Formula f_bot();
Formula f_top();
Formula f_and(Formula a, Formula b);
Formula f_or(Formula a, Formula b);
Formula f_imp(Formula a, Formula b);
inline Formula f_neg(Formula a) { return f_imp(a, f_bot()); }

FKind kind(Formula f);
Formula lhs(Formula f);   // And/Or/Imp only
Formula rhs(Formula f);   // And/Or/Imp only
VarId var_of(Formula f);  // Var only

// Maximum nesting depth of the implication connective.
unsigned impl_degree(Formula f);

// Free variables, sorted by name.
const std::vector<VarId>& vars_of(Formula f);
VarSet varset_of(Formula f);

// Structural hash, stable across processes (built from variable names).
uint64_t formula_hash(Formula f);

// Total structural order; used wherever a canonical formula order is needed.
int formula_cmp(Formula a, Formula b);

// Number of syntax-tree nodes.
unsigned formula_size(Formula f);

// Empty list folds to the unit (true for conjunction, false for disjunction);
// otherwise a right fold. No simplification is performed.
Formula make_conj(std::span<const Formula> fs);
Formula make_disj(std::span<const Formula> fs);

// Capture-free replacement of every occurrence of v. (Propositional
// substitution; there are no binders.)
Formula substitute(Formula f, VarId v, Formula repl);

struct ParseError : InputError {
  size_t pos;
  ParseError(const std::string& msg, size_t p) : InputError(msg), pos(p) {}
};

// Grammar: atoms are identifiers; constants `false`, `true`; `~` prefix
// binds tightest, then `&`, then `|`, then right-associative `->`.
// Unicode aliases on input only: ¬ ∧ ∨ →.
Formula parse(const std::string& text);

// Minimal-parenthesis ASCII rendering; parse(render(f)) == f.
std::string render(Formula f);

std::vector<Formula> subformulas(Formula f);

}  // namespace uipc
