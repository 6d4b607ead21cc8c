#pragma once

#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "uipc/common.hpp"
#include "uipc/formula.hpp"

namespace uipc {

// Finite poset with a monotone valuation. `up[i]` lists every j with i <= j
// (including i itself), sorted. `val[i]` is a bitmask over `vars.ids()` order.
struct KripkeModel {
  VarSet vars;
  std::vector<std::string> names;
  std::vector<std::vector<uint16_t>> up;
  std::vector<uint32_t> val;

  size_t size() const { return names.size(); }
  uint16_t node_index(const std::string& name) const;
  bool leq(uint16_t i, uint16_t j) const;
  bool has_var(uint16_t node, VarId v) const;
  std::vector<uint16_t> down(uint16_t i) const;  // all j with j <= i
};

struct Diagnostics {
  bool ok = true;
  std::vector<std::string> issues;
};

// Builds a model from an arbitrary relation: takes the reflexive-transitive
// closure, then checks antisymmetry and valuation monotonicity.
// `order` holds index pairs (a,b) meaning a <= b. Throws InputError if the
// closure is not a poset or the valuation is not monotone.
KripkeModel make_model(VarSet vars, std::vector<std::string> names,
                       const std::vector<std::pair<uint16_t, uint16_t>>& order,
                       std::vector<uint32_t> val);

// Same construction but reports problems instead of throwing.
Diagnostics validate_model(VarSet vars, const std::vector<std::string>& names,
                           const std::vector<std::pair<uint16_t, uint16_t>>& order,
                           const std::vector<uint32_t>& val);
Diagnostics validate_model(const KripkeModel& m);

// Batch forcing evaluator; computes, per formula, the set of forcing nodes.
class ForcesEval {
 public:
  explicit ForcesEval(const KripkeModel& m) : m_(m) {}
  const Bits& eval(Formula f);
  bool forces(uint16_t node, Formula f);

 private:
  const KripkeModel& m_;
  std::unordered_map<uint32_t, Bits> memo_;
};

// Standard Kripke forcing. Throws DomainError on unknown node and InputError
// if f uses variables outside the model signature.
bool forces(const KripkeModel& m, uint16_t node, Formula f);

// f maps m-nodes to n-nodes; true iff f is monotone and f(up(w)) = up(f(w)).
bool is_p_morphism(const std::vector<uint16_t>& f, const KripkeModel& m,
                   const KripkeModel& n);

// Same poset, valuation intersected with `keep`.
KripkeModel forget(const KripkeModel& m, const VarSet& keep);

// Extends a model with a fresh variable true exactly on `where` (must be an
// up-set of the poset).
KripkeModel with_variable(const KripkeModel& m, VarId v, const Bits& where);

KripkeModel disjoint_union(const std::vector<KripkeModel>& parts,
                           std::vector<uint16_t>* root_offsets = nullptr);

// Every model with at most max_nodes nodes over `vars`, exactly once up to
// isomorphism, in a fixed deterministic order (node count, then canonical
// poset code, then canonical valuation code).
std::vector<KripkeModel> enumerate_models(const VarSet& vars, unsigned max_nodes);

// Visitor variant that stops early when the visitor returns false.
bool visit_models(const VarSet& vars, unsigned max_nodes,
                  const std::function<bool(const KripkeModel&)>& visit);

// True iff no node of any model with <= max_nodes nodes forces phi but not psi.
bool semantic_consequence_bounded(Formula phi, Formula psi, const VarSet& vars,
                                  unsigned max_nodes);

// JSON wire format:
// {"vars":["p"],"nodes":[{"id":"a","val":["p"]}],"order":[["a","b"]]}
KripkeModel model_from_json(const std::string& text);
std::string model_to_json(const KripkeModel& m);

// Hasse diagram with valuation labels.
std::string model_to_dot(const KripkeModel& m);

}  // namespace uipc
