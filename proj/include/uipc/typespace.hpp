#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "uipc/common.hpp"
#include "uipc/formula.hpp"
#include "uipc/kripke.hpp"

namespace uipc {

using TypeId = uint32_t;
inline constexpr TypeId kNoType = ~TypeId{0};

// Canonical representative of a degree-n behavior class. Level 0 carries a
// valuation; level n+1 additionally carries the set of level-n types realized
// at or above the point (its own truncation always included). Interned:
// structural equality is id equality.
int type_level(TypeId t);
const std::vector<VarId>& type_val(TypeId t);
const std::vector<TypeId>& type_succ(TypeId t);
uint64_t type_hash(TypeId t);  // stable across processes

TypeId intern_type(int level, std::vector<VarId> val, std::vector<TypeId> succ);

// Single-step level decrement.
TypeId truncate(TypeId t);
// Iterated truncation down to `level`.
TypeId truncate_to(TypeId t, int level);

// Behavior-inclusion order on equal-level types.
bool type_leq(TypeId a, TypeId b);

// Number of classes one level down realized at or above the point.
size_t succ_count(TypeId t);

// Degree-bounded forcing read off the type structure alone.
// Requires impl_degree(f) <= level(t).
bool forces_type(TypeId t, Formula f);

// Componentwise valuation restriction.
TypeId restrict_vars(TypeId t, const VarSet& keep);

struct TypeDistance {
  bool exact;   // false: only known to be <= 2^-k at this resolution
  unsigned k;   // distance 2^-k when exact
  std::string to_string() const;
  double value_upper() const;  // 2^-k either way
};

// 2^-k where k is the least level at which iterated truncations differ;
// marker when equal at every level up to the common level.
TypeDistance type_distance(TypeId a, TypeId b);

// Per-model tower of types; level k row holds type_of(node, k) for all nodes.
class TypeTower {
 public:
  explicit TypeTower(const KripkeModel& m) : m_(&m) {}
  TypeId at(uint16_t node, int level);
  const std::vector<TypeId>& row(int level);

 private:
  const KripkeModel* m_;
  std::vector<std::vector<TypeId>> rows_;
};

TypeId type_of(const KripkeModel& m, uint16_t node, int level);

struct RootedModel {
  KripkeModel model;
  uint16_t root;
};

// The finite poset of all degree-n classes over a variable set.
struct TypeSpace {
  VarSet vars;
  int level = 0;
  std::vector<TypeId> elements;   // canonically sorted
  std::vector<Bits> up;           // up[i]: indices of elements above element i
  std::vector<uint64_t> succ_mask;  // level>0: element succ as prev-elements mask

  size_t size() const { return elements.size(); }
  std::optional<uint32_t> index_of(TypeId t) const;
  bool leq_idx(uint32_t i, uint32_t j) const { return up[i].test(j); }
  std::vector<uint32_t> covers(uint32_t i) const;
  std::vector<uint32_t> minimal_of(const Bits& subset) const;
  Bits up_closure(const Bits& subset) const;
  bool is_upset(const Bits& subset) const;
};

using SpacePtr = std::shared_ptr<const TypeSpace>;

// Greatest-fixpoint construction of the degree-n space; results are cached.
// Throws ResourceError when the next level's ground set is too large.
SpacePtr build_space(const VarSet& vars, int level);

// Largest k <= want for which the space is buildable within budget.
int max_feasible_level(const VarSet& vars, int want);

// The space viewed as a Kripke model over its own variable set; node i
// corresponds to elements[i].
KripkeModel space_model(const TypeSpace& s);

// Rooted model realizing t: the up-set submodel of space_model at t.
RootedModel realizer(const TypeSpace& s, TypeId t);

// Indices of elements forcing f; always an up-set of the space order.
Bits classes_of(const TypeSpace& s, Formula f);

// 2 * #elements - 1.
size_t R_bound(const TypeSpace& s);

std::string type_to_json(TypeId t);
std::string space_to_json(const TypeSpace& s);
std::string space_to_dot(const TypeSpace& s);

}  // namespace uipc
