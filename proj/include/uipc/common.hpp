#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace uipc {

// Thrown on malformed user input (formulas, model files, CLI args).
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when a computation would exceed its configured budget.
struct ResourceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Violated operation precondition (unknown node, level mismatch, ...).
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using VarId = uint32_t;

// Global propositional-variable interner. Ids are process-local; all
// canonical orderings go through the variable NAME, never the id.
VarId var_id(const std::string& name);
const std::string& var_name(VarId v);
uint64_t var_name_hash(VarId v);

// Sorted-by-name, duplicate-free variable set.
class VarSet {
 public:
  VarSet() = default;
  explicit VarSet(std::vector<VarId> vs);
  static VarSet of_names(const std::vector<std::string>& names);

  bool contains(VarId v) const;
  bool subset_of(const VarSet& other) const;
  VarSet set_union(const VarSet& other) const;
  VarSet set_minus(const VarSet& other) const;
  VarSet set_intersect(const VarSet& other) const;

  size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  const std::vector<VarId>& ids() const { return ids_; }
  std::vector<std::string> names() const;
  std::string to_string() const;  // "p,q"

  bool operator==(const VarSet& o) const { return ids_ == o.ids_; }
  auto begin() const { return ids_.begin(); }
  auto end() const { return ids_.end(); }

 private:
  std::vector<VarId> ids_;  // sorted by var_name
};

// Parses "p,q,r" (also accepts spaces) into a VarSet.
VarSet parse_varset(const std::string& text);

bool var_name_less(VarId a, VarId b);

// Minimal dynamic bitset; std::bitset is fixed-width and boost is not
// worth pulling in for the handful of operations used here.
class Bits {
 public:
  Bits() = default;
  explicit Bits(size_t n) : n_(n), w_((n + 63) / 64, 0) {}

  void set(size_t i) { w_[i >> 6] |= (uint64_t{1} << (i & 63)); }
  void reset(size_t i) { w_[i >> 6] &= ~(uint64_t{1} << (i & 63)); }
  bool test(size_t i) const { return (w_[i >> 6] >> (i & 63)) & 1; }
  size_t size() const { return n_; }

  size_t count() const;
  bool subset_of(const Bits& o) const;
  bool intersects(const Bits& o) const;
  Bits operator|(const Bits& o) const;
  Bits operator&(const Bits& o) const;
  bool operator==(const Bits& o) const { return n_ == o.n_ && w_ == o.w_; }
  bool any() const;

  template <typename F>
  void for_each(F f) const {
    for (size_t b = 0; b < w_.size(); ++b) {
      uint64_t x = w_[b];
      while (x) {
        f(b * 64 + static_cast<size_t>(__builtin_ctzll(x)));
        x &= x - 1;
      }
    }
  }

 private:
  size_t n_ = 0;
  std::vector<uint64_t> w_;
};

}  // namespace uipc
