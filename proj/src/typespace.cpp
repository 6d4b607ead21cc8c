#include "uipc/typespace.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <mutex>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

namespace uipc {

namespace {

uint64_t mix64(uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebull;
  x ^= x >> 31;
  return x;
}

struct TNode {
  int level;
  std::vector<VarId> val;
  std::vector<TypeId> succ;  // sorted by id
  uint64_t hash;
  TypeId trunc = kNoType;
};

struct TKey {
  int level;
  const std::vector<VarId>* val;
  const std::vector<TypeId>* succ;
};

struct TypeArena {
  std::mutex mu;
  std::deque<TNode> nodes;  // deque: stable references under growth
  std::unordered_map<uint64_t, std::vector<TypeId>> buckets;  // by hash

  uint64_t compute_hash(int level, const std::vector<VarId>& val,
                        const std::vector<TypeId>& succ) {
    uint64_t h = mix64(0x1234abcd ^ uint64_t(level));
    for (VarId v : val) h = mix64(h ^ var_name_hash(v));
    // combine child hashes order-independently, then mix; children are
    // interned so their hashes are already structural
    uint64_t acc = 0;
    for (TypeId s : succ) acc += mix64(nodes[s].hash);
    return mix64(h ^ acc ^ (uint64_t(succ.size()) << 17));
  }

  TypeId intern(int level, std::vector<VarId> val, std::vector<TypeId> succ) {
    std::sort(succ.begin(), succ.end());
    succ.erase(std::unique(succ.begin(), succ.end()), succ.end());
    std::sort(val.begin(), val.end(), var_name_less);
    val.erase(std::unique(val.begin(), val.end()), val.end());
    uint64_t h = compute_hash(level, val, succ);
    auto& bucket = buckets[h];
    for (TypeId id : bucket) {
      const TNode& n = nodes[id];
      if (n.level == level && n.val == val && n.succ == succ) return id;
    }
    TNode n;
    n.level = level;
    n.val = std::move(val);
    n.succ = std::move(succ);
    n.hash = h;
    TypeId id = static_cast<TypeId>(nodes.size());
    nodes.push_back(std::move(n));
    bucket.push_back(id);
    return id;
  }
};

TypeArena& tarena() {
  static TypeArena a;
  return a;
}

}  // namespace

TypeId intern_type(int level, std::vector<VarId> val, std::vector<TypeId> succ) {
  if (level < 0) throw DomainError("negative type level");
  if ((level == 0) != succ.empty())
    throw DomainError("succ must be empty exactly at level 0");
  auto& a = tarena();
  std::lock_guard<std::mutex> lk(a.mu);
  if (level > 0) {
    for (TypeId s : succ)
      if (a.nodes.at(s).level != level - 1)
        throw DomainError("succ member has wrong level");
  }
  return a.intern(level, std::move(val), std::move(succ));
}

int type_level(TypeId t) { return tarena().nodes.at(t).level; }
const std::vector<VarId>& type_val(TypeId t) { return tarena().nodes.at(t).val; }
const std::vector<TypeId>& type_succ(TypeId t) { return tarena().nodes.at(t).succ; }
uint64_t type_hash(TypeId t) { return tarena().nodes.at(t).hash; }

TypeId truncate(TypeId t) {
  auto& a = tarena();
  int level;
  std::vector<VarId> val;
  std::vector<TypeId> succ;
  {
    std::lock_guard<std::mutex> lk(a.mu);
    const TNode& n = a.nodes.at(t);
    if (n.level == 0) throw DomainError("cannot truncate a level-0 type");
    if (n.trunc != kNoType) return n.trunc;
    level = n.level;
    val = n.val;
    succ = n.succ;  // copy: interning below may reallocate the node pool
  }
  TypeId r;
  if (level == 1) {
    r = intern_type(0, std::move(val), {});
  } else {
    std::vector<TypeId> ts;
    ts.reserve(succ.size());
    for (TypeId s : succ) ts.push_back(truncate(s));
    r = intern_type(level - 1, std::move(val), std::move(ts));
  }
  std::lock_guard<std::mutex> lk(a.mu);
  a.nodes.at(t).trunc = r;
  return r;
}

TypeId truncate_to(TypeId t, int level) {
  int l = type_level(t);
  if (level > l) throw DomainError("truncate_to: target above current level");
  while (l > level) {
    t = truncate(t);
    --l;
  }
  return t;
}

bool type_leq(TypeId a, TypeId b) {
  const auto& na = tarena().nodes.at(a);
  const auto& nb = tarena().nodes.at(b);
  if (na.level != nb.level) throw DomainError("type_leq: level mismatch");
  if (na.level == 0)
    return std::includes(nb.val.begin(), nb.val.end(), na.val.begin(),
                         na.val.end(), var_name_less);
  // classes above the greater point form a subset
  return std::includes(na.succ.begin(), na.succ.end(), nb.succ.begin(),
                       nb.succ.end());
}

size_t succ_count(TypeId t) {
  if (type_level(t) < 1) throw DomainError("succ_count needs level >= 1");
  return type_succ(t).size();
}

namespace {

struct PairHash {
  size_t operator()(const std::pair<uint64_t, uint64_t>& p) const {
    return static_cast<size_t>(mix64(p.first ^ mix64(p.second)));
  }
};

}  // namespace

bool forces_type(TypeId t, Formula f) {
  static std::mutex mu;
  static std::unordered_map<std::pair<uint64_t, uint64_t>, bool, PairHash> memo;
  if (static_cast<int>(impl_degree(f)) > type_level(t))
    throw DomainError("forces_type: formula degree exceeds type level");
  switch (kind(f)) {
    case FKind::Bottom:
      return false;
    case FKind::Top:
      return true;
    case FKind::Var: {
      const auto& val = type_val(t);
      return std::binary_search(val.begin(), val.end(), var_of(f), var_name_less);
    }
    case FKind::And:
      return forces_type(t, lhs(f)) && forces_type(t, rhs(f));
    case FKind::Or:
      return forces_type(t, lhs(f)) || forces_type(t, rhs(f));
    case FKind::Imp: {
      std::pair<uint64_t, uint64_t> key{t, f.id};
      {
        std::lock_guard<std::mutex> lk(mu);
        auto it = memo.find(key);
        if (it != memo.end()) return it->second;
      }
      bool ok = true;
      for (TypeId s : type_succ(t))
        if (forces_type(s, lhs(f)) && !forces_type(s, rhs(f))) {
          ok = false;
          break;
        }
      std::lock_guard<std::mutex> lk(mu);
      memo.emplace(key, ok);
      return ok;
    }
  }
  throw DomainError("bad formula kind");
}

TypeId restrict_vars(TypeId t, const VarSet& keep) {
  static std::mutex mu;
  static std::map<std::vector<VarId>, uint32_t> keep_ids;
  static std::unordered_map<std::pair<uint64_t, uint64_t>, TypeId, PairHash> memo;
  uint32_t kid;
  {
    std::lock_guard<std::mutex> lk(mu);
    auto [it, fresh] = keep_ids.emplace(keep.ids(), static_cast<uint32_t>(keep_ids.size()));
    kid = it->second;
    (void)fresh;
    auto mit = memo.find({t, kid});
    if (mit != memo.end()) return mit->second;
  }
  const int level = type_level(t);
  std::vector<VarId> nv;
  for (VarId v : type_val(t))
    if (keep.contains(v)) nv.push_back(v);
  std::vector<TypeId> succ = type_succ(t);  // copy before interning
  TypeId r;
  if (level == 0) {
    r = intern_type(0, std::move(nv), {});
  } else {
    std::vector<TypeId> ns;
    ns.reserve(succ.size());
    for (TypeId s : succ) ns.push_back(restrict_vars(s, keep));
    r = intern_type(level, std::move(nv), std::move(ns));
  }
  std::lock_guard<std::mutex> lk(mu);
  memo.emplace(std::make_pair(uint64_t{t}, uint64_t{kid}), r);
  return r;
}

std::string TypeDistance::to_string() const {
  std::string s = exact ? "2^-" : "<=2^-";
  return s + std::to_string(k);
}

double TypeDistance::value_upper() const {
  return k >= 64 ? 0.0 : 1.0 / static_cast<double>(uint64_t{1} << std::min(k, 62u));
}

TypeDistance type_distance(TypeId a, TypeId b) {
  int la = type_level(a), lb = type_level(b);
  if (la != lb) throw DomainError("type_distance: level mismatch");
  if (a == b) return {false, static_cast<unsigned>(la)};
  for (int k = 0; k <= la; ++k)
    if (truncate_to(a, k) != truncate_to(b, k))
      return {true, static_cast<unsigned>(k)};
  throw DomainError("distinct interned types with equal truncations");
}

// ---------------------------------------------------------------------------
// Types of model nodes
// ---------------------------------------------------------------------------

const std::vector<TypeId>& TypeTower::row(int level) {
  if (level < 0) throw DomainError("negative level");
  size_t n = m_->size();
  while (static_cast<int>(rows_.size()) <= level) {
    int k = static_cast<int>(rows_.size());
    std::vector<TypeId> row(n);
    if (k == 0) {
      const auto& ids = m_->vars.ids();
      for (size_t i = 0; i < n; ++i) {
        std::vector<VarId> val;
        for (size_t b = 0; b < ids.size(); ++b)
          if ((m_->val[i] >> b) & 1) val.push_back(ids[b]);
        row[i] = intern_type(0, std::move(val), {});
      }
    } else {
      const auto& prev = rows_[k - 1];
      const auto& ids = m_->vars.ids();
      for (size_t i = 0; i < n; ++i) {
        std::vector<TypeId> succ;
        succ.reserve(m_->up[i].size());
        for (uint16_t j : m_->up[i]) succ.push_back(prev[j]);
        std::vector<VarId> val;
        for (size_t b = 0; b < ids.size(); ++b)
          if ((m_->val[i] >> b) & 1) val.push_back(ids[b]);
        row[i] = intern_type(k, std::move(val), std::move(succ));
      }
    }
    rows_.push_back(std::move(row));
  }
  return rows_[level];
}

TypeId TypeTower::at(uint16_t node, int level) {
  if (node >= m_->size()) throw DomainError("unknown node index");
  return row(level)[node];
}

TypeId type_of(const KripkeModel& m, uint16_t node, int level) {
  TypeTower tw(m);
  return tw.at(node, level);
}

// ---------------------------------------------------------------------------
// Space construction
// ---------------------------------------------------------------------------

namespace {

constexpr size_t kGroundCap = 27;  // subset enumeration bound: 2^27 candidates

struct Cand {
  uint64_t mask;   // subset of the previous level's elements
  uint32_t vmask;  // valuation over space vars order
  TypeId tau;      // its own truncation, a previous-level element
  bool alive = true;
};

std::vector<VarId> vmask_to_val(uint32_t vmask, const VarSet& vars) {
  std::vector<VarId> out;
  const auto& ids = vars.ids();
  for (size_t b = 0; b < ids.size(); ++b)
    if ((vmask >> b) & 1) out.push_back(ids[b]);
  return out;
}

TypeSpace build_level0(const VarSet& vars) {
  TypeSpace s;
  s.vars = vars;
  s.level = 0;
  size_t nv = vars.size();
  if (nv > 20) throw ResourceError("too many variables for a type space");
  std::vector<std::pair<uint64_t, TypeId>> els;
  for (uint32_t m = 0; m < (uint32_t{1} << nv); ++m) {
    TypeId t = intern_type(0, vmask_to_val(m, vars), {});
    els.emplace_back(type_hash(t), t);
  }
  std::sort(els.begin(), els.end());
  for (auto& [h, t] : els) s.elements.push_back(t);
  size_t n = s.elements.size();
  s.up.assign(n, Bits(n));
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j)
      if (type_leq(s.elements[i], s.elements[j])) s.up[i].set(j);
  return s;
}

TypeSpace build_next(const TypeSpace& prev) {
  const size_t g = prev.size();
  if (g > kGroundCap)
    throw ResourceError("type space ground set too large (" + std::to_string(g) +
                        " elements at level " + std::to_string(prev.level) + ")");
  const VarSet& vars = prev.vars;
  size_t nv = vars.size();

  // per ground element: valuation mask and the index of its truncation
  std::vector<uint32_t> gval(g, 0);
  std::vector<TypeId> gtrunc(g);
  for (size_t i = 0; i < g; ++i) {
    const auto& val = type_val(prev.elements[i]);
    uint32_t m = 0;
    const auto& ids = vars.ids();
    for (size_t b = 0; b < ids.size(); ++b)
      if (std::binary_search(val.begin(), val.end(), ids[b], var_name_less))
        m |= uint32_t{1} << b;
    gval[i] = m;
    gtrunc[i] = prev.level == 0 ? kNoType : truncate(prev.elements[i]);
  }

  std::vector<Cand> cands;
  // DFS over subsets with incremental val-intersection and trunc set
  std::vector<uint32_t> chosen;
  uint64_t mask = 0;
  auto leaf = [&](uint32_t vand) {
    if (!mask) return;
    // truncation of the candidate (v, S): level-`prev.level` type
    // (v, truncs(S)); candidate is viable only if it lies in S itself.
    for (uint32_t v = vand;; v = (v - 1) & vand) {
      TypeId tau;
      if (prev.level == 0) {
        tau = intern_type(0, vmask_to_val(v, vars), {});
      } else {
        std::vector<TypeId> ts;
        ts.reserve(chosen.size());
        for (uint32_t i : chosen) ts.push_back(gtrunc[i]);
        tau = intern_type(prev.level, vmask_to_val(v, vars), std::move(ts));
      }
      auto idx = prev.index_of(tau);
      if (idx && (mask >> *idx) & 1) cands.push_back({mask, v, tau, true});
      if (v == 0) break;
    }
  };
  // iterative subset enumeration
  std::function<void(size_t, uint32_t)> rec = [&](size_t from, uint32_t vand) {
    leaf(vand);
    for (size_t i = from; i < g; ++i) {
      chosen.push_back(static_cast<uint32_t>(i));
      mask |= uint64_t{1} << i;
      rec(i + 1, vand & gval[i]);
      mask &= ~(uint64_t{1} << i);
      chosen.pop_back();
    }
  };
  uint32_t all = nv >= 32 ? ~uint32_t{0} : (uint32_t{1} << nv) - 1;
  rec(0, all);

  // prune to the greatest fixpoint: every succ member needs a surviving
  // candidate refining it inside the candidate's own succ set
  std::unordered_map<TypeId, std::vector<size_t>> by_tau;
  for (size_t c = 0; c < cands.size(); ++c) by_tau[cands[c].tau].push_back(c);
  bool changed = true;
  while (changed) {
    changed = false;
    for (auto& c : cands) {
      if (!c.alive) continue;
      uint64_t m = c.mask;
      while (m) {
        size_t i = static_cast<size_t>(__builtin_ctzll(m));
        m &= m - 1;
        auto it = by_tau.find(prev.elements[i]);
        bool found = false;
        if (it != by_tau.end())
          for (size_t w : it->second)
            if (cands[w].alive && (cands[w].mask & ~c.mask) == 0) {
              found = true;
              break;
            }
        if (!found) {
          c.alive = false;
          changed = true;
          break;
        }
      }
    }
  }

  TypeSpace s;
  s.vars = vars;
  s.level = prev.level + 1;
  std::vector<std::pair<uint64_t, std::pair<TypeId, uint64_t>>> els;
  for (auto& c : cands) {
    if (!c.alive) continue;
    std::vector<TypeId> succ;
    uint64_t m = c.mask;
    while (m) {
      size_t i = static_cast<size_t>(__builtin_ctzll(m));
      m &= m - 1;
      succ.push_back(prev.elements[i]);
    }
    TypeId t = intern_type(s.level, vmask_to_val(c.vmask, vars), std::move(succ));
    els.push_back({type_hash(t), {t, c.mask}});
  }
  std::sort(els.begin(), els.end());
  els.erase(std::unique(els.begin(), els.end()), els.end());
  size_t n = els.size();
  for (auto& e : els) {
    s.elements.push_back(e.second.first);
    s.succ_mask.push_back(e.second.second);
  }
  s.up.assign(n, Bits(n));
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j)
      if ((s.succ_mask[j] & ~s.succ_mask[i]) == 0) s.up[i].set(j);
  return s;
}

struct SpaceCache {
  std::mutex mu;
  std::map<std::pair<std::string, int>, SpacePtr> map;
};

SpaceCache& scache() {
  static SpaceCache c;
  return c;
}

}  // namespace

std::optional<uint32_t> TypeSpace::index_of(TypeId t) const {
  for (uint32_t i = 0; i < elements.size(); ++i)
    if (elements[i] == t) return i;
  return std::nullopt;
}

std::vector<uint32_t> TypeSpace::covers(uint32_t i) const {
  std::vector<uint32_t> strict;
  up[i].for_each([&](size_t j) {
    if (j != i) strict.push_back(static_cast<uint32_t>(j));
  });
  std::vector<uint32_t> out;
  for (uint32_t j : strict) {
    bool minimal = true;
    for (uint32_t k : strict)
      if (k != j && leq_idx(k, j)) {
        minimal = false;
        break;
      }
    if (minimal) out.push_back(j);
  }
  return out;
}

std::vector<uint32_t> TypeSpace::minimal_of(const Bits& subset) const {
  std::vector<uint32_t> out;
  subset.for_each([&](size_t i) {
    bool minimal = true;
    subset.for_each([&](size_t j) {
      if (j != i && leq_idx(static_cast<uint32_t>(j), static_cast<uint32_t>(i)))
        minimal = false;
    });
    if (minimal) out.push_back(static_cast<uint32_t>(i));
  });
  return out;
}

Bits TypeSpace::up_closure(const Bits& subset) const {
  Bits out(size());
  subset.for_each([&](size_t i) { out = out | up[i]; });
  return out;
}

bool TypeSpace::is_upset(const Bits& subset) const {
  Bits cl = up_closure(subset);
  return cl == subset;
}

SpacePtr build_space(const VarSet& vars, int level) {
  if (level < 0) throw DomainError("negative space level");
  auto& c = scache();
  std::lock_guard<std::mutex> lk(c.mu);
  std::string key = vars.to_string();
  // find deepest cached level to extend from
  SpacePtr cur;
  int have = -1;
  for (int k = level; k >= 0; --k) {
    auto it = c.map.find({key, k});
    if (it != c.map.end()) {
      cur = it->second;
      have = k;
      break;
    }
  }
  if (have == -1) {
    cur = std::make_shared<TypeSpace>(build_level0(vars));
    c.map[{key, 0}] = cur;
    have = 0;
  }
  while (have < level) {
    cur = std::make_shared<TypeSpace>(build_next(*cur));
    ++have;
    c.map[{key, have}] = cur;
  }
  return cur;
}

int max_feasible_level(const VarSet& vars, int want) {
  int k = 0;
  SpacePtr s = build_space(vars, 0);
  while (k < want) {
    if (s->size() > kGroundCap) break;
    s = build_space(vars, k + 1);
    ++k;
  }
  return k;
}

KripkeModel space_model(const TypeSpace& s) {
  KripkeModel m;
  m.vars = s.vars;
  size_t n = s.size();
  const auto& ids = s.vars.ids();
  for (size_t i = 0; i < n; ++i) {
    m.names.push_back("t" + std::to_string(i));
    const auto& val = type_val(s.elements[i]);
    uint32_t mask = 0;
    for (size_t b = 0; b < ids.size(); ++b)
      if (std::binary_search(val.begin(), val.end(), ids[b], var_name_less))
        mask |= uint32_t{1} << b;
    m.val.push_back(mask);
    std::vector<uint16_t> up;
    s.up[i].for_each([&](size_t j) { up.push_back(static_cast<uint16_t>(j)); });
    m.up.push_back(std::move(up));
  }
  return m;
}

RootedModel realizer(const TypeSpace& s, TypeId t) {
  auto idx = s.index_of(t);
  if (!idx) throw DomainError("realizer: type not in space");
  std::vector<uint32_t> keep;
  s.up[*idx].for_each([&](size_t j) { keep.push_back(static_cast<uint32_t>(j)); });
  std::vector<int> pos(s.size(), -1);
  for (size_t k = 0; k < keep.size(); ++k) pos[keep[k]] = static_cast<int>(k);
  KripkeModel whole = space_model(s);
  KripkeModel m;
  m.vars = whole.vars;
  for (uint32_t j : keep) {
    m.names.push_back(whole.names[j]);
    m.val.push_back(whole.val[j]);
    std::vector<uint16_t> up;
    for (uint16_t u : whole.up[j])
      if (pos[u] >= 0) up.push_back(static_cast<uint16_t>(pos[u]));
    m.up.push_back(std::move(up));
  }
  return {std::move(m), static_cast<uint16_t>(pos[*idx])};
}

Bits classes_of(const TypeSpace& s, Formula f) {
  if (static_cast<int>(impl_degree(f)) > s.level)
    throw DomainError("classes_of: formula degree exceeds space level");
  if (!varset_of(f).subset_of(s.vars))
    throw DomainError("classes_of: formula variables outside space");
  Bits out(s.size());
  for (uint32_t i = 0; i < s.size(); ++i)
    if (forces_type(s.elements[i], f)) out.set(i);
  if (!s.is_upset(out))
    throw std::logic_error("classes_of produced a non-up-closed set");
  return out;
}

size_t R_bound(const TypeSpace& s) { return 2 * s.size() - 1; }

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

namespace {

nlohmann::json type_json_rec(TypeId t) {
  nlohmann::json j;
  std::vector<std::string> names;
  for (VarId v : type_val(t)) names.push_back(var_name(v));
  j["val"] = names;
  if (type_level(t) > 0) {
    std::vector<TypeId> ss = type_succ(t);
    std::sort(ss.begin(), ss.end(), [](TypeId a, TypeId b) {
      return std::make_pair(type_hash(a), a) < std::make_pair(type_hash(b), b);
    });
    nlohmann::json arr = nlohmann::json::array();
    for (TypeId s : ss) arr.push_back(type_json_rec(s));
    j["succ"] = arr;
  }
  return j;
}

}  // namespace

std::string type_to_json(TypeId t) { return type_json_rec(t).dump(); }

std::string space_to_json(const TypeSpace& s) {
  nlohmann::json j;
  j["vars"] = s.vars.names();
  j["level"] = s.level;
  nlohmann::json els = nlohmann::json::array();
  for (TypeId t : s.elements) els.push_back(type_json_rec(t));
  j["elements"] = els;
  nlohmann::json ord = nlohmann::json::array();
  for (uint32_t i = 0; i < s.size(); ++i)
    s.up[i].for_each([&](size_t k) {
      if (k != i) ord.push_back({i, static_cast<uint32_t>(k)});
    });
  j["order"] = ord;
  return j.dump();
}

std::string space_to_dot(const TypeSpace& s) {
  std::ostringstream os;
  os << "digraph space {\n  rankdir=BT;\n  node [shape=box];\n";
  for (uint32_t i = 0; i < s.size(); ++i) {
    std::string label = "t" + std::to_string(i) + "\\n{";
    const auto& val = type_val(s.elements[i]);
    for (size_t k = 0; k < val.size(); ++k) {
      if (k) label += ",";
      label += var_name(val[k]);
    }
    label += "}";
    os << "  t" << i << " [label=\"" << label << "\"];\n";
  }
  for (uint32_t i = 0; i < s.size(); ++i)
    for (uint32_t j : s.covers(i))
      os << "  t" << i << " -> t" << j << ";\n";
  os << "}\n";
  return os.str();
}

}  // namespace uipc
