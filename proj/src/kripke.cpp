#include "uipc/kripke.hpp"

#include <algorithm>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

namespace uipc {

uint16_t KripkeModel::node_index(const std::string& name) const {
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<uint16_t>(i);
  throw DomainError("unknown node: " + name);
}

bool KripkeModel::leq(uint16_t i, uint16_t j) const {
  return std::binary_search(up[i].begin(), up[i].end(), j);
}

bool KripkeModel::has_var(uint16_t node, VarId v) const {
  const auto& ids = vars.ids();
  for (size_t k = 0; k < ids.size(); ++k)
    if (ids[k] == v) return (val[node] >> k) & 1;
  throw InputError("variable outside model signature: " + var_name(v));
}

std::vector<uint16_t> KripkeModel::down(uint16_t i) const {
  std::vector<uint16_t> out;
  for (uint16_t j = 0; j < size(); ++j)
    if (leq(j, i)) out.push_back(j);
  return out;
}

namespace {

// Reflexive-transitive closure as row bitmasks (node count <= 64 for the
// closure path; larger models are built internally and are already closed).
std::vector<uint64_t> closure(size_t n,
                              const std::vector<std::pair<uint16_t, uint16_t>>& order) {
  std::vector<uint64_t> row(n, 0);
  for (size_t i = 0; i < n; ++i) row[i] |= uint64_t{1} << i;
  for (auto& [a, b] : order) {
    if (a >= n || b >= n) throw InputError("order pair references unknown node");
    row[a] |= uint64_t{1} << b;
  }
  for (size_t k = 0; k < n; ++k)
    for (size_t i = 0; i < n; ++i)
      if ((row[i] >> k) & 1) row[i] |= row[k];
  return row;
}

Diagnostics check(size_t n, const std::vector<std::string>& names,
                  const std::vector<uint64_t>& row,
                  const std::vector<uint32_t>& val) {
  Diagnostics d;
  std::set<std::string> seen;
  for (auto& nm : names)
    if (!seen.insert(nm).second) {
      d.ok = false;
      d.issues.push_back("duplicate node id: " + nm);
    }
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j)
      if (((row[i] >> j) & 1) && ((row[j] >> i) & 1)) {
        d.ok = false;
        d.issues.push_back("antisymmetry violation (" + names[i] + "," + names[j] + ")");
      }
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j)
      if (i != j && ((row[i] >> j) & 1) && (val[i] & ~val[j])) {
        d.ok = false;
        d.issues.push_back("monotonicity violation (" + names[i] + "," + names[j] + ")");
      }
  return d;
}

}  // namespace

Diagnostics validate_model(VarSet vars, const std::vector<std::string>& names,
                           const std::vector<std::pair<uint16_t, uint16_t>>& order,
                           const std::vector<uint32_t>& val) {
  (void)vars;
  if (names.size() > 64) throw ResourceError("model too large to validate");
  auto row = closure(names.size(), order);
  return check(names.size(), names, row, val);
}

Diagnostics validate_model(const KripkeModel& m) {
  std::vector<std::pair<uint16_t, uint16_t>> order;
  for (uint16_t i = 0; i < m.size(); ++i)
    for (uint16_t j : m.up[i]) order.emplace_back(i, j);
  // transitivity of the stored up-lists
  Diagnostics d;
  for (uint16_t i = 0; i < m.size(); ++i) {
    if (!m.leq(i, i)) {
      d.ok = false;
      d.issues.push_back("missing reflexive edge at " + m.names[i]);
    }
    for (uint16_t j : m.up[i])
      for (uint16_t k : m.up[j])
        if (!m.leq(i, k)) {
          d.ok = false;
          d.issues.push_back("transitivity violation at " + m.names[i]);
        }
  }
  for (uint16_t i = 0; i < m.size(); ++i)
    for (uint16_t j : m.up[i])
      if (i != j && m.leq(j, i)) {
        d.ok = false;
        d.issues.push_back("antisymmetry violation (" + m.names[i] + "," + m.names[j] + ")");
      }
  for (uint16_t i = 0; i < m.size(); ++i)
    for (uint16_t j : m.up[i])
      if (m.val[i] & ~m.val[j]) {
        d.ok = false;
        d.issues.push_back("monotonicity violation (" + m.names[i] + "," + m.names[j] + ")");
      }
  return d;
}

KripkeModel make_model(VarSet vars, std::vector<std::string> names,
                       const std::vector<std::pair<uint16_t, uint16_t>>& order,
                       std::vector<uint32_t> val) {
  size_t n = names.size();
  if (n == 0) throw InputError("model has no nodes");
  if (n > 64) throw ResourceError("make_model supports at most 64 nodes");
  if (val.size() != n) throw InputError("valuation size mismatch");
  auto row = closure(n, order);
  Diagnostics d = check(n, names, row, val);
  if (!d.ok) throw InputError("invalid model: " + d.issues.front());
  KripkeModel m;
  m.vars = std::move(vars);
  m.names = std::move(names);
  m.val = std::move(val);
  m.up.resize(n);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j)
      if ((row[i] >> j) & 1) m.up[i].push_back(static_cast<uint16_t>(j));
  return m;
}

// ---------------------------------------------------------------------------
// Forcing
// ---------------------------------------------------------------------------

const Bits& ForcesEval::eval(Formula f) {
  auto it = memo_.find(f.id);
  if (it != memo_.end()) return it->second;
  size_t n = m_.size();
  Bits out(n);
  switch (kind(f)) {
    case FKind::Var: {
      VarId v = var_of(f);
      const auto& ids = m_.vars.ids();
      size_t k = 0;
      for (; k < ids.size(); ++k)
        if (ids[k] == v) break;
      if (k == ids.size())
        throw InputError("variable outside model signature: " + var_name(v));
      for (size_t i = 0; i < n; ++i)
        if ((m_.val[i] >> k) & 1) out.set(i);
      break;
    }
    case FKind::Bottom:
      break;
    case FKind::Top:
      for (size_t i = 0; i < n; ++i) out.set(i);
      break;
    case FKind::And: {
      out = eval(lhs(f)) & eval(rhs(f));
      break;
    }
    case FKind::Or: {
      out = eval(lhs(f)) | eval(rhs(f));
      break;
    }
    case FKind::Imp: {
      const Bits a = eval(lhs(f));
      const Bits b = eval(rhs(f));
      for (size_t i = 0; i < n; ++i) {
        bool ok = true;
        for (uint16_t j : m_.up[i])
          if (a.test(j) && !b.test(j)) {
            ok = false;
            break;
          }
        if (ok) out.set(i);
      }
      break;
    }
  }
  return memo_.emplace(f.id, std::move(out)).first->second;
}

bool ForcesEval::forces(uint16_t node, Formula f) {
  if (node >= m_.size()) throw DomainError("unknown node index");
  return eval(f).test(node);
}

bool forces(const KripkeModel& m, uint16_t node, Formula f) {
  ForcesEval ev(m);
  return ev.forces(node, f);
}

bool is_p_morphism(const std::vector<uint16_t>& f, const KripkeModel& m,
                   const KripkeModel& n) {
  if (f.size() != m.size()) return false;
  for (uint16_t w = 0; w < m.size(); ++w)
    if (f[w] >= n.size()) return false;
  for (uint16_t w = 0; w < m.size(); ++w) {
    std::set<uint16_t> image;
    for (uint16_t w2 : m.up[w]) image.insert(f[w2]);
    std::set<uint16_t> target(n.up[f[w]].begin(), n.up[f[w]].end());
    if (image != target) return false;
  }
  return true;
}

KripkeModel forget(const KripkeModel& m, const VarSet& keep) {
  if (!keep.subset_of(m.vars)) throw DomainError("forget: keep must be a subset");
  KripkeModel out;
  out.vars = keep;
  out.names = m.names;
  out.up = m.up;
  out.val.resize(m.size(), 0);
  const auto& old_ids = m.vars.ids();
  const auto& new_ids = keep.ids();
  for (size_t k = 0; k < new_ids.size(); ++k) {
    size_t j = std::find(old_ids.begin(), old_ids.end(), new_ids[k]) - old_ids.begin();
    for (size_t i = 0; i < m.size(); ++i)
      if ((m.val[i] >> j) & 1) out.val[i] |= uint32_t{1} << k;
  }
  return out;
}

KripkeModel with_variable(const KripkeModel& m, VarId v, const Bits& where) {
  for (size_t i = 0; i < m.size(); ++i)
    if (where.test(i))
      for (uint16_t j : m.up[i])
        if (!where.test(j)) throw DomainError("with_variable: not an up-set");
  VarSet nv = m.vars.set_union(VarSet({v}));
  KripkeModel out;
  out.vars = nv;
  out.names = m.names;
  out.up = m.up;
  out.val.resize(m.size(), 0);
  const auto& old_ids = m.vars.ids();
  const auto& new_ids = nv.ids();
  for (size_t k = 0; k < new_ids.size(); ++k) {
    if (new_ids[k] == v) {
      for (size_t i = 0; i < m.size(); ++i)
        if (where.test(i)) out.val[i] |= uint32_t{1} << k;
      continue;
    }
    size_t j = std::find(old_ids.begin(), old_ids.end(), new_ids[k]) - old_ids.begin();
    for (size_t i = 0; i < m.size(); ++i)
      if ((m.val[i] >> j) & 1) out.val[i] |= uint32_t{1} << k;
  }
  return out;
}

KripkeModel disjoint_union(const std::vector<KripkeModel>& parts,
                           std::vector<uint16_t>* root_offsets) {
  if (parts.empty()) throw InputError("disjoint_union of nothing");
  KripkeModel out;
  out.vars = parts[0].vars;
  if (root_offsets) root_offsets->clear();
  uint32_t off = 0;
  for (size_t c = 0; c < parts.size(); ++c) {
    const KripkeModel& p = parts[c];
    if (!(p.vars == out.vars)) throw InputError("disjoint_union: signature mismatch");
    if (root_offsets) root_offsets->push_back(static_cast<uint16_t>(off));
    for (size_t i = 0; i < p.size(); ++i) {
      out.names.push_back("c" + std::to_string(c) + "_" + p.names[i]);
      out.val.push_back(p.val[i]);
      std::vector<uint16_t> u;
      u.reserve(p.up[i].size());
      for (uint16_t j : p.up[i]) u.push_back(static_cast<uint16_t>(j + off));
      out.up.push_back(std::move(u));
    }
    off += static_cast<uint32_t>(p.size());
    if (off > 60000) throw ResourceError("disjoint_union: too many nodes");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Enumeration up to isomorphism
// ---------------------------------------------------------------------------

namespace {

using Mat = std::vector<uint32_t>;  // row i bit j: i <= j; reflexive closed

std::vector<Mat> labeled_posets(unsigned n) {
  std::vector<Mat> cur{Mat{}};  // the empty poset
  for (unsigned k = 0; k < n; ++k) {
    std::vector<Mat> next;
    for (const Mat& r : cur) {
      // up-closed and down-closed subsets of the existing poset
      std::vector<uint32_t> ups, downs;
      for (uint32_t s = 0; s < (uint32_t{1} << k); ++s) {
        bool up_ok = true, down_ok = true;
        for (unsigned i = 0; i < k && (up_ok || down_ok); ++i) {
          if ((s >> i) & 1) {
            if ((r[i] & ~s) != 0) up_ok = false;           // i in s, something above i not in s
            uint32_t below = 0;
            for (unsigned j = 0; j < k; ++j)
              if ((r[j] >> i) & 1) below |= uint32_t{1} << j;
            if ((below & ~s) != 0) down_ok = false;
          }
        }
        if (up_ok) ups.push_back(s);
        if (down_ok) downs.push_back(s);
      }
      for (uint32_t d : downs)
        for (uint32_t u : ups) {
          if (d & u) continue;
          // need every (x in d, y in u) already related
          bool ok = true;
          uint32_t dd = d;
          while (dd && ok) {
            unsigned i = static_cast<unsigned>(__builtin_ctz(dd));
            dd &= dd - 1;
            if ((r[i] & u) != u) ok = false;
          }
          if (!ok) continue;
          Mat m2(k + 1, 0);
          for (unsigned i = 0; i < k; ++i) m2[i] = r[i];
          for (unsigned i = 0; i < k; ++i)
            if ((d >> i) & 1) m2[i] |= uint32_t{1} << k;
          m2[k] = u | (uint32_t{1} << k);
          next.push_back(std::move(m2));
        }
    }
    cur = std::move(next);
  }
  return cur;
}

uint64_t encode(const Mat& m, const std::vector<unsigned>& perm) {
  // perm maps new index -> old index; n <= 6 so 36 bits suffice
  unsigned n = static_cast<unsigned>(m.size());
  uint64_t code = 0;
  for (unsigned i = 0; i < n; ++i)
    for (unsigned j = 0; j < n; ++j) {
      code <<= 1;
      code |= (m[perm[i]] >> perm[j]) & 1;
    }
  return code;
}

struct CanonPoset {
  Mat mat;                                  // canonical representative
  std::vector<std::vector<unsigned>> aut;   // automorphisms of the representative
  uint64_t code;
};

std::vector<CanonPoset> canonical_posets_uncached(unsigned n) {
  auto labeled = labeled_posets(n);
  std::map<uint64_t, Mat> reps;
  std::vector<unsigned> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (const Mat& m : labeled) {
    uint64_t best = ~uint64_t{0};
    std::vector<unsigned> bestp;
    std::vector<unsigned> p = perm;
    do {
      uint64_t c = encode(m, p);
      if (c < best) {
        best = c;
        bestp = p;
      }
    } while (std::next_permutation(p.begin(), p.end()));
    if (!reps.count(best)) {
      Mat rep(n, 0);
      for (unsigned i = 0; i < n; ++i)
        for (unsigned j = 0; j < n; ++j)
          if ((m[bestp[i]] >> bestp[j]) & 1) rep[i] |= uint32_t{1} << j;
      reps.emplace(best, std::move(rep));
    }
  }
  std::vector<CanonPoset> out;
  for (auto& [code, rep] : reps) {
    CanonPoset cp;
    cp.mat = rep;
    cp.code = code;
    std::vector<unsigned> p = perm;
    do {
      bool aut = true;
      for (unsigned i = 0; i < n && aut; ++i)
        for (unsigned j = 0; j < n; ++j)
          if ((( rep[i] >> j) & 1) != ((rep[p[i]] >> p[j]) & 1)) {
            aut = false;
            break;
          }
      if (aut) cp.aut.push_back(p);
    } while (std::next_permutation(p.begin(), p.end()));
    out.push_back(std::move(cp));
  }
  return out;  // already sorted by canonical code via std::map
}

const std::vector<CanonPoset>& canonical_posets(unsigned n) {
  static std::mutex mu;
  static std::map<unsigned, std::vector<CanonPoset>> cache;
  std::lock_guard<std::mutex> lk(mu);
  auto it = cache.find(n);
  if (it == cache.end())
    it = cache.emplace(n, canonical_posets_uncached(n)).first;
  return it->second;
}

KripkeModel model_from(const Mat& mat, const std::vector<uint32_t>& nodeval,
                       const VarSet& vars) {
  unsigned n = static_cast<unsigned>(mat.size());
  KripkeModel m;
  m.vars = vars;
  for (unsigned i = 0; i < n; ++i) m.names.push_back("w" + std::to_string(i));
  m.val = nodeval;
  m.up.resize(n);
  for (unsigned i = 0; i < n; ++i)
    for (unsigned j = 0; j < n; ++j)
      if ((mat[i] >> j) & 1) m.up[i].push_back(static_cast<uint16_t>(j));
  return m;
}

}  // namespace

bool visit_models(const VarSet& vars, unsigned max_nodes,
                  const std::function<bool(const KripkeModel&)>& visit) {
  if (max_nodes < 1) throw DomainError("max_nodes must be >= 1");
  if (max_nodes > 6) throw ResourceError("model enumeration capped at 6 nodes");
  size_t nv = vars.size();
  if (nv > 8) throw ResourceError("model enumeration capped at 8 variables");
  for (unsigned n = 1; n <= max_nodes; ++n) {
    for (const CanonPoset& cp : canonical_posets(n)) {
      // monotone valuations: per variable an up-set of the poset
      std::vector<uint32_t> upsets;
      for (uint32_t s = 0; s < (uint32_t{1} << n); ++s) {
        bool ok = true;
        for (unsigned i = 0; i < n && ok; ++i)
          if ((s >> i) & 1)
            if (cp.mat[i] & ~s) ok = false;
        if (ok) upsets.push_back(s);
      }
      // enumerate nv-tuples of up-sets, dedup under poset automorphisms
      std::vector<size_t> idx(nv, 0);
      std::set<std::vector<uint32_t>> seen;
      while (true) {
        std::vector<uint32_t> nodeval(n, 0);
        for (size_t v = 0; v < nv; ++v) {
          uint32_t s = upsets[idx[v]];
          for (unsigned i = 0; i < n; ++i)
            if ((s >> i) & 1) nodeval[i] |= uint32_t{1} << v;
        }
        std::vector<uint32_t> best = nodeval;
        for (const auto& p : cp.aut) {
          std::vector<uint32_t> permuted(n);
          for (unsigned i = 0; i < n; ++i) permuted[i] = nodeval[p[i]];
          if (permuted < best) best = permuted;
        }
        if (best == nodeval && seen.insert(best).second) {
          if (!visit(model_from(cp.mat, nodeval, vars))) return false;
        }
        size_t v = 0;
        for (; v < nv; ++v) {
          if (++idx[v] < upsets.size()) break;
          idx[v] = 0;
        }
        if (v == nv) break;
        if (nv == 0) break;
      }
    }
  }
  return true;
}

std::vector<KripkeModel> enumerate_models(const VarSet& vars, unsigned max_nodes) {
  std::vector<KripkeModel> out;
  visit_models(vars, max_nodes, [&](const KripkeModel& m) {
    out.push_back(m);
    return true;
  });
  return out;
}

bool semantic_consequence_bounded(Formula phi, Formula psi, const VarSet& vars,
                                  unsigned max_nodes) {
  if (!varset_of(phi).set_union(varset_of(psi)).subset_of(vars))
    throw DomainError("formula variables outside the given set");
  return visit_models(vars, max_nodes, [&](const KripkeModel& m) {
    ForcesEval ev(m);
    const Bits& a = ev.eval(phi);
    const Bits& b = ev.eval(psi);
    for (size_t i = 0; i < m.size(); ++i)
      if (a.test(i) && !b.test(i)) return false;  // counterexample found
    return true;
  });
}

// ---------------------------------------------------------------------------
// IO
// ---------------------------------------------------------------------------

KripkeModel model_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw InputError(std::string("bad model JSON: ") + e.what());
  }
  if (!j.contains("vars") || !j.contains("nodes"))
    throw InputError("model JSON needs 'vars' and 'nodes'");
  VarSet vars = VarSet::of_names(j["vars"].get<std::vector<std::string>>());
  std::vector<std::string> names;
  std::vector<uint32_t> val;
  for (auto& nd : j["nodes"]) {
    names.push_back(nd.at("id").get<std::string>());
    uint32_t mask = 0;
    if (nd.contains("val"))
      for (auto& vn : nd["val"]) {
        VarId v = var_id(vn.get<std::string>());
        const auto& ids = vars.ids();
        auto it = std::find(ids.begin(), ids.end(), v);
        if (it == ids.end())
          throw InputError("node valuation uses undeclared variable " + vn.get<std::string>());
        mask |= uint32_t{1} << (it - ids.begin());
      }
    val.push_back(mask);
  }
  std::vector<std::pair<uint16_t, uint16_t>> order;
  if (j.contains("order"))
    for (auto& pr : j["order"]) {
      std::string a = pr.at(0).get<std::string>(), b = pr.at(1).get<std::string>();
      auto find = [&](const std::string& s) -> uint16_t {
        auto it = std::find(names.begin(), names.end(), s);
        if (it == names.end()) throw InputError("order references unknown node " + s);
        return static_cast<uint16_t>(it - names.begin());
      };
      order.emplace_back(find(a), find(b));
    }
  return make_model(std::move(vars), std::move(names), order, std::move(val));
}

std::string model_to_json(const KripkeModel& m) {
  nlohmann::json j;
  j["vars"] = m.vars.names();
  j["nodes"] = nlohmann::json::array();
  for (size_t i = 0; i < m.size(); ++i) {
    nlohmann::json nd;
    nd["id"] = m.names[i];
    std::vector<std::string> vs;
    const auto& ids = m.vars.ids();
    for (size_t k = 0; k < ids.size(); ++k)
      if ((m.val[i] >> k) & 1) vs.push_back(var_name(ids[k]));
    nd["val"] = vs;
    j["nodes"].push_back(nd);
  }
  j["order"] = nlohmann::json::array();
  for (uint16_t i = 0; i < m.size(); ++i)
    for (uint16_t k : m.up[i])
      if (i != k) j["order"].push_back({m.names[i], m.names[k]});
  return j.dump();
}

std::string model_to_dot(const KripkeModel& m) {
  std::ostringstream os;
  os << "digraph model {\n  rankdir=BT;\n  node [shape=box];\n";
  const auto& ids = m.vars.ids();
  for (size_t i = 0; i < m.size(); ++i) {
    std::string label = m.names[i] + "\\n{";
    bool first = true;
    for (size_t k = 0; k < ids.size(); ++k)
      if ((m.val[i] >> k) & 1) {
        if (!first) label += ",";
        label += var_name(ids[k]);
        first = false;
      }
    label += "}";
    os << "  \"" << m.names[i] << "\" [label=\"" << label << "\"];\n";
  }
  // cover edges only
  for (uint16_t i = 0; i < m.size(); ++i)
    for (uint16_t j : m.up[i]) {
      if (i == j) continue;
      bool cover = true;
      for (uint16_t k : m.up[i])
        if (k != i && k != j && m.leq(k, j)) {
          cover = false;
          break;
        }
      if (cover) os << "  \"" << m.names[i] << "\" -> \"" << m.names[j] << "\";\n";
    }
  os << "}\n";
  return os.str();
}

}  // namespace uipc
