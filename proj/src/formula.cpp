#include "uipc/formula.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <deque>
#include <map>
#include <mutex>
#include <sstream>
#include <unordered_map>

namespace uipc {

namespace {

struct VarTable {
  std::mutex mu;
  std::unordered_map<std::string, VarId> by_name;
  std::vector<std::string> names;
  std::vector<uint64_t> hashes;
};

VarTable& vtab() {
  static VarTable t;
  return t;
}

uint64_t fnv1a(const void* data, size_t n, uint64_t h = 1469598103934665603ull) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

VarId var_id(const std::string& name) {
  auto& t = vtab();
  std::lock_guard<std::mutex> lk(t.mu);
  auto it = t.by_name.find(name);
  if (it != t.by_name.end()) return it->second;
  VarId id = static_cast<VarId>(t.names.size());
  t.by_name.emplace(name, id);
  t.names.push_back(name);
  t.hashes.push_back(fnv1a(name.data(), name.size()));
  return id;
}

const std::string& var_name(VarId v) { return vtab().names.at(v); }
uint64_t var_name_hash(VarId v) { return vtab().hashes.at(v); }
bool var_name_less(VarId a, VarId b) { return var_name(a) < var_name(b); }

VarSet::VarSet(std::vector<VarId> vs) : ids_(std::move(vs)) {
  std::sort(ids_.begin(), ids_.end(), var_name_less);
  ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
}

VarSet VarSet::of_names(const std::vector<std::string>& names) {
  std::vector<VarId> ids;
  ids.reserve(names.size());
  for (auto& n : names) ids.push_back(var_id(n));
  return VarSet(std::move(ids));
}

bool VarSet::contains(VarId v) const {
  return std::binary_search(ids_.begin(), ids_.end(), v, var_name_less);
}

bool VarSet::subset_of(const VarSet& other) const {
  return std::includes(other.ids_.begin(), other.ids_.end(), ids_.begin(),
                       ids_.end(), var_name_less);
}

VarSet VarSet::set_union(const VarSet& other) const {
  std::vector<VarId> out;
  std::set_union(ids_.begin(), ids_.end(), other.ids_.begin(), other.ids_.end(),
                 std::back_inserter(out), var_name_less);
  VarSet r;
  r.ids_ = std::move(out);
  return r;
}

VarSet VarSet::set_minus(const VarSet& other) const {
  std::vector<VarId> out;
  std::set_difference(ids_.begin(), ids_.end(), other.ids_.begin(),
                      other.ids_.end(), std::back_inserter(out), var_name_less);
  VarSet r;
  r.ids_ = std::move(out);
  return r;
}

VarSet VarSet::set_intersect(const VarSet& other) const {
  std::vector<VarId> out;
  std::set_intersection(ids_.begin(), ids_.end(), other.ids_.begin(),
                        other.ids_.end(), std::back_inserter(out),
                        var_name_less);
  VarSet r;
  r.ids_ = std::move(out);
  return r;
}

std::vector<std::string> VarSet::names() const {
  std::vector<std::string> out;
  out.reserve(ids_.size());
  for (VarId v : ids_) out.push_back(var_name(v));
  return out;
}

std::string VarSet::to_string() const {
  std::string s;
  for (size_t i = 0; i < ids_.size(); ++i) {
    if (i) s += ",";
    s += var_name(ids_[i]);
  }
  return s;
}

VarSet parse_varset(const std::string& text) {
  std::vector<std::string> names;
  std::string cur;
  for (char c : text) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!cur.empty()) names.push_back(cur), cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) names.push_back(cur);
  return VarSet::of_names(names);
}

size_t Bits::count() const {
  size_t c = 0;
  for (uint64_t x : w_) c += static_cast<size_t>(__builtin_popcountll(x));
  return c;
}

bool Bits::subset_of(const Bits& o) const {
  for (size_t i = 0; i < w_.size(); ++i)
    if (w_[i] & ~o.w_[i]) return false;
  return true;
}

bool Bits::intersects(const Bits& o) const {
  for (size_t i = 0; i < w_.size(); ++i)
    if (w_[i] & o.w_[i]) return true;
  return false;
}

Bits Bits::operator|(const Bits& o) const {
  Bits r(n_);
  for (size_t i = 0; i < w_.size(); ++i) r.w_[i] = w_[i] | o.w_[i];
  return r;
}

Bits Bits::operator&(const Bits& o) const {
  Bits r(n_);
  for (size_t i = 0; i < w_.size(); ++i) r.w_[i] = w_[i] & o.w_[i];
  return r;
}

bool Bits::any() const {
  for (uint64_t x : w_)
    if (x) return true;
  return false;
}

// ---------------------------------------------------------------------------
// Formula arena
// ---------------------------------------------------------------------------

namespace {

struct FNode {
  FKind k;
  uint32_t a = 0;
  uint32_t b = 0;
  VarId v = 0;
  uint16_t degree = 0;
  uint32_t size = 1;
  uint32_t vars_idx = 0;  // index into the varset pool
  uint64_t hash = 0;
};

struct FKey {
  FKind k;
  uint32_t a, b;
  VarId v;
  bool operator==(const FKey&) const = default;
};

struct FKeyHash {
  size_t operator()(const FKey& key) const {
    uint64_t h = (uint64_t(key.k) << 56) ^ (uint64_t(key.a) << 32) ^
                 (uint64_t(key.b) << 1) ^ (uint64_t(key.v) * 0x9e3779b97f4a7c15ull);
    h ^= h >> 29;
    h *= 0xbf58476d1ce4e5b9ull;
    h ^= h >> 32;
    return static_cast<size_t>(h);
  }
};

struct FormulaArena {
  std::mutex mu;
  std::unordered_map<FKey, uint32_t, FKeyHash> table;
  std::deque<FNode> nodes;  // deque: stable references under growth
  std::deque<std::vector<VarId>> varsets;
  std::map<std::vector<VarId>, uint32_t> varset_ids;

  FormulaArena() {
    varsets.push_back({});
    varset_ids.emplace(std::vector<VarId>{}, 0);
    intern(FKind::Bottom, 0, 0, 0);  // id 0
    intern(FKind::Top, 0, 0, 0);     // id 1
  }

  uint32_t varset_intern(std::vector<VarId> vs) {
    auto it = varset_ids.find(vs);
    if (it != varset_ids.end()) return it->second;
    uint32_t id = static_cast<uint32_t>(varsets.size());
    varset_ids.emplace(vs, id);
    varsets.push_back(std::move(vs));
    return id;
  }

  uint32_t intern(FKind k, uint32_t a, uint32_t b, VarId v) {
    FKey key{k, a, b, v};
    auto it = table.find(key);
    if (it != table.end()) return it->second;
    FNode n;
    n.k = k;
    n.a = a;
    n.b = b;
    n.v = v;
    switch (k) {
      case FKind::Var:
        n.degree = 0;
        n.size = 1;
        n.vars_idx = varset_intern({v});
        n.hash = fnv1a("v", 1, var_name_hash(v));
        break;
      case FKind::Bottom:
      case FKind::Top:
        n.degree = 0;
        n.size = 1;
        n.vars_idx = 0;
        n.hash = (k == FKind::Bottom) ? 0x62ull : 0x74ull;
        n.hash = fnv1a(&n.hash, 8, 99);
        break;
      default: {
        const FNode& l = nodes[a];
        const FNode& r = nodes[b];
        n.degree = std::max(l.degree, r.degree);
        if (k == FKind::Imp) n.degree += 1;
        n.size = 1 + l.size + r.size;
        std::vector<VarId> vs;
        const auto& lv = varsets[l.vars_idx];
        const auto& rv = varsets[r.vars_idx];
        std::set_union(lv.begin(), lv.end(), rv.begin(), rv.end(),
                       std::back_inserter(vs), var_name_less);
        n.vars_idx = varset_intern(std::move(vs));
        uint64_t mix[3] = {uint64_t(k), l.hash, r.hash};
        n.hash = fnv1a(mix, sizeof mix);
        break;
      }
    }
    uint32_t id = static_cast<uint32_t>(nodes.size());
    nodes.push_back(n);
    table.emplace(key, id);
    return id;
  }
};

FormulaArena& farena() {
  static FormulaArena a;
  return a;
}

const FNode& fnode(Formula f) { return farena().nodes.at(f.id); }

}  // namespace

Formula f_var(VarId v) {
  auto& a = farena();
  std::lock_guard<std::mutex> lk(a.mu);
  return Formula{a.intern(FKind::Var, 0, 0, v)};
}
Formula f_var(const std::string& name) { return f_var(var_id(name)); }
Formula f_bot() { return Formula{0}; }
Formula f_top() { return Formula{1}; }

static Formula f_bin(FKind k, Formula x, Formula y) {
  auto& a = farena();
  std::lock_guard<std::mutex> lk(a.mu);
  return Formula{a.intern(k, x.id, y.id, 0)};
}

Formula f_and(Formula a, Formula b) { return f_bin(FKind::And, a, b); }
Formula f_or(Formula a, Formula b) { return f_bin(FKind::Or, a, b); }
Formula f_imp(Formula a, Formula b) { return f_bin(FKind::Imp, a, b); }

FKind kind(Formula f) { return fnode(f).k; }
Formula lhs(Formula f) { return Formula{fnode(f).a}; }
Formula rhs(Formula f) { return Formula{fnode(f).b}; }
VarId var_of(Formula f) { return fnode(f).v; }
unsigned impl_degree(Formula f) { return fnode(f).degree; }
uint64_t formula_hash(Formula f) { return fnode(f).hash; }
unsigned formula_size(Formula f) { return fnode(f).size; }

const std::vector<VarId>& vars_of(Formula f) {
  auto& a = farena();
  return a.varsets[fnode(f).vars_idx];
}

VarSet varset_of(Formula f) { return VarSet(vars_of(f)); }

int formula_cmp(Formula a, Formula b) {
  if (a == b) return 0;
  const FNode& x = fnode(a);
  const FNode& y = fnode(b);
  if (x.k != y.k) return x.k < y.k ? -1 : 1;
  if (x.k == FKind::Var) {
    const std::string &na = var_name(x.v), &nb = var_name(y.v);
    return na < nb ? -1 : (na == nb ? 0 : 1);
  }
  if (int c = formula_cmp(Formula{x.a}, Formula{y.a})) return c;
  return formula_cmp(Formula{x.b}, Formula{y.b});
}

Formula make_conj(std::span<const Formula> fs) {
  if (fs.empty()) return f_top();
  Formula acc = fs.back();
  for (size_t i = fs.size() - 1; i-- > 0;) acc = f_and(fs[i], acc);
  return acc;
}

Formula make_disj(std::span<const Formula> fs) {
  if (fs.empty()) return f_bot();
  Formula acc = fs.back();
  for (size_t i = fs.size() - 1; i-- > 0;) acc = f_or(fs[i], acc);
  return acc;
}

Formula substitute(Formula f, VarId v, Formula repl) {
  switch (kind(f)) {
    case FKind::Var:
      return var_of(f) == v ? repl : f;
    case FKind::Bottom:
    case FKind::Top:
      return f;
    case FKind::And:
      return f_and(substitute(lhs(f), v, repl), substitute(rhs(f), v, repl));
    case FKind::Or:
      return f_or(substitute(lhs(f), v, repl), substitute(rhs(f), v, repl));
    case FKind::Imp:
      return f_imp(substitute(lhs(f), v, repl), substitute(rhs(f), v, repl));
  }
  throw DomainError("bad formula kind");
}

std::vector<Formula> subformulas(Formula f) {
  std::vector<Formula> out;
  std::vector<Formula> stack{f};
  while (!stack.empty()) {
    Formula g = stack.back();
    stack.pop_back();
    out.push_back(g);
    if (kind(g) == FKind::And || kind(g) == FKind::Or || kind(g) == FKind::Imp) {
      stack.push_back(lhs(g));
      stack.push_back(rhs(g));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

namespace {

struct Lexer {
  enum Tok { TVar, TFalse, TTrue, TNot, TAnd, TOr, TImp, TLParen, TRParen, TEnd };
  const std::string& s;
  size_t pos = 0;
  Tok tok = TEnd;
  std::string tok_text;
  size_t tok_pos = 0;

  explicit Lexer(const std::string& str) : s(str) { next(); }

  bool starts_with(const char* u) {
    return s.compare(pos, strlen(u), u) == 0;
  }

  void next() {
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t' || s[pos] == '\n' || s[pos] == '\r'))
      ++pos;
    tok_pos = pos;
    if (pos >= s.size()) {
      tok = TEnd;
      return;
    }
    char c = s[pos];
    if (c == '(') { tok = TLParen; ++pos; return; }
    if (c == ')') { tok = TRParen; ++pos; return; }
    if (c == '~') { tok = TNot; ++pos; return; }
    if (c == '&') { tok = TAnd; ++pos; return; }
    if (c == '|') {
      if (pos + 1 < s.size() && s[pos + 1] == '-')
        throw ParseError("unexpected turnstile in formula", pos);
      tok = TOr; ++pos; return;
    }
    if (c == '-') {
      if (pos + 1 < s.size() && s[pos + 1] == '>') { tok = TImp; pos += 2; return; }
      throw ParseError("unexpected '-'", pos);
    }
    if (starts_with("\xc2\xac")) { tok = TNot; pos += 2; return; }        // ¬
    if (starts_with("\xe2\x88\xa7")) { tok = TAnd; pos += 3; return; }    // ∧
    if (starts_with("\xe2\x88\xa8")) { tok = TOr; pos += 3; return; }     // ∨
    if (starts_with("\xe2\x86\x92")) { tok = TImp; pos += 3; return; }    // →
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t start = pos;
      while (pos < s.size() &&
             (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_'))
        ++pos;
      tok_text = s.substr(start, pos - start);
      if (tok_text == "false") tok = TFalse;
      else if (tok_text == "true") tok = TTrue;
      else tok = TVar;
      return;
    }
    throw ParseError("unexpected character", pos);
  }
};

struct Parser {
  Lexer lx;
  explicit Parser(const std::string& s) : lx(s) {}

  Formula parse_impl() {
    Formula left = parse_or();
    if (lx.tok == Lexer::TImp) {
      lx.next();
      Formula right = parse_impl();  // right-associative
      return f_imp(left, right);
    }
    return left;
  }

  Formula parse_or() {
    Formula acc = parse_and();
    while (lx.tok == Lexer::TOr) {
      lx.next();
      acc = f_or(acc, parse_and());
    }
    return acc;
  }

  Formula parse_and() {
    Formula acc = parse_unary();
    while (lx.tok == Lexer::TAnd) {
      lx.next();
      acc = f_and(acc, parse_unary());
    }
    return acc;
  }

  Formula parse_unary() {
    if (lx.tok == Lexer::TNot) {
      lx.next();
      return f_neg(parse_unary());
    }
    return parse_primary();
  }

  Formula parse_primary() {
    switch (lx.tok) {
      case Lexer::TVar: {
        Formula f = f_var(lx.tok_text);
        lx.next();
        return f;
      }
      case Lexer::TFalse:
        lx.next();
        return f_bot();
      case Lexer::TTrue:
        lx.next();
        return f_top();
      case Lexer::TLParen: {
        lx.next();
        Formula f = parse_impl();
        if (lx.tok != Lexer::TRParen)
          throw ParseError("expected ')'", lx.tok_pos);
        lx.next();
        return f;
      }
      default:
        throw ParseError("expected a formula", lx.tok_pos);
    }
  }
};

// Precedence levels used by the renderer: Imp=1, Or=2, And=3, atom/neg=4.
int prec(Formula f) {
  switch (kind(f)) {
    case FKind::Imp:
      return (rhs(f) == f_bot()) ? 4 : 1;  // negations render as ~x
    case FKind::Or:
      return 2;
    case FKind::And:
      return 3;
    default:
      return 4;
  }
}

void render_rec(Formula f, int min_prec, std::string& out) {
  int p = prec(f);
  bool paren = p < min_prec;
  if (paren) out += "(";
  switch (kind(f)) {
    case FKind::Var:
      out += var_name(var_of(f));
      break;
    case FKind::Bottom:
      out += "false";
      break;
    case FKind::Top:
      out += "true";
      break;
    case FKind::And:
      render_rec(lhs(f), 3, out);
      out += " & ";
      render_rec(rhs(f), 4, out);  // left-assoc: right child needs higher level
      break;
    case FKind::Or:
      render_rec(lhs(f), 2, out);
      out += " | ";
      render_rec(rhs(f), 3, out);
      break;
    case FKind::Imp:
      if (rhs(f) == f_bot()) {
        out += "~";
        render_rec(lhs(f), 4, out);
      } else {
        render_rec(lhs(f), 2, out);
        out += " -> ";
        render_rec(rhs(f), 1, out);  // right-assoc
      }
      break;
  }
  if (paren) out += ")";
}

}  // namespace

Formula parse(const std::string& text) {
  Parser p(text);
  Formula f = p.parse_impl();
  if (p.lx.tok != Lexer::TEnd)
    throw ParseError("trailing input", p.lx.tok_pos);
  return f;
}

std::string render(Formula f) {
  std::string out;
  render_rec(f, 0, out);
  return out;
}

}  // namespace uipc
