#include "gne/poly.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>

namespace gne::poly {

// ---------------------------------------------------------------- VarLayout

VarLayout::VarLayout(std::vector<int> player_dims) : dims_(std::move(player_dims)) {
  offsets_.resize(dims_.size());
  total_ = 0;
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (dims_[i] <= 0) throw PolyError("player dimension must be positive");
    offsets_[i] = total_;
    total_ += dims_[i];
  }
}

int VarLayout::flat(int player, int j) const {
  if (player < 0 || player >= players() || j < 0 || j >= dims_[player])
    throw PolyError("variable index out of range");
  return offsets_[player] + j;
}

std::pair<int, int> VarLayout::split(int flat_index) const {
  if (flat_index < 0 || flat_index >= total_) throw PolyError("flat index out of range");
  int p = 0;
  while (p + 1 < players() && offsets_[p + 1] <= flat_index) ++p;
  return {p, flat_index - offsets_[p]};
}

bool VarLayout::in_block(int flat_index, int player) const {
  return flat_index >= offsets_[player] && flat_index < offsets_[player] + dims_[player];
}

std::string VarLayout::var_name(int flat_index) const {
  auto [p, j] = split(flat_index);
  return "x" + std::to_string(p + 1) + "_" + std::to_string(j + 1);
}

// ---------------------------------------------------------------- monomials

int mono_degree(const Mono& m) {
  int d = 0;
  for (auto e : m) d += e;
  return d;
}

Mono mono_mul(const Mono& a, const Mono& b) {
  Mono r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = static_cast<std::uint16_t>(a[i] + b[i]);
  return r;
}

bool grlex_alpha_less(const Mono& a, const Mono& b) {
  int da = mono_degree(a), db = mono_degree(b);
  if (da != db) return da < db;
  // within a degree: alphabetical means larger leading exponents come first
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return a[i] > b[i];
  return false;
}

std::size_t MonoHash::operator()(const Mono& m) const {
  std::size_t h = 1469598103934665603ull;
  for (auto e : m) {
    h ^= static_cast<std::size_t>(e) + 0x9e3779b97f4a7c15ull;
    h *= 1099511628211ull;
  }
  return h;
}

std::int64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::int64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

namespace {
void enumerate_degree(int nvars, int deg, Mono& cur, int pos, std::vector<Mono>& out) {
  if (pos == nvars - 1) {
    cur[pos] = static_cast<std::uint16_t>(deg);
    out.push_back(cur);
    cur[pos] = 0;
    return;
  }
  for (int e = deg; e >= 0; --e) {
    cur[pos] = static_cast<std::uint16_t>(e);
    enumerate_degree(nvars, deg - e, cur, pos + 1, out);
  }
  cur[pos] = 0;
}
}  // namespace

MonomialTable::MonomialTable(int nvars, int max_degree)
    : nvars_(nvars), max_degree_(max_degree) {
  monos_.reserve(static_cast<std::size_t>(binomial(nvars + max_degree, max_degree)));
  Mono cur(nvars, 0);
  for (int d = 0; d <= max_degree; ++d) {
    starts_.push_back(static_cast<int>(monos_.size()));
    if (nvars == 0) {
      if (d == 0) monos_.push_back(Mono{});
      continue;
    }
    enumerate_degree(nvars, d, cur, 0, monos_);
  }
  starts_.push_back(static_cast<int>(monos_.size()));
  index_.reserve(monos_.size() * 2);
  for (int i = 0; i < static_cast<int>(monos_.size()); ++i) index_[monos_[i]] = i;
}

const MonomialTable& MonomialTable::get(int nvars, int max_degree) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::unique_ptr<MonomialTable>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_pair(nvars, max_degree);
  auto it = cache.find(key);
  if (it == cache.end())
    it = cache.emplace(key, std::unique_ptr<MonomialTable>(new MonomialTable(nvars, max_degree))).first;
  return *it->second;
}

int MonomialTable::index(const Mono& m) const {
  auto it = index_.find(m);
  if (it == index_.end()) throw PolyError("monomial outside table");
  return it->second;
}

int MonomialTable::find(const Mono& m) const {
  auto it = index_.find(m);
  return it == index_.end() ? -1 : it->second;
}

// --------------------------------------------------------------- Polynomial

Polynomial Polynomial::constant(int nvars, double c) {
  Polynomial p(nvars);
  if (c != 0.0) p.terms_[Mono(nvars, 0)] = c;
  return p;
}

Polynomial Polynomial::variable(int nvars, int idx, double coeff) {
  Polynomial p(nvars);
  Mono m(nvars, 0);
  m.at(idx) = 1;
  if (coeff != 0.0) p.terms_[m] = coeff;
  return p;
}

Polynomial Polynomial::monomial(Mono m, double coeff) {
  Polynomial p(static_cast<int>(m.size()));
  if (coeff != 0.0) p.terms_[std::move(m)] = coeff;
  return p;
}

std::optional<double> Polynomial::as_constant() const {
  if (terms_.empty()) return 0.0;
  if (terms_.size() != 1) return std::nullopt;
  const auto& [m, c] = *terms_.begin();
  if (mono_degree(m) != 0) return std::nullopt;
  return c;
}

int Polynomial::degree() const {
  int d = -1;
  for (const auto& [m, c] : terms_) d = std::max(d, mono_degree(m));
  return d;
}

int Polynomial::degree_in(std::span<const int> vars) const {
  int d = 0;
  for (const auto& [m, c] : terms_) {
    int s = 0;
    for (int v : vars) s += m[v];
    d = std::max(d, s);
  }
  return d;
}

bool Polynomial::depends_on(int var) const {
  for (const auto& [m, c] : terms_)
    if (m[var] != 0) return true;
  return false;
}

double Polynomial::coeff(const Mono& m) const {
  auto it = terms_.find(m);
  return it == terms_.end() ? 0.0 : it->second;
}

void Polynomial::add_term(const Mono& m, double c) {
  if (static_cast<int>(m.size()) != nvars_) throw PolyError("monomial arity mismatch");
  auto it = terms_.find(m);
  if (it == terms_.end()) {
    if (c != 0.0) terms_.emplace(m, c);
  } else {
    it->second += c;
    if (it->second == 0.0) terms_.erase(it);
  }
}

std::vector<std::pair<Mono, double>> Polynomial::sorted_terms() const {
  std::vector<std::pair<Mono, double>> v(terms_.begin(), terms_.end());
  std::sort(v.begin(), v.end(),
            [](const auto& a, const auto& b) { return grlex_alpha_less(a.first, b.first); });
  return v;
}

Polynomial& Polynomial::operator+=(const Polynomial& o) {
  if (o.nvars_ != nvars_) throw PolyError("arity mismatch in +");
  for (const auto& [m, c] : o.terms_) add_term(m, c);
  prune();
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& o) {
  if (o.nvars_ != nvars_) throw PolyError("arity mismatch in -");
  for (const auto& [m, c] : o.terms_) add_term(m, -c);
  prune();
  return *this;
}

Polynomial& Polynomial::operator*=(double s) {
  if (s == 0.0) {
    terms_.clear();
    return *this;
  }
  for (auto& [m, c] : terms_) c *= s;
  return *this;
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  if (a.nvars_ != b.nvars_) throw PolyError("arity mismatch in *");
  Polynomial r(a.nvars_);
  r.terms_.reserve(a.terms_.size() * b.terms_.size());
  for (const auto& [ma, ca] : a.terms_)
    for (const auto& [mb, cb] : b.terms_) r.add_term(mono_mul(ma, mb), ca * cb);
  r.prune();
  return r;
}

Polynomial Polynomial::operator-() const {
  Polynomial r = *this;
  for (auto& [m, c] : r.terms_) c = -c;
  return r;
}

Polynomial Polynomial::pow(int k) const {
  if (k < 0) throw PolyError("negative power");
  Polynomial r = Polynomial::constant(nvars_, 1.0);
  Polynomial base = *this;
  while (k > 0) {
    if (k & 1) r = r * base;
    base = (k >>= 1) ? base * base : base;
  }
  return r;
}

Polynomial Polynomial::derivative(int var) const {
  Polynomial r(nvars_);
  for (const auto& [m, c] : terms_) {
    if (m[var] == 0) continue;
    Mono d = m;
    d[var] -= 1;
    r.add_term(d, c * m[var]);
  }
  return r;
}

double Polynomial::eval(std::span<const double> point) const {
  if (static_cast<int>(point.size()) != nvars_) throw PolyError("point arity mismatch");
  double s = 0.0;
  for (const auto& [m, c] : terms_) {
    double t = c;
    for (int v = 0; v < nvars_; ++v) {
      for (int e = 0; e < m[v]; ++e) t *= point[v];
    }
    s += t;
  }
  return s;
}

Polynomial Polynomial::subst_partial(const std::vector<std::optional<double>>& fixed) const {
  Polynomial r(nvars_);
  for (const auto& [m, c] : terms_) {
    double coef = c;
    Mono keep = m;
    for (int v = 0; v < nvars_; ++v) {
      if (fixed[v].has_value() && m[v] > 0) {
        coef *= std::pow(*fixed[v], m[v]);
        keep[v] = 0;
      }
    }
    r.add_term(keep, coef);
  }
  r.prune();
  return r;
}

Polynomial Polynomial::restrict_to(std::span<const int> keep) const {
  std::vector<int> map(nvars_, -1);
  for (std::size_t i = 0; i < keep.size(); ++i) map[keep[i]] = static_cast<int>(i);
  Polynomial r(static_cast<int>(keep.size()));
  for (const auto& [m, c] : terms_) {
    Mono nm(keep.size(), 0);
    for (int v = 0; v < nvars_; ++v) {
      if (m[v] == 0) continue;
      if (map[v] < 0) throw PolyError("restrict_to: polynomial depends on dropped variable");
      nm[map[v]] = m[v];
    }
    r.add_term(nm, c);
  }
  return r;
}

Polynomial Polynomial::lift(int new_nvars, std::span<const int> pos) const {
  Polynomial r(new_nvars);
  for (const auto& [m, c] : terms_) {
    Mono nm(new_nvars, 0);
    for (int v = 0; v < nvars_; ++v) nm[pos[v]] = m[v];
    r.add_term(nm, c);
  }
  return r;
}

Polynomial Polynomial::compose(const std::vector<Polynomial>& images) const {
  if (static_cast<int>(images.size()) != nvars_) throw PolyError("compose arity mismatch");
  int out_n = images.empty() ? 0 : images[0].nvars();
  Polynomial r(out_n);
  for (const auto& [m, c] : terms_) {
    Polynomial t = Polynomial::constant(out_n, c);
    for (int v = 0; v < nvars_; ++v)
      if (m[v] > 0) t = t * images[v].pow(m[v]);
    r += t;
  }
  r.prune();
  return r;
}

double Polynomial::max_abs_coeff() const {
  double m = 0.0;
  for (const auto& [mono, c] : terms_) m = std::max(m, std::abs(c));
  return m;
}

void Polynomial::prune(double rel_tol) {
  double m = max_abs_coeff();
  if (m == 0.0) {
    terms_.clear();
    return;
  }
  double cut = rel_tol * m;
  for (auto it = terms_.begin(); it != terms_.end();) {
    if (std::abs(it->second) <= cut)
      it = terms_.erase(it);
    else
      ++it;
  }
}

Polynomial Polynomial::pruned(double rel_tol) const {
  Polynomial p = *this;
  p.prune(rel_tol);
  return p;
}

std::pair<Mono, double> Polynomial::leading_term() const {
  if (terms_.empty()) throw PolyError("leading term of zero polynomial");
  const Mono* best = nullptr;
  double c = 0.0;
  for (const auto& [m, coef] : terms_) {
    if (!best || grlex_alpha_less(*best, m)) {
      best = &m;
      c = coef;
    }
  }
  return {*best, c};
}

bool Polynomial::try_divide_exact(const Polynomial& divisor, Polynomial* quotient) const {
  if (divisor.is_zero()) return false;
  auto [dm, dc] = divisor.leading_term();
  Polynomial rem = *this;
  Polynomial q(nvars_);
  double scale = std::max(max_abs_coeff(), divisor.max_abs_coeff());
  int guard = 4 * (num_terms() + 4) * (divisor.num_terms() + 4);
  while (!rem.is_zero() && guard-- > 0) {
    rem.prune(1e-12);
    if (rem.is_zero()) break;
    auto [rm, rc] = rem.leading_term();
    Mono t(rm.size());
    for (std::size_t v = 0; v < rm.size(); ++v) {
      if (rm[v] < dm[v]) return false;
      t[v] = static_cast<std::uint16_t>(rm[v] - dm[v]);
    }
    double tc = rc / dc;
    Polynomial term = Polynomial::monomial(t, tc);
    q += term;
    rem -= term * divisor;
    if (rem.max_abs_coeff() <= 1e-11 * std::max(1.0, scale)) {
      rem = Polynomial(nvars_);
      break;
    }
  }
  if (!rem.is_zero()) return false;
  if (quotient) *quotient = q;
  return true;
}

bool Polynomial::approx_equal(const Polynomial& o, double tol) const {
  Polynomial d = *this - o;
  double scale = std::max({1.0, max_abs_coeff(), o.max_abs_coeff()});
  return d.max_abs_coeff() <= tol * scale;
}

std::optional<double> Polynomial::positive_multiple_of(const Polynomial& o) const {
  if (is_zero() || o.is_zero()) return std::nullopt;
  auto [lm, lc] = leading_term();
  double oc = o.coeff(lm);
  if (oc == 0.0) return std::nullopt;
  double c = lc / oc;
  if (c <= 0.0) return std::nullopt;
  Polynomial diff = *this - Polynomial(o) * c;
  double scale = std::max(max_abs_coeff(), c * o.max_abs_coeff());
  if (diff.max_abs_coeff() <= 1e-10 * std::max(1.0, scale)) return c;
  return std::nullopt;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string Polynomial::str(const VarLayout* layout) const {
  if (terms_.empty()) return "0";
  auto terms = sorted_terms();
  std::ostringstream os;
  bool first = true;
  for (const auto& [m, c] : terms) {
    double cc = c;
    if (first) {
      if (cc < 0) {
        os << "-";
        cc = -cc;
      }
    } else {
      os << (cc < 0 ? " - " : " + ");
      cc = std::abs(cc);
    }
    bool unit = std::abs(cc - 1.0) < 1e-15 && mono_degree(m) > 0;
    if (!unit) os << format_double(cc);
    bool firstvar = !unit;
    for (int v = 0; v < nvars_; ++v) {
      if (m[v] == 0) continue;
      if (firstvar) os << "*";
      firstvar = true;
      if (layout)
        os << layout->var_name(v);
      else
        os << "z" << (v + 1);
      if (m[v] > 1) os << "^" << m[v];
    }
    first = false;
  }
  return os.str();
}

// --------------------------------------------------------- RationalFunction

RationalFunction::RationalFunction(Polynomial num)
    : num_(std::move(num)), den_(Polynomial::constant(num_.nvars(), 1.0)), den_positive_(true) {}

RationalFunction::RationalFunction(Polynomial num, Polynomial den, bool den_positive)
    : num_(std::move(num)), den_(std::move(den)), den_positive_(den_positive) {
  if (den_.is_zero()) throw PolyError("rational function with zero denominator");
  if (num_.nvars() != den_.nvars()) throw PolyError("num/den arity mismatch");
  fold_constant_den();
}

RationalFunction RationalFunction::constant(int nvars, double c) {
  return RationalFunction(Polynomial::constant(nvars, c));
}

bool RationalFunction::is_polynomial() const {
  auto c = den_.as_constant();
  return c.has_value();
}

void RationalFunction::fold_constant_den() {
  if (auto c = den_.as_constant()) {
    num_ *= 1.0 / *c;
    den_ = Polynomial::constant(num_.nvars(), 1.0);
    den_positive_ = true;
  }
}

namespace {
bool same_poly(const Polynomial& a, const Polynomial& b) { return a.approx_equal(b, 1e-14); }
}  // namespace

RationalFunction RationalFunction::operator+(const RationalFunction& o) const {
  if (same_poly(den_, o.den_))
    return RationalFunction(num_ + o.num_, den_, den_positive_);
  return RationalFunction(num_ * o.den_ + o.num_ * den_, den_ * o.den_,
                          den_positive_ && o.den_positive_);
}

RationalFunction RationalFunction::operator-(const RationalFunction& o) const {
  if (same_poly(den_, o.den_))
    return RationalFunction(num_ - o.num_, den_, den_positive_);
  return RationalFunction(num_ * o.den_ - o.num_ * den_, den_ * o.den_,
                          den_positive_ && o.den_positive_);
}

RationalFunction RationalFunction::operator*(const RationalFunction& o) const {
  return RationalFunction(num_ * o.num_, den_ * o.den_, den_positive_ && o.den_positive_);
}

RationalFunction RationalFunction::operator/(const RationalFunction& o) const {
  if (o.num_.is_zero()) throw PolyError("division by zero rational function");
  return RationalFunction(num_ * o.den_, den_ * o.num_, false);
}

RationalFunction RationalFunction::operator-() const {
  return RationalFunction(-num_, den_, den_positive_);
}

RationalFunction RationalFunction::pow(int k) const {
  RationalFunction r = RationalFunction::constant(nvars(), 1.0);
  for (int i = 0; i < k; ++i) r = r * (*this);
  return r;
}

RationalFunction RationalFunction::derivative(int var) const {
  if (is_polynomial()) return RationalFunction(num_.derivative(var));
  Polynomial n = num_.derivative(var) * den_ - num_ * den_.derivative(var);
  n.prune();
  return RationalFunction(n, den_ * den_, den_positive_);
}

double RationalFunction::eval(std::span<const double> point, double den_tol) const {
  double d = den_.eval(point);
  if (std::abs(d) < den_tol) throw DenominatorZero("denominator vanishes at evaluation point");
  return num_.eval(point) / d;
}

RationalFunction RationalFunction::subst_partial(
    const std::vector<std::optional<double>>& fixed) const {
  return RationalFunction(num_.subst_partial(fixed), den_.subst_partial(fixed), den_positive_);
}

RationalFunction RationalFunction::restrict_to(std::span<const int> keep) const {
  return RationalFunction(num_.restrict_to(keep), den_.restrict_to(keep), den_positive_);
}

RationalFunction RationalFunction::lift(int new_nvars, std::span<const int> pos) const {
  return RationalFunction(num_.lift(new_nvars, pos), den_.lift(new_nvars, pos), den_positive_);
}

std::string RationalFunction::str(const VarLayout* layout) const {
  if (is_polynomial()) return num_.str(layout);
  return "(" + num_.str(layout) + ") / (" + den_.str(layout) + ")";
}

// ---------------------------------------------------------------- operations

double eval(const Polynomial& f, std::span<const double> point) { return f.eval(point); }
double eval(const RationalFunction& f, std::span<const double> point) { return f.eval(point); }

std::vector<RationalFunction> gradient_block(const RationalFunction& f,
                                             const VarLayout& layout, int player) {
  std::vector<RationalFunction> g;
  g.reserve(layout.dim(player));
  for (int j = 0; j < layout.dim(player); ++j)
    g.push_back(f.derivative(layout.flat(player, j)));
  return g;
}

Polynomial substitute_player_common_den(const Polynomial& f, const VarLayout& layout,
                                        int player, const std::vector<Polynomial>& num,
                                        const Polynomial& den, int den_power) {
  const int n = f.nvars();
  const int off = layout.offset(player);
  const int ni = layout.dim(player);
  // precompute powers of den
  std::vector<Polynomial> den_pow(den_power + 1, Polynomial::constant(n, 1.0));
  for (int k = 1; k <= den_power; ++k) den_pow[k] = den_pow[k - 1] * den;

  Polynomial out(n);
  for (const auto& [m, c] : f.terms()) {
    int block_deg = 0;
    for (int j = 0; j < ni; ++j) block_deg += m[off + j];
    if (block_deg > den_power) throw PolyError("den_power too small in substitution");
    Mono rest = m;
    for (int j = 0; j < ni; ++j) rest[off + j] = 0;
    Polynomial t = Polynomial::monomial(rest, c) * den_pow[den_power - block_deg];
    for (int j = 0; j < ni; ++j)
      if (m[off + j] > 0) t = t * num[j].pow(m[off + j]);
    out += t;
  }
  out.prune();
  return out;
}

RationalFunction substitute_player(const RationalFunction& f, const VarLayout& layout,
                                   int player, const std::vector<RationalFunction>& p) {
  if (static_cast<int>(p.size()) != layout.dim(player))
    throw PolyError("substitute_player: wrong image length");
  const int n = f.nvars();
  // common denominator for the image components
  Polynomial b = Polynomial::constant(n, 1.0);
  bool b_positive = true;
  bool all_same = true;
  for (std::size_t s = 1; s < p.size(); ++s)
    if (!p[s].den().approx_equal(p[0].den(), 1e-14)) all_same = false;
  std::vector<Polynomial> a(p.size(), Polynomial(n));
  if (p.empty()) {
    return f;
  }
  if (all_same) {
    b = p[0].den();
    for (std::size_t s = 0; s < p.size(); ++s) a[s] = p[s].num();
    b_positive = p[0].den_positive();
  } else {
    for (const auto& c : p) {
      b = b * c.den();
      b_positive = b_positive && c.den_positive();
    }
    for (std::size_t s = 0; s < p.size(); ++s) {
      Polynomial prod = p[s].num();
      for (std::size_t t = 0; t < p.size(); ++t)
        if (t != s) prod = prod * p[t].den();
      a[s] = prod;
    }
  }
  std::vector<int> block(layout.dim(player));
  for (int j = 0; j < layout.dim(player); ++j) block[j] = layout.flat(player, j);
  int d = std::max(f.num().degree_in(block), f.den().degree_in(block));
  Polynomial new_num = substitute_player_common_den(f.num(), layout, player, a, b, d);
  Polynomial new_den = substitute_player_common_den(f.den(), layout, player, a, b, d);
  if (new_den.is_zero()) throw DenominatorZero("substitution produced zero denominator");
  return RationalFunction(new_num, new_den, false);
}

FactorSplit split_declared_factors(const Polynomial& p,
                                   const std::vector<Polynomial>& declared_positive) {
  FactorSplit out;
  out.leftover = p;
  bool progress = true;
  while (progress) {
    progress = false;
    if (auto c = out.leftover.as_constant()) {
      out.constant *= *c;
      out.leftover = Polynomial::constant(p.nvars(), 1.0);
      out.fully_declared = true;
      return out;
    }
    for (const auto& d : declared_positive) {
      if (d.degree() <= 0) continue;
      Polynomial q;
      if (out.leftover.try_divide_exact(d, &q)) {
        out.leftover = q;
        progress = true;
        break;
      }
    }
  }
  return out;
}

ClearedConstraint clear_denominators(const RationalFunction& c, Relation rel,
                                     const std::vector<Polynomial>& declared_positive) {
  ClearedConstraint out;
  out.rel = rel;
  if (c.is_polynomial()) {
    out.poly = c.num();
    return out;
  }
  if (rel == Relation::Eq) {
    out.poly = c.num();
    return out;
  }
  FactorSplit split = split_declared_factors(c.den(), declared_positive);
  if (c.den_positive()) {
    // declared positive as a whole
    out.poly = c.num();
    return out;
  }
  if (split.fully_declared) {
    if (split.constant == 0.0) throw PolyError("zero denominator constant");
    out.poly = split.constant > 0 ? c.num() : -c.num();
    return out;
  }
  // leftover factor of unknown sign: multiply through by it (i.e. scale the
  // constraint by the square of the leftover), flagged for the trace
  Polynomial res = c.num() * split.leftover;
  if (split.constant < 0) res = -res;
  res.prune();
  out.poly = res;
  out.squared = true;
  return out;
}

}  // namespace gne::poly
