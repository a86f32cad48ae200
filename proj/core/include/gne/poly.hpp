#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace gne::poly {

// Relative tolerance below which coefficients produced by arithmetic are dropped.
inline constexpr double kDropTol = 1e-14;

struct PolyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DenominatorZero : PolyError {
  using PolyError::PolyError;
};
struct SignUnknown : PolyError {
  using PolyError::PolyError;
};

// Partition of the joint strategy vector x = (x_1, ..., x_N) into player blocks.
// Flat indices are 0-based internally; the text syntax x{i}_{j} is 1-based.
class VarLayout {
 public:
  VarLayout() = default;
  explicit VarLayout(std::vector<int> player_dims);

  int players() const { return static_cast<int>(dims_.size()); }
  int dim(int player) const { return dims_.at(player); }
  int total() const { return total_; }
  int offset(int player) const { return offsets_.at(player); }
  // flat index of coordinate j of player i (both 0-based)
  int flat(int player, int j) const;
  // inverse of flat()
  std::pair<int, int> split(int flat_index) const;
  bool in_block(int flat_index, int player) const;
  std::string var_name(int flat_index) const;

  bool operator==(const VarLayout&) const = default;

 private:
  std::vector<int> dims_;
  std::vector<int> offsets_;
  int total_ = 0;
};

// Exponent multi-index over n variables.
using Mono = std::vector<std::uint16_t>;

int mono_degree(const Mono& m);
Mono mono_mul(const Mono& a, const Mono& b);
// Graded ordering, alphabetical within a degree: 1, x1, x2, ..., x1^2, x1 x2, ...
bool grlex_alpha_less(const Mono& a, const Mono& b);

struct MonoHash {
  std::size_t operator()(const Mono& m) const;
};

// All monomials in n variables of degree <= d, in graded alphabetical order,
// with O(1) index lookup. Tables are cached globally.
class MonomialTable {
 public:
  static const MonomialTable& get(int nvars, int max_degree);

  int size() const { return static_cast<int>(monos_.size()); }
  const Mono& mono(int idx) const { return monos_[idx]; }
  int index(const Mono& m) const;           // throws if absent
  int find(const Mono& m) const;            // -1 if absent
  int nvars() const { return nvars_; }
  int max_degree() const { return max_degree_; }
  // index of the first monomial of each degree; degree_start(d+1) bounds degree d
  int degree_start(int d) const { return starts_.at(d); }

 private:
  MonomialTable(int nvars, int max_degree);
  int nvars_, max_degree_;
  std::vector<Mono> monos_;
  std::vector<int> starts_;
  std::unordered_map<Mono, int, MonoHash> index_;
};

std::int64_t binomial(int n, int k);

class Polynomial {
 public:
  Polynomial() = default;
  explicit Polynomial(int nvars) : nvars_(nvars) {}
  static Polynomial constant(int nvars, double c);
  static Polynomial variable(int nvars, int idx, double coeff = 1.0);
  static Polynomial monomial(Mono m, double coeff);

  int nvars() const { return nvars_; }
  bool is_zero() const { return terms_.empty(); }
  std::optional<double> as_constant() const;
  int num_terms() const { return static_cast<int>(terms_.size()); }
  int degree() const;  // -1 for the zero polynomial
  // max total degree over the given variable subset
  int degree_in(std::span<const int> vars) const;
  bool depends_on(int var) const;

  double coeff(const Mono& m) const;
  void add_term(const Mono& m, double c);
  const std::unordered_map<Mono, double, MonoHash>& terms() const { return terms_; }
  // terms in graded alphabetical order; use whenever iteration order matters
  std::vector<std::pair<Mono, double>> sorted_terms() const;

  Polynomial& operator+=(const Polynomial& o);
  Polynomial& operator-=(const Polynomial& o);
  Polynomial& operator*=(double s);
  friend Polynomial operator+(Polynomial a, const Polynomial& b) { a += b; return a; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { a -= b; return a; }
  friend Polynomial operator*(Polynomial a, double s) { a *= s; return a; }
  friend Polynomial operator*(double s, Polynomial a) { a *= s; return a; }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
  Polynomial operator-() const;
  Polynomial pow(int k) const;

  Polynomial derivative(int var) const;
  double eval(std::span<const double> point) const;
  // substitute numeric values for the variables where fixed[v] has a value;
  // the result still lives in the same variable space
  Polynomial subst_partial(const std::vector<std::optional<double>>& fixed) const;
  // reindex into the |keep| variables listed; throws if any other variable occurs
  Polynomial restrict_to(std::span<const int> keep) const;
  // embed into a larger space: variable v maps to position pos[v]
  Polynomial lift(int new_nvars, std::span<const int> pos) const;
  // substitute every variable by a polynomial (all images over the same space)
  Polynomial compose(const std::vector<Polynomial>& images) const;

  double max_abs_coeff() const;
  void prune(double rel_tol = kDropTol);
  Polynomial pruned(double rel_tol = kDropTol) const;
  // leading (monomial, coeff) in graded alphabetical order; throws on zero
  std::pair<Mono, double> leading_term() const;
  // exact polynomial division; returns false if not exactly divisible
  bool try_divide_exact(const Polynomial& divisor, Polynomial* quotient) const;

  // coefficient-wise comparison after pruning, |a-b| <= tol * scale
  bool approx_equal(const Polynomial& o, double tol = 1e-12) const;
  // p == c * o for some c > 0 (returns c), else nullopt
  std::optional<double> positive_multiple_of(const Polynomial& o) const;

  std::string str(const VarLayout* layout = nullptr) const;

 private:
  int nvars_ = 0;
  std::unordered_map<Mono, double, MonoHash> terms_;
};

class RationalFunction {
 public:
  RationalFunction() = default;
  explicit RationalFunction(Polynomial num);
  RationalFunction(Polynomial num, Polynomial den, bool den_positive = false);
  static RationalFunction constant(int nvars, double c);

  const Polynomial& num() const { return num_; }
  const Polynomial& den() const { return den_; }
  bool den_positive() const { return den_positive_; }
  void set_den_positive(bool b) { den_positive_ = b; }
  int nvars() const { return num_.nvars(); }
  bool is_zero() const { return num_.is_zero(); }
  bool is_polynomial() const;  // den is a positive constant 1 after folding

  RationalFunction operator+(const RationalFunction& o) const;
  RationalFunction operator-(const RationalFunction& o) const;
  RationalFunction operator*(const RationalFunction& o) const;
  RationalFunction operator/(const RationalFunction& o) const;
  RationalFunction operator-() const;
  RationalFunction pow(int k) const;

  RationalFunction derivative(int var) const;
  double eval(std::span<const double> point, double den_tol = 1e-12) const;
  RationalFunction subst_partial(const std::vector<std::optional<double>>& fixed) const;
  RationalFunction restrict_to(std::span<const int> keep) const;
  RationalFunction lift(int new_nvars, std::span<const int> pos) const;

  std::string str(const VarLayout* layout = nullptr) const;

 private:
  void fold_constant_den();
  Polynomial num_{0};
  Polynomial den_{0};
  bool den_positive_ = false;
};

// --- spec-level operations ---------------------------------------------------

double eval(const Polynomial& f, std::span<const double> point);
double eval(const RationalFunction& f, std::span<const double> point);

// entry j is the partial derivative with respect to x_{i,j}
std::vector<RationalFunction> gradient_block(const RationalFunction& f,
                                             const VarLayout& layout, int player);

// replace the block x_i by p (length n_i); components of p may be rational.
// Implemented with a single common denominator so that powers cancel exactly.
RationalFunction substitute_player(const RationalFunction& f, const VarLayout& layout,
                                   int player, const std::vector<RationalFunction>& p);
Polynomial substitute_player_common_den(const Polynomial& f, const VarLayout& layout,
                                        int player, const std::vector<Polynomial>& num,
                                        const Polynomial& den, int den_power);

enum class Relation { Eq, Ge, Gt };

struct ClearedConstraint {
  Polynomial poly;
  Relation rel;
  bool squared = false;  // an undeclared denominator was multiplied through
};

// Clear the denominator of a rational constraint. For equalities the sign is
// irrelevant. For inequalities, factors of the denominator that match members
// of declared_positive (up to a positive constant) are cancelled; whatever
// remains is multiplied into the numerator (equivalent to scaling by the
// square of the leftover factor) and the result is flagged as squared.
ClearedConstraint clear_denominators(const RationalFunction& c, Relation rel,
                                     const std::vector<Polynomial>& declared_positive);

// Divide out declared-positive factors (and constants) from p.
// Returns the leftover factor and the sign of the removed constant part.
struct FactorSplit {
  Polynomial leftover;   // product of non-declared factors
  double constant = 1.0; // removed numeric constant (sign matters)
  bool fully_declared = false;
};
FactorSplit split_declared_factors(const Polynomial& p,
                                   const std::vector<Polynomial>& declared_positive);

std::string format_double(double v);

}  // namespace gne::poly
