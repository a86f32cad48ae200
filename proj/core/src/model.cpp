#include "gne/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

namespace gne::model {

using poly::Mono;
using poly::Polynomial;
using poly::RationalFunction;

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

bool starts_with(const std::string& s, const std::string& p) {
  return s.compare(0, p.size(), p) == 0;
}

// splits a parameter body on top-level separators (depth-aware)
std::vector<std::string> split_top(const std::string& s, char sep) {
  std::vector<std::string> out;
  int depth = 0;
  std::string cur;
  for (char c : s) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == sep && depth == 0) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

// index [i] after a keyword, 1-based in the file
int parse_player_index(const std::string& line, std::size_t& pos, int nplayers, int lineno) {
  if (pos >= line.size() || line[pos] != '[')
    throw SyntaxError("expected '[player]'", lineno, static_cast<int>(pos) + 1);
  std::size_t close = line.find(']', pos);
  if (close == std::string::npos)
    throw SyntaxError("expected ']'", lineno, static_cast<int>(pos) + 1);
  int idx = std::atoi(line.substr(pos + 1, close - pos - 1).c_str());
  if (idx < 1 || idx > nplayers)
    throw SyntaxError("player index out of range", lineno, static_cast<int>(pos) + 1);
  pos = close + 1;
  return idx - 1;
}

RationalFunction parse_expr_at(const std::string& text, const VarLayout& lay, int lineno,
                               int col0) {
  try {
    return poly::parse_expression(text, lay, lineno, col0);
  } catch (const poly::ParseError& e) {
    std::string msg = e.what();
    if (msg.find("unknown variable") != std::string::npos)
      throw UnknownVariable(msg, e.line, e.col);
    throw SyntaxError(msg, e.line, e.col);
  }
}

}  // namespace

Gnep parse_problem(const std::string& text) {
  Gnep g;
  std::istringstream is(text);
  std::string raw;
  int lineno = 0;
  int nplayers = -1;
  bool have_dims = false;
  std::vector<std::string> pending;          // lines seen before dims
  std::vector<int> pending_lineno;

  struct RawItem {
    enum class Kind { Objective, Constraint, Positive, Lme, Extension, Config } kind;
    int player = -1;
    std::string body;
    int lineno = 0;
    int col0 = 1;
  };
  std::vector<RawItem> items;

  auto classify = [&](const std::string& line, int ln) {
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') return;
    if (starts_with(s, "players")) {
      if (nplayers >= 0) throw SyntaxError("duplicate 'players' line", ln, 1);
      nplayers = std::atoi(trim(s.substr(7)).c_str());
      if (nplayers <= 0) throw SyntaxError("players must be positive", ln, 1);
      return;
    }
    if (starts_with(s, "dims")) {
      if (nplayers < 0) throw SyntaxError("'dims' before 'players'", ln, 1);
      if (have_dims) throw SyntaxError("duplicate 'dims' line", ln, 1);
      std::istringstream ds(s.substr(4));
      std::vector<int> dims;
      int d;
      while (ds >> d) dims.push_back(d);
      if (static_cast<int>(dims.size()) != nplayers)
        throw SyntaxError("dims count does not match players", ln, 1);
      for (int dd : dims)
        if (dd <= 0) throw SyntaxError("dims must be positive", ln, 1);
      g.layout = VarLayout(dims);
      have_dims = true;
      return;
    }
    RawItem it;
    it.lineno = ln;
    if (starts_with(s, "objective")) {
      std::size_t pos = 9;
      it.kind = RawItem::Kind::Objective;
      it.player = parse_player_index(s, pos, nplayers < 0 ? 0 : nplayers, ln);
      std::size_t eq = s.find('=', pos);
      if (eq == std::string::npos) throw SyntaxError("expected '=' in objective", ln, 1);
      it.body = trim(s.substr(eq + 1));
      it.col0 = static_cast<int>(eq) + 2;
    } else if (starts_with(s, "constraint")) {
      std::size_t pos = 10;
      it.kind = RawItem::Kind::Constraint;
      it.player = parse_player_index(s, pos, nplayers < 0 ? 0 : nplayers, ln);
      std::size_t colon = s.find(':', pos);
      if (colon == std::string::npos) throw SyntaxError("expected ':' in constraint", ln, 1);
      it.body = trim(s.substr(colon + 1));
      it.col0 = static_cast<int>(colon) + 2;
    } else if (starts_with(s, "positive")) {
      std::size_t colon = s.find(':');
      if (colon == std::string::npos) throw SyntaxError("expected ':' after positive", ln, 1);
      it.kind = RawItem::Kind::Positive;
      it.body = trim(s.substr(colon + 1));
      it.col0 = static_cast<int>(colon) + 2;
    } else if (starts_with(s, "lme")) {
      std::size_t pos = 3;
      it.kind = RawItem::Kind::Lme;
      it.player = parse_player_index(s, pos, nplayers < 0 ? 0 : nplayers, ln);
      std::size_t eq = s.find('=', pos);
      if (eq == std::string::npos) throw SyntaxError("expected '=' in lme", ln, 1);
      it.body = trim(s.substr(eq + 1));
    } else if (starts_with(s, "extension")) {
      std::size_t pos = 9;
      it.kind = RawItem::Kind::Extension;
      it.player = parse_player_index(s, pos, nplayers < 0 ? 0 : nplayers, ln);
      std::size_t eq = s.find('=', pos);
      if (eq == std::string::npos) throw SyntaxError("expected '=' in extension", ln, 1);
      it.body = trim(s.substr(eq + 1));
    } else if (starts_with(s, "config")) {
      std::size_t colon = s.find(':');
      if (colon == std::string::npos) throw SyntaxError("expected ':' after config", ln, 1);
      it.kind = RawItem::Kind::Config;
      it.body = trim(s.substr(colon + 1));
    } else {
      throw SyntaxError("unrecognized line: " + s, ln, 1);
    }
    items.push_back(std::move(it));
  };

  while (std::getline(is, raw)) {
    ++lineno;
    classify(raw, lineno);
  }
  if (nplayers < 0) throw SyntaxError("missing 'players' line", lineno, 1);
  if (!have_dims) throw SyntaxError("missing 'dims' line", lineno, 1);
  g.players.resize(nplayers);

  // positives first: constraint clearing depends on them
  for (const auto& it : items) {
    if (it.kind != RawItem::Kind::Positive) continue;
    for (const auto& part : split_top(it.body, ',')) {
      if (part.empty()) continue;
      RationalFunction r = parse_expr_at(part, g.layout, it.lineno, it.col0);
      if (!r.is_polynomial())
        throw SyntaxError("positive declarations must be polynomials", it.lineno, it.col0);
      g.declared_positive.push_back(r.num());
    }
  }

  // strict constraints also witness positivity; gathered in a second sweep
  std::vector<Polynomial> strict_guards;

  auto parse_rel = [&](const std::string& body, int ln, int col0, std::string& lhs,
                       ConstraintKind& kind) {
    std::size_t p;
    if ((p = body.find("==")) != std::string::npos) {
      kind = ConstraintKind::Equality;
      lhs = trim(body.substr(0, p));
      if (trim(body.substr(p + 2)) != "0") throw SyntaxError("constraint rhs must be 0", ln, col0);
    } else if ((p = body.find(">=")) != std::string::npos) {
      kind = ConstraintKind::WeakIneq;
      lhs = trim(body.substr(0, p));
      if (trim(body.substr(p + 2)) != "0") throw SyntaxError("constraint rhs must be 0", ln, col0);
    } else if ((p = body.find('>')) != std::string::npos) {
      kind = ConstraintKind::StrictIneq;
      lhs = trim(body.substr(0, p));
      if (trim(body.substr(p + 1)) != "0") throw SyntaxError("constraint rhs must be 0", ln, col0);
    } else {
      throw SyntaxError("constraint must use ==, >= or > against 0", ln, col0);
    }
  };

  for (const auto& it : items) {
    if (it.kind != RawItem::Kind::Constraint) continue;
    std::string lhs;
    ConstraintKind kind;
    parse_rel(it.body, it.lineno, it.col0, lhs, kind);
    if (kind != ConstraintKind::StrictIneq) continue;
    RationalFunction r = parse_expr_at(lhs, g.layout, it.lineno, it.col0);
    if (r.is_polynomial()) strict_guards.push_back(r.num());
  }
  std::vector<Polynomial> positive_basis = g.declared_positive;
  positive_basis.insert(positive_basis.end(), strict_guards.begin(), strict_guards.end());

  for (const auto& it : items) {
    switch (it.kind) {
      case RawItem::Kind::Objective: {
        RationalFunction f = parse_expr_at(it.body, g.layout, it.lineno, it.col0);
        if (!f.is_polynomial()) {
          auto split = poly::split_declared_factors(f.den(), positive_basis);
          if (!split.fully_declared || split.constant <= 0)
            throw DanglingDenominator(
                "objective denominator is not declared positive: " + f.den().str(&g.layout),
                it.lineno, it.col0);
          f.set_den_positive(true);
        }
        g.players[it.player].objective = f;
        break;
      }
      case RawItem::Kind::Constraint: {
        std::string lhs;
        ConstraintKind kind;
        parse_rel(it.body, it.lineno, it.col0, lhs, kind);
        Constraint c;
        c.kind = kind;
        c.text = it.body;
        c.original = parse_expr_at(lhs, g.layout, it.lineno, it.col0);
        poly::Relation rel = kind == ConstraintKind::Equality ? poly::Relation::Eq
                             : kind == ConstraintKind::WeakIneq ? poly::Relation::Ge
                                                                : poly::Relation::Gt;
        auto cleared = poly::clear_denominators(c.original, rel, positive_basis);
        c.cleared = cleared.poly;
        c.squared = cleared.squared;
        g.players[it.player].constraints.push_back(std::move(c));
        break;
      }
      case RawItem::Kind::Lme: {
        LmeSpec spec;
        std::string b = it.body;
        auto paren = b.find('(');
        std::string head = trim(paren == std::string::npos ? b : b.substr(0, paren));
        std::string args;
        if (paren != std::string::npos) {
          auto close = b.rfind(')');
          if (close == std::string::npos || close < paren)
            throw SyntaxError("unbalanced parentheses in lme", it.lineno, 1);
          args = b.substr(paren + 1, close - paren - 1);
        }
        auto parse_groups = [&](int expected_groups) {
          std::vector<std::vector<RationalFunction>> groups;
          for (const auto& grp : split_top(args, ';')) {
            std::vector<RationalFunction> exprs;
            if (!trim(grp).empty())
              for (const auto& e : split_top(grp, ','))
                exprs.push_back(parse_expr_at(e, g.layout, it.lineno, 1));
            groups.push_back(std::move(exprs));
          }
          if (expected_groups > 0 && !args.empty() &&
              static_cast<int>(groups.size()) != expected_groups)
            throw SyntaxError("wrong number of ';' groups in lme template", it.lineno, 1);
          return groups;
        };
        if (head == "auto") {
          spec.kind = LmeSpec::Kind::Auto;
        } else if (head == "box") {
          spec.kind = LmeSpec::Kind::Box;
          if (!args.empty()) spec.params = parse_groups(2);
        } else if (head == "simplex") {
          spec.kind = LmeSpec::Kind::Simplex;
          if (!args.empty()) spec.params = parse_groups(2);
        } else if (head == "ball") {
          spec.kind = LmeSpec::Kind::Ball;
          if (!args.empty()) spec.params = parse_groups(4);
        } else if (head == "explicit") {
          spec.kind = LmeSpec::Kind::Explicit;
          for (const auto& e : split_top(args, ','))
            spec.exprs.push_back(parse_expr_at(e, g.layout, it.lineno, 1));
        } else {
          throw SyntaxError("unknown lme spec '" + head + "'", it.lineno, 1);
        }
        g.players[it.player].lme = std::move(spec);
        break;
      }
      case RawItem::Kind::Extension: {
        ExtensionSpec spec;
        std::string b = it.body;
        auto paren = b.find('(');
        std::string head = trim(paren == std::string::npos ? b : b.substr(0, paren));
        if (head == "auto")
          spec.kind = ExtensionSpec::Kind::Auto;
        else if (head == "box")
          spec.kind = ExtensionSpec::Kind::Box;
        else if (head == "simplex")
          spec.kind = ExtensionSpec::Kind::Simplex;
        else if (head == "ball")
          spec.kind = ExtensionSpec::Kind::Ball;
        else if (head == "explicit") {
          spec.kind = ExtensionSpec::Kind::Explicit;
          auto close = b.rfind(')');
          if (paren == std::string::npos || close == std::string::npos || close < paren)
            throw SyntaxError("explicit extension needs (...)", it.lineno, 1);
          for (const auto& e : split_top(b.substr(paren + 1, close - paren - 1), ','))
            spec.exprs.push_back(e);  // parsed at solve time (anchor placeholders)
        } else {
          throw SyntaxError("unknown extension spec '" + head + "'", it.lineno, 1);
        }
        g.players[it.player].extension = std::move(spec);
        break;
      }
      case RawItem::Kind::Config: {
        auto eq = it.body.find('=');
        if (eq == std::string::npos) throw SyntaxError("config needs key = value", it.lineno, 1);
        std::string key = trim(it.body.substr(0, eq));
        std::string val = trim(it.body.substr(eq + 1));
        auto& c = g.config;
        try {
          if (key == "seed")
            c.seed = std::stoull(val);
          else if (key == "max_loops")
            c.max_loops = std::stoi(val);
          else if (key == "max_order")
            c.max_order = std::stoi(val);
          else if (key == "tol_delta")
            c.tol_delta = std::stod(val);
          else if (key == "tol_kappa")
            c.tol_kappa = std::stod(val);
          else if (key == "tol_rank")
            c.tol_rank = std::stod(val);
          else if (key == "tol_strict")
            c.tol_strict = std::stod(val);
          else if (key == "zeta0")
            c.zeta0 = std::stod(val);
          else if (key == "zeta_min")
            c.zeta_min = std::stod(val);
          else if (key == "lme_max_degree")
            c.lme_max_degree = std::stoi(val);
          else if (key == "sdp_max_iters")
            c.sdp_max_iters = std::stoi(val);
          else
            throw SyntaxError("unknown config key '" + key + "'", it.lineno, 1);
        } catch (const std::invalid_argument&) {
          throw SyntaxError("bad config value for '" + key + "'", it.lineno, 1);
        }
        break;
      }
      case RawItem::Kind::Positive:
        break;  // handled above
    }
  }

  for (int i = 0; i < nplayers; ++i) {
    auto& pl = g.players[i];
    if (pl.objective.num().nvars() == 0)
      throw SyntaxError("missing objective for player " + std::to_string(i + 1), lineno, 1);
    for (int ci = 0; ci < static_cast<int>(pl.constraints.size()); ++ci)
      if (pl.constraints[ci].kind != ConstraintKind::StrictIneq) pl.kkt_index.push_back(ci);
  }
  return g;
}

std::string print_problem(const Gnep& g) {
  std::ostringstream os;
  const auto& lay = g.layout;
  os << "players " << lay.players() << "\n";
  os << "dims";
  for (int i = 0; i < lay.players(); ++i) os << " " << lay.dim(i);
  os << "\n";
  if (!g.declared_positive.empty()) {
    os << "positive:";
    for (std::size_t i = 0; i < g.declared_positive.size(); ++i)
      os << (i ? ", " : " ") << g.declared_positive[i].str(&lay);
    os << "\n";
  }
  for (int i = 0; i < lay.players(); ++i) {
    const auto& pl = g.players[i];
    os << "objective[" << (i + 1) << "] = " << pl.objective.str(&lay) << "\n";
    for (const auto& c : pl.constraints) {
      const char* rel = c.kind == ConstraintKind::Equality ? "=="
                        : c.kind == ConstraintKind::WeakIneq ? ">="
                                                             : ">";
      os << "constraint[" << (i + 1) << "]: " << c.original.str(&lay) << " " << rel << " 0\n";
    }
    auto spec_head = [](LmeSpec::Kind k) {
      switch (k) {
        case LmeSpec::Kind::Auto: return "auto";
        case LmeSpec::Kind::Box: return "box";
        case LmeSpec::Kind::Simplex: return "simplex";
        case LmeSpec::Kind::Ball: return "ball";
        case LmeSpec::Kind::Explicit: return "explicit";
      }
      return "auto";
    };
    if (pl.lme.kind != LmeSpec::Kind::Auto) {
      os << "lme[" << (i + 1) << "] = " << spec_head(pl.lme.kind);
      if (pl.lme.kind == LmeSpec::Kind::Explicit) {
        os << "(";
        for (std::size_t e = 0; e < pl.lme.exprs.size(); ++e)
          os << (e ? ", " : "") << pl.lme.exprs[e].str(&lay);
        os << ")";
      } else if (!pl.lme.params.empty()) {
        os << "(";
        for (std::size_t gp = 0; gp < pl.lme.params.size(); ++gp) {
          if (gp) os << "; ";
          for (std::size_t e = 0; e < pl.lme.params[gp].size(); ++e)
            os << (e ? ", " : "") << pl.lme.params[gp][e].str(&lay);
        }
        os << ")";
      }
      os << "\n";
    }
    if (pl.extension.kind != ExtensionSpec::Kind::Auto) {
      const char* head = pl.extension.kind == ExtensionSpec::Kind::Box       ? "box"
                         : pl.extension.kind == ExtensionSpec::Kind::Simplex ? "simplex"
                         : pl.extension.kind == ExtensionSpec::Kind::Ball    ? "ball"
                                                                             : "explicit";
      os << "extension[" << (i + 1) << "] = " << head;
      if (pl.extension.kind == ExtensionSpec::Kind::Explicit) {
        os << "(";
        for (std::size_t e = 0; e < pl.extension.exprs.size(); ++e)
          os << (e ? ", " : "") << pl.extension.exprs[e];
        os << ")";
      }
      os << "\n";
    }
  }
  const SolverConfig def;
  const auto& c = g.config;
  if (c.seed != def.seed) os << "config: seed = " << c.seed << "\n";
  if (c.max_loops != def.max_loops) os << "config: max_loops = " << c.max_loops << "\n";
  if (c.max_order != def.max_order) os << "config: max_order = " << c.max_order << "\n";
  if (c.tol_delta != def.tol_delta)
    os << "config: tol_delta = " << poly::format_double(c.tol_delta) << "\n";
  if (c.tol_kappa != def.tol_kappa)
    os << "config: tol_kappa = " << poly::format_double(c.tol_kappa) << "\n";
  if (c.tol_rank != def.tol_rank)
    os << "config: tol_rank = " << poly::format_double(c.tol_rank) << "\n";
  if (c.tol_strict != def.tol_strict)
    os << "config: tol_strict = " << poly::format_double(c.tol_strict) << "\n";
  if (c.zeta0 != def.zeta0) os << "config: zeta0 = " << poly::format_double(c.zeta0) << "\n";
  if (c.zeta_min != def.zeta_min)
    os << "config: zeta_min = " << poly::format_double(c.zeta_min) << "\n";
  if (c.lme_max_degree != def.lme_max_degree)
    os << "config: lme_max_degree = " << c.lme_max_degree << "\n";
  if (c.sdp_max_iters != def.sdp_max_iters)
    os << "config: sdp_max_iters = " << c.sdp_max_iters << "\n";
  return os.str();
}

bool is_nep(const Gnep& g) {
  for (int i = 0; i < g.layout.players(); ++i)
    for (const auto& c : g.players[i].constraints)
      for (int v = 0; v < g.layout.total(); ++v)
        if (!g.layout.in_block(v, i) &&
            (c.cleared.depends_on(v) || c.original.den().depends_on(v)))
          return false;
  return true;
}

namespace {

// decomposes a cleared constraint as alpha(x_-i) + sum_j gamma_j x_{i,j} when
// it is linear in the block with constant coefficients; nullopt otherwise
struct BlockLinear {
  Polynomial alpha;            // x_i-free part
  std::vector<double> gamma;   // constant coefficient per coordinate
};
std::optional<BlockLinear> block_linear(const VarLayout& lay, int player,
                                        const Polynomial& p) {
  BlockLinear out;
  out.alpha = Polynomial(p.nvars());
  out.gamma.assign(lay.dim(player), 0.0);
  for (const auto& [m, c] : p.terms()) {
    int bdeg = 0, coord = -1;
    bool pure = true;
    for (int j = 0; j < lay.dim(player); ++j) {
      int e = m[lay.flat(player, j)];
      bdeg += e;
      if (e > 0) coord = j;
    }
    if (bdeg == 0) {
      out.alpha.add_term(m, c);
      continue;
    }
    if (bdeg > 1) return std::nullopt;
    // exactly one block coordinate to the first power; require no x_-i factor
    for (int v = 0; v < p.nvars(); ++v)
      if (!lay.in_block(v, player) && m[v] > 0) pure = false;
    if (!pure) return std::nullopt;
    out.gamma[coord] += c;
  }
  return out;
}

}  // namespace

std::optional<BoxShape> match_box(const Gnep& g, int player) {
  const auto& lay = g.layout;
  const auto& pl = g.players[player];
  int ni = lay.dim(player);
  if (pl.m() != 2 * ni) return std::nullopt;
  BoxShape shape;
  shape.lower.resize(ni);
  shape.upper.resize(ni);
  shape.lower_slot.assign(ni, -1);
  shape.upper_slot.assign(ni, -1);
  shape.lower_scale.assign(ni, 1.0);
  shape.upper_scale.assign(ni, 1.0);
  for (int s = 0; s < pl.m(); ++s) {
    const auto& c = pl.constraints[pl.kkt_index[s]];
    if (c.kind != ConstraintKind::WeakIneq) return std::nullopt;
    auto bl = block_linear(lay, player, c.cleared);
    if (!bl) return std::nullopt;
    int coord = -1;
    for (int j = 0; j < ni; ++j)
      if (bl->gamma[j] != 0.0) {
        if (coord >= 0) return std::nullopt;  // touches two coordinates
        coord = j;
      }
    if (coord < 0) return std::nullopt;
    double gam = bl->gamma[coord];
    RationalFunction bound(bl->alpha * (-1.0 / gam));
    if (gam > 0) {
      if (shape.lower_slot[coord] >= 0) return std::nullopt;
      shape.lower_slot[coord] = s;
      shape.lower[coord] = bound;  // x >= -alpha/gamma
      shape.lower_scale[coord] = gam;
    } else {
      if (shape.upper_slot[coord] >= 0) return std::nullopt;
      shape.upper_slot[coord] = s;
      shape.upper[coord] = bound;
      shape.upper_scale[coord] = -gam;
    }
  }
  for (int j = 0; j < ni; ++j)
    if (shape.lower_slot[j] < 0 || shape.upper_slot[j] < 0) return std::nullopt;
  return shape;
}

std::optional<SimplexShape> match_simplex(const Gnep& g, int player) {
  const auto& lay = g.layout;
  const auto& pl = g.players[player];
  int ni = lay.dim(player);
  if (pl.m() != ni + 1) return std::nullopt;
  SimplexShape shape;
  shape.lower.resize(ni);
  shape.lower_slot.assign(ni, -1);
  shape.lower_scale.assign(ni, 1.0);
  for (int s = 0; s < pl.m(); ++s) {
    const auto& c = pl.constraints[pl.kkt_index[s]];
    if (c.kind != ConstraintKind::WeakIneq) return std::nullopt;
    auto bl = block_linear(lay, player, c.cleared);
    if (!bl) return std::nullopt;
    int touched = 0, coord = -1;
    for (int j = 0; j < ni; ++j)
      if (bl->gamma[j] != 0.0) {
        ++touched;
        coord = j;
      }
    if (touched == 1 && bl->gamma[coord] > 0) {
      if (shape.lower_slot[coord] >= 0) return std::nullopt;
      shape.lower_slot[coord] = s;
      shape.lower[coord] = RationalFunction(bl->alpha * (-1.0 / bl->gamma[coord]));
      shape.lower_scale[coord] = bl->gamma[coord];
    } else if (touched == ni) {
      // cap: alpha - gamma e'x_i with equal negative coefficients
      double gam = bl->gamma[0];
      for (int j = 1; j < ni; ++j)
        if (std::abs(bl->gamma[j] - gam) > 1e-12 * std::max(1.0, std::abs(gam)))
          return std::nullopt;
      if (gam >= 0 || shape.cap_slot >= 0) return std::nullopt;
      shape.cap_slot = s;
      shape.cap_u = RationalFunction(bl->alpha * (-1.0 / gam));
      shape.cap_scale = -gam;
    } else {
      return std::nullopt;
    }
  }
  if (shape.cap_slot < 0) return std::nullopt;
  for (int j = 0; j < ni; ++j)
    if (shape.lower_slot[j] < 0) return std::nullopt;
  return shape;
}

std::optional<Polynomial> linear_sqrt(const Polynomial& p) {
  if (p.is_zero()) return Polynomial(p.nvars());
  if (auto c = p.as_constant()) {
    if (*c < 0) return std::nullopt;
    return Polynomial::constant(p.nvars(), std::sqrt(*c));
  }
  if (p.degree() != 2) return std::nullopt;
  const int n = p.nvars();
  // find a variable with a positive square coefficient
  int pivot = -1;
  double pc = 0.0;
  for (int v = 0; v < n && pivot < 0; ++v) {
    Mono sq(n, 0);
    sq[v] = 2;
    double c = p.coeff(sq);
    if (c > 0) {
      pivot = v;
      pc = std::sqrt(c);
    }
  }
  if (pivot < 0) return std::nullopt;
  Polynomial root(n);
  Mono lin(n, 0);
  lin[pivot] = 1;
  root.add_term(lin, pc);
  for (int v = 0; v < n; ++v) {
    if (v == pivot) continue;
    Mono cross(n, 0);
    cross[pivot] = 1;
    cross[v] = 1;
    double c = p.coeff(cross);
    if (c != 0.0) {
      Mono lv(n, 0);
      lv[v] = 1;
      root.add_term(lv, c / (2 * pc));
    }
  }
  Mono one(n, 0);
  Mono plin(n, 0);
  plin[pivot] = 1;
  double c1 = p.coeff(plin);
  if (c1 != 0.0) root.add_term(one, c1 / (2 * pc));
  Polynomial check = root * root;
  if (check.approx_equal(p, 1e-9)) return root;
  return std::nullopt;
}

std::optional<BallShape> match_ball(const Gnep& g, int player) {
  const auto& lay = g.layout;
  const auto& pl = g.players[player];
  if (pl.m() != 1 && pl.m() != 2) return std::nullopt;
  const int n = lay.total();
  std::vector<int> block;
  for (int j = 0; j < lay.dim(player); ++j) block.push_back(lay.flat(player, j));

  auto split_Rphi = [&](const Polynomial& p, Polynomial& R, Polynomial& phi, int& k) -> bool {
    R = Polynomial(n);
    phi = Polynomial(n);
    k = 0;
    for (const auto& [m, c] : p.terms()) {
      int bdeg = 0;
      for (int v : block) bdeg += m[v];
      if (bdeg == 0) {
        R.add_term(m, c);
      } else {
        if (k == 0) k = bdeg;
        if (bdeg != k) return false;
        phi.add_term(m, -c);
      }
    }
    return k >= 1;
  };

  BallShape shape;
  if (pl.m() == 1) {
    const auto& c = pl.constraints[pl.kkt_index[0]];
    if (!split_Rphi(c.cleared, shape.R, shape.phi, shape.hom_degree)) return std::nullopt;
    shape.upper_slot = 0;
    shape.upper_scale = 1.0;
  } else {
    // annulus: phi - r >= 0 and R - phi >= 0 with the same phi
    Polynomial R0, phi0, R1, phi1;
    int k0, k1;
    const auto& ca = pl.constraints[pl.kkt_index[0]];
    const auto& cb = pl.constraints[pl.kkt_index[1]];
    if (ca.kind != ConstraintKind::WeakIneq || cb.kind != ConstraintKind::WeakIneq)
      return std::nullopt;
    if (!split_Rphi(ca.cleared, R0, phi0, k0) || !split_Rphi(cb.cleared, R1, phi1, k1))
      return std::nullopt;
    if (k0 != k1) return std::nullopt;
    // the two constraints carry phi with opposite signs
    if (!phi0.approx_equal(-phi1, 1e-10)) return std::nullopt;
    // the annulus multiplier template is derived for phi = ||x_i||^2 only
    Polynomial eucl(n);
    for (int v : block) {
      Mono sq(n, 0);
      sq[v] = 2;
      eucl.add_term(sq, 1.0);
    }
    bool first_upper;
    if (phi0.approx_equal(eucl, 1e-10))
      first_upper = true;
    else if (phi1.approx_equal(eucl, 1e-10))
      first_upper = false;
    else
      return std::nullopt;
    shape.annulus = true;
    shape.hom_degree = k0;
    if (first_upper) {
      shape.phi = phi0;
      shape.R = R0;
      shape.upper_slot = 0;
      shape.r_low = -R1;
      shape.lower_slot = 1;
    } else {
      shape.phi = phi1;
      shape.R = R1;
      shape.upper_slot = 1;
      shape.r_low = -R0;
      shape.lower_slot = 0;
    }
  }
  // Euclidean when phi = ||x_i||^2 exactly
  Polynomial eucl(n);
  for (int v : block) {
    Mono sq(n, 0);
    sq[v] = 2;
    eucl.add_term(sq, 1.0);
  }
  shape.euclidean = shape.phi.approx_equal(eucl, 1e-10);
  return shape;
}

std::vector<Diagnostic> validate(const Gnep& g) {
  std::vector<Diagnostic> out;
  const auto& lay = g.layout;
  std::vector<Polynomial> positive_basis = g.declared_positive;
  for (const auto& pl : g.players)
    for (const auto& c : pl.constraints)
      if (c.kind == ConstraintKind::StrictIneq && c.original.is_polynomial())
        positive_basis.push_back(c.original.num());

  for (int i = 0; i < lay.players(); ++i) {
    const auto& pl = g.players[i];
    std::string who = "player " + std::to_string(i + 1);
    if (!pl.objective.is_polynomial()) {
      auto split = poly::split_declared_factors(pl.objective.den(), positive_basis);
      if (!split.fully_declared || split.constant <= 0)
        out.push_back({Diagnostic::Severity::Error,
                       who + ": objective denominator not declared positive"});
    }
    for (const auto& c : pl.constraints) {
      if (c.squared)
        out.push_back({Diagnostic::Severity::Warning,
                       who + ": constraint '" + c.text +
                           "' cleared by squaring an undeclared denominator"});
    }
    switch (pl.lme.kind) {
      case LmeSpec::Kind::Box:
        if (!match_box(g, i))
          out.push_back({Diagnostic::Severity::Error,
                         who + ": box lme requested but constraints are not a box"});
        break;
      case LmeSpec::Kind::Simplex:
        if (!match_simplex(g, i))
          out.push_back({Diagnostic::Severity::Error,
                         who + ": simplex lme requested but constraints are not a simplex"});
        break;
      case LmeSpec::Kind::Ball:
        if (!match_ball(g, i))
          out.push_back({Diagnostic::Severity::Error,
                         who + ": ball lme requested but constraints are not ball shaped"});
        break;
      case LmeSpec::Kind::Explicit: {
        int m = pl.m();
        int ni = lay.dim(i);
        std::size_t want_tq = static_cast<std::size_t>(m) * (ni + m) + 1;
        if (pl.lme.exprs.size() != want_tq &&
            pl.lme.exprs.size() != static_cast<std::size_t>(m))
          out.push_back({Diagnostic::Severity::Error,
                         who + ": explicit lme needs m*(n_i+m)+1 entries (row-major T then q) "
                               "or exactly m multiplier expressions"});
        break;
      }
      case LmeSpec::Kind::Auto:
        break;
    }
    switch (pl.extension.kind) {
      case ExtensionSpec::Kind::Box:
        if (!match_box(g, i))
          out.push_back({Diagnostic::Severity::Error,
                         who + ": box extension requested but constraints are not a box"});
        break;
      case ExtensionSpec::Kind::Simplex:
        if (!match_simplex(g, i))
          out.push_back({Diagnostic::Severity::Error,
                         who + ": simplex extension requested but constraints are not a simplex"});
        break;
      case ExtensionSpec::Kind::Ball: {
        auto b = match_ball(g, i);
        if (!b || !b->euclidean || b->annulus || !linear_sqrt(b->R))
          out.push_back({Diagnostic::Severity::Error,
                         who + ": ball extension requires ||x_i||^2 <= R(x_-i)^2 shape"});
        break;
      }
      case ExtensionSpec::Kind::Explicit:
        if (pl.extension.exprs.size() != static_cast<std::size_t>(lay.dim(i)))
          out.push_back({Diagnostic::Severity::Error,
                         who + ": explicit extension needs n_i expressions"});
        break;
      case ExtensionSpec::Kind::Auto:
        break;
    }
  }
  // duplicated positivity declarations
  for (std::size_t a = 0; a < g.declared_positive.size(); ++a)
    for (std::size_t b = a + 1; b < g.declared_positive.size(); ++b)
      if (g.declared_positive[a].approx_equal(g.declared_positive[b]))
        out.push_back({Diagnostic::Severity::Warning, "duplicate positivity declaration"});
  std::sort(out.begin(), out.end(), [](const Diagnostic& a, const Diagnostic& b) {
    if (a.severity != b.severity) return a.severity < b.severity;
    return a.message < b.message;
  });
  return out;
}

}  // namespace gne::model
