#include "gne/expr.hpp"

#include <cctype>
#include <cstdlib>

namespace gne::poly {

namespace {

struct Parser {
  const std::string& s;
  const VarLayout& layout;
  std::size_t pos = 0;
  int line, col0;

  Parser(const std::string& text, const VarLayout& lay, int line0, int c0)
      : s(text), layout(lay), line(line0), col0(c0) {}

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(msg, line, col0 + static_cast<int>(pos));
  }

  void skip_ws() {
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
  }

  bool eat(char c) {
    skip_ws();
    if (pos < s.size() && s[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }

  char peek() {
    skip_ws();
    return pos < s.size() ? s[pos] : '\0';
  }

  RationalFunction parse() {
    RationalFunction r = expr();
    skip_ws();
    if (pos != s.size()) fail("unexpected trailing input");
    return r;
  }

  RationalFunction expr() {
    RationalFunction r = term();
    for (;;) {
      if (eat('+'))
        r = r + term();
      else if (eat('-'))
        r = r - term();
      else
        return r;
    }
  }

  RationalFunction term() {
    RationalFunction r = factor();
    for (;;) {
      if (eat('*'))
        r = r * factor();
      else if (eat('/')) {
        RationalFunction d = factor();
        if (d.is_zero()) fail("division by zero");
        r = r / d;
      } else
        return r;
    }
  }

  RationalFunction factor() {
    bool neg = false;
    while (true) {
      if (eat('-'))
        neg = !neg;
      else if (eat('+'))
        ;
      else
        break;
    }
    RationalFunction base = primary();
    if (eat('^')) {
      skip_ws();
      std::size_t start = pos;
      while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
      if (pos == start) fail("expected integer exponent after '^'");
      int e = std::atoi(s.substr(start, pos - start).c_str());
      base = base.pow(e);
    }
    return neg ? -base : base;
  }

  RationalFunction primary() {
    skip_ws();
    if (pos >= s.size()) fail("unexpected end of expression");
    char c = s[pos];
    if (c == '(') {
      ++pos;
      RationalFunction r = expr();
      if (!eat(')')) fail("expected ')'");
      return r;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (c == 'x') return variable();
    fail(std::string("unexpected character '") + c + "'");
  }

  RationalFunction number() {
    std::size_t start = pos;
    while (pos < s.size() &&
           (std::isdigit(static_cast<unsigned char>(s[pos])) || s[pos] == '.' ||
            s[pos] == 'e' || s[pos] == 'E' ||
            ((s[pos] == '+' || s[pos] == '-') && pos > start &&
             (s[pos - 1] == 'e' || s[pos - 1] == 'E'))))
      ++pos;
    char* end = nullptr;
    std::string tok = s.substr(start, pos - start);
    double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') fail("bad numeric literal '" + tok + "'");
    return RationalFunction::constant(layout.total(), v);
  }

  RationalFunction variable() {
    std::size_t start = pos;
    ++pos;  // 'x'
    std::size_t pstart = pos;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos == pstart || pos >= s.size() || s[pos] != '_')
      fail("bad variable name; expected x<i>_<j>");
    int player = std::atoi(s.substr(pstart, pos - pstart).c_str());
    ++pos;  // '_'
    std::size_t jstart = pos;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos == jstart) fail("bad variable name; expected x<i>_<j>");
    int j = std::atoi(s.substr(jstart, pos - jstart).c_str());
    if (player < 1 || player > layout.players() || j < 1 || j > layout.dim(player - 1)) {
      pos = start;
      fail("unknown variable x" + std::to_string(player) + "_" + std::to_string(j));
    }
    return RationalFunction(
        Polynomial::variable(layout.total(), layout.flat(player - 1, j - 1)));
  }
};

}  // namespace

RationalFunction parse_expression(const std::string& text, const VarLayout& layout,
                                  int line0, int col0) {
  Parser p(text, layout, line0, col0);
  return p.parse();
}

}  // namespace gne::poly
