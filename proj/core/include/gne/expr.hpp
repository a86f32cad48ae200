#pragma once

#include <string>

#include "gne/poly.hpp"

namespace gne::poly {

struct ParseError : PolyError {
  ParseError(std::string msg, int line, int col)
      : PolyError(std::move(msg)), line(line), col(col) {}
  int line;
  int col;
};

// Parses the expression grammar shared with the problem files:
// variables x{i}_{j} (1-based), operators + - * / ^, parentheses, decimal
// literals. Division produces rational functions. line0/col0 locate the
// expression inside a larger file so diagnostics carry file positions.
RationalFunction parse_expression(const std::string& text, const VarLayout& layout,
                                  int line0 = 1, int col0 = 1);

}  // namespace gne::poly
