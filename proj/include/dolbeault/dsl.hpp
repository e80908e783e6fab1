#pragma once

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dolbeault/types.hpp"

namespace dolbeault::dsl {

/// Metric text format, one statement per line, `#` starts a comment:
///
///   program    := { line NEWLINE }
///   line       := [ assignment | manifest ]
///   assignment := 'h' '[' INT ']' '[' INT ']' '=' expr
///   manifest   := '@' IDENT '=' ( IDENT | ['-'] NUMBER )
///   expr       := term { ('+' | '-') term }
///   term       := unary { ('*' | '/') unary }
///   unary      := ('+' | '-') unary | power
///   power      := primary [ '^' ['-'] INT ]
///   primary    := NUMBER | 'i' | 'pi' | COORD | FUNC '(' expr ')' | '(' expr ')'
///   COORD      := 'z1' | 'z2' | 'z3'
///   FUNC       := 'conj' | 'abs2' | 'ln' | 'exp'
///
/// Indices are 1-based. abs2(w) = conj(w) w.
class SyntaxError : public Error {
  public:
    SyntaxError(int line, int column, std::string message, std::vector<std::string> expected);

    int line() const { return line_; }
    int column() const { return column_; }
    const std::vector<std::string>& expected() const { return expected_; }

  private:
    int line_;
    int column_;
    std::vector<std::string> expected_;
};

enum class Func { Conj, Abs2, Ln, Exp };
const char* to_string(Func f);

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
    enum class Kind { Number, Imag, Pi, Coord, Call, Neg, Add, Sub, Mul, Div, Pow };
    Kind kind = Kind::Number;
    double number = 0.0; ///< Number
    int coord = 0;       ///< Coord, 0-based
    Func func = Func::Conj;
    int exponent = 0; ///< Pow
    ExprPtr lhs;      ///< operand of Call, Neg, Pow; left operand otherwise
    ExprPtr rhs;
};

bool equal(const Expr& a, const Expr& b);
/// Largest coordinate index used, +1 (0 for constants).
int coordinates_used(const Expr& e);

ExprPtr make_number(double v);
ExprPtr make_coord(int j);
ExprPtr make_call(Func f, ExprPtr arg);
ExprPtr make_binary(Expr::Kind kind, ExprPtr a, ExprPtr b);

cplx evaluate(const Expr& e, const Point& p);

/// Minimal-parenthesis text that parses back to an equal tree.
std::string print(const Expr& e);

ExprPtr parse_expression(std::string_view text);

struct ManifestValue {
    std::string text;
    int line = 0;
    int column = 0;
};

struct MetricProgram {
    /// (j, k) 0-based -> expression for h_{j kbar}, as written.
    std::map<std::pair<int, int>, ExprPtr> entries;
    std::map<std::string, ManifestValue> manifest;
    std::map<std::pair<int, int>, std::pair<int, int>> entry_positions;
};

MetricProgram parse_program(std::string_view text);
std::string print(const MetricProgram& program);

} // namespace dolbeault::dsl
