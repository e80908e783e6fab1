#include "dolbeault/dsl.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace dolbeault::dsl {

namespace {

std::string join_expected(const std::vector<std::string>& expected) {
    std::string s;
    for (std::size_t i = 0; i < expected.size(); ++i) {
        if (i > 0)
            s += i + 1 == expected.size() ? " or " : ", ";
        s += expected[i];
    }
    return s;
}

std::string format_message(int line, int column, const std::string& message) {
    return "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + message;
}

enum class Tok { Number, Ident, LBracket, RBracket, LParen, RParen, Plus, Minus, Star, Slash, Caret, Equals, At, Newline, End };

const char* tok_name(Tok t) {
    switch (t) {
    case Tok::Number:
        return "number";
    case Tok::Ident:
        return "identifier";
    case Tok::LBracket:
        return "'['";
    case Tok::RBracket:
        return "']'";
    case Tok::LParen:
        return "'('";
    case Tok::RParen:
        return "')'";
    case Tok::Plus:
        return "'+'";
    case Tok::Minus:
        return "'-'";
    case Tok::Star:
        return "'*'";
    case Tok::Slash:
        return "'/'";
    case Tok::Caret:
        return "'^'";
    case Tok::Equals:
        return "'='";
    case Tok::At:
        return "'@'";
    case Tok::Newline:
        return "end of line";
    case Tok::End:
        return "end of input";
    }
    return "?";
}

struct Token {
    Tok kind = Tok::End;
    std::string text;
    double number = 0.0;
    int line = 1;
    int column = 1;
};

std::string describe(const Token& t) {
    if (t.kind == Tok::Number || t.kind == Tok::Ident)
        return "'" + t.text + "'";
    return tok_name(t.kind);
}

std::vector<Token> lex(std::string_view src) {
    std::vector<Token> out;
    int line = 1, col = 1;
    std::size_t i = 0;
    auto push = [&](Tok k, std::string text, int c) { out.push_back({k, std::move(text), 0.0, line, c}); };
    while (i < src.size()) {
        const char ch = src[i];
        if (ch == '\n') {
            push(Tok::Newline, "", col);
            ++line;
            col = 1;
            ++i;
            continue;
        }
        if (ch == '#') {
            while (i < src.size() && src[i] != '\n')
                ++i;
            continue;
        }
        if (ch == ' ' || ch == '\t' || ch == '\r') {
            ++i;
            ++col;
            continue;
        }
        const int start = col;
        if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '.') {
            std::size_t j = i;
            while (j < src.size() && (std::isdigit(static_cast<unsigned char>(src[j])) || src[j] == '.'))
                ++j;
            if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
                std::size_t k = j + 1;
                if (k < src.size() && (src[k] == '+' || src[k] == '-'))
                    ++k;
                if (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]))) {
                    while (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k])))
                        ++k;
                    j = k;
                }
            }
            Token t{Tok::Number, std::string(src.substr(i, j - i)), 0.0, line, start};
            const auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.number);
            if (res.ec != std::errc() || res.ptr != t.text.data() + t.text.size())
                throw SyntaxError(line, start, "malformed number '" + t.text + "'", {"number"});
            out.push_back(t);
            col += static_cast<int>(j - i);
            i = j;
            continue;
        }
        if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') {
            std::size_t j = i;
            while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_'))
                ++j;
            push(Tok::Ident, std::string(src.substr(i, j - i)), start);
            col += static_cast<int>(j - i);
            i = j;
            continue;
        }
        Tok k;
        switch (ch) {
        case '[':
            k = Tok::LBracket;
            break;
        case ']':
            k = Tok::RBracket;
            break;
        case '(':
            k = Tok::LParen;
            break;
        case ')':
            k = Tok::RParen;
            break;
        case '+':
            k = Tok::Plus;
            break;
        case '-':
            k = Tok::Minus;
            break;
        case '*':
            k = Tok::Star;
            break;
        case '/':
            k = Tok::Slash;
            break;
        case '^':
            k = Tok::Caret;
            break;
        case '=':
            k = Tok::Equals;
            break;
        case '@':
            k = Tok::At;
            break;
        default:
            throw SyntaxError(line, start, std::string("unexpected character '") + ch + "'", {});
        }
        push(k, std::string(1, ch), start);
        ++col;
        ++i;
    }
    out.push_back({Tok::End, "", 0.0, line, col});
    return out;
}

bool is_func(const std::string& s, Func& f) {
    if (s == "conj")
        f = Func::Conj;
    else if (s == "abs2")
        f = Func::Abs2;
    else if (s == "ln")
        f = Func::Ln;
    else if (s == "exp")
        f = Func::Exp;
    else
        return false;
    return true;
}

bool is_coord(const std::string& s, int& j) {
    if (s.size() == 2 && s[0] == 'z' && s[1] >= '1' && s[1] <= '0' + kMaxComplexDim) {
        j = s[1] - '1';
        return true;
    }
    return false;
}

const std::vector<std::string> kPrimaryStart{"number", "'i'", "'pi'", "z1..z3", "conj", "abs2", "ln", "exp", "'('",
                                             "'-'"};

class Parser {
  public:
    explicit Parser(std::vector<Token> toks) : t_(std::move(toks)) {}

    const Token& peek() const { return t_[pos_]; }
    bool at(Tok k) const { return peek().kind == k; }
    Token take() { return t_[pos_++]; }

    [[noreturn]] void fail(std::vector<std::string> expected) const {
        const Token& t = peek();
        std::string message = "expected " + join_expected(expected) + " but found " + describe(t);
        throw SyntaxError(t.line, t.column, std::move(message), std::move(expected));
    }

    Token expect(Tok k) {
        if (!at(k))
            fail({tok_name(k)});
        return take();
    }

    int expect_int() {
        const Token& t = peek();
        if (t.kind != Tok::Number || t.text.find_first_not_of("0123456789") != std::string::npos)
            fail({"integer"});
        take();
        return std::stoi(t.text);
    }

    ExprPtr expr() {
        ExprPtr e = term();
        while (at(Tok::Plus) || at(Tok::Minus)) {
            const auto k = take().kind == Tok::Plus ? Expr::Kind::Add : Expr::Kind::Sub;
            e = make_binary(k, e, term());
        }
        return e;
    }

    ExprPtr term() {
        ExprPtr e = unary();
        while (at(Tok::Star) || at(Tok::Slash)) {
            const auto k = take().kind == Tok::Star ? Expr::Kind::Mul : Expr::Kind::Div;
            e = make_binary(k, e, unary());
        }
        return e;
    }

    ExprPtr unary() {
        if (at(Tok::Plus)) {
            take();
            return unary();
        }
        if (at(Tok::Minus)) {
            take();
            auto e = std::make_shared<Expr>();
            e->kind = Expr::Kind::Neg;
            e->lhs = unary();
            return e;
        }
        return power();
    }

    ExprPtr power() {
        ExprPtr base = primary();
        if (!at(Tok::Caret))
            return base;
        take();
        int sign = 1;
        if (at(Tok::Minus)) {
            take();
            sign = -1;
        }
        const int k = expect_int();
        auto e = std::make_shared<Expr>();
        e->kind = Expr::Kind::Pow;
        e->lhs = base;
        e->exponent = sign * k;
        return e;
    }

    ExprPtr primary() {
        const Token& t = peek();
        if (t.kind == Tok::Number) {
            take();
            return make_number(t.number);
        }
        if (t.kind == Tok::LParen) {
            take();
            ExprPtr e = expr();
            expect(Tok::RParen);
            return e;
        }
        if (t.kind == Tok::Ident) {
            const Token id = take();
            auto e = std::make_shared<Expr>();
            Func f;
            int j;
            if (id.text == "i") {
                e->kind = Expr::Kind::Imag;
            } else if (id.text == "pi") {
                e->kind = Expr::Kind::Pi;
            } else if (is_coord(id.text, j)) {
                e->kind = Expr::Kind::Coord;
                e->coord = j;
            } else if (is_func(id.text, f)) {
                expect(Tok::LParen);
                ExprPtr arg = expr();
                expect(Tok::RParen);
                return make_call(f, arg);
            } else {
                throw SyntaxError(id.line, id.column, "unknown name '" + id.text + "'; expected one of " +
                                                          join_expected(kPrimaryStart),
                                  kPrimaryStart);
            }
            return e;
        }
        fail(kPrimaryStart);
    }

    void end_of_line() {
        if (at(Tok::Newline)) {
            take();
            return;
        }
        if (!at(Tok::End)) {
            std::vector<std::string> expected{"end of line"};
            fail(expected);
        }
    }

    MetricProgram program() {
        MetricProgram prog;
        while (!at(Tok::End)) {
            if (at(Tok::Newline)) {
                take();
                continue;
            }
            if (at(Tok::At)) {
                take();
                const Token key = expect(Tok::Ident);
                expect(Tok::Equals);
                ManifestValue v{"", peek().line, peek().column};
                if (at(Tok::Minus)) {
                    take();
                    v.text = "-";
                    v.text += expect(Tok::Number).text;
                } else if (at(Tok::Number) || at(Tok::Ident)) {
                    v.text = take().text;
                } else {
                    fail({"identifier", "number"});
                }
                if (prog.manifest.count(key.text))
                    throw SyntaxError(key.line, key.column, "duplicate manifest key '" + key.text + "'", {});
                prog.manifest[key.text] = v;
                end_of_line();
                continue;
            }
            const Token& head = peek();
            if (head.kind != Tok::Ident || head.text != "h")
                fail({"'h'", "'@'", "end of line"});
            const Token h = take();
            expect(Tok::LBracket);
            const Token jt = peek();
            const int j = expect_int();
            expect(Tok::RBracket);
            expect(Tok::LBracket);
            const Token kt = peek();
            const int k = expect_int();
            expect(Tok::RBracket);
            if (j < 1 || j > kMaxComplexDim)
                throw SyntaxError(jt.line, jt.column, "row index out of range 1.." + std::to_string(kMaxComplexDim),
                                  {});
            if (k < 1 || k > kMaxComplexDim)
                throw SyntaxError(kt.line, kt.column,
                                  "column index out of range 1.." + std::to_string(kMaxComplexDim), {});
            expect(Tok::Equals);
            ExprPtr e = expr();
            const std::pair<int, int> key{j - 1, k - 1};
            if (prog.entries.count(key))
                throw SyntaxError(h.line, h.column,
                                  "h[" + std::to_string(j) + "][" + std::to_string(k) + "] assigned twice", {});
            prog.entries[key] = e;
            prog.entry_positions[key] = {h.line, h.column};
            end_of_line();
        }
        return prog;
    }

  private:
    std::vector<Token> t_;
    std::size_t pos_ = 0;
};

int precedence(const Expr& e) {
    switch (e.kind) {
    case Expr::Kind::Add:
    case Expr::Kind::Sub:
        return 1;
    case Expr::Kind::Mul:
    case Expr::Kind::Div:
        return 2;
    case Expr::Kind::Neg:
        return 3;
    case Expr::Kind::Pow:
        return 4;
    default:
        return 5;
    }
}

void print_to(std::string& out, const Expr& e, int min_prec) {
    const int prec = precedence(e);
    const bool paren = prec < min_prec;
    if (paren)
        out += '(';
    switch (e.kind) {
    case Expr::Kind::Number: {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", e.number);
        out += buf;
        break;
    }
    case Expr::Kind::Imag:
        out += 'i';
        break;
    case Expr::Kind::Pi:
        out += "pi";
        break;
    case Expr::Kind::Coord:
        out += 'z';
        out += std::to_string(e.coord + 1);
        break;
    case Expr::Kind::Call:
        out += to_string(e.func);
        out += '(';
        print_to(out, *e.lhs, 0);
        out += ')';
        break;
    case Expr::Kind::Neg:
        out += '-';
        print_to(out, *e.lhs, 3);
        break;
    case Expr::Kind::Pow:
        print_to(out, *e.lhs, 5);
        out += '^';
        out += std::to_string(e.exponent);
        break;
    default: {
        const char* op = e.kind == Expr::Kind::Add ? " + "
                         : e.kind == Expr::Kind::Sub ? " - "
                         : e.kind == Expr::Kind::Mul ? "*"
                                                     : "/";
        print_to(out, *e.lhs, prec);
        out += op;
        print_to(out, *e.rhs, prec + 1);
        break;
    }
    }
    if (paren)
        out += ')';
}

} // namespace

SyntaxError::SyntaxError(int line, int column, std::string message, std::vector<std::string> expected)
    : Error(format_message(line, column, message)), line_(line), column_(column), expected_(std::move(expected)) {}

const char* to_string(Func f) {
    switch (f) {
    case Func::Conj:
        return "conj";
    case Func::Abs2:
        return "abs2";
    case Func::Ln:
        return "ln";
    case Func::Exp:
        return "exp";
    }
    return "?";
}

bool equal(const Expr& a, const Expr& b) {
    if (a.kind != b.kind)
        return false;
    switch (a.kind) {
    case Expr::Kind::Number:
        return a.number == b.number;
    case Expr::Kind::Imag:
    case Expr::Kind::Pi:
        return true;
    case Expr::Kind::Coord:
        return a.coord == b.coord;
    case Expr::Kind::Call:
        return a.func == b.func && equal(*a.lhs, *b.lhs);
    case Expr::Kind::Neg:
        return equal(*a.lhs, *b.lhs);
    case Expr::Kind::Pow:
        return a.exponent == b.exponent && equal(*a.lhs, *b.lhs);
    default:
        return equal(*a.lhs, *b.lhs) && equal(*a.rhs, *b.rhs);
    }
}

int coordinates_used(const Expr& e) {
    int m = e.kind == Expr::Kind::Coord ? e.coord + 1 : 0;
    if (e.lhs)
        m = std::max(m, coordinates_used(*e.lhs));
    if (e.rhs)
        m = std::max(m, coordinates_used(*e.rhs));
    return m;
}

ExprPtr make_number(double v) {
    auto e = std::make_shared<Expr>();
    e->kind = Expr::Kind::Number;
    e->number = v;
    return e;
}

ExprPtr make_coord(int j) {
    auto e = std::make_shared<Expr>();
    e->kind = Expr::Kind::Coord;
    e->coord = j;
    return e;
}

ExprPtr make_call(Func f, ExprPtr arg) {
    auto e = std::make_shared<Expr>();
    e->kind = Expr::Kind::Call;
    e->func = f;
    e->lhs = std::move(arg);
    return e;
}

ExprPtr make_binary(Expr::Kind kind, ExprPtr a, ExprPtr b) {
    auto e = std::make_shared<Expr>();
    e->kind = kind;
    e->lhs = std::move(a);
    e->rhs = std::move(b);
    return e;
}

cplx evaluate(const Expr& e, const Point& p) {
    switch (e.kind) {
    case Expr::Kind::Number:
        return e.number;
    case Expr::Kind::Imag:
        return kI;
    case Expr::Kind::Pi:
        return kPi;
    case Expr::Kind::Coord:
        if (2 * e.coord + 1 >= p.size())
            throw DimensionError("metric expression uses z" + std::to_string(e.coord + 1) + " on a " +
                                 std::to_string(p.size() / 2) + "-dimensional chart");
        return z_coord(p, e.coord);
    case Expr::Kind::Call: {
        const cplx a = evaluate(*e.lhs, p);
        switch (e.func) {
        case Func::Conj:
            return std::conj(a);
        case Func::Abs2:
            return std::norm(a);
        case Func::Ln:
            return std::log(a);
        case Func::Exp:
            return std::exp(a);
        }
        return a;
    }
    case Expr::Kind::Neg:
        return -evaluate(*e.lhs, p);
    case Expr::Kind::Pow: {
        const cplx b = evaluate(*e.lhs, p);
        cplx r = 1.0;
        for (int i = 0; i < std::abs(e.exponent); ++i)
            r *= b;
        return e.exponent < 0 ? 1.0 / r : r;
    }
    case Expr::Kind::Add:
        return evaluate(*e.lhs, p) + evaluate(*e.rhs, p);
    case Expr::Kind::Sub:
        return evaluate(*e.lhs, p) - evaluate(*e.rhs, p);
    case Expr::Kind::Mul:
        return evaluate(*e.lhs, p) * evaluate(*e.rhs, p);
    case Expr::Kind::Div:
        return evaluate(*e.lhs, p) / evaluate(*e.rhs, p);
    }
    return 0.0;
}

std::string print(const Expr& e) {
    std::string out;
    print_to(out, e, 0);
    return out;
}

ExprPtr parse_expression(std::string_view text) {
    Parser p(lex(text));
    ExprPtr e = p.expr();
    if (!p.at(Tok::End) && !p.at(Tok::Newline))
        p.fail({"operator", "end of input"});
    return e;
}

MetricProgram parse_program(std::string_view text) { return Parser(lex(text)).program(); }

std::string print(const MetricProgram& program) {
    std::ostringstream out;
    for (const auto& [key, value] : program.manifest)
        out << '@' << key << " = " << value.text << '\n';
    for (const auto& [jk, e] : program.entries)
        out << "h[" << jk.first + 1 << "][" << jk.second + 1 << "] = " << print(*e) << '\n';
    return out.str();
}

} // namespace dolbeault::dsl
