#pragma once

// Coefficient expressions in one variable `x`.
//
// Grammar (whitespace insignificant):
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?          right associative
//   primary := number | ident | ident '(' expr ')' | '(' expr ')'
//   ident   := [a-z]+   one of: x pi sin cos exp log sqrt tanh
//
// so `-x^2` is `-(x^2)` and `2^-1` is `2^(-1)`.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "errors.hpp"

namespace metree {

class Expression {
public:
    enum class Op : std::uint8_t {
        constant,
        variable,
        add,
        sub,
        mul,
        div,
        pow,
        neg,
        sin,
        cos,
        exp,
        log,
        sqrt,
        tanh,
    };

    struct Node {
        Op op;
        double value = 0.0;  // constant only
        int lhs = -1;        // first operand (unary argument)
        int rhs = -1;
    };

    Expression() = default;

    static Expression parse(std::string_view text);

    static Expression constant(double c) {
        Expression e;
        e.nodes_.push_back({Op::constant, c});
        e.root_ = 0;
        return e;
    }

    double operator()(double x) const { return eval(x); }

    double eval(double x) const {
        if (!std::isfinite(x)) throw DomainError("expression evaluated at non-finite x");
        if (root_ < 0) throw DomainError("evaluating an empty expression");
        const double v = eval_node(root_, x);
        if (!std::isfinite(v))
            throw DomainError(fmt::format("expression '{}' is not finite at x = {}", to_string(), x));
        return v;
    }

    /// Fully parenthesized rendering; re-parses to a structurally equal tree.
    std::string to_string() const { return root_ < 0 ? std::string() : render(root_); }

    bool empty() const noexcept { return root_ < 0; }

    /// True when the tree does not reference `x`.
    bool is_constant() const {
        for (const auto& n : nodes_)
            if (n.op == Op::variable) return false;
        return true;
    }

    friend bool operator==(const Expression& a, const Expression& b) {
        if (a.root_ < 0 || b.root_ < 0) return a.root_ == b.root_;
        return same(a, a.root_, b, b.root_);
    }

private:
    std::vector<Node> nodes_;
    int root_ = -1;

    friend class ExpressionParser;

    int add_node(Node n) {
        nodes_.push_back(n);
        return static_cast<int>(nodes_.size()) - 1;
    }

    static bool same(const Expression& a, int i, const Expression& b, int j) {
        const Node& p = a.nodes_[i];
        const Node& q = b.nodes_[j];
        if (p.op != q.op) return false;
        if (p.op == Op::constant) return p.value == q.value;
        if ((p.lhs < 0) != (q.lhs < 0) || (p.rhs < 0) != (q.rhs < 0)) return false;
        if (p.lhs >= 0 && !same(a, p.lhs, b, q.lhs)) return false;
        if (p.rhs >= 0 && !same(a, p.rhs, b, q.rhs)) return false;
        return true;
    }

    double eval_node(int i, double x) const {
        const Node& n = nodes_[i];
        switch (n.op) {
            case Op::constant: return n.value;
            case Op::variable: return x;
            case Op::add: return eval_node(n.lhs, x) + eval_node(n.rhs, x);
            case Op::sub: return eval_node(n.lhs, x) - eval_node(n.rhs, x);
            case Op::mul: return eval_node(n.lhs, x) * eval_node(n.rhs, x);
            case Op::div: {
                const double den = eval_node(n.rhs, x);
                if (den == 0.0) throw DomainError(fmt::format("division by zero at x = {}", x));
                return eval_node(n.lhs, x) / den;
            }
            case Op::pow: {
                const double base = eval_node(n.lhs, x);
                const double expo = eval_node(n.rhs, x);
                if (base == 0.0 && expo < 0.0)
                    throw DomainError(fmt::format("zero raised to a negative power at x = {}", x));
                if (base < 0.0 && expo != std::floor(expo))
                    throw DomainError(fmt::format("negative base with fractional exponent at x = {}", x));
                return std::pow(base, expo);
            }
            case Op::neg: return -eval_node(n.lhs, x);
            case Op::sin: return std::sin(eval_node(n.lhs, x));
            case Op::cos: return std::cos(eval_node(n.lhs, x));
            case Op::exp: return std::exp(eval_node(n.lhs, x));
            case Op::log: {
                const double a = eval_node(n.lhs, x);
                if (a <= 0.0) throw DomainError(fmt::format("log of nonpositive value at x = {}", x));
                return std::log(a);
            }
            case Op::sqrt: {
                const double a = eval_node(n.lhs, x);
                if (a < 0.0) throw DomainError(fmt::format("sqrt of negative value at x = {}", x));
                return std::sqrt(a);
            }
            case Op::tanh: return std::tanh(eval_node(n.lhs, x));
        }
        return 0.0;
    }

    static const char* function_name(Op op) {
        switch (op) {
            case Op::sin: return "sin";
            case Op::cos: return "cos";
            case Op::exp: return "exp";
            case Op::log: return "log";
            case Op::sqrt: return "sqrt";
            case Op::tanh: return "tanh";
            default: return "";
        }
    }

    std::string render(int i) const {
        const Node& n = nodes_[i];
        switch (n.op) {
            case Op::constant: {
                // Negative literals only arise from Expression::constant.
                std::string s = fmt::format("{:.17g}", n.value);
                return n.value < 0 ? "(" + s + ")" : s;
            }
            case Op::variable: return "x";
            case Op::add: return "(" + render(n.lhs) + " + " + render(n.rhs) + ")";
            case Op::sub: return "(" + render(n.lhs) + " - " + render(n.rhs) + ")";
            case Op::mul: return "(" + render(n.lhs) + " * " + render(n.rhs) + ")";
            case Op::div: return "(" + render(n.lhs) + " / " + render(n.rhs) + ")";
            case Op::pow: return "(" + render(n.lhs) + " ^ " + render(n.rhs) + ")";
            case Op::neg: return "(-" + render(n.lhs) + ")";
            default: return std::string(function_name(n.op)) + "(" + render(n.lhs) + ")";
        }
    }
};

class ExpressionParser {
public:
    explicit ExpressionParser(std::string_view text) : text_(text) {}

    Expression run() {
        skip_space();
        if (pos_ >= text_.size()) throw ParseError("empty expression", pos_);
        out_.root_ = parse_expr();
        skip_space();
        if (pos_ < text_.size())
            throw ParseError(fmt::format("unexpected '{}'", text_[pos_]), pos_);
        return std::move(out_);
    }

private:
    using Op = Expression::Op;

    std::string_view text_;
    std::size_t pos_ = 0;
    Expression out_;

    void skip_space() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_space();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) {
            if (pos_ >= text_.size()) throw ParseError(fmt::format("expected '{}' but input ended", c), pos_);
            throw ParseError(fmt::format("expected '{}'", c), pos_);
        }
    }

    int binary(Op op, int lhs, int rhs) { return out_.add_node({op, 0.0, lhs, rhs}); }

    int parse_expr() {
        int lhs = parse_term();
        for (;;) {
            if (accept('+')) lhs = binary(Op::add, lhs, parse_term());
            else if (accept('-')) lhs = binary(Op::sub, lhs, parse_term());
            else return lhs;
        }
    }

    int parse_term() {
        int lhs = parse_unary();
        for (;;) {
            if (accept('*')) lhs = binary(Op::mul, lhs, parse_unary());
            else if (accept('/')) lhs = binary(Op::div, lhs, parse_unary());
            else return lhs;
        }
    }

    int parse_unary() {
        if (accept('-')) return out_.add_node({Op::neg, 0.0, parse_unary()});
        return parse_power();
    }

    int parse_power() {
        const int base = parse_primary();
        if (accept('^')) return binary(Op::pow, base, parse_unary());
        return base;
    }

    int parse_primary() {
        skip_space();
        if (pos_ >= text_.size()) throw ParseError("unexpected end of input", pos_);
        const char c = text_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::islower(static_cast<unsigned char>(c))) return parse_identifier();
        if (accept('(')) {
            const int inner = parse_expr();
            expect(')');
            return inner;
        }
        throw ParseError(fmt::format("unexpected '{}'", c), pos_);
    }

    int parse_number() {
        const std::size_t start = pos_;
        auto digits = [&] {
            std::size_t n = 0;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_, ++n;
            return n;
        };
        std::size_t n = digits();
        if (pos_ < text_.size() && text_[pos_] == '.') {
            ++pos_;
            n += digits();
        }
        if (n == 0) throw ParseError("malformed number", start);
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            // Only an exponent if digits follow; otherwise leave 'e' for the caller (e.g. "2exp").
            std::size_t look = pos_ + 1;
            if (look < text_.size() && (text_[look] == '+' || text_[look] == '-')) ++look;
            if (look < text_.size() && std::isdigit(static_cast<unsigned char>(text_[look]))) {
                pos_ = look;
                digits();
            }
        }
        const std::string literal(text_.substr(start, pos_ - start));
        return out_.add_node({Op::constant, std::stod(literal)});
    }

    int parse_identifier() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() && std::islower(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        const std::string_view name = text_.substr(start, pos_ - start);
        if (name == "x") return out_.add_node({Op::variable});
        if (name == "pi") return out_.add_node({Op::constant, M_PI});

        Op op;
        if (name == "sin") op = Op::sin;
        else if (name == "cos") op = Op::cos;
        else if (name == "exp") op = Op::exp;
        else if (name == "log") op = Op::log;
        else if (name == "sqrt") op = Op::sqrt;
        else if (name == "tanh") op = Op::tanh;
        else throw ParseError(fmt::format("unknown identifier '{}'", name), start);

        expect('(');
        const int arg = parse_expr();
        expect(')');
        return out_.add_node({op, 0.0, arg});
    }
};

inline Expression Expression::parse(std::string_view text) { return ExpressionParser(text).run(); }

}  // namespace metree
