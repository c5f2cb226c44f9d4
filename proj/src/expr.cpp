#include "jetsde/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <set>
#include <utility>

namespace jetsde {

SymbolTable SymbolTable::for_model(std::size_t n, std::size_t d) {
    SymbolTable s;
    s.states = default_states(n);
    s.drivers = default_drivers(d);
    s.validate();
    return s;
}

std::vector<std::string> SymbolTable::default_states(std::size_t n) {
    std::vector<std::string> v;
    for (std::size_t i = 1; i <= n; ++i) v.push_back("x" + std::to_string(i));
    return v;
}

std::vector<std::string> SymbolTable::default_drivers(std::size_t d) {
    std::vector<std::string> v;
    for (std::size_t i = 1; i <= d; ++i) v.push_back("u" + std::to_string(i));
    return v;
}

void SymbolTable::validate() const {
    if (states.empty()) throw ConfigError("symbol table needs at least one state");
    std::set<std::string> seen;
    auto add = [&seen](const std::string& name) {
        if (!seen.insert(name).second) throw ConfigError("duplicate symbol name: " + name);
    };
    for (const auto& s : states) add(s);
    for (const auto& s : drivers) add(s);
    add(time);
    for (const auto& [name, _] : constants) add(name);
}

bool ExprAst::uses_driver() const {
    if (!root_) return false;
    bool found = false;
    auto walk = [&found](auto&& self, const ExprNode& node) -> void {
        if (node.kind == ExprNode::Kind::Driver) found = true;
        for (const auto& c : node.args) self(self, *c);
    };
    walk(walk, *root_);
    return found;
}

namespace {

struct Token {
    enum class Kind { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, Comma, End };
    Kind kind = Kind::End;
    double number = 0.0;
    std::string text;
    std::size_t line = 1, column = 1;
};

class Lexer {
public:
    explicit Lexer(const std::string& src) : src_(src) {}

    Token next() {
        skip_space();
        Token t;
        t.line = line_;
        t.column = column_;
        if (pos_ >= src_.size()) {
            t.kind = Token::Kind::End;
            return t;
        }
        const char c = src_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && pos_ + 1 < src_.size() &&
                                                            std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
            return lex_number(t);
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = pos_;
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
                advance();
            t.kind = Token::Kind::Ident;
            t.text = src_.substr(start, pos_ - start);
            return t;
        }
        advance();
        switch (c) {
            case '+': t.kind = Token::Kind::Plus; return t;
            case '-': t.kind = Token::Kind::Minus; return t;
            case '*': t.kind = Token::Kind::Star; return t;
            case '/': t.kind = Token::Kind::Slash; return t;
            case '^': t.kind = Token::Kind::Caret; return t;
            case '(': t.kind = Token::Kind::LParen; return t;
            case ')': t.kind = Token::Kind::RParen; return t;
            case ',': t.kind = Token::Kind::Comma; return t;
        }
        throw SyntaxError(std::string("unexpected character '") + c + "'", t.line, t.column);
    }

private:
    Token lex_number(Token t) {
        std::size_t start = pos_;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
        if (pos_ < src_.size() && src_[pos_] == '.') {
            advance();
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
        }
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t mark = pos_;
            advance();
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) advance();
            if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
            } else {
                pos_ = mark;  // 'e' was an identifier start, not an exponent
            }
        }
        t.kind = Token::Kind::Number;
        t.number = std::stod(src_.substr(start, pos_ - start));
        return t;
    }

    void skip_space() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) advance();
    }

    void advance() {
        if (src_[pos_] == '\n') {
            ++line_;
            column_ = 1;
        } else {
            ++column_;
        }
        ++pos_;
    }

    const std::string& src_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1, column_ = 1;
};

const std::map<std::string, std::pair<FuncTag, std::size_t>>& function_table() {
    static const std::map<std::string, std::pair<FuncTag, std::size_t>> table = {
        {"sin", {FuncTag::Sin, 1}},   {"cos", {FuncTag::Cos, 1}},   {"tan", {FuncTag::Tan, 1}},
        {"exp", {FuncTag::Exp, 1}},   {"log", {FuncTag::Log, 1}},   {"sqrt", {FuncTag::Sqrt, 1}},
        {"atan", {FuncTag::Atan, 1}}, {"tanh", {FuncTag::Tanh, 1}},
    };
    return table;
}

class Parser {
public:
    Parser(const std::string& src, std::shared_ptr<const SymbolTable> symbols)
        : lexer_(src), symbols_(std::move(symbols)) {
        current_ = lexer_.next();
    }

    ExprAst run() {
        ExprPtr e = expression();
        if (current_.kind != Token::Kind::End)
            throw SyntaxError("trailing input after expression", current_.line, current_.column);
        return ExprAst(std::move(e), symbols_);
    }

private:
    // expression := term (('+'|'-') term)*
    ExprPtr expression() {
        ExprPtr left = term();
        while (current_.kind == Token::Kind::Plus || current_.kind == Token::Kind::Minus) {
            const bool plus = current_.kind == Token::Kind::Plus;
            consume();
            left = binary(plus ? ExprNode::Kind::Add : ExprNode::Kind::Sub, left, term());
        }
        return left;
    }

    // term := factor (('*'|'/') factor)*
    ExprPtr term() {
        ExprPtr left = factor();
        while (current_.kind == Token::Kind::Star || current_.kind == Token::Kind::Slash) {
            const bool mul = current_.kind == Token::Kind::Star;
            consume();
            left = binary(mul ? ExprNode::Kind::Mul : ExprNode::Kind::Div, left, factor());
        }
        return left;
    }

    // factor := '-' factor | power   (unary minus binds below '^')
    ExprPtr factor() {
        if (current_.kind == Token::Kind::Minus) {
            consume();
            auto node = std::make_shared<ExprNode>();
            node->kind = ExprNode::Kind::Neg;
            node->args.push_back(factor());
            return node;
        }
        return power();
    }

    // power := atom ('^' factor)?   (right associative)
    ExprPtr power() {
        ExprPtr base = atom();
        if (current_.kind == Token::Kind::Caret) {
            consume();
            return binary(ExprNode::Kind::Pow, base, factor());
        }
        return base;
    }

    ExprPtr atom() {
        const Token t = current_;
        switch (t.kind) {
            case Token::Kind::Number: {
                consume();
                auto node = std::make_shared<ExprNode>();
                node->kind = ExprNode::Kind::Number;
                node->number = t.number;
                return node;
            }
            case Token::Kind::LParen: {
                consume();
                ExprPtr e = expression();
                expect(Token::Kind::RParen, "')'");
                return e;
            }
            case Token::Kind::Ident:
                consume();
                if (current_.kind == Token::Kind::LParen) return call(t);
                return identifier(t);
            default:
                throw SyntaxError("expected a number, name or '('", t.line, t.column);
        }
    }

    ExprPtr call(const Token& name) {
        consume();  // '('
        std::vector<ExprPtr> args;
        if (current_.kind != Token::Kind::RParen) {
            args.push_back(expression());
            while (current_.kind == Token::Kind::Comma) {
                consume();
                args.push_back(expression());
            }
        }
        expect(Token::Kind::RParen, "')'");

        if (name.text == "pow") {
            if (args.size() != 2)
                throw ArityError("pow expects 2 arguments, got " + std::to_string(args.size()),
                                 name.line, name.column);
            auto node = std::make_shared<ExprNode>();
            node->kind = ExprNode::Kind::Pow;
            node->two_arg_pow = true;
            node->args = std::move(args);
            return node;
        }
        auto it = function_table().find(name.text);
        if (it == function_table().end()) {
            if (name.text == "abs" || name.text == "min" || name.text == "max")
                throw SyntaxError("'" + name.text + "' is not twice differentiable and is not supported",
                                  name.line, name.column);
            throw UnknownSymbolError("unknown function '" + name.text + "'", name.line, name.column);
        }
        if (args.size() != it->second.second)
            throw ArityError(name.text + " expects " + std::to_string(it->second.second) +
                                 " argument(s), got " + std::to_string(args.size()),
                             name.line, name.column);
        auto node = std::make_shared<ExprNode>();
        node->kind = ExprNode::Kind::Call;
        node->func = it->second.first;
        node->args = std::move(args);
        return node;
    }

    ExprPtr identifier(const Token& t) {
        auto node = std::make_shared<ExprNode>();
        const SymbolTable& sym = *symbols_;
        for (std::size_t i = 0; i < sym.states.size(); ++i) {
            if (sym.states[i] == t.text) {
                node->kind = ExprNode::Kind::State;
                node->slot = i;
                return node;
            }
        }
        for (std::size_t i = 0; i < sym.drivers.size(); ++i) {
            if (sym.drivers[i] == t.text) {
                node->kind = ExprNode::Kind::Driver;
                node->slot = i;
                return node;
            }
        }
        if (t.text == sym.time) {
            node->kind = ExprNode::Kind::Time;
            return node;
        }
        auto c = sym.constants.find(t.text);
        if (c != sym.constants.end()) {
            node->kind = ExprNode::Kind::Number;
            node->number = c->second;
            return node;
        }
        throw UnknownSymbolError("unknown symbol '" + t.text + "'", t.line, t.column);
    }

    static ExprPtr binary(ExprNode::Kind kind, ExprPtr l, ExprPtr r) {
        auto node = std::make_shared<ExprNode>();
        node->kind = kind;
        node->args = {std::move(l), std::move(r)};
        return node;
    }

    void expect(Token::Kind kind, const char* what) {
        if (current_.kind != kind)
            throw SyntaxError(std::string("expected ") + what, current_.line, current_.column);
        consume();
    }

    void consume() { current_ = lexer_.next(); }

    Lexer lexer_;
    std::shared_ptr<const SymbolTable> symbols_;
    Token current_;
};

const char* func_name(FuncTag f) {
    switch (f) {
        case FuncTag::Sin: return "sin";
        case FuncTag::Cos: return "cos";
        case FuncTag::Tan: return "tan";
        case FuncTag::Exp: return "exp";
        case FuncTag::Log: return "log";
        case FuncTag::Sqrt: return "sqrt";
        case FuncTag::Atan: return "atan";
        case FuncTag::Tanh: return "tanh";
    }
    return "?";
}

int precedence(ExprNode::Kind k) {
    switch (k) {
        case ExprNode::Kind::Add:
        case ExprNode::Kind::Sub: return 1;
        case ExprNode::Kind::Mul:
        case ExprNode::Kind::Div: return 2;
        case ExprNode::Kind::Neg: return 3;
        case ExprNode::Kind::Pow: return 4;
        default: return 5;
    }
}

void print_node(const ExprNode& node, const SymbolTable& sym, std::string& out) {
    auto child = [&](const ExprNode& c, int min_prec) {
        const bool parens = precedence(c.kind) < min_prec;
        if (parens) out += '(';
        print_node(c, sym, out);
        if (parens) out += ')';
    };
    switch (node.kind) {
        case ExprNode::Kind::Number: {
            char buf[40];
            std::snprintf(buf, sizeof(buf), "%.17g", node.number);
            out += buf;
            return;
        }
        case ExprNode::Kind::State: out += sym.states[node.slot]; return;
        case ExprNode::Kind::Driver: out += sym.drivers[node.slot]; return;
        case ExprNode::Kind::Time: out += sym.time; return;
        case ExprNode::Kind::Neg:
            out += '-';
            child(*node.args[0], 3);
            return;
        case ExprNode::Kind::Add:
            child(*node.args[0], 1);
            out += " + ";
            child(*node.args[1], 2);
            return;
        case ExprNode::Kind::Sub:
            child(*node.args[0], 1);
            out += " - ";
            child(*node.args[1], 2);
            return;
        case ExprNode::Kind::Mul:
            child(*node.args[0], 2);
            out += "*";
            child(*node.args[1], 3);
            return;
        case ExprNode::Kind::Div:
            child(*node.args[0], 2);
            out += "/";
            child(*node.args[1], 3);
            return;
        case ExprNode::Kind::Pow:
            child(*node.args[0], 5);
            out += "^";
            child(*node.args[1], 4);
            return;
        case ExprNode::Kind::Call:
            out += func_name(node.func);
            out += '(';
            print_node(*node.args[0], sym, out);
            out += ')';
            return;
    }
}

// One tree walk serves both scalar types; Ops supplies the arithmetic.
struct RealOps {
    using value_type = double;
    const RealBindings& env;

    double number(double v) const { return v; }
    double state(std::size_t i) const {
        if (i >= env.n) throw ShapeError("state binding missing");
        return env.states[i];
    }
    double driver(std::size_t i) const {
        if (env.drivers == nullptr || i >= env.d)
            throw ShapeError("driver variable used without a driver binding");
        return env.drivers[i];
    }
    double time() const { return env.time; }
    double neg(double a) const { return -a; }
    double add(double a, double b) const { return a + b; }
    double sub(double a, double b) const { return a - b; }
    double mul(double a, double b) const { return a * b; }
    double div(double a, double b) const {
        if (b == 0.0) throw DomainError("division by zero");
        return a / b;
    }
    double pow(double a, double b) const {
        if (a == 0.0 && b < 0.0) throw DomainError("zero base with negative exponent");
        if (a < 0.0 && b != std::floor(b))
            throw DomainError("fractional power of negative base " + std::to_string(a));
        return std::pow(a, b);
    }
    double call(FuncTag f, double a) const {
        switch (f) {
            case FuncTag::Sin: return std::sin(a);
            case FuncTag::Cos: return std::cos(a);
            case FuncTag::Tan:
                if (std::cos(a) == 0.0) throw DomainError("tan at a pole");
                return std::tan(a);
            case FuncTag::Exp: return std::exp(a);
            case FuncTag::Log:
                if (a <= 0.0) throw DomainError("log of non-positive value " + std::to_string(a));
                return std::log(a);
            case FuncTag::Sqrt:
                if (a < 0.0) throw DomainError("sqrt of negative value " + std::to_string(a));
                return std::sqrt(a);
            case FuncTag::Atan: return std::atan(a);
            case FuncTag::Tanh: return std::tanh(a);
        }
        throw Error("unhandled function tag");
    }
    bool is_constant(double) const { return true; }
    double constant_value(double v) const { return v; }
};

struct JetOps {
    using value_type = Jet2;
    const JetBindings& env;

    Jet2 number(double v) const { return Jet2::constant(v, env.jet_dim); }
    Jet2 state(std::size_t i) const {
        if (i >= env.n) throw ShapeError("state binding missing");
        return env.states[i];
    }
    Jet2 driver(std::size_t i) const {
        if (env.drivers == nullptr || i >= env.d)
            throw ShapeError("driver variable used without a driver binding");
        return env.drivers[i];
    }
    Jet2 time() const { return env.time ? *env.time : Jet2::constant(0.0, env.jet_dim); }
    Jet2 neg(const Jet2& a) const { return -a; }
    Jet2 add(const Jet2& a, const Jet2& b) const { return a + b; }
    Jet2 sub(const Jet2& a, const Jet2& b) const { return a - b; }
    Jet2 mul(const Jet2& a, const Jet2& b) const { return a * b; }
    Jet2 div(const Jet2& a, const Jet2& b) const { return a / b; }
    Jet2 pow(const Jet2& a, const Jet2& b) const {
        if (b.derivatives_zero()) return jet_pow(a, b.value);
        // general power: exp(b log a), positive base required
        return jet_apply(FuncTag::Exp, b * jet_apply(FuncTag::Log, a));
    }
    Jet2 call(FuncTag f, const Jet2& a) const { return jet_apply(f, a); }
};

template <typename Ops>
typename Ops::value_type eval_node(const ExprNode& node, const Ops& ops) {
    switch (node.kind) {
        case ExprNode::Kind::Number: return ops.number(node.number);
        case ExprNode::Kind::State: return ops.state(node.slot);
        case ExprNode::Kind::Driver: return ops.driver(node.slot);
        case ExprNode::Kind::Time: return ops.time();
        case ExprNode::Kind::Neg: return ops.neg(eval_node(*node.args[0], ops));
        case ExprNode::Kind::Add:
            return ops.add(eval_node(*node.args[0], ops), eval_node(*node.args[1], ops));
        case ExprNode::Kind::Sub:
            return ops.sub(eval_node(*node.args[0], ops), eval_node(*node.args[1], ops));
        case ExprNode::Kind::Mul:
            return ops.mul(eval_node(*node.args[0], ops), eval_node(*node.args[1], ops));
        case ExprNode::Kind::Div:
            return ops.div(eval_node(*node.args[0], ops), eval_node(*node.args[1], ops));
        case ExprNode::Kind::Pow:
            return ops.pow(eval_node(*node.args[0], ops), eval_node(*node.args[1], ops));
        case ExprNode::Kind::Call: return ops.call(node.func, eval_node(*node.args[0], ops));
    }
    throw Error("unhandled expression node");
}

}  // namespace

ExprAst parse(const std::string& source, std::shared_ptr<const SymbolTable> symbols) {
    symbols->validate();
    return Parser(source, std::move(symbols)).run();
}

std::string print(const ExprAst& ast) {
    std::string out;
    print_node(ast.root(), ast.symbols(), out);
    return out;
}

double eval_real(const ExprAst& ast, const RealBindings& env) {
    return eval_node(ast.root(), RealOps{env});
}

Jet2 eval_jet(const ExprAst& ast, const JetBindings& env) {
    return eval_node(ast.root(), JetOps{env});
}

double eval_real(const ExprAst& ast, const Vec& states, double t) {
    RealBindings env;
    env.states = states.data();
    env.n = static_cast<std::size_t>(states.size());
    env.time = t;
    return eval_real(ast, env);
}

double eval_real(const ExprAst& ast, const Vec& states, const Vec& drivers, double t) {
    RealBindings env;
    env.states = states.data();
    env.n = static_cast<std::size_t>(states.size());
    env.drivers = drivers.data();
    env.d = static_cast<std::size_t>(drivers.size());
    env.time = t;
    return eval_real(ast, env);
}

Jet2 state_jet(const ExprAst& ast, const Vec& x, double t) {
    const std::size_t n = static_cast<std::size_t>(x.size());
    std::vector<Jet2> seeds;
    seeds.reserve(n);
    for (std::size_t i = 0; i < n; ++i) seeds.push_back(Jet2::variable(x[i], i, n));
    const Jet2 tj = Jet2::constant(t, n);
    JetBindings env;
    env.states = seeds.data();
    env.n = n;
    env.time = &tj;
    env.jet_dim = n;
    return eval_jet(ast, env);
}

}  // namespace jetsde
