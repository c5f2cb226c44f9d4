#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "jetsde/errors.hpp"
#include "jetsde/jet.hpp"

namespace jetsde {

/// Names an expression may refer to: the model's state coordinates,
/// driver variables u1..ud, the time symbol and named constants.
struct SymbolTable {
    std::vector<std::string> states;
    std::vector<std::string> drivers;
    std::string time = "t";
    std::map<std::string, double> constants;

    static SymbolTable for_model(std::size_t n, std::size_t d);
    static std::vector<std::string> default_states(std::size_t n);   // x1..xn
    static std::vector<std::string> default_drivers(std::size_t d);  // u1..ud

    void validate() const;  // unique names, n >= 1
};

struct ExprNode;
using ExprPtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
    enum class Kind { Number, State, Driver, Time, Neg, Add, Sub, Mul, Div, Pow, Call };

    Kind kind;
    double number = 0.0;    // Kind::Number
    std::size_t slot = 0;   // Kind::State / Kind::Driver
    FuncTag func = FuncTag::Sin;  // Kind::Call (Pow uses the Pow kind)
    bool two_arg_pow = false;     // Call "pow(a, b)" lowered onto Kind::Pow
    std::vector<ExprPtr> args;
};

/// Immutable parsed expression.
class ExprAst {
public:
    ExprAst() = default;
    ExprAst(ExprPtr root, std::shared_ptr<const SymbolTable> symbols)
        : root_(std::move(root)), symbols_(std::move(symbols)) {}

    bool empty() const { return root_ == nullptr; }
    const ExprNode& root() const { return *root_; }
    const SymbolTable& symbols() const { return *symbols_; }
    std::shared_ptr<const SymbolTable> symbols_ptr() const { return symbols_; }

    bool uses_driver() const;

private:
    ExprPtr root_;
    std::shared_ptr<const SymbolTable> symbols_;
};

/// Parse `source` against the symbol table. Unknown identifiers, bad arity
/// and malformed syntax are rejected here, with line/column positions.
ExprAst parse(const std::string& source, std::shared_ptr<const SymbolTable> symbols);

/// Canonical printed form; parse(print(parse(s))) reproduces the tree.
std::string print(const ExprAst& ast);

struct RealBindings {
    const double* states = nullptr;
    std::size_t n = 0;
    const double* drivers = nullptr;
    std::size_t d = 0;
    double time = 0.0;
};

struct JetBindings {
    const Jet2* states = nullptr;
    std::size_t n = 0;
    const Jet2* drivers = nullptr;
    std::size_t d = 0;
    const Jet2* time = nullptr;  // constant jet when null
    std::size_t jet_dim = 0;
};

double eval_real(const ExprAst& ast, const RealBindings& env);
Jet2 eval_jet(const ExprAst& ast, const JetBindings& env);

// Convenience wrappers.
double eval_real(const ExprAst& ast, const Vec& states, double t = 0.0);
double eval_real(const ExprAst& ast, const Vec& states, const Vec& drivers, double t);

/// Jet of the expression in the state variables at x (drivers absent):
/// value, gradient and Hessian with respect to the states.
Jet2 state_jet(const ExprAst& ast, const Vec& x, double t = 0.0);

}  // namespace jetsde
