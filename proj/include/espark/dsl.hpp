#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "espark/types.hpp"

namespace espark {
namespace dsl {

struct SourceLocation {
    int line = 1;
    int column = 1;
};

struct Diagnostic {
    SourceLocation loc;
    std::string message;
};

class ParseError : public std::runtime_error {
public:
    ParseError(SourceLocation loc, const std::string& message)
        : std::runtime_error("parse error at " + std::to_string(loc.line) + ":" +
                             std::to_string(loc.column) + ": " + message),
          loc(loc) {}
    SourceLocation loc;
};

/// Raised when a program exceeds the source/size/depth caps.
class ResourceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised during evaluation (division by zero, non-finite result);
/// callers treat the owning candidate as non-executable.
class EvalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class BinaryOp { Add, Sub, Mul, Div, Lt, Le, Gt, Ge, Eq, Ne, And, Or };
enum class UnaryOp { Neg, Not };
enum class Builtin { Min, Max, Abs, Floor, Ceil, Clamp };

struct Node {
    enum class Kind { Number, Ident, Unary, Binary, If, Call } kind;
    SourceLocation loc;
    double number = 0.0;
    std::string ident;
    int slot = -1;  // resolved binding index; -1 when unknown
    UnaryOp uop{};
    BinaryOp bop{};
    Builtin fn{};
    std::vector<int> children;
};

/// Names a program may reference: every Observation field plus the
/// candidate-action bindings.
inline constexpr std::array<std::string_view, 15> kBindings = {
    "in_stock",       "in_transit",        "mean_demand",     "last_demand",
    "unit_price",     "unit_cost",         "holding_cost_rate", "backlog_cost_rate",
    "capacity_remaining", "echelon_index", "sku_index",       "step_fraction",
    "action_multiplier", "action_index",   "action_quantity"};

using EvalContext = std::array<double, kBindings.size()>;

inline constexpr std::size_t kMaxSourceBytes = 64 * 1024;
inline constexpr int kMaxDepth = 64;
inline constexpr int kMaxNodes = 4096;

/// A parsed exploration-function program. Immutable after parse;
/// evaluation is pure, so instances are freely shared across workers.
struct MaskProgram {
    std::string source;
    std::vector<Node> nodes;
    int root = -1;

    std::vector<std::string> free_identifiers() const;
    bool structurally_equal(const MaskProgram& other) const;
};

/// Recursive-descent parse of the published grammar (grammar_text()).
/// Throws ParseError with location; ResourceError on cap violations.
MaskProgram parse(std::string_view source);

/// Static admissibility: unknown identifiers, literal division by zero,
/// wrong builtin arity. Empty result == admissible.
std::vector<Diagnostic> check(const MaskProgram& prog);

/// Evaluates one binding context to a number. Division by zero or a
/// non-finite result throws EvalError.
double evaluate_scalar(const MaskProgram& prog, const EvalContext& ctx);

/// Builds the per-action mask for one observation: allow[a] is true iff
/// the program evaluates to a nonzero value with (action_index = a,
/// action_multiplier = m_a, action_quantity = round(m_a * mean_demand)).
ActionMask evaluate(const MaskProgram& prog, const Observation& obs,
                    const std::vector<double>& action_multipliers);

EvalContext make_context(const Observation& obs);

/// Deterministic canonical rendering; parse(format(p)) is structurally
/// equal to p.
std::string format(const MaskProgram& prog);

/// The grammar, verbatim as published in the docs and embedded in the
/// generation prompt.
std::string_view grammar_text();

}  // namespace dsl
}  // namespace espark
