#include "espark/dsl.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <sstream>

namespace espark {
namespace dsl {

namespace {

enum class TokenKind {
    Number,
    Ident,
    KwIf,
    KwThen,
    KwElse,
    KwAnd,
    KwOr,
    KwNot,
    Plus,
    Minus,
    Star,
    Slash,
    Lt,
    Le,
    Gt,
    Ge,
    EqEq,
    Ne,
    LParen,
    RParen,
    Comma,
    End,
};

struct Token {
    TokenKind kind;
    SourceLocation loc;
    double number = 0.0;
    std::string text;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    Token next() {
        skip_ws();
        Token tok;
        tok.loc = loc_;
        if (pos_ >= src_.size()) {
            tok.kind = TokenKind::End;
            return tok;
        }
        const char c = src_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && pos_ + 1 < src_.size() &&
             std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
            return lex_number();
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            return lex_ident();
        }
        switch (c) {
            case '+': advance(); tok.kind = TokenKind::Plus; return tok;
            case '-': advance(); tok.kind = TokenKind::Minus; return tok;
            case '*': advance(); tok.kind = TokenKind::Star; return tok;
            case '/': advance(); tok.kind = TokenKind::Slash; return tok;
            case '(': advance(); tok.kind = TokenKind::LParen; return tok;
            case ')': advance(); tok.kind = TokenKind::RParen; return tok;
            case ',': advance(); tok.kind = TokenKind::Comma; return tok;
            case '<':
                advance();
                if (peek() == '=') { advance(); tok.kind = TokenKind::Le; }
                else tok.kind = TokenKind::Lt;
                return tok;
            case '>':
                advance();
                if (peek() == '=') { advance(); tok.kind = TokenKind::Ge; }
                else tok.kind = TokenKind::Gt;
                return tok;
            case '=':
                advance();
                if (peek() == '=') { advance(); tok.kind = TokenKind::EqEq; return tok; }
                throw ParseError(tok.loc, "expected '==' (assignment is not part of the language)");
            case '!':
                advance();
                if (peek() == '=') { advance(); tok.kind = TokenKind::Ne; return tok; }
                throw ParseError(tok.loc, "expected '!='");
            default:
                throw ParseError(tok.loc, std::string("unexpected character '") + c + "'");
        }
    }

private:
    char peek() const { return pos_ < src_.size() ? src_[pos_] : '\0'; }

    void advance() {
        if (src_[pos_] == '\n') {
            ++loc_.line;
            loc_.column = 1;
        } else {
            ++loc_.column;
        }
        ++pos_;
    }

    void skip_ws() {
        while (pos_ < src_.size()) {
            const char c = src_[pos_];
            if (c == '#') {  // comment to end of line
                while (pos_ < src_.size() && src_[pos_] != '\n') advance();
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                advance();
            } else {
                break;
            }
        }
    }

    Token lex_number() {
        Token tok;
        tok.loc = loc_;
        const std::size_t start = pos_;
        while (pos_ < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[pos_])) ||
                                      src_[pos_] == '.')) {
            advance();
        }
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t mark = pos_;
            advance();
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) advance();
            if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_])))
                    advance();
            } else {
                // Not an exponent after all; rewind is impossible with
                // location tracking, so reject outright.
                (void)mark;
                throw ParseError(tok.loc, "malformed number literal");
            }
        }
        const std::string text(src_.substr(start, pos_ - start));
        char* end = nullptr;
        tok.number = std::strtod(text.c_str(), &end);
        if (end != text.c_str() + text.size() || !std::isfinite(tok.number))
            throw ParseError(tok.loc, "malformed number literal '" + text + "'");
        tok.kind = TokenKind::Number;
        tok.text = text;
        return tok;
    }

    Token lex_ident() {
        Token tok;
        tok.loc = loc_;
        const std::size_t start = pos_;
        while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
                                      src_[pos_] == '_')) {
            advance();
        }
        tok.text = std::string(src_.substr(start, pos_ - start));
        if (tok.text == "if") tok.kind = TokenKind::KwIf;
        else if (tok.text == "then") tok.kind = TokenKind::KwThen;
        else if (tok.text == "else") tok.kind = TokenKind::KwElse;
        else if (tok.text == "and") tok.kind = TokenKind::KwAnd;
        else if (tok.text == "or") tok.kind = TokenKind::KwOr;
        else if (tok.text == "not") tok.kind = TokenKind::KwNot;
        else tok.kind = TokenKind::Ident;
        return tok;
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    SourceLocation loc_;
};

int binding_slot(std::string_view name) {
    for (std::size_t i = 0; i < kBindings.size(); ++i)
        if (kBindings[i] == name) return static_cast<int>(i);
    return -1;
}

struct BuiltinInfo {
    std::string_view name;
    Builtin fn;
    int arity;
};

constexpr std::array<BuiltinInfo, 6> kBuiltins = {{
    {"min", Builtin::Min, 2},
    {"max", Builtin::Max, 2},
    {"abs", Builtin::Abs, 1},
    {"floor", Builtin::Floor, 1},
    {"ceil", Builtin::Ceil, 1},
    {"clamp", Builtin::Clamp, 3},
}};

const BuiltinInfo* builtin_by_name(std::string_view name) {
    for (const auto& b : kBuiltins)
        if (b.name == name) return &b;
    return nullptr;
}

class Parser {
public:
    Parser(std::string_view source, MaskProgram& out) : lexer_(source), prog_(out) {
        tok_ = lexer_.next();
    }

    void run() {
        prog_.root = parse_expr(0);
        expect(TokenKind::End, "end of input");
    }

private:
    [[noreturn]] void fail(const std::string& message) { throw ParseError(tok_.loc, message); }

    void bump() { tok_ = lexer_.next(); }

    void expect(TokenKind kind, const std::string& what) {
        if (tok_.kind != kind) fail("expected " + what);
        if (kind != TokenKind::End) bump();
    }

    int add_node(Node node) {
        if (static_cast<int>(prog_.nodes.size()) >= kMaxNodes)
            throw ResourceError("program exceeds the node limit");
        prog_.nodes.push_back(std::move(node));
        return static_cast<int>(prog_.nodes.size()) - 1;
    }

    // grammar recursion guard (protects the stack); the tree-depth cap
    // proper is enforced after parsing
    static constexpr int kMaxParseRecursion = 1024;
    struct DepthGuard {
        explicit DepthGuard(int& depth) : depth_(depth) {
            if (++depth_ > kMaxParseRecursion)
                throw ResourceError("program exceeds the depth limit");
        }
        ~DepthGuard() { --depth_; }
        int& depth_;
    };

    int parse_expr(int) { return parse_or(); }

    int parse_or() {
        DepthGuard guard(depth_);
        int lhs = parse_and();
        while (tok_.kind == TokenKind::KwOr) {
            Node n;
            n.kind = Node::Kind::Binary;
            n.bop = BinaryOp::Or;
            n.loc = tok_.loc;
            bump();
            int rhs = parse_and();
            n.children = {lhs, rhs};
            lhs = add_node(std::move(n));
        }
        return lhs;
    }

    int parse_and() {
        DepthGuard guard(depth_);
        int lhs = parse_not();
        while (tok_.kind == TokenKind::KwAnd) {
            Node n;
            n.kind = Node::Kind::Binary;
            n.bop = BinaryOp::And;
            n.loc = tok_.loc;
            bump();
            int rhs = parse_not();
            n.children = {lhs, rhs};
            lhs = add_node(std::move(n));
        }
        return lhs;
    }

    int parse_not() {
        DepthGuard guard(depth_);
        if (tok_.kind == TokenKind::KwNot) {
            Node n;
            n.kind = Node::Kind::Unary;
            n.uop = UnaryOp::Not;
            n.loc = tok_.loc;
            bump();
            n.children = {parse_not()};
            return add_node(std::move(n));
        }
        return parse_cmp();
    }

    int parse_cmp() {
        DepthGuard guard(depth_);
        int lhs = parse_sum();
        BinaryOp op;
        switch (tok_.kind) {
            case TokenKind::Lt: op = BinaryOp::Lt; break;
            case TokenKind::Le: op = BinaryOp::Le; break;
            case TokenKind::Gt: op = BinaryOp::Gt; break;
            case TokenKind::Ge: op = BinaryOp::Ge; break;
            case TokenKind::EqEq: op = BinaryOp::Eq; break;
            case TokenKind::Ne: op = BinaryOp::Ne; break;
            default: return lhs;
        }
        Node n;
        n.kind = Node::Kind::Binary;
        n.bop = op;
        n.loc = tok_.loc;
        bump();
        int rhs = parse_sum();
        n.children = {lhs, rhs};
        return add_node(std::move(n));
    }

    int parse_sum() {
        DepthGuard guard(depth_);
        int lhs = parse_prod();
        while (tok_.kind == TokenKind::Plus || tok_.kind == TokenKind::Minus) {
            Node n;
            n.kind = Node::Kind::Binary;
            n.bop = tok_.kind == TokenKind::Plus ? BinaryOp::Add : BinaryOp::Sub;
            n.loc = tok_.loc;
            bump();
            int rhs = parse_prod();
            n.children = {lhs, rhs};
            lhs = add_node(std::move(n));
        }
        return lhs;
    }

    int parse_prod() {
        DepthGuard guard(depth_);
        int lhs = parse_unary();
        while (tok_.kind == TokenKind::Star || tok_.kind == TokenKind::Slash) {
            Node n;
            n.kind = Node::Kind::Binary;
            n.bop = tok_.kind == TokenKind::Star ? BinaryOp::Mul : BinaryOp::Div;
            n.loc = tok_.loc;
            bump();
            int rhs = parse_unary();
            n.children = {lhs, rhs};
            lhs = add_node(std::move(n));
        }
        return lhs;
    }

    int parse_unary() {
        DepthGuard guard(depth_);
        if (tok_.kind == TokenKind::Minus) {
            Node n;
            n.kind = Node::Kind::Unary;
            n.uop = UnaryOp::Neg;
            n.loc = tok_.loc;
            bump();
            n.children = {parse_unary()};
            return add_node(std::move(n));
        }
        return parse_atom();
    }

    int parse_atom() {
        DepthGuard guard(depth_);
        switch (tok_.kind) {
            case TokenKind::Number: {
                Node n;
                n.kind = Node::Kind::Number;
                n.number = tok_.number;
                n.loc = tok_.loc;
                bump();
                return add_node(std::move(n));
            }
            case TokenKind::Ident: {
                Node n;
                n.loc = tok_.loc;
                n.ident = tok_.text;
                bump();
                if (tok_.kind == TokenKind::LParen) {
                    n.kind = Node::Kind::Call;
                    if (const BuiltinInfo* info = builtin_by_name(n.ident)) n.fn = info->fn;
                    bump();
                    if (tok_.kind != TokenKind::RParen) {
                        n.children.push_back(parse_expr(0));
                        while (tok_.kind == TokenKind::Comma) {
                            bump();
                            n.children.push_back(parse_expr(0));
                        }
                    }
                    expect(TokenKind::RParen, "')'");
                    return add_node(std::move(n));
                }
                n.kind = Node::Kind::Ident;
                n.slot = binding_slot(n.ident);
                return add_node(std::move(n));
            }
            case TokenKind::LParen: {
                bump();
                int inner = parse_expr(0);
                expect(TokenKind::RParen, "')'");
                return inner;
            }
            case TokenKind::KwIf: {
                Node n;
                n.kind = Node::Kind::If;
                n.loc = tok_.loc;
                bump();
                int cond = parse_expr(0);
                expect(TokenKind::KwThen, "'then'");
                int then_branch = parse_expr(0);
                expect(TokenKind::KwElse, "'else'");
                int else_branch = parse_expr(0);
                n.children = {cond, then_branch, else_branch};
                return add_node(std::move(n));
            }
            case TokenKind::End:
                fail("unexpected end of input");
            default:
                fail("expected a number, identifier, call, '(', or 'if'");
        }
    }

    Lexer lexer_;
    Token tok_;
    MaskProgram& prog_;
    int depth_ = 0;
};

double truthy(double v) { return v != 0.0 ? 1.0 : 0.0; }

}  // namespace

namespace {

int tree_depth(const MaskProgram& prog, int index) {
    const Node& n = prog.nodes[index];
    int deepest = 0;
    for (int child : n.children) deepest = std::max(deepest, tree_depth(prog, child));
    return deepest + 1;
}

}  // namespace

MaskProgram parse(std::string_view source) {
    if (source.size() > kMaxSourceBytes) throw ResourceError("program source exceeds 64 KiB");
    MaskProgram prog;
    prog.source = std::string(source);
    Parser parser(source, prog);
    parser.run();
    if (tree_depth(prog, prog.root) > kMaxDepth)
        throw ResourceError("program exceeds the depth limit");
    return prog;
}

std::vector<std::string> MaskProgram::free_identifiers() const {
    std::vector<std::string> names;
    for (const Node& n : nodes) {
        if (n.kind == Node::Kind::Ident &&
            std::find(names.begin(), names.end(), n.ident) == names.end()) {
            names.push_back(n.ident);
        }
    }
    std::sort(names.begin(), names.end());
    return names;
}

bool MaskProgram::structurally_equal(const MaskProgram& other) const {
    struct Cmp {
        const MaskProgram& a;
        const MaskProgram& b;
        bool eq(int ia, int ib) const {
            const Node& na = a.nodes[ia];
            const Node& nb = b.nodes[ib];
            if (na.kind != nb.kind || na.children.size() != nb.children.size()) return false;
            switch (na.kind) {
                case Node::Kind::Number:
                    if (na.number != nb.number) return false;
                    break;
                case Node::Kind::Ident:
                    if (na.ident != nb.ident) return false;
                    break;
                case Node::Kind::Unary:
                    if (na.uop != nb.uop) return false;
                    break;
                case Node::Kind::Binary:
                    if (na.bop != nb.bop) return false;
                    break;
                case Node::Kind::Call:
                    if (na.ident != nb.ident) return false;
                    break;
                case Node::Kind::If:
                    break;
            }
            for (std::size_t i = 0; i < na.children.size(); ++i)
                if (!eq(na.children[i], nb.children[i])) return false;
            return true;
        }
    };
    if (root < 0 || other.root < 0) return root == other.root;
    return Cmp{*this, other}.eq(root, other.root);
}

std::vector<Diagnostic> check(const MaskProgram& prog) {
    std::vector<Diagnostic> diags;
    for (const Node& n : prog.nodes) {
        switch (n.kind) {
            case Node::Kind::Ident:
                if (n.slot < 0)
                    diags.push_back({n.loc, "unknown identifier '" + n.ident + "'"});
                break;
            case Node::Kind::Call: {
                const BuiltinInfo* info = builtin_by_name(n.ident);
                if (!info) {
                    diags.push_back({n.loc, "unknown function '" + n.ident + "'"});
                } else if (static_cast<int>(n.children.size()) != info->arity) {
                    diags.push_back({n.loc, "'" + n.ident + "' takes " +
                                                std::to_string(info->arity) + " argument(s), got " +
                                                std::to_string(n.children.size())});
                }
                break;
            }
            case Node::Kind::Binary:
                if (n.bop == BinaryOp::Div) {
                    const Node& rhs = prog.nodes[n.children[1]];
                    if (rhs.kind == Node::Kind::Number && rhs.number == 0.0)
                        diags.push_back({n.loc, "division by literal zero"});
                }
                break;
            default:
                break;
        }
    }
    return diags;
}

namespace {

double eval_node(const MaskProgram& prog, int index, const EvalContext& ctx) {
    const Node& n = prog.nodes[index];
    switch (n.kind) {
        case Node::Kind::Number:
            return n.number;
        case Node::Kind::Ident:
            if (n.slot < 0) throw EvalError("unbound identifier '" + n.ident + "'");
            return ctx[static_cast<std::size_t>(n.slot)];
        case Node::Kind::Unary: {
            const double v = eval_node(prog, n.children[0], ctx);
            return n.uop == UnaryOp::Neg ? -v : (v == 0.0 ? 1.0 : 0.0);
        }
        case Node::Kind::Binary: {
            const double a = eval_node(prog, n.children[0], ctx);
            const double b = eval_node(prog, n.children[1], ctx);
            switch (n.bop) {
                case BinaryOp::Add: return a + b;
                case BinaryOp::Sub: return a - b;
                case BinaryOp::Mul: return a * b;
                case BinaryOp::Div:
                    if (b == 0.0) throw EvalError("division by zero");
                    return a / b;
                case BinaryOp::Lt: return a < b ? 1.0 : 0.0;
                case BinaryOp::Le: return a <= b ? 1.0 : 0.0;
                case BinaryOp::Gt: return a > b ? 1.0 : 0.0;
                case BinaryOp::Ge: return a >= b ? 1.0 : 0.0;
                case BinaryOp::Eq: return a == b ? 1.0 : 0.0;
                case BinaryOp::Ne: return a != b ? 1.0 : 0.0;
                case BinaryOp::And: return truthy(a) * truthy(b);
                case BinaryOp::Or: return (a != 0.0 || b != 0.0) ? 1.0 : 0.0;
            }
            return 0.0;
        }
        case Node::Kind::If:
            return eval_node(prog, n.children[0], ctx) != 0.0
                       ? eval_node(prog, n.children[1], ctx)
                       : eval_node(prog, n.children[2], ctx);
        case Node::Kind::Call: {
            switch (n.fn) {
                case Builtin::Min:
                    return std::min(eval_node(prog, n.children[0], ctx),
                                    eval_node(prog, n.children[1], ctx));
                case Builtin::Max:
                    return std::max(eval_node(prog, n.children[0], ctx),
                                    eval_node(prog, n.children[1], ctx));
                case Builtin::Abs:
                    return std::abs(eval_node(prog, n.children[0], ctx));
                case Builtin::Floor:
                    return std::floor(eval_node(prog, n.children[0], ctx));
                case Builtin::Ceil:
                    return std::ceil(eval_node(prog, n.children[0], ctx));
                case Builtin::Clamp: {
                    const double v = eval_node(prog, n.children[0], ctx);
                    const double lo = eval_node(prog, n.children[1], ctx);
                    const double hi = eval_node(prog, n.children[2], ctx);
                    return std::min(std::max(v, lo), hi);
                }
            }
            return 0.0;
        }
    }
    return 0.0;
}

}  // namespace

double evaluate_scalar(const MaskProgram& prog, const EvalContext& ctx) {
    if (prog.root < 0) throw EvalError("empty program");
    const double v = eval_node(prog, prog.root, ctx);
    if (!std::isfinite(v)) throw EvalError("non-finite result");
    return v;
}

EvalContext make_context(const Observation& obs) {
    EvalContext ctx{};
    ctx[0] = static_cast<double>(obs.in_stock);
    ctx[1] = static_cast<double>(obs.in_transit);
    ctx[2] = obs.mean_demand;
    ctx[3] = static_cast<double>(obs.last_demand);
    ctx[4] = obs.unit_price.to_f64();
    ctx[5] = obs.unit_cost.to_f64();
    ctx[6] = obs.holding_cost_rate.to_f64();
    ctx[7] = obs.backlog_cost_rate.to_f64();
    ctx[8] = static_cast<double>(obs.capacity_remaining);
    ctx[9] = static_cast<double>(obs.echelon_index);
    ctx[10] = static_cast<double>(obs.sku_index);
    ctx[11] = obs.step_fraction;
    return ctx;
}

ActionMask evaluate(const MaskProgram& prog, const Observation& obs,
                    const std::vector<double>& action_multipliers) {
    EvalContext ctx = make_context(obs);
    ActionMask mask;
    mask.allow.resize(action_multipliers.size());
    for (std::size_t a = 0; a < action_multipliers.size(); ++a) {
        ctx[12] = action_multipliers[a];
        ctx[13] = static_cast<double>(a);
        ctx[14] = static_cast<double>(action_quantity(action_multipliers[a], obs.mean_demand));
        mask.allow[a] = evaluate_scalar(prog, ctx) != 0.0;
    }
    return mask;
}

namespace {

int precedence_of(const MaskProgram& prog, int index) {
    const Node& n = prog.nodes[index];
    switch (n.kind) {
        case Node::Kind::Binary:
            switch (n.bop) {
                case BinaryOp::Or: return 1;
                case BinaryOp::And: return 2;
                case BinaryOp::Lt:
                case BinaryOp::Le:
                case BinaryOp::Gt:
                case BinaryOp::Ge:
                case BinaryOp::Eq:
                case BinaryOp::Ne: return 4;
                case BinaryOp::Add:
                case BinaryOp::Sub: return 5;
                case BinaryOp::Mul:
                case BinaryOp::Div: return 6;
            }
            return 0;
        case Node::Kind::Unary: return n.uop == UnaryOp::Not ? 3 : 7;
        case Node::Kind::If: return 0;  // always parenthesized below
        default: return 8;
    }
}

std::string_view op_text(BinaryOp op) {
    switch (op) {
        case BinaryOp::Add: return "+";
        case BinaryOp::Sub: return "-";
        case BinaryOp::Mul: return "*";
        case BinaryOp::Div: return "/";
        case BinaryOp::Lt: return "<";
        case BinaryOp::Le: return "<=";
        case BinaryOp::Gt: return ">";
        case BinaryOp::Ge: return ">=";
        case BinaryOp::Eq: return "==";
        case BinaryOp::Ne: return "!=";
        case BinaryOp::And: return "and";
        case BinaryOp::Or: return "or";
    }
    return "?";
}

std::string number_text(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void format_node(const MaskProgram& prog, int index, int parent_prec, std::string& out) {
    const Node& n = prog.nodes[index];
    const int prec = precedence_of(prog, index);
    const bool parens = prec < parent_prec || n.kind == Node::Kind::If;
    if (parens) out += '(';
    switch (n.kind) {
        case Node::Kind::Number:
            out += number_text(n.number);
            break;
        case Node::Kind::Ident:
            out += n.ident;
            break;
        case Node::Kind::Unary:
            if (n.uop == UnaryOp::Not) {
                out += "not ";
                format_node(prog, n.children[0], 3, out);
            } else {
                out += '-';
                // parenthesize a nested sign so "--x" never appears
                format_node(prog, n.children[0], 8, out);
            }
            break;
        case Node::Kind::Binary: {
            // left-associative chain: left child may share the level,
            // right child must bind tighter; comparisons do not chain at
            // all, so both sides get the tighter context
            const bool comparison = prec == 4;
            format_node(prog, n.children[0], comparison ? prec + 1 : prec, out);
            out += ' ';
            out += op_text(n.bop);
            out += ' ';
            format_node(prog, n.children[1], prec + 1, out);
            break;
        }
        case Node::Kind::If:
            out += "if ";
            format_node(prog, n.children[0], 0, out);
            out += " then ";
            format_node(prog, n.children[1], 0, out);
            out += " else ";
            format_node(prog, n.children[2], 0, out);
            break;
        case Node::Kind::Call: {
            out += n.ident;
            out += '(';
            for (std::size_t i = 0; i < n.children.size(); ++i) {
                if (i > 0) out += ", ";
                format_node(prog, n.children[i], 0, out);
            }
            out += ')';
            break;
        }
    }
    if (parens) out += ')';
}

}  // namespace

std::string format(const MaskProgram& prog) {
    if (prog.root < 0) return "";
    std::string out;
    format_node(prog, prog.root, 0, out);
    return out;
}

std::string_view grammar_text() {
    return R"(expr  := or
or    := and ('or' and)*
and   := not ('and' not)*
not   := 'not' not | cmp
cmp   := sum (('<' | '<=' | '>' | '>=' | '==' | '!=') sum)?
sum   := prod (('+' | '-') prod)*
prod  := unary (('*' | '/') unary)*
unary := '-' unary | atom
atom  := number | identifier | call | '(' expr ')'
       | 'if' expr 'then' expr 'else' expr
call  := ('min' | 'max') '(' expr ',' expr ')'
       | ('abs' | 'floor' | 'ceil') '(' expr ')'
       | 'clamp' '(' expr ',' expr ',' expr ')'

A nonzero result allows the action, zero denies it. Comparisons and
boolean operators yield 1 or 0. '#' starts a comment to end of line.

Available identifiers (per observation): in_stock, in_transit,
mean_demand, last_demand, unit_price, unit_cost, holding_cost_rate,
backlog_cost_rate, capacity_remaining, echelon_index, sku_index,
step_fraction. Per candidate action: action_index, action_multiplier,
action_quantity (= round(action_multiplier * mean_demand)).)";
}

}  // namespace dsl
}  // namespace espark
