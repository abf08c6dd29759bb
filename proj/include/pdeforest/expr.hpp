#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pdeforest {

/// Single random stream shared by every stochastic operation.
using Rng = std::mt19937_64;

namespace expr {

enum class Symbol : std::uint8_t {
    // operands
    U,
    X,
    UX,
    Zero,
    // unary operators
    Square,
    Cube,
    // binary operators
    Add,
    Sub,
    Mul,
    Div,
    D1,
    D2,
};

enum class Category : std::uint8_t { Operand, Unary, Binary };

constexpr Category category(Symbol s) noexcept {
    switch (s) {
    case Symbol::U:
    case Symbol::X:
    case Symbol::UX:
    case Symbol::Zero:
        return Category::Operand;
    case Symbol::Square:
    case Symbol::Cube:
        return Category::Unary;
    default:
        return Category::Binary;
    }
}

constexpr int arity(Symbol s) noexcept {
    switch (category(s)) {
    case Category::Operand:
        return 0;
    case Category::Unary:
        return 1;
    default:
        return 2;
    }
}

constexpr bool is_differential(Symbol s) noexcept { return s == Symbol::D1 || s == Symbol::D2; }

inline constexpr Symbol kOperands[] = {Symbol::U, Symbol::X, Symbol::UX, Symbol::Zero};
inline constexpr Symbol kUnaryOps[] = {Symbol::Square, Symbol::Cube};
inline constexpr Symbol kBinaryOps[] = {Symbol::Add, Symbol::Sub, Symbol::Mul,
                                        Symbol::Div, Symbol::D1,  Symbol::D2};

/// Token used in computable strings: `u x ux 0 ^2 ^3 + - * / d d2`.
std::string_view token(Symbol s) noexcept;

/// One node of a function-term tree. Children are owned by value; a node with
/// the wrong child count can be built by hand and is reported by validate().
struct Node {
    Symbol symbol = Symbol::U;
    std::vector<Node> children;

    Node() = default;
    explicit Node(Symbol s) : symbol(s) {}
    Node(Symbol s, std::vector<Node> kids) : symbol(s), children(std::move(kids)) {}

    bool operator==(const Node &) const = default;
};

/// A function term f_i(u, x). Immutable once built.
class Tree {
public:
    Tree() = default;
    explicit Tree(Node root) : root_(std::move(root)) {}

    const Node &root() const noexcept { return root_; }
    /// Root has depth 1.
    int depth() const noexcept;
    std::size_t size() const noexcept;

    bool operator==(const Tree &) const = default;

private:
    Node root_;
};

/// A candidate PDE right-hand side: independent terms joined by weighted sum.
struct Forest {
    std::vector<Tree> trees;

    bool operator==(const Forest &) const = default;
};

struct GenConfig {
    int max_depth = 4;
    int max_width = 5;
    double p_operand = 0.5;
    std::uint64_t rng_seed = 0;

    /// Throws std::invalid_argument on out-of-range fields.
    void check() const;
};

// ---- construction helpers ---------------------------------------------------

inline Node leaf(Symbol s) { return Node(s); }
inline Node unary(Symbol op, Node a) { return Node(op, {std::move(a)}); }
inline Node binary(Symbol op, Node a, Node b) { return Node(op, {std::move(a), std::move(b)}); }
/// d/dx or d2/dx2 of `a`, with the variable slot pinned to x.
inline Node differential(Symbol op, Node a) { return Node(op, {std::move(a), Node(Symbol::X)}); }

// ---- generation -------------------------------------------------------------

Tree random_tree(const GenConfig &cfg, Rng &rng);

/// Tree count is uniform in [1, max_width]. With include_default_u the
/// single-node tree `u` occupies slot 0.
Forest random_forest(const GenConfig &cfg, Rng &rng, bool include_default_u);

/// Grows a subtree whose root sits at `depth` (tree root = 1). ADD/SUB are
/// excluded only when depth == 1.
Node random_subtree(const GenConfig &cfg, Rng &rng, int depth);

// ---- validation -------------------------------------------------------------

enum class Rule : std::uint8_t {
    LeafIsOperand = 1,    // leaves are operands, internal nodes are operators
    FullDegree = 2,       // child count equals operator arity
    RootNotAdditive = 3,  // no + or - at the root
    MaxDepth = 4,         // depth <= max_depth
    ForestWidth = 5,      // 1 <= trees <= max_width
    DifferentialVariable, // right child of d / d2 is x
};

struct Violation {
    Rule rule;
    std::size_t tree; // index in the forest
    std::string path; // "root", "root.0.1", ... child indices from the root
    std::string message;
};

std::vector<Violation> validate(const Forest &f, const GenConfig &cfg);
std::vector<Violation> validate(const Tree &t, const GenConfig &cfg);

// ---- rendering and parsing --------------------------------------------------

/// Prefix notation, e.g. "{ d [+ (d u x) (* u u)] x }".
std::string to_computable_string(const Tree &t);

/// Infix notation with minimal parentheses, e.g. "d/dx(d/dx(u) + u*u)".
std::string to_display_string(const Tree &t);

class ParseError : public std::runtime_error {
public:
    enum class Kind { Syntax, Arity };

    ParseError(Kind kind, std::size_t position, const std::string &what);

    Kind kind() const noexcept { return kind_; }
    /// Byte offset into the input.
    std::size_t position() const noexcept { return position_; }

private:
    Kind kind_;
    std::size_t position_;
};

/// Accepts any of { } [ ] ( ) as unit brackets, and the Unicode spellings
/// ∂ × ÷ alongside the ASCII ones. A bare operand ("u") is a valid tree.
Tree parse_computable_string(std::string_view s);

/// Order-independent key: per-tree computable strings sorted and joined by " & ".
std::string canonical_key(const Forest &f);

} // namespace expr
} // namespace pdeforest
