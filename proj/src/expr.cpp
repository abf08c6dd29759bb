#include "pdeforest/expr.hpp"

#include <algorithm>
#include <cctype>
#include <optional>

namespace pdeforest::expr {

std::string_view token(Symbol s) noexcept {
    switch (s) {
    case Symbol::U: return "u";
    case Symbol::X: return "x";
    case Symbol::UX: return "ux";
    case Symbol::Zero: return "0";
    case Symbol::Square: return "^2";
    case Symbol::Cube: return "^3";
    case Symbol::Add: return "+";
    case Symbol::Sub: return "-";
    case Symbol::Mul: return "*";
    case Symbol::Div: return "/";
    case Symbol::D1: return "d";
    case Symbol::D2: return "d2";
    }
    return "?";
}

namespace {

int node_depth(const Node &n) {
    int deepest = 0;
    for (const auto &c : n.children) deepest = std::max(deepest, node_depth(c));
    return deepest + 1;
}

std::size_t node_count(const Node &n) {
    std::size_t total = 1;
    for (const auto &c : n.children) total += node_count(c);
    return total;
}

template <std::size_t N>
Symbol pick(const Symbol (&choices)[N], Rng &rng) {
    std::uniform_int_distribution<std::size_t> dist(0, N - 1);
    return choices[dist(rng)];
}

} // namespace

int Tree::depth() const noexcept { return node_depth(root_); }
std::size_t Tree::size() const noexcept { return node_count(root_); }

void GenConfig::check() const {
    if (max_depth < 1) throw std::invalid_argument("max_depth must be >= 1");
    if (max_width < 1) throw std::invalid_argument("max_width must be >= 1");
    if (!(p_operand > 0.0 && p_operand <= 1.0))
        throw std::invalid_argument("p_operand must lie in (0, 1]");
}

// ---- generation -------------------------------------------------------------

Node random_subtree(const GenConfig &cfg, Rng &rng, int depth) {
    static constexpr Symbol kAnyOperator[] = {Symbol::Square, Symbol::Cube, Symbol::Add,
                                              Symbol::Sub,    Symbol::Mul,  Symbol::Div,
                                              Symbol::D1,     Symbol::D2};
    static constexpr Symbol kRootOperator[] = {Symbol::Square, Symbol::Cube, Symbol::Mul,
                                               Symbol::Div,    Symbol::D1,   Symbol::D2};

    std::bernoulli_distribution operand_draw(cfg.p_operand);
    if (depth >= cfg.max_depth || operand_draw(rng)) return Node(pick(kOperands, rng));

    const Symbol op = depth == 1 ? pick(kRootOperator, rng) : pick(kAnyOperator, rng);
    if (arity(op) == 1) return unary(op, random_subtree(cfg, rng, depth + 1));
    if (is_differential(op)) return differential(op, random_subtree(cfg, rng, depth + 1));
    Node left = random_subtree(cfg, rng, depth + 1);
    Node right = random_subtree(cfg, rng, depth + 1);
    return binary(op, std::move(left), std::move(right));
}

Tree random_tree(const GenConfig &cfg, Rng &rng) { return Tree(random_subtree(cfg, rng, 1)); }

Forest random_forest(const GenConfig &cfg, Rng &rng, bool include_default_u) {
    std::uniform_int_distribution<int> width_dist(1, cfg.max_width);
    const int width = width_dist(rng);
    Forest f;
    f.trees.reserve(static_cast<std::size_t>(width));
    if (include_default_u) f.trees.emplace_back(Node(Symbol::U));
    while (static_cast<int>(f.trees.size()) < width) f.trees.push_back(random_tree(cfg, rng));
    return f;
}

// ---- validation -------------------------------------------------------------

namespace {

void check_node(const Node &n, std::size_t tree_index, const std::string &path,
                std::vector<Violation> &out) {
    const int want = arity(n.symbol);
    const int have = static_cast<int>(n.children.size());
    const bool is_operand = category(n.symbol) == Category::Operand;

    if (is_operand && have > 0) {
        out.push_back({Rule::LeafIsOperand, tree_index, path,
                       "operand '" + std::string(token(n.symbol)) + "' has children"});
    } else if (!is_operand && have == 0) {
        out.push_back({Rule::LeafIsOperand, tree_index, path,
                       "leaf is operator '" + std::string(token(n.symbol)) + "'"});
    } else if (have != want) {
        out.push_back({Rule::FullDegree, tree_index, path,
                       "operator '" + std::string(token(n.symbol)) + "' expects " +
                           std::to_string(want) + " children, has " + std::to_string(have)});
    }

    if (is_differential(n.symbol) && have == 2 &&
        !(n.children[1].symbol == Symbol::X && n.children[1].children.empty())) {
        out.push_back({Rule::DifferentialVariable, tree_index, path + ".1",
                       "differentiation variable must be x"});
    }

    for (std::size_t i = 0; i < n.children.size(); ++i)
        check_node(n.children[i], tree_index, path + "." + std::to_string(i), out);
}

// Path to the first node that sits below max_depth.
std::optional<std::string> too_deep(const Node &n, int depth, int max_depth, const std::string &path) {
    if (depth > max_depth) return path;
    for (std::size_t i = 0; i < n.children.size(); ++i) {
        if (auto p = too_deep(n.children[i], depth + 1, max_depth, path + "." + std::to_string(i)))
            return p;
    }
    return std::nullopt;
}

void check_tree(const Tree &t, std::size_t index, const GenConfig &cfg, std::vector<Violation> &out) {
    const Node &root = t.root();
    check_node(root, index, "root", out);
    if (root.symbol == Symbol::Add || root.symbol == Symbol::Sub)
        out.push_back({Rule::RootNotAdditive, index, "root", "root operator is + or -"});
    if (auto p = too_deep(root, 1, cfg.max_depth, "root"))
        out.push_back({Rule::MaxDepth, index, *p,
                       "depth " + std::to_string(t.depth()) + " exceeds " + std::to_string(cfg.max_depth)});
}

} // namespace

std::vector<Violation> validate(const Tree &t, const GenConfig &cfg) {
    std::vector<Violation> out;
    check_tree(t, 0, cfg, out);
    return out;
}

std::vector<Violation> validate(const Forest &f, const GenConfig &cfg) {
    std::vector<Violation> out;
    const auto width = static_cast<int>(f.trees.size());
    if (width < 1 || width > cfg.max_width) {
        out.push_back({Rule::ForestWidth, 0, "forest",
                       "forest has " + std::to_string(width) + " trees, allowed 1.." +
                           std::to_string(cfg.max_width)});
    }
    for (std::size_t i = 0; i < f.trees.size(); ++i) check_tree(f.trees[i], i, cfg, out);
    return out;
}

// ---- computable strings -----------------------------------------------------

namespace {

// Brackets go by height: a unit whose operands are all leaves uses ( ),
// one level up [ ], then ( ) again, and so on.
int unit_height(const Node &n) {
    int h = 0;
    for (const auto &c : n.children) h = std::max(h, unit_height(c));
    return n.children.empty() ? 0 : h + 1;
}

void emit_unit(const Node &n, std::string &out) {
    if (n.children.empty()) {
        out += token(n.symbol);
        return;
    }
    const bool square = unit_height(n) % 2 == 0;
    out += square ? '[' : '(';
    out += token(n.symbol);
    for (const auto &c : n.children) {
        out += ' ';
        emit_unit(c, out);
    }
    out += square ? ']' : ')';
}

} // namespace

std::string to_computable_string(const Tree &t) {
    const Node &root = t.root();
    std::string out = "{ ";
    out += token(root.symbol);
    for (const auto &c : root.children) {
        out += ' ';
        emit_unit(c, out);
    }
    out += " }";
    return out;
}

// ---- display strings --------------------------------------------------------

namespace {

// Binding strength: sums < products < powers < atoms.
enum Prec { kSum = 1, kProduct = 2, kPower = 3, kAtom = 4 };

struct Rendered {
    std::string text;
    int prec;
};

std::string wrap(const Rendered &r, bool paren) { return paren ? "(" + r.text + ")" : r.text; }

Rendered render(const Node &n) {
    if (n.children.size() != static_cast<std::size_t>(arity(n.symbol))) {
        // Malformed trees still render, in prefix form.
        std::string s = "<" + std::string(token(n.symbol));
        for (const auto &c : n.children) s += " " + render(c).text;
        return {s + ">", kAtom};
    }
    switch (n.symbol) {
    case Symbol::U: return {"u", kAtom};
    case Symbol::X: return {"x", kAtom};
    case Symbol::UX: return {"u_x", kAtom};
    case Symbol::Zero: return {"0", kAtom};
    case Symbol::Square:
    case Symbol::Cube: {
        const Rendered base = render(n.children[0]);
        return {wrap(base, base.prec < kAtom) + (n.symbol == Symbol::Square ? "^2" : "^3"), kPower};
    }
    case Symbol::D1:
    case Symbol::D2: {
        const Rendered inner = render(n.children[0]);
        const Rendered var = render(n.children[1]);
        const std::string v = var.text == "x" ? "x" : "(" + var.text + ")";
        const std::string head = n.symbol == Symbol::D1 ? "d/d" + v : "d2/d" + v + "2";
        return {head + "(" + inner.text + ")", kAtom};
    }
    default: break;
    }

    const Rendered a = render(n.children[0]);
    const Rendered b = render(n.children[1]);
    switch (n.symbol) {
    case Symbol::Add: return {a.text + " + " + b.text, kSum};
    case Symbol::Sub: return {a.text + " - " + wrap(b, b.prec <= kSum), kSum};
    case Symbol::Mul: return {wrap(a, a.prec < kProduct) + "*" + wrap(b, b.prec < kProduct), kProduct};
    case Symbol::Div: return {wrap(a, a.prec < kProduct) + "/" + wrap(b, b.prec <= kProduct), kProduct};
    default: break;
    }
    return {"?", kAtom};
}

} // namespace

std::string to_display_string(const Tree &t) { return render(t.root()).text; }

// ---- parsing ----------------------------------------------------------------

ParseError::ParseError(Kind kind, std::size_t position, const std::string &what)
    : std::runtime_error(what + " at position " + std::to_string(position)), kind_(kind),
      position_(position) {}

namespace {

struct Token {
    enum Type { Open, Close, Word, End } type;
    std::string text;
    std::size_t pos;
};

bool is_open(char c) { return c == '{' || c == '[' || c == '('; }
bool is_close(char c) { return c == '}' || c == ']' || c == ')'; }

class Lexer {
public:
    explicit Lexer(std::string_view s) : s_(s) {}

    Token next() {
        while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
        if (i_ >= s_.size()) return {Token::End, "", i_};
        const std::size_t start = i_;
        if (is_open(s_[i_])) return {Token::Open, std::string(1, s_[i_++]), start};
        if (is_close(s_[i_])) return {Token::Close, std::string(1, s_[i_++]), start};
        while (i_ < s_.size() && !std::isspace(static_cast<unsigned char>(s_[i_])) && !is_open(s_[i_]) &&
               !is_close(s_[i_]))
            ++i_;
        return {Token::Word, std::string(s_.substr(start, i_ - start)), start};
    }

private:
    std::string_view s_;
    std::size_t i_ = 0;
};

std::optional<Symbol> symbol_for(const std::string &w) {
    static const std::pair<const char *, Symbol> table[] = {
        {"u", Symbol::U},       {"x", Symbol::X},        {"ux", Symbol::UX},    {"u_x", Symbol::UX},
        {"0", Symbol::Zero},    {"^2", Symbol::Square},  {"^3", Symbol::Cube},  {"+", Symbol::Add},
        {"-", Symbol::Sub},     {"*", Symbol::Mul},      {"\xC3\x97", Symbol::Mul}, // ×
        {"/", Symbol::Div},     {"\xC3\xB7", Symbol::Div},                          // ÷
        {"d", Symbol::D1},      {"\xE2\x88\x82", Symbol::D1},                       // ∂
        {"d2", Symbol::D2},     {"\xE2\x88\x82" "2", Symbol::D2},
        {"\xE2\x88\x82\xC2\xB2", Symbol::D2}, // ∂²
    };
    for (const auto &[text, sym] : table)
        if (w == text) return sym;
    return std::nullopt;
}

class Parser {
public:
    explicit Parser(std::string_view s) : lex_(s) { advance(); }

    Node parse_all() {
        Node n = parse_expr();
        if (cur_.type != Token::End)
            throw ParseError(ParseError::Kind::Syntax, cur_.pos, "unexpected trailing '" + cur_.text + "'");
        return n;
    }

private:
    void advance() { cur_ = lex_.next(); }

    Symbol word_symbol(const Token &t) {
        auto sym = symbol_for(t.text);
        if (!sym) throw ParseError(ParseError::Kind::Syntax, t.pos, "unknown symbol '" + t.text + "'");
        return *sym;
    }

    Node parse_expr() {
        if (cur_.type == Token::End)
            throw ParseError(ParseError::Kind::Syntax, cur_.pos, "unexpected end of input");
        if (cur_.type == Token::Close)
            throw ParseError(ParseError::Kind::Syntax, cur_.pos, "unexpected '" + cur_.text + "'");
        if (cur_.type == Token::Word) {
            const Token t = cur_;
            const Symbol s = word_symbol(t);
            if (category(s) != Category::Operand)
                throw ParseError(ParseError::Kind::Syntax, t.pos,
                                 "operator '" + t.text + "' must open a bracketed unit");
            advance();
            return Node(s);
        }

        // bracketed unit
        const std::size_t open_pos = cur_.pos;
        advance();
        if (cur_.type != Token::Word)
            throw ParseError(ParseError::Kind::Syntax, cur_.pos, "expected symbol after bracket");
        const Token head = cur_;
        const Symbol s = word_symbol(head);
        advance();

        std::vector<Node> kids;
        while (cur_.type != Token::Close) {
            if (cur_.type == Token::End)
                throw ParseError(ParseError::Kind::Syntax, cur_.pos,
                                 "unclosed bracket opened at " + std::to_string(open_pos));
            kids.push_back(parse_expr());
        }
        advance(); // closing bracket

        if (static_cast<int>(kids.size()) != arity(s)) {
            throw ParseError(ParseError::Kind::Arity, head.pos,
                             "'" + head.text + "' expects " + std::to_string(arity(s)) +
                                 " operand(s), got " + std::to_string(kids.size()));
        }
        return Node(s, std::move(kids));
    }

    Lexer lex_;
    Token cur_{Token::End, "", 0};
};

} // namespace

Tree parse_computable_string(std::string_view s) { return Tree(Parser(s).parse_all()); }

std::string canonical_key(const Forest &f) {
    std::vector<std::string> parts;
    parts.reserve(f.trees.size());
    for (const auto &t : f.trees) parts.push_back(to_computable_string(t));
    std::sort(parts.begin(), parts.end());
    std::string key;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) key += " & ";
        key += parts[i];
    }
    return key;
}

} // namespace pdeforest::expr
