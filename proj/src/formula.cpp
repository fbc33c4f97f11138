#include "limclust/formula.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <sstream>

namespace limclust {

namespace ast {

NodePtr make_true() {
    auto n = std::make_shared<FormulaNode>();
    n->kind = NodeKind::True;
    return n;
}

NodePtr make_false() {
    auto n = std::make_shared<FormulaNode>();
    n->kind = NodeKind::False;
    return n;
}

NodePtr make_rel(std::string name, std::vector<int> vars) {
    auto n = std::make_shared<FormulaNode>();
    n->kind = NodeKind::Rel;
    n->rel_name = std::move(name);
    n->rel_vars = std::move(vars);
    return n;
}

NodePtr make_eq(int a, int b) {
    if (a == b) return make_true();
    auto n = std::make_shared<FormulaNode>();
    n->kind = NodeKind::Eq;
    n->var_a = std::min(a, b);
    n->var_b = std::max(a, b);
    return n;
}

NodePtr make_dist_le(int a, int b, int r) {
    if (r < 0) throw input_error("negative guard radius");
    if (a == b) return make_true();
    auto n = std::make_shared<FormulaNode>();
    n->kind = NodeKind::DistLe;
    n->var_a = std::min(a, b);
    n->var_b = std::max(a, b);
    n->guard_radius = r;
    return n;
}

NodePtr make_dist_gt(int a, int b, int r) {
    if (r < 0) throw input_error("negative guard radius");
    if (a == b) return make_false();
    auto n = std::make_shared<FormulaNode>();
    n->kind = NodeKind::DistGt;
    n->var_a = std::min(a, b);
    n->var_b = std::max(a, b);
    n->guard_radius = r;
    return n;
}

NodePtr make_not(NodePtr c) {
    if (c->kind == NodeKind::True) return make_false();
    if (c->kind == NodeKind::False) return make_true();
    if (c->kind == NodeKind::Not) return c->children[0];
    auto n = std::make_shared<FormulaNode>();
    n->kind = NodeKind::Not;
    n->children = {std::move(c)};
    return n;
}

NodePtr make_and(std::vector<NodePtr> cs) {
    std::vector<NodePtr> flat;
    for (auto& c : cs) {
        if (c->kind == NodeKind::False) return make_false();
        if (c->kind == NodeKind::True) continue;
        if (c->kind == NodeKind::And) {
            for (auto& g : c->children) flat.push_back(g);
        } else {
            flat.push_back(std::move(c));
        }
    }
    if (flat.empty()) return make_true();
    if (flat.size() == 1) return flat[0];
    auto n = std::make_shared<FormulaNode>();
    n->kind = NodeKind::And;
    n->children = std::move(flat);
    return n;
}

NodePtr make_or(std::vector<NodePtr> cs) {
    std::vector<NodePtr> flat;
    for (auto& c : cs) {
        if (c->kind == NodeKind::True) return make_true();
        if (c->kind == NodeKind::False) continue;
        if (c->kind == NodeKind::Or) {
            for (auto& g : c->children) flat.push_back(g);
        } else {
            flat.push_back(std::move(c));
        }
    }
    if (flat.empty()) return make_false();
    if (flat.size() == 1) return flat[0];
    auto n = std::make_shared<FormulaNode>();
    n->kind = NodeKind::Or;
    n->children = std::move(flat);
    return n;
}

NodePtr make_exists(int bound, int anchor, int radius, NodePtr body) {
    if (radius < 0) throw input_error("negative quantifier radius");
    auto n = std::make_shared<FormulaNode>();
    n->kind = NodeKind::Exists;
    n->bound_var = bound;
    n->anchor_var = anchor;
    n->ball_radius = radius;
    n->body = std::move(body);
    return n;
}

NodePtr make_forall(int bound, int anchor, int radius, NodePtr body) {
    if (radius < 0) throw input_error("negative quantifier radius");
    auto n = std::make_shared<FormulaNode>();
    n->kind = NodeKind::Forall;
    n->bound_var = bound;
    n->anchor_var = anchor;
    n->ball_radius = radius;
    n->body = std::move(body);
    return n;
}

namespace {

// Applies `mapping` to free occurrences only; bound occurrences are left to
// the canonical renumbering pass.
NodePtr rename_impl(const NodePtr& node, const std::vector<int>& mapping,
                    std::vector<int>& binder_stack) {
    auto is_bound = [&](int v) {
        for (auto it = binder_stack.rbegin(); it != binder_stack.rend(); ++it)
            if (*it == v) return true;
        return false;
    };
    auto map_var = [&](int v) -> int {
        if (is_bound(v)) return v;
        if (v < 0 || v >= static_cast<int>(mapping.size()))
            throw input_error("variable slot " + std::to_string(v) + " outside rename mapping");
        return mapping[v];
    };
    switch (node->kind) {
    case NodeKind::True:
    case NodeKind::False:
        return node;
    case NodeKind::Rel: {
        std::vector<int> vars;
        vars.reserve(node->rel_vars.size());
        for (int v : node->rel_vars) vars.push_back(map_var(v));
        return make_rel(node->rel_name, std::move(vars));
    }
    case NodeKind::Eq:
        return make_eq(map_var(node->var_a), map_var(node->var_b));
    case NodeKind::DistLe:
        return make_dist_le(map_var(node->var_a), map_var(node->var_b), node->guard_radius);
    case NodeKind::DistGt:
        return make_dist_gt(map_var(node->var_a), map_var(node->var_b), node->guard_radius);
    case NodeKind::Not:
        return make_not(rename_impl(node->children[0], mapping, binder_stack));
    case NodeKind::And:
    case NodeKind::Or: {
        std::vector<NodePtr> cs;
        cs.reserve(node->children.size());
        for (const auto& c : node->children) cs.push_back(rename_impl(c, mapping, binder_stack));
        return node->kind == NodeKind::And ? make_and(std::move(cs)) : make_or(std::move(cs));
    }
    case NodeKind::Exists:
    case NodeKind::Forall: {
        int anchor = map_var(node->anchor_var);
        binder_stack.push_back(node->bound_var);
        NodePtr body = rename_impl(node->body, mapping, binder_stack);
        binder_stack.pop_back();
        return node->kind == NodeKind::Exists
                   ? make_exists(node->bound_var, anchor, node->ball_radius, std::move(body))
                   : make_forall(node->bound_var, anchor, node->ball_radius, std::move(body));
    }
    }
    throw input_error("corrupt formula node");
}

} // namespace

NodePtr rename_vars(const NodePtr& node, const std::vector<int>& mapping) {
    std::vector<int> binder_stack;
    return rename_impl(node, mapping, binder_stack);
}

} // namespace ast

namespace {

using ast::make_and;
using ast::make_dist_gt;
using ast::make_dist_le;
using ast::make_eq;
using ast::make_exists;
using ast::make_false;
using ast::make_forall;
using ast::make_not;
using ast::make_or;
using ast::make_rel;
using ast::make_true;

// ---- canonical bound-slot renumbering ------------------------------------

// Occurrences resolve to the innermost matching binder; everything else must
// be a free slot below free_count.
NodePtr canonicalize(const NodePtr& node, int free_count, int depth,
                     std::vector<std::pair<int, int>>& scope) {
    auto resolve = [&](int v) -> int {
        for (auto it = scope.rbegin(); it != scope.rend(); ++it)
            if (it->first == v) return it->second;
        if (v < 0 || v >= free_count)
            throw input_error("unbound variable slot " + std::to_string(v));
        return v;
    };
    switch (node->kind) {
    case NodeKind::True:
    case NodeKind::False:
        return node;
    case NodeKind::Rel: {
        std::vector<int> vars;
        vars.reserve(node->rel_vars.size());
        for (int v : node->rel_vars) vars.push_back(resolve(v));
        return make_rel(node->rel_name, std::move(vars));
    }
    case NodeKind::Eq:
        return make_eq(resolve(node->var_a), resolve(node->var_b));
    case NodeKind::DistLe:
        return make_dist_le(resolve(node->var_a), resolve(node->var_b), node->guard_radius);
    case NodeKind::DistGt:
        return make_dist_gt(resolve(node->var_a), resolve(node->var_b), node->guard_radius);
    case NodeKind::Not:
        return make_not(canonicalize(node->children[0], free_count, depth, scope));
    case NodeKind::And:
    case NodeKind::Or: {
        std::vector<NodePtr> cs;
        for (const auto& c : node->children)
            cs.push_back(canonicalize(c, free_count, depth, scope));
        return node->kind == NodeKind::And ? make_and(std::move(cs)) : make_or(std::move(cs));
    }
    case NodeKind::Exists:
    case NodeKind::Forall: {
        int anchor = resolve(node->anchor_var);
        int slot = free_count + depth;
        scope.emplace_back(node->bound_var, slot);
        NodePtr body = canonicalize(node->body, free_count, depth + 1, scope);
        scope.pop_back();
        return node->kind == NodeKind::Exists
                   ? make_exists(slot, anchor, node->ball_radius, std::move(body))
                   : make_forall(slot, anchor, node->ball_radius, std::move(body));
    }
    }
    throw input_error("corrupt formula node");
}

// ---- locality radius ------------------------------------------------------

int structural_radius(const NodePtr& node) {
    switch (node->kind) {
    case NodeKind::True:
    case NodeKind::False:
    case NodeKind::Rel:
    case NodeKind::Eq:
        return 0;
    case NodeKind::DistLe:
    case NodeKind::DistGt:
        return node->guard_radius;
    case NodeKind::Not:
        return structural_radius(node->children[0]);
    case NodeKind::And:
    case NodeKind::Or: {
        int r = 0;
        for (const auto& c : node->children) r = std::max(r, structural_radius(c));
        return r;
    }
    case NodeKind::Exists:
    case NodeKind::Forall:
        return node->ball_radius + structural_radius(node->body);
    }
    return 0;
}

bool has_multivar_atom(const NodePtr& node) {
    switch (node->kind) {
    case NodeKind::Rel: {
        std::set<int> distinct(node->rel_vars.begin(), node->rel_vars.end());
        return distinct.size() >= 2;
    }
    case NodeKind::Not:
    case NodeKind::And:
    case NodeKind::Or:
        for (const auto& c : node->children)
            if (has_multivar_atom(c)) return true;
        return false;
    case NodeKind::Exists:
    case NodeKind::Forall:
        return has_multivar_atom(node->body);
    default:
        return false;
    }
}

// ---- strong-locality certificate -------------------------------------------

using CertEdges = std::map<std::pair<int, int>, int>; // (a<b) -> certified dist bound

void cert_insert(CertEdges& e, int a, int b, int r) {
    if (a == b) return;
    auto key = std::minmax(a, b);
    auto it = e.find({key.first, key.second});
    if (it == e.end() || it->second > r) e[{key.first, key.second}] = r;
}

// Edges (a,b,r) such that the subformula entails dist(a,b) <= r.
CertEdges cert_edges(const NodePtr& node) {
    CertEdges out;
    switch (node->kind) {
    case NodeKind::True:
    case NodeKind::False:
    case NodeKind::DistGt:
    case NodeKind::Not:
        return out;
    case NodeKind::Rel: {
        for (std::size_t i = 0; i < node->rel_vars.size(); ++i)
            for (std::size_t j = i + 1; j < node->rel_vars.size(); ++j)
                cert_insert(out, node->rel_vars[i], node->rel_vars[j], 1);
        return out;
    }
    case NodeKind::Eq:
        cert_insert(out, node->var_a, node->var_b, 0);
        return out;
    case NodeKind::DistLe:
        cert_insert(out, node->var_a, node->var_b, node->guard_radius);
        return out;
    case NodeKind::And: {
        for (const auto& c : node->children)
            for (const auto& [k, r] : cert_edges(c)) cert_insert(out, k.first, k.second, r);
        return out;
    }
    case NodeKind::Or: {
        bool first = true;
        for (const auto& c : node->children) {
            CertEdges ce = cert_edges(c);
            if (first) {
                out = std::move(ce);
                first = false;
            } else {
                CertEdges merged;
                for (const auto& [k, r] : out) {
                    auto it = ce.find(k);
                    if (it != ce.end()) merged[k] = std::max(r, it->second);
                }
                out = std::move(merged);
            }
        }
        return out;
    }
    case NodeKind::Exists: {
        CertEdges ce = cert_edges(node->body);
        int y = node->bound_var;
        cert_insert(ce, node->anchor_var, y, node->ball_radius);
        // close paths through the witness, then drop it
        std::vector<std::pair<int, int>> touching; // (other, r)
        for (const auto& [k, r] : ce) {
            if (k.first == y) touching.emplace_back(k.second, r);
            else if (k.second == y) touching.emplace_back(k.first, r);
        }
        for (std::size_t i = 0; i < touching.size(); ++i)
            for (std::size_t j = i + 1; j < touching.size(); ++j)
                cert_insert(ce, touching[i].first, touching[j].first,
                            touching[i].second + touching[j].second);
        for (const auto& [k, r] : ce)
            if (k.first != y && k.second != y) cert_insert(out, k.first, k.second, r);
        return out;
    }
    case NodeKind::Forall: {
        // the closed ball contains the anchor, so the body instantiated at
        // y := anchor is entailed
        CertEdges ce = cert_edges(node->body);
        int y = node->bound_var;
        int x = node->anchor_var;
        for (const auto& [k, r] : ce) {
            int a = k.first == y ? x : k.first;
            int b = k.second == y ? x : k.second;
            cert_insert(out, a, b, r);
        }
        return out;
    }
    }
    return out;
}

bool compute_strongly_local(const NodePtr& root, int p, int radius) {
    if (p <= 1) return true;
    CertEdges edges = cert_edges(root);
    // shortest chain totals over all mentioned slots
    std::set<int> nodes;
    for (int i = 0; i < p; ++i) nodes.insert(i);
    for (const auto& [k, r] : edges) {
        nodes.insert(k.first);
        nodes.insert(k.second);
    }
    std::vector<int> idx(nodes.begin(), nodes.end());
    const long long inf = 1LL << 40;
    std::size_t m = idx.size();
    std::vector<long long> d(m * m, inf);
    for (std::size_t i = 0; i < m; ++i) d[i * m + i] = 0;
    auto pos = [&](int v) {
        return static_cast<std::size_t>(std::lower_bound(idx.begin(), idx.end(), v) - idx.begin());
    };
    for (const auto& [k, r] : edges) {
        std::size_t a = pos(k.first), b = pos(k.second);
        d[a * m + b] = std::min<long long>(d[a * m + b], r);
        d[b * m + a] = d[a * m + b];
    }
    for (std::size_t k = 0; k < m; ++k)
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j)
                d[i * m + j] = std::min(d[i * m + j], d[i * m + k] + d[k * m + j]);
    for (int i = 0; i < p; ++i)
        for (int j = i + 1; j < p; ++j)
            if (d[pos(i) * m + pos(j)] > radius) return false;
    return true;
}

int max_free_slot(const NodePtr& node, std::vector<int>& binders) {
    auto is_bound = [&](int v) {
        return std::find(binders.begin(), binders.end(), v) != binders.end();
    };
    int m = -1;
    switch (node->kind) {
    case NodeKind::Rel:
        for (int v : node->rel_vars)
            if (!is_bound(v)) m = std::max(m, v);
        break;
    case NodeKind::Eq:
    case NodeKind::DistLe:
    case NodeKind::DistGt:
        if (!is_bound(node->var_a)) m = std::max(m, node->var_a);
        if (!is_bound(node->var_b)) m = std::max(m, node->var_b);
        break;
    case NodeKind::Not:
    case NodeKind::And:
    case NodeKind::Or:
        for (const auto& c : node->children) m = std::max(m, max_free_slot(c, binders));
        break;
    case NodeKind::Exists:
    case NodeKind::Forall: {
        if (!is_bound(node->anchor_var)) m = std::max(m, node->anchor_var);
        binders.push_back(node->bound_var);
        m = std::max(m, max_free_slot(node->body, binders));
        binders.pop_back();
        break;
    }
    default:
        break;
    }
    return m;
}

// ---- printing ---------------------------------------------------------------

void print_node(std::ostringstream& os, const NodePtr& node, int free_count, int depth) {
    auto var_name = [&](int v) -> std::string {
        if (v < free_count) return "x" + std::to_string(v + 1);
        return "y" + std::to_string(v - free_count);
    };
    switch (node->kind) {
    case NodeKind::True: os << "true"; return;
    case NodeKind::False: os << "false"; return;
    case NodeKind::Rel: {
        os << node->rel_name << "(";
        for (std::size_t i = 0; i < node->rel_vars.size(); ++i) {
            if (i) os << ",";
            os << var_name(node->rel_vars[i]);
        }
        os << ")";
        return;
    }
    case NodeKind::Eq:
        os << var_name(node->var_a) << " = " << var_name(node->var_b);
        return;
    case NodeKind::DistLe:
        os << "dist(" << var_name(node->var_a) << "," << var_name(node->var_b) << ") <= "
           << node->guard_radius;
        return;
    case NodeKind::DistGt:
        os << "dist(" << var_name(node->var_a) << "," << var_name(node->var_b) << ") > "
           << node->guard_radius;
        return;
    case NodeKind::Not:
        os << "~(";
        print_node(os, node->children[0], free_count, depth);
        os << ")";
        return;
    case NodeKind::And:
    case NodeKind::Or: {
        const char* sep = node->kind == NodeKind::And ? " & " : " | ";
        os << "(";
        for (std::size_t i = 0; i < node->children.size(); ++i) {
            if (i) os << sep;
            print_node(os, node->children[i], free_count, depth);
        }
        os << ")";
        return;
    }
    case NodeKind::Exists:
    case NodeKind::Forall:
        os << (node->kind == NodeKind::Exists ? "exists " : "forall ")
           << var_name(node->bound_var) << " in B[" << node->ball_radius << "]("
           << var_name(node->anchor_var) << "): (";
        print_node(os, node->body, free_count, depth + 1);
        os << ")";
        return;
    }
}

// ---- parser ------------------------------------------------------------------

struct Token {
    enum Kind { Ident, Int, Sym, End } kind = End;
    std::string text;
    long value = 0;
    int line = 1, col = 1;
};

class Lexer {
public:
    explicit Lexer(const std::string& s) : s_(s) { advance(); }
    const Token& peek() const { return tok_; }
    Token next() {
        Token t = tok_;
        advance();
        return t;
    }

private:
    void advance() {
        while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\n' || s_[pos_] == '\r')) {
            if (s_[pos_] == '\n') { ++line_; col_ = 1; } else { ++col_; }
            ++pos_;
        }
        tok_ = Token{};
        tok_.line = line_;
        tok_.col = col_;
        if (pos_ >= s_.size()) { tok_.kind = Token::End; return; }
        char c = s_[pos_];
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = pos_;
            while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) {
                ++pos_; ++col_;
            }
            tok_.kind = Token::Ident;
            tok_.text = s_.substr(start, pos_ - start);
            return;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            std::size_t start = pos_;
            while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) { ++pos_; ++col_; }
            tok_.kind = Token::Int;
            tok_.text = s_.substr(start, pos_ - start);
            tok_.value = std::stol(tok_.text);
            return;
        }
        if (c == '<' && pos_ + 1 < s_.size() && s_[pos_ + 1] == '=') {
            tok_.kind = Token::Sym;
            tok_.text = "<=";
            pos_ += 2; col_ += 2;
            return;
        }
        static const std::string singles = "&|~()[],=:>";
        if (singles.find(c) != std::string::npos) {
            tok_.kind = Token::Sym;
            tok_.text = std::string(1, c);
            ++pos_; ++col_;
            return;
        }
        throw parse_error("line " + std::to_string(line_) + ", col " + std::to_string(col_) +
                          ": unexpected character '" + std::string(1, c) + "'");
    }

    const std::string& s_;
    std::size_t pos_ = 0;
    int line_ = 1, col_ = 1;
    Token tok_;
};

class Parser {
public:
    explicit Parser(const std::string& text) : lex_(text) {}

    NodePtr parse_all(int& free_count) {
        NodePtr n = parse_or();
        expect_end();
        free_count = max_free_;
        return n;
    }

private:
    [[noreturn]] void fail(const Token& t, const std::string& msg) {
        throw parse_error("line " + std::to_string(t.line) + ", col " + std::to_string(t.col) +
                          ": " + msg);
    }
    [[noreturn]] void fail_locality(const Token& t, const std::string& msg) {
        throw locality_error("line " + std::to_string(t.line) + ", col " + std::to_string(t.col) +
                             ": " + msg);
    }

    bool accept_sym(const std::string& s) {
        if (lex_.peek().kind == Token::Sym && lex_.peek().text == s) {
            lex_.next();
            return true;
        }
        return false;
    }
    Token expect_sym(const std::string& s) {
        Token t = lex_.peek();
        if (t.kind != Token::Sym || t.text != s) fail(t, "expected '" + s + "'");
        return lex_.next();
    }
    Token expect_ident() {
        Token t = lex_.peek();
        if (t.kind != Token::Ident) fail(t, "expected identifier");
        return lex_.next();
    }
    Token expect_int() {
        Token t = lex_.peek();
        if (t.kind != Token::Int) fail(t, "expected integer");
        return lex_.next();
    }
    void expect_end() {
        Token t = lex_.peek();
        if (t.kind != Token::End) fail(t, "trailing input");
    }

    static bool is_free_var_name(const std::string& s, int& index) {
        if (s.size() < 2 || s[0] != 'x') return false;
        for (std::size_t i = 1; i < s.size(); ++i)
            if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
        index = std::stoi(s.substr(1));
        return index >= 1;
    }

    int resolve_var(const Token& t) {
        int index = 0;
        if (is_free_var_name(t.text, index)) {
            max_free_ = std::max(max_free_, index);
            return index - 1;
        }
        for (auto it = scope_.rbegin(); it != scope_.rend(); ++it)
            if (it->first == t.text) return it->second;
        fail(t, "unknown variable '" + t.text + "' (free variables are x1,x2,...)");
    }

    Token expect_var_token() {
        Token t = lex_.peek();
        if (t.kind != Token::Ident) fail(t, "expected variable");
        return lex_.next();
    }

    NodePtr parse_or() {
        std::vector<NodePtr> cs{parse_and()};
        while (accept_sym("|")) cs.push_back(parse_and());
        return make_or(std::move(cs));
    }

    NodePtr parse_and() {
        std::vector<NodePtr> cs{parse_unary()};
        while (accept_sym("&")) cs.push_back(parse_unary());
        return make_and(std::move(cs));
    }

    NodePtr parse_unary() {
        if (accept_sym("~")) return make_not(parse_unary());
        const Token& t = lex_.peek();
        if (t.kind == Token::Ident && (t.text == "exists" || t.text == "forall"))
            return parse_quantifier();
        return parse_primary();
    }

    NodePtr parse_quantifier() {
        Token q = lex_.next();
        bool existential = q.text == "exists";
        Token name = expect_ident();
        int idx_dummy;
        if (is_free_var_name(name.text, idx_dummy))
            fail(name, "quantified variable may not use a free-variable name");
        Token guard = lex_.peek();
        if (!(guard.kind == Token::Ident && guard.text == "in"))
            fail_locality(guard, "unguarded quantifier: expected 'in B[r](v)' after '" +
                                     name.text + "'");
        lex_.next();
        Token b = expect_ident();
        if (b.text != "B") fail(b, "expected ball guard 'B[r](v)'");
        expect_sym("[");
        Token radius = expect_int();
        expect_sym("]");
        expect_sym("(");
        Token anchor_tok = expect_var_token();
        int anchor = resolve_var(anchor_tok);
        expect_sym(")");
        expect_sym(":");
        int slot = next_bound_slot_++;
        scope_.emplace_back(name.text, slot);
        NodePtr body = parse_or();
        scope_.pop_back();
        return existential
                   ? make_exists(slot, anchor, static_cast<int>(radius.value), std::move(body))
                   : make_forall(slot, anchor, static_cast<int>(radius.value), std::move(body));
    }

    NodePtr parse_primary() {
        Token t = lex_.peek();
        if (accept_sym("(")) {
            NodePtr n = parse_or();
            expect_sym(")");
            return n;
        }
        if (t.kind != Token::Ident) fail(t, "expected formula");
        if (t.text == "true") { lex_.next(); return make_true(); }
        if (t.text == "false") { lex_.next(); return make_false(); }
        if (t.text == "dist") {
            lex_.next();
            expect_sym("(");
            int a = resolve_var(expect_var_token());
            expect_sym(",");
            int b = resolve_var(expect_var_token());
            expect_sym(")");
            Token op = lex_.peek();
            if (accept_sym("<=")) return make_dist_le(a, b, static_cast<int>(expect_int().value));
            if (accept_sym(">")) return make_dist_gt(a, b, static_cast<int>(expect_int().value));
            fail(op, "expected '<=' or '>' after dist(...)");
        }
        Token name = lex_.next();
        if (lex_.peek().kind == Token::Sym && lex_.peek().text == "(") {
            lex_.next();
            std::vector<int> vars{resolve_var(expect_var_token())};
            while (accept_sym(",")) vars.push_back(resolve_var(expect_var_token()));
            expect_sym(")");
            return make_rel(name.text, std::move(vars));
        }
        if (accept_sym("=")) {
            int a = resolve_var(name);
            int b = resolve_var(expect_var_token());
            return make_eq(a, b);
        }
        fail(name, "expected relation atom, equality, or guard");
    }

    Lexer lex_;
    std::vector<std::pair<std::string, int>> scope_;
    int next_bound_slot_ = 1 << 20; // provisional; canonicalized afterwards
    int max_free_ = 0;
};

} // namespace

Formula Formula::parse(const std::string& text) {
    Parser p(text);
    int free_count = 0;
    NodePtr root = p.parse_all(free_count);
    return from_tree(std::move(root), free_count);
}

Formula Formula::from_tree(NodePtr root, int free_count) {
    if (!root) throw input_error("null formula");
    if (free_count < 0) throw input_error("negative free variable count");
    {
        std::vector<int> binders;
        int max_slot = max_free_slot(root, binders);
        if (max_slot >= free_count)
            throw input_error("free variable slot " + std::to_string(max_slot) +
                              " exceeds declared free count " + std::to_string(free_count));
    }
    std::vector<std::pair<int, int>> scope;
    NodePtr canon = canonicalize(root, free_count, 0, scope);
    Formula f;
    f.root_ = std::move(canon);
    f.free_count_ = free_count;
    int structural = structural_radius(f.root_);
    f.radius_ = std::max(structural, has_multivar_atom(f.root_) ? 1 : 0);
    f.strongly_local_ = compute_strongly_local(f.root_, free_count, f.radius_);
    return f;
}

std::vector<std::string> Formula::relation_names() const {
    std::set<std::string> names;
    std::vector<NodePtr> stack{root_};
    while (!stack.empty()) {
        NodePtr n = stack.back();
        stack.pop_back();
        if (n->kind == NodeKind::Rel) names.insert(n->rel_name);
        for (const auto& c : n->children) stack.push_back(c);
        if (n->body) stack.push_back(n->body);
    }
    return {names.begin(), names.end()};
}

std::vector<std::vector<int>> Formula::certified_distances() const {
    const int p = free_count_;
    std::vector<std::vector<int>> out(p, std::vector<int>(p, -1));
    if (p == 0) return out;
    CertEdges edges = cert_edges(root_);
    std::set<int> nodes;
    for (int i = 0; i < p; ++i) nodes.insert(i);
    for (const auto& [k, r] : edges) {
        nodes.insert(k.first);
        nodes.insert(k.second);
    }
    std::vector<int> idx(nodes.begin(), nodes.end());
    const long long inf = 1LL << 40;
    std::size_t m = idx.size();
    std::vector<long long> d(m * m, inf);
    for (std::size_t i = 0; i < m; ++i) d[i * m + i] = 0;
    auto pos = [&](int v) {
        return static_cast<std::size_t>(std::lower_bound(idx.begin(), idx.end(), v) - idx.begin());
    };
    for (const auto& [k, r] : edges) {
        std::size_t a = pos(k.first), b = pos(k.second);
        d[a * m + b] = std::min<long long>(d[a * m + b], r);
        d[b * m + a] = d[a * m + b];
    }
    for (std::size_t k = 0; k < m; ++k)
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j)
                d[i * m + j] = std::min(d[i * m + j], d[i * m + k] + d[k * m + j]);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) {
            long long v = d[pos(i) * m + pos(j)];
            out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                v >= inf ? -1 : static_cast<int>(v);
        }
    return out;
}

std::string Formula::to_string() const {
    if (!root_) return "<invalid>";
    std::ostringstream os;
    print_node(os, root_, free_count_, 0);
    return os.str();
}

} // namespace limclust
