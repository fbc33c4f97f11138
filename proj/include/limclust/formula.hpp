#pragma once

#include <memory>
#include <string>
#include <vector>

#include "limclust/error.hpp"

namespace limclust {

// AST of the distance-guarded local first-order fragment.
//
// Variable slots: free variables x1..xp occupy slots 0..p-1; bound variables
// occupy slots p + depth, where depth counts enclosing quantifiers. The
// canonical numbering is restored after every formula combination, so sibling
// subtrees may share bound slots but no root-to-leaf path ever collides.
enum class NodeKind {
    True,
    False,
    Rel,    // R(x_{i1},...,x_{ik}); unary relations double as mark atoms
    Eq,     // x_a = x_b
    DistLe, // dist(x_a, x_b) <= r
    DistGt, // dist(x_a, x_b) > r
    Not,
    And,
    Or,
    Exists, // exists y in B[r](x_a): body
    Forall, // forall y in B[r](x_a): body
};

struct FormulaNode;
using NodePtr = std::shared_ptr<const FormulaNode>;

struct FormulaNode {
    NodeKind kind = NodeKind::True;

    // Rel
    std::string rel_name;
    std::vector<int> rel_vars;

    // Eq / DistLe / DistGt
    int var_a = -1;
    int var_b = -1;
    int guard_radius = 0;

    // Not / And / Or
    std::vector<NodePtr> children;

    // Exists / Forall
    int bound_var = -1;
    int anchor_var = -1;
    int ball_radius = 0;
    NodePtr body;
};

class Formula {
public:
    Formula() = default;

    // Parses the DSL. Grammar (EBNF):
    //   formula   = or ;
    //   or        = and , { "|" , and } ;
    //   and       = unary , { "&" , unary } ;
    //   unary     = "~" , unary | quantifier | primary ;
    //   quantifier= ( "exists" | "forall" ) , ident , "in" ,
    //               "B" , "[" , int , "]" , "(" , var , ")" , ":" , or ;
    //   primary   = "true" | "false" | "(" , formula , ")"
    //             | "dist" , "(" , var , "," , var , ")" , ( "<=" | ">" ) , int
    //             | var , "=" , var
    //             | ident , "(" , var , { "," , var } , ")" ;
    //   var       = "x" int            (free variable, 1-based)
    //             | ident              (bound variable in scope) ;
    // A quantifier body extends maximally to the right. Unguarded quantifiers
    // are rejected with a locality error.
    static Formula parse(const std::string& text);

    // Builds a formula from a raw tree over `free_count` free variables.
    // Bound slots are renumbered canonically; guards are validated.
    static Formula from_tree(NodePtr root, int free_count);

    bool valid() const { return root_ != nullptr; }
    const NodePtr& root() const { return root_; }

    int free_count() const { return free_count_; }
    // Syntactic locality radius (guards and quantifier radii accumulate).
    int radius() const { return radius_; }
    // Every pair of free variables joined by a chain of guards of total
    // radius <= radius().
    bool strongly_local() const { return strongly_local_; }

    // Relation names appearing in atoms, sorted and deduplicated.
    std::vector<std::string> relation_names() const;

    // Entailed pairwise distance bounds between free variables (chains of
    // guards, transitively closed); -1 when no chain certifies the pair.
    std::vector<std::vector<int>> certified_distances() const;

    std::string to_string() const;

    bool operator==(const Formula& o) const { return to_string() == o.to_string(); }

private:
    NodePtr root_;
    int free_count_ = 0;
    int radius_ = 0;
    bool strongly_local_ = false;
};

// Tree constructors used by the weak algebra and the decomposition.
namespace ast {
NodePtr make_true();
NodePtr make_false();
NodePtr make_rel(std::string name, std::vector<int> vars);
NodePtr make_eq(int a, int b);
NodePtr make_dist_le(int a, int b, int r);
NodePtr make_dist_gt(int a, int b, int r);
NodePtr make_not(NodePtr c);
NodePtr make_and(std::vector<NodePtr> cs);
NodePtr make_or(std::vector<NodePtr> cs);
NodePtr make_exists(int bound, int anchor, int radius, NodePtr body);
NodePtr make_forall(int bound, int anchor, int radius, NodePtr body);
// Applies a substitution to every variable slot (must be injective on the
// slots that occur).
NodePtr rename_vars(const NodePtr& node, const std::vector<int>& mapping);
} // namespace ast

} // namespace limclust
