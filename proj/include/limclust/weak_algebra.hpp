#pragma once

#include <string>
#include <vector>

#include "limclust/evaluate.hpp"
#include "limclust/formula.hpp"
#include "limclust/structure.hpp"

namespace limclust {

// Deterministic family of small structures over a signature, used to check
// the semidecidable weak-algebra preconditions. All structures up to max_n
// are enumerated when that is feasible, otherwise a seeded sample is drawn;
// either way the family is capped and reproducible. This is a
// sound-for-tests heuristic, not a decision procedure.
std::vector<Structure> precondition_test_family(const Signature& sig, int max_n = 4,
                                                std::size_t cap = 200);

// phi (+) psi = phi | psi, defined when phi & psi is unsatisfiable. The
// precondition is checked syntactically where decidable and on the test
// family otherwise; a violation raises an algebra error naming the witness.
Formula weak_add(const Formula& phi, const Formula& psi, const std::vector<Structure>& family);

// phi (-) psi = phi & ~psi, defined when psi entails phi, so that
// <phi (-) psi, A> = <phi, A> - <psi, A>.
Formula weak_sub(const Formula& phi, const Formula& psi, const std::vector<Structure>& family);

// phi (x) psi = phi & tau^p(psi): psi's variables shift past phi's, and the
// pairing multiplies.
Formula free_product(const Formula& phi, const Formula& psi);

// iota(phi): injective renaming of free variable slots (0-based).
Formula rename(const Formula& phi, const std::vector<int>& iota);

// Integer polynomial over named strongly local formulas whose evaluation at
// the generators' Stone pairings reproduces <phi, A> exactly.
struct PairingPolynomial {
    std::vector<Formula> generators;
    struct Term {
        std::vector<std::pair<int, int>> monomial; // (generator index, exponent), sorted
        long long coeff = 0;
    };
    std::vector<Term> terms;

    int degree() const;
    double evaluate(const std::vector<double>& generator_pairings) const;
    double evaluate(const Structure& a) const;
    std::string to_string() const;
};

// Decomposes a local formula into strongly local generators and an integer
// polynomial of degree <= p, by partitioning assignments over the graphs F
// on the free-variable index set with distance-2r edge guards and recursing
// over component counts. Budgets: p <= 6, radius <= 16.
PairingPolynomial strongly_local_decomposition(const Formula& phi);

} // namespace limclust
