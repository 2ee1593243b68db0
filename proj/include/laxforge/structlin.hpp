#pragma once

#include <Eigen/Dense>

#include "laxforge/model.hpp"

namespace laxforge {

using cmat = Eigen::MatrixXcd;
using cvecE = Eigen::VectorXcd;

// Entry (i,j) = c[i-j] for i >= j.
struct LowerToeplitz {
    cvec c;

    int size() const { return static_cast<int>(c.size()); }
    cx operator()(int i, int j) const { return i >= j ? c[i - j] : cx{}; }
    cmat dense() const;
    cvec apply(const cvec& v) const;
    bool invertible() const { return c.empty() || c[0] != cx{}; }
};

// M_inf: first column (t_{inf,r-1}, ..., t_{inf,3}), size r_inf - 3 (0 below r_inf = 4).
// M_{X_s}: first column (t_{X_s,r_s-1}, ..., t_{X_s,1}), size r_s - 1.
LowerToeplitz toeplitz_from_times(const TimeChart& chart, const PoleProfile& profile, int pole);

// Forward substitution; throws SingularMatrix when c0 = 0.
cvec toeplitz_solve(const LowerToeplitz& m, const cvec& b);
LowerToeplitz operator*(const LowerToeplitz& a, const LowerToeplitz& b);

struct SolveResult {
    cvec x;
    double cond = 1.0;  // 1-norm condition estimate
    bool ill_conditioned = false;
};

// Pivoted dense solve with a condition estimate; throws SingularMatrix on exact breakdown.
SolveResult dense_solve(const cmat& a, const cvec& b);

// Rows are nodes q_i; the infinity block contributes columns q^0..q^{m-1}, a finite block
// at X contributes (q-X)^{-1}..(q-X)^{-m}.
struct VandermondeStack {
    struct Block {
        ExtendedPoint pole;
        int count = 0;
    };
    cvec nodes;
    std::vector<Block> blocks;

    int columns() const;
    cmat dense() const;
};

// Throws DegenerateConfiguration on coincident nodes or nodes on a finite pole.
void require_separated_nodes(const VandermondeStack& stack);

// transposed = true solves V^T x = rhs. Throws DegenerateConfiguration on coincident
// nodes or nodes on a pole.
SolveResult vandermonde_solve(const VandermondeStack& stack, const cvec& rhs, bool transposed);

cvec to_std(const cvecE& v);
cvecE to_eigen(const cvec& v);

}  // namespace laxforge
