#include "laxforge/structlin.hpp"

#include <cmath>

namespace laxforge {

cmat LowerToeplitz::dense() const {
    const int m = size();
    cmat out = cmat::Zero(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j <= i; ++j) out(i, j) = c[i - j];
    return out;
}

cvec LowerToeplitz::apply(const cvec& v) const {
    cvec out(v.size(), cx{});
    for (int i = 0; i < size(); ++i)
        for (int j = 0; j <= i; ++j) out[i] += c[i - j] * v[j];
    return out;
}

LowerToeplitz toeplitz_from_times(const TimeChart& chart, const PoleProfile& profile, int pole) {
    LowerToeplitz m;
    if (pole < 0) {
        const int r = profile.r_inf;
        for (int k = r - 1; k >= 3; --k) m.c.push_back(chart.inf(k));
    } else {
        const int r = profile.poles[pole].r;
        for (int k = r - 1; k >= 1; --k) m.c.push_back(chart.fin(pole, k));
    }
    return m;
}

cvec toeplitz_solve(const LowerToeplitz& m, const cvec& b) {
    if (static_cast<int>(b.size()) != m.size()) throw MalformedInput("toeplitz_solve: size mismatch");
    if (!m.invertible()) throw SingularMatrix("lower Toeplitz matrix with zero diagonal");
    cvec x(b.size());
    for (int i = 0; i < m.size(); ++i) {
        cx s = b[i];
        for (int j = 0; j < i; ++j) s -= m.c[i - j] * x[j];
        x[i] = s / m.c[0];
    }
    return x;
}

LowerToeplitz operator*(const LowerToeplitz& a, const LowerToeplitz& b) {
    if (a.size() != b.size()) throw MalformedInput("Toeplitz product: size mismatch");
    LowerToeplitz out{cvec(a.size(), cx{})};
    for (int i = 0; i < a.size(); ++i)
        for (int j = 0; j <= i; ++j) out.c[i] += a.c[j] * b.c[i - j];
    return out;
}

cvec to_std(const cvecE& v) { return cvec(v.data(), v.data() + v.size()); }

cvecE to_eigen(const cvec& v) {
    cvecE out(static_cast<Eigen::Index>(v.size()));
    for (size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
    return out;
}

SolveResult dense_solve(const cmat& a, const cvec& b) {
    if (a.rows() != a.cols() || a.rows() != static_cast<Eigen::Index>(b.size()))
        throw MalformedInput("dense_solve: shape mismatch");
    SolveResult res;
    if (a.rows() == 0) return res;
    Eigen::PartialPivLU<cmat> lu(a);
    cmat inv = lu.inverse();
    auto norm1 = [](const cmat& m) { return m.cwiseAbs().colwise().sum().maxCoeff(); };
    res.cond = norm1(a) * norm1(inv);
    if (!std::isfinite(res.cond)) throw SingularMatrix("singular dense system");
    res.ill_conditioned = res.cond > 1e12;
    res.x = to_std(lu.solve(to_eigen(b)));
    return res;
}

int VandermondeStack::columns() const {
    int n = 0;
    for (const auto& b : blocks) n += b.count;
    return n;
}

cmat VandermondeStack::dense() const {
    cmat v(static_cast<Eigen::Index>(nodes.size()), columns());
    for (size_t i = 0; i < nodes.size(); ++i) {
        int col = 0;
        for (const auto& b : blocks) {
            if (b.pole.infinite) {
                cx pw = 1.0;
                for (int j = 0; j < b.count; ++j, pw *= nodes[i]) v(i, col++) = pw;
            } else {
                cx w = 1.0 / (nodes[i] - b.pole.x), pw = w;
                for (int j = 1; j <= b.count; ++j, pw *= w) v(i, col++) = pw;
            }
        }
    }
    return v;
}

void require_separated_nodes(const VandermondeStack& stack) {
    double scale = 1.0;
    for (cx q : stack.nodes) scale = std::max(scale, std::abs(q));
    for (size_t i = 0; i < stack.nodes.size(); ++i) {
        for (size_t j = 0; j < i; ++j)
            if (std::abs(stack.nodes[i] - stack.nodes[j]) < 1e-10 * scale)
                throw DegenerateConfiguration("coincident Vandermonde nodes");
        for (const auto& b : stack.blocks)
            if (!b.pole.infinite && std::abs(stack.nodes[i] - b.pole.x) < 1e-10 * scale)
                throw DegenerateConfiguration("Vandermonde node on a pole");
    }
}

SolveResult vandermonde_solve(const VandermondeStack& stack, const cvec& rhs, bool transposed) {
    require_separated_nodes(stack);
    cmat v = stack.dense();
    if (v.rows() != v.cols()) throw MalformedInput("Vandermonde stack is not square");
    return dense_solve(transposed ? cmat(v.transpose()) : v, rhs);
}

}  // namespace laxforge
