#pragma once

#include <lapacke.h>

#include <Eigen/Eigenvalues>
#include <vector>

#include "hamqec/common.hpp"

namespace hamqec {

struct SymEig {
    VecR values;   // ascending
    MatR vectors;  // columns
};

// dense real symmetric eigensolve; divide and conquer LAPACK above a small size
inline SymEig sym_eig(const MatR &h) {
    const int n = int(h.rows());
    if (n != h.cols()) throw std::invalid_argument("sym_eig: matrix not square");
    SymEig out;
    if (n <= 48) {
        Eigen::SelfAdjointEigenSolver<MatR> es(h);
        if (es.info() != Eigen::Success) throw NumericalError("sym_eig: eigensolver failed");
        out.values = es.eigenvalues();
        out.vectors = es.eigenvectors();
        return out;
    }
    out.vectors = h;  // column major, dsyevd overwrites with eigenvectors
    out.values.resize(n);
    int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, out.vectors.data(), n, out.values.data());
    if (info != 0) throw NumericalError("sym_eig: dsyevd info=" + std::to_string(info));
    return out;
}

inline MatC kron(const MatC &a, const MatC &b) {
    MatC out(a.rows() * b.rows(), a.cols() * b.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

inline MatC kron_all(const std::vector<MatC> &ops) {
    MatC out = MatC::Identity(1, 1);
    for (const auto &o : ops) out = kron(out, o);
    return out;
}

// exp(-i tau K) for Hermitian K, keeps the eigensystem for the backward map
struct HermExp {
    VecR lam;
    MatC v;
    MatC g;
    double tau = 0;

    HermExp() = default;
    HermExp(const MatC &k, double tau_) : tau(tau_) {
        Eigen::SelfAdjointEigenSolver<MatC> es(k);
        lam = es.eigenvalues();
        v = es.eigenvectors();
        VecC ph(lam.size());
        for (int a = 0; a < lam.size(); ++a) ph(a) = std::polar(1.0, -tau * lam(a));
        g = v * ph.asDiagonal() * v.adjoint();
    }

    // dL = Re sum conj(gbar) dG  ->  kbar with dL = Re sum conj(kbar) dK
    MatC backward(const MatC &gbar) const {
        const int n = int(lam.size());
        MatC b = v.adjoint() * gbar * v;
        for (int a = 0; a < n; ++a)
            for (int c = 0; c < n; ++c) {
                cplx f;
                double d = lam(a) - lam(c);
                cplx ea = std::polar(1.0, -tau * lam(a));
                if (std::abs(d) * tau < 1e-7) {
                    f = cplx(0, -tau) * ea;
                } else {
                    f = (ea - std::polar(1.0, -tau * lam(c))) / d;
                }
                b(a, c) *= std::conj(f);
            }
        return v * b * v.adjoint();
    }
};

// Re <A, B> = Re sum conj(A_ij) B_ij
template <class A, class B>
double re_inner(const A &a, const B &b) {
    return std::real(cplx((a.conjugate().cwiseProduct(b)).sum()));
}

}  // namespace hamqec
