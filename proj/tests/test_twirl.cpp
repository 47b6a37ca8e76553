#include <gtest/gtest.h>

#include "hamqec/control.hpp"
#include "hamqec/rng.hpp"
#include "hamqec/twirl.hpp"

using namespace hamqec;

namespace {

MatC random_unitary(int d, uint64_t seed) {
    Stream r(seed);
    MatC g(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) g(i, j) = cplx(r.normal(), r.normal());
    Eigen::HouseholderQR<MatC> qr(g);
    return qr.householderQ();
}

// Kronecker products of explicit 2x2 Paulis
MatC kron_pauli(const std::string &s) {
    MatC out = MatC::Identity(1, 1);
    for (char c : s) {
        MatC p(2, 2);
        if (c == 'I') p << 1, 0, 0, 1;
        if (c == 'X') p << 0, 1, 1, 0;
        if (c == 'Y') p << 0, cplx(0, -1), cplx(0, 1), 0;
        if (c == 'Z') p << 1, 0, 0, -1;
        out = kron(out, p);
    }
    return out;
}

}  // namespace

TEST(PauliExpand, Identity) {
    VecC a = pauli_expand(MatC::Identity(8, 8));
    EXPECT_NEAR(std::abs(a(0) - 1.0), 0, 1e-15);
    for (int j = 1; j < a.size(); ++j) EXPECT_NEAR(std::abs(a(j)), 0, 1e-15);
}

TEST(PauliExpand, ZZRotation) {
    const double th = 0.37;
    MatC zz = kron_pauli("ZZ");
    MatC u = std::cos(th / 2) * MatC::Identity(4, 4) - cplx(0, std::sin(th / 2)) * zz;
    PauliErrorTable t = twirl_probs(pauli_expand(u));
    EXPECT_NEAR(t.probs[pauli_index("II")], std::pow(std::cos(th / 2), 2), 1e-14);
    EXPECT_NEAR(t.probs[pauli_index("ZZ")], std::pow(std::sin(th / 2), 2), 1e-14);
}

TEST(PauliExpand, MatchesTraceOracle) {
    MatC u = random_unitary(8, 3);
    VecC a = pauli_expand(u);
    double s = 0;
    for (uint64_t j = 0; j < 64; ++j) {
        std::string ps = pauli_string(j, 3);
        cplx ref = (kron_pauli(ps).adjoint() * u).trace() / 8.0;
        EXPECT_LT(std::abs(a(j) - ref), 1e-13) << ps;
        EXPECT_LT((pauli_matrix(j, 3) - kron_pauli(ps)).norm(), 1e-15);
        s += std::norm(a(j));
    }
    EXPECT_NEAR(s, 1.0, 1e-10);
}

TEST(PauliExpand, BackwardMatchesFiniteDifference) {
    MatC u = random_unitary(4, 5), du = random_unitary(4, 6);
    VecC w(16);
    Stream r(9);
    for (int j = 0; j < 16; ++j) w(j) = cplx(r.normal(), r.normal());
    auto f = [&](const MatC &x) { return re_inner(w, pauli_expand(x)); };
    const double h = 1e-6;
    double fd = (f(u + h * du) - f(u - h * du)) / (2 * h);
    EXPECT_NEAR(re_inner(pauli_expand_backward(w, 2), du), fd, 1e-8);
}

TEST(Twirl, GlobalPhaseInvariance) {
    MatC u = random_unitary(16, 7);
    auto a = twirl_probs(pauli_expand(u));
    auto b = twirl_probs(pauli_expand(std::polar(1.0, 1.234) * u));
    for (size_t j = 0; j < a.probs.size(); ++j) EXPECT_NEAR(a.probs[j], b.probs[j], 1e-12);
}

TEST(Twirl, CliffordCovariance) {
    MatC u = random_unitary(8, 8);
    MatC h(2, 2), s(2, 2);
    h << 1, 1, 1, -1;
    h /= std::sqrt(2.0);
    s << 1, 0, 0, cplx(0, 1);
    MatC c = kron(kron(h, s), h * s);
    auto a = twirl_probs(pauli_expand(u)).probs;
    auto b = twirl_probs(pauli_expand(c * u * c.adjoint())).probs;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    for (size_t j = 0; j < a.size(); ++j) EXPECT_NEAR(a[j], b[j], 1e-10);
}

TEST(Lcpem, RegionCounts) {
    auto reg = default_region();
    GateLayout one = single_qubit_layout(reg);
    EXPECT_EQ(one.num_locations(), 6);
    EXPECT_EQ(one.count_connected(2), 7);
    EXPECT_EQ(one.count_connected(3), 10);
    GateLayout two = cnot_layout(reg, {{0, 1}, {2, 3}, {4, 5}});
    EXPECT_EQ(two.num_locations(), 3);
    EXPECT_EQ(two.count_connected(2), 2);
    EXPECT_EQ(two.count_connected(3), 1);
}

TEST(Lcpem, SingleEntryAggregation) {
    PauliErrorTable t;
    t.m = 6;
    t.probs.assign(4096, 0.0);
    t.probs[pauli_index("ZIZIII")] = 1e-4;  // Q02 and Q12
    t.probs[0] = 1 - 1e-4;
    auto e = extract_lcpem(t, single_qubit_layout(default_region()));
    EXPECT_DOUBLE_EQ(e.p[1], 1e-4 / 7);
    EXPECT_EQ(e.p[0], 0.0);
    EXPECT_EQ(e.p[2], 0.0);
}

TEST(Lcpem, CnotStringOnOneGateIsOneLocation) {
    PauliErrorTable t;
    t.m = 6;
    t.probs.assign(4096, 0.0);
    t.probs[pauli_index("ZXIIII")] = 3e-5;
    auto e = extract_lcpem(t, cnot_layout(default_region(), {{0, 1}, {2, 3}, {4, 5}}));
    EXPECT_DOUBLE_EQ(e.p[0], 1e-5);
}

TEST(Lcpem, MassConservation) {
    MatC u = random_unitary(64, 10);
    // push it close to identity so the table is realistic
    Eigen::ComplexEigenSolver<MatC> es(u);
    VecC ph = es.eigenvalues();
    for (int i = 0; i < ph.size(); ++i) ph(i) = std::polar(1.0, 0.05 * std::arg(ph(i)));
    MatC v = es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().inverse();
    auto t = twirl_probs(pauli_expand(v));
    for (auto g : {single_qubit_layout(default_region()), cnot_layout(default_region(), {{0, 1}, {2, 3}, {4, 5}})}) {
        auto e = extract_lcpem(t, g);
        double s = e.dropped_high + e.dropped_disconnected;
        for (int k = 0; k < 3; ++k) s += e.p[k] * e.n[k];
        EXPECT_NEAR(s, t.total() - t.identity(), 1e-12);
    }
}

TEST(Lcpem, AddDecoherence) {
    EXPECT_NEAR(add_decoherence(0, 1, 1e-5, 40), 4e-4, 1e-18);
    EXPECT_EQ(add_decoherence(8.419e-8, 1, 0, 40), 8.419e-8);
    EXPECT_NEAR(add_decoherence(7.390e-6, 2, 1e-5, 130), 7.390e-6 + 2.6e-3, 1e-15);
    const double a = add_decoherence(1e-4, 2, 1e-5, 130), b = add_decoherence(1e-4, 2, 2e-5, 130);
    EXPECT_NEAR((b - a) / 1e-5, 260.0, 1e-9);
    EXPECT_THROW(add_decoherence(0.9, 2, 1e-3, 130), std::domain_error);
}

TEST(Lcpem, JsonExportSortedWithSupport) {
    PauliErrorTable t;
    t.m = 6;
    t.probs.assign(4096, 0.0);
    t.probs[0] = 0.999;
    t.probs[pauli_index("ZIIZII")] = 6e-4;
    t.probs[pauli_index("IIIIIX")] = 4e-4;
    auto j = pauli_table_json(t, single_qubit_layout(default_region()), 3);
    EXPECT_EQ(j[0]["pauli"], "IIIIII");
    EXPECT_EQ(j[1]["pauli"], "ZIIZII");
    EXPECT_EQ(j[1]["k"], 2);
    EXPECT_EQ(j[1]["connected"], false);
    EXPECT_EQ(j[2]["k"], 1);
}
