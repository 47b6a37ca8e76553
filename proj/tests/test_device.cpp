#include <gtest/gtest.h>

#include "hamqec/device.hpp"

using namespace hamqec;

namespace {

// sinc-DVR on a phase grid, independent of the oscillator basis
VecR dvr_levels(const FluxoniumParams &p, int keep) {
    const int m = 1201;
    const double center = -p.phi_ext, half = 14.0;
    const double dx = 2 * half / (m - 1);
    MatR h = MatR::Zero(m, m);
    for (int i = 0; i < m; ++i) {
        double x = center - half + i * dx;
        h(i, i) = 4 * p.e_c * kPi * kPi / (3 * dx * dx) + 0.5 * p.e_l * (x + p.phi_ext) * (x + p.phi_ext) -
                  p.e_j * std::cos(x);
        for (int j = 0; j < m; ++j)
            if (j != i) h(i, j) = 4 * p.e_c * 2.0 * ((i - j) % 2 ? -1.0 : 1.0) / (dx * dx * (i - j) * (i - j));
    }
    return sym_eig(h).values.head(keep);
}

MatC kron_oracle(const IdleHamiltonian &h) {
    const int m = h.num_sites(), k = h.levels;
    MatC id = MatC::Identity(k, k);
    MatC out = MatC::Zero(h.dim(), h.dim());
    for (int i = 0; i < m; ++i) {
        std::vector<MatC> ops(m, id);
        ops[i] = h.qubits[i].energies.cast<cplx>().asDiagonal();
        out += kron_all(ops);
    }
    for (auto [i, j] : h.edges) {
        std::vector<MatC> a(m, id), b(m, id);
        a[i] = h.qubits[i].n_op;
        a[j] = h.qubits[j].n_op;
        b[i] = h.qubits[i].phi_op;
        b[j] = h.qubits[j].phi_op;
        out += h.j_c * kron_all(a) - h.j_l * kron_all(b);
    }
    return out;
}

std::map<Coord, TruncatedQubit> region_qubits(const LatticeSpec &spec, const std::vector<Coord> &region) {
    auto params = sample_disordered_lattice(spec);
    std::map<Coord, TruncatedQubit> q;
    for (auto &c : region) q[c] = fluxonium_spectrum(params.at(c), spec.basis_size, spec.keep_levels);
    return q;
}

}  // namespace

TEST(Fluxonium, MatchesPhaseGridOracle) {
    FluxoniumParams p{1.0, 4.0, 1.0, kPi};
    TruncatedQubit q = fluxonium_spectrum(p, 60, 4);
    VecR ref = dvr_levels(p, 4);
    for (int i = 1; i < 4; ++i) EXPECT_NEAR(q.energies(i) - q.energies(0), ref(i) - ref(0), 1e-8);
}

TEST(Fluxonium, LargeBasisOracle) {
    FluxoniumParams p{1.0, 4.0, 1.0, kPi};
    FluxoniumSolution big = detail::fluxonium_at_size(p, 200, 2);
    TruncatedQubit q = fluxonium_spectrum(p, 60, 2);
    EXPECT_NEAR(q.energies(1) - q.energies(0), big.qubit.energies(1) - big.qubit.energies(0), 1e-8);
}

TEST(Fluxonium, HarmonicLimit) {
    FluxoniumParams p{0.7, 0.0, 1.3, 0.0};
    TruncatedQubit q = fluxonium_spectrum(p, 60, 5);
    const double w = std::sqrt(8 * 0.7 * 1.3);
    for (int i = 1; i < 5; ++i) EXPECT_NEAR(q.energies(i) - q.energies(i - 1), w, 1e-6);
}

TEST(Fluxonium, Label3FrequencyBracketsDrives) {
    auto base = default_base_params();
    TruncatedQubit q = fluxonium_spectrum(base[3], 60, 3);
    double f01 = q.energies(1) - q.energies(0);
    EXPECT_GT(f01, 0.3);
    EXPECT_LT(f01, 0.9);
}

TEST(Fluxonium, BranchPhaseHasZeroMeanAtSweetSpot) {
    FluxoniumSolution s = solve_fluxonium({1.0, 4.0, 0.9, kPi}, 60, 4);
    for (int i = 0; i < 4; ++i) {
        EXPECT_LT(std::abs(s.qubit.phi_op(i, i)), 1e-8);
        EXPECT_LT(std::abs(s.qubit.n_op(i, i)), 1e-12);
    }
    EXPECT_GT(std::abs(s.qubit.phi_op(0, 1)), 0.1);
}

TEST(Fluxonium, OperatorsHermitianAndDiagonalMatches) {
    FluxoniumSolution s = solve_fluxonium({1.0, 4.0, 0.9, kPi}, 60, 4);
    EXPECT_LT((s.qubit.n_op - s.qubit.n_op.adjoint()).norm(), 1e-12);
    EXPECT_LT((s.qubit.phi_op - s.qubit.phi_op.adjoint()).norm(), 1e-12);
    for (int i = 1; i < 4; ++i) EXPECT_GT(s.qubit.energies(i), s.qubit.energies(i - 1));
    MatR h = 1.0 * s.d_e_c + 0.9 * s.d_e_l + 4.0 * s.d_e_j;
    MatR vk = s.evecs.leftCols(4);
    MatR hd = vk.transpose() * h * vk;
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(hd(i, i), s.qubit.energies(i), 1e-10);
}

TEST(Fluxonium, SweetSpotSymmetry) {
    VecR a = fluxonium_spectrum({1.0, 4.0, 1.1, kPi}, 60, 4).energies;
    VecR b = fluxonium_spectrum({1.0, 4.0, 1.1, -kPi}, 60, 4).energies;
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Fluxonium, RejectsBadInput) {
    EXPECT_THROW(fluxonium_spectrum({1, 4, 1, kPi}, 20, 3), std::invalid_argument);
    EXPECT_THROW(fluxonium_spectrum({1, 4, 1, kPi}, 60, 7), std::invalid_argument);
}

TEST(Fluxonium, BackwardMatchesFiniteDifference) {
    FluxoniumParams p{1.02, 3.95, 0.93, kPi};
    const int k = 3;
    Stream rng(7);
    VecR eb(k);
    MatC nb(k, k), pb(k, k);
    for (int i = 0; i < k; ++i) {
        eb(i) = rng.normal();
        for (int j = 0; j < k; ++j) {
            nb(i, j) = cplx(rng.normal(), rng.normal());
            pb(i, j) = cplx(rng.normal(), rng.normal());
        }
    }
    auto loss = [&](const FluxoniumParams &q) {
        TruncatedQubit t = detail::fluxonium_at_size(q, 60, k).qubit;
        return eb.dot(t.energies) + re_inner(nb, t.n_op) + re_inner(pb, t.phi_op);
    };
    auto g = detail::fluxonium_at_size(p, 60, k).backward(eb, nb, pb);
    const double h = 1e-5;
    for (int w = 0; w < 3; ++w) {
        FluxoniumParams a = p, b = p;
        double *pa = w == 0 ? &a.e_c : w == 1 ? &a.e_j : &a.e_l;
        double *pb2 = w == 0 ? &b.e_c : w == 1 ? &b.e_j : &b.e_l;
        *pa += h;
        *pb2 -= h;
        double fd = (loss(a) - loss(b)) / (2 * h);
        EXPECT_NEAR(g[w], fd, 1e-5 * (1 + std::abs(fd))) << w;
    }
}

TEST(Lattice, LabelPatternHasLabel3Twice) {
    LatticeSpec s = default_lattice();
    std::vector<int> labels;
    for (auto &c : default_region()) labels.push_back(s.label(c));
    EXPECT_EQ(labels, (std::vector<int>{3, 4, 5, 1, 2, 3}));
}

TEST(Lattice, ZeroDisorderIsBasePattern) {
    LatticeSpec s = default_lattice();
    s.disorder_sigma = 0;
    for (auto &[c, p] : sample_disordered_lattice(s)) {
        EXPECT_EQ(p.e_c, s.base_params[s.label(c)].e_c);
        EXPECT_EQ(p.e_l, s.base_params[s.label(c)].e_l);
        EXPECT_EQ(p.e_j, s.base_params[s.label(c)].e_j);
    }
}

TEST(Lattice, DisorderDeterministic) {
    LatticeSpec s = default_lattice();
    s.disorder_seed = 42;
    auto a = sample_disordered_lattice(s);
    auto b = sample_disordered_lattice(s);
    for (auto &[c, p] : a) {
        EXPECT_EQ(p.e_c, b[c].e_c);
        EXPECT_EQ(p.e_j, b[c].e_j);
        EXPECT_EQ(p.e_l, b[c].e_l);
    }
    s.disorder_seed = 43;
    auto d = sample_disordered_lattice(s);
    EXPECT_NE((a[Coord{0, 2}].e_c), (d[Coord{0, 2}].e_c));
}

TEST(Lattice, DisorderStatistics) {
    LatticeSpec s = default_lattice();
    s.width = 1;
    s.height = 1;
    double sum = 0, sum2 = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        s.disorder_seed = uint64_t(i);
        double e = sample_disordered_lattice(s).at({0, 0}).e_c;
        sum += e;
        sum2 += e * e;
    }
    double mean = sum / n, sd = std::sqrt(sum2 / n - mean * mean);
    EXPECT_NEAR(sd, 0.01, 0.0005);
}

TEST(IdleHamiltonian, SingleQubitIsDiagonal) {
    LatticeSpec s = default_lattice();
    auto q = region_qubits(s, {{0, 2}});
    IdleHamiltonian h = build_idle_hamiltonian(q, s, {{0, 2}});
    MatR d = h.dense_real();
    EXPECT_LT((d - MatR(q[{0, 2}].energies.asDiagonal())).norm(), 1e-14);
}

TEST(IdleHamiltonian, TensorSumWithoutCoupling) {
    LatticeSpec s = default_lattice();
    s.j_c = s.j_l = 0;
    std::vector<Coord> reg{{0, 2}, {0, 3}};
    auto q = region_qubits(s, reg);
    IdleHamiltonian h = build_idle_hamiltonian(q, s, reg);
    VecR ev = sym_eig(h.dense_real()).values;
    std::vector<double> sums;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) sums.push_back(q[reg[0]].energies(a) + q[reg[1]].energies(b));
    std::sort(sums.begin(), sums.end());
    for (int i = 0; i < 9; ++i) EXPECT_NEAR(ev(i), sums[i], 1e-12);
}

TEST(IdleHamiltonian, SixSiteMatchesKroneckerOracle) {
    LatticeSpec s = default_lattice();
    auto reg = default_region();
    auto q = region_qubits(s, reg);
    IdleHamiltonian h = build_idle_hamiltonian(q, s, reg);
    EXPECT_EQ(h.edges.size(), 7u);
    EXPECT_EQ(h.dim(), 729);
    MatC ref = kron_oracle(h);
    MatC got = h.dense();
    EXPECT_LT((got - ref).norm(), 1e-12 * ref.norm());
    EXPECT_LT((got - got.adjoint()).norm(), 1e-12 * got.norm());
    VecR a = sym_eig(got.real()).values;
    Eigen::SelfAdjointEigenSolver<MatC> es(ref);
    EXPECT_LT((a - es.eigenvalues()).cwiseAbs().maxCoeff(), 1e-10);
}

// n and phi have zero diagonal at the sweet spot, so shifts start at second order
TEST(IdleHamiltonian, WeakCouplingConvergesQuadratically) {
    LatticeSpec s = default_lattice();
    std::vector<Coord> reg{{0, 2}, {0, 3}, {1, 2}};
    auto q = region_qubits(s, reg);
    s.j_c = s.j_l = 0;
    VecR e0 = sym_eig(build_idle_hamiltonian(q, s, reg).dense_real()).values;
    std::vector<double> dev;
    for (double f : {1.0, 0.5, 0.25}) {
        s.j_c = 1.15e-2 * f;
        s.j_l = -2e-3 * f;
        VecR e = sym_eig(build_idle_hamiltonian(q, s, reg).dense_real()).values;
        dev.push_back((e - e0).cwiseAbs().maxCoeff());
    }
    EXPECT_GT(dev[0], dev[1]);
    EXPECT_GT(dev[1], dev[2]);
    EXPECT_NEAR(dev[1] / dev[2], 4.0, 0.4);
}

TEST(IdleHamiltonian, RejectsTooLargeDense) {
    LatticeSpec s = default_lattice();
    s.width = 9;
    s.keep_levels = 2;
    std::vector<Coord> reg;
    for (int c = 0; c < 9; ++c) reg.push_back({0, c});
    auto q = region_qubits(s, reg);
    IdleHamiltonian h = build_idle_hamiltonian(q, s, reg);
    EXPECT_THROW(h.dense_real(), std::length_error);
}
