#include <gtest/gtest.h>

#include <random>
#include <set>

#include "hamqec/circuit.hpp"

using namespace hamqec;

namespace {

// Aaronson-Gottesman tableau, used only as an oracle
class Tableau {
  public:
    explicit Tableau(int n) : n_(n), x_(2 * n + 1, std::vector<uint8_t>(n)), z_(x_), r_(2 * n + 1) {
        for (int i = 0; i < n; ++i) {
            x_[i][i] = 1;
            z_[n + i][i] = 1;
        }
    }
    void h(int a) {
        for (int i = 0; i < 2 * n_; ++i) {
            r_[i] ^= x_[i][a] & z_[i][a];
            std::swap(x_[i][a], z_[i][a]);
        }
    }
    void cx(int a, int b) {
        for (int i = 0; i < 2 * n_; ++i) {
            r_[i] ^= x_[i][a] & z_[i][b] & (x_[i][b] ^ z_[i][a] ^ 1);
            x_[i][b] ^= x_[i][a];
            z_[i][a] ^= z_[i][b];
        }
    }
    void pauli(int a, int dg) {
        for (int i = 0; i < 2 * n_; ++i) r_[i] ^= (pauli_x(dg) & z_[i][a]) ^ (pauli_z(dg) & x_[i][a]);
    }
    int measure(int a, std::mt19937 &rng) {
        int p = -1;
        for (int i = n_; i < 2 * n_; ++i)
            if (x_[i][a]) {
                p = i;
                break;
            }
        if (p >= 0) {
            for (int i = 0; i < 2 * n_; ++i)
                if (i != p && x_[i][a]) rowsum(i, p);
            x_[p - n_] = x_[p];
            z_[p - n_] = z_[p];
            r_[p - n_] = r_[p];
            std::fill(x_[p].begin(), x_[p].end(), 0);
            std::fill(z_[p].begin(), z_[p].end(), 0);
            z_[p][a] = 1;
            r_[p] = rng() & 1;
            return r_[p];
        }
        int s = 2 * n_;
        std::fill(x_[s].begin(), x_[s].end(), 0);
        std::fill(z_[s].begin(), z_[s].end(), 0);
        r_[s] = 0;
        for (int i = 0; i < n_; ++i)
            if (x_[i][a]) rowsum(s, i + n_);
        return r_[s];
    }

  private:
    static int g(int x1, int z1, int x2, int z2) {
        if (!x1 && !z1) return 0;
        if (x1 && z1) return z2 - x2;
        if (x1) return z2 * (2 * x2 - 1);
        return x2 * (1 - 2 * z2);
    }
    void rowsum(int h, int i) {
        int s = 2 * r_[h] + 2 * r_[i];
        for (int j = 0; j < n_; ++j) s += g(x_[i][j], z_[i][j], x_[h][j], z_[h][j]);
        r_[h] = ((s % 4) + 4) % 4 == 2;
        for (int j = 0; j < n_; ++j) {
            x_[h][j] ^= x_[i][j];
            z_[h][j] ^= z_[i][j];
        }
    }
    int n_;
    std::vector<std::vector<uint8_t>> x_, z_;
    std::vector<uint8_t> r_;
};

SimulationResult tableau_run(const SyndromeCircuit &sc, const SampledError &e, uint32_t seed) {
    Tableau t(sc.num_qubits());
    std::mt19937 rng(seed);
    std::vector<uint8_t> rec;
    for (int li = 0; li < int(sc.layers.size()); ++li) {
        const Layer &l = sc.layers[li];
        switch (l.kind) {
            case LayerKind::Reset:
                for (int q : l.targets)
                    if (t.measure(q, rng)) t.pauli(q, 1);
                break;
            case LayerKind::Hadamard:
                for (int q : l.targets) t.h(q);
                break;
            case LayerKind::Cnot:
                for (auto [c, x] : l.cnots) t.cx(c, x);
                break;
            default:
                for (int q : l.targets) {
                    int m = int(rec.size());
                    rec.push_back(uint8_t(t.measure(q, rng) ^ e.meas_flip[m]));
                }
        }
        for (int q = 0; q < sc.num_qubits(); ++q)
            if (e.frame[li][q]) t.pauli(q, e.frame[li][q]);
    }
    SimulationResult out;
    for (auto &det : sc.detectors) {
        uint8_t v = 0;
        for (int m : det) v ^= rec[m];
        out.detection_events.push_back(v);
    }
    uint8_t lg = 0;
    for (int m : sc.observable) lg ^= rec[m];
    out.logical_flip = lg;
    return out;
}

SampledError empty_error(const SyndromeCircuit &sc) {
    SampledError e;
    e.frame.assign(sc.layers.size(), std::vector<uint8_t>(sc.num_qubits(), 0));
    e.meas_flip.assign(sc.measurements.size(), 0);
    return e;
}

LcpemParams noisy_params() {
    LcpemParams p;
    p.p1_1q = 0.02;
    p.p2_1q = 0.02;
    p.p3_1q = 0.02;
    p.p1_2q = 0.02;
    p.p2_2q = 0.02;
    p.p3_2q = 0.02;
    p.p_reset = 0.02;
    p.p_measure = 0.02;
    p.r = 5e-5;
    return p;
}

int count_ones(const std::vector<uint8_t> &v) { return int(std::count(v.begin(), v.end(), 1)); }

}  // namespace

TEST(Circuit, D3StructureOneRound) {
    auto sc = build_syndrome_circuit(3, 1);
    EXPECT_EQ(sc.data.size(), 9u);
    EXPECT_EQ(sc.x_anc.size() + sc.z_anc.size(), 8u);
    EXPECT_EQ(sc.x_anc.size(), 4u);
    int ncx = 0;
    for (auto &l : sc.layers) ncx += l.kind == LayerKind::Cnot;
    EXPECT_EQ(ncx, 4);
    for (int a : sc.z_anc) {
        int n = 0;
        for (auto [li, q] : sc.measurements) n += q == a;
        EXPECT_EQ(n, 1);
    }
    EXPECT_EQ(sc.num_detectors(), 8);
}

TEST(Circuit, ClosedFormCountsD7) {
    const int d = 7, rounds = 7;
    auto sc = build_syndrome_circuit(d, rounds);
    EXPECT_EQ(int(sc.data.size()), d * d);
    EXPECT_EQ(int(sc.x_anc.size() + sc.z_anc.size()), d * d - 1);
    EXPECT_EQ(int(sc.layers.size()), 8 * rounds + 1);
    for (int rd = 0; rd < rounds; ++rd) {
        int nx = 0, nz = 0;
        for (auto &l : sc.layers)
            if (l.kind == LayerKind::Cnot && l.round == rd)
                for (auto [c, t] : l.cnots) (sc.qubits[c].role == Role::XAnc ? nx : nz) += 1;
        EXPECT_EQ(nx, 2 * d * (d - 1));
        EXPECT_EQ(nz, 2 * d * (d - 1));
    }
    EXPECT_EQ(sc.num_detectors(), (rounds + 1) * (d * d - 1) / 2);
}

TEST(Circuit, OneOperationPerQubitPerLayer) {
    auto sc = build_syndrome_circuit(5, 2);
    for (auto &l : sc.layers) {
        std::vector<int> used(sc.num_qubits(), 0);
        for (int q : l.targets) ++used[q];
        for (auto [c, t] : l.cnots) {
            ++used[c];
            ++used[t];
            // CNOTs act along hardware edges
            EXPECT_TRUE(std::binary_search(sc.neighbors[c].begin(), sc.neighbors[c].end(), t));
        }
        for (int u : used) EXPECT_LE(u, 1);
    }
}

TEST(Circuit, EvenDistanceRejected) {
    EXPECT_THROW(build_syndrome_circuit(4, 1), std::invalid_argument);
    EXPECT_THROW(build_syndrome_circuit(1, 1), std::invalid_argument);
    EXPECT_THROW(build_syndrome_circuit(3, 0), std::invalid_argument);
}

TEST(Circuit, TextExportOneLinePerLayer) {
    auto sc = build_syndrome_circuit(3, 2);
    std::string s = sc.to_text();
    EXPECT_EQ(int(std::count(s.begin(), s.end(), '\n')), int(sc.layers.size()) + 1);
    EXPECT_EQ(s.find("\nR "), s.find('\n'));
}

TEST(Circuit, NoiselessRunIsTrivial) {
    auto sc = build_syndrome_circuit(3, 3);
    auto r = simulate(sc, empty_error(sc));
    EXPECT_EQ(count_ones(r.detection_events), 0);
    EXPECT_FALSE(r.logical_flip);
    auto t = tableau_run(sc, empty_error(sc), 7);
    EXPECT_EQ(count_ones(t.detection_events), 0);
    EXPECT_FALSE(t.logical_flip);
}

TEST(Circuit, SingleDataXGivesTwoEventsOrOneAtBoundary) {
    auto sc = build_syndrome_circuit(5, 3);
    int meas_layer = -1;
    for (int li = 0; li < int(sc.layers.size()); ++li)
        if (sc.layers[li].kind == LayerKind::Measure && sc.layers[li].round == 0) meas_layer = li;
    for (int q : sc.data) {
        auto e = empty_error(sc);
        e.frame[meas_layer][q] = 1;
        auto r = simulate(sc, e);
        int n = count_ones(r.detection_events);
        int nz = 0;
        for (int a : sc.z_anc)
            for (int dq : sc.plaquette_data[a]) nz += dq == q;
        EXPECT_EQ(n, nz);
        EXPECT_TRUE(n == 1 || n == 2);
        EXPECT_EQ(r.logical_flip, sc.qubits[q].r == 0);
    }
}

TEST(Circuit, ZFrameOnDataIsInvisible) {
    auto sc = build_syndrome_circuit(5, 3);
    for (int li = 0; li < int(sc.layers.size()); ++li) {
        auto e = empty_error(sc);
        for (int q : sc.data) e.frame[li][q] = 3;
        auto r = simulate(sc, e);
        EXPECT_EQ(count_ones(r.detection_events), 0);
        EXPECT_FALSE(r.logical_flip);
    }
}

TEST(Sampler, ZeroParamsGiveEmptyFrame) {
    auto sc = build_syndrome_circuit(3, 2);
    for (uint64_t s = 0; s < 20; ++s) {
        auto e = sample_lcpem(sc, LcpemParams{}, 11, s);
        EXPECT_TRUE(e.empty());
        EXPECT_TRUE(e.provenance.empty());
    }
}

TEST(Sampler, ForcedTwoLocationBranchOnHadamards) {
    auto sc = build_syndrome_circuit(3, 1);
    auto locs = build_locations(sc);
    LcpemParams p;
    p.p2_1q = 1;
    auto e = sample_lcpem(sc, locs, p, 5);
    int nh = 0;
    for (auto &l : locs) nh += l.kind == LocKind::Gate1;
    EXPECT_EQ(int(e.provenance.size()), nh);
    for (auto &ev : e.provenance) {
        const Location &c = locs[ev.location];
        ASSERT_EQ(c.kind, LocKind::Gate1);
        EXPECT_EQ(ev.k, 2);
        ASSERT_EQ(ev.paulis.size(), 2u);
        EXPECT_EQ(ev.paulis[0].first, c.q0);
        EXPECT_NE(ev.paulis[0].second, 0);
        EXPECT_NE(ev.paulis[1].first, c.q0);
        EXPECT_TRUE(std::binary_search(sc.neighbors[c.q0].begin(), sc.neighbors[c.q0].end(), ev.paulis[1].first));
    }
}

TEST(Sampler, StarNeighbourhoodsOnLayers) {
    auto sc = build_syndrome_circuit(5, 1);
    auto locs = build_locations(sc);
    for (auto &l : locs) {
        if (l.kind == LocKind::Gate1) {
            EXPECT_EQ(l.nbr.size(), sc.neighbors[l.q0].size());
        }
        if (l.kind == LocKind::Gate2)
            for (int o : l.nbr) {
                EXPECT_EQ(locs[o].kind, LocKind::Gate2);
                EXPECT_EQ(locs[o].layer, l.layer);
            }
        if (l.kind == LocKind::Idle || l.kind == LocKind::Reset || l.kind == LocKind::Measure) {
            EXPECT_TRUE(l.nbr.empty());
        }
    }
}

TEST(Sampler, TwoQubitEventFrequency) {
    auto sc = build_syndrome_circuit(3, 1);
    auto locs = build_locations(sc);
    LcpemParams p;
    p.p1_2q = 0.01;
    int ngate = 0;
    for (auto &l : locs) ngate += l.kind == LocKind::Gate2;
    const int shots = (1000000 + ngate - 1) / ngate;
    long events = 0;
    for (int s = 0; s < shots; ++s) {
        auto e = sample_lcpem(sc, locs, p, 99, s);
        for (auto &ev : e.provenance) {
            ASSERT_EQ(locs[ev.location].kind, LocKind::Gate2);
            ASSERT_EQ(ev.k, 1);
            ++events;
        }
    }
    double n = double(shots) * ngate;
    double sigma = std::sqrt(n * 0.01 * 0.99);
    EXPECT_NEAR(double(events), 0.01 * n, 3 * sigma);
}

TEST(Sampler, EventsRespectCentralLocationAndLattice) {
    auto sc = build_syndrome_circuit(5, 2);
    auto locs = build_locations(sc);
    auto p = noisy_params();
    for (uint64_t s = 0; s < 200; ++s) {
        auto e = sample_lcpem(sc, locs, p, 3, s);
        for (auto &ev : e.provenance) {
            const Location &c = locs[ev.location];
            for (auto [q, dg] : ev.paulis) EXPECT_LT(q, sc.num_qubits());
            if (c.kind == LocKind::Gate2) {
                EXPECT_TRUE(ev.paulis[0].second || ev.paulis[1].second);
                EXPECT_EQ(ev.paulis[0].first, c.q0);
                EXPECT_EQ(ev.paulis[1].first, c.q1);
            } else if (c.kind != LocKind::Measure) {
                EXPECT_EQ(ev.paulis[0].first, c.q0);
                EXPECT_NE(ev.paulis[0].second, 0);
            }
        }
    }
}

TEST(Sampler, DeterministicGivenSeed) {
    auto sc = build_syndrome_circuit(3, 3);
    auto p = noisy_params();
    auto a = sample_lcpem(sc, p, 42, 17), b = sample_lcpem(sc, p, 42, 17), c = sample_lcpem(sc, p, 43, 17);
    EXPECT_EQ(a.frame, b.frame);
    EXPECT_EQ(a.meas_flip, b.meas_flip);
    EXPECT_TRUE(a.frame != c.frame || a.meas_flip != c.meas_flip);
}

TEST(Sampler, MultiplicationOrderIrrelevant) {
    auto sc = build_syndrome_circuit(3, 2);
    auto p = noisy_params();
    std::mt19937 rng(3);
    for (uint64_t s = 0; s < 50; ++s) {
        auto e = sample_lcpem(sc, p, 8, s);
        auto ref = simulate(sc, e);
        auto prov = e.provenance;
        std::shuffle(prov.begin(), prov.end(), rng);
        auto f = empty_error(sc);
        auto locs = build_locations(sc);
        for (auto &ev : prov)
            for (auto [q, dg] : ev.paulis) {
                if (q < 0) {
                    f.meas_flip[-1 - q] ^= 1;
                    continue;
                }
                uint8_t &v = f.frame[locs[ev.location].layer][q];
                v = uint8_t(pauli_from_xz(pauli_x(v) ^ pauli_x(dg), pauli_z(v) ^ pauli_z(dg)));
            }
        auto r = simulate(sc, f);
        EXPECT_EQ(r.detection_events, ref.detection_events);
        EXPECT_EQ(r.logical_flip, ref.logical_flip);
    }
}

TEST(Sampler, TableauOracleD3OneRound) {
    auto sc = build_syndrome_circuit(3, 1);
    auto p = noisy_params();
    int nontrivial = 0;
    for (uint64_t s = 0; s < 300; ++s) {
        auto e = sample_lcpem(sc, p, 1234, s);
        auto a = simulate(sc, e);
        auto b = tableau_run(sc, e, uint32_t(s));
        EXPECT_EQ(a.detection_events, b.detection_events) << "shot " << s;
        EXPECT_EQ(a.logical_flip, b.logical_flip) << "shot " << s;
        nontrivial += count_ones(a.detection_events) > 0;
    }
    EXPECT_GT(nontrivial, 50);
}

TEST(Sampler, TableauOracleMultiRound) {
    auto sc = build_syndrome_circuit(3, 3);
    auto p = noisy_params();
    for (uint64_t s = 0; s < 100; ++s) {
        auto e = sample_lcpem(sc, p, 77, s);
        auto a = simulate(sc, e);
        auto b = tableau_run(sc, e, uint32_t(s) + 1000);
        EXPECT_EQ(a.detection_events, b.detection_events);
        EXPECT_EQ(a.logical_flip, b.logical_flip);
    }
}

TEST(FastSampler, MatchesFrameSimulation) {
    for (auto [d, rounds] : {std::pair{3, 3}, std::pair{5, 2}}) {
        auto sc = build_syndrome_circuit(d, rounds);
        auto p = noisy_params();
        ShotSampler fs(sc, {p});
        std::vector<uint64_t> out(fs.words());
        for (uint64_t s = 0; s < 500; ++s) {
            fs.sample(21, s, out.data());
            auto r = simulate(sc, sample_lcpem(sc, fs.locations(), p, 21, s));
            for (int i = 0; i < sc.num_detectors(); ++i) EXPECT_EQ(int(out[i / 64] >> (i % 64) & 1), r.detection_events[i]);
            int lb = fs.sensitivity().logical_bit();
            EXPECT_EQ(bool(out[lb / 64] >> (lb % 64) & 1), r.logical_flip);
        }
    }
}

TEST(FastSampler, MultiSettingEqualsSeparateRuns) {
    auto sc = build_syndrome_circuit(3, 3);
    auto a = noisy_params(), b = a;
    b.p2_2q *= 1.1;
    b.p_measure *= 0.9;
    b.p1_1q = 0;
    ShotSampler both(sc, {a, b}), sa(sc, {a}), sb(sc, {b});
    const int W = both.words();
    std::vector<uint64_t> o2(2 * W), oa(W), ob(W);
    for (uint64_t s = 0; s < 1000; ++s) {
        both.sample(5, s, o2.data());
        sa.sample(5, s, oa.data());
        sb.sample(5, s, ob.data());
        EXPECT_TRUE(std::equal(oa.begin(), oa.end(), o2.begin()));
        EXPECT_TRUE(std::equal(ob.begin(), ob.end(), o2.begin() + W));
    }
}

TEST(FastSampler, HadamardSingleLocationErrorsHaveNoEffect) {
    auto sc = build_syndrome_circuit(5, 3);
    ShotSampler fs(sc, {LcpemParams{}});
    const auto &sens = fs.sensitivity();
    for (auto &l : fs.locations()) {
        if (l.kind != LocKind::Gate1) continue;
        for (int xz = 0; xz < 2; ++xz) {
            const uint64_t *p = sens.at(l.layer, l.q0, xz);
            for (int w = 0; w < sens.words; ++w) EXPECT_EQ(p[w], 0u);
        }
    }
}

TEST(FastSampler, ToggleP1SingleQubitCoupledRuns) {
    auto sc = build_syndrome_circuit(5, 5);
    auto a = table2_params(1e-5), b = a;
    b.p1_1q = 0.05;
    ShotSampler fs(sc, {a, b});
    const int W = fs.words();
    std::vector<uint64_t> o(2 * W);
    for (uint64_t s = 0; s < 100000; ++s) {
        fs.sample(9, s, o.data());
        ASSERT_TRUE(std::equal(o.begin(), o.begin() + W, o.begin() + W)) << s;
    }
}
