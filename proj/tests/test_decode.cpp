#include <gtest/gtest.h>

#include <set>

#include "hamqec/decode.hpp"

using namespace hamqec;

namespace {

SampledError empty_error(const SyndromeCircuit &sc) {
    SampledError e;
    e.frame.assign(sc.layers.size(), std::vector<uint8_t>(sc.num_qubits(), 0));
    e.meas_flip.assign(sc.measurements.size(), 0);
    return e;
}

// fault enumeration through the forward frame simulator
std::set<std::pair<int, int>> enumerate_pairs(const SyndromeCircuit &sc) {
    std::set<std::pair<int, int>> out;
    auto add = [&](const SampledError &e) {
        auto r = simulate(sc, e);
        std::vector<int> hit;
        for (int i = 0; i < sc.num_detectors(); ++i)
            if (r.detection_events[i]) hit.push_back(i);
        if (hit.size() == 1) out.insert({hit[0], sc.num_detectors()});
        if (hit.size() == 2) out.insert({hit[0], hit[1]});
    };
    for (const Location &l : build_locations(sc)) {
        auto e = empty_error(sc);
        if (l.kind == LocKind::Measure) {
            e.meas_flip[l.meas] = 1;
            add(e);
            continue;
        }
        int np = l.q1 >= 0 ? 15 : 3;
        for (int v = 1; v <= np; ++v) {
            auto f = e;
            if (l.q1 >= 0) {
                f.frame[l.layer][l.q0] = uint8_t(v >> 2);
                f.frame[l.layer][l.q1] = uint8_t(v & 3);
            } else {
                f.frame[l.layer][l.q0] = uint8_t(v);
            }
            add(f);
        }
    }
    return out;
}

// BFS over (node, logical parity)
std::vector<int> parity_dist(const DetectorGraph &g, int src) {
    std::vector<int> dist(2 * g.num_nodes(), 1 << 29);
    std::deque<int> q{2 * src};
    dist[2 * src] = 0;
    while (!q.empty()) {
        int s = q.front();
        q.pop_front();
        for (auto [u, e] : g.adj[s / 2]) {
            int t = 2 * u + ((s & 1) ^ int(g.edges[e].logical));
            if (dist[t] > dist[s] + 1) {
                dist[t] = dist[s] + 1;
                q.push_back(t);
            }
        }
    }
    return dist;
}

LcpemParams noisy_params() {
    LcpemParams p;
    p.p1_1q = p.p2_1q = p.p3_1q = 0.01;
    p.p1_2q = p.p2_2q = p.p3_2q = 0.01;
    p.p_reset = p.p_measure = 0.01;
    p.r = 2e-5;
    return p;
}

}  // namespace

TEST(DetectorGraph, DataErrorsBetweenRoundsHaveEdges) {
    auto sc = build_syndrome_circuit(3, 2);
    auto g = build_detector_graph(sc);
    int meas_layer = -1;
    for (int li = 0; li < int(sc.layers.size()); ++li)
        if (sc.layers[li].kind == LayerKind::Measure && sc.layers[li].round == 0) meas_layer = li;
    for (int q : sc.data) {
        auto e = empty_error(sc);
        e.frame[meas_layer][q] = 1;
        auto r = simulate(sc, e);
        std::vector<int> hit;
        for (int i = 0; i < sc.num_detectors(); ++i)
            if (r.detection_events[i]) hit.push_back(i);
        int b = hit.size() == 1 ? g.boundary : hit[1];
        bool found = false;
        for (auto &ed : g.edges)
            if (ed.a == hit[0] && ed.b == b) found = ed.logical == r.logical_flip;
        EXPECT_TRUE(found) << q;
    }
}

TEST(DetectorGraph, NoSelfLoopsNoConflictsFullDistance) {
    for (int d : {3, 5, 7}) {
        auto sc = build_syndrome_circuit(d, d);
        auto g = build_detector_graph(sc);
        for (auto &e : g.edges) EXPECT_NE(e.a, e.b);
        EXPECT_EQ(g.logical_conflicts, 0);
        EXPECT_EQ(g.graphlike_distance(), d);
    }
}

TEST(DetectorGraph, EdgeCountMatchesFaultEnumerationD5) {
    auto sc = build_syndrome_circuit(5, 3);
    auto g = build_detector_graph(sc);
    auto oracle = enumerate_pairs(sc);
    EXPECT_EQ(g.edges.size(), oracle.size());
    for (auto &e : g.edges) EXPECT_TRUE(oracle.count({e.a, e.b}));
}

TEST(UnionFind, EmptySyndrome) {
    auto g = build_detector_graph(build_syndrome_circuit(3, 2));
    auto o = union_find_decode(g, {});
    EXPECT_TRUE(o.correction.empty());
    EXPECT_FALSE(o.logical_flip);
    EXPECT_TRUE(o.syndrome_annihilated);
}

TEST(UnionFind, SingleEdgeSyndrome) {
    auto g = build_detector_graph(build_syndrome_circuit(5, 3));
    UnionFindDecoder dec(g);
    for (int e = 0; e < int(g.edges.size()); ++e) {
        const auto &ed = g.edges[e];
        std::vector<int> ev{ed.a};
        if (ed.b != g.boundary) ev.push_back(ed.b);
        auto o = dec.decode(ev);
        if (ed.b != g.boundary) {
            ASSERT_EQ(o.correction.size(), 1u);
            EXPECT_EQ(o.correction[0], e);
            EXPECT_EQ(o.logical_flip, ed.logical);
        } else {
            // a single boundary event is matched by some minimal path to the boundary
            EXPECT_EQ(correction_syndrome(g, o.correction), [&] {
                std::vector<uint8_t> s(g.num_detectors, 0);
                s[ed.a] = 1;
                return s;
            }());
        }
    }
}

TEST(UnionFind, MatchesMinimumWeightOnSmallSyndromesD3) {
    auto sc = build_syndrome_circuit(3, 3);
    auto g = build_detector_graph(sc);
    const int n = g.num_detectors;
    std::vector<std::vector<int>> dist(n);
    for (int i = 0; i < n; ++i) dist[i] = parity_dist(g, i);
    UnionFindDecoder dec(g);
    int checked = 0, ties = 0, mismatches = 0;
    auto judge = [&](const std::vector<int> &ev, int w0, int w1) {
        auto o = dec.decode(ev);
        EXPECT_TRUE(o.syndrome_annihilated);
        if (w0 == w1) {
            ++ties;
            return;
        }
        ++checked;
        mismatches += o.logical_flip != (w1 < w0);
    };
    const int B = g.boundary;
    for (int a = 0; a < n; ++a) judge({a}, dist[a][2 * B], dist[a][2 * B + 1]);
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b) {
            int w[2];
            for (int p = 0; p < 2; ++p) {
                w[p] = dist[a][2 * b + p];
                for (int pa = 0; pa < 2; ++pa) w[p] = std::min(w[p], dist[a][2 * B + pa] + dist[b][2 * B + (p ^ pa)]);
            }
            judge({a, b}, w[0], w[1]);
        }
    EXPECT_GT(checked, 0);
    EXPECT_EQ(mismatches, 0) << "checked " << checked << " ties " << ties;
}

TEST(UnionFind, AlwaysAnnihilatesRandomShots) {
    auto sc = build_syndrome_circuit(3, 3);
    auto g = build_detector_graph(sc);
    UnionFindDecoder dec(g);
    ShotSampler s(sc, {noisy_params()});
    std::vector<uint64_t> buf(s.words());
    for (uint64_t shot = 0; shot < 100000; ++shot) {
        s.sample(4, shot, buf.data());
        std::vector<int> ev;
        std::vector<uint8_t> want(g.num_detectors, 0);
        for (int i = 0; i < g.num_detectors; ++i)
            if (buf[i / 64] >> (i % 64) & 1) ev.push_back(i), want[i] = 1;
        auto o = dec.decode(ev);
        ASSERT_TRUE(o.syndrome_annihilated);
        ASSERT_EQ(correction_syndrome(g, o.correction), want);
    }
}

TEST(LogicalRate, ZeroNoiseIsExactlyZero) {
    auto sc = build_syndrome_circuit(3, 3);
    auto e = logical_error_rate(sc, LcpemParams{}, 2000, 1);
    EXPECT_EQ(e.failures, 0);
    EXPECT_EQ(e.p, 0.0);
}

TEST(LogicalRate, ScrambledMeasurementsGiveChance) {
    auto sc = build_syndrome_circuit(3, 3);
    LcpemParams p;
    p.p_measure = 0.5;
    auto e = logical_error_rate(sc, p, 100000, 2);
    EXPECT_NEAR(e.p, 0.5, 3 * e.stderr_);
    // certain flips are deterministic, so the estimate is exactly 0 or 1
    p.p_measure = 1;
    auto f = logical_error_rate(sc, p, 1000, 2);
    EXPECT_TRUE(f.failures == 0 || f.failures == 1000);
}

TEST(LogicalRate, TooFewShotsRejected) {
    auto sc = build_syndrome_circuit(3, 1);
    EXPECT_THROW(logical_error_rate(sc, LcpemParams{}, 10, 1), std::invalid_argument);
}

TEST(LogicalRate, PairedSettingsMatchSeparateRuns) {
    auto sc = build_syndrome_circuit(3, 3);
    auto g = build_detector_graph(sc);
    auto a = noisy_params(), b = a;
    b.p3_2q *= 1.1;
    auto both = run_settings(sc, g, {a, b}, 5000, 13);
    auto ra = run_settings(sc, g, {a}, 5000, 13);
    auto rb = run_settings(sc, g, {b}, 5000, 13, 2);
    EXPECT_EQ(both.fail[0], ra.fail[0]);
    EXPECT_EQ(both.fail[1], rb.fail[0]);
    EXPECT_GT(ra.estimates[0].failures, 0);
}
