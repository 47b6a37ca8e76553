#pragma once

#include <cmath>
#include <deque>
#include <map>
#include <stdexcept>
#include <vector>

#include "hamqec/circuit.hpp"
#include "hamqec/parallel.hpp"

namespace hamqec {

struct GraphEdge {
    int a, b;  // b may be the boundary node
    bool logical;
};

struct DetectorGraph {
    int num_detectors = 0;
    int boundary = 0;  // node index of the single boundary node
    std::vector<GraphEdge> edges;
    std::vector<std::vector<std::pair<int, int>>> adj;  // node -> (neighbour, edge)
    int logical_conflicts = 0;                          // same node pair reached with different logical masks
    int faults_enumerated = 0;

    int num_nodes() const { return num_detectors + 1; }

    void add_edge(int a, int b, bool logical) {
        edges.push_back({a, b, logical});
        int e = int(edges.size()) - 1;
        adj[a].push_back({b, e});
        adj[b].push_back({a, e});
    }

    // shortest boundary-to-boundary path with odd logical parity
    int graphlike_distance() const {
        const int n = num_nodes();
        std::vector<int> dist(2 * n, -1);
        std::deque<int> q;
        dist[2 * boundary] = 0;
        q.push_back(2 * boundary);
        while (!q.empty()) {
            int s = q.front();
            q.pop_front();
            int v = s / 2, par = s % 2;
            if (v == boundary && par == 1) return dist[s];
            if (v == boundary && dist[s] > 0) continue;
            for (auto [u, e] : adj[v]) {
                int t = 2 * u + (par ^ int(edges[e].logical));
                if (dist[t] < 0) {
                    dist[t] = dist[s] + 1;
                    q.push_back(t);
                }
            }
        }
        return -1;
    }
};

// Detector bits excited by every single-location fault, in enumeration order. The logical flip is
// the last entry of each pair.
template <class F>
void for_each_single_fault(const SyndromeCircuit &sc, const FrameSensitivity &fs, const std::vector<Location> &locs,
                           F &&f) {
    std::vector<uint64_t> acc(fs.words);
    for (const Location &l : locs) {
        const int np = l.q1 >= 0 ? 15 : (l.kind == LocKind::Measure ? 1 : 3);
        for (int v = 1; v <= np; ++v) {
            std::fill(acc.begin(), acc.end(), 0);
            if (l.kind == LocKind::Measure) {
                const uint64_t *p = fs.meas_at(l.meas);
                for (int w = 0; w < fs.words; ++w) acc[w] ^= p[w];
            } else if (l.q1 >= 0) {
                xor_pauli(fs, l.layer, l.q0, v >> 2, acc.data());
                xor_pauli(fs, l.layer, l.q1, v & 3, acc.data());
            } else {
                xor_pauli(fs, l.layer, l.q0, v, acc.data());
            }
            f(l, v, acc);
        }
    }
    (void)sc;
}

inline DetectorGraph build_detector_graph(const SyndromeCircuit &sc) {
    FrameSensitivity fs = build_sensitivity(sc);
    auto locs = build_locations(sc);
    DetectorGraph g;
    g.num_detectors = sc.num_detectors();
    g.boundary = g.num_detectors;
    g.adj.assign(g.num_nodes(), {});
    std::map<std::pair<int, int>, int> seen;
    const int lb = fs.logical_bit();
    for_each_single_fault(sc, fs, locs, [&](const Location &, int, const std::vector<uint64_t> &acc) {
        ++g.faults_enumerated;
        int hit[3], n = 0;
        for (int w = 0; w < fs.words; ++w) {
            uint64_t bits = acc[w];
            if (w == lb / 64) bits &= ~(uint64_t(1) << (lb % 64));
            while (bits) {
                if (n == 2) throw std::logic_error("a single fault excites more than two detectors");
                hit[n++] = w * 64 + __builtin_ctzll(bits);
                bits &= bits - 1;
            }
        }
        const bool logical = acc[lb / 64] >> (lb % 64) & 1;
        if (n == 0) {
            if (logical) throw std::logic_error("undetectable single fault flips the logical");
            return;
        }
        std::pair<int, int> key = n == 1 ? std::make_pair(hit[0], g.boundary) : std::make_pair(hit[0], hit[1]);
        auto it = seen.find(key);
        if (it == seen.end()) {
            seen.emplace(key, int(g.edges.size()));
            g.add_edge(key.first, key.second, logical);
        } else if (g.edges[it->second].logical != logical) {
            ++g.logical_conflicts;
        }
    });
    return g;
}

struct DecodeOutcome {
    std::vector<int> correction;  // edge ids
    bool logical_flip = false;
    bool syndrome_annihilated = false;
};

// Union-find decoder with a reusable workspace. Not thread safe; use one per thread.
class UnionFindDecoder {
  public:
    explicit UnionFindDecoder(const DetectorGraph &g)
        : g_(g),
          support_(g.edges.size(), 0),
          parent_(g.num_nodes()),
          odd_(g.num_nodes(), 0),
          bnd_(g.num_nodes(), 0),
          members_(g.num_nodes()),
          defect_(g.num_nodes(), 0),
          visited_(g.num_nodes(), 0),
          pedge_(g.num_nodes(), -1) {
        for (int i = 0; i < g.num_nodes(); ++i) parent_[i] = i;
        bnd_[g.boundary] = 1;
    }

    DecodeOutcome decode(const std::vector<int> &events) {
        DecodeOutcome out;
        for (int v : events) {
            if (v < 0 || v >= g_.num_detectors) throw std::out_of_range("detection event outside the graph");
            defect_[v] ^= 1;
        }
        std::vector<int> roots;
        for (int v : events)
            if (defect_[v] && !odd_[v]) {
                odd_[v] = 1;
                members_[v] = {v};
                touch(v);
                roots.push_back(v);
            }
        grow(roots);
        peel(out);
        reset();
        return out;
    }

    DecodeOutcome decode_bits(const uint64_t *bits) {
        std::vector<int> ev;
        for (int i = 0; i < g_.num_detectors; ++i)
            if (bits[i / 64] >> (i % 64) & 1) ev.push_back(i);
        return decode(ev);
    }

  private:
    int find(int x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }
    void touch(int v) {
        if (!in_touched_(v)) touched_.push_back(v);
    }
    bool in_touched_(int v) {
        if (visited_[v] & 2) return true;
        visited_[v] |= 2;
        return false;
    }
    int unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return a;
        // keep the boundary node as a root so its flag is never lost
        if (b == g_.boundary || (a != g_.boundary && members_[a].size() < members_[b].size())) std::swap(a, b);
        parent_[b] = a;
        odd_[a] ^= odd_[b];
        bnd_[a] |= bnd_[b];
        members_[a].insert(members_[a].end(), members_[b].begin(), members_[b].end());
        members_[b].clear();
        return a;
    }
    bool active(int r) { return odd_[r] && !bnd_[r]; }

    void grow(std::vector<int> &roots) {
        std::vector<int> fused;
        while (true) {
            int best = -1;
            size_t best_size = 0;
            std::vector<int> live;
            for (int r : roots) {
                r = find(r);
                if (!active(r)) continue;
                if (std::find(live.begin(), live.end(), r) != live.end()) continue;
                live.push_back(r);
                if (best < 0 || members_[r].size() < best_size || (members_[r].size() == best_size && r < best)) {
                    best = r;
                    best_size = members_[r].size();
                }
            }
            roots.swap(live);
            if (best < 0) break;
            fused.clear();
            for (int v : members_[best])
                for (auto [u, e] : g_.adj[v]) {
                    if (support_[e] >= 2) continue;
                    if (support_[e] == 0) grown_.push_back(e);
                    if (++support_[e] == 2) fused.push_back(e);
                }
            for (int e : fused) {
                const GraphEdge &ed = g_.edges[e];
                for (int x : {ed.a, ed.b})
                    if (x != g_.boundary && find(x) == x && members_[x].empty() && !(visited_[x] & 2)) {
                        members_[x] = {x};
                        touch(x);
                    }
                int r = unite(ed.a, ed.b);
                if (r != g_.boundary && std::find(roots.begin(), roots.end(), r) == roots.end()) roots.push_back(r);
            }
        }
    }

    void peel(DecodeOutcome &out) {
        // spanning forest over fully grown edges, boundary component first
        std::vector<int> order;
        auto bfs = [&](int root) {
            size_t head = order.size();
            visited_[root] |= 1;
            order.push_back(root);
            pedge_[root] = -1;
            while (head < order.size()) {
                int v = order[head++];
                for (auto [u, e] : g_.adj[v]) {
                    if (support_[e] < 2 || (visited_[u] & 1)) continue;
                    visited_[u] |= 1;
                    pedge_[u] = e;
                    order.push_back(u);
                }
            }
        };
        bfs(g_.boundary);
        for (int v : touched_)
            if (!(visited_[v] & 1)) bfs(v);
        for (int i = int(order.size()) - 1; i >= 0; --i) {
            int v = order[i];
            if (!defect_[v] || pedge_[v] < 0) continue;
            int e = pedge_[v];
            const GraphEdge &ed = g_.edges[e];
            int u = ed.a == v ? ed.b : ed.a;
            defect_[v] = 0;
            if (u != g_.boundary) defect_[u] ^= 1;
            out.correction.push_back(e);
            out.logical_flip ^= ed.logical;
        }
        bool clean = true;
        for (int v : order)
            if (v != g_.boundary && defect_[v]) clean = false;
        out.syndrome_annihilated = clean;
        if (!clean) throw std::logic_error("union-find correction does not annihilate the syndrome");
        for (int v : order) {
            visited_[v] &= ~1;
            pedge_[v] = -1;
        }
    }

    void reset() {
        for (int e : grown_) {
            support_[e] = 0;
            for (int x : {g_.edges[e].a, g_.edges[e].b}) touch(x);
        }
        grown_.clear();
        for (int v : touched_) {
            parent_[v] = v;
            odd_[v] = 0;
            bnd_[v] = v == g_.boundary;
            members_[v].clear();
            defect_[v] = 0;
            visited_[v] = 0;
        }
        touched_.clear();
    }

    const DetectorGraph &g_;
    std::vector<uint8_t> support_;
    std::vector<int> parent_;
    std::vector<uint8_t> odd_, bnd_;
    std::vector<std::vector<int>> members_;
    std::vector<uint8_t> defect_, visited_;
    std::vector<int> pedge_;
    std::vector<int> touched_, grown_;
};

inline DecodeOutcome union_find_decode(const DetectorGraph &g, const std::vector<int> &events) {
    UnionFindDecoder dec(g);
    return dec.decode(events);
}

inline std::vector<uint8_t> correction_syndrome(const DetectorGraph &g, const std::vector<int> &edges) {
    std::vector<uint8_t> s(g.num_detectors, 0);
    for (int e : edges)
        for (int x : {g.edges[e].a, g.edges[e].b})
            if (x != g.boundary) s[x] ^= 1;
    return s;
}

// ---------------------------------------------------------------- Monte Carlo

struct LogicalEstimate {
    int64_t shots = 0, failures = 0;
    double p = 0, stderr_ = 0;
};

inline LogicalEstimate make_estimate(int64_t shots, int64_t failures) {
    LogicalEstimate e;
    e.shots = shots;
    e.failures = failures;
    e.p = shots ? double(failures) / double(shots) : 0;
    e.stderr_ = shots ? std::sqrt(e.p * (1 - e.p) / double(shots)) : 0;
    return e;
}

// Per-shot failure bits for several settings under common random numbers.
struct PairedRun {
    std::vector<LogicalEstimate> estimates;
    // fail[s] packs one bit per shot
    std::vector<std::vector<uint64_t>> fail;
    bool fail_at(int s, int64_t shot) const { return fail[s][shot / 64] >> (shot % 64) & 1; }
};

inline PairedRun run_settings(const SyndromeCircuit &sc, const DetectorGraph &g, const std::vector<LcpemParams> &settings,
                              int64_t shots, uint64_t seed, int threads = 1) {
    ShotSampler sampler(sc, settings);
    const int ns = int(settings.size()), W = sampler.words();
    const int lb = sampler.sensitivity().logical_bit();
    PairedRun run;
    run.fail.assign(ns, std::vector<uint64_t>((shots + 63) / 64, 0));
    const int64_t nchunks = (shots + 63) / 64;
    threads = std::max(1, threads);
    parallel_for(threads, threads, [&](int t) {
        UnionFindDecoder dec(g);
        std::vector<uint64_t> buf(size_t(ns) * W);
        std::vector<char> bits(ns);
        for (int64_t c = t; c < nchunks; c += threads)
            for (int64_t shot = c * 64; shot < std::min(shots, (c + 1) * 64); ++shot) {
                sampler.sample(seed, uint64_t(shot), buf.data());
                for (int s = 0; s < ns; ++s) {
                    const uint64_t *b = &buf[size_t(s) * W];
                    int same = -1;
                    for (int s2 = 0; s2 < s && same < 0; ++s2)
                        if (std::equal(b, b + W, &buf[size_t(s2) * W])) same = s2;
                    bool f;
                    if (same >= 0) {
                        f = bits[same];
                    } else {
                        bool truth = b[lb / 64] >> (lb % 64) & 1;
                        f = dec.decode_bits(b).logical_flip != truth;
                    }
                    bits[s] = f;
                    if (f) run.fail[s][shot / 64] |= uint64_t(1) << (shot % 64);
                }
            }
    });
    for (int s = 0; s < ns; ++s) {
        int64_t n = 0;
        for (uint64_t w : run.fail[s]) n += popcount(w);
        run.estimates.push_back(make_estimate(shots, n));
    }
    return run;
}

inline LogicalEstimate logical_error_rate(const SyndromeCircuit &sc, const LcpemParams &p, int64_t shots, uint64_t seed,
                                          int threads = 1) {
    if (shots < 1000) throw std::invalid_argument("logical_error_rate needs at least 1000 shots");
    DetectorGraph g = build_detector_graph(sc);
    return run_settings(sc, g, {p}, shots, seed, threads).estimates[0];
}

}  // namespace hamqec
