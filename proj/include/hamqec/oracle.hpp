#pragma once

#include <climits>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "hamqec/decode.hpp"
#include "hamqec/matching.hpp"
#include "hamqec/rng.hpp"
#include "hamqec/twirl.hpp"

namespace hamqec {

// ---------------------------------------------------------------- minimum-weight perfect matching

namespace detail {

inline std::vector<std::pair<int, int>> matching_dp(const std::vector<std::vector<int>> &w) {
    const int n = int(w.size());
    const uint32_t full = (n == 32) ? ~0u : ((1u << n) - 1);
    std::vector<int> best(size_t(1) << n, -1);
    std::vector<int8_t> pick(size_t(1) << n, -1);
    // memoised on the set of still unmatched vertices; the lowest one is always paired first
    std::function<int(uint32_t)> solve = [&](uint32_t mask) -> int {
        if (!mask) return 0;
        if (best[mask] >= 0) return best[mask];
        int i = __builtin_ctz(mask);
        uint32_t rest = mask & ~(1u << i);
        int b = INT_MAX, bj = -1;
        for (uint32_t r = rest; r; r &= r - 1) {
            int j = __builtin_ctz(r);
            int v = w[i][j] + solve(rest & ~(1u << j));
            if (v < b) {
                b = v;
                bj = j;
            }
        }
        best[mask] = b;
        pick[mask] = int8_t(bj);
        return b;
    };
    solve(full);
    std::vector<std::pair<int, int>> out;
    for (uint32_t mask = full; mask;) {
        int i = __builtin_ctz(mask), j = pick[mask];
        out.push_back({i, j});
        mask &= ~((1u << i) | (1u << j));
    }
    return out;
}

inline std::vector<std::pair<int, int>> matching_blossom(const std::vector<std::vector<int>> &w) {
    const int n = int(w.size());
    int64_t maxw = 1;
    for (auto &row : w)
        for (int x : row) maxw = std::max<int64_t>(maxw, x);
    // offset keeps every weight positive; cardinality is forced anyway
    const int64_t big = maxw + 1;
    std::vector<WeightedBlossom::Edge> edges;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) edges.push_back({i, j, big - w[i][j]});
    auto mate = WeightedBlossom::solve(n, edges, true);
    std::vector<std::pair<int, int>> out;
    for (int i = 0; i < n; ++i) {
        if (mate[i] < 0) throw std::logic_error("matching is not perfect");
        if (mate[i] > i) out.push_back({i, mate[i]});
    }
    return out;
}

}  // namespace detail

// exact; bitmask recursion for small inputs, blossom otherwise
inline std::vector<std::pair<int, int>> min_weight_perfect_matching(const std::vector<std::vector<int>> &w,
                                                                    bool force_blossom = false) {
    const int n = int(w.size());
    if (n % 2) throw std::invalid_argument("perfect matching needs an even number of vertices");
    if (n == 0) return {};
    if (!force_blossom && n <= 10) return detail::matching_dp(w);
    return detail::matching_blossom(w);
}

inline int matching_weight(const std::vector<std::vector<int>> &w, const std::vector<std::pair<int, int>> &m) {
    int s = 0;
    for (auto [i, j] : m) s += w[i][j];
    return s;
}

// ---------------------------------------------------------------- toric code

// Qubits on the edges of an L x L periodic lattice. h(r,c) joins vertices (r,c)-(r,c+1), v(r,c) joins
// (r,c)-(r+1,c). Plaquette (r,c) holds h(r,c), h(r+1,c), v(r,c), v(r,c+1).
struct ToricLayout {
    int d = 0;

    explicit ToricLayout(int L) : d(L) {
        if (L < 2) throw std::invalid_argument("toric layout needs distance >= 2");
    }
    int num_qubits() const { return 2 * d * d; }
    int num_plaquettes() const { return d * d; }
    int wrap(int x) const { return ((x % d) + d) % d; }
    int h(int r, int c) const { return wrap(r) * d + wrap(c); }
    int v(int r, int c) const { return d * d + wrap(r) * d + wrap(c); }
    int plaquette(int r, int c) const { return wrap(r) * d + wrap(c); }
    bool is_vertical(int q) const { return q >= d * d; }
    int row(int q) const { return (q % (d * d)) / d; }
    int col(int q) const { return q % d; }
    // four classes by row and column parity; only meaningful for even d
    int color(int p) const { return (p / d % 2) * 2 + (p % d % 2); }

    std::array<int, 2> plaquettes_of(int q) const {
        int r = row(q), c = col(q);
        if (is_vertical(q)) return {plaquette(r, c), plaquette(r, c - 1)};
        return {plaquette(r, c), plaquette(r - 1, c)};
    }
    std::vector<uint8_t> syndrome(const std::vector<uint8_t> &flips) const {
        std::vector<uint8_t> s(num_plaquettes(), 0);
        for (int q = 0; q < num_qubits(); ++q)
            if (flips[q])
                for (int p : plaquettes_of(q)) s[p] ^= 1;
        return s;
    }
    // parities against the two Z logicals: h(0, *) and v(*, 0)
    std::array<bool, 2> logical_flags(const std::vector<uint8_t> &flips) const {
        bool a = false, b = false;
        for (int c = 0; c < d; ++c) a ^= flips[h(0, c)];
        for (int r = 0; r < d; ++r) b ^= flips[v(r, 0)];
        return {a, b};
    }
    int distance(int p1, int p2) const {
        int dr = std::abs(p1 / d - p2 / d), dc = std::abs(p1 % d - p2 % d);
        return std::min(dr, d - dr) + std::min(dc, d - dc);
    }
    // shortest dual path, rows first then columns
    void apply_path(int p1, int p2, std::vector<uint8_t> &flips) const {
        int r = p1 / d, c = p1 % d;
        const int r2 = p2 / d, c2 = p2 % d;
        int dr = wrap(r2 - r), dc = wrap(c2 - c);
        if (dr <= d - dr)
            for (; r != r2; r = wrap(r + 1)) flips[h(r + 1, c)] ^= 1;
        else
            for (; r != r2; r = wrap(r - 1)) flips[h(r, c)] ^= 1;
        if (dc <= d - dc)
            for (; c != c2; c = wrap(c + 1)) flips[v(r, c + 1)] ^= 1;
        else
            for (; c != c2; c = wrap(c - 1)) flips[v(r, c)] ^= 1;
    }
};

// minimum-weight matching decoder for a plain toric code
inline std::vector<uint8_t> toric_mwpm_decode(const ToricLayout &t, const std::vector<uint8_t> &syndrome) {
    std::vector<int> def;
    for (int p = 0; p < t.num_plaquettes(); ++p)
        if (syndrome[p]) def.push_back(p);
    if (def.size() % 2) throw std::invalid_argument("toric syndrome has odd parity");
    std::vector<std::vector<int>> w(def.size(), std::vector<int>(def.size(), 0));
    for (size_t i = 0; i < def.size(); ++i)
        for (size_t j = 0; j < def.size(); ++j) w[i][j] = t.distance(def[i], def[j]);
    std::vector<uint8_t> corr(t.num_qubits(), 0);
    for (auto [i, j] : min_weight_perfect_matching(w)) t.apply_path(def[i], def[j], corr);
    return corr;
}

// ---------------------------------------------------------------- ballistic weight-2 noise

// event anchored at qubit q: vertical links pair with the right neighbour, horizontal with the one below
inline std::array<int, 2> ballistic_pair(const ToricLayout &t, int q) {
    int r = t.row(q), c = t.col(q);
    if (t.is_vertical(q)) return {q, t.v(r, c + 1)};
    return {q, t.h(r + 1, c)};
}

struct BallisticSample {
    std::vector<uint8_t> events;  // per anchor qubit
    std::vector<uint8_t> flips;   // per qubit
};

inline BallisticSample ballistic_sample(const ToricLayout &t, double p, uint64_t seed, uint64_t shot = 0) {
    if (!(p >= 0 && p <= 1)) throw std::invalid_argument("p outside [0,1]");
    Stream s(hash_combine(seed, shot));
    BallisticSample b;
    b.events.assign(t.num_qubits(), 0);
    b.flips.assign(t.num_qubits(), 0);
    for (int q = 0; q < t.num_qubits(); ++q)
        if (s.uniform() < p) {
            b.events[q] = 1;
            for (int x : ballistic_pair(t, q)) b.flips[x] ^= 1;
        }
    return b;
}

// index map between one colour class of the distance-d lattice and a distance-d/2 toric code
struct ColorCopy {
    const ToricLayout &big;
    ToricLayout small;
    int a, b;  // plaquette row/col offsets of the class

    ColorCopy(const ToricLayout &t, int color) : big(t), small(t.d / 2), a(color / 2), b(color % 2) {
        if (t.d % 2 || t.d < 4) throw std::invalid_argument("split decoding needs an even d >= 4");
    }
    int big_plaquette(int p) const { return big.plaquette(a + 2 * (p / small.d), b + 2 * (p % small.d)); }
    // anchor qubit of the ballistic event that realises the given reduced edge
    int anchor(int q) const {
        int i = small.row(q), j = small.col(q);
        if (small.is_vertical(q)) return big.v(a + 2 * i, b + 2 * j - 1);
        return big.h(a + 2 * i - 1, b + 2 * j);
    }
};

struct SplitDecodeResult {
    std::vector<uint8_t> correction;          // per qubit of the original lattice
    std::array<std::vector<uint8_t>, 4> copy;  // reduced corrections
};

inline SplitDecodeResult symmetry_split_decode(const ToricLayout &t, const std::vector<uint8_t> &syndrome) {
    SplitDecodeResult out;
    out.correction.assign(t.num_qubits(), 0);
    for (int color = 0; color < 4; ++color) {
        ColorCopy cc(t, color);
        std::vector<uint8_t> s(cc.small.num_plaquettes());
        int n = 0;
        for (int p = 0; p < cc.small.num_plaquettes(); ++p) n += s[p] = syndrome[cc.big_plaquette(p)];
        if (n % 2) throw std::invalid_argument("odd number of events in one colour class");
        out.copy[color] = toric_mwpm_decode(cc.small, s);
        for (int q = 0; q < cc.small.num_qubits(); ++q)
            if (out.copy[color][q])
                for (int x : ballistic_pair(t, cc.anchor(q))) out.correction[x] ^= 1;
    }
    return out;
}

inline LogicalEstimate ballistic_failure_rate(int d, double p, int64_t shots, uint64_t seed, int threads = 1) {
    ToricLayout t(d);
    std::vector<int64_t> fails(std::max(1, threads), 0);
    parallel_for(int(fails.size()), int(fails.size()), [&](int w) {
        for (int64_t s = w; s < shots; s += int64_t(fails.size())) {
            auto b = ballistic_sample(t, p, seed, uint64_t(s));
            auto r = symmetry_split_decode(t, t.syndrome(b.flips));
            for (int q = 0; q < t.num_qubits(); ++q) r.correction[q] ^= b.flips[q];
            auto f = t.logical_flags(r.correction);
            fails[w] += f[0] || f[1];
        }
    });
    int64_t n = 0;
    for (auto f : fails) n += f;
    return make_estimate(shots, n);
}

// independent single-copy reference: iid X flips on a distance-L toric code
inline LogicalEstimate toric_iid_failure_rate(int L, double p, int64_t shots, uint64_t seed, int threads = 1) {
    ToricLayout t(L);
    std::vector<int64_t> fails(std::max(1, threads), 0);
    parallel_for(int(fails.size()), int(fails.size()), [&](int w) {
        std::vector<uint8_t> flips(t.num_qubits());
        for (int64_t s = w; s < shots; s += int64_t(fails.size())) {
            Stream st(hash_combine(seed ^ 0x7f4a7c159e3779b9ULL, uint64_t(s)));
            for (auto &f : flips) f = st.uniform() < p;
            auto corr = toric_mwpm_decode(t, t.syndrome(flips));
            for (int q = 0; q < t.num_qubits(); ++q) corr[q] ^= flips[q];
            auto f = t.logical_flags(corr);
            fails[w] += f[0] || f[1];
        }
    });
    int64_t n = 0;
    for (auto f : fails) n += f;
    return make_estimate(shots, n);
}

inline bool color_conservation_holds(int d) {
    ToricLayout t(d);
    for (int q = 0; q < t.num_qubits(); ++q) {
        std::vector<uint8_t> f(t.num_qubits(), 0);
        for (int x : ballistic_pair(t, q)) f[x] ^= 1;
        auto s = t.syndrome(f);
        std::vector<int> hit;
        for (int p = 0; p < t.num_plaquettes(); ++p)
            if (s[p]) hit.push_back(p);
        if (hit.size() != 2 || t.color(hit[0]) != t.color(hit[1])) return false;
    }
    return true;
}

struct PairedCopyEstimate {
    LogicalEstimate big;   // distance-d lattice, split decoder
    LogicalEstimate mono;  // pooled over the four reduced copies of the same shots
};

// each shot is scored on the full lattice and on its four distance-d/2 copies
inline PairedCopyEstimate paired_copy_identity(int d, double p, int64_t shots, uint64_t seed, int threads = 1) {
    ToricLayout t(d);
    std::vector<std::pair<int, int>> owner(t.num_qubits(), {-1, -1});
    for (int color = 0; color < 4; ++color) {
        ColorCopy cc(t, color);
        for (int q = 0; q < cc.small.num_qubits(); ++q) {
            auto &o = owner[cc.anchor(q)];
            if (o.first >= 0) throw std::logic_error("copy map is not injective");
            o = {color, q};
        }
    }
    for (auto &o : owner)
        if (o.first < 0) throw std::logic_error("copy map is not surjective");
    const int nw = std::max(1, threads);
    std::vector<int64_t> big(nw, 0), mono(nw, 0);
    parallel_for(nw, nw, [&](int w) {
        ToricLayout small(d / 2);
        for (int64_t s = w; s < shots; s += nw) {
            auto b = ballistic_sample(t, p, seed, uint64_t(s));
            auto r = symmetry_split_decode(t, t.syndrome(b.flips));
            for (int q = 0; q < t.num_qubits(); ++q) r.correction[q] ^= b.flips[q];
            auto f = t.logical_flags(r.correction);
            big[w] += f[0] || f[1];
            std::array<std::vector<uint8_t>, 4> red;
            for (auto &v : red) v.assign(small.num_qubits(), 0);
            for (int q = 0; q < t.num_qubits(); ++q)
                if (b.events[q]) red[owner[q].first][owner[q].second] ^= 1;
            for (int c = 0; c < 4; ++c) {
                auto corr = toric_mwpm_decode(small, small.syndrome(red[c]));
                for (int q = 0; q < small.num_qubits(); ++q) corr[q] ^= red[c][q];
                auto g = small.logical_flags(corr);
                mono[w] += g[0] || g[1];
            }
        }
    });
    int64_t nb = 0, nm = 0;
    for (int w = 0; w < nw; ++w) {
        nb += big[w];
        nm += mono[w];
    }
    return {make_estimate(shots, nb), make_estimate(4 * shots, nm)};
}

// root of a least-squares line through (x, a - b), fitted on the points around the sign change(s);
// the difference saturates away from the crossing, so a global line is biased
inline double estimate_crossing(const std::vector<double> &x, const std::vector<double> &a, const std::vector<double> &b) {
    const int n = int(x.size());
    if (n < 2 || int(a.size()) != n || int(b.size()) != n) throw std::invalid_argument("estimate_crossing: need matching curves");
    int first = -1, last = -1;
    for (int i = 0; i + 1 < n; ++i)
        if ((a[i] - b[i]) * (a[i + 1] - b[i + 1]) <= 0) {
            if (first < 0) first = i;
            last = i;
        }
    int lo = 0, hi = n - 1;
    if (first >= 0) {
        lo = std::max(0, first - 1);
        hi = std::min(n - 1, last + 2);
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const int m = hi - lo + 1;
    for (int i = lo; i <= hi; ++i) {
        const double y = a[i] - b[i];
        sx += x[i];
        sy += y;
        sxx += x[i] * x[i];
        sxy += x[i] * y;
    }
    const double den = m * sxx - sx * sx;
    const double slope = (m * sxy - sx * sy) / den, icpt = (sy - slope * sx) / m;
    if (slope == 0) throw NumericalError("estimate_crossing: flat difference curve");
    return -icpt / slope;
}

// leading-order failure of the matching decoder on a distance-d toric code
inline double low_p_logical(int d, double p) {
    if (d < 2 || d % 2) throw std::invalid_argument("low_p_logical needs an even d");
    double binom = 1;
    for (int i = 1; i <= d / 2; ++i) binom = binom * (d - d / 2 + i) / i;
    return (2.0 * d / 2.0) * binom * std::pow(p, d / 2);
}

// exact failure probability restricted to configurations with at most max_weight flips
inline double toric_enumerated_failure(int d, double p, int max_weight) {
    ToricLayout t(d);
    const int n = t.num_qubits();
    double total = 0;
    std::vector<uint8_t> flips(n, 0);
    std::function<void(int, int)> rec = [&](int start, int w) {
        if (w > 0) {
            auto corr = toric_mwpm_decode(t, t.syndrome(flips));
            for (int q = 0; q < n; ++q) corr[q] ^= flips[q];
            auto f = t.logical_flags(corr);
            if (f[0] || f[1]) total += std::pow(p, w) * std::pow(1 - p, n - w);
        }
        if (w == max_weight) return;
        for (int q = start; q < n; ++q) {
            flips[q] = 1;
            rec(q + 1, w + 1);
            flips[q] = 0;
        }
    };
    rec(0, 0);
    return total;
}

// ---------------------------------------------------------------- average fidelity

// Pauli-basis formula: (sum_j tr(P_j^dag E(P_j)) + D^2) / (D^2 (D + 1)), channel given by Kraus operators
inline double average_fidelity(const std::vector<MatC> &kraus, const MatC &reference) {
    if (kraus.empty()) throw std::invalid_argument("empty channel");
    const int D = int(kraus[0].rows());
    int m = 0;
    while ((1 << m) < D) ++m;
    if ((1 << m) != D || m > 6) throw std::invalid_argument("dimension must be 2^m with m <= 6");
    std::vector<MatC> k;
    for (auto &K : kraus) k.push_back(reference.adjoint() * K);
    double s = 0;
    for (uint64_t j = 0; j < (uint64_t(1) << (2 * m)); ++j) {
        MatC P = pauli_matrix(j, m);
        for (auto &K : k) s += std::real((P.adjoint() * K * P * K.adjoint()).trace());
    }
    return (s + double(D) * D) / (double(D) * D * (D + 1));
}

inline double average_fidelity(const PauliErrorTable &t) {
    std::vector<MatC> k;
    for (uint64_t j = 0; j < t.probs.size(); ++j)
        if (t.probs[j] > 0) k.push_back(std::sqrt(t.probs[j]) * pauli_matrix(j, t.m));
    return average_fidelity(k, MatC::Identity(1 << t.m, 1 << t.m));
}

inline double average_fidelity(const MatC &u, const MatC &reference) { return average_fidelity(std::vector<MatC>{u}, reference); }

// ---------------------------------------------------------------- exhaustive decoder

// minimum-weight edge set whose boundary equals the syndrome; iterative deepening
inline std::vector<int> brute_force_decoder(const DetectorGraph &g, const std::vector<int> &events) {
    if (g.edges.size() > 60) throw std::invalid_argument("brute_force_decoder is limited to 60 edges");
    std::vector<uint8_t> def(g.num_nodes(), 0), used(g.edges.size(), 0);
    for (int v : events) def[v] ^= 1;
    std::vector<int> chosen;
    std::function<bool(int)> dfs = [&](int budget) -> bool {
        int v = -1;
        for (int i = 0; i < g.num_detectors; ++i)
            if (def[i]) {
                v = i;
                break;
            }
        if (v < 0) return true;
        if (budget == 0) return false;
        for (auto [u, e] : g.adj[v]) {
            if (used[e]) continue;
            used[e] = 1;
            def[v] ^= 1;
            if (u != g.boundary) def[u] ^= 1;
            chosen.push_back(e);
            if (dfs(budget - 1)) return true;
            chosen.pop_back();
            if (u != g.boundary) def[u] ^= 1;
            def[v] ^= 1;
            used[e] = 0;
        }
        return false;
    };
    for (int w = 0; w <= int(g.edges.size()); ++w)
        if (dfs(w)) return chosen;
    throw std::invalid_argument("syndrome cannot be matched on this graph");
}

}  // namespace hamqec
