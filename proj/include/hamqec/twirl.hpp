#pragma once

#include <algorithm>
#include <array>
#include <json.hpp>
#include <vector>

#include "hamqec/common.hpp"

namespace hamqec {

// Pauli string j: base-4 digits, qubit 0 most significant; 0=I 1=X 2=Y 3=Z
inline int pauli_digit(uint64_t j, int m, int q) { return int((j >> (2 * (m - 1 - q))) & 3); }

inline std::string pauli_string(uint64_t j, int m) {
    static const char c[] = {'I', 'X', 'Y', 'Z'};
    std::string s;
    for (int q = 0; q < m; ++q) s += c[pauli_digit(j, m, q)];
    return s;
}

inline uint64_t pauli_index(const std::string &s) {
    uint64_t j = 0;
    for (char ch : s) {
        int d = ch == 'I' ? 0 : ch == 'X' ? 1 : ch == 'Y' ? 2 : ch == 'Z' ? 3 : -1;
        if (d < 0) throw std::invalid_argument("bad Pauli character");
        j = j * 4 + uint64_t(d);
    }
    return j;
}

namespace detail {

inline void fwht(std::vector<cplx> &v) {
    const size_t n = v.size();
    for (size_t h = 1; h < n; h <<= 1)
        for (size_t i = 0; i < n; i += 2 * h)
            for (size_t j = i; j < i + h; ++j) {
                cplx a = v[j], b = v[j + h];
                v[j] = a + b;
                v[j + h] = a - b;
            }
}

// x/z bitmasks (bit m-1-q is qubit q) -> Pauli index and Y count
inline uint64_t xz_to_pauli(uint64_t x, uint64_t z, int m, int &ny) {
    uint64_t j = 0;
    ny = 0;
    for (int q = 0; q < m; ++q) {
        int xb = (x >> (m - 1 - q)) & 1, zb = (z >> (m - 1 - q)) & 1;
        int d = xb ? (zb ? 2 : 1) : (zb ? 3 : 0);
        ny += d == 2;
        j = j * 4 + uint64_t(d);
    }
    return j;
}

inline cplx ipow(int n) {
    static const cplx t[4] = {1.0, cplx(0, 1), -1.0, cplx(0, -1)};
    return t[n & 3];
}

}  // namespace detail

// a(j) = tr(P_j^dagger U) / 2^m
inline VecC pauli_expand(const MatC &u) {
    const int64_t d = u.rows();
    int m = 0;
    while ((int64_t(1) << m) < d) ++m;
    if ((int64_t(1) << m) != d || u.cols() != d) throw std::invalid_argument("pauli_expand: not 2^m square");
    if (m > 6) throw std::invalid_argument("pauli_expand: at most 6 qubits");
    VecC a(int64_t(1) << (2 * m));
    std::vector<cplx> v(d);
    for (int64_t x = 0; x < d; ++x) {
        for (int64_t c = 0; c < d; ++c) v[c] = u(c ^ x, c);
        detail::fwht(v);
        for (int64_t z = 0; z < d; ++z) {
            int ny;
            uint64_t j = detail::xz_to_pauli(uint64_t(x), uint64_t(z), m, ny);
            a(j) = std::conj(detail::ipow(ny)) * v[z] / double(d);
        }
    }
    return a;
}

// adjoint of pauli_expand: ubar = (1/D) sum_j abar_j P_j
inline MatC pauli_expand_backward(const VecC &abar, int m) {
    const int64_t d = int64_t(1) << m;
    MatC ub = MatC::Zero(d, d);
    std::vector<cplx> v(d);
    for (int64_t x = 0; x < d; ++x) {
        for (int64_t z = 0; z < d; ++z) {
            int ny;
            uint64_t j = detail::xz_to_pauli(uint64_t(x), uint64_t(z), m, ny);
            v[z] = abar(j) * detail::ipow(ny);
        }
        detail::fwht(v);
        for (int64_t c = 0; c < d; ++c) ub(c ^ x, c) = v[c] / double(d);
    }
    return ub;
}

inline MatC pauli_matrix(uint64_t j, int m) {
    const int64_t d = int64_t(1) << m;
    MatC p = MatC::Zero(d, d);
    for (int64_t c = 0; c < d; ++c) {
        int64_t r = 0;
        cplx ph = 1;
        for (int q = 0; q < m; ++q) {
            int dg = pauli_digit(j, m, q);
            int bit = (c >> (m - 1 - q)) & 1;
            int out = (dg == 1 || dg == 2) ? bit ^ 1 : bit;
            if (dg == 2) ph *= bit ? cplx(0, -1) : cplx(0, 1);
            if (dg == 3 && bit) ph *= -1.0;
            r |= int64_t(out) << (m - 1 - q);
        }
        p(r, c) = ph;
    }
    return p;
}

struct PauliErrorTable {
    int m = 0;
    std::vector<double> probs;  // indexed by Pauli string
    double total() const {
        double s = 0;
        for (double p : probs) s += p;
        return s;
    }
    double identity() const { return probs.empty() ? 0.0 : probs[0]; }
};

inline PauliErrorTable twirl_probs(const VecC &a) {
    PauliErrorTable t;
    int m = 0;
    while ((int64_t(1) << (2 * m)) < a.size()) ++m;
    t.m = m;
    t.probs.resize(a.size());
    for (int64_t j = 0; j < a.size(); ++j) t.probs[j] = std::norm(a(j));
    return t;
}

inline MatC error_unitary(const MatC &u_sim, const MatC &target) { return u_sim.adjoint() * target; }

// gate locations of one round and which pairs of them are neighbours
struct GateLayout {
    int m = 0;
    std::vector<std::vector<int>> locations;  // qubit indices per location
    std::vector<std::vector<bool>> adjacent;

    int num_locations() const { return int(locations.size()); }
    bool connected(uint32_t mask) const {
        if (!mask) return false;
        uint32_t seen = mask & (~mask + 1), frontier = seen;
        while (frontier) {
            uint32_t next = 0;
            for (int a = 0; a < num_locations(); ++a)
                if (frontier >> a & 1)
                    for (int b = 0; b < num_locations(); ++b)
                        if ((mask >> b & 1) && !(seen >> b & 1) && adjacent[a][b]) next |= 1u << b;
            seen |= next;
            frontier = next;
        }
        return seen == mask;
    }
    int count_connected(int k) const {
        int n = 0;
        for (uint32_t s = 1; s < (1u << num_locations()); ++s)
            if (popcount(s) == k && connected(s)) ++n;
        return n;
    }
    // location support of a Pauli string
    uint32_t support(uint64_t j) const {
        uint32_t mask = 0;
        for (int l = 0; l < num_locations(); ++l)
            for (int q : locations[l])
                if (pauli_digit(j, m, q)) mask |= 1u << l;
        return mask;
    }
};

inline GateLayout single_qubit_layout(const std::vector<Coord> &sites) {
    GateLayout g;
    g.m = int(sites.size());
    for (int i = 0; i < g.m; ++i) g.locations.push_back({i});
    g.adjacent.assign(g.m, std::vector<bool>(g.m, false));
    for (int i = 0; i < g.m; ++i)
        for (int j = 0; j < g.m; ++j) g.adjacent[i][j] = i != j && lattice_neighbors(sites[i], sites[j]);
    return g;
}

// one location per gate; leftover qubits become their own locations
inline GateLayout cnot_layout(const std::vector<Coord> &sites, const std::vector<std::pair<int, int>> &pairs) {
    GateLayout g;
    g.m = int(sites.size());
    std::vector<bool> used(g.m, false);
    for (auto [c, t] : pairs) {
        g.locations.push_back({c, t});
        used[c] = used[t] = true;
    }
    for (int i = 0; i < g.m; ++i)
        if (!used[i]) g.locations.push_back({i});
    const int n = g.num_locations();
    g.adjacent.assign(n, std::vector<bool>(n, false));
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            if (a == b) continue;
            for (int x : g.locations[a])
                for (int y : g.locations[b])
                    if (lattice_neighbors(sites[x], sites[y])) g.adjacent[a][b] = true;
        }
    return g;
}

struct LcpemExtraction {
    std::array<double, 3> p{};     // p_1, p_2, p_3
    std::array<double, 3> mass{};  // summed probability per class
    std::array<int, 3> n{};        // divisors
    double identity = 0;
    double dropped_high = 0;          // more than 3 locations
    double dropped_disconnected = 0;  // 2 or 3 locations that are not connected
    std::vector<std::pair<uint64_t, double>> dropped_top;  // largest dropped strings
};

inline LcpemExtraction extract_lcpem(const PauliErrorTable &t, const GateLayout &g, int keep_dropped = 10) {
    if (t.m != g.m) throw std::invalid_argument("extract_lcpem: table and layout qubit counts differ");
    LcpemExtraction e;
    for (int k = 1; k <= 3; ++k) e.n[k - 1] = k == 1 ? g.num_locations() : g.count_connected(k);
    e.identity = t.probs[0];
    std::vector<std::pair<uint64_t, double>> dropped;
    for (uint64_t j = 1; j < t.probs.size(); ++j) {
        uint32_t s = g.support(j);
        int k = popcount(s);
        if (k > 3) {
            e.dropped_high += t.probs[j];
            dropped.push_back({j, t.probs[j]});
        } else if (!g.connected(s)) {
            e.dropped_disconnected += t.probs[j];
            dropped.push_back({j, t.probs[j]});
        } else {
            e.mass[k - 1] += t.probs[j];
        }
    }
    for (int k = 0; k < 3; ++k) e.p[k] = e.n[k] ? e.mass[k] / e.n[k] : 0.0;
    std::sort(dropped.begin(), dropped.end(), [](auto &a, auto &b) { return a.second > b.second; });
    if (int(dropped.size()) > keep_dropped) dropped.resize(keep_dropped);
    e.dropped_top = dropped;
    return e;
}

// d p_k / d prob_j, k = 0..2 (zero for dropped strings)
inline std::vector<std::array<double, 3>> extract_lcpem_jacobian(const PauliErrorTable &t, const GateLayout &g) {
    LcpemExtraction e = extract_lcpem(t, g, 0);
    std::vector<std::array<double, 3>> jac(t.probs.size(), {0, 0, 0});
    for (uint64_t j = 1; j < t.probs.size(); ++j) {
        uint32_t s = g.support(j);
        int k = popcount(s);
        if (k <= 3 && g.connected(s)) jac[j][k - 1] = 1.0 / e.n[k - 1];
    }
    return jac;
}

struct LcpemParams {
    double p1_1q = 0, p2_1q = 0, p3_1q = 0;
    double p1_2q = 0, p2_2q = 0, p3_2q = 0;
    double p_reset = 0, p_measure = 0;
    double r = 0;  // GHz
    double t_1q = 40, t_2q = 130, t_reset = 160, t_measure = 500;  // ns

    double &pk(int arity, int k) {
        double *v[2][3] = {{&p1_1q, &p2_1q, &p3_1q}, {&p1_2q, &p2_2q, &p3_2q}};
        return *v[arity - 1][k - 1];
    }
    double pk(int arity, int k) const { return const_cast<LcpemParams *>(this)->pk(arity, k); }
    void validate() const {
        for (double p : {p1_1q, p2_1q, p3_1q, p1_2q, p2_2q, p3_2q, p_reset, p_measure})
            if (!(p >= 0 && p <= 1)) throw ConfigError("LCPEM probability outside [0,1]");
        if (!(r >= 0)) throw ConfigError("depolarizing rate must be >= 0");
        for (double t : {t_1q, t_2q, t_reset, t_measure})
            if (!(t > 0)) throw ConfigError("durations must be > 0");
    }
};

inline double add_decoherence(double p1_unitary, int arity, double r, double t) {
    if (r * t * arity > 0.5) throw std::domain_error("add_decoherence: r*t*j exceeds 0.5");
    double p = p1_unitary + arity * r * t;
    if (p > 1 || p < 0) throw std::domain_error("add_decoherence: rate outside [0,1]");
    return p;
}

// reference gate-error rates
inline LcpemParams table2_params(double r = 1e-5) {
    LcpemParams p;
    p.p1_1q = 8.419e-8;
    p.p2_1q = 4.466e-5;
    p.p3_1q = 1.706e-5;
    p.p1_2q = 7.390e-6;
    p.p2_2q = 2.501e-4;
    p.p3_2q = 1.088e-4;
    p.p_reset = 5e-3;
    p.p_measure = 1e-2;
    p.r = r;
    return p;
}

inline nlohmann::json pauli_table_json(const PauliErrorTable &t, const GateLayout &g, int top = 20) {
    std::vector<uint64_t> idx(t.probs.size());
    for (uint64_t j = 0; j < idx.size(); ++j) idx[j] = j;
    std::stable_sort(idx.begin(), idx.end(), [&](uint64_t a, uint64_t b) { return t.probs[a] > t.probs[b]; });
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < top && i < int(idx.size()); ++i) {
        uint64_t j = idx[i];
        uint32_t s = g.support(j);
        rows.push_back({{"pauli", pauli_string(j, t.m)},
                        {"rate", t.probs[j]},
                        {"k", popcount(s)},
                        {"connected", j == 0 || g.connected(s)}});
    }
    return rows;
}

}  // namespace hamqec
