#pragma once

#include <algorithm>
#include <array>
#include <sstream>
#include <string>
#include <vector>

#include "hamqec/common.hpp"
#include "hamqec/rng.hpp"
#include "hamqec/twirl.hpp"

namespace hamqec {

enum class Role : uint8_t { Data, XAnc, ZAnc };

struct CodeQubit {
    Role role;
    int r, c;  // data: vertex (r, c); ancilla: plaquette (r, c) with r, c in [-1, d-1]
};

enum class LayerKind : uint8_t { Reset, Hadamard, Cnot, Measure, MeasureData };

struct Layer {
    LayerKind kind;
    int round = 0;
    std::vector<int> targets;                // Reset, Hadamard, Measure
    std::vector<std::pair<int, int>> cnots;  // (control, target)
};

struct SyndromeCircuit {
    int d = 0, rounds = 0;
    std::vector<CodeQubit> qubits;
    std::vector<int> data, x_anc, z_anc;
    std::vector<std::vector<int>> plaquette_data;  // per qubit (ancillas only)
    std::vector<std::vector<int>> neighbors;       // hardware graph
    std::vector<Layer> layers;
    std::vector<std::pair<int, int>> measurements;  // (layer, qubit) in record order
    std::vector<std::vector<int>> detectors;        // measurement indices, Z-type only
    std::vector<int> observable;                    // measurement indices of the logical Z readout

    int num_qubits() const { return int(qubits.size()); }
    int num_detectors() const { return int(detectors.size()); }
    int data_at(int r, int c) const { return r * d + c; }

    double layer_duration(const Layer &l, const LcpemParams &p) const {
        switch (l.kind) {
            case LayerKind::Reset: return p.t_reset;
            case LayerKind::Hadamard: return p.t_1q;
            case LayerKind::Cnot: return p.t_2q;
            default: return p.t_measure;
        }
    }

    // one layer per line
    std::string to_text() const {
        std::ostringstream os;
        os << "# rotated surface code d=" << d << " rounds=" << rounds << " qubits=" << num_qubits() << "\n";
        for (auto &l : layers) {
            static const char *names[] = {"R", "H", "CX", "M", "M"};
            os << names[int(l.kind)];
            if (l.kind == LayerKind::Cnot)
                for (auto [a, b] : l.cnots) os << ' ' << a << ' ' << b;
            else
                for (int q : l.targets) os << ' ' << q;
            os << "\n";
        }
        return os.str();
    }
};

inline SyndromeCircuit build_syndrome_circuit(int d, int rounds) {
    if (d < 3 || d % 2 == 0) throw std::invalid_argument("surface code distance must be odd and >= 3");
    if (rounds < 1) throw std::invalid_argument("rounds must be >= 1");
    SyndromeCircuit sc;
    sc.d = d;
    sc.rounds = rounds;
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) {
            sc.qubits.push_back({Role::Data, r, c});
            sc.data.push_back(int(sc.qubits.size()) - 1);
        }
    sc.plaquette_data.assign(d * d, {});
    // per ancilla: data in fixed corner order NW, NE, SW, SE (-1 if absent)
    std::vector<std::array<int, 4>> corners;
    for (int pr = -1; pr < d; ++pr)
        for (int pc = -1; pc < d; ++pc) {
            const bool is_x = ((pr + pc) % 2 + 2) % 2 == 0;
            std::array<int, 4> cn{};
            int n = 0;
            const int rr[4] = {pr, pr, pr + 1, pr + 1}, cc[4] = {pc, pc + 1, pc, pc + 1};
            for (int k = 0; k < 4; ++k) {
                bool in = rr[k] >= 0 && rr[k] < d && cc[k] >= 0 && cc[k] < d;
                cn[k] = in ? sc.data_at(rr[k], cc[k]) : -1;
                n += in;
            }
            bool keep = n == 4 || (n == 2 && (is_x ? (pr == -1 || pr == d - 1) : (pc == -1 || pc == d - 1)));
            if (!keep) continue;
            sc.qubits.push_back({is_x ? Role::XAnc : Role::ZAnc, pr, pc});
            int q = int(sc.qubits.size()) - 1;
            (is_x ? sc.x_anc : sc.z_anc).push_back(q);
            std::vector<int> pd;
            for (int k = 0; k < 4; ++k)
                if (cn[k] >= 0) pd.push_back(cn[k]);
            sc.plaquette_data.push_back(pd);
            corners.push_back(cn);
        }
    const int nq = sc.num_qubits();
    sc.neighbors.assign(nq, {});
    for (int q = d * d; q < nq; ++q)
        for (int dq : sc.plaquette_data[q]) {
            sc.neighbors[q].push_back(dq);
            sc.neighbors[dq].push_back(q);
        }
    for (auto &v : sc.neighbors) std::sort(v.begin(), v.end());
    std::vector<int> ancillas;
    for (int q = d * d; q < nq; ++q) ancillas.push_back(q);
    std::vector<int> all(nq);
    for (int q = 0; q < nq; ++q) all[q] = q;
    // hook-safe orders: X checks NW NE SW SE, Z checks NW SW NE SE
    const int xo[4] = {0, 1, 2, 3}, zo[4] = {0, 2, 1, 3};
    std::vector<std::vector<int>> meas_of(nq);
    for (int rd = 0; rd < rounds; ++rd) {
        sc.layers.push_back({LayerKind::Reset, rd, rd == 0 ? all : ancillas, {}});
        sc.layers.push_back({LayerKind::Hadamard, rd, sc.x_anc, {}});
        for (int s = 0; s < 4; ++s) {
            Layer l{LayerKind::Cnot, rd, {}, {}};
            for (int q = d * d; q < nq; ++q) {
                const bool is_x = sc.qubits[q].role == Role::XAnc;
                int dq = corners[q - d * d][is_x ? xo[s] : zo[s]];
                if (dq < 0) continue;
                l.cnots.push_back(is_x ? std::make_pair(q, dq) : std::make_pair(dq, q));
            }
            sc.layers.push_back(l);
        }
        sc.layers.push_back({LayerKind::Hadamard, rd, sc.x_anc, {}});
        sc.layers.push_back({LayerKind::Measure, rd, ancillas, {}});
        for (int q : ancillas) {
            meas_of[q].push_back(int(sc.measurements.size()));
            sc.measurements.push_back({int(sc.layers.size()) - 1, q});
        }
    }
    sc.layers.push_back({LayerKind::MeasureData, rounds, sc.data, {}});
    std::vector<int> data_meas(d * d);
    for (int q : sc.data) {
        data_meas[q] = int(sc.measurements.size());
        sc.measurements.push_back({int(sc.layers.size()) - 1, q});
    }
    for (int rd = 0; rd <= rounds; ++rd)
        for (int a : sc.z_anc) {
            std::vector<int> det;
            if (rd < rounds) {
                det.push_back(meas_of[a][rd]);
                if (rd > 0) det.push_back(meas_of[a][rd - 1]);
            } else {
                det.push_back(meas_of[a][rounds - 1]);
                for (int dq : sc.plaquette_data[a]) det.push_back(data_meas[dq]);
            }
            sc.detectors.push_back(det);
        }
    for (int c = 0; c < d; ++c) sc.observable.push_back(data_meas[sc.data_at(0, c)]);
    return sc;
}

// ---------------------------------------------------------------- noise locations

enum class LocKind : uint8_t { Gate1, Gate2, Idle, Reset, Measure };

struct Location {
    LocKind kind;
    int layer;
    int q0 = -1, q1 = -1;    // qubits (q1 only for CNOTs)
    int meas = -1;           // measurement index for Measure
    int rate_class = 0;      // index into per-setting threshold table
    std::vector<int> nbr;    // neighbouring location ids in the same layer
};

// rate classes: 0 gate1, 1 gate2, 2 idle(reset layer), 3 idle(1q), 4 idle(2q), 5 idle(measure), 6 reset, 7 measure
struct RateTable {
    std::array<std::array<double, 3>, 2> gate{};  // p1 (with decoherence), p2, p3 per arity
    std::array<bool, 2> anchored{true, true};
    std::array<double, 8> single{};                // for classes 2..7
};

inline RateTable make_rate_table(const LcpemParams &p) {
    p.validate();
    RateTable t;
    t.gate[0] = {add_decoherence(p.p1_1q, 1, p.r, p.t_1q), p.p2_1q, p.p3_1q};
    t.gate[1] = {add_decoherence(p.p1_2q, 2, p.r, p.t_2q), p.p2_2q, p.p3_2q};
    for (int a = 0; a < 2; ++a) {
        const auto &g = t.gate[a];
        t.anchored[a] = g[0] <= 0.25 && g[1] <= 0.25 && g[2] <= 0.25;
        if (g[0] + g[1] + g[2] > 1 + 1e-12) throw ConfigError("gate event probabilities sum above 1");
    }
    t.single[2] = p.r * p.t_reset;
    t.single[3] = p.r * p.t_1q;
    t.single[4] = p.r * p.t_2q;
    t.single[5] = p.r * p.t_measure;
    t.single[6] = p.p_reset;
    t.single[7] = p.p_measure;
    for (int c = 2; c < 6; ++c)
        if (t.single[c] > 1) throw ConfigError("idle error probability exceeds 1");
    return t;
}

// fixed-anchor bands keep events nested when a single p_k changes; large rates fall back to stacking
inline int gate_band(double u, const std::array<double, 3> &p, bool anchored = true) {
    if (!anchored) {
        if (u < p[2]) return 3;
        if (u < p[2] + p[1]) return 2;
        if (u < p[2] + p[1] + p[0]) return 1;
        return 0;
    }
    if (u < p[2]) return 3;
    if (u >= 0.25 && u < 0.25 + p[1]) return 2;
    if (u >= 0.5 && u < 0.5 + p[0]) return 1;
    return 0;
}

inline std::vector<Location> build_locations(const SyndromeCircuit &sc) {
    std::vector<Location> locs;
    const int nq = sc.num_qubits();
    std::vector<int> loc_of_qubit(nq);
    for (int li = 0; li < int(sc.layers.size()); ++li) {
        const Layer &l = sc.layers[li];
        std::vector<char> busy(nq, 0);
        const int first = int(locs.size());
        std::fill(loc_of_qubit.begin(), loc_of_qubit.end(), -1);
        if (l.kind == LayerKind::Cnot) {
            for (auto [c, t] : l.cnots) {
                Location x{LocKind::Gate2, li, c, t, -1, 1, {}};
                loc_of_qubit[c] = loc_of_qubit[t] = int(locs.size());
                locs.push_back(x);
                busy[c] = busy[t] = 1;
            }
        } else if (l.kind == LayerKind::Hadamard) {
            for (int q : l.targets) {
                loc_of_qubit[q] = int(locs.size());
                locs.push_back({LocKind::Gate1, li, q, -1, -1, 0, {}});
                busy[q] = 1;
            }
        } else if (l.kind == LayerKind::Reset) {
            for (int q : l.targets) {
                locs.push_back({LocKind::Reset, li, q, -1, -1, 6, {}});
                busy[q] = 1;
            }
        } else {
            for (int q : l.targets) busy[q] = 1;
        }
        const int idle_class = l.kind == LayerKind::Reset      ? 2
                               : l.kind == LayerKind::Hadamard ? 3
                               : l.kind == LayerKind::Cnot     ? 4
                                                               : 5;
        for (int q = 0; q < nq; ++q)
            if (!busy[q]) {
                loc_of_qubit[q] = int(locs.size());
                locs.push_back({LocKind::Idle, li, q, -1, -1, idle_class, {}});
            }
        // neighbourhoods: 1q layers over physical qubits, 2q layers over CNOT gates
        for (int i = first; i < int(locs.size()); ++i) {
            Location &x = locs[i];
            if (x.kind == LocKind::Gate1) {
                for (int nb : sc.neighbors[x.q0])
                    if (loc_of_qubit[nb] >= 0) x.nbr.push_back(loc_of_qubit[nb]);
            } else if (x.kind == LocKind::Gate2) {
                for (int q : {x.q0, x.q1})
                    for (int nb : sc.neighbors[q]) {
                        int o = loc_of_qubit[nb];
                        if (o >= 0 && o != i && locs[o].kind == LocKind::Gate2) x.nbr.push_back(o);
                    }
            }
            std::sort(x.nbr.begin(), x.nbr.end());
            x.nbr.erase(std::unique(x.nbr.begin(), x.nbr.end()), x.nbr.end());
        }
    }
    for (int mi = 0; mi < int(sc.measurements.size()); ++mi) {
        auto [li, q] = sc.measurements[mi];
        locs.push_back({LocKind::Measure, li, q, -1, mi, 7, {}});
    }
    return locs;
}

// Pauli digits: 0 I, 1 X, 2 Y, 3 Z; x bit = digit in {1,2}, z bit = digit in {2,3}
inline bool pauli_x(int dg) { return dg == 1 || dg == 2; }
inline bool pauli_z(int dg) { return dg == 2 || dg == 3; }
inline int pauli_from_xz(bool x, bool z) { return x ? (z ? 2 : 1) : (z ? 3 : 0); }

// Draws the content of an event with `k` locations centred on location `i`.
// Calls sink.pauli(layer, qubit, digit) and sink.flip(measurement).
template <class Sink>
void emit_event(const std::vector<Location> &locs, int i, int k, Stream &s, Sink &sink) {
    const Location &x = locs[i];
    switch (x.kind) {
        case LocKind::Measure: sink.flip(x.meas); return;
        case LocKind::Reset: sink.pauli(x.layer, x.q0, 1); return;
        case LocKind::Idle: sink.pauli(x.layer, x.q0, 1 + int(s.below(3))); return;
        default: break;
    }
    int chosen[4] = {i, -1, -1, -1};
    int n = 1;
    if (k > 1) {
        int pool[16];
        int np = std::min<int>(int(x.nbr.size()), 16);
        for (int a = 0; a < np; ++a) pool[a] = x.nbr[a];
        int want = std::min(k - 1, np);
        for (int a = 0; a < want; ++a) {
            int b = a + int(s.below(uint32_t(np - a)));
            std::swap(pool[a], pool[b]);
            chosen[n++] = pool[a];
        }
    }
    for (int a = 0; a < n; ++a) {
        const Location &y = locs[chosen[a]];
        if (y.q1 >= 0) {
            int v = 1 + int(s.below(15));
            sink.pauli(y.layer, y.q0, v >> 2);
            sink.pauli(y.layer, y.q1, v & 3);
        } else {
            sink.pauli(y.layer, y.q0, 1 + int(s.below(3)));
        }
    }
}

inline uint64_t shot_key(uint64_t seed, uint64_t shot) { return hash_combine(seed, shot); }
inline double location_uniform(uint64_t key, int loc) {
    return to_unit(splitmix64(key + uint64_t(loc) * 0xd1b54a32d192ed03ULL));
}
inline Stream location_stream(uint64_t key, int loc, int k) {
    return Stream(hash_key(key ^ 0x5bd1e9955bd1e995ULL, uint64_t(loc), uint64_t(k)));
}

inline int location_band(const Location &x, double u, const RateTable &t) {
    if (x.kind == LocKind::Gate1 || x.kind == LocKind::Gate2) return gate_band(u, t.gate[x.rate_class], t.anchored[x.rate_class]);
    return u < t.single[x.rate_class] ? 1 : 0;
}

// ---------------------------------------------------------------- explicit errors and frame simulation

struct EventRecord {
    int location;
    int k;
    std::vector<std::pair<int, int>> paulis;  // (qubit, digit)
};

struct SampledError {
    std::vector<std::vector<uint8_t>> frame;  // [layer][qubit] digit applied right after the layer
    std::vector<uint8_t> meas_flip;           // per measurement
    std::vector<EventRecord> provenance;

    bool empty() const {
        for (auto &l : frame)
            for (auto v : l)
                if (v) return false;
        for (auto v : meas_flip)
            if (v) return false;
        return true;
    }
};

inline SampledError sample_lcpem(const SyndromeCircuit &sc, const std::vector<Location> &locs, const LcpemParams &p,
                                 uint64_t seed, uint64_t shot = 0) {
    RateTable t = make_rate_table(p);
    SampledError e;
    e.frame.assign(sc.layers.size(), std::vector<uint8_t>(sc.num_qubits(), 0));
    e.meas_flip.assign(sc.measurements.size(), 0);
    struct Sink {
        SampledError &e;
        EventRecord *rec;
        void pauli(int layer, int q, int dg) {
            uint8_t &f = e.frame[layer][q];
            f = uint8_t(pauli_from_xz(pauli_x(f) ^ pauli_x(dg), pauli_z(f) ^ pauli_z(dg)));
            rec->paulis.push_back({q, dg});
        }
        void flip(int m) {
            e.meas_flip[m] ^= 1;
            rec->paulis.push_back({-1 - m, 1});
        }
    };
    const uint64_t key = shot_key(seed, shot);
    for (int i = 0; i < int(locs.size()); ++i) {
        int k = location_band(locs[i], location_uniform(key, i), t);
        if (!k) continue;
        e.provenance.push_back({i, k, {}});
        Sink sink{e, &e.provenance.back()};
        Stream s = location_stream(key, i, k);
        emit_event(locs, i, k, s, sink);
    }
    return e;
}

inline SampledError sample_lcpem(const SyndromeCircuit &sc, const LcpemParams &p, uint64_t seed, uint64_t shot = 0) {
    return sample_lcpem(sc, build_locations(sc), p, seed, shot);
}

struct MeasurementRecord {
    std::vector<uint8_t> flips;  // per measurement, relative to the noiseless reference
    std::vector<std::vector<uint8_t>> ancilla_rounds;
    std::vector<uint8_t> data_final;
};

struct SimulationResult {
    MeasurementRecord record;
    std::vector<uint8_t> detection_events;
    bool logical_flip = false;
};

// forward Pauli-frame propagation
inline SimulationResult simulate(const SyndromeCircuit &sc, const SampledError &e) {
    const int nq = sc.num_qubits();
    std::vector<uint8_t> x(nq, 0), z(nq, 0);
    SimulationResult out;
    out.record.flips.assign(sc.measurements.size(), 0);
    int mi = 0;
    for (int li = 0; li < int(sc.layers.size()); ++li) {
        const Layer &l = sc.layers[li];
        switch (l.kind) {
            case LayerKind::Reset:
                for (int q : l.targets) x[q] = z[q] = 0;
                break;
            case LayerKind::Hadamard:
                for (int q : l.targets) std::swap(x[q], z[q]);
                break;
            case LayerKind::Cnot:
                for (auto [c, t] : l.cnots) {
                    x[t] ^= x[c];
                    z[c] ^= z[t];
                }
                break;
            default:
                for (int q : l.targets) {
                    out.record.flips[mi] = x[q] ^ (e.meas_flip.empty() ? 0 : e.meas_flip[mi]);
                    ++mi;
                }
                break;
        }
        if (!e.frame.empty())
            for (int q = 0; q < nq; ++q) {
                x[q] ^= uint8_t(pauli_x(e.frame[li][q]));
                z[q] ^= uint8_t(pauli_z(e.frame[li][q]));
            }
    }
    const int na = int(sc.x_anc.size() + sc.z_anc.size());
    for (int rd = 0; rd < sc.rounds; ++rd)
        out.record.ancilla_rounds.emplace_back(out.record.flips.begin() + rd * na,
                                               out.record.flips.begin() + (rd + 1) * na);
    out.record.data_final.assign(out.record.flips.begin() + sc.rounds * na, out.record.flips.end());
    for (auto &det : sc.detectors) {
        uint8_t v = 0;
        for (int m : det) v ^= out.record.flips[m];
        out.detection_events.push_back(v);
    }
    uint8_t lg = 0;
    for (int m : sc.observable) lg ^= out.record.flips[m];
    out.logical_flip = lg;
    return out;
}

// ---------------------------------------------------------------- detector sensitivities

// For every (layer, qubit) the detectors (and, in the last bit, the logical) flipped by an X or Z
// error inserted right after that layer. Built by one backward sweep.
struct FrameSensitivity {
    int words = 0;
    int num_detectors = 0;
    int num_qubits = 0;
    std::vector<uint64_t> table;  // [layer][qubit][x/z][words]
    std::vector<uint64_t> meas;   // [measurement][words]

    const uint64_t *at(int layer, int q, int xz) const {
        return &table[((size_t(layer) * num_qubits + q) * 2 + xz) * words];
    }
    const uint64_t *meas_at(int m) const { return &meas[size_t(m) * words]; }
    int logical_bit() const { return num_detectors; }
};

inline FrameSensitivity build_sensitivity(const SyndromeCircuit &sc) {
    FrameSensitivity fs;
    fs.num_detectors = sc.num_detectors();
    fs.words = (fs.num_detectors + 1 + 63) / 64;
    fs.num_qubits = sc.num_qubits();
    const int W = fs.words, nq = fs.num_qubits, nl = int(sc.layers.size());
    fs.meas.assign(sc.measurements.size() * W, 0);
    for (int dI = 0; dI < fs.num_detectors; ++dI)
        for (int m : sc.detectors[dI]) fs.meas[size_t(m) * W + dI / 64] ^= uint64_t(1) << (dI % 64);
    for (int m : sc.observable) fs.meas[size_t(m) * W + fs.num_detectors / 64] ^= uint64_t(1) << (fs.num_detectors % 64);
    fs.table.assign(size_t(nl) * nq * 2 * W, 0);
    std::vector<uint64_t> cur(size_t(nq) * 2 * W, 0);  // sensitivity at the current time point
    auto S = [&](int q, int xz) { return &cur[(size_t(q) * 2 + xz) * W]; };
    std::vector<int> first_meas(nl, -1);
    for (int m = int(sc.measurements.size()) - 1; m >= 0; --m) first_meas[sc.measurements[m].first] = m;
    for (int li = nl - 1; li >= 0; --li) {
        std::copy(cur.begin(), cur.end(), fs.table.begin() + size_t(li) * nq * 2 * W);
        const Layer &l = sc.layers[li];
        switch (l.kind) {
            case LayerKind::Reset:
                for (int q : l.targets) {
                    std::fill(S(q, 0), S(q, 0) + W, 0);
                    std::fill(S(q, 1), S(q, 1) + W, 0);
                }
                break;
            case LayerKind::Hadamard:
                for (int q : l.targets) std::swap_ranges(S(q, 0), S(q, 0) + W, S(q, 1));
                break;
            case LayerKind::Cnot:
                for (auto [c, t] : l.cnots)
                    for (int w = 0; w < W; ++w) {
                        S(c, 0)[w] ^= S(t, 0)[w];
                        S(t, 1)[w] ^= S(c, 1)[w];
                    }
                break;
            default: {
                int m = first_meas[li];
                for (int q : l.targets) {
                    for (int w = 0; w < W; ++w) S(q, 0)[w] ^= fs.meas[size_t(m) * W + w];
                    ++m;
                }
            }
        }
    }
    return fs;
}

inline void xor_pauli(const FrameSensitivity &fs, int layer, int q, int dg, uint64_t *acc) {
    if (pauli_x(dg)) {
        const uint64_t *p = fs.at(layer, q, 0);
        for (int w = 0; w < fs.words; ++w) acc[w] ^= p[w];
    }
    if (pauli_z(dg)) {
        const uint64_t *p = fs.at(layer, q, 1);
        for (int w = 0; w < fs.words; ++w) acc[w] ^= p[w];
    }
}

// Samples shots under several parameter settings at once with shared random numbers.
// out receives settings x words bits: detection events plus the true logical flip in the last bit.
class ShotSampler {
  public:
    ShotSampler(const SyndromeCircuit &sc, std::vector<LcpemParams> settings)
        : locs_(build_locations(sc)), sens_(build_sensitivity(sc)) {
        if (settings.empty() || settings.size() > 32) throw std::invalid_argument("1..32 settings");
        for (auto &p : settings) {
            rates_.push_back(make_rate_table(p));
            all_anchored_ = all_anchored_ && rates_.back().anchored[0] && rates_.back().anchored[1];
        }
        // per class union bounds for a cheap reject
        for (int a = 0; a < 2; ++a)
            for (int k = 0; k < 3; ++k) {
                maxg_[a][k] = 0;
                for (auto &t : rates_) maxg_[a][k] = std::max(maxg_[a][k], t.gate[a][k]);
            }
        maxs_.fill(0);
        for (int c = 0; c < 8; ++c)
            for (auto &t : rates_) maxs_[c] = std::max(maxs_[c], t.single[c]);
    }

    int words() const { return sens_.words; }
    int num_settings() const { return int(rates_.size()); }
    const FrameSensitivity &sensitivity() const { return sens_; }
    const std::vector<Location> &locations() const { return locs_; }

    void sample(uint64_t seed, uint64_t shot, uint64_t *out) const {
        const int W = sens_.words, ns = num_settings();
        std::fill(out, out + size_t(W) * ns, 0);
        const uint64_t key = shot_key(seed, shot);
        uint64_t tmp[64];
        std::vector<uint64_t> big;
        uint64_t *acc = tmp;
        if (W > 64) {
            big.resize(W);
            acc = big.data();
        }
        struct Sink {
            const FrameSensitivity &fs;
            uint64_t *acc;
            void pauli(int layer, int q, int dg) { xor_pauli(fs, layer, q, dg, acc); }
            void flip(int m) {
                const uint64_t *p = fs.meas_at(m);
                for (int w = 0; w < fs.words; ++w) acc[w] ^= p[w];
            }
        } sink{sens_, acc};
        for (int i = 0; i < int(locs_.size()); ++i) {
            const Location &x = locs_[i];
            const double u = location_uniform(key, i);
            const bool gate = x.kind == LocKind::Gate1 || x.kind == LocKind::Gate2;
            if (gate) {
                const auto &mg = maxg_[x.rate_class];
                if (all_anchored_ && u >= mg[2] && !(u >= 0.25 && u < 0.25 + mg[1]) && !(u >= 0.5 && u < 0.5 + mg[0]))
                    continue;
            } else if (u >= maxs_[x.rate_class]) {
                continue;
            }
            // the band can differ between settings only through which k fires
            int done_k = 0;
            for (int s = 0; s < ns; ++s) {
                int k = location_band(x, u, rates_[s]);
                if (!k || (done_k >> k & 1)) continue;
                done_k |= 1 << k;
                std::fill(acc, acc + W, 0);
                Stream st = location_stream(key, i, k);
                emit_event(locs_, i, k, st, sink);
                for (int s2 = s; s2 < ns; ++s2)
                    if (location_band(x, u, rates_[s2]) == k)
                        for (int w = 0; w < W; ++w) out[size_t(s2) * W + w] ^= acc[w];
            }
        }
    }

  private:
    std::vector<Location> locs_;
    FrameSensitivity sens_;
    std::vector<RateTable> rates_;
    std::array<std::array<double, 3>, 2> maxg_{};
    std::array<double, 8> maxs_{};
    bool all_anchored_ = true;
};

}  // namespace hamqec
