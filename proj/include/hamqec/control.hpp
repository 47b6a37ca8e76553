#pragma once

#include <array>
#include <variant>
#include <vector>

#include "hamqec/common.hpp"
#include "hamqec/device.hpp"
#include "hamqec/linalg.hpp"

namespace hamqec {

struct CosineEnvelope {
    double tau_gate = 40.0;
};
struct FlatTopEnvelope {
    double tau_ramp = 30.0;
    double tau_plateau = 70.0;
};
using Envelope = std::variant<CosineEnvelope, FlatTopEnvelope>;

struct DriveSpec {
    Coord target;
    double amplitude = 0;  // GHz
    double freq = 0;       // GHz, linear
    double phase = 0;      // rad
    Envelope envelope = CosineEnvelope{};

    double tau_gate() const {
        if (auto *c = std::get_if<CosineEnvelope>(&envelope)) return c->tau_gate;
        auto &f = std::get<FlatTopEnvelope>(envelope);
        return 2 * f.tau_ramp + f.tau_plateau;
    }
    bool flat_top() const { return std::holds_alternative<FlatTopEnvelope>(envelope); }
    // amplitude, freq, phase, then envelope durations
    int num_params() const { return flat_top() ? 5 : 4; }
    double param(int i) const {
        switch (i) {
            case 0: return amplitude;
            case 1: return freq;
            case 2: return phase;
        }
        if (auto *c = std::get_if<CosineEnvelope>(&envelope)) return c->tau_gate;
        auto &f = std::get<FlatTopEnvelope>(envelope);
        return i == 3 ? f.tau_ramp : f.tau_plateau;
    }
    void set_param(int i, double v) {
        switch (i) {
            case 0: amplitude = v; return;
            case 1: freq = v; return;
            case 2: phase = v; return;
        }
        if (auto *c = std::get_if<CosineEnvelope>(&envelope)) {
            c->tau_gate = v;
            return;
        }
        auto &f = std::get<FlatTopEnvelope>(envelope);
        (i == 3 ? f.tau_ramp : f.tau_plateau) = v;
    }
    static const char *param_name(bool flat, int i) {
        static const char *cos_names[] = {"eps_d", "omega_d", "phase", "tau_gate"};
        static const char *ft_names[] = {"eps_d", "omega_d", "phase", "tau_ramp", "tau_plateau"};
        return flat ? ft_names[i] : cos_names[i];
    }
    static const char *param_unit(int i) {
        static const char *u[] = {"GHz", "GHz", "rad", "ns", "ns"};
        return u[i];
    }
    void validate() const {
        if (amplitude < 0) throw ConfigError("drive amplitude must be >= 0");
        if (auto *c = std::get_if<CosineEnvelope>(&envelope)) {
            if (!(c->tau_gate > 0)) throw ConfigError("tau_gate must be > 0");
        } else {
            auto &f = std::get<FlatTopEnvelope>(envelope);
            if (!(f.tau_ramp > 0) || !(f.tau_plateau >= 0)) throw ConfigError("flat-top durations must be positive");
        }
    }
};

inline double envelope_value(const DriveSpec &s, double t) {
    if (t < 0) return 0;
    const double eps = s.amplitude;
    if (auto *c = std::get_if<CosineEnvelope>(&s.envelope)) {
        if (t > c->tau_gate) return 0;
        return 0.5 * eps * (1 - std::cos(kTwoPi * t / c->tau_gate));
    }
    auto &f = std::get<FlatTopEnvelope>(s.envelope);
    const double tg = 2 * f.tau_ramp + f.tau_plateau;
    if (t > tg) return 0;
    if (t < f.tau_ramp) return 0.5 * eps * (1 - std::cos(kPi * t / f.tau_ramp));
    if (t <= tg - f.tau_ramp) return eps;
    return 0.5 * eps * (1 - std::cos(kPi * (tg - t) / f.tau_ramp));
}

// value and partials of E(t) cos(2 pi f t + phase) w.r.t. DriveSpec::param(i)
inline double drive_field(const DriveSpec &s, double t, double *grad = nullptr) {
    const double env = envelope_value(s, t);
    const double arg = kTwoPi * s.freq * t + s.phase;
    const double c = std::cos(arg), sn = std::sin(arg);
    if (grad) {
        for (int i = 0; i < s.num_params(); ++i) grad[i] = 0;
        const double eps = s.amplitude;
        grad[0] = (eps != 0 ? env / eps : envelope_value(DriveSpec{s.target, 1.0, s.freq, s.phase, s.envelope}, t)) * c;
        grad[1] = -env * sn * kTwoPi * t;
        grad[2] = -env * sn;
        if (auto *ce = std::get_if<CosineEnvelope>(&s.envelope)) {
            const double tau = ce->tau_gate;
            if (t >= 0 && t <= tau) grad[3] = -0.5 * eps * std::sin(kTwoPi * t / tau) * kTwoPi * t / (tau * tau) * c;
        } else {
            auto &f = std::get<FlatTopEnvelope>(s.envelope);
            const double tr = f.tau_ramp, tg = 2 * tr + f.tau_plateau;
            if (t >= 0 && t < tr) {
                grad[3] = -0.5 * eps * std::sin(kPi * t / tr) * kPi * t / (tr * tr) * c;
            } else if (t > tg - tr && t <= tg) {
                const double u = tg - t;
                const double sv = 0.5 * eps * std::sin(kPi * u / tr);
                grad[3] = sv * kPi * (2 * tr - u) / (tr * tr) * c;
                grad[4] = sv * kPi / tr * c;
            }
        }
    }
    return env * c;
}

inline MatC drive_hamiltonian_term(const DriveSpec &s, double t, const TruncatedQubit &q) {
    return drive_field(s, t) * q.phi_op;
}

// single-qubit rotations used by the compensation layers
inline Eigen::Matrix2cd rz(double th) {
    Eigen::Matrix2cd m = Eigen::Matrix2cd::Zero();
    m(0, 0) = std::polar(1.0, -th / 2);
    m(1, 1) = std::polar(1.0, th / 2);
    return m;
}
inline Eigen::Matrix2cd ry(double th) {
    Eigen::Matrix2cd m;
    m << std::cos(th / 2), -std::sin(th / 2), std::sin(th / 2), std::cos(th / 2);
    return m;
}
inline Eigen::Matrix2cd drz(double th) {
    Eigen::Matrix2cd m = Eigen::Matrix2cd::Zero();
    m(0, 0) = cplx(0, -0.5) * std::polar(1.0, -th / 2);
    m(1, 1) = cplx(0, 0.5) * std::polar(1.0, th / 2);
    return m;
}
inline Eigen::Matrix2cd dry(double th) {
    Eigen::Matrix2cd m;
    m << -0.5 * std::sin(th / 2), -0.5 * std::cos(th / 2), 0.5 * std::cos(th / 2), -0.5 * std::sin(th / 2);
    return m;
}
inline Eigen::Matrix2cd euler(const std::array<double, 3> &a) { return rz(a[0]) * ry(a[1]) * rz(a[2]); }

enum class CompKind { ZOnly, Euler };

struct Compensation {
    CompKind kind = CompKind::ZOnly;
    std::vector<double> z_before, z_after;
    std::vector<std::array<double, 3>> u_before, u_after;

    static Compensation zeros(CompKind k, int m) {
        Compensation c;
        c.kind = k;
        if (k == CompKind::ZOnly) {
            c.z_before.assign(m, 0.0);
            c.z_after.assign(m, 0.0);
        } else {
            c.u_before.assign(m, {0, 0, 0});
            c.u_after.assign(m, {0, 0, 0});
        }
        return c;
    }
    int num_qubits() const { return int(kind == CompKind::ZOnly ? z_before.size() : u_before.size()); }
    int per_qubit() const { return kind == CompKind::ZOnly ? 1 : 3; }
    // flat angle vector: before block then after block
    std::vector<double> angles() const {
        std::vector<double> v;
        if (kind == CompKind::ZOnly) {
            v = z_before;
            v.insert(v.end(), z_after.begin(), z_after.end());
        } else {
            for (auto &a : u_before) v.insert(v.end(), a.begin(), a.end());
            for (auto &a : u_after) v.insert(v.end(), a.begin(), a.end());
        }
        return v;
    }
    void set_angles(const std::vector<double> &v) {
        const int m = num_qubits(), k = per_qubit();
        if (int(v.size()) != 2 * m * k) throw std::invalid_argument("compensation angle count mismatch");
        for (int q = 0; q < m; ++q)
            for (int j = 0; j < k; ++j) {
                if (kind == CompKind::ZOnly) {
                    z_before[q] = v[q];
                    z_after[q] = v[m + q];
                } else {
                    u_before[q][j] = v[q * 3 + j];
                    u_after[q][j] = v[m * 3 + q * 3 + j];
                }
            }
    }
    Eigen::Matrix2cd local(bool after, int q) const {
        if (kind == CompKind::ZOnly) return rz(after ? z_after[q] : z_before[q]);
        return euler(after ? u_after[q] : u_before[q]);
    }
    // derivative of local(after, q) w.r.t. its j-th angle
    Eigen::Matrix2cd dlocal(bool after, int q, int j) const {
        if (kind == CompKind::ZOnly) return drz(after ? z_after[q] : z_before[q]);
        const auto &a = after ? u_after[q] : u_before[q];
        if (j == 0) return drz(a[0]) * ry(a[1]) * rz(a[2]);
        if (j == 1) return rz(a[0]) * dry(a[1]) * rz(a[2]);
        return rz(a[0]) * ry(a[1]) * drz(a[2]);
    }
};

inline MatC product_operator(const std::vector<Eigen::Matrix2cd> &ops) {
    MatC out = MatC::Identity(1, 1);
    for (auto &o : ops) out = kron(out, MatC(o));
    return out;
}

inline std::pair<MatC, MatC> compensation_matrices(const Compensation &c) {
    std::vector<Eigen::Matrix2cd> b, a;
    for (int q = 0; q < c.num_qubits(); ++q) {
        b.push_back(c.local(false, q));
        a.push_back(c.local(true, q));
    }
    return {product_operator(b), product_operator(a)};
}

inline MatC apply_compensation(const MatC &u, const Compensation &c) {
    const int m = c.num_qubits();
    if (u.rows() != (int64_t(1) << m) || u.cols() != u.rows())
        throw std::invalid_argument("apply_compensation: dimension mismatch");
    auto [cb, ca] = compensation_matrices(c);
    return ca * u * cb;
}

// contraction of an adjoint on a tensor product with every factor but q
inline Eigen::Matrix2cd local_adjoint(const MatC &abar, const std::vector<Eigen::Matrix2cd> &ops, int q) {
    const int m = int(ops.size());
    const int64_t d = int64_t(1) << m;
    Eigen::Matrix2cd out = Eigen::Matrix2cd::Zero();
    for (int64_t r = 0; r < d; ++r)
        for (int64_t s = 0; s < d; ++s) {
            cplx w = 1;
            for (int p = 0; p < m && w != 0.0; ++p) {
                if (p == q) continue;
                w *= ops[p]((r >> (m - 1 - p)) & 1, (s >> (m - 1 - p)) & 1);
            }
            if (w == 0.0) continue;
            out((r >> (m - 1 - q)) & 1, (s >> (m - 1 - q)) & 1) += abar(r, s) * std::conj(w);
        }
    return out;
}

// R = A u B; given rbar returns ubar and fills angle gradients (layout of Compensation::angles)
inline MatC compensation_backward(const MatC &u, const Compensation &c, const MatC &rbar, std::vector<double> &grad) {
    const int m = c.num_qubits(), k = c.per_qubit();
    std::vector<Eigen::Matrix2cd> b, a;
    for (int q = 0; q < m; ++q) {
        b.push_back(c.local(false, q));
        a.push_back(c.local(true, q));
    }
    MatC bm = product_operator(b), am = product_operator(a);
    MatC ubar = am.adjoint() * rbar * bm.adjoint();
    MatC abar = rbar * (u * bm).adjoint();
    MatC bbar = (am * u).adjoint() * rbar;
    grad.assign(2 * m * k, 0.0);
    for (int q = 0; q < m; ++q) {
        Eigen::Matrix2cd lb = local_adjoint(bbar, b, q), la = local_adjoint(abar, a, q);
        for (int j = 0; j < k; ++j) {
            grad[q * k + j] = re_inner(lb, c.dlocal(false, q, j));
            grad[m * k + q * k + j] = re_inner(la, c.dlocal(true, q, j));
        }
    }
    return ubar;
}

enum class TargetKind { XAll, Cnot, Identity };

struct GateSchedule {
    std::string name;
    std::vector<DriveSpec> drives;
    Compensation compensation;
    TargetKind target = TargetKind::XAll;
    std::vector<std::pair<int, int>> cnots;  // (control, target) region indices
    double duration = 0;                     // evolution window, ns; 0 means max tau_gate
    double dt = 0.02;                        // Trotter step, ns

    double window() const {
        if (duration > 0) return duration;
        double w = 0;
        for (auto &d : drives) w = std::max(w, d.tau_gate());
        return w;
    }
    void validate(const std::vector<Coord> &region) const {
        std::vector<Coord> seen;
        for (auto &d : drives) {
            d.validate();
            if (std::find(region.begin(), region.end(), d.target) == region.end())
                throw ConfigError("drive target outside region: " + coord_name(d.target));
            if (std::find(seen.begin(), seen.end(), d.target) != seen.end())
                throw ConfigError("more than one drive on " + coord_name(d.target));
            seen.push_back(d.target);
        }
        if (!(window() > 0)) throw ConfigError("schedule has zero duration");
        if (!(dt > 0)) throw ConfigError("dt must be > 0");
        if (compensation.num_qubits() != int(region.size())) throw ConfigError("compensation size != region size");
    }
};

inline MatC target_unitary(const GateSchedule &s, int m) {
    const int64_t d = int64_t(1) << m;
    MatC t = MatC::Zero(d, d);
    for (int64_t x = 0; x < d; ++x) {
        int64_t y = x;
        if (s.target == TargetKind::XAll) {
            y = x ^ (d - 1);
        } else if (s.target == TargetKind::Cnot) {
            for (auto [c, tq] : s.cnots)
                if ((x >> (m - 1 - c)) & 1) y ^= int64_t(1) << (m - 1 - tq);
        }
        t(y, x) = 1;
    }
    return t;
}

// reference pulses on the standard 6-site region
inline GateSchedule table1_x_schedule() {
    GateSchedule s;
    s.name = "x_round";
    const double eps[] = {1.184e-2, 1.085e-2, 1.141e-2, 1.227e-2, 1.274e-2, 1.167e-2};
    const double tau[] = {40.06, 40.04, 40.05, 40.04, 40.04, 40.04};
    const double w[] = {0.5708, 0.4155, 0.5048, 0.6678, 0.7963, 0.5591};
    auto reg = default_region();
    for (int i = 0; i < 6; ++i) s.drives.push_back({reg[i], eps[i], w[i], 0.0, CosineEnvelope{tau[i]}});
    s.compensation = Compensation::zeros(CompKind::ZOnly, 6);
    s.target = TargetKind::XAll;
    s.dt = 0.02;
    return s;
}

inline GateSchedule table1_cnot_schedule() {
    GateSchedule s;
    s.name = "cnot_round";
    const double eps[] = {3.082e-2, 2.882e-2, 3.390e-2};
    const double ramp[] = {30.20, 29.98, 30.07};
    const double plat[] = {70.00, 70.00, 69.94};
    const double w[] = {0.4191, 0.6655, 0.5592};
    for (int i = 0; i < 3; ++i) s.drives.push_back({{i, 2}, eps[i], w[i], 0.0, FlatTopEnvelope{ramp[i], plat[i]}});
    s.compensation = Compensation::zeros(CompKind::Euler, 6);
    s.target = TargetKind::Cnot;
    s.cnots = {{0, 1}, {2, 3}, {4, 5}};
    s.dt = 0.065;
    return s;
}

}  // namespace hamqec
