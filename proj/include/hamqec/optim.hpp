#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "hamqec/circuit.hpp"
#include "hamqec/decode.hpp"
#include "hamqec/evolve.hpp"
#include "hamqec/twirl.hpp"

namespace hamqec {

struct StaleCoefficientsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline const char *lcpem_name(int i) {
    static const char *n[] = {"p1_1q", "p2_1q", "p3_1q", "p1_2q", "p2_2q", "p3_2q"};
    return n[i];
}

inline std::array<double, 6> lcpem_values(const LcpemParams &p) {
    return {p.p1_1q, p.p2_1q, p.p3_1q, p.p1_2q, p.p2_2q, p.p3_2q};
}

inline LcpemParams with_lcpem(LcpemParams base, const std::array<double, 6> &v) {
    for (int i = 0; i < 6; ++i) base.pk(i / 3 + 1, i % 3 + 1) = v[i];
    return base;
}

// ---------------------------------------------------------------- fidelity

inline double average_gate_fidelity(const MatC &u, const MatC &target) {
    const double d = double(u.rows());
    return (std::norm((target.adjoint() * u).trace()) + d) / (d * (d + 1));
}

// adjoint of average_gate_fidelity w.r.t. u
inline MatC average_gate_fidelity_backward(const MatC &u, const MatC &target) {
    const double d = double(u.rows());
    const cplx x = (target.adjoint() * u).trace();
    return (2.0 / (d * (d + 1))) * x * target;
}

struct ObjectiveValue {
    double value = 0;
    std::vector<double> fidelity;
    std::vector<MatC> u_bar;  // dO/du per round
};

// log10(n - sum F_i); two rounds gives the 1q + 2q objective
inline ObjectiveValue fidelity_objective(const std::vector<MatC> &u, const std::vector<MatC> &targets) {
    if (u.empty() || u.size() != targets.size()) throw std::invalid_argument("fidelity_objective: size mismatch");
    ObjectiveValue o;
    double arg = double(u.size());
    for (size_t i = 0; i < u.size(); ++i) {
        if (u[i].rows() != targets[i].rows()) throw std::invalid_argument("fidelity_objective: dimension mismatch");
        o.fidelity.push_back(average_gate_fidelity(u[i], targets[i]));
        arg -= o.fidelity.back();
    }
    if (!(arg > 0)) throw NumericalError("fidelity overflow: log argument " + std::to_string(arg) + " <= 0");
    o.value = std::log10(arg);
    const double s = -1.0 / (arg * std::log(10.0));
    for (size_t i = 0; i < u.size(); ++i) o.u_bar.push_back(s * average_gate_fidelity_backward(u[i], targets[i]));
    return o;
}

inline double fidelity_objective(double f1, double f2) {
    const double arg = 2.0 - f1 - f2;
    if (!(arg > 0)) throw NumericalError("fidelity overflow: log argument " + std::to_string(arg) + " <= 0");
    return std::log10(arg);
}

// ---------------------------------------------------------------- adam

struct Adam {
    double lr, b1 = 0.9, b2 = 0.999, eps = 1e-12;
    std::vector<double> m, v;
    int t = 0;
    explicit Adam(size_t n, double lr_) : lr(lr_), m(n, 0.0), v(n, 0.0) {}
    std::vector<double> step(const std::vector<double> &g) {
        ++t;
        std::vector<double> dx(g.size());
        for (size_t i = 0; i < g.size(); ++i) {
            m[i] = b1 * m[i] + (1 - b1) * g[i];
            v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
            const double mh = m[i] / (1 - std::pow(b1, t)), vh = v[i] / (1 - std::pow(b2, t));
            dx[i] = -lr * mh / (std::sqrt(vh) + eps);
        }
        return dx;
    }
};

// ---------------------------------------------------------------- compensation calibration

inline double compensated_fidelity(const MatC &c, const Compensation &comp, const MatC &target,
                                   std::vector<double> *grad = nullptr) {
    MatC u = apply_compensation(c, comp);
    const double f = average_gate_fidelity(u, target);
    if (grad) compensation_backward(c, comp, average_gate_fidelity_backward(u, target), *grad);
    return f;
}

// closed form for an all-X target: Rz before absorbs the per-qubit phase slope
inline Compensation z_only_guess(const MatC &c) {
    int m = 0;
    while ((int64_t(1) << m) < c.rows()) ++m;
    const int64_t d = c.rows();
    Compensation comp = Compensation::zeros(CompKind::ZOnly, m);
    for (int q = 0; q < m; ++q) {
        const int64_t bit = int64_t(1) << (m - 1 - q);
        cplx g = 0;
        for (int64_t x = 0; x < d; ++x) {
            if (x & bit) continue;
            const int64_t x1 = x | bit;
            g += c(x1 ^ (d - 1), x1) * std::conj(c(x ^ (d - 1), x));
        }
        comp.z_before[q] = -std::arg(g);
    }
    return comp;
}

struct CalibrationResult {
    Compensation comp;
    double fidelity = 0;
    int best_start = 0;
};

// multi-start Adam over the compensation angles with the raw round matrix held fixed
inline CalibrationResult calibrate_compensation(const MatC &c, const MatC &target, const Compensation &init,
                                                int starts = 4, int iters = 400, uint64_t seed = 0) {
    std::vector<Compensation> inits{init};
    const bool all_x = target.isApprox(target_unitary(GateSchedule{}, init.num_qubits()));
    if (init.kind == CompKind::ZOnly && all_x) inits.push_back(z_only_guess(c));
    Stream rng(hash_combine(seed, 0xca11b));
    while (int(inits.size()) < std::max(1, starts)) {
        Compensation r = init;
        auto a = r.angles();
        for (auto &x : a) x = (2 * rng.uniform() - 1) * kPi;
        r.set_angles(a);
        inits.push_back(r);
    }
    CalibrationResult best;
    best.fidelity = -1;
    for (int s = 0; s < int(inits.size()); ++s) {
        Compensation cur = inits[s];
        auto x = cur.angles();
        Adam opt(x.size(), 0.05);
        std::vector<double> g;
        double f = compensated_fidelity(c, cur, target, &g);
        Compensation bs = cur;
        double bf = f;
        for (int it = 0; it < iters; ++it) {
            for (auto &gi : g) gi = -gi;
            auto dx = opt.step(g);
            for (size_t i = 0; i < x.size(); ++i) x[i] += dx[i];
            if (it == iters / 2) opt.lr *= 0.2;
            cur.set_angles(x);
            f = compensated_fidelity(c, cur, target, &g);
            if (f > bf) {
                bf = f;
                bs = cur;
            }
        }
        if (bf > best.fidelity) {
            best.fidelity = bf;
            best.comp = bs;
            best.best_start = s;
        }
    }
    return best;
}

// ---------------------------------------------------------------- parameters

struct HamiltonianParams {
    LatticeSpec lattice = default_lattice();
    std::vector<Coord> region = default_region();
    std::vector<GateSchedule> schedules;        // rounds whose targets define the objective
    std::map<std::string, std::string> groups;  // parameter id -> shared group
    double label_threshold = 0.9;
    double max_leak = 0.05;
    int basis_size = 60;
};

struct ParamInfo {
    std::string id;
    std::string unit;
};

// evolution window frozen so that durations only reshape envelopes
inline void freeze_windows(HamiltonianParams &hp) {
    for (auto &s : hp.schedules)
        if (s.duration <= 0) s.duration = s.window();
}

inline HamiltonianParams table1_params(int levels = 3) {
    HamiltonianParams hp;
    hp.lattice.keep_levels = levels;
    hp.schedules = {table1_x_schedule(), table1_cnot_schedule()};
    freeze_windows(hp);
    return hp;
}

namespace detail {

struct ParamPath {
    enum Kind { Label, Jc, Jl, Drive, Comp } kind;
    int label = 0, field = 0, sched = 0, drive = 0, index = 0;
};

inline ParamPath parse_param(const HamiltonianParams &hp, const std::string &id) {
    auto bad = [&]() { return ConfigError("unknown parameter id: " + id); };
    ParamPath p{};
    if (id == "device.j_c") return ParamPath{ParamPath::Jc};
    if (id == "device.j_l") return ParamPath{ParamPath::Jl};
    if (id.rfind("device.label", 0) == 0) {
        auto dot = id.find('.', 12);
        if (dot == std::string::npos) throw bad();
        p.kind = ParamPath::Label;
        p.label = std::stoi(id.substr(12, dot - 12));
        std::string f = id.substr(dot + 1);
        if (f == "e_c") p.field = 0;
        else if (f == "e_j") p.field = 1;
        else if (f == "e_l") p.field = 2;
        else throw bad();
        if (!hp.lattice.base_params.count(p.label)) throw bad();
        return p;
    }
    if (id.rfind("control.", 0) == 0) {
        auto dot = id.find('.', 8);
        if (dot == std::string::npos) throw bad();
        std::string name = id.substr(8, dot - 8), rest = id.substr(dot + 1);
        p.sched = -1;
        for (int s = 0; s < int(hp.schedules.size()); ++s)
            if (hp.schedules[s].name == name) p.sched = s;
        if (p.sched < 0) throw bad();
        const GateSchedule &gs = hp.schedules[p.sched];
        if (rest.rfind("comp", 0) == 0) {
            p.kind = ParamPath::Comp;
            p.index = std::stoi(rest.substr(4));
            if (p.index < 0 || p.index >= int(gs.compensation.angles().size())) throw bad();
            return p;
        }
        if (rest.rfind("drive", 0) == 0) {
            auto d2 = rest.find('.');
            if (d2 == std::string::npos) throw bad();
            p.kind = ParamPath::Drive;
            p.drive = std::stoi(rest.substr(5, d2 - 5));
            if (p.drive < 0 || p.drive >= int(gs.drives.size())) throw bad();
            std::string f = rest.substr(d2 + 1);
            const auto &ds = gs.drives[p.drive];
            for (int i = 0; i < ds.num_params(); ++i)
                if (f == DriveSpec::param_name(ds.flat_top(), i)) {
                    p.index = i;
                    return p;
                }
        }
    }
    throw bad();
}

}  // namespace detail

inline std::vector<ParamInfo> parameter_list(const HamiltonianParams &hp) {
    std::vector<ParamInfo> out;
    for (auto &[l, fp] : hp.lattice.base_params)
        for (const char *f : {"e_c", "e_j", "e_l"}) out.push_back({"device.label" + std::to_string(l) + "." + f, "GHz"});
    out.push_back({"device.j_c", "GHz"});
    out.push_back({"device.j_l", "GHz"});
    for (auto &s : hp.schedules) {
        for (int d = 0; d < int(s.drives.size()); ++d)
            for (int i = 0; i < s.drives[d].num_params(); ++i)
                out.push_back({"control." + s.name + ".drive" + std::to_string(d) + "." +
                                   DriveSpec::param_name(s.drives[d].flat_top(), i),
                               DriveSpec::param_unit(i)});
        const int na = int(s.compensation.angles().size());
        for (int i = 0; i < na; ++i) out.push_back({"control." + s.name + ".comp" + std::to_string(i), "rad"});
    }
    return out;
}

inline double get_param(const HamiltonianParams &hp, const std::string &id) {
    auto p = detail::parse_param(hp, id);
    switch (p.kind) {
        case detail::ParamPath::Label: {
            const auto &f = hp.lattice.base_params.at(p.label);
            return p.field == 0 ? f.e_c : p.field == 1 ? f.e_j : f.e_l;
        }
        case detail::ParamPath::Jc: return hp.lattice.j_c;
        case detail::ParamPath::Jl: return hp.lattice.j_l;
        case detail::ParamPath::Drive: return hp.schedules[p.sched].drives[p.drive].param(p.index);
        case detail::ParamPath::Comp: return hp.schedules[p.sched].compensation.angles()[p.index];
    }
    return 0;
}

inline void set_param_single(HamiltonianParams &hp, const std::string &id, double v) {
    auto p = detail::parse_param(hp, id);
    switch (p.kind) {
        case detail::ParamPath::Label: {
            auto &f = hp.lattice.base_params.at(p.label);
            (p.field == 0 ? f.e_c : p.field == 1 ? f.e_j : f.e_l) = v;
            return;
        }
        case detail::ParamPath::Jc: hp.lattice.j_c = v; return;
        case detail::ParamPath::Jl: hp.lattice.j_l = v; return;
        case detail::ParamPath::Drive: hp.schedules[p.sched].drives[p.drive].set_param(p.index, v); return;
        case detail::ParamPath::Comp: {
            auto &c = hp.schedules[p.sched].compensation;
            auto a = c.angles();
            a[p.index] = v;
            c.set_angles(a);
            return;
        }
    }
}

inline std::vector<std::string> group_members(const HamiltonianParams &hp, const std::string &id) {
    auto it = hp.groups.find(id);
    if (it == hp.groups.end()) return {id};
    std::vector<std::string> out;
    for (auto &[k, g] : hp.groups)
        if (g == it->second) out.push_back(k);
    return out;
}

// writes every member of the parameter's group
inline void set_param(HamiltonianParams &hp, const std::string &id, double v) {
    for (auto &m : group_members(hp, id)) set_param_single(hp, m, v);
}

inline void validate_params(const HamiltonianParams &hp) {
    for (auto &pi : parameter_list(hp))
        if (!std::isfinite(get_param(hp, pi.id))) throw ConfigError("non-finite parameter " + pi.id);
    for (auto &[id, g] : hp.groups) {
        const double v = get_param(hp, id);
        for (auto &m : group_members(hp, id))
            if (get_param(hp, m) != v)
                throw ConfigError("shared group '" + g + "' holds different values");
    }
    for (auto &s : hp.schedules) s.validate(hp.region);
}

// ---------------------------------------------------------------- forward pipeline

struct DeviceEval {
    std::map<Coord, FluxoniumSolution> solutions;
    IdleHamiltonian h;
    SymEig eig;
    ComputationalBasis basis;
    bool near_label_threshold = false;
};

inline DeviceEval evaluate_device(const HamiltonianParams &hp) {
    DeviceEval de;
    auto offs = sample_disorder_offsets(hp.lattice);
    std::map<Coord, TruncatedQubit> q;
    for (auto &c : hp.region) {
        if (!hp.lattice.contains(c)) throw ConfigError("region site outside lattice: " + coord_name(c));
        de.solutions[c] = solve_fluxonium(site_params(hp.lattice, c, offs.at(c)), hp.basis_size, hp.lattice.keep_levels);
        q[c] = de.solutions[c].qubit;
    }
    de.h = build_idle_hamiltonian(q, hp.lattice, hp.region);
    de.eig = sym_eig(de.h.dense_real());
    de.basis = select_computational_basis(de.eig, de.h.levels, de.h.num_sites(), hp.label_threshold);
    de.near_label_threshold = de.basis.min_overlap - hp.label_threshold < 0.02;
    if (de.near_label_threshold)
        std::fprintf(stderr, "warning: eigenvector overlap %.4f within 0.02 of the labeling threshold; "
                             "gradients are not differentiable here\n", de.basis.min_overlap);
    return de;
}

struct RoundEval {
    std::shared_ptr<TrotterEngine> engine;
    RoundResult result;
    MatC target;
    GateLayout layout;
    int arity = 1;
    VecC expansion;
    PauliErrorTable table;
    LcpemExtraction lcpem;
    double fidelity = 0;
};

inline RoundEval evaluate_round(const HamiltonianParams &hp, const DeviceEval &de, const GateSchedule &s,
                                int threads = 1) {
    RoundEval r;
    r.engine = std::make_shared<TrotterEngine>(de.h, s.drives, s.window(), s.dt);
    r.result = extract_round_unitary(*r.engine, s, de.basis, threads, hp.max_leak);
    const int m = de.h.num_sites();
    r.target = target_unitary(s, m);
    if (s.target != TargetKind::Cnot) {
        r.arity = 1;
        r.layout = single_qubit_layout(de.h.sites);
    } else {
        r.arity = 2;
        r.layout = cnot_layout(de.h.sites, s.cnots);
    }
    r.expansion = pauli_expand(error_unitary(r.result.u_sim, r.target));
    r.table = twirl_probs(r.expansion);
    r.lcpem = extract_lcpem(r.table, r.layout);
    r.fidelity = average_gate_fidelity(r.result.u_sim, r.target);
    return r;
}

struct PipelineEval {
    DeviceEval device;
    std::vector<RoundEval> rounds;
    double seconds = 0;

    // p1..p3 for the 1q round then the 2q round
    std::array<double, 6> lcpem() const {
        std::array<double, 6> v{};
        for (auto &r : rounds)
            for (int k = 0; k < 3; ++k) v[(r.arity - 1) * 3 + k] = r.lcpem.p[k];
        return v;
    }
};

inline PipelineEval evaluate_pipeline(const HamiltonianParams &hp, int threads = 1) {
    auto t0 = std::chrono::steady_clock::now();
    validate_params(hp);
    PipelineEval pe;
    pe.device = evaluate_device(hp);
    for (auto &s : hp.schedules) pe.rounds.push_back(evaluate_round(hp, pe.device, s, threads));
    pe.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return pe;
}

// adjoint of L = sum_k w_k p_k(round) w.r.t. u_sim
inline MatC lcpem_u_bar(const RoundEval &r, const std::array<double, 3> &w) {
    auto jac = extract_lcpem_jacobian(r.table, r.layout);
    VecC abar = VecC::Zero(r.expansion.size());
    for (int64_t j = 0; j < abar.size(); ++j) {
        const double pb = w[0] * jac[j][0] + w[1] * jac[j][1] + w[2] * jac[j][2];
        abar(j) = 2.0 * pb * r.expansion(j);
    }
    MatC ebar = pauli_expand_backward(abar, r.table.m);
    return r.target * ebar.adjoint();
}

// given dL/du_sim per round (empty matrix = no dependence), returns dL/dparam for every parameter id
inline std::map<std::string, double> pipeline_backward(const HamiltonianParams &hp, const PipelineEval &pe,
                                                       const std::vector<MatC> &u_bar, int threads = 1) {
    std::map<std::string, double> g;
    for (auto &pi : parameter_list(hp)) g[pi.id] = 0.0;
    const DeviceEval &de = pe.device;
    OpGrads ops;
    ops.init(de.h);
    MatR vbar = MatR::Zero(de.basis.states.rows(), de.basis.states.cols());
    bool any = false;
    for (size_t r = 0; r < pe.rounds.size(); ++r) {
        if (u_bar[r].size() == 0) continue;
        any = true;
        const GateSchedule &s = hp.schedules[r];
        RoundAdjoint adj = round_backward(*pe.rounds[r].engine, s, de.basis, pe.rounds[r].result, u_bar[r], threads);
        vbar += adj.v_bar;
        ops.add(adj.ops);
        for (int d = 0; d < int(s.drives.size()); ++d)
            for (int i = 0; i < s.drives[d].num_params(); ++i)
                g["control." + s.name + ".drive" + std::to_string(d) + "." +
                  DriveSpec::param_name(s.drives[d].flat_top(), i)] += adj.drive_bar[d][i];
        for (int i = 0; i < int(adj.comp_bar.size()); ++i)
            g["control." + s.name + ".comp" + std::to_string(i)] += adj.comp_bar[i];
    }
    if (any) {
        // labeling is frozen at the evaluation point
        MatR hbar = eigenbasis_backward(de.eig, de.basis, vbar, VecR::Zero(de.basis.states.cols()));
        idle_backward(de.h, hbar, ops);
        for (int i = 0; i < de.h.num_sites(); ++i) {
            const Coord &c = de.h.sites[i];
            auto e = de.solutions.at(c).backward(ops.e_bar[i], ops.n_bar[i], ops.phi_bar[i]);
            const int label = hp.lattice.label(c);
            const std::string base = "device.label" + std::to_string(label);
            // disorder is a fixed relative offset, so d(site)/d(label) = site / label
            const FluxoniumParams &sp = de.solutions.at(c).params, &bp = hp.lattice.base_params.at(label);
            g[base + ".e_c"] += e[0] * sp.e_c / bp.e_c;
            g[base + ".e_j"] += e[1] * sp.e_j / bp.e_j;
            g[base + ".e_l"] += e[2] * sp.e_l / bp.e_l;
        }
        g["device.j_c"] += ops.jc_bar;
        g["device.j_l"] += ops.jl_bar;
    }
    // shared groups carry the summed member gradient
    std::map<std::string, double> gsum;
    for (auto &[id, grp] : hp.groups) gsum[grp] += g.at(id);
    for (auto &[id, grp] : hp.groups) g[id] = gsum[grp];
    return g;
}

struct LcpemJacobian {
    std::array<double, 6> values{};
    std::map<std::string, std::array<double, 6>> d;
    bool near_label_threshold = false;
    double forward_seconds = 0, backward_seconds = 0;
};

// full six-column Jacobian, one reverse sweep per output
inline LcpemJacobian grad_lcpem_wrt_params(const HamiltonianParams &hp, int threads = 1) {
    PipelineEval pe = evaluate_pipeline(hp, threads);
    LcpemJacobian j;
    j.values = pe.lcpem();
    j.near_label_threshold = pe.device.near_label_threshold;
    j.forward_seconds = pe.seconds;
    for (auto &pi : parameter_list(hp)) j.d[pi.id] = {};
    auto t0 = std::chrono::steady_clock::now();
    for (size_t r = 0; r < pe.rounds.size(); ++r)
        for (int k = 0; k < 3; ++k) {
            std::vector<MatC> ub(pe.rounds.size());
            std::array<double, 3> w{};
            w[k] = 1.0;
            ub[r] = lcpem_u_bar(pe.rounds[r], w);
            auto g = pipeline_backward(hp, pe, ub, threads);
            const int col = (pe.rounds[r].arity - 1) * 3 + k;
            for (auto &[id, v] : g) j.d[id][col] += v;
        }
    j.backward_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return j;
}

struct WeightedGradient {
    double value = 0;
    std::array<double, 6> lcpem{};
    std::map<std::string, double> grad;
    bool near_label_threshold = false;
    double seconds = 0;
};

// gradient of sum_k w_k p_k with a single reverse sweep
inline WeightedGradient grad_lcpem_weighted(const HamiltonianParams &hp, const std::array<double, 6> &w,
                                            int threads = 1) {
    auto t0 = std::chrono::steady_clock::now();
    PipelineEval pe = evaluate_pipeline(hp, threads);
    WeightedGradient out;
    out.lcpem = pe.lcpem();
    out.near_label_threshold = pe.device.near_label_threshold;
    for (int i = 0; i < 6; ++i) out.value += w[i] * out.lcpem[i];
    std::vector<MatC> ub(pe.rounds.size());
    for (size_t r = 0; r < pe.rounds.size(); ++r) {
        const int a = pe.rounds[r].arity - 1;
        std::array<double, 3> wr{w[3 * a], w[3 * a + 1], w[3 * a + 2]};
        if (wr[0] != 0 || wr[1] != 0 || wr[2] != 0) ub[r] = lcpem_u_bar(pe.rounds[r], wr);
    }
    out.grad = pipeline_backward(hp, pe, ub, threads);
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

// ---------------------------------------------------------------- logical-rate finite differences

struct FdComponent {
    double p = 0, p_plus = 0, p_minus = 0;
    double estimate = 0, stderr_ = 0, stderr_independent = 0;
    double ci_low = 0, ci_high = 0;
    bool one_sided = false;
};

struct FdLogicalGradient {
    int d = 0, rounds = 0;
    int64_t shots = 0;
    uint64_t seed = 0;
    LcpemParams at;
    LogicalEstimate base;
    std::array<FdComponent, 6> comp;
    uint64_t hash = 0;
    bool insufficient_shots = false;
    std::array<double, 6> estimates() const {
        std::array<double, 6> v;
        for (int i = 0; i < 6; ++i) v[i] = comp[i].estimate;
        return v;
    }
};

inline uint64_t lcpem_hash(int d, int rounds, const LcpemParams &p) {
    uint64_t h = hash_combine(uint64_t(d), uint64_t(rounds));
    for (double v : {p.p1_1q, p.p2_1q, p.p3_1q, p.p1_2q, p.p2_2q, p.p3_2q, p.p_reset, p.p_measure, p.r, p.t_1q, p.t_2q,
                     p.t_reset, p.t_measure}) {
        uint64_t b;
        std::memcpy(&b, &v, 8);
        h = hash_combine(h, b);
    }
    return h;
}

inline constexpr double kFdAbsoluteStep = 1e-5;

// central differences at p +- 0.1 p under common random numbers
inline FdLogicalGradient fd_grad_logical_wrt_lcpem(const LcpemParams &p, int d, int rounds, int64_t shots,
                                                   uint64_t seed, int threads = 1) {
    p.validate();
    if (shots < 1000) throw std::invalid_argument("fd_grad_logical_wrt_lcpem needs at least 1000 shots");
    SyndromeCircuit sc = build_syndrome_circuit(d, rounds);
    DetectorGraph g = build_detector_graph(sc);
    std::vector<LcpemParams> settings{p};
    std::array<std::pair<int, int>, 6> idx;
    FdLogicalGradient out;
    out.d = d;
    out.rounds = rounds;
    out.shots = shots;
    out.seed = seed;
    out.at = p;
    out.hash = lcpem_hash(d, rounds, p);
    for (int i = 0; i < 6; ++i) {
        FdComponent &c = out.comp[i];
        c.p = p.pk(i / 3 + 1, i % 3 + 1);
        LcpemParams plus = p, minus = p;
        if (c.p > 0) {
            plus.pk(i / 3 + 1, i % 3 + 1) = 1.1 * c.p;
            minus.pk(i / 3 + 1, i % 3 + 1) = 0.9 * c.p;
            c.p_plus = 1.1 * c.p;
            c.p_minus = 0.9 * c.p;
            settings.push_back(plus);
            settings.push_back(minus);
            idx[i] = {int(settings.size()) - 2, int(settings.size()) - 1};
        } else {
            c.one_sided = true;
            plus.pk(i / 3 + 1, i % 3 + 1) = kFdAbsoluteStep;
            c.p_plus = kFdAbsoluteStep;
            c.p_minus = 0;
            settings.push_back(plus);
            idx[i] = {int(settings.size()) - 1, 0};
        }
    }
    PairedRun run = run_settings(sc, g, settings, shots, seed, threads);
    out.base = run.estimates[0];
    const double n = double(shots);
    for (int i = 0; i < 6; ++i) {
        FdComponent &c = out.comp[i];
        auto [a, b] = idx[i];
        int64_t n10 = 0, n01 = 0;
        for (size_t w = 0; w < run.fail[a].size(); ++w) {
            n10 += popcount(run.fail[a][w] & ~run.fail[b][w]);
            n01 += popcount(run.fail[b][w] & ~run.fail[a][w]);
        }
        const double h = c.p_plus - c.p_minus;
        const double mean = double(n10 - n01) / n;
        const double var = std::max(0.0, double(n10 + n01) / n - mean * mean);
        c.estimate = mean / h;
        c.stderr_ = std::sqrt(var / n) / h;
        const double pa = run.estimates[a].p, pb = run.estimates[b].p;
        c.stderr_independent = std::sqrt((pa * (1 - pa) + pb * (1 - pb)) / n) / h;
        c.ci_low = c.estimate - 1.96 * c.stderr_;
        c.ci_high = c.estimate + 1.96 * c.stderr_;
        if (c.ci_high - c.ci_low > std::abs(c.estimate)) {
            out.insufficient_shots = true;
            std::fprintf(stderr, "warning: %s derivative CI [%.4g, %.4g] wider than the estimate; more shots needed\n",
                         lcpem_name(i), c.ci_low, c.ci_high);
        }
    }
    return out;
}

// ---------------------------------------------------------------- chained objective

struct ChainResult {
    double value = 0;
    std::map<std::string, double> grad;
    LcpemParams at;
};

inline void check_coefficients(const FdLogicalGradient &coef, const LcpemParams &at) {
    if (lcpem_hash(coef.d, coef.rounds, at) != coef.hash)
        throw StaleCoefficientsError("finite-difference coefficients were computed at a different circuit or "
                                     "error model; recompute required");
}

// O = sum_k (dp_L/dp_k) p_k(theta) with the coefficients frozen
inline ChainResult chain_objective(const FdLogicalGradient &coef, const LcpemJacobian &jac, const LcpemParams &qec_base) {
    ChainResult out;
    out.at = with_lcpem(qec_base, jac.values);
    check_coefficients(coef, out.at);
    for (int k = 0; k < 6; ++k) out.value += coef.comp[k].estimate * jac.values[k];
    for (auto &[id, col] : jac.d) {
        double s = 0;
        for (int k = 0; k < 6; ++k) s += coef.comp[k].estimate * col[k];
        out.grad[id] = s;
    }
    return out;
}

// same objective with one reverse sweep
inline ChainResult chain_objective(const FdLogicalGradient &coef, const HamiltonianParams &hp,
                                   const LcpemParams &qec_base, int threads = 1) {
    WeightedGradient wg = grad_lcpem_weighted(hp, coef.estimates(), threads);
    ChainResult out;
    out.at = with_lcpem(qec_base, wg.lcpem);
    check_coefficients(coef, out.at);
    out.value = wg.value;
    out.grad = std::move(wg.grad);
    return out;
}

// ---------------------------------------------------------------- update rule

inline bool is_energy_param(const std::string &id) {
    if (id.rfind("device.label", 0) != 0) return false;
    const std::string tail = id.substr(id.size() - 4);
    return tail == ".e_c" || tail == ".e_j" || tail == ".e_l";
}

// E -> E - step * dO/dE on device energies only; step in GHz^2
inline HamiltonianParams gradient_step(const HamiltonianParams &hp, const std::map<std::string, double> &grad,
                                       double step = 0.01) {
    HamiltonianParams out = hp;
    std::set<std::string> done;
    for (auto &[id, gv] : grad) {
        if (!is_energy_param(id) || done.count(id)) continue;
        if (!std::isfinite(gv)) throw NumericalError("non-finite gradient for " + id);
        const double v = get_param(hp, id) - step * gv;
        if (!(v > 0)) throw std::domain_error("gradient step rejected: " + id + " would become " + std::to_string(v));
        set_param(out, id, v);
        for (auto &m : group_members(hp, id)) done.insert(m);
    }
    return out;
}

// ---------------------------------------------------------------- control optimization

struct OptimizeOptions {
    int budget = 50;                  // reverse sweeps
    double lr = 0.01;                 // in units of the initial magnitude
    std::vector<std::string> params;  // empty: every control parameter
    double min_improvement = 1e-6;
    uint64_t seed = 0;
    int threads = 1;
};

struct TraceRow {
    int iteration = 0;
    double objective = 0, step_norm = 0;
    bool accepted = false;
};

struct OptimizeResult {
    HamiltonianParams params;
    double initial = 0, best = 0;
    int iterations = 0, accepted = 0;
    bool stagnated = false;
    std::vector<TraceRow> trace;
};

// Adam on scale-normalized control parameters; a step is kept only if the objective decreases
inline OptimizeResult optimize_controls(const HamiltonianParams &init, const OptimizeOptions &opt) {
    OptimizeResult res;
    res.params = init;
    freeze_windows(res.params);
    std::vector<std::string> ids = opt.params;
    if (ids.empty())
        for (auto &pi : parameter_list(res.params))
            if (pi.id.rfind("control.", 0) == 0) ids.push_back(pi.id);
    for (auto &id : ids)
        if (id.rfind("control.", 0) != 0) throw ConfigError("optimize_controls only moves control parameters: " + id);
    // one representative per shared group
    {
        std::vector<std::string> u;
        std::set<std::string> seen;
        for (auto &id : ids) {
            if (seen.count(id)) continue;
            for (auto &m : group_members(res.params, id)) seen.insert(m);
            u.push_back(id);
        }
        ids = u;
    }
    DeviceEval de = evaluate_device(res.params);
    auto evaluate = [&](const HamiltonianParams &hp, std::vector<double> *grad) {
        std::vector<RoundEval> rounds;
        std::vector<MatC> u, t;
        for (auto &s : hp.schedules) {
            rounds.push_back(evaluate_round(hp, de, s, opt.threads));
            u.push_back(rounds.back().result.u_sim);
            t.push_back(rounds.back().target);
        }
        ObjectiveValue o = fidelity_objective(u, t);
        if (grad) {
            PipelineEval pe{de, std::move(rounds), 0};
            std::map<std::string, double> g;
            for (size_t r = 0; r < hp.schedules.size(); ++r) {
                const GateSchedule &s = hp.schedules[r];
                RoundAdjoint adj =
                    round_backward(*pe.rounds[r].engine, s, de.basis, pe.rounds[r].result, o.u_bar[r], opt.threads);
                for (int d = 0; d < int(s.drives.size()); ++d)
                    for (int i = 0; i < s.drives[d].num_params(); ++i)
                        g["control." + s.name + ".drive" + std::to_string(d) + "." +
                          DriveSpec::param_name(s.drives[d].flat_top(), i)] += adj.drive_bar[d][i];
                for (int i = 0; i < int(adj.comp_bar.size()); ++i)
                    g["control." + s.name + ".comp" + std::to_string(i)] += adj.comp_bar[i];
            }
            grad->assign(ids.size(), 0.0);
            for (size_t i = 0; i < ids.size(); ++i)
                for (auto &m : group_members(hp, ids[i])) (*grad)[i] += g[m];
        }
        return o.value;
    };
    std::vector<double> scale(ids.size());
    for (size_t i = 0; i < ids.size(); ++i) {
        const double v = std::abs(get_param(res.params, ids[i]));
        scale[i] = v > 1e-12 ? v : 1.0;
    }
    std::vector<double> g;
    double cur = evaluate(res.params, opt.budget > 0 ? &g : nullptr);
    res.initial = res.best = cur;
    res.trace.push_back({0, cur, 0.0, true});
    if (opt.budget <= 0) return res;
    Adam adam(ids.size(), opt.lr);
    HamiltonianParams hp = res.params;
    for (int it = 1; it <= opt.budget; ++it) {
        std::vector<double> gn(ids.size());
        for (size_t i = 0; i < ids.size(); ++i) gn[i] = g[i] * scale[i];
        auto dx = adam.step(gn);
        HamiltonianParams trial = hp;
        double norm = 0;
        for (size_t i = 0; i < ids.size(); ++i) {
            set_param(trial, ids[i], get_param(hp, ids[i]) + dx[i] * scale[i]);
            norm += dx[i] * dx[i];
        }
        std::vector<double> gt;
        double val;
        try {
            val = evaluate(trial, &gt);
        } catch (const PhysicsError &) {
            val = std::numeric_limits<double>::infinity();
        }
        res.iterations = it;
        const bool ok = val < cur;
        res.trace.push_back({it, ok ? val : cur, std::sqrt(norm), ok});
        if (ok) {
            hp = std::move(trial);
            cur = val;
            g = std::move(gt);
            ++res.accepted;
            adam.lr = std::min(opt.lr, adam.lr * 1.5);
        } else {
            adam.lr *= 0.5;
            if (adam.lr < 1e-8 * opt.lr) break;
        }
    }
    res.params = hp;
    res.best = cur;
    res.stagnated = res.accepted == 0 || res.initial - res.best < opt.min_improvement;
    return res;
}

inline std::string trace_csv(const std::vector<TraceRow> &t) {
    std::string s = "iteration,objective,step_norm,accepted\n";
    char buf[128];
    for (auto &r : t) {
        std::snprintf(buf, sizeof buf, "%d,%.12g,%.6g,%d\n", r.iteration, r.objective, r.step_norm, int(r.accepted));
        s += buf;
    }
    return s;
}

// dressed single-site transition and a linear-Rabi pi-pulse amplitude (heuristic stage-1 start)
inline GateSchedule x_round_guess(const DeviceEval &de, double tau_gate) {
    GateSchedule s;
    s.name = "x_round";
    const int m = de.h.num_sites();
    for (int i = 0; i < m; ++i) {
        const int e = 1 << (m - 1 - i);
        const double f = de.basis.energies(e) - de.basis.energies(0);
        const double phi01 = std::abs(de.h.qubits[i].phi_op(0, 1));
        s.drives.push_back({de.h.sites[i], 1.0 / (phi01 * tau_gate), f, 0.0, CosineEnvelope{tau_gate}});
    }
    s.compensation = Compensation::zeros(CompKind::ZOnly, m);
    s.target = TargetKind::XAll;
    s.duration = tau_gate;
    return s;
}

inline double dressed_frequency(const DeviceEval &de, int site, int control = -1) {
    const int m = de.h.num_sites();
    const int e = 1 << (m - 1 - site);
    const double f0 = de.basis.energies(e) - de.basis.energies(0);
    if (control < 0) return f0;
    const int c = 1 << (m - 1 - control);
    return 0.5 * (f0 + de.basis.energies(c | e) - de.basis.energies(c));
}

// stage-1 start: drive frequencies moved onto the dressed transitions of this device
// (X drives on their own qubit, cross-resonance drives on the target), X amplitudes from the Rabi estimate
inline void retune_to_device(HamiltonianParams &hp) {
    DeviceEval de = evaluate_device(hp);
    for (auto &s : hp.schedules) {
        for (auto &d : s.drives) {
            const int i = de.h.index_of(d.target);
            if (i < 0) throw ConfigError("drive target outside region: " + coord_name(d.target));
            if (s.target == TargetKind::Identity) continue;
            if (s.target == TargetKind::XAll) {
                d.freq = dressed_frequency(de, i);
                const double area = std::holds_alternative<CosineEnvelope>(d.envelope)
                                        ? 0.5 * d.tau_gate()
                                        : std::get<FlatTopEnvelope>(d.envelope).tau_ramp +
                                              std::get<FlatTopEnvelope>(d.envelope).tau_plateau;
                d.amplitude = 0.5 / (std::abs(de.h.qubits[i].phi_op(0, 1)) * area);
            } else {
                for (auto [c, t] : s.cnots)
                    if (c == i) d.freq = dressed_frequency(de, t, c);
            }
        }
    }
}

// replaces each schedule's compensation by the calibrated one
inline std::vector<CalibrationResult> calibrate_schedules(HamiltonianParams &hp, int starts = 4, int iters = 400,
                                                          uint64_t seed = 0, int threads = 1) {
    DeviceEval de = evaluate_device(hp);
    std::vector<CalibrationResult> out;
    for (auto &s : hp.schedules) {
        TrotterEngine eng(de.h, s.drives, s.window(), s.dt);
        RoundResult r = extract_round_unitary(eng, s, de.basis, threads, hp.max_leak);
        out.push_back(calibrate_compensation(r.c, target_unitary(s, de.h.num_sites()), s.compensation, starts, iters,
                                             hash_combine(seed, out.size())));
        s.compensation = out.back().comp;
    }
    return out;
}

// ---------------------------------------------------------------- report

inline std::string reciprocal_unit(const std::string &u) { return "1/" + u; }

struct GradientReport {
    std::map<std::string, double> d_objective;
    std::map<std::string, std::string> units;
    std::map<std::string, std::array<double, 6>> dlcpem;
    std::array<double, 6> lcpem{};
    double objective = 0;
    FdLogicalGradient dlogical;
    bool near_label_threshold = false;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["objective"] = objective;
        j["near_label_threshold"] = near_label_threshold;
        nlohmann::json lc = nlohmann::json::object();
        for (int i = 0; i < 6; ++i) lc[lcpem_name(i)] = lcpem[i];
        j["lcpem"] = lc;
        nlohmann::json dl = nlohmann::json::object();
        for (int i = 0; i < 6; ++i) {
            const FdComponent &c = dlogical.comp[i];
            dl[lcpem_name(i)] = {{"estimate", c.estimate},  {"stderr", c.stderr_}, {"ci_low", c.ci_low},
                                 {"ci_high", c.ci_high},    {"step", c.p_plus - c.p_minus},
                                 {"one_sided", c.one_sided}};
        }
        j["dlogical_dlcpem"] = {{"d", dlogical.d},
                                {"rounds", dlogical.rounds},
                                {"shots", dlogical.shots},
                                {"seed", dlogical.seed},
                                {"p_logical", dlogical.base.p},
                                {"p_logical_stderr", dlogical.base.stderr_},
                                {"insufficient_shots", dlogical.insufficient_shots},
                                {"gradients", dl}};
        nlohmann::json g = nlohmann::json::object();
        for (auto &[id, v] : d_objective) g[id] = {{"value", v}, {"unit", units.at(id)}};
        j["dO_dparams"] = g;
        if (!dlcpem.empty()) {
            nlohmann::json dj = nlohmann::json::object();
            for (auto &[id, col] : dlcpem) {
                nlohmann::json row = nlohmann::json::object();
                for (int i = 0; i < 6; ++i) row[lcpem_name(i)] = col[i];
                dj[id] = row;
            }
            j["dlcpem_dparams"] = dj;
        }
        return j;
    }
};

inline GradientReport make_report(const HamiltonianParams &hp, const FdLogicalGradient &coef, const LcpemJacobian &jac,
                                  const LcpemParams &qec_base) {
    ChainResult ch = chain_objective(coef, jac, qec_base);
    GradientReport rep;
    rep.objective = ch.value;
    rep.d_objective = ch.grad;
    for (auto &pi : parameter_list(hp)) rep.units[pi.id] = reciprocal_unit(pi.unit);
    rep.dlcpem = jac.d;
    rep.lcpem = jac.values;
    rep.dlogical = coef;
    rep.near_label_threshold = jac.near_label_threshold;
    return rep;
}

}  // namespace hamqec
