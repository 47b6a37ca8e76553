#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hamqec/optim.hpp"
#include "hamqec/oracle.hpp"

namespace hamqec::cli {

using json = nlohmann::json;

// ---------------------------------------------------------------- config types

struct Stage1Config {
    bool retune = true;
    bool calibrate = true;
    int starts = 4;
    int iterations = 400;
};

struct LcpemConfig {
    std::string source = "config";  // config | pipeline
    LcpemParams params = table2_params(1e-5);
};

struct QecConfig {
    std::vector<int> d{7};
    int rounds = 0;  // 0: rounds = d
    int64_t shots = 100000;
    std::vector<double> r_ghz{1e-6, 2e-6, 5e-6, 1e-5, 2e-5, 5e-5};
    bool k1_only_variant = true;
};

struct GradConfig {
    int d = 3;
    int rounds = 0;
    int64_t shots = 20000;
    double step_ghz2 = 0.01;
    bool apply_step = false;
};

struct Range {
    double lo = 0, hi = 0;
    int n = 1;
    double at(int i) const { return n <= 1 ? lo : lo + (hi - lo) * i / (n - 1); }
};

struct WalshConfig {
    int top = 64;
    bool scan = false;
    std::vector<Coord> scan_region{{0, 2}, {0, 3}};
    Range j_c_ghz{0.005, 0.02, 4};
    Range j_l_ghz{-0.004, 0.004, 9};
    double refine_tol_ghz = 1e-9;
};

struct ToyConfig {
    std::vector<int> threshold_d{8, 12};
    std::vector<double> threshold_p;
    int64_t threshold_shots = 10000;
    int copy_d = 8;
    std::vector<double> copy_p{0.01, 0.02};
    int64_t copy_shots = 100000;
    int low_p_d = 4;
    std::vector<double> low_p{1e-4, 1e-3};
    int low_p_max_weight = 3;
    double fidelity_p = 0.01;
    int fidelity_max_n = 4;

    ToyConfig() {
        for (int i = 0; i <= 10; ++i) threshold_p.push_back(0.08 + 0.005 * i);
    }
};

struct ExperimentConfig {
    HamiltonianParams hp = table1_params(3);
    Stage1Config stage1;
    OptimizeOptions optimize;
    LcpemConfig lcpem;
    QecConfig qec;
    GradConfig grad;
    WalshConfig walsh;
    ToyConfig toy;
    uint64_t seed = 0;
    int threads = 1;
    std::string out = "out";
};

// ---------------------------------------------------------------- strict reader

class Section {
public:
    Section(const json &j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
    }
    bool has(const std::string &k) {
        used_.insert(k);
        return j_.contains(k);
    }
    const json &at(const std::string &k) {
        used_.insert(k);
        if (!j_.contains(k)) throw ConfigError("missing key: " + name(k));
        return j_.at(k);
    }
    template <class T>
    T get(const std::string &k, const T &def) {
        if (!has(k)) return def;
        return convert<T>(k);
    }
    template <class T>
    T req(const std::string &k) {
        at(k);
        return convert<T>(k);
    }
    std::string name(const std::string &k) const { return path_.empty() ? k : path_ + "." + k; }
    void done() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!used_.count(it.key())) throw ConfigError("unknown key: " + name(it.key()));
    }

private:
    template <class T>
    T convert(const std::string &k) const {
        const json &v = j_.at(k);
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError(name(k) + ": expected a boolean");
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) throw ConfigError(name(k) + ": expected an integer");
            if (std::is_unsigned_v<T> && v.is_number_integer() && !v.is_number_unsigned() && v.get<int64_t>() < 0)
                throw ConfigError(name(k) + ": expected a non-negative integer");
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) throw ConfigError(name(k) + ": expected a number");
        }
        try {
            return v.get<T>();
        } catch (const json::exception &e) {
            throw ConfigError(name(k) + ": " + e.what());
        }
    }

    const json &j_;
    std::string path_;
    std::set<std::string> used_;
};

namespace detail {

inline Coord parse_coord(const json &v, const std::string &where) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer())
        throw ConfigError(where + ": expected [row, col]");
    return {v[0].get<int>(), v[1].get<int>()};
}

inline json coord_json(const Coord &c) { return json::array({c.row, c.col}); }

inline Range parse_range(const json &v, const std::string &where) {
    if (!v.is_array() || v.size() != 3 || !v[0].is_number() || !v[1].is_number() || !v[2].is_number_integer() ||
        v[2].get<int>() < 1)
        throw ConfigError(where + ": expected [lo, hi, n] with n >= 1");
    return {v[0].get<double>(), v[1].get<double>(), v[2].get<int>()};
}

inline json range_json(const Range &r) { return json::array({r.lo, r.hi, r.n}); }

inline const char *target_name(TargetKind k) {
    switch (k) {
        case TargetKind::XAll: return "x_all";
        case TargetKind::Cnot: return "cnot";
        default: return "identity";
    }
}

inline DriveSpec parse_drive(const json &j, const std::string &where) {
    Section s(j, where);
    DriveSpec d;
    d.target = {s.req<int>("row"), s.req<int>("col")};
    d.amplitude = s.req<double>("eps_d_ghz");
    d.freq = s.req<double>("omega_d_ghz");
    d.phase = s.get<double>("phase_rad", 0.0);
    const bool cos = s.has("tau_gate_ns"), ft = s.has("tau_ramp_ns") || s.has("tau_plateau_ns");
    if (cos == ft) throw ConfigError(where + ": give either tau_gate_ns or tau_ramp_ns + tau_plateau_ns");
    if (cos)
        d.envelope = CosineEnvelope{s.req<double>("tau_gate_ns")};
    else
        d.envelope = FlatTopEnvelope{s.req<double>("tau_ramp_ns"), s.req<double>("tau_plateau_ns")};
    s.done();
    return d;
}

inline json drive_json(const DriveSpec &d) {
    json j = {{"row", d.target.row},
              {"col", d.target.col},
              {"eps_d_ghz", d.amplitude},
              {"omega_d_ghz", d.freq},
              {"phase_rad", d.phase}};
    if (auto *c = std::get_if<CosineEnvelope>(&d.envelope)) {
        j["tau_gate_ns"] = c->tau_gate;
    } else {
        auto &f = std::get<FlatTopEnvelope>(d.envelope);
        j["tau_ramp_ns"] = f.tau_ramp;
        j["tau_plateau_ns"] = f.tau_plateau;
    }
    return j;
}

inline GateSchedule parse_schedule(const json &j, const std::string &where, int m) {
    Section s(j, where);
    GateSchedule g;
    g.name = s.req<std::string>("name");
    const std::string t = s.req<std::string>("target");
    if (t == "x_all")
        g.target = TargetKind::XAll;
    else if (t == "cnot")
        g.target = TargetKind::Cnot;
    else if (t == "identity")
        g.target = TargetKind::Identity;
    else
        throw ConfigError(s.name("target") + ": expected x_all, cnot or identity");
    if (s.has("cnots")) {
        const json &c = s.at("cnots");
        if (!c.is_array()) throw ConfigError(s.name("cnots") + ": expected a list of pairs");
        for (auto &p : c) {
            Coord x = parse_coord(p, s.name("cnots"));
            if (x.row < 0 || x.row >= m || x.col < 0 || x.col >= m || x.row == x.col)
                throw ConfigError(s.name("cnots") + ": region index out of range");
            g.cnots.push_back({x.row, x.col});
        }
    }
    if (g.target == TargetKind::Cnot && g.cnots.empty()) throw ConfigError(where + ": cnot target needs cnots");
    const std::string comp = s.get<std::string>("compensation", "z_only");
    if (comp != "z_only" && comp != "euler") throw ConfigError(s.name("compensation") + ": expected z_only or euler");
    g.compensation = Compensation::zeros(comp == "z_only" ? CompKind::ZOnly : CompKind::Euler, m);
    if (s.has("compensation_rad")) {
        auto a = s.req<std::vector<double>>("compensation_rad");
        if (a.size() != g.compensation.angles().size())
            throw ConfigError(s.name("compensation_rad") + ": expected " +
                              std::to_string(g.compensation.angles().size()) + " angles");
        g.compensation.set_angles(a);
    }
    g.duration = s.get<double>("duration_ns", 0.0);
    g.dt = s.get<double>("dt_ns", 0.02);
    const json &dr = s.at("drives");
    if (!dr.is_array()) throw ConfigError(s.name("drives") + ": expected a list");
    for (size_t i = 0; i < dr.size(); ++i) g.drives.push_back(parse_drive(dr[i], s.name("drives") + "[" + std::to_string(i) + "]"));
    s.done();
    return g;
}

inline json schedule_json(const GateSchedule &g) {
    json cn = json::array();
    for (auto [c, t] : g.cnots) cn.push_back({c, t});
    json dr = json::array();
    for (auto &d : g.drives) dr.push_back(drive_json(d));
    return {{"name", g.name},
            {"target", target_name(g.target)},
            {"cnots", cn},
            {"compensation", g.compensation.kind == CompKind::ZOnly ? "z_only" : "euler"},
            {"compensation_rad", g.compensation.angles()},
            {"duration_ns", g.duration},
            {"dt_ns", g.dt},
            {"drives", dr}};
}

inline void parse_device(const json &j, HamiltonianParams &hp) {
    Section s(j, "device");
    auto &L = hp.lattice;
    L.keep_levels = s.get<int>("keep_levels", L.keep_levels);
    hp.basis_size = s.get<int>("basis_size", hp.basis_size);
    L.basis_size = hp.basis_size;
    L.width = s.get<int>("width", L.width);
    L.height = s.get<int>("height", L.height);
    L.row_shift = s.get<int>("row_shift", L.row_shift);
    L.disorder_sigma = s.get<double>("disorder_sigma", L.disorder_sigma);
    L.disorder_seed = s.get<uint64_t>("disorder_seed", L.disorder_seed);
    L.j_c = s.get<double>("j_c_ghz", L.j_c);
    L.j_l = s.get<double>("j_l_ghz", L.j_l);
    hp.label_threshold = s.get<double>("label_threshold", hp.label_threshold);
    hp.max_leak = s.get<double>("max_leak", hp.max_leak);
    if (s.has("labels")) {
        const json &lj = s.at("labels");
        if (!lj.is_object()) throw ConfigError("device.labels: expected an object");
        for (auto it = lj.begin(); it != lj.end(); ++it) {
            int label = 0;
            try {
                label = std::stoi(it.key());
            } catch (const std::exception &) {
                throw ConfigError("device.labels: bad label " + it.key());
            }
            if (label < 1 || label > 5 || std::to_string(label) != it.key())
                throw ConfigError("device.labels: labels are 1..5, got " + it.key());
            Section ls(it.value(), "device.labels." + it.key());
            auto &p = L.base_params[label];
            p.e_c = ls.get<double>("e_c_ghz", p.e_c);
            p.e_j = ls.get<double>("e_j_ghz", p.e_j);
            p.e_l = ls.get<double>("e_l_ghz", p.e_l);
            p.phi_ext = ls.get<double>("phi_ext_rad", p.phi_ext);
            ls.done();
        }
    }
    if (s.has("label_override")) {
        const json &lo = s.at("label_override");
        if (!lo.is_array()) throw ConfigError("device.label_override: expected a list");
        L.label_override.clear();
        for (auto &e : lo) {
            Section es(e, "device.label_override[]");
            L.label_override[{es.req<int>("row"), es.req<int>("col")}] = es.req<int>("label");
            es.done();
        }
    }
    if (s.has("region")) {
        const json &r = s.at("region");
        if (!r.is_array() || r.empty()) throw ConfigError("device.region: expected a non-empty list");
        hp.region.clear();
        for (auto &c : r) hp.region.push_back(parse_coord(c, "device.region"));
    }
    s.done();
    if (L.keep_levels < 2) throw ConfigError("device.keep_levels must be >= 2");
    if (hp.basis_size < L.keep_levels) throw ConfigError("device.basis_size must be >= keep_levels");
    if (!(L.disorder_sigma >= 0)) throw ConfigError("device.disorder_sigma must be >= 0");
    for (auto &c : hp.region)
        if (!L.contains(c)) throw ConfigError("device.region: site outside lattice " + coord_name(c));
    for (auto &[l, p] : L.base_params)
        if (!(p.e_c > 0 && p.e_j > 0 && p.e_l > 0)) throw ConfigError("device.labels: energies must be positive");
}

inline json device_json(const HamiltonianParams &hp) {
    const auto &L = hp.lattice;
    json labels = json::object();
    for (auto &[l, p] : L.base_params)
        labels[std::to_string(l)] = {
            {"e_c_ghz", p.e_c}, {"e_j_ghz", p.e_j}, {"e_l_ghz", p.e_l}, {"phi_ext_rad", p.phi_ext}};
    json lo = json::array();
    for (auto &[c, l] : L.label_override) lo.push_back({{"row", c.row}, {"col", c.col}, {"label", l}});
    json reg = json::array();
    for (auto &c : hp.region) reg.push_back(coord_json(c));
    return {{"keep_levels", L.keep_levels},       {"basis_size", hp.basis_size},
            {"width", L.width},                   {"height", L.height},
            {"row_shift", L.row_shift},           {"disorder_sigma", L.disorder_sigma},
            {"disorder_seed", L.disorder_seed},   {"j_c_ghz", L.j_c},
            {"j_l_ghz", L.j_l},                   {"label_threshold", hp.label_threshold},
            {"max_leak", hp.max_leak},            {"labels", labels},
            {"label_override", lo},               {"region", reg}};
}

inline void parse_lcpem(const json &j, LcpemConfig &c) {
    Section s(j, "lcpem");
    c.source = s.get<std::string>("source", c.source);
    if (c.source != "config" && c.source != "pipeline") throw ConfigError("lcpem.source: expected config or pipeline");
    auto &p = c.params;
    for (int i = 0; i < 6; ++i) {
        double &v = p.pk(i / 3 + 1, i % 3 + 1);
        v = s.get<double>(lcpem_name(i), v);
    }
    p.p_reset = s.get<double>("p_reset", p.p_reset);
    p.p_measure = s.get<double>("p_measure", p.p_measure);
    p.r = s.get<double>("r_ghz", p.r);
    p.t_1q = s.get<double>("t_1q_ns", p.t_1q);
    p.t_2q = s.get<double>("t_2q_ns", p.t_2q);
    p.t_reset = s.get<double>("t_reset_ns", p.t_reset);
    p.t_measure = s.get<double>("t_measure_ns", p.t_measure);
    s.done();
    p.validate();
}

inline json lcpem_json(const LcpemConfig &c) {
    json j = {{"source", c.source}};
    const auto &p = c.params;
    for (int i = 0; i < 6; ++i) j[lcpem_name(i)] = p.pk(i / 3 + 1, i % 3 + 1);
    j["p_reset"] = p.p_reset;
    j["p_measure"] = p.p_measure;
    j["r_ghz"] = p.r;
    j["t_1q_ns"] = p.t_1q;
    j["t_2q_ns"] = p.t_2q;
    j["t_reset_ns"] = p.t_reset;
    j["t_measure_ns"] = p.t_measure;
    return j;
}

template <class T>
void require_positive(const std::vector<T> &v, const std::string &where) {
    for (auto x : v)
        if (!(x > 0)) throw ConfigError(where + ": entries must be positive");
}

}  // namespace detail

// ---------------------------------------------------------------- parse / emit

inline ExperimentConfig parse_config(const json &j, std::optional<uint64_t> seed_flag = std::nullopt) {
    ExperimentConfig c;
    Section s(j, "");
    const bool seed_in_config = s.has("seed");
    if (seed_flag)
        c.seed = *seed_flag;
    else if (seed_in_config)
        c.seed = s.req<uint64_t>("seed");
    else
        throw ConfigError("seed is required (config key 'seed' or --seed)");
    c.threads = s.get<int>("threads", c.threads);
    c.out = s.get<std::string>("out", c.out);
    if (c.threads < 1) throw ConfigError("threads must be >= 1");

    if (s.has("device")) detail::parse_device(s.at("device"), c.hp);
    if (s.has("schedules")) {
        const json &sj = s.at("schedules");
        if (sj.is_string()) {
            if (sj.get<std::string>() != "table1") throw ConfigError("schedules: expected \"table1\" or a list");
            c.hp.schedules = {table1_x_schedule(), table1_cnot_schedule()};
        } else if (sj.is_array()) {
            c.hp.schedules.clear();
            for (size_t i = 0; i < sj.size(); ++i)
                c.hp.schedules.push_back(
                    detail::parse_schedule(sj[i], "schedules[" + std::to_string(i) + "]", int(c.hp.region.size())));
        } else {
            throw ConfigError("schedules: expected \"table1\" or a list");
        }
    } else if (c.hp.region != default_region()) {
        c.hp.schedules.clear();  // reference pulses only fit the standard region
    }
    freeze_windows(c.hp);
    std::set<std::string> names;
    for (auto &g : c.hp.schedules) {
        if (!names.insert(g.name).second) throw ConfigError("duplicate schedule name: " + g.name);
        g.validate(c.hp.region);
    }
    if (s.has("groups")) {
        const json &gj = s.at("groups");
        if (!gj.is_object()) throw ConfigError("groups: expected an object");
        for (auto it = gj.begin(); it != gj.end(); ++it) {
            if (!it.value().is_string()) throw ConfigError("groups." + it.key() + ": expected a group name");
            c.hp.groups[it.key()] = it.value().get<std::string>();
        }
    }
    validate_params(c.hp);

    if (s.has("stage1")) {
        Section t(s.at("stage1"), "stage1");
        c.stage1.retune = t.get<bool>("retune", c.stage1.retune);
        c.stage1.calibrate = t.get<bool>("calibrate", c.stage1.calibrate);
        c.stage1.starts = t.get<int>("starts", c.stage1.starts);
        c.stage1.iterations = t.get<int>("iterations", c.stage1.iterations);
        t.done();
        if (c.stage1.starts < 1 || c.stage1.iterations < 0) throw ConfigError("stage1: starts >= 1, iterations >= 0");
    }
    if (s.has("optimize")) {
        Section t(s.at("optimize"), "optimize");
        c.optimize.budget = t.get<int>("budget", c.optimize.budget);
        c.optimize.lr = t.get<double>("lr", c.optimize.lr);
        c.optimize.min_improvement = t.get<double>("min_improvement", c.optimize.min_improvement);
        c.optimize.params = t.get<std::vector<std::string>>("params", c.optimize.params);
        t.done();
        if (c.optimize.budget < 0 || !(c.optimize.lr > 0)) throw ConfigError("optimize: budget >= 0 and lr > 0");
        for (auto &id : c.optimize.params) get_param(c.hp, id);
    } else {
        c.optimize.budget = 0;
    }
    c.optimize.seed = hash_combine(c.seed, 0x0b7);
    c.optimize.threads = c.threads;

    if (s.has("lcpem")) detail::parse_lcpem(s.at("lcpem"), c.lcpem);
    if (s.has("qec")) {
        Section t(s.at("qec"), "qec");
        c.qec.d = t.get<std::vector<int>>("d", c.qec.d);
        c.qec.rounds = t.get<int>("rounds", c.qec.rounds);
        c.qec.shots = t.get<int64_t>("shots", c.qec.shots);
        c.qec.r_ghz = t.get<std::vector<double>>("r_ghz", c.qec.r_ghz);
        c.qec.k1_only_variant = t.get<bool>("k1_only_variant", c.qec.k1_only_variant);
        t.done();
        for (int d : c.qec.d)
            if (d < 3 || d % 2 == 0) throw ConfigError("qec.d: distances must be odd and >= 3");
        for (double r : c.qec.r_ghz)
            if (!(r >= 0)) throw ConfigError("qec.r_ghz: rates must be >= 0");
        if (c.qec.rounds < 0 || c.qec.shots < 1000) throw ConfigError("qec: rounds >= 0, shots >= 1000");
    }
    if (s.has("grad")) {
        Section t(s.at("grad"), "grad");
        c.grad.d = t.get<int>("d", c.grad.d);
        c.grad.rounds = t.get<int>("rounds", c.grad.rounds);
        c.grad.shots = t.get<int64_t>("shots", c.grad.shots);
        c.grad.step_ghz2 = t.get<double>("step_ghz2", c.grad.step_ghz2);
        c.grad.apply_step = t.get<bool>("apply_step", c.grad.apply_step);
        t.done();
        if (c.grad.d < 3 || c.grad.d % 2 == 0) throw ConfigError("grad.d must be odd and >= 3");
        if (c.grad.rounds < 0 || c.grad.shots < 1000) throw ConfigError("grad: rounds >= 0, shots >= 1000");
    }
    if (s.has("walsh")) {
        Section t(s.at("walsh"), "walsh");
        c.walsh.top = t.get<int>("top", c.walsh.top);
        if (t.has("scan")) {
            Section u(t.at("scan"), "walsh.scan");
            c.walsh.scan = u.get<bool>("enabled", true);
            if (u.has("region")) {
                c.walsh.scan_region.clear();
                for (auto &x : u.at("region")) c.walsh.scan_region.push_back(detail::parse_coord(x, "walsh.scan.region"));
            }
            if (c.walsh.scan_region.size() != 2) throw ConfigError("walsh.scan.region: expected two sites");
            if (u.has("j_c_ghz")) c.walsh.j_c_ghz = detail::parse_range(u.at("j_c_ghz"), "walsh.scan.j_c_ghz");
            if (u.has("j_l_ghz")) c.walsh.j_l_ghz = detail::parse_range(u.at("j_l_ghz"), "walsh.scan.j_l_ghz");
            c.walsh.refine_tol_ghz = u.get<double>("refine_tol_ghz", c.walsh.refine_tol_ghz);
            u.done();
        }
        t.done();
    }
    if (s.has("toy")) {
        Section t(s.at("toy"), "toy");
        auto &y = c.toy;
        y.threshold_d = t.get<std::vector<int>>("threshold_d", y.threshold_d);
        y.threshold_p = t.get<std::vector<double>>("threshold_p", y.threshold_p);
        y.threshold_shots = t.get<int64_t>("threshold_shots", y.threshold_shots);
        y.copy_d = t.get<int>("copy_d", y.copy_d);
        y.copy_p = t.get<std::vector<double>>("copy_p", y.copy_p);
        y.copy_shots = t.get<int64_t>("copy_shots", y.copy_shots);
        y.low_p_d = t.get<int>("low_p_d", y.low_p_d);
        y.low_p = t.get<std::vector<double>>("low_p", y.low_p);
        y.low_p_max_weight = t.get<int>("low_p_max_weight", y.low_p_max_weight);
        y.fidelity_p = t.get<double>("fidelity_p", y.fidelity_p);
        y.fidelity_max_n = t.get<int>("fidelity_max_n", y.fidelity_max_n);
        t.done();
        for (int d : y.threshold_d)
            if (d < 4 || d % 2) throw ConfigError("toy.threshold_d: distances must be even and >= 4");
        if (y.copy_d < 4 || y.copy_d % 2) throw ConfigError("toy.copy_d must be even and >= 4");
        if (y.low_p_d < 2 || y.low_p_d % 2) throw ConfigError("toy.low_p_d must be even");
        if (y.fidelity_max_n < 1 || y.fidelity_max_n > 6) throw ConfigError("toy.fidelity_max_n must be in 1..6");
        for (auto *v : {&y.threshold_p, &y.copy_p, &y.low_p})
            for (double p : *v)
                if (!(p >= 0 && p <= 1)) throw ConfigError("toy: probabilities must be in [0,1]");
    }
    s.done();
    return c;
}

inline json config_json(const ExperimentConfig &c) {
    json sch = json::array();
    for (auto &g : c.hp.schedules) sch.push_back(detail::schedule_json(g));
    json groups = json::object();
    for (auto &[k, v] : c.hp.groups) groups[k] = v;
    json reg = json::array();
    for (auto &x : c.walsh.scan_region) reg.push_back(detail::coord_json(x));
    const auto &y = c.toy;
    return {{"seed", c.seed},
            {"threads", c.threads},
            {"out", c.out},
            {"device", detail::device_json(c.hp)},
            {"schedules", sch},
            {"groups", groups},
            {"stage1",
             {{"retune", c.stage1.retune},
              {"calibrate", c.stage1.calibrate},
              {"starts", c.stage1.starts},
              {"iterations", c.stage1.iterations}}},
            {"optimize",
             {{"budget", c.optimize.budget},
              {"lr", c.optimize.lr},
              {"min_improvement", c.optimize.min_improvement},
              {"params", c.optimize.params}}},
            {"lcpem", detail::lcpem_json(c.lcpem)},
            {"qec",
             {{"d", c.qec.d},
              {"rounds", c.qec.rounds},
              {"shots", c.qec.shots},
              {"r_ghz", c.qec.r_ghz},
              {"k1_only_variant", c.qec.k1_only_variant}}},
            {"grad",
             {{"d", c.grad.d},
              {"rounds", c.grad.rounds},
              {"shots", c.grad.shots},
              {"step_ghz2", c.grad.step_ghz2},
              {"apply_step", c.grad.apply_step}}},
            {"walsh",
             {{"top", c.walsh.top},
              {"scan",
               {{"enabled", c.walsh.scan},
                {"region", reg},
                {"j_c_ghz", detail::range_json(c.walsh.j_c_ghz)},
                {"j_l_ghz", detail::range_json(c.walsh.j_l_ghz)},
                {"refine_tol_ghz", c.walsh.refine_tol_ghz}}}}},
            {"toy",
             {{"threshold_d", y.threshold_d},
              {"threshold_p", y.threshold_p},
              {"threshold_shots", y.threshold_shots},
              {"copy_d", y.copy_d},
              {"copy_p", y.copy_p},
              {"copy_shots", y.copy_shots},
              {"low_p_d", y.low_p_d},
              {"low_p", y.low_p},
              {"low_p_max_weight", y.low_p_max_weight},
              {"fidelity_p", y.fidelity_p},
              {"fidelity_max_n", y.fidelity_max_n}}}};
}

inline ExperimentConfig load_config(const std::string &path, std::optional<uint64_t> seed_flag = std::nullopt) {
    json j = json::object();
    if (!path.empty()) {
        std::ifstream f(path);
        if (!f) throw ConfigError("cannot open config: " + path);
        try {
            j = json::parse(f);
        } catch (const json::parse_error &e) {
            throw ConfigError(std::string("config parse error: ") + e.what());
        }
    }
    return parse_config(j, seed_flag);
}

// ---------------------------------------------------------------- output

class Output {
public:
    explicit Output(std::string dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }
    std::string path(const std::string &name) const { return (std::filesystem::path(dir_) / name).string(); }
    void write(const std::string &name, const std::string &text) const {
        std::ofstream f(path(name));
        if (!f) throw std::runtime_error("cannot write " + path(name));
        f << text;
    }
    void write_json(const std::string &name, const json &j) const { write(name, j.dump(2) + "\n"); }
    const std::string &dir() const { return dir_; }

private:
    std::string dir_;
};

inline std::string fmt(double x) {
    char b[40];
    std::snprintf(b, sizeof b, "%.10g", x);
    return b;
}

class Csv {
public:
    explicit Csv(std::vector<std::string> header) : n_(header.size()) { row_strings(header); }
    template <class... A>
    void row(const A &...a) {
        std::vector<std::string> cells{cell(a)...};
        if (cells.size() != n_) throw std::logic_error("csv row width mismatch");
        row_strings(cells);
    }
    const std::string &str() const { return s_; }

private:
    static std::string cell(double x) { return fmt(x); }
    static std::string cell(int x) { return std::to_string(x); }
    static std::string cell(int64_t x) { return std::to_string(x); }
    static std::string cell(uint64_t x) { return std::to_string(x); }
    static std::string cell(bool x) { return x ? "1" : "0"; }
    static std::string cell(const std::string &x) { return x; }
    static std::string cell(const char *x) { return x; }
    void row_strings(const std::vector<std::string> &v) {
        for (size_t i = 0; i < v.size(); ++i) s_ += (i ? "," : "") + v[i];
        s_ += "\n";
    }
    size_t n_;
    std::string s_;
};

// ---------------------------------------------------------------- shared steps

struct PreparedControls {
    HamiltonianParams hp;
    std::vector<CalibrationResult> calibration;
    std::optional<OptimizeResult> optimized;
};

inline PreparedControls prepare_controls(const ExperimentConfig &c) {
    PreparedControls p;
    p.hp = c.hp;
    if (p.hp.schedules.empty()) throw ConfigError("no schedules configured");
    if (c.stage1.retune) retune_to_device(p.hp);
    if (c.stage1.calibrate)
        p.calibration = calibrate_schedules(p.hp, c.stage1.starts, c.stage1.iterations, hash_combine(c.seed, 0xca1),
                                            c.threads);
    if (c.optimize.budget > 0) {
        p.optimized = optimize_controls(p.hp, c.optimize);
        p.hp = p.optimized->params;
    }
    return p;
}

inline ExperimentConfig with_params(ExperimentConfig c, const HamiltonianParams &hp) {
    c.hp = hp;
    return c;
}

// ---------------------------------------------------------------- walsh

inline json cmd_walsh(const ExperimentConfig &c) {
    Output out(c.out);
    out.write_json("effective_config.json", config_json(c));
    DeviceEval de = evaluate_device(c.hp);
    WalshCoefficients w = walsh_transform(de.basis);
    std::vector<int> order(w.coeffs.size());
    for (size_t b = 0; b < order.size(); ++b) order[b] = int(b);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return std::abs(w.coeffs[a]) > std::abs(w.coeffs[b]); });
    Csv csv({"rank", "b", "bits", "weight", "coeff_ghz", "abs_coeff_ghz"});
    json top = json::array();
    int best = -1;
    std::map<int, double> by_weight;
    for (size_t i = 0; i < order.size(); ++i) {
        const int b = order[i];
        csv.row(int(i), b, de.basis.label(b), w.weight(b), w.coeffs[b], std::abs(w.coeffs[b]));
        if (int(i) < c.walsh.top)
            top.push_back({{"b", b}, {"bits", de.basis.label(b)}, {"weight", w.weight(b)}, {"coeff_ghz", w.coeffs[b]}});
        if (w.weight(b) >= 2 && best < 0) best = b;
        by_weight[w.weight(b)] = std::max(by_weight[w.weight(b)], std::abs(w.coeffs[b]));
    }
    out.write("walsh.csv", csv.str());
    json bw = json::object();
    for (auto &[k, v] : by_weight) bw[std::to_string(k)] = v;
    json summary = {{"m", w.m},
                    {"levels", c.hp.lattice.keep_levels},
                    {"min_overlap", de.basis.min_overlap},
                    {"max_abs_by_weight_ghz", bw},
                    {"top", top}};
    if (best >= 0)
        summary["largest_high_weight"] = {
            {"b", best}, {"bits", de.basis.label(best)}, {"weight", w.weight(best)}, {"coeff_ghz", w.coeffs[best]}};
    std::string gp = "set datafile separator ','\nset logscale y\nset xlabel 'rank'\nset ylabel '|c_b| (GHz)'\n"
                     "plot for [k=1:" + std::to_string(w.m) + "] 'walsh.csv' using 1:($4==k ? $6 : 1/0) "
                     "with points title sprintf('w=%d', k)\n";
    out.write("walsh.gp", gp);

    if (c.walsh.scan) {
        HamiltonianParams hp = c.hp;
        hp.region = c.walsh.scan_region;
        hp.schedules.clear();
        auto c11 = [&](double jc, double jl) {
            hp.lattice.j_c = jc;
            hp.lattice.j_l = jl;
            DeviceEval d = evaluate_device(hp);
            return walsh_transform(d.basis).coeffs[3];
        };
        Csv sc({"j_c_ghz", "j_l_ghz", "c11_ghz"});
        const auto &rc = c.walsh.j_c_ghz, &rl = c.walsh.j_l_ghz;
        const double inf = std::numeric_limits<double>::infinity();
        double grid_min = inf, best_abs = inf, bjc = 0, bjl = 0;
        int refined = 0;
        Csv rf({"j_c_ghz", "j_l_ghz", "c11_ghz"});
        for (int i = 0; i < rc.n; ++i) {
            std::vector<double> row;
            for (int k = 0; k < rl.n; ++k) {
                row.push_back(c11(rc.at(i), rl.at(k)));
                sc.row(rc.at(i), rl.at(k), row.back());
                grid_min = std::min(grid_min, std::abs(row.back()));
            }
            // bisect every sign change along j_l
            for (int k = 0; k + 1 < rl.n; ++k) {
                if (!(row[k] * row[k + 1] < 0)) continue;
                double a = rl.at(k), b = rl.at(k + 1), fa = row[k], x = a, fx = fa;
                for (int it = 0; it < 100 && b - a > c.walsh.refine_tol_ghz; ++it) {
                    x = 0.5 * (a + b);
                    fx = c11(rc.at(i), x);
                    if (fx * fa < 0) {
                        b = x;
                    } else {
                        a = x;
                        fa = fx;
                    }
                }
                rf.row(rc.at(i), x, fx);
                ++refined;
                if (std::abs(fx) < best_abs) {
                    best_abs = std::abs(fx);
                    bjc = rc.at(i);
                    bjl = x;
                }
            }
        }
        out.write("walsh_scan.csv", sc.str());
        out.write("walsh_scan_zeros.csv", rf.str());
        out.write("walsh_scan.gp",
                  "set datafile separator ','\nset xlabel 'J_L (GHz)'\nset ylabel 'c_11 (GHz)'\n"
                  "plot 'walsh_scan.csv' using 2:3:1 with points palette title 'c_11', "
                  "'walsh_scan_zeros.csv' using 2:3 with points pt 7 title 'zeros'\n");
        // minimum is taken over the refined zero crossings only
        summary["scan"] = {{"grid_min_abs_c11_ghz", grid_min},
                           {"min_abs_c11_ghz", refined ? best_abs : grid_min},
                           {"at_j_c_ghz", bjc},
                           {"at_j_l_ghz", bjl},
                           {"sign_changes", refined}};
    }
    out.write_json("walsh.json", summary);
    return summary;
}

// ---------------------------------------------------------------- gate errors

inline json round_json(const GateSchedule &s, const RoundEval &r) {
    json dropped = json::array();
    for (auto &[j, p] : r.lcpem.dropped_top) dropped.push_back({{"pauli", pauli_string(j, r.table.m)}, {"rate", p}});
    return {{"name", s.name},
            {"arity", r.arity},
            {"fidelity", r.fidelity},
            {"p_leak", r.result.p_leak},
            {"identity", r.lcpem.identity},
            {"p", r.lcpem.p},
            {"n", r.lcpem.n},
            {"mass", r.lcpem.mass},
            {"dropped_high", r.lcpem.dropped_high},
            {"dropped_disconnected", r.lcpem.dropped_disconnected},
            {"dropped_top", dropped},
            {"top", pauli_table_json(r.table, r.layout, 20)}};
}

inline void write_trace(const Output &out, const PreparedControls &p) {
    if (p.optimized) out.write("trace.csv", trace_csv(p.optimized->trace));
}

inline json cmd_gate_errors(const ExperimentConfig &c) {
    Output out(c.out);
    out.write_json("effective_config.json", config_json(c));
    PreparedControls prep = prepare_controls(c);
    write_trace(out, prep);
    out.write_json("optimized_config.json", config_json(with_params(c, prep.hp)));
    PipelineEval pe = evaluate_pipeline(prep.hp, c.threads);
    json rounds = json::array();
    Csv lc({"round", "arity", "k", "p", "n", "mass"});
    for (size_t i = 0; i < pe.rounds.size(); ++i) {
        const auto &s = prep.hp.schedules[i];
        const auto &r = pe.rounds[i];
        rounds.push_back(round_json(s, r));
        Csv t({"rank", "pauli", "rate", "k", "connected"});
        int rank = 0;
        for (auto &e : rounds.back()["top"])
            t.row(rank++, e["pauli"].get<std::string>(), e["rate"].get<double>(), e["k"].get<int>(),
                  e["connected"].get<bool>());
        out.write("pauli_" + s.name + ".csv", t.str());
        for (int k = 0; k < 3; ++k) lc.row(s.name, r.arity, k + 1, r.lcpem.p[k], r.lcpem.n[k], r.lcpem.mass[k]);
    }
    out.write("lcpem.csv", lc.str());
    json vals = json::object();
    auto v = pe.lcpem();
    for (int i = 0; i < 6; ++i) vals[lcpem_name(i)] = v[i];
    std::vector<MatC> u, t;
    for (auto &r : pe.rounds) {
        u.push_back(r.result.u_sim);
        t.push_back(r.target);
    }
    json summary = {{"rounds", rounds},
                    {"lcpem", vals},
                    {"near_label_threshold", pe.device.near_label_threshold},
                    {"objective", fidelity_objective(u, t).value}};
    if (prep.optimized)
        summary["optimize"] = {{"initial", prep.optimized->initial},
                               {"best", prep.optimized->best},
                               {"iterations", prep.optimized->iterations},
                               {"accepted", prep.optimized->accepted},
                               {"stagnated", prep.optimized->stagnated}};
    out.write_json("gate_errors.json", summary);
    return summary;
}

// ---------------------------------------------------------------- qec

inline LcpemParams lcpem_at_source(const ExperimentConfig &c, json *info = nullptr) {
    LcpemParams p = c.lcpem.params;
    if (c.lcpem.source == "pipeline") {
        PreparedControls prep = prepare_controls(c);
        PipelineEval pe = evaluate_pipeline(prep.hp, c.threads);
        p = with_lcpem(p, pe.lcpem());
        if (info) *info = {{"near_label_threshold", pe.device.near_label_threshold}};
    }
    p.validate();
    return p;
}

inline LcpemParams k1_only(LcpemParams p) {
    p.p2_1q = p.p3_1q = p.p2_2q = p.p3_2q = 0;
    return p;
}

inline json cmd_qec(const ExperimentConfig &c) {
    Output out(c.out);
    out.write_json("effective_config.json", config_json(c));
    const LcpemParams base = lcpem_at_source(c);
    Csv csv({"d", "rounds", "r_ghz", "variant", "shots", "failures", "p_logical", "stderr"});
    json rows = json::array();
    for (int d : c.qec.d) {
        const int rounds = c.qec.rounds ? c.qec.rounds : d;
        SyndromeCircuit sc = build_syndrome_circuit(d, rounds);
        DetectorGraph g = build_detector_graph(sc);
        std::vector<LcpemParams> settings;
        std::vector<std::pair<double, std::string>> tags;
        for (double r : c.qec.r_ghz) {
            LcpemParams p = base;
            p.r = r;
            settings.push_back(p);
            tags.push_back({r, "full"});
            if (c.qec.k1_only_variant) {
                settings.push_back(k1_only(p));
                tags.push_back({r, "k1_only"});
            }
        }
        const uint64_t seed = hash_combine(c.seed, uint64_t(d));
        PairedRun run = run_settings(sc, g, settings, c.qec.shots, seed, c.threads);
        for (size_t i = 0; i < settings.size(); ++i) {
            const auto &e = run.estimates[i];
            csv.row(d, rounds, tags[i].first, tags[i].second, e.shots, e.failures, e.p, e.stderr_);
            char h[17];
            std::snprintf(h, sizeof h, "%016llx", (unsigned long long)lcpem_hash(d, rounds, settings[i]));
            rows.push_back({{"d", d},
                            {"rounds", rounds},
                            {"params_hash", h},
                            {"shots", e.shots},
                            {"p_logical", e.p},
                            {"stderr", e.stderr_},
                            {"seed", seed},
                            {"r_ghz", tags[i].first},
                            {"variant", tags[i].second}});
        }
    }
    out.write("qec.csv", csv.str());
    std::string gp = "set datafile separator ','\nset logscale xy\nset xlabel 'r (GHz)'\nset ylabel 'p_logical'\n"
                     "set key top left\nplot ";
    bool first = true;
    for (int d : c.qec.d)
        for (std::string v : {std::string("full"), std::string("k1_only")}) {
            if (v == "k1_only" && !c.qec.k1_only_variant) continue;
            gp += std::string(first ? "" : ", \\\n     ") + "'qec.csv' using 3:(($1==" + std::to_string(d) +
                  " && strcol(4) eq '" + v + "') ? $7 : 1/0):8 with yerrorlines title 'd=" + std::to_string(d) +
                  " " + v + "'";
            first = false;
        }
    out.write("qec.gp", gp + "\n");
    json summary = {{"rows", rows}, {"lcpem", detail::lcpem_json({c.lcpem.source, base})}};
    out.write_json("qec.json", summary);
    return summary;
}

// ---------------------------------------------------------------- grad

inline json cmd_grad(const ExperimentConfig &c) {
    Output out(c.out);
    out.write_json("effective_config.json", config_json(c));
    auto t0 = std::chrono::steady_clock::now();
    PreparedControls prep = prepare_controls(c);
    write_trace(out, prep);
    out.write_json("optimized_config.json", config_json(with_params(c, prep.hp)));
    LcpemJacobian jac = grad_lcpem_wrt_params(prep.hp, c.threads);
    LcpemParams qec_base = with_lcpem(c.lcpem.params, jac.values);
    const int rounds = c.grad.rounds ? c.grad.rounds : c.grad.d;
    FdLogicalGradient fd =
        fd_grad_logical_wrt_lcpem(qec_base, c.grad.d, rounds, c.grad.shots, hash_combine(c.seed, 0x9d), c.threads);
    GradientReport rep = make_report(prep.hp, fd, jac, qec_base);
    json j = rep.to_json();
    j["timing_s"] = {{"forward", jac.forward_seconds},
                     {"backward", jac.backward_seconds},
                     {"total", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}};
    out.write_json("grad_report.json", j);
    Csv g({"param", "unit", "d_objective"});
    for (auto &[id, v] : rep.d_objective) g.row(id, rep.units.at(id), v);
    out.write("grad.csv", g.str());
    if (c.grad.apply_step) {
        HamiltonianParams next = gradient_step(prep.hp, rep.d_objective, c.grad.step_ghz2);
        out.write_json("params_next.json", config_json(with_params(c, next)));
    }
    return j;
}

// ---------------------------------------------------------------- toy

inline json cmd_toy(const ExperimentConfig &c) {
    Output out(c.out);
    out.write_json("effective_config.json", config_json(c));
    const auto &y = c.toy;
    json summary = json::object();

    // threshold curves
    if (!y.threshold_d.empty() && !y.threshold_p.empty()) {
        Csv csv({"p", "d", "failure_rate", "stderr"});
        std::map<int, std::vector<double>> curves;
        for (int d : y.threshold_d)
            for (size_t i = 0; i < y.threshold_p.size(); ++i) {
                auto e = ballistic_failure_rate(d, y.threshold_p[i], y.threshold_shots,
                                                hash_key(c.seed, uint64_t(d), i), c.threads);
                curves[d].push_back(e.p);
                csv.row(y.threshold_p[i], d, e.p, e.stderr_);
            }
        out.write("toy_threshold.csv", csv.str());
        json th = {{"d", y.threshold_d}, {"p", y.threshold_p}, {"shots", y.threshold_shots}};
        if (y.threshold_d.size() >= 2 && y.threshold_p.size() >= 2)
            th["crossing_p"] = estimate_crossing(y.threshold_p, curves[y.threshold_d.front()],
                                                 curves[y.threshold_d.back()]);
        summary["threshold"] = th;
    }

    // four-copy identity
    if (!y.copy_p.empty()) {
        Csv csv({"p", "d", "p_big", "stderr_big", "p_mono", "stderr_mono", "four_p_mono", "sigma", "z", "p_iid",
                 "stderr_iid"});
        json rows = json::array();
        for (size_t i = 0; i < y.copy_p.size(); ++i) {
            const double p = y.copy_p[i];
            auto r = paired_copy_identity(y.copy_d, p, y.copy_shots, hash_key(c.seed, 0xc0, i), c.threads);
            auto iid = toric_iid_failure_rate(y.copy_d / 2, p, y.copy_shots, hash_key(c.seed, 0x11d, i), c.threads);
            const double sigma = std::sqrt(r.big.stderr_ * r.big.stderr_ + 16 * r.mono.stderr_ * r.mono.stderr_);
            const double z = sigma > 0 ? (r.big.p - 4 * r.mono.p) / sigma : 0.0;
            csv.row(p, y.copy_d, r.big.p, r.big.stderr_, r.mono.p, r.mono.stderr_, 4 * r.mono.p, sigma, z, iid.p,
                    iid.stderr_);
            rows.push_back({{"p", p}, {"p_big", r.big.p}, {"four_p_mono", 4 * r.mono.p}, {"sigma", sigma}, {"z", z},
                            {"p_iid", iid.p}});
        }
        out.write("toy_copy.csv", csv.str());
        summary["copy"] = {{"d", y.copy_d},
                           {"shots", y.copy_shots},
                           {"color_conservation", color_conservation_holds(y.copy_d)},
                           {"rows", rows}};
    }

    // low-p formula
    if (!y.low_p.empty()) {
        Csv csv({"p", "d", "enumerated", "formula", "ratio"});
        json rows = json::array();
        for (double p : y.low_p) {
            const double e = toric_enumerated_failure(y.low_p_d, p, y.low_p_max_weight);
            const double f = low_p_logical(y.low_p_d, p);
            csv.row(p, y.low_p_d, e, f, e / f);
            rows.push_back({{"p", p}, {"enumerated", e}, {"formula", f}, {"ratio", e / f}});
        }
        out.write("toy_low_p.csv", csv.str());
        summary["low_p"] = {{"d", y.low_p_d}, {"max_weight", y.low_p_max_weight}, {"rows", rows}};
    }

    // fidelity of Z^n flip channels
    {
        Csv csv({"n", "fidelity"});
        double lo = 1, hi = 0;
        for (int n = 1; n <= y.fidelity_max_n; ++n) {
            // Z on n of max_n qubits, same register for every n
            PauliErrorTable t;
            t.m = y.fidelity_max_n;
            t.probs.assign(size_t(1) << (2 * t.m), 0.0);
            t.probs[0] = 1 - y.fidelity_p;
            t.probs[pauli_index(std::string(n, 'Z') + std::string(t.m - n, 'I'))] = y.fidelity_p;
            const double f = average_fidelity(t);
            lo = std::min(lo, f);
            hi = std::max(hi, f);
            csv.row(n, f);
        }
        out.write("toy_fidelity.csv", csv.str());
        summary["fidelity"] = {{"p", y.fidelity_p}, {"max_n", y.fidelity_max_n}, {"spread", hi - lo}};
    }

    out.write("toy.gp",
              "set datafile separator ','\nset xlabel 'p'\nset ylabel 'failure rate'\nset key top left\n"
              "plot 'toy_threshold.csv' using 1:($2==" +
                  std::to_string(y.threshold_d.empty() ? 0 : y.threshold_d.front()) +
                  " ? $3 : 1/0):4 with yerrorlines title 'small d', \\\n"
                  "     'toy_threshold.csv' using 1:($2==" +
                  std::to_string(y.threshold_d.empty() ? 0 : y.threshold_d.back()) +
                  " ? $3 : 1/0):4 with yerrorlines title 'large d'\n");
    out.write_json("toy.json", summary);
    return summary;
}

// ---------------------------------------------------------------- entry point

enum ExitCode { kOk = 0, kConfig = 2, kPhysics = 3, kNumerical = 4 };

inline int run(int argc, char **argv, std::ostream &log = std::cerr) {
    CLI::App app{"hamqec: Hamiltonian-to-logical-error simulator"};
    app.require_subcommand(1, 1);
    app.fallthrough();
    std::string config, out;
    std::optional<uint64_t> seed;
    std::optional<int> threads;
    app.add_option("--config", config, "JSON experiment config");
    app.add_option("--seed", seed, "master seed (overrides config)");
    app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--out", out, "output directory");
    for (const char *name : {"walsh", "gate-errors", "qec", "grad", "toy"}) app.add_subcommand(name);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }
    const std::string cmd = app.get_subcommands().front()->get_name();
    try {
        ExperimentConfig c = load_config(config, seed);
        if (threads) c.threads = *threads, c.optimize.threads = *threads;
        if (!out.empty()) c.out = out;
        json s;
        if (cmd == "walsh")
            s = cmd_walsh(c);
        else if (cmd == "gate-errors")
            s = cmd_gate_errors(c);
        else if (cmd == "qec")
            s = cmd_qec(c);
        else if (cmd == "grad")
            s = cmd_grad(c);
        else
            s = cmd_toy(c);
        std::cout << s.dump(2) << "\n";
        return kOk;
    } catch (const ConfigError &e) {
        log << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const json::exception &e) {
        log << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const std::invalid_argument &e) {
        log << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const PhysicsError &e) {
        log << "physics error: " << e.what() << "\n";
        return kPhysics;
    } catch (const std::exception &e) {
        log << "numerical error: " << e.what() << "\n";
        return kNumerical;
    }
}

}  // namespace hamqec::cli
