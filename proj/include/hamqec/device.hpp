#pragma once

#include <array>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "hamqec/common.hpp"
#include "hamqec/linalg.hpp"
#include "hamqec/rng.hpp"

namespace hamqec {

struct FluxoniumParams {
    double e_c = 1.0;
    double e_j = 4.0;
    double e_l = 1.0;
    double phi_ext = kPi;
};

struct TruncatedQubit {
    VecR energies;  // GHz, ascending
    MatC n_op;
    MatC phi_op;
    int levels() const { return int(energies.size()); }
};

// everything needed to push gradients from the truncated operators back to E_C, E_J, E_L
struct FluxoniumSolution {
    FluxoniumParams params;
    int basis_size = 0;
    TruncatedQubit qubit;
    VecR evals;       // full spectrum in the oscillator basis
    MatR evecs;       // sign fixed
    MatR n_real;      // n = i * n_real
    MatR phi;         // phi operator
    MatR d_e_c;       // dH/dE_C
    MatR d_e_j;       // dH/dE_J
    MatR d_e_l;       // dH/dE_L

    // returns d/d(E_C, E_J, E_L) given adjoints of energies, n_op and phi_op
    std::array<double, 3> backward(const VecR &e_bar, const MatC &n_bar, const MatC &phi_bar) const {
        const int k = qubit.levels();
        const int n = basis_size;
        MatR vk = evecs.leftCols(k);
        MatC m = cplx(0, 1) * n_real.cast<cplx>();
        MatC vc = vk.cast<cplx>();
        MatR vbar = (m * vc * n_bar.adjoint() + m.transpose() * vc * n_bar.conjugate()).real();
        MatC p = phi.cast<cplx>();
        vbar += (p * vc * phi_bar.adjoint() + p.transpose() * vc * phi_bar.conjugate()).real();
        MatR w = evecs.transpose() * vbar;  // n x k
        MatR coef = MatR::Zero(n, k);
        for (int q = 0; q < k; ++q) {
            for (int j = 0; j < n; ++j) {
                if (j == q) continue;
                double gap = evals(q) - evals(j);
                if (std::abs(gap) < 1e-12) throw NumericalError("fluxonium backward: degenerate spectrum");
                coef(j, q) = w(j, q) / gap;
            }
            coef(q, q) = e_bar(q);
        }
        MatR hbar = evecs * coef * vk.transpose();
        return {re_inner(hbar, d_e_c), re_inner(hbar, d_e_j), re_inner(hbar, d_e_l)};
    }
};

namespace detail {

inline FluxoniumSolution fluxonium_at_size(const FluxoniumParams &p, int n, int keep) {
    const int np = 2 * n + 20;
    const double phi_zpf = std::pow(8.0 * p.e_c / p.e_l, 0.25) / std::sqrt(2.0);
    const double n_zpf = std::pow(p.e_l / (8.0 * p.e_c), 0.25) / std::sqrt(2.0);
    MatR a = MatR::Zero(np, np);
    for (int i = 1; i < np; ++i) a(i - 1, i) = std::sqrt(double(i));
    MatR phi_p = phi_zpf * (a + a.transpose());
    MatR nr_p = n_zpf * (a.transpose() - a);
    MatR n2_p = -(nr_p * nr_p);
    SymEig pe = sym_eig(phi_p);
    MatR cos_p = pe.vectors * pe.values.array().cos().matrix().asDiagonal() * pe.vectors.transpose();

    FluxoniumSolution s;
    s.params = p;
    s.basis_size = n;
    s.phi = phi_p.topLeftCorner(n, n);
    s.n_real = nr_p.topLeftCorner(n, n);
    MatR phi2 = (phi_p * phi_p).topLeftCorner(n, n);
    s.d_e_c = 4.0 * n2_p.topLeftCorner(n, n);
    s.d_e_l = 0.5 * (phi2 + 2.0 * p.phi_ext * s.phi + p.phi_ext * p.phi_ext * MatR::Identity(n, n));
    s.d_e_j = -cos_p.topLeftCorner(n, n);
    MatR h = p.e_c * s.d_e_c + p.e_l * s.d_e_l + p.e_j * s.d_e_j;
    h = 0.5 * (h + h.transpose());
    SymEig e = sym_eig(h);
    s.evals = e.values;
    s.evecs = e.vectors;
    for (int c = 0; c < n; ++c) {
        Eigen::Index imax;
        s.evecs.col(c).cwiseAbs().maxCoeff(&imax);
        if (s.evecs(imax, c) < 0) s.evecs.col(c) *= -1.0;
    }
    MatR vk = s.evecs.leftCols(keep);
    s.qubit.energies = s.evals.head(keep);
    s.qubit.n_op = cplx(0, 1) * (vk.transpose() * s.n_real * vk).cast<cplx>();
    // inductor branch phase phi + phi_ext: zero mean at the sweet spot, so the J_L term carries no
    // pi-sized offsets; the shift is a multiple of identity and drops out of drive dynamics
    s.qubit.phi_op = (vk.transpose() * s.phi * vk + p.phi_ext * MatR::Identity(keep, keep)).cast<cplx>();
    return s;
}

}  // namespace detail

inline FluxoniumSolution solve_fluxonium(const FluxoniumParams &p, int basis_size = 60, int keep_levels = 3) {
    if (basis_size < 30) throw std::invalid_argument("fluxonium: oscillator basis size must be >= 30");
    if (keep_levels < 1 || keep_levels > 6) throw std::invalid_argument("fluxonium: keep_levels must be in 1..6");
    if (!(p.e_c > 0 && p.e_j >= 0 && p.e_l > 0)) throw std::invalid_argument("fluxonium: energies must be positive");
    int n = basis_size;
    while (n <= 1280) {
        FluxoniumSolution s = detail::fluxonium_at_size(p, n, keep_levels);
        FluxoniumSolution t = detail::fluxonium_at_size(p, n + 10, keep_levels);
        double shift = (s.qubit.energies - t.qubit.energies).cwiseAbs().maxCoeff();
        if (shift <= 1e-9) return s;
        n *= 2;
    }
    throw ConvergenceError("fluxonium: spectrum not converged up to oscillator basis 1280");
}

inline TruncatedQubit fluxonium_spectrum(const FluxoniumParams &p, int basis_size = 60, int keep_levels = 3) {
    return solve_fluxonium(p, basis_size, keep_levels).qubit;
}

struct LatticeSpec {
    int width = 5;
    int height = 3;
    int row_shift = 2;  // label(r, c) = ((c + row_shift*r) mod 5) + 1
    std::map<Coord, int> label_override;
    std::map<int, FluxoniumParams> base_params;
    uint64_t disorder_seed = 0;
    double disorder_sigma = 0.01;
    double j_c = 1.150e-2;
    double j_l = -2.000e-3;
    int keep_levels = 3;
    int basis_size = 60;

    int label(const Coord &c) const {
        auto it = label_override.find(c);
        if (it != label_override.end()) return it->second;
        return ((c.col + row_shift * c.row) % 5 + 5) % 5 + 1;
    }
    bool contains(const Coord &c) const { return c.row >= 0 && c.row < height && c.col >= 0 && c.col < width; }
};

// reference device values
inline std::map<int, FluxoniumParams> default_base_params() {
    std::map<int, FluxoniumParams> m;
    const double el[6] = {0, 1.1, 1.2, 1.0, 0.8, 0.9};
    for (int l = 1; l <= 5; ++l) m[l] = FluxoniumParams{1.0, 4.0, el[l], kPi};
    return m;
}

inline LatticeSpec default_lattice() {
    LatticeSpec s;
    s.base_params = default_base_params();
    return s;
}

inline std::vector<Coord> default_region() { return {{0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 2}, {2, 3}}; }

struct SiteOffsets {
    double d_e_c = 0, d_e_j = 0, d_e_l = 0;
};

inline std::map<Coord, SiteOffsets> sample_disorder_offsets(const LatticeSpec &spec) {
    if (spec.disorder_sigma < 0) throw std::invalid_argument("disorder_sigma must be >= 0");
    std::map<Coord, SiteOffsets> out;
    for (int r = 0; r < spec.height; ++r)
        for (int c = 0; c < spec.width; ++c) {
            Coord x{r, c};
            auto it = spec.base_params.find(spec.label(x));
            if (it == spec.base_params.end())
                throw ConfigError("no base parameters for label " + std::to_string(spec.label(x)));
            const FluxoniumParams &b = it->second;
            if (!(b.e_c > 0 && b.e_j > 0 && b.e_l > 0)) throw std::invalid_argument("base params must be positive");
            Stream rng(hash_key(spec.disorder_seed, uint64_t(r), uint64_t(c)));
            auto draw = [&](double base) {
                for (;;) {
                    double d = spec.disorder_sigma * base * rng.normal();
                    if (base + d > 0) return d;
                    std::fprintf(stderr, "warning: negative disorder sample at %s, resampling\n", coord_name(x).c_str());
                }
            };
            SiteOffsets o;
            o.d_e_c = draw(b.e_c);
            o.d_e_j = draw(b.e_j);
            o.d_e_l = draw(b.e_l);
            out[x] = o;
        }
    return out;
}

inline FluxoniumParams site_params(const LatticeSpec &spec, const Coord &c, const SiteOffsets &o) {
    FluxoniumParams b = spec.base_params.at(spec.label(c));
    b.e_c += o.d_e_c;
    b.e_j += o.d_e_j;
    b.e_l += o.d_e_l;
    return b;
}

inline std::map<Coord, FluxoniumParams> sample_disordered_lattice(const LatticeSpec &spec) {
    std::map<Coord, FluxoniumParams> out;
    for (auto &[c, o] : sample_disorder_offsets(spec)) out[c] = site_params(spec, c, o);
    return out;
}

// single-site diagonals plus nearest-neighbour pair terms on a region
struct IdleHamiltonian {
    std::vector<Coord> sites;  // row-major order, site 0 is the most significant digit
    std::vector<TruncatedQubit> qubits;
    std::vector<std::pair<int, int>> edges;  // sorted, i < j
    double j_c = 0, j_l = 0;
    int levels = 0;

    int num_sites() const { return int(sites.size()); }
    int64_t dim() const {
        int64_t d = 1;
        for (int i = 0; i < num_sites(); ++i) d *= levels;
        return d;
    }
    int64_t stride(int site) const {
        int64_t s = 1;
        for (int i = site + 1; i < num_sites(); ++i) s *= levels;
        return s;
    }
    int index_of(const Coord &c) const {
        for (int i = 0; i < num_sites(); ++i)
            if (sites[i] == c) return i;
        return -1;
    }
    MatC pair_term(int e) const {
        auto [i, j] = edges[e];
        return j_c * kron(qubits[i].n_op, qubits[j].n_op) - j_l * kron(qubits[i].phi_op, qubits[j].phi_op);
    }

    // the idle Hamiltonian is real symmetric in this basis
    MatR dense_real() const {
        if (num_sites() > 8) throw std::length_error("dense assembly limited to 8 sites");
        const int64_t n = dim();
        MatR h = MatR::Zero(n, n);
        const int k = levels;
        for (int64_t r = 0; r < n; ++r) {
            double e = 0;
            for (int i = 0; i < num_sites(); ++i) e += qubits[i].energies((r / stride(i)) % k);
            h(r, r) = e;
        }
        for (int e = 0; e < int(edges.size()); ++e) {
            MatC kt = pair_term(e);
            if (kt.imag().cwiseAbs().maxCoeff() > 1e-12 * (1.0 + kt.norm()))
                throw NumericalError("pair term is not real");
            MatR kr = kt.real();
            auto [i, j] = edges[e];
            const int64_t si = stride(i), sj = stride(j);
            for (int64_t r = 0; r < n; ++r) {
                const int a = int((r / si) % k), c = int((r / sj) % k);
                const int64_t base = r - a * si - c * sj;
                for (int b = 0; b < k; ++b)
                    for (int d = 0; d < k; ++d) h(r, base + b * si + d * sj) += kr(a * k + c, b * k + d);
            }
        }
        return h;
    }
    MatC dense() const { return dense_real().cast<cplx>(); }
};

inline IdleHamiltonian build_idle_hamiltonian(const std::map<Coord, TruncatedQubit> &qubits, const LatticeSpec &spec,
                                              std::vector<Coord> region) {
    std::sort(region.begin(), region.end());
    if (std::adjacent_find(region.begin(), region.end()) != region.end())
        throw std::invalid_argument("region has duplicate sites");
    IdleHamiltonian h;
    h.sites = region;
    h.j_c = spec.j_c;
    h.j_l = spec.j_l;
    h.levels = -1;
    for (auto &c : region) {
        if (!spec.contains(c)) throw std::invalid_argument("region site outside lattice: " + coord_name(c));
        auto it = qubits.find(c);
        if (it == qubits.end()) throw std::invalid_argument("no qubit for site " + coord_name(c));
        if (h.levels < 0) h.levels = it->second.levels();
        if (it->second.levels() != h.levels) throw std::invalid_argument("mixed truncation levels");
        h.qubits.push_back(it->second);
    }
    for (int i = 0; i < int(region.size()); ++i)
        for (int j = i + 1; j < int(region.size()); ++j)
            if (lattice_neighbors(region[i], region[j])) h.edges.push_back({i, j});
    return h;
}

}  // namespace hamqec
