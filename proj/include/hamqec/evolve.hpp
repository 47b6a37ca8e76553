#pragma once

#include <cstdio>
#include <functional>
#include <thread>
#include <vector>

#include "hamqec/common.hpp"
#include "hamqec/control.hpp"
#include "hamqec/device.hpp"
#include "hamqec/linalg.hpp"
#include "hamqec/parallel.hpp"

namespace hamqec {

struct ComputationalBasis {
    int m = 0;
    MatR states;                      // dim x 2^m, column s is labelled by bitstring s (site 0 = MSB)
    VecR energies;                    // eigenvalue of each column
    std::vector<int> eig_index;       // column of the full eigensystem
    std::vector<int64_t> bare_index;  // product-basis index of each label
    double overlap_threshold = 0.9;
    double min_overlap = 1.0;

    std::string label(int s) const {
        std::string b;
        for (int i = 0; i < m; ++i) b += ((s >> (m - 1 - i)) & 1) ? '1' : '0';
        return b;
    }
};

inline ComputationalBasis select_computational_basis(const SymEig &eig, int levels, int m, double threshold = 0.9) {
    const int64_t n = eig.vectors.rows();
    int64_t expect = 1;
    for (int i = 0; i < m; ++i) expect *= levels;
    if (expect != n) throw std::invalid_argument("select_computational_basis: dimension mismatch");
    ComputationalBasis b;
    b.m = m;
    b.overlap_threshold = threshold;
    const int d = 1 << m;
    b.states.resize(n, d);
    b.energies.resize(d);
    std::vector<int> used(n, -1);
    for (int s = 0; s < d; ++s) {
        int64_t bare = 0;
        for (int i = 0; i < m; ++i) bare = bare * levels + ((s >> (m - 1 - i)) & 1);
        int found = -1;
        for (int64_t j = 0; j < n; ++j) {
            if (std::abs(eig.vectors(bare, j)) > threshold) {
                if (found >= 0) throw LabelingError("ambiguous labeling for bitstring " + b.label(s));
                found = int(j);
            }
        }
        if (found < 0) throw LabelingError("no eigenvector above overlap threshold for bitstring " + b.label(s));
        if (used[found] >= 0) throw LabelingError("eigenvector assigned twice, bitstring " + b.label(s));
        used[found] = s;
        double ov = eig.vectors(bare, found);
        b.states.col(s) = (ov < 0 ? -1.0 : 1.0) * eig.vectors.col(found);
        b.energies(s) = eig.values(found);
        b.eig_index.push_back(found);
        b.bare_index.push_back(bare);
        b.min_overlap = std::min(b.min_overlap, std::abs(ov));
    }
    return b;
}

inline ComputationalBasis select_computational_basis(const IdleHamiltonian &h, double threshold = 0.9) {
    return select_computational_basis(sym_eig(h.dense_real()), h.levels, h.num_sites(), threshold);
}

struct WalshCoefficients {
    int m = 0;
    std::vector<double> coeffs;  // index b, bit (m-1-i) is site i
    int weight(int b) const { return popcount(uint64_t(b)); }
};

inline void walsh_hadamard_inplace(std::vector<double> &v) {
    const size_t n = v.size();
    for (size_t h = 1; h < n; h <<= 1)
        for (size_t i = 0; i < n; i += 2 * h)
            for (size_t j = i; j < i + h; ++j) {
                double a = v[j], b = v[j + h];
                v[j] = a + b;
                v[j + h] = a - b;
            }
}

inline WalshCoefficients walsh_transform(const VecR &energies, int m) {
    if (energies.size() != (int64_t(1) << m)) throw std::invalid_argument("walsh_transform: size mismatch");
    WalshCoefficients w;
    w.m = m;
    w.coeffs.assign(energies.data(), energies.data() + energies.size());
    walsh_hadamard_inplace(w.coeffs);
    for (auto &c : w.coeffs) c /= double(energies.size());
    return w;
}

inline WalshCoefficients walsh_transform(const ComputationalBasis &b) { return walsh_transform(b.energies, b.m); }

inline VecR inverse_walsh(const WalshCoefficients &w) {
    std::vector<double> v = w.coeffs;
    walsh_hadamard_inplace(v);
    return Eigen::Map<VecR>(v.data(), int64_t(v.size()));
}

// adjoints of the truncated single-site data and couplings
struct OpGrads {
    std::vector<VecR> e_bar;
    std::vector<MatC> n_bar, phi_bar;
    double jc_bar = 0, jl_bar = 0;

    void init(const IdleHamiltonian &h) {
        const int k = h.levels;
        e_bar.assign(h.num_sites(), VecR::Zero(k));
        n_bar.assign(h.num_sites(), MatC::Zero(k, k));
        phi_bar.assign(h.num_sites(), MatC::Zero(k, k));
        jc_bar = jl_bar = 0;
    }
    void add(const OpGrads &o) {
        for (size_t i = 0; i < e_bar.size(); ++i) {
            e_bar[i] += o.e_bar[i];
            n_bar[i] += o.n_bar[i];
            phi_bar[i] += o.phi_bar[i];
        }
        jc_bar += o.jc_bar;
        jl_bar += o.jl_bar;
    }
};

// kbar of J_C n_i n_j - J_L phi_i phi_j pushed to the site operators
inline void pair_backward(const IdleHamiltonian &h, int e, const MatC &kbar, OpGrads &g) {
    auto [i, j] = h.edges[e];
    const int k = h.levels;
    const MatC &ni = h.qubits[i].n_op, &nj = h.qubits[j].n_op;
    const MatC &pi = h.qubits[i].phi_op, &pj = h.qubits[j].phi_op;
    for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b)
            for (int c = 0; c < k; ++c)
                for (int d = 0; d < k; ++d) {
                    cplx kb = kbar(a * k + c, b * k + d);
                    g.n_bar[i](a, b) += h.j_c * kb * std::conj(nj(c, d));
                    g.n_bar[j](c, d) += h.j_c * kb * std::conj(ni(a, b));
                    g.phi_bar[i](a, b) += -h.j_l * kb * std::conj(pj(c, d));
                    g.phi_bar[j](c, d) += -h.j_l * kb * std::conj(pi(a, b));
                    g.jc_bar += std::real(std::conj(kb) * ni(a, b) * nj(c, d));
                    g.jl_bar += -std::real(std::conj(kb) * pi(a, b) * pj(c, d));
                }
}

// adjoint of the dense idle Hamiltonian pushed to its terms
inline void idle_backward(const IdleHamiltonian &h, const MatR &hbar, OpGrads &g) {
    const int64_t n = h.dim();
    const int k = h.levels;
    for (int64_t r = 0; r < n; ++r)
        for (int i = 0; i < h.num_sites(); ++i) g.e_bar[i]((r / h.stride(i)) % k) += hbar(r, r);
    for (int e = 0; e < int(h.edges.size()); ++e) {
        auto [i, j] = h.edges[e];
        const int64_t si = h.stride(i), sj = h.stride(j);
        MatC kb = MatC::Zero(k * k, k * k);
        for (int64_t r = 0; r < n; ++r) {
            const int a = int((r / si) % k), c = int((r / sj) % k);
            const int64_t base = r - a * si - c * sj;
            for (int b = 0; b < k; ++b)
                for (int d = 0; d < k; ++d) kb(a * k + c, b * k + d) += hbar(r, base + b * si + d * sj);
        }
        pair_backward(h, e, kb, g);
    }
}

// adjoint w.r.t. the (sign fixed) computational eigenvectors and eigenvalues -> adjoint of H(0)
inline MatR eigenbasis_backward(const SymEig &eig, const ComputationalBasis &b, const MatR &vbar, const VecR &ebar) {
    const int64_t n = eig.vectors.rows();
    const int d = int(b.eig_index.size());
    MatR w = eig.vectors.transpose() * vbar;  // n x d
    MatR coef = MatR::Zero(n, d);
    for (int q = 0; q < d; ++q) {
        const int eq = b.eig_index[q];
        for (int64_t j = 0; j < n; ++j) {
            if (j == eq) continue;
            double gap = eig.values(eq) - eig.values(j);
            if (std::abs(gap) < 1e-12) {
                if (std::abs(w(j, q)) > 1e-14) throw NumericalError("eigenvector adjoint across a degenerate pair");
                continue;
            }
            coef(j, q) = w(j, q) / gap;
        }
        coef(eq, q) = ebar(q);
    }
    return eig.vectors * coef * b.states.transpose();
}

namespace detail {

constexpr int kBlock = 16;

template <int L>
struct Factor {
    double gr[L][L], gi[L][L];
    explicit Factor(const MatC &g) {
        for (int a = 0; a < L; ++a)
            for (int b = 0; b < L; ++b) {
                gr[a][b] = g(a, b).real();
                gi[a][b] = g(a, b).imag();
            }
    }
};

template <int L>
void apply_factor(double *re, double *im, const std::vector<int64_t> &bases, const int64_t *offs, const Factor<L> &f) {
    constexpr int W = kBlock;
    for (int64_t base : bases) {
        double xr[L][W], xi[L][W];
        for (int a = 0; a < L; ++a)
            for (int c = 0; c < W; ++c) {
                xr[a][c] = re[(base + offs[a]) * W + c];
                xi[a][c] = im[(base + offs[a]) * W + c];
            }
        for (int a = 0; a < L; ++a) {
            double yr[W] = {}, yi[W] = {};
            for (int b = 0; b < L; ++b) {
                const double ar = f.gr[a][b], ai = f.gi[a][b];
                if (ar == 0.0 && ai == 0.0) continue;
                for (int c = 0; c < W; ++c) {
                    yr[c] += ar * xr[b][c] - ai * xi[b][c];
                    yi[c] += ar * xi[b][c] + ai * xr[b][c];
                }
            }
            for (int c = 0; c < W; ++c) {
                re[(base + offs[a]) * W + c] = yr[c];
                im[(base + offs[a]) * W + c] = yi[c];
            }
        }
    }
}

// un-applies G to psi and lam (G unitary) and accumulates gbar += lam_post psi_pre^dagger
template <int L>
void unapply_factor(double *pr, double *pi, double *lr, double *li, const std::vector<int64_t> &bases,
                    const int64_t *offs, const Factor<L> &fdag, double *gbr, double *gbi) {
    constexpr int W = kBlock;
    for (int64_t base : bases) {
        double xr[L][W], xi[L][W], ur[L][W], ui[L][W];
        for (int a = 0; a < L; ++a)
            for (int c = 0; c < W; ++c) {
                xr[a][c] = pr[(base + offs[a]) * W + c];
                xi[a][c] = pi[(base + offs[a]) * W + c];
                ur[a][c] = lr[(base + offs[a]) * W + c];
                ui[a][c] = li[(base + offs[a]) * W + c];
            }
        double yr[L][W], yi[L][W];
        for (int a = 0; a < L; ++a) {
            for (int c = 0; c < W; ++c) yr[a][c] = yi[a][c] = 0;
            for (int b = 0; b < L; ++b) {
                const double ar = fdag.gr[a][b], ai = fdag.gi[a][b];
                if (ar == 0.0 && ai == 0.0) continue;
                for (int c = 0; c < W; ++c) {
                    yr[a][c] += ar * xr[b][c] - ai * xi[b][c];
                    yi[a][c] += ar * xi[b][c] + ai * xr[b][c];
                }
            }
        }
        for (int a = 0; a < L; ++a)
            for (int b = 0; b < L; ++b) {
                double sr = 0, si = 0;
                for (int c = 0; c < W; ++c) {
                    sr += ur[a][c] * yr[b][c] + ui[a][c] * yi[b][c];
                    si += ui[a][c] * yr[b][c] - ur[a][c] * yi[b][c];
                }
                gbr[a * L + b] += sr;
                gbi[a * L + b] += si;
            }
        for (int a = 0; a < L; ++a) {
            double vr[W] = {}, vi[W] = {};
            for (int b = 0; b < L; ++b) {
                const double ar = fdag.gr[a][b], ai = fdag.gi[a][b];
                if (ar == 0.0 && ai == 0.0) continue;
                for (int c = 0; c < W; ++c) {
                    vr[c] += ar * ur[b][c] - ai * ui[b][c];
                    vi[c] += ar * ui[b][c] + ai * ur[b][c];
                }
            }
            for (int c = 0; c < W; ++c) {
                pr[(base + offs[a]) * W + c] = yr[a][c];
                pi[(base + offs[a]) * W + c] = yi[a][c];
                lr[(base + offs[a]) * W + c] = vr[c];
                li[(base + offs[a]) * W + c] = vi[c];
            }
        }
    }
}

}  // namespace detail

struct TrotterBackward {
    MatC lambda0;
    OpGrads ops;
    std::vector<std::vector<double>> drive_bar;  // per drive, DriveSpec::param order
};

// first-order Trotter propagator over a fixed window; drives sampled at step midpoints
class TrotterEngine {
  public:
    TrotterEngine(const IdleHamiltonian &h, const std::vector<DriveSpec> &drives, double window, double dt)
        : h_(h), drives_(drives), window_(window) {
        if (!(window > 0) || !(dt > 0)) throw std::invalid_argument("trotter: window and dt must be positive");
        k_ = h.levels;
        if (k_ < 2 || k_ > 4) throw std::invalid_argument("trotter: supports 2..4 levels per site");
        steps_ = std::max<int64_t>(1, int64_t(std::ceil(window / dt - 1e-9)));
        dt_ = window / double(steps_);
        const double tau = kTwoPi * dt_;
        const int m = h.num_sites();
        drive_of_site_.assign(m, -1);
        for (int d = 0; d < int(drives.size()); ++d) {
            int i = h.index_of(drives[d].target);
            if (i < 0) throw std::invalid_argument("drive target not in region: " + coord_name(drives[d].target));
            if (drive_of_site_[i] >= 0) throw std::invalid_argument("two drives on one site");
            drive_of_site_[i] = d;
        }
        site_const_.resize(m);
        for (int i = 0; i < m; ++i)
            if (drive_of_site_[i] < 0) site_const_[i] = HermExp(h.qubits[i].energies.cast<cplx>().asDiagonal(), tau);
        for (int e = 0; e < int(h.edges.size()); ++e) pair_.emplace_back(h.pair_term(e), tau);
        for (int64_t s = 0; s < steps_; ++s) {
            const double t = (double(s) + 0.5) * dt_;
            for (int i = 0; i < m; ++i) {
                if (drive_of_site_[i] < 0) continue;
                const auto &q = h.qubits[i];
                MatC k = q.energies.cast<cplx>().asDiagonal();
                k += drive_field(drives[drive_of_site_[i]], t) * q.phi_op;
                site_step_.emplace_back(k, tau);
            }
        }
        n_driven_ = int(drives.size());
        // row groups per factor
        const int64_t dim = h.dim();
        site_bases_.resize(m);
        site_offs_.resize(m);
        for (int i = 0; i < m; ++i) {
            const int64_t s = h.stride(i);
            for (int64_t r = 0; r < dim; ++r)
                if ((r / s) % k_ == 0) site_bases_[i].push_back(r);
            for (int a = 0; a < k_; ++a) site_offs_[i].push_back(a * s);
        }
        for (auto [i, j] : h.edges) {
            const int64_t si = h.stride(i), sj = h.stride(j);
            std::vector<int64_t> b, o;
            for (int64_t r = 0; r < dim; ++r)
                if ((r / si) % k_ == 0 && (r / sj) % k_ == 0) b.push_back(r);
            for (int a = 0; a < k_; ++a)
                for (int c = 0; c < k_; ++c) o.push_back(a * si + c * sj);
            pair_bases_.push_back(std::move(b));
            pair_offs_.push_back(std::move(o));
        }
    }

    int64_t steps() const { return steps_; }
    double dt() const { return dt_; }
    double window() const { return window_; }

    MatC forward(const MatC &psi0, int threads = 1) const {
        switch (k_) {
            case 2: return forward_impl<2>(psi0, threads);
            case 3: return forward_impl<3>(psi0, threads);
            default: return forward_impl<4>(psi0, threads);
        }
    }

    TrotterBackward backward(const MatC &psi_t, const MatC &lambda_t, int threads = 1) const {
        switch (k_) {
            case 2: return backward_impl<2>(psi_t, lambda_t, threads);
            case 3: return backward_impl<3>(psi_t, lambda_t, threads);
            default: return backward_impl<4>(psi_t, lambda_t, threads);
        }
    }

  private:
    const HermExp &site_factor(int i, int64_t s) const {
        if (drive_of_site_[i] < 0) return site_const_[i];
        int slot = 0;
        for (int j = 0; j < i; ++j)
            if (drive_of_site_[j] >= 0) ++slot;
        return site_step_[s * n_driven_ + slot];
    }

    struct Block {
        std::vector<double> re, im;
    };

    Block load(const MatC &m, int blk) const {
        const int64_t dim = m.rows();
        Block b;
        b.re.assign(dim * detail::kBlock, 0.0);
        b.im.assign(dim * detail::kBlock, 0.0);
        for (int c = 0; c < detail::kBlock; ++c) {
            const int col = blk * detail::kBlock + c;
            if (col >= m.cols()) break;
            for (int64_t r = 0; r < dim; ++r) {
                b.re[r * detail::kBlock + c] = m(r, col).real();
                b.im[r * detail::kBlock + c] = m(r, col).imag();
            }
        }
        return b;
    }
    static void store(const Block &b, MatC &m, int blk) {
        for (int c = 0; c < detail::kBlock; ++c) {
            const int col = blk * detail::kBlock + c;
            if (col >= m.cols()) break;
            for (int64_t r = 0; r < m.rows(); ++r) m(r, col) = cplx(b.re[r * detail::kBlock + c], b.im[r * detail::kBlock + c]);
        }
    }

    template <int K>
    MatC forward_impl(const MatC &psi0, int threads) const {
        if (psi0.rows() != h_.dim()) throw std::invalid_argument("trotter: state dimension mismatch");
        const int m = h_.num_sites();
        const int nblk = int((psi0.cols() + detail::kBlock - 1) / detail::kBlock);
        MatC out(psi0.rows(), psi0.cols());
        std::vector<detail::Factor<K * K>> pf;
        for (auto &p : pair_) pf.emplace_back(p.g);
        std::vector<detail::Factor<K>> sc;
        for (int i = 0; i < m; ++i) sc.emplace_back(drive_of_site_[i] < 0 ? site_const_[i].g : MatC::Identity(K, K));
        parallel_for(nblk, threads, [&](int blk) {
            Block b = load(psi0, blk);
            for (int64_t s = 0; s < steps_; ++s) {
                for (int i = 0; i < m; ++i) {
                    if (drive_of_site_[i] < 0) {
                        detail::apply_factor<K>(b.re.data(), b.im.data(), site_bases_[i], site_offs_[i].data(), sc[i]);
                    } else {
                        detail::Factor<K> f(site_factor(i, s).g);
                        detail::apply_factor<K>(b.re.data(), b.im.data(), site_bases_[i], site_offs_[i].data(), f);
                    }
                }
                for (size_t e = 0; e < pair_.size(); ++e)
                    detail::apply_factor<K * K>(b.re.data(), b.im.data(), pair_bases_[e], pair_offs_[e].data(), pf[e]);
            }
            store(b, out, blk);
        });
        check_norms(psi0, out);
        return out;
    }

    void check_norms(const MatC &a, const MatC &b) const {
        const double tol = 1e-9 * std::max(1.0, double(steps_) / 1000.0);
        for (int c = 0; c < a.cols(); ++c) {
            double na = a.col(c).norm(), nb = b.col(c).norm();
            if (std::abs(na - nb) > tol * std::max(1.0, na))
                throw StabilityError("trotter: norm drift " + std::to_string(std::abs(na - nb)));
        }
    }

    template <int K>
    TrotterBackward backward_impl(const MatC &psi_t, const MatC &lam_t, int threads) const {
        const int m = h_.num_sites();
        const int ne = int(pair_.size());
        const int nblk = int((psi_t.cols() + detail::kBlock - 1) / detail::kBlock);
        constexpr int K2 = K * K;
        std::vector<detail::Factor<K2>> pfd;
        for (auto &p : pair_) pfd.emplace_back(p.g.adjoint());
        std::vector<detail::Factor<K>> scd;
        for (int i = 0; i < m; ++i)
            scd.emplace_back(drive_of_site_[i] < 0 ? MatC(site_const_[i].g.adjoint()) : MatC::Identity(K, K));
        // per block accumulators, reduced in block order afterwards
        struct Acc {
            std::vector<double> pr, pi;        // ne * K2 * K2
            std::vector<double> sr, si;        // m * K * K (undriven sites)
            std::vector<double> dr, di;        // steps * n_driven * K * K
        };
        std::vector<Acc> acc(nblk);
        MatC lam0(lam_t.rows(), lam_t.cols());
        parallel_for(nblk, threads, [&](int blk) {
            Acc &A = acc[blk];
            A.pr.assign(size_t(ne) * K2 * K2, 0.0);
            A.pi = A.pr;
            A.sr.assign(size_t(m) * K * K, 0.0);
            A.si = A.sr;
            A.dr.assign(size_t(steps_) * n_driven_ * K * K, 0.0);
            A.di = A.dr;
            Block p = load(psi_t, blk), l = load(lam_t, blk);
            for (int64_t s = steps_ - 1; s >= 0; --s) {
                for (int e = ne - 1; e >= 0; --e)
                    detail::unapply_factor<K2>(p.re.data(), p.im.data(), l.re.data(), l.im.data(), pair_bases_[e],
                                               pair_offs_[e].data(), pfd[e], &A.pr[size_t(e) * K2 * K2],
                                               &A.pi[size_t(e) * K2 * K2]);
                int slot = n_driven_;
                for (int i = m - 1; i >= 0; --i) {
                    if (drive_of_site_[i] < 0) {
                        detail::unapply_factor<K>(p.re.data(), p.im.data(), l.re.data(), l.im.data(), site_bases_[i],
                                                  site_offs_[i].data(), scd[i], &A.sr[size_t(i) * K * K],
                                                  &A.si[size_t(i) * K * K]);
                    } else {
                        --slot;
                        detail::Factor<K> fd(MatC(site_factor(i, s).g.adjoint()));
                        const size_t off = (size_t(s) * n_driven_ + slot) * K * K;
                        detail::unapply_factor<K>(p.re.data(), p.im.data(), l.re.data(), l.im.data(), site_bases_[i],
                                                  site_offs_[i].data(), fd, &A.dr[off], &A.di[off]);
                    }
                }
            }
            store(l, lam0, blk);
        });
        TrotterBackward out;
        out.lambda0 = lam0;
        out.ops.init(h_);
        out.drive_bar.resize(drives_.size());
        for (size_t d = 0; d < drives_.size(); ++d) out.drive_bar[d].assign(drives_[d].num_params(), 0.0);
        auto gather = [&](auto member_r, auto member_i, size_t off, int L) {
            MatC g = MatC::Zero(L, L);
            for (int b = 0; b < nblk; ++b)
                for (int x = 0; x < L; ++x)
                    for (int y = 0; y < L; ++y)
                        g(x, y) += cplx((acc[b].*member_r)[off + x * L + y], (acc[b].*member_i)[off + x * L + y]);
            return g;
        };
        for (int e = 0; e < ne; ++e) {
            MatC gbar = gather(&Acc::pr, &Acc::pi, size_t(e) * K2 * K2, K2);
            pair_backward(h_, e, pair_[e].backward(gbar), out.ops);
        }
        for (int i = 0; i < m; ++i) {
            if (drive_of_site_[i] >= 0) continue;
            MatC kb = site_const_[i].backward(gather(&Acc::sr, &Acc::si, size_t(i) * K * K, K));
            for (int a = 0; a < K; ++a) out.ops.e_bar[i](a) += kb(a, a).real();
        }
        std::vector<double> fg(8);
        for (int64_t s = 0; s < steps_; ++s) {
            const double t = (double(s) + 0.5) * dt_;
            int slot = 0;
            for (int i = 0; i < m; ++i) {
                if (drive_of_site_[i] < 0) continue;
                const size_t off = (size_t(s) * n_driven_ + slot) * K * K;
                MatC kb = site_step_[s * n_driven_ + slot].backward(gather(&Acc::dr, &Acc::di, off, K));
                ++slot;
                const int d = drive_of_site_[i];
                const double f = drive_field(drives_[d], t, fg.data());
                for (int a = 0; a < K; ++a) out.ops.e_bar[i](a) += kb(a, a).real();
                out.ops.phi_bar[i] += f * kb;
                const double fbar = re_inner(kb, h_.qubits[i].phi_op);
                for (int p = 0; p < drives_[d].num_params(); ++p) out.drive_bar[d][p] += fbar * fg[p];
            }
        }
        return out;
    }

    IdleHamiltonian h_;
    std::vector<DriveSpec> drives_;
    double window_;
    int k_;
    int64_t steps_;
    double dt_;
    int n_driven_ = 0;
    std::vector<int> drive_of_site_;
    std::vector<HermExp> site_const_;
    std::vector<HermExp> pair_;
    std::vector<HermExp> site_step_;  // steps x driven sites
    std::vector<std::vector<int64_t>> site_bases_, site_offs_, pair_bases_, pair_offs_;
};

// strict form: dt must divide t_total
inline MatC trotter_evolve(const IdleHamiltonian &h, const std::vector<DriveSpec> &drives, const MatC &psi0, double dt,
                           double t_total, int threads = 1) {
    const double n = t_total / dt;
    if (std::abs(n - std::round(n)) > 1e-9 * std::max(1.0, n))
        throw std::invalid_argument("trotter_evolve: dt does not divide t_total");
    return TrotterEngine(h, drives, t_total, dt).forward(psi0, threads);
}

struct RoundResult {
    MatC c;       // projected final states, column i = input label i
    MatC u_sim;   // after compensation
    VecR leakage_per_state;
    double p_leak = 0;
    MatC psi_t;   // final states in the full space, kept for the adjoint
};

inline RoundResult extract_round_unitary(const TrotterEngine &engine, const GateSchedule &schedule,
                                         const ComputationalBasis &basis, int threads = 1, double max_leak = 0.05) {
    const int d = int(basis.states.cols());
    RoundResult r;
    r.psi_t = engine.forward(basis.states.cast<cplx>(), threads);
    r.c = basis.states.transpose().cast<cplx>() * r.psi_t;
    r.leakage_per_state.resize(d);
    for (int i = 0; i < d; ++i) r.leakage_per_state(i) = 1.0 - r.c.col(i).squaredNorm();
    r.p_leak = 1.0 - (r.c.adjoint() * r.c).trace().real() / double(d);
    if (r.p_leak > max_leak)
        throw LeakageError("round '" + schedule.name + "' leakage " + std::to_string(r.p_leak) + " exceeds " +
                           std::to_string(max_leak));
    r.u_sim = apply_compensation(r.c, schedule.compensation);
    return r;
}

inline RoundResult extract_round_unitary(const IdleHamiltonian &h, const GateSchedule &schedule,
                                         const ComputationalBasis &basis, double dt, int threads = 1) {
    TrotterEngine eng(h, schedule.drives, schedule.window(), dt);
    return extract_round_unitary(eng, schedule, basis, threads);
}

struct RoundAdjoint {
    MatR v_bar;    // adjoint w.r.t. basis.states
    OpGrads ops;   // Trotter contribution only
    std::vector<std::vector<double>> drive_bar;
    std::vector<double> comp_bar;
};

// given the adjoint of u_sim returns adjoints of everything the round depends on
inline RoundAdjoint round_backward(const TrotterEngine &engine, const GateSchedule &schedule,
                                   const ComputationalBasis &basis, const RoundResult &r, const MatC &u_bar,
                                   int threads = 1) {
    RoundAdjoint a;
    MatC c_bar = compensation_backward(r.c, schedule.compensation, u_bar, a.comp_bar);
    MatC vc = basis.states.cast<cplx>();
    MatC psi_bar = vc * c_bar;
    a.v_bar = (r.psi_t * c_bar.adjoint()).real();
    TrotterBackward tb = engine.backward(r.psi_t, psi_bar, threads);
    a.v_bar += tb.lambda0.real();
    a.ops = std::move(tb.ops);
    a.drive_bar = std::move(tb.drive_bar);
    return a;
}

}  // namespace hamqec
