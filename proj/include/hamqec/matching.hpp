#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

namespace hamqec {

// Maximum-weight matching on a general graph (Edmonds blossom with Galil's dual updates, O(n^3)).
// Integer weights. With max_cardinality the result is the heaviest among maximum-cardinality matchings.
// Returns mate[v] or -1.
class WeightedBlossom {
  public:
    struct Edge {
        int i, j;
        int64_t w;
    };

    static std::vector<int> solve(int n, const std::vector<Edge> &edges, bool max_cardinality) {
        WeightedBlossom b(n, edges);
        b.run(max_cardinality);
        std::vector<int> out(n, -1);
        for (int v = 0; v < n; ++v)
            if (b.mate_[v] >= 0) out[v] = b.endpoint_[b.mate_[v]];
        return out;
    }

  private:
    WeightedBlossom(int n, const std::vector<Edge> &edges) : nv_(n), e_(edges) {
        const int ne = int(e_.size());
        int64_t maxw = 0;
        for (auto &x : e_) maxw = std::max(maxw, x.w);
        endpoint_.resize(2 * ne);
        for (int p = 0; p < 2 * ne; ++p) endpoint_[p] = p % 2 ? e_[p / 2].j : e_[p / 2].i;
        neighbend_.assign(n, {});
        for (int k = 0; k < ne; ++k) {
            neighbend_[e_[k].i].push_back(2 * k + 1);
            neighbend_[e_[k].j].push_back(2 * k);
        }
        mate_.assign(n, -1);
        label_.assign(2 * n, 0);
        labelend_.assign(2 * n, -1);
        inblossom_.resize(n);
        for (int v = 0; v < n; ++v) inblossom_[v] = v;
        blossomparent_.assign(2 * n, -1);
        childs_.assign(2 * n, {});
        endps_.assign(2 * n, {});
        base_.assign(2 * n, -1);
        for (int v = 0; v < n; ++v) base_[v] = v;
        bestedge_.assign(2 * n, -1);
        bbest_.assign(2 * n, {});
        has_bbest_.assign(2 * n, 0);
        for (int b = 2 * n - 1; b >= n; --b) unused_.push_back(b);
        std::reverse(unused_.begin(), unused_.end());
        dual_.assign(2 * n, 0);
        for (int v = 0; v < n; ++v) dual_[v] = maxw;
        allow_.assign(ne, 0);
    }

    int64_t slack(int k) const { return dual_[e_[k].i] + dual_[e_[k].j] - 2 * e_[k].w; }

    void leaves(int b, std::vector<int> &out) const {
        if (b < nv_) {
            out.push_back(b);
            return;
        }
        for (int t : childs_[b]) leaves(t, out);
    }
    std::vector<int> leaves(int b) const {
        std::vector<int> out;
        leaves(b, out);
        return out;
    }

    void assign_label(int w, int t, int p) {
        int b = inblossom_[w];
        label_[w] = label_[b] = t;
        labelend_[w] = labelend_[b] = p;
        bestedge_[w] = bestedge_[b] = -1;
        if (t == 1) {
            leaves(b, queue_);
        } else {
            int base = base_[b];
            assign_label(endpoint_[mate_[base]], 1, mate_[base] ^ 1);
        }
    }

    int scan_blossom(int v, int w) {
        std::vector<int> path;
        int base = -1;
        while (v != -1 || w != -1) {
            int b = inblossom_[v];
            if (label_[b] & 4) {
                base = base_[b];
                break;
            }
            path.push_back(b);
            label_[b] = 5;
            if (labelend_[b] == -1) {
                v = -1;
            } else {
                v = endpoint_[labelend_[b]];
                b = inblossom_[v];
                v = endpoint_[labelend_[b]];
            }
            if (w != -1) std::swap(v, w);
        }
        for (int b : path) label_[b] = 1;
        return base;
    }

    void add_blossom(int base, int k) {
        int v = e_[k].i, w = e_[k].j;
        int bb = inblossom_[base], bv = inblossom_[v], bw = inblossom_[w];
        int b = unused_.back();
        unused_.pop_back();
        base_[b] = base;
        blossomparent_[b] = -1;
        blossomparent_[bb] = b;
        std::vector<int> path, endps;
        while (bv != bb) {
            blossomparent_[bv] = b;
            path.push_back(bv);
            endps.push_back(labelend_[bv]);
            v = endpoint_[labelend_[bv]];
            bv = inblossom_[v];
        }
        path.push_back(bb);
        std::reverse(path.begin(), path.end());
        std::reverse(endps.begin(), endps.end());
        endps.push_back(2 * k);
        while (bw != bb) {
            blossomparent_[bw] = b;
            path.push_back(bw);
            endps.push_back(labelend_[bw] ^ 1);
            w = endpoint_[labelend_[bw]];
            bw = inblossom_[w];
        }
        childs_[b] = path;
        endps_[b] = endps;
        label_[b] = 1;
        labelend_[b] = labelend_[bb];
        dual_[b] = 0;
        for (int x : leaves(b)) {
            if (label_[inblossom_[x]] == 2) queue_.push_back(x);
            inblossom_[x] = b;
        }
        std::vector<int> bestto(2 * nv_, -1);
        for (int s : path) {
            std::vector<std::vector<int>> lists;
            if (!has_bbest_[s]) {
                for (int x : leaves(s)) {
                    std::vector<int> l;
                    for (int p : neighbend_[x]) l.push_back(p / 2);
                    lists.push_back(l);
                }
            } else {
                lists.push_back(bbest_[s]);
            }
            for (auto &l : lists)
                for (int kk : l) {
                    int i = e_[kk].i, j = e_[kk].j;
                    if (inblossom_[j] == b) std::swap(i, j);
                    int bj = inblossom_[j];
                    if (bj != b && label_[bj] == 1 && (bestto[bj] == -1 || slack(kk) < slack(bestto[bj])))
                        bestto[bj] = kk;
                }
            bbest_[s].clear();
            has_bbest_[s] = 0;
            bestedge_[s] = -1;
        }
        bbest_[b].clear();
        for (int kk : bestto)
            if (kk != -1) bbest_[b].push_back(kk);
        has_bbest_[b] = 1;
        bestedge_[b] = -1;
        for (int kk : bbest_[b])
            if (bestedge_[b] == -1 || slack(kk) < slack(bestedge_[b])) bestedge_[b] = kk;
    }

    void expand_blossom(int b, bool endstage) {
        for (int s : childs_[b]) {
            blossomparent_[s] = -1;
            if (s < nv_)
                inblossom_[s] = s;
            else if (endstage && dual_[s] == 0)
                expand_blossom(s, endstage);
            else
                for (int x : leaves(s)) inblossom_[x] = s;
        }
        if (!endstage && label_[b] == 2) {
            const int L = int(childs_[b].size());
            auto at = [&](int j) { return childs_[b][((j % L) + L) % L]; };
            auto ep = [&](int j) { return endps_[b][((j % L) + L) % L]; };
            int entry = inblossom_[endpoint_[labelend_[b] ^ 1]];
            int j = int(std::find(childs_[b].begin(), childs_[b].end(), entry) - childs_[b].begin());
            int jstep, trick;
            if (j & 1) {
                j -= L;
                jstep = 1;
                trick = 0;
            } else {
                jstep = -1;
                trick = 1;
            }
            int p = labelend_[b];
            while (j != 0) {
                label_[endpoint_[p ^ 1]] = 0;
                label_[endpoint_[ep(j - trick) ^ trick ^ 1]] = 0;
                assign_label(endpoint_[p ^ 1], 2, p);
                allow_[ep(j - trick) / 2] = 1;
                j += jstep;
                p = ep(j - trick) ^ trick;
                allow_[p / 2] = 1;
                j += jstep;
            }
            int bv = at(j);
            label_[endpoint_[p ^ 1]] = label_[bv] = 2;
            labelend_[endpoint_[p ^ 1]] = labelend_[bv] = p;
            bestedge_[bv] = -1;
            j += jstep;
            while (at(j) != entry) {
                bv = at(j);
                if (label_[bv] == 1) {
                    j += jstep;
                    continue;
                }
                int found = -1;
                for (int x : leaves(bv))
                    if (label_[x] != 0) {
                        found = x;
                        break;
                    }
                if (found >= 0) {
                    label_[found] = 0;
                    label_[endpoint_[mate_[base_[bv]]]] = 0;
                    assign_label(found, 2, labelend_[found]);
                }
                j += jstep;
            }
        }
        label_[b] = labelend_[b] = -1;
        childs_[b].clear();
        endps_[b].clear();
        base_[b] = -1;
        bbest_[b].clear();
        has_bbest_[b] = 0;
        bestedge_[b] = -1;
        unused_.push_back(b);
    }

    void augment_blossom(int b, int v) {
        int t = v;
        while (blossomparent_[t] != b) t = blossomparent_[t];
        if (t >= nv_) augment_blossom(t, v);
        const int L = int(childs_[b].size());
        auto at = [&](int j) { return childs_[b][((j % L) + L) % L]; };
        auto ep = [&](int j) { return endps_[b][((j % L) + L) % L]; };
        int i = int(std::find(childs_[b].begin(), childs_[b].end(), t) - childs_[b].begin());
        int j = i, jstep, trick;
        if (i & 1) {
            j -= L;
            jstep = 1;
            trick = 0;
        } else {
            jstep = -1;
            trick = 1;
        }
        while (j != 0) {
            j += jstep;
            t = at(j);
            int p = ep(j - trick) ^ trick;
            if (t >= nv_) augment_blossom(t, endpoint_[p]);
            j += jstep;
            t = at(j);
            if (t >= nv_) augment_blossom(t, endpoint_[p ^ 1]);
            mate_[endpoint_[p]] = p ^ 1;
            mate_[endpoint_[p ^ 1]] = p;
        }
        std::rotate(childs_[b].begin(), childs_[b].begin() + i, childs_[b].end());
        std::rotate(endps_[b].begin(), endps_[b].begin() + i, endps_[b].end());
        base_[b] = base_[childs_[b][0]];
    }

    void augment_matching(int k) {
        const int vs[2] = {e_[k].i, e_[k].j};
        const int ps[2] = {2 * k + 1, 2 * k};
        for (int side = 0; side < 2; ++side) {
            int s = vs[side], p = ps[side];
            while (true) {
                int bs = inblossom_[s];
                if (bs >= nv_) augment_blossom(bs, s);
                mate_[s] = p;
                if (labelend_[bs] == -1) break;
                int t = endpoint_[labelend_[bs]];
                int bt = inblossom_[t];
                s = endpoint_[labelend_[bt]];
                int j = endpoint_[labelend_[bt] ^ 1];
                if (bt >= nv_) augment_blossom(bt, j);
                mate_[j] = labelend_[bt];
                p = labelend_[bt] ^ 1;
            }
        }
    }

    void run(bool maxcard) {
        const int n = nv_;
        for (int stage = 0; stage < n; ++stage) {
            std::fill(label_.begin(), label_.end(), 0);
            std::fill(bestedge_.begin(), bestedge_.end(), -1);
            for (int b = n; b < 2 * n; ++b) {
                bbest_[b].clear();
                has_bbest_[b] = 0;
            }
            std::fill(allow_.begin(), allow_.end(), 0);
            queue_.clear();
            for (int v = 0; v < n; ++v)
                if (mate_[v] == -1 && label_[inblossom_[v]] == 0) assign_label(v, 1, -1);
            bool augmented = false;
            while (true) {
                while (!queue_.empty() && !augmented) {
                    int v = queue_.back();
                    queue_.pop_back();
                    for (int p : neighbend_[v]) {
                        int k = p / 2, w = endpoint_[p];
                        if (inblossom_[v] == inblossom_[w]) continue;
                        int64_t ks = 0;
                        if (!allow_[k]) {
                            ks = slack(k);
                            if (ks <= 0) allow_[k] = 1;
                        }
                        if (allow_[k]) {
                            if (label_[inblossom_[w]] == 0) {
                                assign_label(w, 2, p ^ 1);
                            } else if (label_[inblossom_[w]] == 1) {
                                int base = scan_blossom(v, w);
                                if (base >= 0) {
                                    add_blossom(base, k);
                                } else {
                                    augment_matching(k);
                                    augmented = true;
                                    break;
                                }
                            } else if (label_[w] == 0) {
                                label_[w] = 2;
                                labelend_[w] = p ^ 1;
                            }
                        } else if (label_[inblossom_[w]] == 1) {
                            int b = inblossom_[v];
                            if (bestedge_[b] == -1 || ks < slack(bestedge_[b])) bestedge_[b] = k;
                        } else if (label_[w] == 0) {
                            if (bestedge_[w] == -1 || ks < slack(bestedge_[w])) bestedge_[w] = k;
                        }
                    }
                }
                if (augmented) break;
                int dtype = -1, dedge = -1, dblossom = -1;
                int64_t delta = 0;
                if (!maxcard) {
                    dtype = 1;
                    delta = *std::min_element(dual_.begin(), dual_.begin() + n);
                }
                for (int v = 0; v < n; ++v)
                    if (label_[inblossom_[v]] == 0 && bestedge_[v] != -1) {
                        int64_t d = slack(bestedge_[v]);
                        if (dtype == -1 || d < delta) {
                            delta = d;
                            dtype = 2;
                            dedge = bestedge_[v];
                        }
                    }
                for (int b = 0; b < 2 * n; ++b)
                    if (blossomparent_[b] == -1 && label_[b] == 1 && bestedge_[b] != -1) {
                        int64_t d = slack(bestedge_[b]) / 2;
                        if (dtype == -1 || d < delta) {
                            delta = d;
                            dtype = 3;
                            dedge = bestedge_[b];
                        }
                    }
                for (int b = n; b < 2 * n; ++b)
                    if (base_[b] >= 0 && blossomparent_[b] == -1 && label_[b] == 2 && (dtype == -1 || dual_[b] < delta)) {
                        delta = dual_[b];
                        dtype = 4;
                        dblossom = b;
                    }
                if (dtype == -1) {
                    dtype = 1;
                    delta = std::max<int64_t>(0, *std::min_element(dual_.begin(), dual_.begin() + n));
                }
                for (int v = 0; v < n; ++v) {
                    int l = label_[inblossom_[v]];
                    if (l == 1) dual_[v] -= delta;
                    else if (l == 2) dual_[v] += delta;
                }
                for (int b = n; b < 2 * n; ++b)
                    if (base_[b] >= 0 && blossomparent_[b] == -1) {
                        if (label_[b] == 1) dual_[b] += delta;
                        else if (label_[b] == 2) dual_[b] -= delta;
                    }
                if (dtype == 1) break;
                if (dtype == 2) {
                    allow_[dedge] = 1;
                    int i = e_[dedge].i, j = e_[dedge].j;
                    if (label_[inblossom_[i]] == 0) std::swap(i, j);
                    queue_.push_back(i);
                } else if (dtype == 3) {
                    allow_[dedge] = 1;
                    queue_.push_back(e_[dedge].i);
                } else {
                    expand_blossom(dblossom, false);
                }
            }
            if (!augmented) break;
            for (int b = n; b < 2 * n; ++b)
                if (blossomparent_[b] == -1 && base_[b] >= 0 && label_[b] == 1 && dual_[b] == 0) expand_blossom(b, true);
        }
    }

    int nv_;
    std::vector<Edge> e_;
    std::vector<int> endpoint_;
    std::vector<std::vector<int>> neighbend_;
    std::vector<int> mate_, label_, labelend_, inblossom_, blossomparent_;
    std::vector<std::vector<int>> childs_, endps_;
    std::vector<int> base_, bestedge_;
    std::vector<std::vector<int>> bbest_;
    std::vector<char> has_bbest_;
    std::vector<int> unused_;
    std::vector<int64_t> dual_;
    std::vector<char> allow_;
    std::vector<int> queue_;
};

}  // namespace hamqec
