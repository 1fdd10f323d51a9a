#include "dyadlab/shift.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include "dyadlab/rng.hpp"

namespace dyadlab {

namespace {

inline double haar_sign(int j, int c, int dim) {
    double s = 1.0;
    for (int axis = 0; axis < dim; ++axis)
        if ((j >> axis) & 1) s *= ((c >> axis) & 1) ? 1.0 : -1.0;
    return s;
}

// values of e_{Q,j} on the child regions of Q (single region for a
// finest-level cube, which only carries j = 0)
std::vector<double> e_child_values(const Lattice& lat, const CubeId& q, int j) {
    double inv = std::sqrt(std::ldexp(1.0, -q.level * lat.dim()));  // |Q|^{-1/2}
    if (q.level <= lat.k_min()) return {inv};
    int nc = 1 << lat.dim();
    std::vector<double> v(static_cast<size_t>(nc));
    for (int c = 0; c < nc; ++c) v[static_cast<size_t>(c)] = inv * (j == 0 ? 1.0 : haar_sign(j, c, lat.dim()));
    return v;
}

// per-level cube averages, bottom-up
std::vector<std::vector<double>> level_averages(const StepFunction& f) {
    const Lattice& lat = f.lattice();
    int nc = 1 << lat.dim();
    std::vector<std::vector<double>> avg(static_cast<size_t>(lat.levels()));
    avg[0].assign(static_cast<size_t>(lat.total_cells()), 0.0);
    for (std::int64_t i = 0; i < f.size(); ++i) avg[0][static_cast<size_t>(i)] = f[i];
    for (int l = lat.k_min() + 1; l <= 0; ++l) {
        size_t li = static_cast<size_t>(l - lat.k_min());
        avg[li].assign(static_cast<size_t>(lat.cube_count(l)), 0.0);
        for (std::int64_t i = 0; i < lat.cube_count(l); ++i) {
            double s = 0;
            for (const CubeId& c : lat.children(lat.from_flat(l, i)))
                s += avg[li - 1][static_cast<size_t>(lat.flat_index(c))];
            avg[li][static_cast<size_t>(i)] = s / nc;
        }
    }
    return avg;
}

struct PairKey {
    int in_level;
    std::int64_t in_flat;
    int out_level;
    std::int64_t out_flat;
    bool operator<(const PairKey& o) const {
        return std::tie(in_level, in_flat, out_level, out_flat) <
               std::tie(o.in_level, o.in_flat, o.out_level, o.out_flat);
    }
};

// sup over Q' x Q'' of the pair function sum of a coefficient group
double pair_sup(const Lattice& lat, const std::vector<const ShiftEntry*>& group) {
    const ShiftEntry& first = *group.front();
    size_t nin = e_child_values(lat, first.in_cube, 0).size();
    size_t nout = e_child_values(lat, first.out_cube, 0).size();
    double sup = 0.0;
    for (size_t ci = 0; ci < nin; ++ci)
        for (size_t co = 0; co < nout; ++co) {
            double s = 0;
            for (const ShiftEntry* e : group) {
                auto ein = e_child_values(lat, e->in_cube, e->in_j);
                auto eout = e_child_values(lat, e->out_cube, e->out_j);
                s += e->value * ein[ci] * eout[co];
            }
            sup = std::max(sup, std::abs(s));
        }
    return sup;
}

std::map<PairKey, std::vector<ShiftEntry*>> group_pairs(const Lattice& lat, ShiftBlock& b) {
    std::map<PairKey, std::vector<ShiftEntry*>> groups;
    for (ShiftEntry& e : b.entries)
        groups[{e.in_cube.level, lat.flat_index(e.in_cube), e.out_cube.level,
                lat.flat_index(e.out_cube)}]
            .push_back(&e);
    return groups;
}

}  // namespace

ElementaryShift::ElementaryShift(const Lattice* lat, int m, int n, bool generalized)
    : lat_(lat), m_(m), n_(n), generalized_(generalized) {
    if (m < 0 || n < 0) throw std::invalid_argument("ElementaryShift: negative parameters");
}

void ElementaryShift::add_block(ShiftBlock b) {
    const Lattice& lat = *lat_;
    if (b.cube.level - complexity() < lat.k_min())
        throw std::invalid_argument("ElementaryShift: active cube too close to the finest level");
    int bs = (1 << lat.dim()) - 1;
    for (const ShiftEntry& e : b.entries) {
        if (e.in_cube.level != b.cube.level - m_ || e.out_cube.level != b.cube.level - n_)
            throw std::invalid_argument("ElementaryShift: entry cube at wrong depth");
        if (!lat.contains(b.cube, e.in_cube) || !lat.contains(b.cube, e.out_cube))
            throw std::invalid_argument("ElementaryShift: entry cube outside the active cube");
        if (e.in_j < 0 || e.in_j > bs || e.out_j < 0 || e.out_j > bs)
            throw std::invalid_argument("ElementaryShift: j out of range");
        if ((e.in_j == 0 || e.out_j == 0) && !generalized_)
            throw std::invalid_argument("ElementaryShift: j = 0 requires a generalized shift");
        if (e.in_j >= 1 && e.in_cube.level <= lat.k_min())
            throw std::invalid_argument("ElementaryShift: oscillating function on a finest cell");
        if (e.out_j >= 1 && e.out_cube.level <= lat.k_min())
            throw std::invalid_argument("ElementaryShift: oscillating function on a finest cell");
    }
    blocks_.push_back(std::move(b));
}

void ElementaryShift::normalize() {
    for (ShiftBlock& b : blocks_) {
        for (auto& [key, group] : group_pairs(*lat_, b)) {
            std::vector<const ShiftEntry*> cg(group.begin(), group.end());
            double sup = pair_sup(*lat_, cg);
            if (sup > 1.0) {
                for (ShiftEntry* e : group) e->value /= sup;
                rescaled_ = true;
                rescale_factor_ = std::max(rescale_factor_, sup);
            }
        }
    }
}

NormalizationAudit ElementaryShift::audit(double tol) const {
    NormalizationAudit a;
    a.worst_pair = 0.0;
    for (const ShiftBlock& b : blocks_) {
        std::map<PairKey, std::vector<const ShiftEntry*>> groups;
        for (const ShiftEntry& e : b.entries)
            groups[{e.in_cube.level, lat_->flat_index(e.in_cube), e.out_cube.level,
                    lat_->flat_index(e.out_cube)}]
                .push_back(&e);
        for (auto& [key, group] : groups) {
            double sup = pair_sup(*lat_, group);
            if (sup > a.worst_pair) {
                a.worst_pair = sup;
                a.worst_cube = b.cube;
            }
        }
    }
    a.pass = a.worst_pair <= 1.0 + tol;
    return a;
}

ElementaryShift ElementaryShift::transpose() const {
    ElementaryShift t(lat_, n_, m_, generalized_);
    for (const ShiftBlock& b : blocks_) {
        ShiftBlock tb;
        tb.cube = b.cube;
        tb.entries.reserve(b.entries.size());
        for (const ShiftEntry& e : b.entries)
            tb.entries.push_back({e.out_cube, e.out_j, e.in_cube, e.in_j, e.value});
        t.add_block(std::move(tb));
    }
    t.rescaled_ = rescaled_;
    t.rescale_factor_ = rescale_factor_;
    return t;
}

std::string ElementaryShift::to_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "cube_level,cube,in_level,in_cube,in_j,out_level,out_cube,out_j,value\n";
    for (const ShiftBlock& b : blocks_)
        for (const ShiftEntry& e : b.entries)
            os << b.cube.level << ',' << lat_->flat_index(b.cube) << ',' << e.in_cube.level << ','
               << lat_->flat_index(e.in_cube) << ',' << e.in_j << ',' << e.out_cube.level << ','
               << lat_->flat_index(e.out_cube) << ',' << e.out_j << ',' << e.value << '\n';
    return os.str();
}

ElementaryShift build_shift(const Lattice* lat, int m, int n, const ShiftRule& rule,
                            const std::vector<CubeId>& active, bool generalized) {
    ElementaryShift s(lat, m, n, generalized);
    for (const CubeId& q : active) {
        ShiftBlock b;
        b.cube = q;
        b.entries = rule(*lat, q);
        if (!b.entries.empty()) s.add_block(std::move(b));
    }
    s.normalize();
    return s;
}

std::vector<CubeId> all_active_cubes(const Lattice& lat, int m, int n) {
    int r = std::max(m, n);
    std::vector<CubeId> out;
    for (int l = lat.k_min() + r + 1; l <= 0; ++l)
        for (std::int64_t i = 0; i < lat.cube_count(l); ++i) out.push_back(lat.from_flat(l, i));
    return out;
}

ElementaryShift haar_multiplier(const Lattice* lat,
                                const std::function<double(const CubeId&, int)>& sign) {
    ElementaryShift s(lat, 0, 0, false);
    int bs = (1 << lat->dim()) - 1;
    for (int l = lat->k_min() + 1; l <= 0; ++l)
        for (std::int64_t i = 0; i < lat->cube_count(l); ++i) {
            CubeId q = lat->from_flat(l, i);
            double vol = std::ldexp(1.0, l * lat->dim());
            ShiftBlock b;
            b.cube = q;
            for (int j = 1; j <= bs; ++j) {
                double sg = sign(q, j);
                if (sg != 0.0) b.entries.push_back({q, j, q, j, sg * vol});
            }
            if (!b.entries.empty()) s.add_block(std::move(b));
        }
    s.normalize();
    return s;
}

ElementaryShift petermichl_shift(const Lattice* lat) {
    if (lat->dim() != 1) throw std::invalid_argument("petermichl_shift: requires dimension 1");
    ElementaryShift s(lat, 0, 1, false);
    double c = std::sqrt(0.5);
    for (int l = lat->k_min() + 2; l <= 0; ++l)
        for (std::int64_t i = 0; i < lat->cube_count(l); ++i) {
            CubeId q = lat->from_flat(l, i);
            double vol = std::ldexp(1.0, l);
            auto ch = lat->children(q);  // ch[0] lower, ch[1] upper
            ShiftBlock b;
            b.cube = q;
            b.entries.push_back({q, 1, ch[0], 1, c * vol});
            b.entries.push_back({q, 1, ch[1], 1, -c * vol});
            s.add_block(std::move(b));
        }
    s.normalize();
    return s;
}

Paraproduct paraproduct(const StepFunction& b) {
    const Lattice* lat = b.lattice_ptr();
    int nc = 1 << lat->dim();
    // martingale differences of the symbol and their global sup norm
    double sup = 0.0;
    std::vector<std::vector<double>> avg = level_averages(b);
    for (int l = lat->k_min() + 1; l <= 0; ++l) {
        size_t li = static_cast<size_t>(l - lat->k_min());
        for (std::int64_t i = 0; i < lat->cube_count(l); ++i) {
            CubeId q = lat->from_flat(l, i);
            for (const CubeId& c : lat->children(q)) {
                double d = avg[li - 1][static_cast<size_t>(lat->flat_index(c))] -
                           avg[li][static_cast<size_t>(i)];
                sup = std::max(sup, std::abs(d));
            }
        }
    }
    double scale = std::max(1.0, sup);

    Paraproduct p;
    p.symbol_scale = scale;
    ElementaryShift s(lat, 0, 1, true);
    for (int l = lat->k_min() + 1; l <= 0; ++l) {
        size_t li = static_cast<size_t>(l - lat->k_min());
        double vol = std::ldexp(1.0, l * lat->dim());
        double child_vol = vol / nc;
        for (std::int64_t i = 0; i < lat->cube_count(l); ++i) {
            CubeId q = lat->from_flat(l, i);
            ShiftBlock blk;
            blk.cube = q;
            for (const CubeId& c : lat->children(q)) {
                double hval = (avg[li - 1][static_cast<size_t>(lat->flat_index(c))] -
                               avg[li][static_cast<size_t>(i)]) /
                              scale;
                if (hval != 0.0)
                    blk.entries.push_back(
                        {q, 0, c, 0, std::sqrt(vol) * std::sqrt(child_vol) * hval});
            }
            if (!blk.entries.empty()) s.add_block(std::move(blk));
        }
    }
    s.normalize();
    p.shift = std::move(s);
    return p;
}

StepFunction apply(const ElementaryShift& s, const StepFunction& f) {
    const Lattice& lat = *s.lattice_ptr();
    if (f.lattice_ptr() != s.lattice_ptr())
        throw std::invalid_argument("apply: lattice mismatch");
    int dim = lat.dim();
    int nc = 1 << dim;
    int bs = nc - 1;

    HaarCoefficients cin = analyze(f);
    auto avg = level_averages(f);

    // output coefficients in the e-basis: det per (cube, j>=1), cst per cube
    std::vector<std::vector<double>> det(static_cast<size_t>(lat.levels()));
    std::vector<std::vector<double>> cst(static_cast<size_t>(lat.levels()));
    for (int l = lat.k_min(); l <= 0; ++l) {
        size_t li = static_cast<size_t>(l - lat.k_min());
        cst[li].assign(static_cast<size_t>(lat.cube_count(l)), 0.0);
        if (l > lat.k_min()) det[li].assign(static_cast<size_t>(lat.cube_count(l) * bs), 0.0);
    }

    for (const ShiftBlock& b : s.blocks()) {
        double invvol = std::ldexp(1.0, -b.cube.level * dim);
        for (const ShiftEntry& e : b.entries) {
            double cinv;
            if (e.in_j >= 1) {
                cinv = cin.at(e.in_cube, e.in_j);
            } else {
                double vol = std::ldexp(1.0, e.in_cube.level * dim);
                cinv = std::sqrt(vol) *
                       avg[static_cast<size_t>(e.in_cube.level - lat.k_min())]
                          [static_cast<size_t>(lat.flat_index(e.in_cube))];
            }
            double out = invvol * e.value * cinv;
            size_t lo = static_cast<size_t>(e.out_cube.level - lat.k_min());
            std::int64_t fo = lat.flat_index(e.out_cube);
            if (e.out_j >= 1)
                det[lo][static_cast<size_t>(fo * bs + (e.out_j - 1))] += out;
            else
                cst[lo][static_cast<size_t>(fo)] += out;
        }
    }

    // top-down synthesis of det (Haar parts) and cst (indicator parts)
    std::vector<double> cur(1, cst[static_cast<size_t>(-lat.k_min())][0]);  // e_{root,0} = 1
    for (int l = 0; l > lat.k_min(); --l) {
        size_t li = static_cast<size_t>(l - lat.k_min());
        std::vector<double> down(static_cast<size_t>(lat.cube_count(l - 1)), 0.0);
        double inv_sqrt_vol = std::sqrt(std::ldexp(1.0, -l * dim));
        double child_inv_sqrt = std::sqrt(std::ldexp(1.0, -(l - 1) * dim));
        for (std::int64_t i = 0; i < lat.cube_count(l); ++i) {
            CubeId q = lat.from_flat(l, i);
            auto ch = lat.children(q);
            double base = cur[static_cast<size_t>(i)];
            for (int cc = 0; cc < nc; ++cc) {
                double v = base;
                for (int j = 1; j <= bs; ++j)
                    v += det[li][static_cast<size_t>(i * bs + (j - 1))] * inv_sqrt_vol *
                         haar_sign(j, cc, dim);
                std::int64_t fc = lat.flat_index(ch[static_cast<size_t>(cc)]);
                down[static_cast<size_t>(fc)] =
                    v + cst[li - 1][static_cast<size_t>(fc)] * child_inv_sqrt;
            }
        }
        cur.swap(down);
    }
    return StepFunction(&lat, std::move(cur));
}

StepFunction apply_weighted(const ElementaryShift& s, const Weight& u, const StepFunction& f) {
    return apply(s, pointwise_product(f, u.density()));
}

StepFunction adjoint_apply(const ElementaryShift& s, const Weight& v, const StepFunction& g) {
    return apply(s.transpose(), pointwise_product(g, v.density()));
}

std::vector<std::vector<double>> dense_kernel(const ElementaryShift& s) {
    const Lattice& lat = *s.lattice_ptr();
    size_t n = static_cast<size_t>(lat.total_cells());
    std::vector<std::vector<double>> K(n, std::vector<double>(n, 0.0));
    for (const ShiftBlock& b : s.blocks()) {
        double invvol = std::ldexp(1.0, -b.cube.level * lat.dim());
        for (const ShiftEntry& e : b.entries) {
            auto ein = e_child_values(lat, e.in_cube, e.in_j);
            auto eout = e_child_values(lat, e.out_cube, e.out_j);
            auto in_regions = e.in_cube.level > lat.k_min() ? lat.children(e.in_cube)
                                                           : std::vector<CubeId>{e.in_cube};
            auto out_regions = e.out_cube.level > lat.k_min() ? lat.children(e.out_cube)
                                                              : std::vector<CubeId>{e.out_cube};
            for (size_t ro = 0; ro < out_regions.size(); ++ro) {
                double vo = eout[ro] * invvol * e.value;
                if (vo == 0.0) continue;
                for (std::int64_t x : lat.cell_indices(out_regions[ro]))
                    for (size_t ri = 0; ri < in_regions.size(); ++ri) {
                        double val = vo * ein[ri];
                        for (std::int64_t y : lat.cell_indices(in_regions[ri]))
                            K[static_cast<size_t>(x)][static_cast<size_t>(y)] += val;
                    }
            }
        }
    }
    return K;
}

ElementaryShift restrict_shift(const ElementaryShift& s, const std::vector<CubeId>& subset) {
    ElementaryShift out(s.lattice_ptr(), s.m(), s.n(), s.generalized());
    for (const ShiftBlock& b : s.blocks())
        if (std::find(subset.begin(), subset.end(), b.cube) != subset.end())
            out.add_block(b);
    return out;
}

namespace {

NormReport power_iteration(const std::function<std::vector<double>(const std::vector<double>&)>& M,
                           const std::function<std::vector<double>(const std::vector<double>&)>& Mt,
                           size_t n, double tol, int max_iter, std::uint64_t seed) {
    SplitMix64 g(substream(seed, 0xb0b));
    std::vector<double> v(n);
    double nrm = 0;
    for (double& x : v) {
        x = g.normal();
        nrm += x * x;
    }
    nrm = std::sqrt(nrm);
    for (double& x : v) x /= nrm;

    NormReport rep;
    rep.seed = seed;
    double lambda = 0.0;
    for (int it = 1; it <= max_iter; ++it) {
        std::vector<double> z = Mt(M(v));
        double zn = 0, ip = 0;
        for (size_t i = 0; i < n; ++i) {
            zn += z[i] * z[i];
            ip += z[i] * v[i];
        }
        zn = std::sqrt(zn);
        rep.iterations = it;
        lambda = ip;  // Rayleigh quotient of the PSD composition
        if (zn == 0.0) {
            rep.norm = 0.0;
            rep.residual = 0.0;
            rep.converged = true;
            return rep;
        }
        double res = 0;
        for (size_t i = 0; i < n; ++i) {
            double d = z[i] - lambda * v[i];
            res += d * d;
        }
        res = std::sqrt(res) / zn;
        rep.residual = res;
        for (size_t i = 0; i < n; ++i) v[i] = z[i] / zn;
        if (res <= tol) {
            rep.converged = true;
            rep.norm = std::sqrt(zn);
            return rep;
        }
    }
    rep.converged = false;
    rep.norm = std::sqrt(std::abs(lambda));
    return rep;
}

}  // namespace

NormReport operator_norm(const ElementaryShift& s, const Weight& w, double tol, int max_iter,
                         std::uint64_t seed) {
    const Lattice* lat = s.lattice_ptr();
    size_t n = static_cast<size_t>(lat->total_cells());
    std::vector<double> sq(n), isq(n);
    for (size_t i = 0; i < n; ++i) {
        sq[i] = std::sqrt(w[static_cast<std::int64_t>(i)]);
        isq[i] = 1.0 / sq[i];
    }
    ElementaryShift st = s.transpose();
    auto M = [&](const std::vector<double>& x) {
        StepFunction f(lat, x);
        for (size_t i = 0; i < n; ++i) f[static_cast<std::int64_t>(i)] *= isq[i];
        StepFunction g = apply(s, f);
        std::vector<double> out(n);
        for (size_t i = 0; i < n; ++i) out[i] = g[static_cast<std::int64_t>(i)] * sq[i];
        return out;
    };
    auto Mt = [&](const std::vector<double>& x) {
        StepFunction f(lat, x);
        for (size_t i = 0; i < n; ++i) f[static_cast<std::int64_t>(i)] *= sq[i];
        StepFunction g = apply(st, f);
        std::vector<double> out(n);
        for (size_t i = 0; i < n; ++i) out[i] = g[static_cast<std::int64_t>(i)] * isq[i];
        return out;
    };
    NormReport rep = power_iteration(M, Mt, n, tol, max_iter, seed);
    rep.a2 = a2_constant(w).value;
    return rep;
}

NormReport two_weight_norm(const ElementaryShift& s, const Weight& mu, const Weight& nu,
                           double tol, int max_iter, std::uint64_t seed) {
    const Lattice* lat = s.lattice_ptr();
    size_t n = static_cast<size_t>(lat->total_cells());
    std::vector<double> su(n), sv(n);
    for (size_t i = 0; i < n; ++i) {
        su[i] = std::sqrt(mu[static_cast<std::int64_t>(i)]);
        sv[i] = std::sqrt(nu[static_cast<std::int64_t>(i)]);
    }
    ElementaryShift st = s.transpose();
    auto M = [&](const std::vector<double>& x) {
        StepFunction f(lat, x);
        for (size_t i = 0; i < n; ++i) f[static_cast<std::int64_t>(i)] *= su[i];
        StepFunction g = apply(s, f);
        std::vector<double> out(n);
        for (size_t i = 0; i < n; ++i) out[i] = g[static_cast<std::int64_t>(i)] * sv[i];
        return out;
    };
    auto Mt = [&](const std::vector<double>& x) {
        StepFunction f(lat, x);
        for (size_t i = 0; i < n; ++i) f[static_cast<std::int64_t>(i)] *= sv[i];
        StepFunction g = apply(st, f);
        std::vector<double> out(n);
        for (size_t i = 0; i < n; ++i) out[i] = g[static_cast<std::int64_t>(i)] * su[i];
        return out;
    };
    NormReport rep = power_iteration(M, Mt, n, tol, max_iter, seed);
    rep.a2 = joint_a2(mu, nu).value;
    return rep;
}

std::vector<StepFunction> spike_corpus(const Lattice* lat, int n_random, std::uint64_t seed) {
    std::vector<StepFunction> out;
    std::int64_t n = lat->total_cells();
    double inv_cv = static_cast<double>(n);  // 1 / cell volume
    for (std::int64_t i = 0; i < n; ++i) {
        StepFunction f(lat, 0.0);
        f[i] = inv_cv;  // unit mass spike
        out.push_back(std::move(f));
    }
    for (int t = 0; t < n_random; ++t) {
        SplitMix64 g(substream(seed, static_cast<std::uint64_t>(t), 0x5b1ce));
        StepFunction f(lat, 0.0);
        int k = 2 + static_cast<int>(g.below(7));
        double total = 0;
        std::vector<std::pair<std::int64_t, double>> picks;
        for (int p = 0; p < k; ++p) {
            double mass = 0.05 + g.uniform();
            picks.push_back({static_cast<std::int64_t>(g.below(static_cast<std::uint64_t>(n))),
                             mass});
            total += mass;
        }
        for (auto& [cell, mass] : picks) f[cell] += mass / total * inv_cv;
        out.push_back(std::move(f));
    }
    return out;
}

double weak11_constant(const ElementaryShift& s, const std::vector<StepFunction>& corpus) {
    double cv = std::ldexp(1.0, s.lattice_ptr()->k_min() * s.lattice_ptr()->dim());
    double best = 0.0;
    for (const StepFunction& f : corpus) {
        double l1 = f.l1_norm();
        if (l1 == 0.0) continue;
        StepFunction g = apply(s, f);
        std::vector<double> v(g.values());
        for (double& x : v) x = std::abs(x);
        std::sort(v.begin(), v.end(), std::greater<double>());
        // sup over lambda of lambda |{|g| > lambda}|: approach each value from
        // below, where the superlevel set has k+1 cells
        for (size_t k = 0; k < v.size(); ++k)
            best = std::max(best, v[k] * static_cast<double>(k + 1) * cv / l1);
    }
    return best;
}

TestingReport testing_constants(const ElementaryShift& s, const Weight& u, const Weight& v) {
    const Lattice& lat = *s.lattice_ptr();
    TestingReport rep;
    rep.d = lat.dim();
    rep.r = s.complexity();
    rep.joint_a2 = joint_a2(u, v).value;

    for (int l = lat.k_min(); l <= 0; ++l)
        for (std::int64_t i = 0; i < lat.cube_count(l); ++i) {
            CubeId q = lat.from_flat(l, i);
            StepFunction ind(&lat, 0.0);
            for (std::int64_t c : lat.cell_indices(q)) ind[c] = 1.0;
            double mq = u.density().integral(q);
            double nq = v.density().integral(q);

            // direct: mu(Q)^{-1} int_Q |S_mu 1_Q|^2 dnu
            if (mq > 0.0) {
                StepFunction g = apply_weighted(s, u, ind);
                double acc = 0;
                for (std::int64_t c : lat.cell_indices(q)) acc += g[c] * g[c] * v[c];
                acc *= std::ldexp(1.0, lat.k_min() * lat.dim());
                double ratio = acc / mq;
                if (ratio > rep.worst_direct_ratio) {
                    rep.worst_direct_ratio = ratio;
                    rep.argmax_direct = q;
                }
            }
            // adjoint: nu(Q)^{-1} int_Q |S*_nu 1_Q|^2 dmu
            if (nq > 0.0) {
                StepFunction g = adjoint_apply(s, v, ind);
                double acc = 0;
                for (std::int64_t c : lat.cell_indices(q)) acc += g[c] * g[c] * u[c];
                acc *= std::ldexp(1.0, lat.k_min() * lat.dim());
                double ratio = acc / nq;
                if (ratio > rep.worst_adjoint_ratio) {
                    rep.worst_adjoint_ratio = ratio;
                    rep.argmax_adjoint = q;
                }
            }
        }
    rep.B = std::max(rep.worst_direct_ratio, rep.worst_adjoint_ratio);
    rep.measured_norm = two_weight_norm(s, u, v).norm;
    double r = rep.r;
    rep.predicted_bracket = std::pow(2.0, rep.d / 2.0) * (r + 1) *
                                (std::sqrt(rep.B) + std::sqrt(rep.joint_a2)) +
                            r * r * std::sqrt(rep.joint_a2);
    return rep;
}

PredictedBounds predicted_bounds(double B, double joint_a2, double B2, double a2, int r,
                                 int m, int d) {
    PredictedBounds p;
    double rr = r;
    p.two_weight_bracket =
        std::pow(2.0, d / 2.0) * (rr + 1) * (std::sqrt(B) + std::sqrt(joint_a2)) +
        rr * rr * std::sqrt(joint_a2);
    p.one_weight_bracket = std::pow(2.0, 1.5 * d) * (rr + 1) * (rr + 1) * (B2 * B2 + 1.0) * a2;
    p.B1 = std::ldexp(B2 * B2, d + 2) + 5.0;
    p.weak_bound = std::ldexp(B2 * B2, d + 2) + 1.0 + 4.0 * m;
    return p;
}

}  // namespace dyadlab
