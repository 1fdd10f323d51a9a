#include "dyadlab/decomp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dyadlab/haar.hpp"

namespace dyadlab {

CubeField::CubeField(const Lattice* lat, double fill) : lat_(lat) {
    levels_.resize(static_cast<size_t>(lat->levels()));
    for (int l = lat->k_min(); l <= 0; ++l)
        levels_[static_cast<size_t>(l - lat->k_min())]
            .assign(static_cast<size_t>(lat->cube_count(l)), fill);
}

double& CubeField::at(const CubeId& q) {
    return levels_[static_cast<size_t>(q.level - lat_->k_min())]
                  [static_cast<size_t>(lat_->flat_index(q))];
}

double CubeField::at(const CubeId& q) const {
    return const_cast<CubeField*>(this)->at(q);
}

CZDecomposition cz_decompose(const StepFunction& f, double lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("cz_decompose: lambda must be positive");
    const Lattice& lat = f.lattice();
    CZDecomposition out;
    out.lambda = lambda;

    StepFunction absf = f;
    for (std::int64_t i = 0; i < absf.size(); ++i) absf[i] = std::abs(absf[i]);

    // top-down: select a cube when its |f|-average first exceeds lambda
    std::vector<CubeId> frontier{CubeId{0, {0, 0}}};
    while (!frontier.empty()) {
        std::vector<CubeId> next;
        for (const CubeId& q : frontier) {
            if (average(absf, q) > lambda) {
                out.cubes.push_back(q);
            } else if (q.level > lat.k_min()) {
                for (const CubeId& c : lat.children(q)) next.push_back(c);
            }
        }
        frontier.swap(next);
    }

    out.g = f;
    for (const CubeId& q : out.cubes) {
        double avg = average(f, q);
        StepFunction b(&lat, 0.0);
        for (std::int64_t c : lat.cell_indices(q)) {
            b[c] = f[c] - avg;
            out.g[c] = avg;
        }
        out.bad_parts.push_back(std::move(b));
    }
    return out;
}

std::vector<std::vector<int>> slice_lattice(const Lattice& lat, int r) {
    if (r < 0) throw std::invalid_argument("slice_lattice: r must be nonnegative");
    std::vector<std::vector<int>> families(static_cast<size_t>(r + 1));
    for (int l = 0; l >= lat.k_min(); --l)
        families[static_cast<size_t>((-l) % (r + 1))].push_back(l);
    return families;
}

std::map<int, std::vector<CubeId>> density_classes(const Weight& w) {
    const Lattice& lat = w.lattice();
    Weight winv = w.reciprocal();
    std::map<int, std::vector<CubeId>> classes;
    for (int l = lat.k_min(); l <= 0; ++l) {
        double vol = std::ldexp(1.0, l * lat.dim());
        for (std::int64_t i = 0; i < lat.cube_count(l); ++i) {
            CubeId q = lat.from_flat(l, i);
            double prod = (w.measure(q) / vol) * (winv.measure(q) / vol);
            int k = static_cast<int>(std::floor(std::log2(prod)));
            if (k < 0) k = 0;  // product >= 1 up to rounding
            classes[k].push_back(q);
        }
    }
    return classes;
}

StoppingForest stopping_forest(const CubeId& q0, const Weight& w,
                               const std::vector<CubeId>& ambient) {
    const Lattice& lat = w.lattice();
    StoppingForest forest;
    forest.root = q0;
    forest.generations.push_back({q0});

    auto density = [&](const CubeId& q) { return w.measure(q) / lat.volume(q); };

    // ambient cubes sorted coarse-to-fine so maximality is a linear scan
    std::vector<CubeId> sorted = ambient;
    std::sort(sorted.begin(), sorted.end(),
              [](const CubeId& a, const CubeId& b) { return a.level > b.level; });

    std::vector<CubeId> current{q0};
    while (!current.empty()) {
        std::vector<CubeId> next;
        for (const CubeId& parent : current) {
            double thresh = 4.0 * density(parent);
            std::vector<CubeId> selected;
            for (const CubeId& cand : sorted) {
                if (cand.level >= parent.level || !lat.contains(parent, cand)) continue;
                if (density(cand) <= thresh) continue;
                bool covered = false;
                for (const CubeId& s : selected)
                    if (lat.contains(s, cand)) { covered = true; break; }
                if (!covered) selected.push_back(cand);
            }
            for (const CubeId& s : selected) next.push_back(s);
        }
        if (next.empty()) break;
        forest.generations.push_back(next);
        current.swap(next);
    }

    // attach each ambient cube to its deepest stopping ancestor
    std::vector<CubeId> stopping;
    for (const auto& gen : forest.generations)
        for (const CubeId& q : gen) stopping.push_back(q);
    std::sort(stopping.begin(), stopping.end(),
              [](const CubeId& a, const CubeId& b) { return a.level < b.level; });  // fine first
    for (const CubeId& q : ambient) {
        if (!(q == q0) && !lat.contains(q0, q)) continue;
        for (const CubeId& s : stopping)
            if (s.level >= q.level && lat.contains(s, q)) {
                forest.partition[s].push_back(q);
                break;
            }
    }
    return forest;
}

PackingReport packing_report(const StoppingForest& forest, const Weight& w) {
    const Lattice& lat = w.lattice();
    double a2 = a2_constant(w).value;
    std::vector<CubeId> stopping;
    for (const auto& gen : forest.generations)
        for (const CubeId& q : gen) stopping.push_back(q);

    PackingReport rep;
    for (const CubeId& r : stopping) {
        double vol_r = lat.volume(r);
        double vol_sum = 0.0, w_sum = 0.0;
        StepFunction overlap(&lat, 0.0);
        for (const CubeId& q : stopping) {
            if (!lat.contains(r, q) || q.level > r.level) continue;
            vol_sum += lat.volume(q);
            w_sum += w.measure(q);
            for (std::int64_t c : lat.cell_indices(q)) overlap[c] += 1.0;
        }
        double lr = vol_sum / vol_r;
        double l2 = overlap.l2_norm() / std::sqrt(vol_r);
        double wr = w_sum / (a2 * w.measure(r));
        if (lr > rep.lebesgue_ratio) { rep.lebesgue_ratio = lr; rep.argmax_lebesgue = r; }
        if (l2 > rep.l2_overlap_ratio) { rep.l2_overlap_ratio = l2; rep.argmax_l2 = r; }
        if (wr > rep.weighted_ratio) { rep.weighted_ratio = wr; rep.argmax_weighted = r; }
    }
    return rep;
}

CarlesonResult carleson_embedding_ratio(const CubeField& a, const Weight& mu,
                                        const StepFunction& f) {
    const Lattice& lat = mu.lattice();
    CarlesonResult res;

    // bottom-up partial sums over subtrees: the a-mass (Carleson condition),
    // the mu-mass, and the f mu integral (for weighted averages)
    double cellvol = f.cell_volume();
    std::vector<std::vector<double>> subtree(static_cast<size_t>(lat.levels()));
    std::vector<std::vector<double>> mumass(static_cast<size_t>(lat.levels()));
    std::vector<std::vector<double>> fmu(static_cast<size_t>(lat.levels()));
    double num = 0.0;
    for (int l = lat.k_min(); l <= 0; ++l) {
        size_t li = static_cast<size_t>(l - lat.k_min());
        std::int64_t count = lat.cube_count(l);
        subtree[li].assign(static_cast<size_t>(count), 0.0);
        mumass[li].assign(static_cast<size_t>(count), 0.0);
        fmu[li].assign(static_cast<size_t>(count), 0.0);
        for (std::int64_t i = 0; i < count; ++i) {
            CubeId q = lat.from_flat(l, i);
            double s = a.at(q), m = 0.0, fm = 0.0;
            if (l > lat.k_min()) {
                for (const CubeId& c : lat.children(q)) {
                    size_t ci = static_cast<size_t>(lat.flat_index(c));
                    s += subtree[li - 1][ci];
                    m += mumass[li - 1][ci];
                    fm += fmu[li - 1][ci];
                }
            } else {
                for (std::int64_t cell : lat.cell_indices(q)) {
                    m += mu[cell] * cellvol;
                    fm += f[cell] * mu[cell] * cellvol;
                }
            }
            subtree[li][static_cast<size_t>(i)] = s;
            mumass[li][static_cast<size_t>(i)] = m;
            fmu[li][static_cast<size_t>(i)] = fm;
            if (s > m * (1.0 + 1e-12) + 1e-15) {
                res.violation = CarlesonViolation{q, s, m};
                return res;
            }
            double fq = m > 0.0 ? fm / m : 0.0;
            num += a.at(q) * fq * fq;
        }
    }
    double den = pointwise_product(f, mu.density()).inner(f);
    res.ratio = den > 0.0 ? num / den : 0.0;
    return res;
}

StepFunction jn_maximal(const ElementaryShift& s, const std::vector<CubeId>& P,
                        const Weight& w) {
    const Lattice& lat = *s.lattice_ptr();
    StepFunction fstar(&lat, 0.0);
    if (P.empty()) return fstar;

    // Haar coefficients of w once; block pieces are cheap linear combinations
    HaarCoefficients cw = analyze(w.density());
    std::vector<std::vector<double>> avg(static_cast<size_t>(lat.levels()));
    {
        // per-level averages for the j = 0 analysis coefficients
        StepFunction wd = w.density();
        avg[0].assign(wd.values().begin(), wd.values().end());
        for (int l = lat.k_min() + 1; l <= 0; ++l) {
            size_t li = static_cast<size_t>(l - lat.k_min());
            avg[li].assign(static_cast<size_t>(lat.cube_count(l)), 0.0);
            int nc = 1 << lat.dim();
            for (std::int64_t i = 0; i < lat.cube_count(l); ++i) {
                double sum = 0;
                for (const CubeId& c : lat.children(lat.from_flat(l, i)))
                    sum += avg[li - 1][static_cast<size_t>(lat.flat_index(c))];
                avg[li][static_cast<size_t>(i)] = sum / nc;
            }
        }
    }

    std::map<std::pair<int, std::int64_t>, const ShiftBlock*> block_of;
    for (const ShiftBlock& b : s.blocks())
        block_of[{b.cube.level, lat.flat_index(b.cube)}] = &b;

    std::map<int, std::vector<const ShiftBlock*>> by_level;
    for (const CubeId& q : P) {
        auto it = block_of.find({q.level, lat.flat_index(q)});
        if (it != block_of.end()) by_level[q.level].push_back(it->second);
    }

    StepFunction running(&lat, 0.0);
    int dim = lat.dim();
    for (int l = 0; l > lat.k_min(); --l) {
        for (const ShiftBlock* b : by_level[l]) {
            double invvol = std::ldexp(1.0, -b->cube.level * dim);
            for (const ShiftEntry& e : b->entries) {
                double cin;
                if (e.in_j >= 1) {
                    cin = cw.at(e.in_cube, e.in_j);
                } else {
                    double vol = std::ldexp(1.0, e.in_cube.level * dim);
                    cin = std::sqrt(vol) * avg[static_cast<size_t>(e.in_cube.level - lat.k_min())]
                                              [static_cast<size_t>(lat.flat_index(e.in_cube))];
                }
                double coeff = invvol * e.value * cin;
                double inv_sqrt = std::sqrt(std::ldexp(1.0, -e.out_cube.level * dim));
                if (e.out_cube.level > lat.k_min()) {
                    auto ch = lat.children(e.out_cube);
                    for (size_t cc = 0; cc < ch.size(); ++cc) {
                        double v = coeff * inv_sqrt;
                        // sign per child for oscillating parts
                        double sgn = 1.0;
                        if (e.out_j >= 1)
                            for (int axis = 0; axis < dim; ++axis)
                                if ((e.out_j >> axis) & 1)
                                    sgn *= ((static_cast<int>(cc) >> axis) & 1) ? 1.0 : -1.0;
                        for (std::int64_t cell : lat.cell_indices(ch[cc]))
                            running[cell] += v * sgn;
                    }
                } else {
                    for (std::int64_t cell : lat.cell_indices(e.out_cube))
                        running[cell] += coeff * inv_sqrt;
                }
            }
        }
        // partial sums seen by cubes strictly below level l
        for (std::int64_t i = 0; i < fstar.size(); ++i)
            fstar[i] = std::max(fstar[i], std::abs(running[i]));
    }
    return fstar;
}

JNCurve jn_distribution(const StepFunction& fstar, const Weight& w, const CubeId& R,
                        double B1, int t_max) {
    const Lattice& lat = fstar.lattice();
    Weight winv = w.reciprocal();
    double dens = w.measure(R) / lat.volume(R);
    double cv = std::ldexp(1.0, lat.k_min() * lat.dim());
    auto cells = lat.cell_indices(R);

    JNCurve curve;
    for (int ti = 1; ti <= t_max; ++ti) {
        double t = ti;
        double leb = 0.0, wim = 0.0;
        for (std::int64_t c : cells) {
            if (fstar[c] > 16.0 * t * dens) leb += cv;
            if (fstar[c] > 20.0 * t * dens) wim += winv[c] * cv;
        }
        double lb = 2.0 * std::sqrt(2.0) * std::pow(2.0, -t / (2.0 * B1)) * lat.volume(R);
        double wb = 24.0 * std::pow(2.0, -t / (2.0 * B1)) * winv.density().integral(R);
        curve.t.push_back(t);
        curve.lebesgue_measure.push_back(leb);
        curve.lebesgue_bound.push_back(lb);
        curve.winv_measure.push_back(wim);
        curve.winv_bound.push_back(wb);
        if (leb > lb + 1e-12 || wim > wb + 1e-12) curve.all_pass = false;
    }

    // OLS of log2(measure) against t over strictly positive entries
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (size_t i = 0; i < curve.t.size(); ++i)
        if (curve.lebesgue_measure[i] > 0.0) {
            double x = curve.t[i];
            double y = std::log2(curve.lebesgue_measure[i]);
            sx += x; sy += y; sxx += x * x; sxy += x * y;
            ++n;
        }
    if (n >= 2 && n * sxx - sx * sx > 0)
        curve.fitted_tail_slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return curve;
}

int p_alpha_class(const Weight& w, const CubeId& q, const CubeId& r) {
    const Lattice& lat = w.lattice();
    double rho = (w.measure(q) / lat.volume(q)) / (w.measure(r) / lat.volume(r));
    int alpha = 0;
    while (std::pow(4.0, -alpha) >= rho) {
        ++alpha;
        if (alpha > 200) break;
    }
    return alpha;
}

}  // namespace dyadlab
