#include "dyadlab/represent.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "dyadlab/haar.hpp"
#include "dyadlab/rng.hpp"

namespace dyadlab {

namespace {

// resample the shift bits at levels >= r_level (coarse scales), leaving the
// finer bits -- and hence the positions of cubes at levels <= r_level -- fixed
Lattice resample_above(const Lattice& base, int r_level, SplitMix64& g) {
    Lattice lat = base;
    for (int j = r_level; j < 0; ++j)
        for (int axis = 0; axis < lat.dim(); ++axis)
            lat.set_shift_bit(j, axis, static_cast<int>(g.bit()));
    return lat;
}

MonteCarloEstimate summarize(const std::vector<double>& vals) {
    MonteCarloEstimate e;
    e.samples = static_cast<std::int64_t>(vals.size());
    if (vals.empty()) return e;
    double s = 0;
    for (double v : vals) s += v;
    e.mean = s / static_cast<double>(vals.size());
    double ss = 0;
    for (double v : vals) ss += (v - e.mean) * (v - e.mean);
    if (vals.size() > 1)
        e.std_error = std::sqrt(ss / static_cast<double>(vals.size() - 1) /
                                static_cast<double>(vals.size()));
    return e;
}

// per-cell averages over the cubes of one level
StepFunction level_average(const Lattice& lat, const StepFunction& f, int level) {
    StepFunction out(&lat, 0.0);
    for (std::int64_t i = 0; i < lat.cube_count(level); ++i) {
        CubeId q = lat.from_flat(level, i);
        double a = average(f, q);
        for (std::int64_t c : lat.cell_indices(q)) out[c] = a;
    }
    return out;
}

// precomputed quadrature context for a 1D kernel: cell-midpoint values with
// the diagonal cell excluded, plus the row/column integrals T1 and T*1
struct KernelContext {
    const Lattice* lat = nullptr;
    double cell = 0.0;
    std::vector<std::vector<double>> K;  // K[cx][cy]
    StepFunction t1;                     // T1(x)
    StepFunction t1adj;                  // T*1(y)
    std::vector<StepFunction> e_t1;      // E_l T1 per level, index l - k_min
    std::vector<StepFunction> e_t1adj;
};

KernelContext make_context(const Kernel& K, const Lattice& lat) {
    if (lat.dim() != 1) throw std::invalid_argument("kernel quadrature requires dim 1");
    KernelContext ctx;
    ctx.lat = &lat;
    std::int64_t n = lat.total_cells();
    ctx.cell = 1.0 / static_cast<double>(n);
    ctx.K.assign(static_cast<size_t>(n), std::vector<double>(static_cast<size_t>(n), 0.0));
    for (std::int64_t cx = 0; cx < n; ++cx) {
        double x = (static_cast<double>(cx) + 0.5) * ctx.cell;
        for (std::int64_t cy = 0; cy < n; ++cy) {
            if (cx == cy) continue;  // one-cell diagonal cutoff
            double y = (static_cast<double>(cy) + 0.5) * ctx.cell;
            ctx.K[static_cast<size_t>(cx)][static_cast<size_t>(cy)] = K(x, y);
        }
    }
    ctx.t1 = StepFunction(&lat, 0.0);
    ctx.t1adj = StepFunction(&lat, 0.0);
    for (std::int64_t cx = 0; cx < n; ++cx)
        for (std::int64_t cy = 0; cy < n; ++cy) {
            double v = ctx.K[static_cast<size_t>(cx)][static_cast<size_t>(cy)] * ctx.cell;
            ctx.t1[cx] += v;
            ctx.t1adj[cy] += v;
        }
    for (int l = lat.k_min(); l <= 0; ++l) {
        ctx.e_t1.push_back(level_average(lat, ctx.t1, l));
        ctx.e_t1adj.push_back(level_average(lat, ctx.t1adj, l));
    }
    return ctx;
}

// normalized (generalized) Haar function: h^j_Q for j >= 1, |Q|^{-1/2} 1_Q
// for j = 0
StepFunction basis_function(const Lattice& lat, const CubeId& q, int j) {
    if (j >= 1) return standard_haar(&lat, q, j);
    StepFunction h(&lat, 0.0);
    double v = 1.0 / std::sqrt(lat.volume(q));
    for (std::int64_t c : lat.cell_indices(q)) h[c] = v;
    return h;
}

// P_T f = sum over S of <f>_S Delta_S T1, evaluated pointwise as
// sum over levels l of (E_l f) (E_{l-1} - E_l) T1
StepFunction paraproduct_apply(const KernelContext& ctx, const StepFunction& f, bool adjoint) {
    const Lattice& lat = *ctx.lat;
    const std::vector<StepFunction>& e_sym = adjoint ? ctx.e_t1adj : ctx.e_t1;
    StepFunction out(&lat, 0.0);
    for (int l = lat.k_min() + 1; l <= 0; ++l) {
        StepFunction ef = level_average(lat, f, l);
        size_t li = static_cast<size_t>(l - lat.k_min());
        for (std::int64_t c = 0; c < out.size(); ++c)
            out[c] += ef[c] * (e_sym[li - 1][c] - e_sym[li][c]);
    }
    return out;
}

// <T~ h_Q, h_R> = quadrature of <T h_Q, h_R> minus the paraproduct terms
// <P_T h_Q, h_R> and <h_Q, P_{T*} h_R>
double tilde_element(const KernelContext& ctx, const CZPair& p) {
    const Lattice& lat = *ctx.lat;
    StepFunction hq = basis_function(lat, p.q, p.jq);
    StepFunction hr = basis_function(lat, p.r, p.jr);
    double raw = 0;
    for (std::int64_t cx : lat.cell_indices(p.r))
        for (std::int64_t cy : lat.cell_indices(p.q))
            raw += hr[cx] * ctx.K[static_cast<size_t>(cx)][static_cast<size_t>(cy)] * hq[cy];
    raw *= ctx.cell * ctx.cell;
    raw -= paraproduct_apply(ctx, hq, false).inner(hr);
    raw -= paraproduct_apply(ctx, hr, true).inner(hq);
    return raw;
}

}  // namespace

int s0_minimum(const GoodnessParams& p) {
    double g = p.gamma;
    double lo = 2.0 / g + static_cast<double>(p.r0) * (1.0 - g) / g;
    return static_cast<int>(std::ceil(lo - 1e-12));
}

MonteCarloEstimate pi_good_given_R(const Lattice& base, const CubeId& q, int r_level,
                                   const GoodnessParams& params, std::int64_t n_samples,
                                   std::uint64_t seed) {
    if (q.level > r_level) throw std::invalid_argument("pi_good_given_R: q coarser than R");
    if (!base.good_up_to_level(q, r_level, params))
        return MonteCarloEstimate{0.0, 0.0, n_samples};  // deterministic obstruction
    std::int64_t hits = 0;
    for (std::int64_t s = 0; s < n_samples; ++s) {
        SplitMix64 g(substream(seed, static_cast<std::uint64_t>(s), 11));
        Lattice lat = resample_above(base, r_level, g);
        if (!lat.is_bad(q, params)) ++hits;
    }
    MonteCarloEstimate e;
    e.samples = n_samples;
    e.mean = static_cast<double>(hits) / static_cast<double>(n_samples);
    e.std_error = std::sqrt(std::max(0.0, e.mean * (1.0 - e.mean) /
                                              static_cast<double>(n_samples)));
    return e;
}

MonteCarloEstimate rho_qr(const Lattice& base, const CubeId& q, const CubeId& r,
                          double alpha, const GoodnessParams& params,
                          std::int64_t n_samples, std::uint64_t seed) {
    if (q.level > r.level) throw std::invalid_argument("rho_qr: requires l(Q) <= l(R)");
    double d_alpha = static_cast<double>(base.dim()) + alpha;
    double dist = std::pow(base.long_distance(q, r), d_alpha);
    std::vector<double> vals;
    vals.reserve(static_cast<size_t>(n_samples));
    for (std::int64_t s = 0; s < n_samples; ++s) {
        SplitMix64 g(substream(seed, static_cast<std::uint64_t>(s), 11));
        Lattice lat = resample_above(base, r.level, g);
        double v = 0;
        if (!lat.is_bad(q, params)) {
            CubeId m = q;
            while (true) {
                if (m.level >= r.level && lat.contains(m, r))
                    v += dist / std::pow(lat.side_length(m.level), d_alpha);
                if (m.level == 0) break;
                m = lat.parent(m);
            }
        }
        vals.push_back(v);
    }
    return summarize(vals);
}

std::vector<CZMatrixElement> cz_coefficients(const Kernel& K, const Lattice& lat,
                                             const std::vector<CZPair>& pairs) {
    KernelContext ctx = make_context(K, lat);
    std::vector<CZMatrixElement> out;
    out.reserve(pairs.size());
    for (const CZPair& p : pairs) {
        CZMatrixElement el;
        el.pair = p;
        bool nested = lat.contains(p.q, p.r) || lat.contains(p.r, p.q);
        el.excluded = !nested && lat.distance(p.q, p.r) < ctx.cell;
        el.value = tilde_element(ctx, p);
        out.push_back(el);
    }
    return out;
}

StepFunction kernel_row_integrals(const Kernel& K, const Lattice& lat) {
    return make_context(K, lat).t1;
}

StepFunction kernel_column_integrals(const Kernel& K, const Lattice& lat) {
    return make_context(K, lat).t1adj;
}

std::string DecayReport::to_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "q_level,q_index,q_j,r_level,r_index,r_j,coefficient,bound,ratio,long_distance\n";
    for (const DecayEntry& e : entries)
        os << e.pair.q.level << ',' << e.pair.q.index[0] << ',' << e.pair.jq << ','
           << e.pair.r.level << ',' << e.pair.r.index[0] << ',' << e.pair.jr << ','
           << e.coefficient << ',' << e.bound << ',' << e.ratio << ',' << e.long_dist
           << '\n';
    return os.str();
}

DecayReport coefficient_decay_check(const Lattice& lat,
                                    const std::vector<CZMatrixElement>& coeffs,
                                    double alpha, const GoodnessParams& params) {
    double d_alpha = static_cast<double>(lat.dim()) + alpha;
    DecayReport rep;
    for (const CZMatrixElement& el : coeffs) {
        if (el.excluded || lat.is_bad(el.pair.q, params)) continue;
        DecayEntry e;
        e.pair = el.pair;
        e.coefficient = std::abs(el.value);
        e.long_dist = lat.long_distance(el.pair.q, el.pair.r);
        double lq = lat.side_length(el.pair.q.level);
        double lr = lat.side_length(el.pair.r.level);
        e.bound = std::pow(lq, alpha / 2.0) * std::pow(lr, alpha / 2.0) *
                  std::pow(e.long_dist, -d_alpha) * std::sqrt(lat.volume(el.pair.q)) *
                  std::sqrt(lat.volume(el.pair.r));
        e.ratio = e.coefficient / e.bound;
        rep.max_ratio = std::max(rep.max_ratio, e.ratio);
        rep.entries.push_back(e);
    }
    if (rep.entries.empty())
        throw std::invalid_argument("coefficient_decay_check: no usable good-cube pairs");

    // regression of log coefficient against log D restricted to the
    // best-populated (level Q, level R) group, where the bound predicts a
    // pure power law in D
    std::map<std::pair<int, int>, std::vector<const DecayEntry*>> groups;
    for (const DecayEntry& e : rep.entries)
        if (e.coefficient > 1e-300)
            groups[{e.pair.q.level, e.pair.r.level}].push_back(&e);
    const std::vector<const DecayEntry*>* best = nullptr;
    for (auto& [lv, g] : groups) {
        std::set<double> ds;
        for (const DecayEntry* e : g) ds.insert(e->long_dist);
        if (ds.size() < 3) continue;  // need distance spread to fit a slope
        if (!best || g.size() > best->size()) {
            best = &g;
            rep.fit_level_q = lv.first;
            rep.fit_level_r = lv.second;
        }
    }
    if (best) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        double n = static_cast<double>(best->size());
        for (const DecayEntry* e : *best) {
            double x = std::log2(e->long_dist);
            double y = std::log2(e->coefficient);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        rep.fitted_exponent = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        rep.fit_points = static_cast<std::int64_t>(best->size());
    }
    return rep;
}

ExtractedShift extract_shift(const Kernel& K, const Lattice& lat, int m, int n,
                             double alpha, double fitted_C,
                             const GoodnessParams& params) {
    if (fitted_C <= 0) throw std::invalid_argument("extract_shift: fitted_C must be positive");
    KernelContext ctx = make_context(K, lat);
    double d_alpha = static_cast<double>(lat.dim()) + alpha;
    double depth_factor = std::pow(2.0, static_cast<double>(m + n) * alpha / 2.0) / fitted_C;
    int min_level = lat.k_min() + std::max(m, n) + 1;  // both depths need Haar children
    ElementaryShift s(&lat, m, n, false);
    std::int64_t pairs = 0;
    for (int lv = min_level; lv <= 0; ++lv) {
        for (std::int64_t i = 0; i < lat.cube_count(lv); ++i) {
            CubeId big = lat.from_flat(lv, i);
            double scale = lat.volume(big) * depth_factor /
                           std::pow(lat.side_length(lv), d_alpha);
            ShiftBlock blk;
            blk.cube = big;
            for (const CubeId& q : lat.descendants(big, m)) {
                if (lat.is_bad(q, params)) continue;
                for (const CubeId& r : lat.descendants(big, n)) {
                    double c = tilde_element(ctx, CZPair{q, r, 1, 1});
                    if (c == 0.0) continue;
                    ShiftEntry e;
                    e.in_cube = q;
                    e.in_j = 1;
                    e.out_cube = r;
                    e.out_j = 1;
                    e.value = scale * std::pow(lat.long_distance(q, r), d_alpha) * c;
                    blk.entries.push_back(e);
                    ++pairs;
                }
            }
            if (!blk.entries.empty()) s.add_block(std::move(blk));
        }
    }
    ExtractedShift out{std::move(s), {}, pairs};
    out.audit = out.shift.audit();
    return out;
}

ShiftEnsemble sample_shift_ensemble(const Kernel& K, int k_min,
                                    const std::vector<std::pair<int, int>>& depths,
                                    double alpha, double fitted_C,
                                    std::int64_t n_lattices, std::uint64_t seed,
                                    const GoodnessParams& params) {
    ShiftEnsemble ens;
    ens.alpha = alpha;
    for (std::int64_t s = 0; s < n_lattices; ++s) {
        std::uint64_t lat_seed = substream(seed, static_cast<std::uint64_t>(s), 13);
        auto lat = std::make_unique<Lattice>(Lattice::sampled(1, k_min, lat_seed));
        for (const auto& [m, n] : depths) {
            ExtractedShift ex = extract_shift(K, *lat, m, n, alpha, fitted_C, params);
            ShiftSample sample;
            sample.seed = lat_seed;
            sample.m = m;
            sample.n = n;
            sample.weight = std::pow(2.0, -static_cast<double>(m + n) * alpha / 2.0);
            sample.shift = std::move(ex.shift);
            sample.audit = ex.audit;
            sample.lattice = nullptr;  // filled after all shifts on this lattice exist
            ens.samples.push_back(std::move(sample));
        }
        // hand the lattice to the last sample that references it; earlier
        // samples on the same lattice borrow the pointer
        ens.samples.back().lattice = std::move(lat);
    }
    return ens;
}

std::string AveragedKernel::to_csv() const {
    std::ostringstream os;
    os.precision(17);
    for (const auto& row : kernel) {
        for (size_t j = 0; j < row.size(); ++j) os << (j ? "," : "") << row[j];
        os << '\n';
    }
    return os.str();
}

AveragedKernel average_kernel(int dim, int k_min, const ShiftFamily& family,
                              std::int64_t n_samples, std::uint64_t seed,
                              double alpha) {
    if (n_samples <= 0) throw std::invalid_argument("average_kernel: need samples");
    AveragedKernel avg;
    avg.dim = dim;
    avg.alpha = alpha;
    avg.samples = n_samples;
    for (std::int64_t s = 0; s < n_samples; ++s) {
        Lattice lat = Lattice::sampled(dim, k_min,
                                       substream(seed, static_cast<std::uint64_t>(s), 7));
        ElementaryShift sh = family(&lat);
        std::vector<std::vector<double>> k = dense_kernel(sh);
        if (avg.kernel.empty())
            avg.kernel.assign(k.size(), std::vector<double>(k[0].size(), 0.0));
        for (size_t i = 0; i < k.size(); ++i)
            for (size_t j = 0; j < k[i].size(); ++j) avg.kernel[i][j] += k[i][j];
    }
    double inv = 1.0 / static_cast<double>(n_samples);
    for (auto& row : avg.kernel)
        for (double& v : row) v *= inv;
    return avg;
}

}  // namespace dyadlab
