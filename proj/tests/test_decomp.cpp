#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "dyadlab/decomp.hpp"
#include "dyadlab/lattice.hpp"
#include "dyadlab/rng.hpp"
#include "dyadlab/shift.hpp"
#include "dyadlab/signal.hpp"

using namespace dyadlab;

namespace {

StepFunction random_function(const Lattice* lat, std::uint64_t seed) {
    SplitMix64 g(seed);
    StepFunction f(lat, 0.0);
    for (std::int64_t i = 0; i < f.size(); ++i) f[i] = g.normal();
    return f;
}

Weight random_weight(const Lattice* lat, std::uint64_t seed) {
    SplitMix64 g(seed);
    StepFunction f(lat, 0.0);
    for (std::int64_t i = 0; i < f.size(); ++i) f[i] = 0.1 + 2.0 * g.uniform();
    return Weight(std::move(f));
}

std::vector<CubeId> all_cubes(const Lattice& lat) {
    std::vector<CubeId> out;
    for (int l = lat.k_min(); l <= 0; ++l)
        for (std::int64_t i = 0; i < lat.cube_count(l); ++i) out.push_back(lat.from_flat(l, i));
    return out;
}

void check_cz_properties(const StepFunction& f, const CZDecomposition& dec) {
    const Lattice& lat = f.lattice();
    int d = lat.dim();
    // reconstruction
    StepFunction rec = dec.g;
    for (const StepFunction& b : dec.bad_parts) rec = rec + b;
    for (std::int64_t i = 0; i < f.size(); ++i) CHECK(std::abs(rec[i] - f[i]) <= 1e-12);
    // (i) good part bounds
    CHECK(dec.g.l1_norm() <= f.l1_norm() + 1e-12);
    CHECK(dec.g.sup_norm() <= std::ldexp(dec.lambda, d) + 1e-12);
    // (ii) bad parts
    double total_vol = 0;
    for (size_t k = 0; k < dec.cubes.size(); ++k) {
        const CubeId& q = dec.cubes[k];
        const StepFunction& b = dec.bad_parts[k];
        CHECK(std::abs(b.integral()) <= 1e-12);
        CHECK(b.l1_norm() <= 2.0 * f.restricted(q).l1_norm() + 1e-12);
        total_vol += lat.volume(q);
    }
    // (iii) total measure of selected cubes
    CHECK(total_vol <= f.l1_norm() / dec.lambda + 1e-12);
    // selected cubes pairwise disjoint
    for (size_t a = 0; a < dec.cubes.size(); ++a)
        for (size_t b2 = a + 1; b2 < dec.cubes.size(); ++b2) {
            CHECK_FALSE(lat.contains(dec.cubes[a], dec.cubes[b2]));
            CHECK_FALSE(lat.contains(dec.cubes[b2], dec.cubes[a]));
        }
}

}  // namespace

TEST_CASE("cz decomposition") {
    Lattice lat = Lattice::standard(1, -6);

    StepFunction small(&lat, 0.5);
    CZDecomposition d0 = cz_decompose(small, 1.0);
    CHECK(d0.cubes.empty());
    for (std::int64_t i = 0; i < small.size(); ++i) CHECK(d0.g[i] == doctest::Approx(small[i]));

    // spike of mass 1 at height 2^4 on [0, 2^{-4})
    StepFunction spike(&lat, 0.0);
    for (std::int64_t c : lat.cell_indices(CubeId{-4, {0, 0}})) spike[c] = 16.0;
    CZDecomposition d1 = cz_decompose(spike, 1.0);
    REQUIRE(d1.cubes.size() == 1);
    CHECK(d1.cubes[0] == CubeId{-1, {0, 0}});
    CHECK(d1.g.sup_norm() == doctest::Approx(2.0));  // 2^d lambda
    check_cz_properties(spike, d1);

    // root selected when even the root average exceeds lambda
    StepFunction big(&lat, 5.0);
    CZDecomposition d2 = cz_decompose(big, 1.0);
    REQUIRE(d2.cubes.size() == 1);
    CHECK(d2.cubes[0].level == 0);

    // random battery
    SplitMix64 g(1);
    for (int t = 0; t < 100; ++t) {
        StepFunction f = random_function(&lat, 1000 + static_cast<std::uint64_t>(t));
        double lambda = 0.1 + 2.0 * g.uniform();
        check_cz_properties(f, cz_decompose(f, lambda));
    }
    CHECK_THROWS(cz_decompose(small, 0.0));
}

TEST_CASE("slice lattice") {
    Lattice lat = Lattice::standard(1, -6);
    auto f0 = slice_lattice(lat, 0);
    REQUIRE(f0.size() == 1);
    CHECK(f0[0].size() == 7);

    auto f2 = slice_lattice(lat, 2);
    REQUIRE(f2.size() == 3);
    CHECK(f2[0] == std::vector<int>{0, -3, -6});
    CHECK(f2[1] == std::vector<int>{-1, -4});
    CHECK(f2[2] == std::vector<int>{-2, -5});

    std::set<int> seen;
    for (const auto& fam : f2)
        for (int l : fam) {
            CHECK(seen.insert(l).second);  // disjoint
        }
    CHECK(seen.size() == 7);
}

TEST_CASE("density classes") {
    Lattice lat = Lattice::standard(1, -4);
    Weight one(StepFunction(&lat, 1.0));
    auto c1 = density_classes(one);
    REQUIRE(c1.count(0) == 1);
    CHECK(c1[0].size() == 31);  // every cube in class 0

    Lattice lat4 = Lattice::standard(1, -2);
    Weight w(StepFunction(&lat4, {4.0, 1.0, 1.0, 4.0}));
    Weight winv = w.reciprocal();
    auto classes = density_classes(w);
    size_t total = 0;
    for (auto& [k, cubes] : classes) {
        total += cubes.size();
        CHECK(k <= static_cast<int>(std::ceil(std::log2(a2_constant(w).value))));
        for (const CubeId& q : cubes) {
            double prod = average(w.density(), q) * average(winv.density(), q);
            CHECK(prod >= std::ldexp(1.0, k) * (1.0 - 1e-12));
            CHECK(prod < std::ldexp(1.0, k + 1));
        }
    }
    CHECK(total == 7);
}

TEST_CASE("stopping forest") {
    // flat weight: no quadrupling anywhere
    Lattice lat = Lattice::standard(1, -4);
    Weight one(StepFunction(&lat, 1.0));
    CubeId root{0, {0, 0}};
    StoppingForest f1 = stopping_forest(root, one, all_cubes(lat));
    CHECK(f1.generations.size() == 1);
    size_t attached = 0;
    for (auto& [q, cubes] : f1.partition) attached += cubes.size();
    CHECK(attached == 31);

    // hand case: d=1, N=16, w = 8 on the first cell, 1 elsewhere
    std::vector<double> wv(16, 1.0);
    wv[0] = 8.0;
    Weight w(StepFunction(&lat, wv));
    StoppingForest f2 = stopping_forest(root, w, all_cubes(lat));
    REQUIRE(f2.generations.size() == 2);
    REQUIRE(f2.generations[1].size() == 1);
    CHECK(f2.generations[1][0] == CubeId{-4, {0, 0}});

    // partition property and the stopping-rule threshold on random weights
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Lattice latr = Lattice::standard(1, -6);
        Weight wr = random_a2_weight(&latr, 30.0, seed + 1);
        StoppingForest fr = stopping_forest(root, wr, all_cubes(latr));
        size_t n = 0;
        for (auto& [q, cubes] : fr.partition) n += cubes.size();
        CHECK(n == 127);  // every ambient cube attached exactly once
        auto density = [&](const CubeId& q) {
            return wr.measure(q) / latr.volume(q);
        };
        for (size_t tau = 1; tau < fr.generations.size(); ++tau)
            for (const CubeId& q : fr.generations[tau]) {
                // find stopping parent in the previous generation
                for (const CubeId& p : fr.generations[tau - 1])
                    if (latr.contains(p, q)) CHECK(density(q) > 4.0 * density(p));
            }
    }
}

TEST_CASE("packing bounds") {
    Lattice lat = Lattice::standard(1, -6);
    CubeId root{0, {0, 0}};

    Weight one(StepFunction(&lat, 1.0));
    PackingReport p1 = packing_report(stopping_forest(root, one, all_cubes(lat)), one);
    CHECK(p1.lebesgue_ratio == doctest::Approx(1.0));
    CHECK(p1.l2_overlap_ratio == doctest::Approx(1.0));

    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Weight w = random_a2_weight(&lat, 5.0 + 10.0 * static_cast<double>(seed), seed + 10);
        PackingReport p = packing_report(stopping_forest(root, w, all_cubes(lat)), w);
        CHECK(p.lebesgue_ratio <= 4.0 / 3.0 + 1e-12);
        CHECK(p.l2_overlap_ratio <= 2.0 + 1e-12);
        CHECK(p.weighted_ratio <= 16.0 / 3.0 + 1e-12);
    }
}

TEST_CASE("packing adversarial cascade pushes the lebesgue ratio up") {
    // nested generations: at each scale, 7 of 32 subcubes carry 99% of the
    // mass, so their density slightly exceeds four times the parent's
    Lattice lat = Lattice::standard(1, -15);
    std::vector<double> vals(static_cast<size_t>(lat.total_cells()), 0.0);
    struct Region { std::int64_t lo, hi; double mass; int depth; };
    std::vector<Region> stack{{0, lat.total_cells(), 1.0, 3}};
    while (!stack.empty()) {
        Region r = stack.back();
        stack.pop_back();
        std::int64_t len = r.hi - r.lo;
        if (r.depth == 0 || len < 32) {
            for (std::int64_t i = r.lo; i < r.hi; ++i)
                vals[static_cast<size_t>(i)] = r.mass / static_cast<double>(len);
            continue;
        }
        std::int64_t sub = len / 32;
        double heavy = 0.99 * r.mass / 7.0;
        double light = 0.01 * r.mass / 25.0;
        std::set<int> picks{0, 5, 10, 15, 20, 25, 30};
        for (int b = 0; b < 32; ++b) {
            Region child{r.lo + b * sub, r.lo + (b + 1) * sub, light, 0};
            if (picks.count(b)) {
                child.mass = heavy;
                child.depth = r.depth - 1;
            }
            stack.push_back(child);
        }
    }
    // values are cell densities scaled by N (mass / (len cells) then / cellvol)
    for (auto& v : vals) v *= static_cast<double>(lat.total_cells());
    Weight w{StepFunction(&lat, vals)};
    CubeId root{0, {0, 0}};
    StoppingForest f = stopping_forest(root, w, all_cubes(lat));
    PackingReport p = packing_report(f, w);
    CHECK(p.lebesgue_ratio >= 1.2);
    CHECK(p.lebesgue_ratio <= 4.0 / 3.0 + 1e-12);
}

TEST_CASE("carleson embedding") {
    Lattice lat = Lattice::standard(1, -6);
    Weight mu = random_weight(&lat, 4);

    // a supported on one level with a_Q = mu(Q), f = 1: ratio exactly 1
    CubeField a(&lat, 0.0);
    for (std::int64_t i = 0; i < lat.cube_count(-3); ++i) {
        CubeId q = lat.from_flat(-3, i);
        a.at(q) = mu.measure(q);
    }
    CarlesonResult r1 = carleson_embedding_ratio(a, mu, StepFunction(&lat, 1.0));
    REQUIRE(!r1.violation.has_value());
    CHECK(r1.ratio == doctest::Approx(1.0));

    // violation detected with a witness
    CubeField bad(&lat, 0.0);
    CubeId root{0, {0, 0}};
    bad.at(root) = 2.0 * mu.total();
    CarlesonResult r2 = carleson_embedding_ratio(bad, mu, StepFunction(&lat, 1.0));
    REQUIRE(r2.violation.has_value());
    CHECK(r2.violation->witness == root);

    // random admissible sequences never exceed the constant 4
    SplitMix64 g(77);
    for (int t = 0; t < 100; ++t) {
        Weight m = random_weight(&lat, 500 + static_cast<std::uint64_t>(t));
        CubeField raw(&lat, 0.0);
        for (int l = lat.k_min(); l <= 0; ++l)
            for (std::int64_t i = 0; i < lat.cube_count(l); ++i)
                raw.at(lat.from_flat(l, i)) = g.uniform() * m.measure(lat.from_flat(l, i));
        // rescale to enforce the Carleson condition exactly
        double worst = 1.0;
        std::vector<std::vector<double>> sub(static_cast<size_t>(lat.levels()));
        for (int l = lat.k_min(); l <= 0; ++l) {
            size_t li = static_cast<size_t>(l - lat.k_min());
            sub[li].assign(static_cast<size_t>(lat.cube_count(l)), 0.0);
            for (std::int64_t i = 0; i < lat.cube_count(l); ++i) {
                CubeId q = lat.from_flat(l, i);
                double s = raw.at(q);
                if (l > lat.k_min())
                    for (const CubeId& c : lat.children(q))
                        s += sub[li - 1][static_cast<size_t>(lat.flat_index(c))];
                sub[li][static_cast<size_t>(i)] = s;
                worst = std::max(worst, s / m.measure(q));
            }
        }
        CubeField adm(&lat, 0.0);
        for (int l = lat.k_min(); l <= 0; ++l)
            for (std::int64_t i = 0; i < lat.cube_count(l); ++i) {
                CubeId q = lat.from_flat(l, i);
                adm.at(q) = raw.at(q) / worst;
            }
        StepFunction f = random_function(&lat, 900 + static_cast<std::uint64_t>(t));
        CarlesonResult r = carleson_embedding_ratio(adm, m, f);
        REQUIRE(!r.violation.has_value());
        CHECK(r.ratio <= 4.0);
    }
}

TEST_CASE("jn maximal function") {
    Lattice lat = Lattice::standard(1, -6);
    ElementaryShift s = petermichl_shift(&lat);
    Weight w = random_weight(&lat, 6);

    CHECK(jn_maximal(s, {}, w).sup_norm() == doctest::Approx(0.0));

    // single-cube collection: f* equals |f_Q| on Q and 0 outside
    CubeId q{-2, {1, 0}};
    StepFunction fq = apply(restrict_shift(s, {q}), w.density());
    StepFunction fstar = jn_maximal(s, {q}, w);
    for (std::int64_t i = 0; i < fstar.size(); ++i)
        CHECK(fstar[i] == doctest::Approx(std::abs(fq[i])).epsilon(1e-12));

    // domination |f_P| <= f*_P for a random collection above the finest level
    SplitMix64 g(3);
    std::vector<CubeId> P;
    for (const ShiftBlock& b : s.blocks())
        if (g.bit()) P.push_back(b.cube);
    StepFunction fp = apply(restrict_shift(s, P), w.density());
    StepFunction fs = jn_maximal(s, P, w);
    for (std::int64_t i = 0; i < fp.size(); ++i)
        CHECK(std::abs(fp[i]) <= fs[i] + 1e-10);

    // brute-force oracle on a small lattice: enumerate all (x, Q) pairs
    Lattice small = Lattice::standard(1, -4);
    ElementaryShift ss = petermichl_shift(&small);
    Weight ws = random_weight(&small, 8);
    std::vector<CubeId> Ps;
    for (const ShiftBlock& b : ss.blocks()) Ps.push_back(b.cube);
    StepFunction oracle(&small, 0.0);
    std::map<std::pair<int, std::int64_t>, StepFunction> pieces;
    for (const CubeId& qq : Ps)
        pieces.insert({{qq.level, small.flat_index(qq)},
                       apply(restrict_shift(ss, {qq}), ws.density())});
    for (std::int64_t cell = 0; cell < small.total_cells(); ++cell) {
        double best = 0;
        for (int ql = small.k_min(); ql <= 0; ++ql) {
            CubeId qc = small.cube_at(ql, {cell, 0});
            double sum = 0;
            for (const CubeId& rr : Ps)
                if (rr.level > ql && small.contains(rr, qc))
                    sum += pieces.at({rr.level, small.flat_index(rr)})[cell];
            best = std::max(best, std::abs(sum));
        }
        oracle[cell] = best;
    }
    StepFunction fast = jn_maximal(ss, Ps, ws);
    for (std::int64_t i = 0; i < fast.size(); ++i)
        CHECK(fast[i] == doctest::Approx(oracle[i]).epsilon(1e-10));
}

TEST_CASE("jn distribution") {
    Lattice lat = Lattice::standard(1, -8);
    Weight w = random_a2_weight(&lat, 20.0, 9);
    CubeId root{0, {0, 0}};

    JNCurve zero = jn_distribution(StepFunction(&lat, 0.0), w, root, 13.0);
    CHECK(zero.all_pass);
    for (double m : zero.lebesgue_measure) CHECK(m == doctest::Approx(0.0));

    ElementaryShift s = petermichl_shift(&lat);
    std::vector<CubeId> P;
    for (const ShiftBlock& b : s.blocks()) P.push_back(b.cube);
    StepFunction fstar = jn_maximal(s, P, w);
    JNCurve curve = jn_distribution(fstar, w, root, 13.0);
    CHECK(curve.all_pass);
    if (fstar.sup_norm() > 0) CHECK(curve.fitted_tail_slope <= 0.0);
}

TEST_CASE("p alpha classes") {
    Lattice lat = Lattice::standard(1, -3);
    CubeId root{0, {0, 0}};
    CubeId q{-1, {0, 0}};

    Weight one(StepFunction(&lat, 1.0));
    CHECK(p_alpha_class(one, q, root) == 1);  // equal densities

    std::vector<double> wv(8, 1.0);
    for (int i = 0; i < 4; ++i) wv[i] = 5.0;  // density ratio 5/3 on [0,1/2)
    Weight w(StepFunction(&lat, wv));
    CHECK(p_alpha_class(w, q, root) == 0);

    std::vector<double> wv2(8, 1.0);
    for (int i = 4; i < 8; ++i) wv2[i] = 9.0;  // left density ratio 1/5
    Weight w2(StepFunction(&lat, wv2));
    CHECK(p_alpha_class(w2, q, root) == 2);
}
