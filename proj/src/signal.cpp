#include "dyadlab/signal.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "dyadlab/rng.hpp"

namespace dyadlab {

StepFunction::StepFunction(const Lattice* lat, double fill)
    : lat_(lat), values_(static_cast<size_t>(lat->total_cells()), fill) {}

StepFunction::StepFunction(const Lattice* lat, std::vector<double> values)
    : lat_(lat), values_(std::move(values)) {
    if (static_cast<std::int64_t>(values_.size()) != lat->total_cells())
        throw std::invalid_argument("StepFunction: value count does not match lattice resolution");
    for (double v : values_)
        if (!std::isfinite(v)) throw std::invalid_argument("StepFunction: non-finite value");
}

double StepFunction::cell_volume() const {
    return std::ldexp(1.0, lat_->k_min() * lat_->dim());
}

double StepFunction::integral() const {
    double s = 0;
    for (double v : values_) s += v;
    return s * cell_volume();
}

std::vector<std::int64_t> StepFunction::cells_of(const CubeId& q) const {
    return lat_->cell_indices(q);
}

double StepFunction::integral(const CubeId& q) const {
    double s = 0;
    for (std::int64_t i : cells_of(q)) s += values_[static_cast<size_t>(i)];
    return s * cell_volume();
}

double StepFunction::l1_norm() const {
    double s = 0;
    for (double v : values_) s += std::abs(v);
    return s * cell_volume();
}

double StepFunction::l2_norm() const {
    double s = 0;
    for (double v : values_) s += v * v;
    return std::sqrt(s * cell_volume());
}

double StepFunction::sup_norm() const {
    double s = 0;
    for (double v : values_) s = std::max(s, std::abs(v));
    return s;
}

double StepFunction::inner(const StepFunction& g) const {
    double s = 0;
    for (size_t i = 0; i < values_.size(); ++i) s += values_[i] * g.values_[i];
    return s * cell_volume();
}

StepFunction StepFunction::restricted(const CubeId& q) const {
    StepFunction out(lat_, 0.0);
    for (std::int64_t i : cells_of(q)) out[i] = values_[static_cast<size_t>(i)];
    return out;
}

std::string StepFunction::to_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "cell,value\n";
    for (size_t i = 0; i < values_.size(); ++i) os << i << ',' << values_[i] << '\n';
    return os.str();
}

StepFunction operator+(const StepFunction& a, const StepFunction& b) {
    StepFunction out = a;
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

StepFunction operator-(const StepFunction& a, const StepFunction& b) {
    StepFunction out = a;
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] -= b[i];
    return out;
}

StepFunction operator*(double c, const StepFunction& f) {
    StepFunction out = f;
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] *= c;
    return out;
}

StepFunction pointwise_product(const StepFunction& a, const StepFunction& b) {
    StepFunction out = a;
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] *= b[i];
    return out;
}

Weight::Weight(StepFunction f) : f_(std::move(f)) {
    for (std::int64_t i = 0; i < f_.size(); ++i)
        if (!(f_[i] > 0.0)) throw std::invalid_argument("Weight: values must be strictly positive");
}

Weight Weight::reciprocal() const {
    StepFunction r = f_;
    for (std::int64_t i = 0; i < r.size(); ++i) r[i] = 1.0 / r[i];
    return Weight(std::move(r));
}

double average(const StepFunction& f, const CubeId& q) {
    return f.integral(q) / f.lattice().volume(q);
}

double weighted_average(const StepFunction& f, const Weight& w, const CubeId& q) {
    double m = w.measure(q);
    if (m == 0.0) return 0.0;
    return pointwise_product(f, w.density()).integral(q) / m;
}

namespace {

// per-level cube integrals built bottom-up: sums[l - k_min][flat] = ∫_Q f
std::vector<std::vector<double>> level_integrals(const StepFunction& f) {
    const Lattice& lat = f.lattice();
    int levels = lat.levels();
    std::vector<std::vector<double>> sums(static_cast<size_t>(levels));
    double cv = f.cell_volume();
    sums[0].resize(static_cast<size_t>(lat.total_cells()));
    for (std::int64_t i = 0; i < f.size(); ++i) sums[0][static_cast<size_t>(i)] = f[i] * cv;
    for (int l = lat.k_min() + 1; l <= 0; ++l) {
        size_t li = static_cast<size_t>(l - lat.k_min());
        sums[li].assign(static_cast<size_t>(lat.cube_count(l)), 0.0);
        for (std::int64_t i = 0; i < lat.cube_count(l); ++i) {
            CubeId q = lat.from_flat(l, i);
            double s = 0;
            for (const CubeId& c : lat.children(q))
                s += sums[li - 1][static_cast<size_t>(lat.flat_index(c))];
            sums[li][static_cast<size_t>(i)] = s;
        }
    }
    return sums;
}

A2Result sup_avg_product(const Weight& u, const Weight& v) {
    const Lattice& lat = u.lattice();
    auto su = level_integrals(u.density());
    auto sv = level_integrals(v.density());
    A2Result best;
    best.value = -1.0;
    for (int l = lat.k_min(); l <= 0; ++l) {
        size_t li = static_cast<size_t>(l - lat.k_min());
        double vol = std::ldexp(1.0, l * lat.dim());
        for (std::int64_t i = 0; i < lat.cube_count(l); ++i) {
            double p = (su[li][static_cast<size_t>(i)] / vol) * (sv[li][static_cast<size_t>(i)] / vol);
            if (p > best.value) {
                best.value = p;
                best.argmax = lat.from_flat(l, i);
            }
        }
    }
    return best;
}

}  // namespace

A2Result a2_constant(const Weight& w) { return sup_avg_product(w, w.reciprocal()); }

A2Result joint_a2(const Weight& u, const Weight& v) { return sup_avg_product(u, v); }

Weight power_weight(const Lattice* lat, double exponent, const std::vector<double>& center) {
    if (std::abs(exponent) >= lat->dim())
        throw std::invalid_argument("power_weight: |exponent| must be < dimension");
    if (static_cast<int>(center.size()) < lat->dim())
        throw std::invalid_argument("power_weight: center dimension mismatch");
    std::int64_t n = lat->cells_per_axis();
    double h = 1.0 / static_cast<double>(n);
    StepFunction f(lat, 1.0);
    for (std::int64_t i = 0; i < f.size(); ++i) {
        double sq = 0;
        std::int64_t idx[2] = {lat->dim() == 1 ? i : i % n, lat->dim() == 1 ? 0 : i / n};
        for (int axis = 0; axis < lat->dim(); ++axis) {
            double x = (static_cast<double>(idx[axis]) + 0.5) * h;
            double d = std::abs(x - center[static_cast<size_t>(axis)]);
            d = std::min(d, 1.0 - d);  // periodic distance
            sq += d * d;
        }
        f[i] = std::pow(std::sqrt(sq), exponent);
    }
    return Weight(std::move(f));
}

namespace {

// multiplicative cascade with +-1 log-increments of size sigma along the
// dyadic tree; the sign pattern is fixed by the seed, sigma scales intensity
Weight cascade_weight(const Lattice* lat, double sigma, std::uint64_t seed) {
    StepFunction logf(lat, 0.0);
    for (int l = 0; l > lat->k_min(); --l) {
        for (std::int64_t i = 0; i < lat->cube_count(l); ++i) {
            CubeId q = lat->from_flat(l, i);
            auto ch = lat->children(q);
            SplitMix64 g(substream(seed, static_cast<std::uint64_t>(-l),
                                   static_cast<std::uint64_t>(i)));
            for (const CubeId& c : ch) {
                double eps = g.bit() ? 1.0 : -1.0;
                for (std::int64_t cell : logf.cells_of(c)) logf[cell] += sigma * eps;
            }
        }
    }
    StepFunction f(lat, 0.0);
    for (std::int64_t i = 0; i < f.size(); ++i) f[i] = std::exp(logf[i]);
    return Weight(std::move(f));
}

}  // namespace

Weight random_a2_weight(const Lattice* lat, double target, std::uint64_t seed) {
    if (target < 1.0) throw std::invalid_argument("random_a2_weight: target must be >= 1");
    if (target < 1.0 + 1e-12) return Weight(StepFunction(lat, 1.0));
    // a2(sigma) increases continuously from 1; bracket then bisect
    double lo = 0.0, hi = 0.25;
    while (a2_constant(cascade_weight(lat, hi, seed)).value < target) {
        hi *= 2.0;
        if (hi > 64.0) throw std::runtime_error("random_a2_weight: cannot reach target");
    }
    for (int it = 0; it < 60; ++it) {
        double mid = 0.5 * (lo + hi);
        double a2 = a2_constant(cascade_weight(lat, mid, seed)).value;
        if (std::abs(a2 - target) <= 0.1 * target) { lo = hi = mid; break; }
        (a2 < target ? lo : hi) = mid;
    }
    return cascade_weight(lat, 0.5 * (lo + hi), seed);
}

DistributionCurve distribution_function(const StepFunction& f, const Weight* m,
                                        const std::vector<double>& thresholds) {
    for (size_t i = 1; i < thresholds.size(); ++i)
        if (thresholds[i] <= thresholds[i - 1])
            throw std::invalid_argument("distribution_function: thresholds must increase");
    DistributionCurve curve;
    curve.thresholds = thresholds;
    curve.measures.reserve(thresholds.size());
    double cv = f.cell_volume();
    for (double t : thresholds) {
        double meas = 0;
        for (std::int64_t i = 0; i < f.size(); ++i)
            if (std::abs(f[i]) > t) meas += (m ? (*m)[i] : 1.0) * cv;
        curve.measures.push_back(meas);
    }
    return curve;
}

}  // namespace dyadlab
