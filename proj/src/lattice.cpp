#include "dyadlab/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "dyadlab/rng.hpp"

namespace dyadlab {

double goodness_gamma(int dim, double alpha) {
    if (dim < 1 || alpha <= 0.0 || alpha > 1.0)
        throw std::invalid_argument("goodness_gamma: need dim >= 1, alpha in (0,1]");
    return alpha / (2.0 * (dim + alpha));
}

Lattice::Lattice(int dim, int k_min) : dim_(dim), k_min_(k_min) {
    if (dim != 1 && dim != 2) throw std::invalid_argument("Lattice: dimension must be 1 or 2");
    if (k_min > -1) throw std::invalid_argument("Lattice: k_min must be <= -1");
    if (k_min < -30) throw std::invalid_argument("Lattice: k_min too deep");
    shifts_.assign(static_cast<size_t>(-k_min), {0, 0});
}

Lattice Lattice::standard(int dim, int k_min) { return Lattice(dim, k_min); }

Lattice Lattice::sampled(int dim, int k_min, std::uint64_t seed) {
    Lattice lat(dim, k_min);
    for (int j = k_min; j < 0; ++j) {
        SplitMix64 g(substream(seed, static_cast<std::uint64_t>(j - k_min)));
        for (int axis = 0; axis < dim; ++axis)
            lat.set_shift_bit(j, axis, g.bit() ? 1 : 0);
    }
    return lat;
}

void Lattice::set_shift_bit(int j, int axis, int bit) {
    if (j < k_min_ || j >= 0) throw std::out_of_range("set_shift_bit: level out of range");
    if (axis < 0 || axis >= dim_) throw std::out_of_range("set_shift_bit: axis out of range");
    shifts_[static_cast<size_t>(j - k_min_)][static_cast<size_t>(axis)] = bit & 1;
}

std::int64_t Lattice::shift_units(int level, int axis) const {
    // sum_{j < level} omega_j 2^j, expressed in units of 2^{k_min}
    std::int64_t s = 0;
    for (int j = k_min_; j < level; ++j)
        s += static_cast<std::int64_t>(shift_bit(j, axis)) << (j - k_min_);
    return s % cells_per_axis();
}

std::int64_t Lattice::cube_count(int level) const {
    std::int64_t per = cubes_per_axis(level);
    return dim_ == 1 ? per : per * per;
}

std::int64_t Lattice::total_cells() const { return cube_count(k_min_); }

std::int64_t Lattice::flat_index(const CubeId& q) const {
    std::int64_t per = cubes_per_axis(q.level);
    std::int64_t i0 = ((q.index[0] % per) + per) % per;
    if (dim_ == 1) return i0;
    std::int64_t i1 = ((q.index[1] % per) + per) % per;
    return i1 * per + i0;
}

CubeId Lattice::from_flat(int level, std::int64_t flat) const {
    std::int64_t per = cubes_per_axis(level);
    CubeId q;
    q.level = level;
    if (dim_ == 1) {
        q.index = {flat, 0};
    } else {
        q.index = {flat % per, flat / per};
    }
    return q;
}

std::array<std::int64_t, 2> Lattice::origin_units(const CubeId& q) const {
    if (q.level < k_min_ || q.level > 0) throw std::out_of_range("origin_units: level out of range");
    std::int64_t n = cells_per_axis();
    std::int64_t side = side_units(q.level);
    std::int64_t per = cubes_per_axis(q.level);
    std::array<std::int64_t, 2> o{0, 0};
    for (int axis = 0; axis < dim_; ++axis) {
        std::int64_t m = ((q.index[static_cast<size_t>(axis)] % per) + per) % per;
        o[static_cast<size_t>(axis)] = (m * side + shift_units(q.level, axis)) % n;
    }
    return o;
}

CubeId Lattice::cube_at(int level, std::array<std::int64_t, 2> point) const {
    if (level < k_min_ || level > 0) throw std::out_of_range("cube_at: level out of range");
    std::int64_t n = cells_per_axis();
    std::int64_t side = side_units(level);
    CubeId q;
    q.level = level;
    for (int axis = 0; axis < dim_; ++axis) {
        std::int64_t p = ((point[static_cast<size_t>(axis)] % n) + n) % n;
        std::int64_t rel = (p - shift_units(level, axis) % n + n) % n;
        q.index[static_cast<size_t>(axis)] = rel / side;
    }
    return q;
}

std::vector<CubeId> Lattice::children(const CubeId& q) const {
    if (q.level <= k_min_) throw std::out_of_range("children: cube at finest level");
    std::array<std::int64_t, 2> o = origin_units(q);
    std::int64_t half = side_units(q.level) / 2;
    std::vector<CubeId> out;
    out.reserve(static_cast<size_t>(1) << dim_);
    int nc = 1 << dim_;
    for (int c = 0; c < nc; ++c) {
        std::array<std::int64_t, 2> pt = o;
        for (int axis = 0; axis < dim_; ++axis)
            if ((c >> axis) & 1) pt[static_cast<size_t>(axis)] += half;
        out.push_back(cube_at(q.level - 1, pt));
    }
    return out;
}

std::vector<CubeId> Lattice::descendants(const CubeId& q, int depth) const {
    if (depth < 0) throw std::invalid_argument("descendants: negative depth");
    std::vector<CubeId> cur{q};
    for (int s = 0; s < depth; ++s) {
        std::vector<CubeId> next;
        next.reserve(cur.size() << dim_);
        for (const CubeId& c : cur)
            for (const CubeId& ch : children(c)) next.push_back(ch);
        cur.swap(next);
    }
    return cur;
}

std::vector<std::int64_t> Lattice::cell_indices(const CubeId& q) const {
    std::int64_t n = cells_per_axis();
    auto o = origin_units(q);
    std::int64_t side = side_units(q.level);
    std::vector<std::int64_t> out;
    if (dim_ == 1) {
        out.reserve(static_cast<size_t>(side));
        for (std::int64_t i = 0; i < side; ++i) out.push_back((o[0] + i) % n);
    } else {
        out.reserve(static_cast<size_t>(side * side));
        for (std::int64_t j = 0; j < side; ++j) {
            std::int64_t y = (o[1] + j) % n;
            for (std::int64_t i = 0; i < side; ++i) out.push_back(y * n + (o[0] + i) % n);
        }
    }
    return out;
}

CubeId Lattice::parent(const CubeId& q) const {
    if (q.level >= 0) throw std::out_of_range("parent: cube at root level");
    // the parent is the level-(k+1) cube containing any point of q; since
    // boundaries nest, the cube's own origin works
    return cube_at(q.level + 1, origin_units(q));
}

CubeId Lattice::ancestor(const CubeId& q, int order) const {
    if (order < 0) throw std::invalid_argument("ancestor: negative order");
    if (q.level + order > 0) throw std::out_of_range("ancestor: level above root");
    CubeId cur = q;
    for (int s = 0; s < order; ++s) cur = parent(cur);
    return cur;
}

bool Lattice::contains(const CubeId& outer, const CubeId& inner) const {
    if (outer.level < inner.level) return false;
    return ancestor(inner, outer.level - inner.level) == outer;
}

double Lattice::side_length(int level) const { return std::ldexp(1.0, level); }

double Lattice::volume(const CubeId& q) const {
    return std::ldexp(1.0, q.level * dim_);
}

namespace {
// one-axis toroidal gap between intervals [a, a+s) and [b, b+s2), all in
// fine units with period n; 0 when they touch or overlap
std::int64_t axis_gap(std::int64_t a, std::int64_t sa, std::int64_t b, std::int64_t sb,
                      std::int64_t n) {
    // gap going forward from end of A to start of B, and the reverse
    std::int64_t g1 = ((b - (a + sa)) % n + n) % n;
    std::int64_t g2 = ((a - (b + sb)) % n + n) % n;
    std::int64_t g = std::min(g1, g2);
    // overlapping intervals give both residues large; detect overlap directly
    std::int64_t rel = ((b - a) % n + n) % n;
    if (rel < sa || n - rel < sb) return 0;
    return g;
}
}  // namespace

double Lattice::distance(const CubeId& a, const CubeId& b) const {
    std::int64_t n = cells_per_axis();
    auto oa = origin_units(a), ob = origin_units(b);
    std::int64_t sa = side_units(a.level), sb = side_units(b.level);
    double unit = std::ldexp(1.0, k_min_);
    double sq = 0.0;
    for (int axis = 0; axis < dim_; ++axis) {
        double g = static_cast<double>(axis_gap(oa[static_cast<size_t>(axis)], sa,
                                                ob[static_cast<size_t>(axis)], sb, n)) * unit;
        sq += g * g;
    }
    return std::sqrt(sq);
}

double Lattice::long_distance(const CubeId& a, const CubeId& b) const {
    return distance(a, b) + side_length(a.level) + side_length(b.level);
}

double Lattice::boundary_distance(const CubeId& q, const CubeId& r) const {
    // Distance from the cube Q to the boundary faces of R (periodic).
    // If Q lies inside R this is the min over axes of the distance from
    // Q's slab to R's two faces on that axis; outside, it is the set
    // distance from Q to R's boundary (= distance to R when disjoint).
    std::int64_t n = cells_per_axis();
    auto oq = origin_units(q), orr = origin_units(r);
    std::int64_t sq = side_units(q.level), sr = side_units(r.level);
    double unit = std::ldexp(1.0, k_min_);

    if (sr >= n) {
        // R is the root cube: on the torus its boundary is the wrapped faces,
        // i.e. the level-0 grid hyperplanes
        return level_boundary_distance(q, r.level);
    }

    bool inside = true;
    for (int axis = 0; axis < dim_; ++axis) {
        std::int64_t rel = ((oq[static_cast<size_t>(axis)] - orr[static_cast<size_t>(axis)]) % n + n) % n;
        if (rel + sq > sr) { inside = false; break; }
    }
    if (inside) {
        double best = std::numeric_limits<double>::infinity();
        for (int axis = 0; axis < dim_; ++axis) {
            std::int64_t rel = ((oq[static_cast<size_t>(axis)] - orr[static_cast<size_t>(axis)]) % n + n) % n;
            std::int64_t lo = rel;
            std::int64_t hi = sr - (rel + sq);
            best = std::min(best, static_cast<double>(std::min(lo, hi)) * unit);
        }
        return best;
    }
    // disjoint or partially overlapping (impossible for nested lattices at
    // comparable levels, but handle generically): distance to R's closure
    double sqsum = 0.0;
    for (int axis = 0; axis < dim_; ++axis) {
        double g = static_cast<double>(axis_gap(oq[static_cast<size_t>(axis)], sq,
                                                orr[static_cast<size_t>(axis)], sr, n)) * unit;
        sqsum += g * g;
    }
    return std::sqrt(sqsum);
}

double Lattice::level_boundary_distance(const CubeId& q, int level) const {
    // min over axes of the distance from Q's slab to the nearest level-`level`
    // grid hyperplane on that axis (grid spacing side_units(level), offset by
    // the accumulated shift)
    std::int64_t n = cells_per_axis();
    auto oq = origin_units(q);
    std::int64_t sq = side_units(q.level);
    std::int64_t step = side_units(level);
    double unit = std::ldexp(1.0, k_min_);
    std::int64_t best = std::numeric_limits<std::int64_t>::max();
    for (int axis = 0; axis < dim_; ++axis) {
        std::int64_t off = shift_units(level, axis) % step;
        std::int64_t a = ((oq[static_cast<size_t>(axis)] - off) % step + step) % step;
        // hyperplanes at multiples of step in these shifted coordinates;
        // slab is [a, a+sq) mod step
        std::int64_t d;
        if (a + sq >= step || a == 0) {
            d = 0;  // a hyperplane lies inside or on the lower face
        } else {
            d = std::min(a, step - (a + sq));
        }
        best = std::min(best, d);
    }
    (void)n;
    return static_cast<double>(best) * unit;
}

bool Lattice::is_bad(const CubeId& q, const GoodnessParams& p) const {
    double lq = side_length(q.level);
    for (int l = q.level + p.r0 + 1; l <= 0; ++l) {
        double lr = side_length(l);
        double threshold = std::pow(lq, 1.0 - p.gamma) * std::pow(lr, p.gamma);
        if (level_boundary_distance(q, l) < threshold) return true;
    }
    return false;
}

bool Lattice::good_up_to_level(const CubeId& q, int r_level, const GoodnessParams& p) const {
    double lq = side_length(q.level);
    for (int l = q.level + p.r0 + 1; l <= r_level && l <= 0; ++l) {
        double lr = side_length(l);
        double threshold = std::pow(lq, 1.0 - p.gamma) * std::pow(lr, p.gamma);
        if (level_boundary_distance(q, l) < threshold) return false;
    }
    return true;
}

std::string Lattice::serialize() const {
    std::ostringstream os;
    os << "dyadlat " << dim_ << ' ' << k_min_ << '\n';
    for (int j = k_min_; j < 0; ++j) {
        os << j;
        for (int axis = 0; axis < dim_; ++axis) os << ' ' << shift_bit(j, axis);
        os << '\n';
    }
    return os.str();
}

Lattice Lattice::deserialize(const std::string& text) {
    std::istringstream is(text);
    std::string magic;
    int dim = 0, k_min = 0;
    if (!(is >> magic >> dim >> k_min) || magic != "dyadlat")
        throw std::invalid_argument("Lattice::deserialize: bad header");
    Lattice lat(dim, k_min);
    for (int j = k_min; j < 0; ++j) {
        int jj = 0;
        if (!(is >> jj) || jj != j)
            throw std::invalid_argument("Lattice::deserialize: bad level line");
        for (int axis = 0; axis < dim; ++axis) {
            int bit = 0;
            if (!(is >> bit)) throw std::invalid_argument("Lattice::deserialize: missing bit");
            lat.set_shift_bit(j, axis, bit);
        }
    }
    return lat;
}

PiBadEstimate estimate_pi_bad(int dim, int r0, double gamma, int q_level,
                              std::int64_t n_samples, std::uint64_t seed) {
    if (n_samples < 1) throw std::invalid_argument("estimate_pi_bad: n_samples >= 1 required");
    if (q_level + r0 + 1 > 0)
        throw std::invalid_argument("estimate_pi_bad: level range too shallow for r0");
    GoodnessParams p{r0, gamma};
    std::int64_t bad = 0;
    for (std::int64_t s = 0; s < n_samples; ++s) {
        Lattice lat = Lattice::sampled(dim, q_level, substream(seed, static_cast<std::uint64_t>(s), 1));
        CubeId q;
        q.level = q_level;
        q.index = {0, 0};
        if (lat.is_bad(q, p)) ++bad;
    }
    PiBadEstimate est;
    est.n_samples = n_samples;
    est.estimate = static_cast<double>(bad) / static_cast<double>(n_samples);
    est.std_error = std::sqrt(std::max(est.estimate * (1.0 - est.estimate), 1e-300) /
                              static_cast<double>(n_samples));
    return est;
}

}  // namespace dyadlab
