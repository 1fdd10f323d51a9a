#include "dyadlab/haar.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dyadlab {

namespace {

// sign of the tensor Haar function h^j on child c: product over oscillating
// axes (digit 1 of j) of -1 for the lower child, +1 for the upper
inline double haar_sign(int j, int c, int dim) {
    double s = 1.0;
    for (int axis = 0; axis < dim; ++axis)
        if ((j >> axis) & 1) s *= ((c >> axis) & 1) ? 1.0 : -1.0;
    return s;
}

}  // namespace

HaarCoefficients::HaarCoefficients(const Lattice* lat) : lat_(lat) {
    int bs = (1 << lat->dim()) - 1;
    blocks_.resize(static_cast<size_t>(-lat->k_min()));
    for (int l = lat->k_min() + 1; l <= 0; ++l)
        blocks_[static_cast<size_t>(l - lat->k_min() - 1)]
            .assign(static_cast<size_t>(lat->cube_count(l) * bs), 0.0);
}

double& HaarCoefficients::at(const CubeId& q, int j) {
    if (j < 1 || j > block_size()) throw std::out_of_range("HaarCoefficients: j out of range");
    if (q.level <= lat_->k_min()) throw std::out_of_range("HaarCoefficients: finest-level cube");
    return level_block(q.level)[static_cast<size_t>(lat_->flat_index(q) * block_size() + (j - 1))];
}

double HaarCoefficients::at(const CubeId& q, int j) const {
    return const_cast<HaarCoefficients*>(this)->at(q, j);
}

std::vector<double>& HaarCoefficients::level_block(int level) {
    return blocks_[static_cast<size_t>(level - lat_->k_min() - 1)];
}

const std::vector<double>& HaarCoefficients::level_block(int level) const {
    return blocks_[static_cast<size_t>(level - lat_->k_min() - 1)];
}

double HaarCoefficients::sum_of_squares() const {
    double s = root_average_ * root_average_;
    for (const auto& b : blocks_)
        for (double v : b) s += v * v;
    return s;
}

std::string HaarCoefficients::to_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "level,cube,j,value\n";
    os << "0,0,0," << root_average_ << '\n';
    int bs = block_size();
    for (int l = lat_->k_min() + 1; l <= 0; ++l) {
        const auto& b = level_block(l);
        for (std::int64_t i = 0; i < lat_->cube_count(l); ++i)
            for (int j = 1; j <= bs; ++j)
                os << l << ',' << i << ',' << j << ','
                   << b[static_cast<size_t>(i * bs + (j - 1))] << '\n';
    }
    return os.str();
}

HaarCoefficients analyze(const StepFunction& f) {
    const Lattice& lat = f.lattice();
    int dim = lat.dim();
    int nc = 1 << dim;
    HaarCoefficients out(&lat);

    // bottom-up cube averages
    std::vector<double> avg(static_cast<size_t>(lat.total_cells()));
    for (std::int64_t i = 0; i < f.size(); ++i) avg[static_cast<size_t>(i)] = f[i];
    for (int l = lat.k_min() + 1; l <= 0; ++l) {
        std::vector<double> up(static_cast<size_t>(lat.cube_count(l)));
        auto& blk = out.level_block(l);
        double half_side_vol = std::ldexp(1.0, l * dim);  // |Q|
        double norm = std::sqrt(half_side_vol) / nc;      // |Q|^{1/2} 2^{-d}
        for (std::int64_t i = 0; i < lat.cube_count(l); ++i) {
            CubeId q = lat.from_flat(l, i);
            auto ch = lat.children(q);
            double child_avg[4];
            double mean = 0;
            for (int c = 0; c < nc; ++c) {
                child_avg[c] = avg[static_cast<size_t>(lat.flat_index(ch[static_cast<size_t>(c)]))];
                mean += child_avg[c];
            }
            up[static_cast<size_t>(i)] = mean / nc;
            for (int j = 1; j < nc; ++j) {
                double s = 0;
                for (int c = 0; c < nc; ++c) s += haar_sign(j, c, dim) * child_avg[c];
                blk[static_cast<size_t>(i * (nc - 1) + (j - 1))] = norm * s;
            }
        }
        avg.swap(up);
    }
    out.root_average() = avg[0];
    return out;
}

StepFunction synthesize(const HaarCoefficients& c) {
    const Lattice& lat = c.lattice();
    int dim = lat.dim();
    int nc = 1 << dim;
    std::vector<double> cur{c.root_average()};
    for (int l = 0; l > lat.k_min(); --l) {
        std::vector<double> down(static_cast<size_t>(lat.cube_count(l - 1)));
        const auto& blk = c.level_block(l);
        double inv_sqrt_vol = std::sqrt(std::ldexp(1.0, -l * dim));  // |Q|^{-1/2}
        for (std::int64_t i = 0; i < lat.cube_count(l); ++i) {
            CubeId q = lat.from_flat(l, i);
            auto ch = lat.children(q);
            double base = cur[static_cast<size_t>(i)];
            for (int cc = 0; cc < nc; ++cc) {
                double v = base;
                for (int j = 1; j < nc; ++j)
                    v += blk[static_cast<size_t>(i * (nc - 1) + (j - 1))] * inv_sqrt_vol *
                         haar_sign(j, cc, dim);
                down[static_cast<size_t>(lat.flat_index(ch[static_cast<size_t>(cc)]))] = v;
            }
        }
        cur.swap(down);
    }
    return StepFunction(&lat, std::move(cur));
}

StepFunction standard_haar(const Lattice* lat, const CubeId& q, int j) {
    if (q.level <= lat->k_min()) throw std::invalid_argument("standard_haar: finest-level cube");
    if (j < 1 || j > (1 << lat->dim()) - 1) throw std::invalid_argument("standard_haar: j out of range");
    HaarCoefficients c(lat);
    c.at(q, j) = 1.0;
    return synthesize(c);
}

WeightedHaarBasis weighted_haar_basis(const Weight& mu, const CubeId& q) {
    const Lattice& lat = mu.lattice();
    if (q.level <= lat.k_min())
        throw std::invalid_argument("weighted_haar_basis: finest-level cube");
    WeightedHaarBasis out;
    out.cube = q;
    if (mu.measure(q) == 0.0) return out;

    auto ch = lat.children(q);
    std::vector<CubeId> pos;
    std::vector<double> mass;
    for (const CubeId& c : ch) {
        double m = mu.measure(c);
        if (m > 0.0) {
            pos.push_back(c);
            mass.push_back(m);
        }
    }
    size_t npos = pos.size();
    if (npos < 2) return out;

    // Gram-Schmidt over child indicators (values per positive child), after
    // removing the mu-mean; inner product <phi,psi>_mu = sum phi_c psi_c mu(c)
    double total = 0;
    for (double m : mass) total += m;
    std::vector<std::vector<double>> basis;
    for (size_t k = 0; k + 1 < npos; ++k) {
        std::vector<double> v(npos, 0.0);
        v[k] = 1.0;
        // project out constants
        double mean = mass[k] / total;
        for (size_t c = 0; c < npos; ++c) v[c] -= mean;
        // project out previous basis vectors
        for (const auto& b : basis) {
            double ip = 0;
            for (size_t c = 0; c < npos; ++c) ip += v[c] * b[c] * mass[c];
            for (size_t c = 0; c < npos; ++c) v[c] -= ip * b[c];
        }
        double nrm2 = 0;
        for (size_t c = 0; c < npos; ++c) nrm2 += v[c] * v[c] * mass[c];
        if (nrm2 <= 0) continue;
        double inv = 1.0 / std::sqrt(nrm2);
        for (size_t c = 0; c < npos; ++c) v[c] *= inv;
        basis.push_back(v);
    }

    StepFunction proto(&lat, 0.0);
    for (const auto& b : basis) {
        StepFunction f = proto;
        for (size_t c = 0; c < npos; ++c)
            for (std::int64_t cell : f.cells_of(pos[c])) f[cell] = b[c];
        out.functions.push_back(std::move(f));
    }
    return out;
}

StepFunction weighted_delta(const StepFunction& f, const Weight& mu, const CubeId& q) {
    const Lattice& lat = f.lattice();
    if (q.level <= lat.k_min())
        throw std::invalid_argument("weighted_delta: finest-level cube");
    StepFunction out(&lat, 0.0);
    double eq = weighted_average(f, mu, q);
    for (const CubeId& c : lat.children(q)) {
        double ec = weighted_average(f, mu, c);
        for (std::int64_t cell : out.cells_of(c)) out[cell] = ec - eq;
    }
    return out;
}

}  // namespace dyadlab
