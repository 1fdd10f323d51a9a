#pragma once

#include <string>
#include <vector>

#include "dyadlab/lattice.hpp"
#include "dyadlab/signal.hpp"

namespace dyadlab {

// Haar expansion of a step function: for every non-finest cube Q a block of
// 2^d - 1 detail coefficients (tensor index j = 1..2^d-1), plus the root
// average.
class HaarCoefficients {
  public:
    HaarCoefficients() = default;
    explicit HaarCoefficients(const Lattice* lat);

    const Lattice& lattice() const { return *lat_; }
    int block_size() const { return (1 << lat_->dim()) - 1; }

    double& at(const CubeId& q, int j);
    double at(const CubeId& q, int j) const;
    double& root_average() { return root_average_; }
    double root_average() const { return root_average_; }

    // levels k_min+1 .. 0, coefficient blocks in flat cube order
    std::vector<double>& level_block(int level);
    const std::vector<double>& level_block(int level) const;

    double sum_of_squares() const;  // includes the root average term
    std::string to_csv() const;

  private:
    const Lattice* lat_ = nullptr;
    double root_average_ = 0.0;
    std::vector<std::vector<double>> blocks_;  // [level - (k_min+1)][flat * bs + (j-1)]
};

// Tensor-product Haar function h^j_Q with binary digits of j selecting the
// oscillating axes; L^2-normalized, sup norm |Q|^{-1/2}.
StepFunction standard_haar(const Lattice* lat, const CubeId& q, int j);

HaarCoefficients analyze(const StepFunction& f);
StepFunction synthesize(const HaarCoefficients& c);

// Orthonormal basis of the weighted martingale difference space on Q:
// functions constant on the children of Q, mu-mean zero, orthonormal in
// L^2(mu). Children of mu-measure zero are dropped.
struct WeightedHaarBasis {
    CubeId cube;
    std::vector<StepFunction> functions;
};

WeightedHaarBasis weighted_haar_basis(const Weight& mu, const CubeId& q);

// Delta^mu_Q f = -E^mu_Q f + sum over children of E^mu_child f, supported on Q
StepFunction weighted_delta(const StepFunction& f, const Weight& mu, const CubeId& q);

}  // namespace dyadlab
