#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "dyadlab/lattice.hpp"
#include "dyadlab/shift.hpp"
#include "dyadlab/signal.hpp"

namespace dyadlab {

struct MonteCarloEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::int64_t samples = 0;
};

// smallest integer s with s >= 2/gamma + r0 (1 - gamma)/gamma
int s0_minimum(const GoodnessParams& p);

// conditional probability that q is good given the lattice fixed up to
// r_level: bits at levels >= r_level are resampled per sample; exactly 0
// when the deterministic obstruction below r_level already fails
MonteCarloEstimate pi_good_given_R(const Lattice& base, const CubeId& q, int r_level,
                                   const GoodnessParams& params, std::int64_t n_samples,
                                   std::uint64_t seed);

// representation weight: conditional expectation, given the lattice up to
// r.level, of sum over common ancestors M of D(q,r)^{d+alpha}/l(M)^{d+alpha}
// times the indicator that q is good
MonteCarloEstimate rho_qr(const Lattice& base, const CubeId& q, const CubeId& r,
                          double alpha, const GoodnessParams& params,
                          std::int64_t n_samples, std::uint64_t seed);

using Kernel = std::function<double(double, double)>;

struct CZPair {
    CubeId q;    // analysis cube
    CubeId r;    // synthesis cube
    int jq = 1;  // Haar index; 0 selects the normalized indicator
    int jr = 1;
};

struct CZMatrixElement {
    CZPair pair;
    double value = 0.0;  // <T~ h_Q, h_R> after paraproduct subtraction
    bool excluded = false;  // disjoint pair closer than one cell: quadrature unreliable
};

// matrix elements of T~ = T - P_T - (P_{T*})* against L2-normalized
// (generalized) Haar functions, by cell-midpoint quadrature with a one-cell
// diagonal cutoff (d=1)
std::vector<CZMatrixElement> cz_coefficients(const Kernel& K, const Lattice& lat,
                                             const std::vector<CZPair>& pairs);

// T1 and T*1 at finest resolution by the same quadrature
StepFunction kernel_row_integrals(const Kernel& K, const Lattice& lat);     // T1
StepFunction kernel_column_integrals(const Kernel& K, const Lattice& lat);  // T*1

struct DecayEntry {
    CZPair pair;
    double coefficient = 0.0;  // |<T~ h_Q, h_R>|
    double bound = 0.0;        // l(Q)^{a/2} l(R)^{a/2} D^{-(d+a)} |Q|^{1/2} |R|^{1/2}
    double ratio = 0.0;
    double long_dist = 0.0;
};

struct DecayReport {
    std::vector<DecayEntry> entries;  // good-Q, non-excluded pairs only
    double max_ratio = 0.0;
    double fitted_exponent = 0.0;  // log-log slope of coefficient vs D at fixed levels
    int fit_level_q = 0;
    int fit_level_r = 0;
    std::int64_t fit_points = 0;
    std::string to_csv() const;
};

DecayReport coefficient_decay_check(const Lattice& lat,
                                    const std::vector<CZMatrixElement>& coeffs,
                                    double alpha, const GoodnessParams& params);

struct ExtractedShift {
    ElementaryShift shift;
    NormalizationAudit audit;
    std::int64_t pair_count = 0;
};

// assemble the depth-(m, n) elementary shift from T~ matrix elements over
// good analysis cubes, rescaled by 2^{(m+n) a/2} D^{d+a}/l(M)^{d+a} and
// divided by the fitted constant C
ExtractedShift extract_shift(const Kernel& K, const Lattice& lat, int m, int n,
                             double alpha, double fitted_C,
                             const GoodnessParams& params = {});

struct ShiftSample {
    std::unique_ptr<Lattice> lattice;
    std::uint64_t seed = 0;
    int m = 0;
    int n = 0;
    double weight = 0.0;  // 2^{-(m+n) alpha/2}, exact
    ElementaryShift shift;
    NormalizationAudit audit;
};

struct ShiftEnsemble {
    double alpha = 1.0;
    std::vector<ShiftSample> samples;
};

ShiftEnsemble sample_shift_ensemble(const Kernel& K, int k_min,
                                    const std::vector<std::pair<int, int>>& depths,
                                    double alpha, double fitted_C,
                                    std::int64_t n_lattices, std::uint64_t seed,
                                    const GoodnessParams& params = {});

using ShiftFamily = std::function<ElementaryShift(const Lattice*)>;

struct AveragedKernel {
    std::vector<std::vector<double>> kernel;  // K(x, y) over finest cells
    std::int64_t samples = 0;
    int dim = 1;
    double alpha = 1.0;
    std::string to_csv() const;
};

// empirical mean over sampled lattices of the dense kernel of family(lat);
// deterministic under a fixed seed
AveragedKernel average_kernel(int dim, int k_min, const ShiftFamily& family,
                              std::int64_t n_samples, std::uint64_t seed,
                              double alpha = 1.0);

}  // namespace dyadlab
