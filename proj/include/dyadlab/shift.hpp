#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dyadlab/haar.hpp"
#include "dyadlab/lattice.hpp"
#include "dyadlab/signal.hpp"

namespace dyadlab {

// One coefficient of a shift's tensor on some active cube Q: couples the
// analysis function e_{in} to the synthesis function e_{out}, where e_{Q,j}
// is the standard Haar function h^j_Q for j >= 1 and the normalized
// indicator |Q|^{-1/2} 1_Q for j = 0 (generalized shifts only).
struct ShiftEntry {
    CubeId in_cube;
    int in_j = 1;
    CubeId out_cube;
    int out_j = 1;
    double value = 0.0;
};

struct ShiftBlock {
    CubeId cube;                      // the active cube Q
    std::vector<ShiftEntry> entries;  // in_cube at depth m, out_cube at depth n below Q
};

struct NormalizationAudit {
    double worst_pair = 0.0;   // max over (Q', Q'') pairs of the sup-norm product
    CubeId worst_cube;
    bool pass = false;         // worst_pair <= 1 + tolerance
};

// Dyadic shift with parameters (m, n): S f = sum over active Q of
// |Q|^{-1} sum of entries value * <f, e_in> e_out.
class ElementaryShift {
  public:
    ElementaryShift() = default;
    ElementaryShift(const Lattice* lat, int m, int n, bool generalized);

    const Lattice& lattice() const { return *lat_; }
    const Lattice* lattice_ptr() const { return lat_; }
    int m() const { return m_; }
    int n() const { return n_; }
    int complexity() const { return m_ > n_ ? m_ : n_; }
    bool generalized() const { return generalized_; }
    bool rescaled() const { return rescaled_; }
    double rescale_factor() const { return rescale_factor_; }

    const std::vector<ShiftBlock>& blocks() const { return blocks_; }
    void add_block(ShiftBlock b);  // validates depths and j-ranges

    // enforce the per-pair sup-norm bound, scaling violating pairs down;
    // records whether any rescaling occurred
    void normalize();
    NormalizationAudit audit(double tol = 1e-9) const;

    ElementaryShift transpose() const;  // swap analysis/synthesis roles
    std::string to_csv() const;

  private:
    const Lattice* lat_ = nullptr;
    int m_ = 0, n_ = 0;
    bool generalized_ = false;
    bool rescaled_ = false;
    double rescale_factor_ = 1.0;
    std::vector<ShiftBlock> blocks_;
};

using ShiftRule = std::function<std::vector<ShiftEntry>(const Lattice&, const CubeId&)>;

// Assemble a shift from a per-cube entry generator; normalization is enforced
// after assembly.
ElementaryShift build_shift(const Lattice* lat, int m, int n, const ShiftRule& rule,
                            const std::vector<CubeId>& active, bool generalized = false);

// all cubes that admit depth-max(m,n) descendants usable as shift cubes
std::vector<CubeId> all_active_cubes(const Lattice& lat, int m, int n);

// signs indexed per (cube, j); maps h^j_Q to sign * h^j_Q
ElementaryShift haar_multiplier(const Lattice* lat,
                                const std::function<double(const CubeId&, int)>& sign);
ElementaryShift petermichl_shift(const Lattice* lat);

struct Paraproduct {
    ElementaryShift shift;
    double symbol_scale = 1.0;  // sup norm the martingale differences were divided by
};
Paraproduct paraproduct(const StepFunction& b);

StepFunction apply(const ElementaryShift& s, const StepFunction& f);
StepFunction apply_weighted(const ElementaryShift& s, const Weight& u, const StepFunction& f);
StepFunction adjoint_apply(const ElementaryShift& s, const Weight& v, const StepFunction& g);

// dense kernel matrix K(x,y) over finest cells; apply f = K f * cellvol
std::vector<std::vector<double>> dense_kernel(const ElementaryShift& s);

ElementaryShift restrict_shift(const ElementaryShift& s, const std::vector<CubeId>& subset);

struct NormReport {
    double norm = 0.0;
    double a2 = 0.0;
    int iterations = 0;
    double residual = 0.0;
    std::uint64_t seed = 0;
    bool converged = false;
};

// ||S||_{L^2(w)} via power iteration on the similarity-transformed operator
NormReport operator_norm(const ElementaryShift& s, const Weight& w, double tol = 1e-8,
                         int max_iter = 10000, std::uint64_t seed = 1);
// ||S_mu||_{L^2(mu) -> L^2(nu)}
NormReport two_weight_norm(const ElementaryShift& s, const Weight& mu, const Weight& nu,
                           double tol = 1e-8, int max_iter = 10000, std::uint64_t seed = 1);

// L^1-normalized stress inputs: single-cell spikes and sparse random sums
std::vector<StepFunction> spike_corpus(const Lattice* lat, int n_random, std::uint64_t seed);

// sup over corpus of sup_lambda lambda |{|Sf| > lambda}| / ||f||_1 (exact in lambda)
double weak11_constant(const ElementaryShift& s, const std::vector<StepFunction>& corpus);

struct TestingReport {
    double B = 0.0;
    double joint_a2 = 0.0;
    double measured_norm = 0.0;
    double predicted_bracket = 0.0;  // up to an absolute constant
    int r = 0;
    int d = 1;
    double worst_direct_ratio = 0.0;
    double worst_adjoint_ratio = 0.0;
    CubeId argmax_direct;
    CubeId argmax_adjoint;
};

TestingReport testing_constants(const ElementaryShift& s, const Weight& u, const Weight& v);

struct PredictedBounds {
    double two_weight_bracket = 0.0;
    double one_weight_bracket = 0.0;
    double B1 = 0.0;
    double weak_bound = 0.0;
};

PredictedBounds predicted_bounds(double B, double joint_a2, double B2, double a2, int r,
                                 int m, int d);

}  // namespace dyadlab
