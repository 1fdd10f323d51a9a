#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dyadlab/lattice.hpp"
#include "dyadlab/shift.hpp"
#include "dyadlab/signal.hpp"

namespace dyadlab {

// one scalar per lattice cube (all levels)
class CubeField {
  public:
    CubeField() = default;
    explicit CubeField(const Lattice* lat, double fill = 0.0);

    const Lattice& lattice() const { return *lat_; }
    double& at(const CubeId& q);
    double at(const CubeId& q) const;

  private:
    const Lattice* lat_ = nullptr;
    std::vector<std::vector<double>> levels_;
};

struct CZDecomposition {
    double lambda = 0.0;
    StepFunction g;
    std::vector<CubeId> cubes;           // selected maximal cubes, pairwise disjoint
    std::vector<StepFunction> bad_parts; // b_Q aligned with cubes
};

// standard Calderon-Zygmund decomposition at height lambda: selected cubes are
// the maximal ones whose |f|-average exceeds lambda
CZDecomposition cz_decompose(const StepFunction& f, double lambda);

// level families with scales separated by r+1: family j holds the levels l
// with (-l) mod (r+1) == j
std::vector<std::vector<int>> slice_lattice(const Lattice& lat, int r);

// class index k of a cube: 2^k <= <w>_Q <w^{-1}>_Q < 2^{k+1}
std::map<int, std::vector<CubeId>> density_classes(const Weight& w);

struct StoppingForest {
    CubeId root;
    std::vector<std::vector<CubeId>> generations;  // generations[0] = {root}
    std::map<CubeId, std::vector<CubeId>> partition;  // stopping cube -> attached cubes
};

// corona construction: descend to maximal ambient cubes whose w-density more
// than quadruples relative to their stopping parent
StoppingForest stopping_forest(const CubeId& q0, const Weight& w,
                               const std::vector<CubeId>& ambient);

struct PackingReport {
    double lebesgue_ratio = 0.0;   // sup_R sum |Q| / |R|          (bound 4/3)
    double l2_overlap_ratio = 0.0; // sup_R ||sum 1_Q||_2/|R|^{1/2} (bound 2)
    double weighted_ratio = 0.0;   // sup_R sum w(Q)/([w]_{A2}w(R)) (bound 16/3)
    CubeId argmax_lebesgue;
    CubeId argmax_l2;
    CubeId argmax_weighted;
};

PackingReport packing_report(const StoppingForest& forest, const Weight& w);

struct CarlesonViolation {
    CubeId witness;
    double sum = 0.0;
    double measure = 0.0;
};

// verifies sum_{Q subset R} a_Q <= mu(R) for every R, then returns
// sum_R a_R <f>^2 / ||f||^2_mu; a violated condition is reported instead
struct CarlesonResult {
    double ratio = 0.0;
    std::optional<CarlesonViolation> violation;
};
CarlesonResult carleson_embedding_ratio(const CubeField& a, const Weight& mu,
                                        const StepFunction& f);

// per-cube kernel pieces f_Q(x) = integral of a_Q(x,y) w(y) dy for the blocks
// of a shift; returns the pointwise maximal function of partial sums
// sup_{Q ni x} |sum_{R' in P, R' strictly containing Q} f_{R'}(x)|
StepFunction jn_maximal(const ElementaryShift& s, const std::vector<CubeId>& P,
                        const Weight& w);

struct JNCurve {
    std::vector<double> t;
    std::vector<double> lebesgue_measure;   // |{x in R: f* > 16 t w(R)/|R|}|
    std::vector<double> lebesgue_bound;     // 2 sqrt2 2^{-t/2B1} |R|
    std::vector<double> winv_measure;       // w^{-1}({f* > 20 t w(R)/|R|})
    std::vector<double> winv_bound;         // 24 2^{-t/2B1} w^{-1}(R)
    bool all_pass = true;
    double fitted_tail_slope = 0.0;  // log2 lebesgue measure vs t
};

JNCurve jn_distribution(const StepFunction& fstar, const Weight& w, const CubeId& R,
                        double B1, int t_max = 40);

// density band of the corona splitting: smallest integer alpha >= 0 with
// w(Q)/|Q| > 4^{-alpha} w(R)/|R|
int p_alpha_class(const Weight& w, const CubeId& q, const CubeId& r);

}  // namespace dyadlab
