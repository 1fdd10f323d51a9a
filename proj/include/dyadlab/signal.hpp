#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dyadlab/lattice.hpp"

namespace dyadlab {

// Real-valued function constant on the finest-level cells of a lattice.
// Values are stored in natural (row-major) cell order.
class StepFunction {
  public:
    StepFunction() = default;
    StepFunction(const Lattice* lat, double fill = 0.0);
    StepFunction(const Lattice* lat, std::vector<double> values);

    const Lattice& lattice() const { return *lat_; }
    const Lattice* lattice_ptr() const { return lat_; }
    std::int64_t size() const { return static_cast<std::int64_t>(values_.size()); }
    double cell_volume() const;

    double& operator[](std::int64_t i) { return values_[static_cast<size_t>(i)]; }
    double operator[](std::int64_t i) const { return values_[static_cast<size_t>(i)]; }
    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }

    double integral() const;                    // over the root cube
    double integral(const CubeId& q) const;     // over a cube
    double l1_norm() const;
    double l2_norm() const;
    double sup_norm() const;
    double inner(const StepFunction& g) const;  // Lebesgue inner product

    StepFunction restricted(const CubeId& q) const;  // f * 1_Q

    // cells covered by a cube, as flat finest-level indices
    std::vector<std::int64_t> cells_of(const CubeId& q) const;

    std::string to_csv() const;

  private:
    const Lattice* lat_ = nullptr;
    std::vector<double> values_;
};

StepFunction operator+(const StepFunction& a, const StepFunction& b);
StepFunction operator-(const StepFunction& a, const StepFunction& b);
StepFunction operator*(double c, const StepFunction& f);
StepFunction pointwise_product(const StepFunction& a, const StepFunction& b);

// A strictly positive step function inducing the measure w(Q) = ∫_Q w dx.
class Weight {
  public:
    Weight() = default;
    explicit Weight(StepFunction f);

    const StepFunction& density() const { return f_; }
    const Lattice& lattice() const { return f_.lattice(); }
    double operator[](std::int64_t i) const { return f_[i]; }

    double measure(const CubeId& q) const { return f_.integral(q); }
    double total() const { return f_.integral(); }

    Weight reciprocal() const;  // pointwise 1/w at finest cells

  private:
    StepFunction f_;
};

double average(const StepFunction& f, const CubeId& q);
double weighted_average(const StepFunction& f, const Weight& w, const CubeId& q);

struct A2Result {
    double value = 0.0;
    CubeId argmax;
};

A2Result a2_constant(const Weight& w);
A2Result joint_a2(const Weight& u, const Weight& v);

Weight power_weight(const Lattice* lat, double exponent, const std::vector<double>& center);
Weight random_a2_weight(const Lattice* lat, double target, std::uint64_t seed);

struct DistributionCurve {
    std::vector<double> thresholds;
    std::vector<double> measures;
};

// m-measure of {|f| > t} for each threshold; pass nullptr for Lebesgue.
DistributionCurve distribution_function(const StepFunction& f, const Weight* m,
                                        const std::vector<double>& thresholds);

}  // namespace dyadlab
