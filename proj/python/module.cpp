// Python bindings for the dyadlab core library.

#include <pybind11/functional.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dyadlab/decomp.hpp"
#include "dyadlab/haar.hpp"
#include "dyadlab/lattice.hpp"
#include "dyadlab/represent.hpp"
#include "dyadlab/rng.hpp"
#include "dyadlab/shift.hpp"
#include "dyadlab/signal.hpp"

namespace py = pybind11;
using namespace dyadlab;

PYBIND11_MODULE(_dyadlab, m) {
    m.doc() = "Dyadic harmonic analysis laboratory: lattices, Haar systems, "
              "shifts, weights, and decompositions.";

    // ----------------------------------------------------------- lattice
    py::class_<CubeId>(m, "CubeId")
        .def(py::init([](int level, std::int64_t i0, std::int64_t i1) {
                 return CubeId{level, {i0, i1}};
             }),
             py::arg("level"), py::arg("i0") = 0, py::arg("i1") = 0)
        .def_readwrite("level", &CubeId::level)
        .def_property(
            "index",
            [](const CubeId& q) { return std::make_pair(q.index[0], q.index[1]); },
            [](CubeId& q, std::pair<std::int64_t, std::int64_t> v) {
                q.index = {v.first, v.second};
            })
        .def(py::self == py::self)
        .def(py::self < py::self)
        .def("__repr__", [](const CubeId& q) {
            return "CubeId(level=" + std::to_string(q.level) + ", index=(" +
                   std::to_string(q.index[0]) + ", " + std::to_string(q.index[1]) + "))";
        });

    py::class_<GoodnessParams>(m, "GoodnessParams")
        .def(py::init<>())
        .def(py::init([](int r0, double gamma) { return GoodnessParams{r0, gamma}; }),
             py::arg("r0"), py::arg("gamma"))
        .def_readwrite("r0", &GoodnessParams::r0)
        .def_readwrite("gamma", &GoodnessParams::gamma);

    m.def("goodness_gamma", &goodness_gamma, py::arg("dim"), py::arg("alpha"));

    py::class_<Lattice>(m, "Lattice")
        .def_static("standard", &Lattice::standard, py::arg("dim"), py::arg("k_min"))
        .def_static("sampled", &Lattice::sampled, py::arg("dim"), py::arg("k_min"),
                    py::arg("seed"))
        .def_property_readonly("dim", &Lattice::dim)
        .def_property_readonly("k_min", &Lattice::k_min)
        .def_property_readonly("levels", &Lattice::levels)
        .def("cube_count", &Lattice::cube_count, py::arg("level"))
        .def("total_cells", &Lattice::total_cells)
        .def("flat_index", &Lattice::flat_index, py::arg("cube"))
        .def("from_flat", &Lattice::from_flat, py::arg("level"), py::arg("flat"))
        .def("children", &Lattice::children, py::arg("cube"))
        .def("parent", &Lattice::parent, py::arg("cube"))
        .def("descendants", &Lattice::descendants, py::arg("cube"), py::arg("depth"))
        .def("cell_indices", &Lattice::cell_indices, py::arg("cube"))
        .def("contains", &Lattice::contains, py::arg("outer"), py::arg("inner"))
        .def("side_length", &Lattice::side_length, py::arg("level"))
        .def("volume", &Lattice::volume, py::arg("cube"))
        .def("distance", &Lattice::distance, py::arg("a"), py::arg("b"))
        .def("long_distance", &Lattice::long_distance, py::arg("a"), py::arg("b"))
        .def("is_bad", &Lattice::is_bad, py::arg("cube"),
             py::arg("params") = GoodnessParams{})
        .def("serialize", &Lattice::serialize)
        .def_static("deserialize", &Lattice::deserialize, py::arg("text"));

    py::class_<PiBadEstimate>(m, "PiBadEstimate")
        .def_readonly("estimate", &PiBadEstimate::estimate)
        .def_readonly("std_error", &PiBadEstimate::std_error)
        .def_readonly("n_samples", &PiBadEstimate::n_samples);

    m.def("estimate_pi_bad", &estimate_pi_bad, py::arg("dim"), py::arg("r0"),
          py::arg("gamma"), py::arg("q_level"), py::arg("n_samples"), py::arg("seed"));

    // ------------------------------------------------------------ signal
    py::class_<StepFunction>(m, "StepFunction")
        .def(py::init<const Lattice*, double>(), py::arg("lattice"), py::arg("fill") = 0.0,
             py::keep_alive<1, 2>())
        .def(py::init<const Lattice*, std::vector<double>>(), py::arg("lattice"),
             py::arg("values"), py::keep_alive<1, 2>())
        .def("__len__", &StepFunction::size)
        .def("__getitem__",
             [](const StepFunction& f, std::int64_t i) {
                 if (i < 0 || i >= f.size()) throw py::index_error();
                 return f[i];
             })
        .def("__setitem__",
             [](StepFunction& f, std::int64_t i, double v) {
                 if (i < 0 || i >= f.size()) throw py::index_error();
                 f[i] = v;
             })
        .def("values", [](const StepFunction& f) { return f.values(); })
        .def("cell_volume", &StepFunction::cell_volume)
        .def("integral", py::overload_cast<>(&StepFunction::integral, py::const_))
        .def("integral", py::overload_cast<const CubeId&>(&StepFunction::integral, py::const_),
             py::arg("cube"))
        .def("l1_norm", &StepFunction::l1_norm)
        .def("l2_norm", &StepFunction::l2_norm)
        .def("sup_norm", &StepFunction::sup_norm)
        .def("inner", &StepFunction::inner, py::arg("other"))
        .def("restricted", &StepFunction::restricted, py::arg("cube"))
        .def(py::self + py::self)
        .def(py::self - py::self)
        .def("__rmul__", [](const StepFunction& f, double c) { return c * f; });

    m.def("pointwise_product", &pointwise_product, py::arg("a"), py::arg("b"));
    m.def("average", &average, py::arg("f"), py::arg("cube"));
    m.def("weighted_average", &weighted_average, py::arg("f"), py::arg("w"), py::arg("cube"));

    py::class_<Weight>(m, "Weight")
        .def(py::init<StepFunction>(), py::arg("density"), py::keep_alive<1, 2>())
        .def("density", &Weight::density)
        .def("measure", &Weight::measure, py::arg("cube"))
        .def("total", &Weight::total)
        .def("reciprocal", &Weight::reciprocal);

    py::class_<A2Result>(m, "A2Result")
        .def_readonly("value", &A2Result::value)
        .def_readonly("argmax", &A2Result::argmax);

    m.def("a2_constant", &a2_constant, py::arg("w"));
    m.def("joint_a2", &joint_a2, py::arg("u"), py::arg("v"));
    m.def("power_weight", &power_weight, py::arg("lattice"), py::arg("exponent"),
          py::arg("center"), py::keep_alive<0, 1>());
    m.def("random_a2_weight", &random_a2_weight, py::arg("lattice"), py::arg("target"),
          py::arg("seed"), py::keep_alive<0, 1>());

    // -------------------------------------------------------------- haar
    py::class_<HaarCoefficients>(m, "HaarCoefficients")
        .def("at", py::overload_cast<const CubeId&, int>(&HaarCoefficients::at, py::const_),
             py::arg("cube"), py::arg("j"))
        .def("root_average", py::overload_cast<>(&HaarCoefficients::root_average, py::const_))
        .def("sum_of_squares", &HaarCoefficients::sum_of_squares);

    m.def("standard_haar", &standard_haar, py::arg("lattice"), py::arg("cube"), py::arg("j"),
          py::keep_alive<0, 1>());
    m.def("analyze", &analyze, py::arg("f"), py::keep_alive<0, 1>());
    m.def("synthesize", &synthesize, py::arg("coefficients"), py::keep_alive<0, 1>());

    // ------------------------------------------------------------- shift
    py::class_<NormalizationAudit>(m, "NormalizationAudit")
        .def_readonly("worst_pair", &NormalizationAudit::worst_pair)
        .def_readonly("worst_cube", &NormalizationAudit::worst_cube)
        .def_readonly("pass_", &NormalizationAudit::pass);

    py::class_<ElementaryShift>(m, "ElementaryShift")
        .def_property_readonly("m", &ElementaryShift::m)
        .def_property_readonly("n", &ElementaryShift::n)
        .def_property_readonly("complexity", &ElementaryShift::complexity)
        .def_property_readonly("generalized", &ElementaryShift::generalized)
        .def("audit", &ElementaryShift::audit, py::arg("tol") = 1e-9)
        .def("transpose", &ElementaryShift::transpose);

    m.def("petermichl_shift", &petermichl_shift, py::arg("lattice"), py::keep_alive<0, 1>());
    m.def(
        "haar_multiplier",
        [](const Lattice* lat, const std::function<double(const CubeId&, int)>& sign) {
            return haar_multiplier(lat, sign);
        },
        py::arg("lattice"), py::arg("sign"), py::keep_alive<0, 1>());

    py::class_<Paraproduct>(m, "Paraproduct")
        .def_readonly("shift", &Paraproduct::shift)
        .def_readonly("symbol_scale", &Paraproduct::symbol_scale);
    m.def("paraproduct", &paraproduct, py::arg("symbol"));

    m.def("apply", &apply, py::arg("shift"), py::arg("f"), py::keep_alive<0, 1>());
    m.def("apply_weighted", &apply_weighted, py::arg("shift"), py::arg("u"), py::arg("f"));
    m.def("adjoint_apply", &adjoint_apply, py::arg("shift"), py::arg("v"), py::arg("g"));
    m.def("dense_kernel", &dense_kernel, py::arg("shift"));

    py::class_<NormReport>(m, "NormReport")
        .def_readonly("norm", &NormReport::norm)
        .def_readonly("a2", &NormReport::a2)
        .def_readonly("iterations", &NormReport::iterations)
        .def_readonly("residual", &NormReport::residual)
        .def_readonly("converged", &NormReport::converged);

    m.def("operator_norm", &operator_norm, py::arg("shift"), py::arg("w"),
          py::arg("tol") = 1e-8, py::arg("max_iter") = 10000, py::arg("seed") = 1);
    m.def("two_weight_norm", &two_weight_norm, py::arg("shift"), py::arg("mu"), py::arg("nu"),
          py::arg("tol") = 1e-8, py::arg("max_iter") = 10000, py::arg("seed") = 1);

    m.def("spike_corpus", &spike_corpus, py::arg("lattice"), py::arg("n_random"),
          py::arg("seed"));
    m.def("weak11_constant", &weak11_constant, py::arg("shift"), py::arg("corpus"));

    py::class_<TestingReport>(m, "TestingReport")
        .def_readonly("B", &TestingReport::B)
        .def_readonly("joint_a2", &TestingReport::joint_a2)
        .def_readonly("measured_norm", &TestingReport::measured_norm)
        .def_readonly("predicted_bracket", &TestingReport::predicted_bracket);
    m.def("testing_constants", &testing_constants, py::arg("shift"), py::arg("u"),
          py::arg("v"));

    py::class_<PredictedBounds>(m, "PredictedBounds")
        .def_readonly("two_weight_bracket", &PredictedBounds::two_weight_bracket)
        .def_readonly("one_weight_bracket", &PredictedBounds::one_weight_bracket)
        .def_readonly("B1", &PredictedBounds::B1)
        .def_readonly("weak_bound", &PredictedBounds::weak_bound);
    m.def("predicted_bounds", &predicted_bounds, py::arg("B"), py::arg("joint_a2"),
          py::arg("B2"), py::arg("a2"), py::arg("r"), py::arg("m"), py::arg("d"));

    // ------------------------------------------------------------ decomp
    py::class_<CubeField>(m, "CubeField")
        .def(py::init<const Lattice*, double>(), py::arg("lattice"), py::arg("fill") = 0.0,
             py::keep_alive<1, 2>())
        .def("get", [](const CubeField& c, const CubeId& q) { return c.at(q); },
             py::arg("cube"))
        .def("set", [](CubeField& c, const CubeId& q, double v) { c.at(q) = v; },
             py::arg("cube"), py::arg("value"));

    py::class_<CZDecomposition>(m, "CZDecomposition")
        .def_readonly("lambda_", &CZDecomposition::lambda)
        .def_readonly("g", &CZDecomposition::g)
        .def_readonly("cubes", &CZDecomposition::cubes)
        .def_readonly("bad_parts", &CZDecomposition::bad_parts);
    m.def("cz_decompose", &cz_decompose, py::arg("f"), py::arg("lambda_"), py::keep_alive<0, 1>());

    py::class_<StoppingForest>(m, "StoppingForest")
        .def_readonly("root", &StoppingForest::root)
        .def_readonly("generations", &StoppingForest::generations);
    m.def("stopping_forest", &stopping_forest, py::arg("root"), py::arg("w"),
          py::arg("ambient"));

    py::class_<PackingReport>(m, "PackingReport")
        .def_readonly("lebesgue_ratio", &PackingReport::lebesgue_ratio)
        .def_readonly("l2_overlap_ratio", &PackingReport::l2_overlap_ratio)
        .def_readonly("weighted_ratio", &PackingReport::weighted_ratio);
    m.def("packing_report", &packing_report, py::arg("forest"), py::arg("w"));

    py::class_<CarlesonViolation>(m, "CarlesonViolation")
        .def_readonly("witness", &CarlesonViolation::witness)
        .def_readonly("sum", &CarlesonViolation::sum)
        .def_readonly("measure", &CarlesonViolation::measure);
    py::class_<CarlesonResult>(m, "CarlesonResult")
        .def_readonly("ratio", &CarlesonResult::ratio)
        .def_readonly("violation", &CarlesonResult::violation);
    m.def("carleson_embedding_ratio", &carleson_embedding_ratio, py::arg("a"), py::arg("mu"),
          py::arg("f"));

    m.def("jn_maximal", &jn_maximal, py::arg("shift"), py::arg("P"), py::arg("w"), py::keep_alive<0, 1>());

    py::class_<JNCurve>(m, "JNCurve")
        .def_readonly("t", &JNCurve::t)
        .def_readonly("lebesgue_measure", &JNCurve::lebesgue_measure)
        .def_readonly("lebesgue_bound", &JNCurve::lebesgue_bound)
        .def_readonly("winv_measure", &JNCurve::winv_measure)
        .def_readonly("winv_bound", &JNCurve::winv_bound)
        .def_readonly("all_pass", &JNCurve::all_pass)
        .def_readonly("fitted_tail_slope", &JNCurve::fitted_tail_slope);
    m.def("jn_distribution", &jn_distribution, py::arg("fstar"), py::arg("w"), py::arg("R"),
          py::arg("B1"), py::arg("t_max") = 40);

    // --------------------------------------------------------- represent
    py::class_<AveragedKernel>(m, "AveragedKernel")
        .def_readonly("kernel", &AveragedKernel::kernel)
        .def_readonly("samples", &AveragedKernel::samples);
    m.def(
        "average_petermichl_kernel",
        [](int dim, int k_min, std::int64_t n_samples, std::uint64_t seed) {
            return average_kernel(
                dim, k_min, [](const Lattice* l) { return petermichl_shift(l); }, n_samples,
                seed);
        },
        py::arg("dim"), py::arg("k_min"), py::arg("n_samples"), py::arg("seed"));

    // --------------------------------------------------------------- rng
    m.def("substream", &substream, py::arg("seed"), py::arg("a"), py::arg("b") = 0);
}
