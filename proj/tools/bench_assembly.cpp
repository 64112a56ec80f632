// Benchmark of the OpenMP element loop against the serial reference on the
// nonlinear grid-generation system assembly.
#include "iga/egg.hpp"
#include "iga/validation.hpp"

#include <omp.h>

#include <chrono>
#include <iostream>

using namespace iga;

namespace {
double seconds(const std::function<void()>& f, int reps) {
    const auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r) f();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / reps;
}
} // namespace

int main(int argc, char** argv) {
    const int cells = (argc > 1) ? std::atoi(argv[1]) : 14;
    const int reps = (argc > 2) ? std::atoi(argv[2]) : 3;

    const BoundaryCurve curve = validation_curve();
    const Eigen::VectorXd alpha = Eigen::VectorXd::Constant(4, 0.25);
    GeometryMapping m = parameterize(alpha, curve, make_space(3, cells, cells), 1e-4);
    std::cout << "space: " << m.space->num_active() << " active functions, "
              << m.space->active_cells().size() << " active cells, " << m.space->num_levels() << " levels\n";
    std::cout << "threads: " << omp_get_max_threads() << "\n";

    EggOptions serial_opts, parallel_opts;
    serial_opts.parallel = false;
    parallel_opts.parallel = true;

    EggSystem ref, par;
    const double t_serial = seconds([&] { ref = egg_system(m, true, true, serial_opts); }, reps);
    const double t_parallel = seconds([&] { par = egg_system(m, true, true, parallel_opts); }, reps);

    const double dres = (ref.F - par.F).cwiseAbs().maxCoeff();
    const double djac =
        (Eigen::MatrixXd(*ref.dF_dcI) - Eigen::MatrixXd(*par.dF_dcI)).cwiseAbs().maxCoeff();
    std::cout << "serial   " << t_serial << " s\n";
    std::cout << "parallel " << t_parallel << " s  (speedup " << t_serial / t_parallel << "x)\n";
    std::cout << "max |residual difference| = " << dres << "\n";
    std::cout << "max |jacobian difference| = " << djac << "\n";
    return (dres == 0.0 && djac == 0.0) ? 0 : 2;
}
