#include "iga/markers.hpp"

namespace iga {

MarkerResult residual_markers(const StateProblem& problem, const SplineFunction& u,
                              const GeometryMapping& m, const Eigen::VectorXd& alpha, MarkerMode mode,
                              int quad) {
    MarkerResult out;
    if (mode == MarkerMode::Weak) {
        // the residual entries against the enriched basis are exactly the
        // residual of the same state function re-expressed there
        out.enriched = u.space->uniform_rebase();
        const SplineFunction ubar = prolong(u, out.enriched);
        const StateAssembly sa = problem.state_residual(ubar, m, alpha, {});
        out.function_indicators = sa.residual.array().square();
        out.total = out.function_indicators.sum();
        return out;
    }

    const SplineFunction map = m.spline();
    IntegrateOptions io;
    io.rule = quad;
    io.nders = 3;
    io.map_third = true;
    const auto& cells = u.space->active_cells();
    io.res_size = static_cast<int>(cells.size());
    const AssemblyOutput res = integrate(
        {u.space.get(), m.space.get()}, &map,
        [&](const CellQuad& cq, LocalOut& lo) {
            // attribute the box to the state-space cell containing it
            const double cx = 0.5 * (cq.rect[0] + cq.rect[1]);
            const double cy = 0.5 * (cq.rect[2] + cq.rect[3]);
            const CellId owner = u.space->locate(cx, cy);
            int idx = -1;
            for (std::size_t k = 0; k < cells.size(); ++k)
                if (cells[k] == owner) idx = static_cast<int>(k);
            if (idx < 0) return;
            for (std::size_t q = 0; q < cq.pts.size(); ++q) {
                const auto dens = problem.strong_density(u, cq.map[q], cq.pts[q], alpha);
                if (!dens) throw std::invalid_argument("residual_markers: no strong-form density for this problem");
                lo.add(idx, cq.w[q] * (*dens) * cq.map[q].detJ);
            }
        },
        io);
    for (std::size_t k = 0; k < cells.size(); ++k) out.cell_indicators.push_back({cells[k], res.residual[k]});
    out.boundary_penalty = problem.strong_boundary_penalty(u, m, alpha);
    out.total = res.residual.sum() + out.boundary_penalty;
    return out;
}

} // namespace iga
