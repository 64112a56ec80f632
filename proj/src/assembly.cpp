#include "iga/assembly.hpp"

#include <omp.h>

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace iga {

namespace {

struct BoxFrame {
    int bx = 0, by = 0;             // finest common base cell counts
    std::vector<int> shift;         // per space: level shift so that box depth d maps to level d+shift
};

BoxFrame make_frame(const std::vector<const HierarchicalSpace*>& spaces) {
    BoxFrame f;
    for (const auto* s : spaces) {
        f.bx = std::max(f.bx, s->cells_x(0));
        f.by = std::max(f.by, s->cells_y(0));
    }
    for (const auto* s : spaces) {
        const int rx = f.bx / s->cells_x(0), ry = f.by / s->cells_y(0);
        if (rx * s->cells_x(0) != f.bx || ry * s->cells_y(0) != f.by || rx != ry || (rx & (rx - 1)) != 0)
            throw std::invalid_argument("joint_cells: spaces have incommensurate bases");
        int k = 0;
        while ((1 << k) < rx) ++k;
        f.shift.push_back(k);
    }
    return f;
}

void descend(const std::vector<const HierarchicalSpace*>& spaces, const BoxFrame& f, int d,
             std::int64_t ix, std::int64_t iy, int prune_side, std::vector<JointCell>& out) {
    // prune to boxes touching the requested side
    if (prune_side >= 0) {
        const std::int64_t nx = static_cast<std::int64_t>(f.bx) << d;
        const std::int64_t ny = static_cast<std::int64_t>(f.by) << d;
        const Side s = static_cast<Side>(prune_side);
        if ((s == Side::South && iy != 0) || (s == Side::North && iy != ny - 1) ||
            (s == Side::West && ix != 0) || (s == Side::East && ix != nx - 1))
            return;
    }
    bool all_cover = true;
    for (std::size_t i = 0; i < spaces.size() && all_cover; ++i) {
        const int l = d + f.shift[i];
        const auto st = spaces[i]->cell_state({l, static_cast<int>(ix), static_cast<int>(iy)});
        all_cover = st != HierarchicalSpace::Refined;
    }
    if (all_cover) {
        JointCell jc;
        const double wx = 1.0 / (static_cast<double>(f.bx) * (1 << d));
        const double wy = 1.0 / (static_cast<double>(f.by) * (1 << d));
        jc.rect = {ix * wx, (ix + 1) * wx, iy * wy, (iy + 1) * wy};
        const double cx = 0.5 * (jc.rect[0] + jc.rect[1]), cy = 0.5 * (jc.rect[2] + jc.rect[3]);
        for (const auto* s : spaces) jc.owner.push_back(s->locate(cx, cy));
        out.push_back(std::move(jc));
        return;
    }
    for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx)
            descend(spaces, f, d + 1, 2 * ix + dx, 2 * iy + dy, prune_side, out);
}

std::vector<JointCell> enumerate(const std::vector<const HierarchicalSpace*>& spaces, int prune_side) {
    const BoxFrame f = make_frame(spaces);
    std::vector<JointCell> out;
    for (int iy = 0; iy < f.by; ++iy)
        for (int ix = 0; ix < f.bx; ++ix) descend(spaces, f, 0, ix, iy, prune_side, out);
    return out;
}

MapData map_at(const HierarchicalSpace::CellBasis& cb, const Eigen::MatrixXd& coef, int q, bool third) {
    MapData m;
    const int n = static_cast<int>(cb.funcs.size());
    Eigen::Matrix<double, 2, Eigen::Dynamic> loc(2, n);
    for (int j = 0; j < n; ++j) loc.col(j) = coef.row(cb.funcs[j]).transpose();
    auto tab = [&](int t) { return cb.tables[t].col(q); };
    m.x = loc * tab(0);
    m.J.col(0) = loc * tab(1);
    m.J.col(1) = loc * tab(2);
    m.detJ = m.J(0, 0) * m.J(1, 1) - m.J(0, 1) * m.J(1, 0);
    m.Jinv << m.J(1, 1), -m.J(0, 1), -m.J(1, 0), m.J(0, 0);
    m.Jinv /= m.detJ;
    m.Hx.setZero();
    m.Hy.setZero();
    if (cb.nders >= 2) {
        Eigen::Matrix<double, 2, 3> H;
        H.col(0) = loc * tab(3);
        H.col(1) = loc * tab(4);
        H.col(2) = loc * tab(5);
        m.Hx = H.row(0).transpose();
        m.Hy = H.row(1).transpose();
    }
    if (third && cb.nders >= 3) {
        Eigen::Matrix<double, 2, 4> T;
        for (int k = 0; k < 4; ++k) T.col(k) = loc * tab(6 + k);
        m.Tx = T.row(0).transpose();
        m.Ty = T.row(1).transpose();
    }
    return m;
}

struct LoopPlan {
    std::vector<JointCell> cells;
    std::vector<const HierarchicalSpace*> spaces;
    int map_space = -1;  // index into spaces for the mapping's space, -1 if separate
    const SplineFunction* mapping = nullptr;
};

CellQuad build_quad(const LoopPlan& plan, const JointCell& jc, const IntegrateOptions& opts,
                    bool boundary, Side side) {
    int rule_n = opts.rule;
    if (opts.rule_subcell > 0 && plan.map_space >= 0) {
        const auto own = plan.spaces[plan.map_space]->cell_rect(jc.owner[plan.map_space]);
        const bool strict = (own[1] - own[0]) > 1.5 * (jc.rect[1] - jc.rect[0]) ||
                            (own[3] - own[2]) > 1.5 * (jc.rect[3] - jc.rect[2]);
        if (strict) rule_n = opts.rule_subcell;
    }
    const QuadratureRule g = gauss_rule(rule_n);
    CellQuad cq;
    cq.rect = jc.rect;
    const double hx = jc.rect[1] - jc.rect[0], hy = jc.rect[3] - jc.rect[2];

    std::vector<double> xs, ys;
    if (!boundary) {
        for (int q = 0; q < g.size(); ++q) xs.push_back(jc.rect[0] + hx * g.points[q]);
        for (int q = 0; q < g.size(); ++q) ys.push_back(jc.rect[2] + hy * g.points[q]);
        for (int qx = 0; qx < g.size(); ++qx)
            for (int qy = 0; qy < g.size(); ++qy) {
                cq.pts.emplace_back(xs[qx], ys[qy]);
                cq.w.push_back(g.weights[qx] * g.weights[qy] * hx * hy);
            }
    } else {
        cq.is_boundary = true;
        cq.side = side;
        switch (side) {
            case Side::South:
                for (int q = 0; q < g.size(); ++q) xs.push_back(jc.rect[0] + hx * g.points[q]);
                ys = {0.0};
                cq.tangent_axis = 0;
                break;
            case Side::North:
                for (int q = 0; q < g.size(); ++q) xs.push_back(jc.rect[0] + hx * g.points[q]);
                ys = {1.0};
                cq.tangent_axis = 0;
                break;
            case Side::West:
                xs = {0.0};
                for (int q = 0; q < g.size(); ++q) ys.push_back(jc.rect[2] + hy * g.points[q]);
                cq.tangent_axis = 1;
                break;
            case Side::East:
                xs = {1.0};
                for (int q = 0; q < g.size(); ++q) ys.push_back(jc.rect[2] + hy * g.points[q]);
                cq.tangent_axis = 1;
                break;
        }
        const double h = (cq.tangent_axis == 0) ? hx : hy;
        for (int q = 0; q < g.size(); ++q) {
            const double t = (cq.tangent_axis == 0) ? xs[q] : ys[q];
            cq.pts.emplace_back(cq.tangent_axis == 0 ? t : xs[0], cq.tangent_axis == 0 ? ys[0] : t);
            cq.w.push_back(g.weights[q] * h);
        }
        if (cq.tangent_axis == 0)
            ys.assign(1, ys[0]);
        else
            xs.assign(1, xs[0]);
    }

    for (std::size_t i = 0; i < plan.spaces.size(); ++i)
        cq.basis.push_back(plan.spaces[i]->eval_on_cell(jc.owner[i], xs, ys, opts.nders));

    if (plan.mapping) {
        const HierarchicalSpace::CellBasis* mb;
        HierarchicalSpace::CellBasis own;
        if (plan.map_space >= 0) {
            mb = &cq.basis[plan.map_space];
        } else {
            const CellId c = plan.mapping->space->locate(0.5 * (jc.rect[0] + jc.rect[1]),
                                                         0.5 * (jc.rect[2] + jc.rect[3]));
            own = plan.mapping->space->eval_on_cell(c, xs, ys, opts.nders);
            mb = &own;
        }
        const int nq = static_cast<int>(cq.pts.size());
        for (int q = 0; q < nq; ++q) cq.map.push_back(map_at(*mb, plan.mapping->coeffs, q, opts.map_third));
    }
    return cq;
}

AssemblyOutput run_loop(const LoopPlan& plan, const Kernel& kernel, const IntegrateOptions& opts,
                        bool boundary, const std::vector<Side>& sides, bool parallel) {
    std::vector<std::pair<const JointCell*, Side>> work;
    if (!boundary) {
        for (const auto& c : plan.cells) work.push_back({&c, Side::South});
    }
    AssemblyOutput out;
    out.residual = Eigen::VectorXd::Zero(opts.res_size);
    std::vector<std::vector<JointCell>> per_side;
    if (boundary) {
        for (Side s : sides) {
            per_side.push_back(enumerate(plan.spaces, static_cast<int>(s)));
            for (const auto& c : per_side.back()) work.push_back({&c, s});
        }
    }

    // chunked processing: parallel within a chunk, reduced serially in cell
    // order, so results are independent of the thread count and memory stays
    // bounded for large joint partitions
    constexpr std::size_t kChunk = 64;
    constexpr std::size_t kFlushTriplets = 4u << 20;
    SpMat acc;
    if (opts.want_jacobian) acc = SpMat(opts.jac_rows, opts.jac_cols);
    std::vector<Triplet> trips;
    std::vector<LocalOut> locals(std::min(kChunk, work.size()));

    for (std::size_t base = 0; base < work.size(); base += kChunk) {
        const std::size_t count = std::min(kChunk, work.size() - base);
        for (std::size_t i = 0; i < count; ++i) locals[i] = LocalOut{};
        const auto body = [&](std::size_t i) {
            const CellQuad cq = build_quad(plan, *work[base + i].first, opts, boundary, work[base + i].second);
            kernel(cq, locals[i]);
        };
        if (parallel) {
#pragma omp parallel for schedule(dynamic)
            for (std::size_t i = 0; i < count; ++i) body(i);
        } else {
            for (std::size_t i = 0; i < count; ++i) body(i);
        }
        for (std::size_t i = 0; i < count; ++i) {
            for (const auto& [r, v] : locals[i].res) out.residual[r] += v;
            trips.insert(trips.end(), locals[i].jac.begin(), locals[i].jac.end());
        }
        if (opts.want_jacobian && trips.size() >= kFlushTriplets) {
            SpMat part(opts.jac_rows, opts.jac_cols);
            part.setFromTriplets(trips.begin(), trips.end());
            acc += part;
            trips.clear();
        }
    }
    if (opts.want_jacobian) {
        SpMat part(opts.jac_rows, opts.jac_cols);
        part.setFromTriplets(trips.begin(), trips.end());
        acc += part;
        out.jacobian = std::move(acc);
    }
    return out;
}

LoopPlan make_plan(const std::vector<const HierarchicalSpace*>& spaces, const SplineFunction* mapping,
                   bool enumerate_cells) {
    // callers with a mapping always need at least the jacobian of the map
    LoopPlan plan;
    plan.spaces = spaces;
    plan.mapping = mapping;
    if (mapping) {
        for (std::size_t i = 0; i < spaces.size(); ++i)
            if (spaces[i] == mapping->space.get()) plan.map_space = static_cast<int>(i);
        if (plan.map_space < 0) plan.spaces.push_back(mapping->space.get());
    }
    if (enumerate_cells) plan.cells = enumerate(plan.spaces, -1);
    if (mapping && plan.map_space < 0) {
        plan.map_space = static_cast<int>(plan.spaces.size()) - 1;
    }
    return plan;
}

} // namespace

std::vector<JointCell> joint_cells(const std::vector<const HierarchicalSpace*>& spaces) {
    return enumerate(spaces, -1);
}

std::vector<JointCell> joint_boundary_cells(const std::vector<const HierarchicalSpace*>& spaces, Side side) {
    return enumerate(spaces, static_cast<int>(side));
}

namespace {
IntegrateOptions sanitized(const IntegrateOptions& opts, const SplineFunction* mapping) {
    IntegrateOptions o = opts;
    if (mapping) o.nders = std::max(o.nders, 1);  // the map jacobian is always built
    return o;
}
} // namespace

AssemblyOutput integrate(const std::vector<const HierarchicalSpace*>& spaces, const SplineFunction* mapping,
                         const Kernel& kernel, const IntegrateOptions& opts) {
    LoopPlan plan = make_plan(spaces, mapping, true);
    const IntegrateOptions o = sanitized(opts, mapping);
    return run_loop(plan, kernel, o, false, {}, o.parallel);
}

AssemblyOutput integrate_serial(const std::vector<const HierarchicalSpace*>& spaces,
                                const SplineFunction* mapping, const Kernel& kernel,
                                const IntegrateOptions& opts) {
    LoopPlan plan = make_plan(spaces, mapping, true);
    const IntegrateOptions o = sanitized(opts, mapping);
    return run_loop(plan, kernel, o, false, {}, false);
}

AssemblyOutput integrate_boundary(const std::vector<Side>& sides,
                                  const std::vector<const HierarchicalSpace*>& spaces,
                                  const SplineFunction* mapping, const Kernel& kernel,
                                  const IntegrateOptions& opts) {
    LoopPlan plan = make_plan(spaces, mapping, false);
    const IntegrateOptions o = sanitized(opts, mapping);
    return run_loop(plan, kernel, o, true, sides, o.parallel);
}

double side_parameter(Side side, const Eigen::Vector2d& xi) {
    switch (side) {
        case Side::South:
        case Side::North: return xi[0];
        default: return xi[1];
    }
}

} // namespace iga
