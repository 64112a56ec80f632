#include "iga/hierarchical_space.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace iga {

namespace {

std::vector<std::vector<unsigned char>> single_level_states(const KnotVector& kx, const KnotVector& ky) {
    std::vector<std::vector<unsigned char>> s(1);
    s[0].assign(static_cast<std::size_t>(kx.num_cells()) * ky.num_cells(), HierarchicalSpace::Active);
    return s;
}

} // namespace

HierarchicalSpace::HierarchicalSpace(KnotVector kx, KnotVector ky, int max_levels)
    : HierarchicalSpace(kx, ky, single_level_states(kx, ky), max_levels) {}

HierarchicalSpace::HierarchicalSpace(KnotVector kx0, KnotVector ky0,
                                     std::vector<std::vector<unsigned char>> cell_states,
                                     int max_levels)
    : max_levels_(max_levels) {
    if (cell_states.empty()) throw std::invalid_argument("hierarchical space: no levels");
    if (static_cast<int>(cell_states.size()) > max_levels_)
        throw std::runtime_error("hierarchical space: level budget exhausted");
    KnotVector kx = kx0, ky = ky0;
    for (std::size_t l = 0; l < cell_states.size(); ++l) {
        Level lev{kx, ky, std::move(cell_states[l]), {}, {}, {}, {}, {}, {}};
        if (static_cast<int>(lev.cell_state.size()) != lev.kx.num_cells() * lev.ky.num_cells())
            throw std::invalid_argument("hierarchical space: cell state size mismatch");
        levels_.push_back(std::move(lev));
        if (l + 1 < cell_states.size()) {
            kx = dyadic_refine(kx);
            ky = dyadic_refine(ky);
        }
    }
    build();
}

void HierarchicalSpace::build() {
    const int L = num_levels();
    const int px = degree_x(), py = degree_y();

    // cell-state consistency
    for (int l = 0; l < L; ++l) {
        Level& lev = levels_[l];
        const int ncx = lev.kx.num_cells(), ncy = lev.ky.num_cells();
        for (int c = 0; c < ncx * ncy; ++c) {
            const int cx = c % ncx, cy = c / ncx;
            const unsigned char s = lev.cell_state[c];
            if (l == 0 && s == Ghost)
                throw std::invalid_argument("hierarchical space: level-0 cells must cover the domain");
            if (s == Refined) {
                if (l + 1 >= L) throw std::invalid_argument("hierarchical space: refined cell at last level");
                const Level& nxt = levels_[l + 1];
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx) {
                        const int cc = (2 * cy + dy) * nxt.kx.num_cells() + (2 * cx + dx);
                        if (nxt.cell_state[cc] == Ghost)
                            throw std::invalid_argument("hierarchical space: refined cell with ghost child");
                    }
            } else if (l + 1 < L) {
                const Level& nxt = levels_[l + 1];
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx) {
                        const int cc = (2 * cy + dy) * nxt.kx.num_cells() + (2 * cx + dx);
                        if (nxt.cell_state[cc] != Ghost)
                            throw std::invalid_argument("hierarchical space: non-refined cell with child");
                    }
            }
        }
    }

    // in_omega bottom-up, cov_next top-down
    for (int l = L - 1; l >= 0; --l) {
        Level& lev = levels_[l];
        const int ncx = lev.kx.num_cells(), ncy = lev.ky.num_cells();
        lev.in_omega.assign(static_cast<std::size_t>(ncx) * ncy, 0);
        lev.cov_next.assign(static_cast<std::size_t>(ncx) * ncy, 0);
        for (int c = 0; c < ncx * ncy; ++c) {
            const int cx = c % ncx, cy = c / ncx;
            bool children_in = false;
            if (l + 1 < L) {
                const Level& nxt = levels_[l + 1];
                children_in = true;
                for (int dy = 0; dy < 2 && children_in; ++dy)
                    for (int dx = 0; dx < 2 && children_in; ++dx)
                        children_in = nxt.in_omega[(2 * cy + dy) * nxt.kx.num_cells() + (2 * cx + dx)] != 0;
            }
            lev.cov_next[c] = children_in ? 1 : 0;
            lev.in_omega[c] = (lev.cell_state[c] == Active || children_in) ? 1 : 0;
        }
    }

    // function flags and active sets
    num_active_ = 0;
    for (int l = 0; l < L; ++l) {
        Level& lev = levels_[l];
        const int nfx = lev.kx.num_funcs(), nfy = lev.ky.num_funcs();
        const int ncx = lev.kx.num_cells();
        lev.supp_in.assign(static_cast<std::size_t>(nfx) * nfy, 0);
        lev.supp_cov_next.assign(static_cast<std::size_t>(nfx) * nfy, 0);
        lev.rank.assign(static_cast<std::size_t>(nfx) * nfy, -1);
        for (int iy = 0; iy < nfy; ++iy) {
            const int sy0 = lev.ky.support_begin(iy), sy1 = lev.ky.support_end(iy);
            for (int ix = 0; ix < nfx; ++ix) {
                const int sx0 = lev.kx.support_begin(ix), sx1 = lev.kx.support_end(ix);
                bool all_in = true, all_cov = true;
                for (int cy = sy0; cy <= sy1 && (all_in || all_cov); ++cy)
                    for (int cx = sx0; cx <= sx1 && (all_in || all_cov); ++cx) {
                        const int c = cy * ncx + cx;
                        all_in = all_in && lev.in_omega[c];
                        all_cov = all_cov && lev.cov_next[c];
                    }
                const int k = iy * nfx + ix;
                lev.supp_in[k] = all_in ? 1 : 0;
                lev.supp_cov_next[k] = all_cov ? 1 : 0;
                if (all_in && !all_cov) lev.active_funcs.push_back(k);
            }
        }
        std::sort(lev.active_funcs.begin(), lev.active_funcs.end());
        for (int k : lev.active_funcs) {
            lev.rank[k] = num_active_;
            func_level_.push_back(l);
            func_tensor_.push_back(k);
            ++num_active_;
        }
    }

    // two-scale rows
    for (int l = 0; l + 1 < L; ++l) {
        rx_.push_back(refinement_rows(levels_[l].kx, levels_[l + 1].kx));
        ry_.push_back(refinement_rows(levels_[l].ky, levels_[l + 1].ky));
    }

    // active cells and extraction operators
    const int nloc = (px + 1) * (py + 1);
    cell_ext_.resize(L);
    for (int l = 0; l < L; ++l) {
        Level& lev = levels_[l];
        const int ncx = lev.kx.num_cells(), ncy = lev.ky.num_cells();
        cell_ext_[l].assign(static_cast<std::size_t>(ncx) * ncy, -1);
        for (int c = 0; c < ncx * ncy; ++c)
            if (lev.cell_state[c] == Active) {
                cell_ext_[l][c] = static_cast<int>(ext_.size());
                active_cells_.push_back({l, c % ncx, c / ncx});
                ext_.emplace_back();
            }
    }

    for (std::size_t e = 0; e < active_cells_.size(); ++e) {
        const CellId K = active_cells_[e];
        Extraction& X = ext_[e];
        std::vector<Eigen::RowVectorXd> rows;

        // window of tensor functions alive on the ancestor cell at level l
        auto window = [&](int l, int acx, int acy, std::vector<int>& idx) {
            const Level& lev = levels_[l];
            const int fx0 = lev.kx.first_func_on_cell(acx);
            const int fy0 = lev.ky.first_func_on_cell(acy);
            idx.clear();
            for (int a = 0; a <= px; ++a)
                for (int b = 0; b <= py; ++b)
                    idx.push_back((fy0 + b) * lev.kx.num_funcs() + (fx0 + a));
        };

        for (int l = 0; l <= K.level; ++l) {
            const int acx = K.cx >> (K.level - l), acy = K.cy >> (K.level - l);
            std::vector<int> widx;
            window(l, acx, acy, widx);
            for (int w = 0; w < nloc; ++w) {
                const int k0 = widx[w];
                if (levels_[l].rank[k0] < 0) continue;
                // cascade the unit coefficient of (l, k0) down to level K.level,
                // truncating at every intermediate level
                Eigen::VectorXd rep = Eigen::VectorXd::Zero(nloc);
                rep[w] = 1.0;
                std::vector<int> cur = widx;
                for (int ll = l; ll < K.level; ++ll) {
                    const int ncx1 = K.cx >> (K.level - ll - 1), ncy1 = K.cy >> (K.level - ll - 1);
                    std::vector<int> nidx;
                    window(ll + 1, ncx1, ncy1, nidx);
                    Eigen::VectorXd nrep = Eigen::VectorXd::Zero(nloc);
                    const int nfx_c = levels_[ll].kx.num_funcs();
                    const int nfx_f = levels_[ll + 1].kx.num_funcs();
                    for (int t = 0; t < nloc; ++t) {
                        const int fi = nidx[t];
                        if (levels_[ll + 1].supp_in[fi]) continue; // truncated away
                        const int fxi = fi % nfx_f, fyi = fi / nfx_f;
                        double acc = 0.0;
                        for (int s = 0; s < nloc; ++s) {
                            if (rep[s] == 0.0) continue;
                            const int ci = cur[s];
                            acc += rep[s] * rx_[ll].coef(fxi, ci % nfx_c) * ry_[ll].coef(fyi, ci / nfx_c);
                        }
                        nrep[t] = acc;
                    }
                    rep.swap(nrep);
                    cur.swap(nidx);
                }
                if (l < K.level && rep.cwiseAbs().maxCoeff() == 0.0) continue; // truncated to zero here
                X.funcs.push_back(levels_[l].rank[k0]);
                rows.emplace_back(rep.transpose());
            }
        }
        X.coef.resize(static_cast<int>(rows.size()), nloc);
        for (std::size_t r = 0; r < rows.size(); ++r) X.coef.row(static_cast<int>(r)) = rows[r];
    }
}

std::pair<int, int> HierarchicalSpace::active_index(int rank) const {
    const int l = func_level_[rank];
    const int k = func_tensor_[rank];
    const int nfx = levels_[l].kx.num_funcs();
    return {k % nfx, k / nfx};
}

Eigen::Vector2d HierarchicalSpace::greville(int rank) const {
    const int l = func_level_[rank];
    auto [ix, iy] = active_index(rank);
    return {levels_[l].kx.greville(ix), levels_[l].ky.greville(iy)};
}

bool HierarchicalSpace::is_active_cell(const CellId& c) const {
    return cell_state(c) == Active;
}

HierarchicalSpace::CellState HierarchicalSpace::cell_state(const CellId& c) const {
    if (c.level < 0 || c.level >= num_levels()) return Ghost;
    const Level& lev = levels_[c.level];
    if (c.cx < 0 || c.cx >= lev.kx.num_cells() || c.cy < 0 || c.cy >= lev.ky.num_cells()) return Ghost;
    return static_cast<CellState>(lev.cell_state[c.cy * lev.kx.num_cells() + c.cx]);
}

CellId HierarchicalSpace::locate(double x, double y) const {
    for (int l = num_levels() - 1; l >= 0; --l) {
        const Level& lev = levels_[l];
        const int cx = lev.kx.find_cell(x), cy = lev.ky.find_cell(y);
        if (lev.cell_state[cy * lev.kx.num_cells() + cx] == Active) return {l, cx, cy};
    }
    throw std::logic_error("hierarchical space: point not covered by an active cell");
}

std::array<double, 4> HierarchicalSpace::cell_rect(const CellId& c) const {
    const Level& lev = levels_[c.level];
    return {lev.kx.cell_begin(c.cx), lev.kx.cell_end(c.cx), lev.ky.cell_begin(c.cy), lev.ky.cell_end(c.cy)};
}

const HierarchicalSpace::Extraction& HierarchicalSpace::extraction(const CellId& c) const {
    const int idx = cell_ext_[c.level][c.cy * levels_[c.level].kx.num_cells() + c.cx];
    if (idx < 0) throw std::logic_error("hierarchical space: extraction of inactive cell requested");
    return ext_[idx];
}

BasisEval HierarchicalSpace::eval(double x, double y, int nders) const {
    if (x < -1e-14 || x > 1.0 + 1e-14 || y < -1e-14 || y > 1.0 + 1e-14)
        throw std::domain_error("hierarchical space: point outside the unit square");
    x = std::clamp(x, 0.0, 1.0);
    y = std::clamp(y, 0.0, 1.0);
    const CellId cell = locate(x, y);
    CellBasis cb = eval_on_cell(cell, {x}, {y}, nders);

    BasisEval out;
    out.funcs = cb.funcs;
    const int n = static_cast<int>(out.funcs.size());
    out.value = cb.tables[0].col(0);
    if (nders >= 1) {
        out.grad.resize(n, 2);
        out.grad.col(0) = cb.tables[1].col(0);
        out.grad.col(1) = cb.tables[2].col(0);
    }
    if (nders >= 2) {
        out.hess.resize(n, 3);
        for (int k = 0; k < 3; ++k) out.hess.col(k) = cb.tables[3 + k].col(0);
    }
    if (nders >= 3) {
        out.third.resize(n, 4);
        for (int k = 0; k < 4; ++k) out.third.col(k) = cb.tables[6 + k].col(0);
    }
    return out;
}

HierarchicalSpace::CellBasis HierarchicalSpace::eval_on_cell(const CellId& cell,
                                                             const std::vector<double>& xs,
                                                             const std::vector<double>& ys,
                                                             int nders) const {
    const Level& lev = levels_[cell.level];
    const int px = degree_x(), py = degree_y();
    const int nqx = static_cast<int>(xs.size()), nqy = static_cast<int>(ys.size());
    const Extraction& X = extraction(cell);

    // univariate tables: [deriv](func, point)
    std::vector<Eigen::MatrixXd> Ax(nders + 1, Eigen::MatrixXd(px + 1, nqx));
    std::vector<Eigen::MatrixXd> Ay(nders + 1, Eigen::MatrixXd(py + 1, nqy));
    for (int q = 0; q < nqx; ++q) {
        const Eigen::MatrixXd t = lev.kx.eval_on_cell(cell.cx, xs[q], nders);
        for (int k = 0; k <= nders; ++k) Ax[k].col(q) = t.col(k);
    }
    for (int q = 0; q < nqy; ++q) {
        const Eigen::MatrixXd t = lev.ky.eval_on_cell(cell.cy, ys[q], nders);
        for (int k = 0; k <= nders; ++k) Ay[k].col(q) = t.col(k);
    }

    static constexpr int dmap[10][2] = {{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1},
                                        {0, 2}, {3, 0}, {2, 1}, {1, 2}, {0, 3}};
    const int ntab = (nders == 0) ? 1 : (nders == 1) ? 3 : (nders == 2) ? 6 : 10;

    CellBasis out;
    out.funcs = X.funcs;
    out.nders = nders;
    const int nloc = (px + 1) * (py + 1);
    Eigen::MatrixXd loc(nloc, nqx * nqy);
    for (int t = 0; t < ntab; ++t) {
        const int kx_d = dmap[t][0], ky_d = dmap[t][1];
        for (int a = 0; a <= px; ++a)
            for (int b = 0; b <= py; ++b) {
                const int r = a * (py + 1) + b;
                for (int qx = 0; qx < nqx; ++qx)
                    for (int qy = 0; qy < nqy; ++qy)
                        loc(r, qx * nqy + qy) = Ax[kx_d](a, qx) * Ay[ky_d](b, qy);
            }
        out.tables[t] = X.coef * loc;
    }
    return out;
}

std::shared_ptr<const HierarchicalSpace> HierarchicalSpace::refine_cells(const std::vector<CellId>& marked) const {
    const int L = num_levels();
    int newL = L;
    for (const CellId& c : marked) {
        if (!is_active_cell(c)) throw std::invalid_argument("refine_cells: marked cell is not active");
        newL = std::max(newL, c.level + 2);
    }
    if (newL > max_levels_)
        throw std::runtime_error("refine_cells: hierarchy depth budget exhausted");

    std::vector<std::vector<unsigned char>> states(newL);
    for (int l = 0; l < L; ++l) states[l] = levels_[l].cell_state;
    if (newL > L) {
        const KnotVector fx = dyadic_refine(levels_[L - 1].kx);
        const KnotVector fy = dyadic_refine(levels_[L - 1].ky);
        states[L].assign(static_cast<std::size_t>(fx.num_cells()) * fy.num_cells(), Ghost);
    }
    for (const CellId& c : marked) {
        const int ncx = levels_[c.level].kx.num_cells();
        states[c.level][c.cy * ncx + c.cx] = Refined;
        const int fncx = (c.level + 1 < L) ? levels_[c.level + 1].kx.num_cells() : 2 * ncx;
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx)
                states[c.level + 1][(2 * c.cy + dy) * fncx + (2 * c.cx + dx)] = Active;
    }
    return std::make_shared<HierarchicalSpace>(levels_[0].kx, levels_[0].ky, std::move(states), max_levels_);
}

std::shared_ptr<const HierarchicalSpace> HierarchicalSpace::refine_all() const {
    return refine_cells(active_cells_);
}

std::shared_ptr<const HierarchicalSpace> HierarchicalSpace::uniform_rebase() const {
    const int L = num_levels();
    std::vector<std::vector<unsigned char>> states(L);
    for (int l = 0; l < L; ++l) {
        const Level& lev = levels_[l];
        const int ncx = lev.kx.num_cells(), ncy = lev.ky.num_cells();
        states[l].assign(static_cast<std::size_t>(4) * ncx * ncy, Ghost);
        for (int c = 0; c < ncx * ncy; ++c) {
            const int cx = c % ncx, cy = c / ncx;
            unsigned char child;
            switch (lev.cell_state[c]) {
                case Active: child = Active; break;
                case Refined: child = Refined; break;
                default: child = Ghost;
            }
            for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx)
                    states[l][(2 * cy + dy) * 2 * ncx + (2 * cx + dx)] = child;
        }
    }
    return std::make_shared<HierarchicalSpace>(dyadic_refine(levels_[0].kx), dyadic_refine(levels_[0].ky),
                                               std::move(states), max_levels_);
}

std::array<int, 4> HierarchicalSpace::support_range(int rank) const {
    const int l = func_level_[rank];
    auto [ix, iy] = active_index(rank);
    return {levels_[l].kx.support_begin(ix), levels_[l].kx.support_end(ix),
            levels_[l].ky.support_begin(iy), levels_[l].ky.support_end(iy)};
}

std::vector<CellId> HierarchicalSpace::support_cells(int rank) const {
    const int l = func_level_[rank];
    auto [ix, iy] = active_index(rank);
    const double x0 = levels_[l].kx.cell_begin(levels_[l].kx.support_begin(ix));
    const double x1 = levels_[l].kx.cell_end(levels_[l].kx.support_end(ix));
    const double y0 = levels_[l].ky.cell_begin(levels_[l].ky.support_begin(iy));
    const double y1 = levels_[l].ky.cell_end(levels_[l].ky.support_end(iy));
    std::vector<CellId> out;
    for (const CellId& c : active_cells_) {
        const auto r = cell_rect(c);
        if (r[1] > x0 && r[0] < x1 && r[3] > y0 && r[2] < y1) out.push_back(c);
    }
    return out;
}

const std::vector<int>& HierarchicalSpace::cell_functions(const CellId& c) const {
    return extraction(c).funcs;
}

bool HierarchicalSpace::func_active(int level, int tensor_idx) const {
    if (level < 0 || level >= num_levels()) return false;
    return levels_[level].rank[tensor_idx] >= 0;
}

int HierarchicalSpace::rank_of(int level, int tensor_idx) const {
    return levels_[level].rank[tensor_idx];
}

bool HierarchicalSpace::supp_in_omega(int level, int tensor_idx) const {
    if (level < 0 || level >= num_levels()) return false;
    return levels_[level].supp_in[tensor_idx] != 0;
}

SpacePtr make_space(int degree, int cells_x, int cells_y, int max_levels) {
    return std::make_shared<HierarchicalSpace>(make_open_knot_vector(degree, cells_x),
                                               make_open_knot_vector(degree, cells_y), max_levels);
}

BoundaryIndexSet boundary_decompose(const HierarchicalSpace& space) {
    const int n = space.num_active();
    std::vector<unsigned char> flag(n, 0);
    constexpr double tol = 1e-12;
    // 8 strictly interior sample abscissae per cell edge plus the endpoints:
    // a nonzero polynomial trace of the degrees in play cannot vanish at all of them
    const auto edge_params = [](double a, double b) {
        std::vector<double> s = {a, b};
        for (int k = 1; k <= 8; ++k) s.push_back(a + (b - a) * k / 9.0);
        return s;
    };
    for (const CellId& c : space.active_cells()) {
        const auto r = space.cell_rect(c);
        const bool south = c.cy == 0, north = c.cy == space.cells_y(c.level) - 1;
        const bool west = c.cx == 0, east = c.cx == space.cells_x(c.level) - 1;
        auto mark_line = [&](const std::vector<double>& xs, const std::vector<double>& ys) {
            for (std::size_t i = 0; i < xs.size(); ++i) {
                const BasisEval be = space.eval(xs[i], ys[i], 0);
                for (std::size_t j = 0; j < be.funcs.size(); ++j)
                    if (std::abs(be.value[static_cast<int>(j)]) > tol) flag[be.funcs[j]] = 1;
            }
        };
        if (south) mark_line(edge_params(r[0], r[1]), std::vector<double>(10, 0.0));
        if (north) mark_line(edge_params(r[0], r[1]), std::vector<double>(10, 1.0));
        if (west) mark_line(std::vector<double>(10, 0.0), edge_params(r[2], r[3]));
        if (east) mark_line(std::vector<double>(10, 1.0), edge_params(r[2], r[3]));
    }
    BoundaryIndexSet out;
    out.is_boundary = flag;
    out.pos.resize(n);
    for (int i = 0; i < n; ++i) {
        if (flag[i]) {
            out.pos[i] = static_cast<int>(out.boundary.size());
            out.boundary.push_back(i);
        } else {
            out.pos[i] = static_cast<int>(out.inner.size());
            out.inner.push_back(i);
        }
    }
    return out;
}

SpacePtr meet_space(const HierarchicalSpace& a, const HierarchicalSpace& b) {
    if (!a.same_base(b)) throw std::invalid_argument("meet_space: incompatible bases");
    const int L = std::max(a.num_levels(), b.num_levels());

    auto refined = [&](const HierarchicalSpace& s, int l, int cx, int cy) {
        return s.cell_state({l, cx, cy}) == HierarchicalSpace::Refined;
    };

    std::vector<std::vector<unsigned char>> states(L);
    KnotVector kx = a.kx(0), ky = a.ky(0);
    for (int l = 0; l < L; ++l) {
        const int ncx = kx.num_cells(), ncy = ky.num_cells();
        states[l].assign(static_cast<std::size_t>(ncx) * ncy, HierarchicalSpace::Ghost);
        for (int cy = 0; cy < ncy; ++cy)
            for (int cx = 0; cx < ncx; ++cx) {
                const bool in_domain =
                    (l == 0) || states[l - 1][(cy / 2) * (ncx / 2) + (cx / 2)] == HierarchicalSpace::Refined;
                if (!in_domain) continue;
                const bool rf = refined(a, l, cx, cy) || refined(b, l, cx, cy);
                states[l][cy * ncx + cx] = rf ? HierarchicalSpace::Refined : HierarchicalSpace::Active;
            }
        if (l + 1 < L) {
            kx = dyadic_refine(kx);
            ky = dyadic_refine(ky);
        }
    }
    return std::make_shared<HierarchicalSpace>(a.kx(0), a.ky(0), std::move(states),
                                               std::max(a.max_levels(), b.max_levels()));
}

} // namespace iga
