#include "iga/hierarchical_space.hpp"

#include <map>
#include <stdexcept>

namespace iga {

namespace {

// column-major view of the two-scale relation: children[j] of a coarse
// univariate function j with weights
struct ColumnRows {
    std::vector<std::vector<std::pair<int, double>>> cols;
};

ColumnRows columns_of(const RefinementRows& R) {
    ColumnRows C;
    C.cols.resize(R.cols);
    for (int i = 0; i < static_cast<int>(R.col_begin.size()); ++i)
        for (int off = 0; off < static_cast<int>(R.vals[i].size()); ++off)
            if (R.vals[i][off] != 0.0)
                C.cols[R.col_begin[i] + off].push_back({i, R.vals[i][off]});
    return C;
}

using LevelVec = std::map<int, Eigen::RowVectorXd>; // tensor idx -> dim coefficients

void axpy(LevelVec& v, int idx, const Eigen::RowVectorXd& add) {
    auto it = v.find(idx);
    if (it == v.end())
        v.emplace(idx, add);
    else
        it->second += add;
}

int base_shift(int coarse_cells, int fine_cells) {
    int k = 0;
    int c = coarse_cells;
    while (c < fine_cells) {
        c *= 2;
        ++k;
    }
    if (c != fine_cells) return -1;
    return k;
}

} // namespace

TransferResult transfer(const HierarchicalSpace& from, const Eigen::MatrixXd& coef,
                        const HierarchicalSpace& to) {
    if (from.degree_x() != to.degree_x() || from.degree_y() != to.degree_y())
        throw std::invalid_argument("transfer: spaces have different degrees");
    if (coef.rows() != from.num_active()) throw std::invalid_argument("transfer: coefficient count mismatch");
    const int dim = static_cast<int>(coef.cols());

    // common dyadic family: shifts place each space's levels inside it
    const bool from_coarser = from.cells_x(0) <= to.cells_x(0);
    const HierarchicalSpace& base_space = from_coarser ? from : to;
    const int shift_from = base_shift(base_space.cells_x(0), from.cells_x(0));
    const int shift_to = base_shift(base_space.cells_x(0), to.cells_x(0));
    const int shift_fy = base_shift(base_space.cells_y(0), from.cells_y(0));
    const int shift_ty = base_shift(base_space.cells_y(0), to.cells_y(0));
    if (shift_from < 0 || shift_to < 0 || shift_from != shift_fy || shift_to != shift_ty)
        throw std::invalid_argument("transfer: spaces have incommensurate bases");

    const int L = std::max(from.num_levels() + shift_from, to.num_levels() + shift_to);

    std::vector<KnotVector> kxs = {base_space.kx(0)}, kys = {base_space.ky(0)};
    for (int l = 1; l < L; ++l) {
        kxs.push_back(dyadic_refine(kxs.back()));
        kys.push_back(dyadic_refine(kys.back()));
    }

    auto old_actives = [&](int fl) {
        LevelVec v;
        const int l = fl - shift_from;
        if (l >= 0 && l < from.num_levels())
            for (int k : from.active_funcs(l)) v.emplace(k, coef.row(from.rank_of(l, k)));
        return v;
    };
    auto to_active = [&](int fl, int k) { return to.func_active(fl - shift_to, k); };
    auto to_rank = [&](int fl, int k) { return to.rank_of(fl - shift_to, k); };
    auto from_trunc = [&](int fl, int k) { return from.supp_in_omega(fl - shift_from, k); };
    auto to_trunc = [&](int fl, int k) { return to.supp_in_omega(fl - shift_to, k); };

    TransferResult out;
    out.coeffs = Eigen::MatrixXd::Zero(to.num_active(), dim);
    out.assigned.assign(to.num_active(), 0);

    LevelVec F = old_actives(0);
    LevelVec G;
    for (const auto& [k, val] : F) {
        if (to_active(0, k)) {
            out.coeffs.row(to_rank(0, k)) = val;
            out.assigned[to_rank(0, k)] = 1;
            G.emplace(k, val);
        }
    }

    double residue = 0.0;
    for (int l = 0; l + 1 < L; ++l) {
        const ColumnRows cx = columns_of(refinement_rows(kxs[l], kxs[l + 1]));
        const ColumnRows cy = columns_of(refinement_rows(kys[l], kys[l + 1]));
        const int nfx_c = kxs[l].num_funcs();
        const int nfx_f = kxs[l + 1].num_funcs();

        auto prolong_level = [&](const LevelVec& v) {
            LevelVec r;
            for (const auto& [k, val] : v) {
                const int jx = k % nfx_c, jy = k / nfx_c;
                for (const auto& [ix, wx] : cx.cols[jx])
                    for (const auto& [iy, wy] : cy.cols[jy]) axpy(r, iy * nfx_f + ix, wx * wy * val);
            }
            return r;
        };

        LevelVec SF = prolong_level(F);
        LevelVec SG = prolong_level(G);
        for (auto it = SF.begin(); it != SF.end();)
            it = from_trunc(l + 1, it->first) ? SF.erase(it) : std::next(it);
        for (auto it = SG.begin(); it != SG.end();)
            it = to_trunc(l + 1, it->first) ? SG.erase(it) : std::next(it);

        F = std::move(SF);
        for (const auto& [k, val] : old_actives(l + 1)) axpy(F, k, val);

        G = std::move(SG);
        for (const auto& [k, valF] : F) {
            if (!to_active(l + 1, k)) continue;
            Eigen::RowVectorXd v = valF;
            auto itG = G.find(k);
            if (itG != G.end()) v -= itG->second;
            out.coeffs.row(to_rank(l + 1, k)) = v;
            out.assigned[to_rank(l + 1, k)] = 1;
            axpy(G, k, v);
        }
    }

    for (const auto& [k, valF] : F) {
        Eigen::RowVectorXd d = valF;
        auto itG = G.find(k);
        if (itG != G.end()) d -= itG->second;
        residue = std::max(residue, d.cwiseAbs().maxCoeff());
    }
    for (const auto& [k, valG] : G)
        if (F.find(k) == F.end()) residue = std::max(residue, valG.cwiseAbs().maxCoeff());

    out.residue = residue;
    return out;
}

} // namespace iga
