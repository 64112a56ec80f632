#pragma once

#include "iga/assembly.hpp"

namespace iga {

/// Perturbation of one geometry coefficient (basis function phi, component
/// comp) at a quadrature point; carries the basis data needed to linearize
/// mapping-derived quantities exactly.
struct CoefDelta {
    int comp = 0;
    double phi = 0.0;
    Eigen::Vector2d dphi = Eigen::Vector2d::Zero();
    Eigen::Vector3d hphi = Eigen::Vector3d::Zero();  // (xx, xy, yy)
};

inline double sym3(const Eigen::Vector3d& v, int p, int q) { return v[p + q]; }

/// delta J = e_comp * dphi^T (rank one).
inline Eigen::Matrix2d delta_J(const CoefDelta& d) {
    Eigen::Matrix2d m = Eigen::Matrix2d::Zero();
    m.row(d.comp) = d.dphi.transpose();
    return m;
}

inline double delta_detJ(const MapData& m, const CoefDelta& d) {
    if (d.comp == 0) return d.dphi[0] * m.J(1, 1) - d.dphi[1] * m.J(1, 0);
    return m.J(0, 0) * d.dphi[1] - m.J(0, 1) * d.dphi[0];
}

inline Eigen::Matrix2d delta_Jinv(const MapData& m, const CoefDelta& d) {
    return -m.Jinv * delta_J(d) * m.Jinv;
}

/// grad_xi(det J), needs the mapping Hessian.
inline Eigen::Vector2d grad_detJ(const MapData& m) {
    Eigen::Vector2d g;
    for (int q = 0; q < 2; ++q)
        g[q] = sym3(m.Hx, 0, q) * m.J(1, 1) + m.J(0, 0) * sym3(m.Hy, 1, q) -
               sym3(m.Hx, 1, q) * m.J(1, 0) - m.J(0, 1) * sym3(m.Hy, 0, q);
    return g;
}

inline Eigen::Vector2d delta_grad_detJ(const MapData& m, const CoefDelta& d) {
    Eigen::Vector2d g;
    for (int q = 0; q < 2; ++q) {
        if (d.comp == 0)
            g[q] = sym3(d.hphi, 0, q) * m.J(1, 1) + d.dphi[0] * sym3(m.Hy, 1, q) -
                   sym3(d.hphi, 1, q) * m.J(1, 0) - d.dphi[1] * sym3(m.Hy, 0, q);
        else
            g[q] = m.J(0, 0) * sym3(d.hphi, 1, q) + sym3(m.Hx, 0, q) * d.dphi[1] -
                   m.J(0, 1) * sym3(d.hphi, 0, q) - sym3(m.Hx, 1, q) * d.dphi[0];
    }
    return g;
}

/// Physical gradient of a scalar with reference gradient gxi.
inline Eigen::Vector2d phys_grad(const MapData& m, const Eigen::Vector2d& gxi) {
    return m.Jinv.transpose() * gxi;
}

/// Variation of the physical gradient when only the mapping moves.
inline Eigen::Vector2d delta_phys_grad(const MapData& m, const CoefDelta& d, const Eigen::Vector2d& gxi) {
    return delta_Jinv(m, d).transpose() * gxi;
}

/// Outward reference normal of a side.
inline Eigen::Vector2d ref_normal(Side s) {
    switch (s) {
        case Side::South: return {0.0, -1.0};
        case Side::East: return {1.0, 0.0};
        case Side::North: return {0.0, 1.0};
        default: return {-1.0, 0.0};
    }
}

/// Arc factor ||J t|| of a boundary point, t the reference tangent axis.
inline double arc_factor(const MapData& m, int tangent_axis) { return m.J.col(tangent_axis).norm(); }

inline double delta_arc_factor(const MapData& m, const CoefDelta& d, int tangent_axis) {
    return m.J(d.comp, tangent_axis) * d.dphi[tangent_axis] / arc_factor(m, tangent_axis);
}

/// Nanson vector w = detJ * J^{-T} nhat, so that n dgamma = w dshat.
inline Eigen::Vector2d nanson(const MapData& m, Side s) {
    return m.detJ * m.Jinv.transpose() * ref_normal(s);
}

inline Eigen::Vector2d delta_nanson(const MapData& m, const CoefDelta& d, Side s) {
    const Eigen::Vector2d nh = ref_normal(s);
    return delta_detJ(m, d) * (m.Jinv.transpose() * nh) + m.detJ * (delta_Jinv(m, d).transpose() * nh);
}

/// Physical Hessian H_x(v)(a,b) of a scalar with reference gradient gxi and
/// reference Hessian hxi (xx, xy, yy).
inline Eigen::Matrix2d phys_hess(const MapData& m, const Eigen::Vector2d& gxi, const Eigen::Vector3d& hxi) {
    const Eigen::Vector2d gp = phys_grad(m, gxi);
    Eigen::Matrix2d C;
    for (int p = 0; p < 2; ++p)
        for (int q = 0; q < 2; ++q)
            C(p, q) = sym3(hxi, p, q) - gp[0] * sym3(m.Hx, p, q) - gp[1] * sym3(m.Hy, p, q);
    return m.Jinv.transpose() * C * m.Jinv;
}

inline double phys_laplace(const MapData& m, const Eigen::Vector2d& gxi, const Eigen::Vector3d& hxi) {
    return phys_hess(m, gxi, hxi).trace();
}

/// Reference Hessian of det J (needs third derivatives of the mapping).
inline Eigen::Vector3d hess_detJ(const MapData& m) {
    auto T3 = [](const Eigen::Vector4d& t, int a, int b, int c) { return t[a + b + c]; };
    Eigen::Vector3d h;
    for (int p = 0; p < 2; ++p)
        for (int q = p; q < 2; ++q) {
            h[p + q] = T3(m.Tx, 0, q, p) * m.J(1, 1) + sym3(m.Hx, 0, q) * sym3(m.Hy, 1, p) +
                       sym3(m.Hx, 0, p) * sym3(m.Hy, 1, q) + m.J(0, 0) * T3(m.Ty, 1, q, p) -
                       T3(m.Tx, 1, q, p) * m.J(1, 0) - sym3(m.Hx, 1, q) * sym3(m.Hy, 0, p) -
                       sym3(m.Hx, 1, p) * sym3(m.Hy, 0, q) - m.J(0, 1) * T3(m.Ty, 0, q, p);
        }
    return h;
}

} // namespace iga
