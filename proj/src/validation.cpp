#include "iga/validation.hpp"

#include "iga/geom_delta.hpp"

#include <cmath>

namespace iga {

namespace {
constexpr double kOmega = 6.0;
constexpr double kSigma = 0.2;

double envelope_g(double s) { return std::exp(-(s - 0.5) * (s - 0.5) / (2.0 * kSigma * kSigma)); }
double envelope_g_prime(double s) { return envelope_g(s) * (-(s - 0.5) / (kSigma * kSigma)); }
} // namespace

double validation_profile(double s) {
    const double g0 = envelope_g(0.0), gm = envelope_g(0.5);
    return (envelope_g(s) - g0) / (gm - g0) * 0.5 * (1.0 - std::cos(kOmega * M_PI * s));
}

double validation_profile_derivative(double s) {
    const double g0 = envelope_g(0.0), gm = envelope_g(0.5);
    const double env = (envelope_g(s) - g0) / (gm - g0);
    const double denv = envelope_g_prime(s) / (gm - g0);
    const double trig = 0.5 * (1.0 - std::cos(kOmega * M_PI * s));
    const double dtrig = 0.5 * kOmega * M_PI * std::sin(kOmega * M_PI * s);
    return denv * trig + env * dtrig;
}

BoundaryCurve validation_curve() {
    BoundaryCurve c;
    c.n_design = 4;
    c.eval = [](Side side, double s, const Eigen::VectorXd& alpha) -> Eigen::Vector2d {
        if (alpha.size() != 4 || alpha.minCoeff() < -1e-12 || alpha.maxCoeff() > 0.4 + 1e-12)
            throw std::invalid_argument("validation curve: alpha outside [0, 2/5]^4");
        const double d = validation_profile(s);
        switch (side) {
            case Side::South: return {s, alpha[0] * d};
            case Side::East: return {1.0 - alpha[1] * d, s};
            case Side::North: return {s, 1.0 - alpha[2] * d};
            default: return {alpha[3] * d, s};
        }
    };
    c.d_alpha = [](Side side, double s, const Eigen::VectorXd&) -> Eigen::MatrixXd {
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(2, 4);
        const double d = validation_profile(s);
        switch (side) {
            case Side::South: out(1, 0) = d; break;
            case Side::East: out(0, 1) = -d; break;
            case Side::North: out(1, 2) = -d; break;
            default: out(0, 3) = d;
        }
        return out;
    };
    return c;
}

namespace {

struct QpScalar {
    double val;
    Eigen::Vector2d grad;  // reference gradient
};

QpScalar contract(const HierarchicalSpace::CellBasis& b, const Eigen::MatrixXd& coeffs, int q) {
    QpScalar s{0.0, Eigen::Vector2d::Zero()};
    for (std::size_t j = 0; j < b.funcs.size(); ++j) {
        const double c = coeffs(b.funcs[j], 0);
        s.val += c * b.tables[0](static_cast<int>(j), q);
        s.grad[0] += c * b.tables[1](static_cast<int>(j), q);
        s.grad[1] += c * b.tables[2](static_cast<int>(j), q);
    }
    return s;
}

} // namespace

StateAssembly ValidationProblem::state_residual(const SplineFunction& u, const GeometryMapping& m,
                                                const Eigen::VectorXd& alpha, const StateParts& parts) const {
    (void)alpha;
    const HierarchicalSpace* S = u.space.get();
    const HierarchicalSpace* G = m.space.get();
    const int n_state = S->num_active();
    const int n_geo = G->num_active();
    const SplineFunction map = m.spline();
    const double c_pen = opts_.nitsche_c;
    const std::vector<Side> all_sides(kAllSides.begin(), kAllSides.end());

    // --- prepass: I_i = int phi_i dgamma and its geometry derivative ---
    IntegrateOptions bio;
    bio.rule = opts_.quad;
    bio.rule_subcell = 4;
    bio.nders = 2;
    bio.res_size = n_state;
    bio.want_jacobian = parts.dB_dcA;
    bio.jac_rows = n_state;
    bio.jac_cols = 2 * n_geo;
    bio.parallel = opts_.parallel;

    const AssemblyOutput pre = integrate_boundary(
        all_sides, {S, G}, &map,
        [&](const CellQuad& cq, LocalOut& lo) {
            const auto& bs = cq.basis[0];
            const auto& bg = cq.basis[1];
            for (std::size_t q = 0; q < cq.pts.size(); ++q) {
                const MapData& md = cq.map[q];
                const double arc = arc_factor(md, cq.tangent_axis);
                for (std::size_t i = 0; i < bs.funcs.size(); ++i) {
                    const double phi = bs.tables[0](static_cast<int>(i), static_cast<int>(q));
                    if (phi == 0.0) continue;
                    lo.add(bs.funcs[i], cq.w[q] * phi * arc);
                    if (!parts.dB_dcA) continue;
                    for (std::size_t j = 0; j < bg.funcs.size(); ++j) {
                        CoefDelta d;
                        d.dphi << bg.tables[1](static_cast<int>(j), static_cast<int>(q)),
                            bg.tables[2](static_cast<int>(j), static_cast<int>(q));
                        for (int e = 0; e < 2; ++e) {
                            d.comp = e;
                            lo.add(bs.funcs[i], 2 * bg.funcs[j] + e,
                                   cq.w[q] * phi * delta_arc_factor(md, d, cq.tangent_axis));
                        }
                    }
                }
            }
        },
        bio);
    const Eigen::VectorXd I = pre.residual;
    Eigen::VectorXd eta(n_state);
    for (int i = 0; i < n_state; ++i) eta[i] = (I[i] > 1e-10) ? c_pen / I[i] : 0.0;

    // --- volume terms ---
    IntegrateOptions vio;
    vio.rule = opts_.quad;
    vio.rule_subcell = 4;
    vio.nders = 2;
    vio.res_size = n_state;
    vio.want_jacobian = parts.dB_ddA || parts.dB_dcA;
    vio.jac_rows = n_state;
    vio.jac_cols = (parts.dB_ddA ? n_state : 0) + (parts.dB_dcA ? 2 * n_geo : 0);
    vio.parallel = opts_.parallel;
    const int col_dA = 0;
    const int col_cA = parts.dB_ddA ? n_state : 0;

    auto volume_kernel = [&](const CellQuad& cq, LocalOut& lo) {
        const auto& bs = cq.basis[0];
        const auto& bg = cq.basis[1];
        const int ns = static_cast<int>(bs.funcs.size());
        const int ng = static_cast<int>(bg.funcs.size());
        for (std::size_t q = 0; q < cq.pts.size(); ++q) {
            const int qi = static_cast<int>(q);
            const MapData& md = cq.map[q];
            const QpScalar uu = contract(bs, u.coeffs, qi);
            const Eigen::Vector2d gf = grad_detJ(md);
            const Eigen::Vector2d Gu = phys_grad(md, uu.grad);
            const Eigen::Vector2d Gf = phys_grad(md, gf);
            const Eigen::Vector2d D = Gu - Gf;
            std::vector<Eigen::Vector2d> Gphi(ns);
            for (int i = 0; i < ns; ++i)
                Gphi[i] = phys_grad(md, {bs.tables[1](i, qi), bs.tables[2](i, qi)});

            for (int i = 0; i < ns; ++i) lo.add(bs.funcs[i], cq.w[q] * D.dot(Gphi[i]) * md.detJ);

            if (parts.dB_ddA)
                for (int i = 0; i < ns; ++i)
                    for (int j = 0; j < ns; ++j)
                        lo.add(bs.funcs[i], col_dA + bs.funcs[j], cq.w[q] * Gphi[j].dot(Gphi[i]) * md.detJ);

            if (parts.dB_dcA) {
                for (int j = 0; j < ng; ++j) {
                    CoefDelta d;
                    d.phi = bg.tables[0](j, qi);
                    d.dphi << bg.tables[1](j, qi), bg.tables[2](j, qi);
                    d.hphi << bg.tables[3](j, qi), bg.tables[4](j, qi), bg.tables[5](j, qi);
                    for (int e = 0; e < 2; ++e) {
                        d.comp = e;
                        const Eigen::Matrix2d dJi = delta_Jinv(md, d);
                        const double ddet = delta_detJ(md, d);
                        const Eigen::Vector2d dGu = dJi.transpose() * uu.grad;
                        const Eigen::Vector2d dGf = dJi.transpose() * gf + md.Jinv.transpose() * delta_grad_detJ(md, d);
                        const Eigen::Vector2d dD = dGu - dGf;
                        for (int i = 0; i < ns; ++i) {
                            const Eigen::Vector2d dGphi =
                                dJi.transpose() * Eigen::Vector2d(bs.tables[1](i, qi), bs.tables[2](i, qi));
                            lo.add(bs.funcs[i], col_cA + 2 * bg.funcs[j] + e,
                                   cq.w[q] * (dD.dot(Gphi[i]) * md.detJ + D.dot(dGphi) * md.detJ +
                                              D.dot(Gphi[i]) * ddet));
                        }
                    }
                }
            }
        }
    };
    const AssemblyOutput vol = integrate({S, G}, &map, volume_kernel, vio);

    // --- boundary terms; P_i accumulates the plain penalty integral ---
    IntegrateOptions sio = vio;
    sio.res_size = 2 * n_state;  // residual part and P_i
    const AssemblyOutput bnd = integrate_boundary(
        all_sides, {S, G}, &map,
        [&](const CellQuad& cq, LocalOut& lo) {
            const auto& bs = cq.basis[0];
            const auto& bg = cq.basis[1];
            const int ns = static_cast<int>(bs.funcs.size());
            const int ng = static_cast<int>(bg.funcs.size());
            for (std::size_t q = 0; q < cq.pts.size(); ++q) {
                const int qi = static_cast<int>(q);
                const MapData& md = cq.map[q];
                const QpScalar uu = contract(bs, u.coeffs, qi);
                const double f = md.detJ;
                const Eigen::Vector2d gf = grad_detJ(md);
                const Eigen::Vector2d Gu = phys_grad(md, uu.grad);
                const Eigen::Vector2d Gf = phys_grad(md, gf);
                const Eigen::Vector2d D = Gu - Gf;
                const Eigen::Vector2d nan = nanson(md, cq.side);
                const double arc = arc_factor(md, cq.tangent_axis);
                const double uf = uu.val - f;
                std::vector<double> phi(ns);
                std::vector<Eigen::Vector2d> Gphi(ns);
                for (int i = 0; i < ns; ++i) {
                    phi[i] = bs.tables[0](i, qi);
                    Gphi[i] = phys_grad(md, {bs.tables[1](i, qi), bs.tables[2](i, qi)});
                }

                for (int i = 0; i < ns; ++i) {
                    const double r = -phi[i] * D.dot(nan) - uf * Gphi[i].dot(nan) + eta[bs.funcs[i]] * uf * phi[i] * arc;
                    lo.add(bs.funcs[i], cq.w[q] * r);
                    lo.add(n_state + bs.funcs[i], cq.w[q] * uf * phi[i] * arc);
                }

                if (parts.dB_ddA)
                    for (int i = 0; i < ns; ++i)
                        for (int j = 0; j < ns; ++j) {
                            const double k = -phi[i] * Gphi[j].dot(nan) - phi[j] * Gphi[i].dot(nan) +
                                             eta[bs.funcs[i]] * phi[j] * phi[i] * arc;
                            lo.add(bs.funcs[i], col_dA + bs.funcs[j], cq.w[q] * k);
                        }

                if (parts.dB_dcA) {
                    for (int j = 0; j < ng; ++j) {
                        CoefDelta d;
                        d.phi = bg.tables[0](j, qi);
                        d.dphi << bg.tables[1](j, qi), bg.tables[2](j, qi);
                        d.hphi << bg.tables[3](j, qi), bg.tables[4](j, qi), bg.tables[5](j, qi);
                        for (int e = 0; e < 2; ++e) {
                            d.comp = e;
                            const Eigen::Matrix2d dJi = delta_Jinv(md, d);
                            const double df = delta_detJ(md, d);
                            const Eigen::Vector2d dGu = dJi.transpose() * uu.grad;
                            const Eigen::Vector2d dGf =
                                dJi.transpose() * gf + md.Jinv.transpose() * delta_grad_detJ(md, d);
                            const Eigen::Vector2d dD = dGu - dGf;
                            const Eigen::Vector2d dnan = delta_nanson(md, d, cq.side);
                            const double darc = delta_arc_factor(md, d, cq.tangent_axis);
                            for (int i = 0; i < ns; ++i) {
                                const Eigen::Vector2d dGphi =
                                    dJi.transpose() * Eigen::Vector2d(bs.tables[1](i, qi), bs.tables[2](i, qi));
                                double dr = -phi[i] * (dD.dot(nan) + D.dot(dnan));
                                dr += df * Gphi[i].dot(nan) - uf * (dGphi.dot(nan) + Gphi[i].dot(dnan));
                                dr += eta[bs.funcs[i]] * (-df * phi[i] * arc + uf * phi[i] * darc);
                                lo.add(bs.funcs[i], col_cA + 2 * bg.funcs[j] + e, cq.w[q] * dr);
                            }
                        }
                    }
                }
            }
        },
        sio);

    StateAssembly out;
    out.residual = vol.residual + bnd.residual.head(n_state);

    if (parts.dB_ddA || parts.dB_dcA) {
        SpMat Jall = *vol.jacobian + *bnd.jacobian;
        if (parts.dB_dcA) {
            // eta_i depends on the geometry through I_i: add the rank-one rows
            const Eigen::VectorXd P = bnd.residual.tail(n_state);
            SpMat dI = *pre.jacobian;  // n_state x 2 n_geo
            std::vector<Triplet> extra;
            for (int k = 0; k < dI.outerSize(); ++k)
                for (SpMat::InnerIterator it(dI, k); it; ++it) {
                    const int i = static_cast<int>(it.row());
                    if (eta[i] == 0.0) continue;
                    const double scale = -c_pen / (I[i] * I[i]) * P[i];
                    extra.emplace_back(i, col_cA + static_cast<int>(it.col()), scale * it.value());
                }
            SpMat E(Jall.rows(), Jall.cols());
            E.setFromTriplets(extra.begin(), extra.end());
            Jall += E;
        }
        if (parts.dB_ddA) out.dB_ddA = Jall.middleCols(col_dA, n_state);
        if (parts.dB_dcA) out.dB_dcA = Jall.middleCols(col_cA, 2 * n_geo);
    }
    if (parts.dB_dalpha) out.dB_dalpha = Eigen::MatrixXd::Zero(n_state, 4);
    return out;
}

ScalarEval ValidationProblem::objective(const SplineFunction& u, const GeometryMapping& m,
                                        const Eigen::VectorXd& alpha, bool want_partials) const {
    const HierarchicalSpace* S = u.space.get();
    IntegrateOptions io;
    io.rule = opts_.quad;
    io.nders = 0;
    io.res_size = 1 + S->num_active();
    io.parallel = opts_.parallel;
    const AssemblyOutput out = integrate(
        {S}, nullptr,
        [&](const CellQuad& cq, LocalOut& lo) {
            const auto& bs = cq.basis[0];
            for (std::size_t q = 0; q < cq.pts.size(); ++q) {
                double uv = 0.0;
                for (std::size_t j = 0; j < bs.funcs.size(); ++j) {
                    const double phi = bs.tables[0](static_cast<int>(j), static_cast<int>(q));
                    uv += u.coeffs(bs.funcs[j], 0) * phi;
                    lo.add(1 + bs.funcs[j], cq.w[q] * phi);
                }
                lo.add(0, cq.w[q] * uv);
            }
        },
        io);

    ScalarEval ev;
    ev.value = out.residual[0] + 0.5 * alpha.squaredNorm();
    if (want_partials) {
        ev.d_dA = out.residual.tail(S->num_active());
        ev.d_cA = Eigen::VectorXd::Zero(2 * m.space->num_active());
        ev.d_alpha = alpha;
    }
    return ev;
}

std::optional<double> ValidationProblem::strong_density(const SplineFunction& u, const MapData& md,
                                                        const Eigen::Vector2d& xi,
                                                        const Eigen::VectorXd&) const {
    const BasisEval be = u.space->eval(xi[0], xi[1], 2);
    Eigen::Vector2d gu = Eigen::Vector2d::Zero();
    Eigen::Vector3d hu = Eigen::Vector3d::Zero();
    for (std::size_t j = 0; j < be.funcs.size(); ++j) {
        const double c = u.coeffs(be.funcs[j], 0);
        gu += c * be.grad.row(static_cast<int>(j)).transpose();
        hu += c * be.hess.row(static_cast<int>(j)).transpose();
    }
    const double lap_u = phys_laplace(md, gu, hu);
    const double lap_f = phys_laplace(md, grad_detJ(md), hess_detJ(md));
    const double r = lap_u - lap_f;
    return r * r;
}

double ValidationProblem::strong_boundary_penalty(const SplineFunction& u, const GeometryMapping& m,
                                                  const Eigen::VectorXd&) const {
    const SplineFunction map = m.spline();
    IntegrateOptions io;
    io.rule = opts_.quad;
    io.nders = 1;
    io.res_size = 1;
    io.parallel = opts_.parallel;
    const std::vector<Side> all_sides(kAllSides.begin(), kAllSides.end());
    const AssemblyOutput out = integrate_boundary(
        all_sides, {u.space.get(), m.space.get()}, &map,
        [&](const CellQuad& cq, LocalOut& lo) {
            const auto& bs = cq.basis[0];
            for (std::size_t q = 0; q < cq.pts.size(); ++q) {
                double uv = 0.0;
                for (std::size_t j = 0; j < bs.funcs.size(); ++j)
                    uv += u.coeffs(bs.funcs[j], 0) * bs.tables[0](static_cast<int>(j), static_cast<int>(q));
                const double uf = uv - cq.map[q].detJ;
                lo.add(0, cq.w[q] * uf * uf);
            }
        },
        io);
    return opts_.nitsche_c * out.residual[0];
}

} // namespace iga
