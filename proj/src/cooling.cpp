#include "iga/cooling.hpp"

#include "iga/dual.hpp"
#include "iga/geom_delta.hpp"

#include <algorithm>
#include <cmath>

namespace iga {

namespace {

constexpr std::array<Side, 4> kCoolerSide = {Side::South, Side::North, Side::North, Side::East};

template <class T>
struct Pt {
    T x, y;
};

template <class T>
struct Segment {
    bool is_arc = false;
    T len{};
    // line data: point at local length tau = base + tau * dir
    Pt<T> base{};
    Eigen::Vector2d dir = Eigen::Vector2d::Zero();
    // arc data
    Pt<T> center{};
    T radius{};
    T angle0{};
    double angle_sign = 1.0;
    double blend = 0.0;  // half-width of the junction blends owned by this arc

    Pt<T> at(const T& tau) const {
        if (!is_arc) return {base.x + tau * T(dir[0]), base.y + tau * T(dir[1])};
        const T phi = angle0 + T(angle_sign) * tau / radius;
        return {center.x + radius * cos(phi), center.y + radius * sin(phi)};
    }
    Pt<T> tangent(const T& tau) const {
        if (!is_arc) return {T(dir[0]), T(dir[1])};
        const T phi = angle0 + T(angle_sign) * tau / radius;
        return {T(-angle_sign) * sin(phi), T(angle_sign) * cos(phi)};
    }
};

template <class T>
struct SidePath {
    std::vector<Segment<T>> segs;
    std::vector<T> cum;  // cumulative lengths, cum[0] = 0
    T total{};
};

double val(double x) { return x; }
template <int N>
double val(const Dual<N>& x) {
    return x.v;
}

template <class T>
SidePath<T> build_side(const CoolingOptions& o, Side side, const std::array<T, 12>& a) {
    SidePath<T> path;
    if (side == Side::West) {
        Segment<T> s;
        s.base = {T(0.0), T(0.0)};
        s.dir = {0.0, 1.0};
        s.len = T(o.height);
        path.segs.push_back(s);
    } else {
        struct Cooler {
            T tc, nu, R;
        };
        std::vector<Cooler> cs;
        for (int k = 0; k < 4; ++k) {
            if (kCoolerSide[k] != side) continue;
            T tc, nu;
            switch (side) {
                case Side::South:
                    tc = a[2 * k];
                    nu = a[2 * k + 1];
                    break;
                case Side::North:
                    tc = a[2 * k];
                    nu = a[2 * k + 1] - T(o.height);
                    break;
                default:  // East
                    tc = a[2 * k + 1];
                    nu = a[2 * k] - T(o.width);
            }
            cs.push_back({tc, nu, a[8 + k]});
        }
        std::sort(cs.begin(), cs.end(), [](const Cooler& p, const Cooler& q) { return val(p.tc) < val(q.tc); });

        const double t_end = (side == Side::East) ? o.height : o.width;
        auto line_point = [&](const T& t) -> Pt<T> {
            switch (side) {
                case Side::South: return {t, T(0.0)};
                case Side::North: return {t, T(o.height)};
                default: return {T(o.width), t};
            }
        };
        const Eigen::Vector2d line_dir = (side == Side::East) ? Eigen::Vector2d(0, 1) : Eigen::Vector2d(1, 0);

        T t_prev(0.0);
        for (const Cooler& c : cs) {
            const T w2 = c.R * c.R - c.nu * c.nu;
            if (val(w2) <= 0.0)
                throw std::domain_error("cooling boundary template: cooler detached from its side");
            const T w = sqrt(w2);
            const T t0 = c.tc - w, t1 = c.tc + w;
            if (val(t0) <= val(t_prev) + 1e-9 || val(t1) >= t_end - 1e-9)
                throw std::domain_error("cooling boundary template: overlapping or out-of-range coolers");

            Segment<T> line;
            line.base = line_point(t_prev);
            line.dir = line_dir;
            line.len = t0 - t_prev;
            path.segs.push_back(line);

            Segment<T> arc;
            arc.is_arc = true;
            arc.radius = c.R;
            arc.blend = o.blend_factor * val(c.R);
            switch (side) {
                case Side::South: {
                    // upper arc, traversed clockwise through pi/2
                    arc.center = {c.tc, c.nu};
                    T a0 = atan2(-c.nu, -w);
                    if (val(a0) <= 0.0) a0 += T(2.0 * M_PI);
                    const T a1 = atan2(-c.nu, w);
                    arc.angle0 = a0;
                    arc.angle_sign = -1.0;
                    arc.len = c.R * (a0 - a1);
                    break;
                }
                case Side::North: {
                    // lower arc, traversed counterclockwise through 3 pi/2
                    arc.center = {c.tc, T(o.height) + c.nu};
                    T a0 = atan2(-c.nu, -w);
                    if (val(a0) < 0.0) a0 += T(2.0 * M_PI);
                    T a1 = atan2(-c.nu, w);
                    if (val(a1) <= val(a0)) a1 += T(2.0 * M_PI);
                    arc.angle0 = a0;
                    arc.angle_sign = 1.0;
                    arc.len = c.R * (a1 - a0);
                    break;
                }
                default: {  // East: left arc, traversed clockwise through -pi
                    arc.center = {T(o.width) + c.nu, c.tc};
                    const T a0 = atan2(-w, -c.nu);
                    T a1 = atan2(w, -c.nu);
                    if (val(a1) >= val(a0)) a1 -= T(2.0 * M_PI);
                    arc.angle0 = a0;
                    arc.angle_sign = -1.0;
                    arc.len = c.R * (a0 - a1);
                }
            }
            path.segs.push_back(arc);
            t_prev = t1;
        }
        Segment<T> tail;
        tail.base = line_point(t_prev);
        tail.dir = line_dir;
        tail.len = T(t_end) - t_prev;
        path.segs.push_back(tail);
    }

    path.cum.push_back(T(0.0));
    for (const auto& s : path.segs) path.cum.push_back(path.cum.back() + s.len);
    path.total = path.cum.back();
    return path;
}

template <class T>
Pt<T> eval_path(const SidePath<T>& path, const T& t) {
    const int n = static_cast<int>(path.segs.size());
    int k = 0;
    while (k + 1 < n && val(t) > val(path.cum[k + 1])) ++k;

    // junction blends: replace the curve inside a window around each
    // arc/line junction with a cubic Hermite matching values and tangents
    for (int j = 1; j < n; ++j) {
        const Segment<T>& before = path.segs[j - 1];
        const Segment<T>& after = path.segs[j];
        const double delta = std::max(before.blend, after.blend);
        if (delta <= 0.0) continue;
        const T Tj = path.cum[j];
        if (val(t) < val(Tj) - delta || val(t) > val(Tj) + delta) continue;
        const T u = (t - (Tj - T(delta))) / T(2.0 * delta);
        const Pt<T> P0 = before.at(before.len - T(delta));
        const Pt<T> P1 = after.at(T(delta));
        const Pt<T> d0 = before.tangent(before.len - T(delta));
        const Pt<T> d1 = after.tangent(T(delta));
        const T u2 = u * u, u3 = u2 * u;
        const T h00 = T(2.0) * u3 - T(3.0) * u2 + T(1.0);
        const T h10 = u3 - T(2.0) * u2 + u;
        const T h01 = T(-2.0) * u3 + T(3.0) * u2;
        const T h11 = u3 - u2;
        const T scale(2.0 * delta);
        return {h00 * P0.x + h10 * scale * d0.x + h01 * P1.x + h11 * scale * d1.x,
                h00 * P0.y + h10 * scale * d0.y + h01 * P1.y + h11 * scale * d1.y};
    }
    return path.segs[k].at(t - path.cum[k]);
}

template <class T>
Pt<T> eval_side(const CoolingOptions& o, Side side, double s, const std::array<T, 12>& a) {
    const SidePath<T> path = build_side(o, side, a);
    return eval_path(path, T(s) * path.total);
}

} // namespace

Eigen::VectorXd CoolingProblem::lower_bounds() const {
    // centers: cooler 0 south, 1 and 2 north, 3 east; corner clearance is a
    // constraint, the box only keeps every cooler near its home side
    const double b = opts_.band_factor * opts_.r_max;
    Eigen::VectorXd lo(12);
    lo << 0.1, -b, 0.1, opts_.height - b, 0.1, opts_.height - b, opts_.width - b, 0.1,
        opts_.r_min, opts_.r_min, opts_.r_min, opts_.r_min;
    return lo;
}

Eigen::VectorXd CoolingProblem::upper_bounds() const {
    const double b = opts_.band_factor * opts_.r_max;
    Eigen::VectorXd hi(12);
    hi << opts_.width - 0.1, b, opts_.width - 0.1, opts_.height + b, opts_.width - 0.1,
        opts_.height + b, opts_.width + b, opts_.height - 0.1, opts_.r_max, opts_.r_max, opts_.r_max,
        opts_.r_max;
    return hi;
}

BoundaryCurve CoolingProblem::curve() const {
    BoundaryCurve c;
    c.n_design = 12;
    const CoolingOptions o = opts_;
    c.eval = [o](Side side, double s, const Eigen::VectorXd& alpha) -> Eigen::Vector2d {
        std::array<double, 12> a;
        for (int i = 0; i < 12; ++i) a[i] = alpha[i];
        const Pt<double> p = eval_side(o, side, s, a);
        return {p.x, p.y};
    };
    c.d_alpha = [o](Side side, double s, const Eigen::VectorXd& alpha) -> Eigen::MatrixXd {
        std::array<Dual<12>, 12> a;
        for (int i = 0; i < 12; ++i) a[i] = Dual<12>::seed(alpha[i], i);
        const Pt<Dual<12>> p = eval_side(o, side, s, a);
        Eigen::MatrixXd out(2, 12);
        out.row(0) = p.x.d.transpose();
        out.row(1) = p.y.d.transpose();
        return out;
    };
    return c;
}

double CoolingProblem::side_length(Side side, const Eigen::VectorXd& alpha) const {
    std::array<double, 12> a;
    for (int i = 0; i < 12; ++i) a[i] = alpha[i];
    return val(build_side(opts_, side, a).total);
}

Eigen::VectorXd CoolingProblem::default_start(double r1) const {
    Eigen::VectorXd a(12);
    a << 1.0, 0.0, 0.55, opts_.height, 1.45, opts_.height, opts_.width, 0.5, r1, opts_.r_min, opts_.r_min,
        opts_.r_min;
    return a;
}

// ---------------------------------------------------------------------------
// state residual
// ---------------------------------------------------------------------------

namespace {

struct QpScalar {
    double val;
    Eigen::Vector2d grad;
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

/// phi~_i = int_{gammaL} phi_i sin(pi y) dgamma over the mapped west side,
/// optionally with its geometry derivative.
struct InfluxWeights {
    Eigen::VectorXd tilde;            // n_state
    std::optional<SpMat> dtilde;      // n_state x 2 n_geo
};

InfluxWeights influx_weights(const SplineFunction& u, const GeometryMapping& m, bool want_d,
                             const CoolingOptions& o) {
    const HierarchicalSpace* S = u.space.get();
    const HierarchicalSpace* G = m.space.get();
    const int n_state = S->num_active();
    const SplineFunction map = m.spline();
    IntegrateOptions io;
    io.rule = o.quad;
    io.rule_subcell = 4;
    io.nders = 1;
    io.res_size = n_state;
    io.want_jacobian = want_d;
    io.jac_rows = n_state;
    io.jac_cols = 2 * G->num_active();
    io.parallel = o.parallel;
    const AssemblyOutput out = integrate_boundary(
        {Side::West}, {S, G}, &map,
        [&](const CellQuad& cq, LocalOut& lo) {
            const auto& bs = cq.basis[0];
            const auto& bg = cq.basis[1];
            for (std::size_t q = 0; q < cq.pts.size(); ++q) {
                const int qi = static_cast<int>(q);
                const MapData& md = cq.map[q];
                const double arc = arc_factor(md, cq.tangent_axis);
                const double sy = std::sin(M_PI * md.x[1]);
                for (std::size_t i = 0; i < bs.funcs.size(); ++i) {
                    const double phi = bs.tables[0](static_cast<int>(i), qi);
                    if (phi == 0.0) continue;
                    lo.add(bs.funcs[i], cq.w[q] * phi * sy * arc);
                    if (!want_d) continue;
                    for (std::size_t j = 0; j < bg.funcs.size(); ++j) {
                        CoefDelta d;
                        d.phi = bg.tables[0](static_cast<int>(j), qi);
                        d.dphi << bg.tables[1](static_cast<int>(j), qi), bg.tables[2](static_cast<int>(j), qi);
                        for (int e = 0; e < 2; ++e) {
                            d.comp = e;
                            const double darc = delta_arc_factor(md, d, cq.tangent_axis);
                            const double dsy = (e == 1) ? M_PI * std::cos(M_PI * md.x[1]) * d.phi : 0.0;
                            lo.add(bs.funcs[i], 2 * bg.funcs[j] + e, cq.w[q] * phi * (dsy * arc + sy * darc));
                        }
                    }
                }
            }
        },
        io);
    InfluxWeights w;
    w.tilde = out.residual;
    if (want_d) w.dtilde = *out.jacobian;
    return w;
}

} // namespace

StateAssembly CoolingProblem::state_residual(const SplineFunction& u, const GeometryMapping& m,
                                             const Eigen::VectorXd& alpha, const StateParts& parts) const {
    const HierarchicalSpace* S = u.space.get();
    const HierarchicalSpace* G = m.space.get();
    const int n_state = S->num_active();
    const int n_geo = G->num_active();
    const SplineFunction map = m.spline();
    const CoolingOptions& o = opts_;
    const double Asrc = o.n_tot / (4.0 * M_PI * o.sigma * o.sigma);
    const double sig2 = o.sigma * o.sigma;

    const InfluxWeights iw = influx_weights(u, m, parts.dB_dcA, o);

    IntegrateOptions vio;
    vio.rule = o.quad;
    vio.rule_subcell = 4;
    vio.nders = 2;
    // extra slots: gaussian mass W, then (when dB_dcA) its geometry gradient
    vio.res_size = n_state + 1 + (parts.dB_dcA ? 2 * n_geo : 0);
    vio.want_jacobian = parts.dB_ddA || parts.dB_dcA;
    vio.jac_rows = n_state;
    vio.jac_cols = (parts.dB_ddA ? n_state : 0) + (parts.dB_dcA ? 2 * n_geo : 0);
    vio.parallel = o.parallel;
    const int col_dA = 0;
    const int col_cA = parts.dB_ddA ? n_state : 0;

    // volume terms: diffusion, dissipation, combined internal source
    const AssemblyOutput vol = integrate(
        {S, G}, &map,
        [&](const CellQuad& cq, LocalOut& lo) {
            const auto& bs = cq.basis[0];
            const auto& bg = cq.basis[1];
            const int ns = static_cast<int>(bs.funcs.size());
            const int ng = static_cast<int>(bg.funcs.size());
            for (std::size_t q = 0; q < cq.pts.size(); ++q) {
                const int qi = static_cast<int>(q);
                const MapData& md = cq.map[q];
                const QpScalar uu = contract(bs, u.coeffs, qi);
                const Eigen::Vector2d Gu = phys_grad(md, uu.grad);
                const Eigen::Vector2d xc = md.x - o.source_center;
                const double gauss = std::exp(-xc.squaredNorm() / (2.0 * sig2));
                lo.add(n_state, cq.w[q] * gauss * md.detJ);

                std::vector<double> phi(ns);
                std::vector<Eigen::Vector2d> Gphi(ns);
                for (int i = 0; i < ns; ++i) {
                    phi[i] = bs.tables[0](i, qi);
                    Gphi[i] = phys_grad(md, {bs.tables[1](i, qi), bs.tables[2](i, qi)});
                }
                for (int i = 0; i < ns; ++i) {
                    const double r = o.diffusivity * Gu.dot(Gphi[i]) + o.dissipation * uu.val * phi[i] -
                                     Asrc * gauss * phi[i];
                    lo.add(bs.funcs[i], cq.w[q] * r * md.detJ);
                }
                if (parts.dB_ddA)
                    for (int i = 0; i < ns; ++i)
                        for (int j = 0; j < ns; ++j)
                            lo.add(bs.funcs[i], col_dA + bs.funcs[j],
                                   cq.w[q] * (o.diffusivity * Gphi[j].dot(Gphi[i]) + o.dissipation * phi[j] * phi[i]) *
                                       md.detJ);
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
                            const double dgauss = gauss * (-xc[e] * d.phi / sig2);
                            lo.add(n_state + 1 + 2 * bg.funcs[j] + e,
                                   cq.w[q] * (dgauss * md.detJ + gauss * ddet));
                            for (int i = 0; i < ns; ++i) {
                                const Eigen::Vector2d dGphi =
                                    dJi.transpose() * Eigen::Vector2d(bs.tables[1](i, qi), bs.tables[2](i, qi));
                                const double r = o.diffusivity * Gu.dot(Gphi[i]) + o.dissipation * uu.val * phi[i] -
                                                 Asrc * gauss * phi[i];
                                const double dr = o.diffusivity * (dGu.dot(Gphi[i]) + Gu.dot(dGphi)) -
                                                  Asrc * dgauss * phi[i];
                                lo.add(bs.funcs[i], col_cA + 2 * bg.funcs[j] + e,
                                       cq.w[q] * (dr * md.detJ + r * ddet));
                            }
                        }
                    }
                }
            }
        },
        vio);

    // boundary term: surface cooling over the whole mapped boundary
    IntegrateOptions bio = vio;
    bio.res_size = n_state;
    const std::vector<Side> all_sides(kAllSides.begin(), kAllSides.end());
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
                const double arc = arc_factor(md, cq.tangent_axis);
                const QpScalar uu = contract(bs, u.coeffs, qi);
                double hcool = 0.0;            // sum of R^3/r^2 factors
                Eigen::Vector2d dh_dx = Eigen::Vector2d::Zero();
                Eigen::VectorXd dh_dalpha = Eigen::VectorXd::Zero(12);
                for (int k = 0; k < 4; ++k) {
                    const Eigen::Vector2d ck(alpha[2 * k], alpha[2 * k + 1]);
                    const Eigen::Vector2d dx = md.x - ck;
                    const double r2 = dx.squaredNorm();
                    if (r2 < 1e-24)
                        throw std::domain_error("cooling residual: quadrature point at a cooler center");
                    const double R = alpha[8 + k];
                    hcool += o.cooling_coef * R * R * R / r2;
                    dh_dx += o.cooling_coef * R * R * R * (-2.0 / (r2 * r2)) * dx;
                    dh_dalpha.segment<2>(2 * k) = o.cooling_coef * R * R * R * (2.0 / (r2 * r2)) * dx;
                    dh_dalpha[8 + k] = 3.0 * o.cooling_coef * R * R / r2;
                }
                std::vector<double> phi(ns);
                for (int i = 0; i < ns; ++i) phi[i] = bs.tables[0](i, qi);

                for (int i = 0; i < ns; ++i) lo.add(bs.funcs[i], cq.w[q] * hcool * uu.val * phi[i] * arc);

                if (parts.dB_ddA)
                    for (int i = 0; i < ns; ++i)
                        for (int j = 0; j < ns; ++j)
                            lo.add(bs.funcs[i], col_dA + bs.funcs[j], cq.w[q] * hcool * phi[j] * phi[i] * arc);

                if (parts.dB_dcA) {
                    for (int j = 0; j < ng; ++j) {
                        CoefDelta d;
                        d.phi = bg.tables[0](j, qi);
                        d.dphi << bg.tables[1](j, qi), bg.tables[2](j, qi);
                        for (int e = 0; e < 2; ++e) {
                            d.comp = e;
                            const double darc = delta_arc_factor(md, d, cq.tangent_axis);
                            const double dhc = dh_dx[e] * d.phi;
                            for (int i = 0; i < ns; ++i)
                                lo.add(bs.funcs[i], col_cA + 2 * bg.funcs[j] + e,
                                       cq.w[q] * uu.val * phi[i] * (dhc * arc + hcool * darc));
                        }
                    }
                }
            }
        },
        bio);

    StateAssembly out;
    const double Wmass = vol.residual[n_state];
    out.residual = vol.residual.head(n_state) + bnd.residual;
    // global source-normalization terms: (pi/2) phi~_i (A W - N_tot)
    out.residual += 0.5 * M_PI * (Asrc * Wmass - o.n_tot) * iw.tilde;

    if (parts.dB_ddA || parts.dB_dcA) {
        SpMat Jall = *vol.jacobian + *bnd.jacobian;
        if (parts.dB_dcA) {
            // variation of phi~ scales with (A W - N_tot); variation of W
            // couples to phi~ as a sparse-by-dense outer product
            const double factor = 0.5 * M_PI * (Asrc * Wmass - o.n_tot);
            std::vector<Triplet> extra;
            const SpMat& dt = *iw.dtilde;
            for (int k = 0; k < dt.outerSize(); ++k)
                for (SpMat::InnerIterator it(dt, k); it; ++it)
                    extra.emplace_back(static_cast<int>(it.row()), col_cA + static_cast<int>(it.col()),
                                       factor * it.value());
            const Eigen::VectorXd dW = vol.residual.segment(n_state + 1, 2 * n_geo);
            for (int i = 0; i < n_state; ++i) {
                if (iw.tilde[i] == 0.0) continue;
                const double scale = 0.5 * M_PI * Asrc * iw.tilde[i];
                for (int cje = 0; cje < 2 * n_geo; ++cje)
                    if (dW[cje] != 0.0) extra.emplace_back(i, col_cA + cje, scale * dW[cje]);
            }
            SpMat E(Jall.rows(), Jall.cols());
            E.setFromTriplets(extra.begin(), extra.end());
            Jall += E;
        }
        if (parts.dB_ddA) out.dB_ddA = Jall.middleCols(col_dA, n_state);
        if (parts.dB_dcA) out.dB_dcA = Jall.middleCols(col_cA, 2 * n_geo);
    }

    if (parts.dB_dalpha) {
        // only the cooling term depends on alpha explicitly
        IntegrateOptions aio;
        aio.rule = o.quad;
        aio.nders = 0;
        aio.res_size = n_state * 12;
        aio.parallel = o.parallel;
        const AssemblyOutput da = integrate_boundary(
            all_sides, {S, G}, &map,
            [&](const CellQuad& cq, LocalOut& lo) {
                const auto& bs = cq.basis[0];
                for (std::size_t q = 0; q < cq.pts.size(); ++q) {
                    const int qi = static_cast<int>(q);
                    const MapData& md = cq.map[q];
                    const double arc = arc_factor(md, cq.tangent_axis);
                    const QpScalar uu = contract(bs, u.coeffs, qi);
                    for (int k = 0; k < 4; ++k) {
                        const Eigen::Vector2d ck(alpha[2 * k], alpha[2 * k + 1]);
                        const Eigen::Vector2d dx = md.x - ck;
                        const double r2 = dx.squaredNorm();
                        const double R = alpha[8 + k];
                        const Eigen::Vector2d dcenter = o.cooling_coef * R * R * R * (2.0 / (r2 * r2)) * dx;
                        const double dradius = 3.0 * o.cooling_coef * R * R / r2;
                        for (std::size_t i = 0; i < bs.funcs.size(); ++i) {
                            const double w = cq.w[q] * uu.val * bs.tables[0](static_cast<int>(i), qi) * arc;
                            lo.add(bs.funcs[i] * 12 + 2 * k, w * dcenter[0]);
                            lo.add(bs.funcs[i] * 12 + 2 * k + 1, w * dcenter[1]);
                            lo.add(bs.funcs[i] * 12 + 8 + k, w * dradius);
                        }
                    }
                }
            },
            aio);
        Eigen::MatrixXd dba = Eigen::MatrixXd::Zero(n_state, 12);
        for (int i = 0; i < n_state; ++i)
            for (int j = 0; j < 12; ++j) dba(i, j) = da.residual[i * 12 + j];
        out.dB_dalpha = dba;
    }
    return out;
}

// ---------------------------------------------------------------------------
// temperature, objective, constraints
// ---------------------------------------------------------------------------

ScalarEval CoolingProblem::temperature(const SplineFunction& u, const GeometryMapping& m,
                                       const Eigen::VectorXd& alpha, bool want) const {
    (void)alpha;
    const HierarchicalSpace* S = u.space.get();
    const HierarchicalSpace* G = m.space.get();
    const int n_state = S->num_active();
    const int n_geo = G->num_active();
    const SplineFunction map = m.spline();
    const CoolingOptions& o = opts_;
    const double sig2 = o.sigma * o.sigma;

    const InfluxWeights iw = influx_weights(u, m, want, o);
    const double ell = iw.tilde.dot(u.coeffs.col(0));

    // volume quantities: W, m_u, and their partials
    IntegrateOptions io;
    io.rule = o.quad;
    io.rule_subcell = 4;
    io.nders = want ? 2 : 0;
    io.res_size = 2 + (want ? n_state + 4 * n_geo : 0);
    io.parallel = o.parallel;
    // layout: [0] W, [1] m_u, then dm/dd (n_state), then dW/dc (2n_geo), dm/dc (2n_geo)
    const AssemblyOutput out = integrate(
        {S, G}, &map,
        [&](const CellQuad& cq, LocalOut& lo) {
            const auto& bs = cq.basis[0];
            const auto& bg = cq.basis[1];
            const int ns = static_cast<int>(bs.funcs.size());
            const int ng = static_cast<int>(bg.funcs.size());
            for (std::size_t q = 0; q < cq.pts.size(); ++q) {
                const int qi = static_cast<int>(q);
                const MapData& md = cq.map[q];
                const QpScalar uu = contract(bs, u.coeffs, qi);
                const Eigen::Vector2d xc = md.x - o.source_center;
                const double gauss = std::exp(-xc.squaredNorm() / (2.0 * sig2));
                lo.add(0, cq.w[q] * gauss * md.detJ);
                lo.add(1, cq.w[q] * uu.val * gauss * md.detJ);
                if (!want) continue;
                for (int i = 0; i < ns; ++i)
                    lo.add(2 + bs.funcs[i], cq.w[q] * bs.tables[0](i, qi) * gauss * md.detJ);
                for (int j = 0; j < ng; ++j) {
                    CoefDelta d;
                    d.phi = bg.tables[0](j, qi);
                    d.dphi << bg.tables[1](j, qi), bg.tables[2](j, qi);
                    for (int e = 0; e < 2; ++e) {
                        d.comp = e;
                        const double ddet = delta_detJ(md, d);
                        const double dgauss = gauss * (-xc[e] * d.phi / sig2);
                        lo.add(2 + n_state + 2 * bg.funcs[j] + e,
                               cq.w[q] * (dgauss * md.detJ + gauss * ddet));
                        lo.add(2 + n_state + 2 * n_geo + 2 * bg.funcs[j] + e,
                               cq.w[q] * uu.val * (dgauss * md.detJ + gauss * ddet));
                    }
                }
            }
        },
        io);

    const double W = out.residual[0];
    const double mu_int = out.residual[1];
    const double A1 = 0.5 * M_PI * (1.0 - W / (4.0 * M_PI * sig2));
    const double A2 = W / (8.0 * M_PI * M_PI * sig2 * sig2);
    const double D = (2.0 / M_PI) * A1 + W * A2;
    if (D <= 0.0) throw std::domain_error("cooling temperature: degenerate geometry (nonpositive denominator)");
    const double Nm = o.n_tot + A1 * ell + A2 * mu_int;

    ScalarEval ev;
    ev.value = Nm / D;
    if (!want) return ev;

    const double dA1_dW = -1.0 / (8.0 * sig2);
    const double dA2_dW = 1.0 / (8.0 * M_PI * M_PI * sig2 * sig2);
    const double dT_dell = A1 / D;
    const double dT_dm = A2 / D;
    const double dD_dW = (2.0 / M_PI) * dA1_dW + A2 + W * dA2_dW;
    const double dT_dW = (dA1_dW * ell + dA2_dW * mu_int) / D - Nm * dD_dW / (D * D);

    ev.d_dA = dT_dell * iw.tilde + dT_dm * out.residual.segment(2, n_state);
    // geometry chain: W, m_u, and ell all move with the mapping
    Eigen::VectorXd dell = iw.dtilde->transpose() * u.coeffs.col(0);
    ev.d_cA = dT_dW * out.residual.segment(2 + n_state, 2 * n_geo) +
              dT_dm * out.residual.segment(2 + n_state + 2 * n_geo, 2 * n_geo) + dT_dell * dell;
    ev.d_alpha = Eigen::VectorXd::Zero(12);
    return ev;
}

ScalarEval CoolingProblem::objective(const SplineFunction& u, const GeometryMapping& m,
                                     const Eigen::VectorXd& alpha, bool want) const {
    const HierarchicalSpace* G = m.space.get();
    const int n_geo = G->num_active();
    const SplineFunction map = m.spline();
    IntegrateOptions io;
    io.rule = opts_.quad;
    io.nders = 1;
    io.res_size = 1 + (want ? 2 * n_geo : 0);
    io.parallel = opts_.parallel;
    const AssemblyOutput out = integrate(
        {G}, &map,
        [&](const CellQuad& cq, LocalOut& lo) {
            const auto& bg = cq.basis[0];
            const int ng = static_cast<int>(bg.funcs.size());
            for (std::size_t q = 0; q < cq.pts.size(); ++q) {
                const int qi = static_cast<int>(q);
                const MapData& md = cq.map[q];
                lo.add(0, cq.w[q] * md.detJ);
                if (!want) continue;
                for (int j = 0; j < ng; ++j) {
                    CoefDelta d;
                    d.dphi << bg.tables[1](j, qi), bg.tables[2](j, qi);
                    for (int e = 0; e < 2; ++e) {
                        d.comp = e;
                        lo.add(1 + 2 * bg.funcs[j] + e, cq.w[q] * delta_detJ(md, d));
                    }
                }
            }
        },
        io);

    ScalarEval ev;
    double cost = 0.0;
    for (int k = 0; k < 4; ++k) cost += opts_.cost_coef * alpha[8 + k] * alpha[8 + k];
    ev.value = out.residual[0] + cost;
    ev.depends_on_state = false;
    if (want) {
        ev.d_dA = Eigen::VectorXd::Zero(u.space->num_active());
        ev.d_cA = out.residual.tail(2 * n_geo);
        ev.d_alpha = Eigen::VectorXd::Zero(12);
        for (int k = 0; k < 4; ++k) ev.d_alpha[8 + k] = 2.0 * opts_.cost_coef * alpha[8 + k];
    }
    return ev;
}

ScalarEval CoolingProblem::constraint(int k, const SplineFunction& u, const GeometryMapping& m,
                                      const Eigen::VectorXd& alpha, bool want) const {
    if (k == 0) {
        ScalarEval t = temperature(u, m, alpha, want);
        ScalarEval ev;
        ev.value = opts_.t_max - t.value;
        if (want) {
            ev.d_dA = -t.d_dA;
            ev.d_cA = -t.d_cA;
            ev.d_alpha = -t.d_alpha;
        }
        return ev;
    }

    // pure design-space feasibility margins, differentiated exactly
    std::array<Dual<12>, 12> a;
    for (int i = 0; i < 12; ++i) a[i] = Dual<12>::seed(alpha[i], i);
    auto center = [&](int c) { return std::array<Dual<12>, 2>{a[2 * c], a[2 * c + 1]}; };
    auto dist = [&](const std::array<Dual<12>, 2>& p, const std::array<Dual<12>, 2>& q) {
        const Dual<12> dx = p[0] - q[0], dy = p[1] - q[1];
        return sqrt(dx * dx + dy * dy);
    };

    Dual<12> g;
    const int idx = k - 1;
    if (idx < 6) {  // pairwise non-overlap
        static constexpr int pairs[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
        const int i = pairs[idx][0], j = pairs[idx][1];
        g = dist(center(i), center(j)) - (a[8 + i] + a[8 + j]);
    } else if (idx < 22) {  // corner clearance
        const int c = (idx - 6) / 4, corner = (idx - 6) % 4;
        const double cx[4] = {0.0, opts_.width, opts_.width, 0.0};
        const double cy[4] = {0.0, 0.0, opts_.height, opts_.height};
        g = dist(center(c), {Dual<12>(cx[corner]), Dual<12>(cy[corner])}) -
            (a[8 + c] + Dual<12>(opts_.corner_margin));
    } else {  // normal band: |nu| <= band_factor * R, one-sided pair per cooler
        const int c = (idx - 22) / 2, sign = (idx - 22) % 2;
        Dual<12> nu;
        switch (kCoolerSide[c]) {
            case Side::South: nu = a[2 * c + 1]; break;
            case Side::North: nu = a[2 * c + 1] - Dual<12>(opts_.height); break;
            default: nu = a[2 * c] - Dual<12>(opts_.width);
        }
        g = Dual<12>(opts_.band_factor) * a[8 + c] + (sign == 0 ? nu : -nu);
    }

    ScalarEval ev;
    ev.value = g.v;
    ev.depends_on_state = false;
    ev.depends_on_geometry = false;
    if (want) {
        ev.d_alpha = g.d;
        ev.d_dA = Eigen::VectorXd::Zero(u.space->num_active());
        ev.d_cA = Eigen::VectorXd::Zero(2 * m.space->num_active());
    }
    return ev;
}

std::optional<double> CoolingProblem::strong_density(const SplineFunction& u, const MapData& md,
                                                     const Eigen::Vector2d& xi,
                                                     const Eigen::VectorXd&) const {
    const BasisEval be = u.space->eval(xi[0], xi[1], 2);
    double uv = 0.0;
    Eigen::Vector2d gu = Eigen::Vector2d::Zero();
    Eigen::Vector3d hu = Eigen::Vector3d::Zero();
    for (std::size_t j = 0; j < be.funcs.size(); ++j) {
        const double c = u.coeffs(be.funcs[j], 0);
        uv += c * be.value[static_cast<int>(j)];
        gu += c * be.grad.row(static_cast<int>(j)).transpose();
        hu += c * be.hess.row(static_cast<int>(j)).transpose();
    }
    const double sig2 = opts_.sigma * opts_.sigma;
    const double Asrc = opts_.n_tot / (4.0 * M_PI * sig2);
    const double gauss = std::exp(-(md.x - opts_.source_center).squaredNorm() / (2.0 * sig2));
    const double r = -opts_.diffusivity * phys_laplace(md, gu, hu) + opts_.dissipation * uv - Asrc * gauss;
    return r * r;
}

} // namespace iga
