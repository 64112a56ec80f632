#include "iga/spline_function.hpp"

#include <stdexcept>

namespace iga {

Eigen::VectorXd SplineFunction::value(double x, double y) const {
    const BasisEval be = space->eval(x, y, 0);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(dim());
    for (std::size_t j = 0; j < be.funcs.size(); ++j)
        out += be.value[static_cast<int>(j)] * coeffs.row(be.funcs[j]).transpose();
    return out;
}

Eigen::MatrixXd SplineFunction::jacobian(double x, double y) const {
    const BasisEval be = space->eval(x, y, 1);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(dim(), 2);
    for (std::size_t j = 0; j < be.funcs.size(); ++j)
        out += coeffs.row(be.funcs[j]).transpose() * be.grad.row(static_cast<int>(j));
    return out;
}

SplineFunction make_spline(SpacePtr space, Eigen::MatrixXd coeffs) {
    if (coeffs.rows() != space->num_active())
        throw std::invalid_argument("make_spline: coefficient row count must match active functions");
    return {std::move(space), std::move(coeffs)};
}

SplineFunction constant_spline(SpacePtr space, const Eigen::VectorXd& value) {
    Eigen::MatrixXd c(space->num_active(), value.size());
    for (int i = 0; i < c.rows(); ++i) c.row(i) = value.transpose();
    return {std::move(space), std::move(c)};
}

SplineFunction prolong(const SplineFunction& f, SpacePtr target) {
    TransferResult t = transfer(*f.space, f.coeffs, *target);
    const double scale = 1.0 + f.coeffs.cwiseAbs().maxCoeff();
    if (t.residue > 1e-10 * scale)
        throw std::invalid_argument("prolong: target space does not nest the source space");
    return {std::move(target), std::move(t.coeffs)};
}

std::pair<SplineFunction, double> restrict_to(const SplineFunction& f, SpacePtr target) {
    TransferResult t = transfer(*f.space, f.coeffs, *target);
    // the two-scale cascade cannot move mass to coarser levels; rows it never
    // reached are filled by Greville collocation of the source
    for (int r = 0; r < target->num_active(); ++r) {
        if (t.assigned[r]) continue;
        const Eigen::Vector2d g = target->greville(r);
        t.coeffs.row(r) = f.value(g[0], g[1]).transpose();
    }
    return {SplineFunction{std::move(target), std::move(t.coeffs)}, t.residue};
}

} // namespace iga
