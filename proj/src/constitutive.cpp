#include "splatsim/constitutive.hpp"

#include <cmath>
#include <numbers>

namespace splatsim {

LameParameters lame_parameters(double youngs_modulus, double poissons_ratio) {
    if (!(youngs_modulus > 0))
        throw ContractError("lame_parameters: Young's modulus must be > 0");
    if (!(poissons_ratio < 0.5))
        throw ContractError("lame_parameters: Poisson's ratio must be < 0.5");
    LameParameters lame;
    lame.mu = youngs_modulus / (2.0 * (1.0 + poissons_ratio));
    lame.lambda = youngs_modulus * poissons_ratio /
                  ((1.0 + poissons_ratio) * (1.0 - 2.0 * poissons_ratio));
    return lame;
}

MaterialModel MaterialModel::from_properties(const MaterialProperties& p) {
    MaterialModel m;
    m.type = p.material_type;
    m.lame = lame_parameters(p.youngs_modulus, p.poissons_ratio);
    m.snow_theta_c = p.snow_theta_c;
    m.snow_theta_s = p.snow_theta_s;
    m.snow_hardening = p.snow_hardening;
    m.sand_friction_deg = p.sand_friction_deg;
    return m;
}

Mat3 polar_rotation(const Mat3& F) {
    // Newton iteration X <- (g X + X^{-T}/g)/2 with Frobenius scaling;
    // quadratic convergence for invertible F.
    Mat3 X = F;
    for (int it = 0; it < 60; ++it) {
        const Mat3 Xinv_t = X.inverse().transpose();
        const double g = std::sqrt(std::sqrt(Xinv_t.squaredNorm() / X.squaredNorm()));
        const Mat3 Xn = 0.5 * (g * X + (1.0 / g) * Xinv_t);
        const double delta = (Xn - X).norm();
        X = Xn;
        if (delta < 1e-14 * 3.0) break;
    }
    return X;
}

namespace {

double hardening_scale(const MaterialModel& model, const ElasticState& state) {
    if (model.type != MaterialType::snow) return 1.0;
    return std::exp(model.snow_hardening * (1.0 - state.plastic_determinant));
}

} // namespace

Mat3 pk1_times_Ft(const Mat3& F, const MaterialModel& model, const ElasticState& state) {
    const double h = hardening_scale(model, state);
    const double mu = model.lame.mu * h;
    const double lambda = model.lame.lambda * h;
    const double J = F.determinant();
    const Mat3 R = polar_rotation(F);
    // P F^T = 2 mu (F - R) F^T + lambda (J-1) J I  (since F^{-T} F^T = I)
    return 2.0 * mu * (F - R) * F.transpose() + lambda * (J - 1.0) * J * Mat3::Identity();
}

Mat3 cauchy_stress(const Mat3& F, const LameParameters& lame, MaterialType type,
                   const ElasticState& state) {
    const double J = F.determinant();
    if (!(J > 0)) throw ContractError("cauchy_stress: det(F) must be > 0");
    MaterialModel m;
    m.type = type;
    m.lame = lame;
    return symmetrize(pk1_times_Ft(F, m, state) / J);
}

ElasticState apply_plasticity(const Mat3& F_trial, const MaterialModel& model,
                              const ElasticState& state, bool* projected) {
    if (!F_trial.allFinite()) throw ContractError("apply_plasticity: non-finite F_trial");
    if (!(F_trial.determinant() > 0)) throw ContractError("apply_plasticity: det(F_trial) <= 0");

    if (projected) *projected = false;
    ElasticState out = state;
    if (model.type == MaterialType::elastic) {
        out.F = F_trial;
        return out;
    }

    Eigen::JacobiSVD<Mat3> svd(F_trial, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Vec3 sigma = svd.singularValues();

    if (model.type == MaterialType::snow) {
        const double lo = 1.0 - model.snow_theta_c;
        const double hi = 1.0 + model.snow_theta_s;
        Vec3 clamped = sigma.cwiseMax(lo).cwiseMin(hi);
        if (clamped == sigma) {
            out.F = F_trial; // untouched: keep the trial bits
            return out;
        }
        if (projected) *projected = true;
        out.F = svd.matrixU() * clamped.asDiagonal() * svd.matrixV().transpose();
        // Volume change removed by the clamp accumulates as hardening state.
        const double jp = state.plastic_determinant * sigma.prod() / clamped.prod();
        out.plastic_determinant = std::clamp(jp, 0.6, 20.0);
        return out;
    }

    // Sand: Drucker-Prager return map on Hencky strain.
    const Vec3 eps = sigma.array().log();
    const double tr = eps.sum();
    if (tr > 0.0) {
        // Expansion past the cone tip: project to the stress-free state.
        if (projected) *projected = true;
        out.F = svd.matrixU() * svd.matrixV().transpose();
        return out;
    }
    const Vec3 dev = eps - Vec3::Constant(tr / 3.0);
    const double dev_norm = dev.norm();
    if (dev_norm == 0.0) {
        out.F = F_trial; // pure compression, inside the cone
        return out;
    }
    const double phi = model.sand_friction_deg * std::numbers::pi / 180.0;
    const double alpha =
        std::sqrt(2.0 / 3.0) * 2.0 * std::sin(phi) / (3.0 - std::sin(phi));
    const double dgamma =
        dev_norm + alpha * (3.0 * model.lame.lambda + 2.0 * model.lame.mu) /
                       (2.0 * model.lame.mu) * tr;
    if (dgamma <= 0.0) {
        out.F = F_trial;
        return out;
    }
    if (projected) *projected = true;
    const Vec3 eps_proj = eps - (dgamma / dev_norm) * dev;
    const Vec3 sigma_proj = eps_proj.array().exp();
    out.F = svd.matrixU() * sigma_proj.asDiagonal() * svd.matrixV().transpose();
    return out;
}

} // namespace splatsim
