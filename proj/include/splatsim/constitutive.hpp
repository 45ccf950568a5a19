#pragma once

#include "splatsim/materials.hpp"
#include "splatsim/types.hpp"

namespace splatsim {

struct LameParameters {
    double mu = 0;     // Pa
    double lambda = 0; // Pa
};

/// mu = E / (2(1+nu)), lambda = E*nu / ((1+nu)(1-2nu)).
/// Throws ContractError for E <= 0 or nu >= 0.5 (lambda singular).
LameParameters lame_parameters(double youngs_modulus, double poissons_ratio);

/// Per-particle elastic state: deformation gradient plus the snow hardening
/// determinant J_p.
struct ElasticState {
    Mat3 F = Mat3::Identity();
    double plastic_determinant = 1.0; // J_p
};

/// Per-group material resolved for simulation.
struct MaterialModel {
    MaterialType type = MaterialType::elastic;
    LameParameters lame;
    double snow_theta_c = 2.5e-2;
    double snow_theta_s = 7.5e-3;
    double snow_hardening = 10.0;
    double sand_friction_deg = 30.0;

    static MaterialModel from_properties(const MaterialProperties& p);
};

/// Rotation factor of the polar decomposition F = R S (det F > 0 assumed).
Mat3 polar_rotation(const Mat3& F);

/// P(F) F^T for the fixed-corotated model:
/// P = 2 mu (F - R) + lambda (J-1) J F^{-T}. Snow scales mu, lambda by
/// exp(xi (1 - J_p)). Symmetric in exact arithmetic; returned as computed.
Mat3 pk1_times_Ft(const Mat3& F, const MaterialModel& model, const ElasticState& state);

/// Cauchy stress sigma = (1/J) P F^T, symmetrized.
/// Throws ContractError for det F <= 0.
Mat3 cauchy_stress(const Mat3& F, const LameParameters& lame, MaterialType type,
                   const ElasticState& state);

/// Return mapping of a trial deformation gradient:
///  - elastic: pass-through
///  - snow: singular values clamped to [1-theta_c, 1+theta_s], removed volume
///    change folded into J_p (bounded to [0.6, 20])
///  - sand: Drucker-Prager projection on the log singular values
/// Throws ContractError for non-finite F_trial or det <= 0.
/// If `projected` is given, it is set to whether the return map moved F.
ElasticState apply_plasticity(const Mat3& F_trial, const MaterialModel& model,
                              const ElasticState& state, bool* projected = nullptr);

} // namespace splatsim
