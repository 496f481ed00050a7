#pragma once

#include <array>

#include "racebo/rng.hpp"

namespace racebo {

// 6-state dynamic bicycle model. Positions/heading in the world frame,
// velocities in the body frame.
struct VehicleState {
    double px = 0.0;     // [m]
    double py = 0.0;     // [m]
    double psi = 0.0;    // heading [rad], stored unwrapped
    double vx = 0.0;     // longitudinal velocity [m/s]
    double vy = 0.0;     // lateral velocity [m/s]
    double omega = 0.0;  // yaw rate [rad/s]

    std::array<double, 6> to_array() const { return {px, py, psi, vx, vy, omega}; }
    static VehicleState from_array(const std::array<double, 6>& a) {
        return {a[0], a[1], a[2], a[3], a[4], a[5]};
    }
};

struct VehicleInput {
    double delta = 0.0;  // steering angle [rad]
    double tau = 0.0;    // drive-train command, dimensionless in [-1, 1]
};

// Physical parameters. One instance describes the controller's nominal model,
// perturbed copies describe the "true" plants of the different scenarios.
struct VehicleParams {
    double m = 0.13;       // mass [kg]
    double iz = 1.4e-4;    // yaw inertia [kg m^2]
    double lf = 0.05;      // CoG to front axle [m]
    double lr = 0.05;      // CoG to rear axle [m]

    // simplified Pacejka lateral tire model F = D sin(C atan(B alpha)).
    // Cornering stiffness B*C*D is kept moderate so the lateral dynamics stay
    // within the RK4 stability region at the sub-step size used below.
    double bf = 2.4;
    double cf = 1.35;
    double df = 0.62;      // [N]
    double br = 2.55;
    double cr = 1.35;
    double dr = 0.70;      // [N]

    // drive train / rolling resistance: Fx = (cm1 - cm2 vx) tau - cr0 - cr2 vx^2
    double cm1 = 0.7;
    double cm2 = 0.05;
    double cr0 = 0.03;
    double cr2 = 0.015;

    double delta_max = 0.40;  // steering limit [rad]
    double v_blend = 0.15;    // slip-angle denominator floor [m/s]

    bool valid() const {
        return m > 0 && iz > 0 && lf > 0 && lr > 0 && df >= 0 && dr >= 0;
    }
};

struct StateDerivative {
    double dpx = 0.0;
    double dpy = 0.0;
    double dpsi = 0.0;
    double dvx = 0.0;
    double dvy = 0.0;
    double domega = 0.0;
};

struct SlipAngles {
    double front = 0.0;  // [rad]
    double rear = 0.0;   // [rad]
};

struct TireForces {
    double front = 0.0;  // lateral front [N]
    double rear = 0.0;   // lateral rear [N]
    double fx = 0.0;     // longitudinal [N]
};

// Additive zero-mean Gaussian noise injected on the velocity states of the
// simulated plant, per control step.
struct ProcessNoise {
    double vx = 1e-3;     // [m/s]
    double vy = 1e-3;     // [m/s]
    double omega = 1e-2;  // [rad/s]
};

struct MeasurementNoise {
    double px = 1e-3;   // [m]
    double py = 1e-3;   // [m]
    double psi = 0.01;  // [rad]
};

SlipAngles slip_angles(const VehicleState& state, double delta, const VehicleParams& p);

TireForces tire_forces(const VehicleState& state, const VehicleInput& input,
                       const VehicleParams& p);

StateDerivative continuous_dynamics(const VehicleState& state, const VehicleInput& input,
                                    const VehicleParams& p);

// One classical RK4 stage over exactly h.
VehicleState rk4_step(const VehicleState& state, const VehicleInput& input,
                      const VehicleParams& p, double h);

// RK4 integration over dt with the input held constant. dt is subdivided into
// equal RK4 sub-steps no longer than kMaxRk4SubStep; the slip-angle dynamics
// near the v_blend floor are too stiff for a single step at the 35 Hz control
// period.
inline constexpr double kMaxRk4SubStep = 0.0036;  // [s]

VehicleState integrate_step(const VehicleState& state, const VehicleInput& input,
                            const VehicleParams& p, double dt);

// One plant step: RK4 with the true parameters plus process noise on the
// velocity states only.
VehicleState simulate_plant_step(const VehicleState& state, const VehicleInput& input,
                                 const VehicleParams& true_params, const ProcessNoise& noise,
                                 double dt, Rng& rng);

}  // namespace racebo
