#include "racebo/vehicle.hpp"

#include <algorithm>
#include <cmath>

namespace racebo {

SlipAngles slip_angles(const VehicleState& state, double delta, const VehicleParams& p) {
    // Classical restoring convention: alpha is the angle from the contact
    // point's velocity to the wheel heading, so D sin(C atan(B alpha)) opposes
    // the lateral sliding. The regularized denominator removes the v_x = 0
    // singularity.
    const double vx = std::max(state.vx, p.v_blend);
    SlipAngles a;
    a.front = delta - std::atan((state.vy + p.lf * state.omega) / vx);
    a.rear = -std::atan((state.vy - p.lr * state.omega) / vx);
    return a;
}

TireForces tire_forces(const VehicleState& state, const VehicleInput& input,
                       const VehicleParams& p) {
    const SlipAngles a = slip_angles(state, input.delta, p);
    TireForces f;
    f.front = p.df * std::sin(p.cf * std::atan(p.bf * a.front));
    f.rear = p.dr * std::sin(p.cr * std::atan(p.br * a.rear));
    f.fx = (p.cm1 - p.cm2 * state.vx) * input.tau - p.cr0 - p.cr2 * state.vx * state.vx;
    return f;
}

StateDerivative continuous_dynamics(const VehicleState& state, const VehicleInput& input,
                                    const VehicleParams& p) {
    const TireForces f = tire_forces(state, input, p);
    const double cos_psi = std::cos(state.psi);
    const double sin_psi = std::sin(state.psi);
    const double cos_delta = std::cos(input.delta);
    const double sin_delta = std::sin(input.delta);

    StateDerivative d;
    d.dpx = state.vx * cos_psi - state.vy * sin_psi;
    d.dpy = state.vx * sin_psi + state.vy * cos_psi;
    d.dpsi = state.omega;
    d.dvx = (f.fx - f.front * sin_delta + p.m * state.vy * state.omega) / p.m;
    d.dvy = (f.rear + f.front * cos_delta - p.m * state.vx * state.omega) / p.m;
    d.domega = (f.front * p.lf * cos_delta - f.rear * p.lr) / p.iz;
    return d;
}

namespace {

VehicleState axpy(const VehicleState& x, const StateDerivative& d, double h) {
    VehicleState out = x;
    out.px += h * d.dpx;
    out.py += h * d.dpy;
    out.psi += h * d.dpsi;
    out.vx += h * d.dvx;
    out.vy += h * d.dvy;
    out.omega += h * d.domega;
    return out;
}

}  // namespace

VehicleState rk4_step(const VehicleState& state, const VehicleInput& input,
                      const VehicleParams& p, double h) {
    const StateDerivative k1 = continuous_dynamics(state, input, p);
    const StateDerivative k2 = continuous_dynamics(axpy(state, k1, 0.5 * h), input, p);
    const StateDerivative k3 = continuous_dynamics(axpy(state, k2, 0.5 * h), input, p);
    const StateDerivative k4 = continuous_dynamics(axpy(state, k3, h), input, p);

    VehicleState out = state;
    out.px += h / 6.0 * (k1.dpx + 2 * k2.dpx + 2 * k3.dpx + k4.dpx);
    out.py += h / 6.0 * (k1.dpy + 2 * k2.dpy + 2 * k3.dpy + k4.dpy);
    out.psi += h / 6.0 * (k1.dpsi + 2 * k2.dpsi + 2 * k3.dpsi + k4.dpsi);
    out.vx += h / 6.0 * (k1.dvx + 2 * k2.dvx + 2 * k3.dvx + k4.dvx);
    out.vy += h / 6.0 * (k1.dvy + 2 * k2.dvy + 2 * k3.dvy + k4.dvy);
    out.omega += h / 6.0 * (k1.domega + 2 * k2.domega + 2 * k3.domega + k4.domega);
    return out;
}

VehicleState integrate_step(const VehicleState& state, const VehicleInput& input,
                            const VehicleParams& p, double dt) {
    const int n = std::max(1, static_cast<int>(std::ceil(dt / kMaxRk4SubStep)));
    const double h = dt / n;
    VehicleState x = state;
    for (int i = 0; i < n; ++i) x = rk4_step(x, input, p, h);
    return x;
}

VehicleState simulate_plant_step(const VehicleState& state, const VehicleInput& input,
                                 const VehicleParams& true_params, const ProcessNoise& noise,
                                 double dt, Rng& rng) {
    VehicleState out = integrate_step(state, input, true_params, dt);
    out.vx += rng.normal(0.0, noise.vx);
    out.vy += rng.normal(0.0, noise.vy);
    out.omega += rng.normal(0.0, noise.omega);
    return out;
}

}  // namespace racebo
