#pragma once

#include <string>
#include <vector>

#include "chargelab/constants.hpp"
#include "chargelab/errors.hpp"
#include "chargelab/kinematics.hpp"

namespace chargelab {

/// Ordered record of an integration run. `accelerations` is populated only
/// by the third-order integrator (one Qddot per state); the flags record
/// early termination on blow-up.
struct Trajectory {
    std::vector<ParticleState> states;
    std::vector<Vec3> accelerations;
    std::string method;
    double dt = 0.0;
    double error_estimate = 0.0;  ///< Richardson gap against a double-step rerun
    bool truncated = false;
    bool runaway = false;

    const ParticleState& back() const { return states.back(); }

    /// Invariants: strictly increasing time, subluminal momentum at every
    /// sample, acceleration record either absent or matching states.
    void validate(const Constants& k) const {
        if (states.empty()) throw DomainError("Trajectory: empty");
        if (!accelerations.empty() && accelerations.size() != states.size())
            throw DomainError("Trajectory: acceleration record out of step with states");
        for (std::size_t i = 0; i < states.size(); ++i) {
            if (i > 0 && !(states[i].t > states[i - 1].t))
                throw DomainError("Trajectory: time must be strictly increasing");
            // throws SuperluminalError if the sample is not subluminal
            (void)velocity_of_momentum(states[i].P, k.m, k.c);
        }
    }
};

} // namespace chargelab
