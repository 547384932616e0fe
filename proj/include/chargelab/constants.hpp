#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include "chargelab/errors.hpp"

namespace chargelab {

/// Physical constants of a run. All five must be finite and strictly
/// positive; the charge parameter e is a magnitude (the defect itself
/// carries charge -e, positive charges enter via explicit sign flips).
struct Constants {
    double c = 1.0;     ///< speed of light
    double e = 1.0;     ///< elementary charge magnitude
    double m = 1.0;     ///< defect mass
    double b = 1.0;     ///< aether field-strength scale
    double hbar = 1.0;  ///< quantum of action

    Constants() = default;

    Constants(double c_, double e_, double m_, double b_, double hbar_)
        : c(c_), e(e_), m(m_), b(b_), hbar(hbar_) {
        validate();
    }

    void validate() const {
        auto bad = [](double v) { return !(std::isfinite(v) && v > 0.0); };
        if (bad(c)) throw ConfigError("Constants: c must be finite and > 0");
        if (bad(e)) throw ConfigError("Constants: e must be finite and > 0");
        if (bad(m)) throw ConfigError("Constants: m must be finite and > 0");
        if (bad(b)) throw ConfigError("Constants: b must be finite and > 0");
        if (bad(hbar)) throw ConfigError("Constants: hbar must be finite and > 0");
    }

    /// Named presets. "born-units": c = e = m = 1. "atomic-units":
    /// hbar = m = e = 1 and c = 1/alpha. Members a preset does not fix
    /// default to 1 and are meant to be overridden by the caller.
    static Constants preset(std::string_view name) {
        if (name == "born-units") return Constants(1.0, 1.0, 1.0, 1.0, 1.0);
        if (name == "atomic-units") return Constants(137.035999084, 1.0, 1.0, 1.0, 1.0);
        throw ConfigError("Constants: unknown preset '" + std::string(name) +
                          "' (expected \"born-units\" or \"atomic-units\")");
    }
};

} // namespace chargelab
