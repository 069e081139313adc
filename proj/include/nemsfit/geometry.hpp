#pragma once

#include <string>
#include <string_view>

#include "nemsfit/error.hpp"

namespace nemsfit {

enum class Topology { LVR, DLVR };
enum class AcousticMode { S0, SH0 };

inline const char* to_string(Topology t) { return t == Topology::LVR ? "LVR" : "dLVR"; }
inline const char* to_string(AcousticMode m) { return m == AcousticMode::S0 ? "S0" : "SH0"; }

inline Topology topology_from_string(std::string_view s) {
    if (s == "lvr" || s == "LVR") return Topology::LVR;
    if (s == "dlvr" || s == "dLVR" || s == "DLVR" || s == "d-lvr" || s == "d-LVR") return Topology::DLVR;
    throw PreconditionError("unknown topology '" + std::string(s) + "' (expected lvr or dlvr)");
}

inline AcousticMode mode_from_string(std::string_view s) {
    if (s == "S0" || s == "s0") return AcousticMode::S0;
    if (s == "SH0" || s == "sh0") return AcousticMode::SH0;
    throw PreconditionError("unknown acoustic mode '" + std::string(s) + "' (expected S0 or SH0)");
}

/// Lithographic description of one resonator. Lengths in metres.
struct DeviceGeometry {
    double lambda = 0.0;
    Topology topology = Topology::DLVR;
    AcousticMode mode = AcousticMode::S0;
    int n_elements = 2;       // electrodes across the plate
    int n_pairs = 0;          // IDT finger pairs (independent of n_elements)
    double aperture = 0.0;    // L_e
    double coverage = 0.5;
    double film_h = 100e-9;
    double metal_tm = 20e-9;
    double angle_theta = 30.0;  // degrees, propagation direction on X-cut

    void validate() const {
        if (!(lambda > 0.0)) throw PreconditionError("device geometry: lambda must be positive");
        if (!(coverage > 0.0 && coverage < 1.0)) throw PreconditionError("device geometry: coverage must be in (0, 1)");
        if (n_elements < 2) throw PreconditionError("device geometry: at least 2 elements");
        if (!(aperture > 0.0)) throw PreconditionError("device geometry: aperture must be positive");
    }
};

}  // namespace nemsfit
