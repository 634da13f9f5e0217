#pragma once

#include <chrono>

namespace ftdl {

/// Time source for a run. In real mode durations come from the steady clock.
/// In virtual mode (the default for in-process runs) durations are derived
/// from a deterministic cost model instead of being measured, which makes
/// metrics files byte-identical across executions of the same seed and fault
/// plan. The cost formulas live at the call sites; this type only carries
/// the mode.
struct RunClock {
    bool real = true;

    using time_point = std::chrono::steady_clock::time_point;
    static time_point now() { return std::chrono::steady_clock::now(); }
    static double ms_since(time_point t0) {
        return std::chrono::duration<double, std::milli>(now() - t0).count();
    }

    /// Measured wall time in real mode, the supplied modeled cost otherwise.
    double elapsed_or(time_point t0, double modeled_ms) const {
        return real ? ms_since(t0) : modeled_ms;
    }
};

}  // namespace ftdl
