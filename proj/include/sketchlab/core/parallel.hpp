#pragma once

namespace sketchlab::par {

// Global switch for the OpenMP code paths. Kernels stay deterministic either
// way: every output element is produced by exactly one thread with a fixed
// accumulation order, so results are identical across thread counts.
bool& enabled_flag();

inline bool enabled() { return enabled_flag(); }
inline void set_enabled(bool on) { enabled_flag() = on; }

int num_threads();

// True when a kernel should open its own parallel region: parallelism is on
// and we are not already inside one (batch-level loops own the threads then).
bool active();

}  // namespace sketchlab::par
