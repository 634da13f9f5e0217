#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ftdl {

using NodeId = uint32_t;

/// Base class for all errors raised by the library.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Tensor/layer shape mismatch. Carries the offending layer index when known.
struct ShapeError : Error {
    explicit ShapeError(const std::string& what, int layer = -1)
        : Error(layer >= 0 ? "layer " + std::to_string(layer) + ": " + what : what),
          layer_index(layer) {}
    int layer_index;
};

/// Bad user-supplied configuration (topology file, CLI flags, scenario file).
struct ConfigError : Error {
    using Error::Error;
};

/// File I/O or format problem (missing file, corrupt header, short read).
struct IoError : Error {
    using Error::Error;
};

/// Unrecoverable protocol violation (length mismatch, bad checksum on a
/// supposedly reliable transport, sequence divergence). Not survivable by
/// shrinking; the run must abort.
struct ProtocolError : Error {
    using Error::Error;
};

/// Raised at a node that discovers it has been removed from the membership
/// by the other survivors (possible only under timeout-based suspicion).
struct EvictedError : Error {
    using Error::Error;
};

/// Terminal condition: no survivors remain / sole survivor asked to remove
/// itself. The training run cannot continue.
struct UnrecoverableError : Error {
    using Error::Error;
};

/// Thrown inside an in-process worker when the fault injector kills it.
/// Deliberately not derived from Error: it is control flow for the harness,
/// caught only at the worker's top level.
struct KilledSignal {
    NodeId victim;
};

}  // namespace ftdl
