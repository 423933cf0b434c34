#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>

namespace gridsense {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An operation was called with inputs violating its precondition.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Input file is missing a required column or has the wrong header.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// Input rows are malformed (bad timestamp, NaN, non-monotonic time).
class IngestError : public Error {
public:
    using Error::Error;
};

/// A serialized payload (model, report, selection) could not be decoded.
class FormatError : public Error {
public:
    using Error::Error;
};

class VersionError : public FormatError {
public:
    using FormatError::FormatError;
};

/// splitmix64 finalizer; derives independent substream seeds from a master seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// Seeded generator with distribution code that does not depend on the
/// standard library implementation, so outputs are stable across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    /// Uniform in [0, 1) with 53 random bits.
    double uniform();
    /// Uniform integer in [0, n). n must be > 0.
    std::size_t below(std::size_t n);
    /// Standard normal via Box-Muller.
    double normal();

private:
    std::mt19937_64 engine_;
};

/// Number of worker threads to use for `requested` (0 = hardware concurrency).
int resolve_threads(int requested);

/// Runs fn(i) for i in [0, n) on up to `threads` threads. Each index is
/// processed exactly once; callers write results by index so the outcome does
/// not depend on scheduling. The first exception thrown is rethrown.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace gridsense
