#pragma once

#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace aoa {

using cd = std::complex<double>;
using cf = std::complex<float>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kSpeedOfLight = 299792458.0;

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid configuration or scenario description (CLI exit code 2).
struct ConfigError : Error {
    using Error::Error;
};

/// Mismatched dimensions between related inputs.
struct DimensionError : Error {
    using Error::Error;
};

/// File system / stream failure (CLI exit code 3).
struct IoError : Error {
    using Error::Error;
};

/// Malformed or truncated capture file (CLI exit code 3).
struct FormatError : IoError {
    using IoError::IoError;
};

/// Numerical failure: non-Hermitian input, division guard, ... (CLI exit code 4).
struct NumericError : Error {
    using Error::Error;
};

/// Requested model order is infeasible (k >= M, k > numerical rank).
struct OrderError : NumericError {
    using NumericError::NumericError;
};

/// splitmix64 finalizer; used to derive independent per-trial RNG streams.
inline constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Stream seed for (scenario seed, case, snr index, trial index). Trials are
/// seeded independently of execution order so worker count cannot change results.
inline constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t case_id,
                                           std::uint64_t snr_index, std::uint64_t trial_index) {
    std::uint64_t h = mix64(seed ^ mix64(case_id));
    h = mix64(h ^ mix64(snr_index));
    return mix64(h ^ mix64(trial_index));
}

using Rng = std::mt19937_64;

}  // namespace aoa
