#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "infolimit/gauss.hpp"
#include "infolimit/lti.hpp"
#include "infolimit/spectral.hpp"

namespace infolimit {

/// Distribution of the white driver of v. All families are zero mean and
/// scaled to unit variance before coloring. w is always Gaussian.
enum class NoiseFamily { gaussian, uniform, laplace };

std::string to_string(NoiseFamily f);
NoiseFamily parse_noise_family(const std::string& name);

/// Sample paths of the loop signals. Arrays are path-major:
/// sample k (0-based, time k+1) of path p is at p * horizon + k.
struct Trace {
    std::size_t horizon = 0;
    std::size_t paths = 0;
    std::uint64_t seed = 0;
    NoiseFamily v_family = NoiseFamily::gaussian;
    /// Recommended number of leading samples to drop for stationary statistics.
    std::size_t burn_in = 0;
    /// Plant initial-state dimension; `x0` holds paths * x0_dim samples.
    std::size_t x0_dim = 0;
    bool x0_deterministic = true;

    std::vector<double> v, w, z, y, u;
    std::vector<double> x0;

    const std::vector<double>& signal(Signal s) const;
    std::vector<double>& signal(Signal s);
    std::span<const double> path(Signal s, std::size_t p) const;
};

/// Per-path generator state derived from (seed, path index) only.
std::uint64_t path_seed(std::uint64_t seed, std::uint64_t path);

/// Forward recursion of the loop. Initial plant state X0 ~ N(0, x0_covariance),
/// controller state zero, shaping filters started from their stationary law.
/// `horizon` == 0 uses spec.horizon.
Trace simulate_paths(const LoopSpec& spec, std::size_t paths, std::uint64_t seed,
                     NoiseFamily v_family = NoiseFamily::gaussian, std::size_t horizon = 0);

namespace kernels {

void simulate_serial(const LoopSpec& spec, const ClosedLoop& loop, Trace& trace);
void simulate_omp(const LoopSpec& spec, const ClosedLoop& loop, Trace& trace);

}  // namespace kernels

/// Averaged modified periodogram with a periodic Hann window over every path,
/// after dropping trace.burn_in samples. Normalized so unit-variance white
/// noise averages to 1. Result lives on the grid w_k = -pi + 2 pi k / L.
Spectrum welch_psd(const Trace& trace, Signal signal, std::size_t segment_length,
                   double overlap_fraction = 0.5);

struct Estimate {
    double value = 0.0;
    double se = 0.0;  // delete-a-group jackknife standard error
};

/// Gaussian plug-in information estimates from the cross-path second moments
/// of (X0, V, W, Z, Y) over the first n_sub steps.
struct PluginEstimates {
    std::size_t n_sub = 0;
    std::size_t paths = 0;
    std::size_t groups = 0;
    Estimate lhs;            // I((X0,V^n);Y^n)
    Estimate lhs_increment;  // I_n - I_{n-1}
    Estimate directed;       // DI(Z^n -> Y^n)
    Estimate directed_increment;
};

/// Number of jackknife groups.
inline constexpr std::size_t kJackknifeGroups = 20;

/// Requires paths >= 50 * n_sub; throws InsufficientDataError when the
/// empirical covariance is too ill-conditioned.
PluginEstimates plugin_info_estimates(const Trace& trace, std::size_t n_sub);

/// Empirical second moments of the (X0, V, W, Z, Y) layout over the given
/// path range, unnormalized. Exposed for tests.
Matrix trace_moment_sum(const Trace& trace, std::size_t n_sub, std::size_t first_path,
                        std::size_t last_path);

/// Binary dump: 8-byte magic "ILTRACE1", then little-endian uint64 horizon,
/// paths, seed, x0_dim, burn_in, v_family; then float64 blocks v, w, z, y, u
/// (paths * horizon each, path-major) and x0 (paths * x0_dim).
void write_trace_binary(std::ostream& os, const Trace& trace);
Trace read_trace_binary(std::istream& is);

/// CSV `path,k,v,w,z,y,u` for the first `rows` samples of path 0.
void write_trace_csv_head(std::ostream& os, const Trace& trace, std::size_t rows = 32);

}  // namespace infolimit
