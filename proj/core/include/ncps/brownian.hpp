#pragma once

#include "ncps/types.hpp"

#include <array>
#include <cstdint>

namespace ncps {

/// Philox4x32-10 counter-based generator. Output depends only on (key, counter),
/// so any increment of any path can be regenerated independently.
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    explicit Philox4x32(std::uint64_t seed) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

    Counter operator()(Counter ctr) const noexcept;

private:
    Key key_;
};

/// Two independent N(0,1) draws keyed by (seed, a, b).
std::array<double, 2> normal_pair(const Philox4x32& gen, std::uint64_t a, std::uint64_t b) noexcept;

/// Two independent uniforms on (0, 1) keyed by (seed, a, b).
std::array<double, 2> uniform_pair(const Philox4x32& gen, std::uint64_t a, std::uint64_t b) noexcept;

/// Stream seed for replication `index` of an experiment seeded with `base`.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept;

/// Uniform time grid t_k = k*T/n, k = 0..n.
struct TimeGrid {
    double T = 1.0;
    int n = 1;

    TimeGrid(double horizon, int steps);

    double h() const noexcept { return T / n; }
    /// Computed as k*T/n, so t(n) == T exactly.
    double t(int k) const noexcept { return k * T / n; }
};

/// Brownian increments on a dyadic grid. Row k holds W(t_{k+1}) - W(t_k).
struct BrownianPath {
    std::uint64_t seed = 0;
    int d = 0;
    double T = 1.0;
    int steps = 0;
    RowMatrix increments;

    Vector terminal() const { return increments.colwise().sum().transpose(); }
};

bool is_power_of_two(long long n) noexcept;

/// Increment (k, j) is drawn from the Philox stream keyed by seed at counter
/// (k, j/2); bit-for-bit reproducible. Throws ValidationError unless n_max is
/// a power of two.
BrownianPath generate_brownian(std::uint64_t seed, int d, double T, int n_max);

/// Same stream as generate_brownian for any step count n >= 1. Only dyadic
/// paths can be coarsened.
BrownianPath sample_brownian(std::uint64_t seed, int d, double T, int n);

/// Block sums of `factor` consecutive increments. Throws ValidationError unless
/// factor is a power of two dividing the number of steps.
BrownianPath coarsen(const BrownianPath& path, int factor);

}  // namespace ncps
