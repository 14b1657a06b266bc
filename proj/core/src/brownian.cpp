#include "ncps/brownian.hpp"

#include <cmath>
#include <numbers>

namespace ncps {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) noexcept {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

/// Uniform on (0, 1) from the top 53 bits; never returns 0.
inline double to_open_unit(std::uint32_t hi, std::uint32_t lo) noexcept {
    const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

}  // namespace

Philox4x32::Counter Philox4x32::operator()(Counter ctr) const noexcept {
    Key key = key_;
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, ctr[0], hi0, lo0);
        mulhilo(kMul1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return ctr;
}

std::array<double, 2> uniform_pair(const Philox4x32& gen, std::uint64_t a, std::uint64_t b) noexcept {
    const auto out = gen({static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                          static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)});
    return {to_open_unit(out[0], out[1]), to_open_unit(out[2], out[3])};
}

std::array<double, 2> normal_pair(const Philox4x32& gen, std::uint64_t a, std::uint64_t b) noexcept {
    const auto [u1, u2] = uniform_pair(gen, a, b);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return {radius * std::cos(angle), radius * std::sin(angle)};
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept {
    // splitmix64 finaliser over a Weyl-spaced input
    std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

TimeGrid::TimeGrid(double horizon, int steps) : T(horizon), n(steps) {
    if (!(T > 0.0) || !std::isfinite(T)) throw ValidationError("must be finite and > 0", "T");
    if (n < 1) throw ValidationError("must be >= 1", "n");
}

bool is_power_of_two(long long n) noexcept { return n > 0 && (n & (n - 1)) == 0; }

BrownianPath generate_brownian(std::uint64_t seed, int d, double T, int n_max) {
    if (!is_power_of_two(n_max)) throw ValidationError("must be a power of 2", "n_max");
    return sample_brownian(seed, d, T, n_max);
}

BrownianPath sample_brownian(std::uint64_t seed, int d, double T, int n_max) {
    if (n_max < 1) throw ValidationError("must be >= 1", "n");
    if (d < 1) throw ValidationError("must be >= 1", "d");
    if (!(T > 0.0)) throw ValidationError("must be > 0", "T");

    BrownianPath path{seed, d, T, n_max, RowMatrix(n_max, d)};
    const Philox4x32 gen(seed);
    const double scale = std::sqrt(T / n_max);
    for (int k = 0; k < n_max; ++k) {
        for (int j = 0; j < d; j += 2) {
            const auto z = normal_pair(gen, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(j / 2));
            path.increments(k, j) = scale * z[0];
            if (j + 1 < d) path.increments(k, j + 1) = scale * z[1];
        }
    }
    return path;
}

BrownianPath coarsen(const BrownianPath& path, int factor) {
    if (!is_power_of_two(factor)) throw ValidationError("must be a power of 2", "factor");
    if (path.steps % factor != 0) throw ValidationError("must divide the number of steps", "factor");

    // Repeated pairwise halving keeps block sums independent of how a factor
    // is split: coarsen(coarsen(p, 2), 2) == coarsen(p, 4) bit for bit.
    BrownianPath out = path;
    for (int f = factor; f > 1; f /= 2) {
        const int steps = out.steps / 2;
        RowMatrix next(steps, out.d);
        for (int k = 0; k < steps; ++k) next.row(k) = out.increments.row(2 * k) + out.increments.row(2 * k + 1);
        out.increments = std::move(next);
        out.steps = steps;
    }
    return out;
}

}  // namespace ncps
