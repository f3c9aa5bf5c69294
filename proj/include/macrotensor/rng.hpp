#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace macrotensor {

/// splitmix64 finaliser; used for seeding and deriving sub-stream seeds.
std::uint64_t splitmix64(std::uint64_t& state);

/// Deterministic seed for a named sub-stream of `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream);

/// xoshiro256** with splitmix64 seeding. All variates are produced by code in
/// this class rather than <random> distributions, so streams are identical
/// across standard libraries.
class Rng {
public:
    static constexpr std::string_view kName = "xoshiro256**/splitmix64 v1";

    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();
    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    /// Uniform integer on [0, n); n > 0.
    std::uint64_t below(std::uint64_t n);
    /// Standard normal (Marsaglia polar method).
    double normal();
    double normal(double mean, double sd) { return mean + sd * normal(); }

    /// `k` distinct indices drawn from [0, n) without replacement, in draw order.
    std::vector<std::size_t> sample(std::size_t n, std::size_t k);
    /// Random permutation of [0, n).
    std::vector<std::size_t> permutation(std::size_t n);

private:
    std::uint64_t s_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace macrotensor
