#include "macrotensor/rng.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace macrotensor {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t s = seed ^ (stream * 0xd1b54a32d192ed03ULL);
    splitmix64(s);
    return splitmix64(s);
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream) {
    // FNV-1a
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : stream) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return derive_seed(seed, h);
}

namespace {
inline std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
}  // namespace

Rng::Rng(std::uint64_t seed) {
    std::uint64_t st = seed;
    for (auto& w : s_) w = splitmix64(st);
}

std::uint64_t Rng::next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
    // Lemire's multiply-shift with rejection.
    std::uint64_t x = next_u64();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
        const std::uint64_t threshold = (0 - n) % n;
        while (low < threshold) {
            x = next_u64();
            m = static_cast<__uint128_t>(x) * n;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
}

std::vector<std::size_t> Rng::sample(std::size_t n, std::size_t k) {
    if (k > n) throw std::invalid_argument("Rng::sample: k exceeds n");
    std::vector<std::size_t> out;
    out.reserve(k);
    if (k * 4 >= n) {
        // Partial Fisher-Yates over the full index range.
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        for (std::size_t t = 0; t < k; ++t) {
            std::size_t r = t + static_cast<std::size_t>(below(n - t));
            std::swap(idx[t], idx[r]);
            out.push_back(idx[t]);
        }
        return out;
    }
    // Sparse Fisher-Yates: same stream semantics, O(k) memory.
    std::unordered_map<std::size_t, std::size_t> moved;
    auto get = [&](std::size_t p) {
        auto it = moved.find(p);
        return it == moved.end() ? p : it->second;
    };
    for (std::size_t t = 0; t < k; ++t) {
        std::size_t r = t + static_cast<std::size_t>(below(n - t));
        std::size_t vt = get(t);
        std::size_t vr = get(r);
        moved[r] = vt;
        moved[t] = vr;
        out.push_back(vr);
    }
    return out;
}

std::vector<std::size_t> Rng::permutation(std::size_t n) { return sample(n, n); }

}  // namespace macrotensor
