#ifndef COGARCH_COMMON_HPP
#define COGARCH_COMMON_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cogarch {

inline constexpr const char* kVersion = "0.1.0";

/// Thrown when a requested moment, table entry or matrix does not exist
/// for the given model/parameter combination.
class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

/// Thrown on malformed configuration input.
class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline long double binom(int n, int k) {
    if (k < 0 || k > n) return 0.0L;
    long double r = 1.0L;
    for (int i = 1; i <= k; ++i) r = r * static_cast<long double>(n - k + i) / i;
    return r;
}

inline long double factorial(int n) {
    long double r = 1.0L;
    for (int i = 2; i <= n; ++i) r *= i;
    return r;
}

// (n-1)!! for even n, i.e. moments of a standard normal: E N^n = (n-1)!!
inline long double double_factorial(int n) {
    long double r = 1.0L;
    for (int i = n; i > 1; i -= 2) r *= i;
    return r;
}

// SplitMix64, used to derive independent RNG substreams from (seed, index).
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace detail
} // namespace cogarch

#endif
