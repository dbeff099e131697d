#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lcsdive {

using Index = Eigen::Index;
using Rng = std::mt19937_64;
using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Malformed or inconsistent input data (bad CSV, duplicate ids, schema mismatch).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration or parameter value.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Failure while executing a pipeline phase (I/O, missing prior outputs).
class RuntimeFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// SplitMix64 finalizer; used to derive independent seed substreams.
constexpr std::uint64_t mix_seed(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0)
{
    return mix_seed(mix_seed(mix_seed(base) ^ a) ^ b);
}

/// Uniform double in [0, 1). Implemented locally so streams are identical across standard libraries.
inline double uniform01(Rng& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi)
{
    return lo + (hi - lo) * uniform01(rng);
}

/// Uniform integer in [lo, hi] (inclusive), via rejection-free multiply-shift on 64 bits.
inline std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi)
{
    const auto span = static_cast<unsigned __int128>(hi - lo + 1);
    return lo + static_cast<std::int64_t>((static_cast<unsigned __int128>(rng()) * span) >> 64);
}

/// Index sampled proportionally to non-negative weights; uniform when all weights vanish.
Index sample_weighted(Rng& rng, const std::vector<double>& weights);

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng)
{
    for (std::size_t i = v.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(i) - 1));
        std::swap(v[i - 1], v[j]);
    }
}

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Exceptions are rethrown on the caller.
void parallel_for(Index n, int workers, const std::function<void(Index)>& fn);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

std::vector<std::string> split_csv_line(std::string_view line);
std::string csv_escape(std::string_view field);

} // namespace lcsdive
