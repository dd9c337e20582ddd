#ifndef THGNN_COMMON_HPP
#define THGNN_COMMON_HPP

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace thgnn {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MissingFileError : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct InvariantViolation : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct ShapeError : Error { using Error::Error; };
struct NumericError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct ConvergenceError : Error { using Error::Error; };

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic stream RNG. Streams derived from a key tuple are independent
// of call-site ordering elsewhere in the program.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    static uint64_t key(std::initializer_list<uint64_t> parts) {
        uint64_t k = 0x2545f4914f6cdd1dULL;
        for (uint64_t p : parts) k = splitmix64(k ^ splitmix64(p));
        return k;
    }

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        uint64_t x = state_;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    // uniform in [0,1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // inclusive range
    int64_t uniform_int(int64_t lo, int64_t hi) {
        return lo + static_cast<int64_t>(next_u64() % static_cast<uint64_t>(hi - lo + 1));
    }

    double normal() {
        double u1 = uniform(), u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = next_u64() % i;
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t state_;
};

// Static block partition so that work assignment depends only on (n, threads).
template <typename F>
void parallel_for(int64_t n, int threads, F&& fn) {
    if (threads <= 1 || n <= 1) {
        for (int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    int t = static_cast<int>(std::min<int64_t>(threads, n));
    std::vector<std::thread> pool;
    pool.reserve(t);
    int64_t chunk = (n + t - 1) / t;
    for (int w = 0; w < t; ++w) {
        int64_t lo = w * chunk, hi = std::min<int64_t>(n, lo + chunk);
        pool.emplace_back([lo, hi, &fn] {
            for (int64_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace thgnn

#endif
