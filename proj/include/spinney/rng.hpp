#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <thread>
#include <vector>

#include "spinney/errors.hpp"

namespace spinney {

// splitmix64 finalizer, used only to derive seeds.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Every random draw in the library flows through this wrapper. The raw stream
// is mt19937_64 (fully specified by the standard); all distributions are built
// on top by explicit inversion/rejection, so equal seeds give bit-identical
// samples on every platform. Replica r of a run seeded with s draws from
// Rng::fork(s, r).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    static Rng fork(std::uint64_t seed, std::uint64_t replica) {
        return Rng(mix64(seed ^ mix64(replica)));
    }

    std::uint64_t u64() { return eng_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    // Uniform over {0, .., n-1}, bias-free by rejection (n >= 1).
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t cut = (-n) % n; // 2^64 mod n
        std::uint64_t x;
        do {
            x = eng_();
        } while (x < cut);
        return x % n;
    }

    // Knuth product method, chunked so exp(-chunk) never underflows.
    std::int64_t poisson(double lambda) {
        std::int64_t total = 0;
        while (lambda > 0.0) {
            const double chunk = lambda > 30.0 ? 30.0 : lambda;
            const double limit = std::exp(-chunk);
            double prod = 1.0;
            std::int64_t k = -1;
            do {
                ++k;
                prod *= uniform();
            } while (prod > limit);
            total += k;
            lambda -= chunk;
        }
        return total;
    }

private:
    std::mt19937_64 eng_;
};

// Sampling from a fixed finite distribution by binary search on the cdf.
// Weights need not be normalized; total() reports their sum.
class CdfSampler {
public:
    CdfSampler() = default;

    explicit CdfSampler(const std::vector<double>& weights) {
        cdf_.reserve(weights.size());
        double acc = 0.0;
        for (double w : weights) {
            if (w < 0.0) throw RowSumViolation("negative weight in distribution");
            acc += w;
            cdf_.push_back(acc);
        }
        total_ = acc;
    }

    bool empty() const { return cdf_.empty() || total_ <= 0.0; }
    double total() const { return total_; }

    // Index distributed proportionally to the weights.
    std::size_t sample(Rng& rng) const {
        const double u = rng.uniform() * total_;
        std::size_t lo = 0, hi = cdf_.size() - 1;
        while (lo < hi) {
            const std::size_t mid = (lo + hi) / 2;
            if (cdf_[mid] > u) hi = mid; else lo = mid + 1;
        }
        return lo;
    }

    // As above but the caller supplies a uniform draw scaled to [0, scale);
    // returns size() when the draw falls past the total (sub-distribution).
    std::size_t sample_or_die(Rng& rng, double scale) const {
        const double u = rng.uniform() * scale;
        if (u >= total_) return cdf_.size();
        std::size_t lo = 0, hi = cdf_.size() - 1;
        while (lo < hi) {
            const std::size_t mid = (lo + hi) / 2;
            if (cdf_[mid] > u) hi = mid; else lo = mid + 1;
        }
        return lo;
    }

private:
    std::vector<double> cdf_;
    double total_ = 0.0;
};

// Runs body(chunk_begin, chunk_end) over [0, n) split into fixed-size chunks
// and returns the per-chunk results in chunk order. Chunk boundaries do not
// depend on the worker count, and callers fork per-replica rngs inside the
// body, so any statistic assembled by folding the returned vector in order is
// exactly identical for every worker count.
template <typename R, typename Body>
std::vector<R> run_chunked(std::int64_t n, int workers, const Body& body,
                           std::int64_t chunk_size = 8192) {
    if (n < 0) throw DimensionMismatch("negative replica count");
    const std::int64_t nchunks = (n + chunk_size - 1) / chunk_size;
    std::vector<R> results(static_cast<std::size_t>(nchunks));
    if (nchunks == 0) return results;
    if (workers < 1) workers = 1;
    if (workers == 1 || nchunks == 1) {
        for (std::int64_t c = 0; c < nchunks; ++c) {
            const std::int64_t b = c * chunk_size;
            const std::int64_t e = std::min(n, b + chunk_size);
            results[static_cast<std::size_t>(c)] = body(b, e);
        }
        return results;
    }
    std::atomic<std::int64_t> next{0};
    auto work = [&] {
        for (;;) {
            const std::int64_t c = next.fetch_add(1);
            if (c >= nchunks) return;
            const std::int64_t b = c * chunk_size;
            const std::int64_t e = std::min(n, b + chunk_size);
            results[static_cast<std::size_t>(c)] = body(b, e);
        }
    };
    std::vector<std::thread> pool;
    const int nthreads = static_cast<int>(std::min<std::int64_t>(workers, nchunks));
    pool.reserve(static_cast<std::size_t>(nthreads));
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
    return results;
}

} // namespace spinney
