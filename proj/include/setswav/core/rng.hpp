#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace setswav {

// Deterministic, platform-independent RNG (splitmix64). All randomness in the
// project flows through this type; streams are derived from a global seed and
// a tag so that per-video / per-step work is reproducible regardless of
// evaluation order.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64();

    // Uniform double in [0, 1).
    double uniform();

    // Uniform double in [lo, hi).
    double uniform(double lo, double hi);

    // Uniform integer in [lo, hi] inclusive.
    int uniform_int(int lo, int hi);

    // Standard normal via Box-Muller (two uniform draws per call).
    double normal();

    // k distinct indices from [0, n), in random order. Requires k <= n.
    std::vector<int> sample_without_replacement(int n, int k);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
            int j = uniform_int(0, i);
            std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(j)]);
        }
    }

private:
    uint64_t state_;
};

// Stable seed derivation: FNV-1a over the tag folded into the base seed.
uint64_t derive_seed(uint64_t base, std::string_view tag);
uint64_t derive_seed(uint64_t base, uint64_t a, uint64_t b = 0, uint64_t c = 0);
inline uint64_t derive_seed(uint64_t base, std::string_view tag, uint64_t a, uint64_t b = 0,
                            uint64_t c = 0) {
    return derive_seed(derive_seed(base, tag), a, b, c);
}

// FNV-1a 64-bit over arbitrary bytes; also used for content hashes and
// checkpoint checksums.
uint64_t fnv1a(const void* data, size_t n, uint64_t seed = 0xcbf29ce484222325ull);

}  // namespace setswav
