#include "setswav/core/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace setswav {

uint64_t Rng::next_u64() {
    // splitmix64
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

int Rng::uniform_int(int lo, int hi) {
    if (hi < lo) throw std::invalid_argument("uniform_int: empty range");
    uint64_t span = static_cast<uint64_t>(hi) - static_cast<uint64_t>(lo) + 1;
    return lo + static_cast<int>(next_u64() % span);
}

double Rng::normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

std::vector<int> Rng::sample_without_replacement(int n, int k) {
    if (k > n) throw std::invalid_argument("sample_without_replacement: k > n");
    std::vector<int> idx(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
    // partial Fisher-Yates: the first k slots end up uniformly sampled
    for (int i = 0; i < k; ++i) {
        int j = uniform_int(i, n - 1);
        std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
    }
    idx.resize(static_cast<size_t>(k));
    return idx;
}

uint64_t fnv1a(const void* data, size_t n, uint64_t seed) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    uint64_t h = seed;
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

uint64_t derive_seed(uint64_t base, std::string_view tag) {
    uint64_t h = fnv1a(tag.data(), tag.size());
    // run the combined value through one splitmix step to decorrelate
    Rng r(base ^ (h + 0x9e3779b97f4a7c15ull));
    return r.next_u64();
}

uint64_t derive_seed(uint64_t base, uint64_t a, uint64_t b, uint64_t c) {
    uint64_t words[3] = {a, b, c};
    uint64_t h = fnv1a(words, sizeof(words));
    Rng r(base ^ (h + 0x9e3779b97f4a7c15ull));
    return r.next_u64();
}

}  // namespace setswav
