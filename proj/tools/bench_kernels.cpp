#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "setswav/core/rng.hpp"
#include "setswav/kernels/kernels.hpp"

// Times each parallel kernel against its serial reference on model-sized
// shapes and checks the outputs agree bitwise (the kernels promise
// thread-count-independent results).

namespace {

using namespace setswav;

double time_of(const std::function<void()>& fn, int reps) {
    fn();  // warm up
    const auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r) fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(t1 - t0).count() / reps;
}

bool same_bits(const std::vector<float>& a, const std::vector<float>& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) return false;
    return true;
}

void fill(std::vector<float>& v, Rng& rng) {
    for (float& x : v) x = static_cast<float>(rng.normal());
}

void report(const char* name, const std::string& shape, double serial_s, double parallel_s,
            bool match) {
    std::printf("%-16s %-22s %9.3f ms %9.3f ms %6.2fx  %s\n", name, shape.c_str(),
                serial_s * 1e3, parallel_s * 1e3, serial_s / parallel_s,
                match ? "bitwise-equal" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
    int threads = 0;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--threads" && i + 1 < argc) threads = std::atoi(argv[++i]);
    }
    if (threads > 0) set_num_threads(threads);
    std::printf("threads: %d\n", num_threads());
    std::printf("%-16s %-22s %12s %12s %8s\n", "kernel", "shape", "serial", "parallel",
                "speedup");

    Rng rng(7);
    const int reps = 5;

    {
        // Conv-shaped matmul: 256 filters over a 28x28 plane, batch of crops.
        const int M = 256, N = 28 * 28 * 8, K = 256 * 9;
        std::vector<float> a(static_cast<size_t>(M) * K), b(static_cast<size_t>(K) * N);
        std::vector<float> c1(static_cast<size_t>(M) * N), c2(c1.size());
        fill(a, rng);
        fill(b, rng);
        const double ts = time_of([&] { kernels::serial::gemm_nn(M, N, K, a.data(), b.data(), c1.data()); }, reps);
        const double tp = time_of([&] { kernels::gemm_nn(M, N, K, a.data(), b.data(), c2.data()); }, reps);
        report("gemm_nn", "256x2304 * 2304x6272", ts, tp, same_bits(c1, c2));
    }
    {
        const int M = 512, N = 512, K = 2048;
        std::vector<float> a(static_cast<size_t>(M) * K), b(static_cast<size_t>(N) * K);
        std::vector<float> c1(static_cast<size_t>(M) * N), c2(c1.size());
        fill(a, rng);
        fill(b, rng);
        const double ts = time_of([&] { kernels::serial::gemm_nt(M, N, K, a.data(), b.data(), c1.data()); }, reps);
        const double tp = time_of([&] { kernels::gemm_nt(M, N, K, a.data(), b.data(), c2.data()); }, reps);
        report("gemm_nt", "512x2048 * (512x2048)T", ts, tp, same_bits(c1, c2));
    }
    {
        const int M = 512, N = 512, K = 2048;
        std::vector<float> a(static_cast<size_t>(K) * M), b(static_cast<size_t>(K) * N);
        std::vector<float> c1(static_cast<size_t>(M) * N), c2(c1.size());
        fill(a, rng);
        fill(b, rng);
        const double ts = time_of([&] { kernels::serial::gemm_tn(M, N, K, a.data(), b.data(), c1.data()); }, reps);
        const double tp = time_of([&] { kernels::gemm_tn(M, N, K, a.data(), b.data(), c2.data()); }, reps);
        report("gemm_tn", "(2048x512)T * 2048x512", ts, tp, same_bits(c1, c2));
    }
    {
        // Crop resize at dataloader scale: 96 region crops per step.
        const int sh = 160, sw = 160, dh = 112, dw = 112, n = 96;
        std::vector<float> src(3u * sh * sw);
        std::vector<float> d1(3u * dh * dw), d2(d1.size());
        fill(src, rng);
        const double ts = time_of(
            [&] {
                for (int i = 0; i < n; ++i)
                    kernels::serial::resize_bilinear(src.data(), 3, sh, sw, d1.data(), dh, dw);
            },
            reps);
        const double tp = time_of(
            [&] {
                for (int i = 0; i < n; ++i)
                    kernels::resize_bilinear(src.data(), 3, sh, sw, d2.data(), dh, dw);
            },
            reps);
        report("resize_bilinear", "96x 160^2 -> 112^2", ts, tp, same_bits(d1, d2));
    }
    {
        const int n = 96, c = 256, hw = 7 * 7;
        std::vector<float> in(static_cast<size_t>(n) * c * hw);
        std::vector<float> o1(static_cast<size_t>(n) * c), o2(o1.size());
        fill(in, rng);
        const double ts = time_of([&] { kernels::serial::gap_fwd(in.data(), n, c, hw, o1.data()); }, reps);
        const double tp = time_of([&] { kernels::gap_fwd(in.data(), n, c, hw, o2.data()); }, reps);
        report("gap_fwd", "96x256x49", ts, tp, same_bits(o1, o2));
    }
    return 0;
}
