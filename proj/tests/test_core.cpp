#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "setswav/core/errors.hpp"
#include "setswav/core/image.hpp"
#include "setswav/core/rng.hpp"
#include "setswav/data/dataset.hpp"
#include "setswav/kernels/kernels.hpp"
#include "setswav/region/manifest.hpp"

namespace {

using namespace setswav;

std::filesystem::path fresh_dir(const char* tag) {
    static uint64_t counter = 0;
    auto p = std::filesystem::temp_directory_path() /
             ("setswav_core_" + std::string(tag) + "_" + std::to_string(::getpid()) + "_" +
              std::to_string(counter++));
    std::filesystem::create_directories(p);
    return p;
}

std::vector<float> random_vec(size_t n, Rng& rng) {
    std::vector<float> v(n);
    for (float& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
    return v;
}

}  // namespace

TEST_CASE("rng streams are deterministic and platform-independent") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());

    // First outputs of splitmix64 at seed 0 are fixed by the algorithm.
    Rng zero(0);
    CHECK(zero.next_u64() == 0xe220a8397b1dcdafull);
    CHECK(zero.next_u64() == 0x6e789e6aa1b965f4ull);
}

TEST_CASE("rng uniform and integer draws stay in range") {
    Rng rng(7);
    for (int i = 0; i < 2000; ++i) {
        double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        int k = rng.uniform_int(3, 9);
        CHECK(k >= 3);
        CHECK(k <= 9);
        double r = rng.uniform(-2.5, 4.0);
        CHECK(r >= -2.5);
        CHECK(r < 4.0);
        CHECK(std::isfinite(rng.normal()));
    }
}

TEST_CASE("sample_without_replacement returns distinct indices") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        auto idx = rng.sample_without_replacement(20, 12);
        REQUIRE(idx.size() == 12);
        std::set<int> seen(idx.begin(), idx.end());
        CHECK(seen.size() == 12);
        for (int i : idx) {
            CHECK(i >= 0);
            CHECK(i < 20);
        }
    }
}

TEST_CASE("derive_seed separates tags and arguments") {
    std::set<uint64_t> seen;
    seen.insert(derive_seed(1, "alpha"));
    seen.insert(derive_seed(1, "beta"));
    seen.insert(derive_seed(2, "alpha"));
    seen.insert(derive_seed(1, "alpha", 1));
    seen.insert(derive_seed(1, "alpha", 2));
    seen.insert(derive_seed(1, "alpha", 1, 1));
    CHECK(seen.size() == 6);
    CHECK(derive_seed(1, "alpha") == derive_seed(1, "alpha"));
    CHECK(derive_seed(1, "alpha", 3, 4, 5) == derive_seed(1, "alpha", 3, 4, 5));
}

TEST_CASE("fnv1a matches the published reference values") {
    CHECK(fnv1a("", 0) == 0xcbf29ce484222325ull);
    CHECK(fnv1a("a", 1) == 0xaf63dc4c8601ec8cull);
    CHECK(fnv1a("foobar", 6) == 0x85944171f73967e8ull);
}

TEST_CASE("quantize_u8 is idempotent and write/read ppm is bit-exact") {
    Rng rng(5);
    Image img(13, 9);
    for (float& v : img.data) v = static_cast<float>(rng.uniform());
    quantize_u8(img);
    Image again = img;
    quantize_u8(again);
    CHECK(again.data == img.data);

    auto dir = fresh_dir("ppm");
    const std::string path = (dir / "img.ppm").string();
    write_ppm(path, img);
    Image back = read_ppm(path);
    REQUIRE(back.h == img.h);
    REQUIRE(back.w == img.w);
    CHECK(back.data == img.data);
    std::filesystem::remove_all(dir);
}

TEST_CASE("same-size resize is an exact copy") {
    Rng rng(6);
    Image img(17, 11);
    for (float& v : img.data) v = static_cast<float>(rng.uniform());
    Image out = resize_bilinear(img, 17, 11);
    CHECK(out.data == img.data);
}

TEST_CASE("resize_bilinear of a constant image stays constant") {
    Image img(16, 16, 0.375f);
    Image out = resize_bilinear(img, 7, 23);
    for (float v : out.data) CHECK(v == doctest::Approx(0.375f).epsilon(1e-6));
}

TEST_CASE("rgb/hsv round trip") {
    Rng rng(8);
    for (int i = 0; i < 200; ++i) {
        float r = static_cast<float>(rng.uniform());
        float g = static_cast<float>(rng.uniform());
        float b = static_cast<float>(rng.uniform());
        float hh, ss, vv, r2, g2, b2;
        rgb_to_hsv(r, g, b, hh, ss, vv);
        hsv_to_rgb(hh, ss, vv, r2, g2, b2);
        CHECK(r2 == doctest::Approx(r).epsilon(1e-4));
        CHECK(g2 == doctest::Approx(g).epsilon(1e-4));
        CHECK(b2 == doctest::Approx(b).epsilon(1e-4));
    }
}

TEST_CASE("parallel gemm variants agree with the serial reference bit for bit") {
    Rng rng(17);
    const int M = 33, N = 29, K = 41;
    auto A = random_vec(static_cast<size_t>(M) * K, rng);
    auto B = random_vec(static_cast<size_t>(K) * N, rng);
    auto Bt = random_vec(static_cast<size_t>(N) * K, rng);
    auto At = random_vec(static_cast<size_t>(K) * M, rng);

    for (int threads : {1, 3}) {
        set_num_threads(threads);
        std::vector<float> c_par(static_cast<size_t>(M) * N, 0.5f);
        std::vector<float> c_ser(static_cast<size_t>(M) * N, 0.5f);
        kernels::gemm_nn(M, N, K, A.data(), B.data(), c_par.data(), true);
        kernels::serial::gemm_nn(M, N, K, A.data(), B.data(), c_ser.data(), true);
        CHECK(c_par == c_ser);

        kernels::gemm_nt(M, N, K, A.data(), Bt.data(), c_par.data());
        kernels::serial::gemm_nt(M, N, K, A.data(), Bt.data(), c_ser.data());
        CHECK(c_par == c_ser);

        kernels::gemm_tn(M, N, K, At.data(), B.data(), c_par.data());
        kernels::serial::gemm_tn(M, N, K, At.data(), B.data(), c_ser.data());
        CHECK(c_par == c_ser);
    }
    set_num_threads(1);
}

TEST_CASE("im2col and col2im are adjoint") {
    // <im2col(x), y> == <x, col2im(y)> pins the scatter against the gather.
    Rng rng(19);
    const int c = 3, h = 10, w = 8, stride = 2, pad = 1;
    const int oh = (h + 2 * pad - 3) / stride + 1;
    const int ow = (w + 2 * pad - 3) / stride + 1;
    auto x = random_vec(static_cast<size_t>(c) * h * w, rng);
    auto y = random_vec(static_cast<size_t>(c) * 9 * oh * ow, rng);

    std::vector<float> cols(y.size(), 0.f);
    kernels::im2col3x3(x.data(), c, h, w, stride, pad, cols.data(), oh, ow);
    std::vector<float> xg(x.size(), 0.f);
    kernels::col2im3x3(y.data(), c, h, w, stride, pad, xg.data(), oh, ow);

    double lhs = 0, rhs = 0;
    for (size_t i = 0; i < cols.size(); ++i) lhs += static_cast<double>(cols[i]) * y[i];
    for (size_t i = 0; i < x.size(); ++i) rhs += static_cast<double>(x[i]) * xg[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-5));
}

TEST_CASE("relu, gap, and bias kernels behave") {
    Rng rng(23);
    auto x = random_vec(64, rng);
    std::vector<float> y(64), dx(64);
    kernels::relu_fwd(x.data(), y.data(), 64);
    for (size_t i = 0; i < 64; ++i) CHECK(y[i] == (x[i] > 0 ? x[i] : 0.f));
    auto dy = random_vec(64, rng);
    kernels::relu_bwd(x.data(), dy.data(), dx.data(), 64);
    for (size_t i = 0; i < 64; ++i) CHECK(dx[i] == (x[i] > 0 ? dy[i] : 0.f));

    const int n = 2, c = 3, hw = 5;
    auto in = random_vec(static_cast<size_t>(n) * c * hw, rng);
    std::vector<float> pooled(static_cast<size_t>(n) * c);
    kernels::gap_fwd(in.data(), n, c, hw, pooled.data());
    for (int b = 0; b < n; ++b)
        for (int ch = 0; ch < c; ++ch) {
            double s = 0;
            for (int i = 0; i < hw; ++i) s += in[(static_cast<size_t>(b) * c + ch) * hw + i];
            CHECK(pooled[static_cast<size_t>(b) * c + ch] ==
                  doctest::Approx(s / hw).epsilon(1e-6));
        }
    std::vector<float> din(in.size());
    kernels::gap_bwd(pooled.data(), n, c, hw, din.data());
    for (int b = 0; b < n; ++b)
        for (int ch = 0; ch < c; ++ch)
            for (int i = 0; i < hw; ++i)
                CHECK(din[(static_cast<size_t>(b) * c + ch) * hw + i] ==
                      pooled[static_cast<size_t>(b) * c + ch] / hw);

    std::vector<float> logits(static_cast<size_t>(c) * hw, 0.f);
    std::vector<float> bias = {0.1f, -0.2f, 0.3f};
    kernels::add_bias(logits.data(), bias.data(), c, hw);
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < hw; ++i) CHECK(logits[static_cast<size_t>(ch) * hw + i] == bias[ch]);
    std::vector<float> db(c, 0.f);
    kernels::bias_grad(logits.data(), db.data(), c, hw);
    for (int ch = 0; ch < c; ++ch) CHECK(db[ch] == doctest::Approx(bias[ch] * hw));
}

TEST_CASE("kernel resize matches the serial reference bit for bit") {
    Rng rng(29);
    auto src = random_vec(3u * 24 * 20, rng);
    std::vector<float> a(3u * 11 * 13), b(3u * 11 * 13);
    set_num_threads(3);
    kernels::resize_bilinear(src.data(), 3, 24, 20, a.data(), 11, 13);
    kernels::serial::resize_bilinear(src.data(), 3, 24, 20, b.data(), 11, 13);
    set_num_threads(1);
    CHECK(a == b);
}

TEST_CASE("sgd_update applies momentum and weight decay") {
    std::vector<float> w = {1.0f, -2.0f};
    std::vector<float> m = {0.5f, 0.0f};
    std::vector<float> g = {0.1f, 0.2f};
    const float lr = 0.1f, mu = 0.9f, wd = 0.01f;
    std::vector<float> w2 = w, m2 = m;
    kernels::sgd_update(w2.data(), m2.data(), g.data(), 2, lr, mu, wd);
    for (int i = 0; i < 2; ++i) {
        float gi = g[i] + wd * w[i];
        float mi = mu * m[i] - lr * gi;
        CHECK(m2[i] == doctest::Approx(mi).epsilon(1e-6));
        CHECK(w2[i] == doctest::Approx(w[i] + mi).epsilon(1e-6));
    }
}

TEST_CASE("manifest format/parse round trip is stable") {
    std::vector<DetectionRecord> recs;
    Rng rng(31);
    for (int i = 0; i < 40; ++i) {
        DetectionRecord r;
        r.video_id = "vid_" + std::to_string(i % 5);
        r.frame_index = i % 7;
        r.x1 = rng.uniform(0, 50);
        r.y1 = rng.uniform(0, 50);
        r.x2 = r.x1 + rng.uniform(1, 30);
        r.y2 = r.y1 + rng.uniform(1, 30);
        r.confidence = rng.uniform();
        r.kind = DetKind::object;
        recs.push_back(r);
    }
    const std::string text = format_manifest(recs);
    const auto parsed = parse_manifest(text);
    REQUIRE(parsed.size() == recs.size());
    CHECK(format_manifest(parsed) == text);
}

TEST_CASE("manifest parse drops hand rows and rejects malformed input") {
    const std::string header = "video_id frame_index x1 y1 x2 y2 confidence kind\n";
    auto parsed = parse_manifest(header +
                                 "v0 0 1.00 1.00 5.00 5.00 0.900000 object\n"
                                 "v0 0 2.00 2.00 6.00 6.00 0.950000 hand\n");
    REQUIRE(parsed.size() == 1);
    CHECK(parsed[0].kind == DetKind::object);

    CHECK_THROWS_AS(parse_manifest("wrong header\n"), MalformedRow);
    CHECK_THROWS_AS(parse_manifest(header + "v0 0 1.00 1.00 5.00 5.00 0.9\n"), MalformedRow);
    CHECK_THROWS_AS(parse_manifest(header + "v0 0 1.00 1.00 5.00 5.00 0.9 robot\n"), MalformedRow);
    CHECK_THROWS_AS(parse_manifest(header + "v0 0 5.00 1.00 1.00 5.00 0.9 object\n"), MalformedRow);
    CHECK_THROWS_AS(parse_manifest(header + "v0 0 1.00 1.00 5.00 5.00 1.5 object\n"), MalformedRow);
    CHECK_THROWS_AS(parse_manifest(header + "v0 x 1.00 1.00 5.00 5.00 0.9 object\n"), MalformedRow);
    CHECK_THROWS_AS(parse_manifest(header), EmptyManifest);
    CHECK_THROWS_AS(parse_manifest(header + "v0 0 1.00 1.00 5.00 5.00 0.9 hand\n"), EmptyManifest);
}

TEST_CASE("select_regions applies a strict threshold and a per-frame cap") {
    auto mk = [](const char* vid, int f, double x1, double conf) {
        DetectionRecord r;
        r.video_id = vid;
        r.frame_index = f;
        r.x1 = x1;
        r.y1 = 0;
        r.x2 = x1 + 10;
        r.y2 = 10;
        r.confidence = conf;
        return r;
    };
    std::vector<DetectionRecord> recs = {
        mk("a", 0, 0, 0.90), mk("a", 0, 10, 0.50), mk("a", 0, 20, 0.70),
        mk("a", 0, 30, 0.01),                       // equal to threshold: dropped
        mk("a", 1, 0, 0.30), mk("b", 0, 0, 0.009),  // below threshold: dropped
    };
    auto out = select_regions(recs, 0.01, 2);
    REQUIRE(out.size() == 3);
    // Frame (a, 0) keeps its two most confident rows, by descending confidence.
    CHECK(out[0].confidence == 0.90);
    CHECK(out[1].confidence == 0.70);
    CHECK(out[2].video_id == "a");
    CHECK(out[2].frame_index == 1);

    // Confidence tie resolves by box coordinates.
    std::vector<DetectionRecord> tied = {mk("a", 0, 20, 0.5), mk("a", 0, 10, 0.5)};
    auto t = select_regions(tied, 0.0, 1);
    REQUIRE(t.size() == 1);
    CHECK(t[0].x1 == 10);

    CHECK_THROWS_AS(select_regions(recs, -0.1, 2), ConfigError);
    CHECK_THROWS_AS(select_regions(recs, 0.1, 0), ConfigError);
}

TEST_CASE("labels and header files round trip") {
    std::vector<data::VideoLabel> labels = {
        {"vid_0000", 1, 2, 0, "train"},
        {"vid_0001", 0, 3, 2, "val"},
    };
    const std::string text = data::format_labels(labels);
    auto parsed = data::parse_labels(text);
    REQUIRE(parsed.size() == 2);
    CHECK(data::format_labels(parsed) == text);
    CHECK(parsed[1].noun == 3);
    CHECK(parsed[1].split == "val");

    data::DatasetHeader h;
    h.n_verbs = 4;
    h.n_nouns = 5;
    h.tail_verbs = {3};
    h.tail_nouns = {2, 4};
    h.tail_actions = {{3, 2}, {3, 4}};
    h.unseen_participants = {2};
    h.extra_json = "{\"generator\":\"x\"}";
    const std::string htext = data::format_header(h);
    data::DatasetHeader hp = data::parse_header(htext);
    CHECK(hp.n_verbs == 4);
    CHECK(hp.tail_nouns == h.tail_nouns);
    CHECK(hp.tail_actions == h.tail_actions);
    CHECK(hp.unseen_participants == h.unseen_participants);
    CHECK(data::format_header(hp) == htext);

    data::check_labels(labels, h);
    std::vector<data::VideoLabel> bad = {{"v", 4, 0, 0, "train"}};
    CHECK_THROWS_AS(data::check_labels(bad, h), LabelOutOfRange);
    CHECK_THROWS_AS(
        data::parse_labels("video_id verb noun participant split\nv 0 0 0 test\n"),
        MalformedRow);

    std::string v2 = htext;
    v2.replace(v2.find("\"version\": 1"), 12, "\"version\": 2");
    CHECK_THROWS_AS(data::parse_header(v2), VersionMismatch);
}

TEST_CASE("filter_split and labels_by_id") {
    std::vector<data::VideoLabel> labels = {
        {"a", 0, 0, 0, "train"}, {"b", 1, 1, 0, "val"}, {"c", 0, 1, 1, "train"}};
    auto train = data::filter_split(labels, "train");
    REQUIRE(train.size() == 2);
    CHECK(train[0].video_id == "a");
    CHECK(train[1].video_id == "c");
    auto by_id = data::labels_by_id(labels);
    CHECK(by_id.at("b").verb == 1);
}
