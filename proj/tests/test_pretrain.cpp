#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "setswav/core/errors.hpp"
#include "setswav/core/rng.hpp"
#include "setswav/pretrain/augment.hpp"
#include "setswav/pretrain/checkpoint.hpp"
#include "setswav/pretrain/trainer.hpp"
#include "setswav/region/manifest.hpp"
#include "setswav/region/region.hpp"
#include "setswav/synth/synth.hpp"

namespace {

using namespace setswav;

std::string fresh_dir(const std::string& tag) {
    std::string dir = "tmp_pretrain_" + tag + "_" + std::to_string(::getpid());
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::string file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Image test_image(int h, int w, uint64_t seed) {
    Rng rng(seed);
    Image img(h, w);
    for (float& v : img.data) v = static_cast<float>(rng.uniform());
    return img;
}

synth::SynthSpec tiny_spec() {
    synth::SynthSpec s;
    s.n_videos = 8;
    s.n_clusters = 2;
    s.n_verbs = 2;
    s.n_nouns = 2;
    s.imbalance_ratio = 1.0;
    s.frames_per_video = 3;
    s.regions_per_frame = 2;
    s.patch_size = 16;
    s.noise_sigma = 0.02;
    s.seed = 5;
    s.n_participants = 3;
    s.n_unseen_participants = 1;
    s.val_fraction = 0.25;
    return s;
}

pretrain::PretrainConfig tiny_config() {
    pretrain::PretrainConfig c;
    c.objective = "swav_s";
    c.n_regions = 2;
    c.batch_sets = 4;
    c.epochs = 2;
    c.base_lr = 0.3;
    c.n_prototypes = 8;
    c.proj_hidden = 16;
    c.proj_dim = 8;
    c.width = 4;
    c.crop_size = 16;
    c.frames_per_clip = 2;
    c.max_regions_per_frame = 2;
    c.jitter_lo = 1.0;
    c.jitter_hi = 1.2;
    c.seed = 11;
    return c;
}

}  // namespace

TEST_CASE("augmentation recipes resolve by name") {
    CHECK(pretrain::AugmentRecipe::by_name("standard").enabled);
    CHECK(!pretrain::AugmentRecipe::by_name("identity").enabled);
    CHECK_THROWS_AS(pretrain::AugmentRecipe::by_name("mystery"), ConfigError);
}

TEST_CASE("identity recipe returns the crop untouched") {
    Image img = test_image(12, 12, 3);
    Rng rng(4);
    Image out = pretrain::augment(img, pretrain::AugmentRecipe::identity(), rng);
    CHECK(out.data == img.data);
}

TEST_CASE("standard augmentation is seed-deterministic") {
    Image img = test_image(16, 16, 5);
    auto recipe = pretrain::AugmentRecipe::standard();
    Rng a(9), b(9);
    Image ia = pretrain::augment(img, recipe, a);
    Image ib = pretrain::augment(img, recipe, b);
    CHECK(ia.data == ib.data);
    CHECK(ia.h == img.h);
    CHECK(ia.w == img.w);

    bool any_changed = false;
    for (uint64_t s = 1; s <= 5 && !any_changed; ++s) {
        Rng r(s);
        any_changed = pretrain::augment(img, recipe, r).data != img.data;
    }
    CHECK(any_changed);
}

TEST_CASE("horizontal flip mirrors and self-inverts") {
    Image img = test_image(6, 9, 7);
    Image flipped = img;
    pretrain::hflip(flipped);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x)
                CHECK(flipped.at(c, y, x) == img.at(c, y, img.w - 1 - x));
    pretrain::hflip(flipped);
    CHECK(flipped.data == img.data);
}

TEST_CASE("photometric ops honor their identity parameters") {
    Image img = test_image(8, 8, 11);

    Image b = img;
    pretrain::adjust_brightness(b, 0.5);
    CHECK(b.at(0, 2, 3) == doctest::Approx(img.at(0, 2, 3) * 0.5f).epsilon(1e-6));

    Image c = img;
    pretrain::adjust_contrast(c, 1.0);
    CHECK(c.data == img.data);

    // The gray blend subtracts in float32, so factor 1.0 is identity only to
    // rounding, not bitwise.
    Image s = img;
    pretrain::adjust_saturation(s, 1.0);
    for (size_t i = 0; i < img.data.size(); ++i)
        CHECK(s.data[i] == doctest::Approx(img.data[i]).epsilon(1e-6));

    Image s0 = img;
    pretrain::adjust_saturation(s0, 0.0);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            CHECK(s0.at(0, y, x) == s0.at(1, y, x));
            CHECK(s0.at(1, y, x) == s0.at(2, y, x));
        }

    Image h = img;
    pretrain::adjust_hue(h, 0.0);
    for (size_t i = 0; i < img.data.size(); ++i)
        CHECK(h.data[i] == doctest::Approx(img.data[i]).epsilon(1e-4));

    Image g = img;
    pretrain::to_grayscale(g);
    CHECK(g.at(0, 1, 1) == g.at(1, 1, 1));
    CHECK(g.at(1, 1, 1) == g.at(2, 1, 1));
}

TEST_CASE("gaussian blur preserves constant images and shape") {
    Image flat(10, 12, 0.42f);
    Image out = pretrain::gaussian_blur(flat, 1.3);
    CHECK(out.h == 10);
    CHECK(out.w == 12);
    for (float v : out.data) CHECK(v == doctest::Approx(0.42f).epsilon(1e-5));
}

TEST_CASE("degenerate resized crop parameters reduce to a copy") {
    Image img = test_image(14, 14, 13);
    Rng rng(2);
    Image out = pretrain::random_resized_crop(img, 1.0, 1.0, 1.0, 1.0, rng);
    CHECK(out.data == img.data);
}

TEST_CASE("pretrain config validation rejects bad settings") {
    auto ok = tiny_config();
    CHECK_NOTHROW(ok.validate());
    auto c = ok;
    c.objective = "simclr";
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = ok;
    c.n_regions = 1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = ok;
    c.crop_size = 8;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = ok;
    c.jitter_hi = 0.9;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = ok;
    c.recipe = "none";
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = ok;
    c.init = "warmstart";
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("build_batch is deterministic with unit-norm set-major rows") {
    synth::GeneratedDataset g = synth::generate(tiny_spec());
    synth::SynthFrameProvider prov(g);
    auto records = parse_manifest(format_manifest(g.manifest));
    RegionDataset ds = make_dataset(records, prov);

    auto cfg = tiny_config();
    pretrain::PretrainModel model;
    Rng init(derive_seed(cfg.seed, "init"));
    model.init_random(cfg, init);

    std::vector<std::string> ids(ds.video_ids.begin(), ds.video_ids.begin() + 4);
    ssl::SetBatch a = pretrain::build_batch(ds, ids, cfg, model, 0, 0, true);
    ssl::SetBatch b = pretrain::build_batch(ds, ids, cfg, model, 0, 0, true);
    CHECK(a.z.v == b.z.v);
    CHECK(a.n_sets == 4);
    CHECK(a.set_size == 2);
    REQUIRE(a.provenance.size() == 8);
    REQUIRE(a.z.rows == 8);
    for (int r = 0; r < a.z.rows; ++r) {
        double ss = 0.0;
        for (int j = 0; j < a.z.cols; ++j) ss += a.z.at(r, j) * a.z.at(r, j);
        CHECK(std::sqrt(ss) == doctest::Approx(1.0).epsilon(1e-4));
    }
    // Set-major order: rows 2i and 2i+1 belong to video i.
    for (size_t i = 0; i < ids.size(); ++i) {
        CHECK(a.provenance[2 * i].first == ids[i]);
        CHECK(a.provenance[2 * i + 1].first == ids[i]);
    }

    // A different step reseeds sampling and augmentation.
    ssl::SetBatch c = pretrain::build_batch(ds, ids, cfg, model, 0, 1, true);
    CHECK(a.z.v != c.z.v);

    // Evaluation mode drops augmentation and is equally deterministic.
    ssl::SetBatch e1 = pretrain::build_batch(ds, ids, cfg, model, 0, 0, false);
    ssl::SetBatch e2 = pretrain::build_batch(ds, ids, cfg, model, 7, 3, false);
    CHECK(e1.z.v == e2.z.v);  // eval sampling ignores epoch/step randomness
}

TEST_CASE("two-view objective duplicates one region per video") {
    synth::GeneratedDataset g = synth::generate(tiny_spec());
    synth::SynthFrameProvider prov(g);
    RegionDataset ds = make_dataset(parse_manifest(format_manifest(g.manifest)), prov);

    auto cfg = tiny_config();
    cfg.objective = "swav";
    cfg.n_regions = 5;  // ignored by the two-view objective
    pretrain::PretrainModel model;
    Rng init(derive_seed(cfg.seed, "init"));
    model.init_random(cfg, init);

    std::vector<std::string> ids(ds.video_ids.begin(), ds.video_ids.begin() + 4);
    ssl::SetBatch batch = pretrain::build_batch(ds, ids, cfg, model, 0, 0, true);
    CHECK(batch.set_size == 2);
    REQUIRE(batch.provenance.size() == 8);
    for (size_t i = 0; i < ids.size(); ++i)
        CHECK(batch.provenance[2 * i].second == batch.provenance[2 * i + 1].second);
}

TEST_CASE("training runs, logs, checkpoints, and repeats bit for bit") {
    synth::GeneratedDataset g = synth::generate(tiny_spec());
    synth::SynthFrameProvider prov(g);
    RegionDataset ds = make_dataset(parse_manifest(format_manifest(g.manifest)), prov);

    auto cfg = tiny_config();
    std::string dir = fresh_dir("train");
    pretrain::PretrainResult r1 =
        pretrain::train(ds, cfg, dir + "/ck1.bin", dir + "/log.jsonl");
    REQUIRE(r1.log.size() == 2);
    CHECK(std::isfinite(r1.first_epoch_loss));
    CHECK(std::isfinite(r1.final_loss));
    CHECK(r1.probe_losses.size() == 2);
    CHECK(std::filesystem::exists(dir + "/ck1.bin"));

    // One JSON metrics line per epoch.
    std::ifstream log(dir + "/log.jsonl");
    std::string line;
    int lines = 0;
    while (std::getline(log, line)) {
        auto j = nlohmann::json::parse(line);
        CHECK(j.at("epoch").get<int>() == ++lines);
        CHECK(std::isfinite(j.at("loss").get<double>()));
    }
    CHECK(lines == 2);

    pretrain::PretrainResult r2 = pretrain::train(ds, cfg, dir + "/ck2.bin");
    CHECK(r2.final_loss == r1.final_loss);
    CHECK(file_bytes(dir + "/ck1.bin") == file_bytes(dir + "/ck2.bin"));

    // Checkpoint metadata carries the config echo and derived dimensions.
    pretrain::Checkpoint ck = pretrain::load_checkpoint(dir + "/ck1.bin");
    auto meta = nlohmann::json::parse(ck.meta_json);
    CHECK(meta.at("kind") == "pretrain");
    CHECK(meta.at("epoch").get<int>() == 2);
    CHECK(meta.at("config_hash") == pretrain::content_hash(cfg.to_json()));
    CHECK(meta.at("feat_dim").get<int>() == 32);
    const pretrain::CheckpointArray* protos = ck.find("prototypes");
    REQUIRE(protos != nullptr);
    CHECK(protos->shape == std::vector<int>{8, 8});
    std::filesystem::remove_all(dir);
}

TEST_CASE("frozen prototypes stay at their initial values") {
    synth::GeneratedDataset g = synth::generate(tiny_spec());
    synth::SynthFrameProvider prov(g);
    RegionDataset ds = make_dataset(parse_manifest(format_manifest(g.manifest)), prov);

    auto cfg = tiny_config();
    cfg.epochs = 1;
    cfg.freeze_prototypes = true;
    cfg.freeze_prototype_epochs = 1;

    pretrain::PretrainModel ref;
    Rng init(derive_seed(cfg.seed, "init"));
    ref.init_random(cfg, init);

    std::string dir = fresh_dir("frozen");
    pretrain::train(ds, cfg, dir + "/ck.bin");
    pretrain::Checkpoint ck = pretrain::load_checkpoint(dir + "/ck.bin");
    const pretrain::CheckpointArray* protos = ck.find("prototypes");
    REQUIRE(protos != nullptr);
    CHECK(protos->data == ref.prototypes.w);

    // The encoder must have moved even while prototypes were pinned.
    std::vector<model::ParamTensor*> refp = ref.params();
    const pretrain::CheckpointArray* enc = ck.find(refp[0]->name);
    REQUIRE(enc != nullptr);
    CHECK(enc->data != refp[0]->w);
    std::filesystem::remove_all(dir);
}

TEST_CASE("external initialization restores pretrained weights") {
    synth::GeneratedDataset g = synth::generate(tiny_spec());
    synth::SynthFrameProvider prov(g);
    RegionDataset ds = make_dataset(parse_manifest(format_manifest(g.manifest)), prov);

    auto cfg = tiny_config();
    cfg.epochs = 1;
    std::string dir = fresh_dir("ext");
    pretrain::train(ds, cfg, dir + "/base.bin");

    auto warm = tiny_config();
    warm.epochs = 1;
    warm.init = "external:" + dir + "/base.bin";
    pretrain::PretrainResult r = pretrain::train(ds, warm, dir + "/warm.bin");
    CHECK(std::isfinite(r.final_loss));

    pretrain::PretrainModel m;
    Rng init(derive_seed(warm.seed, "init"));
    m.load_external(warm, dir + "/base.bin", init);
    pretrain::Checkpoint base = pretrain::load_checkpoint(dir + "/base.bin");
    CHECK(base.find("prototypes")->data == m.prototypes.w);
    std::filesystem::remove_all(dir);
}

TEST_CASE("training an empty dataset fails loudly") {
    RegionDataset empty;
    auto cfg = tiny_config();
    CHECK_THROWS_AS(pretrain::train(empty, cfg, "never_written.bin"), EmptyManifest);
}
