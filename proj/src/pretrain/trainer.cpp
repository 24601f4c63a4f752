#include "setswav/pretrain/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "setswav/core/errors.hpp"

namespace setswav::pretrain {

using nlohmann::json;

void PretrainConfig::validate() const {
    if (objective != "swav" && objective != "swav_s")
        throw ConfigError("objective must be swav or swav_s");
    if (n_regions < 2) throw ConfigError("n_regions must be >= 2");
    if (batch_sets < 1) throw ConfigError("batch_sets must be >= 1");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (!(base_lr > 0.0)) throw ConfigError("base_lr must be positive");
    if (!(tau > 0.0)) throw ConfigError("tau must be positive");
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
    if (sinkhorn_iters < 1) throw ConfigError("sinkhorn_iters must be >= 1");
    if (n_prototypes < 1) throw ConfigError("n_prototypes must be >= 1");
    if (proj_hidden < 1 || proj_dim < 1) throw ConfigError("projection dims must be >= 1");
    if (width < 1) throw ConfigError("width must be >= 1");
    if (crop_size < 16) throw ConfigError("crop_size must be >= 16");
    if (frames_per_clip < 1) throw ConfigError("frames_per_clip must be >= 1");
    if (conf_threshold < 0.0 || conf_threshold >= 1.0) throw ConfigError("conf_threshold must be in [0,1)");
    if (max_regions_per_frame < 1) throw ConfigError("max_regions_per_frame must be >= 1");
    if (jitter_lo < 1.0 || jitter_hi < jitter_lo) throw ConfigError("jitter range must satisfy 1 <= lo <= hi");
    if (recipe != "standard" && recipe != "identity") throw ConfigError("unknown recipe: " + recipe);
    if (init != "random" && init.rfind("external:", 0) != 0)
        throw ConfigError("init must be random or external:PATH");
    if (freeze_prototype_epochs < 0) throw ConfigError("freeze_prototype_epochs must be >= 0");
}

std::string PretrainConfig::to_json() const {
    json j;
    j["objective"] = objective;
    j["n_regions"] = n_regions;
    j["batch_sets"] = batch_sets;
    j["epochs"] = epochs;
    j["base_lr"] = base_lr;
    j["momentum"] = momentum;
    j["weight_decay"] = weight_decay;
    j["tau"] = tau;
    j["epsilon"] = epsilon;
    j["sinkhorn_iters"] = sinkhorn_iters;
    j["n_prototypes"] = n_prototypes;
    j["proj_hidden"] = proj_hidden;
    j["proj_dim"] = proj_dim;
    j["width"] = width;
    j["crop_size"] = crop_size;
    j["frames_per_clip"] = frames_per_clip;
    j["conf_threshold"] = conf_threshold;
    j["max_regions_per_frame"] = max_regions_per_frame;
    j["jitter_lo"] = jitter_lo;
    j["jitter_hi"] = jitter_hi;
    j["seed"] = seed;
    j["recipe"] = recipe;
    j["init"] = init;
    j["freeze_prototypes"] = freeze_prototypes;
    j["freeze_prototype_epochs"] = freeze_prototype_epochs;
    return j.dump();
}

void PretrainModel::init_random(const PretrainConfig& cfg, Rng& rng) {
    enc_cfg.width = cfg.width;
    enc_cfg.crop_size = cfg.crop_size;
    encoder.init(enc_cfg, rng);
    projection.init(enc_cfg.feat_dim(), cfg.proj_hidden, cfg.proj_dim, rng);
    prototypes.init("prototypes", {cfg.n_prototypes, cfg.proj_dim});
    for (float& w : prototypes.w) w = static_cast<float>(rng.normal());
    renormalize_prototypes();
}

void PretrainModel::load_external(const PretrainConfig& cfg, const std::string& path, Rng& rng) {
    init_random(cfg, rng);
    Checkpoint ck = load_checkpoint(path);
    for (model::ParamTensor* p : encoder.params()) ck.restore(*p);
    for (model::ParamTensor* p : projection.params()) ck.restore(*p);
    // Prototypes restart fresh unless the checkpoint carries a matching bank.
    if (const CheckpointArray* a = ck.find("prototypes"); a && a->shape == prototypes.shape)
        ck.restore(prototypes);
}

std::vector<model::ParamTensor*> PretrainModel::params() {
    std::vector<model::ParamTensor*> out = encoder.params();
    for (model::ParamTensor* p : projection.params()) out.push_back(p);
    out.push_back(&prototypes);
    return out;
}

ssl::PrototypeBank PretrainModel::bank() const {
    ssl::PrototypeBank b;
    b.c = ssl::MatD(prototypes.shape[0], prototypes.shape[1]);
    for (size_t i = 0; i < prototypes.w.size(); ++i) b.c.v[i] = prototypes.w[i];
    return b;
}

void PretrainModel::renormalize_prototypes() {
    const int k = prototypes.shape[0], d = prototypes.shape[1];
    for (int r = 0; r < k; ++r) {
        float* row = prototypes.w.data() + static_cast<size_t>(r) * d;
        double ss = 0.0;
        for (int j = 0; j < d; ++j) ss += static_cast<double>(row[j]) * row[j];
        const double norm = std::sqrt(ss);
        if (!(norm > 0.0)) throw ZeroVector("prototype row collapsed during training");
        for (int j = 0; j < d; ++j) row[j] = static_cast<float>(row[j] / norm);
    }
}

namespace {

// Forward a batch of crops through encoder + projection; rows of the result
// are unit-norm float32 embeddings promoted to double.
ssl::MatD encode_crops(PretrainModel& model, const std::vector<RegionCrop>& crops, bool train_mode) {
    const int cs = model.enc_cfg.crop_size;
    const int n = static_cast<int>(crops.size());
    std::vector<float> images;
    images.reserve(static_cast<size_t>(n) * 3 * cs * cs);
    for (const RegionCrop& c : crops) {
        if (c.crop.h != cs || c.crop.w != cs) throw DimensionMismatch("crop size does not match encoder");
        images.insert(images.end(), c.crop.data.begin(), c.crop.data.end());
    }
    std::vector<float> feats = model.encoder.forward(images, n, train_mode);
    std::vector<float> z = model.projection.forward(feats, n, train_mode);
    ssl::MatD out(n, model.projection.out);
    for (size_t i = 0; i < z.size(); ++i) out.v[i] = z[i];
    return out;
}

}  // namespace

ssl::SetBatch build_batch(const RegionDataset& dataset, const std::vector<std::string>& video_ids,
                          const PretrainConfig& config, PretrainModel& model, int epoch, int step,
                          bool train_mode) {
    const bool swav = config.objective == "swav";
    const int n = swav ? 2 : config.n_regions;
    std::vector<RegionCrop> crops;
    ssl::SetBatch batch;
    batch.n_sets = static_cast<int>(video_ids.size());
    batch.set_size = n;
    const AugmentRecipe recipe =
        train_mode ? AugmentRecipe::by_name(config.recipe) : AugmentRecipe::identity();
    const double jlo = train_mode ? config.jitter_lo : 1.0;
    const double jhi = train_mode ? config.jitter_hi : 1.0;

    for (size_t i = 0; i < video_ids.size(); ++i) {
        const std::string& vid = video_ids[i];
        auto it = dataset.records_by_video.find(vid);
        if (it == dataset.records_by_video.end()) throw UnknownVideo("no detections for video " + vid);
        Rng rng(derive_seed(config.seed, "batch", static_cast<uint64_t>(epoch),
                            static_cast<uint64_t>(step), static_cast<uint64_t>(i)));
        VideoPool pool = build_pool(vid, it->second, dataset.frames->frame_count(vid),
                                    config.frames_per_clip, train_mode, config.conf_threshold,
                                    config.max_regions_per_frame, rng);
        std::vector<RegionRef> refs;
        if (swav) {
            // One region, two independently transformed views.
            std::vector<RegionRef> one = sample_regions(
                pool, 1, train_mode ? SampleMode::train_uniform : SampleMode::test_topk, rng);
            refs = {one[0], one[0]};
        } else {
            refs = sample_regions(pool, n,
                                  train_mode ? SampleMode::train_uniform : SampleMode::test_topk, rng);
        }
        std::vector<RegionCrop> vid_crops =
            materialize(vid, refs, *dataset.frames, jlo, jhi, config.crop_size, rng);
        for (RegionCrop& c : vid_crops) {
            c.crop = augment(c.crop, recipe, rng);
            batch.provenance.emplace_back(vid, c.frame_index);
            crops.push_back(std::move(c));
        }
    }
    batch.z = encode_crops(model, crops, train_mode);
    // Rows arrive unit-norm from the projection head (float32 accuracy).
    return batch;
}

PretrainResult train(const RegionDataset& dataset, const PretrainConfig& config,
                     const std::string& checkpoint_path, const std::string& log_path) {
    config.validate();
    if (dataset.video_ids.empty()) throw EmptyManifest("pre-training needs at least one video");

    PretrainModel model;
    Rng init_rng(derive_seed(config.seed, "init"));
    if (config.init == "random") {
        model.init_random(config, init_rng);
    } else {
        model.load_external(config, config.init.substr(9), init_rng);
    }

    const int n_videos = static_cast<int>(dataset.video_ids.size());
    const int sets = std::min(config.batch_sets, n_videos);
    const int steps_per_epoch = std::max(1, n_videos / sets);
    const int set_size = config.objective == "swav" ? 2 : config.n_regions;
    const long total_steps = static_cast<long>(steps_per_epoch) * config.epochs;
    const double scaled_lr = config.base_lr * (static_cast<double>(sets) * set_size) / 256.0;
    const model::SgdConfig sgd{config.momentum, config.weight_decay};

    // Frozen probe batch: deterministic crops from the first videos, used
    // only to monitor representation loss across epochs.
    std::vector<std::string> probe_ids(dataset.video_ids.begin(), dataset.video_ids.begin() + sets);

    std::ofstream log;
    if (!log_path.empty()) {
        log.open(log_path);
        if (!log) throw DataError("cannot write metrics log: " + log_path);
    }

    PretrainResult result;
    long global_step = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<std::string> order = dataset.video_ids;
        Rng order_rng(derive_seed(config.seed, "order", static_cast<uint64_t>(epoch)));
        order_rng.shuffle(order);

        double epoch_loss = 0.0;
        double lr = 0.0;
        for (int step = 0; step < steps_per_epoch; ++step) {
            std::vector<std::string> batch_ids(order.begin() + static_cast<size_t>(step) * sets,
                                               order.begin() + static_cast<size_t>(step + 1) * sets);
            ssl::SetBatch batch = build_batch(dataset, batch_ids, config, model, epoch, step, true);
            ssl::PrototypeBank bank = model.bank();
            ssl::MatD scores = ssl::compute_scores(batch.z, bank);
            ssl::CodeMatrix codes = ssl::sinkhorn_codes(scores, config.epsilon, config.sinkhorn_iters);
            ssl::SetLossGrad grad = ssl::swav_s_grad(batch, bank, config.tau, codes);
            if (!std::isfinite(grad.loss))
                throw DivergenceDetected("training loss is not finite at epoch " +
                                         std::to_string(epoch + 1));
            epoch_loss += grad.loss;

            for (model::ParamTensor* p : model.params()) p->zero_grad();
            std::vector<float> dz(grad.d_z.v.size());
            for (size_t i = 0; i < dz.size(); ++i) dz[i] = static_cast<float>(grad.d_z.v[i]);
            std::vector<float> dfeat = model.projection.backward(dz);
            model.encoder.backward(dfeat);
            const bool frozen = config.freeze_prototypes && epoch < config.freeze_prototype_epochs;
            if (!frozen)
                for (size_t i = 0; i < model.prototypes.g.size(); ++i)
                    model.prototypes.g[i] = static_cast<float>(grad.d_c.v[i]);

            lr = model::cosine_lr(scaled_lr, global_step, total_steps);
            // Frozen prototypes leave the optimizer entirely; otherwise weight
            // decay would still move them.
            std::vector<model::ParamTensor*> params = model.params();
            if (frozen) params.pop_back();
            model::sgd_step(params, lr, sgd);
            if (!frozen) model.renormalize_prototypes();
            ++global_step;
        }
        epoch_loss /= steps_per_epoch;
        if (!std::isfinite(epoch_loss))
            throw DivergenceDetected("epoch loss is not finite at epoch " + std::to_string(epoch + 1));

        // Frozen-batch probe loss (no augmentation, no gradients).
        {
            ssl::SetBatch probe = build_batch(dataset, probe_ids, config, model, 0, 0, false);
            ssl::PrototypeBank bank = model.bank();
            ssl::MatD scores = ssl::compute_scores(probe.z, bank);
            ssl::CodeMatrix codes = ssl::sinkhorn_codes(scores, config.epsilon, config.sinkhorn_iters);
            result.probe_losses.push_back(ssl::swav_s_loss(probe, bank, config.tau, codes));
        }

        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.log.push_back({epoch + 1, epoch_loss, lr, wall});
        if (epoch == 0) result.first_epoch_loss = epoch_loss;
        result.final_loss = epoch_loss;
        if (log) {
            json line;
            line["epoch"] = epoch + 1;
            line["loss"] = epoch_loss;
            line["lr"] = lr;
            line["wall_time"] = wall;
            log << line.dump() << "\n";
        }
    }

    // Smoothed monotone check on the probe series (window 10).
    const auto& pl = result.probe_losses;
    std::vector<double> smooth(pl.size());
    for (size_t i = 0; i < pl.size(); ++i) {
        const size_t lo = i >= 9 ? i - 9 : 0;
        double s = 0.0;
        for (size_t j = lo; j <= i; ++j) s += pl[j];
        smooth[i] = s / (i - lo + 1);
    }
    for (size_t i = 1; i < smooth.size(); ++i)
        if (smooth[i] > smooth[i - 1] + 1e-6) result.probe_warning = true;

    // Checkpoint: weights, prototypes, config echo, resume cursor. No
    // wall-clock fields, so identical runs write identical bytes.
    Checkpoint ck;
    for (model::ParamTensor* p : model.params()) ck.add(*p);
    json meta;
    meta["version"] = 1;
    meta["kind"] = "pretrain";
    meta["config"] = json::parse(config.to_json());
    meta["config_hash"] = content_hash(config.to_json());
    meta["seed"] = config.seed;
    meta["epoch"] = config.epochs;
    meta["rng_state"] = derive_seed(config.seed, "resume", static_cast<uint64_t>(config.epochs));
    meta["feat_dim"] = model.enc_cfg.feat_dim();
    ck.meta_json = meta.dump();
    save_checkpoint(checkpoint_path, ck);
    result.checkpoint_path = checkpoint_path;
    return result;
}

}  // namespace setswav::pretrain
