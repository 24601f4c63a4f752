#include "setswav/finetune/finetune.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "setswav/core/errors.hpp"
#include "setswav/pretrain/checkpoint.hpp"

namespace setswav::finetune {

using nlohmann::json;

ClassPrior ClassPrior::from_counts(const std::string& space, const std::vector<int>& counts) {
    if (counts.empty()) throw PriorMismatch("no classes in space " + space);
    ClassPrior p;
    p.space = space;
    p.pi.resize(counts.size());
    double total = 0.0;
    for (size_t k = 0; k < counts.size(); ++k) {
        if (counts[k] < 0) throw PriorMismatch("negative count in space " + space);
        p.pi[k] = counts[k] == 0 ? 1.0 : static_cast<double>(counts[k]);
        total += p.pi[k];
    }
    for (double& v : p.pi) v /= total;
    return p;
}

ClassPrior ClassPrior::uniform(const std::string& space, int n_classes) {
    if (n_classes < 1) throw PriorMismatch("no classes in space " + space);
    ClassPrior p;
    p.space = space;
    p.pi.assign(static_cast<size_t>(n_classes), 1.0 / n_classes);
    return p;
}

ClassPrior prior_from_labels(const std::string& space, const std::vector<data::VideoLabel>& labels,
                             int n_classes) {
    std::vector<int> counts(static_cast<size_t>(n_classes), 0);
    for (const data::VideoLabel& l : labels) {
        const int y = space == "verb" ? l.verb : l.noun;
        if (y < 0 || y >= n_classes) throw LabelOutOfRange(space + " label " + std::to_string(y));
        ++counts[static_cast<size_t>(y)];
    }
    return ClassPrior::from_counts(space, counts);
}

namespace {

double lse_and_softmax(const std::vector<double>& logits, std::vector<double>* softmax) {
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - mx);
    if (softmax) {
        softmax->resize(logits.size());
        for (size_t k = 0; k < logits.size(); ++k) (*softmax)[k] = std::exp(logits[k] - mx) / sum;
    }
    return mx + std::log(sum);
}

void check_label(const std::vector<double>& logits, int label) {
    if (logits.empty()) throw DimensionMismatch("empty logit vector");
    if (label < 0 || label >= static_cast<int>(logits.size()))
        throw LabelOutOfRange("label " + std::to_string(label) + " for " +
                              std::to_string(logits.size()) + " classes");
}

std::vector<double> shift_by_prior(const std::vector<double>& logits, const ClassPrior& prior,
                                   double tau_la) {
    if (prior.pi.size() != logits.size())
        throw PriorMismatch(prior.space + " prior has " + std::to_string(prior.pi.size()) +
                            " classes, logits have " + std::to_string(logits.size()));
    std::vector<double> shifted(logits.size());
    for (size_t k = 0; k < logits.size(); ++k) {
        if (!(prior.pi[k] > 0.0)) throw PriorMismatch(prior.space + " prior entry is not positive");
        shifted[k] = logits[k] + tau_la * std::log(prior.pi[k]);
    }
    return shifted;
}

}  // namespace

double ce_loss(const std::vector<double>& logits, int label) {
    check_label(logits, label);
    return lse_and_softmax(logits, nullptr) - logits[static_cast<size_t>(label)];
}

double ce_grad(const std::vector<double>& logits, int label, std::vector<double>& dlogits) {
    check_label(logits, label);
    const double lse = lse_and_softmax(logits, &dlogits);
    dlogits[static_cast<size_t>(label)] -= 1.0;
    return lse - logits[static_cast<size_t>(label)];
}

double logit_adjusted_ce(const std::vector<double>& logits, int label, const ClassPrior& prior,
                         double tau_la) {
    check_label(logits, label);
    return ce_loss(shift_by_prior(logits, prior, tau_la), label);
}

double logit_adjusted_ce_grad(const std::vector<double>& logits, int label,
                              const ClassPrior& prior, double tau_la,
                              std::vector<double>& dlogits) {
    check_label(logits, label);
    // The prior shift is constant in the logits, so the chain rule leaves
    // the usual softmax-minus-one-hot form, over the shifted logits.
    return ce_grad(shift_by_prior(logits, prior, tau_la), label, dlogits);
}

namespace {

std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string format_logit_records(const std::vector<LogitRecord>& records) {
    if (records.empty()) throw EmptyManifest("no logit records to format");
    const size_t nv = records[0].verb_logits.size();
    const size_t nn = records[0].noun_logits.size();
    std::string out = "logits " + std::to_string(nv) + " " + std::to_string(nn) + "\n";
    for (const LogitRecord& r : records) {
        if (r.verb_logits.size() != nv || r.noun_logits.size() != nn)
            throw DimensionMismatch("inconsistent logit widths in record " + r.video_id);
        out += r.video_id + " " + r.model_tag;
        for (double v : r.verb_logits) out += " " + fmt_g(v);
        for (double v : r.noun_logits) out += " " + fmt_g(v);
        out += "\n";
    }
    return out;
}

std::vector<LogitRecord> parse_logit_records(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw EmptyManifest("logit file is empty");
    std::istringstream hdr(line);
    std::string word;
    int nv = 0, nn = 0;
    if (!(hdr >> word >> nv >> nn) || word != "logits" || nv < 1 || nn < 1)
        throw MalformedRow("bad logit header: " + line);
    std::vector<LogitRecord> out;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream row(line);
        LogitRecord r;
        if (!(row >> r.video_id >> r.model_tag))
            throw MalformedRow("logit line " + std::to_string(line_no));
        r.verb_logits.resize(static_cast<size_t>(nv));
        r.noun_logits.resize(static_cast<size_t>(nn));
        for (double& v : r.verb_logits)
            if (!(row >> v)) throw MalformedRow("logit line " + std::to_string(line_no));
        for (double& v : r.noun_logits)
            if (!(row >> v)) throw MalformedRow("logit line " + std::to_string(line_no));
        std::string extra;
        if (row >> extra) throw MalformedRow("trailing tokens on line " + std::to_string(line_no));
        out.push_back(std::move(r));
    }
    return out;
}

void write_logit_records(const std::string& path, const std::vector<LogitRecord>& records) {
    data::write_text_file(path, format_logit_records(records));
}

std::vector<LogitRecord> load_logit_records(const std::string& path) {
    return parse_logit_records(data::read_text_file(path));
}

void check_logit_records(const std::vector<LogitRecord>& records, const data::DatasetHeader& h) {
    for (const LogitRecord& r : records) {
        if (static_cast<int>(r.verb_logits.size()) != h.n_verbs ||
            static_cast<int>(r.noun_logits.size()) != h.n_nouns)
            throw DimensionMismatch("record " + r.video_id + " does not match the label spaces");
    }
}

void FinetuneConfig::validate() const {
    if (init != "random" && init.rfind("external:", 0) != 0)
        throw ConfigError("init must be random or external:PATH");
    if (tau_la < 0.0) throw ConfigError("tau_la must be >= 0");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (!(base_lr > 0.0)) throw ConfigError("base_lr must be positive");
    if (!(lr_factor > 0.0)) throw ConfigError("lr_factor must be positive");
    for (size_t i = 1; i < lr_boundaries.size(); ++i)
        if (lr_boundaries[i] <= lr_boundaries[i - 1])
            throw ConfigError("lr_boundaries must be strictly increasing");
    if (batch_videos < 1) throw ConfigError("batch_videos must be >= 1");
    if (n_regions < 1) throw ConfigError("n_regions must be >= 1");
    if (width < 1) throw ConfigError("width must be >= 1");
    if (crop_size < 16) throw ConfigError("crop_size must be >= 16");
    if (proj_hidden < 1 || proj_dim < 1) throw ConfigError("projection dims must be >= 1");
    if (frames_per_clip < 1) throw ConfigError("frames_per_clip must be >= 1");
    if (conf_threshold < 0.0 || conf_threshold >= 1.0) throw ConfigError("conf_threshold must be in [0,1)");
    if (max_regions_per_frame < 1) throw ConfigError("max_regions_per_frame must be >= 1");
    if (jitter_lo < 1.0 || jitter_hi < jitter_lo) throw ConfigError("jitter range must satisfy 1 <= lo <= hi");
    if (model_tag.empty() || model_tag.find(' ') != std::string::npos)
        throw ConfigError("model_tag must be a single non-empty token");
}

std::string FinetuneConfig::to_json() const {
    json j;
    j["init"] = init;
    j["lt_loss"] = lt_loss;
    j["tau_la"] = tau_la;
    j["freeze_encoder"] = freeze_encoder;
    j["head_on_projection"] = head_on_projection;
    j["epochs"] = epochs;
    j["base_lr"] = base_lr;
    j["momentum"] = momentum;
    j["weight_decay"] = weight_decay;
    j["lr_boundaries"] = lr_boundaries;
    j["lr_factor"] = lr_factor;
    j["batch_videos"] = batch_videos;
    j["n_regions"] = n_regions;
    j["width"] = width;
    j["crop_size"] = crop_size;
    j["proj_hidden"] = proj_hidden;
    j["proj_dim"] = proj_dim;
    j["frames_per_clip"] = frames_per_clip;
    j["conf_threshold"] = conf_threshold;
    j["max_regions_per_frame"] = max_regions_per_frame;
    j["jitter_lo"] = jitter_lo;
    j["jitter_hi"] = jitter_hi;
    j["seed"] = seed;
    j["model_tag"] = model_tag;
    return j.dump();
}

int FinetuneModel::head_in_dim() const {
    return head_on_projection ? projection.out : enc_cfg.feat_dim();
}

void FinetuneModel::init(const FinetuneConfig& cfg, int n_verbs, int n_nouns, Rng& rng) {
    head_on_projection = cfg.head_on_projection;
    freeze_encoder = cfg.freeze_encoder;
    int width = cfg.width, crop = cfg.crop_size;
    int proj_hidden = cfg.proj_hidden, proj_dim = cfg.proj_dim;

    const bool external = cfg.init.rfind("external:", 0) == 0;
    pretrain::Checkpoint ck;
    if (external) {
        ck = pretrain::load_checkpoint(cfg.init.substr(9));
        // The checkpoint fixes the encoder geometry.
        json meta = json::parse(ck.meta_json);
        if (meta.contains("config")) {
            const json& mc = meta["config"];
            width = mc.value("width", width);
            crop = mc.value("crop_size", crop);
            proj_hidden = mc.value("proj_hidden", proj_hidden);
            proj_dim = mc.value("proj_dim", proj_dim);
        }
    }

    enc_cfg.width = width;
    enc_cfg.crop_size = crop;
    encoder.init(enc_cfg, rng);
    projection.init(enc_cfg.feat_dim(), proj_hidden, proj_dim, rng);
    head.init(head_in_dim(), n_verbs, n_nouns, rng);
    if (external) {
        for (model::ParamTensor* p : encoder.params()) ck.restore(*p);
        // The projection only has to exist in the checkpoint when the heads
        // actually read its output.
        for (model::ParamTensor* p : projection.params()) ck.restore(*p, head_on_projection);
    }
}

std::vector<model::ParamTensor*> FinetuneModel::trainable_params() {
    std::vector<model::ParamTensor*> out = head.params();
    if (!freeze_encoder) {
        for (model::ParamTensor* p : encoder.params()) out.push_back(p);
        if (head_on_projection)
            for (model::ParamTensor* p : projection.params()) out.push_back(p);
    }
    return out;
}

std::vector<model::ParamTensor*> FinetuneModel::all_params() {
    std::vector<model::ParamTensor*> out = encoder.params();
    for (model::ParamTensor* p : projection.params()) out.push_back(p);
    for (model::ParamTensor* p : head.params()) out.push_back(p);
    return out;
}

void FinetuneModel::zero_grad() {
    for (model::ParamTensor* p : all_params()) p->zero_grad();
}

namespace {

std::vector<float> flatten_crops(const std::vector<RegionCrop>& crops, int crop_size) {
    std::vector<float> images;
    images.reserve(crops.size() * 3u * static_cast<size_t>(crop_size) * crop_size);
    for (const RegionCrop& c : crops) {
        if (c.crop.h != crop_size || c.crop.w != crop_size)
            throw DimensionMismatch("crop size does not match encoder");
        images.insert(images.end(), c.crop.data.begin(), c.crop.data.end());
    }
    return images;
}

// encoder -> (projection) -> heads. train gates caching per segment: the
// encoder path only caches when it will receive gradients.
std::pair<std::vector<float>, std::vector<float>> forward_heads(FinetuneModel& model,
                                                                const std::vector<float>& images,
                                                                int n, bool train) {
    const bool ebp = train && !model.freeze_encoder;  // encoder backprop
    std::vector<float> feats = model.encoder.forward(images, n, ebp);
    if (model.head_on_projection) {
        std::vector<float> z = model.projection.forward(feats, n, ebp);
        return model.head.forward(z, n, train);
    }
    return model.head.forward(feats, n, train);
}

std::vector<double> mean_rows(const std::vector<float>& rows, int row0, int count, int dim) {
    std::vector<double> out(static_cast<size_t>(dim), 0.0);
    for (int r = 0; r < count; ++r) {
        const float* p = rows.data() + static_cast<size_t>(row0 + r) * dim;
        for (int k = 0; k < dim; ++k) out[static_cast<size_t>(k)] += p[k];
    }
    for (double& v : out) v /= count;
    return out;
}

}  // namespace

LogitRecord video_logits(FinetuneModel& model, const std::vector<RegionCrop>& crops,
                         const std::string& video_id, const std::string& model_tag) {
    if (crops.empty()) throw EmptyRegionList(video_id);
    const int n = static_cast<int>(crops.size());
    std::vector<float> images = flatten_crops(crops, model.enc_cfg.crop_size);
    auto [vl, nl] = forward_heads(model, images, n, false);
    LogitRecord rec;
    rec.video_id = video_id;
    rec.model_tag = model_tag;
    rec.verb_logits = mean_rows(vl, 0, n, model.head.verb.out_f);
    rec.noun_logits = mean_rows(nl, 0, n, model.head.noun.out_f);
    return rec;
}

namespace {

// Test-mode crops of one video: center frames, top-confidence regions, unit
// jitter, no augmentation.
std::vector<RegionCrop> eval_crops(const RegionDataset& dataset, const std::string& video_id,
                                   const FinetuneConfig& config, int crop_size, uint64_t salt) {
    auto it = dataset.records_by_video.find(video_id);
    if (it == dataset.records_by_video.end()) throw UnknownVideo(video_id);
    Rng rng(derive_seed(config.seed, "eval", salt));
    VideoPool pool = build_pool(video_id, it->second, dataset.frames->frame_count(video_id),
                                config.frames_per_clip, false, config.conf_threshold,
                                config.max_regions_per_frame, rng);
    std::vector<RegionRef> refs = sample_regions(pool, config.n_regions, SampleMode::test_topk, rng);
    return materialize(video_id, refs, *dataset.frames, 1.0, 1.0, crop_size, rng);
}

std::vector<RegionCrop> train_crops(const RegionDataset& dataset, const std::string& video_id,
                                    const FinetuneConfig& config, int crop_size, Rng& rng) {
    auto it = dataset.records_by_video.find(video_id);
    if (it == dataset.records_by_video.end()) throw UnknownVideo(video_id);
    VideoPool pool = build_pool(video_id, it->second, dataset.frames->frame_count(video_id),
                                config.frames_per_clip, true, config.conf_threshold,
                                config.max_regions_per_frame, rng);
    std::vector<RegionRef> refs =
        sample_regions(pool, config.n_regions, SampleMode::train_uniform, rng);
    return materialize(video_id, refs, *dataset.frames, config.jitter_lo, config.jitter_hi,
                       crop_size, rng);
}

}  // namespace

FinetuneResult finetune(const RegionDataset& dataset, const std::vector<data::VideoLabel>& labels,
                        const data::DatasetHeader& header, const FinetuneConfig& config,
                        const std::string& checkpoint_path, const std::string& log_path) {
    config.validate();
    data::check_labels(labels, header);
    const std::vector<data::VideoLabel> train_labels = data::filter_split(labels, "train");
    if (train_labels.empty()) throw DataError("train split is empty");

    const ClassPrior verb_prior = prior_from_labels("verb", train_labels, header.n_verbs);
    const ClassPrior noun_prior = prior_from_labels("noun", train_labels, header.n_nouns);

    FinetuneModel model;
    Rng init_rng(derive_seed(config.seed, "init"));
    model.init(config, header.n_verbs, header.n_nouns, init_rng);
    const int cs = model.enc_cfg.crop_size;
    const int nv = header.n_verbs, nn = header.n_nouns;
    const int nr = config.n_regions;

    const int n_train = static_cast<int>(train_labels.size());
    const int bs = std::min(config.batch_videos, n_train);
    const int steps_per_epoch = std::max(1, n_train / bs);
    const double scaled_lr = config.base_lr * bs / 64.0;
    const model::SgdConfig sgd{config.momentum, config.weight_decay};

    std::ofstream log;
    if (!log_path.empty()) {
        log.open(log_path);
        if (!log) throw DataError("cannot write metrics log: " + log_path);
    }

    FinetuneResult result;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<data::VideoLabel> order = train_labels;
        Rng order_rng(derive_seed(config.seed, "order", static_cast<uint64_t>(epoch)));
        order_rng.shuffle(order);
        const double lr = model::step_lr(scaled_lr, epoch, config.lr_boundaries, config.lr_factor);

        double epoch_loss = 0.0;
        for (int step = 0; step < steps_per_epoch; ++step) {
            const data::VideoLabel* batch = order.data() + static_cast<size_t>(step) * bs;
            std::vector<float> images;
            for (int i = 0; i < bs; ++i) {
                Rng rng(derive_seed(config.seed, "batch", static_cast<uint64_t>(epoch),
                                    static_cast<uint64_t>(step), static_cast<uint64_t>(i)));
                std::vector<RegionCrop> crops =
                    train_crops(dataset, batch[i].video_id, config, cs, rng);
                std::vector<float> px = flatten_crops(crops, cs);
                images.insert(images.end(), px.begin(), px.end());
            }
            const int total = bs * nr;
            auto [vl, nl] = forward_heads(model, images, total, true);

            std::vector<float> dverb(static_cast<size_t>(total) * nv, 0.0f);
            std::vector<float> dnoun(static_cast<size_t>(total) * nn, 0.0f);
            double batch_loss = 0.0;
            for (int i = 0; i < bs; ++i) {
                const std::vector<double> vlog = mean_rows(vl, i * nr, nr, nv);
                const std::vector<double> nlog = mean_rows(nl, i * nr, nr, nn);
                std::vector<double> dv, dn;
                if (config.lt_loss) {
                    batch_loss +=
                        logit_adjusted_ce_grad(vlog, batch[i].verb, verb_prior, config.tau_la, dv);
                    batch_loss +=
                        logit_adjusted_ce_grad(nlog, batch[i].noun, noun_prior, config.tau_la, dn);
                } else {
                    batch_loss += ce_grad(vlog, batch[i].verb, dv);
                    batch_loss += ce_grad(nlog, batch[i].noun, dn);
                }
                // Mean pooling and the batch mean spread each video gradient
                // evenly over its region rows.
                const double w = 1.0 / (static_cast<double>(nr) * bs);
                for (int r = 0; r < nr; ++r) {
                    float* pv = dverb.data() + static_cast<size_t>(i * nr + r) * nv;
                    float* pn = dnoun.data() + static_cast<size_t>(i * nr + r) * nn;
                    for (int k = 0; k < nv; ++k) pv[k] = static_cast<float>(dv[static_cast<size_t>(k)] * w);
                    for (int k = 0; k < nn; ++k) pn[k] = static_cast<float>(dn[static_cast<size_t>(k)] * w);
                }
            }
            batch_loss /= bs;
            if (!std::isfinite(batch_loss))
                throw DivergenceDetected("fine-tuning loss is not finite at epoch " +
                                         std::to_string(epoch + 1));
            epoch_loss += batch_loss;

            model.zero_grad();
            std::vector<float> dhead = model.head.backward(dverb, dnoun);
            if (!model.freeze_encoder) {
                if (model.head_on_projection) {
                    std::vector<float> dfeat = model.projection.backward(dhead);
                    model.encoder.backward(dfeat);
                } else {
                    model.encoder.backward(dhead);
                }
            }
            std::vector<model::ParamTensor*> params = model.trainable_params();
            model::sgd_step(params, lr, sgd);
        }
        epoch_loss /= steps_per_epoch;

        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.log.push_back({epoch + 1, epoch_loss, lr, wall});
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

    // Test-mode records for every labeled video; train-split records feed
    // the fusion pilot, val-split records feed evaluation.
    int verb_hits = 0, noun_hits = 0;
    for (size_t i = 0; i < labels.size(); ++i) {
        const data::VideoLabel& lab = labels[i];
        std::vector<RegionCrop> crops = eval_crops(dataset, lab.video_id, config, cs, i);
        LogitRecord rec = video_logits(model, crops, lab.video_id, config.model_tag);
        if (lab.split == "val") {
            result.val_records.push_back(std::move(rec));
            continue;
        }
        const auto vmax = std::max_element(rec.verb_logits.begin(), rec.verb_logits.end());
        const auto nmax = std::max_element(rec.noun_logits.begin(), rec.noun_logits.end());
        if (static_cast<int>(vmax - rec.verb_logits.begin()) == lab.verb) ++verb_hits;
        if (static_cast<int>(nmax - rec.noun_logits.begin()) == lab.noun) ++noun_hits;
        result.train_records.push_back(std::move(rec));
    }
    if (!result.train_records.empty()) {
        result.train_verb_accuracy = static_cast<double>(verb_hits) / result.train_records.size();
        result.train_noun_accuracy = static_cast<double>(noun_hits) / result.train_records.size();
    }

    pretrain::Checkpoint ck;
    for (model::ParamTensor* p : model.all_params()) ck.add(*p);
    json meta;
    meta["version"] = 1;
    meta["kind"] = "finetune";
    meta["config"] = json::parse(config.to_json());
    meta["config_hash"] = pretrain::content_hash(config.to_json());
    meta["seed"] = config.seed;
    meta["epoch"] = config.epochs;
    meta["n_verbs"] = nv;
    meta["n_nouns"] = nn;
    meta["feat_dim"] = model.enc_cfg.feat_dim();
    meta["head_on_projection"] = model.head_on_projection;
    ck.meta_json = meta.dump();
    pretrain::save_checkpoint(checkpoint_path, ck);
    result.checkpoint_path = checkpoint_path;
    return result;
}

}  // namespace setswav::finetune
