#include "setswav/pipeline/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <set>

#include "json.hpp"
#include "setswav/core/errors.hpp"
#include "setswav/pretrain/checkpoint.hpp"

namespace setswav::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

void FuseConfig::validate() const {
    if (!(pilot_fraction > 0.0 && pilot_fraction < 1.0))
        throw ConfigError("pilot_fraction must be in (0,1)");
    for (const fusion::WeightPair& w : grid)
        if (w.alpha_oic < 0.0 || w.alpha_base < 0.0)
            throw ConfigError("fusion weights must be non-negative");
}

std::string FuseConfig::to_json() const {
    json j;
    j["pilot_fraction"] = pilot_fraction;
    j["seed"] = seed;
    json g = json::array();
    for (const fusion::WeightPair& w : grid) g.push_back({w.alpha_oic, w.alpha_base});
    j["grid"] = g;
    return j.dump();
}

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& item : j.items())
        if (!allowed.count(item.key()))
            throw ConfigError("unknown key '" + item.key() + "' in " + where);
}

template <typename F>
auto guarded(const std::string& where, F&& f) {
    try {
        return f();
    } catch (const json::exception& e) {
        throw ConfigError("bad value in " + where + ": " + e.what());
    }
}

pretrain::PretrainConfig parse_pretrain(const json& j) {
    check_keys(j,
               {"objective", "n_regions", "batch_sets", "epochs", "base_lr", "momentum",
                "weight_decay", "tau", "epsilon", "sinkhorn_iters", "n_prototypes", "proj_hidden",
                "proj_dim", "width", "crop_size", "frames_per_clip", "conf_threshold",
                "max_regions_per_frame", "jitter_lo", "jitter_hi", "seed", "recipe", "init",
                "freeze_prototypes", "freeze_prototype_epochs"},
               "pretrain");
    return guarded("pretrain", [&] {
        pretrain::PretrainConfig c;
        c.objective = j.value("objective", c.objective);
        c.n_regions = j.value("n_regions", c.n_regions);
        c.batch_sets = j.value("batch_sets", c.batch_sets);
        c.epochs = j.value("epochs", c.epochs);
        c.base_lr = j.value("base_lr", c.base_lr);
        c.momentum = j.value("momentum", c.momentum);
        c.weight_decay = j.value("weight_decay", c.weight_decay);
        c.tau = j.value("tau", c.tau);
        c.epsilon = j.value("epsilon", c.epsilon);
        c.sinkhorn_iters = j.value("sinkhorn_iters", c.sinkhorn_iters);
        c.n_prototypes = j.value("n_prototypes", c.n_prototypes);
        c.proj_hidden = j.value("proj_hidden", c.proj_hidden);
        c.proj_dim = j.value("proj_dim", c.proj_dim);
        c.width = j.value("width", c.width);
        c.crop_size = j.value("crop_size", c.crop_size);
        c.frames_per_clip = j.value("frames_per_clip", c.frames_per_clip);
        c.conf_threshold = j.value("conf_threshold", c.conf_threshold);
        c.max_regions_per_frame = j.value("max_regions_per_frame", c.max_regions_per_frame);
        c.jitter_lo = j.value("jitter_lo", c.jitter_lo);
        c.jitter_hi = j.value("jitter_hi", c.jitter_hi);
        c.seed = j.value("seed", c.seed);
        c.recipe = j.value("recipe", c.recipe);
        c.init = j.value("init", c.init);
        c.freeze_prototypes = j.value("freeze_prototypes", c.freeze_prototypes);
        c.freeze_prototype_epochs = j.value("freeze_prototype_epochs", c.freeze_prototype_epochs);
        return c;
    });
}

finetune::FinetuneConfig parse_finetune(const json& j) {
    check_keys(j,
               {"init", "lt_loss", "tau_la", "freeze_encoder", "head_on_projection", "epochs",
                "base_lr", "momentum", "weight_decay", "lr_boundaries", "lr_factor",
                "batch_videos", "n_regions", "width", "crop_size", "proj_hidden", "proj_dim",
                "frames_per_clip", "conf_threshold", "max_regions_per_frame", "jitter_lo",
                "jitter_hi", "seed", "model_tag"},
               "finetune");
    return guarded("finetune", [&] {
        finetune::FinetuneConfig c;
        c.init = j.value("init", c.init);
        c.lt_loss = j.value("lt_loss", c.lt_loss);
        c.tau_la = j.value("tau_la", c.tau_la);
        c.freeze_encoder = j.value("freeze_encoder", c.freeze_encoder);
        c.head_on_projection = j.value("head_on_projection", c.head_on_projection);
        c.epochs = j.value("epochs", c.epochs);
        c.base_lr = j.value("base_lr", c.base_lr);
        c.momentum = j.value("momentum", c.momentum);
        c.weight_decay = j.value("weight_decay", c.weight_decay);
        if (j.contains("lr_boundaries")) c.lr_boundaries = j.at("lr_boundaries").get<std::vector<int>>();
        c.lr_factor = j.value("lr_factor", c.lr_factor);
        c.batch_videos = j.value("batch_videos", c.batch_videos);
        c.n_regions = j.value("n_regions", c.n_regions);
        c.width = j.value("width", c.width);
        c.crop_size = j.value("crop_size", c.crop_size);
        c.proj_hidden = j.value("proj_hidden", c.proj_hidden);
        c.proj_dim = j.value("proj_dim", c.proj_dim);
        c.frames_per_clip = j.value("frames_per_clip", c.frames_per_clip);
        c.conf_threshold = j.value("conf_threshold", c.conf_threshold);
        c.max_regions_per_frame = j.value("max_regions_per_frame", c.max_regions_per_frame);
        c.jitter_lo = j.value("jitter_lo", c.jitter_lo);
        c.jitter_hi = j.value("jitter_hi", c.jitter_hi);
        c.seed = j.value("seed", c.seed);
        c.model_tag = j.value("model_tag", c.model_tag);
        return c;
    });
}

FuseConfig parse_fuse(const json& j) {
    check_keys(j, {"pilot_fraction", "grid", "seed"}, "fuse");
    return guarded("fuse", [&] {
        FuseConfig c;
        c.pilot_fraction = j.value("pilot_fraction", c.pilot_fraction);
        c.seed = j.value("seed", c.seed);
        if (j.contains("grid")) {
            for (const json& e : j.at("grid")) {
                if (!e.is_array() || e.size() != 2)
                    throw ConfigError("fuse.grid entries must be [alpha_oic, alpha_base]");
                c.grid.push_back({e[0].get<double>(), e[1].get<double>()});
            }
        }
        return c;
    });
}

synth::SynthSpec parse_synth(const json& j) {
    check_keys(j,
               {"n_videos", "n_clusters", "n_verbs", "n_nouns", "imbalance_ratio",
                "frames_per_video", "regions_per_frame", "patch_size", "noise_sigma", "seed",
                "n_participants", "n_unseen_participants", "val_fraction", "distractor_prob",
                "frame_scale"},
               "synth");
    return synth::spec_from_json(j.dump());
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid json: ") + e.what());
    }
    check_keys(j, {"version", "threads", "out_dir", "write_frames", "synth", "pretrain",
                   "finetune", "fuse"},
               "config");
    RunConfig c;
    c.version = guarded("config", [&] { return j.value("version", c.version); });
    if (c.version != 1) throw ConfigError("unsupported config version " + std::to_string(c.version));
    c.threads = guarded("config", [&] { return j.value("threads", c.threads); });
    if (c.threads < 1) throw ConfigError("threads must be >= 1");
    c.out_dir = guarded("config", [&] { return j.value("out_dir", c.out_dir); });
    c.write_frames = guarded("config", [&] { return j.value("write_frames", c.write_frames); });
    if (j.contains("synth")) c.synth = parse_synth(j.at("synth"));
    if (j.contains("pretrain")) c.pretrain = parse_pretrain(j.at("pretrain"));
    if (j.contains("finetune")) c.finetune = parse_finetune(j.at("finetune"));
    if (j.contains("fuse")) c.fuse = parse_fuse(j.at("fuse"));
    return c;
}

std::string RunConfig::to_json() const {
    json j;
    j["version"] = version;
    j["threads"] = threads;
    j["out_dir"] = out_dir;
    j["write_frames"] = write_frames;
    j["synth"] = json::parse(synth::spec_to_json(synth));
    j["pretrain"] = json::parse(pretrain.to_json());
    j["finetune"] = json::parse(finetune.to_json());
    j["fuse"] = json::parse(fuse.to_json());
    return j.dump(2);
}

void RunConfig::write_resolved(const std::string& dir, const std::string& command) const {
    fs::create_directories(dir);
    const std::string resolved = to_json();
    json j;
    j["command"] = command;
    j["config_hash"] = pretrain::content_hash(resolved);
    j["config"] = json::parse(resolved);
    data::write_text_file(dir + "/" + command + "_config.json", j.dump(2) + "\n");
}

LoadedDataset load_dataset(const std::string& dir) {
    if (!fs::exists(dir + "/header.json")) throw DataError("not a dataset directory: " + dir);
    LoadedDataset out;
    out.header = data::load_header(dir + "/header.json");
    out.labels = data::load_labels(dir + "/labels.txt");
    data::check_labels(out.labels, out.header);
    out.records = load_manifest(dir + "/manifest.txt");
    if (fs::exists(dir + "/frames")) {
        out.provider = std::make_unique<DirectoryFrameProvider>(dir);
    } else {
        json echo = json::parse(out.header.extra_json, nullptr, false);
        if (echo.is_discarded() || !echo.contains("spec"))
            throw DataError("dataset has no frames/ tree and no synthetic spec to re-render from");
        synth::SynthSpec spec = synth::spec_from_json(echo["spec"].dump());
        out.provider = std::make_unique<synth::SynthFrameProvider>(synth::generate(spec));
    }
    out.dataset = make_dataset(out.records, *out.provider);
    return out;
}

LoadedDataset dataset_from_memory(synth::GeneratedDataset ds) {
    LoadedDataset out;
    out.header = ds.header;
    out.labels = ds.labels;
    // Hand rows never survive manifest parsing, so the in-memory path drops
    // them too; otherwise it would diverge from a written-then-loaded dataset.
    for (const DetectionRecord& r : ds.manifest)
        if (r.kind == DetKind::object) out.records.push_back(r);
    out.provider = std::make_unique<synth::SynthFrameProvider>(std::move(ds));
    out.dataset = make_dataset(out.records, *out.provider);
    return out;
}

std::string run_generate(const RunConfig& cfg) {
    cfg.synth.validate();
    synth::GeneratedDataset ds = synth::generate(cfg.synth);
    const std::string dir = cfg.out_dir + "/dataset";
    synth::write_dataset(ds, dir, cfg.write_frames);
    // Verb-strong, noun-weak stand-in for an external video model, so the
    // fusion stage has its second input out of the box.
    std::vector<fusion::LogitRecord> base;
    for (synth::SynthLogit& s :
         synth::synthesize_logits(ds.labels, ds.header, synth::LogitQuality{},
                                  derive_seed(cfg.synth.seed, "base-model"))) {
        fusion::LogitRecord r;
        r.video_id = std::move(s.video_id);
        r.model_tag = "base";
        r.verb_logits = std::move(s.verb);
        r.noun_logits = std::move(s.noun);
        base.push_back(std::move(r));
    }
    finetune::write_logit_records(dir + "/base_logits.txt", base);
    cfg.write_resolved(cfg.out_dir, "generate");
    return dir;
}

pretrain::PretrainResult run_pretrain(const RunConfig& cfg, const LoadedDataset& ds) {
    cfg.write_resolved(cfg.out_dir, "pretrain");
    return pretrain::train(ds.dataset, cfg.pretrain, cfg.out_dir + "/pretrain_checkpoint.bin",
                           cfg.out_dir + "/pretrain_metrics.jsonl");
}

finetune::FinetuneResult run_finetune(const RunConfig& cfg, const LoadedDataset& ds) {
    cfg.write_resolved(cfg.out_dir, "finetune");
    finetune::FinetuneResult res =
        finetune::finetune(ds.dataset, ds.labels, ds.header, cfg.finetune,
                           cfg.out_dir + "/finetune_checkpoint.bin",
                           cfg.out_dir + "/finetune_metrics.jsonl");
    if (!res.train_records.empty())
        finetune::write_logit_records(cfg.out_dir + "/oic_train_logits.txt", res.train_records);
    if (!res.val_records.empty())
        finetune::write_logit_records(cfg.out_dir + "/oic_val_logits.txt", res.val_records);
    // Combined file: fusion selects weights on the train split but fuses and
    // scores the full record set, so it wants both splits in one input.
    std::vector<finetune::LogitRecord> all = res.train_records;
    all.insert(all.end(), res.val_records.begin(), res.val_records.end());
    if (!all.empty()) finetune::write_logit_records(cfg.out_dir + "/oic_logits.txt", all);
    return res;
}

FuseRun run_fuse(const RunConfig& cfg, const LoadedDataset& ds,
                 const std::vector<fusion::LogitRecord>& oic,
                 const std::vector<fusion::LogitRecord>& base) {
    cfg.fuse.validate();
    finetune::check_logit_records(oic, ds.header);
    finetune::check_logit_records(base, ds.header);
    const std::vector<data::VideoLabel> train_labels = data::filter_split(ds.labels, "train");
    const std::vector<fusion::WeightPair> grid =
        cfg.fuse.grid.empty() ? fusion::default_grid() : cfg.fuse.grid;
    FuseRun out;
    out.weights =
        fusion::select_weights(oic, base, train_labels, cfg.fuse.pilot_fraction, grid, cfg.fuse.seed);
    out.fused = fusion::fuse_all(oic, base, out.weights);
    cfg.write_resolved(cfg.out_dir, "fuse");
    out.fused_path = cfg.out_dir + "/fused_logits.txt";
    finetune::write_logit_records(out.fused_path, out.fused);
    json j;
    j["verb"] = {{"alpha_oic", out.weights.verb.alpha_oic},
                 {"alpha_base", out.weights.verb.alpha_base}};
    j["noun"] = {{"alpha_oic", out.weights.noun.alpha_oic},
                 {"alpha_base", out.weights.noun.alpha_base}};
    j["pilot_fraction"] = cfg.fuse.pilot_fraction;
    j["seed"] = cfg.fuse.seed;
    data::write_text_file(cfg.out_dir + "/fusion.json", j.dump(2) + "\n");
    return out;
}

fusion::EvalReport run_eval(const LoadedDataset& ds,
                            const std::vector<fusion::LogitRecord>& records) {
    const std::vector<data::VideoLabel> val_labels = data::filter_split(ds.labels, "val");
    std::set<std::string> val_ids;
    for (const data::VideoLabel& l : val_labels) val_ids.insert(l.video_id);
    std::vector<fusion::LogitRecord> val_records;
    for (const fusion::LogitRecord& r : records)
        if (val_ids.count(r.video_id)) val_records.push_back(r);
    return fusion::evaluate(val_records, val_labels, ds.header);
}

std::vector<std::vector<double>> embed_videos(const LoadedDataset& ds,
                                              const pretrain::PretrainConfig& cfg,
                                              const std::string& init) {
    pretrain::PretrainModel model;
    Rng rng(derive_seed(cfg.seed, "init"));
    if (init == "random") {
        model.init_random(cfg, rng);
    } else if (init.rfind("external:", 0) == 0) {
        model.load_external(cfg, init.substr(9), rng);
    } else {
        throw ConfigError("init must be random or external:PATH");
    }
    const int cs = model.enc_cfg.crop_size;
    const int fd = model.enc_cfg.feat_dim();
    std::vector<std::vector<double>> out;
    out.reserve(ds.labels.size());
    for (size_t i = 0; i < ds.labels.size(); ++i) {
        const std::string& vid = ds.labels[i].video_id;
        auto it = ds.dataset.records_by_video.find(vid);
        if (it == ds.dataset.records_by_video.end()) throw UnknownVideo(vid);
        Rng erng(derive_seed(cfg.seed, "embed", i));
        VideoPool pool = build_pool(vid, it->second, ds.dataset.frames->frame_count(vid),
                                    cfg.frames_per_clip, false, cfg.conf_threshold,
                                    cfg.max_regions_per_frame, erng);
        std::vector<RegionRef> refs =
            sample_regions(pool, cfg.n_regions, SampleMode::test_topk, erng);
        std::vector<RegionCrop> crops =
            materialize(vid, refs, *ds.dataset.frames, 1.0, 1.0, cs, erng);
        std::vector<float> images;
        images.reserve(crops.size() * 3u * static_cast<size_t>(cs) * cs);
        for (const RegionCrop& c : crops)
            images.insert(images.end(), c.crop.data.begin(), c.crop.data.end());
        const int n = static_cast<int>(crops.size());
        std::vector<float> feats = model.encoder.forward(images, n, false);
        std::vector<double> emb(static_cast<size_t>(fd), 0.0);
        for (int r = 0; r < n; ++r)
            for (int k = 0; k < fd; ++k)
                emb[static_cast<size_t>(k)] += feats[static_cast<size_t>(r) * fd + k];
        for (double& v : emb) v /= n;
        out.push_back(std::move(emb));
    }
    return out;
}

synth::ProbeResult probe_space(const LoadedDataset& ds,
                               const std::vector<std::vector<double>>& embeddings,
                               const std::string& space, double held_out_fraction) {
    if (embeddings.size() != ds.labels.size())
        throw DimensionMismatch("one embedding per labeled video required");
    std::vector<int> y;
    y.reserve(ds.labels.size());
    for (const data::VideoLabel& l : ds.labels) y.push_back(space == "verb" ? l.verb : l.noun);
    const int n_classes = space == "verb" ? ds.header.n_verbs : ds.header.n_nouns;
    return synth::oracle_linear_probe(embeddings, y, n_classes, held_out_fraction);
}

namespace {

std::string fmt_pts(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%6.1f", v * 100.0);
    return buf;
}

}  // namespace

AblateResult run_ablate(const RunConfig& cfg) {
    cfg.synth.validate();
    cfg.write_resolved(cfg.out_dir, "ablate");
    LoadedDataset ds = dataset_from_memory(synth::generate(cfg.synth));

    // Grid 1: fine-tune init x loss, scored on the val split.
    RunConfig pre = cfg;
    pre.out_dir = cfg.out_dir + "/ablate_pretrain";
    const pretrain::PretrainResult pres = run_pretrain(pre, ds);
    const std::string sos_init = "external:" + pres.checkpoint_path;

    struct FtRow {
        std::string row, init_name, loss_name;
        fusion::EvalReport report;
    };
    std::vector<FtRow> ft_rows;
    const std::pair<std::string, std::string> inits[2] = {{"random", "random"},
                                                          {sos_init, "pretrained"}};
    for (int ii = 0; ii < 2; ++ii) {
        for (int lt = 0; lt < 2; ++lt) {
            const char row = static_cast<char>('A' + ii * 2 + lt);
            RunConfig f = cfg;
            f.finetune.init = inits[ii].first;
            f.finetune.lt_loss = lt == 1;
            f.out_dir = cfg.out_dir + "/ablate_ft_" + row;
            const finetune::FinetuneResult res = run_finetune(f, ds);
            ft_rows.push_back({std::string(1, row), inits[ii].second, lt ? "lt" : "ce",
                               run_eval(ds, res.val_records)});
        }
    }

    // Grid 2: pre-train init x objective, scored by linear probe.
    RunConfig s1 = cfg;
    s1.pretrain.objective = "swav";
    s1.pretrain.seed = derive_seed(cfg.pretrain.seed, "stage1");
    s1.out_dir = cfg.out_dir + "/ablate_stage1";
    const pretrain::PretrainResult s1res = run_pretrain(s1, ds);
    const std::string stage1_init = "external:" + s1res.checkpoint_path;

    struct PreRow {
        std::string row, init_name, objective;
        double probe_verb = 0.0, probe_noun = 0.0;
    };
    std::vector<PreRow> pre_rows;
    const std::pair<std::string, std::string> pinits[2] = {{"random", "random"},
                                                           {stage1_init, "stage1"}};
    const char* objectives[2] = {"swav", "swav_s"};
    for (int ii = 0; ii < 2; ++ii) {
        for (int oo = 0; oo < 2; ++oo) {
            const char row = static_cast<char>('A' + ii * 2 + oo);
            RunConfig p = cfg;
            p.pretrain.init = pinits[ii].first;
            p.pretrain.objective = objectives[oo];
            p.out_dir = cfg.out_dir + "/ablate_pre_" + row;
            const pretrain::PretrainResult r = run_pretrain(p, ds);
            const std::vector<std::vector<double>> emb =
                embed_videos(ds, p.pretrain, "external:" + r.checkpoint_path);
            PreRow out{std::string(1, row), pinits[ii].second, objectives[oo]};
            out.probe_verb = probe_space(ds, emb, "verb", 0.25).held_out_accuracy;
            out.probe_noun = probe_space(ds, emb, "noun", 0.25).held_out_accuracy;
            pre_rows.push_back(out);
        }
    }

    std::string t;
    t += "fine-tune ablation (encoder init x loss), val split, points\n";
    t += "row  init        loss  action@1  cb-verb  cb-noun\n";
    for (const FtRow& r : ft_rows) {
        t += r.row + "    ";
        char buf[128];
        std::snprintf(buf, sizeof buf, "%-11s %-5s %s   %s   %s\n", r.init_name.c_str(),
                      r.loss_name.c_str(), fmt_pts(r.report.action.overall.top1).c_str(),
                      fmt_pts(r.report.verb.class_balanced).c_str(),
                      fmt_pts(r.report.noun.class_balanced).c_str());
        t += buf;
    }
    t += "\npre-train ablation (init x objective), linear probe, points\n";
    t += "row  init        objective  probe-verb  probe-noun\n";
    for (const PreRow& r : pre_rows) {
        t += r.row + "    ";
        char buf[128];
        std::snprintf(buf, sizeof buf, "%-11s %-9s %s      %s\n", r.init_name.c_str(),
                      r.objective.c_str(), fmt_pts(r.probe_verb).c_str(),
                      fmt_pts(r.probe_noun).c_str());
        t += buf;
    }
    t += "\nnote: differences smaller than 0.5 points are treated as noise\n";

    json j;
    json ft = json::array();
    for (const FtRow& r : ft_rows)
        ft.push_back({{"row", r.row},
                      {"init", r.init_name},
                      {"loss", r.loss_name},
                      {"action_top1", r.report.action.overall.top1},
                      {"cb_verb", r.report.verb.class_balanced},
                      {"cb_noun", r.report.noun.class_balanced}});
    json pt = json::array();
    for (const PreRow& r : pre_rows)
        pt.push_back({{"row", r.row},
                      {"init", r.init_name},
                      {"objective", r.objective},
                      {"probe_verb", r.probe_verb},
                      {"probe_noun", r.probe_noun}});
    j["finetune_grid"] = ft;
    j["pretrain_grid"] = pt;
    j["significance_note"] = "differences smaller than 0.5 points are treated as noise";

    AblateResult out;
    out.table_text = t;
    out.json_text = j.dump(2);
    data::write_text_file(cfg.out_dir + "/ablation.txt", out.table_text);
    data::write_text_file(cfg.out_dir + "/ablation.json", out.json_text + "\n");
    return out;
}

}  // namespace setswav::pipeline
