#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "setswav/core/errors.hpp"
#include "setswav/kernels/kernels.hpp"
#include "setswav/pipeline/pipeline.hpp"

namespace {

using namespace setswav;

pipeline::RunConfig load_config(const std::string& path) {
    if (path.empty()) return {};
    if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path);
    return pipeline::RunConfig::from_json_text(data::read_text_file(path));
}

std::vector<fusion::WeightPair> parse_grid_text(const std::string& text) {
    if (text == "default") return {};
    std::vector<fusion::WeightPair> grid;
    std::string token;
    std::istringstream in(text);
    while (std::getline(in, token, ';')) {
        const size_t comma = token.find(',');
        if (comma == std::string::npos) throw ConfigError("grid entries look like A,B;A,B: " + text);
        try {
            grid.push_back({std::stod(token.substr(0, comma)), std::stod(token.substr(comma + 1))});
        } catch (const std::exception&) {
            throw ConfigError("bad grid entry: " + token);
        }
    }
    if (grid.empty()) throw ConfigError("grid is empty: " + text);
    return grid;
}

void apply_threads(int threads) { setswav::set_num_threads(threads); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"set-based self-supervised learning over object regions"};
    app.require_subcommand(1);

    std::string config_path, out_dir, data_dir, objective, lt_loss, init, grid_text;
    std::string oic_path, base_path;
    std::vector<std::string> logit_paths;
    uint64_t seed = 0;
    int threads = 0;
    double pilot_fraction = 0.0;
    bool no_frames = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON run config; flags override it");
        cmd->add_option("--seed", seed, "seed for this stage");
        cmd->add_option("--threads", threads, "worker threads (default 1)");
        cmd->add_option("--out-dir", out_dir, "output directory");
    };

    CLI::App* c_gen = app.add_subcommand("generate", "render a synthetic dataset");
    add_common(c_gen);
    c_gen->add_flag("--no-frames", no_frames,
                    "skip the frames/ tree; frames re-render from the header spec");

    CLI::App* c_pre = app.add_subcommand("pretrain", "set-based self-supervised pre-training");
    add_common(c_pre);
    c_pre->add_option("--data", data_dir, "dataset directory")->required();
    c_pre->add_option("--objective", objective, "swav or swav_s")
        ->check(CLI::IsMember({"swav", "swav_s"}));
    c_pre->add_option("--init", init, "random or external:PATH");

    CLI::App* c_fin = app.add_subcommand("finetune", "supervised fine-tuning with dual heads");
    add_common(c_fin);
    c_fin->add_option("--data", data_dir, "dataset directory")->required();
    c_fin->add_option("--lt-loss", lt_loss, "on or off")->check(CLI::IsMember({"on", "off"}));
    c_fin->add_option("--init", init, "random or external:PATH");

    CLI::App* c_fus = app.add_subcommand("fuse", "late-fuse two logit files");
    add_common(c_fus);
    c_fus->add_option("--data", data_dir, "dataset directory")->required();
    c_fus->add_option("--oic", oic_path, "primary model logit file")->required();
    c_fus->add_option("--base", base_path, "base model logit file")->required();
    c_fus->add_option("--pilot-fraction", pilot_fraction, "training fraction for weight selection");
    c_fus->add_option("--grid", grid_text, "weight grid: A,B;A,B or 'default'");

    CLI::App* c_evl = app.add_subcommand("eval", "score logit files on the val split");
    add_common(c_evl);
    c_evl->add_option("--data", data_dir, "dataset directory")->required();
    c_evl->add_option("--logits", logit_paths, "logit file(s) to score")->required();

    CLI::App* c_abl = app.add_subcommand("ablate", "run both 4-row ablation grids");
    add_common(c_abl);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        pipeline::RunConfig cfg = load_config(config_path);
        if (threads > 0) cfg.threads = threads;
        if (cfg.threads < 1) throw ConfigError("threads must be >= 1");
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        apply_threads(cfg.threads);

        if (c_gen->parsed()) {
            if (c_gen->count("--seed")) cfg.synth.seed = seed;
            if (no_frames) cfg.write_frames = false;
            const std::string dir = pipeline::run_generate(cfg);
            std::printf("dataset written to %s\n", dir.c_str());
            return 0;
        }
        if (c_pre->parsed()) {
            if (c_pre->count("--seed")) cfg.pretrain.seed = seed;
            if (!objective.empty()) cfg.pretrain.objective = objective;
            if (!init.empty()) cfg.pretrain.init = init;
            pipeline::LoadedDataset ds = pipeline::load_dataset(data_dir);
            const pretrain::PretrainResult res = pipeline::run_pretrain(cfg, ds);
            std::printf("final loss %.6f over %d epochs, checkpoint %s\n", res.final_loss,
                        static_cast<int>(res.log.size()), res.checkpoint_path.c_str());
            if (res.probe_warning)
                std::printf("warning: probe loss failed to decrease; inspect %s\n",
                            (cfg.out_dir + "/pretrain_metrics.jsonl").c_str());
            return 0;
        }
        if (c_fin->parsed()) {
            if (c_fin->count("--seed")) cfg.finetune.seed = seed;
            if (!lt_loss.empty()) cfg.finetune.lt_loss = lt_loss == "on";
            if (!init.empty()) cfg.finetune.init = init;
            pipeline::LoadedDataset ds = pipeline::load_dataset(data_dir);
            const finetune::FinetuneResult res = pipeline::run_finetune(cfg, ds);
            std::printf("final loss %.6f, train top-1 verb %.3f noun %.3f\n", res.final_loss,
                        res.train_verb_accuracy, res.train_noun_accuracy);
            std::printf("checkpoint %s\n", res.checkpoint_path.c_str());
            return 0;
        }
        if (c_fus->parsed()) {
            if (c_fus->count("--seed")) cfg.fuse.seed = seed;
            if (c_fus->count("--pilot-fraction")) cfg.fuse.pilot_fraction = pilot_fraction;
            if (!grid_text.empty()) cfg.fuse.grid = parse_grid_text(grid_text);
            pipeline::LoadedDataset ds = pipeline::load_dataset(data_dir);
            const std::vector<fusion::LogitRecord> oic = finetune::load_logit_records(oic_path);
            const std::vector<fusion::LogitRecord> base = finetune::load_logit_records(base_path);
            const pipeline::FuseRun res = pipeline::run_fuse(cfg, ds, oic, base);
            std::printf("weights verb (%.2f, %.2f) noun (%.2f, %.2f)\n",
                        res.weights.verb.alpha_oic, res.weights.verb.alpha_base,
                        res.weights.noun.alpha_oic, res.weights.noun.alpha_base);
            std::printf("fused logits %s\n", res.fused_path.c_str());
            return 0;
        }
        if (c_evl->parsed()) {
            pipeline::LoadedDataset ds = pipeline::load_dataset(data_dir);
            std::filesystem::create_directories(cfg.out_dir);
            for (const std::string& path : logit_paths) {
                const std::vector<fusion::LogitRecord> records =
                    finetune::load_logit_records(path);
                const fusion::EvalReport report = pipeline::run_eval(ds, records);
                if (logit_paths.size() > 1) std::printf("== %s ==\n", path.c_str());
                std::fputs(report.to_table().c_str(), stdout);
                const std::string stem =
                    std::filesystem::path(path).stem().string();
                data::write_text_file(cfg.out_dir + "/eval_" + stem + ".txt",
                                      report.to_table());
                data::write_text_file(cfg.out_dir + "/eval_" + stem + ".json",
                                      report.to_json() + "\n");
            }
            return 0;
        }
        if (c_abl->parsed()) {
            if (c_abl->count("--seed")) {
                cfg.pretrain.seed = seed;
                cfg.finetune.seed = seed;
                cfg.fuse.seed = seed;
            }
            const pipeline::AblateResult res = pipeline::run_ablate(cfg);
            std::fputs(res.table_text.c_str(), stdout);
            return 0;
        }
        throw ConfigError("no subcommand given");
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
