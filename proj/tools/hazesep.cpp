#include <cstdint>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hazesep/commands.hpp"
#include "hazesep/config.hpp"
#include "hazesep/errors.hpp"

namespace {

namespace fs = std::filesystem;
namespace cmd = hazesep::commands;

enum ExitCode : int { kOk = 0, kConfig = 2, kIo = 3, kNumeric = 4 };

struct Common {
    std::optional<fs::path> config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;

    hazesep::RunConfig load() const {
        hazesep::RunConfig cfg = config ? hazesep::load_config(*config) : hazesep::RunConfig{};
        if (seed) cfg.seed = *seed;
        if (threads) cfg.threads = *threads;
        cfg.sync();
        return cfg;
    }
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--config", c.config, "JSON config file; absent keys take defaults");
    app->add_option("--seed", c.seed, "override the root seed");
    app->add_option("--threads", c.threads, "worker threads, 0 = all cores");
    app->footer(hazesep::config_help());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hazesep: ultrasound dehazing by joint diffusion posterior sampling"};
    app.require_subcommand(1);
    app.footer(hazesep::config_help());

    Common common;
    std::function<void()> run;

    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    add_common(synth, common);
    std::optional<fs::path> synth_out;
    std::optional<std::size_t> synth_frames;
    std::optional<std::vector<double>> synth_levels;
    synth->add_option("--out", synth_out, "dataset directory (default paths.dataset)");
    synth->add_option("--frames", synth_frames, "frames to generate (default synth.n_frames)");
    synth->add_option("--levels", synth_levels, "haze levels (default synth.levels)")->expected(0, -1);
    synth->callback([&] {
        run = [&] {
            auto cfg = common.load();
            if (synth_frames) cfg.synth.n_frames = *synth_frames;
            if (synth_levels) cfg.synth.levels = *synth_levels;
            const auto s = cmd::cmd_synth(cfg, synth_out.value_or(cfg.paths.dataset));
            std::cout << "wrote " << s.clean << " clean, " << s.haze << " haze, " << s.mixed
                      << " mixed frames; manifest " << s.manifest.string() << "\n";
        };
    });

    auto* train = app.add_subcommand("train", "train the tissue or haze score model");
    add_common(train, common);
    std::string prior;
    std::optional<fs::path> train_dataset, train_out;
    train->add_option("--prior", prior, "tissue or haze")->required();
    train->add_option("--dataset", train_dataset, "dataset directory (default paths.dataset)");
    train->add_option("--out", train_out, "checkpoint (default paths.checkpoints/<prior>.hsnet)");
    train->callback([&] {
        run = [&] {
            const auto cfg = common.load();
            const auto which = cmd::prior_from_string(prior);
            const fs::path out = train_out.value_or(cfg.paths.checkpoints / (prior + ".hsnet"));
            const auto s = cmd::cmd_train(cfg, train_dataset.value_or(cfg.paths.dataset), which, out,
                                          &std::cerr);
            std::cout << "trained " << prior << " for " << s.steps << " steps, loss " << s.first_loss
                      << " -> " << s.last_loss << "; wrote " << s.checkpoint.string() << "\n";
        };
    });

    auto* dehaze = app.add_subcommand("dehaze", "dehaze one RF frame");
    add_common(dehaze, common);
    fs::path dehaze_in;
    std::optional<fs::path> dehaze_tissue, dehaze_haze, dehaze_out;
    dehaze->add_option("--input", dehaze_in, "measurement URF1 file")->required();
    dehaze->add_option("--tissue", dehaze_tissue, "tissue prior (default paths.checkpoints/tissue.hsnet)");
    dehaze->add_option("--haze", dehaze_haze, "haze prior (default paths.checkpoints/haze.hsnet)");
    dehaze->add_option("--out", dehaze_out, "output directory (default paths.outputs)");
    dehaze->callback([&] {
        run = [&] {
            const auto cfg = common.load();
            const auto o = cmd::cmd_dehaze(cfg, dehaze_in,
                                           dehaze_tissue.value_or(cfg.paths.checkpoints / "tissue.hsnet"),
                                           dehaze_haze.value_or(cfg.paths.checkpoints / "haze.hsnet"),
                                           dehaze_out.value_or(cfg.paths.outputs));
            std::cout << "wrote " << o.x_hat.string() << ", " << o.h_hat.string() << ", "
                      << o.diagnostics.string() << "\n";
        };
    });

    auto* eval = app.add_subcommand("eval", "compute metrics over an evaluation manifest");
    add_common(eval, common);
    fs::path eval_manifest;
    std::optional<fs::path> eval_out;
    eval->add_option("--manifest", eval_manifest, "pairs manifest JSON")->required();
    eval->add_option("--out", eval_out, "metrics CSV (default paths.outputs/metrics.csv)");
    eval->callback([&] {
        run = [&] {
            const auto cfg = common.load();
            const fs::path out = eval_out.value_or(cfg.paths.outputs / "metrics.csv");
            const auto rows = cmd::cmd_eval(cfg, eval_manifest, out, &std::cerr);
            std::cout << "wrote " << rows.size() << " rows to " << out.string() << "\n";
        };
    });

    auto* bmode = app.add_subcommand("bmode", "export an RF frame as a B-mode PNG");
    add_common(bmode, common);
    fs::path bmode_in, bmode_out;
    std::optional<double> bmode_dr;
    std::optional<fs::path> bmode_ref;
    bmode->add_option("--input", bmode_in, "URF1 file")->required();
    bmode->add_option("--output", bmode_out, "PNG file")->required();
    bmode->add_option("--dynamic-range", bmode_dr, "dB (default eval.dynamic_range)");
    bmode->add_option("--reference", bmode_ref, "URF1 frame whose brightness to match");
    bmode->callback([&] {
        run = [&] {
            const auto cfg = common.load();
            cmd::cmd_bmode(bmode_in, bmode_out, bmode_dr.value_or(cfg.eval.dynamic_range), bmode_ref);
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfig;
    }

    try {
        run();
        return kOk;
    } catch (const hazesep::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid argument: " << e.what() << "\n";
        return kConfig;
    } catch (const hazesep::IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return kIo;
    } catch (const hazesep::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumeric;
    }
}
