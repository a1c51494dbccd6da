#include "hazesep/commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "hazesep/errors.hpp"
#include "hazesep/imaging.hpp"
#include "hazesep/metrics.hpp"
#include "hazesep/phantom.hpp"
#include "hazesep/score_net.hpp"
#include "hazesep/urf_io.hpp"

namespace hazesep::commands {

namespace {

using nlohmann::json;

constexpr char kDatasetFormat[] = "hazesep-dataset-1";

std::string frame_tag(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04zu", i);
    return buf;
}

std::string level_tag(double level) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", level);
    return buf;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
    }
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& ex) {
        throw IoError(path.string() + ": " + ex.what());
    }
}

void write_json_file(const fs::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    out << j.dump(2) << "\n";
    if (!out) throw IoError("cannot write " + path.string());
}

std::pair<metrics::RoiMask, metrics::RoiMask> phantom_masks(const phantom::PhantomSpec& p) {
    metrics::RoiMask a(p.rows, p.cols, "A"), b(p.rows, p.cols, "B");
    for (std::size_t r = 0; r < p.rows; ++r) {
        for (std::size_t c = 0; c < p.cols; ++c) {
            if (p.in_ellipse(r, c)) a.set(r, c);
            if (p.in_wall(r)) b.set(r, c);
        }
    }
    return {a, b};
}

void check_net_shape(const ScoreModel& model, const RunConfig& cfg, const fs::path& path) {
    const auto* net = dynamic_cast<const TrainableScoreNet*>(&model);
    if (!net) return;
    const auto& a = net->arch();
    if (a.patch_rows != cfg.patch.patch_rows || a.patch_cols != cfg.patch.patch_cols) {
        throw ConfigError(path.string() + ": checkpoint patch shape " + std::to_string(a.patch_rows) +
                          "x" + std::to_string(a.patch_cols) + " does not match configured " +
                          std::to_string(cfg.patch.patch_rows) + "x" +
                          std::to_string(cfg.patch.patch_cols));
    }
    if (net->schedule().sigma != cfg.schedule.sigma) {
        throw ConfigError(path.string() + ": checkpoint was trained with sigma " +
                          std::to_string(net->schedule().sigma));
    }
}

fs::path resolve(const fs::path& base, const fs::path& p) { return p.is_absolute() ? p : base / p; }

}  // namespace

SynthSummary cmd_synth(const RunConfig& cfg, const fs::path& out_dir) {
    ensure_dir(out_dir / "frames");
    ensure_dir(out_dir / "masks");
    const SeededRng root(cfg.seed);
    const auto ds = phantom::make_dataset(cfg.phantom, cfg.haze, cfg.synth.n_frames, cfg.patch,
                                          cfg.compand.mu, root, cfg.dehaze.threads);

    json manifest = {{"format", kDatasetFormat},
                     {"seed", cfg.seed},
                     {"config", config_to_json(cfg)},
                     {"patch_rows", cfg.patch.patch_rows},
                     {"patch_cols", cfg.patch.patch_cols},
                     {"levels", cfg.synth.levels}};
    if (!ds.tissue_patches.empty()) {
        write_urf_file(out_dir / "tissue_patches.urf", phantom::stack_patches(ds.tissue_patches));
        write_urf_file(out_dir / "haze_patches.urf", phantom::stack_patches(ds.haze_patches));
    }
    manifest["tissue_patches"] = {{"file", "tissue_patches.urf"}, {"count", ds.tissue_patches.size()}};
    manifest["haze_patches"] = {{"file", "haze_patches.urf"}, {"count", ds.haze_patches.size()}};

    SynthSummary summary;
    json frames = json::array();
    std::vector<EvalPair> pairs;
    for (std::size_t i = 0; i < ds.frames.size(); ++i) {
        const auto& f = ds.frames[i];
        const std::string clean = "frames/clean_" + frame_tag(i) + ".urf";
        const std::string haze = "frames/haze_" + frame_tag(i) + ".urf";
        write_urf_file(out_dir / clean, f.tissue);
        write_urf_file(out_dir / haze, f.haze);
        summary.clean++;
        summary.haze++;
        json mixed = json::array();
        for (double level : cfg.synth.levels) {
            const std::string name = "frames/mixed_L" + level_tag(level) + "_" + frame_tag(i) + ".urf";
            write_urf_file(out_dir / name, phantom::mix(f.tissue, f.haze, level));
            mixed.push_back({{"level", level}, {"file", name}});
            summary.mixed++;
            pairs.push_back({i, level, clean, name, std::nullopt, "masks/A.png", "masks/B.png"});
        }
        frames.push_back({{"index", i}, {"clean", clean}, {"haze", haze}, {"mixed", mixed}});
    }
    manifest["frames"] = frames;

    const auto [mask_a, mask_b] = phantom_masks(cfg.phantom);
    metrics::write_mask_png(mask_a, out_dir / "masks/A.png");
    metrics::write_mask_png(mask_b, out_dir / "masks/B.png");
    manifest["masks"] = {{"A", "masks/A.png"}, {"B", "masks/B.png"}};
    // measurement-only evaluation manifest; add "dehazed" entries to score outputs
    write_eval_manifest(out_dir / "pairs.json", pairs);
    manifest["pairs"] = "pairs.json";

    summary.manifest = out_dir / "manifest.json";
    write_json_file(summary.manifest, manifest);
    return summary;
}

std::string to_string(Prior p) { return p == Prior::tissue ? "tissue" : "haze"; }

Prior prior_from_string(const std::string& name) {
    if (name == "tissue") return Prior::tissue;
    if (name == "haze") return Prior::haze;
    throw ConfigError("prior must be 'tissue' or 'haze', got '" + name + "'");
}

TrainSummary cmd_train(const RunConfig& cfg, const fs::path& dataset_dir, Prior which,
                       const fs::path& out_checkpoint, std::ostream* progress) {
    const json manifest = read_json_file(dataset_dir / "manifest.json");
    if (manifest.value("format", std::string()) != kDatasetFormat) {
        throw IoError((dataset_dir / "manifest.json").string() + ": not a dataset manifest");
    }
    const std::size_t rows = manifest.at("patch_rows").get<std::size_t>();
    const std::size_t cols = manifest.at("patch_cols").get<std::size_t>();
    if (rows != cfg.patch.patch_rows || cols != cfg.patch.patch_cols) {
        throw ConfigError("dataset patches are " + std::to_string(rows) + "x" + std::to_string(cols) +
                          ", configured patch is " + std::to_string(cfg.patch.patch_rows) + "x" +
                          std::to_string(cfg.patch.patch_cols));
    }
    const json& entry = manifest.at(which == Prior::tissue ? "tissue_patches" : "haze_patches");
    if (entry.at("count").get<std::size_t>() == 0) throw IoError("dataset holds no patches");
    const auto patches = phantom::unstack_patches(
        read_urf_file(dataset_dir / entry.at("file").get<std::string>()), rows);

    TrainableScoreNet net(cfg.network, cfg.schedule, cfg.init_seed);
    SeededRng rng = SeededRng(cfg.seed).child(which == Prior::tissue ? 0 : 1);
    const auto result = dsm::train(net, patches, cfg.training, rng,
                                   [&](std::size_t step, std::size_t total, double loss) {
                                       if (progress && ((step + 1) % 100 == 0 || step + 1 == total)) {
                                           *progress << to_string(which) << " step " << step + 1
                                                     << "/" << total << " loss " << loss << "\n";
                                       }
                                   });

    if (out_checkpoint.has_parent_path()) ensure_dir(out_checkpoint.parent_path());
    TrainSummary summary;
    summary.checkpoint = out_checkpoint;
    summary.loss_csv = out_checkpoint.parent_path() / (out_checkpoint.stem().string() + "_loss.csv");
    summary.steps = result.steps;
    if (!result.loss_curve.empty()) {
        summary.first_loss = result.loss_curve.front();
        summary.last_loss = result.loss_curve.back();
    }
    save_checkpoint(out_checkpoint, net,
                    {{"prior", to_string(which)},
                     {"steps", result.steps},
                     {"seed", cfg.seed},
                     {"init_seed", cfg.init_seed},
                     {"patches", patches.size()}});

    std::ofstream csv(summary.loss_csv, std::ios::binary);
    csv << "step,loss\n";
    char buf[64];
    for (std::size_t i = 0; i < result.loss_curve.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.10g\n", i, result.loss_curve[i]);
        csv << buf;
    }
    if (!csv) throw IoError("cannot write " + summary.loss_csv.string());
    return summary;
}

std::unique_ptr<ScoreModel> load_score_model(const fs::path& path, const RunConfig& cfg) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    char head[7] = {};
    in.read(head, sizeof head);
    if (in.gcount() == sizeof head && std::string(head, sizeof head) == "HSNET1\n") {
        in.close();
        return std::make_unique<TrainableScoreNet>(load_checkpoint(path));
    }
    in.close();
    const json j = read_json_file(path);
    if (!j.is_object() || j.value("analytic", std::string()) != "gaussian") {
        throw IoError(path.string() + ": neither an .hsnet checkpoint nor an analytic prior");
    }
    try {
        const double mean = j.at("mean").get<double>();
        const double variance = j.at("variance").get<double>();
        if (!(variance > 0.0)) throw IoError(path.string() + ": variance must be positive");
        return std::make_unique<AnalyticGaussianScore>(mean, variance, cfg.schedule);
    } catch (const json::exception& ex) {
        throw IoError(path.string() + ": " + ex.what());
    }
}

DehazeOutputs cmd_dehaze(const RunConfig& cfg, const fs::path& measurement,
                         const fs::path& tissue_ckpt, const fs::path& haze_ckpt,
                         const fs::path& out_dir) {
    const RFGrid y = read_urf_file(measurement);
    const auto tissue = load_score_model(tissue_ckpt, cfg);
    const auto haze = load_score_model(haze_ckpt, cfg);
    check_net_shape(*tissue, cfg, tissue_ckpt);
    check_net_shape(*haze, cfg, haze_ckpt);

    const auto result = dehaze::dehaze(y, *tissue, *haze, cfg.dehaze);

    ensure_dir(out_dir);
    DehazeOutputs out{out_dir / "x_hat.urf", out_dir / "h_hat.urf", out_dir / "diagnostics.csv"};
    write_urf_file(out.x_hat, result.x_rf);
    write_urf_file(out.h_hat, result.h_rf);
    dehaze::write_diagnostics_csv(out.diagnostics, result.diagnostics);
    return out;
}

std::vector<EvalPair> read_eval_manifest(const fs::path& path) {
    const json j = read_json_file(path);
    std::vector<EvalPair> pairs;
    try {
        for (const auto& e : j.at("pairs")) {
            EvalPair p;
            p.frame = e.at("frame").get<std::size_t>();
            p.level = e.at("level").get<double>();
            p.clean = e.at("clean").get<std::string>();
            p.measurement = e.at("measurement").get<std::string>();
            if (e.contains("dehazed")) p.dehazed = e.at("dehazed").get<std::string>();
            if (e.contains("mask_a")) p.mask_a = e.at("mask_a").get<std::string>();
            if (e.contains("mask_b")) p.mask_b = e.at("mask_b").get<std::string>();
            pairs.push_back(std::move(p));
        }
    } catch (const json::exception& ex) {
        throw IoError(path.string() + ": bad evaluation manifest: " + ex.what());
    }
    return pairs;
}

void write_eval_manifest(const fs::path& path, const std::vector<EvalPair>& pairs) {
    json arr = json::array();
    for (const auto& p : pairs) {
        json e = {{"frame", p.frame},
                  {"level", p.level},
                  {"clean", p.clean.generic_string()},
                  {"measurement", p.measurement.generic_string()}};
        if (p.dehazed) e["dehazed"] = p.dehazed->generic_string();
        if (p.mask_a) e["mask_a"] = p.mask_a->generic_string();
        if (p.mask_b) e["mask_b"] = p.mask_b->generic_string();
        arr.push_back(std::move(e));
    }
    write_json_file(path, {{"pairs", arr}});
}

std::vector<MetricRow> evaluate_pairs(const RunConfig& cfg, const std::vector<EvalPair>& pairs,
                                      const fs::path& base_dir, std::ostream* warn) {
    const double dr = cfg.eval.dynamic_range;
    std::vector<MetricRow> rows;
    auto load_mask = [&](const std::optional<fs::path>& p, const char* label, const EvalPair& pair,
                         const RFGrid& frame) -> std::optional<metrics::RoiMask> {
        const fs::path full = p ? resolve(base_dir, *p) : fs::path();
        if (!p || !fs::exists(full)) {
            if (warn) {
                *warn << "warning: frame " << pair.frame << " level " << pair.level << ": mask "
                      << label << " missing, rows that need it are skipped\n";
            }
            return std::nullopt;
        }
        auto m = metrics::read_mask_png(full, label);
        if (m.rows() != frame.rows() || m.cols() != frame.cols()) {
            throw IoError(full.string() + ": mask shape does not match frame " + frame.shape_string());
        }
        return m;
    };

    for (const auto& pair : pairs) {
        const RFGrid clean = read_urf_file(resolve(base_dir, pair.clean));
        const auto b_clean = imaging::bmode(clean, dr);
        const auto mask_a = load_mask(pair.mask_a, "A", pair, clean);
        const auto mask_b = load_mask(pair.mask_b, "B", pair, clean);
        const auto clean_wall = mask_b ? mask_b->values(b_clean.db) : std::vector<double>{};

        std::vector<std::pair<std::string, fs::path>> images{{"measurement", pair.measurement}};
        if (pair.dehazed) images.emplace_back("dehazed", *pair.dehazed);
        for (const auto& [name, file] : images) {
            const RFGrid rf = read_urf_file(resolve(base_dir, file));
            require_same_shape(rf, clean, "evaluate");
            const auto b = imaging::brightness_match(imaging::bmode(rf, dr), b_clean);
            const std::string frame = std::to_string(pair.frame);
            rows.push_back({frame, pair.level, name, "psnr", metrics::psnr(b, b_clean)});
            if (mask_a && mask_b) {
                const RFGrid& field = cfg.eval.gcnr_on_db ? b.db : imaging::envelope(rf);
                rows.push_back({frame, pair.level, name, "gcnr",
                                metrics::gcnr(field, *mask_a, *mask_b, cfg.eval.gcnr_bins)});
            }
            if (mask_b) {
                rows.push_back({frame, pair.level, name, "ks",
                                metrics::ks_statistic(mask_b->values(b.db), clean_wall)});
                rows.push_back({frame, pair.level, name, "fwhm", metrics::fwhm_lateral(rf, *mask_b)});
            }
        }
    }

    // Summaries keyed by (level, image, metric) in order of first appearance.
    std::vector<std::tuple<double, std::string, std::string>> keys;
    std::map<std::tuple<double, std::string, std::string>, std::vector<double>> groups;
    for (const auto& r : rows) {
        const auto key = std::make_tuple(r.level, r.image, r.metric);
        if (!groups.count(key)) keys.push_back(key);
        groups[key].push_back(r.value);
    }
    for (const auto& key : keys) {
        const auto& v = groups[key];
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double var = 0.0;
        if (v.size() > 1 && std::isfinite(mean)) {
            for (double x : v) var += (x - mean) * (x - mean);
            var /= static_cast<double>(v.size() - 1);
        }
        const auto& [level, image, metric] = key;
        rows.push_back({"mean", level, image, metric, mean});
        rows.push_back({"std", level, image, metric, std::sqrt(var)});
    }
    return rows;
}

std::vector<MetricRow> cmd_eval(const RunConfig& cfg, const fs::path& manifest,
                                const fs::path& out_csv, std::ostream* warn) {
    const auto pairs = read_eval_manifest(manifest);
    const auto rows = evaluate_pairs(cfg, pairs, manifest.parent_path(), warn);
    if (out_csv.has_parent_path()) ensure_dir(out_csv.parent_path());
    std::ofstream out(out_csv, std::ios::binary);
    out << "frame,level,image,metric,value\n";
    char buf[96];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, ",%.6g,", r.level);
        out << r.frame << buf << r.image << "," << r.metric << ",";
        std::snprintf(buf, sizeof buf, "%.10g", r.value);
        out << buf << "\n";
    }
    if (!out) throw IoError("cannot write " + out_csv.string());
    return rows;
}

void cmd_bmode(const fs::path& input, const fs::path& output, double dynamic_range,
               const std::optional<fs::path>& reference) {
    if (!(dynamic_range > 0.0)) throw ConfigError("dynamic range must be positive");
    auto img = imaging::bmode(read_urf_file(input), dynamic_range);
    if (reference) {
        img = imaging::brightness_match(img, imaging::bmode(read_urf_file(*reference), dynamic_range));
    }
    if (output.has_parent_path()) ensure_dir(output.parent_path());
    imaging::export_png(img, output);
}

}  // namespace hazesep::commands
