#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hazesep/config.hpp"
#include "hazesep/dehazer.hpp"
#include "hazesep/score.hpp"

namespace hazesep::commands {

namespace fs = std::filesystem;

/// Dataset directory layout written by cmd_synth:
///   manifest.json
///   tissue_patches.urf, haze_patches.urf   companded patches stacked vertically
///   frames/clean_NNNN.urf, frames/haze_NNNN.urf, frames/mixed_L<level>_NNNN.urf
///   masks/A.png (anechoic ellipse), masks/B.png (wall band)
///   pairs.json   evaluation manifest of every mixed frame, without dehazed entries
struct SynthSummary {
    std::size_t clean = 0;
    std::size_t haze = 0;
    std::size_t mixed = 0;
    fs::path manifest;
};

SynthSummary cmd_synth(const RunConfig& cfg, const fs::path& out_dir);

enum class Prior { tissue, haze };
std::string to_string(Prior p);
Prior prior_from_string(const std::string& name);

struct TrainSummary {
    fs::path checkpoint;
    fs::path loss_csv;
    std::size_t steps = 0;
    double first_loss = 0.0;
    double last_loss = 0.0;
};

/// Trains one prior on the dataset's patches. Writes `<out>` and the loss
/// curve next to it as `<out stem>_loss.csv` (step,loss).
TrainSummary cmd_train(const RunConfig& cfg, const fs::path& dataset_dir, Prior which,
                       const fs::path& out_checkpoint, std::ostream* progress = nullptr);

/// `.hsnet` checkpoints load as trained networks. A JSON file
/// {"analytic": "gaussian", "mean": m, "variance": v} loads the exact score of
/// N(m, v I) under the configured schedule.
std::unique_ptr<ScoreModel> load_score_model(const fs::path& path, const RunConfig& cfg);

struct DehazeOutputs {
    fs::path x_hat;
    fs::path h_hat;
    fs::path diagnostics;
};

/// Writes x_hat.urf, h_hat.urf and diagnostics.csv into out_dir. Trained
/// checkpoints must match the configured patch shape.
DehazeOutputs cmd_dehaze(const RunConfig& cfg, const fs::path& measurement,
                         const fs::path& tissue_ckpt, const fs::path& haze_ckpt,
                         const fs::path& out_dir);

/// One frame of an evaluation manifest. Paths are relative to the manifest.
struct EvalPair {
    std::size_t frame = 0;
    double level = 0.0;
    fs::path clean;
    fs::path measurement;
    std::optional<fs::path> dehazed;
    std::optional<fs::path> mask_a;
    std::optional<fs::path> mask_b;
};

std::vector<EvalPair> read_eval_manifest(const fs::path& path);
void write_eval_manifest(const fs::path& path, const std::vector<EvalPair>& pairs);

struct MetricRow {
    std::string frame;  // frame index, or "mean" / "std" for summaries
    double level = 0.0;
    std::string image;  // "measurement" or "dehazed"
    std::string metric;  // psnr, gcnr, ks, fwhm
    double value = 0.0;
};

/// Per frame and image: PSNR against the clean B-mode (brightness matched),
/// gCNR between masks A and B, KS of the wall (B) dB values against the clean
/// frame, lateral FWHM in the wall. Rows needing a missing mask are skipped
/// with a warning on `warn`. Summary rows (mean, std) follow per level, image
/// and metric.
std::vector<MetricRow> evaluate_pairs(const RunConfig& cfg, const std::vector<EvalPair>& pairs,
                                      const fs::path& base_dir, std::ostream* warn = nullptr);

std::vector<MetricRow> cmd_eval(const RunConfig& cfg, const fs::path& manifest,
                                const fs::path& out_csv, std::ostream* warn = nullptr);

/// envelope -> log compression -> optional brightness match to `reference`
/// -> 8-bit PNG.
void cmd_bmode(const fs::path& input, const fs::path& output, double dynamic_range,
               const std::optional<fs::path>& reference = std::nullopt);

}  // namespace hazesep::commands
