#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hazesep/compand.hpp"
#include "hazesep/dehazer.hpp"
#include "hazesep/dsm.hpp"
#include "hazesep/patchwork.hpp"
#include "hazesep/phantom.hpp"
#include "hazesep/score_net.hpp"
#include "hazesep/sde.hpp"

namespace hazesep {

struct Paths {
    std::filesystem::path dataset = "dataset";
    std::filesystem::path checkpoints = "checkpoints";
    std::filesystem::path outputs = "outputs";
};

struct SynthSettings {
    std::size_t n_frames = 10;
    std::vector<double> levels{0.1, 0.2, 0.3, 0.4, 0.5};
};

struct EvalSettings {
    std::size_t gcnr_bins = 256;
    /// Histogram gCNR on dB values (true) or on the linear envelope.
    bool gcnr_on_db = true;
    double dynamic_range = 60.0;
};

/// Everything a command needs. Every key has a default; see config_keys().
struct RunConfig {
    std::uint64_t seed = 0;
    std::size_t threads = 0;  // 0 = all available cores
    sde::SdeSchedule schedule;
    compand::CompandParams compand;
    dehaze::DehazeConfig dehaze;  // schedule, compand, patch, seed, threads mirrored in
    patch::PatchLayout patch;
    dsm::TrainConfig training;
    NetArch network;  // patch shape mirrored from `patch`
    std::uint64_t init_seed = 0;
    phantom::PhantomSpec phantom;
    phantom::HazeSpec haze;
    SynthSettings synth;
    EvalSettings eval;
    Paths paths;

    /// Copies the shared settings into the nested component configs.
    void sync();
};

struct ConfigKey {
    std::string section;  // empty for top-level keys
    std::string key;
    nlohmann::json default_value;
    std::string help;
};

/// Documented keys with their defaults, in display order.
const std::vector<ConfigKey>& config_keys();

/// Parses a JSON document. Missing keys take defaults; unknown keys and
/// wrongly typed values throw ConfigError. Values are validated.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);
/// Full configuration with every key, suitable for a manifest.
nlohmann::json config_to_json(const RunConfig& cfg);

/// Human-readable key listing for --help.
std::string config_help();

}  // namespace hazesep
