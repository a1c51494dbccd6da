#include "hazesep/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include "hazesep/errors.hpp"

namespace hazesep {

namespace {

using nlohmann::json;

struct Entry {
    std::string section;
    std::string key;
    std::string help;
    std::function<json(const RunConfig&)> get;
    std::function<void(RunConfig&, const json&)> set;
};

std::string dotted(const std::string& section, const std::string& key) {
    return section.empty() ? key : section + "." + key;
}

[[noreturn]] void bad_type(const std::string& name, const char* expected, const json& v) {
    throw ConfigError("config: '" + name + "' must be " + expected + ", got " + v.dump());
}

std::uint64_t as_uint(const std::string& name, const json& v) {
    if (!v.is_number_unsigned()) bad_type(name, "a non-negative integer", v);
    return v.get<std::uint64_t>();
}

std::size_t as_size(const std::string& name, const json& v) {
    return static_cast<std::size_t>(as_uint(name, v));
}

double as_double(const std::string& name, const json& v) {
    if (!v.is_number()) bad_type(name, "a number", v);
    return v.get<double>();
}

bool as_bool(const std::string& name, const json& v) {
    if (!v.is_boolean()) bad_type(name, "true or false", v);
    return v.get<bool>();
}

std::string as_string(const std::string& name, const json& v) {
    if (!v.is_string()) bad_type(name, "a string", v);
    return v.get<std::string>();
}

std::optional<std::size_t> as_optional_size(const std::string& name, const json& v) {
    if (v.is_null()) return std::nullopt;
    return as_size(name, v);
}

std::vector<double> as_double_list(const std::string& name, const json& v) {
    if (!v.is_array()) bad_type(name, "an array of numbers", v);
    std::vector<double> out;
    for (const auto& e : v) out.push_back(as_double(name, e));
    return out;
}

json optional_to_json(const std::optional<std::size_t>& v) { return v ? json(*v) : json(nullptr); }

std::string to_string(dehaze::MeasurementLevel m) {
    return m == dehaze::MeasurementLevel::next ? "next" : "current";
}

dehaze::MeasurementLevel measurement_level_from_string(const std::string& s) {
    if (s == "current") return dehaze::MeasurementLevel::current;
    if (s == "next") return dehaze::MeasurementLevel::next;
    throw ConfigError("config: dehaze.measurement_level must be \"current\" or \"next\", got \"" + s +
                      "\"");
}

// Entry for a plain RunConfig member converted by CONV.
#define HS_ENTRY(SECTION, KEY, FIELD, CONV, HELP)                                          \
    Entry {                                                                                \
        SECTION, KEY, HELP, [](const RunConfig& c) { return json(c.FIELD); },              \
            [](RunConfig& c, const json& v) { c.FIELD = CONV(dotted(SECTION, KEY), v); } \
    }

const std::vector<Entry>& entries() {
    static const std::vector<Entry> table = [] {
        std::vector<Entry> t{
            HS_ENTRY("", "seed", seed, as_uint, "root seed; every random draw derives from it"),
            HS_ENTRY("", "threads", threads, as_size, "worker threads, 0 = all cores"),
            HS_ENTRY("", "init_seed", init_seed, as_uint, "seed of the network weight initialization"),

            HS_ENTRY("schedule", "sigma", schedule.sigma, as_double, "VE-SDE sigma"),
            HS_ENTRY("schedule", "steps_T", schedule.steps, as_size, "discretization steps over [0, 1]"),
            HS_ENTRY("schedule", "tau", schedule.tau, as_double, "reverse diffusion start time"),

            HS_ENTRY("compand", "mu", compand.mu, as_double, "mu-law strength"),

            HS_ENTRY("dehaze", "lambda", dehaze.lambda_x, as_double, "tissue data-consistency step"),
            HS_ENTRY("dehaze", "kappa", dehaze.kappa_h, as_double, "haze data-consistency step"),
            HS_ENTRY("dehaze", "gamma", dehaze.gamma, as_double, "haze amplitude in y = x + gamma h"),
            HS_ENTRY("dehaze", "independent_init", dehaze.independent_init, as_bool,
                     "initialize h from its own noise instead of copying x"),
            HS_ENTRY("dehaze", "frozen_path", dehaze.frozen_path, as_bool,
                     "one noise draw for every corrupted measurement"),
            HS_ENTRY("dehaze", "dc_trust", dehaze.dc_trust, as_double,
                     "bound on the data-consistency move per sample, in units of |r|; 0 = off"),

            HS_ENTRY("patch", "rows", patch.patch_rows, as_size, "patch height (axial)"),
            HS_ENTRY("patch", "cols", patch.patch_cols, as_size, "patch width (lateral)"),
            HS_ENTRY("patch", "overlap_fraction", patch.overlap_fraction, as_double,
                     "overlap as a fraction of the patch size"),

            HS_ENTRY("training", "epochs", training.epochs, as_size, "passes over the patch set"),
            HS_ENTRY("training", "batch_size", training.batch_size, as_size, "patches per step"),
            HS_ENTRY("training", "learning_rate", training.learning_rate, as_double, "Adam step size"),
            HS_ENTRY("training", "beta1", training.beta1, as_double, "Adam first-moment decay"),
            HS_ENTRY("training", "beta2", training.beta2, as_double, "Adam second-moment decay"),
            HS_ENTRY("training", "epsilon", training.epsilon, as_double, "Adam denominator guard"),
            HS_ENTRY("training", "t_min", training.t_min, as_double, "smallest training time"),
            HS_ENTRY("training", "augment", training.augment, as_bool,
                     "random lateral flip and brightness offset"),
            HS_ENTRY("training", "cosine_decay", training.cosine_decay, as_bool,
                     "cosine learning-rate decay to 0"),

            HS_ENTRY("network", "channels", network.channels, as_size, "hidden channels"),
            HS_ENTRY("network", "layers", network.layers, as_size, "convolution layers"),
            HS_ENTRY("network", "kernel_rows", network.kernel_rows, as_size, "odd axial kernel size"),
            HS_ENTRY("network", "kernel_cols", network.kernel_cols, as_size,
                     "odd lateral kernel size; 1 x 1 = pointwise"),
            HS_ENTRY("network", "depth_channel", network.depth_channel, as_bool,
                     "feed a depth coordinate plane"),

            HS_ENTRY("phantom", "rows", phantom.rows, as_size, "frame rows"),
            HS_ENTRY("phantom", "cols", phantom.cols, as_size, "frame columns"),
            HS_ENTRY("phantom", "pulse_frequency", phantom.pulse_frequency, as_double,
                     "cycles per axial sample"),
            HS_ENTRY("phantom", "pulse_bandwidth", phantom.pulse_bandwidth, as_double,
                     "std of the pulse envelope, samples"),
            HS_ENTRY("phantom", "lateral_psf", phantom.lateral_psf, as_double,
                     "std of the lateral PSF, samples"),
            HS_ENTRY("phantom", "scatterer_density", phantom.scatterer_density, as_double,
                     "probability of a scatterer per sample"),
            HS_ENTRY("phantom", "ellipse_center_row", phantom.ellipse_center_row, as_double,
                     "anechoic ellipse center, fraction of rows"),
            HS_ENTRY("phantom", "ellipse_center_col", phantom.ellipse_center_col, as_double,
                     "anechoic ellipse center, fraction of cols"),
            HS_ENTRY("phantom", "ellipse_semi_rows", phantom.ellipse_semi_rows, as_double,
                     "ellipse semi-axis, fraction of rows"),
            HS_ENTRY("phantom", "ellipse_semi_cols", phantom.ellipse_semi_cols, as_double,
                     "ellipse semi-axis, fraction of cols"),
            HS_ENTRY("phantom", "wall_begin", phantom.wall_begin, as_double,
                     "wall band start, fraction of rows"),
            HS_ENTRY("phantom", "wall_end", phantom.wall_end, as_double, "wall band end, fraction of rows"),
            HS_ENTRY("phantom", "wall_gain", phantom.wall_gain, as_double, "wall scatterer amplitude"),

            HS_ENTRY("haze", "lateral_correlation", haze.lateral_correlation, as_double,
                     "lateral correlation length, samples"),
            HS_ENTRY("haze", "axial_correlation", haze.axial_correlation, as_double,
                     "axial envelope correlation length, samples"),
            HS_ENTRY("haze", "depth_decay", haze.depth_decay, as_double,
                     "rows over which haze falls by 1/e"),
            HS_ENTRY("haze", "pulse_frequency", haze.pulse_frequency, as_double, "band-pass center"),

            HS_ENTRY("synth", "n_frames", synth.n_frames, as_size, "frames per dataset"),
            HS_ENTRY("synth", "levels", synth.levels, as_double_list, "haze levels of the mixed frames"),

            HS_ENTRY("eval", "gcnr_bins", eval.gcnr_bins, as_size, "histogram bins of gCNR"),
            HS_ENTRY("eval", "gcnr_on_db", eval.gcnr_on_db, as_bool,
                     "gCNR on dB values (false: linear envelope)"),
            HS_ENTRY("eval", "dynamic_range", eval.dynamic_range, as_double, "B-mode dynamic range, dB"),
        };

        // Fields that need a conversion other than a plain member copy.
        t.push_back({"dehaze", "measurement_level",
                     "noise level of the corrupted measurement: current or next",
                     [](const RunConfig& c) { return json(to_string(c.dehaze.measurement_level)); },
                     [](RunConfig& c, const json& v) {
                         c.dehaze.measurement_level =
                             measurement_level_from_string(as_string("dehaze.measurement_level", v));
                     }});
        t.push_back({"patch", "overlap_rows_px", "explicit row overlap in pixels, null = from fraction",
                     [](const RunConfig& c) { return optional_to_json(c.patch.overlap_rows_px); },
                     [](RunConfig& c, const json& v) {
                         c.patch.overlap_rows_px = as_optional_size("patch.overlap_rows_px", v);
                     }});
        t.push_back({"patch", "overlap_cols_px", "explicit column overlap in pixels, null = from fraction",
                     [](const RunConfig& c) { return optional_to_json(c.patch.overlap_cols_px); },
                     [](RunConfig& c, const json& v) {
                         c.patch.overlap_cols_px = as_optional_size("patch.overlap_cols_px", v);
                     }});
        t.push_back({"network", "conditioning", "noise conditioning: preconditioned or output_scale",
                     [](const RunConfig& c) { return json(to_string(c.network.conditioning)); },
                     [](RunConfig& c, const json& v) {
                         c.network.conditioning =
                             conditioning_from_string(as_string("network.conditioning", v));
                     }});
        t.push_back({"network", "precision", "network arithmetic: float64 or float32",
                     [](const RunConfig& c) { return json(to_string(c.network.precision)); },
                     [](RunConfig& c, const json& v) {
                         c.network.precision = precision_from_string(as_string("network.precision", v));
                     }});
        for (auto [key, member] : {std::pair{"dataset", &Paths::dataset},
                                   std::pair{"checkpoints", &Paths::checkpoints},
                                   std::pair{"outputs", &Paths::outputs}}) {
            const std::string k = key;
            t.push_back({"paths", k, k + " directory",
                         [member](const RunConfig& c) { return json((c.paths.*member).string()); },
                         [member, k](RunConfig& c, const json& v) {
                             c.paths.*member = as_string("paths." + k, v);
                         }});
        }

        // Display order: top level first, then sections as they first appear.
        std::vector<std::string> order;
        for (const auto& e : t) {
            if (std::find(order.begin(), order.end(), e.section) == order.end()) order.push_back(e.section);
        }
        std::stable_sort(t.begin(), t.end(), [&](const Entry& a, const Entry& b) {
            return std::find(order.begin(), order.end(), a.section) <
                   std::find(order.begin(), order.end(), b.section);
        });
        return t;
    }();
    return table;
}

#undef HS_ENTRY

void validate(const RunConfig& c) {
    try {
        c.schedule.validate();
        c.compand.validate();
        c.patch.validate();
        c.training.validate();
        c.network.validate();
        c.phantom.validate();
        c.haze.validate();
        c.dehaze.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& ex) {
        throw ConfigError(std::string("config: ") + ex.what());
    }
    for (double level : c.synth.levels) {
        if (!(level >= 0.0 && std::isfinite(level))) {
            throw ConfigError("config: synth.levels must be finite and non-negative");
        }
    }
    if (c.eval.gcnr_bins < 2) throw ConfigError("config: eval.gcnr_bins must be at least 2");
    if (!(c.eval.dynamic_range > 0.0)) throw ConfigError("config: eval.dynamic_range must be positive");
}

}  // namespace

void RunConfig::sync() {
    const std::size_t workers =
        threads == 0 ? std::max<std::size_t>(1, std::thread::hardware_concurrency()) : threads;
    dehaze.schedule = schedule;
    dehaze.compand = compand;
    dehaze.patch = patch;
    dehaze.seed = seed;
    dehaze.threads = workers;
    training.threads = workers;
    network.patch_rows = patch.patch_rows;
    network.patch_cols = patch.patch_cols;
}

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = [] {
        const RunConfig defaults;
        std::vector<ConfigKey> out;
        for (const auto& e : entries()) out.push_back({e.section, e.key, e.get(defaults), e.help});
        return out;
    }();
    return keys;
}

RunConfig config_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
    std::map<std::string, std::map<std::string, const Entry*>> index;
    for (const auto& e : entries()) index[e.section][e.key] = &e;

    RunConfig cfg;
    for (const auto& [name, value] : j.items()) {
        if (index[""].count(name)) {
            index[""][name]->set(cfg, value);
            continue;
        }
        auto sec = index.find(name);
        if (sec == index.end() || name.empty()) throw ConfigError("config: unknown key '" + name + "'");
        if (!value.is_object()) throw ConfigError("config: section '" + name + "' must be an object");
        for (const auto& [key, v] : value.items()) {
            auto it = sec->second.find(key);
            if (it == sec->second.end()) {
                throw ConfigError("config: unknown key '" + dotted(name, key) + "'");
            }
            it->second->set(cfg, v);
        }
    }
    cfg.sync();
    validate(cfg);
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& ex) {
        throw ConfigError("config " + path.string() + ": " + ex.what());
    }
    return config_from_json(j);
}

json config_to_json(const RunConfig& cfg) {
    json out = json::object();
    for (const auto& e : entries()) {
        if (e.section.empty()) {
            out[e.key] = e.get(cfg);
        } else {
            out[e.section][e.key] = e.get(cfg);
        }
    }
    return out;
}

std::string config_help() {
    std::ostringstream os;
    os << "Config keys (JSON; absent keys take these defaults, unknown keys are errors):\n";
    for (const auto& k : config_keys()) {
        os << "  " << dotted(k.section, k.key) << " = " << k.default_value.dump() << "\n      "
           << k.help << "\n";
    }
    return os.str();
}

}  // namespace hazesep
