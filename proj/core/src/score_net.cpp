#include "hazesep/score_net.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <type_traits>

#include <Eigen/Dense>

#include "binary_io.hpp"
#include "hazesep/errors.hpp"
#include "hazesep/rng.hpp"

namespace hazesep {

namespace {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<Mat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const Mat<T>>;
template <typename T>
using VecMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;
template <typename T>
using ConstVecMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;

constexpr char kCheckpointMagic[] = "HSNET1\n";

struct LayerShape {
    std::size_t in;
    std::size_t out;
    std::size_t weight_offset;
    std::size_t bias_offset;
};

std::vector<LayerShape> layer_shapes(const NetArch& a) {
    std::vector<LayerShape> shapes;
    std::size_t offset = 0;
    for (std::size_t l = 0; l < a.layers; ++l) {
        const std::size_t in = l == 0 ? a.input_channels() : a.channels;
        const std::size_t out = l + 1 == a.layers ? 1 : a.channels;
        const std::size_t fan_in = in * a.kernel_rows * a.kernel_cols;
        shapes.push_back({in, out, offset, offset + out * fan_in});
        offset += out * fan_in + out;
    }
    return shapes;
}

// Rows of the result are (channel, ky, kx) taps; columns are pixels.
template <typename T>
void im2col(const Mat<T>& act, std::size_t rows, std::size_t cols, std::size_t kr, std::size_t kc,
            Mat<T>& out) {
    const std::size_t channels = static_cast<std::size_t>(act.rows());
    const auto pad_r = static_cast<std::ptrdiff_t>(kr / 2);
    const auto pad_c = static_cast<std::ptrdiff_t>(kc / 2);
    out.setZero(static_cast<Eigen::Index>(channels * kr * kc), static_cast<Eigen::Index>(rows * cols));
    for (std::size_t c = 0; c < channels; ++c) {
        const T* src = act.row(static_cast<Eigen::Index>(c)).data();
        for (std::size_t ky = 0; ky < kr; ++ky) {
            for (std::size_t kx = 0; kx < kc; ++kx) {
                T* dst = out.row(static_cast<Eigen::Index>((c * kr + ky) * kc + kx)).data();
                const auto dy = static_cast<std::ptrdiff_t>(ky) - pad_r;
                const auto dx = static_cast<std::ptrdiff_t>(kx) - pad_c;
                const std::size_t c_lo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, -dx));
                const std::size_t c_hi = static_cast<std::size_t>(
                    std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(cols),
                                             static_cast<std::ptrdiff_t>(cols) - dx));
                for (std::size_t r = 0; r < rows; ++r) {
                    const auto sr = static_cast<std::ptrdiff_t>(r) + dy;
                    if (sr < 0 || sr >= static_cast<std::ptrdiff_t>(rows)) continue;
                    const T* s = src + static_cast<std::size_t>(sr) * cols;
                    T* d = dst + r * cols;
                    for (std::size_t cc = c_lo; cc < c_hi; ++cc) {
                        d[cc] = s[static_cast<std::ptrdiff_t>(cc) + dx];
                    }
                }
            }
        }
    }
}

// Adjoint of im2col.
template <typename T>
void col2im(const Mat<T>& col, std::size_t channels, std::size_t rows, std::size_t cols, std::size_t kr,
            std::size_t kc, Mat<T>& out) {
    const auto pad_r = static_cast<std::ptrdiff_t>(kr / 2);
    const auto pad_c = static_cast<std::ptrdiff_t>(kc / 2);
    out.setZero(static_cast<Eigen::Index>(channels), static_cast<Eigen::Index>(rows * cols));
    for (std::size_t c = 0; c < channels; ++c) {
        T* dst = out.row(static_cast<Eigen::Index>(c)).data();
        for (std::size_t ky = 0; ky < kr; ++ky) {
            for (std::size_t kx = 0; kx < kc; ++kx) {
                const T* src = col.row(static_cast<Eigen::Index>((c * kr + ky) * kc + kx)).data();
                const auto dy = static_cast<std::ptrdiff_t>(ky) - pad_r;
                const auto dx = static_cast<std::ptrdiff_t>(kx) - pad_c;
                const std::size_t c_lo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, -dx));
                const std::size_t c_hi = static_cast<std::size_t>(
                    std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(cols),
                                             static_cast<std::ptrdiff_t>(cols) - dx));
                for (std::size_t r = 0; r < rows; ++r) {
                    const auto sr = static_cast<std::ptrdiff_t>(r) + dy;
                    if (sr < 0 || sr >= static_cast<std::ptrdiff_t>(rows)) continue;
                    T* d = dst + static_cast<std::size_t>(sr) * cols;
                    const T* s = src + r * cols;
                    for (std::size_t cc = c_lo; cc < c_hi; ++cc) {
                        d[static_cast<std::ptrdiff_t>(cc) + dx] += s[cc];
                    }
                }
            }
        }
    }
}

template <typename T>
T sigmoid(T z) {
    return T(1) / (T(1) + std::exp(-z));
}

template <typename T>
struct ForwardCache {
    std::vector<Mat<T>> cols;  // im2col input of every layer (or the activation for 1 x 1)
    std::vector<Mat<T>> pre;   // pre-activations of every layer
    std::vector<T> x_in;
};

// Computes in T. For T = double the parameters are used in place; otherwise
// a converted copy is taken and gradients are accumulated in a T buffer that
// the caller adds into the double gradient.
template <typename T>
class Engine {
public:
    Engine(const NetArch& arch, const sde::SdeSchedule& s, const std::vector<double>& params)
        : a_(arch), s_(s), shapes_(layer_shapes(arch)) {
        if constexpr (std::is_same_v<T, double>) {
            p_ = params.data();
        } else {
            copy_.assign(params.begin(), params.end());
            p_ = copy_.data();
        }
        n_params_ = params.size();
    }

    // Returns raw output (length rows*cols); fills cache when given.
    std::vector<double> forward(const RFGrid& x, double t, ForwardCache<T>* cache) const {
        const std::size_t rows = x.rows(), cols = x.cols(), npix = rows * cols;
        Mat<T> act(static_cast<Eigen::Index>(a_.input_channels()), static_cast<Eigen::Index>(npix));
        std::vector<T> x_in(npix);
        const auto xv = x.values();
        if (a_.conditioning == Conditioning::preconditioned) {
            const double b = s_.beta(t);
            const double in_scale = 1.0 / std::sqrt(1.0 + b);
            const auto level = static_cast<T>(0.25 * std::log(std::sqrt(b)));
            for (std::size_t i = 0; i < npix; ++i) {
                x_in[i] = static_cast<T>(xv[i] * in_scale);
                act(0, static_cast<Eigen::Index>(i)) = x_in[i];
                act(1, static_cast<Eigen::Index>(i)) = level;
            }
        } else {
            for (std::size_t i = 0; i < npix; ++i) {
                x_in[i] = static_cast<T>(xv[i]);
                act(0, static_cast<Eigen::Index>(i)) = x_in[i];
            }
        }

        if (a_.depth_channel) {
            const auto d = static_cast<Eigen::Index>(a_.input_channels() - 1);
            const double span = rows > 1 ? static_cast<double>(rows - 1) : 1.0;
            for (std::size_t i = 0; i < npix; ++i) {
                act(d, static_cast<Eigen::Index>(i)) =
                    static_cast<T>(-1.0 + 2.0 * static_cast<double>(i / cols) / span);
            }
        }

        // With a cache the per-layer buffers live there and keep their
        // allocations across calls.
        Mat<T> local_col, local_z;
        if (cache) {
            cache->cols.resize(a_.layers);
            cache->pre.resize(a_.layers);
        }
        for (std::size_t l = 0; l < a_.layers; ++l) {
            const auto& sh = shapes_[l];
            const std::size_t fan_in = sh.in * a_.kernel_rows * a_.kernel_cols;
            ConstMatMap<T> w(p_ + sh.weight_offset, static_cast<Eigen::Index>(sh.out),
                             static_cast<Eigen::Index>(fan_in));
            ConstVecMap<T> b(p_ + sh.bias_offset, static_cast<Eigen::Index>(sh.out));
            Mat<T>& col = cache ? cache->cols[l] : local_col;
            Mat<T>& z = cache ? cache->pre[l] : local_z;
            if (a_.pointwise()) {
                col = act;
            } else {
                im2col(act, rows, cols, a_.kernel_rows, a_.kernel_cols, col);
            }
            z.noalias() = w * col;
            z.colwise() += b;
            if (l + 1 < a_.layers) {
                act = z.unaryExpr([](T v) { return v * sigmoid(v); });
            }
        }
        const Mat<T>& z = cache ? cache->pre.back() : local_z;
        const T gain = p_[n_params_ - 1];
        std::vector<double> out(npix);
        for (std::size_t i = 0; i < npix; ++i) {
            out[i] = static_cast<double>(z(0, static_cast<Eigen::Index>(i)) + gain * x_in[i]);
        }
        if (cache) cache->x_in = std::move(x_in);
        return out;
    }

    void backward(const ForwardCache<T>& cache, std::size_t rows, std::size_t cols,
                  const std::vector<double>& d_raw, std::span<T> grad) const {
        const std::size_t npix = rows * cols;
        Mat<T> dz(1, static_cast<Eigen::Index>(npix));
        T d_gain = 0;
        for (std::size_t i = 0; i < npix; ++i) {
            dz(0, static_cast<Eigen::Index>(i)) = static_cast<T>(d_raw[i]);
            d_gain += static_cast<T>(d_raw[i]) * cache.x_in[i];
        }
        grad.back() += d_gain;

        Mat<T> dcol, dact;
        for (std::size_t l = a_.layers; l-- > 0;) {
            const auto& sh = shapes_[l];
            const std::size_t fan_in = sh.in * a_.kernel_rows * a_.kernel_cols;
            MatMap<T> gw(grad.data() + sh.weight_offset, static_cast<Eigen::Index>(sh.out),
                         static_cast<Eigen::Index>(fan_in));
            VecMap<T> gb(grad.data() + sh.bias_offset, static_cast<Eigen::Index>(sh.out));
            gw.noalias() += dz * cache.cols[l].transpose();
            gb += dz.rowwise().sum();
            if (l == 0) break;
            ConstMatMap<T> w(p_ + sh.weight_offset, static_cast<Eigen::Index>(sh.out),
                             static_cast<Eigen::Index>(fan_in));
            dcol.noalias() = w.transpose() * dz;
            if (a_.pointwise()) {
                dact = std::move(dcol);
            } else {
                col2im(dcol, sh.in, rows, cols, a_.kernel_rows, a_.kernel_cols, dact);
            }
            const Mat<T>& pre = cache.pre[l - 1];
            dz = dact.binaryExpr(pre, [](T g, T v) {
                const T sg = sigmoid(v);
                return g * sg * (T(1) + v * (T(1) - sg));
            });
        }
    }

private:
    const NetArch& a_;
    const sde::SdeSchedule& s_;
    std::vector<LayerShape> shapes_;
    std::vector<T> copy_;
    const T* p_ = nullptr;
    std::size_t n_params_ = 0;
};

template <typename T>
RFGrid raw_output(const NetArch& a, const sde::SdeSchedule& s, const std::vector<double>& p,
                  const RFGrid& x, double t) {
    Engine<T> e(a, s, p);
    return RFGrid(x.rows(), x.cols(), e.forward(x, t, nullptr), x.axial_spacing(),
                  x.lateral_spacing());
}

template <typename T>
double dsm_grad(const NetArch& a, const sde::SdeSchedule& s, const std::vector<double>& p,
                const RFGrid& xt, const RFGrid& z, double t, double weight,
                std::span<double> grad) {
    Engine<T> e(a, s, p);
    thread_local ForwardCache<T> cache;
    std::vector<double> out = e.forward(xt, t, &cache);
    const auto zv = z.values();
    double sq = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double r = out[i] + zv[i];
        sq += r * r;
        out[i] = 2.0 * weight * r;
    }
    if constexpr (std::is_same_v<T, double>) {
        e.backward(cache, xt.rows(), xt.cols(), out, grad);
    } else {
        thread_local std::vector<T> g;
        g.assign(grad.size(), T(0));
        e.backward(cache, xt.rows(), xt.cols(), out, std::span<T>(g));
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += static_cast<double>(g[i]);
    }
    return sq;
}

}  // namespace

std::string to_string(Conditioning c) {
    return c == Conditioning::preconditioned ? "preconditioned" : "output_scale";
}

Conditioning conditioning_from_string(const std::string& name) {
    if (name == "preconditioned") return Conditioning::preconditioned;
    if (name == "output_scale") return Conditioning::output_scale;
    throw ConfigError("unknown noise conditioning mode '" + name + "'");
}

std::string to_string(Precision p) { return p == Precision::float32 ? "float32" : "float64"; }

Precision precision_from_string(const std::string& name) {
    if (name == "float64") return Precision::float64;
    if (name == "float32") return Precision::float32;
    throw ConfigError("unknown net precision '" + name + "'");
}

NetArch NetArch::mlp(std::size_t width, std::size_t layers, std::size_t rows, std::size_t cols) {
    NetArch a;
    a.patch_rows = rows;
    a.patch_cols = cols;
    a.channels = width;
    a.layers = layers;
    a.kernel_rows = 1;
    a.kernel_cols = 1;
    return a;
}

std::size_t NetArch::input_channels() const noexcept {
    return (conditioning == Conditioning::preconditioned ? 2 : 1) + (depth_channel ? 1 : 0);
}

std::size_t NetArch::parameter_count() const noexcept {
    std::size_t n = 1;  // residual gain
    for (const auto& sh : layer_shapes(*this)) n += sh.out * sh.in * kernel_rows * kernel_cols + sh.out;
    return n;
}

void NetArch::validate() const {
    if (patch_rows == 0 || patch_cols == 0) throw ConfigError("net: patch shape must be positive");
    if (channels == 0) throw ConfigError("net: channels must be positive");
    if (layers < 2) throw ConfigError("net: at least two layers required");
    if (kernel_rows % 2 == 0 || kernel_cols % 2 == 0) throw ConfigError("net: kernel sizes must be odd");
    if (parameter_count() > kMaxParameters) {
        throw ConfigError("net: " + std::to_string(parameter_count()) +
                          " parameters exceed the limit of " + std::to_string(kMaxParameters));
    }
}

TrainableScoreNet::TrainableScoreNet(NetArch arch, sde::SdeSchedule schedule,
                                     std::uint64_t init_seed)
    : arch_(arch), schedule_(schedule) {
    arch_.validate();
    schedule_.validate();
    params_.assign(arch_.parameter_count(), 0.0);
    SeededRng rng(init_seed);
    for (const auto& sh : layer_shapes(arch_)) {
        const std::size_t fan_in = sh.in * arch_.kernel_rows * arch_.kernel_cols;
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (std::size_t i = 0; i < sh.out * fan_in; ++i) {
            params_[sh.weight_offset + i] = rng.uniform(-bound, bound);
        }
    }
}

void TrainableScoreNet::check_input(const RFGrid& x, double t) const {
    if (x.rows() != arch_.patch_rows || x.cols() != arch_.patch_cols) {
        throw std::invalid_argument("score net: input " + x.shape_string() +
                                    " does not match patch shape " +
                                    std::to_string(arch_.patch_rows) + "x" +
                                    std::to_string(arch_.patch_cols));
    }
    if (!(t > 0.0 && t <= 1.0)) throw std::invalid_argument("score net: t must lie in (0, 1]");
}

RFGrid TrainableScoreNet::raw(const RFGrid& x, double t) const {
    check_input(x, t);
    if (arch_.precision == Precision::float32) return raw_output<float>(arch_, schedule_, params_, x, t);
    return raw_output<double>(arch_, schedule_, params_, x, t);
}

RFGrid TrainableScoreNet::evaluate(const RFGrid& x, double t) const {
    RFGrid out = raw(x, t);
    const double inv_std = 1.0 / sde::kernel_std(schedule_, t);
    for (double& v : out.values()) v *= inv_std;
    return out;
}

double TrainableScoreNet::accumulate_dsm_grad(const RFGrid& xt, const RFGrid& z, double t,
                                              double weight, std::span<double> grad) const {
    check_input(xt, t);
    require_same_shape(xt, z, "accumulate_dsm_grad");
    if (grad.size() != params_.size()) throw std::invalid_argument("gradient size mismatch");
    if (arch_.precision == Precision::float32) {
        return dsm_grad<float>(arch_, schedule_, params_, xt, z, t, weight, grad);
    }
    return dsm_grad<double>(arch_, schedule_, params_, xt, z, t, weight, grad);
}

RFGrid net_evaluate(const TrainableScoreNet& net, const RFGrid& x, double t) {
    return net.evaluate(x, t);
}

nlohmann::json arch_to_json(const NetArch& a) {
    return {{"kind", a.kind()},
            {"patch_rows", a.patch_rows},
            {"patch_cols", a.patch_cols},
            {"channels", a.channels},
            {"layers", a.layers},
            {"kernel_rows", a.kernel_rows},
            {"kernel_cols", a.kernel_cols},
            {"conditioning", to_string(a.conditioning)},
            {"depth_channel", a.depth_channel},
            {"precision", to_string(a.precision)}};
}

NetArch arch_from_json(const nlohmann::json& j) {
    NetArch a;
    try {
        a.patch_rows = j.at("patch_rows").get<std::size_t>();
        a.patch_cols = j.at("patch_cols").get<std::size_t>();
        a.channels = j.at("channels").get<std::size_t>();
        a.layers = j.at("layers").get<std::size_t>();
        a.kernel_rows = j.at("kernel_rows").get<std::size_t>();
        a.kernel_cols = j.at("kernel_cols").get<std::size_t>();
        a.conditioning = conditioning_from_string(j.at("conditioning").get<std::string>());
        a.depth_channel = j.value("depth_channel", false);
        a.precision = precision_from_string(j.value("precision", std::string("float64")));
    } catch (const nlohmann::json::exception& ex) {
        throw IoError(std::string("checkpoint: bad architecture header: ") + ex.what());
    }
    return a;
}

void save_checkpoint(const std::filesystem::path& path, const TrainableScoreNet& net,
                     const nlohmann::json& metadata) {
    nlohmann::json header{{"format", "hsnet"},
                          {"version", 1},
                          {"architecture", arch_to_json(net.arch())},
                          {"schedule",
                           {{"sigma", net.schedule().sigma},
                            {"steps_T", net.schedule().steps},
                            {"tau", net.schedule().tau}}},
                          {"parameter_count", net.parameters().size()},
                          {"metadata", metadata}};
    const std::string text = header.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic) - 1);
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (double p : net.parameters()) detail::put_le<float>(out, static_cast<float>(p));
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

TrainableScoreNet load_checkpoint(const std::filesystem::path& path, nlohmann::json* metadata) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
    char magic[sizeof(kCheckpointMagic) - 1];
    if (!in.read(magic, sizeof(magic)) ||
        std::string(magic, sizeof(magic)) != std::string(kCheckpointMagic)) {
        throw IoError("'" + path.string() + "' is not a .hsnet checkpoint");
    }
    const auto len = detail::get_le<std::uint32_t>(in, "hsnet");
    std::string text(len, '\0');
    if (!in.read(text.data(), len)) throw IoError("hsnet: truncated header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& ex) {
        throw IoError(std::string("hsnet: malformed header: ") + ex.what());
    }
    sde::SdeSchedule sched;
    try {
        sched.sigma = header.at("schedule").at("sigma").get<double>();
        sched.steps = header.at("schedule").at("steps_T").get<std::size_t>();
        sched.tau = header.at("schedule").at("tau").get<double>();
    } catch (const nlohmann::json::exception& ex) {
        throw IoError(std::string("hsnet: bad schedule header: ") + ex.what());
    }
    TrainableScoreNet net(arch_from_json(header.at("architecture")), sched);
    auto& p = net.parameters();
    if (header.value("parameter_count", std::size_t{0}) != p.size()) {
        throw IoError("hsnet: parameter count does not match the architecture");
    }
    for (double& v : p) {
        v = detail::get_le<float>(in, "hsnet");
        if (!std::isfinite(v)) throw IoError("hsnet: non-finite parameter");
    }
    if (metadata) *metadata = header.value("metadata", nlohmann::json::object());
    return net;
}

}  // namespace hazesep
