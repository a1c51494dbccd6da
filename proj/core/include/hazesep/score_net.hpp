#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hazesep/score.hpp"

namespace hazesep {

/// How the network sees the noise level. Both variants divide the raw output
/// by std(t). `preconditioned` additionally feeds x / sqrt(1 + beta(t)) and a
/// constant log(std(t)) plane as inputs, which lets the network tell noise
/// levels apart even when the data carry no spatial structure.
enum class Conditioning { output_scale, preconditioned };

std::string to_string(Conditioning c);
Conditioning conditioning_from_string(const std::string& name);

/// Arithmetic used inside the network. Parameters are always stored as
/// double; `float32` runs the convolutions in float, roughly twice as fast.
enum class Precision { float64, float32 };

std::string to_string(Precision p);
Precision precision_from_string(const std::string& name);

/// Architecture descriptor: `layers` same-padded k x k convolutions with SiLU
/// between them and a learnable residual from the (preconditioned) input to
/// the raw output. Kernels are kernel_rows (axial) by kernel_cols (lateral);
/// 1 x 1 is the pointwise fully-connected variant.
struct NetArch {
    std::size_t patch_rows = 128;
    std::size_t patch_cols = 64;
    std::size_t channels = 16;
    std::size_t layers = 4;
    std::size_t kernel_rows = 3;
    std::size_t kernel_cols = 3;
    Conditioning conditioning = Conditioning::preconditioned;
    /// Extra input plane running from -1 at the top row to +1 at the bottom,
    /// for priors whose statistics change with depth. Only meaningful when a
    /// patch spans the frame's full depth.
    bool depth_channel = false;
    Precision precision = Precision::float64;

    static NetArch mlp(std::size_t width, std::size_t layers, std::size_t rows, std::size_t cols);

    void validate() const;
    std::size_t input_channels() const noexcept;
    std::size_t parameter_count() const noexcept;
    bool pointwise() const noexcept { return kernel_rows == 1 && kernel_cols == 1; }
    std::string kind() const { return pointwise() ? "mlp" : "conv"; }
};

inline constexpr std::size_t kMaxParameters = 100000;

class TrainableScoreNet final : public ScoreModel {
public:
    /// Weights uniform in +-1/sqrt(fan_in) drawn from `init_seed`; biases and
    /// the residual gain start at 0.
    TrainableScoreNet(NetArch arch, sde::SdeSchedule schedule, std::uint64_t init_seed = 0);

    RFGrid evaluate(const RFGrid& x, double t) const override;
    /// Network output before the 1/std(t) scaling.
    RFGrid raw(const RFGrid& x, double t) const;

    /// For L = weight * sum((raw(xt, t) + z)^2), adds dL/dtheta into `grad`
    /// and returns sum((raw + z)^2).
    double accumulate_dsm_grad(const RFGrid& xt, const RFGrid& z, double t, double weight,
                               std::span<double> grad) const;

    const NetArch& arch() const noexcept { return arch_; }
    const sde::SdeSchedule& schedule() const noexcept { return schedule_; }
    std::vector<double>& parameters() noexcept { return params_; }
    const std::vector<double>& parameters() const noexcept { return params_; }

private:
    void check_input(const RFGrid& x, double t) const;

    NetArch arch_;
    sde::SdeSchedule schedule_;
    std::vector<double> params_;
};

RFGrid net_evaluate(const TrainableScoreNet& net, const RFGrid& x, double t);

/// `.hsnet`: magic "HSNET1\n", u32 header length, UTF-8 JSON header
/// (architecture, schedule, metadata), then the parameters as little-endian f32.
void save_checkpoint(const std::filesystem::path& path, const TrainableScoreNet& net,
                     const nlohmann::json& metadata = nlohmann::json::object());
TrainableScoreNet load_checkpoint(const std::filesystem::path& path,
                                  nlohmann::json* metadata = nullptr);

nlohmann::json arch_to_json(const NetArch& arch);
NetArch arch_from_json(const nlohmann::json& j);

}  // namespace hazesep
