#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fcdm/grid.hpp"
#include "fcdm/losses.hpp"
#include "fcdm/masking.hpp"
#include "fcdm/spectral.hpp"

// Desk-scale inpainting network: 3x3 stride-2 convolutional encoder, a
// frequency-convolution block, and a transposed-convolution decoder.
namespace fcdm::model {

enum class Placement { latent, downsample_first, none };
Placement parse_placement(const std::string& name);
std::string to_string(Placement p);

/// How masked rows are filled before entering the network. With `linear`
/// the network input carries the linear-interpolation fill and the decoder
/// output is added to it; with `zero` the network sees zeros and its output
/// is the prediction.
enum class Prefill { linear, zero };
Prefill parse_prefill(const std::string& name);
std::string to_string(Prefill p);

struct NetConfig {
  std::size_t n_angles = 64;
  std::size_t n_detectors = 64;
  std::size_t channels = 8;
  Placement placement = Placement::latent;
  spectral::Activation activation = spectral::Activation::identity;
  bool freq_width = true;
  bool freq_height = true;
  Prefill prefill = Prefill::linear;
  std::uint64_t seed = 0;
};

/// Throws ContractViolation unless A and D are multiples of 4 and >= 8.
void validate(const NetConfig& cfg);

struct NetParams {
  Tensor enc1_w, enc1_b;  // [C, 2, 3, 3], [C]
  Tensor enc2_w, enc2_b;  // [C, C, 3, 3], [C]
  std::optional<spectral::FreqConvParams> freq;
  Tensor dec1_w, dec1_b;  // [C, C, 3, 3], [C]   (transposed: [Cin, Cout, k, k])
  Tensor dec2_w, dec2_b;  // [C, 1, 3, 3], [1]
};

/// Named views of every tensor in `params`, in a fixed order.
std::vector<std::pair<std::string, Tensor*>> named_tensors(NetParams& params);
std::vector<std::pair<std::string, const Tensor*>> named_tensors(const NetParams& params);

/// Parameters that influence the output under `cfg` (kernels of disabled
/// frequency branches are excluded).
std::vector<std::string> active_parameter_names(const NetConfig& cfg, const NetParams& params);

/// Spatial weights uniform in +-1/sqrt(fan_in) with fan_in = Cin * 3 * 3,
/// biases zero, frequency kernels delta + N(0, 0.01^2). Draw order:
/// enc1_w, enc2_w, kernel_w, kernel_h, dec1_w, dec2_w from Rng(cfg.seed).
NetParams init_params(const NetConfig& cfg);

/// Differentiable pass. `masked` and `indicator` are [1, A, D] in network
/// units; returns [1, A, D].
Tensor forward(const NetConfig& cfg, const NetParams& params, const Tensor& masked, const Tensor& indicator);

/// Trained network plus the factor that maps raw sinograms to network units.
struct Model {
  NetConfig config;
  NetParams params;
  double data_scale = 1.0;
};

/// Forward output with known rows replaced by the input rows. Takes and
/// returns raw (unscaled) sinograms.
Sinogram inpaint(const Model& model, const Sinogram& masked, const Sinogram& indicator);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 8;
  double learning_rate = 1e-3;
  AdamConfig adam;
  double ratio_lo = 0.1;
  double ratio_hi = 0.9;
  losses::LossWeights weights;
  std::uint64_t seed = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0, pixel = 0, absorp = 0, freq = 0;
};

struct TrainResult {
  Model model;
  std::vector<EpochRecord> history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Supervised inpainting with random angle masks, single-threaded and
/// deterministic for fixed seeds. `cfg.n_angles/n_detectors` must match the
/// data.
TrainResult train(const std::vector<Sinogram>& data, const NetConfig& cfg, const TrainConfig& tcfg,
                  const EpochCallback& on_epoch = {});

std::string history_csv(const std::vector<EpochRecord>& history);

void save_model(const std::filesystem::path& dir, const Model& model);
Model load_model(const std::filesystem::path& dir);

/// Parsed training configuration file. Unknown or ill-typed fields raise
/// ConfigError naming the field.
struct RunConfig {
  NetConfig net;
  TrainConfig train;
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

RunConfig parse_run_config(const std::string& json_text);
std::string run_config_json(const RunConfig& cfg);

}  // namespace fcdm::model
