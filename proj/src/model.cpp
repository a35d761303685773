#include "fcdm/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <json.hpp>
#include <sstream>

#include "fcdm/baselines.hpp"
#include "fcdm/error.hpp"
#include "fcdm/rng.hpp"
#include "fcdm/tensor_io.hpp"

namespace fcdm::model {

Placement parse_placement(const std::string& name) {
  if (name == "latent") return Placement::latent;
  if (name == "downsample_first") return Placement::downsample_first;
  if (name == "none") return Placement::none;
  throw ContractViolation("unknown placement '" + name + "' (expected latent|downsample_first|none)");
}

std::string to_string(Placement p) {
  switch (p) {
    case Placement::latent: return "latent";
    case Placement::downsample_first: return "downsample_first";
    case Placement::none: return "none";
  }
  return "?";
}

Prefill parse_prefill(const std::string& name) {
  if (name == "linear") return Prefill::linear;
  if (name == "zero") return Prefill::zero;
  throw ContractViolation("unknown prefill '" + name + "' (expected linear|zero)");
}

std::string to_string(Prefill p) { return p == Prefill::linear ? "linear" : "zero"; }

void validate(const NetConfig& cfg) {
  if (cfg.n_angles < 8 || cfg.n_detectors < 8 || cfg.n_angles % 4 != 0 || cfg.n_detectors % 4 != 0) {
    throw ContractViolation("net: input size must be multiples of 4 and >= 8, got " + std::to_string(cfg.n_angles) +
                            "x" + std::to_string(cfg.n_detectors));
  }
  if (cfg.channels == 0) throw ContractViolation("net: channels must be positive");
}

namespace {

constexpr std::size_t kInputChannels = 2;

Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.uniform(-bound, bound);
  return Tensor::from(std::move(shape), std::move(v), DType::f64, true);
}

Tensor zero_param(Shape shape) {
  return Tensor::from(shape, std::vector<double>(shape_numel(shape), 0.0), DType::f64, true);
}

/// Spatial extent the frequency block operates on.
std::pair<std::size_t, std::size_t> freq_extent(const NetConfig& cfg) {
  if (cfg.placement == Placement::downsample_first) return {cfg.n_angles / 2, cfg.n_detectors / 2};
  return {cfg.n_angles / 4, cfg.n_detectors / 4};
}

std::size_t freq_channels(const NetConfig& cfg) {
  return cfg.placement == Placement::downsample_first ? kInputChannels : cfg.channels;
}

/// 2x2 average pooling as a fixed per-channel stride-2 convolution.
Tensor avg_pool_weight(std::size_t channels) {
  std::vector<double> w(channels * channels * 4, 0.0);
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < 4; ++i) w[(c * channels + c) * 4 + i] = 0.25;
  }
  return Tensor::from({channels, channels, 2, 2}, std::move(w));
}

masking::MaskSpec mask_from_indicator(const Tensor& indicator, std::size_t n_angles, std::size_t n_det) {
  masking::MaskSpec m;
  m.n_angles = n_angles;
  for (std::size_t a = 0; a < n_angles; ++a) {
    if (indicator[a * n_det] > 0.5) m.masked.push_back(a);
  }
  m.ratio = static_cast<double>(m.masked.size()) / static_cast<double>(n_angles);
  return m;
}

Tensor prefill_base(const NetConfig& cfg, const Tensor& masked, const Tensor& indicator) {
  if (cfg.prefill == Prefill::zero) return masked;
  const auto mask = mask_from_indicator(indicator, cfg.n_angles, cfg.n_detectors);
  if (mask.masked.empty() || mask.masked.size() == cfg.n_angles) return masked.detach();
  return to_tensor(baselines::linear_interp_inpaint(sinogram_from(masked), mask));
}

}  // namespace

std::vector<std::pair<std::string, Tensor*>> named_tensors(NetParams& p) {
  std::vector<std::pair<std::string, Tensor*>> out{{"enc1_w", &p.enc1_w}, {"enc1_b", &p.enc1_b},
                                                    {"enc2_w", &p.enc2_w}, {"enc2_b", &p.enc2_b}};
  if (p.freq) {
    out.emplace_back("freq_kernel_w", &p.freq->kernel_w);
    out.emplace_back("freq_kernel_h", &p.freq->kernel_h);
  }
  out.emplace_back("dec1_w", &p.dec1_w);
  out.emplace_back("dec1_b", &p.dec1_b);
  out.emplace_back("dec2_w", &p.dec2_w);
  out.emplace_back("dec2_b", &p.dec2_b);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> named_tensors(const NetParams& p) {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (auto& [name, t] : named_tensors(const_cast<NetParams&>(p))) out.emplace_back(name, t);
  return out;
}

std::vector<std::string> active_parameter_names(const NetConfig& cfg, const NetParams& params) {
  std::vector<std::string> names;
  for (const auto& [name, t] : named_tensors(params)) {
    if (name == "freq_kernel_w" && !cfg.freq_width) continue;
    if (name == "freq_kernel_h" && !cfg.freq_height) continue;
    names.push_back(name);
  }
  return names;
}

NetParams init_params(const NetConfig& cfg) {
  validate(cfg);
  Rng rng(cfg.seed);
  const std::size_t C = cfg.channels;
  auto conv = [&](std::size_t a, std::size_t b, std::size_t fan_in) {
    return uniform_tensor({a, b, 3, 3}, 1.0 / std::sqrt(static_cast<double>(fan_in * 9)), rng);
  };
  NetParams p;
  p.enc1_w = conv(C, kInputChannels, kInputChannels);
  p.enc1_b = zero_param({C});
  p.enc2_w = conv(C, C, C);
  p.enc2_b = zero_param({C});
  if (cfg.placement != Placement::none) {
    const auto [h, w] = freq_extent(cfg);
    p.freq = spectral::init_freq_params(freq_channels(cfg), h, w, rng, 0.01, cfg.activation);
    p.freq->alpha_w = cfg.freq_width ? 0.45 : 0.0;
    p.freq->alpha_h = cfg.freq_height ? 0.55 : 0.0;
  }
  p.dec1_w = conv(C, C, C);
  p.dec1_b = zero_param({C});
  p.dec2_w = conv(C, 1, C);
  p.dec2_b = zero_param({1});
  return p;
}

Tensor forward(const NetConfig& cfg, const NetParams& params, const Tensor& masked, const Tensor& indicator) {
  const Shape expect{1, cfg.n_angles, cfg.n_detectors};
  if (masked.shape() != expect || indicator.shape() != expect) {
    throw ContractViolation("forward: expected inputs " + shape_string(expect) + ", got " +
                            shape_string(masked.shape()) + " and " + shape_string(indicator.shape()));
  }
  if (cfg.placement != Placement::none && !params.freq) {
    throw ContractViolation("forward: configuration needs frequency kernels but none are allocated");
  }
  const Tensor base = prefill_base(cfg, masked, indicator);
  const std::array<Tensor, 2> inputs{base, indicator};
  Tensor x = concat_channels(inputs);

  Tensor h;
  if (cfg.placement == Placement::downsample_first) {
    x = conv2d(x, avg_pool_weight(kInputChannels), std::nullopt, 2, 0);
    x = add(x, spectral::freq_conv_block(x, *params.freq));
    h = gelu(conv2d(x, params.enc1_w, params.enc1_b, 1, 1));
  } else {
    h = gelu(conv2d(x, params.enc1_w, params.enc1_b, 2, 1));
  }
  h = gelu(conv2d(h, params.enc2_w, params.enc2_b, 2, 1));
  if (cfg.placement == Placement::latent) h = add(h, spectral::freq_conv_block(h, *params.freq));

  Tensor y = gelu(conv2d_transpose(h, params.dec1_w, params.dec1_b, 2, 1, 1));
  y = conv2d_transpose(y, params.dec2_w, params.dec2_b, 2, 1, 1);
  if (cfg.prefill == Prefill::linear) y = add(mul(y, indicator), base);
  return y;
}

Sinogram inpaint(const Model& model, const Sinogram& masked, const Sinogram& indicator) {
  const double s = model.data_scale;
  Tensor in = scale(to_tensor(masked), s);
  const Tensor out = forward(model.config, model.params, in, to_tensor(indicator));
  Sinogram result = sinogram_from(scale(out, 1.0 / s));
  for (std::size_t a = 0; a < masked.n_angles; ++a) {
    if (indicator.at(a, 0) > 0.5) continue;
    const auto src = masked.row(a);
    std::copy(src.begin(), src.end(), result.row(a).begin());
  }
  return result;
}

// --- Training ----------------------------------------------------------------

namespace {

struct AdamState {
  std::vector<std::vector<double>> m, v;
  std::size_t step = 0;
};

void adam_update(NetParams& params, const std::vector<std::string>& trainable,
                 const std::vector<std::vector<double>>& grads, AdamState& st, const TrainConfig& tcfg) {
  ++st.step;
  const double b1 = tcfg.adam.beta1, b2 = tcfg.adam.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(st.step));
  std::size_t k = 0;
  for (auto& [name, t] : named_tensors(params)) {
    if (std::find(trainable.begin(), trainable.end(), name) == trainable.end()) continue;
    const auto& g = grads[k];
    auto& m = st.m[k];
    auto& v = st.v[k];
    std::vector<double> next(t->data().begin(), t->data().end());
    for (std::size_t i = 0; i < next.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      next[i] -= tcfg.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + tcfg.adam.eps);
    }
    *t = Tensor::from(t->shape(), std::move(next), t->dtype(), true);
    ++k;
  }
}

void check_train_config(const TrainConfig& t) {
  if (t.epochs == 0 || t.batch_size == 0) throw ContractViolation("train: epochs and batch_size must be positive");
  if (!(t.learning_rate > 0.0)) throw ContractViolation("train: learning_rate must be positive");
  if (!(0.0 <= t.ratio_lo && t.ratio_lo <= t.ratio_hi && t.ratio_hi <= 1.0)) {
    throw ContractViolation("train: mask_ratio_range must satisfy 0 <= lo <= hi <= 1");
  }
  if (t.weights.w_pixel < 0 || t.weights.w_absorp < 0 || t.weights.w_freq < 0) {
    throw ContractViolation("train: loss weights must be non-negative");
  }
}

}  // namespace

TrainResult train(const std::vector<Sinogram>& data, const NetConfig& cfg, const TrainConfig& tcfg,
                  const EpochCallback& on_epoch) {
  if (data.empty()) throw ContractViolation("train: empty dataset");
  validate(cfg);
  check_train_config(tcfg);
  double peak = 0.0;
  for (const Sinogram& s : data) {
    if (s.n_angles != cfg.n_angles || s.n_detectors != cfg.n_detectors) {
      throw ContractViolation("train: sinogram shape does not match the network input size");
    }
    for (double v : s.values) peak = std::max(peak, std::abs(v));
  }

  TrainResult result;
  Model& model = result.model;
  model.config = cfg;
  model.params = init_params(cfg);
  model.data_scale = peak > 0.0 ? 1.0 / peak : 1.0;

  const std::vector<std::string> trainable = active_parameter_names(cfg, model.params);
  AdamState adam;
  for (auto& [name, t] : named_tensors(model.params)) {
    if (std::find(trainable.begin(), trainable.end(), name) == trainable.end()) continue;
    adam.m.emplace_back(t->numel(), 0.0);
    adam.v.emplace_back(t->numel(), 0.0);
  }

  Rng rng(tcfg.seed);
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    EpochRecord rec;
    rec.epoch = epoch;

    for (std::size_t start = 0; start < order.size(); start += tcfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + tcfg.batch_size);
      std::vector<std::vector<double>> grads;
      for (const auto& m : adam.m) grads.emplace_back(m.size(), 0.0);

      for (std::size_t b = start; b < stop; ++b) {
        const Sinogram& clean = data[order[b]];
        const double ratio = rng.uniform(tcfg.ratio_lo, tcfg.ratio_hi);
        const auto mask = masking::sample_mask(cfg.n_angles, ratio, rng.next());
        const auto masked = masking::apply_mask(clean, mask);

        const Tensor truth = scale(to_tensor(clean), model.data_scale);
        const Tensor input = scale(to_tensor(masked.sinogram), model.data_scale);
        const Tensor indicator = to_tensor(masked.indicator);

        Tape tape;
        TapeScope scope(tape);
        const Tensor pred = forward(cfg, model.params, input, indicator);
        const losses::LossBreakdown loss = losses::total_loss(pred, truth, tcfg.weights);
        const double value = loss.total.item();
        if (!std::isfinite(value)) {
          throw NumericalError("train: non-finite loss at epoch " + std::to_string(epoch) + ", sample " +
                               std::to_string(order[b]));
        }
        const Gradients g = tape.backward(loss.total);
        std::size_t k = 0;
        for (auto& [name, t] : named_tensors(model.params)) {
          if (std::find(trainable.begin(), trainable.end(), name) == trainable.end()) continue;
#ifndef NDEBUG
          if (!g.reached(*t)) throw NumericalError("train: parameter " + name + " received no gradient");
#endif
          const Tensor gt = g.of(*t);
          for (std::size_t i = 0; i < gt.numel(); ++i) {
            if (!std::isfinite(gt[i])) {
              throw NumericalError("train: non-finite gradient for " + name + " at epoch " + std::to_string(epoch));
            }
            grads[k][i] += gt[i];
          }
          ++k;
        }
        rec.loss += value;
        rec.pixel += loss.pixel;
        rec.absorp += loss.absorp;
        rec.freq += loss.freq;
      }

      const double inv = 1.0 / static_cast<double>(stop - start);
      for (auto& g : grads) {
        for (double& x : g) x *= inv;
      }
      adam_update(model.params, trainable, grads, adam, tcfg);
    }

    const double n = static_cast<double>(data.size());
    rec.loss /= n;
    rec.pixel /= n;
    rec.absorp /= n;
    rec.freq /= n;
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::ostringstream os;
  os << "epoch,loss,pixel,absorp,freq\n";
  char line[256];
  for (const EpochRecord& r : history) {
    std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g,%.17g\n", r.epoch, r.loss, r.pixel, r.absorp, r.freq);
    os << line;
  }
  return os.str();
}

// --- Persistence ---------------------------------------------------------------

namespace {

nlohmann::ordered_json net_json(const NetConfig& c) {
  nlohmann::ordered_json j;
  j["channels"] = c.channels;
  j["placement"] = to_string(c.placement);
  j["activation"] = spectral::to_string(c.activation);
  std::vector<std::string> axes;
  if (c.freq_width) axes.emplace_back("width");
  if (c.freq_height) axes.emplace_back("height");
  j["freq_axes"] = axes;
  j["prefill"] = to_string(c.prefill);
  j["seed"] = c.seed;
  return j;
}

template <typename T>
T typed(const nlohmann::json& j, const std::string& field) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(field, "config field '" + field + "' has the wrong type");
  }
}

void reject_unknown(const nlohmann::json& obj, const std::string& prefix, std::initializer_list<const char*> known) {
  if (!obj.is_object()) throw ConfigError(prefix.empty() ? "<root>" : prefix, "config: expected an object");
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) {
      const std::string field = prefix.empty() ? key : prefix + "." + key;
      throw ConfigError(field, "config: unknown field '" + field + "'");
    }
  }
}

template <typename Parse>
auto parse_enum(const nlohmann::json& j, const std::string& field, Parse parse) {
  try {
    return parse(typed<std::string>(j, field));
  } catch (const ContractViolation& e) {
    throw ConfigError(field, std::string("config field '") + field + "': " + e.what());
  }
}

NetConfig parse_net(const nlohmann::json& j, NetConfig c) {
  reject_unknown(j, "net", {"channels", "placement", "activation", "freq_axes", "prefill", "seed"});
  if (j.contains("channels")) c.channels = typed<std::size_t>(j["channels"], "net.channels");
  if (j.contains("placement")) c.placement = parse_enum(j["placement"], "net.placement", parse_placement);
  if (j.contains("activation")) {
    c.activation = parse_enum(j["activation"], "net.activation", spectral::parse_activation);
  }
  if (j.contains("prefill")) c.prefill = parse_enum(j["prefill"], "net.prefill", parse_prefill);
  if (j.contains("seed")) c.seed = typed<std::uint64_t>(j["seed"], "net.seed");
  if (j.contains("freq_axes")) {
    c.freq_width = c.freq_height = false;
    for (const std::string& axis : typed<std::vector<std::string>>(j["freq_axes"], "net.freq_axes")) {
      if (axis == "width") {
        c.freq_width = true;
      } else if (axis == "height") {
        c.freq_height = true;
      } else {
        throw ConfigError("net.freq_axes", "config field 'net.freq_axes': unknown axis '" + axis + "'");
      }
    }
  }
  if (c.channels == 0) throw ConfigError("net.channels", "config field 'net.channels' must be positive");
  return c;
}

}  // namespace

void save_model(const std::filesystem::path& dir, const Model& model) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  nlohmann::ordered_json j;
  j["format"] = "fcdm-model-1";
  j["input_size"] = {model.config.n_angles, model.config.n_detectors};
  j["net"] = net_json(model.config);
  j["data_scale"] = model.data_scale;
  if (model.params.freq) {
    j["alpha_w"] = model.params.freq->alpha_w;
    j["alpha_h"] = model.params.freq->alpha_h;
  }
  nlohmann::ordered_json files;
  for (const auto& [name, t] : named_tensors(model.params)) {
    const std::string file = name + ".sint";
    io::write_tensor(dir / file, *t);
    files[name] = file;
  }
  j["files"] = files;
  io::write_text(dir / "model.json", j.dump(2) + "\n");
}

Model load_model(const std::filesystem::path& dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_text(dir / "model.json"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError((dir / "model.json").string() + ": " + e.what());
  }
  if (j.value("format", "") != "fcdm-model-1") throw IoError((dir / "model.json").string() + ": unknown format");
  Model m;
  m.config.n_angles = j["input_size"][0].get<std::size_t>();
  m.config.n_detectors = j["input_size"][1].get<std::size_t>();
  m.config = parse_net(j["net"], m.config);
  m.data_scale = j["data_scale"].get<double>();
  m.params = init_params(m.config);
  if (m.params.freq) {
    m.params.freq->alpha_w = j.value("alpha_w", m.params.freq->alpha_w);
    m.params.freq->alpha_h = j.value("alpha_h", m.params.freq->alpha_h);
  }
  for (auto& [name, t] : named_tensors(m.params)) {
    const std::string file = j["files"].value(name, "");
    if (file.empty()) throw IoError((dir / "model.json").string() + ": missing tensor " + name);
    const Tensor loaded = io::read_tensor(dir / file);
    if (loaded.shape() != t->shape()) {
      throw IoError((dir / file).string() + ": shape " + shape_string(loaded.shape()) + " expected " +
                    shape_string(t->shape()));
    }
    *t = loaded.as_parameter();
  }
  return m;
}

RunConfig parse_run_config(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("<root>", std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(j, "", {"epochs", "batch_size", "learning_rate", "adam", "mask_ratio_range", "loss_weights", "seed",
                         "net"});
  RunConfig rc;
  TrainConfig& t = rc.train;
  if (j.contains("epochs")) t.epochs = typed<std::size_t>(j["epochs"], "epochs");
  if (j.contains("batch_size")) t.batch_size = typed<std::size_t>(j["batch_size"], "batch_size");
  if (j.contains("learning_rate")) t.learning_rate = typed<double>(j["learning_rate"], "learning_rate");
  if (j.contains("seed")) t.seed = typed<std::uint64_t>(j["seed"], "seed");
  if (j.contains("adam")) {
    const auto& a = j["adam"];
    reject_unknown(a, "adam", {"beta1", "beta2", "eps"});
    if (a.contains("beta1")) t.adam.beta1 = typed<double>(a["beta1"], "adam.beta1");
    if (a.contains("beta2")) t.adam.beta2 = typed<double>(a["beta2"], "adam.beta2");
    if (a.contains("eps")) t.adam.eps = typed<double>(a["eps"], "adam.eps");
  }
  if (j.contains("mask_ratio_range")) {
    const auto range = typed<std::vector<double>>(j["mask_ratio_range"], "mask_ratio_range");
    if (range.size() != 2 || !(0.0 <= range[0] && range[0] <= range[1] && range[1] <= 1.0)) {
      throw ConfigError("mask_ratio_range", "config field 'mask_ratio_range' must be [lo, hi] with 0 <= lo <= hi <= 1");
    }
    t.ratio_lo = range[0];
    t.ratio_hi = range[1];
  }
  if (j.contains("loss_weights")) {
    const auto& w = j["loss_weights"];
    reject_unknown(w, "loss_weights", {"w_pixel", "w_absorp", "w_freq"});
    if (w.contains("w_pixel")) t.weights.w_pixel = typed<double>(w["w_pixel"], "loss_weights.w_pixel");
    if (w.contains("w_absorp")) t.weights.w_absorp = typed<double>(w["w_absorp"], "loss_weights.w_absorp");
    if (w.contains("w_freq")) t.weights.w_freq = typed<double>(w["w_freq"], "loss_weights.w_freq");
    if (t.weights.w_pixel < 0 || t.weights.w_absorp < 0 || t.weights.w_freq < 0) {
      throw ConfigError("loss_weights", "config field 'loss_weights' entries must be non-negative");
    }
  }
  if (t.epochs == 0) throw ConfigError("epochs", "config field 'epochs' must be positive");
  if (t.batch_size == 0) throw ConfigError("batch_size", "config field 'batch_size' must be positive");
  if (!(t.learning_rate > 0.0)) throw ConfigError("learning_rate", "config field 'learning_rate' must be positive");
  if (j.contains("net")) rc.net = parse_net(j["net"], rc.net);
  return rc;
}

std::string run_config_json(const RunConfig& rc) {
  const TrainConfig& t = rc.train;
  nlohmann::ordered_json j;
  j["epochs"] = t.epochs;
  j["batch_size"] = t.batch_size;
  j["learning_rate"] = t.learning_rate;
  j["adam"] = {{"beta1", t.adam.beta1}, {"beta2", t.adam.beta2}, {"eps", t.adam.eps}};
  j["mask_ratio_range"] = {t.ratio_lo, t.ratio_hi};
  j["loss_weights"] = {{"w_pixel", t.weights.w_pixel}, {"w_absorp", t.weights.w_absorp}, {"w_freq", t.weights.w_freq}};
  j["seed"] = t.seed;
  j["net"] = net_json(rc.net);
  return j.dump(2) + "\n";
}

}  // namespace fcdm::model
