#include "fcdm/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "fcdm/baselines.hpp"
#include "fcdm/error.hpp"
#include "fcdm/metrics.hpp"
#include "fcdm/phantom.hpp"
#include "fcdm/radon.hpp"
#include "fcdm/rng.hpp"
#include "fcdm/spectral.hpp"
#include "fcdm/tensor_io.hpp"

namespace fcdm::cli {

namespace fs = std::filesystem;

Dataset load_dataset(const fs::path& path) {
  const fs::path manifest = fs::is_directory(path) ? path / "manifest.json" : path;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_text(manifest));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(manifest.string() + ": " + e.what());
  }
  if (!j.contains("sinograms") || !j["sinograms"].is_array()) {
    throw IoError(manifest.string() + ": manifest lists no sinograms");
  }
  Dataset ds;
  for (const auto& name : j["sinograms"]) {
    const std::string file = name.get<std::string>();
    ds.sinograms.push_back(sinogram_from(io::read_tensor(manifest.parent_path() / file)));
    ds.names.push_back(file);
  }
  return ds;
}

Split split_holdout(const std::vector<Sinogram>& data) {
  Split s;
  const std::size_t n = data.size();
  const std::size_t held = n < 2 ? 0 : std::max<std::size_t>(1, n / 11);
  s.train.assign(data.begin(), data.end() - static_cast<long>(held));
  s.test.assign(data.end() - static_cast<long>(held), data.end());
  return s;
}

const std::vector<std::string>& arm_names() {
  static const std::vector<std::string> names{"full",           "no_freq",      "no_h",
                                              "no_w",           "no_absorp_loss", "no_freq_loss",
                                              "placement_downsample", "placement_latent"};
  return names;
}

model::RunConfig arm_config(const std::string& arm, model::RunConfig c) {
  if (arm == "full" || arm == "placement_latent") {
    c.net.placement = model::Placement::latent;
  } else if (arm == "no_freq") {
    c.net.placement = model::Placement::none;
  } else if (arm == "no_h") {
    c.net.freq_height = false;
  } else if (arm == "no_w") {
    c.net.freq_width = false;
  } else if (arm == "no_absorp_loss") {
    c.train.weights.w_absorp = 0.0;
  } else if (arm == "no_freq_loss") {
    c.train.weights.w_freq = 0.0;
  } else if (arm == "placement_downsample") {
    c.net.placement = model::Placement::downsample_first;
  } else {
    throw ContractViolation("unknown arm '" + arm + "'");
  }
  return c;
}

std::uint64_t eval_mask_seed(std::uint64_t seed, std::size_t sample, std::size_t ratio_index) {
  return mix_seed(seed, sample * 1000 + ratio_index);
}

Method parse_method(const std::string& name) {
  if (name == "fcdm") return Method::fcdm;
  if (name == "linear") return Method::linear;
  if (name == "tv") return Method::tv;
  throw ContractViolation("unknown method '" + name + "' (expected fcdm|linear|tv)");
}

std::string to_string(Method m) {
  switch (m) {
    case Method::fcdm: return "fcdm";
    case Method::linear: return "linear";
    case Method::tv: return "tv";
  }
  return "?";
}

Sinogram inpaint_with(Method method, const model::Model* mdl, const masking::Masked& masked,
                      const masking::MaskSpec& mask) {
  switch (method) {
    case Method::linear: return baselines::linear_interp_inpaint(masked.sinogram, mask);
    case Method::tv: return baselines::tv_inpaint(masked.sinogram, mask);
    case Method::fcdm:
      if (!mdl) throw ContractViolation("method fcdm needs a model");
      return model::inpaint(*mdl, masked.sinogram, masked.indicator);
  }
  return masked.sinogram;
}

std::vector<EvalRow> evaluate(Method method, const model::Model* mdl, const std::vector<Sinogram>& test,
                              const std::vector<double>& ratios, std::uint64_t seed) {
  std::vector<EvalRow> rows;
  for (std::size_t r = 0; r < ratios.size(); ++r) {
    for (std::size_t i = 0; i < test.size(); ++i) {
      const auto mask = masking::sample_mask(test[i].n_angles, ratios[r], eval_mask_seed(seed, i, r));
      const auto masked = masking::apply_mask(test[i], mask);
      const Sinogram pred = inpaint_with(method, mdl, masked, mask);
      const auto s = metrics::eval_masked_normalized(pred, test[i], mask);
      rows.push_back({ratios[r], i, s.ssim, s.psnr});
    }
  }
  return rows;
}

std::pair<double, double> mean_scores(const std::vector<EvalRow>& rows, double ratio) {
  double ssim = 0.0, psnr = 0.0;
  std::size_t n = 0;
  for (const EvalRow& r : rows) {
    if (r.ratio != ratio) continue;
    ssim += r.ssim;
    psnr += r.psnr;
    ++n;
  }
  if (n == 0) return {std::nan(""), std::nan("")};
  return {ssim / double(n), psnr / double(n)};
}

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

model::RunConfig load_config(const std::string& path) {
  if (path.empty()) return {};
  return model::parse_run_config(io::read_text(path));
}

std::vector<spectral::BenchSize> parse_sizes(const std::string& spec) {
  std::vector<spectral::BenchSize> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t v[4];
    char x1, x2, x3;
    std::istringstream is(item);
    if (!(is >> v[0] >> x1 >> v[1] >> x2 >> v[2] >> x3 >> v[3]) || x1 != 'x' || x2 != 'x' || x3 != 'x' ||
        !(is >> std::ws).eof()) {
      throw UsageError("bad size '" + item + "' (expected CxHxWxk)");
    }
    out.push_back({v[0], v[1], v[2], v[3]});
  }
  if (out.empty()) throw UsageError("--sizes is empty");
  return out;
}

void append_csv(const fs::path& path, const std::string& header, const std::string& row) {
  const bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
  std::ofstream os(path, std::ios::app);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  if (fresh) os << header << '\n';
  os << row << '\n';
  if (!os) throw IoError("failed writing " + path.string());
}

struct GenArgs {
  std::string kind = "shepp";
  std::size_t count = 0, size = 64, angles = 0;
  std::uint64_t seed = 0;
  std::string out;
};

void cmd_gen(const GenArgs& a) {
  const auto kind = phantom::parse_dataset_kind(a.kind);
  const fs::path dir = a.out;
  const auto manifest = phantom::gen_dataset(kind, a.count, a.size, a.seed, dir);
  const std::size_t angles = a.angles == 0 ? a.size : a.angles;
  std::vector<std::string> sinos;
  for (std::size_t i = 0; i < manifest.images.size(); ++i) {
    const Image img = image_from(io::read_tensor(dir / manifest.images[i]));
    char name[32];
    std::snprintf(name, sizeof name, "sinogram_%05zu.sint", i);
    io::write_tensor(dir / name, to_tensor(radon::project(img, angles)));
    sinos.emplace_back(name);
  }
  nlohmann::ordered_json j;
  j["kind"] = phantom::to_string(kind);
  j["size"] = a.size;
  j["seed"] = a.seed;
  j["count"] = a.count;
  j["angles"] = angles;
  j["detectors"] = a.size;
  j["images"] = manifest.images;
  j["sinograms"] = sinos;
  io::write_text(dir / "manifest.json", j.dump(2) + "\n");
  std::cerr << "wrote " << a.count << " samples to " << dir.string() << '\n';
}

void cmd_train(const std::string& data, const std::string& config, const std::string& out) {
  model::RunConfig rc = load_config(config);
  const Dataset ds = load_dataset(data);
  if (ds.sinograms.empty()) throw ContractViolation("train: dataset " + data + " is empty");
  const Split split = split_holdout(ds.sinograms);
  rc.net.n_angles = ds.sinograms.front().n_angles;
  rc.net.n_detectors = ds.sinograms.front().n_detectors;
  const auto result = model::train(split.train, rc.net, rc.train, [](const model::EpochRecord& e) {
    std::cerr << "epoch " << e.epoch << " loss " << e.loss << '\n';
  });
  model::save_model(out, result.model);
  io::write_text(fs::path(out) / "history.csv", model::history_csv(result.history));
  io::write_text(fs::path(out) / "config.json", model::run_config_json(rc));
}

void cmd_inpaint(const std::string& model_dir, const std::string& sino, double ratio, std::uint64_t seed,
                 const std::string& method_name, const std::string& out, std::string mask_out) {
  const Method method = parse_method(method_name);
  if (method == Method::fcdm && model_dir.empty()) throw UsageError("--method fcdm requires --model");
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw UsageError("--mask-ratio must lie in [0, 1]");
  std::optional<model::Model> mdl;
  if (method == Method::fcdm) mdl = model::load_model(model_dir);
  const Sinogram clean = sinogram_from(io::read_tensor(sino));
  const auto mask = masking::sample_mask(clean.n_angles, ratio, seed);
  const auto masked = masking::apply_mask(clean, mask);
  const Sinogram pred = inpaint_with(method, mdl ? &*mdl : nullptr, masked, mask);
  io::write_tensor(out, to_tensor(pred));
  if (mask_out.empty()) mask_out = out + ".mask.json";
  io::write_text(mask_out, masking::to_json(mask) + "\n");
}

void cmd_eval(const std::string& pred, const std::string& truth, const std::string& mask_path,
              const std::string& method, const std::string& out) {
  const auto mask = masking::mask_from_json(io::read_text(mask_path));
  const Sinogram p = sinogram_from(io::read_tensor(pred));
  const Sinogram t = sinogram_from(io::read_tensor(truth));
  const auto s = metrics::eval_masked_normalized(p, t, mask);
  std::ostringstream row;
  row << method << ',' << mask.ratio << ',' << mask.seed << ',' << fmt(s.ssim) << ',' << fmt(s.psnr);
  append_csv(out, "method,ratio,seed,ssim,psnr", row.str());
}

void cmd_ablate(const std::string& data, const std::vector<std::string>& arms,
                const std::vector<std::uint64_t>& seeds, const std::string& config, std::size_t epochs,
                const std::string& out) {
  for (const auto& arm : arms) (void)arm_config(arm, {});
  model::RunConfig base = load_config(config);
  if (epochs > 0) base.train.epochs = epochs;
  const Dataset ds = load_dataset(data);
  const Split split = split_holdout(ds.sinograms);
  if (split.test.empty()) throw ContractViolation("ablate: need at least 2 samples for a held-out split");
  base.net.n_angles = ds.sinograms.front().n_angles;
  base.net.n_detectors = ds.sinograms.front().n_detectors;
  const std::vector<double> ratios{0.4, 0.6, 0.8};

  std::ostringstream csv;
  csv << "arm,seed,ratio,ssim,psnr\n";
  for (const auto& arm : arms) {
    for (const std::uint64_t seed : seeds) {
      model::RunConfig rc = arm_config(arm, base);
      rc.net.seed = seed;
      rc.train.seed = seed;
      std::cerr << "ablate: arm " << arm << " seed " << seed << '\n';
      const auto result = model::train(split.train, rc.net, rc.train);
      const auto rows = evaluate(Method::fcdm, &result.model, split.test, ratios, seed);
      for (double r : ratios) {
        const auto [ssim, psnr] = mean_scores(rows, r);
        csv << arm << ',' << seed << ',' << r << ',' << fmt(ssim) << ',' << fmt(psnr) << '\n';
      }
    }
  }
  io::write_text(out, csv.str());
}

void cmd_sweep(const std::string& model_dir, const std::string& data, const std::vector<double>& ratios,
               const std::string& method_name, std::uint64_t seed, const std::string& out) {
  const Method method = parse_method(method_name);
  if (method == Method::fcdm && model_dir.empty()) throw UsageError("--method fcdm requires --model");
  for (double r : ratios) {
    if (!(r >= 0.0 && r <= 1.0)) throw UsageError("--ratios entries must lie in [0, 1]");
  }
  std::optional<model::Model> mdl;
  if (method == Method::fcdm) mdl = model::load_model(model_dir);
  const Dataset ds = load_dataset(data);
  const Split split = split_holdout(ds.sinograms);
  const auto& test = split.test.empty() ? ds.sinograms : split.test;
  const auto rows = evaluate(method, mdl ? &*mdl : nullptr, test, ratios, seed);

  std::ostringstream csv;
  csv << "row,ratio,sample,ssim,psnr\n";
  for (const EvalRow& r : rows) {
    csv << "sample," << r.ratio << ',' << r.sample << ',' << fmt(r.ssim) << ',' << fmt(r.psnr) << '\n';
  }
  for (double ratio : ratios) {
    const auto [ssim, psnr] = mean_scores(rows, ratio);
    csv << "summary," << ratio << ",," << fmt(ssim) << ',' << fmt(psnr) << '\n';
  }
  io::write_text(out, csv.str());
}

void cmd_bench(const std::string& sizes, std::uint64_t seed, int repeats, const std::string& out) {
  const auto rows = spectral::bench_conv(parse_sizes(sizes), seed, repeats);
  io::write_text(out, spectral::bench_csv(rows));
}

void cmd_export(const std::string& in, const std::string& out) { io::write_pgm(out, io::read_tensor(in)); }

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Sparse-view sinogram inpainting with frequency-domain convolution"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate phantoms and their sinograms");
  g->add_option("--kind", gen.kind, "shepp|shapes")->capture_default_str();
  g->add_option("--count", gen.count)->required();
  g->add_option("--size", gen.size)->capture_default_str();
  g->add_option("--seed", gen.seed)->capture_default_str();
  g->add_option("--angles", gen.angles, "Projection angles (default: size)");
  g->add_option("--out", gen.out)->required();

  std::string data, config, out, model_dir, sino, method = "fcdm", pred, truth, mask, sizes, in, mask_out;
  double ratio = 0.5;
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  int repeats = 3;
  std::vector<std::string> arms;
  std::vector<std::uint64_t> seeds;
  std::vector<double> ratios;

  auto* tr = app.add_subcommand("train", "Train a model on a generated dataset");
  tr->add_option("--data", data, "Manifest or dataset directory")->required();
  tr->add_option("--config", config, "JSON run configuration")->required();
  tr->add_option("--out", out, "Model directory")->required();

  auto* ip = app.add_subcommand("inpaint", "Mask a sinogram and fill the missing rows");
  ip->add_option("--model", model_dir);
  ip->add_option("--sino", sino)->required();
  ip->add_option("--mask-ratio", ratio)->required();
  ip->add_option("--seed", seed)->capture_default_str();
  ip->add_option("--method", method, "fcdm|linear|tv")->capture_default_str();
  ip->add_option("--out", out)->required();
  ip->add_option("--mask-out", mask_out, "Mask JSON path (default: <out>.mask.json)");

  auto* ev = app.add_subcommand("eval", "Score an inpainted sinogram on its masked rows");
  ev->add_option("--pred", pred)->required();
  ev->add_option("--truth", truth)->required();
  ev->add_option("--mask", mask)->required();
  ev->add_option("--method", method, "Label for the CSV row")->capture_default_str();
  ev->add_option("--out", out)->required();

  auto* ab = app.add_subcommand("ablate", "Train and score ablation arms");
  ab->add_option("--data", data)->required();
  ab->add_option("--arms", arms)->required()->delimiter(',');
  ab->add_option("--seeds", seeds)->required()->delimiter(',');
  ab->add_option("--config", config, "JSON run configuration shared by all arms");
  ab->add_option("--epochs", epochs, "Override the configured epoch count");
  ab->add_option("--out", out)->required();

  auto* sw = app.add_subcommand("sweep", "Score one method across mask ratios");
  sw->add_option("--model", model_dir);
  sw->add_option("--data", data)->required();
  sw->add_option("--ratios", ratios)->required()->delimiter(',');
  sw->add_option("--method", method, "fcdm|linear|tv")->capture_default_str();
  sw->add_option("--seed", seed)->capture_default_str();
  sw->add_option("--out", out)->required();

  auto* be = app.add_subcommand("bench", "Time direct against FFT circular convolution");
  be->add_option("--sizes", sizes, "Comma-separated CxHxWxk")->required();
  be->add_option("--seed", seed)->capture_default_str();
  be->add_option("--repeats", repeats)->capture_default_str();
  be->add_option("--out", out)->required();

  auto* ex = app.add_subcommand("export", "Write a tensor plane as an 8-bit PGM");
  ex->add_option("--in", in)->required();
  ex->add_option("--out", out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*g) cmd_gen(gen);
    if (*tr) cmd_train(data, config, out);
    if (*ip) cmd_inpaint(model_dir, sino, ratio, seed, method, out, mask_out);
    if (*ev) cmd_eval(pred, truth, mask, method, out);
    if (*ab) cmd_ablate(data, arms, seeds, config, epochs, out);
    if (*sw) cmd_sweep(model_dir, data, ratios, method, seed, out);
    if (*be) cmd_bench(sizes, seed, repeats, out);
    if (*ex) cmd_export(in, out);
  } catch (const model::ConfigError& e) {
    std::cerr << "config error [" << e.field() << "]: " << e.what() << '\n';
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const ContractViolation& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace fcdm::cli
