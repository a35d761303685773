#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fcdm/grid.hpp"
#include "fcdm/model.hpp"

// Command-line front end plus the experiment helpers it shares with the
// acceptance suite.
namespace fcdm::cli {

/// Sinogram dataset as listed by a `gen` manifest.
struct Dataset {
  std::vector<Sinogram> sinograms;
  std::vector<std::string> names;
};

/// `path` is a manifest.json or the directory holding one.
Dataset load_dataset(const std::filesystem::path& path);

/// Held-out evaluation split: the last max(1, n / 11) samples (none when n < 2).
struct Split {
  std::vector<Sinogram> train, test;
};
Split split_holdout(const std::vector<Sinogram>& data);

/// Ablation arm names.
const std::vector<std::string>& arm_names();
/// Applies an arm to the shared configuration. Throws ContractViolation on an unknown arm.
model::RunConfig arm_config(const std::string& arm, model::RunConfig base);

/// Seed of the evaluation mask for test sample `sample` at ratio index `ratio_index`.
std::uint64_t eval_mask_seed(std::uint64_t seed, std::size_t sample, std::size_t ratio_index);

enum class Method { fcdm, linear, tv };
Method parse_method(const std::string& name);
std::string to_string(Method m);

/// Fills the masked rows of `masked` with the chosen method. `model` is
/// required only for Method::fcdm.
Sinogram inpaint_with(Method method, const model::Model* model, const masking::Masked& masked,
                      const masking::MaskSpec& mask);

/// Masked-region scores per test sample and ratio (scores normalized by the truth peak).
struct EvalRow {
  double ratio = 0.0;
  std::size_t sample = 0;
  double ssim = 0.0, psnr = 0.0;
};
std::vector<EvalRow> evaluate(Method method, const model::Model* model, const std::vector<Sinogram>& test,
                              const std::vector<double>& ratios, std::uint64_t seed);

/// Mean SSIM and PSNR over the rows with the given ratio.
std::pair<double, double> mean_scores(const std::vector<EvalRow>& rows, double ratio);

/// Entry point. Returns 0 on success, 1 on runtime or I/O failure, 2 on usage or config errors.
int run_cli(int argc, char** argv);

}  // namespace fcdm::cli
