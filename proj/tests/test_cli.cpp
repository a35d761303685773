#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "fcdm/cli.hpp"
#include "fcdm/error.hpp"
#include "fcdm/tensor_io.hpp"
#include "test_util.hpp"

using namespace fcdm;
namespace fs = std::filesystem;

namespace {

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "fcdm");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return cli::run_cli(int(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) out.push_back(line);
  return out;
}

fs::path make_data(const std::string& name, std::size_t count, std::size_t size = 16) {
  const fs::path dir = fcdm::testing::temp_dir(name);
  EXPECT_EQ(run({"gen", "--kind", "shepp", "--count", std::to_string(count), "--size", std::to_string(size),
                 "--seed", "3", "--out", dir.string()}),
            0);
  return dir;
}

}  // namespace

TEST(Cli, GenWritesFilesAndIsDeterministic) {
  const fs::path a = make_data("gen_a", 5);
  const fs::path b = make_data("gen_b", 5);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(a)) files += e.path().extension() == ".sint";
  EXPECT_EQ(files, 10u);
  for (const auto& e : fs::directory_iterator(a)) {
    EXPECT_EQ(slurp(e.path()), slurp(b / e.path().filename())) << e.path();
  }
  const auto ds = cli::load_dataset(a);
  EXPECT_EQ(ds.sinograms.size(), 5u);
  EXPECT_EQ(ds.sinograms[0].n_angles, 16u);
}

TEST(Cli, GenZeroCountAndBadKind) {
  const fs::path dir = make_data("gen_zero", 0);
  EXPECT_TRUE(cli::load_dataset(dir).sinograms.empty());
  EXPECT_EQ(run({"gen", "--kind", "cubes", "--count", "1", "--out", dir.string()}), 2);
}

TEST(Cli, InpaintLinearAndEvalIdentity) {
  const fs::path dir = make_data("ip", 1);
  const std::string sino = (dir / "sinogram_00000.sint").string();
  const std::string out = (dir / "pred.sint").string();
  ASSERT_EQ(run({"inpaint", "--sino", sino, "--mask-ratio", "0.5", "--seed", "4", "--method", "linear", "--out",
                 out}),
            0);
  EXPECT_TRUE(fs::exists(out + ".mask.json"));
  EXPECT_EQ(run({"inpaint", "--sino", sino, "--mask-ratio", "0.5", "--method", "fcdm", "--out", out}), 2);

  const std::string csv = (dir / "eval.csv").string();
  ASSERT_EQ(run({"eval", "--pred", sino, "--truth", sino, "--mask", out + ".mask.json", "--method", "x", "--out",
                 csv}),
            0);
  ASSERT_EQ(run({"eval", "--pred", out, "--truth", sino, "--mask", out + ".mask.json", "--out", csv}), 0);
  const auto rows = lines(slurp(csv));
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], "method,ratio,seed,ssim,psnr");
  EXPECT_NE(rows[1].find("1.000000,99.000000"), std::string::npos) << rows[1];
}

TEST(Cli, ErrorExitCodes) {
  const fs::path dir = fcdm::testing::temp_dir("errors");
  EXPECT_EQ(run({"inpaint", "--sino", (dir / "nope.sint").string(), "--mask-ratio", "0.5", "--method", "linear",
                 "--out", (dir / "o.sint").string()}),
            1);
  EXPECT_EQ(run({"bench", "--sizes", "4x8x8", "--out", (dir / "b.csv").string()}), 2);
  EXPECT_EQ(run({"frobnicate"}), 2);
  io::write_text(dir / "bad.json", R"({"epochs": 2, "momentum": 0.5})");
  const fs::path data = make_data("errors_data", 3);
  EXPECT_EQ(run({"train", "--data", data.string(), "--config", (dir / "bad.json").string(), "--out",
                 (dir / "m").string()}),
            2);
  EXPECT_EQ(run({"ablate", "--data", data.string(), "--arms", "full,no_gravity", "--seeds", "1", "--out",
                 (dir / "a.csv").string()}),
            2);
}

TEST(Cli, AblateRowCount) {
  const fs::path data = make_data("ablate_data", 4);
  const fs::path out = fcdm::testing::temp_dir("ablate") / "ablation.csv";
  ASSERT_EQ(run({"ablate", "--data", data.string(), "--arms", "full,no_freq", "--seeds", "1,2", "--epochs", "1",
                 "--out", out.string()}),
            0);
  const auto rows = lines(slurp(out));
  ASSERT_EQ(rows.size(), 1u + 2 * 2 * 3);
  EXPECT_EQ(rows[0], "arm,seed,ratio,ssim,psnr");
  EXPECT_EQ(rows[1].rfind("full,1,0.4,", 0), 0u) << rows[1];
}

TEST(Cli, ArmConfigs) {
  const model::RunConfig base;
  EXPECT_EQ(cli::arm_config("no_freq", base).net.placement, model::Placement::none);
  EXPECT_FALSE(cli::arm_config("no_h", base).net.freq_height);
  EXPECT_EQ(cli::arm_config("no_absorp_loss", base).train.weights.w_absorp, 0.0);
  EXPECT_EQ(cli::arm_config("placement_downsample", base).net.placement, model::Placement::downsample_first);
  EXPECT_THROW(cli::arm_config("bogus", base), ContractViolation);
}

TEST(Cli, TrainThenSweep) {
  const fs::path data = make_data("sweep_data", 12);
  const fs::path dir = fcdm::testing::temp_dir("sweep");
  io::write_text(dir / "cfg.json", R"({"epochs": 1, "batch_size": 4, "net": {"channels": 4}})");
  ASSERT_EQ(run({"train", "--data", data.string(), "--config", (dir / "cfg.json").string(), "--out",
                 (dir / "model").string()}),
            0);
  EXPECT_EQ(lines(slurp(dir / "model" / "history.csv")).size(), 2u);
  ASSERT_EQ(run({"sweep", "--model", (dir / "model").string(), "--data", data.string(), "--ratios",
                 "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9", "--out", (dir / "s.csv").string()}),
            0);
  std::size_t summaries = 0;
  for (const auto& row : lines(slurp(dir / "s.csv"))) {
    if (row.rfind("summary,", 0) != 0) continue;
    ++summaries;
    EXPECT_EQ(row.find("nan"), std::string::npos) << row;
    EXPECT_EQ(row.find("inf"), std::string::npos) << row;
  }
  EXPECT_EQ(summaries, 9u);
}

TEST(Cli, SplitHoldout) {
  std::vector<Sinogram> data(22, Sinogram(4, 4));
  const auto s = cli::split_holdout(data);
  EXPECT_EQ(s.train.size(), 20u);
  EXPECT_EQ(s.test.size(), 2u);
  EXPECT_TRUE(cli::split_holdout({Sinogram(4, 4)}).test.empty());
  EXPECT_EQ(cli::split_holdout(std::vector<Sinogram>(3, Sinogram(4, 4))).test.size(), 1u);
}

TEST(Cli, TensorFileRoundTripBitExact) {
  Rng rng(8);
  const Tensor t = fcdm::testing::random_tensor({2, 3, 5}, rng, -1e3, 1e3);
  const fs::path p = fcdm::testing::temp_dir("tio") / "t.sint";
  io::write_tensor(p, t);
  const Tensor back = io::read_tensor(p);
  EXPECT_EQ(back.shape(), t.shape());
  EXPECT_EQ(fcdm::testing::max_abs_diff(back.data(), t.data()), 0.0);
}

TEST(Cli, BenchAndExport) {
  const fs::path dir = fcdm::testing::temp_dir("bench");
  ASSERT_EQ(run({"bench", "--sizes", "2x8x16x3", "--repeats", "1", "--out", (dir / "b.csv").string()}), 0);
  EXPECT_EQ(lines(slurp(dir / "b.csv")).size(), 2u);
  const fs::path data = make_data("export_data", 1);
  ASSERT_EQ(run({"export", "--in", (data / "image_00000.sint").string(), "--out", (dir / "i.pgm").string()}), 0);
  EXPECT_EQ(slurp(dir / "i.pgm").substr(0, 2), "P5");
}
