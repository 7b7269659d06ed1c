#include <fstream>
#include <iterator>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "qrt/cli.hpp"
#include "qrt/config.hpp"
#include "qrt/error.hpp"
#include "qrt/seeding.hpp"
#include "temp_dir.hpp"

using namespace qrt;
using namespace qrt::cli;

namespace {

// Small enough that a whole pipeline runs in about a second.
constexpr const char* kTinyConfig = R"(scale = "ci"
seed = 77
backends = ["raw", "fnn", "trmnn"]

[noise]
sigma = 0.2

[dataset]
train_shots_per_state = 200
test_shots_per_state = 100

[rabi]
n_steps = 10
traces = 60
m_values = [10, 60]

[network]
hidden = [16]

[train]
max_epochs = 4

[sweep]
p_values = [0.0, 0.5, 1.0]
shots_per_point = 50
)";

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::filesystem::path write_config(const TempDir& dir, const std::string& text,
                                   const char* name = "run.toml") {
  const auto p = dir / name;
  std::ofstream(p) << text;
  return p;
}

std::string file_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string config_error(std::string_view text) {
  try {
    parse_config(text, "x.toml");
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
    return e.what();
  }
  ADD_FAILURE() << "no error for:\n" << text;
  return {};
}

}  // namespace

TEST(Config, PresetsDiffer) {
  const auto paper = preset(Scale::kPaper);
  EXPECT_EQ(paper.readout.n_samples, 2000u);
  EXPECT_EQ(paper.train_shots_per_state, 4000u);
  EXPECT_EQ(paper.hidden_dims, (std::vector<std::size_t>{900, 250, 50}));
  EXPECT_EQ(paper.topology(1).input_dim, 4000u);
  const auto ci = preset(Scale::kCi);
  EXPECT_EQ(ci.readout.n_samples, 256u);
  EXPECT_EQ(ci.train_shots_per_state, 1000u);
  EXPECT_EQ(ci.hidden_dims, (std::vector<std::size_t>{128, 64, 16}));
  EXPECT_EQ(ci.topology(1).input_dim, 512u);
  EXPECT_EQ(ci.rabi.shots_per_step, 600u);
  EXPECT_NO_THROW(paper.validate());
  EXPECT_NO_THROW(ci.validate());
}

TEST(Config, ParsesTablesOverPreset) {
  const auto c = parse_config(kTinyConfig, "tiny.toml");
  EXPECT_EQ(c.scale, Scale::kCi);
  EXPECT_EQ(c.readout.n_samples, 256u);  // from the preset
  ASSERT_TRUE(c.noise_sigma);
  EXPECT_EQ(*c.noise_sigma, 0.2);
  EXPECT_EQ(c.train_shots_per_state, 200u);
  EXPECT_EQ(c.rabi.n_steps, 10u);
  EXPECT_EQ(c.rabi.shots_per_step, 60u);
  EXPECT_EQ(c.m_values, (std::vector<std::size_t>{10, 60}));
  EXPECT_EQ(c.hidden_dims, (std::vector<std::size_t>{16}));
  EXPECT_EQ(c.train.max_epochs, 4u);
  EXPECT_EQ(c.sweep_p.size(), 3u);
  EXPECT_EQ(c.seed, 77u);
  EXPECT_EQ(c.seeds, derive_seeds(77));
}

TEST(Config, DefaultScaleAppliesWithoutScaleKey) {
  EXPECT_EQ(parse_config("", "e.toml").scale, Scale::kPaper);
  EXPECT_EQ(parse_config("", "e.toml", Scale::kCi).readout.n_samples, 256u);
  // An explicit key wins over the default.
  EXPECT_EQ(parse_config("scale = \"paper\"\n", "e.toml", Scale::kCi).scale, Scale::kPaper);
}

TEST(Config, UnknownKeyReportsLine) {
  const auto msg = config_error("seed = 1\n\n[readout]\nn_samples = 256\nomega_if = 62.5\n");
  EXPECT_NE(msg.find("x.toml:5"), std::string::npos) << msg;
  EXPECT_NE(msg.find("readout.omega_if"), std::string::npos) << msg;
  EXPECT_NE(config_error("[nosuch]\na = 1\n").find("nosuch"), std::string::npos);
}

TEST(Config, TypeAndValueErrors) {
  const auto msg = config_error("[dataset]\ntrain_shots_per_state = \"many\"\n");
  EXPECT_NE(msg.find("x.toml:2"), std::string::npos) << msg;
  EXPECT_NE(msg.find("train_shots_per_state"), std::string::npos) << msg;
  config_error("scale = \"huge\"\n");
  config_error("backends = [\"raw\", \"svm\"]\n");
  config_error("[readout]\nn_samples = 2001\n");  // not a whole number of IF periods
  config_error("[rabi]\ntraces = 100\nm_values = [10, 600]\n");
  config_error("[dataset]\ntrain_shots_per_state = -4\n");
  const auto syntax = config_error("seed = = 3\n");
  EXPECT_NE(syntax.find("x.toml:1"), std::string::npos) << syntax;
}

TEST(Config, SeedOverrideRederivesStreams) {
  auto c = parse_config("[seeds]\nrabi = 5\n", "s.toml");
  EXPECT_EQ(c.seeds.rabi, 5u);
  override_seed(c, 123);
  EXPECT_EQ(c.seed, 123u);
  EXPECT_EQ(c.seeds, derive_seeds(123));
  const auto s = derive_seeds(123);
  EXPECT_EQ(s.rabi, derive_seed(123, "rabi"));
  EXPECT_EQ(s.train_set, derive_seed(123, "train-set"));
  EXPECT_NE(s.fnn_init, s.trmnn_init);
}

TEST(Config, JsonEchoesValues) {
  const auto j = to_json(parse_config(kTinyConfig, "tiny.toml"));
  EXPECT_EQ(j.at("scale"), "ci");
  EXPECT_EQ(j.at("seed"), 77);
}

TEST(Cli, ExitCodes) {
  TempDir dir("cli_codes");
  EXPECT_EQ(run_cli({"--help"}).code, kExitOk);
  EXPECT_EQ(run_cli({}).code, kExitUsage);
  EXPECT_EQ(run_cli({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(run_cli({"train", "--preset", "ci", "-b", "svm", "-o", (dir / "o").string()}).code,
            kExitUsage);
  const auto bad_cfg = write_config(dir, "[readout]\nbogus = 1\n", "bad.toml");
  const auto r = run_cli({"synth", "-c", bad_cfg.string(), "-o", (dir / "o").string()});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("bad.toml:2"), std::string::npos) << r.err;
  const auto missing =
      run_cli({"eval", "--preset", "ci", "-d", (dir / "none.qrtd").string(), "-o",
               (dir / "o").string()});
  EXPECT_EQ(missing.code, kExitData);
  EXPECT_EQ(run_cli({"demod", "-d", (dir / "none.qrtd").string()}).code, kExitData);
  EXPECT_EQ(exit_code(ErrorKind::kNumerical), kExitNumerical);
  EXPECT_EQ(exit_code(ErrorKind::kStructural), kExitData);
}

TEST(Cli, SynthIsByteIdenticalAcrossRuns) {
  TempDir dir("cli_synth");
  const auto cfg = write_config(dir, kTinyConfig);
  for (const char* out : {"a", "b"}) {
    ASSERT_EQ(run_cli({"-q", "synth", "-c", cfg.string(), "-o", (dir / out).string()}).code,
              kExitOk);
  }
  for (const char* f : {"train.qrtd", "test.qrtd", "rabi.qrtd", "manifest.json", "noise.json"}) {
    ASSERT_TRUE(std::filesystem::exists(dir / "a" / f)) << f;
    EXPECT_EQ(file_text(dir / "a" / f), file_text(dir / "b" / f)) << f;
  }
  // A different seed changes the data.
  ASSERT_EQ(run_cli({"-q", "synth", "-c", cfg.string(), "--seed", "78", "-o",
                     (dir / "c").string()})
                .code,
            kExitOk);
  EXPECT_NE(file_text(dir / "a" / "train.qrtd"), file_text(dir / "c" / "train.qrtd"));
}

TEST(Cli, PipelineStagesAndIdempotentEval) {
  TempDir dir("cli_pipeline");
  const auto cfg = write_config(dir, kTinyConfig);
  const auto out = (dir / "o").string();
  ASSERT_EQ(run_cli({"-q", "synth", "-c", cfg.string(), "-o", out}).code, kExitOk);
  ASSERT_EQ(run_cli({"-q", "train", "-c", cfg.string(), "-o", out}).code, kExitOk);
  for (const char* f : {"raw.json", "fnn.qrtm", "registry.json", "trmnn_q0.qrtm"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / "o" / f)) << f;
  }
  ASSERT_EQ(run_cli({"-q", "eval", "-c", cfg.string(), "-o", out}).code, kExitOk);
  const auto first = file_text(dir / "o" / "assignment.json");
  ASSERT_EQ(run_cli({"-q", "eval", "-c", cfg.string(), "-o", out}).code, kExitOk);
  EXPECT_EQ(file_text(dir / "o" / "assignment.json"), first);
  const auto j = nlohmann::json::parse(first);
  for (const char* b : {"raw", "fnn", "trmnn"}) {
    const double f = j.at("backends").at(b).at("fidelity");
    EXPECT_GT(f, 0.5) << b;
    EXPECT_LE(f, 1.0) << b;
  }
  ASSERT_EQ(run_cli({"-q", "rabi", "-c", cfg.string(), "-o", out}).code, kExitOk);
  ASSERT_EQ(run_cli({"-q", "sweep", "-c", cfg.string(), "-o", out}).code, kExitOk);
  const auto report = run_cli({"-q", "report", "-c", cfg.string(), "-o", out});
  ASSERT_EQ(report.code, kExitOk);
  EXPECT_NE(report.out.find("trmnn"), std::string::npos);
  for (const char* f : {"rabi_curves.csv", "rabi_fidelity.json", "variance.json", "sweep.json",
                        "report.md"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / "o" / f)) << f;
  }

  const auto demod = run_cli({"demod", "-d", (dir / "o" / "test.qrtd").string()});
  ASSERT_EQ(demod.code, kExitOk);
  EXPECT_EQ(demod.out.rfind("shot_index,I,Q\n", 0), 0u);
  EXPECT_EQ(std::count(demod.out.begin(), demod.out.end(), '\n'), 201);

  const auto raw = run_cli({"raw-eval", "--train", (dir / "o" / "train.qrtd").string(), "--test",
                            (dir / "o" / "test.qrtd").string()});
  ASSERT_EQ(raw.code, kExitOk);
  EXPECT_EQ(nlohmann::json::parse(raw.out).at("F_A"), j.at("backends").at("raw").at("fidelity"));
}

TEST(Cli, ModelInputMismatchIsDataError) {
  TempDir dir("cli_mismatch");
  const auto cfg = write_config(dir, kTinyConfig);
  const auto out = (dir / "o").string();
  ASSERT_EQ(run_cli({"-q", "synth", "-c", cfg.string(), "-o", out}).code, kExitOk);
  ASSERT_EQ(run_cli({"-q", "train", "-c", cfg.string(), "-o", out}).code, kExitOk);
  // Same setup with 128 samples per shot.
  std::string other = kTinyConfig;
  other += "\n[readout]\nn_samples = 128\n";
  const auto cfg2 = write_config(dir, other, "other.toml");
  const auto out2 = (dir / "p").string();
  ASSERT_EQ(run_cli({"-q", "synth", "-c", cfg2.string(), "-o", out2}).code, kExitOk);
  const auto r = run_cli({"eval", "-c", cfg2.string(), "-o", out2, "-m", out, "-b", "fnn"});
  EXPECT_EQ(r.code, kExitData);
  EXPECT_NE(r.err.find("256"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("128"), std::string::npos) << r.err;
}
