#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cyclevc/cli.hpp"
#include "cyclevc/config.hpp"
#include "cyclevc/metrics.hpp"
#include "cyclevc/synth.hpp"

using namespace cyclevc;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("cyclevc_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  return path;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SynthSpec tiny_synth_spec() {
  SynthSpec s;
  s.seed = 5;
  s.n_train = 3;
  s.n_eval = 2;
  s.q = 6;
  s.t_min = 40;
  s.t_max = 48;
  return s;
}

// minimal corpus + config on disk for command-level runs
struct TrainFixture {
  TempDir dir{"cli_train"};
  std::string config_path;

  explicit TrainFixture(const std::string& extra = "") {
    generate_corpus(tiny_synth_spec(), dir.file("data"));
    std::ostringstream cfg;
    cfg << "train_manifest_x=data/manifest_a_train.txt\n"
        << "train_manifest_y=data/manifest_b_train.txt\n"
        << "iterations=4\nlr_g=0.0002\nlr_d=0.0001\n"
        << "crop_frames=16\nbase_channels=2\nn_res=1\n"
        << "id_cutoff_iter=2\nadv_steps=2\nseed=9\n"
        << "checkpoint_every=2\n"
        << "out_dir=" << dir.file("run") << "\n"
        << extra;
    config_path = write_file(dir.file("run.cfg"), cfg.str());
  }
};

}  // namespace

TEST_CASE("train config parsing") {
  SUBCASE("unknown key rejected") {
    CHECK_THROWS_WITH_AS(
        parse_train_config_text("train_manifest_x=a\ntrain_manifest_y=b\nfrobnicate=1\n",
                                "test"),
        doctest::Contains("unknown key"), ValidationError);
  }
  SUBCASE("adv_steps=3 rejected at parse time") {
    CHECK_THROWS_WITH_AS(
        parse_train_config_text(
            "train_manifest_x=a\ntrain_manifest_y=b\nadv_steps=3\n", "test"),
        doctest::Contains("adv_steps"), ValidationError);
  }
  SUBCASE("missing manifests rejected") {
    CHECK_THROWS_AS(parse_train_config_text("iterations=10\n", "test"),
                    ValidationError);
  }
  SUBCASE("comments and whitespace tolerated") {
    const TrainRunConfig c = parse_train_config_text(
        "# a comment\n  train_manifest_x = a  # inline\ntrain_manifest_y=b\n"
        "lambda_cyc=12.5\n",
        "test");
    CHECK(c.train_manifest_x == "a");
    CHECK(c.train.lambda_cyc == 12.5);
  }
  SUBCASE("format/parse round trip is exact") {
    TrainRunConfig c;
    c.train_manifest_x = "mx.txt";
    c.train_manifest_y = "my.txt";
    c.train.lr_g = 0.00037;
    c.train.lambda_cyc = 9.75;
    c.train.adv_steps = 1;
    c.train.generator_kind = GeneratorKind::k1d;
    c.train.seed = 123456789;
    const TrainRunConfig rt = parse_train_config_text(format_train_config(c), "echo");
    CHECK(format_train_config(rt) == format_train_config(c));
  }
}

TEST_CASE("synthetic corpus: determinism, bounds and oracle consistency") {
  TempDir a("synth_a"), b("synth_b");
  const SynthSpec spec = tiny_synth_spec();
  const SynthOutput oa = generate_corpus(spec, a.path.string());
  const SynthOutput ob = generate_corpus(spec, b.path.string());

  SUBCASE("same seed gives byte-identical corpora") {
    for (const char* rel : {"a/train/a_train_000.mcp", "b/eval/b_eval_001.mcp",
                            "oracle/from_a_000.mcp", "ground_truth.txt"})
      CHECK(slurp((a.path / rel).string()) == slurp((b.path / rel).string()));
  }
  SUBCASE("dimension and length bounds respected") {
    for (const auto& p : read_manifest(oa.manifest_a_train)) {
      const FeatureSequence f = read_features(p);
      CHECK(f.q == spec.q);
      CHECK(f.t >= spec.t_min);
      CHECK(f.t <= spec.t_max);
    }
  }
  SUBCASE("ground-truth map applied to eval files reproduces the oracle targets") {
    const GroundTruthMap map = read_ground_truth(oa.ground_truth);
    const auto evals = read_manifest(oa.manifest_a_eval);
    for (std::size_t i = 0; i < evals.size(); ++i) {
      const FeatureSequence src = read_features(evals[i]);
      const FeatureSequence mapped = apply_ground_truth_xy(map, src);
      char name[64];
      std::snprintf(name, sizeof name, "oracle/from_a_%03zu.mcp", i);
      const FeatureSequence target = read_features((a.path / name).string());
      // stored features are f32-quantized, so "zero" means round-off level
      CHECK(mcd_utterance(mapped, target) < 1e-3);
    }
  }
  SUBCASE("transform round trip is exact in memory") {
    Rng rng(7);
    const SpeakerTransform t = random_transform(spec, rng);
    FeatureSequence x(spec.q, 50);
    for (auto& v : x.values) v = rng.normal();
    const FeatureSequence rt = invert_transform(t, apply_transform(t, x));
    for (std::size_t i = 0; i < x.values.size(); ++i)
      CHECK(rt.values[i] == doctest::Approx(x.values[i]).epsilon(1e-9));
  }
  SUBCASE("non-invertible transform specs rejected") {
    SynthSpec bad = spec;
    bad.fir_max = 0.6;
    CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("non-invertible"),
                         ValidationError);
    SynthSpec bad2 = spec;
    bad2.scale_min = 0.0;
    CHECK_THROWS_AS(bad2.validate(), ValidationError);
  }
}

TEST_CASE("cmd_train: plumbing contract") {
  TrainFixture fx;
  cli::run_train(fx.config_path);
  const std::string run = fs::path(fx.config_path).parent_path() / "run";

  SUBCASE("loss log has one row per iteration") {
    const std::string log = slurp(run + "/loss_log.csv");
    int rows = 0;
    for (char c : log) rows += c == '\n';
    CHECK(rows == 4);
  }
  SUBCASE("run metadata reparses to the identical configuration") {
    const TrainRunConfig echoed = parse_train_config(run + "/run_config.txt");
    CHECK(format_train_config(echoed) == slurp(run + "/run_config.txt"));
  }
  SUBCASE("checkpoints and stats written") {
    CHECK(fs::exists(run + "/ckpt_final.cvc2"));
    CHECK(fs::exists(run + "/ckpt_2.cvc2"));
    CHECK(fs::exists(run + "/stats_x.txt"));
  }
  SUBCASE("same config and seed reproduce the loss log exactly") {
    const std::string first = slurp(run + "/loss_log.csv");
    cli::run_train(fx.config_path);
    CHECK(slurp(run + "/loss_log.csv") == first);
  }
  SUBCASE("seed override changes the run") {
    const std::string first = slurp(run + "/loss_log.csv");
    cli::run_train(fx.config_path, 424242);
    CHECK(slurp(run + "/loss_log.csv") != first);
  }
}

TEST_CASE("cmd_train: validation failures happen before any compute") {
  TrainFixture fx;
  SUBCASE("missing manifest") {
    const std::string cfg = write_file(
        fx.dir.file("bad.cfg"),
        "train_manifest_x=does_not_exist.txt\ntrain_manifest_y=also_missing.txt\n");
    CHECK_THROWS_AS(cli::run_train(cfg), ValidationError);
  }
  SUBCASE("dimension mismatch between speakers") {
    SynthSpec other = tiny_synth_spec();
    other.q = 7;
    generate_corpus(other, fx.dir.file("data7"));
    const std::string cfg = write_file(
        fx.dir.file("mix.cfg"),
        "train_manifest_x=data/manifest_a_train.txt\n"
        "train_manifest_y=data7/manifest_b_train.txt\n"
        "iterations=1\ncrop_frames=16\nbase_channels=2\nn_res=1\nid_cutoff_iter=0\n");
    CHECK_THROWS_WITH_AS(cli::run_train(cfg), doctest::Contains("dimension"),
                         ValidationError);
  }
}

TEST_CASE("cmd_convert: shape contract, differential output and evaluation") {
  TrainFixture fx;
  cli::run_train(fx.config_path);
  const std::string run = fs::path(fx.config_path).parent_path() / "run";

  cli::ConvertOptions opt;
  opt.checkpoint = run + "/ckpt_final.cvc2";
  opt.input = fx.dir.file("data/a/eval");
  opt.out_dir = fx.dir.file("converted");
  opt.direction = "xy";
  opt.differential = true;
  cli::run_convert(opt);

  SUBCASE("outputs preserve Q x T, differential file reconstructs") {
    for (const auto& p : read_manifest(fx.dir.file("data/manifest_a_eval.txt"))) {
      const FeatureSequence src = read_features(p);
      const std::string name = fs::path(p).filename();
      const FeatureSequence out = read_features(fx.dir.file("converted/" + name));
      CHECK(out.q == src.q);
      CHECK(out.t == src.t);
      CHECK(all_finite(out.values));
      const FeatureSequence diff =
          read_features(fx.dir.file("converted/differential/" + name));
      for (int d = 0; d < src.q; ++d)
        for (int i = 0; i < src.t; ++i)
          CHECK(diff.at(d, i) ==
                doctest::Approx(static_cast<float>(out.at(d, i) - src.at(d, i)))
                    .epsilon(1e-4));
    }
  }
  SUBCASE("bad direction rejected") {
    opt.direction = "xz";
    CHECK_THROWS_AS(cli::run_convert(opt), ValidationError);
  }
  SUBCASE("differential of identical source/converted is the zero file") {
    const FeatureSequence any = read_features(
        read_manifest(fx.dir.file("data/manifest_a_eval.txt")).front());
    const FeatureSequence zero = differential_mceps(any, any);
    for (double v : zero.values) CHECK(v == 0.0);
  }
  SUBCASE("evaluate against the oracle targets end to end") {
    cli::run_evaluate(fx.dir.file("converted"), fx.dir.file("data/oracle"),
                      fx.dir.file("data/pairs_xy.txt"), fx.dir.file("report.csv"));
    const std::string report = slurp(fx.dir.file("report.csv"));
    int rows = 0;
    for (char c : report) rows += c == '\n';
    CHECK(rows == 2 + 1);  // n_eval pairs + summary
    CHECK(report.find("summary,") != std::string::npos);
  }
}

TEST_CASE("cmd_convert: near-identity model keeps the conversion error bounded") {
  // a short identity-heavy run behaves identity-ish; converting eval files
  // must stay within a loose per-dimension error bound of the oracle
  TrainFixture fx("lambda_id=20\n");
  {
    std::ofstream cfg(fx.config_path, std::ios::app);
    cfg << "iterations=30\nid_cutoff_iter=30\n";
  }
  cli::run_train(fx.config_path);
  const std::string run = fs::path(fx.config_path).parent_path() / "run";
  const Checkpoint ck = load_checkpoint(run + "/ckpt_final.cvc2");
  const cli::LoadedConverter conv = cli::load_converter(ck, "xy");

  const auto evals = read_manifest(fx.dir.file("data/manifest_a_eval.txt"));
  const GroundTruthMap map =
      read_ground_truth(fx.dir.file("data/ground_truth.txt"));
  for (const auto& p : evals) {
    const FeatureSequence src = read_features(p);
    const FeatureSequence out = cli::convert_sequence(conv, src);
    const FeatureSequence oracle = apply_ground_truth_xy(map, src);
    double err = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < out.values.size(); ++i) {
      err += std::abs(out.values[i] - oracle.values[i]);
      scale += std::abs(oracle.values[i]);
    }
    CHECK(err / out.values.size() < 5.0 + 2.0 * scale / out.values.size());
  }
}

TEST_CASE("cmd_evaluate: orphan detection and self-comparison") {
  TempDir dir("eval");
  fs::create_directories(dir.file("conv"));
  fs::create_directories(dir.file("tgt"));
  Rng rng(3);
  for (int i = 0; i < 3; ++i) {
    FeatureSequence f(4, 70);
    for (auto& v : f.values) v = rng.normal();
    const std::string name = "u" + std::to_string(i) + ".mcp";
    write_features(dir.file("conv/" + name), f);
    write_features(dir.file("tgt/" + name), f);
  }
  const std::string pairs =
      write_file(dir.file("pairs.txt"), "u0.mcp,u0.mcp\nu1.mcp,u1.mcp\nu2.mcp,u2.mcp\n");

  SUBCASE("converted dir == target dir gives zero rows everywhere") {
    cli::run_evaluate(dir.file("conv"), dir.file("tgt"), pairs, dir.file("report.csv"));
    std::ifstream report(dir.file("report.csv"));
    std::string line;
    int rows = 0;
    while (std::getline(report, line)) {
      ++rows;
      if (line.rfind("summary", 0) == 0) {
        CHECK(line.find("0.000000±0.000000") != std::string::npos);
      } else {
        CHECK(line.find(",0.000000,0.000000") != std::string::npos);
      }
    }
    CHECK(rows == 4);
  }
  SUBCASE("missing target listed as an orphan") {
    fs::remove(dir.file("tgt/u1.mcp"));
    CHECK_THROWS_WITH_AS(
        cli::run_evaluate(dir.file("conv"), dir.file("tgt"), pairs, ""),
        doctest::Contains("u1.mcp"), ValidationError);
  }
  SUBCASE("unlisted converted file is an orphan") {
    write_features(dir.file("conv/stray.mcp"), FeatureSequence(4, 70));
    CHECK_THROWS_WITH_AS(
        cli::run_evaluate(dir.file("conv"), dir.file("tgt"), pairs, ""),
        doctest::Contains("stray.mcp"), ValidationError);
  }
  SUBCASE("summary row matches hand aggregation") {
    // perturb one converted file so the metrics are nonzero
    FeatureSequence f = read_features(dir.file("conv/u0.mcp"));
    for (auto& v : f.values) v += 0.25;
    write_features(dir.file("conv/u0.mcp"), f);
    cli::run_evaluate(dir.file("conv"), dir.file("tgt"), pairs, dir.file("report2.csv"));
    std::ifstream report(dir.file("report2.csv"));
    std::string line;
    std::vector<double> mcds, msds;
    std::string summary;
    while (std::getline(report, line)) {
      if (line.rfind("summary", 0) == 0) {
        summary = line;
        continue;
      }
      const auto c1 = line.find(','), c2 = line.rfind(',');
      mcds.push_back(std::stod(line.substr(c1 + 1, c2 - c1 - 1)));
      msds.push_back(std::stod(line.substr(c2 + 1)));
    }
    const MetricSummary sm = summarize(mcds), ss = summarize(msds);
    char expect[128];
    std::snprintf(expect, sizeof expect, "summary,%.6f±%.6f,%.6f±%.6f", sm.mean,
                  sm.stddev, ss.mean, ss.stddev);
    CHECK(summary == expect);
  }
}

TEST_CASE("cmd_gradcheck: table covers every op once and reports success") {
  std::ostringstream out;
  const int failures = cli::run_gradcheck(out);
  CHECK(failures == 0);
  const std::string text = out.str();
  for (const char* op : {"conv1d", "conv2d", "glu", "instance_norm", "pixel_shuffle",
                         "pixel_shuffle_1d", "linear", "mean_sq_to_const", "l1_mean"}) {
    const auto first = text.find(std::string(op) + " ");
    CHECK(first != std::string::npos);
    CHECK(text.find(std::string(op) + " ", first + 1) == std::string::npos);
  }
}
