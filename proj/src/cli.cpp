#include "blink/cli.hpp"

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "blink/binio.hpp"
#include "blink/config.hpp"
#include "blink/datagen.hpp"
#include "blink/gradcheck.hpp"
#include "blink/image.hpp"
#include "blink/metrics.hpp"
#include "blink/model.hpp"
#include "blink/train.hpp"

namespace blink {

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> sets;
  std::string out;
  int64_t seed = -1;  // <0 = not given
  std::string preset;
};

Config build_config(const CommonArgs& a) {
  Config cfg = Config::defaults();
  if (!a.config_path.empty()) cfg.apply_file(a.config_path);
  if (!a.preset.empty()) cfg.set("model.preset", a.preset);
  if (a.seed >= 0) {
    cfg.set("data.seed", std::to_string(a.seed));
    cfg.set("train.seed", std::to_string(a.seed));
  }
  for (const std::string& kv : a.sets) cfg.apply_override(kv);
  cfg.finalize();
  return cfg;
}

// Snapshot is deterministic; wall-clock time lives only in run.info.
void write_run_artifacts(const Config& cfg, const std::string& out, int argc,
                         const char* const* argv) {
  std::filesystem::create_directories(out);
  write_text_atomic(out + "/config.snapshot", cfg.canonical_text());
  std::ostringstream info;
  const std::time_t now = std::time(nullptr);
  char stamp[64];
  std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  info << "timestamp " << stamp << "\n";
  info << "argv";
  for (int i = 0; i < argc; ++i) info << " " << argv[i];
  info << "\n";
  write_text_atomic(out + "/run.info", info.str());
}

DatagenConfig datagen_config_from(const Config& cfg) {
  DatagenConfig d;
  d.canvas = cfg.get_int("data.canvas");
  d.fps = cfg.get_double("data.fps");
  d.length = cfg.get_int("data.length");
  d.train_count = cfg.get_int("data.train_count");
  d.val_count = cfg.get_int("data.val_count");
  d.test_count = cfg.get_int("data.test_count");
  d.mix.left = cfg.get_double("data.mix.left");
  d.mix.right = cfg.get_double("data.mix.right");
  d.mix.flashers = cfg.get_double("data.mix.flashers");
  d.mix.off = cfg.get_double("data.mix.off");
  d.mix.unknown = cfg.get_double("data.mix.unknown");
  d.mix.balanced = cfg.get_bool("data.mix.balanced");
  d.occlusion_rate = cfg.get_double("data.occlusion_rate");
  d.noise = cfg.get_int("data.noise");
  d.seed = cfg.get_u64("data.seed");
  return d;
}

std::vector<SequenceSample> load_split(const Config& cfg, const std::string& split) {
  return read_dataset(cfg.get_string("data.dir") + "/" + split + ".blkd");
}

int do_gen(const Config& cfg, const std::string& out) {
  DatasetFiles files = generate_dataset(datagen_config_from(cfg), out);
  std::cout << "wrote " << files.train << "\n"
            << "wrote " << files.val << "\n"
            << "wrote " << files.test << "\n"
            << "wrote " << files.manifest << "\n";
  return 0;
}

int do_train(const Config& cfg, const std::string& out) {
  const ModelConfig mc = ModelConfig::from(cfg);
  const TrainConfig tc = TrainConfig::from(cfg);
  std::vector<SequenceSample> train_set = load_split(cfg, "train");
  std::vector<SequenceSample> val_set = load_split(cfg, "val");

  std::ofstream jsonl(out + "/train_log.jsonl", std::ios::trunc);
  if (!jsonl) throw std::runtime_error("cannot open " + out + "/train_log.jsonl");
  TrainSinks sinks;
  sinks.progress = &std::cout;
  sinks.jsonl = &jsonl;

  TrainResult res = train_model(mc, tc, train_set, val_set, out + "/model", sinks);
  std::cout << "best epoch " << res.best_epoch << " (val f1 "
            << res.best_f1 << ")\ncheckpoint " << res.checkpoint << "\n";
  if (res.early_stopped) std::cout << "stopped early on accuracy target\n";
  return 0;
}

int do_eval(const Config& cfg, const std::string& out) {
  const TrainConfig tc = TrainConfig::from(cfg);
  ModelParams<float> params = load_model(cfg.get_string("eval.checkpoint"));
  std::vector<SequenceSample> data = load_split(cfg, cfg.get_string("eval.split"));
  EvalResult res = evaluate_model(params, data, tc.gamma, tc.loss_mode,
                                  cfg.get_int("eval.batch"));
  std::cout << res.metrics.table() << "\nloss " << res.loss << "\n";
  write_text_atomic(out + "/metrics.txt", res.metrics.table());
  write_text_atomic(out + "/metrics.dat", res.metrics.structured());
  return 0;
}

int do_infer(const Config& cfg, const std::string& out) {
  ModelParams<float> params = load_model(cfg.get_string("infer.checkpoint"));
  std::vector<SequenceSample> data = load_split(cfg, cfg.get_string("infer.split"));
  const int first = cfg.get_int("infer.sequence");
  const int count = cfg.get_int("infer.count");
  const bool dump_masks = cfg.get_bool("infer.dump_masks");
  if (first < 0 || count < 1 ||
      static_cast<size_t>(first) + count > data.size())
    throw std::runtime_error("infer: sequence slice [" + std::to_string(first) +
                             ", +" + std::to_string(count) +
                             ") outside dataset of " +
                             std::to_string(data.size()) + " sequences");

  if (dump_masks && !params.cfg.attention_enabled)
    throw std::runtime_error("infer: mask dumps need a checkpoint with attention");
  if (dump_masks) std::filesystem::create_directories(out + "/masks");

  std::ostringstream txt;
  InferenceSession<float> session(params);
  for (int i = first; i < first + count; ++i) {
    const SequenceSample& s = data[i];
    const int sz = s.spec.canvas;
    session.reset();
    txt << "sequence " << i << " frames " << s.spec.length << "\n";
    for (int t = 0; t < s.spec.length; ++t) {
      Tensor<float> x({1, 3, sz, sz});
      u8_to_planes(s.frame(t), sz, sz, x.data());
      FrameOut<float> y = session.step(x);
      const int pi = argmax_class(y.intent.data(), kNumIntent);
      const int pl = argmax_class(y.left.data(), kNumLight);
      const int pr = argmax_class(y.right.data(), kNumLight);
      const int pv = argmax_class(y.view.data(), kNumView);
      char conf[16];
      std::snprintf(conf, sizeof(conf), "%.3f", y.intent.data()[pi]);
      txt << "frame " << t << " intent " << intent_name(static_cast<Intent>(pi))
          << " conf " << conf << " left " << light_name(static_cast<Light>(pl))
          << " right " << light_name(static_cast<Light>(pr)) << " view "
          << view_name(static_cast<View>(pv)) << " | truth intent "
          << intent_name(s.labels[t].intent) << " left "
          << light_name(s.labels[t].left) << " right "
          << light_name(s.labels[t].right) << " view "
          << view_name(s.labels[t].view) << "\n";
      if (dump_masks)
        write_pgm(out + "/masks/seq" + std::to_string(i) + "_t" +
                      std::to_string(t) + ".pgm",
                  y.mask.data(), sz, sz);
    }
  }
  write_text_atomic(out + "/predictions.txt", txt.str());
  std::cout << txt.str();
  std::cout << "wrote " << out << "/predictions.txt\n";
  if (dump_masks) std::cout << "wrote mask images under " << out << "/masks\n";
  return 0;
}

int do_gradcheck(const Config& cfg, const std::string& out) {
  GradCheckReport report = run_gradcheck(cfg.get_int("gradcheck.seeds"),
                                         cfg.get_bool("gradcheck.e2e"), &std::cout);
  std::cout << report.table();
  write_text_atomic(out + "/gradcheck.txt", report.table());
  return report.all_pass() ? 0 : 1;
}

int do_ablate(const Config& cfg, const std::string& out) {
  std::vector<SequenceSample> train_set = load_split(cfg, "train");
  std::vector<SequenceSample> val_set = load_split(cfg, "val");
  std::vector<SequenceSample> test_set = load_split(cfg, "test");
  AblateResult res =
      run_ablation(cfg, train_set, val_set, test_set, out, &std::cout);
  std::cout << res.table();
  write_text_atomic(out + "/ablation.txt", res.table());
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"turn-signal intent classifier: synthetic data, training, inference"};
  app.require_subcommand(1);

  CommonArgs args;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", args.config_path, "configuration file");
    sub->add_option("--set", args.sets,
                    "override, dotted key=value (repeatable; wins over --seed)");
    sub->add_option("--out", args.out, "output directory");
    sub->add_option("--seed", args.seed, "sets data.seed and train.seed");
    sub->add_option("--preset", args.preset, "model preset")
        ->check(CLI::IsMember({"desk", "paper"}));
  };

  CLI::App* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  CLI::App* train = app.add_subcommand("train", "train a model");
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  CLI::App* infer = app.add_subcommand("infer", "per-frame predictions");
  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "finite-difference gradient audit");
  CLI::App* ablate = app.add_subcommand("ablate", "attention/loss-mode ablation");
  for (CLI::App* sub : {gen, train, eval, infer, gradcheck, ablate})
    add_common(sub);

  try {
    app.parse(argc, const_cast<char**>(argv));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  std::string out = args.out;
  int rc = 1;
  try {
    Config cfg = build_config(args);
    if (gen->parsed()) {
      if (out.empty()) out = cfg.get_string("data.dir");
      write_run_artifacts(cfg, out, argc, argv);
      rc = do_gen(cfg, out);
    } else if (train->parsed()) {
      if (out.empty()) out = "runs/train";
      write_run_artifacts(cfg, out, argc, argv);
      rc = do_train(cfg, out);
    } else if (eval->parsed()) {
      if (out.empty()) out = "runs/eval";
      write_run_artifacts(cfg, out, argc, argv);
      rc = do_eval(cfg, out);
    } else if (infer->parsed()) {
      if (out.empty()) out = "runs/infer";
      write_run_artifacts(cfg, out, argc, argv);
      rc = do_infer(cfg, out);
    } else if (gradcheck->parsed()) {
      if (out.empty()) out = "runs/gradcheck";
      write_run_artifacts(cfg, out, argc, argv);
      rc = do_gradcheck(cfg, out);
    } else if (ablate->parsed()) {
      if (out.empty()) out = "runs/ablate";
      write_run_artifacts(cfg, out, argc, argv);
      rc = do_ablate(cfg, out);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}

}  // namespace blink
