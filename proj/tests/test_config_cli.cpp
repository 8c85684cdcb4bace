#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "blink/cli.hpp"
#include "blink/config.hpp"

using namespace blink;
namespace fs = std::filesystem;

namespace {

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "blink");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)), {});
}

std::string expect_config_error(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    return e.what();
  }
  FAIL("expected a ConfigError");
  return "";
}

const std::vector<std::string> kTinySet = {
    "--set", "data.canvas=32",     "--set", "data.length=8",
    "--set", "data.train_count=5", "--set", "data.val_count=5",
    "--set", "data.test_count=5"};

std::vector<std::string> tiny_gen(const std::string& out,
                                  std::vector<std::string> extra = {}) {
  std::vector<std::string> args{"gen", "--out", out};
  args.insert(args.end(), kTinySet.begin(), kTinySet.end());
  args.insert(args.end(), extra.begin(), extra.end());
  return args;
}

}  // namespace

TEST_CASE("config defaults") {
  Config cfg = Config::defaults();
  CHECK(cfg.get_int("data.canvas") == 64);
  CHECK(cfg.get_double("data.fps") == 10.0);
  CHECK(cfg.get_double("train.lr") == 1e-4);
  CHECK(cfg.get_u64("train.seed") == 42);
  CHECK(cfg.get_bool("train.augment.mirror"));
  CHECK(cfg.get_string("train.loss_mode") == "full");
  CHECK(cfg.get_int_list("model.attention.channels") ==
        std::vector<int>{4, 6, 6, 1});
  CHECK_FALSE(cfg.explicitly_set("data.canvas"));
  cfg.set("data.canvas", "32");
  CHECK(cfg.explicitly_set("data.canvas"));
  CHECK(cfg.get_int("data.canvas") == 32);
}

TEST_CASE("config rejects unknown keys and bad values") {
  Config cfg = Config::defaults();
  std::string msg = expect_config_error([&] { cfg.set("nope.key", "1"); });
  CHECK(msg.find("nope.key") != std::string::npos);
  msg = expect_config_error([&] { cfg.apply_override("alsobad=3"); });
  CHECK(msg.find("alsobad") != std::string::npos);
  CHECK_THROWS_AS(cfg.apply_override("data.canvas"), ConfigError);  // no '='
  CHECK_THROWS_AS(cfg.set("data.canvas", "abc"), ConfigError);
  CHECK_THROWS_AS(cfg.set("data.canvas", "12.5"), ConfigError);
  CHECK_THROWS_AS(cfg.set("train.lr", "fast"), ConfigError);
  CHECK_THROWS_AS(cfg.set("train.augment.mirror", "maybe"), ConfigError);
  CHECK_THROWS_AS(cfg.set("train.loss_mode", "bogus"), ConfigError);
  CHECK_THROWS_AS(cfg.set("data.seed", "-4"), ConfigError);
  CHECK(cfg.get_int("data.canvas") == 64);  // failed sets left no trace
}

TEST_CASE("config canonical text round-trips") {
  Config cfg = Config::defaults();
  cfg.apply_override("train.batch=16");
  cfg.apply_override("model.lstm.channels=48");
  cfg.finalize();
  const std::string text = cfg.canonical_text();

  Config back = Config::defaults();
  back.apply_text(text, "round-trip");
  back.finalize();
  CHECK(back.canonical_text() == text);
  CHECK(back.get_int("train.batch") == 16);
  CHECK(back.get_int("model.lstm.channels") == 48);
}

TEST_CASE("preset fills only untouched model keys") {
  Config cfg = Config::defaults();
  cfg.set("model.preset", "paper");
  cfg.finalize();
  CHECK(cfg.get_int("model.input_size") == 224);
  CHECK(cfg.get_int("model.lstm.channels") == 256);
  CHECK(cfg.get_int("model.trunk") == 1024);

  Config mixed = Config::defaults();
  mixed.set("model.preset", "paper");
  mixed.set("model.input_size", "128");
  mixed.finalize();
  CHECK(mixed.get_int("model.input_size") == 128);
  CHECK(mixed.get_int("model.lstm.channels") == 256);

  Config desk = Config::defaults();
  desk.finalize();
  CHECK(desk.get_int("model.input_size") == 64);
  CHECK(desk.get_int("model.lstm.channels") == 32);
}

TEST_CASE("cli rejects usage errors with exit code 2") {
  CHECK(run_cli({}) == 2);                       // subcommand required
  CHECK(run_cli({"transmogrify"}) == 2);         // unknown subcommand
  CHECK(run_cli({"gen", "--bogus"}) == 2);       // unknown flag
  CHECK(run_cli({"gen", "--set", "nope=1", "--out", "test_cli_unused"}) == 2);
  CHECK(run_cli({"gen", "--set", "data.canvas=tiny", "--out",
                 "test_cli_unused"}) == 2);
  CHECK(run_cli({"gen", "--set", "data.canvas=16", "--out",
                 "test_cli_unused"}) == 2);  // below the geometry floor
  CHECK(run_cli({"--help"}) == 0);
  CHECK_FALSE(fs::exists("test_cli_unused"));
}

TEST_CASE("cli gen writes a deterministic dataset with run artifacts") {
  const fs::path base = "test_cli_gen";
  fs::remove_all(base);
  REQUIRE(run_cli(tiny_gen((base / "a").string())) == 0);
  REQUIRE(run_cli(tiny_gen((base / "b").string())) == 0);

  for (const char* split : {"train", "val", "test"}) {
    const std::string name = std::string(split) + ".blkd";
    CHECK(slurp(base / "a" / name) == slurp(base / "b" / name));
  }
  CHECK(fs::exists(base / "a" / "manifest.txt"));
  CHECK(fs::exists(base / "a" / "config.snapshot"));
  CHECK(fs::exists(base / "a" / "run.info"));
  CHECK(slurp(base / "a" / "config.snapshot") ==
        slurp(base / "b" / "config.snapshot"));

  // A different seed changes the data.
  REQUIRE(run_cli(tiny_gen((base / "c").string(), {"--seed", "9"})) == 0);
  CHECK(slurp(base / "a" / "train.blkd") != slurp(base / "c" / "train.blkd"));

  // --set data.seed beats --seed.
  REQUIRE(run_cli(tiny_gen((base / "d").string(),
                           {"--seed", "9", "--set", "data.seed=1"})) == 0);
  CHECK(slurp(base / "a" / "train.blkd") == slurp(base / "d" / "train.blkd"));

  fs::remove_all(base);
}

TEST_CASE("cli eval fails cleanly on a missing checkpoint") {
  const fs::path base = "test_cli_eval";
  fs::remove_all(base);
  CHECK(run_cli({"eval", "--out", base.string(), "--set",
                 "eval.checkpoint=" + (base / "nope.ckpt").string()}) == 1);
  fs::remove_all(base);
}
