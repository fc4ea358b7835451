#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "vino/harness/run.hpp"

using namespace vino;
namespace fs = std::filesystem;

namespace {

std::string temp_dir(const std::string& name) {
  std::string d = (fs::temp_directory_path() / name).string();
  fs::remove_all(d);
  return d;
}

}  // namespace

TEST_CASE("config parse, dump, and round trip") {
  ExperimentConfig def;
  std::string text = dump_config(def);
  ExperimentConfig back = parse_config_text(text);
  CHECK(dump_config(back) == text);
  CHECK(config_hash(back) == config_hash(def));

  ExperimentConfig cfg = parse_config_text(
      "# comment line\n"
      "run.steps = 42\n"
      "distill.tau_t = 0.05   # trailing comment\n"
      "views.hflip_prob = 0\n"
      "optim.cosine_decay = false\n");
  CHECK(cfg.steps == 42);
  CHECK(cfg.tau_t == doctest::Approx(0.05));
  CHECK(cfg.views.hflip_prob == doctest::Approx(0.0));
  CHECK_FALSE(cfg.cosine_decay);
  CHECK(config_hash(cfg) != config_hash(def));
}

TEST_CASE("config rejects unknown keys and bad values") {
  CHECK_THROWS_WITH_AS(parse_config_text("run.bogus = 1\n"),
                       doctest::Contains("unknown key"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text("\n\nrun.steps = abc\n"),
                       doctest::Contains("line 3"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("run.steps 5\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("optim.cosine_decay = maybe\n"), ConfigError);
}

TEST_CASE("config validation catches inconsistent view/encoder sizes") {
  ExperimentConfig cfg;
  cfg.views.global_size = 48;  // encoder.global_input stays 64
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  ExperimentConfig ok;
  CHECK_NOTHROW(ok.validate());
}

TEST_CASE("checkpoint round trip is bitwise exact") {
  Rng rng(5);
  Checkpoint c;
  c.config_hash = 0xdeadbeefcafef00dULL;
  c.step = 1234;
  c.tube_counter = 99;
  c.adam_steps = 77;
  auto randvec = [&](int n) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = rng.normal() * std::pow(10.0, rng.uniform(-8, 8));
    return v;
  };
  c.student = randvec(257);
  c.teacher = randvec(257);
  c.center = randvec(16);
  c.adam_m = randvec(257);
  c.adam_v = randvec(257);
  c.rng_state = rng.state();

  std::string path = (fs::temp_directory_path() / "vino_test_ckpt.bin").string();
  save_checkpoint(path, c);
  Checkpoint b = load_checkpoint(path);
  CHECK(b.config_hash == c.config_hash);
  CHECK(b.step == c.step);
  CHECK(b.tube_counter == c.tube_counter);
  CHECK(b.adam_steps == c.adam_steps);
  CHECK(b.rng_state == c.rng_state);
  CHECK(std::memcmp(b.student.data(), c.student.data(), 257 * 8) == 0);
  CHECK(std::memcmp(b.teacher.data(), c.teacher.data(), 257 * 8) == 0);
  CHECK(std::memcmp(b.center.data(), c.center.data(), 16 * 8) == 0);
  CHECK(std::memcmp(b.adam_m.data(), c.adam_m.data(), 257 * 8) == 0);
  CHECK(std::memcmp(b.adam_v.data(), c.adam_v.data(), 257 * 8) == 0);
  fs::remove(path);

  CHECK_THROWS_AS(load_checkpoint("/nonexistent/ckpt.bin"), DataError);
}

TEST_CASE("boxes file parsing") {
  std::string path = (fs::temp_directory_path() / "vino_test_boxes.txt").string();
  {
    std::ofstream f(path);
    f << "# header comment\n";
    f << "frame_00000 1 2 3 4\n";
    f << "frame_00000 5 6 7 8\n";
    f << "\n";
    f << "frame_00001 0 0 10 10\n";
  }
  auto boxes = load_boxes_file(path);
  REQUIRE(boxes.size() == 3);
  CHECK(boxes[0].first == "frame_00000");
  CHECK(boxes[0].second == Rect{1, 2, 3, 4});
  CHECK(boxes[2].second == Rect{0, 0, 10, 10});

  {
    std::ofstream f(path);
    f << "frame_00000 1 2\n";
  }
  CHECK_THROWS_WITH_AS(load_boxes_file(path), doctest::Contains("line 1"), DataError);
  fs::remove(path);
}

TEST_CASE("pretrain with steps=0 writes only checkpoints") {
  std::string data = temp_dir("vino_test_h_data");
  std::string out = temp_dir("vino_test_h_out");
  ExperimentConfig cfg;
  cfg.steps = 0;
  cfg.synth.num_frames = 40;
  run_synth_gen(cfg, data);
  PretrainResult r = run_pretrain(cfg, data, out);
  CHECK(r.steps_run == 0);
  CHECK(fs::exists(fs::path(out) / "ckpt_initial.bin"));
  CHECK(fs::exists(fs::path(out) / "ckpt_final.bin"));
  // initial == final at step 0
  Checkpoint a = load_checkpoint((fs::path(out) / "ckpt_initial.bin").string());
  Checkpoint b = load_checkpoint((fs::path(out) / "ckpt_final.bin").string());
  CHECK(a.step == 0);
  CHECK(b.step == 0);
  CHECK((a.student - b.student).norm() == 0.0);
  // teacher initialized to a copy of the student
  CHECK((a.student - a.teacher).norm() == 0.0);
  fs::remove_all(data);
  fs::remove_all(out);
}

TEST_CASE("resume reproduces a fresh run") {
  setenv("VINO_DETERMINISTIC", "1", 1);
  std::string data = temp_dir("vino_test_r_data");
  ExperimentConfig gen;
  gen.synth.num_frames = 40;
  gen.synth.num_sprites = 2;
  run_synth_gen(gen, data);

  ExperimentConfig cfg;
  cfg.synth = gen.synth;
  cfg.steps = 4;
  cfg.ckpt_every = 2;
  cfg.seed = 5;
  // shrink the model so the test runs in seconds
  cfg.encoder.depth = 1;
  cfg.encoder.embed_dim = 32;
  cfg.encoder.head_hidden = 32;
  cfg.encoder.head_bottleneck = 16;
  cfg.encoder.head_output_dim = 32;
  cfg.views.locals_per_frame = 2;

  std::string full = temp_dir("vino_test_r_full");
  run_pretrain(cfg, data, full);

  // resume from the mid-run checkpoint and finish; end state must match
  std::string resumed = temp_dir("vino_test_r_resumed");
  run_pretrain(cfg, data, resumed, (fs::path(full) / "ckpt_step_000002.bin").string());

  Checkpoint a = load_checkpoint((fs::path(full) / "ckpt_final.bin").string());
  Checkpoint b = load_checkpoint((fs::path(resumed) / "ckpt_final.bin").string());
  CHECK(a.step == b.step);
  CHECK((a.student - b.student).norm() == 0.0);
  CHECK((a.teacher - b.teacher).norm() == 0.0);
  CHECK((a.center - b.center).norm() == 0.0);
  CHECK((a.adam_m - b.adam_m).norm() == 0.0);
  CHECK(a.rng_state == b.rng_state);

  // the resumed log holds steps 3-4 and must equal the tail of the full log
  auto read_lines = [](const std::string& p) {
    std::ifstream f(p);
    std::vector<std::string> lines;
    std::string l;
    while (std::getline(f, l)) lines.push_back(l);
    return lines;
  };
  auto la = read_lines((fs::path(full) / "train.log").string());
  auto lb = read_lines((fs::path(resumed) / "train.log").string());
  REQUIRE(la.size() == 4);
  REQUIRE(lb.size() == 2);
  CHECK(la[2] == lb[0]);
  CHECK(la[3] == lb[1]);

  // config-hash mismatch without force is rejected
  ExperimentConfig other = cfg;
  other.tau_t = 0.05;
  CHECK_THROWS_AS(
      run_pretrain(other, data, temp_dir("vino_test_r_fail"),
                   (fs::path(full) / "ckpt_step_000002.bin").string(), false),
      ConfigError);

  for (auto& d : {data, full, resumed}) fs::remove_all(d);
  unsetenv("VINO_DETERMINISTIC");
}

TEST_CASE("effective batch is logged") {
  setenv("VINO_DETERMINISTIC", "1", 1);
  std::string data = temp_dir("vino_test_eb_data");
  ExperimentConfig cfg;
  cfg.synth.num_frames = 40;
  run_synth_gen(cfg, data);
  cfg.steps = 1;
  cfg.micro_batch = 2;
  cfg.grad_accum = 2;
  cfg.encoder.depth = 1;
  cfg.encoder.embed_dim = 32;
  cfg.encoder.head_hidden = 32;
  cfg.encoder.head_bottleneck = 16;
  cfg.encoder.head_output_dim = 32;
  cfg.views.locals_per_frame = 1;
  std::string out = temp_dir("vino_test_eb_out");
  run_pretrain(cfg, data, out);
  std::ifstream f((fs::path(out) / "train.log").string());
  std::string line;
  std::getline(f, line);
  CHECK(line.find("effective_batch=4") != std::string::npos);
  CHECK(line.find("wall_ms=0") != std::string::npos);
  fs::remove_all(data);
  fs::remove_all(out);
  unsetenv("VINO_DETERMINISTIC");
}
