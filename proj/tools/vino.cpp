// Command-line entry point: synthetic data generation, pretraining,
// object-discovery evaluation, attention visualization.
#include <exception>
#include <iostream>

#include "CLI11.hpp"
#include "vino/harness/run.hpp"

using namespace vino;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

ExperimentConfig load_cfg(const std::string& config_path) {
  return config_path.empty() ? ExperimentConfig{} : load_config_file(config_path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vino: mask-conditioned video self-distillation"};
  app.require_subcommand(0, 1);

  bool dump_defaults = false;
  app.add_flag("--dump-defaults", dump_defaults, "print the default config and exit");

  std::string config_path;

  auto* synth = app.add_subcommand("synth-gen", "generate a synthetic video with annotations");
  std::string synth_out;
  synth->add_option("--config", config_path, "config file");
  synth->add_option("--out", synth_out, "output directory")->required();

  auto* pre = app.add_subcommand("pretrain", "run self-distillation pretraining");
  std::string pre_data, pre_out, pre_resume;
  bool pre_force = false;
  pre->add_option("--config", config_path, "config file");
  pre->add_option("--data", pre_data, "video directory (or directory of videos)")->required();
  pre->add_option("--out", pre_out, "output directory for logs and checkpoints")->required();
  pre->add_option("--resume", pre_resume, "checkpoint to resume from");
  pre->add_flag("--force", pre_force, "resume even if the config hash differs");

  auto* ev = app.add_subcommand("eval-corloc", "single-object discovery evaluation");
  EvalOptions eopt;
  ev->add_option("--config", config_path, "config file");
  ev->add_option("--ckpt", eopt.ckpt_path, "checkpoint (teacher weights are used)");
  ev->add_option("--images", eopt.images_dir, "directory of .ppm images")->required();
  ev->add_option("--boxes", eopt.boxes_file, "ground-truth boxes file")->required();
  ev->add_option("--report", eopt.report_path, "JSON report path");
  ev->add_option("--oracle-masks", eopt.oracle_masks,
                 "annotation file: build keys from ground truth instead of the encoder");

  auto* viz = app.add_subcommand("attn-viz", "write a class-attention overlay image");
  std::string viz_ckpt, viz_image, viz_out;
  viz->add_option("--config", config_path, "config file");
  viz->add_option("--ckpt", viz_ckpt, "checkpoint")->required();
  viz->add_option("--image", viz_image, "input .ppm image")->required();
  viz->add_option("--out", viz_out, "output image (.ppm or .png)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (dump_defaults) {
      std::cout << dump_config(ExperimentConfig{});
      return 0;
    }
    if (synth->parsed()) {
      run_synth_gen(load_cfg(config_path), synth_out);
      std::cout << "wrote " << synth_out << "\n";
    } else if (pre->parsed()) {
      ExperimentConfig cfg = load_cfg(config_path);
      PretrainResult r = run_pretrain(cfg, pre_data, pre_out, pre_resume, pre_force);
      std::cout << "done: steps=" << r.steps_run << " ckpt=" << r.final_ckpt << "\n";
    } else if (ev->parsed()) {
      ExperimentConfig cfg = load_cfg(config_path);
      if (eopt.ckpt_path.empty() && eopt.oracle_masks.empty())
        throw ConfigError("eval-corloc: --ckpt or --oracle-masks required");
      CorLocResult res = run_eval_corloc(cfg, eopt);
      std::cout << "corloc=" << res.percent << " evaluated=" << res.evaluated
                << " correct=" << res.correct << " skipped=" << res.skipped << "\n";
    } else if (viz->parsed()) {
      run_attn_viz(load_cfg(config_path), viz_ckpt, viz_image, viz_out);
      std::cout << "wrote " << viz_out << "\n";
    } else {
      std::cout << app.help();
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
