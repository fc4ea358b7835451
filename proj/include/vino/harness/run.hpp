#pragma once

#include <string>

#include "vino/discovery.hpp"
#include "vino/harness/checkpoint.hpp"
#include "vino/harness/config.hpp"

namespace vino {

bool deterministic_mode();  // VINO_DETERMINISTIC=1

// Writes synthetic frames, the annotation container, and a ground-truth
// boxes file into out_dir.
void run_synth_gen(const ExperimentConfig& cfg, const std::string& out_dir);

struct PretrainResult {
  long steps_run = 0;
  std::string final_ckpt;
  std::string log_path;
};

PretrainResult run_pretrain(const ExperimentConfig& cfg, const std::string& data_dir,
                            const std::string& out_dir, const std::string& resume_ckpt = "",
                            bool force_resume = false);

struct EvalOptions {
  std::string ckpt_path;
  std::string images_dir;
  std::string boxes_file;
  std::string report_path;       // JSON report
  std::string oracle_masks;      // test hook: annotation file replacing encoder keys
};

CorLocResult run_eval_corloc(const ExperimentConfig& cfg, const EvalOptions& opt);

void run_attn_viz(const ExperimentConfig& cfg, const std::string& ckpt_path,
                  const std::string& image_path, const std::string& out_path);

// Ground-truth boxes text format: one line per box "image_id x y w h".
std::vector<std::pair<std::string, Rect>> load_boxes_file(const std::string& path);

}  // namespace vino
