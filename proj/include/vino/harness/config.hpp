#pragma once

#include <functional>
#include <string>
#include <variant>

#include "vino/distill.hpp"
#include "vino/encoder.hpp"
#include "vino/videodata.hpp"
#include "vino/viewgen.hpp"

namespace vino {

struct ExperimentConfig {
  // run-level
  long steps = 100;
  int micro_batch = 1;   // tubes per micro-batch
  int grad_accum = 1;    // effective batch = micro_batch * grad_accum
  uint64_t seed = 0;
  long ckpt_every = 500;

  // optimizer
  AdamConfig optim;
  bool cosine_decay = true;
  double min_lr = 1e-5;

  // data / tube sampling
  int tube_len = 4;  // T
  int stride = 10;
  MaskFilterConfig filter;

  ViewConfig views;
  EncoderConfig encoder;

  // distillation hyperparameters (DistillState minus the running center)
  double tau_s = 0.1;
  double tau_t = 0.04;
  double mu = 0.996;
  double lambda_local = 1.0;
  double lambda_mask = 0.5;
  double lambda_temp = 0.5;
  double center_rate = 0.9;

  SyntheticSceneConfig synth;

  DistillState make_distill_state() const;
  void validate() const;
};

// Flat key=value text with dotted section names. '#' starts a comment.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);
std::string dump_config(const ExperimentConfig& cfg);
uint64_t config_hash(const ExperimentConfig& cfg);

}  // namespace vino
