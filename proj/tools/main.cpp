#include <CLI11.hpp>

#include <iostream>

#include "aerovision/error.hpp"
#include "commands.hpp"

namespace {

using aerovision::ErrorCode;

// 1 for failures while running, 2 for anything wrong with the inputs.
int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::IoFailure:
    case ErrorCode::SinkFailure:
    case ErrorCode::BackendFailure:
      return 1;
    default:
      return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  namespace cli = aerovision::cli;
  CLI::App app{"aerovision: evaluation, augmentation and real-time pipeline tools for aerial imagery", "aerovision"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "aerovision 0.1.0");

  cli::EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "Score predictions against a manifest (JSON report on stdout)");
  eval_cmd->add_option("--task", eval.task, "detection, segmentation or action")
      ->required()
      ->check(CLI::IsMember({"detection", "segmentation", "action"}));
  eval_cmd->add_option("--manifest", eval.manifest, "Dataset manifest (JSON)")->required();
  eval_cmd->add_option("--pred", eval.predictions, "Predictions, one JSON object per line")->required();
  eval_cmd->add_option("--iou-threshold", eval.iou_threshold, "IoU needed for a detection match")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  eval_cmd->add_option("--absent-class", eval.absent_class, "mIoU handling of classes absent from gt and pred")
      ->capture_default_str()
      ->check(CLI::IsMember({"exclude", "zero"}));
  eval_cmd->add_option("--format", eval.format, "Report format on stdout")
      ->capture_default_str()
      ->check(CLI::IsMember({"json", "table"}));
  eval_cmd->add_option("--out", eval.out, "Also write the JSON report here");
  eval_cmd->add_option("--telemetry", eval.telemetry, "bench output whose mean FPS fills the FPS row");

  cli::BenchOptions bench;
  auto* bench_cmd = app.add_subcommand("bench", "Run a pipeline config for a fixed time and print telemetry");
  bench_cmd->add_option("--config", bench.config, "Pipeline config (JSON)")->required();
  bench_cmd->add_option("--seconds", bench.seconds, "Wall-clock run time")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--frames", bench.frames, "Stop after this many ingested frames");

  cli::RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "Run a pipeline config until the source ends");
  run_cmd->add_option("--config", run.config, "Pipeline config (JSON)")->required();
  run_cmd->add_option("--sink", run.sink, "Override the sink: jsonl:PATH, tcp:HOST:PORT or null");
  run_cmd->add_option("--seconds", run.seconds, "Stop after this wall-clock time")->check(CLI::PositiveNumber);
  run_cmd->add_option("--frames", run.frames, "Stop after this many ingested frames");

  cli::SplitOptions split;
  auto* split_cmd = app.add_subcommand("split", "Stratified k-fold assignment of a manifest");
  split_cmd->add_option("--manifest", split.manifest, "Dataset manifest (JSON)")->required();
  split_cmd->add_option("--k", split.k, "Number of folds")->required();
  split_cmd->add_option("--seed", split.seed, "Shuffle seed")->required();
  split_cmd->add_option("--holdout", split.holdout, "Fraction of each class held out as a test split")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 0.99));
  split_cmd->add_option("--out", split.out, "Write the fold file here instead of stdout");

  cli::AugmentCmdOptions augment;
  auto* augment_cmd = app.add_subcommand("augment", "Apply one augmentation to every sample of a manifest");
  augment_cmd->add_option("--manifest", augment.manifest, "Dataset manifest (JSON)")->required();
  augment_cmd->add_option("--out-dir", augment.out_dir, "Directory for frames, masks and the new manifest")
      ->required();
  augment_cmd->add_option("--op", augment.op, "Operation")
      ->required()
      ->check(CLI::IsMember({"brightness", "rotate", "shear", "crop", "noise"}));
  augment_cmd->add_option("--seed", augment.seed, "Seed for crop and noise")->capture_default_str();
  augment_cmd->add_option("--param", augment.params,
                          "brightness: DELTA; rotate: DEGREES; shear: SHX [SHY]; crop: W H; noise: SIGMA");
  augment_cmd->add_option("--min-visible", augment.min_visible, "Drop boxes keeping less than this area fraction")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));

  cli::DecodeOptions decode;
  auto* decode_cmd = app.add_subcommand("decode", "Decode one raw backend output into a record");
  decode_cmd->add_option("--task", decode.task, "detection, segmentation or action")
      ->required()
      ->check(CLI::IsMember({"detection", "segmentation", "action"}));
  decode_cmd->add_option("--tensor", decode.tensor, "Raw output (JSON)")->required();
  decode_cmd->add_option("--vocab", decode.vocabulary, "Class names, in class-id order");
  decode_cmd->add_option("--confidence", decode.confidence, "Detection confidence threshold")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  decode_cmd->add_option("--nms", decode.nms, "NMS IoU threshold")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  decode_cmd->add_flag("--class-agnostic", decode.class_agnostic, "Suppress across classes");

  cli::EarlyStopOptions earlystop;
  auto* earlystop_cmd = app.add_subcommand("earlystop", "Replay a metric series through early stopping");
  earlystop_cmd->add_option("--patience", earlystop.patience, "Epochs without improvement before stopping")
      ->required();
  earlystop_cmd->add_option("--mode", earlystop.mode, "max, min, or auto (from --metric)")
      ->capture_default_str()
      ->check(CLI::IsMember({"max", "min", "auto"}));
  earlystop_cmd->add_option("--metric", earlystop.metric, "Metric name used by --mode auto")->capture_default_str();
  earlystop_cmd->add_option("--min-delta", earlystop.min_delta, "Smallest change that counts as improvement")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  earlystop_cmd->add_option("--series", earlystop.series, "File with one value per line (default: stdin)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*eval_cmd) return cli::eval_command(eval);
    if (*bench_cmd) return cli::bench_command(bench);
    if (*run_cmd) return cli::run_command(run);
    if (*split_cmd) return cli::split_command(split);
    if (*augment_cmd) return cli::augment_command(augment);
    if (*decode_cmd) return cli::decode_command(decode);
    if (*earlystop_cmd) return cli::earlystop_command(earlystop);
  } catch (const aerovision::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
