#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace aerovision::cli {

struct EvalOptions {
  std::string task;
  std::filesystem::path manifest;
  std::filesystem::path predictions;
  double iou_threshold = 0.5;
  std::string absent_class = "exclude";
  std::string format = "json";
  std::filesystem::path out;
  std::filesystem::path telemetry;
};

struct BenchOptions {
  std::filesystem::path config;
  double seconds = 5;
  std::optional<std::size_t> frames;
};

struct RunOptions {
  std::filesystem::path config;
  std::string sink;
  std::optional<double> seconds;
  std::optional<std::size_t> frames;
};

struct SplitOptions {
  std::filesystem::path manifest;
  std::size_t k = 5;
  std::uint64_t seed = 0;
  double holdout = 0;
  std::filesystem::path out;
};

struct AugmentCmdOptions {
  std::filesystem::path manifest;
  std::filesystem::path out_dir;
  std::string op;
  std::uint64_t seed = 0;
  std::vector<double> params;
  double min_visible = 0.2;
};

struct DecodeOptions {
  std::string task;
  std::filesystem::path tensor;
  std::vector<std::string> vocabulary;
  double confidence = 0.25;
  double nms = 0.45;
  bool class_agnostic = false;
};

struct EarlyStopOptions {
  std::size_t patience = 5;
  std::string mode = "auto";
  std::string metric = "map";
  double min_delta = 0;
  std::filesystem::path series;
};

// Each returns the process exit code; library errors propagate as exceptions.
int eval_command(const EvalOptions& opts);
int bench_command(const BenchOptions& opts);
int run_command(const RunOptions& opts);
int split_command(const SplitOptions& opts);
int augment_command(const AugmentCmdOptions& opts);
int decode_command(const DecodeOptions& opts);
int earlystop_command(const EarlyStopOptions& opts);

}  // namespace aerovision::cli
