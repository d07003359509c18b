// SPDX-License-Identifier: Apache-2.0
//
// Operator-level commands: training, evaluation, inference and the dilation
// ablation. Every artifact is a deterministic function of the RunConfig.
#pragma once

#include "dsan/data.hpp"
#include "dsan/metrics.hpp"
#include "dsan/model.hpp"
#include "dsan/optimizer.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dsan {

enum class Precision { f32, f64 };
enum class EvalSplit { train, val, all };

struct RunConfig {
    DegradationKind task = DegradationKind::haze;
    std::size_t base_channels = 16;
    std::size_t blocks = 2;
    std::size_t dilation = 3;
    std::vector<std::size_t> strip_lengths{3, 5, 7, 9};
    bool use_dsam = true;
    double lambda = 0.1;
    double lr0 = 1e-4;
    double lr_min = 1e-6;
    std::size_t steps = 2000;
    std::size_t batch = 4;
    std::size_t patch = 64;
    std::uint64_t seed = 0;
    std::filesystem::path data_root = "data";
    // Empty means <out>/checkpoint.dsan.
    std::filesystem::path checkpoint;
    Precision precision = Precision::f32;
    std::filesystem::path out = "runs";
    // Validation PSNR and a checkpoint every this many steps (and at the end).
    std::size_t eval_interval = 500;
    // Synthetic scenes generated when data_root has no clean/ directory.
    std::size_t images = 10;
    std::size_t image_size = 64;
    EvalSplit eval_split = EvalSplit::val;

    // Checks every field against the preconditions of the modules it feeds.
    void validate() const;
    ModelConfig model() const;
    DegradationSpec degradation() const;
    AdamOptions adam() const;
    std::filesystem::path checkpoint_path() const;
    // Every key with its current value, in a fixed order.
    std::map<std::string, std::string> to_map() const;
    std::string to_text() const;
};

// Applies one key=value setting; unknown keys and bad values raise ConfigError.
void set_option(RunConfig& cfg, const std::string& key, const std::string& value);
// Parses key=value lines ('#' starts a comment) on top of `base`.
RunConfig parse_run_config(const std::string& text, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path);

const char* split_name(EvalSplit s);

// Creates the synthetic clean set if needed and loads the degraded pairs.
std::vector<ImagePair> prepare_dataset(const RunConfig& cfg);

// Pads to a multiple of 4 by edge replication, restores, crops back and clamps.
template <typename T>
ImageBuffer restore_image(const DsanModel<T>& model, const ImageBuffer& degraded);

struct TrainLogRow {
    std::size_t step = 0;
    double lr = 0.0;
    double spatial = 0.0;   // sum over output scales
    double frequency = 0.0; // sum over output scales, before lambda
    double total = 0.0;
    std::optional<double> psnr_val;
};

struct TrainResult {
    std::vector<TrainLogRow> log;
    std::filesystem::path checkpoint;
    std::size_t param_count = 0;
    double final_val_psnr = 0.0;
};

// Trains into `dir` (train_log.csv plus the checkpoint). A non-finite loss
// raises NumericalError and leaves the last written checkpoint in place.
TrainResult train_run(const RunConfig& cfg, const std::filesystem::path& dir,
                      const std::filesystem::path& checkpoint);
// train_run into cfg.out and cfg.checkpoint_path().
TrainResult cmd_train(const RunConfig& cfg);

struct EvalResult {
    MetricReport restored; // restored vs clean
    MetricReport baseline; // degraded vs clean
};

// Writes <out>/eval_<split>.csv and <out>/baseline_<split>.csv.
EvalResult cmd_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint);

// Restores one PPM image with the checkpoint's model.
void cmd_infer(const std::filesystem::path& checkpoint, const std::filesystem::path& input,
               const std::filesystem::path& output, Precision precision = Precision::f32);

struct AblationRow {
    std::string variant;
    bool use_dsam = true;
    std::size_t dilation = 0;
    std::size_t param_count = 0;
    double val_psnr = 0.0;
    double val_ssim = 0.0;
    double reference_psnr = 0.0;
};

// Reference full-scale validation PSNR (dB) for each variant, kept beside the
// desk-scale numbers for the trend comparison only.
double ablation_reference_psnr(bool use_dsam, std::size_t dilation);

// The variants of `base` that the ablation trains: no DSAM, then d = 1..4.
std::vector<std::pair<std::string, RunConfig>> ablation_variants(const RunConfig& base);

// Trains and validates every variant under <out>/ablation/<variant>/ and
// writes <out>/ablation.csv plus <out>/ablation_note.txt.
std::vector<AblationRow> cmd_ablation(const RunConfig& cfg);

} // namespace dsan
