// SPDX-License-Identifier: Apache-2.0
//
// dsan: train, eval, infer, ablation, selftest and bench entry points.
// Exit codes: 0 success, 1 internal error, 2 configuration error,
// 3 numerical failure, 4 I/O error.
#include "dsan/bench.hpp"
#include "dsan/checks.hpp"
#include "dsan/error.hpp"
#include "dsan/run.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace {

using namespace dsan;

enum ExitCode { kOk = 0, kInternal = 1, kConfig = 2, kNumerical = 3, kIo = 4 };

struct SharedFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::vector<std::string> sets;
};

void add_shared(CLI::App* cmd, SharedFlags& f)
{
    cmd->add_option("--config", f.config, "key=value config file");
    cmd->add_option("--seed", f.seed, "overrides the config seed");
    cmd->add_option("--out", f.out, "output directory");
    cmd->add_option("--set", f.sets, "extra key=value override (repeatable)");
}

RunConfig resolve(const SharedFlags& f)
{
    RunConfig cfg = f.config.empty() ? RunConfig{} : load_run_config(f.config);
    for (const auto& kv : f.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--set expects key=value, got '" + kv + "'");
        set_option(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (f.seed)
        cfg.seed = *f.seed;
    if (!f.out.empty())
        cfg.out = f.out;
    cfg.validate();
    return cfg;
}

int run_train(const SharedFlags& f)
{
    const auto cfg = resolve(f);
    const auto r = cmd_train(cfg);
    std::printf("trained %zu steps, %zu parameters, final validation PSNR %.3f dB\n", cfg.steps,
                r.param_count, r.final_val_psnr);
    std::printf("log: %s\ncheckpoint: %s\n", (cfg.out / "train_log.csv").c_str(),
                r.checkpoint.c_str());
    return kOk;
}

int run_eval(const SharedFlags& f, const std::string& checkpoint, const std::string& split)
{
    SharedFlags g = f;
    if (!split.empty())
        g.sets.push_back("eval_split=" + split);
    const auto cfg = resolve(g);
    const auto path = checkpoint.empty() ? cfg.checkpoint_path() : std::filesystem::path(checkpoint);
    const auto r = cmd_eval(cfg, path);
    std::printf("%s split, %zu images\n", split_name(cfg.eval_split), r.restored.rows.size());
    std::printf("restored  PSNR %.3f dB  SSIM %.4f\n", r.restored.mean_psnr(),
                r.restored.mean_ssim());
    std::printf("baseline  PSNR %.3f dB  SSIM %.4f\n", r.baseline.mean_psnr(),
                r.baseline.mean_ssim());
    return kOk;
}

int run_ablation(const SharedFlags& f)
{
    const auto cfg = resolve(f);
    const auto rows = cmd_ablation(cfg);
    std::printf("%-8s %8s %12s %10s %12s\n", "variant", "params", "val_psnr_db", "val_ssim",
                "reference_db");
    for (const auto& r : rows)
        std::printf("%-8s %8zu %12.3f %10.4f %12.2f\n", r.variant.c_str(), r.param_count,
                    r.val_psnr, r.val_ssim, r.reference_psnr);
    std::printf("table: %s\nnote: %s\n", (cfg.out / "ablation.csv").c_str(),
                (cfg.out / "ablation_note.txt").c_str());
    return kOk;
}

int run_selftest()
{
    std::size_t failed = 0, total = 0;
    for (const auto& suite : checks::selftest_suites()) {
        std::printf("[%s]\n", suite.module.c_str());
        for (const auto& check : suite.checks) {
            const auto r = check();
            ++total;
            failed += !r.passed;
            std::printf("  %s %s: %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(),
                        r.detail.c_str());
        }
    }
    std::printf("%zu/%zu checks passed\n", total - failed, total);
    return failed == 0 ? kOk : kInternal;
}

int run_bench_cmd(const std::string& out, std::size_t size, std::size_t trials, bool quick)
{
    BenchOptions o;
    o.height = o.width = size;
    o.trials = trials;
    if (quick) {
        o.include_oracle = false;
        o.include_conv = false;
    }
    const auto rows = run_bench(o);
    write_bench_csv(std::cout, rows);
    if (!out.empty()) {
        std::filesystem::create_directories(out);
        const auto path = std::filesystem::path(out) / "bench.csv";
        std::ofstream f(path);
        if (!f)
            throw IoError("cannot open for writing: " + path.string());
        write_bench_csv(f, rows);
        if (!f)
            throw IoError("failed writing " + path.string());
    }
    for (std::size_t k : o.lengths)
        std::fprintf(stderr, "K=%zu: dsa cost spread across d = %.1f%%\n", k,
                     100.0 * dilation_spread(rows, k));
    std::fprintf(stderr, "dsa cost K=9 / K=3 at d=1: %.2fx\n", length_ratio(rows, 3, 9, 1));
    return kOk;
}

} // namespace

int main(int argc, char** argv)
{
#if defined(__GLIBC__)
    // Large per-step tensors would otherwise be mapped and unmapped on every
    // allocation; keeping them on the heap avoids repeated page faults.
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
    CLI::App app{"Dilated strip attention restoration network"};
    app.require_subcommand(1);

    SharedFlags train_f, eval_f, abl_f;
    auto* train = app.add_subcommand("train", "train a model and write its log and checkpoint");
    add_shared(train, train_f);

    auto* eval = app.add_subcommand("eval", "PSNR/SSIM of restored and degraded images");
    add_shared(eval, eval_f);
    std::string eval_ckpt, eval_split;
    eval->add_option("--checkpoint", eval_ckpt, "checkpoint (default: from the config)");
    eval->add_option("--split", eval_split, "train, val or all");

    auto* infer = app.add_subcommand("infer", "restore one PPM image");
    std::string infer_ckpt, infer_in, infer_out, infer_precision = "float";
    infer->add_option("--checkpoint", infer_ckpt)->required();
    infer->add_option("--precision", infer_precision, "float or double");
    infer->add_option("input", infer_in)->required();
    infer->add_option("output", infer_out)->required();

    auto* ablation = app.add_subcommand("ablation", "train no-DSAM and d = 1..4 under one budget");
    add_shared(ablation, abl_f);

    auto* selftest = app.add_subcommand("selftest", "run every oracle and invariant suite");

    auto* bench = app.add_subcommand("bench", "time dsa, its oracle and conv2d");
    std::string bench_out;
    std::size_t bench_size = 128, bench_trials = 5;
    bool bench_quick = false;
    bench->add_option("--out", bench_out, "also write <out>/bench.csv");
    bench->add_option("--size", bench_size, "square plane size");
    bench->add_option("--trials", bench_trials, "best-of trials per timing");
    bench->add_flag("--quick", bench_quick, "dsa rows only");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfig;
    }

    try {
        if (*train)
            return run_train(train_f);
        if (*eval)
            return run_eval(eval_f, eval_ckpt, eval_split);
        if (*infer) {
            if (infer_precision != "float" && infer_precision != "double")
                throw ConfigError("--precision expects float or double");
            cmd_infer(infer_ckpt, infer_in, infer_out,
                      infer_precision == "float" ? Precision::f32 : Precision::f64);
            return kOk;
        }
        if (*ablation)
            return run_ablation(abl_f);
        if (*selftest)
            return run_selftest();
        if (*bench)
            return run_bench_cmd(bench_out, bench_size, bench_trials, bench_quick);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfig;
    } catch (const ShapeError& e) {
        std::fprintf(stderr, "invalid input: %s\n", e.what());
        return kConfig;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return kNumerical;
    } catch (const IoError& e) {
        std::fprintf(stderr, "I/O error: %s\n", e.what());
        return kIo;
    } catch (const std::filesystem::filesystem_error& e) {
        std::fprintf(stderr, "I/O error: %s\n", e.what());
        return kIo;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return kInternal;
    }
    return kInternal;
}
