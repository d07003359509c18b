// SPDX-License-Identifier: Apache-2.0
#include "dsan/run.hpp"

#include "dsan/checkpoint.hpp"
#include "dsan/error.hpp"
#include "dsan/losses.hpp"
#include "dsan/random.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dsan {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::uint64_t parse_u64(const std::string& key, const std::string& v)
{
    std::uint64_t out = 0;
    const auto* end = v.data() + v.size();
    const auto r = std::from_chars(v.data(), end, out);
    if (v.empty() || r.ec != std::errc() || r.ptr != end)
        throw ConfigError("'" + key + "' expects a non-negative integer, got '" + v + "'");
    return out;
}

std::size_t parse_size(const std::string& key, const std::string& v)
{
    return static_cast<std::size_t>(parse_u64(key, v));
}

double parse_double(const std::string& key, const std::string& v)
{
    std::size_t used = 0;
    double out = 0.0;
    try {
        out = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (v.empty() || used != v.size() || !std::isfinite(out))
        throw ConfigError("'" + key + "' expects a finite number, got '" + v + "'");
    return out;
}

bool parse_bool(const std::string& key, const std::string& v)
{
    if (v == "1" || v == "true")
        return true;
    if (v == "0" || v == "false")
        return false;
    throw ConfigError("'" + key + "' expects true/false/1/0, got '" + v + "'");
}

std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string join(const std::vector<std::size_t>& v)
{
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i)
        s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

std::ofstream open_output(const fs::path& path)
{
    std::error_code ec;
    if (path.has_parent_path())
        fs::create_directories(path.parent_path(), ec);
    if (ec)
        throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot open for writing: " + path.string());
    return out;
}

void finish_output(std::ofstream& out, const fs::path& path)
{
    out.flush();
    if (!out)
        throw IoError("failed writing " + path.string());
}

std::vector<const ImageBuffer*> pick(const std::vector<PatchPair>& batch, bool clean)
{
    std::vector<const ImageBuffer*> out;
    for (const auto& p : batch)
        out.push_back(clean ? &p.clean : &p.degraded);
    return out;
}

std::vector<ImagePair> select_split(std::vector<ImagePair> pairs, EvalSplit split)
{
    if (split == EvalSplit::all)
        return pairs;
    auto s = split_dataset(std::move(pairs));
    return split == EvalSplit::train ? std::move(s.train) : std::move(s.val);
}

template <typename T>
double mean_psnr(const DsanModel<T>& model, const std::vector<ImagePair>& pairs)
{
    double sum = 0.0;
    for (const auto& p : pairs)
        sum += psnr(restore_image(model, p.degraded), p.clean);
    return pairs.empty() ? 0.0 : sum / static_cast<double>(pairs.size());
}

template <typename T>
TrainResult train_impl(const RunConfig& cfg, const fs::path& dir, const fs::path& checkpoint)
{
    auto split = split_dataset(prepare_dataset(cfg));
    // With a single image there is no held-out set; validation then reuses it.
    const auto& val = split.val.empty() ? split.train : split.val;

    DsanModel<T> model(cfg.model());
    auto params = model.parameters();
    auto adam = AdamState<T>::fresh(params, cfg.adam());

    TrainResult result;
    result.checkpoint = checkpoint;
    result.param_count = model.param_count();

    const auto log_path = dir / "train_log.csv";
    auto log = open_output(log_path);
    log << "step,lr,L_s,L_f,L,psnr_val\n";

    Rng stream(cfg.seed);
    for (std::size_t step = 1; step <= cfg.steps; ++step) {
        const std::uint64_t patch_seed = stream.next();
        const std::uint64_t flip_seed = stream.next();
        const auto batch =
            hflip_augment(sample_patches(split.train, cfg.batch, cfg.patch, patch_seed), flip_seed);
        const auto input = images_to_tensor<T>(pick(batch, false));
        const auto targets = multiscale_targets(images_to_tensor<T>(pick(batch, true)));

        for (auto& p : params)
            p.tensor.zero_grad();
        auto loss = total_loss(model.forward(input), targets, cfg.lambda);
        if (!std::isfinite(loss.total))
            throw NumericalError("non-finite training loss at step " + std::to_string(step));
        loss.value.backward();

        TrainLogRow row;
        row.step = step;
        row.lr = adam_step(std::span<NamedParameter<T>>(params), adam);
        for (double v : loss.spatial)
            row.spatial += v;
        for (double v : loss.frequency)
            row.frequency += v;
        row.total = loss.total;
        if (step % cfg.eval_interval == 0 || step == cfg.steps) {
            row.psnr_val = mean_psnr(model, val);
            result.final_val_psnr = *row.psnr_val;
            save_checkpoint(checkpoint, model, &adam);
        }
        log << row.step << ',' << format_double(row.lr) << ',' << format_double(row.spatial) << ','
            << format_double(row.frequency) << ',' << format_double(row.total) << ','
            << (row.psnr_val ? format_double(*row.psnr_val) : std::string()) << '\n';
        result.log.push_back(row);
    }
    if (cfg.steps == 0)
        save_checkpoint(checkpoint, model, &adam);
    finish_output(log, log_path);
    return result;
}

template <typename T>
EvalResult eval_impl(const RunConfig& cfg, const fs::path& checkpoint)
{
    const auto model = load_model<T>(checkpoint);
    if (model.config().input_channels != ImageBuffer::channels)
        throw ConfigError("checkpoint expects " + std::to_string(model.config().input_channels) +
                          "-channel input but the dataset holds RGB images");
    const auto pairs = select_split(prepare_dataset(cfg), cfg.eval_split);
    if (pairs.empty())
        throw ConfigError(std::string("the ") + split_name(cfg.eval_split) + " split is empty");
    EvalResult r;
    for (const auto& p : pairs) {
        r.restored.add(p.name, restore_image(model, p.degraded), p.clean);
        r.baseline.add(p.name, p.degraded, p.clean);
    }
    const std::string tag = split_name(cfg.eval_split);
    for (auto [report, stem] : {std::pair{&r.restored, "eval_"}, std::pair{&r.baseline, "baseline_"}}) {
        const auto path = cfg.out / (stem + tag + ".csv");
        auto out = open_output(path);
        report->write_csv(out);
        finish_output(out, path);
    }
    return r;
}

template <typename T>
void infer_impl(const fs::path& checkpoint, const fs::path& input, const fs::path& output)
{
    const auto model = load_model<T>(checkpoint);
    save_image(restore_image(model, load_image(input)), output);
}

} // namespace

void RunConfig::validate() const
{
    model().validate();
    degradation().validate();
    if (!(lambda >= 0.0))
        throw ConfigError("lambda must be >= 0");
    if (!(lr0 > 0.0) || !(lr_min >= 0.0) || lr_min > lr0)
        throw ConfigError("learning rates must satisfy 0 <= lr_min <= lr0, lr0 > 0");
    if (batch == 0)
        throw ConfigError("batch must be >= 1");
    if (patch == 0 || patch % 4 != 0)
        throw ConfigError("patch must be a positive multiple of 4");
    if (eval_interval == 0)
        throw ConfigError("eval_interval must be >= 1");
    if (images == 0)
        throw ConfigError("images must be >= 1");
    if (image_size < patch)
        throw ConfigError("image_size must be at least the patch size");
    if (data_root.empty())
        throw ConfigError("data_root must not be empty");
}

ModelConfig RunConfig::model() const
{
    ModelConfig m;
    m.base_channels = base_channels;
    m.blocks_per_scale = blocks;
    m.use_dsam = use_dsam;
    m.dsam.dilation = dilation;
    m.dsam.strip_lengths = strip_lengths;
    m.seed = seed;
    return m;
}

DegradationSpec RunConfig::degradation() const
{
    DegradationSpec s;
    s.kind = task;
    s.seed = seed;
    return s;
}

AdamOptions RunConfig::adam() const
{
    AdamOptions o;
    o.lr0 = lr0;
    o.lr_min = lr_min;
    o.total_steps = steps;
    return o;
}

fs::path RunConfig::checkpoint_path() const
{
    return checkpoint.empty() ? out / "checkpoint.dsan" : checkpoint;
}

const char* split_name(EvalSplit s)
{
    switch (s) {
    case EvalSplit::train:
        return "train";
    case EvalSplit::val:
        return "val";
    case EvalSplit::all:
        return "all";
    }
    return "?";
}

std::map<std::string, std::string> RunConfig::to_map() const
{
    return {
        {"task", kind_name(task)},
        {"base_channels", std::to_string(base_channels)},
        {"blocks", std::to_string(blocks)},
        {"dilation", std::to_string(dilation)},
        {"strip_lengths", join(strip_lengths)},
        {"use_dsam", use_dsam ? "true" : "false"},
        {"lambda", format_double(lambda)},
        {"lr0", format_double(lr0)},
        {"lr_min", format_double(lr_min)},
        {"steps", std::to_string(steps)},
        {"batch", std::to_string(batch)},
        {"patch", std::to_string(patch)},
        {"seed", std::to_string(seed)},
        {"data_root", data_root.string()},
        {"checkpoint", checkpoint.string()},
        {"precision", precision == Precision::f32 ? "float" : "double"},
        {"out", out.string()},
        {"eval_interval", std::to_string(eval_interval)},
        {"images", std::to_string(images)},
        {"image_size", std::to_string(image_size)},
        {"eval_split", split_name(eval_split)},
    };
}

std::string RunConfig::to_text() const
{
    std::string s;
    for (const auto& [k, v] : to_map())
        s += k + "=" + v + "\n";
    return s;
}

void set_option(RunConfig& cfg, const std::string& key, const std::string& value)
{
    const std::string v = trim(value);
    if (key == "task") {
        cfg.task = parse_kind(v);
    } else if (key == "base_channels") {
        cfg.base_channels = parse_size(key, v);
    } else if (key == "blocks") {
        cfg.blocks = parse_size(key, v);
    } else if (key == "dilation") {
        cfg.dilation = parse_size(key, v);
    } else if (key == "strip_lengths") {
        cfg.strip_lengths.clear();
        std::stringstream ss(v);
        for (std::string item; std::getline(ss, item, ',');)
            cfg.strip_lengths.push_back(parse_size(key, trim(item)));
    } else if (key == "use_dsam") {
        cfg.use_dsam = parse_bool(key, v);
    } else if (key == "lambda") {
        cfg.lambda = parse_double(key, v);
    } else if (key == "lr0") {
        cfg.lr0 = parse_double(key, v);
    } else if (key == "lr_min") {
        cfg.lr_min = parse_double(key, v);
    } else if (key == "steps") {
        cfg.steps = parse_size(key, v);
    } else if (key == "batch") {
        cfg.batch = parse_size(key, v);
    } else if (key == "patch") {
        cfg.patch = parse_size(key, v);
    } else if (key == "seed") {
        cfg.seed = parse_u64(key, v);
    } else if (key == "data_root") {
        cfg.data_root = v;
    } else if (key == "checkpoint") {
        cfg.checkpoint = v;
    } else if (key == "precision") {
        if (v == "float" || v == "f32")
            cfg.precision = Precision::f32;
        else if (v == "double" || v == "f64")
            cfg.precision = Precision::f64;
        else
            throw ConfigError("'precision' expects float or double, got '" + v + "'");
    } else if (key == "out") {
        cfg.out = v;
    } else if (key == "eval_interval") {
        cfg.eval_interval = parse_size(key, v);
    } else if (key == "images") {
        cfg.images = parse_size(key, v);
    } else if (key == "image_size") {
        cfg.image_size = parse_size(key, v);
    } else if (key == "eval_split") {
        if (v == "train")
            cfg.eval_split = EvalSplit::train;
        else if (v == "val")
            cfg.eval_split = EvalSplit::val;
        else if (v == "all")
            cfg.eval_split = EvalSplit::all;
        else
            throw ConfigError("'eval_split' expects train, val or all, got '" + v + "'");
    } else {
        throw ConfigError("unknown config key '" + key + "'");
    }
}

RunConfig parse_run_config(const std::string& text, RunConfig base)
{
    std::istringstream in(text);
    std::size_t lineno = 0;
    for (std::string line; std::getline(in, line);) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.resize(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
        try {
            set_option(base, trim(line.substr(0, eq)), line.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return base;
}

RunConfig load_run_config(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open config file: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str());
}

std::vector<ImagePair> prepare_dataset(const RunConfig& cfg)
{
    if (!fs::is_directory(cfg.data_root / "clean"))
        generate_clean_set(cfg.data_root, cfg.images, cfg.image_size, cfg.seed);
    return load_dataset(cfg.data_root, cfg.degradation());
}

template <typename T>
ImageBuffer restore_image(const DsanModel<T>& model, const ImageBuffer& degraded)
{
    const std::size_t h = degraded.height, w = degraded.width;
    const std::size_t ph = (h + 3) / 4 * 4, pw = (w + 3) / 4 * 4;
    ImageBuffer padded(pw, ph);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < ph; ++y)
            for (std::size_t x = 0; x < pw; ++x)
                padded.at(c, y, x) = degraded.at(c, std::min(y, h - 1), std::min(x, w - 1));

    NoGradGuard no_grad;
    const auto input = image_to_tensor<T>(padded);
    const auto output = model.forward(input)[0];
    // The predicted correction is added back in double precision, so a zero
    // correction returns the input bit for bit.
    const auto in = input.data();
    const auto outv = output.data();
    ImageBuffer restored(w, h, 0.0, Provenance::clean);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                const std::size_t i = (c * ph + y) * pw + x;
                const double delta = static_cast<double>(outv[i]) - static_cast<double>(in[i]);
                restored.at(c, y, x) = degraded.at(c, y, x) + delta;
            }
    clamp_unit(restored);
    return restored;
}

template ImageBuffer restore_image(const DsanModel<float>&, const ImageBuffer&);
template ImageBuffer restore_image(const DsanModel<double>&, const ImageBuffer&);

TrainResult train_run(const RunConfig& cfg, const fs::path& dir, const fs::path& checkpoint)
{
    cfg.validate();
    return cfg.precision == Precision::f32 ? train_impl<float>(cfg, dir, checkpoint)
                                           : train_impl<double>(cfg, dir, checkpoint);
}

TrainResult cmd_train(const RunConfig& cfg)
{
    return train_run(cfg, cfg.out, cfg.checkpoint_path());
}

EvalResult cmd_eval(const RunConfig& cfg, const fs::path& checkpoint)
{
    cfg.validate();
    return cfg.precision == Precision::f32 ? eval_impl<float>(cfg, checkpoint)
                                           : eval_impl<double>(cfg, checkpoint);
}

void cmd_infer(const fs::path& checkpoint, const fs::path& input, const fs::path& output,
               Precision precision)
{
    if (precision == Precision::f32)
        infer_impl<float>(checkpoint, input, output);
    else
        infer_impl<double>(checkpoint, input, output);
}

double ablation_reference_psnr(bool use_dsam, std::size_t dilation)
{
    if (!use_dsam)
        return 38.19;
    switch (dilation) {
    case 1:
        return 40.40;
    case 2:
        return 40.47;
    case 3:
        return 40.60;
    case 4:
        return 40.40;
    }
    return std::nan("");
}

std::vector<std::pair<std::string, RunConfig>> ablation_variants(const RunConfig& base)
{
    std::vector<std::pair<std::string, RunConfig>> out;
    RunConfig off = base;
    off.use_dsam = false;
    out.emplace_back("no_dsam", off);
    for (std::size_t d = 1; d <= 4; ++d) {
        RunConfig v = base;
        v.use_dsam = true;
        v.dilation = d;
        out.emplace_back("d" + std::to_string(d), v);
    }
    return out;
}

std::vector<AblationRow> cmd_ablation(const RunConfig& cfg)
{
    cfg.validate();
    std::vector<AblationRow> rows;
    for (const auto& [name, variant] : ablation_variants(cfg)) {
        const auto dir = cfg.out / "ablation" / name;
        {
            const auto path = dir / "config.txt";
            auto out = open_output(path);
            out << variant.to_text();
            finish_output(out, path);
        }
        const auto trained = train_run(variant, dir, dir / "checkpoint.dsan");
        RunConfig eval_cfg = variant;
        eval_cfg.out = dir;
        eval_cfg.eval_split = EvalSplit::val;
        const auto eval = cmd_eval(eval_cfg, trained.checkpoint);
        AblationRow row;
        row.variant = name;
        row.use_dsam = variant.use_dsam;
        row.dilation = variant.dilation;
        row.param_count = trained.param_count;
        row.val_psnr = eval.restored.mean_psnr();
        row.val_ssim = eval.restored.mean_ssim();
        row.reference_psnr = ablation_reference_psnr(variant.use_dsam, variant.dilation);
        rows.push_back(row);
    }

    const auto csv_path = cfg.out / "ablation.csv";
    auto csv = open_output(csv_path);
    csv << "variant,use_dsam,dilation,params,val_psnr_db,val_ssim,reference_psnr_db\n";
    for (const auto& r : rows)
        csv << r.variant << ',' << (r.use_dsam ? 1 : 0) << ','
            << (r.use_dsam ? std::to_string(r.dilation) : std::string("-")) << ','
            << r.param_count << ',' << format_double(r.val_psnr) << ','
            << format_double(r.val_ssim) << ',' << format_double(r.reference_psnr) << '\n';
    finish_output(csv, csv_path);

    const auto note_path = cfg.out / "ablation_note.txt";
    auto note = open_output(note_path);
    note << "reference_psnr_db lists full-scale results reported for the same variants:\n"
            "38.19 dB without DSAM and 40.40 / 40.47 / 40.60 / 40.40 dB for d = 1 / 2 / 3 / 4,\n"
            "with d = 3 best. Those numbers come from full datasets and training budgets.\n"
            "The desk-scale val_psnr_db values are NOT comparable to them in absolute terms;\n"
            "only the direction (each DSAM variant at or above the no-DSAM variant) is compared.\n"
            "All variants share seed, data, split and step budget; they differ only in\n"
            "use_dsam and dilation.\n";
    finish_output(note, note_path);
    return rows;
}

} // namespace dsan
