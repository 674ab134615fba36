// Copyright Contributors to the splatflow project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatflow_cli/cli.hpp"

#include "splatflow/config.hpp"
#include "splatflow/curve_fit.hpp"
#include "splatflow/dataio.hpp"
#include "splatflow/metrics.hpp"
#include "splatflow/optimize.hpp"
#include "splatflow/rasterizer.hpp"
#include "splatflow/scene.hpp"
#include "splatflow/synthetic.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace splatflow::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

/// Bad flags, bad configs and other mistakes by the caller (exit 2).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("write failed for " + path.string());
}

TrainConfig load_config(const std::string& path) {
    try {
        return config_from_json(read_text(path));
    } catch (const Error& e) {
        throw UsageError(path + ": " + e.what());
    }
}

Vec3 background_of(const TrainConfig& c) { return Vec3(c.background[0], c.background[1], c.background[2]); }

json metrics_json(const Scene& scene, std::span<const Frame> frames, const TrainConfig& config) {
    RenderSettings settings = config.render_settings();
    std::vector<MetricReport> reports(frames.size());
    json per_frame = json::array();
    double psnr_sum = 0.0, ssim_sum = 0.0;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const Frame& f = frames[i];
        const Image img = rasterize_forward(scene, f.t, f.camera, background_of(config), settings).image;
        const MetricReport r = evaluate_metrics(clamped(img), f.image);
        per_frame.push_back({{"index", i}, {"time", f.t}, {"psnr", r.psnr}, {"ssim", r.ssim}});
        psnr_sum += r.psnr;
        ssim_sum += r.ssim;
    }
    json j;
    j["frames"] = per_frame;
    j["points"] = scene.points.size();
    if (frames.empty()) {
        j["mean"] = nullptr;
    } else {
        j["mean"] = {{"psnr", psnr_sum / double(frames.size())}, {"ssim", ssim_sum / double(frames.size())}};
    }
    return j;
}

std::pair<int, int> parse_orders(const std::string& text) {
    const auto comma = text.find(',');
    if (comma == std::string::npos) throw UsageError("--orders expects N,L");
    try {
        std::size_t used_n = 0, used_l = 0;
        const std::string n_text = text.substr(0, comma), l_text = text.substr(comma + 1);
        const int n = std::stoi(n_text, &used_n);
        const int l = std::stoi(l_text, &used_l);
        if (used_n != n_text.size() || used_l != l_text.size() || n < 0 || l < 0) throw std::invalid_argument(text);
        return {n, l};
    } catch (const std::logic_error&) {
        throw UsageError("--orders expects two non-negative integers N,L, got '" + text + "'");
    }
}

void read_trajectory(const fs::path& path, std::vector<double>& t, std::vector<double>& y) {
    std::istringstream in(read_text(path));
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw Error(path.string() + ":" + std::to_string(line_no) + ": expected t,value");
        char* end_t = nullptr;
        char* end_y = nullptr;
        const std::string ts = line.substr(0, comma), ys = line.substr(comma + 1);
        const double tv = std::strtod(ts.c_str(), &end_t);
        const double yv = std::strtod(ys.c_str(), &end_y);
        if (end_t == ts.c_str() || end_y == ys.c_str()) {
            if (t.empty() && y.empty()) continue; // header row
            throw Error(path.string() + ":" + std::to_string(line_no) + ": not a number");
        }
        t.push_back(tv);
        y.push_back(yv);
    }
    if (t.empty()) throw Error(path.string() + ": no samples");
}

int cmd_train(const std::string& data, const std::string& config_path, const std::string& out_dir,
              std::optional<std::uint64_t> seed, std::optional<int> steps, int threads, int log_every,
              std::ostream& out, std::ostream& err) {
    TrainConfig config = config_path.empty() ? TrainConfig{} : load_config(config_path);
    if (steps) {
        if (*steps < 0) throw UsageError("--steps must be >= 0");
        config = config.with_steps(*steps);
    }
    if (seed) config.seed = *seed;
    if (threads >= 0) config.threads = threads;
    try {
        config.validate();
    } catch (const Error& e) {
        throw UsageError(std::string("invalid config: ") + e.what());
    }

    const Dataset ds = load_dataset(data, config.seed, config.threads);
    for (const auto& w : ds.warnings) err << "warning: " << w << '\n';
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);

    TrainHooks hooks;
    hooks.on_warning = [&](const std::string& w) { err << "warning: " << w << '\n'; };
    hooks.on_checkpoint = [&](int completed, const Scene& scene) {
        std::ostringstream name;
        name << "iter_" << std::setw(6) << std::setfill('0') << completed << ".ckpt";
        fs::create_directories(dir / "checkpoints");
        save_checkpoint(dir / "checkpoints" / name.str(), scene, config);
    };
    hooks.on_log = [&](const TrainLogRow& row) {
        const int completed = row.iter + 1;
        if (log_every <= 0 || (completed % log_every != 0 && std::isnan(row.holdout_psnr))) return;
        out << "iter " << completed << " loss " << row.loss << " points " << row.points;
        if (!std::isnan(row.holdout_psnr)) out << " holdout_psnr " << row.holdout_psnr;
        out << std::endl;
    };
    const TrainResult result = train(ds.train, ds.holdout, ds.seeds, config, hooks);
    save_checkpoint(dir / "final.ckpt", result.scene, config);
    if (config.total_steps == 0) return kExitOk;

    write_text(dir / "log.csv", format_log_csv(result.log));
    json metrics = metrics_json(result.scene, ds.holdout, config);
    metrics["steps"] = config.total_steps;
    metrics["seed"] = config.seed;
    write_text(dir / "metrics.json", metrics.dump(2) + "\n");
    if (!ds.holdout.empty()) out << "holdout mean psnr " << metrics["mean"]["psnr"].get<double>() << '\n';
    return kExitOk;
}

int cmd_render(const std::string& ckpt, const std::string& camera_path, double time, const std::string& out_path,
               int threads) {
    if (!(time >= 0.0 && time <= 1.0)) throw UsageError("--time must lie in [0, 1]");
    const Checkpoint c = load_checkpoint(ckpt);
    const Camera cam = camera_from_json(read_text(camera_path));
    RenderSettings settings = c.config.render_settings();
    if (threads >= 0) settings.threads = threads;
    const Image img = rasterize_forward(c.scene, time, cam, background_of(c.config), settings).image;
    if (fs::path(out_path).extension() == ".npy") {
        write_npy(out_path, img);
    } else {
        write_png(out_path, img);
    }
    return kExitOk;
}

int cmd_eval(const std::string& ckpt, const std::string& data, const std::string& out_path, const std::string& split,
             int threads, std::ostream& out, std::ostream& err) {
    Checkpoint c = load_checkpoint(ckpt);
    if (threads >= 0) c.config.threads = threads;
    const Dataset ds = load_dataset(data, c.config.seed, c.config.threads);
    for (const auto& w : ds.warnings) err << "warning: " << w << '\n';
    const auto& frames = split == "train" ? ds.train : ds.holdout;
    if (frames.empty()) throw UsageError("the " + split + " split of " + data + " is empty");
    json j = metrics_json(c.scene, frames, c.config);
    j["split"] = split;
    write_text(out_path, j.dump(2) + "\n");
    out << split << " mean psnr " << j["mean"]["psnr"].get<double>() << " ssim " << j["mean"]["ssim"].get<double>()
        << '\n';
    return kExitOk;
}

int cmd_fit_curve(const std::string& trajectory, const std::string& model_name, const std::string& orders,
                  const std::string& out_path, const std::string& solver, double dilation, int adam_steps,
                  double adam_lr, bool matched, std::ostream& out) {
    const auto [n, l] = parse_orders(orders);
    std::vector<CurveModel> models;
    try {
        if (model_name == "all") {
            models = {CurveModel::Poly, CurveModel::Fourier, CurveModel::Dddm};
            matched = true;
        } else {
            models = {parse_curve_model(model_name)};
        }
        parse_curve_solver(solver);
    } catch (const Error& e) {
        throw UsageError(e.what());
    }

    std::vector<double> t, y;
    read_trajectory(trajectory, t, y);

    json summary = json::array();
    std::vector<std::vector<double>> fits;
    std::vector<std::string> names;
    for (const CurveModel m : models) {
        CurveFitOptions o;
        if (matched) {
            o = matched_budget(m, n, l, dilation);
        } else {
            o.model = m;
            o.poly_order = n;
            o.fourier_order = l;
            o.dilation = dilation;
        }
        o.solver = parse_curve_solver(solver);
        o.adam_steps = adam_steps;
        o.adam_lr = adam_lr;
        const CurveFitResult r = fit_curve(t, y, o);
        const std::string name = m == CurveModel::Poly ? "poly" : m == CurveModel::Fourier ? "fourier" : "dddm";
        summary.push_back({{"model", name},
                           {"poly_order", r.curve.poly_order()},
                           {"fourier_order", r.curve.fourier_order()},
                           {"parameters", r.curve.size()},
                           {"lambda_s", r.lambda_s},
                           {"lambda_b", r.lambda_b},
                           {"rmse", r.rmse},
                           {"coefficients", r.curve.coeffs()}});
        out << name << " rmse " << std::setprecision(9) << r.rmse << '\n';
        fits.push_back(r.fitted);
        names.push_back(name);
    }

    const fs::path base(out_path);
    std::ostringstream csv;
    csv.precision(17);
    csv << "t,value";
    for (const auto& name : names) csv << ',' << name;
    csv << '\n';
    for (std::size_t i = 0; i < t.size(); ++i) {
        csv << t[i] << ',' << y[i];
        for (const auto& f : fits) csv << ',' << f[i];
        csv << '\n';
    }
    if (base.has_parent_path()) fs::create_directories(base.parent_path());
    write_text(base, csv.str());
    fs::path png = base, summary_path = base;
    write_png(png.replace_extension(".png"), plot_series(t, y, fits));
    write_text(summary_path.replace_extension(".json"), summary.dump(2) + "\n");
    return kExitOk;
}

int cmd_make_synthetic(const std::string& out_dir, SyntheticOptions o) {
    const SyntheticDataset ds = make_synthetic_blobs(o);
    write_dataset(out_dir, ds.train, ds.holdout, ds.seeds);
    return kExitOk;
}

int cmd_export(const std::string& ckpt, double time, const std::string& out_path) {
    if (!(time >= 0.0 && time <= 1.0)) throw UsageError("--time must lie in [0, 1]");
    export_ply(load_checkpoint(ckpt).scene, time, out_path);
    return kExitOk;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"splatflow: dynamic Gaussian splatting with dual-domain deformation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "splatflow 0.1.0");

    std::optional<std::uint64_t> seed;
    int threads = -1;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--seed", seed, "Random seed (overrides the config)");
    };
    auto add_threads = [&](CLI::App* sub) {
        sub->add_option("--threads", threads, "Worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);
    };

    std::string data, config_path, out_dir;
    std::optional<int> steps;
    int log_every = 500;
    auto* train_cmd = app.add_subcommand("train", "Optimize a scene on a dataset directory");
    train_cmd->add_option("--data", data, "Dataset directory containing manifest.json")->required();
    train_cmd->add_option("--config", config_path, "TrainConfig JSON (defaults when omitted)");
    train_cmd->add_option("--out", out_dir, "Output directory")->required();
    train_cmd->add_option("--steps", steps, "Iterations; rescales the densification schedule");
    train_cmd->add_option("--log-every", log_every, "Progress line interval (0 = quiet)");
    add_common(train_cmd);
    add_threads(train_cmd);

    std::string ckpt, camera_path, out_path;
    double time = 0.0;
    auto* render_cmd = app.add_subcommand("render", "Render one frame from a checkpoint");
    render_cmd->add_option("--ckpt", ckpt, "Checkpoint file")->required();
    render_cmd->add_option("--camera", camera_path, "Camera JSON file")->required();
    render_cmd->add_option("--time", time, "Normalized timestamp in [0, 1]")->required();
    render_cmd->add_option("--out", out_path, "Output .png or .npy")->required();
    add_common(render_cmd);
    add_threads(render_cmd);

    std::string split = "holdout";
    auto* eval_cmd = app.add_subcommand("eval", "PSNR/SSIM of a checkpoint on a dataset split");
    eval_cmd->add_option("--ckpt", ckpt, "Checkpoint file")->required();
    eval_cmd->add_option("--data", data, "Dataset directory")->required();
    eval_cmd->add_option("--out", out_path, "Output JSON")->required();
    eval_cmd->add_option("--split", split, "holdout or train")->check(CLI::IsMember({"holdout", "train"}));
    add_common(eval_cmd);
    add_threads(eval_cmd);

    std::string trajectory, model = "dddm", orders = "3,16", solver = "lstsq";
    double dilation = 2.0 * std::numbers::pi;
    int adam_steps = 4000;
    double adam_lr = 1e-2;
    bool matched = false;
    auto* fit_cmd = app.add_subcommand("fit-curve", "Fit a deformation model to a 1-D trajectory");
    fit_cmd->add_option("--trajectory", trajectory, "CSV of t,value rows with t in [0, 1]")->required();
    fit_cmd->add_option("--model", model, "poly, fourier, dddm or all");
    fit_cmd->add_option("--orders", orders, "Polynomial order and harmonic count N,L");
    fit_cmd->add_option("--out", out_path, "Output CSV; a .png plot and .json summary are written beside it")
        ->required();
    fit_cmd->add_option("--solver", solver, "lstsq or adam");
    fit_cmd->add_option("--dilation", dilation, "lambda_s (initial value for adam)");
    fit_cmd->add_option("--adam-steps", adam_steps, "Adam iterations")->check(CLI::NonNegativeNumber);
    fit_cmd->add_option("--adam-lr", adam_lr, "Adam learning rate")->check(CLI::PositiveNumber);
    fit_cmd->add_flag("--matched", matched, "Treat N,L as a dddm budget and give poly/fourier as many parameters");
    add_common(fit_cmd);

    SyntheticOptions syn;
    auto* syn_cmd = app.add_subcommand("make-synthetic", "Write the moving-blobs fixture dataset");
    syn_cmd->add_option("--out", out_dir, "Output dataset directory")->required();
    syn_cmd->add_option("--frames", syn.frames, "Timestamps per camera")->check(CLI::PositiveNumber);
    syn_cmd->add_option("--width", syn.width)->check(CLI::PositiveNumber);
    syn_cmd->add_option("--height", syn.height)->check(CLI::PositiveNumber);
    syn_cmd->add_option("--train-cameras", syn.train_cameras)->check(CLI::PositiveNumber);
    syn_cmd->add_option("--holdout-cameras", syn.holdout_cameras)->check(CLI::NonNegativeNumber);
    add_common(syn_cmd);

    auto* export_cmd = app.add_subcommand("export-ply", "Write the deformed point cloud at one timestamp");
    export_cmd->add_option("--ckpt", ckpt, "Checkpoint file")->required();
    export_cmd->add_option("--time", time, "Normalized timestamp in [0, 1]")->required();
    export_cmd->add_option("--out", out_path, "Output PLY")->required();
    add_common(export_cmd);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::Success& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n";
        const auto subs = app.get_subcommands();
        err << (subs.empty() ? app.help() : subs.front()->help());
        return kExitUsage;
    }

    try {
        if (*train_cmd) return cmd_train(data, config_path, out_dir, seed, steps, threads, log_every, out, err);
        if (*render_cmd) return cmd_render(ckpt, camera_path, time, out_path, threads);
        if (*eval_cmd) return cmd_eval(ckpt, data, out_path, split, threads, out, err);
        if (*fit_cmd) {
            return cmd_fit_curve(trajectory, model, orders, out_path, solver, dilation, adam_steps, adam_lr, matched,
                                 out);
        }
        if (*syn_cmd) {
            if (seed) syn.seed = *seed;
            return cmd_make_synthetic(out_dir, syn);
        }
        if (*export_cmd) return cmd_export(ckpt, time, out_path);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}

} // namespace splatflow::cli
