#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "fatq/analysis.hpp"
#include "fatq/checkpoint.hpp"
#include "fatq/error_model.hpp"
#include "fatq/gradcheck.hpp"
#include "fatq/numerics.hpp"
#include "fatq/quantizers.hpp"
#include "fatq/report.hpp"
#include "fatq/spectral.hpp"
#include "fatq/trainer.hpp"

namespace fs = std::filesystem;
using fatq::report::Csv;

namespace {

struct CommonArgs {
    std::uint64_t seed = 1;
    std::string out_dir = ".";
};

void add_common(CLI::App* sub, CommonArgs& args) {
    sub->add_option("--seed", args.seed, "Random seed");
    sub->add_option("--out", args.out_dir, "Output directory");
    sub->set_config("--config", "", "Plain key=value config file (# comments)");
    sub->allow_config_extras(CLI::config_extras_mode::error);
}

std::string out_path(const CommonArgs& args, const std::string& name) {
    fs::create_directories(args.out_dir);
    return (fs::path(args.out_dir) / name).string();
}

std::vector<std::vector<double>> read_csv_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                const double v = std::stod(cell, &used);
                while (used < cell.size() &&
                       std::isspace(static_cast<unsigned char>(cell[used]))) {
                    ++used;
                }
                if (used != cell.size()) throw std::invalid_argument(cell);
                row.push_back(v);
            } catch (const std::exception&) {
                throw std::runtime_error(path + ": parse error at line " +
                                         std::to_string(line_no) + ": '" + cell + "'");
            }
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw std::runtime_error(path + ": ragged row at line " + std::to_string(line_no));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error(path + ": empty tensor");
    return rows;
}

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        if (!cell.empty()) out.push_back(std::stod(cell));
    }
    return out;
}

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    std::stringstream ss(csv);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        if (!cell.empty()) out.push_back(std::stoi(cell));
    }
    return out;
}

// ---------------------------------------------------------------------------

struct QuantizeArgs {
    CommonArgs common;
    std::string input;
    int bitwidth = 4;
    std::string scheme = "uniform";
    bool is_signed = true;
    double alpha = 1.0;
};

int cmd_quantize(const QuantizeArgs& args) {
    fatq::quantizers::QuantConfig cfg;
    cfg.bitwidth = args.bitwidth;
    cfg.scheme = fatq::quantizers::scheme_from_name(args.scheme);
    cfg.is_signed = args.is_signed;
    cfg.alpha = args.alpha;
    cfg.validate();

    const std::vector<std::vector<double>> tensor = read_csv_matrix(args.input);

    std::string body;
    double mse = 0.0;
    std::size_t count = 0;
    const std::vector<double> levels = fatq::quantizers::level_set(cfg);
    std::vector<std::size_t> histogram(levels.size(), 0);
    for (const std::vector<double>& row : tensor) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            const double q = fatq::quantizers::quantize(row[j], cfg);
            ++histogram[fatq::quantizers::quantize_index(row[j], cfg)];
            mse += (row[j] - q) * (row[j] - q);
            ++count;
            if (j) body += ',';
            body += Csv::format_double(q);
        }
        body += '\n';
    }
    mse /= static_cast<double>(count);
    fatq::report::write_file_atomic(out_path(args.common, "quantized.csv"), body);

    Csv summary({"key", "value"});
    summary.begin_row().cell(std::string("mse")).cell(mse);
    for (std::size_t i = 0; i < levels.size(); ++i) {
        summary.begin_row()
            .cell("count_level_" + Csv::format_double(cfg.alpha * levels[i]))
            .cell(histogram[i]);
    }
    summary.write(out_path(args.common, "quantize_summary.csv"));
    std::cout << "quantized " << count << " values: mse=" << Csv::format_double(mse)
              << ", levels=" << levels.size() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

struct GradcheckArgs {
    CommonArgs common;
    std::size_t instances = 50;
    bool negative_control = false;
};

int cmd_gradcheck(const GradcheckArgs& args) {
    const fatq::gradcheck::SuiteResult suite =
        fatq::gradcheck::run_suite(args.common.seed, args.instances, args.negative_control);
    Csv csv({"check", "instances", "max_rel_err", "tolerance", "status"});
    for (const fatq::gradcheck::CheckResult& c : suite.checks) {
        csv.begin_row()
            .cell(c.name)
            .cell(c.instances)
            .cell(c.max_rel_err)
            .cell(c.tolerance)
            .cell(std::string(c.passed ? "pass" : "fail"));
        std::cout << (c.passed ? "[pass] " : "[FAIL] ") << c.name << ": max rel err "
                  << Csv::format_double(c.max_rel_err) << " (tol "
                  << Csv::format_double(c.tolerance) << ")";
        if (!c.passed) std::cout << " worst at " << c.worst;
        std::cout << "\n";
    }
    csv.write(out_path(args.common, "gradcheck.csv"));
    return suite.all_passed ? 0 : 1;
}

// ---------------------------------------------------------------------------

struct ErrorCurvesArgs {
    CommonArgs common;
    double b = 1.0;
    std::string m_list = "2,3,4";
    std::string schemes = "uniform,log";
    double a_min = 0.5;
    double a_max = 10.0;
    std::size_t a_steps = 39;
    std::size_t grid_points = 100000;
};

int cmd_error_curves(const ErrorCurvesArgs& args) {
    if (!(args.b > 0.0)) throw std::invalid_argument("error-curves: b must be positive");
    if (args.a_min <= 0.0 || args.a_max < args.a_min || args.a_steps < 1) {
        throw std::invalid_argument("error-curves: bad amplitude grid");
    }
    std::vector<double> a_grid;
    for (std::size_t i = 0; i < args.a_steps; ++i) {
        const double t = args.a_steps == 1
                             ? 0.0
                             : static_cast<double>(i) / static_cast<double>(args.a_steps - 1);
        a_grid.push_back(args.a_min + t * (args.a_max - args.a_min));
    }

    Csv csv({"scheme", "m", "b", "a", "alpha_star", "quant_noise", "clip_noise", "total",
             "at_boundary", "alpha_grid"});
    std::stringstream schemes(args.schemes);
    std::string scheme_name;
    while (std::getline(schemes, scheme_name, ',')) {
        const fatq::quantizers::Scheme scheme =
            fatq::quantizers::scheme_from_name(scheme_name);
        for (int m : parse_int_list(args.m_list)) {
            const std::vector<fatq::error_model::CurvePoint> curve =
                fatq::error_model::error_vs_amplitude_curve(args.b, m, scheme, a_grid);
            for (const fatq::error_model::CurvePoint& pt : curve) {
                // Dense-grid argmin of the same objective, for agreement checks.
                double best_alpha = pt.a;
                double best = std::numeric_limits<double>::infinity();
                for (std::size_t i = 1; i <= args.grid_points; ++i) {
                    const double alpha =
                        std::min(pt.a, pt.a * static_cast<double>(i) /
                                           static_cast<double>(args.grid_points));
                    const double total =
                        fatq::error_model::total_error({args.b, pt.a, alpha, m, scheme}).total;
                    if (total < best) {
                        best = total;
                        best_alpha = alpha;
                    }
                }
                csv.begin_row()
                    .cell(scheme_name)
                    .cell(m)
                    .cell(args.b)
                    .cell(pt.a)
                    .cell(pt.alpha_star)
                    .cell(pt.error.quant_noise)
                    .cell(pt.error.clip_noise)
                    .cell(pt.error.total)
                    .cell(static_cast<int>(pt.at_boundary))
                    .cell(best_alpha);
            }
        }
    }
    csv.write(out_path(args.common, "error_curves.csv"));
    return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
    CommonArgs common;
    std::string mode = "fp";
    std::string init_checkpoint;
    fatq::trainer::TrainConfig cfg;
    std::string milestones;
    std::string scheme = "uniform";
};

int cmd_train(TrainArgs args) {
    args.cfg.mode = fatq::trainer::mode_from_name(args.mode);
    args.cfg.scheme = fatq::quantizers::scheme_from_name(args.scheme);
    args.cfg.seed = args.common.seed;
    if (!args.milestones.empty()) {
        for (int m : parse_int_list(args.milestones)) {
            args.cfg.milestones.push_back(static_cast<std::uint32_t>(m));
        }
    }

    fatq::trainer::QatModel pretrained;
    const fatq::trainer::QatModel* pretrained_ptr = nullptr;
    if (!args.init_checkpoint.empty()) {
        pretrained = fatq::checkpoint::load(args.init_checkpoint);
        pretrained_ptr = &pretrained;
    }

    const fatq::trainer::TrainResult result = fatq::trainer::train(args.cfg, pretrained_ptr);

    Csv metrics({"epoch", "split", "loss", "accuracy"});
    for (const fatq::trainer::MetricRow& row : result.metrics) {
        metrics.begin_row()
            .cell(static_cast<std::size_t>(row.epoch))
            .cell(std::string(row.is_validation ? "val" : "train"))
            .cell(row.loss)
            .cell(row.accuracy);
    }
    metrics.write(out_path(args.common, "metrics.csv"));
    fatq::checkpoint::save(result.model, out_path(args.common, "checkpoint.fatq"));

    const double final_acc = result.metrics.empty() ? 0.0 : result.metrics.back().accuracy;
    std::cout << "trained " << args.mode << " model for " << args.cfg.epochs
              << " epochs: final val accuracy " << Csv::format_double(final_acc) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

struct MaskExportArgs {
    CommonArgs common;
    std::string checkpoint;
    int layer = -1;  // -1: all layers
};

int cmd_mask_export(const MaskExportArgs& args) {
    const fatq::trainer::QatModel model = fatq::checkpoint::load(args.checkpoint);
    const std::vector<fatq::analysis::MaskExport> exports = fatq::analysis::mask_export(model);
    if (args.layer >= 0 && static_cast<std::size_t>(args.layer) >= exports.size()) {
        throw std::invalid_argument("mask-export: layer " + std::to_string(args.layer) +
                                    " out of range (model has " +
                                    std::to_string(exports.size()) + " layers)");
    }

    Csv summary({"layer", "low_quartile_mean", "high_quartile_mean"});
    for (const fatq::analysis::MaskExport& exp : exports) {
        if (args.layer >= 0 && exp.layer != static_cast<std::size_t>(args.layer)) continue;
        Csv csv({"kind", "filter", "bin", "value"});
        for (std::size_t r = 0; r < exp.norms.rows; ++r) {
            for (std::size_t k = 0; k < exp.norms.cols; ++k) {
                csv.begin_row().cell(std::string("norm")).cell(r).cell(k).cell(exp.norms(r, k));
            }
        }
        for (std::size_t r = 0; r < exp.mask.rows; ++r) {
            for (std::size_t k = 0; k < exp.mask.cols; ++k) {
                csv.begin_row().cell(std::string("mask")).cell(r).cell(k).cell(exp.mask(r, k));
            }
        }
        csv.write(out_path(args.common, "mask_layer" + std::to_string(exp.layer) + ".csv"));
        summary.begin_row()
            .cell(exp.layer)
            .cell(exp.low_quartile_mean)
            .cell(exp.high_quartile_mean);
        std::cout << "layer " << exp.layer << ": low-frequency quartile mean mask "
                  << Csv::format_double(exp.low_quartile_mean) << ", high "
                  << Csv::format_double(exp.high_quartile_mean) << "\n";
    }
    summary.write(out_path(args.common, "mask_summary.csv"));
    return 0;
}

// ---------------------------------------------------------------------------

struct ShiftArgs {
    CommonArgs common;
    std::string fp_checkpoint;
    std::string fat_checkpoint;
};

int cmd_shift_report(const ShiftArgs& args) {
    const fatq::trainer::QatModel fp = fatq::checkpoint::load(args.fp_checkpoint);
    const fatq::trainer::QatModel fat = fatq::checkpoint::load(args.fat_checkpoint);
    const std::vector<fatq::analysis::ShiftRow> rows = fatq::analysis::shift_report(fp, fat);
    Csv csv({"layer", "total", "shifted", "proportion"});
    for (const fatq::analysis::ShiftRow& row : rows) {
        csv.begin_row().cell(row.layer).cell(row.total).cell(row.shifted).cell(row.proportion);
        std::cout << "layer " << row.layer << ": " << row.shifted << "/" << row.total
                  << " weights shift (" << Csv::format_double(row.proportion) << ")\n";
    }
    csv.write(out_path(args.common, "shift.csv"));
    return 0;
}

// ---------------------------------------------------------------------------

struct AblationArgs {
    CommonArgs common;
    std::string checkpoint;
    std::size_t bands = 32;
    double damping = 0.5;
    std::size_t n_test = 256;
};

int cmd_band_ablation(const AblationArgs& args) {
    const fatq::trainer::QatModel model = fatq::checkpoint::load(args.checkpoint);
    fatq::trainer::TrainConfig data_cfg;
    data_cfg.seed = args.common.seed;
    data_cfg.n_test = args.n_test;
    data_cfg.classes = model.cfg.classes;
    data_cfg.image_size = model.cfg.image_size;
    const fatq::dataset::Dataset data = fatq::trainer::make_test_dataset(data_cfg);

    const std::vector<fatq::analysis::AblationRow> rows =
        fatq::analysis::band_ablation(model, data, args.bands, args.damping);
    Csv csv({"band", "bin_lo", "bin_hi", "accuracy"});
    for (const fatq::analysis::AblationRow& row : rows) {
        csv.begin_row()
            .cell(static_cast<long long>(row.band))
            .cell(static_cast<long long>(row.bin_lo))
            .cell(static_cast<long long>(row.bin_hi))
            .cell(row.accuracy);
    }
    csv.write(out_path(args.common, "ablation.csv"));
    std::cout << "band ablation over " << args.bands << " bands written (baseline accuracy "
              << Csv::format_double(rows.front().accuracy) << ")\n";
    return 0;
}

// ---------------------------------------------------------------------------

struct MaskStatsArgs {
    CommonArgs common;
    double b = 1.0;
    int bitwidth = 4;
    std::string scheme = "uniform";
    std::size_t trials = 1000;
    std::size_t rows = 4;
    std::size_t cols = 16;
    std::string mask_mode = "generated";
};

int cmd_mask_stats(const MaskStatsArgs& args) {
    fatq::error_model::MaskMode mode;
    if (args.mask_mode == "generated") {
        mode = fatq::error_model::MaskMode::Generated;
    } else if (args.mask_mode == "ones") {
        mode = fatq::error_model::MaskMode::AllOnes;
    } else if (args.mask_mode == "half") {
        mode = fatq::error_model::MaskMode::Half;
    } else {
        throw std::invalid_argument("mask-stats: unknown mask mode " + args.mask_mode);
    }
    fatq::numerics::RngState rng(args.common.seed);
    const fatq::error_model::MaskEffectStats stats = fatq::error_model::mask_effect_stats(
        rng, args.b, args.bitwidth, fatq::quantizers::scheme_from_name(args.scheme),
        args.trials, args.rows, args.cols, mode);
    Csv csv({"trials", "rows", "cols", "b", "m", "scheme", "mask_mode", "amplitude_ok",
             "mse_ok", "amplitude_rate", "mse_rate"});
    csv.begin_row()
        .cell(stats.trials)
        .cell(args.rows)
        .cell(args.cols)
        .cell(args.b)
        .cell(args.bitwidth)
        .cell(args.scheme)
        .cell(args.mask_mode)
        .cell(stats.amplitude_ok)
        .cell(stats.mse_ok)
        .cell(stats.amplitude_rate)
        .cell(stats.mse_rate);
    csv.write(out_path(args.common, "mask_stats.csv"));
    std::cout << "amplitude-tightening rate " << Csv::format_double(stats.amplitude_rate)
              << ", mse-reduction rate " << Csv::format_double(stats.mse_rate) << " over "
              << stats.trials << " trials\n";
    return 0;
}

// ---------------------------------------------------------------------------

struct MseCompareArgs {
    CommonArgs common;
    std::string checkpoint;
    int layer = 1;
    std::string betas = "0.5,0.75";
    double b = 1.0;
    int bitwidth = 4;
    std::string scheme = "uniform";
    double alpha = 0.0;  // 0: model-optimal for the tensor amplitude
    std::size_t rows = 4;
    std::size_t cols = 32;
};

int cmd_mse_compare(const MseCompareArgs& args) {
    fatq::spectral::FilterMatrix w;
    fatq::spectral::Mask mask;
    if (!args.checkpoint.empty()) {
        const fatq::trainer::QatModel model = fatq::checkpoint::load(args.checkpoint);
        if (args.layer < 0 || static_cast<std::size_t>(args.layer) >= model.layers.size()) {
            throw std::invalid_argument("mse-compare: layer out of range");
        }
        const fatq::trainer::QatLayer& layer = model.layers[args.layer];
        w = layer.weights;
        const fatq::trainer::WeightView view =
            fatq::trainer::layer_weight_view(layer, model.cfg);
        if (!view.fat) {
            throw std::invalid_argument("mse-compare: checkpoint is not a fat model");
        }
        mask = view.mask;
    } else {
        fatq::numerics::RngState rng(args.common.seed);
        w.c_in = args.cols;
        w.data = fatq::numerics::RealMatrix(args.rows, args.cols);
        w.data.data = fatq::numerics::sample_laplace(rng, args.b, args.rows * args.cols);
        fatq::numerics::RealMatrix gen(args.rows, args.rows);
        const fatq::spectral::SpectrumView spec = fatq::spectral::spectrum(w);
        double mean_norm = 0.0;
        for (double v : spec.norms.data) mean_norm += v;
        mean_norm /= static_cast<double>(spec.norms.data.size());
        const double scale =
            mean_norm > 0.0 ? 2.0 / (mean_norm * std::sqrt(static_cast<double>(args.rows)))
                            : 1.0;
        for (double& g : gen.data) g = rng.next_gaussian() * scale;
        mask = fatq::spectral::make_mask(spec, gen);
    }

    fatq::quantizers::QuantConfig cfg;
    cfg.bitwidth = args.bitwidth;
    cfg.scheme = fatq::quantizers::scheme_from_name(args.scheme);
    cfg.is_signed = true;
    if (args.alpha > 0.0) {
        cfg.alpha = args.alpha;
    } else {
        double amplitude = 0.0;
        for (double v : w.data.data) amplitude = std::max(amplitude, std::abs(v));
        cfg.alpha = fatq::error_model::optimal_alpha(std::max(amplitude, 1e-6), args.b,
                                                     args.bitwidth, cfg.scheme)
                        .alpha;
    }

    const std::vector<fatq::error_model::MseComparisonRow> rows =
        fatq::error_model::mse_transform_comparison(w, mask, parse_double_list(args.betas),
                                                    cfg);
    Csv csv({"kind", "beta", "mse_w_wt", "mse_wt_q", "total"});
    for (const fatq::error_model::MseComparisonRow& row : rows) {
        csv.begin_row()
            .cell(std::string(row.is_fat ? "fat" : "scale"))
            .cell(row.is_fat ? std::string() : Csv::format_double(row.beta))
            .cell(row.mse_w_wt)
            .cell(row.mse_wt_q)
            .cell(row.total);
    }
    csv.write(out_path(args.common, "mse_compare.csv"));
    return 0;
}

// ---------------------------------------------------------------------------

struct BopArgs {
    CommonArgs common;
    double m_w = 4, m_a = 4, mac = 0.0;
    double c_out = 0, c_in = 0, k = 0, h = 0, w = 0;
};

int cmd_bop(const BopArgs& args) {
    const bool have_conv = args.c_out > 0;
    if (args.mac <= 0.0 && !have_conv) {
        throw std::invalid_argument(
            "bop: pass --mac, or a conv shape via --c-out/--c-in/--k/--height/--width");
    }
    double mac = args.mac;
    fatq::trainer::TransformOverhead overhead;
    if (have_conv) {
        overhead = fatq::trainer::transform_overhead(args.c_out, args.c_in, args.k, args.h,
                                                     args.w);
        if (mac <= 0.0) mac = overhead.base_mac;
    }
    const double bops = fatq::trainer::bop(args.m_w, args.m_a, mac);
    const double fp_bops = fatq::trainer::bop(32.0, 32.0, mac);

    Csv csv({"m_w", "m_a", "mac", "bop", "bop_fp32", "reduction", "delta_mac", "base_mac",
             "overhead_ratio"});
    csv.begin_row()
        .cell(args.m_w)
        .cell(args.m_a)
        .cell(mac)
        .cell(bops)
        .cell(fp_bops)
        .cell(fp_bops / bops)
        .cell(have_conv ? overhead.delta_mac : 0.0)
        .cell(have_conv ? overhead.base_mac : 0.0)
        .cell(have_conv ? overhead.ratio : 0.0);
    csv.write(out_path(args.common, "bop.csv"));
    std::cout << "bop=" << Csv::format_double(bops) << " ("
              << Csv::format_double(fp_bops / bops) << "x reduction vs fp32)";
    if (have_conv) {
        std::cout << ", transform overhead ratio " << Csv::format_double(overhead.ratio);
    }
    std::cout << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Frequency-aware transform quantization toolkit"};
    app.require_subcommand(1);

    QuantizeArgs quantize_args;
    CLI::App* quantize = app.add_subcommand("quantize", "Quantize a CSV tensor");
    add_common(quantize, quantize_args.common);
    quantize->add_option("--input", quantize_args.input, "Input CSV tensor")->required();
    quantize->add_option("--bitwidth", quantize_args.bitwidth, "Bitwidth m >= 2");
    quantize->add_option("--scheme", quantize_args.scheme, "uniform|log");
    quantize->add_option("--signed", quantize_args.is_signed, "Signed level set");
    quantize->add_option("--alpha", quantize_args.alpha, "Clipping threshold");

    GradcheckArgs gradcheck_args;
    CLI::App* gradcheck = app.add_subcommand("gradcheck", "Verify analytic gradients");
    add_common(gradcheck, gradcheck_args.common);
    gradcheck->add_option("--instances", gradcheck_args.instances, "Instances per check");
    gradcheck->add_flag("--negative-control", gradcheck_args.negative_control,
                        "Run a deliberately broken fixture that must fail");

    ErrorCurvesArgs curves_args;
    CLI::App* curves = app.add_subcommand("error-curves", "Quantization error vs amplitude");
    add_common(curves, curves_args.common);
    curves->add_option("--b", curves_args.b, "Laplace scale");
    curves->add_option("--m-list", curves_args.m_list, "Comma-separated bitwidths");
    curves->add_option("--schemes", curves_args.schemes, "Comma-separated schemes");
    curves->add_option("--a-min", curves_args.a_min, "Smallest amplitude");
    curves->add_option("--a-max", curves_args.a_max, "Largest amplitude");
    curves->add_option("--a-steps", curves_args.a_steps, "Amplitude grid points");
    curves->add_option("--grid-points", curves_args.grid_points,
                       "Dense grid size for the argmin column");

    TrainArgs train_args;
    CLI::App* train = app.add_subcommand("train", "Train the toy model");
    add_common(train, train_args.common);
    train->add_option("--mode", train_args.mode, "fp|ste|fat");
    train->add_option("--init", train_args.init_checkpoint, "Pretrained checkpoint");
    train->add_option("--epochs", train_args.cfg.epochs, "Training epochs");
    train->add_option("--batch-size", train_args.cfg.batch_size, "Batch size");
    train->add_option("--lr", train_args.cfg.lr, "Initial learning rate");
    train->add_option("--momentum", train_args.cfg.momentum, "SGD momentum");
    train->add_option("--lr-decay", train_args.cfg.lr_decay, "Milestone decay factor");
    train->add_option("--milestones", train_args.milestones, "Comma-separated decay epochs");
    train->add_option("--weight-decay", train_args.cfg.weight_decay, "Weight decay");
    train->add_option("--m-w", train_args.cfg.m_w, "Weight bitwidth");
    train->add_option("--m-a", train_args.cfg.m_a, "Activation bitwidth");
    train->add_option("--scheme", train_args.scheme, "uniform|log");
    train->add_option("--norm-path", train_args.cfg.norm_path,
                      "Propagate the mask-through-norms gradient");
    train->add_option("--weight-norm", train_args.cfg.weight_norm,
                      "Standardize weights before the transform");
    train->add_option("--n-train", train_args.cfg.n_train, "Training set size");
    train->add_option("--n-test", train_args.cfg.n_test, "Test set size");
    train->add_option("--classes", train_args.cfg.classes, "Class count");

    MaskExportArgs mask_args;
    CLI::App* mask_export = app.add_subcommand("mask-export", "Export norms and masks");
    add_common(mask_export, mask_args.common);
    mask_export->add_option("--checkpoint", mask_args.checkpoint, "Fat checkpoint")->required();
    mask_export->add_option("--layer", mask_args.layer, "Layer index (default: all)");

    ShiftArgs shift_args;
    CLI::App* shift = app.add_subcommand("shift-report", "Quantization shift proportions");
    add_common(shift, shift_args.common);
    shift->add_option("--fp-checkpoint", shift_args.fp_checkpoint, "Pretrained checkpoint")
        ->required();
    shift->add_option("--fat-checkpoint", shift_args.fat_checkpoint, "Trained fat checkpoint")
        ->required();

    AblationArgs ablation_args;
    CLI::App* ablation = app.add_subcommand("band-ablation", "Damp frequency bands");
    add_common(ablation, ablation_args.common);
    ablation->add_option("--checkpoint", ablation_args.checkpoint, "Checkpoint")->required();
    ablation->add_option("--bands", ablation_args.bands, "Number of bands");
    ablation->add_option("--damping", ablation_args.damping, "Spectral damping in [0,1]");
    ablation->add_option("--n-test", ablation_args.n_test, "Evaluation set size");

    MaskStatsArgs stats_args;
    CLI::App* stats = app.add_subcommand(
        "mask-stats", "Empirical amplitude/mse rates of the spectral mask");
    add_common(stats, stats_args.common);
    stats->add_option("--b", stats_args.b, "Laplace scale");
    stats->add_option("--bitwidth", stats_args.bitwidth, "Bitwidth");
    stats->add_option("--scheme", stats_args.scheme, "uniform|log");
    stats->add_option("--trials", stats_args.trials, "Trial count");
    stats->add_option("--rows", stats_args.rows, "Weight rows per trial");
    stats->add_option("--cols", stats_args.cols, "Weight columns per trial");
    stats->add_option("--mask-mode", stats_args.mask_mode, "generated|ones|half");

    MseCompareArgs mse_args;
    CLI::App* mse = app.add_subcommand("mse-compare", "Transform vs plain scaling");
    add_common(mse, mse_args.common);
    mse->add_option("--checkpoint", mse_args.checkpoint, "Fat checkpoint (optional)");
    mse->add_option("--layer", mse_args.layer, "Layer index in the checkpoint");
    mse->add_option("--betas", mse_args.betas, "Comma-separated scale factors");
    mse->add_option("--b", mse_args.b, "Laplace scale for random weights");
    mse->add_option("--bitwidth", mse_args.bitwidth, "Bitwidth");
    mse->add_option("--scheme", mse_args.scheme, "uniform|log");
    mse->add_option("--alpha", mse_args.alpha, "Clipping threshold (0: model-optimal)");
    mse->add_option("--rows", mse_args.rows, "Random weight rows");
    mse->add_option("--cols", mse_args.cols, "Random weight columns");

    BopArgs bop_args;
    CLI::App* bop = app.add_subcommand("bop", "Bit-operation count and transform overhead");
    add_common(bop, bop_args.common);
    bop->add_option("--m-w", bop_args.m_w, "Weight bitwidth");
    bop->add_option("--m-a", bop_args.m_a, "Activation bitwidth");
    bop->add_option("--mac", bop_args.mac, "MAC count");
    bop->add_option("--c-out", bop_args.c_out, "Conv output channels");
    bop->add_option("--c-in", bop_args.c_in, "Conv input channels");
    bop->add_option("--k", bop_args.k, "Kernel size");
    bop->add_option("--height", bop_args.h, "Input height");
    bop->add_option("--width", bop_args.w, "Input width");

    CLI11_PARSE(app, argc, argv);

    try {
        if (quantize->parsed()) return cmd_quantize(quantize_args);
        if (gradcheck->parsed()) return cmd_gradcheck(gradcheck_args);
        if (curves->parsed()) return cmd_error_curves(curves_args);
        if (train->parsed()) return cmd_train(train_args);
        if (mask_export->parsed()) return cmd_mask_export(mask_args);
        if (shift->parsed()) return cmd_shift_report(shift_args);
        if (ablation->parsed()) return cmd_band_ablation(ablation_args);
        if (stats->parsed()) return cmd_mask_stats(stats_args);
        if (mse->parsed()) return cmd_mse_compare(mse_args);
        if (bop->parsed()) return cmd_bop(bop_args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
