// Batch command-line front end: CSV in, CSV artifacts out. Every run writes
// a manifest echoing the fully resolved configuration, and all output is a
// pure function of (inputs, flags, seed).
#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "tailboost/baseline.hpp"
#include "tailboost/booster.hpp"
#include "tailboost/csv.hpp"
#include "tailboost/interpret.hpp"
#include "tailboost/loss.hpp"
#include "tailboost/sim.hpp"
#include "tailboost/threshold.hpp"
#include "tailboost/tuning.hpp"
#include "tailboost/types.hpp"

namespace fs = std::filesystem;
using namespace tailboost;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitBadInput = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitNumeric = 4;

std::string join_doubles(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += format_double(v[i]);
    }
    return out;
}

std::string join_sizes(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(v[i]);
    }
    return out;
}

std::string join_strings(const std::vector<std::string>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += v[i];
    }
    return out;
}

/// Resolved key=value pairs, written in sorted order for reproducibility.
class Manifest {
public:
    void set(const std::string& key, const std::string& value) { entries_[key] = value; }
    void set(const std::string& key, double value) { entries_[key] = format_double(value); }
    void set(const std::string& key, std::size_t value) { entries_[key] = std::to_string(value); }
    void set(const std::string& key, bool value) { entries_[key] = value ? "true" : "false"; }

    void write(const fs::path& dir) const {
        std::ofstream out(dir / "manifest.txt");
        if (!out) throw InputError("cannot write manifest in " + dir.string());
        for (const auto& [key, value] : entries_) out << key << '=' << value << '\n';
    }

private:
    std::map<std::string, std::string> entries_;
};

// Flat key=value configuration file: each key names a long option of the
// invoked subcommand (without the leading --). Values already given as flags
// win. '#' starts a comment.
void apply_config_file(CLI::App* cmd, const std::string& path) {
    if (path.empty()) return;
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config file: " + path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t");
        line = line.substr(first, last - first + 1);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw InputError("config: line " + std::to_string(line_no) + " is not key=value");
        }
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (key == "config") continue;
        CLI::Option* opt = nullptr;
        try {
            opt = cmd->get_option("--" + key);
        } catch (const CLI::OptionNotFound&) {
            throw InputError("config: unknown key '" + key + "'");
        }
        if (opt->count() > 0) continue;  // flags override the file
        opt->add_result(value);
        opt->run_callback();
    }
}

fs::path prepare_output_dir(const std::string& dir) {
    if (dir.empty()) throw InputError("no output directory (use --output-dir)");
    fs::path path(dir);
    std::error_code ec;
    fs::create_directories(path, ec);
    if (ec) throw InputError("cannot create output directory " + dir + ": " + ec.message());
    return path;
}

std::ofstream open_output(const fs::path& dir, const std::string& name) {
    std::ofstream out(dir / name);
    if (!out) throw InputError("cannot write " + (dir / name).string());
    return out;
}

// ---------------------------------------------------------------------------
// dataset loading
// ---------------------------------------------------------------------------

struct DataOptions {
    std::string input;
    std::string target;
    std::vector<std::string> feature_names;  // empty: all non-target columns
    bool abs_response = false;
    bool normalize = false;
};

void add_data_options(CLI::App* cmd, DataOptions& opts, bool need_target = true) {
    cmd->add_option("--input", opts.input, "input CSV with a header row")->required();
    auto* target =
        cmd->add_option("--target", opts.target, "response column (name or zero-based index)");
    if (need_target) target->required();
    cmd->add_option("--features", opts.feature_names,
                    "feature columns (names or indices; default: all non-target numeric columns)")
        ->delimiter(',');
    cmd->add_flag("--abs-response", opts.abs_response, "use |y| as the response");
    cmd->add_flag("--normalize", opts.normalize,
                  "min-max normalize each feature column to [0,1]");
}

struct LoadedData {
    Dataset raw;       // features as found in the file
    Dataset working;   // normalized copy when requested, otherwise == raw
    std::vector<double> norm_min, norm_max;  // empty unless normalized
};

LoadedData load_dataset(const DataOptions& opts, bool need_target = true) {
    const CsvTable table = read_csv(opts.input);

    std::size_t target_col = table.n_cols();  // sentinel: no target
    if (need_target || !opts.target.empty()) {
        target_col = table.column_index(opts.target);
    }

    std::vector<std::size_t> feature_cols;
    if (!opts.feature_names.empty()) {
        for (const std::string& name : opts.feature_names) {
            const std::size_t col = table.column_index(name);
            if (col == target_col) throw InputError("feature list includes the target column");
            feature_cols.push_back(col);
        }
    } else {
        for (std::size_t j = 0; j < table.n_cols(); ++j) {
            if (j != target_col) feature_cols.push_back(j);
        }
    }
    if (feature_cols.empty()) throw InputError("no feature columns selected");
    if (table.n_rows() == 0) throw InputError("csv has no data rows");

    LoadedData out;
    out.raw.features = Matrix(table.n_rows(), feature_cols.size());
    for (std::size_t jj = 0; jj < feature_cols.size(); ++jj) {
        const std::vector<double> col = table.numeric_column(feature_cols[jj]);
        for (std::size_t i = 0; i < col.size(); ++i) out.raw.features(i, jj) = col[i];
        out.raw.names.push_back(table.header[feature_cols[jj]]);
    }
    if (target_col < table.n_cols()) {
        out.raw.responses = table.numeric_column(target_col);
        if (opts.abs_response) {
            for (double& y : out.raw.responses) y = std::abs(y);
        }
    } else {
        out.raw.responses.assign(table.n_rows(), 1.0);  // predict-only placeholder
    }
    out.raw.validate();

    out.working = out.raw;
    if (opts.normalize) {
        out.working.features =
            minmax_normalize(out.raw.features, out.raw.names, &out.norm_min, &out.norm_max);
    }
    return out;
}

// ---------------------------------------------------------------------------
// shared tuning/boost options
// ---------------------------------------------------------------------------

struct FitOptions {
    std::vector<double> nu_grid{0.005, 0.0075, 0.01, 0.05, 0.1};
    std::vector<std::size_t> L_grid{2, 3, 4, 8};
    std::size_t M_max = 1000;
    std::size_t folds = 5;
    std::size_t min_leaf = 5;
    double clamp_lo = 1e-6;
    double clamp_hi = 1e6;
    bool all_rows = false;
    // explicit triple: skips cross-validation when all three are given
    std::size_t M = 0;
    double nu = 0.0;
    std::size_t L = 0;
    bool has_M = false, has_nu = false, has_L = false;
};

void add_fit_options(CLI::App* cmd, FitOptions& opts) {
    cmd->add_option("--nu-grid", opts.nu_grid, "shrinkage grid for CV")->delimiter(',');
    cmd->add_option("--L-grid", opts.L_grid, "terminal-node grid for CV")->delimiter(',');
    cmd->add_option("--M-max", opts.M_max, "tree-count ceiling for CV");
    cmd->add_option("--folds", opts.folds, "CV folds");
    cmd->add_option("--min-leaf", opts.min_leaf, "minimum rows per leaf");
    cmd->add_option("--clamp-lo", opts.clamp_lo, "lower clamp for gamma");
    cmd->add_option("--clamp-hi", opts.clamp_hi, "upper clamp for gamma");
    cmd->add_flag("--all-rows", opts.all_rows, "grow trees on all rows, not only exceedances");
    cmd->add_option("--M", opts.M, "tree count (with --nu and --L, skips CV)");
    cmd->add_option("--nu", opts.nu, "shrinkage (with --M and --L, skips CV)");
    cmd->add_option("--L", opts.L, "terminal nodes (with --M and --nu, skips CV)");
}

void finalize_fit_options(CLI::App* cmd, FitOptions& opts) {
    opts.has_M = cmd->count("--M") > 0;
    opts.has_nu = cmd->count("--nu") > 0;
    opts.has_L = cmd->count("--L") > 0;
}

BoostConfig base_config(const FitOptions& opts, std::uint64_t seed) {
    BoostConfig cfg;
    cfg.min_leaf = opts.min_leaf;
    cfg.clamp_lo = opts.clamp_lo;
    cfg.clamp_hi = opts.clamp_hi;
    cfg.fit_on_all_rows = opts.all_rows;
    cfg.seed = seed;
    return cfg;
}

TuneGrid tune_grid(const FitOptions& opts, std::uint64_t seed) {
    TuneGrid grid;
    grid.nu_values = opts.nu_grid;
    grid.L_values = opts.L_grid;
    grid.M_max = opts.M_max;
    grid.folds = opts.folds;
    grid.seed = seed;
    return grid;
}

void write_cv_table(const fs::path& dir, const TuneResult& tuned) {
    auto out = open_output(dir, "cv_table.csv");
    CsvWriter writer(out);
    writer.row({"nu", "L", "m", "cv_loss"});
    for (const CvCell& cell : tuned.cells) {
        for (std::size_t m = 0; m < cell.curve.size(); ++m) {
            writer.row({format_double(cell.nu), std::to_string(cell.L), std::to_string(m),
                        format_double(cell.curve[m])});
        }
    }
}

void write_scan_csv(const fs::path& dir, const ScanResult& scan) {
    auto out = open_output(dir, "scan.csv");
    CsvWriter writer(out);
    writer.row({"q", "u", "k", "d1", "d2", "d3", "selected_M", "selected_nu", "selected_L"});
    for (const DiscrepancyReport& r : scan.reports) {
        writer.row({format_double(r.q), format_double(r.u), std::to_string(r.k),
                    format_double(r.d1), format_double(r.d2), format_double(r.d3),
                    std::to_string(r.selected_M), format_double(r.selected_nu),
                    std::to_string(r.selected_L)});
    }
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

struct FitCommand {
    DataOptions data;
    FitOptions fit;
    std::string output_dir;
    double q = 0.0;
    bool has_q = false;
    std::vector<double> q_grid;
    std::string measure = "sum";
    std::size_t k_min = 20;
    bool freeze_tuning = false;
    std::uint64_t seed = 0;
    std::size_t threads = 0;
};

int run_fit(FitCommand& cmd) {
    const fs::path outdir = prepare_output_dir(cmd.output_dir);
    LoadedData loaded = load_dataset(cmd.data);

    Manifest manifest;
    manifest.set("command", std::string("fit"));
    manifest.set("input", cmd.data.input);
    manifest.set("target", cmd.data.target);
    manifest.set("features", join_strings(loaded.raw.names));
    manifest.set("abs_response", cmd.data.abs_response);
    manifest.set("normalize", cmd.data.normalize);
    manifest.set("seed", static_cast<std::size_t>(cmd.seed));
    manifest.set("min_leaf", cmd.fit.min_leaf);
    manifest.set("clamp_lo", cmd.fit.clamp_lo);
    manifest.set("clamp_hi", cmd.fit.clamp_hi);
    manifest.set("all_rows", cmd.fit.all_rows);

    // threshold selection: a given q, or a discrepancy scan over a q grid
    ThresholdSpec t;
    bool frozen_triple = false;
    std::size_t frozen_M = 0, frozen_L = 0;
    double frozen_nu = 0.0;
    if (cmd.has_q) {
        t = ThresholdSpec::from_fraction(loaded.working.responses, cmd.q);
        manifest.set("q", cmd.q);
    } else if (!cmd.q_grid.empty()) {
        const ThresholdFitter fitter =
            make_cv_fitter(tune_grid(cmd.fit, cmd.seed), base_config(cmd.fit, cmd.seed),
                           cmd.freeze_tuning);
        const ScanResult scan =
            scan_thresholds(loaded.working, fitter, cmd.q_grid, measure_from_string(cmd.measure),
                            cmd.k_min, cmd.freeze_tuning ? 1 : cmd.threads);
        write_scan_csv(outdir, scan);
        t = ThresholdSpec::from_fraction(loaded.working.responses, scan.best_q);
        manifest.set("q", scan.best_q);
        manifest.set("q_grid", join_doubles(cmd.q_grid));
        manifest.set("measure", cmd.measure);
        manifest.set("freeze_tuning", cmd.freeze_tuning);
        if (cmd.freeze_tuning) {
            // the triple tuned once during the scan carries into the final fit
            frozen_triple = true;
            frozen_M = scan.reports[scan.best_index].selected_M;
            frozen_nu = scan.reports[scan.best_index].selected_nu;
            frozen_L = scan.reports[scan.best_index].selected_L;
        }
    } else {
        throw InfeasibleError("fit: provide --q or --q-grid");
    }
    manifest.set("u", t.u);
    manifest.set("k", t.k);

    // tuning triple: explicit flags, the scan-frozen triple, or K-fold CV
    BoostConfig cfg = base_config(cmd.fit, cmd.seed);
    const bool explicit_triple = cmd.fit.has_M && cmd.fit.has_nu && cmd.fit.has_L;
    if (explicit_triple) {
        cfg.n_trees = cmd.fit.M;
        cfg.shrinkage = cmd.fit.nu;
        cfg.n_leaves = cmd.fit.L;
    } else if (cmd.fit.has_M || cmd.fit.has_nu || cmd.fit.has_L) {
        throw InputError("fit: --M, --nu and --L must be given together");
    } else if (frozen_triple) {
        cfg.n_trees = frozen_M;
        cfg.shrinkage = frozen_nu;
        cfg.n_leaves = frozen_L;
    } else {
        const TuneResult tuned =
            cv_tune(loaded.working, t, tune_grid(cmd.fit, cmd.seed), cfg, cmd.threads);
        write_cv_table(outdir, tuned);
        cfg.n_trees = tuned.best_M;
        cfg.shrinkage = tuned.best_nu;
        cfg.n_leaves = tuned.best_L;
    }
    manifest.set("M", cfg.n_trees);
    manifest.set("nu", cfg.shrinkage);
    manifest.set("L", cfg.n_leaves);
    manifest.set("tuned_by_cv", !explicit_triple);
    if (!explicit_triple) {
        manifest.set("nu_grid", join_doubles(cmd.fit.nu_grid));
        manifest.set("L_grid", join_sizes(cmd.fit.L_grid));
        manifest.set("M_max", cmd.fit.M_max);
        manifest.set("folds", cmd.fit.folds);
    }

    GammaEnsemble model = fit(loaded.working, t, cfg);
    model.norm_min = loaded.norm_min;
    model.norm_max = loaded.norm_max;
    save_model(model, (outdir / "model.txt").string());

    {
        auto out = open_output(outdir, "gamma_hat.csv");
        CsvWriter writer(out);
        writer.row({"row", "gamma_hat"});
        for (std::size_t i = 0; i < loaded.raw.size(); ++i) {
            writer.row({std::to_string(i), format_double(model.predict(loaded.raw.features.row(i)))});
        }
    }

    const UniformResiduals res = u_transform(loaded.raw, model.as_fn(), t);
    {
        auto out = open_output(outdir, "residuals.csv");
        CsvWriter writer(out);
        writer.row({"row", "residual"});
        std::size_t next = 0;
        for (std::size_t i = 0; i < loaded.raw.size(); ++i) {
            if (loaded.raw.responses[i] > t.u) {
                writer.row({std::to_string(i), format_double(res.values[next++])});
            }
        }
    }

    // parametric reference estimates at the same threshold
    try {
        const TirModel tir = fit_tir(loaded.working, t);
        auto out = open_output(outdir, "tir_theta.csv");
        CsvWriter writer(out);
        writer.row({"term", "theta"});
        writer.row({"intercept", format_double(tir.theta[0])});
        for (std::size_t j = 0; j < loaded.raw.names.size(); ++j) {
            writer.row({loaded.raw.names[j], format_double(tir.theta[j + 1])});
        }
    } catch (const std::exception& e) {
        std::cerr << "warning: baseline fit skipped (" << e.what() << ")\n";
    }

    const KsResult ks = ks_uniform_test(res);
    const double train_loss = total_loss(loaded.raw, model.as_fn(), t);
    {
        auto out = open_output(outdir, "diagnostics.csv");
        CsvWriter writer(out);
        writer.row({"q", "u", "k", "gamma0", "M", "nu", "L", "ks_statistic", "ks_p_value",
                    "train_loss"});
        writer.row({format_double(t.q), format_double(t.u), std::to_string(t.k),
                    format_double(model.gamma0), std::to_string(cfg.n_trees),
                    format_double(cfg.shrinkage), std::to_string(cfg.n_leaves),
                    format_double(ks.statistic), format_double(ks.p_value),
                    format_double(train_loss)});
    }

    manifest.write(outdir);
    std::cout << "fit: q=" << format_double(t.q) << " u=" << format_double(t.u) << " k=" << t.k
              << " M=" << cfg.n_trees << " nu=" << format_double(cfg.shrinkage)
              << " L=" << cfg.n_leaves << " ks_p=" << format_double(ks.p_value) << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

struct PredictCommand {
    DataOptions data;
    std::string model_path;
    std::string output_dir;
};

int run_predict(PredictCommand& cmd) {
    const fs::path outdir = prepare_output_dir(cmd.output_dir);
    const GammaEnsemble model = load_model(cmd.model_path);
    LoadedData loaded = load_dataset(cmd.data, /*need_target=*/false);
    if (loaded.raw.n_features() != model.n_features) {
        throw InputError("predict: input has " + std::to_string(loaded.raw.n_features()) +
                         " features, the model expects " + std::to_string(model.n_features));
    }
    if (!model.feature_names.empty() && model.feature_names != loaded.raw.names) {
        std::cerr << "warning: feature names differ from the model's training columns\n";
    }

    auto out = open_output(outdir, "predictions.csv");
    CsvWriter writer(out);
    writer.row({"row", "gamma_hat"});
    for (std::size_t i = 0; i < loaded.raw.size(); ++i) {
        writer.row({std::to_string(i), format_double(model.predict(loaded.raw.features.row(i)))});
    }

    Manifest manifest;
    manifest.set("command", std::string("predict"));
    manifest.set("input", cmd.data.input);
    manifest.set("model", cmd.model_path);
    manifest.write(outdir);
    return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateCommand {
    SimConfig cfg;
    FitOptions fit;
    std::string output_dir;
    std::string variant = "corrected";
    std::size_t threads = 0;
};

int run_simulate(SimulateCommand& cmd) {
    const fs::path outdir = prepare_output_dir(cmd.output_dir);
    cmd.cfg.variant = dgp_variant_from_string(cmd.variant);
    cmd.cfg.tune = tune_grid(cmd.fit, cmd.cfg.seed);
    cmd.cfg.base = base_config(cmd.fit, cmd.cfg.seed);

    const ExperimentReport report = run_experiment(cmd.cfg, cmd.threads);

    {
        auto out = open_output(outdir, "deltas.csv");
        CsvWriter writer(out);
        writer.row({"case", "q", "method", "r", "delta"});
        for (const QResult& qr : report.results) {
            for (std::size_t r = 0; r < qr.boost.deltas.size(); ++r) {
                auto cell = [&](double v) { return std::isnan(v) ? std::string() : format_double(v); };
                writer.row({std::to_string(report.config.scenario), qr.q_label, "boost",
                            std::to_string(r), cell(qr.boost.deltas[r])});
                writer.row({std::to_string(report.config.scenario), qr.q_label, "tir",
                            std::to_string(r), cell(qr.tir.deltas[r])});
            }
        }
    }
    {
        auto out = open_output(outdir, "summary.csv");
        CsvWriter writer(out);
        writer.row({"case", "q", "method", "median", "efficiency", "missing"});
        for (const QResult& qr : report.results) {
            writer.row({std::to_string(report.config.scenario), qr.q_label, "boost",
                        format_double(qr.boost.median), format_double(qr.efficiency),
                        std::to_string(qr.boost.n_missing)});
            writer.row({std::to_string(report.config.scenario), qr.q_label, "tir",
                        format_double(qr.tir.median), format_double(qr.efficiency),
                        std::to_string(qr.tir.n_missing)});
        }
    }

    Manifest manifest;
    manifest.set("command", std::string("simulate"));
    manifest.set("case", static_cast<std::size_t>(cmd.cfg.scenario));
    manifest.set("n", cmd.cfg.n_train);
    manifest.set("n_test", cmd.cfg.n_test);
    manifest.set("p", cmd.cfg.n_features);
    manifest.set("m", cmd.cfg.m);
    manifest.set("C", cmd.cfg.C);
    manifest.set("q_list", join_doubles(cmd.cfg.q_list));
    manifest.set("optimal_q", cmd.cfg.optimal_q);
    manifest.set("R", cmd.cfg.replications);
    manifest.set("seed", static_cast<std::size_t>(cmd.cfg.seed));
    manifest.set("dgp_variant", cmd.variant);
    manifest.set("nu_grid", join_doubles(cmd.fit.nu_grid));
    manifest.set("L_grid", join_sizes(cmd.fit.L_grid));
    manifest.set("M_max", cmd.fit.M_max);
    manifest.set("folds", cmd.fit.folds);
    manifest.set("min_leaf", cmd.fit.min_leaf);
    manifest.write(outdir);

    for (const QResult& qr : report.results) {
        std::cout << "case " << report.config.scenario << " q=" << qr.q_label
                  << " boost=" << format_double(qr.boost.median)
                  << " tir=" << format_double(qr.tir.median)
                  << " efficiency=" << format_double(qr.efficiency) << '\n';
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// tune
// ---------------------------------------------------------------------------

struct TuneCommand {
    DataOptions data;
    FitOptions fit;
    std::string output_dir;
    double q = 0.1;
    std::uint64_t seed = 0;
    std::size_t threads = 0;
};

int run_tune(TuneCommand& cmd) {
    const fs::path outdir = prepare_output_dir(cmd.output_dir);
    LoadedData loaded = load_dataset(cmd.data);
    const ThresholdSpec t = ThresholdSpec::from_fraction(loaded.working.responses, cmd.q);
    const TuneResult tuned = cv_tune(loaded.working, t, tune_grid(cmd.fit, cmd.seed),
                                     base_config(cmd.fit, cmd.seed), cmd.threads);
    write_cv_table(outdir, tuned);
    {
        auto out = open_output(outdir, "selected.csv");
        CsvWriter writer(out);
        writer.row({"M", "nu", "L", "cv_loss"});
        writer.row({std::to_string(tuned.best_M), format_double(tuned.best_nu),
                    std::to_string(tuned.best_L), format_double(tuned.best_loss)});
    }

    Manifest manifest;
    manifest.set("command", std::string("tune"));
    manifest.set("input", cmd.data.input);
    manifest.set("target", cmd.data.target);
    manifest.set("q", cmd.q);
    manifest.set("u", t.u);
    manifest.set("k", t.k);
    manifest.set("seed", static_cast<std::size_t>(cmd.seed));
    manifest.set("nu_grid", join_doubles(cmd.fit.nu_grid));
    manifest.set("L_grid", join_sizes(cmd.fit.L_grid));
    manifest.set("M_max", cmd.fit.M_max);
    manifest.set("folds", cmd.fit.folds);
    manifest.write(outdir);

    std::cout << "tune: M=" << tuned.best_M << " nu=" << format_double(tuned.best_nu)
              << " L=" << tuned.best_L << " cv_loss=" << format_double(tuned.best_loss) << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// scan
// ---------------------------------------------------------------------------

struct ScanCommand {
    DataOptions data;
    FitOptions fit;
    std::string output_dir;
    std::vector<double> q_grid;
    std::string measure = "sum";
    std::string fitter = "boost";
    std::size_t k_min = 20;
    bool freeze_tuning = false;
    std::uint64_t seed = 0;
    std::size_t threads = 0;
};

int run_scan(ScanCommand& cmd) {
    const fs::path outdir = prepare_output_dir(cmd.output_dir);
    LoadedData loaded = load_dataset(cmd.data);

    ThresholdFitter fitter;
    if (cmd.fitter == "boost") {
        fitter = make_cv_fitter(tune_grid(cmd.fit, cmd.seed), base_config(cmd.fit, cmd.seed),
                                cmd.freeze_tuning);
    } else if (cmd.fitter == "tir") {
        fitter = make_tir_fitter();
    } else {
        throw InputError("scan: unknown fitter '" + cmd.fitter + "' (want boost|tir)");
    }

    const std::vector<double> grid = cmd.q_grid.empty() ? default_q_grid() : cmd.q_grid;
    const ScanResult scan =
        scan_thresholds(loaded.working, fitter, grid, measure_from_string(cmd.measure), cmd.k_min,
                        cmd.freeze_tuning ? 1 : cmd.threads);
    write_scan_csv(outdir, scan);
    {
        auto out = open_output(outdir, "best.csv");
        CsvWriter writer(out);
        writer.row({"q", "u"});
        writer.row({format_double(scan.best_q), format_double(scan.best_u)});
    }

    Manifest manifest;
    manifest.set("command", std::string("scan"));
    manifest.set("input", cmd.data.input);
    manifest.set("target", cmd.data.target);
    manifest.set("q_grid", join_doubles(grid));
    manifest.set("measure", cmd.measure);
    manifest.set("fitter", cmd.fitter);
    manifest.set("k_min", cmd.k_min);
    manifest.set("freeze_tuning", cmd.freeze_tuning);
    manifest.set("seed", static_cast<std::size_t>(cmd.seed));
    manifest.write(outdir);

    std::cout << "scan: best q=" << format_double(scan.best_q)
              << " u=" << format_double(scan.best_u) << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// importance
// ---------------------------------------------------------------------------

struct ImportanceCommand {
    DataOptions data;
    FitOptions fit;
    std::string output_dir;
    double q = 0.1;
    std::size_t repeats = 10;
    std::uint64_t seed = 0;
    std::size_t threads = 0;
};

int run_importance(ImportanceCommand& cmd) {
    const fs::path outdir = prepare_output_dir(cmd.output_dir);
    LoadedData loaded = load_dataset(cmd.data);
    const ThresholdSpec t = ThresholdSpec::from_fraction(loaded.working.responses, cmd.q);

    BoostConfig cfg = base_config(cmd.fit, cmd.seed);
    const bool explicit_triple = cmd.fit.has_M && cmd.fit.has_nu && cmd.fit.has_L;
    if (explicit_triple) {
        cfg.n_trees = cmd.fit.M;
        cfg.shrinkage = cmd.fit.nu;
        cfg.n_leaves = cmd.fit.L;
    } else {
        const TuneResult tuned = cv_tune(loaded.working, t, tune_grid(cmd.fit, cmd.seed), cfg,
                                         cmd.threads);
        cfg.n_trees = tuned.best_M;
        cfg.shrinkage = tuned.best_nu;
        cfg.n_leaves = tuned.best_L;
    }

    const ImportanceReport report = modified_importance(loaded.working, t, cfg, cmd.repeats,
                                                        cmd.threads);
    {
        auto out = open_output(outdir, "importance.csv");
        CsvWriter writer(out);
        writer.row({"feature", "raw", "corrected"});
        for (std::size_t j = 0; j < report.raw.size(); ++j) {
            writer.row({loaded.raw.names[j], format_double(report.raw[j]),
                        format_double(report.corrected[j])});
        }
    }

    Manifest manifest;
    manifest.set("command", std::string("importance"));
    manifest.set("input", cmd.data.input);
    manifest.set("target", cmd.data.target);
    manifest.set("q", cmd.q);
    manifest.set("repeats", cmd.repeats);
    manifest.set("M", cfg.n_trees);
    manifest.set("nu", cfg.shrinkage);
    manifest.set("L", cfg.n_leaves);
    manifest.set("seed", static_cast<std::size_t>(cmd.seed));
    manifest.write(outdir);

    std::cout << "importance: wrote " << report.raw.size() << " features (R=" << cmd.repeats
              << ")\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// pdp
// ---------------------------------------------------------------------------

struct PdpCommand {
    DataOptions data;
    std::string model_path;
    std::string output_dir;
    std::vector<std::string> features;  // names or indices; default all
    std::size_t grid_points = 50;
};

int run_pdp(PdpCommand& cmd) {
    const fs::path outdir = prepare_output_dir(cmd.output_dir);
    const GammaEnsemble model = load_model(cmd.model_path);
    LoadedData loaded = load_dataset(cmd.data, /*need_target=*/false);
    if (loaded.raw.n_features() != model.n_features) {
        throw InputError("pdp: input feature count does not match the model");
    }

    std::vector<std::size_t> targets;
    if (cmd.features.empty()) {
        for (std::size_t j = 0; j < model.n_features; ++j) targets.push_back(j);
    } else {
        for (const std::string& name : cmd.features) {
            auto it = std::find(loaded.raw.names.begin(), loaded.raw.names.end(), name);
            if (it != loaded.raw.names.end()) {
                targets.push_back(static_cast<std::size_t>(it - loaded.raw.names.begin()));
                continue;
            }
            std::size_t index = model.n_features;
            try {
                index = std::stoul(name);
            } catch (const std::exception&) {
            }
            if (index >= model.n_features) throw InputError("pdp: no feature '" + name + "'");
            targets.push_back(index);
        }
    }

    Manifest manifest;
    manifest.set("command", std::string("pdp"));
    manifest.set("input", cmd.data.input);
    manifest.set("model", cmd.model_path);
    manifest.set("grid_points", cmd.grid_points);

    for (std::size_t j : targets) {
        const std::vector<double> grid = default_pdp_grid(loaded.raw, j, cmd.grid_points);
        const PdpCurve curve = partial_dependence(model, loaded.raw, j, grid);
        const std::string file = "pdp_" + std::to_string(j) + ".csv";
        auto out = open_output(outdir, file);
        CsvWriter writer(out);
        writer.row({"grid", "value"});
        for (std::size_t g = 0; g < grid.size(); ++g) {
            writer.row({format_double(curve.grid[g][0]), format_double(curve.values[g])});
        }
        manifest.set("pdp_" + std::to_string(j),
                     loaded.raw.names.empty() ? std::to_string(j) : loaded.raw.names[j]);
    }
    manifest.write(outdir);
    std::cout << "pdp: wrote " << targets.size() << " curves\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Covariate-dependent tail index estimation by gradient tree boosting"};
    app.require_subcommand(1);

    FitCommand fit_cmd;
    PredictCommand predict_cmd;
    SimulateCommand sim_cmd;
    TuneCommand tune_cmd;
    ScanCommand scan_cmd;
    ImportanceCommand imp_cmd;
    PdpCommand pdp_cmd;

    std::string config_path;
    auto add_common = [&config_path](CLI::App* cmd, std::string& output_dir) {
        cmd->add_option("--output-dir", output_dir, "directory for output artifacts")
            ->envname("TAILBOOST_OUTPUT_DIR")
            ->required();
        cmd->add_option("--config", config_path,
                        "flat key=value configuration file; flags override");
    };

    // fit
    auto* fit_app = app.add_subcommand("fit", "fit a model on a CSV dataset");
    add_data_options(fit_app, fit_cmd.data);
    add_fit_options(fit_app, fit_cmd.fit);
    add_common(fit_app, fit_cmd.output_dir);
    auto* fit_q = fit_app->add_option("--q", fit_cmd.q, "tail fraction");
    fit_app->add_option("--q-grid", fit_cmd.q_grid, "tail fractions to scan")->delimiter(',');
    fit_app->add_option("--measure", fit_cmd.measure, "scan measure: d1|d2|d3|sum");
    fit_app->add_option("--k-min", fit_cmd.k_min, "minimum exceedances per scanned fraction");
    fit_app->add_flag("--freeze-tuning", fit_cmd.freeze_tuning,
                      "tune once at the first scanned fraction and reuse the triple");
    fit_app->add_option("--seed", fit_cmd.seed, "random seed");
    fit_app->add_option("--threads", fit_cmd.threads, "worker threads (0 = auto)");

    // predict
    auto* predict_app = app.add_subcommand("predict", "evaluate a saved model on a CSV");
    add_data_options(predict_app, predict_cmd.data, /*need_target=*/false);
    predict_app->add_option("--model", predict_cmd.model_path, "model file")->required();
    add_common(predict_app, predict_cmd.output_dir);

    // simulate
    auto* sim_app = app.add_subcommand("simulate", "run the synthetic benchmark protocol");
    sim_app->add_option("--case", sim_cmd.cfg.scenario, "generative case 1..5");
    sim_app->add_option("--n", sim_cmd.cfg.n_train, "training sample size");
    sim_app->add_option("--n-test", sim_cmd.cfg.n_test, "test sample size");
    sim_app->add_option("--p", sim_cmd.cfg.n_features, "covariate count");
    sim_app->add_option("--m", sim_cmd.cfg.m, "second-order parameter");
    sim_app->add_option("--C", sim_cmd.cfg.C, "scale constant of cases 1..3");
    sim_app->add_option("--q-list", sim_cmd.cfg.q_list, "tail fractions")->delimiter(',');
    sim_app->add_flag("--optimal-q", sim_cmd.cfg.optimal_q, "also scan for q* per replicate");
    sim_app->add_option("--R", sim_cmd.cfg.replications, "replications");
    sim_app->add_option("--seed", sim_cmd.cfg.seed, "master seed");
    sim_app->add_option("--dgp-variant", sim_cmd.variant, "corrected|as-printed");
    sim_app->add_option("--threads", sim_cmd.threads, "worker threads (0 = auto)");
    add_fit_options(sim_app, sim_cmd.fit);
    add_common(sim_app, sim_cmd.output_dir);

    // tune
    auto* tune_app = app.add_subcommand("tune", "cross-validate (M, nu, L) at one threshold");
    add_data_options(tune_app, tune_cmd.data);
    add_fit_options(tune_app, tune_cmd.fit);
    add_common(tune_app, tune_cmd.output_dir);
    tune_app->add_option("--q", tune_cmd.q, "tail fraction");
    tune_app->add_option("--seed", tune_cmd.seed, "random seed");
    tune_app->add_option("--threads", tune_cmd.threads, "worker threads (0 = auto)");

    // scan
    auto* scan_app = app.add_subcommand("scan", "scan tail fractions by discrepancy measures");
    add_data_options(scan_app, scan_cmd.data);
    add_fit_options(scan_app, scan_cmd.fit);
    add_common(scan_app, scan_cmd.output_dir);
    scan_app->add_option("--q-grid", scan_cmd.q_grid,
                         "tail fractions to scan (default 0.005..0.995)")
        ->delimiter(',');
    scan_app->add_option("--measure", scan_cmd.measure, "d1|d2|d3|sum");
    scan_app->add_option("--fitter", scan_cmd.fitter, "boost|tir");
    scan_app->add_option("--k-min", scan_cmd.k_min, "minimum exceedances per fraction");
    scan_app->add_flag("--freeze-tuning", scan_cmd.freeze_tuning,
                       "tune once at the first fraction and reuse the triple");
    scan_app->add_option("--seed", scan_cmd.seed, "random seed");
    scan_app->add_option("--threads", scan_cmd.threads, "worker threads (0 = auto)");

    // importance
    auto* imp_app = app.add_subcommand("importance", "shuffle-corrected feature importance");
    add_data_options(imp_app, imp_cmd.data);
    add_fit_options(imp_app, imp_cmd.fit);
    add_common(imp_app, imp_cmd.output_dir);
    imp_app->add_option("--q", imp_cmd.q, "tail fraction");
    imp_app->add_option("--repeats", imp_cmd.repeats, "shadow repeats R");
    imp_app->add_option("--seed", imp_cmd.seed, "random seed");
    imp_app->add_option("--threads", imp_cmd.threads, "worker threads (0 = auto)");

    // pdp
    auto* pdp_app = app.add_subcommand("pdp", "partial dependence curves of a saved model");
    add_data_options(pdp_app, pdp_cmd.data, /*need_target=*/false);
    pdp_app->add_option("--model", pdp_cmd.model_path, "model file")->required();
    add_common(pdp_app, pdp_cmd.output_dir);
    pdp_app->add_option("--pdp-features", pdp_cmd.features,
                        "features to plot (names or indices; default all)")
        ->delimiter(',');
    pdp_app->add_option("--grid-points", pdp_cmd.grid_points, "points per curve");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitBadInput;
    }

    try {
        for (CLI::App* sub : {fit_app, predict_app, sim_app, tune_app, scan_app, imp_app, pdp_app}) {
            if (sub->parsed()) apply_config_file(sub, config_path);
        }
        if (fit_app->parsed()) {
            fit_cmd.has_q = fit_q->count() > 0;
            finalize_fit_options(fit_app, fit_cmd.fit);
            return run_fit(fit_cmd);
        }
        if (predict_app->parsed()) return run_predict(predict_cmd);
        if (sim_app->parsed()) {
            finalize_fit_options(sim_app, sim_cmd.fit);
            return run_simulate(sim_cmd);
        }
        if (tune_app->parsed()) {
            finalize_fit_options(tune_app, tune_cmd.fit);
            return run_tune(tune_cmd);
        }
        if (scan_app->parsed()) {
            finalize_fit_options(scan_app, scan_cmd.fit);
            return run_scan(scan_cmd);
        }
        if (imp_app->parsed()) {
            finalize_fit_options(imp_app, imp_cmd.fit);
            return run_importance(imp_cmd);
        }
        if (pdp_app->parsed()) return run_pdp(pdp_cmd);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitBadInput;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitBadInput;
    } catch (const InfeasibleError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInfeasible;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumeric;
    }
    return kExitOk;
}
