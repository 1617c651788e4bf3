#include "mvi/error.hpp"
#include "mvi/impute.hpp"
#include "mvi/pipeline.hpp"
#include "mvi/synth.hpp"
#include "mvi/viz.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

struct MaskedInput {
    mvi::LoadedTable table;
    mvi::MissingMask mask;
};

mvi::LoadedTable read_table(const std::string& path, const std::string& target, bool allow_missing) {
    std::ifstream in(path);
    if (!in) throw mvi::Error(mvi::Errc::IoError, "cannot open " + path);
    mvi::CsvReadOptions options;
    options.target = target;
    options.allow_missing = allow_missing;
    return mvi::read_csv(in, options);
}

// Cells flagged in the mask are treated as missing even if the data file holds a value.
MaskedInput read_masked(const std::string& data_path, const std::string& mask_path, const std::string& target) {
    MaskedInput m{read_table(data_path, target, true), {}};
    if (mask_path.empty()) {
        m.mask = mvi::MissingMask::from_dataset(m.table.data);
        return m;
    }
    std::ifstream in(mask_path);
    if (!in) throw mvi::Error(mvi::Errc::IoError, "cannot open " + mask_path);
    m.mask = mvi::read_mask_csv(in, m.table.data.schema());
    auto& ds = m.table.data;
    if (m.mask.rows() != ds.rows()) throw mvi::Error(mvi::Errc::ShapeMismatch, "mask and data row counts differ");
    for (std::size_t r = 0; r < ds.rows(); ++r)
        for (std::size_t c = 0; c < ds.cols(); ++c) {
            if (m.mask.at(r, c)) ds.at(r, c) = mvi::kMissing;
            else if (mvi::is_missing(ds.at(r, c))) m.mask.set(r, c);
        }
    return m;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw mvi::Error(mvi::Errc::IoError, "cannot write " + path);
    out << text;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Missing value simulation, imputation and evaluation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(mvi::kVersion));

    // generate
    auto* gen = app.add_subcommand("generate", "Write clustered synthetic data");
    std::string gen_kind = "blobs", gen_out;
    mvi::BlobSpec blob;
    gen->add_option("--kind", gen_kind, "blobs | personpseudo")->check(CLI::IsMember({"blobs", "personpseudo"}));
    gen->add_option("--rows", blob.n_rows, "Row count")->capture_default_str();
    gen->add_option("--features", blob.n_numeric_features, "Numeric features (blobs)")->capture_default_str();
    gen->add_option("--clusters", blob.n_clusters, "Cluster count")->capture_default_str();
    gen->add_option("--std", blob.std_dev, "Cluster standard deviation")->capture_default_str();
    gen->add_option("--seed", blob.seed, "Generator seed")->capture_default_str();
    gen->add_option("--out", gen_out, "Output CSV")->required();

    // ampute
    auto* amp = app.add_subcommand("ampute", "Introduce missing values into a complete CSV");
    std::string amp_in, amp_out, amp_mask, amp_target = "class", amp_pattern = "univariate", amp_mech = "MCAR";
    double amp_rate = 0.5, amp_sharpness = 5.0;
    std::uint64_t amp_seed = 0;
    amp->add_option("--in", amp_in, "Complete input CSV")->required();
    amp->add_option("--target", amp_target, "Target column (never amputed)")->capture_default_str();
    amp->add_option("--pattern", amp_pattern, "univariate | multivariate | monotone | general")->capture_default_str();
    amp->add_option("--mechanism", amp_mech, "MCAR | MAR | MNAR")->capture_default_str();
    amp->add_option("--rate", amp_rate, "Share of incomplete rows")->capture_default_str();
    amp->add_option("--sharpness", amp_sharpness, "Top/bottom decile selection ratio (MAR, MNAR)")->capture_default_str();
    amp->add_option("--seed", amp_seed, "Seed")->capture_default_str();
    amp->add_option("--out", amp_out, "Masked CSV (missing cells empty)")->required();
    amp->add_option("--mask", amp_mask, "0/1 mask CSV")->required();

    // impute
    auto* imp = app.add_subcommand("impute", "Fill the missing cells of a masked CSV");
    std::string imp_in, imp_mask, imp_out, imp_method = "mean", imp_target = "class";
    std::uint64_t imp_seed = 0;
    bool imp_use_target = false;
    mvi::TrainParams imp_train;
    imp->add_option("--in", imp_in, "Masked CSV")->required();
    imp->add_option("--mask", imp_mask, "0/1 mask CSV (default: empty cells)");
    imp->add_option("--method", imp_method, "mean | median | knn:K | mice | multiplemlp:64-32 | zerofill | delete")
        ->capture_default_str();
    imp->add_option("--target", imp_target, "Target column")->capture_default_str();
    imp->add_flag("--use-target", imp_use_target, "Let imputers read the target column");
    imp->add_option("--epochs", imp_train.epochs, "multiplemlp epochs")->capture_default_str();
    imp->add_option("--lr", imp_train.learning_rate, "multiplemlp learning rate")->capture_default_str();
    imp->add_option("--batch", imp_train.batch_size, "multiplemlp batch size")->capture_default_str();
    imp->add_option("--seed", imp_seed, "Seed")->capture_default_str();
    imp->add_option("--out", imp_out, "Imputed CSV")->required();

    // run
    auto* run = app.add_subcommand("run", "Run a study grid from a YAML config");
    std::string run_config, run_out;
    std::size_t run_jobs = 0;
    bool run_print = false, run_quiet = false;
    run->add_option("--config", run_config, "Study YAML (omit for defaults)");
    run->add_option("--out", run_out, "Output directory (overrides output_dir)");
    run->add_option("--jobs", run_jobs, "Worker threads (overrides jobs)");
    run->add_flag("--print-config", run_print, "Print the fully defaulted config and exit");
    run->add_flag("--quiet", run_quiet, "No progress output");

    // plot
    auto* plot = app.add_subcommand("plot", "Render a missingness diagnostic as SVG");
    std::string plot_in, plot_mask, plot_kind = "aggregation", plot_sort, plot_column, plot_out, plot_target = "class";
    std::vector<std::string> plot_ordinal, plot_columns;
    bool plot_bw = false, plot_ascending = false;
    mvi::PlotSpec spec;
    plot->add_option("--in", plot_in, "Masked CSV")->required();
    plot->add_option("--mask", plot_mask, "0/1 mask CSV (default: empty cells)");
    plot->add_option("--kind", plot_kind, "aggregation | matrix | parallelbox")->capture_default_str();
    plot->add_option("--sort-by", plot_sort, "Matrix: sort rows by this column");
    plot->add_flag("--ascending", plot_ascending, "Matrix: smallest values on top");
    plot->add_option("--column", plot_column, "Parallel boxplot column");
    plot->add_option("--columns", plot_columns, "Matrix: columns to draw")->delimiter(',');
    plot->add_option("--ordinal", plot_ordinal, "Categorical columns with ordered codes")->delimiter(',');
    plot->add_option("--target", plot_target, "Target column")->capture_default_str();
    plot->add_option("--color", spec.highlight_color, "Missing-cell color")->capture_default_str();
    plot->add_flag("--bw", plot_bw, "Black-and-white: missing cells in the darkest gray");
    plot->add_option("--width", spec.width)->capture_default_str();
    plot->add_option("--height", spec.height)->capture_default_str();
    plot->add_option("--out", plot_out, "Output SVG")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            auto data = gen_kind == "personpseudo"
                            ? mvi::generate_person_pseudo(blob.n_rows, blob.n_clusters, blob.std_dev, blob.seed)
                            : mvi::generate_blobs_with_centers(blob);
            mvi::write_csv(gen_out, data.data, data.encoding);
        } else if (*amp) {
            auto table = read_table(amp_in, amp_target, false);
            mvi::AmputationSpec s;
            s.pattern = mvi::parse_pattern(amp_pattern);
            s.mechanism = mvi::parse_mechanism(amp_mech);
            s.rate = amp_rate;
            s.seed = amp_seed;
            s.sharpness_ratio = amp_sharpness;
            auto result = mvi::ampute(table.data, s);
            mvi::write_csv(amp_out, result.data, table.encoding);
            std::ofstream mask_out(amp_mask);
            if (!mask_out) throw mvi::Error(mvi::Errc::IoError, "cannot write " + amp_mask);
            mvi::write_mask_csv(mask_out, result.mask, result.data.schema());
            for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
            std::cerr << "achieved missing rate " << mvi::format_double(mvi::achieved_missing_rate(result.mask)) << '\n';
        } else if (*imp) {
            auto input = read_masked(imp_in, imp_mask, imp_target);
            mvi::ImputeOptions options;
            options.use_target_in_imputation = imp_use_target;
            options.mlp_params = imp_train;
            options.seed = imp_seed;
            auto amputed = mvi::as_amputed(input.table.data);
            auto outcome = mvi::impute(amputed, mvi::parse_method(imp_method), options);
            mvi::write_csv(imp_out, outcome.data, input.table.encoding);
            for (const auto& w : outcome.warnings) std::cerr << "warning: " << w << '\n';
        } else if (*run) {
            auto config = run_config.empty() ? mvi::parse_config("") : mvi::load_config(run_config);
            if (!run_out.empty()) config.output_dir = run_out;
            if (run_jobs > 0) config.jobs = run_jobs;
            if (run_print) {
                std::cout << mvi::canonical_config(config);
                return 0;
            }
            mvi::ProgressFn progress;
            if (!run_quiet)
                progress = [](std::size_t done, std::size_t total) {
                    std::cerr << "\r" << done << "/" << total << std::flush;
                    if (done == total) std::cerr << '\n';
                };
            const auto results = mvi::run_study(config, progress);
            const auto files = mvi::persist_results(results, config, config.output_dir);
            std::size_t errors = 0;
            for (const auto& r : results) errors += r.error.empty() ? 0 : 1;
            std::cerr << results.size() << " cases (" << errors << " failed), wrote " << files.size() << " files to "
                      << config.output_dir << '\n';
        } else if (*plot) {
            auto input = read_masked(plot_in, plot_mask, plot_target);
            spec.kind = mvi::parse_plot_kind(plot_kind);
            if (!plot_sort.empty()) spec.sort_by = plot_sort;
            spec.sort_descending = !plot_ascending;
            spec.black_and_white = plot_bw;
            spec.ordinal_columns.insert(plot_ordinal.begin(), plot_ordinal.end());
            spec.columns = plot_columns;
            write_text(plot_out, mvi::render_plot(input.table.data, input.mask, spec, plot_column));
        }
    } catch (const mvi::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
