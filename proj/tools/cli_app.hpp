#pragma once
#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>
#include <CLI11.hpp>
#include <json.hpp>
#include <gamsel/gamsel.hpp>

namespace gamsel::cli {

enum ExitCode { kOk = 0, kValidation = 1, kNumerical = 2 };

/// Flags shared by every command that fits a path.
struct FitFlags
{
    std::string family = "gaussian";
    std::string variant = "poly";
    std::string lambda_max_rule = "exact";
    GamselConfig cfg;

    void add_to(CLI::App& app)
    {
        app.add_option("--family", family, "gaussian or binomial")->capture_default_str();
        app.add_option("--gamma", cfg.gamma, "linear vs nonlinear mixing in [0,1]")->capture_default_str();
        app.add_option("--degree", cfg.degree, "basis functions per variable")->capture_default_str();
        app.add_option("--df", cfg.df, "end-of-path degrees of freedom")->capture_default_str();
        app.add_option("--num-lambda", cfg.num_lambda, "path length")->capture_default_str();
        app.add_option("--lambda-min-ratio", cfg.lambda_min_ratio, "smallest lambda as a fraction of lambda_max")
            ->capture_default_str();
        app.add_option("--lambda", cfg.lambda, "explicit decreasing lambda grid")->delimiter(',');
        app.add_flag("--append-zero", cfg.append_zero, "append lambda = 0 to the generated grid");
        app.add_option("--variant", variant, "basis variant: poly or q")->capture_default_str();
        app.add_option("--lambda-max-rule", lambda_max_rule, "exact or printed")->capture_default_str();
        app.add_option("--tol", cfg.tol, "coordinate descent tolerance")->capture_default_str();
        app.add_option("--kkt-tol", cfg.kkt_tol, "KKT tolerance")->capture_default_str();
        app.add_option("--max-sweeps", cfg.max_sweeps, "sweep cap per lambda")->capture_default_str();
        app.add_option("--strong-rules", cfg.strong_rules, "use strong-rule screening (true/false)")
            ->capture_default_str();
        app.add_option("--classify-tol", cfg.classify_tol, "zero threshold for term classes")->capture_default_str();
        app.add_option("--middle-tol", cfg.middle_tol, "binomial middle-loop tolerance")->capture_default_str();
        app.add_option("--max-middle", cfg.max_middle, "binomial middle-loop cap")->capture_default_str();
        app.add_option("--threads", cfg.threads, "worker threads (1 = sequential)")->capture_default_str();
    }

    GamselConfig resolve() const
    {
        GamselConfig c = cfg;
        c.family = family_from_string(family);
        c.variant = variant_from_string(variant);
        if (lambda_max_rule == "exact") c.lambda_max_rule = LambdaMaxRule::kExact;
        else if (lambda_max_rule == "printed") c.lambda_max_rule = LambdaMaxRule::kPrinted;
        else throw InvalidInput("--lambda-max-rule must be exact or printed");
        c.validate();
        return c;
    }
};

/// Predictors are every column except the response.
inline Dataset dataset_from_csv(const CsvTable& t, const std::string& response)
{
    const Index yc = t.column(response);
    if (yc < 0) throw InvalidInput("response column '" + response + "' not found in header");
    Dataset d;
    d.y = t.data.col(yc);
    d.X.resize(t.data.rows(), static_cast<Index>(t.header.size()) - 1);
    for (Index c = 0, j = 0; c < static_cast<Index>(t.header.size()); ++c) {
        if (c == yc) continue;
        d.X.col(j++) = t.data.col(c);
        d.names.push_back(t.header[c]);
    }
    if (d.p() == 0) throw InvalidInput("no predictor columns");
    return d;
}

inline void write_text(const std::string& path, const std::string& text)
{
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InvalidInput("cannot write '" + path + "'");
    f << text;
    if (!f) throw InvalidInput("write failed for '" + path + "'");
}

inline std::string read_text(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) throw InvalidInput("cannot open '" + path + "'");
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

/// Per (lambda, variable) rows for regularization plots.
inline void write_path_summary(std::ostream& out, const GamselPath& path)
{
    out << "lambda_index,lambda,variable,alpha,beta_norm,class,term_df\n";
    for (std::size_t l = 0; l < path.points.size(); ++l) {
        const PathPoint& pt = path.points[l];
        for (Index j = 0; j < path.p(); ++j) {
            out << l + 1 << ',' << format_double(pt.lambda) << ',' << csv_quote(path.names[j]) << ','
                << format_double(pt.state.alpha[j]) << ',' << format_double(pt.state.beta[j].norm()) << ','
                << to_string(pt.classes[j]) << ',' << format_double(pt.term_df[j]) << '\n';
        }
    }
}

/// Predictor matrix in the model's variable order; missing columns are listed.
inline Mat match_columns(const CsvTable& t, const std::vector<std::string>& names)
{
    std::vector<std::string> missing;
    Mat X(t.data.rows(), static_cast<Index>(names.size()));
    for (std::size_t j = 0; j < names.size(); ++j) {
        const Index c = t.column(names[j]);
        if (c < 0) missing.push_back(names[j]);
        else X.col(static_cast<Index>(j)) = t.data.col(c);
    }
    if (!missing.empty()) {
        std::string msg = "new data is missing model variable(s):";
        for (const auto& m : missing) msg += " '" + m + "'";
        throw InvalidInput(msg);
    }
    return X;
}

inline std::vector<Index> parse_index_list(const std::string& s, Index p, const std::string& what)
{
    std::vector<Index> out;
    if (s.empty() || s == "none") return out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        tok = detail::trim(tok);
        Index v = 0;
        const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (tok.empty() || res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
            throw InvalidInput(what + ": cannot parse '" + tok + "' as an index");
        }
        if (v < 1 || v > p) throw InvalidInput(what + ": index " + tok + " outside 1.." + std::to_string(p));
        out.push_back(v - 1);
    }
    return out;
}

inline std::string join_index_list(const std::vector<Index>& v)
{
    if (v.empty()) return "none";
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i] + 1);
    return s;
}

/**
 * Expand `--config FILE` into `--key=value` arguments placed ahead of the
 * remaining command-line arguments so explicit flags win. Lines are
 * key=value; blank lines and lines starting with '#' are skipped; '_' in keys
 * is read as '-'.
 */
inline std::vector<std::string> expand_config(const std::vector<std::string>& args)
{
    std::vector<std::string> head, rest, cfg;
    bool seen_sub = false;
    for (std::size_t i = 0; i < args.size(); ++i) {
        std::string path;
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw InvalidInput("--config needs a file name");
            path = args[++i];
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
        } else {
            if (!seen_sub) {
                head.push_back(args[i]);
                if (args[i].empty() || args[i][0] != '-') seen_sub = true;
            } else {
                rest.push_back(args[i]);
            }
            continue;
        }
        std::istringstream in(read_text(path));
        std::string line;
        std::size_t no = 0;
        while (std::getline(in, line)) {
            ++no;
            line = detail::trim(line);
            if (line.empty() || line[0] == '#') continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                throw InvalidInput("config " + path + " line " + std::to_string(no) + ": expected key=value");
            }
            std::string key = detail::trim(line.substr(0, eq));
            std::replace(key.begin(), key.end(), '_', '-');
            cfg.push_back("--" + key + "=" + detail::trim(line.substr(eq + 1)));
        }
    }
    head.insert(head.end(), cfg.begin(), cfg.end());
    head.insert(head.end(), rest.begin(), rest.end());
    return head;
}

/// Command-line front end; `args` excludes the program name.
inline int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Sparse generalized additive models fitted along a regularization path", "gamsel"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.set_help_all_flag("--help-all", "show help for all commands");

    std::string data_path, response = "y", model_path, summary_path, out_path, index_list;
    FitFlags ff;
    std::string cv_mode = "regenerate", cv_measure = "default", cv_table, cv_summary;
    Index folds = 10;
    std::uint64_t seed = 1;

    auto* fit_cmd = app.add_subcommand("fit", "fit the regularization path and save the model");
    fit_cmd->add_option("--data", data_path, "training CSV (header required)")->required();
    fit_cmd->add_option("--response", response, "response column")->capture_default_str();
    fit_cmd->add_option("--model", model_path, "output model file (JSON)")->required();
    fit_cmd->add_option("--summary", summary_path, "path summary CSV (default: stdout)");
    ff.add_to(*fit_cmd);

    auto* pred_cmd = app.add_subcommand("predict", "predict from a saved model");
    pred_cmd->add_option("--model", model_path, "model file")->required();
    pred_cmd->add_option("--data", data_path, "new data CSV")->required();
    pred_cmd->add_option("--lambda-index", index_list, "1-based path indices, comma separated (default: all)");
    pred_cmd->add_option("--out", out_path, "predictions CSV (default: stdout)");

    auto* cv_cmd = app.add_subcommand("cv", "K-fold cross-validation along the path");
    cv_cmd->add_option("--data", data_path, "training CSV (header required)")->required();
    cv_cmd->add_option("--response", response, "response column")->capture_default_str();
    cv_cmd->add_option("--folds", folds, "number of folds")->capture_default_str();
    cv_cmd->add_option("--seed", seed, "fold assignment seed")->capture_default_str();
    cv_cmd->add_option("--mode", cv_mode, "regenerate or transform (experimental)")->capture_default_str();
    cv_cmd->add_option("--measure", cv_measure, "default, mse, deviance or misclassification")
        ->capture_default_str();
    cv_cmd->add_option("--table", cv_table, "per-lambda CV table CSV (default: stdout)");
    cv_cmd->add_option("--summary", cv_summary, "JSON summary file (default: stderr)");
    cv_cmd->add_option("--model", model_path, "also fit the full path and save it here");
    ff.add_to(*cv_cmd);

    std::string preset = "sec51", linear, nonlinear, truth_out, metrics_out, fdr_out, scenario_out;
    std::optional<Index> sim_n, sim_p, sim_degree;
    std::optional<double> noise_sd, snr;
    std::optional<std::uint64_t> sim_seed;
    bool do_fit = false;
    std::string sim_data_out;
    auto* sim_cmd = app.add_subcommand("simulate", "generate a synthetic additive data set");
    sim_cmd->add_option("--preset", preset, "sec51 or fig3")->capture_default_str();
    sim_cmd->add_option("--n", sim_n, "observations");
    sim_cmd->add_option("--p", sim_p, "variables");
    sim_cmd->add_option("--linear", linear, "1-based linear variables, comma separated, or none");
    sim_cmd->add_option("--nonlinear", nonlinear, "1-based nonlinear variables, comma separated, or none");
    sim_cmd->add_option("--noise-sd", noise_sd, "noise standard deviation (sets snr to 0)");
    sim_cmd->add_option("--snr", snr, "Var(signal)/noise variance; overrides noise-sd when > 0");
    sim_cmd->add_option("--poly-degree", sim_degree, "degree of the nonlinear polynomials");
    sim_cmd->add_option("--seed", sim_seed, "generator seed");
    sim_cmd->add_option("--data-out", sim_data_out, "data CSV (x1..xp,y)")->required();
    sim_cmd->add_option("--truth-out", truth_out, "truth JSON");
    sim_cmd->add_option("--scenario-out", scenario_out, "scenario as a key=value config file");
    sim_cmd->add_flag("--fit", do_fit, "fit the path and report selection metrics");
    sim_cmd->add_option("--metrics", metrics_out, "per-lambda misclassification CSV (with --fit)");
    sim_cmd->add_option("--fdr", fdr_out, "FDR by model size CSV (with --fit)");
    sim_cmd->add_option("--model", model_path, "save the fitted model (with --fit)");
    ff.add_to(*sim_cmd);

    try {
        std::vector<std::string> args = expand_config(raw_args);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) return app.exit(e, out, err);
        err << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kValidation;
    }

    try {
        if (fit_cmd->parsed()) {
            const GamselConfig cfg = ff.resolve();
            const Dataset d = dataset_from_csv(read_csv_file(data_path), response);
            const GamselPath path = fit(d, cfg);
            for (const auto& w : path.warnings) err << "warning: " << w << "\n";
            write_text(model_path, serialize(path));
            std::ostringstream s;
            write_path_summary(s, path);
            if (summary_path.empty()) out << s.str();
            else write_text(summary_path, s.str());
        } else if (pred_cmd->parsed()) {
            const GamselPath path = deserialize(read_text(model_path));
            const std::vector<Index> idx = parse_index_list(index_list, static_cast<Index>(path.points.size()),
                                                            "--lambda-index");
            const CsvTable t = read_csv_file(data_path);
            const Mat X = match_columns(t, path.names);
            const Prediction pr = predict(path, X, idx);
            std::vector<Index> cols = idx;
            if (cols.empty())
                for (Index l = 0; l < static_cast<Index>(path.points.size()); ++l) cols.push_back(l);
            std::vector<std::string> header;
            for (Index l : cols) header.push_back("eta_" + std::to_string(l + 1));
            Mat table = pr.eta;
            if (path.config.family == Family::kBinomial) {
                for (Index l : cols) header.push_back("prob_" + std::to_string(l + 1));
                table.resize(pr.eta.rows(), pr.eta.cols() * 2);
                table << pr.eta, pr.prob;
            }
            std::ostringstream s;
            write_csv(s, header, table);
            if (out_path.empty()) out << s.str();
            else write_text(out_path, s.str());
        } else if (cv_cmd->parsed()) {
            const GamselConfig cfg = ff.resolve();
            const CvMode mode = cv_mode_from_string(cv_mode);
            const CvMeasure measure = cv_measure_from_string(cv_measure);
            const Dataset d = dataset_from_csv(read_csv_file(data_path), response);
            const CvResult r = cv_path(d, cfg, folds, seed, mode, measure);
            std::ostringstream s;
            s << "lambda_index,lambda,mean_error,se,is_min,is_1se\n";
            for (std::size_t l = 0; l < r.lambda_grid.size(); ++l) {
                const Index li = static_cast<Index>(l);
                s << l + 1 << ',' << format_double(r.lambda_grid[l]) << ',' << format_double(r.mean_error[li]) << ','
                  << format_double(r.se[li]) << ',' << (li == r.index_min) << ',' << (li == r.index_1se) << '\n';
            }
            if (cv_table.empty()) out << s.str();
            else write_text(cv_table, s.str());
            nlohmann::json js;
            js["folds"] = folds;
            js["seed"] = seed;
            js["mode"] = to_string(r.mode);
            js["measure"] = to_string(r.measure);
            js["lambda_max"] = r.lambda_max;
            js["index_min"] = r.index_min + 1;
            js["lambda_min"] = r.lambda_grid[r.index_min];
            js["error_min"] = r.mean_error[r.index_min];
            js["se_min"] = r.se[r.index_min];
            js["index_1se"] = r.index_1se + 1;
            js["lambda_1se"] = r.lambda_grid[r.index_1se];
            js["error_1se"] = r.mean_error[r.index_1se];
            if (!model_path.empty()) {
                const GamselPath path = fit(d, cfg, r.lambda_grid);
                write_text(model_path, serialize(path));
                js["model"] = model_path;
            }
            if (cv_summary.empty()) err << js.dump(1) << "\n";
            else write_text(cv_summary, js.dump(1) + "\n");
        } else if (sim_cmd->parsed()) {
            const GamselConfig cfg = ff.resolve();
            Scenario sc = scenario_preset(preset);
            if (sim_n) sc.n = *sim_n;
            if (sim_p) sc.p = *sim_p;
            if (sim_degree) sc.poly_degree = *sim_degree;
            if (sim_seed) sc.seed = *sim_seed;
            if (noise_sd) {
                sc.noise_sd = *noise_sd;
                sc.snr = 0.0;
            }
            if (snr) sc.snr = *snr;
            if (!linear.empty()) sc.idx_linear = parse_index_list(linear, sc.p, "--linear");
            if (!nonlinear.empty()) sc.idx_nonlinear = parse_index_list(nonlinear, sc.p, "--nonlinear");
            const SimData sd = gen_scenario(sc);

            std::vector<std::string> header = sd.data.names;
            header.push_back("y");
            Mat table(sd.data.n(), sd.data.p() + 1);
            table << sd.data.X, sd.data.y;
            std::ostringstream s;
            write_csv(s, header, table);
            write_text(sim_data_out, s.str());

            if (!truth_out.empty()) {
                nlohmann::json js;
                js["noise_sd"] = sd.noise_sd;
                js["seed"] = sc.seed;
                nlohmann::json terms = nlohmann::json::array();
                for (Index j = 0; j < sc.p; ++j) {
                    const TruthTerm& t = sd.terms[j];
                    nlohmann::json o;
                    o["variable"] = sd.data.names[j];
                    o["class"] = to_string(t.cls);
                    if (t.cls == TermClass::kLinear) o["slope"] = t.slope;
                    if (t.cls == TermClass::kNonlinear) {
                        o["poly"] = std::vector<double>(t.poly.data(), t.poly.data() + t.poly.size());
                        o["center"] = t.center;
                        o["scale"] = t.scale;
                    }
                    terms.push_back(o);
                }
                js["terms"] = terms;
                write_text(truth_out, js.dump(1) + "\n");
            }
            if (!scenario_out.empty()) {
                std::ostringstream c;
                c << "preset=" << preset << "\nn=" << sc.n << "\np=" << sc.p << "\nlinear=" << join_index_list(sc.idx_linear)
                  << "\nnonlinear=" << join_index_list(sc.idx_nonlinear) << "\nnoise-sd=" << format_double(sc.noise_sd)
                  << "\nsnr=" << format_double(sc.snr) << "\npoly-degree=" << sc.poly_degree << "\nseed=" << sc.seed
                  << "\n";
                write_text(scenario_out, c.str());
            }
            if (do_fit) {
                const GamselPath path = fit(sd.data, cfg);
                for (const auto& w : path.warnings) err << "warning: " << w << "\n";
                if (!model_path.empty()) write_text(model_path, serialize(path));
                std::ostringstream m;
                m << "lambda_index,lambda,size,zeros,linear,nonlinear,zero_vs_nonzero\n";
                for (std::size_t l = 0; l < path.points.size(); ++l) {
                    const auto r = misclassification(sd.truth, path.points[l].classes);
                    m << l + 1 << ',' << format_double(path.points[l].lambda) << ','
                      << selection_fdr(sd.truth, path.points[l].classes).first << ',' << format_double(r.zeros) << ','
                      << format_double(r.linear) << ',' << format_double(r.nonlinear) << ','
                      << format_double(r.zero_vs_nonzero) << '\n';
                }
                if (metrics_out.empty()) out << m.str();
                else write_text(metrics_out, m.str());
                if (!fdr_out.empty()) {
                    std::ostringstream f;
                    f << "size,fdr\n";
                    for (const auto& [size, fdr] : fdr_at_model_size(sd.truth, path.points))
                        f << size << ',' << format_double(fdr) << '\n';
                    write_text(fdr_out, f.str());
                }
            }
        }
    } catch (const ConvergenceFailure& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kNumerical;
    } catch (const NumericalDegeneracy& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kNumerical;
    } catch (const ContractViolation& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kNumerical;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kValidation;
    }
    return kOk;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    return run(std::vector<std::string>(argv + 1, argv + argc), out, err);
}

} // namespace gamsel::cli
