// Command-line front end. Subcommands wire the library into reproducible
// runs: every command writes its artifacts plus a manifest echoing the
// effective configuration under --out-dir, and is deterministic given
// (inputs, seed).
//
// Exit codes: 0 ok, 2 usage error, 3 data error, 4 internal error.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sovrate/sovrate.hpp"

namespace fs = std::filesystem;
using namespace sovrate;

namespace {

struct CommonOpts {
    std::string data_path = "out/synthetic.csv";
    std::string out_dir = "out";
    std::uint64_t seed = 1;
    int k = 10;
    int reps = 5;
    int jobs = 1;
};

struct MlpOpts {
    int layers = 1;
    int neurons = 256;
    double dropout = 0.1;
    int epochs = 400;
    int batch = 8;
    double step = 1e-3;

    MlpConfig config(std::uint64_t seed) const {
        MlpConfig c;
        c.hidden_layers = layers;
        c.neurons = neurons;
        c.dropout = dropout;
        c.epochs = epochs;
        c.batch_size = batch;
        c.step_size = step;
        c.seed = seed;
        return c;
    }
};

struct CartOpts {
    int max_depth = -1;
    int min_samples_split = 2;
    double min_impurity_decrease = 0.0;
    double ccp_alpha = 0.0;

    CartConfig config() const {
        return CartConfig{max_depth, min_samples_split, min_impurity_decrease, ccp_alpha};
    }
};

struct OlOpts {
    std::string exclude = "gov_debt";
    int max_iter = 10000;

    std::vector<int> included() const {
        std::vector<int> out;
        std::vector<std::string> names;
        if (exclude != "none") {
            std::string cur;
            for (char c : exclude + ",") {
                if (c == ',') {
                    if (!cur.empty()) names.push_back(cur);
                    cur.clear();
                } else {
                    cur.push_back(c);
                }
            }
            for (const auto& n : names) feature_index(n);  // validates
        }
        for (int j = 0; j < kFeatureCount; ++j) {
            const std::string name(kFeatureSchema[static_cast<std::size_t>(j)].name);
            if (std::find(names.begin(), names.end(), name) == names.end()) out.push_back(j);
        }
        if (out.empty()) throw CLI::ValidationError("--ol-exclude", "cannot exclude every feature");
        return out;
    }

    OrdLogitOptions options() const {
        OrdLogitOptions o;
        o.max_iterations = max_iter;
        return o;
    }
};

void write_manifest(const std::string& out_dir, const std::string& command,
                    const std::map<std::string, std::string>& kv) {
    std::ofstream out(out_dir + "/manifest.txt");
    if (!out) throw IoError("cannot write manifest in '" + out_dir + "'");
    out << "command=" << command << "\n";
    for (const auto& [key, value] : kv) out << key << "=" << value << "\n";
}

void ensure_out_dir(const std::string& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory '" + out_dir + "'");
}

std::vector<std::string> parse_model_list(const std::string& arg, bool with_ol) {
    if (arg == "all") {
        return with_ol ? std::vector<std::string>{"mlp", "cart", "ol"}
                       : std::vector<std::string>{"mlp", "cart"};
    }
    if (arg == "mlp" || arg == "cart" || (with_ol && arg == "ol")) return {arg};
    throw CLI::ValidationError("--model", "expected mlp|cart" + std::string(with_ol ? "|ol|all" : "|all"));
}

std::string notch_csv_row(const std::string& model, const NotchTable& t) {
    return model + "," + fmt_fixed(t.below2, 1) + "," + fmt_fixed(t.below1, 1) + "," +
           fmt_fixed(t.exact, 1) + "," + fmt_fixed(t.above1, 1) + "," + fmt_fixed(t.above2, 1) + "," +
           fmt_fixed(t.within1, 1) + "," + fmt_fixed(t.within2, 1) + "," + fmt_fixed(t.mae, 2);
}

void print_notch_text(std::ostream& out, const std::vector<std::pair<std::string, NotchTable>>& rows) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-6s %8s %8s %8s %8s %8s %9s %9s %6s", "model", "2 below",
                  "1 below", "Exact", "1 above", "2 above", "Within 1", "Within 2", "MAE");
    out << buf << "\n";
    for (const auto& [name, t] : rows) {
        std::snprintf(buf, sizeof buf, "%-6s %8.1f %8.1f %8.1f %8.1f %8.1f %9.1f %9.1f %6.2f",
                      name.c_str(), t.below2, t.below1, t.exact, t.above1, t.above2, t.within1,
                      t.within2, t.mae);
        out << buf << "\n";
    }
}

int cmd_synth(const CommonOpts& common, std::size_t n, const std::string& scenario) {
    ensure_out_dir(common.out_dir);
    const Dataset d = synthesize_dataset(n, common.seed, scenario_from_string(scenario));
    const std::string path = common.out_dir + "/synthetic.csv";
    save_dataset(d, path);
    write_manifest(common.out_dir, "synth",
                   {{"n", std::to_string(n)},
                    {"seed", std::to_string(common.seed)},
                    {"scenario", scenario},
                    {"output", path}});
    std::cout << "wrote " << d.size() << " rows to " << path << "\n";
    return 0;
}

int cmd_stats(const CommonOpts& common) {
    ensure_out_dir(common.out_dir);
    const Dataset d = load_dataset(common.data_path);
    const StatsTable table = descriptive_stats(d);

    const std::string path = common.out_dir + "/stats.csv";
    std::ofstream csv(path);
    if (!csv) throw IoError("cannot write '" + path + "'");
    csv << "feature,median,mean,std,p1,p99\n";
    for (const auto& r : table.rows)
        csv << r.feature << "," << fmt_fixed(r.median, 1) << "," << fmt_fixed(r.mean, 1) << ","
            << fmt_fixed(r.std, 1) << "," << fmt_fixed(r.p1, 1) << "," << fmt_fixed(r.p99, 1)
            << "\n";

    char buf[256];
    std::snprintf(buf, sizeof buf, "%-22s %8s %8s %8s %8s %8s", "feature", "median", "mean", "std",
                  "1%", "99%");
    std::cout << buf << "\n";
    for (const auto& r : table.rows) {
        std::snprintf(buf, sizeof buf, "%-22s %8.1f %8.1f %8.1f %8.1f %8.1f", r.feature.c_str(),
                      r.median, r.mean, r.std, r.p1, r.p99);
        std::cout << buf << "\n";
    }
    write_manifest(common.out_dir, "stats",
                   {{"data", common.data_path},
                    {"seed", std::to_string(common.seed)},
                    {"rows", std::to_string(d.size())},
                    {"output", path}});
    return 0;
}

int cmd_evaluate(const CommonOpts& common, const std::string& model_arg, const MlpOpts& mlp,
                 const CartOpts& cart, const OlOpts& ol) {
    const std::vector<std::string> models = parse_model_list(model_arg, /*with_ol=*/true);
    ensure_out_dir(common.out_dir);
    const Dataset d = load_dataset(common.data_path);

    std::vector<std::pair<std::string, NotchTable>> rows;
    for (const std::string& m : models) {
        ModelSpec spec = m == "mlp"    ? mlp_model_spec(mlp.config(0))
                         : m == "cart" ? cart_model_spec(cart.config())
                                       : ol_model_spec(ol.included(), ol.options());
        const CvResult cv = cross_validate(spec, d, common.k, common.reps, common.seed, common.jobs);
        rows.emplace_back(cv.model, cv.aggregate);
    }

    const std::string csv_path = common.out_dir + "/notch.csv";
    std::ofstream csv(csv_path);
    if (!csv) throw IoError("cannot write '" + csv_path + "'");
    csv << "model,below2,below1,exact,above1,above2,within1,within2,mae\n";
    for (const auto& [name, t] : rows) csv << notch_csv_row(name, t) << "\n";
    csv.close();

    std::ofstream txt(common.out_dir + "/notch.txt");
    print_notch_text(txt, rows);
    print_notch_text(std::cout, rows);

    write_manifest(common.out_dir, "evaluate",
                   {{"data", common.data_path},
                    {"model", model_arg},
                    {"k", std::to_string(common.k)},
                    {"reps", std::to_string(common.reps)},
                    {"seed", std::to_string(common.seed)},
                    {"jobs", std::to_string(common.jobs)},
                    {"mlp.layers", std::to_string(mlp.layers)},
                    {"mlp.neurons", std::to_string(mlp.neurons)},
                    {"mlp.dropout", fmt_double(mlp.dropout)},
                    {"mlp.epochs", std::to_string(mlp.epochs)},
                    {"mlp.batch", std::to_string(mlp.batch)},
                    {"cart.max_depth", std::to_string(cart.max_depth)},
                    {"cart.min_samples_split", std::to_string(cart.min_samples_split)},
                    {"cart.min_impurity_decrease", fmt_double(cart.min_impurity_decrease)},
                    {"cart.ccp_alpha", fmt_double(cart.ccp_alpha)},
                    {"ol.exclude", ol.exclude},
                    {"output", csv_path}});
    return 0;
}

int cmd_explain(const CommonOpts& common, const std::string& model_arg, const std::string& rows_arg,
                std::size_t background_rows, bool dump_tree, const MlpOpts& mlp,
                const CartOpts& cart) {
    const std::vector<std::string> models = parse_model_list(model_arg, /*with_ol=*/false);
    ensure_out_dir(common.out_dir);
    const Dataset d = load_dataset(common.data_path);

    std::vector<std::size_t> rows;
    if (rows_arg == "all") {
        rows.resize(d.size());
        std::iota(rows.begin(), rows.end(), std::size_t{0});
    } else {
        std::string cur;
        for (char c : rows_arg + ",") {
            if (c == ',') {
                if (!cur.empty()) {
                    long v = -1;
                    try {
                        v = std::stol(cur);
                    } catch (const std::exception&) {
                        throw CLI::ValidationError("--rows", "bad row index: " + cur);
                    }
                    if (v < 0 || static_cast<std::size_t>(v) >= d.size())
                        throw CLI::ValidationError("--rows", "row index out of range: " + cur);
                    rows.push_back(static_cast<std::size_t>(v));
                    cur.clear();
                }
            } else {
                cur.push_back(c);
            }
        }
        if (rows.empty()) throw CLI::ValidationError("--rows", "no rows selected");
    }

    const BackgroundSet background = BackgroundSet::sample(d, background_rows, mix_seed(common.seed, 7));

    for (const std::string& m : models) {
        ExplainTarget target;
        std::shared_ptr<CartModel> tree;
        if (m == "mlp") {
            auto model = std::make_shared<MlpModel>(train_mlp(mlp.config(common.seed), d));
            target = {[model](std::span<const double> x) { return model->expected_rating(x); }, "MLP"};
        } else {
            tree = std::make_shared<CartModel>(grow_cart(d, cart.config()));
            target = {[tree](std::span<const double> x) { return static_cast<double>(tree->predict(x)); },
                      "CART"};
        }

        std::vector<ShapExplanation> explanations(rows.size());
        detail::parallel_for(rows.size(), common.jobs, [&](std::size_t i) {
            explanations[i] = shapley(target, d.rows[rows[i]].features, background);
        });

        beeswarm_export(explanations, common.out_dir + "/shap_" + m + ".csv",
                        common.out_dir + "/beeswarm_" + m + ".svg", mix_seed(common.seed, 8));

        const auto ranking = importance_ranking(explanations);
        std::ofstream rank_csv(common.out_dir + "/ranking_" + m + ".csv");
        rank_csv << "rank,feature,mean_abs_phi\n";
        char buf[128];
        std::cout << target.label << " feature importance:\n";
        for (std::size_t r = 0; r < ranking.size(); ++r) {
            const auto& name = kFeatureSchema[static_cast<std::size_t>(ranking[r].feature)].name;
            rank_csv << (r + 1) << "," << name << "," << fmt_fixed(ranking[r].mean_abs_phi, 4) << "\n";
            std::snprintf(buf, sizeof buf, "  %2zu. %-22s %8.4f", r + 1, std::string(name).c_str(),
                          ranking[r].mean_abs_phi);
            std::cout << buf << "\n";
        }

        if (m == "cart" && dump_tree) {
            std::ofstream treefile(common.out_dir + "/cart_tree.txt");
            treefile << tree->dump();
        }
    }

    write_manifest(common.out_dir, "explain",
                   {{"data", common.data_path},
                    {"model", model_arg},
                    {"rows", rows_arg},
                    {"background", std::to_string(background_rows)},
                    {"seed", std::to_string(common.seed)},
                    {"jobs", std::to_string(common.jobs)},
                    {"mlp.layers", std::to_string(mlp.layers)},
                    {"mlp.neurons", std::to_string(mlp.neurons)},
                    {"mlp.epochs", std::to_string(mlp.epochs)}});
    return 0;
}

int cmd_report_ol(const CommonOpts& common, const OlOpts& ol) {
    ensure_out_dir(common.out_dir);
    const Dataset d = load_dataset(common.data_path);
    const auto [model, report] = fit_ordered_logit(d, ol.included(), ol.options());

    const std::string csv_path = common.out_dir + "/ol_report.csv";
    std::ofstream csv(csv_path);
    if (!csv) throw IoError("cannot write '" + csv_path + "'");
    csv << "feature,coefficient,std_error,p_value\n";
    for (const auto& row : report.coefficients)
        csv << row.name << "," << fmt_fixed(row.estimate, 4) << "," << fmt_fixed(row.std_error, 4)
            << "," << fmt_fixed(row.p_value, 4) << "\n";
    csv.close();

    auto print_table = [&](std::ostream& out) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%-22s %12s %10s %10s", "feature", "coefficient", "S.E.",
                      "p-value");
        out << buf << "\n";
        for (const auto& row : report.coefficients) {
            std::snprintf(buf, sizeof buf, "%-22s %12.4f %10.4f %10.4f", row.name.c_str(),
                          row.estimate, row.std_error, row.p_value);
            out << buf << "\n";
        }
        std::snprintf(buf, sizeof buf, "log-likelihood %.4f, iterations %d, converged %s",
                      report.log_lik, report.iterations, report.converged ? "yes" : "no");
        out << buf << "\n";
    };
    std::ofstream txt(common.out_dir + "/ol_report.txt");
    print_table(txt);
    print_table(std::cout);

    write_manifest(common.out_dir, "report-ol",
                   {{"data", common.data_path},
                    {"seed", std::to_string(common.seed)},
                    {"ol.exclude", ol.exclude},
                    {"ol.max_iter", std::to_string(ol.max_iter)},
                    {"output", csv_path}});
    return 0;
}

int cmd_grid(const CommonOpts& common, const std::string& grid_arg, const std::string& alphas_arg,
             int grid_epochs, int grid_batch) {
    ensure_out_dir(common.out_dir);
    const Dataset d = load_dataset(common.data_path);
    const CvProtocol protocol{common.k, common.reps, common.seed, common.jobs};

    GridResult result;
    if (grid_arg == "structure") {
        result = mlp_structure_grid(d, protocol, grid_epochs, grid_batch);
    } else if (grid_arg == "estimation") {
        result = mlp_estimation_grid(d, protocol);
    } else if (grid_arg == "cart-restriction") {
        result = cart_restriction_grid(d, protocol);
    } else if (grid_arg == "cart-alpha") {
        std::vector<double> alphas;
        std::string cur;
        for (char c : alphas_arg + ",") {
            if (c == ',') {
                if (!cur.empty()) {
                    try {
                        alphas.push_back(std::stod(cur));
                    } catch (const std::exception&) {
                        throw CLI::ValidationError("--alphas", "bad alpha: " + cur);
                    }
                }
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        result = cart_alpha_sweep(d, alphas, protocol);
    } else {
        throw CLI::ValidationError("--grid",
                                   "expected structure|estimation|cart-restriction|cart-alpha");
    }

    const std::string csv_path = common.out_dir + "/grid_" + grid_arg + ".csv";
    std::ofstream csv(csv_path);
    if (!csv) throw IoError("cannot write '" + csv_path + "'");
    for (std::size_t a = 0; a < result.axis_names.size(); ++a) csv << result.axis_names[a] << ",";
    csv << "mean,std\n";
    for (const auto& cell : result.cells) {
        for (double v : cell.axis_values) csv << fmt_double(v) << ",";
        csv << fmt_fixed(cell.mean_accuracy, 2) << "," << fmt_fixed(cell.std_accuracy, 2) << "\n";
    }
    csv.close();

    auto print_table = [&](std::ostream& out) {
        for (const auto& name : result.axis_names) out << name << "  ";
        out << "mean   std\n";
        for (const auto& cell : result.cells) {
            for (double v : cell.axis_values) out << fmt_double(v) << "  ";
            out << fmt_fixed(cell.mean_accuracy, 1) << "  " << fmt_fixed(cell.std_accuracy, 1)
                << "\n";
        }
        const GridCell& best = result.best_by_accuracy();
        const GridCell& selected = select_best(result, SelectionRule::parsimony(0.5));
        out << "best-by-accuracy:";
        for (double v : best.axis_values) out << " " << fmt_double(v);
        out << " (" << fmt_fixed(best.mean_accuracy, 1) << ")\n";
        out << "selected (parsimony 0.5):";
        for (double v : selected.axis_values) out << " " << fmt_double(v);
        out << " (" << fmt_fixed(selected.mean_accuracy, 1) << ")\n";
    };
    std::ofstream txt(common.out_dir + "/grid_" + grid_arg + ".txt");
    print_table(txt);
    std::cout << "grid '" << grid_arg << "': " << result.cells.size() << " cells -> " << csv_path
              << "\n";

    write_manifest(common.out_dir, "grid",
                   {{"data", common.data_path},
                    {"grid", grid_arg},
                    {"k", std::to_string(common.k)},
                    {"reps", std::to_string(common.reps)},
                    {"seed", std::to_string(common.seed)},
                    {"jobs", std::to_string(common.jobs)},
                    {"alphas", alphas_arg},
                    {"output", csv_path}});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sovrate: sovereign credit rating models, evaluation and explanations"};
    app.require_subcommand(1);

    CommonOpts common;
    MlpOpts mlp;
    CartOpts cart;
    OlOpts ol;

    auto add_common = [&](CLI::App* cmd, bool with_data) {
        if (with_data) cmd->add_option("--data", common.data_path, "input panel CSV");
        cmd->add_option("--out-dir", common.out_dir, "output directory");
        cmd->add_option("--seed", common.seed, "master seed");
    };
    auto add_cv = [&](CLI::App* cmd) {
        cmd->add_option("--k", common.k, "number of folds")->check(CLI::Range(2, 1000000));
        cmd->add_option("--reps", common.reps, "number of replications")->check(CLI::Range(1, 1000000));
        cmd->add_option("--jobs", common.jobs, "worker threads (0 = all cores)")
            ->check(CLI::Range(0, 4096));
    };
    auto add_mlp = [&](CLI::App* cmd) {
        cmd->add_option("--layers", mlp.layers, "MLP hidden layers")->check(CLI::Range(1, 64));
        cmd->add_option("--neurons", mlp.neurons, "neurons per hidden layer")->check(CLI::Range(1, 65536));
        cmd->add_option("--dropout", mlp.dropout, "dropout rate")->check(CLI::Range(0.0, 0.999));
        cmd->add_option("--epochs", mlp.epochs, "training epochs")->check(CLI::Range(1, 1000000));
        cmd->add_option("--batch", mlp.batch, "mini-batch size")->check(CLI::Range(1, 1000000));
        cmd->add_option("--step", mlp.step, "optimizer step size")->check(CLI::PositiveNumber);
    };
    auto add_cart = [&](CLI::App* cmd) {
        cmd->add_option("--max-depth", cart.max_depth, "CART max depth (-1 = unrestricted)");
        cmd->add_option("--min-samples-split", cart.min_samples_split, "min samples to split")
            ->check(CLI::Range(2, 1000000));
        cmd->add_option("--min-impurity-decrease", cart.min_impurity_decrease,
                        "min weighted impurity decrease")
            ->check(CLI::NonNegativeNumber);
        cmd->add_option("--ccp-alpha", cart.ccp_alpha, "cost-complexity pruning alpha")
            ->check(CLI::NonNegativeNumber);
    };
    auto add_ol = [&](CLI::App* cmd) {
        cmd->add_option("--ol-exclude", ol.exclude, "features excluded from the OL model (or 'none')");
        cmd->add_option("--ol-max-iter", ol.max_iter, "OL iteration cap")->check(CLI::Range(1, 10000000));
    };

    // synth
    std::size_t synth_n = 1000;
    std::string synth_scenario = "linear";
    CLI::App* synth = app.add_subcommand("synth", "write a synthetic panel CSV");
    add_common(synth, /*with_data=*/false);
    synth->add_option("--n", synth_n, "rows to generate")->check(CLI::Range(50, 100000000));
    synth->add_option("--scenario", synth_scenario, "linear|nonlinear")
        ->check(CLI::IsMember({"linear", "nonlinear"}));

    // stats
    CLI::App* stats = app.add_subcommand("stats", "descriptive statistics of a panel CSV");
    add_common(stats, true);

    // evaluate
    std::string eval_model = "all";
    CLI::App* evaluate = app.add_subcommand("evaluate", "replicated k-fold cross-validation");
    add_common(evaluate, true);
    add_cv(evaluate);
    evaluate->add_option("--model", eval_model, "mlp|cart|ol|all");
    add_mlp(evaluate);
    add_cart(evaluate);
    add_ol(evaluate);

    // explain
    std::string explain_model = "all";
    std::string explain_rows = "all";
    std::size_t explain_background = 100;
    bool dump_tree = false;
    CLI::App* explain = app.add_subcommand("explain", "Shapley explanations of full-data models");
    add_common(explain, true);
    explain->add_option("--model", explain_model, "mlp|cart|all");
    explain->add_option("--rows", explain_rows, "'all' or comma-separated row indices");
    explain->add_option("--background", explain_background, "background rows for marginalization")
        ->check(CLI::Range(std::size_t{1}, std::size_t{100000}));
    explain->add_option("--jobs", common.jobs, "worker threads (0 = all cores)")
        ->check(CLI::Range(0, 4096));
    explain->add_flag("--dump-tree", dump_tree, "write the grown CART in readable form");
    add_mlp(explain);
    add_cart(explain);

    // report-ol
    CLI::App* report = app.add_subcommand("report-ol", "ordered logit coefficient report");
    add_common(report, true);
    add_ol(report);

    // grid
    std::string grid_name = "structure";
    std::string grid_alphas = "0,0.01,0.02,0.05,0.1,0.2,0.5,1";
    int grid_epochs = 400, grid_batch = 8;
    CLI::App* grid = app.add_subcommand("grid", "hyperparameter grid searches");
    add_common(grid, true);
    add_cv(grid);
    grid->add_option("--grid", grid_name, "structure|estimation|cart-restriction|cart-alpha");
    grid->add_option("--alphas", grid_alphas, "comma-separated alphas for cart-alpha");
    grid->add_option("--grid-epochs", grid_epochs, "epochs for the structure grid")
        ->check(CLI::Range(1, 1000000));
    grid->add_option("--grid-batch", grid_batch, "batch size for the structure grid")
        ->check(CLI::Range(1, 1000000));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (synth->parsed()) return cmd_synth(common, synth_n, synth_scenario);
        if (stats->parsed()) return cmd_stats(common);
        if (evaluate->parsed()) return cmd_evaluate(common, eval_model, mlp, cart, ol);
        if (explain->parsed())
            return cmd_explain(common, explain_model, explain_rows, explain_background, dump_tree,
                               mlp, cart);
        if (report->parsed()) return cmd_report_ol(common, ol);
        if (grid->parsed()) return cmd_grid(common, grid_name, grid_alphas, grid_epochs, grid_batch);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
