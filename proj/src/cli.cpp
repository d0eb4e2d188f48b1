#include "mvpi/cli.hpp"

#include "mvpi/csv.hpp"
#include "mvpi/filter.hpp"
#include "mvpi/hjb.hpp"
#include "mvpi/policy.hpp"
#include "mvpi/sim.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace mvpi {

namespace {

std::ofstream open_output(const std::string& path)
{
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::InvalidConfig, "cannot write " + path);
    return out;
}

std::string in_dir(const RunConfig& cfg, const std::string& name)
{
    return (std::filesystem::path(cfg.out_dir) / name).string();
}

std::string indexed(const std::string& stem, int i) { return stem + "_" + std::to_string(i + 1); }

/// vec() column names in column-major order, e.g. G_1_1, G_2_1, G_1_2, ...
void vec_names(std::vector<std::string>& header, const std::string& stem, int rows, int cols)
{
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i)
            header.push_back(stem + "_" + std::to_string(i + 1) + "_" + std::to_string(j + 1));
}

void append(std::vector<double>& row, const MatrixXd& m)
{
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) row.push_back(m(i, j));
}

void append(std::vector<double>& row, const VectorXd& v)
{
    for (Eigen::Index i = 0; i < v.size(); ++i) row.push_back(v(i));
}

struct Solved {
    MarketModel model;
    FilterSolution filter;
    HJBCoefficients coeffs;
};

Solved solve_all(const RunConfig& cfg)
{
    MarketModel model = validate_model(cfg.model);
    const TimeGrid grid = make_grid(model, cfg.grid_steps);
    FilterSolution filter = solve_beta(model, grid);
    HJBCoefficients coeffs = solve_hjb(model, filter);
    return {std::move(model), std::move(filter), std::move(coeffs)};
}

const char* pass_fail(double deviation) { return deviation < 3.0 ? "PASS" : "FAIL"; }

}  // namespace

int exit_code_for(ErrorCode code)
{
    switch (code) {
    case ErrorCode::StepTooCoarse:
    case ErrorCode::SingularBlock:
        return exit_code::solver;
    case ErrorCode::DegenerateMarket:
        return exit_code::degenerate_market;
    case ErrorCode::NonFinite:
        return exit_code::non_finite;
    case ErrorCode::LengthMismatch:
        return exit_code::length_mismatch;
    default:
        return exit_code::validation;
    }
}

int cmd_solve(const RunConfig& cfg, const std::string& csv_path, std::ostream& out)
{
    const Solved s = solve_all(cfg);
    const int n = s.model.n();
    const int m = s.model.m();

    std::vector<std::string> header{"t", "p"};
    for (int i = 0; i < n; ++i) header.push_back(indexed("q", i));
    vec_names(header, "G", n, n);
    for (int i = 0; i < m; ++i) header.push_back(indexed("V", i));
    vec_names(header, "U", m, n);
    vec_names(header, "beta", n, n);

    std::ofstream csv = open_output(csv_path);
    write_csv_header(csv, header);
    const TimeGrid& grid = s.coeffs.grid;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        std::vector<double> row{grid.node(k), s.coeffs.p[k]};
        append(row, s.coeffs.q[k]);
        append(row, s.coeffs.G[k]);
        append(row, s.coeffs.V[k]);
        append(row, s.coeffs.U[k]);
        append(row, s.filter.beta[k]);
        write_csv_row(csv, row);
    }

    const double e2xi = expected_e2xi(s.coeffs, s.model.y0());
    out << "command=solve steps=" << grid.steps() << " p0=" << format_double(s.coeffs.p[0])
        << " e2xi=" << format_double(e2xi) << " out=" << csv_path << '\n';
    return exit_code::ok;
}

int cmd_frontier(const RunConfig& cfg, const std::string& csv_path, std::ostream& out)
{
    if (cfg.targets.empty())
        throw Error(ErrorCode::InvalidConfig, "frontier needs frontier.targets or --xbar");
    const Solved s = solve_all(cfg);
    const std::vector<FrontierPoint> points = frontier_sweep(cfg.targets, s.model, s.coeffs);

    std::ofstream csv = open_output(csv_path);
    write_csv_header(csv, {"x_bar", "gamma_star", "variance", "stdev", "e2xi"});
    for (const FrontierPoint& p : points)
        write_csv_row(csv, {p.x_bar, p.gamma_star, p.variance, std::sqrt(p.variance), p.e2xi});

    out << "command=frontier points=" << points.size()
        << " e2xi=" << format_double(points.front().e2xi)
        << " rho=" << format_double(frontier_rho(s.model, points.front().e2xi))
        << " out=" << csv_path << '\n';
    return exit_code::ok;
}

int cmd_simulate(const RunConfig& cfg, const SimulateOptions& opts, std::ostream& out)
{
    std::optional<double> x_bar = opts.x_bar ? opts.x_bar : cfg.x_bar;
    if (!x_bar && !cfg.targets.empty()) x_bar = cfg.targets.front();
    if (!x_bar) throw Error(ErrorCode::InvalidConfig, "simulate needs --xbar or sim.x_bar");

    Solved s = solve_all(cfg);
    const FrontierPoint point = frontier_point(*x_bar, s.model, s.coeffs);
    const double e2xi = point.e2xi;
    const PolicyContext ctx = make_policy_context(s.model, std::move(s.filter), std::move(s.coeffs),
                                                  point.x_bar + point.gamma_star);

    SimConfig sim = cfg.sim;
    sim.record.terminal_wealth = !opts.terminal_out.empty();
    sim.record.trace = !opts.trace_out.empty();
    const SimResult r = simulate_paths(ctx, sim);

    struct Check {
        std::string name;
        Estimate estimate;
        double target;
    };
    std::vector<Check> checks{{"mean_X_T", r.wealth_mean, point.x_bar},
                              {"var_X_T", r.wealth_variance, point.variance}};
    if (r.e2xi_direct) checks.push_back({"e2xi_direct", *r.e2xi_direct, e2xi});
    if (r.e2xi_wealth) checks.push_back({"e2xi_wealth", *r.e2xi_wealth, e2xi});

    const std::string summary_path = opts.out.empty() ? in_dir(cfg, "simulate.csv") : opts.out;
    std::ofstream csv = open_output(summary_path);
    csv << "check,estimate,se,target,deviation_se,status\n";
    bool all_pass = true;
    std::ostringstream line;
    line << "command=simulate paths=" << r.paths << " steps=" << r.steps
         << " x_bar=" << format_double(point.x_bar)
         << " gamma_star=" << format_double(point.gamma_star);
    for (const Check& c : checks) {
        const double se = c.estimate.se.value_or(std::nan(""));
        const double dev = c.estimate.se ? deviation_in_se(c.estimate.value, c.target, se)
                                         : std::nan("");
        const char* status = c.estimate.se ? pass_fail(dev) : "UNDEFINED";
        all_pass = all_pass && std::string(status) == "PASS";
        csv << c.name << ',' << format_double(c.estimate.value) << ',' << format_double(se) << ','
            << format_double(c.target) << ',' << format_double(dev) << ',' << status << '\n';
        line << ' ' << c.name << '=' << format_double(c.estimate.value) << ' ' << c.name
             << "_se=" << format_double(se) << ' ' << c.name << "_status=" << status;
    }
    line << " status=" << (all_pass ? "PASS" : "FAIL") << " out=" << summary_path;

    if (!opts.terminal_out.empty()) {
        std::ofstream t = open_output(opts.terminal_out);
        write_csv_header(t, {"path", "X_T"});
        for (std::size_t i = 0; i < r.terminal_wealth.size(); ++i)
            write_csv_row(t, {static_cast<double>(i), r.terminal_wealth[i]});
    }
    if (!opts.trace_out.empty() && r.trace) {
        const int n = ctx.model.n();
        const int m = ctx.model.m();
        std::vector<std::string> header{"t"};
        for (int i = 0; i < m; ++i) header.push_back(indexed("logS", i));
        for (int i = 0; i < n; ++i) header.push_back(indexed("y", i));
        for (int i = 0; i < n; ++i) header.push_back(indexed("yhat", i));
        for (int i = 0; i < m; ++i) header.push_back(indexed("dv", i));
        header.push_back("X");
        std::ofstream t = open_output(opts.trace_out);
        write_csv_header(t, header);
        const PathTrace& tr = *r.trace;
        for (std::size_t k = 0; k < tr.t.size(); ++k) {
            std::vector<double> row{tr.t[k]};
            append(row, tr.log_prices[k]);
            append(row, tr.y[k]);
            append(row, tr.y_hat[k]);
            append(row, tr.dv[k]);
            row.push_back(tr.wealth[k]);
            write_csv_row(t, row);
        }
    }
    out << line.str() << '\n';
    return exit_code::ok;
}

int cmd_filter(const RunConfig& cfg, const std::string& prices_csv, const std::string& csv_path,
               std::ostream& out)
{
    const MarketModel model = validate_model(cfg.model);
    const TimeGrid grid = make_grid(model, cfg.grid_steps);
    const CsvTable table = read_csv(prices_csv);
    const int n = model.n();
    const int m = model.m();

    if (table.header.empty() || table.header.front() != "t")
        throw Error(ErrorCode::InvalidConfig, "price CSV must start with a t column");
    std::vector<std::size_t> price_cols;
    for (std::size_t c = 0; c < table.header.size(); ++c)
        if (table.header[c].rfind("logS_", 0) == 0) price_cols.push_back(c);
    if (price_cols.size() != static_cast<std::size_t>(m)) {
        std::ostringstream os;
        os << "price CSV has " << price_cols.size() << " logS columns, model has " << m << " stocks";
        throw Error(ErrorCode::LengthMismatch, os.str());
    }
    if (table.rows.size() != grid.size()) {
        std::ostringstream os;
        os << "price CSV has " << table.rows.size() << " rows, grid has " << grid.size() << " nodes";
        throw Error(ErrorCode::LengthMismatch, os.str());
    }

    std::vector<VectorXd> log_prices;
    log_prices.reserve(table.rows.size());
    for (std::size_t k = 0; k < table.rows.size(); ++k) {
        const auto& row = table.rows[k];
        if (grid.find(row[0]) != k) {
            std::ostringstream os;
            os << "row " << k << " has t = " << format_double(row[0]) << ", expected "
               << format_double(grid.node(k));
            throw Error(ErrorCode::GridMismatch, os.str());
        }
        VectorXd v(m);
        for (int i = 0; i < m; ++i) v(i) = row[price_cols[i]];
        log_prices.push_back(std::move(v));
    }

    const FilterSolution filter = solve_beta(model, grid);
    const FilterRun run = run_filter(model, filter, log_prices);

    std::vector<std::string> header{"t"};
    for (int i = 0; i < n; ++i) header.push_back(indexed("yhat", i));
    for (int i = 0; i < m; ++i) header.push_back(indexed("dv", i));
    std::ofstream csv = open_output(csv_path);
    write_csv_header(csv, header);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        std::vector<double> row{grid.node(k)};
        append(row, run.y_hat[k]);
        append(row, run.dv[k]);
        write_csv_row(csv, row);
    }
    out << "command=filter rows=" << grid.size() << " out=" << csv_path << '\n';
    return exit_code::ok;
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Mean-variance portfolio selection with a partially observed Gaussian factor"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    app.add_option("--config", config_path, "JSON config")->required();
    app.add_option("--out-dir", out_dir, "Directory for CSV outputs");
    app.add_option("--seed", seed, "Master seed for simulation");

    std::string solve_out, frontier_out, filter_out, prices;
    std::vector<double> frontier_targets;
    SimulateOptions sim_opts;
    std::optional<std::size_t> paths;
    std::optional<double> step;

    auto* solve = app.add_subcommand("solve", "Solve the filter and HJB coefficient ODEs");
    solve->add_option("--out", solve_out, "Coefficient CSV");

    auto* frontier = app.add_subcommand("frontier", "Efficient frontier for a list of targets");
    frontier->add_option("--out", frontier_out, "Frontier CSV");
    frontier->add_option("--xbar", frontier_targets, "Target means (overrides the config)");

    auto* simulate = app.add_subcommand("simulate", "Monte Carlo check of the optimal strategy");
    simulate->add_option("--paths", paths, "Number of paths");
    simulate->add_option("--step", step, "Simulation step");
    simulate->add_option("--xbar", sim_opts.x_bar, "Target mean");
    simulate->add_option("--out", sim_opts.out, "Summary CSV");
    simulate->add_option("--terminal-out", sim_opts.terminal_out, "Per-path X(T) CSV");
    simulate->add_option("--trace-out", sim_opts.trace_out, "Series of path 0 as CSV");

    auto* filter = app.add_subcommand("filter", "Run the filter on a log-price CSV");
    filter->add_option("--prices", prices, "CSV with columns t, logS_1..logS_m")->required();
    filter->add_option("--out", filter_out, "Filter CSV");

    for (auto* sub : {solve, frontier, simulate, filter}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_code::ok : exit_code::validation;
    }

    try {
        RunConfig cfg = load_run_config(config_path);
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (seed) cfg.sim.seed = *seed;
        if (paths) cfg.sim.paths = *paths;
        if (step) cfg.sim.step = *step;
        if (!frontier_targets.empty()) cfg.targets = frontier_targets;

        if (*solve)
            return cmd_solve(cfg, solve_out.empty() ? in_dir(cfg, "coefficients.csv") : solve_out, out);
        if (*frontier)
            return cmd_frontier(cfg, frontier_out.empty() ? in_dir(cfg, "frontier.csv") : frontier_out,
                                out);
        if (*simulate) return cmd_simulate(cfg, sim_opts, out);
        return cmd_filter(cfg, prices, filter_out.empty() ? in_dir(cfg, "filter.csv") : filter_out, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::validation;
    }
}

}  // namespace mvpi
