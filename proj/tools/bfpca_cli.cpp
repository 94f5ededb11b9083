// Command-line front end: simulate functional data, fit the fully-Bayesian
// FPCA model, verify prior propriety, and inspect bases.  Every command is
// deterministic given --seed and echoes its resolved configuration next to
// its outputs.
//
// Exit codes: 0 success, 2 usage error, 3 numerical failure,
// 4 verification failure.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bfpca/bfpca.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitVerification = 4;

std::string default_out_dir() {
    const char* env = std::getenv("BFPCA_OUT_DIR");
    return env && *env ? env : ".";
}

/// Pull "--config <file>" out of argv before CLI11 runs, so file values can
/// seed the option variables and explicit flags still win.
std::optional<std::string> extract_config_path(int argc, char** argv) {
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--config" && i + 1 < argc) return std::string(argv[i + 1]);
        if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
    }
    return std::nullopt;
}

json load_config(const std::optional<std::string>& path, const std::string& command) {
    if (!path) return json::object();
    json config = bfpca::read_json(*path);
    if (config.contains(command) && config[command].is_object()) return config[command];
    return config;
}

template <typename T>
void from_config(const json& config, const char* key, T& value) {
    if (config.contains(key)) value = config.at(key).get<T>();
}

Eigen::VectorXd parse_lambda_spec(const std::string& spec, int num_components) {
    Eigen::VectorXd lambdas(num_components);
    if (spec.rfind("geometric:", 0) == 0) {
        const std::string args = spec.substr(10);
        const auto comma = args.find(',');
        if (comma == std::string::npos)
            throw bfpca::invalid_config_error("lambda spec needs geometric:<first>,<ratio>");
        const double first = std::strtod(args.substr(0, comma).c_str(), nullptr);
        const double ratio = std::strtod(args.substr(comma + 1).c_str(), nullptr);
        if (!(first > 0.0) || !(ratio > 0.0) || ratio > 1.0)
            throw bfpca::invalid_config_error("lambda spec: need first > 0 and 0 < ratio <= 1");
        for (int k = 0; k < num_components; ++k)
            lambdas[k] = first * std::pow(ratio, k);
        return lambdas;
    }
    std::stringstream stream(spec);
    std::string cell;
    std::vector<double> values;
    while (std::getline(stream, cell, ',')) values.push_back(std::strtod(cell.c_str(), nullptr));
    if (static_cast<int>(values.size()) != num_components)
        throw bfpca::invalid_config_error("lambda list must have exactly K entries");
    for (int k = 0; k < num_components; ++k) lambdas[k] = values[static_cast<std::size_t>(k)];
    return lambdas;
}

void write_resolved_config(const json& resolved, const fs::path& out_dir,
                           const std::string& command) {
    bfpca::write_json(resolved, (out_dir / (command + "_config.json")).string());
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
    int num_curves = 100;
    int num_points = 50;
    int num_components = 2;
    int basis_size = 10;
    int degree = 3;
    double noise_variance = 0.05;
    std::string lambda_spec = "geometric:4,0.25";
    std::uint64_t seed = 1;
    std::string out = default_out_dir();
};

int run_simulate(const SimulateArgs& args) {
    if (args.num_points < 2)
        throw bfpca::invalid_config_error("simulate: need at least two grid points");
    if (args.num_components > args.basis_size)
        throw bfpca::invalid_config_error("simulate: need K <= Q");

    const bfpca::OrthonormalBasis basis =
        bfpca::make_orthonormal_bspline_basis(args.degree, args.basis_size);
    const Eigen::VectorXd lambdas = parse_lambda_spec(args.lambda_spec, args.num_components);

    const bfpca::RngStream stream(args.seed);
    auto frame_rng = stream.substream(1).engine();
    const bfpca::StiefelPoint frame =
        bfpca::sample_uniform(args.basis_size, args.num_components, frame_rng);
    const bfpca::TrueModel model(basis, frame, lambdas, args.noise_variance);

    const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(args.num_points, 0.0, 1.0);
    auto data_rng = stream.substream(2).engine();
    const auto [data, scores] =
        bfpca::simulate_with_scores(model, args.num_curves, grid, data_rng);

    const fs::path out_dir(args.out);
    fs::create_directories(out_dir);
    bfpca::write_dataset_csv(data, (out_dir / "dataset.csv").string());
    bfpca::write_json(bfpca::truth_to_json(model, scores), (out_dir / "truth.json").string());

    json resolved{{"N", args.num_curves},     {"M", args.num_points},
                  {"K", args.num_components}, {"Q", args.basis_size},
                  {"degree", args.degree},    {"sigma2", args.noise_variance},
                  {"lambda", args.lambda_spec}, {"seed", args.seed},
                  {"out", args.out}};
    write_resolved_config(resolved, out_dir, "simulate");

    std::cout << "simulate: wrote " << args.num_curves << " curves on " << args.num_points
              << " grid points to " << (out_dir / "dataset.csv").string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

struct FitArgs {
    std::string data_path;
    int num_components = 2;
    int basis_size = 10;
    int degree = 3;
    double alpha = 1e-3;
    double beta = 1e-3;
    std::int64_t iterations = 2000;
    std::int64_t burnin = 500;
    int thin = 1;
    double step = 0.0;  // 0 = 0.2 / sqrt(Q)
    int chains = 1;
    std::uint64_t seed = 1;
    double var_prior_shape = 1e-3;
    double var_prior_rate = 1e-3;
    bool include_scores = false;
    bool adapt = false;
    bool random_scan = false;
    bool keep_mean = false;
    std::string init = "empirical";
    std::string proposal = "retraction";
    std::string out = default_out_dir();
};

int run_fit(const FitArgs& args) {
    const bfpca::FunctionalDataset raw_data = bfpca::read_dataset_csv(args.data_path);
    if (!(args.num_components <= args.basis_size &&
          args.basis_size <= raw_data.num_points()))
        throw bfpca::invalid_config_error("fit: need K <= Q <= M");
    if (args.chains < 1) throw bfpca::invalid_config_error("fit: need at least one chain");

    const bfpca::FunctionalDataset data =
        args.keep_mean ? raw_data : bfpca::demean(raw_data).first;

    const bfpca::OrthonormalBasis basis =
        bfpca::make_orthonormal_bspline_basis(args.degree, args.basis_size);
    const bfpca::PenaltyMatrix penalty =
        bfpca::build_penalty(basis, bfpca::default_quadrature(basis.raw()));

    bfpca::SamplerConfig config;
    config.n_iterations = args.iterations;
    config.n_burnin = args.burnin;
    config.thin = args.thin;
    if (args.step > 0.0) config.proposal_step = args.step;
    config.num_components = args.num_components;
    config.smoothing_hyperprior = bfpca::SmoothingHyperprior(args.alpha, args.beta);
    config.variance_prior_shape = args.var_prior_shape;
    config.variance_prior_rate = args.var_prior_rate;
    config.store_scores = args.include_scores;
    config.adapt_step = args.adapt;
    config.random_scan = args.random_scan;
    if (args.init == "random")
        config.init = bfpca::InitMode::random;
    else if (args.init != "empirical")
        throw bfpca::invalid_config_error("fit: init must be empirical or random");
    if (args.proposal == "rotation")
        config.proposal_mode = bfpca::ProposalMode::rotation_walk;
    else if (args.proposal != "retraction")
        throw bfpca::invalid_config_error("fit: proposal must be retraction or rotation");

    const fs::path out_dir(args.out);
    fs::create_directories(out_dir);

    const bfpca::RngStream stream(args.seed);
    bfpca::ChainOutput combined;
    for (int c = 0; c < args.chains; ++c) {
        bfpca::SamplerConfig chain_config = config;
        chain_config.seed = stream.substream(static_cast<std::uint64_t>(c)).seed();
        const bfpca::ChainOutput chain = run_chain(data, basis, penalty, chain_config);
        const bfpca::ChainOutput aligned = postprocess_chain(chain);
        bfpca::write_chain_ndjson(
            aligned, (out_dir / ("chain_" + std::to_string(c + 1) + ".ndjson")).string());
        combined.records.insert(combined.records.end(), chain.records.begin(),
                                chain.records.end());
        combined.acceptance_rate += chain.acceptance_rate / args.chains;
        std::cout << "fit: chain " << (c + 1) << " acceptance "
                  << chain.acceptance_rate << ", ESS(sigma2) "
                  << chain.diagnostics.ess_noise_variance << "\n";
    }

    combined.diagnostics.ess_score_variances =
        Eigen::VectorXd::Zero(args.num_components);
    combined.diagnostics.ess_smoothing = Eigen::VectorXd::Zero(args.num_components);
    const bfpca::ChainOutput pooled = postprocess_chain(combined);
    bfpca::write_summary_csv(pooled.records, (out_dir / "summary.csv").string());
    bfpca::write_eigenfunctions_csv(pooled.records, basis, data.grid,
                                    (out_dir / "eigenfunctions.csv").string());

    json resolved{{"data", args.data_path},
                  {"K", args.num_components},
                  {"Q", args.basis_size},
                  {"degree", args.degree},
                  {"alpha", args.alpha},
                  {"beta", args.beta},
                  {"iterations", args.iterations},
                  {"burnin", args.burnin},
                  {"thin", args.thin},
                  {"step", args.step},
                  {"chains", args.chains},
                  {"seed", args.seed},
                  {"var_prior_shape", args.var_prior_shape},
                  {"var_prior_rate", args.var_prior_rate},
                  {"include_scores", args.include_scores},
                  {"adapt", args.adapt},
                  {"random_scan", args.random_scan},
                  {"keep_mean", args.keep_mean},
                  {"init", args.init},
                  {"proposal", args.proposal},
                  {"out", args.out}};
    write_resolved_config(resolved, out_dir, "fit");
    return 0;
}

// ---------------------------------------------------------------------------

struct VerifyArgs {
    int basis_size = 8;
    int num_components = 2;
    int degree = 3;
    double alpha = 1e-3;
    double beta = 1e-3;
    std::int64_t samples = 100000;
    std::uint64_t seed = 1;
    int threads = 1;
    std::string out = default_out_dir();
};

int run_verify(const VerifyArgs& args) {
    const bfpca::OrthonormalBasis basis =
        bfpca::make_orthonormal_bspline_basis(args.degree, args.basis_size);
    const bfpca::PenaltyMatrix penalty =
        bfpca::build_penalty(basis, bfpca::default_quadrature(basis.raw()));
    const bfpca::SmoothingHyperprior hyper(args.alpha, args.beta);

    const bfpca::ProprietyReport report =
        bfpca::estimate_prior_mass(hyper, penalty, args.basis_size, args.num_components,
                                   args.samples, bfpca::RngStream(args.seed), args.threads);

    const fs::path out_dir(args.out);
    fs::create_directories(out_dir);
    bfpca::write_json(bfpca::report_to_json(report), (out_dir / "report.json").string());

    json resolved{{"Q", args.basis_size}, {"K", args.num_components}, {"degree", args.degree},
                  {"alpha", args.alpha},  {"beta", args.beta},        {"samples", args.samples},
                  {"seed", args.seed},    {"threads", args.threads},  {"out", args.out}};
    write_resolved_config(resolved, out_dir, "verify-propriety");

    std::cout << "verify-propriety: mass_log=" << bfpca::format_double(report.mass_estimate_log)
              << " bound_log=" << bfpca::format_double(report.bound_log)
              << " rel_se=" << bfpca::format_double(report.std_error)
              << " per_factor_max=" << bfpca::format_double(report.per_factor_max)
              << " passed=" << (report.passed ? "true" : "false") << "\n";
    return report.passed ? 0 : kExitVerification;
}

// ---------------------------------------------------------------------------

struct BasisInfoArgs {
    int basis_size = 10;
    int degree = 3;
    bool penalty = false;
    std::string out;
};

int run_basis_info(const BasisInfoArgs& args) {
    const bfpca::OrthonormalBasis basis =
        bfpca::make_orthonormal_bspline_basis(args.degree, args.basis_size);
    const bfpca::QuadratureRule quad = bfpca::default_quadrature(basis.raw());

    std::cout << "Q=" << basis.size() << " degree=" << basis.degree() << "\nknots=[";
    for (std::size_t i = 0; i < basis.raw().knots.size(); ++i)
        std::cout << (i ? "," : "") << bfpca::format_double(basis.raw().knots[i]);
    std::cout << "]\nmax|G-I|=" << bfpca::format_double(bfpca::max_gram_deviation(basis, quad))
              << "\n";

    std::optional<bfpca::PenaltyMatrix> penalty;
    if (args.penalty) {
        penalty = bfpca::build_penalty(basis, quad);
        std::cout << "R=" << penalty->rank
                  << " lambda_min=" << bfpca::format_double(penalty->eigenvalue_min())
                  << " lambda_max=" << bfpca::format_double(penalty->eigenvalue_max()) << "\n";
    }
    if (!args.out.empty()) {
        const fs::path out_dir(args.out);
        fs::create_directories(out_dir);
        bfpca::write_json(bfpca::basis_to_json(basis), (out_dir / "basis.json").string());
        if (penalty)
            bfpca::write_json(bfpca::penalty_to_json(*penalty),
                              (out_dir / "penalty.json").string());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fully-Bayesian FPCA: spline bases, Stiefel priors, propriety checks"};
    app.require_subcommand(1);

    std::string config_path_dummy;
    app.add_option("--config", config_path_dummy, "JSON config file; flags override its values");

    const auto config_path = extract_config_path(argc, argv);

    SimulateArgs sim;
    VerifyArgs verify;
    FitArgs fit;
    BasisInfoArgs info;

    CLI::App* sim_cmd = app.add_subcommand("simulate", "Draw curves from the generative model");
    {
        sim_cmd->add_option("--config", config_path_dummy,
                            "JSON config file; flags override its values");
        const json config = load_config(config_path, "simulate");
        from_config(config, "N", sim.num_curves);
        from_config(config, "M", sim.num_points);
        from_config(config, "K", sim.num_components);
        from_config(config, "Q", sim.basis_size);
        from_config(config, "degree", sim.degree);
        from_config(config, "sigma2", sim.noise_variance);
        from_config(config, "lambda", sim.lambda_spec);
        from_config(config, "seed", sim.seed);
        from_config(config, "out", sim.out);
        sim_cmd->add_option("--N", sim.num_curves, "number of curves")->check(CLI::PositiveNumber);
        sim_cmd->add_option("--M", sim.num_points, "grid points")->check(CLI::PositiveNumber);
        sim_cmd->add_option("--K", sim.num_components, "components")->check(CLI::PositiveNumber);
        sim_cmd->add_option("--Q", sim.basis_size, "basis functions")->check(CLI::PositiveNumber);
        sim_cmd->add_option("--degree", sim.degree, "spline degree")
            ->check(CLI::NonNegativeNumber);
        sim_cmd->add_option("--sigma2", sim.noise_variance, "noise variance")
            ->check(CLI::NonNegativeNumber);
        sim_cmd->add_option("--lambda", sim.lambda_spec,
                            "score variances: geometric:<first>,<ratio> or a K-list");
        sim_cmd->add_option("--seed", sim.seed, "random seed");
        sim_cmd->add_option("--out", sim.out, "output directory");
    }

    CLI::App* fit_cmd = app.add_subcommand("fit", "Sample the posterior given a dataset");
    {
        fit_cmd->add_option("--config", config_path_dummy,
                            "JSON config file; flags override its values");
        const json config = load_config(config_path, "fit");
        from_config(config, "data", fit.data_path);
        from_config(config, "K", fit.num_components);
        from_config(config, "Q", fit.basis_size);
        from_config(config, "degree", fit.degree);
        from_config(config, "alpha", fit.alpha);
        from_config(config, "beta", fit.beta);
        from_config(config, "iterations", fit.iterations);
        from_config(config, "burnin", fit.burnin);
        from_config(config, "thin", fit.thin);
        from_config(config, "step", fit.step);
        from_config(config, "chains", fit.chains);
        from_config(config, "seed", fit.seed);
        from_config(config, "init", fit.init);
        from_config(config, "proposal", fit.proposal);
        from_config(config, "out", fit.out);
        fit_cmd->add_option("--data", fit.data_path, "dataset CSV")->required();
        fit_cmd->add_option("--K", fit.num_components, "components")->check(CLI::PositiveNumber);
        fit_cmd->add_option("--Q", fit.basis_size, "basis functions")->check(CLI::PositiveNumber);
        fit_cmd->add_option("--degree", fit.degree, "spline degree")
            ->check(CLI::NonNegativeNumber);
        fit_cmd->add_option("--alpha", fit.alpha, "smoothing hyperprior shape")
            ->check(CLI::PositiveNumber);
        fit_cmd->add_option("--beta", fit.beta, "smoothing hyperprior rate")
            ->check(CLI::PositiveNumber);
        fit_cmd->add_option("--iterations", fit.iterations, "total iterations")
            ->check(CLI::PositiveNumber);
        fit_cmd->add_option("--burnin", fit.burnin, "burn-in iterations")
            ->check(CLI::NonNegativeNumber);
        fit_cmd->add_option("--thin", fit.thin, "thinning stride")->check(CLI::PositiveNumber);
        fit_cmd->add_option("--step", fit.step, "proposal step (0 = 0.2/sqrt(Q))")
            ->check(CLI::NonNegativeNumber);
        fit_cmd->add_option("--chains", fit.chains, "independent chains")
            ->check(CLI::PositiveNumber);
        fit_cmd->add_option("--seed", fit.seed, "random seed");
        fit_cmd->add_option("--var-prior-shape", fit.var_prior_shape, "variance prior shape")
            ->check(CLI::PositiveNumber);
        fit_cmd->add_option("--var-prior-rate", fit.var_prior_rate, "variance prior rate")
            ->check(CLI::PositiveNumber);
        fit_cmd->add_flag("--include-scores", fit.include_scores, "store scores in the chain");
        fit_cmd->add_flag("--adapt", fit.adapt, "adapt the step during burn-in");
        fit_cmd->add_flag("--random-scan", fit.random_scan, "random update order");
        fit_cmd->add_flag("--keep-mean", fit.keep_mean, "skip per-grid-point demeaning");
        fit_cmd->add_option("--init", fit.init, "empirical or random");
        fit_cmd->add_option("--proposal", fit.proposal, "retraction or rotation");
        fit_cmd->add_option("--out", fit.out, "output directory");
    }

    CLI::App* verify_cmd =
        app.add_subcommand("verify-propriety", "Monte Carlo check of the prior mass bound");
    {
        verify_cmd->add_option("--config", config_path_dummy,
                            "JSON config file; flags override its values");
        const json config = load_config(config_path, "verify-propriety");
        from_config(config, "Q", verify.basis_size);
        from_config(config, "K", verify.num_components);
        from_config(config, "degree", verify.degree);
        from_config(config, "alpha", verify.alpha);
        from_config(config, "beta", verify.beta);
        from_config(config, "samples", verify.samples);
        from_config(config, "seed", verify.seed);
        from_config(config, "threads", verify.threads);
        from_config(config, "out", verify.out);
        verify_cmd->add_option("--Q", verify.basis_size, "basis functions")
            ->check(CLI::PositiveNumber);
        verify_cmd->add_option("--K", verify.num_components, "components")
            ->check(CLI::PositiveNumber);
        verify_cmd->add_option("--degree", verify.degree, "spline degree")
            ->check(CLI::NonNegativeNumber);
        verify_cmd->add_option("--alpha", verify.alpha, "smoothing hyperprior shape")
            ->check(CLI::PositiveNumber);
        verify_cmd->add_option("--beta", verify.beta, "smoothing hyperprior rate")
            ->check(CLI::PositiveNumber);
        verify_cmd->add_option("--samples", verify.samples, "Monte Carlo draws")
            ->check(CLI::PositiveNumber);
        verify_cmd->add_option("--seed", verify.seed, "random seed");
        verify_cmd->add_option("--threads", verify.threads, "worker threads")
            ->check(CLI::PositiveNumber);
        verify_cmd->add_option("--out", verify.out, "output directory");
    }

    CLI::App* info_cmd = app.add_subcommand("basis-info", "Print basis diagnostics");
    {
        info_cmd->add_option("--config", config_path_dummy,
                            "JSON config file; flags override its values");
        const json config = load_config(config_path, "basis-info");
        from_config(config, "Q", info.basis_size);
        from_config(config, "degree", info.degree);
        from_config(config, "out", info.out);
        info_cmd->add_option("--Q", info.basis_size, "basis functions")
            ->check(CLI::PositiveNumber);
        info_cmd->add_option("--degree", info.degree, "spline degree")
            ->check(CLI::NonNegativeNumber);
        info_cmd->add_flag("--penalty", info.penalty, "also report the curvature penalty");
        info_cmd->add_option("--out", info.out, "directory for basis.json / penalty.json");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (sim_cmd->parsed()) return run_simulate(sim);
        if (fit_cmd->parsed()) return run_fit(fit);
        if (verify_cmd->parsed()) return run_verify(verify);
        if (info_cmd->parsed()) return run_basis_info(info);
    } catch (const bfpca::chain_divergence_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const bfpca::numerical_degeneracy_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const bfpca::invalid_config_error& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const bfpca::shape_error& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const bfpca::domain_error& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const bfpca::error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
    return 0;
}
