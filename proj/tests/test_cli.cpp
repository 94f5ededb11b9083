#include <catch2/catch.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "bfpca/io.hpp"

// Subprocess checks of the command-line tool.  The binary path arrives in
// the BFPCA_CLI environment variable (set by ctest).

namespace fs = std::filesystem;

namespace {

std::string cli_path() {
    const char* env = std::getenv("BFPCA_CLI");
    REQUIRE(env != nullptr);
    return env;
}

int run(const std::string& args) {
    const std::string command = cli_path() + " " + args + " >/dev/null 2>&1";
    const int status = std::system(command.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str(const std::string& sub = "") const { return (path / sub).string(); }
};

}  // namespace

TEST_CASE("simulate is deterministic and self-describing", "[cli]") {
    TempDir a("bfpca_sim_a"), b("bfpca_sim_b");
    const std::string flags = "simulate --N 20 --M 30 --K 2 --Q 8 --seed 7 --out ";
    REQUIRE(run(flags + a.str()) == 0);
    REQUIRE(run(flags + b.str()) == 0);
    CHECK(slurp(a.path / "dataset.csv") == slurp(b.path / "dataset.csv"));
    CHECK(slurp(a.path / "truth.json") == slurp(b.path / "truth.json"));
    // resolved configs agree except for the output paths themselves
    nlohmann::json config_a = bfpca::read_json(a.str("simulate_config.json"));
    nlohmann::json config_b = bfpca::read_json(b.str("simulate_config.json"));
    config_a.erase("out");
    config_b.erase("out");
    CHECK(config_a == config_b);
}

TEST_CASE("noise-free data is reproducible from the truth file", "[cli]") {
    TempDir dir("bfpca_sim_truth");
    REQUIRE(run("simulate --N 8 --M 25 --K 2 --Q 9 --sigma2 0 --seed 3 --out " + dir.str()) == 0);

    const bfpca::FunctionalDataset data = bfpca::read_dataset_csv(dir.str("dataset.csv"));
    const nlohmann::json truth = bfpca::read_json(dir.str("truth.json"));
    const bfpca::OrthonormalBasis basis = bfpca::basis_from_json(truth.at("basis"));

    const auto psi_flat = truth.at("psi").get<std::vector<double>>();
    const auto xi_flat = truth.at("xi").get<std::vector<double>>();
    const int q = truth.at("Q").get<int>();
    const int k = truth.at("K").get<int>();
    const int n = truth.at("N").get<int>();
    Eigen::MatrixXd psi(q, k), xi(n, k);
    for (int i = 0; i < q; ++i)
        for (int j = 0; j < k; ++j) psi(i, j) = psi_flat[static_cast<std::size_t>(i * k + j)];
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < k; ++j) xi(i, j) = xi_flat[static_cast<std::size_t>(i * k + j)];

    const Eigen::MatrixXd reconstructed =
        xi * (basis.evaluate(data.grid) * psi).transpose();
    CHECK((reconstructed - data.curves).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("geometric lambda specification", "[cli]") {
    TempDir dir("bfpca_sim_lambda");
    REQUIRE(run("simulate --N 3 --M 10 --K 2 --Q 6 --seed 1 --lambda geometric:4,0.25 --out " +
                dir.str()) == 0);
    const nlohmann::json truth = bfpca::read_json(dir.str("truth.json"));
    const auto lambdas = truth.at("lambda").get<std::vector<double>>();
    REQUIRE(lambdas.size() == 2);
    CHECK(lambdas[0] == Approx(4.0));
    CHECK(lambdas[1] == Approx(1.0));
}

TEST_CASE("fit smoke test with multiple chains", "[cli]") {
    TempDir dir("bfpca_fit");
    REQUIRE(run("simulate --N 30 --M 20 --K 2 --Q 8 --seed 5 --out " + dir.str()) == 0);
    REQUIRE(run("fit --data " + dir.str("dataset.csv") +
                " --K 2 --Q 8 --iterations 120 --burnin 40 --chains 4 --seed 11 --out " +
                dir.str()) == 0);

    CHECK(fs::exists(dir.path / "chain_1.ndjson"));
    CHECK(fs::exists(dir.path / "chain_4.ndjson"));
    CHECK(fs::exists(dir.path / "summary.csv"));
    CHECK(fs::exists(dir.path / "eigenfunctions.csv"));
    CHECK(fs::exists(dir.path / "fit_config.json"));

    // distinct sub-seeds: chains must differ
    CHECK(slurp(dir.path / "chain_1.ndjson") != slurp(dir.path / "chain_2.ndjson"));

    // summary rows: lambda_1..K, h_1..K, sigma2
    std::ifstream summary(dir.path / "summary.csv");
    std::string line;
    int rows = 0;
    std::getline(summary, line);  // header
    while (std::getline(summary, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 5);
}

TEST_CASE("fit validates dimensions as usage errors", "[cli]") {
    TempDir dir("bfpca_fit_bad");
    REQUIRE(run("simulate --N 10 --M 6 --K 2 --Q 6 --seed 2 --out " + dir.str()) == 0);
    // Q > M
    CHECK(run("fit --data " + dir.str("dataset.csv") + " --K 2 --Q 10 --out " + dir.str()) == 2);
    // K > Q
    CHECK(run("fit --data " + dir.str("dataset.csv") + " --K 7 --Q 6 --out " + dir.str()) == 2);
}

TEST_CASE("verify-propriety exit codes and config echo", "[cli]") {
    TempDir dir("bfpca_verify");
    const int code = run(
        "verify-propriety --Q 6 --K 2 --samples 2000 --seed 4 --alpha 0.001 --beta 0.001 --out " +
        dir.str());
    CHECK(code == 0);
    const nlohmann::json report = bfpca::read_json(dir.str("report.json"));
    CHECK(report.at("passed").get<bool>());
    CHECK(fs::exists(dir.path / "verify-propriety_config.json"));

    // strictly positive hyperparameters are a precondition
    CHECK(run("verify-propriety --alpha 0 --out " + dir.str()) == 2);
    CHECK(run("verify-propriety --alpha -1 --out " + dir.str()) == 2);
}

TEST_CASE("config file values are overridden by flags", "[cli]") {
    TempDir dir("bfpca_config");
    {
        std::ofstream config(dir.path / "config.json");
        config << R"({"N": 5, "M": 12, "K": 1, "Q": 5, "seed": 9})" << "\n";
    }
    REQUIRE(run("simulate --config " + dir.str("config.json") + " --N 7 --out " + dir.str()) ==
            0);
    const bfpca::FunctionalDataset data = bfpca::read_dataset_csv(dir.str("dataset.csv"));
    CHECK(data.num_curves() == 7);   // flag wins
    CHECK(data.num_points() == 12);  // config value
}

TEST_CASE("BFPCA_OUT_DIR provides the default output directory", "[cli]") {
    TempDir dir("bfpca_envdir");
    const std::string command = "BFPCA_OUT_DIR=" + dir.str() + " " + cli_path() +
                                " simulate --N 4 --M 8 --K 1 --Q 5 --seed 2 >/dev/null 2>&1";
    REQUIRE(WEXITSTATUS(std::system(command.c_str())) == 0);
    CHECK(fs::exists(dir.path / "dataset.csv"));
    CHECK(fs::exists(dir.path / "truth.json"));
}

TEST_CASE("basis-info prints and exports", "[cli]") {
    TempDir dir("bfpca_info");
    REQUIRE(run("basis-info --Q 8 --degree 3 --penalty --out " + dir.str()) == 0);
    const nlohmann::json basis_spec = bfpca::read_json(dir.str("basis.json"));
    CHECK(basis_spec.at("Q").get<int>() == 8);
    const nlohmann::json penalty_spec = bfpca::read_json(dir.str("penalty.json"));
    CHECK(penalty_spec.at("R").get<int>() == 6);
    CHECK(run("nonsense-command") == 2);
}
