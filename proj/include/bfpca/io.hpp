#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "bfpca/basis.hpp"
#include "bfpca/errors.hpp"
#include "bfpca/model.hpp"
#include "bfpca/penalty.hpp"
#include "bfpca/propriety.hpp"
#include "bfpca/sampler.hpp"

namespace bfpca {

/// 17 significant digits: enough for doubles to round-trip bit-exactly
/// through text.
inline std::string format_double(double value) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.17g", value);
    return buffer;
}

namespace detail {

inline std::vector<double> parse_csv_line(const std::string& line) {
    std::vector<double> values;
    std::stringstream stream(line);
    std::string cell;
    while (std::getline(stream, cell, ',')) {
        if (cell.empty()) continue;
        values.push_back(std::strtod(cell.c_str(), nullptr));
    }
    return values;
}

inline std::vector<double> to_std(const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

inline Eigen::VectorXd to_eigen(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline std::vector<double> row_major(const Eigen::MatrixXd& m) {
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) flat.push_back(m(i, j));
    return flat;
}

inline Eigen::MatrixXd from_row_major(const std::vector<double>& flat, Eigen::Index rows,
                                      Eigen::Index cols) {
    if (static_cast<Eigen::Index>(flat.size()) != rows * cols)
        throw shape_error("from_row_major: flat size does not match rows * cols");
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = flat[static_cast<std::size_t>(i * cols + j)];
    return m;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Dataset CSV: first row is the grid, each following row is one curve.

inline void write_dataset_csv(const FunctionalDataset& data, std::ostream& out) {
    for (Eigen::Index m = 0; m < data.num_points(); ++m)
        out << (m ? "," : "") << format_double(data.grid[m]);
    out << "\n";
    for (Eigen::Index i = 0; i < data.num_curves(); ++i) {
        for (Eigen::Index m = 0; m < data.num_points(); ++m)
            out << (m ? "," : "") << format_double(data.curves(i, m));
        out << "\n";
    }
}

inline void write_dataset_csv(const FunctionalDataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw invalid_config_error("write_dataset_csv: cannot open " + path);
    write_dataset_csv(data, out);
}

inline FunctionalDataset read_dataset_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line))
        throw invalid_config_error("read_dataset_csv: empty input");
    const std::vector<double> grid_values = detail::parse_csv_line(line);
    const Eigen::Index num_points = static_cast<Eigen::Index>(grid_values.size());

    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row = detail::parse_csv_line(line);
        if (static_cast<Eigen::Index>(row.size()) != num_points)
            throw shape_error("read_dataset_csv: row length does not match grid");
        rows.push_back(std::move(row));
    }
    Eigen::MatrixXd curves(static_cast<Eigen::Index>(rows.size()), num_points);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (Eigen::Index m = 0; m < num_points; ++m)
            curves(static_cast<Eigen::Index>(i), m) = rows[i][static_cast<std::size_t>(m)];
    return FunctionalDataset(detail::to_eigen(grid_values), std::move(curves));
}

inline FunctionalDataset read_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw invalid_config_error("read_dataset_csv: cannot open " + path);
    return read_dataset_csv(in);
}

// ---------------------------------------------------------------------------
// Basis and penalty JSON.

inline nlohmann::json basis_to_json(const OrthonormalBasis& basis) {
    nlohmann::json spec;
    spec["degree"] = basis.degree();
    spec["Q"] = basis.size();
    spec["knots"] = basis.raw().knots;
    std::vector<std::vector<double>> transform;
    for (Eigen::Index i = 0; i < basis.transform().rows(); ++i)
        transform.push_back(detail::to_std(basis.transform().row(i)));
    spec["transform"] = transform;
    return spec;
}

inline OrthonormalBasis basis_from_json(const nlohmann::json& spec) {
    RawBasis raw;
    raw.degree = spec.at("degree").get<int>();
    raw.size = spec.at("Q").get<int>();
    raw.knots = spec.at("knots").get<std::vector<double>>();
    const auto rows = spec.at("transform").get<std::vector<std::vector<double>>>();
    Eigen::MatrixXd transform(raw.size, raw.size);
    if (static_cast<int>(rows.size()) != raw.size)
        throw shape_error("basis_from_json: transform row count must equal Q");
    for (int i = 0; i < raw.size; ++i) {
        if (static_cast<int>(rows[static_cast<std::size_t>(i)].size()) != raw.size)
            throw shape_error("basis_from_json: transform must be Q x Q");
        for (int j = 0; j < raw.size; ++j)
            transform(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    return OrthonormalBasis(std::move(raw), std::move(transform));
}

inline nlohmann::json penalty_to_json(const PenaltyMatrix& penalty) {
    nlohmann::json spec;
    spec["P"] = detail::row_major(penalty.matrix);
    spec["Q"] = penalty.size();
    spec["eigenvalues"] = detail::to_std(penalty.eigenvalues);
    spec["R"] = penalty.rank;
    spec["tolerance"] = penalty.rank_tolerance;
    return spec;
}

inline PenaltyMatrix penalty_from_json(const nlohmann::json& spec) {
    const int dim = spec.at("Q").get<int>();
    const auto flat = spec.at("P").get<std::vector<double>>();
    return PenaltyMatrix::from_matrix(detail::from_row_major(flat, dim, dim),
                                      spec.at("tolerance").get<double>());
}

// ---------------------------------------------------------------------------
// Propriety report JSON.

inline nlohmann::json report_to_json(const ProprietyReport& report) {
    nlohmann::json out;
    out["mass_estimate_log"] = report.mass_estimate_log;
    out["std_error"] = report.std_error;
    out["bound_log"] = report.bound_log;
    out["n_samples"] = report.n_samples;
    out["per_factor_max"] = report.per_factor_max;
    out["passed"] = report.passed;
    return out;
}

inline ProprietyReport report_from_json(const nlohmann::json& in) {
    ProprietyReport report;
    report.mass_estimate_log = in.at("mass_estimate_log").get<double>();
    report.std_error = in.at("std_error").get<double>();
    report.bound_log = in.at("bound_log").get<double>();
    report.n_samples = in.at("n_samples").get<std::int64_t>();
    report.per_factor_max = in.at("per_factor_max").get<double>();
    report.passed = in.at("passed").get<bool>();
    return report;
}

// ---------------------------------------------------------------------------
// Chain NDJSON: one record per line.

inline nlohmann::json record_to_json(const StateRecord& record) {
    nlohmann::json out;
    out["iteration"] = record.iteration;
    out["lambda"] = detail::to_std(record.score_variances);
    out["sigma2"] = record.noise_variance;
    out["h"] = detail::to_std(record.smoothing);
    out["psi"] = detail::row_major(record.coefficients);
    out["Q"] = record.coefficients.rows();
    out["K"] = record.coefficients.cols();
    if (record.scores) {
        out["xi"] = detail::row_major(*record.scores);
        out["N"] = record.scores->rows();
    }
    return out;
}

inline StateRecord record_from_json(const nlohmann::json& in) {
    StateRecord record;
    record.iteration = in.at("iteration").get<std::int64_t>();
    record.score_variances = detail::to_eigen(in.at("lambda").get<std::vector<double>>());
    record.noise_variance = in.at("sigma2").get<double>();
    record.smoothing = detail::to_eigen(in.at("h").get<std::vector<double>>());
    const Eigen::Index dim = in.at("Q").get<Eigen::Index>();
    const Eigen::Index k = in.at("K").get<Eigen::Index>();
    record.coefficients =
        detail::from_row_major(in.at("psi").get<std::vector<double>>(), dim, k);
    if (in.contains("xi")) {
        const Eigen::Index n = in.at("N").get<Eigen::Index>();
        record.scores = detail::from_row_major(in.at("xi").get<std::vector<double>>(), n, k);
    }
    return record;
}

inline void write_chain_ndjson(const ChainOutput& chain, std::ostream& out) {
    for (const StateRecord& record : chain.records) out << record_to_json(record).dump() << "\n";
}

inline void write_chain_ndjson(const ChainOutput& chain, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw invalid_config_error("write_chain_ndjson: cannot open " + path);
    write_chain_ndjson(chain, out);
}

inline std::vector<StateRecord> read_chain_ndjson(std::istream& in) {
    std::vector<StateRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        records.push_back(record_from_json(nlohmann::json::parse(line)));
    }
    return records;
}

inline std::vector<StateRecord> read_chain_ndjson(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw invalid_config_error("read_chain_ndjson: cannot open " + path);
    return read_chain_ndjson(in);
}

// ---------------------------------------------------------------------------
// Posterior summary CSV: one row per scalar parameter (lambda_1..K,
// h_1..K, sigma2) with mean, sd and quantiles across stored draws.

namespace detail {

struct SummaryStats {
    double mean, sd, q025, q500, q975;
};

inline SummaryStats summarize(std::vector<double> values) {
    SummaryStats s{0, 0, 0, 0, 0};
    const std::size_t n = values.size();
    for (double v : values) s.mean += v;
    s.mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    std::sort(values.begin(), values.end());
    auto quantile = [&](double p) {
        const double idx = p * static_cast<double>(n - 1);
        const std::size_t lo = static_cast<std::size_t>(idx);
        const std::size_t hi = std::min(lo + 1, n - 1);
        const double frac = idx - static_cast<double>(lo);
        return values[lo] * (1.0 - frac) + values[hi] * frac;
    };
    s.q025 = quantile(0.025);
    s.q500 = quantile(0.5);
    s.q975 = quantile(0.975);
    return s;
}

}  // namespace detail

inline void write_summary_csv(const std::vector<StateRecord>& records, std::ostream& out) {
    if (records.empty()) throw invalid_config_error("write_summary_csv: no records");
    const Eigen::Index k = records.front().score_variances.size();
    out << "parameter,mean,sd,q025,median,q975\n";
    auto emit = [&](const std::string& name, std::vector<double> values) {
        const detail::SummaryStats s = detail::summarize(std::move(values));
        out << name << "," << format_double(s.mean) << "," << format_double(s.sd) << ","
            << format_double(s.q025) << "," << format_double(s.q500) << ","
            << format_double(s.q975) << "\n";
    };
    std::vector<double> buffer(records.size());
    for (Eigen::Index j = 0; j < k; ++j) {
        for (std::size_t t = 0; t < records.size(); ++t)
            buffer[t] = records[t].score_variances[j];
        emit("lambda_" + std::to_string(j + 1), buffer);
    }
    for (Eigen::Index j = 0; j < k; ++j) {
        for (std::size_t t = 0; t < records.size(); ++t) buffer[t] = records[t].smoothing[j];
        emit("h_" + std::to_string(j + 1), buffer);
    }
    for (std::size_t t = 0; t < records.size(); ++t) buffer[t] = records[t].noise_variance;
    emit("sigma2", buffer);
}

inline void write_summary_csv(const std::vector<StateRecord>& records, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw invalid_config_error("write_summary_csv: cannot open " + path);
    write_summary_csv(records, out);
}

// ---------------------------------------------------------------------------
// Eigenfunction plot data: grid point, then posterior mean and 95% band for
// each component, evaluated through the basis.

inline void write_eigenfunctions_csv(const std::vector<StateRecord>& records,
                                     const OrthonormalBasis& basis, const Eigen::VectorXd& grid,
                                     std::ostream& out) {
    if (records.empty()) throw invalid_config_error("write_eigenfunctions_csv: no records");
    const Eigen::Index k = records.front().coefficients.cols();
    const Eigen::Index m = grid.size();
    const Eigen::MatrixXd values = basis.evaluate(grid);  // M x Q

    out << "t";
    for (Eigen::Index j = 0; j < k; ++j)
        out << ",phi" << (j + 1) << "_mean,phi" << (j + 1) << "_q025,phi" << (j + 1) << "_q975";
    out << "\n";

    // draws x M values per component
    std::vector<Eigen::MatrixXd> component(static_cast<std::size_t>(k));
    for (Eigen::Index j = 0; j < k; ++j)
        component[static_cast<std::size_t>(j)].resize(static_cast<Eigen::Index>(records.size()), m);
    for (std::size_t t = 0; t < records.size(); ++t) {
        const Eigen::MatrixXd funcs = values * records[t].coefficients;  // M x K
        for (Eigen::Index j = 0; j < k; ++j)
            component[static_cast<std::size_t>(j)].row(static_cast<Eigen::Index>(t)) =
                funcs.col(j).transpose();
    }

    std::vector<double> buffer(records.size());
    for (Eigen::Index p = 0; p < m; ++p) {
        out << format_double(grid[p]);
        for (Eigen::Index j = 0; j < k; ++j) {
            const auto& draws = component[static_cast<std::size_t>(j)];
            for (std::size_t t = 0; t < records.size(); ++t)
                buffer[t] = draws(static_cast<Eigen::Index>(t), p);
            const detail::SummaryStats s = detail::summarize(buffer);
            out << "," << format_double(s.mean) << "," << format_double(s.q025) << ","
                << format_double(s.q975);
        }
        out << "\n";
    }
}

inline void write_eigenfunctions_csv(const std::vector<StateRecord>& records,
                                     const OrthonormalBasis& basis, const Eigen::VectorXd& grid,
                                     const std::string& path) {
    std::ofstream out(path);
    if (!out) throw invalid_config_error("write_eigenfunctions_csv: cannot open " + path);
    write_eigenfunctions_csv(records, basis, grid, out);
}

// ---------------------------------------------------------------------------
// Truth file: everything needed to score a fit of simulated data.

inline nlohmann::json truth_to_json(const TrueModel& model, const Eigen::MatrixXd& scores) {
    nlohmann::json out;
    out["Q"] = model.basis.size();
    out["K"] = model.num_components();
    out["lambda"] = detail::to_std(model.score_variances);
    out["sigma2"] = model.noise_variance;
    out["psi"] = detail::row_major(model.coefficients.matrix());
    out["xi"] = detail::row_major(scores);
    out["N"] = scores.rows();
    out["basis"] = basis_to_json(model.basis);
    return out;
}

inline void write_json(const nlohmann::json& value, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw invalid_config_error("write_json: cannot open " + path);
    out << value.dump(2) << "\n";
}

inline nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw invalid_config_error("read_json: cannot open " + path);
    nlohmann::json value;
    in >> value;
    return value;
}

}  // namespace bfpca
