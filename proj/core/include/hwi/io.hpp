#pragma once

#include "hwi/analytics.hpp"
#include "hwi/efficiency.hpp"
#include "hwi/gp_core.hpp"
#include "hwi/index_engine.hpp"
#include "hwi/stylized_sim.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace hwi::io {

struct LoadedPath {
    std::string scheme;
    double tc_bps = 0.0;
    Series values;
};

/// indexpath.csv: date,value,scheme,tc_rate
void write_index_path(const std::string& file, const IndexPath& path);
void write_index_path(const std::string& file, const Series& values, const std::string& scheme, double tc_bps);
[[nodiscard]] LoadedPath read_index_path(const std::string& file);

/// rebalance_log.csv: date,stock_id,weight,trade_value,cost
void write_rebalance_log(const std::string& file, const IndexPath& path);

/// Two-column file (date, rate) of annualized short rates.
[[nodiscard]] Series read_rate_series(const std::string& file);

/// Numeric CSV matrix; a non-numeric first row is treated as a header.
[[nodiscard]] Eigen::MatrixXd read_matrix(const std::string& file);

/// Writes prices.csv, classification.csv, policies.csv, calendar.csv and the
/// simulated hwi / gp paths (indexpath format) into `dir`.
void write_panel_export(const std::string& dir, const PanelExport& ex);

[[nodiscard]] nlohmann::ordered_json to_json(const GpSolution& sol);
[[nodiscard]] nlohmann::ordered_json to_json(const PerfStats& s);
[[nodiscard]] nlohmann::ordered_json to_json(const GrDiffReport& r);
[[nodiscard]] nlohmann::ordered_json to_json(const TestReport& r);
[[nodiscard]] nlohmann::ordered_json to_json(const DiversificationScanResult& r);

/// Table-8-shaped rows: benchmark,n,mean,se,lci,uci,statistic,p
void write_test_table(const std::string& file, const std::vector<TestReport>& reports);

void write_text(const std::string& file, const std::string& text);
void write_json(const std::string& file, const nlohmann::ordered_json& j);

/// Lower-case hex SHA-256 of a file's bytes.
[[nodiscard]] std::string sha256_file(const std::string& file);

} // namespace hwi::io
