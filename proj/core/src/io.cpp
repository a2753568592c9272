#include "hwi/io.hpp"

#include "hwi/csv.hpp"
#include "hwi/error.hpp"

#include <openssl/evp.h>

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace hwi::io {

namespace {

using csv::format_double;

std::ofstream open_out(const std::string& file) {
    const auto parent = std::filesystem::path(file).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream out(file, std::ios::binary);
    if (!out) throw DataError("cannot write " + file);
    return out;
}

std::string method_name(TestMethod m) { return m == TestMethod::Z ? "z" : "block-bootstrap"; }

nlohmann::ordered_json number_or_null(std::optional<double> v) {
    if (v && std::isfinite(*v)) return *v;
    return nullptr;
}

nlohmann::ordered_json vec(const Eigen::VectorXd& v) {
    auto arr = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

} // namespace

void write_text(const std::string& file, const std::string& text) {
    auto out = open_out(file);
    out << text;
    if (!out) throw DataError("failed writing " + file);
}

void write_json(const std::string& file, const nlohmann::ordered_json& j) { write_text(file, j.dump(2) + "\n"); }

void write_index_path(const std::string& file, const Series& values, const std::string& scheme, double tc_bps) {
    std::ostringstream s;
    s << "date,value,scheme,tc_rate\n";
    const auto tc = format_double(tc_bps);
    const auto name = csv::escape(scheme);
    for (std::size_t i = 0; i < values.size(); ++i) {
        s << values.dates[i].iso() << ',' << format_double(values.values[i]) << ',' << name << ',' << tc << '\n';
    }
    write_text(file, s.str());
}

void write_index_path(const std::string& file, const IndexPath& path) {
    write_index_path(file, path.values, path.name, path.tc_bps);
}

LoadedPath read_index_path(const std::string& file) {
    const auto t = csv::read_file(file);
    const auto cd = t.column("date");
    const auto cv = t.column("value");
    LoadedPath p;
    const bool has_scheme = t.has_column("scheme");
    const bool has_tc = t.has_column("tc_rate");
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        p.values.dates.push_back(Date::parse(row[cd]));
        p.values.values.push_back(csv::parse_double(row[cv], t, r));
        if (r == 0) {
            if (has_scheme) p.scheme = row[t.column("scheme")];
            if (has_tc) p.tc_bps = csv::parse_double(row[t.column("tc_rate")], t, r);
        }
    }
    if (p.values.empty()) throw DataError(file + ": index path is empty");
    p.values.validate(file);
    return p;
}

void write_rebalance_log(const std::string& file, const IndexPath& path) {
    std::ostringstream s;
    s << "date,stock_id,weight,trade_value,cost\n";
    for (const auto& ev : path.rebalance_log) {
        for (const auto& t : ev.trades) {
            s << ev.date.iso() << ',' << csv::escape(t.id) << ',' << format_double(t.weight) << ','
              << format_double(t.trade_value) << ',' << format_double(t.cost) << '\n';
        }
    }
    write_text(file, s.str());
}

Series read_rate_series(const std::string& file) {
    const auto t = csv::read_file(file);
    const auto cd = t.column("date");
    const auto cr = t.column("rate");
    Series s;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        s.dates.push_back(Date::parse(t.rows[r][cd]));
        s.values.push_back(csv::parse_double(t.rows[r][cr], t, r));
    }
    s.validate(file);
    return s;
}

Eigen::MatrixXd read_matrix(const std::string& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DataError("cannot open " + file);
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::vector<double> row;
        std::stringstream ls(line);
        std::string cell;
        bool numeric = true;
        while (std::getline(ls, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
                if (cell.find_first_not_of(" \t", used) != std::string::npos) numeric = false;
            } catch (const std::exception&) {
                numeric = false;
            }
        }
        if (!numeric) {
            if (rows.empty() && line_no == 1) continue; // header
            throw DataError(file + ":" + std::to_string(line_no) + ": non-numeric matrix entry");
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw DataError(file + ":" + std::to_string(line_no) + ": ragged matrix row");
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError(file + ": empty matrix");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j) {
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    return m;
}

void write_panel_export(const std::string& dir, const PanelExport& ex) {
    std::filesystem::create_directories(dir);
    const std::filesystem::path d(dir);
    {
        std::ostringstream s;
        s << "stock_id,date,price,market_value\n";
        for (const auto& r : ex.rows) {
            s << r.stock_id << ',' << r.date.iso() << ',' << format_double(r.price) << ','
              << format_double(r.market_value) << '\n';
        }
        write_text((d / "prices.csv").string(), s.str());
    }
    {
        std::ostringstream s;
        s << "stock_id,region,country,supersector,sector,subsector\n";
        for (const auto& [id, c] : ex.classification) {
            s << id << ',' << c.region << ',' << c.country << ',' << c.supersector << ',' << c.sector << ','
              << c.subsector << '\n';
        }
        write_text((d / "classification.csv").string(), s.str());
    }
    {
        std::ostringstream s;
        s << "country,base_date,max_stocks,industrial_level\n";
        for (const auto& p : ex.policies) {
            s << p.country << ',' << p.base_date.iso() << ',' << p.max_stocks << ','
              << (p.industrial_level ? std::string(to_string(*p.industrial_level)) : std::string("auto")) << '\n';
        }
        write_text((d / "policies.csv").string(), s.str());
    }
    {
        std::ostringstream s;
        s << "date\n";
        for (const auto& day : ex.calendar) s << day.iso() << '\n';
        write_text((d / "calendar.csv").string(), s.str());
    }
    write_index_path((d / "hwi_sim.csv").string(), ex.hwi, "HWI-sim", 0.0);
    write_index_path((d / "gp_sim.csv").string(), ex.gp, "GP-sim", 0.0);
}

nlohmann::ordered_json to_json(const GpSolution& sol) {
    nlohmann::ordered_json j;
    j["pi_star"] = vec(sol.pi_star);
    j["lambda"] = sol.lambda;
    j["theta"] = vec(sol.theta);
    j["residual"] = sol.residual;
    j["condition_estimate"] = number_or_null(sol.condition_estimate);
    j["minimum_norm"] = sol.minimum_norm;
    if (sol.minimum_norm) j["warning"] = "singular bordered system; minimum-norm solution reported";
    return j;
}

nlohmann::ordered_json to_json(const PerfStats& s) {
    nlohmann::ordered_json j;
    j["n_returns"] = s.n_returns;
    j["gr"] = s.gr;
    j["avg_return"] = s.avg_return;
    j["risk_free_avg"] = s.risk_free_avg;
    j["risk_premium"] = s.risk_premium;
    j["volatility"] = s.volatility;
    j["sharpe"] = number_or_null(s.sharpe);
    j["var95"] = s.var95;
    j["es95"] = s.es95;
    j["avg_drawdown"] = s.avg_drawdown;
    j["avg_recovery_days"] = number_or_null(s.avg_recovery_days);
    j["drawdown_episodes"] = s.drawdown_episodes;
    return j;
}

nlohmann::ordered_json to_json(const GrDiffReport& r) {
    nlohmann::ordered_json j;
    j["window_years"] = r.window_years;
    j["windows"] = r.windows;
    j["mean"] = r.mean;
    j["standard_error"] = r.standard_error;
    j["lower"] = r.lower;
    j["upper"] = r.upper;
    j["confidence"] = r.confidence;
    j["bandwidth_ratio"] = r.bandwidth_ratio;
    j["degrees_of_freedom"] = r.degrees_of_freedom;
    return j;
}

nlohmann::ordered_json to_json(const TestReport& r) {
    nlohmann::ordered_json j;
    j["label"] = r.label;
    j["method"] = method_name(r.method);
    j["n"] = r.n;
    j["sample_mean"] = r.sample_mean;
    j["standard_error"] = r.standard_error;
    j["confidence"] = r.confidence;
    j["ci_low"] = r.ci_low;
    j["ci_high"] = r.ci_high;
    j["statistic"] = number_or_null(r.statistic);
    j["p_value"] = r.p_value;
    if (r.method == TestMethod::BlockBootstrap) {
        j["replicates"] = r.replicates;
        j["mean_block_length"] = r.mean_block_length;
        j["bootstrap_mean"] = r.bootstrap_mean;
        j["seed"] = r.seed;
    }
    j["warnings"] = r.warnings;
    return j;
}

nlohmann::ordered_json to_json(const DiversificationScanResult& r) {
    nlohmann::ordered_json j;
    j["family"] = to_string(r.family);
    j["xi"] = r.xi;
    j["c"] = r.c;
    j["fitted_slope"] = r.fitted_slope;
    j["theoretical_slope"] = r.theoretical_slope;
    j["all_within_bound"] = r.all_within_bound();
    auto pts = nlohmann::ordered_json::array();
    for (const auto& p : r.points) {
        nlohmann::ordered_json q;
        q["m"] = p.m;
        q["mean_estimate"] = p.mean_estimate;
        q["mean_bound"] = p.mean_bound;
        q["max_weight"] = p.max_weight;
        q["within_bound"] = p.within_bound;
        q["estimates"] = p.estimates;
        q["bounds"] = p.bounds;
        q["stocks"] = p.stocks;
        pts.push_back(std::move(q));
    }
    j["points"] = std::move(pts);
    return j;
}

void write_test_table(const std::string& file, const std::vector<TestReport>& reports) {
    std::ostringstream s;
    s << "benchmark,n,mean,se,lci,uci,statistic,p\n";
    for (const auto& r : reports) {
        s << csv::escape(r.label) << ',' << r.n << ',' << format_double(r.sample_mean) << ','
          << format_double(r.standard_error) << ',' << format_double(r.ci_low) << ',' << format_double(r.ci_high)
          << ',' << format_double(r.statistic) << ',' << format_double(r.p_value) << '\n';
    }
    write_text(file, s.str());
}

std::string sha256_file(const std::string& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DataError("cannot open " + file);
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
        EVP_MD_CTX_free(ctx);
        throw Error("sha256: digest initialisation failed");
    }
    std::array<char, 1 << 16> buf{};
    while (in) {
        in.read(buf.data(), buf.size());
        const auto got = in.gcount();
        if (got > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(got));
    }
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md.data(), &len);
    EVP_MD_CTX_free(ctx);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 0xF];
    }
    return out;
}

} // namespace hwi::io
