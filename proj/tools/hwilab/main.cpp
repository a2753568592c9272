// hwilab: command-line front end for index construction, statistics,
// efficiency tests and stylized-market simulation.

#include "options.hpp"

#include "hwi/analytics.hpp"
#include "hwi/csv.hpp"
#include "hwi/efficiency.hpp"
#include "hwi/error.hpp"
#include "hwi/gp_core.hpp"
#include "hwi/index_engine.hpp"
#include "hwi/io.hpp"
#include "hwi/market_data.hpp"
#include "hwi/parallel.hpp"
#include "hwi/stylized_sim.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace hwilab {
namespace {

constexpr int kFormatVersion = 1;
constexpr const char* kVersion = "0.1.0";

struct Globals {
    std::string config;
    std::size_t seed = 1;
    std::string out = "out";
    unsigned threads = 1;
};

/// Collects inputs, outputs and extras for manifest.json.
class Run {
public:
    Run(std::string command, const Globals& g) : command_(std::move(command)), g_(g) {}

    std::string input(const std::string& path) {
        if (path.empty()) return path;
        if (!fs::exists(path)) throw hwi::DataError("input file not found: " + path);
        inputs_.emplace_back(path, hwi::io::sha256_file(path));
        return path;
    }
    std::string output(const std::string& name) {
        outputs_.push_back(name);
        return (fs::path(g_.out) / name).string();
    }
    json& extras() { return extras_; }
    void set_resolved(json j) { resolved_ = std::move(j); }
    [[nodiscard]] const json& resolved_options() const { return resolved_; }
    [[nodiscard]] const Globals& globals() const { return g_; }

    void write_manifest() const {
        json m;
        m["tool"] = "hwilab";
        m["version"] = kVersion;
        m["format_version"] = kFormatVersion;
        m["command"] = command_;
        m["config"] = {{"seed", g_.seed}, {"threads", g_.threads}, {"out", g_.out}, {command_, resolved_}};
        auto in = json::array();
        for (const auto& [p, d] : inputs_) in.push_back({{"path", p}, {"sha256", d}});
        m["inputs"] = in;
        auto out = json::array();
        for (const auto& name : outputs_) {
            const auto full = (fs::path(g_.out) / name).string();
            out.push_back({{"file", name}, {"sha256", hwi::io::sha256_file(full)}});
        }
        m["outputs"] = out;
        if (!extras_.is_null()) m["details"] = extras_;
        const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        char stamp[32];
        std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
        m["created_utc"] = stamp;
        hwi::io::write_json((fs::path(g_.out) / "manifest.json").string(), m);
    }

private:
    std::string command_;
    const Globals& g_;
    std::vector<std::pair<std::string, std::string>> inputs_;
    std::vector<std::string> outputs_;
    json extras_;
    json resolved_;
};

struct Command {
    CLI::App* app = nullptr;
    std::unique_ptr<OptionSet> opts;
    std::function<void(Run&)> run;
};

// ------------------------------------------------------------------ helpers

std::string safe_name(std::string s) {
    for (auto& c : s) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_')) c = '_';
    }
    return s;
}

std::string path_label(const hwi::io::LoadedPath& p, const std::string& file) {
    return p.scheme.empty() ? fs::path(file).stem().string() : p.scheme;
}

struct PanelArgs {
    std::string prices;
    std::string classification;
    std::string calendar;
};

void add_panel_options(OptionSet& o, PanelArgs& a) {
    o.add("prices", &a.prices, "prices.csv (stock_id,date,price,market_value)", true)
        .add("classification", &a.classification, "classification.csv", true)
        .add("calendar", &a.calendar, "calendar.csv (date)", true);
}

struct Panel {
    std::vector<hwi::Date> calendar;
    hwi::IngestResult data;
};

Panel load_panel(Run& run, const PanelArgs& a) {
    Panel p;
    p.calendar = hwi::read_calendar(run.input(a.calendar));
    p.data = hwi::ingest_panel({run.input(a.prices), run.input(a.classification)}, p.calendar);
    return p;
}

double parse_horizon(const std::string& text) {
    static const std::map<std::string, double> named = {{"daily", 1.0 / 365.25}, {"monthly", 1.0 / 12.0},
                                                        {"quarterly", 0.25},      {"half-yearly", 0.5},
                                                        {"yearly", 1.0}};
    if (const auto it = named.find(text); it != named.end()) return it->second;
    std::string t = text;
    if (!t.empty() && t.back() == 'y') t.pop_back();
    try {
        std::size_t used = 0;
        const double v = std::stod(t, &used);
        if (used == t.size() && v > 0.0) return v;
    } catch (const std::exception&) {
    }
    throw hwi::UsageError("bad horizon '" + text + "' (use daily, monthly, quarterly, half-yearly, yearly or years)");
}

const std::vector<std::string> kDefaultHorizons = {"daily", "monthly", "quarterly", "half-yearly", "yearly",
                                                   "2y",    "3y",      "5y"};

std::vector<std::vector<std::size_t>> parse_counts(const std::string& text) {
    std::vector<std::vector<std::size_t>> out;
    if (!text.empty() && text.front() == '[') {
        try {
            out = nlohmann::json::parse(text).get<std::vector<std::vector<std::size_t>>>();
        } catch (const nlohmann::json::exception&) {
            throw hwi::UsageError("counts: expected a list of lists of integers");
        }
        return out;
    }
    std::stringstream levels(text);
    std::string level;
    while (std::getline(levels, level, ';')) {
        std::vector<std::size_t> v;
        std::stringstream items(level);
        std::string item;
        while (std::getline(items, item, ',')) {
            try {
                const long long n = std::stoll(item);
                if (n < 1) throw hwi::UsageError("counts must be >= 1");
                v.push_back(static_cast<std::size_t>(n));
            } catch (const std::logic_error&) {
                throw hwi::UsageError("counts: bad entry '" + item + "'");
            }
        }
        if (v.empty()) throw hwi::UsageError("counts: empty level");
        out.push_back(std::move(v));
    }
    if (out.empty()) throw hwi::UsageError("counts: empty");
    return out;
}

hwi::ProcessSpec parse_process(const std::string& text, Run& run) {
    auto numbers = [](const std::string& s) {
        std::vector<double> v;
        std::stringstream ss(s);
        std::string item;
        while (std::getline(ss, item, ',')) v.push_back(std::stod(item));
        return v;
    };
    try {
        if (text.rfind("mr:", 0) == 0) {
            const auto v = numbers(text.substr(3));
            if (v.size() != 4) throw hwi::UsageError("process '" + text + "': mr needs initial,speed,level,vol");
            return hwi::ProcessSpec::mean_reverting(v[0], v[1], v[2], v[3]);
        }
        if (text.rfind("file:", 0) == 0) {
            const auto path = run.input(text.substr(5));
            const auto t = hwi::csv::read_file(path);
            hwi::ProcessSpec p;
            p.kind = hwi::ProcessSpec::Kind::Piecewise;
            for (std::size_t r = 0; r < t.rows.size(); ++r) {
                p.times.push_back(hwi::csv::parse_double(t.rows[r][t.column("time")], t, r));
                p.values.push_back(hwi::csv::parse_double(t.rows[r][t.column("value")], t, r));
            }
            return p;
        }
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return hwi::ProcessSpec::constant(v);
    } catch (const std::logic_error&) {
        throw hwi::UsageError("process '" + text + "': expected a number, mr:initial,speed,level,vol or file:path");
    }
}

Eigen::VectorXd as_vector(const Eigen::MatrixXd& m, const std::string& what) {
    if (m.cols() == 1) return m.col(0);
    if (m.rows() == 1) return m.row(0).transpose();
    throw hwi::UsageError(what + " must be a single row or column");
}

json perf_json(const std::string& name, const hwi::PerfStats& s) {
    json j;
    j["name"] = name;
    const auto body = hwi::io::to_json(s);
    for (const auto& [k, v] : body.items()) j[k] = v;
    return j;
}

std::string opt_str(std::optional<double> v) { return v ? hwi::csv::format_double(*v) : std::string(); }

// ------------------------------------------------------------------ commands

void register_commands(CLI::App& app, std::map<std::string, Command>& cmds) {
    auto make = [&](const std::string& name, const std::string& help) -> Command& {
        auto& c = cmds[name];
        c.app = app.add_subcommand(name, help);
        c.opts = std::make_unique<OptionSet>(c.app);
        return c;
    };

    { // ingest
        auto& c = make("ingest", "validate a stock panel and report rejections");
        auto a = std::make_shared<PanelArgs>();
        add_panel_options(*c.opts, *a);
        c.run = [a](Run& run) {
            const auto p = load_panel(run, *a);
            json rep;
            rep["records"] = p.data.records.size();
            auto stocks = json::array();
            for (const auto& r : p.data.records) {
                stocks.push_back({{"id", r.id},
                                  {"first_date", r.first_date().iso()},
                                  {"last_date", r.last_date().iso()},
                                  {"observations", r.prices.size()},
                                  {"delisted", r.delisted}});
            }
            rep["stocks"] = stocks;
            auto rej = json::array();
            std::ostringstream csv;
            csv << "stock_id,reason\n";
            for (const auto& x : p.data.rejections) {
                rej.push_back({{"stock_id", x.stock_id}, {"reason", x.reason}});
                csv << hwi::csv::escape(x.stock_id) << ',' << hwi::csv::escape(x.reason) << '\n';
            }
            rep["rejections"] = rej;
            hwi::io::write_json(run.output("ingest_report.json"), rep);
            hwi::io::write_text(run.output("rejections.csv"), csv.str());
            std::cout << p.data.records.size() << " records, " << p.data.rejections.size() << " rejected\n";
        };
    }

    { // build-index
        struct Args {
            PanelArgs panel;
            std::string policies;
            std::vector<std::string> schemes;
            double tc = 0.0;
            double v0 = 100.0;
            std::string start;
            std::string end;
        };
        auto& c = make("build-index", "backtest weighting schemes and write index paths");
        auto a = std::make_shared<Args>();
        add_panel_options(*c.opts, a->panel);
        c.opts->add("policies", &a->policies, "policies.csv", true)
            .add("schemes", &a->schemes, "MCI, EWI, HWI, HWI.r, HWI.c.r, HWI.s, HWI.c.g, HWI.c.r.g or custom:<levels>", true)
            .add("tc", &a->tc, "proportional transaction cost in basis points per trade leg")
            .add("v0", &a->v0, "initial index value")
            .add("start", &a->start, "first backtest date (default: calendar start)")
            .add("end", &a->end, "last backtest date (default: calendar end)");
        c.run = [a](Run& run) {
            if (a->schemes.empty()) throw hwi::UsageError("build-index: at least one scheme is required");
            std::vector<hwi::WeightScheme> schemes;
            for (const auto& s : a->schemes) schemes.push_back(hwi::WeightScheme::parse(s));
            const auto p = load_panel(run, a->panel);
            const auto policies = hwi::read_policies(run.input(a->policies));
            hwi::BacktestConfig base;
            base.tc_bps = a->tc;
            base.v0 = a->v0;
            if (!a->start.empty()) base.start = hwi::Date::parse(a->start);
            if (!a->end.empty()) base.end = hwi::Date::parse(a->end);

            std::vector<hwi::IndexPath> paths(schemes.size());
            hwi::parallel_for(schemes.size(), run.globals().threads, [&](std::size_t i) {
                auto cfg = base;
                cfg.scheme = schemes[i];
                paths[i] = hwi::backtest(p.data.records, policies, p.calendar, cfg);
            });
            auto summary = json::array();
            for (const auto& path : paths) {
                const auto stem = safe_name(path.name);
                hwi::io::write_index_path(run.output("indexpath_" + stem + ".csv"), path);
                hwi::io::write_rebalance_log(run.output("rebalance_log_" + stem + ".csv"), path);
                double turnover = 0.0;
                double cost = 0.0;
                std::size_t scheduled = 0;
                std::size_t interim = 0;
                for (const auto& ev : path.rebalance_log) {
                    cost += ev.cost;
                    if (ev.interim) {
                        ++interim;
                    } else {
                        ++scheduled;
                        turnover += ev.turnover;
                    }
                }
                summary.push_back({{"name", path.name},
                                   {"tc_rate_bps", path.tc_bps},
                                   {"final_value", path.values.values.back()},
                                   {"scheduled_rebalances", scheduled},
                                   {"interim_rebalances", interim},
                                   {"average_turnover", scheduled ? turnover / static_cast<double>(scheduled) : 0.0},
                                   {"total_cost", cost}});
                std::cout << path.name << ": final value " << hwi::csv::format_double(path.values.values.back()) << "\n";
            }
            json rep;
            rep["indexes"] = summary;
            rep["rejections"] = p.data.rejections.size();
            rep["cost_convention"] = "tc charged on both buy and sell legs";
            hwi::io::write_json(run.output("build_summary.json"), rep);
            run.extras()["cost_convention"] = "tc charged on both buy and sell legs";
        };
    }

    { // stats
        struct Args {
            std::vector<std::string> paths;
            std::string risk_free;
            double rf_rate = 0.0;
            double rolling_window = 5.0;
            std::string baseline;
            std::vector<std::string> horizons = kDefaultHorizons;
        };
        auto& c = make("stats", "performance and risk statistics of index paths");
        auto a = std::make_shared<Args>();
        c.opts->add("path", &a->paths, "indexpath.csv file(s)", true)
            .add("risk-free", &a->risk_free, "short-rate file (date,rate), annualized")
            .add("rf-rate", &a->rf_rate, "constant annualized short rate when no file is given")
            .add("rolling-window", &a->rolling_window, "rolling GR window in years for plot data")
            .add("baseline", &a->baseline, "indexpath.csv used for outperformance frequencies")
            .add("horizons", &a->horizons, "outperformance horizons");
        c.run = [a](Run& run) {
            std::vector<hwi::io::LoadedPath> loaded;
            std::vector<std::string> names;
            for (const auto& f : a->paths) {
                loaded.push_back(hwi::io::read_index_path(run.input(f)));
                names.push_back(path_label(loaded.back(), f));
            }
            json meta;
            json rows = json::array();
            std::ostringstream csv;
            csv << "name,n_returns,gr,avg_return,risk_free_avg,risk_premium,volatility,sharpe,var95,es95,avg_drawdown,"
                   "avg_recovery_days,drawdown_episodes\n";
            for (std::size_t i = 0; i < loaded.size(); ++i) {
                const auto& s = loaded[i].values;
                hwi::Series rf;
                if (!a->risk_free.empty()) {
                    rf = hwi::io::read_rate_series(run.input(a->risk_free));
                } else {
                    rf.dates = s.dates;
                    rf.values.assign(s.size(), a->rf_rate);
                }
                const auto st = hwi::perf_stats(s, rf);
                rows.push_back(perf_json(names[i], st));
                using hwi::csv::format_double;
                csv << hwi::csv::escape(names[i]) << ',' << st.n_returns << ',' << format_double(st.gr) << ','
                    << format_double(st.avg_return) << ',' << format_double(st.risk_free_avg) << ','
                    << format_double(st.risk_premium) << ',' << format_double(st.volatility) << ','
                    << opt_str(st.sharpe) << ',' << format_double(st.var95) << ',' << format_double(st.es95) << ','
                    << format_double(st.avg_drawdown) << ',' << opt_str(st.avg_recovery_days) << ','
                    << st.drawdown_episodes << '\n';

                const auto rolling = hwi::rolling_growth_rate(s, a->rolling_window);
                std::ostringstream plot;
                plot << "date,value,rolling_gr\n";
                std::size_t k = 0;
                for (std::size_t t = 0; t < s.size(); ++t) {
                    plot << s.dates[t].iso() << ',' << format_double(s.values[t]) << ',';
                    if (k < rolling.size() && rolling.dates[k] == s.dates[t]) plot << format_double(rolling.values[k++]);
                    plot << '\n';
                }
                hwi::io::write_text(run.output("plot_" + safe_name(names[i]) + ".csv"), plot.str());
            }
            meta["risk_premium_baseline"] =
                a->risk_free.empty() ? "constant annualized rate " + hwi::csv::format_double(a->rf_rate) +
                                           ", averaged over return dates"
                                     : "short-rate file averaged over return dates";
            meta["annualization"] = "mean x252, volatility x sqrt(252), GR on 365.25-day years";
            meta["quantile"] = "lower interpolation, sorted[floor(0.05 (n-1))]";
            json rep;
            rep["metadata"] = meta;
            rep["indexes"] = rows;
            if (!a->baseline.empty()) {
                const auto base = hwi::io::read_index_path(run.input(a->baseline));
                json of = json::array();
                std::ostringstream ocsv;
                ocsv << "horizon,years";
                for (const auto& n : names) ocsv << ',' << hwi::csv::escape(n);
                ocsv << '\n';
                for (const auto& h : a->horizons) {
                    const double years = parse_horizon(h);
                    json row;
                    row["horizon"] = h;
                    row["years"] = years;
                    ocsv << h << ',' << hwi::csv::format_double(years);
                    for (std::size_t i = 0; i < loaded.size(); ++i) {
                        // Horizons longer than the common span are left blank.
                        try {
                            const double f = hwi::outperformance_frequency(loaded[i].values, base.values, years);
                            row[names[i]] = f;
                            ocsv << ',' << hwi::csv::format_double(f);
                        } catch (const hwi::DataError&) {
                            row[names[i]] = nullptr;
                            ocsv << ',';
                        }
                    }
                    ocsv << '\n';
                    of.push_back(row);
                }
                rep["outperformance"] = {{"baseline", path_label(base, a->baseline)}, {"rows", of}};
                hwi::io::write_text(run.output("outperformance.csv"), ocsv.str());
            }
            hwi::io::write_json(run.output("stats.json"), rep);
            hwi::io::write_text(run.output("stats.csv"), csv.str());
            run.extras()["risk_premium_baseline"] = meta["risk_premium_baseline"];
        };
    }

    { // gr-diff
        struct Args {
            std::string a;
            std::string b;
            std::vector<double> windows{1, 2, 3, 4, 5, 6, 7, 8};
            double confidence = 0.95;
        };
        auto& c = make("gr-diff", "mean GR difference over rolling windows with confidence interval");
        auto a = std::make_shared<Args>();
        c.opts->add("a", &a->a, "indexpath.csv of the first index", true)
            .add("b", &a->b, "indexpath.csv of the second index", true)
            .add("windows", &a->windows, "window lengths in years")
            .add("confidence", &a->confidence, "confidence level");
        c.run = [a](Run& run) {
            const auto pa = hwi::io::read_index_path(run.input(a->a));
            const auto pb = hwi::io::read_index_path(run.input(a->b));
            std::ostringstream csv;
            csv << "window_years,windows,mean,se,lower,upper\n";
            json rows = json::array();
            for (double w : a->windows) {
                const auto r = hwi::gr_difference(pa.values, pb.values, w, a->confidence);
                rows.push_back(hwi::io::to_json(r));
                using hwi::csv::format_double;
                csv << format_double(w) << ',' << r.windows << ',' << format_double(r.mean) << ','
                    << format_double(r.standard_error) << ',' << format_double(r.lower) << ','
                    << format_double(r.upper) << '\n';
            }
            json rep;
            rep["a"] = path_label(pa, a->a);
            rep["b"] = path_label(pb, a->b);
            rep["standard_error"] = "Bartlett long-run variance, bandwidth twice the window length";
            rep["rows"] = rows;
            hwi::io::write_json(run.output("gr_diff.json"), rep);
            hwi::io::write_text(run.output("gr_diff.csv"), csv.str());
        };
    }

    { // outperf
        struct Args {
            std::string a;
            std::string b;
            std::vector<std::string> horizons = kDefaultHorizons;
        };
        auto& c = make("outperf", "frequency with which one index outperforms another");
        auto a = std::make_shared<Args>();
        c.opts->add("a", &a->a, "indexpath.csv of the candidate", true)
            .add("b", &a->b, "indexpath.csv of the baseline", true)
            .add("horizons", &a->horizons, "horizons: daily, monthly, quarterly, half-yearly, yearly or years");
        c.run = [a](Run& run) {
            const auto pa = hwi::io::read_index_path(run.input(a->a));
            const auto pb = hwi::io::read_index_path(run.input(a->b));
            std::ostringstream csv;
            csv << "horizon,years,frequency\n";
            json rows = json::array();
            for (const auto& h : a->horizons) {
                const double years = parse_horizon(h);
                const double f = hwi::outperformance_frequency(pa.values, pb.values, years);
                rows.push_back({{"horizon", h}, {"years", years}, {"frequency", f}});
                csv << h << ',' << hwi::csv::format_double(years) << ',' << hwi::csv::format_double(f) << '\n';
            }
            json rep;
            rep["a"] = path_label(pa, a->a);
            rep["b"] = path_label(pb, a->b);
            rep["rows"] = rows;
            hwi::io::write_json(run.output("outperf.json"), rep);
            hwi::io::write_text(run.output("outperf.csv"), csv.str());
        };
    }

    { // emp-test
        struct Args {
            PanelArgs panel;
            std::vector<std::string> benchmarks;
            double confidence = 0.99;
            bool bootstrap = false;
            std::size_t replicates = 1000;
            double block_length = 20.0;
            std::vector<std::string> candidates;
            std::string versus;
        };
        auto& c = make("emp-test", "test the Efficient Market Property on benchmarked returns");
        auto a = std::make_shared<Args>();
        add_panel_options(*c.opts, a->panel);
        c.opts->add("benchmark", &a->benchmarks, "indexpath.csv file(s) used as benchmark", true)
            .add("confidence", &a->confidence, "confidence level of the intervals")
            .add("bootstrap", &a->bootstrap, "also run the stationary block bootstrap")
            .add("replicates", &a->replicates, "bootstrap replicates")
            .add("block-length", &a->block_length, "mean bootstrap block length (days)")
            .add("candidate", &a->candidates, "indexpath.csv file(s) tested against --versus")
            .add("versus", &a->versus, "benchmark for --candidate (default: first --benchmark)");
        c.run = [a](Run& run) {
            if (a->benchmarks.empty()) throw hwi::UsageError("emp-test: at least one benchmark is required");
            for (const auto& f : a->benchmarks) {
                if (!fs::exists(f)) throw hwi::DataError("benchmark path not found: " + f);
            }
            const auto p = load_panel(run, a->panel);
            std::vector<hwi::TestReport> z;
            std::vector<hwi::TestReport> boot;
            for (const auto& f : a->benchmarks) {
                const auto b = hwi::io::read_index_path(run.input(f));
                const auto label = path_label(b, f);
                const auto sample = hwi::pool_benchmarked_returns(p.data.records, b.values, label);
                z.push_back(hwi::z_test_nonpositive_mean(sample, a->confidence));
                if (a->bootstrap) {
                    hwi::BootstrapOptions bo;
                    bo.replicates = a->replicates;
                    bo.mean_block_length = a->block_length;
                    bo.confidence = a->confidence;
                    bo.seed = run.globals().seed;
                    bo.threads = run.globals().threads;
                    boot.push_back(hwi::block_bootstrap_test(sample, bo));
                }
            }
            std::vector<hwi::TestReport> vs;
            if (!a->candidates.empty()) {
                const std::string ref_file = a->versus.empty() ? a->benchmarks.front() : a->versus;
                if (!fs::exists(ref_file)) throw hwi::DataError("benchmark path not found: " + ref_file);
                const auto ref = hwi::io::read_index_path(run.input(ref_file));
                for (const auto& f : a->candidates) {
                    if (!fs::exists(f)) throw hwi::DataError("candidate path not found: " + f);
                    const auto cand = hwi::io::read_index_path(run.input(f));
                    vs.push_back(hwi::index_vs_index_test(cand.values, ref.values, a->confidence,
                                                          path_label(cand, f) + "/" + path_label(ref, ref_file)));
                }
            }
            json rep;
            rep["confidence"] = a->confidence;
            rep["observations"] = "daily benchmarked returns x 252 x 100";
            auto arr = [](const std::vector<hwi::TestReport>& v) {
                auto j = json::array();
                for (const auto& r : v) j.push_back(hwi::io::to_json(r));
                return j;
            };
            rep["z_test"] = arr(z);
            if (a->bootstrap) rep["bootstrap"] = arr(boot);
            if (!vs.empty()) rep["index_vs_index"] = arr(vs);
            hwi::io::write_json(run.output("test_report.json"), rep);
            hwi::io::write_test_table(run.output("table_z.csv"), z);
            if (a->bootstrap) hwi::io::write_test_table(run.output("table_bootstrap.csv"), boot);
            if (!vs.empty()) hwi::io::write_test_table(run.output("table_index_vs_index.csv"), vs);
            for (const auto& r : z) {
                std::cout << r.label << ": mean " << hwi::csv::format_double(r.sample_mean) << ", Z "
                          << hwi::csv::format_double(r.statistic) << ", p " << hwi::csv::format_double(r.p_value)
                          << "\n";
            }
        };
    }

    { // solve-gp
        struct Args {
            std::string a;
            std::string b;
        };
        auto& c = make("solve-gp", "growth optimal portfolio from drift vector and volatility matrix");
        auto a = std::make_shared<Args>();
        c.opts->add("a", &a->a, "CSV vector of expected returns (m entries)", true)
            .add("b", &a->b, "CSV volatility matrix (m rows, n columns)", true);
        c.run = [a](Run& run) {
            hwi::MarketCoefficients mc;
            mc.a = as_vector(hwi::io::read_matrix(run.input(a->a)), "--a");
            mc.b = hwi::io::read_matrix(run.input(a->b));
            const auto sol = hwi::solve_gp(mc);
            hwi::io::write_json(run.output("gp_solution.json"), hwi::io::to_json(sol));
            if (sol.minimum_norm) std::cerr << "warning: singular system, minimum-norm solution reported\n";
            std::cout << "lambda " << hwi::csv::format_double(sol.lambda) << ", residual "
                      << hwi::csv::format_double(sol.residual) << "\n";
        };
    }

    { // simulate
        struct Args {
            std::string counts = "3;2,5,16;3;5";
            std::string theta = "mr:0.2,2,0.2,0.3";
            std::string gamma = "mr:2,1,2,0.2";
            std::string r = "mr:0.03,0.5,0.03,0.2";
            double dt = 1.0 / 252.0;
            double horizon = 10.0;
            std::size_t paths = 1;
            std::string integrator = "log-euler";
            unsigned refinement = 0;
            double s0 = 1.0;
            double shares = 1.0e6;
            std::string start = "2000-01-03";
            bool verify = false;
        };
        auto& c = make("simulate", "simulate the stylized hierarchical market and export the panel");
        auto a = std::make_shared<Args>();
        c.opts->add("counts", &a->counts, "group counts per level, e.g. 3;2,5,16;3;5")
            .add("theta", &a->theta, "market price of risk: number, mr:initial,speed,level,vol or file:path")
            .add("gamma", &a->gamma, "risk aversion process")
            .add("r", &a->r, "short rate process")
            .add("dt", &a->dt, "step size in years")
            .add("horizon", &a->horizon, "horizon in years")
            .add("paths", &a->paths, "number of independent paths")
            .add("integrator", &a->integrator, "log-euler, euler or milstein")
            .add("refinement", &a->refinement, "Brownian increments drawn on dt / 2^refinement")
            .add("s0", &a->s0, "initial stock and index value")
            .add("shares", &a->shares, "shares outstanding (market value = price x shares)")
            .add("start", &a->start, "first calendar date of the exported panel")
            .add("verify", &a->verify, "benchmark every stock by the HWI and test for drift");
        c.run = [a](Run& run) {
            hwi::SimConfig cfg;
            cfg.group_counts = parse_counts(a->counts);
            cfg.theta = parse_process(a->theta, run);
            cfg.gamma = parse_process(a->gamma, run);
            cfg.r = parse_process(a->r, run);
            cfg.dt = a->dt;
            cfg.horizon = a->horizon;
            cfg.n_paths = a->paths;
            cfg.integrator = hwi::parse_integrator(a->integrator);
            cfg.brownian_refinement = a->refinement;
            cfg.s0 = a->s0;
            cfg.shares_outstanding = a->shares;
            cfg.start_date = hwi::Date::parse(a->start);
            cfg.seed = run.globals().seed;
            cfg.validate();

            std::vector<json> per_path(cfg.n_paths);
            std::vector<std::vector<std::string>> files(cfg.n_paths);
            hwi::parallel_for(cfg.n_paths, run.globals().threads, [&](std::size_t k) {
                const auto panel = hwi::simulate_panel(cfg, k);
                const auto ex = hwi::export_panel(panel, cfg);
                const std::string sub = cfg.n_paths == 1 ? "" : "path_" + std::to_string(k) + "/";
                const auto dir = (fs::path(run.globals().out) / sub).string();
                hwi::io::write_panel_export(dir, ex);
                for (const char* f : {"prices.csv", "classification.csv", "policies.csv", "calendar.csv",
                                      "hwi_sim.csv", "gp_sim.csv"}) {
                    files[k].push_back(sub + f);
                }
                json j;
                j["path"] = k;
                j["stocks"] = panel.shape.stocks();
                j["steps"] = panel.steps();
                j["symmetric_tree"] = panel.shape.symmetric();
                j["final_hwi"] = panel.hwi.back();
                j["final_gp"] = panel.gp.back();
                j["terminal_log_gap"] = std::abs(std::log(panel.hwi.back() / panel.gp.back()));
                j["fallback_steps"] = panel.fallback_steps;
                j["gp_unit_lambda"] = panel.gp_unit.lambda;
                if (a->verify) {
                    const auto rep = hwi::verify_driftless(panel, 0.99);
                    j["driftless"] = {{"pooled", hwi::io::to_json(rep.pooled)},
                                      {"max_abs_stock_statistic", rep.max_abs_stock_statistic}};
                }
                per_path[k] = std::move(j);
            });
            for (auto& list : files) {
                for (auto& f : list) (void)run.output(f);
            }
            json rep;
            rep["paths"] = per_path;
            rep["gp"] = "exact log step of the solve_gp solution under frozen coefficients";
            hwi::io::write_json(run.output("sim_summary.json"), rep);
            hwi::io::write_json(run.output("sim_config.json"), run.resolved_options());
            std::cout << "simulated " << cfg.n_paths << " path(s) of " << per_path.front()["stocks"].get<std::size_t>()
                      << " stocks\n";
        };
    }

    { // scan
        struct Args {
            std::string family = "EWI";
            double xi = 0.0;
            double c = 0.0;
            std::size_t depth = 3;
            std::size_t k_low = 1;
            std::size_t k_high = 2;
            double sigma = 0.2;
            std::size_t draws = 4;
            std::vector<std::size_t> m_list{2, 4, 8, 16, 32};
        };
        auto& c = make("scan", "diversification scan of benchmarked quadratic variation against M");
        auto a = std::make_shared<Args>();
        auto* opts = c.opts.get();
        c.opts->add("family", &a->family, "EWI, HWI or concentrated")
            .add("xi", &a->xi, "max-weight exponent in [0, 1/2)")
            .add("c", &a->c, "max-weight constant (default: the family's own)")
            .add("depth", &a->depth, "hierarchy depth H")
            .add("k-low", &a->k_low, "lower child-count factor")
            .add("k-high", &a->k_high, "upper child-count factor")
            .add("sigma", &a->sigma, "loading scale")
            .add("draws", &a->draws, "random trees per M")
            .add("m-list", &a->m_list, "values of M");
        c.run = [a, opts](Run& run) {
            hwi::ScanConfig cfg;
            cfg.family = hwi::parse_weight_family(a->family);
            cfg.xi = a->xi;
            if (opts->given("c")) cfg.c = a->c;
            cfg.depth = a->depth;
            cfg.k_low = a->k_low;
            cfg.k_high = a->k_high;
            cfg.sigma = a->sigma;
            cfg.draws = a->draws;
            cfg.m_list = a->m_list;
            cfg.seed = run.globals().seed;
            cfg.threads = run.globals().threads;
            const auto res = hwi::diversification_scan(cfg);
            std::ostringstream csv;
            csv << "M,estimate,bound\n";
            for (const auto& p : res.points) {
                csv << p.m << ',' << hwi::csv::format_double(p.mean_estimate) << ','
                    << hwi::csv::format_double(p.mean_bound) << '\n';
            }
            hwi::io::write_text(run.output("scan_result.csv"), csv.str());
            hwi::io::write_json(run.output("scan_result.json"), hwi::io::to_json(res));
            run.extras()["fitted_slope"] = res.fitted_slope;
            run.extras()["theoretical_slope"] = res.theoretical_slope;
            run.extras()["all_within_bound"] = res.all_within_bound();
            std::cout << "fitted slope " << hwi::csv::format_double(res.fitted_slope) << " (bound slope "
                      << hwi::csv::format_double(res.theoretical_slope) << ")\n";
        };
    }
}

nlohmann::json load_config(const std::string& path) {
    if (path.empty()) return nullptr;
    std::ifstream in(path);
    if (!in) throw hwi::UsageError("cannot open config " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw hwi::UsageError("config " + path + ": " + e.what());
    }
    if (!j.is_object()) throw hwi::UsageError("config must be a JSON object");
    if (!j.contains("format_version")) throw hwi::UsageError("config: format_version is required");
    if (j["format_version"] != kFormatVersion) {
        throw hwi::UsageError("config: unsupported format_version (expected " + std::to_string(kFormatVersion) + ")");
    }
    return j;
}

int run_main(int argc, char** argv) {
    CLI::App app{"hwilab: hierarchically weighted index laboratory"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    Globals g;
    OptionSet global(&app);
    global.add("config", &g.config, "JSON config file (keys are option names)")
        .add("seed", &g.seed, "random seed")
        .add("out", &g.out, "output directory")
        .add("threads", &g.threads, "worker threads");
    std::map<std::string, Command> cmds;
    register_commands(app, cmds);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        const auto cfg = load_config(g.config);
        for (auto& [name, cmd] : cmds) {
            if (!cmd.app->parsed()) continue;
            if (!cfg.is_null()) {
                nlohmann::json gpart = nlohmann::json::object();
                nlohmann::json cpart = nlohmann::json::object();
                for (const auto& [k, v] : cfg.items()) {
                    if (k == "format_version") continue;
                    if (k == "seed" || k == "out" || k == "threads") {
                        gpart[k] = v;
                    } else if (k == "config") {
                        throw hwi::UsageError("config: 'config' cannot be nested");
                    } else {
                        cpart[k] = v;
                    }
                }
                global.apply(gpart, {});
                cmd.opts->apply(cpart, {});
            }
            cmd.opts->check_required();
            if (g.threads < 1) throw hwi::UsageError("--threads must be >= 1");
            Run run(name, g);
            run.set_resolved(cmd.opts->resolved());
            cmd.run(run);
            run.write_manifest();
        }
    } catch (const hwi::UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const hwi::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const hwi::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

} // namespace
} // namespace hwilab

int main(int argc, char** argv) { return hwilab::run_main(argc, argv); }
