#include "hwi/stylized_sim.hpp"

#include "hwi/error.hpp"
#include "hwi/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace hwi {

// ---------------------------------------------------------------- processes

ProcessSpec ProcessSpec::constant(double v) {
    ProcessSpec p;
    p.kind = Kind::Constant;
    p.value = v;
    return p;
}

ProcessSpec ProcessSpec::mean_reverting(double initial, double speed, double level, double vol) {
    ProcessSpec p;
    p.kind = Kind::MeanReverting;
    p.initial = initial;
    p.speed = speed;
    p.level = level;
    p.vol = vol;
    return p;
}

void ProcessSpec::validate(const std::string& name, bool strictly_positive) const {
    auto bad = [&](const std::string& why) { throw UsageError(name + " process: " + why); };
    switch (kind) {
    case Kind::Constant:
        if (!std::isfinite(value)) bad("value must be finite");
        if (strictly_positive && !(value > 0.0)) bad("value must be positive");
        break;
    case Kind::MeanReverting:
        if (!(initial > 0.0) || !(level > 0.0)) bad("initial value and level must be positive");
        if (!(speed >= 0.0) || !(vol >= 0.0) || !std::isfinite(speed) || !std::isfinite(vol)) {
            bad("speed and vol must be finite and nonnegative");
        }
        break;
    case Kind::Piecewise:
        if (times.empty() || times.size() != values.size()) bad("times and values must be nonempty and aligned");
        if (times.front() > 0.0) bad("first time must be <= 0");
        for (std::size_t i = 1; i < times.size(); ++i) {
            if (!(times[i - 1] < times[i])) bad("times must be strictly increasing");
        }
        for (double v : values) {
            if (!std::isfinite(v) || (strictly_positive && !(v > 0.0))) bad("values must be finite and positive");
        }
        break;
    }
}

namespace {

/// Values of `spec` at t = i * dt for i < steps. Mean-reverting paths are
/// sampled exactly on the fine grid dt / 2^refinement and subsampled, so
/// nested grids see the same path.
std::vector<double> sample_process(const ProcessSpec& spec, std::size_t steps, double dt, unsigned refinement,
                                   std::uint64_t seed) {
    std::vector<double> out(steps);
    switch (spec.kind) {
    case ProcessSpec::Kind::Constant:
        std::fill(out.begin(), out.end(), spec.value);
        break;
    case ProcessSpec::Kind::Piecewise:
        for (std::size_t i = 0; i < steps; ++i) {
            const double t = static_cast<double>(i) * dt;
            const auto it = std::upper_bound(spec.times.begin(), spec.times.end(), t + 1e-12);
            out[i] = spec.values[static_cast<std::size_t>(it - spec.times.begin()) - 1];
        }
        break;
    case ProcessSpec::Kind::MeanReverting: {
        const std::size_t sub = std::size_t{1} << refinement;
        const double h = dt / static_cast<double>(sub);
        const double decay = std::exp(-spec.speed * h);
        const double sd = spec.speed > 0.0
                              ? spec.vol * std::sqrt((1.0 - std::exp(-2.0 * spec.speed * h)) / (2.0 * spec.speed))
                              : spec.vol * std::sqrt(h);
        const double log_level = std::log(spec.level);
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal;
        double y = std::log(spec.initial);
        for (std::size_t i = 0; i < steps; ++i) {
            out[i] = std::exp(y);
            for (std::size_t s = 0; s < sub; ++s) y = log_level + (y - log_level) * decay + sd * normal(rng);
        }
        break;
    }
    }
    return out;
}

} // namespace

// ---------------------------------------------------------------- shape

HierarchyShape HierarchyShape::from_counts(const std::vector<std::vector<std::size_t>>& counts) {
    if (counts.empty()) throw UsageError("hierarchy needs at least one level");
    if (counts[0].size() != 1) throw UsageError("level 1 takes a single count");
    HierarchyShape s;
    auto check = [](std::size_t c) {
        if (c < 1) throw UsageError("group counts must be >= 1");
        return c;
    };
    const std::size_t roots = check(counts[0][0]);
    s.level_begin_ = {0, roots};
    for (std::size_t k = 0; k < roots; ++k) {
        s.level_.push_back(0);
        s.parent_.push_back(static_cast<std::size_t>(-1));
        s.position_.push_back(k + 1);
        s.weight_.push_back(1.0 / static_cast<double>(roots));
    }
    for (std::size_t h = 1; h < counts.size(); ++h) {
        const std::size_t pb = s.level_begin_[h - 1];
        const std::size_t pe = s.level_begin_[h];
        const auto& c = counts[h];
        if (c.size() != 1 && c.size() != pe - pb) {
            throw UsageError("level " + std::to_string(h + 1) + " needs 1 or " + std::to_string(pe - pb) +
                             " counts, got " + std::to_string(c.size()));
        }
        for (std::size_t p = pb; p < pe; ++p) {
            const std::size_t n = check(c.size() == 1 ? c[0] : c[p - pb]);
            for (std::size_t k = 0; k < n; ++k) {
                s.level_.push_back(h);
                s.parent_.push_back(p);
                s.position_.push_back(k + 1);
                s.weight_.push_back(s.weight_[p] / static_cast<double>(n));
            }
        }
        s.level_begin_.push_back(s.parent_.size());
    }
    const std::size_t nodes = s.parent_.size();
    s.child_count_.assign(nodes, 0);
    s.descendants_.assign(nodes, 0);
    for (std::size_t k = s.level_begin_[s.depth() - 1]; k < nodes; ++k) s.descendants_[k] = 1;
    for (std::size_t k = nodes; k-- > roots;) {
        ++s.child_count_[s.parent_[k]];
        s.descendants_[s.parent_[k]] += s.descendants_[k];
    }
    const std::size_t depth = s.depth();
    const std::size_t first_stock = s.level_begin_[depth - 1];
    s.paths_.resize(s.stocks() * depth);
    for (std::size_t j = 0; j < s.stocks(); ++j) {
        std::size_t node = first_stock + j;
        for (std::size_t h = depth; h-- > 0;) {
            s.paths_[j * depth + h] = node;
            node = s.parent_[node];
        }
    }
    return s;
}

std::span<const std::size_t> HierarchyShape::path(std::size_t stock) const {
    return {paths_.data() + stock * depth(), depth()};
}

std::string HierarchyShape::label(std::size_t node) const {
    std::vector<std::size_t> chain;
    for (std::size_t k = node;; k = parent_[k]) {
        chain.push_back(k);
        if (level_[k] == 0) break;
    }
    std::string out;
    for (std::size_t i = chain.size(); i-- > 0;) {
        const std::size_t h = level_[chain[i]];
        std::string prefix;
        if (h + 1 == depth()) {
            prefix = "S";
        } else if (h < 3) {
            prefix = std::string(1, "RCG"[h]);
        } else {
            prefix = "L" + std::to_string(h + 1) + "_";
        }
        if (!out.empty()) out += '.';
        out += prefix + std::to_string(position_[chain[i]]);
    }
    return out;
}

Eigen::MatrixXd HierarchyShape::incidence() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(stocks()), static_cast<Eigen::Index>(nodes()));
    for (std::size_t j = 0; j < stocks(); ++j) {
        for (auto k : path(j)) m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = 1.0;
    }
    return m;
}

bool HierarchyShape::symmetric() const {
    for (std::size_t h = 0; h + 1 < depth(); ++h) {
        for (std::size_t k = level_begin_[h]; k < level_begin_[h + 1]; ++k) {
            if (child_count_[k] != child_count_[level_begin_[h]]) return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------- config

std::size_t SimConfig::steps() const {
    if (!(dt > 0.0) || !(horizon > 0.0)) return 0;
    return static_cast<std::size_t>(std::llround(horizon / dt));
}

void SimConfig::validate() const {
    if (group_counts.empty()) throw UsageError("simulation: group_counts is empty");
    (void)HierarchyShape::from_counts(group_counts);
    if (!(dt > 0.0) || !std::isfinite(dt)) throw UsageError("simulation: dt must be positive");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw UsageError("simulation: horizon must be positive");
    if (steps() < 1) throw UsageError("simulation: horizon shorter than one step");
    if (n_paths < 1) throw UsageError("simulation: n_paths must be >= 1");
    if (brownian_refinement > 16) throw UsageError("simulation: brownian_refinement must be <= 16");
    if (!(s0 > 0.0) || !(shares_outstanding > 0.0)) throw UsageError("simulation: s0 and shares must be positive");
    theta.validate("theta", false);
    gamma.validate("gamma", true);
    r.validate("r", false);
    if (theta.kind == ProcessSpec::Kind::Constant && theta.value < 0.0) {
        throw UsageError("theta process: value must be nonnegative");
    }
}

SimConfig SimConfig::developed_market_shape() {
    SimConfig c;
    c.group_counts = {{3}, {2, 5, 16}, {3}, {5}};
    return c;
}

// ---------------------------------------------------------------- coefficients

MarketCoefficients stylized_coefficients(const HierarchyShape& shape, double theta, double gamma, double r) {
    if (!(gamma > 0.0)) throw UsageError("stylized coefficients: gamma must be positive");
    const double h = static_cast<double>(shape.depth());
    MarketCoefficients mc;
    mc.a = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(shape.stocks()), r + h * theta * theta / gamma);
    mc.b = (theta / gamma) * shape.incidence();
    return mc;
}

Eigen::MatrixXd hwi_benchmarked_loadings(const HierarchyShape& shape, double theta, double gamma) {
    if (!(gamma > 0.0)) throw UsageError("benchmarked loadings: gamma must be positive");
    const double c = theta / gamma;
    Eigen::MatrixXd psi(static_cast<Eigen::Index>(shape.stocks()), static_cast<Eigen::Index>(shape.nodes()));
    for (std::size_t k = 0; k < shape.nodes(); ++k) psi.col(static_cast<Eigen::Index>(k)).setConstant(-c * shape.hwi_weight(k));
    for (std::size_t j = 0; j < shape.stocks(); ++j) {
        for (auto k : shape.path(j)) psi(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) += c;
    }
    return psi;
}

// ---------------------------------------------------------------- simulation

namespace {

/// One multiplicative step of dX/X = a dt + sum_k s_k dW_k given the scalar
/// shock z = sum_k s_k dW_k and v = sum_k s_k^2.
double advance(Integrator integrator, double x, double a, double z, double v, double dt, std::size_t& fallbacks) {
    const double log_step = x * std::exp((a - 0.5 * v) * dt + z);
    double next = 0.0;
    switch (integrator) {
    case Integrator::LogEuler: return log_step;
    case Integrator::Euler: next = x * (1.0 + a * dt + z); break;
    case Integrator::Milstein: next = x * (1.0 + a * dt + z + 0.5 * (z * z - v * dt)); break;
    }
    if (!(next > 0.0)) {
        ++fallbacks;
        return log_step;
    }
    return next;
}

} // namespace

SimPanel simulate_panel(const SimConfig& config, std::size_t path_index) {
    config.validate();
    SimPanel panel;
    panel.shape = HierarchyShape::from_counts(config.group_counts);
    panel.path_index = path_index;
    panel.dt = config.dt;
    const auto& shape = panel.shape;
    const std::size_t steps = config.steps();
    const std::size_t n = shape.stocks();
    const std::size_t k_nodes = shape.nodes();
    const double depth = static_cast<double>(shape.depth());
    const double dt = config.dt;

    const std::uint64_t base = mix_seed(config.seed, path_index);
    panel.theta_path = sample_process(config.theta, steps, dt, config.brownian_refinement, mix_seed(base, 1));
    panel.gamma_path = sample_process(config.gamma, steps, dt, config.brownian_refinement, mix_seed(base, 2));
    panel.r_path = sample_process(config.r, steps, dt, config.brownian_refinement, mix_seed(base, 3));
    for (double g : panel.gamma_path) {
        if (!(g > 0.0)) throw NumericalError("simulation: gamma path is not positive");
    }

    MarketCoefficients unit;
    unit.a = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    unit.b = shape.incidence();
    panel.gp_unit = solve_gp(unit);
    const double theta_unit_sq = panel.gp_unit.theta.squaredNorm();

    std::vector<double> hwi_w(k_nodes);
    double hwi_w_sq = 0.0;
    for (std::size_t k = 0; k < k_nodes; ++k) {
        hwi_w[k] = shape.hwi_weight(k);
        hwi_w_sq += hwi_w[k] * hwi_w[k];
    }
    std::vector<double> gp_w(panel.gp_unit.theta.data(), panel.gp_unit.theta.data() + k_nodes);

    panel.times.resize(steps + 1);
    for (std::size_t i = 0; i <= steps; ++i) panel.times[i] = static_cast<double>(i) * dt;
    panel.stock_values.resize((steps + 1) * n);
    panel.hwi.resize(steps + 1);
    panel.gp.resize(steps + 1);
    if (config.keep_drivers) panel.drivers.resize(steps * k_nodes);

    std::fill(panel.stock_values.begin(), panel.stock_values.begin() + static_cast<std::ptrdiff_t>(n), config.s0);
    panel.hwi[0] = config.s0;
    panel.gp[0] = config.s0;

    std::mt19937_64 rng(mix_seed(base, 0));
    std::normal_distribution<double> normal;
    const std::size_t sub = std::size_t{1} << config.brownian_refinement;
    const double sub_sd = std::sqrt(dt / static_cast<double>(sub));
    std::vector<double> dw(k_nodes);
    std::vector<double> node_sum(k_nodes);
    const std::size_t first_stock = shape.level_begin(shape.depth() - 1);

    for (std::size_t i = 0; i < steps; ++i) {
        std::fill(dw.begin(), dw.end(), 0.0);
        for (std::size_t s = 0; s < sub; ++s) {
            for (auto& w : dw) w += sub_sd * normal(rng);
        }
        if (config.keep_drivers) std::copy(dw.begin(), dw.end(), panel.drivers.begin() + static_cast<std::ptrdiff_t>(i * k_nodes));

        const double c = panel.theta_path[i] / panel.gamma_path[i];
        const double a = panel.r_path[i] + depth * panel.theta_path[i] * c;

        // Sum of driver increments along each path, parents before children.
        double z_hwi = 0.0;
        double z_gp = 0.0;
        for (std::size_t k = 0; k < k_nodes; ++k) {
            node_sum[k] = dw[k] + (shape.level_of(k) == 0 ? 0.0 : node_sum[shape.parent(k)]);
            z_hwi += hwi_w[k] * dw[k];
            z_gp += gp_w[k] * dw[k];
        }
        const double* prev = panel.stock_values.data() + i * n;
        double* next = panel.stock_values.data() + (i + 1) * n;
        for (std::size_t j = 0; j < n; ++j) {
            next[j] = advance(config.integrator, prev[j], a, c * node_sum[first_stock + j], c * c * depth, dt,
                              panel.fallback_steps);
        }
        panel.hwi[i + 1] = advance(config.integrator, panel.hwi[i], a, c * z_hwi, c * c * hwi_w_sq, dt,
                                   panel.fallback_steps);
        // GP: exact log step with frozen coefficients, lambda rescaled from the unit solve.
        const double lambda = a + c * c * panel.gp_unit.lambda;
        panel.gp[i + 1] = panel.gp[i] * std::exp((lambda + 0.5 * c * c * theta_unit_sq) * dt + c * z_gp);
    }
    for (double v : panel.stock_values) {
        if (!(v > 0.0) || !std::isfinite(v)) throw NumericalError("simulation: non-positive or non-finite stock value");
    }
    return panel;
}

std::vector<Date> weekday_calendar(Date start, std::size_t count) {
    std::vector<Date> out;
    out.reserve(count);
    for (Date d = start; out.size() < count; d = d + 1) {
        const auto wd = d.weekday();
        if (wd != 0 && wd != 6) out.push_back(d);
    }
    return out;
}

PanelExport export_panel(const SimPanel& panel, const SimConfig& config) {
    const auto& shape = panel.shape;
    const std::size_t depth = shape.depth();
    PanelExport ex;
    ex.calendar = weekday_calendar(config.start_date, panel.steps() + 1);
    std::map<std::string, bool> countries;
    for (std::size_t j = 0; j < shape.stocks(); ++j) {
        const auto p = shape.path(j);
        const std::string id = shape.label(p[depth - 1]);
        Classification cl;
        cl.region = depth >= 2 ? shape.label(p[0]) : "R1";
        cl.country = depth >= 3 ? shape.label(p[1]) : cl.region + ".C1";
        cl.supersector = depth >= 4 ? shape.label(p[depth - 2]) : cl.country + ".G1";
        cl.sector = cl.supersector;
        cl.subsector = cl.supersector;
        countries[cl.country] = true;
        ex.classification.emplace(id, std::move(cl));
        for (std::size_t i = 0; i <= panel.steps(); ++i) {
            const double price = panel.value(i, j);
            ex.rows.push_back({id, ex.calendar[i], price, price * config.shares_outstanding});
        }
    }
    std::sort(ex.rows.begin(), ex.rows.end(), [](const PriceRow& x, const PriceRow& y) {
        return x.stock_id != y.stock_id ? x.stock_id < y.stock_id : x.date < y.date;
    });
    for (const auto& [country, unused] : countries) {
        ex.policies.push_back({country, ex.calendar.front(), shape.stocks(), IndustrialLevel::Supersector});
    }
    ex.hwi.dates = ex.calendar;
    ex.hwi.values = panel.hwi;
    ex.gp.dates = ex.calendar;
    ex.gp.values = panel.gp;
    return ex;
}

// ---------------------------------------------------------------- driftless check

DriftlessReport verify_driftless(const SimPanel& panel, double confidence) {
    const std::size_t n = panel.shape.stocks();
    const std::size_t steps = panel.steps();
    if (steps < 2) throw UsageError("verify_driftless: need at least 2 steps");
    DriftlessReport rep;
    ReturnSample pooled;
    pooled.source = "stocks/HWI";
    std::vector<double> seg(steps);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < steps; ++i) {
            const double r = (panel.value(i + 1, j) / panel.hwi[i + 1]) / (panel.value(i, j) / panel.hwi[i]) - 1.0;
            seg[i] = r * kAnnualizedPercent;
        }
        pooled.append_segment(seg);
        ReturnSample one;
        one.source = panel.shape.label(panel.shape.path(j).back()) + "/HWI";
        one.append_segment(seg);
        bool degenerate = true;
        for (double v : seg) degenerate = degenerate && std::abs(v) < 1e-9;
        if (degenerate) {
            TestReport t;
            t.label = one.source;
            t.n = seg.size();
            t.confidence = confidence;
            t.p_value = 0.5;
            t.warnings.emplace_back("benchmarked series is constant");
            rep.per_stock.push_back(std::move(t));
            continue;
        }
        rep.per_stock.push_back(z_test_nonpositive_mean(one, confidence));
        rep.max_abs_stock_statistic = std::max(rep.max_abs_stock_statistic, std::abs(rep.per_stock.back().statistic));
    }
    bool pooled_degenerate = true;
    for (double v : pooled.observations) pooled_degenerate = pooled_degenerate && std::abs(v) < 1e-9;
    if (pooled_degenerate) {
        rep.pooled.label = pooled.source;
        rep.pooled.n = pooled.n();
        rep.pooled.confidence = confidence;
        rep.pooled.p_value = 0.5;
        rep.pooled.warnings.emplace_back("benchmarked series are constant");
    } else {
        rep.pooled = z_test_nonpositive_mean(pooled, confidence);
    }

    const auto constant = [](const std::vector<double>& x) {
        return std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); });
    };
    const std::size_t k = panel.shape.nodes();
    if (!panel.drivers.empty() && constant(panel.theta_path) && constant(panel.gamma_path) && steps > k + 1) {
        // Regress benchmarked log increments on the driver increments.
        Eigen::MatrixXd x(static_cast<Eigen::Index>(steps), static_cast<Eigen::Index>(k + 1));
        for (std::size_t i = 0; i < steps; ++i) {
            x(static_cast<Eigen::Index>(i), 0) = 1.0;
            for (std::size_t q = 0; q < k; ++q) {
                x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(q + 1)) = panel.drivers[i * k + q];
            }
        }
        Eigen::MatrixXd y(static_cast<Eigen::Index>(steps), static_cast<Eigen::Index>(n));
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t i = 0; i < steps; ++i) {
                y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    std::log((panel.value(i + 1, j) / panel.hwi[i + 1]) / (panel.value(i, j) / panel.hwi[i]));
            }
        }
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
        const Eigen::MatrixXd beta = qr.solve(y);
        const Eigen::MatrixXd resid = y - x * beta;
        const Eigen::MatrixXd xtx_inv = (x.transpose() * x).inverse();
        const auto psi = hwi_benchmarked_loadings(panel.shape, panel.theta_path.front(), panel.gamma_path.front());
        double err = 0.0;
        double tol = 1e-8;
        const double dof = static_cast<double>(steps - k - 1);
        for (std::size_t j = 0; j < n; ++j) {
            const double s2 = resid.col(static_cast<Eigen::Index>(j)).squaredNorm() / dof;
            for (std::size_t q = 0; q < k; ++q) {
                const auto qi = static_cast<Eigen::Index>(q);
                err = std::max(err, std::abs(beta(qi + 1, static_cast<Eigen::Index>(j)) - psi(static_cast<Eigen::Index>(j), qi)));
                tol = std::max(tol, 5.0 * std::sqrt(s2 * xtx_inv(qi + 1, qi + 1)));
            }
        }
        rep.max_loading_error = err;
        rep.loading_tolerance = tol;
    }
    return rep;
}

// ---------------------------------------------------------------- diversification

double benchmarked_qv_rate(std::span<const double> weights, const Eigen::MatrixXd& loadings) {
    if (static_cast<Eigen::Index>(weights.size()) != loadings.rows()) {
        throw UsageError("benchmarked_qv_rate: weight and loading dimensions differ");
    }
    const Eigen::Map<const Eigen::VectorXd> w(weights.data(), static_cast<Eigen::Index>(weights.size()));
    return (loadings.transpose() * w).squaredNorm();
}

bool DiversificationScanResult::all_within_bound() const {
    return std::all_of(points.begin(), points.end(), [](const ScanPoint& p) { return p.within_bound; });
}

namespace {

struct DrawResult {
    double estimate = 0.0;
    double bound = 0.0;
    std::size_t stocks = 0;
    double max_weight = 0.0;
};

DrawResult scan_draw(const ScanConfig& cfg, std::size_t m, double c, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const std::size_t h_levels = cfg.depth;
    std::uniform_int_distribution<std::size_t> count(cfg.k_low * m, cfg.k_high * m);

    std::vector<std::vector<std::size_t>> counts(h_levels);
    counts[0] = {count(rng)};
    std::size_t parents = counts[0][0];
    for (std::size_t h = 1; h < h_levels; ++h) {
        counts[h].resize(parents);
        std::size_t total = 0;
        for (auto& x : counts[h]) {
            x = count(rng);
            total += x;
        }
        parents = total;
    }
    const auto shape = HierarchyShape::from_counts(counts);
    const std::size_t n = shape.stocks();

    std::vector<double> w(n);
    switch (cfg.family) {
    case WeightFamily::EWI: std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(n)); break;
    case WeightFamily::HWI:
        for (std::size_t j = 0; j < n; ++j) w[j] = shape.hwi_weight(shape.path(j).back());
        break;
    case WeightFamily::Concentrated: {
        const auto support = static_cast<std::size_t>(
            std::ceil(std::pow(static_cast<double>(m), static_cast<double>(h_levels) - cfg.xi) - 1e-9));
        if (support > n) throw UsageError("concentrated family: support exceeds the universe");
        for (std::size_t j = 0; j < support; ++j) w[j] = 1.0 / static_cast<double>(support);
        break;
    }
    }
    DrawResult out;
    out.stocks = n;
    out.max_weight = *std::max_element(w.begin(), w.end());
    const double cap = c * std::pow(static_cast<double>(m), cfg.xi - static_cast<double>(h_levels));
    if (out.max_weight > cap * (1.0 + 1e-12)) {
        throw UsageError("weight family violates the max-weight condition at M=" + std::to_string(m));
    }

    std::uniform_real_distribution<double> load(0.0, cfg.sigma);
    std::vector<double> exposure(shape.nodes(), 0.0);
    std::vector<double> abs_sum(shape.nodes(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        for (auto k : shape.path(j)) {
            const double psi = load(rng);
            exposure[k] += w[j] * psi;
            abs_sum[k] += psi;
        }
    }
    const double km = static_cast<double>(cfg.k_high * m);
    double sigma = 0.0;
    for (std::size_t k = 0; k < shape.nodes(); ++k) {
        out.estimate += exposure[k] * exposure[k];
        const double levels_below = static_cast<double>(h_levels - 1 - shape.level_of(k));
        sigma = std::max(sigma, abs_sum[k] / std::pow(km, levels_below));
    }
    out.bound = 2.0 * c * c * sigma * sigma * std::pow(static_cast<double>(cfg.k_high), 2.0 * static_cast<double>(h_levels)) *
                std::pow(static_cast<double>(m), 2.0 * cfg.xi - 1.0);
    return out;
}

} // namespace

DiversificationScanResult diversification_scan(const ScanConfig& config) {
    if (!(config.xi >= 0.0 && config.xi < 0.5)) throw UsageError("scan: xi must lie in [0, 1/2)");
    if (config.depth < 1) throw UsageError("scan: depth must be >= 1");
    if (config.k_low < 1 || config.k_high < config.k_low) throw UsageError("scan: need 1 <= k_low <= k_high");
    if (!(config.sigma > 0.0)) throw UsageError("scan: sigma must be positive");
    if (config.draws < 1) throw UsageError("scan: draws must be >= 1");
    if (config.m_list.size() < 2) throw UsageError("scan: need at least two values of M");
    for (auto m : config.m_list) {
        if (m < 2) throw UsageError("scan: every M must be >= 2");
    }
    if (config.family != WeightFamily::Concentrated && config.xi != 0.0) {
        throw UsageError("scan: EWI and HWI families use xi = 0");
    }

    const double h = static_cast<double>(config.depth);
    const double family_c = config.family == WeightFamily::Concentrated
                                ? 1.0
                                : std::pow(static_cast<double>(config.k_low), -h);
    DiversificationScanResult res;
    res.family = config.family;
    res.xi = config.xi;
    res.c = config.c.value_or(family_c);
    res.theoretical_slope = 2.0 * config.xi - 1.0;

    const std::size_t n_m = config.m_list.size();
    std::vector<DrawResult> draws(n_m * config.draws);
    parallel_for(draws.size(), config.threads, [&](std::size_t t) {
        const std::size_t mi = t / config.draws;
        const std::size_t d = t % config.draws;
        const std::size_t m = config.m_list[mi];
        draws[t] = scan_draw(config, m, res.c, mix_seed(mix_seed(config.seed, m), d));
    });

    std::vector<double> lx;
    std::vector<double> ly;
    for (std::size_t mi = 0; mi < n_m; ++mi) {
        ScanPoint p;
        p.m = config.m_list[mi];
        for (std::size_t d = 0; d < config.draws; ++d) {
            const auto& dr = draws[mi * config.draws + d];
            p.estimates.push_back(dr.estimate);
            p.bounds.push_back(dr.bound);
            p.stocks.push_back(dr.stocks);
            p.max_weight = std::max(p.max_weight, dr.max_weight);
            p.within_bound = p.within_bound && dr.estimate <= dr.bound;
            p.mean_estimate += dr.estimate;
            p.mean_bound += dr.bound;
        }
        p.mean_estimate /= static_cast<double>(config.draws);
        p.mean_bound /= static_cast<double>(config.draws);
        if (!(p.mean_estimate > 0.0)) throw NumericalError("scan: zero quadratic variation estimate");
        lx.push_back(std::log(static_cast<double>(p.m)));
        ly.push_back(std::log(p.mean_estimate));
        res.points.push_back(std::move(p));
    }
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / static_cast<double>(lx.size());
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / static_cast<double>(ly.size());
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    if (!(sxx > 0.0)) throw UsageError("scan: M values must not all be equal");
    res.fitted_slope = sxy / sxx;
    return res;
}

// ---------------------------------------------------------------- names

std::string to_string(WeightFamily family) {
    switch (family) {
    case WeightFamily::EWI: return "EWI";
    case WeightFamily::HWI: return "HWI";
    case WeightFamily::Concentrated: return "concentrated";
    }
    return "EWI";
}

WeightFamily parse_weight_family(const std::string& text) {
    if (text == "EWI") return WeightFamily::EWI;
    if (text == "HWI") return WeightFamily::HWI;
    if (text == "concentrated") return WeightFamily::Concentrated;
    throw UsageError("unknown weight family '" + text + "'");
}

std::string to_string(Integrator integrator) {
    switch (integrator) {
    case Integrator::LogEuler: return "log-euler";
    case Integrator::Euler: return "euler";
    case Integrator::Milstein: return "milstein";
    }
    return "log-euler";
}

Integrator parse_integrator(const std::string& text) {
    if (text == "log-euler") return Integrator::LogEuler;
    if (text == "euler") return Integrator::Euler;
    if (text == "milstein") return Integrator::Milstein;
    throw UsageError("unknown integrator '" + text + "'");
}

} // namespace hwi
