#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cesdp/evaluate.hpp"
#include "cesdp/mdp.hpp"

namespace cesdp {

/// Missing, unreadable, or malformed files. Distinct from
/// std::invalid_argument (semantic validation) so the command line can map
/// the two to different exit codes.
struct io_error : std::runtime_error {
    explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

/// Shortest text form of a double that parses back to the same bits; used
/// everywhere a double is written so outputs are byte-stable across runs.
inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    // Trim to the shortest representation that still round-trips.
    for (int prec = 1; prec < 17; ++prec) {
        char probe[32];
        std::snprintf(probe, sizeof(probe), "%.*g", prec, v);
        if (std::strtod(probe, nullptr) == v) return probe;
    }
    return buf;
}

namespace detail {

/// Days since 1970-01-01 for a civil date (standard era-based conversion).
inline std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
    y -= m <= 2;
    const int era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097LL + static_cast<std::int64_t>(doe) - 719468;
}

inline bool parse_fixed_int(const std::string& s, std::size_t pos, std::size_t len,
                            int& out) {
    if (pos + len > s.size()) return false;
    int v = 0;
    for (std::size_t i = 0; i < len; ++i) {
        const char c = s[pos + i];
        if (c < '0' || c > '9') return false;
        v = v * 10 + (c - '0');
    }
    out = v;
    return true;
}

}  // namespace detail

/// Parse an ISO-8601 UTC timestamp (YYYY-MM-DDTHH:MM:SS with optional
/// trailing Z) to seconds since the epoch. Throws io_error on anything else.
inline std::int64_t parse_timestamp(const std::string& s) {
    int year, month, day, hour, minute, second;
    const bool shape_ok =
        detail::parse_fixed_int(s, 0, 4, year) && s.size() > 4 && s[4] == '-' &&
        detail::parse_fixed_int(s, 5, 2, month) && s.size() > 7 && s[7] == '-' &&
        detail::parse_fixed_int(s, 8, 2, day) && s.size() > 10 &&
        (s[10] == 'T' || s[10] == ' ') && detail::parse_fixed_int(s, 11, 2, hour) &&
        s.size() > 13 && s[13] == ':' && detail::parse_fixed_int(s, 14, 2, minute) &&
        s.size() > 16 && s[16] == ':' && detail::parse_fixed_int(s, 17, 2, second) &&
        (s.size() == 19 || (s.size() == 20 && s[19] == 'Z'));
    if (!shape_ok || month < 1 || month > 12 || day < 1 || day > 31 || hour > 23 ||
        minute > 59 || second > 60)
        throw io_error("bad timestamp '" + s + "'");
    return detail::days_from_civil(year, static_cast<unsigned>(month),
                                   static_cast<unsigned>(day)) *
               86400LL +
           hour * 3600LL + minute * 60LL + second;
}

/// A timestamped scalar series as read from disk.
struct TimeSeries {
    std::vector<std::int64_t> times;  ///< seconds since epoch, strictly ascending
    std::vector<double> values;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

inline double parse_double_field(const std::string& field, const std::string& path,
                                 std::size_t line_no) {
    const char* begin = field.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0')
        throw io_error(path + ":" + std::to_string(line_no) + ": bad number '" + field +
                       "'");
    return v;
}

}  // namespace detail

/// Read a `timestamp,value` CSV (one header line). Rows must be well-formed
/// and strictly increasing in time; errors carry the offending line number.
inline TimeSeries load_series(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open '" + path + "'");
    TimeSeries series;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 || line.empty()) continue;  // header / trailing blank
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != 2)
            throw io_error(path + ":" + std::to_string(line_no) +
                           ": expected 2 fields, got " + std::to_string(fields.size()));
        std::int64_t ts;
        try {
            ts = parse_timestamp(fields[0]);
        } catch (const io_error&) {
            throw io_error(path + ":" + std::to_string(line_no) + ": bad timestamp '" +
                           fields[0] + "'");
        }
        if (!series.times.empty() && ts <= series.times.back())
            throw io_error(path + ":" + std::to_string(line_no) +
                           ": timestamps not strictly increasing");
        series.times.push_back(ts);
        series.values.push_back(detail::parse_double_field(fields[1], path, line_no));
    }
    if (series.times.empty()) throw io_error(path + ": no data rows");
    return series;
}

/// Values of a series on a uniform stage grid starting at its first
/// timestamp. Samples already on the grid pass through unchanged; coarser or
/// irregular series are linearly interpolated.
inline std::vector<double> resample(const TimeSeries& series, unsigned stage_minutes) {
    if (stage_minutes == 0) throw std::invalid_argument("resample: zero stage length");
    const std::int64_t step = static_cast<std::int64_t>(stage_minutes) * 60;
    const std::int64_t first = series.times.front();
    const std::int64_t last = series.times.back();
    const auto n = static_cast<std::size_t>((last - first) / step) + 1;
    std::vector<double> out;
    out.reserve(n);
    std::size_t src = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::int64_t t = first + static_cast<std::int64_t>(i) * step;
        while (src + 1 < series.times.size() && series.times[src + 1] <= t) ++src;
        if (series.times[src] == t || src + 1 == series.times.size()) {
            out.push_back(series.values[src]);
        } else {
            const double span =
                static_cast<double>(series.times[src + 1] - series.times[src]);
            const double frac = static_cast<double>(t - series.times[src]) / span;
            out.push_back(series.values[src] * (1.0 - frac) +
                          series.values[src + 1] * frac);
        }
    }
    return out;
}

/// Read a `price_lo,price_hi,slope` CSV into a validated slope table.
inline SlopeTable load_slope_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open '" + path + "'");
    std::vector<SlopeBand> bands;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 || line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != 3)
            throw io_error(path + ":" + std::to_string(line_no) +
                           ": expected 3 fields, got " + std::to_string(fields.size()));
        SlopeBand band;
        band.price_lo = detail::parse_double_field(fields[0], path, line_no);
        band.price_hi = detail::parse_double_field(fields[1], path, line_no);
        band.slope = detail::parse_double_field(fields[2], path, line_no);
        bands.push_back(band);
    }
    if (bands.empty()) throw io_error(path + ": no data rows");
    return SlopeTable(std::move(bands));
}

/// Everything a run needs, as read from the JSON config document.
struct RunConfig {
    StorageSpec storage;
    double elasticity_community = 0.2;
    double elasticity_total = 0.5;
    double price_cap = 240.0;
    std::string slope_table_path;
    std::size_t stages = 1;
    unsigned stage_minutes = 5;
    std::size_t n_soc = 1;
    std::size_t n_res = 1;
    ObjectiveMode objective = ObjectiveMode::welfare_max;
    double chain_alpha = 1.0;
    double forecast_sigma = 0.0;
    std::uint64_t seed = 1;
    std::string prices_path;
    std::string load_path;
    std::string renewable_path;
};

inline ObjectiveMode parse_objective(const std::string& name) {
    if (name == "price_taker") return ObjectiveMode::price_taker;
    if (name == "profit_max") return ObjectiveMode::profit_max;
    if (name == "welfare_max") return ObjectiveMode::welfare_max;
    throw std::invalid_argument("unknown objective '" + name + "'");
}

namespace detail {

/// Interpret `path` relative to the directory containing `base_file`.
inline std::string resolve_path(const std::string& base_file, const std::string& path) {
    if (path.empty() || path.front() == '/') return path;
    const auto slash = base_file.find_last_of('/');
    if (slash == std::string::npos) return path;
    return base_file.substr(0, slash + 1) + path;
}

}  // namespace detail

/// Load and validate the JSON run configuration. File paths inside the
/// config are resolved relative to the config file's own directory.
inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw io_error(path + ": bad JSON: " + e.what());
    }
    RunConfig cfg;
    try {
        const auto& storage = j.at("storage");
        cfg.storage.capacity = storage.at("capacity_mwh").get<double>();
        cfg.storage.eta_c = storage.at("eta_c").get<double>();
        cfg.storage.eta_d = storage.at("eta_d").get<double>();
        cfg.storage.x_init = storage.at("x_init_mwh").get<double>();
        const auto& market = j.at("market");
        cfg.elasticity_community = market.at("elasticity_community").get<double>();
        cfg.elasticity_total = market.at("elasticity_total").get<double>();
        cfg.price_cap = market.at("price_cap_usd").get<double>();
        cfg.slope_table_path =
            detail::resolve_path(path, market.at("slope_table").get<std::string>());
        const auto& horizon = j.at("horizon");
        cfg.stages = horizon.at("stages").get<std::size_t>();
        cfg.stage_minutes = horizon.at("stage_minutes").get<unsigned>();
        const auto& grid = j.at("grid");
        cfg.n_soc = grid.at("n_soc").get<std::size_t>();
        cfg.n_res = grid.at("n_res").get<std::size_t>();
        cfg.objective = parse_objective(j.at("objective").get<std::string>());
        cfg.chain_alpha = j.value("chain_alpha", 1.0);
        cfg.forecast_sigma = j.value("forecast_sigma", 0.0);
        cfg.seed = j.value("seed", std::uint64_t{1});
        const auto& data = j.at("data");
        cfg.prices_path = detail::resolve_path(path, data.at("prices").get<std::string>());
        cfg.load_path = detail::resolve_path(path, data.at("load").get<std::string>());
        cfg.renewable_path =
            detail::resolve_path(path, data.at("renewable").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(path + ": config field error: " + e.what());
    }
    return cfg;
}

/// An instance plus the full-resolution series it was built from (the study
/// commands need more than the first horizon's worth of data).
struct AssembledProblem {
    MdpInstance instance;
    std::vector<double> prices;
    std::vector<double> load;
    std::vector<double> renewable;
    RunConfig config;
    std::size_t clamped_slopes = 0;  ///< forecasts outside the slope table
};

/// Build the solver instance from a config: read and resample the three
/// series, resolve per-stage slopes, and estimate the renewable chain from
/// the full renewable history.
inline AssembledProblem assemble(const RunConfig& cfg) {
    AssembledProblem out;
    out.config = cfg;
    out.prices = resample(load_series(cfg.prices_path), cfg.stage_minutes);
    out.load = resample(load_series(cfg.load_path), cfg.stage_minutes);
    out.renewable = resample(load_series(cfg.renewable_path), cfg.stage_minutes);
    if (out.prices.size() != out.load.size() ||
        out.prices.size() != out.renewable.size())
        throw std::invalid_argument(
            "assemble: price/load/renewable series lengths differ (" +
            std::to_string(out.prices.size()) + "/" + std::to_string(out.load.size()) +
            "/" + std::to_string(out.renewable.size()) + ")");
    if (out.prices.size() < cfg.stages)
        throw std::invalid_argument("assemble: series shorter than the horizon");

    MdpInstance& inst = out.instance;
    inst.spec = cfg.storage;
    inst.mode = cfg.objective;
    inst.mp.demand.max_load = out.load.front();
    inst.mp.demand.elasticity = cfg.elasticity_community;
    inst.mp.demand.price_cap = cfg.price_cap;
    inst.mp.slope_table = load_slope_table(cfg.slope_table_path);
    inst.mp.elasticity_total = cfg.elasticity_total;
    inst.n_soc = cfg.n_soc;
    inst.chain = estimate_chain(out.renewable, cfg.n_res, cfg.chain_alpha);
    inst.re_init = inst.chain.bin_of(out.renewable.front());
    inst.stages.resize(cfg.stages);
    for (std::size_t t = 0; t < cfg.stages; ++t) {
        bool clamped = false;
        inst.stages[t].p0_forecast = out.prices[t];
        inst.stages[t].h = inst.mp.slope_table.lookup(out.prices[t], clamped);
        inst.stages[t].max_load = out.load[t];
        if (clamped) ++out.clamped_slopes;
    }
    inst.validate();
    return out;
}

namespace detail {

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write '" + path + "'");
    return out;
}

}  // namespace detail

/// Write a policy as `t,x_index,re_index,u_mwh,w_mwh` (stages 1-based).
inline void save_policy_csv(const std::string& path, const PolicyTable& policy) {
    auto out = detail::open_out(path);
    out << "t,x_index,re_index,u_mwh,w_mwh\n";
    for (std::size_t t = 0; t < policy.horizon(); ++t)
        for (std::size_t i = 0; i < policy.a[t].front().size(); ++i)
            for (std::size_t k = 0; k < policy.a[t].size(); ++k) {
                const Action& a = policy.a[t][k][i];
                out << (t + 1) << ',' << i << ',' << k << ',' << fmt_double(a.u()) << ','
                    << fmt_double(a.w()) << '\n';
            }
}

/// Read a policy written by save_policy_csv; value round-trip is bit-exact.
inline PolicyTable load_policy_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open '" + path + "'");
    std::string line;
    std::size_t line_no = 0;
    std::size_t T = 0, nx = 0, nk = 0;
    struct Row {
        std::size_t t, i, k;
        double u, w;
    };
    std::vector<Row> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 || line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != 5)
            throw io_error(path + ":" + std::to_string(line_no) +
                           ": expected 5 fields, got " + std::to_string(fields.size()));
        Row r;
        r.t = static_cast<std::size_t>(
            detail::parse_double_field(fields[0], path, line_no));
        r.i = static_cast<std::size_t>(
            detail::parse_double_field(fields[1], path, line_no));
        r.k = static_cast<std::size_t>(
            detail::parse_double_field(fields[2], path, line_no));
        r.u = detail::parse_double_field(fields[3], path, line_no);
        r.w = detail::parse_double_field(fields[4], path, line_no);
        if (r.t == 0) throw io_error(path + ":" + std::to_string(line_no) + ": stage 0");
        T = std::max(T, r.t);
        nx = std::max(nx, r.i + 1);
        nk = std::max(nk, r.k + 1);
        rows.push_back(r);
    }
    if (rows.empty()) throw io_error(path + ": no data rows");
    PolicyTable policy;
    policy.a.assign(T, std::vector<std::vector<Action>>(nk, std::vector<Action>(nx)));
    for (const Row& r : rows) policy.a[r.t - 1][r.k][r.i] = Action{r.u - r.w};
    return policy;
}

/// Write a value table as `t,x_index,re_index,value_usd` (stages 1-based).
inline void save_value_csv(const std::string& path, const ValueTable& values) {
    auto out = detail::open_out(path);
    out << "t,x_index,re_index,value_usd\n";
    for (std::size_t t = 0; t < values.horizon(); ++t)
        for (std::size_t i = 0; i < values.v[t].front().size(); ++i)
            for (std::size_t k = 0; k < values.v[t].size(); ++k)
                out << (t + 1) << ',' << i << ',' << k << ','
                    << fmt_double(values.v[t][k][i]) << '\n';
}

/// Write per-stage marginal-value curves as
/// `t,re_index,x_mwh,marginal_usd_per_mwh`.
inline void save_curves_csv(const std::string& path,
                            const std::vector<std::vector<MarginalCurve>>& curves) {
    auto out = detail::open_out(path);
    out << "t,re_index,x_mwh,marginal_usd_per_mwh\n";
    for (std::size_t t = 0; t < curves.size(); ++t)
        for (std::size_t k = 0; k < curves[t].size(); ++k) {
            const MarginalCurve& c = curves[t][k];
            for (std::size_t i = 0; i < c.levels.size(); ++i)
                out << (t + 1) << ',' << k << ',' << fmt_double(c.levels[i]) << ','
                    << fmt_double(c.values[i]) << '\n';
        }
}

/// Serialize an estimated chain (edges, representative values, transitions).
inline void save_chain_json(const std::string& path, const RenewableChain& chain) {
    nlohmann::json j;
    j["bin_edges"] = chain.bin_edges;
    j["bin_values"] = chain.bin_values;
    j["transition"] = chain.transition;
    auto out = detail::open_out(path);
    out << j.dump(2) << '\n';
}

inline RenewableChain load_chain_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw io_error(path + ": bad JSON: " + e.what());
    }
    RenewableChain chain;
    try {
        chain.bin_edges = j.at("bin_edges").get<std::vector<double>>();
        chain.bin_values = j.at("bin_values").get<std::vector<double>>();
        chain.transition = j.at("transition").get<std::vector<std::vector<double>>>();
    } catch (const nlohmann::json::exception& e) {
        throw io_error(path + ": chain field error: " + e.what());
    }
    chain.validate();
    return chain;
}

/// Write a simulated trajectory, one row per stage.
inline void save_trajectory_csv(const std::string& path, const Trajectory& traj,
                                const RenewableChain& chain) {
    auto out = detail::open_out(path);
    out << "t,x_mwh,re_bin,re_mwh,u_mwh,w_mwh,p_ante_usd,p_post_usd,arbitrage_usd,"
           "welfare_usd\n";
    for (const TrajectoryStage& s : traj.stages)
        out << (s.t + 1) << ',' << fmt_double(s.x) << ',' << s.re_bin << ','
            << fmt_double(chain.bin_values[s.re_bin]) << ',' << fmt_double(s.u) << ','
            << fmt_double(s.w) << ',' << fmt_double(s.p_ante) << ','
            << fmt_double(s.p_post) << ',' << fmt_double(s.arbitrage) << ','
            << fmt_double(s.welfare) << '\n';
}

/// Write the three-case comparison, one row per objective mode.
inline void save_compare_csv(const std::string& path,
                             const std::vector<ValueReport>& reports) {
    auto out = detail::open_out(path);
    out << "case,objective,planned_usd,arbitrage_usd,welfare_usd,total_usd,mc_mean_usd,"
           "mc_stderr_usd,mc_paths\n";
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const ValueReport& r = reports[i];
        out << (i + 1) << ',' << to_string(r.mode) << ',' << fmt_double(r.planned) << ','
            << fmt_double(r.arbitrage) << ',' << fmt_double(r.welfare) << ','
            << fmt_double(r.total) << ',' << fmt_double(r.mc_mean) << ','
            << fmt_double(r.mc_stderr) << ',' << r.mc_paths << '\n';
    }
}

/// Write solver timings and values per grid size.
inline void save_benchmark_csv(const std::string& path,
                               const std::vector<BenchmarkRow>& rows) {
    auto out = detail::open_out(path);
    out << "n_soc,sdp_ms,sdp_value_usd,threshold_ms,threshold_value_usd\n";
    for (const BenchmarkRow& r : rows)
        out << r.n_soc << ',' << fmt_double(r.sdp_ms) << ',' << fmt_double(r.sdp_value)
            << ',' << fmt_double(r.threshold_ms) << ',' << fmt_double(r.threshold_value)
            << '\n';
}

/// Write the capacity curve with per-segment slopes and both break-even
/// readings (slope crossing and exhaustive argmax).
inline void save_capacity_csv(const std::string& path, const CapacityCurve& curve) {
    auto out = detail::open_out(path);
    out << "capacity_mwh,value_usd,slope_to_next\n";
    for (std::size_t i = 0; i < curve.capacities.size(); ++i) {
        out << fmt_double(curve.capacities[i]) << ',' << fmt_double(curve.values[i])
            << ',';
        if (i < curve.slopes.size()) out << fmt_double(curve.slopes[i]);
        out << '\n';
    }
}

/// Write the periodicity study matrix, one row per (cycle length, start level).
inline void save_periodicity_csv(const std::string& path, const PeriodicityStudy& study) {
    auto out = detail::open_out(path);
    out << "horizon_stages,x_init_mwh,value_per_quarter_day_usd\n";
    for (std::size_t r = 0; r < study.horizons.size(); ++r)
        for (std::size_t c = 0; c < study.x_inits.size(); ++c)
            out << study.horizons[r] << ',' << fmt_double(study.x_inits[c]) << ','
                << fmt_double(study.quarter_day_value[r][c]) << '\n';
}

}  // namespace cesdp
