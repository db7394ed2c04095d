#include "garchx/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

namespace garchx {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

/// Splits one record; double-quoted fields may contain the delimiter.
std::vector<std::string> split_record(const std::string& line, char delimiter) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                field.push_back('"');
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == delimiter) {
            out.push_back(trim(field));
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    out.push_back(trim(field));
    return out;
}

bool read_line(std::istream& in, std::string& line) {
    if (!std::getline(in, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
}

bool is_missing(const std::string& cell) {
    return cell.empty() || cell == "NA" || cell == "N/A" || cell == "#N/A" || cell == "NaN" || cell == "nan" ||
           cell == "null" || cell == ".";
}

std::optional<double> parse_number(const std::string& cell) {
    double v = 0.0;
    const char* first = cell.data();
    const char* last = first + cell.size();
    if (first != last && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::string format_number(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

std::string fixed(double v, int digits) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(digits) << v;
    return out.str();
}

json number(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

double get_number(const json& j) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    }
    throw std::invalid_argument("expected a number in structured input");
}

struct RawFile {
    fs::path path;
    std::vector<std::string> columns;  // value columns, date excluded
    std::map<std::string, std::vector<std::string>> rows;  // date -> cells
    std::map<std::string, std::size_t> line_of;             // date -> 1-based line
};

RawFile read_raw(const fs::path& path, const SeriesSchema& schema) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    RawFile raw;
    raw.path = path;
    std::string line;
    if (!read_line(in, line)) throw std::invalid_argument(path.string() + ": missing header row");
    if (line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
    const auto header = split_record(line, schema.delimiter);
    const auto date_it = std::find(header.begin(), header.end(), schema.date_column);
    if (date_it == header.end()) {
        throw std::invalid_argument(path.string() + ": no date column '" + schema.date_column + "'");
    }
    const auto date_idx = static_cast<std::size_t>(date_it - header.begin());
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c != date_idx) raw.columns.push_back(header[c]);
    }

    std::size_t lineno = 1;
    while (read_line(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto fields = split_record(line, schema.delimiter);
        if (fields.size() != header.size()) {
            std::ostringstream msg;
            msg << path.string() << ": line " << lineno << " has " << fields.size() << " fields, header has "
                << header.size();
            throw std::invalid_argument(msg.str());
        }
        std::string date;
        try {
            date = parse_iso_date(fields[date_idx]);
        } catch (const std::invalid_argument& e) {
            std::ostringstream msg;
            msg << path.string() << ": line " << lineno << ", column '" << schema.date_column << "': " << e.what();
            throw std::invalid_argument(msg.str());
        }
        if (raw.rows.contains(date)) {
            std::ostringstream msg;
            msg << path.string() << ": duplicate date " << date << " at line " << lineno;
            throw std::invalid_argument(msg.str());
        }
        fields.erase(fields.begin() + static_cast<std::ptrdiff_t>(date_idx));
        raw.rows.emplace(date, std::move(fields));
        raw.line_of.emplace(date, lineno);
    }
    return raw;
}

bool is_return_mode(CovariateTransform m) {
    return m == CovariateTransform::abs_log_return_x100 || m == CovariateTransform::squared_log_return_x100;
}

json params_json(const std::vector<ParameterRow>& rows) {
    json out = json::array();
    for (const auto& r : rows) {
        out.push_back({{"name", r.name},
                       {"estimate", number(r.estimate)},
                       {"std_error", number(r.std_error)},
                       {"t_stat", number(r.t_stat)},
                       {"at_boundary", r.at_boundary}});
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string parse_iso_date(const std::string& text) {
    const std::string s = trim(text);
    auto digits = [&](std::size_t pos, std::size_t len) {
        if (s.size() < pos + len) return -1;
        int v = 0;
        for (std::size_t i = pos; i < pos + len; ++i) {
            if (!std::isdigit(static_cast<unsigned char>(s[i]))) return -1;
            v = v * 10 + (s[i] - '0');
        }
        return v;
    };
    const int year = digits(0, 4);
    const int month = digits(5, 2);
    const int day = digits(8, 2);
    if (year < 0 || month < 1 || month > 12 || day < 1 || s.size() < 10 || s[4] != '-' || s[7] != '-') {
        throw std::invalid_argument("'" + text + "' is not an ISO-8601 date");
    }
    static constexpr int kDays[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    const bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
    const int max_day = kDays[month - 1] + (month == 2 && leap ? 1 : 0);
    if (day > max_day) throw std::invalid_argument("'" + text + "' is not a valid calendar date");
    if (s.size() > 10 && s[10] != 'T' && s[10] != ' ') {
        throw std::invalid_argument("'" + text + "' is not an ISO-8601 date");
    }
    return s;
}

SeriesTable ingest_csv(const fs::path& path, const SeriesSchema& schema) {
    return ingest_csv(std::vector<fs::path>{path}, schema);
}

SeriesTable ingest_csv(const std::vector<fs::path>& paths, const SeriesSchema& schema) {
    if (paths.empty()) throw std::invalid_argument("no input files");
    if (schema.target.empty()) throw std::invalid_argument("no target column given");

    std::vector<RawFile> files;
    files.reserve(paths.size());
    for (const auto& p : paths) files.push_back(read_raw(p, schema));

    // Column name -> (file, position in that file's cells).
    std::map<std::string, std::pair<std::size_t, std::size_t>> where;
    std::vector<std::string> order;
    for (std::size_t f = 0; f < files.size(); ++f) {
        for (std::size_t c = 0; c < files[f].columns.size(); ++c) {
            const auto& name = files[f].columns[c];
            if (!where.emplace(name, std::make_pair(f, c)).second) {
                throw std::invalid_argument("column '" + name + "' appears in more than one input");
            }
            order.push_back(name);
        }
    }
    if (!where.contains(schema.target)) throw std::invalid_argument("no target column '" + schema.target + "'");
    std::vector<std::string> covs = schema.covariates;
    if (covs.empty()) {
        for (const auto& name : order) {
            if (name != schema.target) covs.push_back(name);
        }
    }
    for (const auto& name : covs) {
        if (!where.contains(name)) throw std::invalid_argument("no covariate column '" + name + "'");
        if (name == schema.target) throw std::invalid_argument("the target cannot also be a covariate");
    }

    std::set<std::string> all_dates;
    for (const auto& f : files) {
        for (const auto& [date, cells] : f.rows) all_dates.insert(date);
    }

    SeriesTable table;
    table.target_name = schema.target;
    table.covariate_names = covs;
    table.rows_in = all_dates.size();
    for (const auto& p : paths) table.sources.push_back(p.string());

    std::vector<std::string> used{schema.target};
    used.insert(used.end(), covs.begin(), covs.end());
    std::vector<std::vector<double>> kept;

    for (const auto& date : all_dates) {
        const bool in_all = std::all_of(files.begin(), files.end(), [&](const RawFile& f) { return f.rows.contains(date); });
        if (!in_all) continue;
        std::vector<double> values;
        values.reserve(used.size());
        bool missing = false;
        for (const auto& name : used) {
            const auto [f, c] = where.at(name);
            const std::string& cell = files[f].rows.at(date)[c];
            if (is_missing(cell)) {
                missing = true;
                break;
            }
            const auto v = parse_number(cell);
            if (!v) {
                std::ostringstream msg;
                msg << files[f].path.string() << ": unparseable cell '" << cell << "' at line "
                    << files[f].line_of.at(date) << ", column '" << name << "'";
                throw std::invalid_argument(msg.str());
            }
            values.push_back(*v);
        }
        if (missing) {
            ++table.dropped_missing;
            continue;
        }
        table.dates.push_back(date);
        kept.push_back(std::move(values));
    }
    if (kept.empty()) throw std::invalid_argument("no complete rows on the intersection of input dates");

    table.dropped = table.rows_in - table.dates.size();
    table.target.resize(kept.size());
    table.covariates.resize(static_cast<Eigen::Index>(kept.size()), static_cast<Eigen::Index>(covs.size()));
    for (std::size_t r = 0; r < kept.size(); ++r) {
        table.target[r] = kept[r][0];
        for (std::size_t c = 0; c < covs.size(); ++c) {
            table.covariates(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = kept[r][c + 1];
        }
    }
    return table;
}

// ---------------------------------------------------------------------------

std::string to_string(CovariateTransform mode) {
    switch (mode) {
        case CovariateTransform::level: return "level";
        case CovariateTransform::level_scaled: return "level_scaled";
        case CovariateTransform::abs_log_return_x100: return "abs_log_return_x100";
        case CovariateTransform::squared_log_return_x100: return "squared_log_return_x100";
    }
    return "level_scaled";
}

CovariateTransform parse_covariate_transform(const std::string& name) {
    for (auto m : {CovariateTransform::level, CovariateTransform::level_scaled, CovariateTransform::abs_log_return_x100,
                   CovariateTransform::squared_log_return_x100}) {
        if (to_string(m) == name) return m;
    }
    throw std::invalid_argument("unknown covariate transform '" + name + "'");
}

PreparedSeries transform_series(const SeriesTable& table, const TransformOptions& opts) {
    const std::size_t rows = table.rows();
    const std::size_t d = table.covariate_names.size();

    std::vector<CovariateTransform> modes(d, opts.default_mode);
    for (const auto& [name, mode] : opts.per_column) {
        const auto it = std::find(table.covariate_names.begin(), table.covariate_names.end(), name);
        if (it == table.covariate_names.end()) throw std::invalid_argument("transform given for unknown column " + name);
        modes[static_cast<std::size_t>(it - table.covariate_names.begin())] = mode;
    }
    const bool any_return = std::any_of(modes.begin(), modes.end(), is_return_mode);

    auto log_price = [&](double v, const std::string& column, std::size_t r) {
        if (!(v > 0.0)) {
            std::ostringstream msg;
            msg << "nonpositive value " << v << " in column '" << column << "' on " << table.dates[r]
                << " cannot be log-transformed";
            throw std::invalid_argument(msg.str());
        }
        return std::log(v);
    };

    // First row whose return enters the sample: it needs a previous row for
    // the return itself (prices) and a complete covariate row before it.
    const std::size_t eps_from = opts.target == TargetKind::price ? 1 : 0;
    const std::size_t cov_from = any_return ? 1 : 0;
    const std::size_t first = std::max(eps_from, cov_from + 1);
    if (rows < first + 2) throw std::invalid_argument("too few rows after alignment");
    const std::size_t n = rows - first;

    PreparedSeries out;
    out.covariate_names = table.covariate_names;
    std::vector<double> eps(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = first + i;
        eps[i] = opts.target == TargetKind::price
                     ? 100.0 * (log_price(table.target[r], table.target_name, r) -
                                log_price(table.target[r - 1], table.target_name, r - 1))
                     : table.target[r];
    }
    double mean = 0.0;
    for (double e : eps) mean += e;
    mean /= static_cast<double>(n);
    for (double& e : eps) e -= mean;
    out.target_mean = mean;
    out.data.eps = std::move(eps);

    // Covariate rows first-1 .. rows-1; the first one is the presample row.
    RowMatrix cov(static_cast<Eigen::Index>(n + 1), static_cast<Eigen::Index>(d));
    for (std::size_t c = 0; c < d; ++c) {
        const auto cc = static_cast<Eigen::Index>(c);
        const std::string& name = table.covariate_names[c];
        for (std::size_t i = 0; i <= n; ++i) {
            const std::size_t r = first - 1 + i;
            const double level = table.covariates(static_cast<Eigen::Index>(r), cc);
            double v = level;
            if (is_return_mode(modes[c])) {
                const double prev = table.covariates(static_cast<Eigen::Index>(r - 1), cc);
                const double ret = 100.0 * (log_price(level, name, r) - log_price(prev, name, r - 1));
                v = modes[c] == CovariateTransform::abs_log_return_x100 ? std::abs(ret) : ret * ret;
            } else if (!(level >= 0.0)) {
                std::ostringstream msg;
                msg << "negative level " << level << " in covariate '" << name << "' on " << table.dates[r];
                throw std::invalid_argument(msg.str());
            }
            cov(static_cast<Eigen::Index>(i), cc) = v;
        }
        if (modes[c] == CovariateTransform::level_scaled) {
            const double m = cov.col(cc).mean();
            if (m > 0.0) cov.col(cc) /= m;
        }
    }
    out.data.presample_X.assign(cov.row(0).data(), cov.row(0).data() + d);
    out.data.X = cov.bottomRows(static_cast<Eigen::Index>(n));

    out.presample_x_date = table.dates[first - 1];
    out.eps_dates.assign(table.dates.begin() + static_cast<std::ptrdiff_t>(first), table.dates.end());
    out.x_dates = out.eps_dates;
    return out;
}

// ---------------------------------------------------------------------------

void write_dataset_csv(const fs::path& path, const Dataset& data, const std::vector<std::string>& names) {
    const std::size_t d = data.d();
    if (!names.empty() && names.size() != d) throw std::invalid_argument("covariate names do not match the dataset");
    std::ostringstream out;
    out << "t,eps";
    for (std::size_t k = 0; k < d; ++k) out << ',' << (names.empty() ? "X" + std::to_string(k + 1) : names[k]);
    out << '\n';

    const std::size_t pre_rows = std::max<std::size_t>(data.presample_eps2.size(), data.presample_X.empty() ? 0 : 1);
    for (std::size_t i = 0; i < pre_rows; ++i) {
        const long t = -static_cast<long>(pre_rows - 1 - i);
        out << t << ',';
        const std::size_t lag_from_end = pre_rows - 1 - i;
        if (lag_from_end < data.presample_eps2.size()) {
            out << format_number(std::sqrt(data.presample_eps2[data.presample_eps2.size() - 1 - lag_from_end]));
        }
        for (std::size_t k = 0; k < d; ++k) {
            out << ',';
            if (t == 0 && !data.presample_X.empty()) out << format_number(data.presample_X[k]);
        }
        out << '\n';
    }
    for (std::size_t t = 0; t < data.n(); ++t) {
        out << t + 1 << ',' << format_number(data.eps[t]);
        for (std::size_t k = 0; k < d; ++k) {
            out << ',' << format_number(data.X(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k)));
        }
        out << '\n';
    }
    write_text_file(path, out.str());
}

Dataset read_dataset_csv(const fs::path& path, std::vector<std::string>* names) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    if (!read_line(in, line)) throw std::invalid_argument(path.string() + ": missing header row");
    const auto header = split_record(line, ',');
    if (header.size() < 2 || header[0] != "t" || header[1] != "eps") {
        throw std::invalid_argument(path.string() + ": dataset header must start with t,eps");
    }
    const std::size_t d = header.size() - 2;
    if (names) names->assign(header.begin() + 2, header.end());

    Dataset data;
    std::vector<double> pre_eps2;
    bool pre_eps_complete = true;
    std::vector<std::vector<double>> xrows;
    long expected = std::numeric_limits<long>::min();
    std::size_t lineno = 1;
    while (read_line(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto f = split_record(line, ',');
        auto fail = [&](const std::string& what) {
            std::ostringstream msg;
            msg << path.string() << ": line " << lineno << ": " << what;
            throw std::invalid_argument(msg.str());
        };
        if (f.size() != header.size()) fail("wrong number of fields");
        long t = 0;
        const auto [ptr, ec] = std::from_chars(f[0].data(), f[0].data() + f[0].size(), t);
        if (ec != std::errc() || ptr != f[0].data() + f[0].size()) fail("bad time index");
        if (expected != std::numeric_limits<long>::min() && t != expected) fail("time index is not consecutive");
        expected = t + 1;

        if (t <= 0) {
            if (f[1].empty()) {
                pre_eps_complete = false;
            } else {
                const auto e = parse_number(f[1]);
                if (!e) fail("unparseable eps");
                pre_eps2.push_back(*e * *e);
            }
            if (t == 0 && d > 0 && !f[2].empty()) {
                for (std::size_t k = 0; k < d; ++k) {
                    const auto v = parse_number(f[2 + k]);
                    if (!v) fail("unparseable presample covariate");
                    data.presample_X.push_back(*v);
                }
            }
            continue;
        }
        const auto e = parse_number(f[1]);
        if (!e) fail("unparseable eps");
        data.eps.push_back(*e);
        std::vector<double> row(d);
        for (std::size_t k = 0; k < d; ++k) {
            const auto v = parse_number(f[2 + k]);
            if (!v) fail("unparseable covariate");
            row[k] = *v;
        }
        xrows.push_back(std::move(row));
    }
    if (pre_eps_complete) data.presample_eps2 = std::move(pre_eps2);
    data.X.resize(static_cast<Eigen::Index>(xrows.size()), static_cast<Eigen::Index>(d));
    for (std::size_t r = 0; r < xrows.size(); ++r) {
        for (std::size_t k = 0; k < d; ++k) data.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = xrows[r][k];
    }
    return data;
}

// ---------------------------------------------------------------------------

json to_json(const ModelSpec& spec) { return {{"p", spec.p}, {"q", spec.q}, {"d", spec.d}}; }

json to_json(const ScenarioConfig& cfg) {
    json theta = json::array();
    for (Eigen::Index i = 0; i < cfg.theta_true.flat().size(); ++i) theta.push_back(cfg.theta_true.flat()[i]);
    return {{"id", cfg.scenario_id},
            {"p", cfg.spec.p},
            {"q", cfg.spec.q},
            {"d", cfg.spec.d},
            {"theta", theta},
            {"shock", cfg.shock.label()},
            {"covariates",
             {{"kind", cfg.covgen.kind == CovariateKind::lognormal_ar1 ? "lognormal_ar1" : "abs_gaussian_expdecay"},
              {"ar_base", cfg.covgen.ar_base},
              {"ar_step", cfg.covgen.ar_step},
              {"decay", cfg.covgen.decay}}},
            {"n", cfg.n},
            {"burnin", cfg.burnin},
            {"seed", cfg.seed}};
}

json to_json(const FitOptions& opts) {
    return {{"tol", opts.tol},
            {"max_iter", opts.max_iter},
            {"multistart", opts.multistart},
            {"ridge", opts.ridge},
            {"seed", opts.seed},
            {"fourth_moment", opts.weight == FourthMomentWeight::fourth_minus_one ? "w4_minus_1" : "squared_deviation"}};
}

json to_json(const ExperimentPlan& plan) {
    json shocks = json::array();
    for (const auto& s : plan.shocks) shocks.push_back(s.label());
    return {{"schema_version", kSchemaVersion},
            {"seed", plan.seed},
            {"scenario", to_json(plan.scenario)},
            {"experiment",
             {{"sample_sizes", plan.sample_sizes},
              {"shocks", shocks},
              {"replications", plan.replications},
              {"alpha", plan.alpha},
              {"method", to_string(plan.method)},
              {"workers", plan.workers}}},
            {"fit", to_json(plan.fit)}};
}

ScenarioConfig scenario_from_json(const json& j) {
    const int id = j.value("id", 1);
    const std::size_t d = j.value("d", std::size_t{5});
    ShockDist shock = ShockDist::parse(j.value("shock", std::string("normal")));
    if (j.contains("standardize_t")) shock.standardized = j.at("standardize_t").get<bool>();
    const std::size_t n = j.value("n", std::size_t{1000});
    const std::uint64_t seed = j.value("seed", std::uint64_t{0});

    ScenarioConfig cfg;
    if (j.contains("theta")) {
        const std::size_t p = j.value("p", std::size_t{1});
        const std::size_t q = j.value("q", std::size_t{1});
        const auto values = j.at("theta").get<std::vector<double>>();
        const ModelSpec spec{p, q, d};
        cfg = ScenarioConfig::builtin(id, d == 5 || d == 8 ? d : 5, shock, n, seed);
        cfg.spec = spec;
        cfg.theta_true = ParamVector(spec, Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())));
        cfg.covgen.d = d;
    } else {
        cfg = ScenarioConfig::builtin(id, d, shock, n, seed);
    }
    cfg.burnin = j.value("burnin", cfg.burnin);
    if (j.contains("covariates")) {
        const json& c = j.at("covariates");
        if (c.contains("kind")) {
            const auto kind = c.at("kind").get<std::string>();
            if (kind == "lognormal_ar1") {
                cfg.covgen.kind = CovariateKind::lognormal_ar1;
            } else if (kind == "abs_gaussian_expdecay") {
                cfg.covgen.kind = CovariateKind::abs_gaussian_expdecay;
            } else {
                throw std::invalid_argument("unknown covariate generator '" + kind + "'");
            }
        }
        cfg.covgen.ar_base = c.value("ar_base", cfg.covgen.ar_base);
        cfg.covgen.ar_step = c.value("ar_step", cfg.covgen.ar_step);
        cfg.covgen.decay = c.value("decay", cfg.covgen.decay);
    }
    cfg.validate();
    return cfg;
}

FitOptions fit_options_from_json(const json& j) {
    FitOptions opts;
    opts.tol = j.value("tol", opts.tol);
    opts.max_iter = j.value("max_iter", opts.max_iter);
    opts.multistart = j.value("multistart", opts.multistart);
    opts.ridge = j.value("ridge", opts.ridge);
    opts.seed = j.value("seed", opts.seed);
    if (j.contains("fourth_moment")) {
        const auto w = j.at("fourth_moment").get<std::string>();
        if (w == "w4_minus_1") {
            opts.weight = FourthMomentWeight::fourth_minus_one;
        } else if (w == "squared_deviation") {
            opts.weight = FourthMomentWeight::squared_deviation;
        } else {
            throw std::invalid_argument("unknown fourth_moment weight '" + w + "'");
        }
    }
    opts.validate();
    return opts;
}

ExperimentPlan plan_from_json(const json& root) {
    ExperimentPlan plan;
    plan.seed = root.value("seed", plan.seed);
    plan.scenario = scenario_from_json(root.value("scenario", json::object()));
    plan.shocks = {plan.scenario.shock};
    if (root.contains("experiment")) {
        const json& e = root.at("experiment");
        plan.sample_sizes = e.value("sample_sizes", plan.sample_sizes);
        if (e.contains("shocks")) {
            plan.shocks.clear();
            for (const auto& s : e.at("shocks")) plan.shocks.push_back(ShockDist::parse(s.get<std::string>()));
        }
        plan.replications = e.value("replications", plan.replications);
        plan.alpha = e.value("alpha", plan.alpha);
        plan.method = parse_selection_method(e.value("method", std::string("by")));
        plan.workers = e.value("workers", plan.workers);
    }
    if (root.contains("fit")) plan.fit = fit_options_from_json(root.at("fit"));
    plan.validate();
    return plan;
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------

ReportFormat parse_report_format(const std::string& name) {
    if (name == "dsv") return ReportFormat::dsv;
    if (name == "structured") return ReportFormat::structured;
    throw std::invalid_argument("unknown report format '" + name + "' (expected dsv or structured)");
}

ModelSummary summarize_fit(const FitResult& fit, const std::string& label,
                           const std::vector<std::string>& covariate_names) {
    const ModelSpec& spec = fit.spec;
    if (covariate_names.size() != spec.d) throw std::invalid_argument("covariate names do not match the fit");
    ModelSummary m;
    m.label = label;
    m.p = spec.p;
    m.q = spec.q;
    m.covariates = covariate_names;
    m.n = fit.n;
    m.loglik = fit.loglik;
    const InfoCriteria ic = info_criteria(fit.loglik, spec.dim(), fit.n);
    m.aic = ic.aic;
    m.bic = ic.bic;
    m.converged = fit.converged;
    m.J_condition = fit.J_condition;

    auto names = ParamVector::names(spec);
    for (std::size_t k = 0; k < spec.d; ++k) names[spec.gamma_offset() + k] = "gamma:" + covariate_names[k];
    for (std::size_t i = 0; i < spec.dim(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        ParameterRow row;
        row.name = names[i];
        row.estimate = fit.theta_hat[i];
        const double var = fit.Sigma_hat(ii, ii);
        row.std_error = var > 0.0 ? std::sqrt(var / static_cast<double>(fit.n)) : 0.0;
        row.t_stat = row.std_error > 0.0 ? row.estimate / row.std_error : 0.0;
        row.at_boundary = fit.boundary_mask.at(i);
        m.params.push_back(std::move(row));
    }
    return m;
}

SelectionReport make_selection_report(const VariableSelection& vs, const std::vector<std::string>& covariate_names) {
    const ModelSpec& spec = vs.full.spec;
    if (covariate_names.size() != spec.d) throw std::invalid_argument("covariate names do not match the fit");
    SelectionReport r;
    r.method = to_string(vs.selection.method);
    r.alpha = vs.selection.alpha;
    r.n = vs.full.n;
    r.cutoff_index = vs.selection.cutoff_index;
    r.full = summarize_fit(vs.full, "full", covariate_names);
    r.null_model = summarize_fit(vs.null_fit, "null", {});
    std::vector<std::string> sel_names;
    for (std::size_t k : vs.selection.selected) sel_names.push_back(covariate_names[k - 1]);
    r.selected = sel_names;
    if (vs.selected_fit) r.selected_model = summarize_fit(*vs.selected_fit, "selected", sel_names);

    for (std::size_t k = 0; k < spec.d; ++k) {
        const TestReport& t = vs.selection.reports[k];
        CovariateRow row;
        row.index = k + 1;
        row.name = covariate_names[k];
        const ParameterRow& pr = r.full.params[spec.gamma_offset() + k];
        row.estimate = pr.estimate;
        row.std_error = pr.std_error;
        row.t_stat = t.t_stat;
        row.p_value = t.p_value;
        row.adjusted_p = vs.selection.adjusted_p[k];
        row.sigma_kk = t.sigma_kk;
        row.selected = std::find(vs.selection.selected.begin(), vs.selection.selected.end(), k + 1) !=
                       vs.selection.selected.end();
        r.covariates.push_back(std::move(row));
    }
    return r;
}

json to_json(const ModelSummary& m) {
    return {{"label", m.label},
            {"p", m.p},
            {"q", m.q},
            {"covariates", m.covariates},
            {"params", params_json(m.params)},
            {"n", m.n},
            {"loglik", number(m.loglik)},
            {"aic", number(m.aic)},
            {"bic", number(m.bic)},
            {"k_params", 1 + m.p + m.q + m.covariates.size()},
            {"converged", m.converged},
            {"J_condition", number(m.J_condition)}};
}

ModelSummary model_summary_from_json(const json& j) {
    ModelSummary m;
    m.label = j.at("label").get<std::string>();
    m.p = j.at("p").get<std::size_t>();
    m.q = j.at("q").get<std::size_t>();
    m.covariates = j.at("covariates").get<std::vector<std::string>>();
    for (const auto& p : j.at("params")) {
        m.params.push_back(ParameterRow{p.at("name").get<std::string>(), get_number(p.at("estimate")),
                                        get_number(p.at("std_error")), get_number(p.at("t_stat")),
                                        p.at("at_boundary").get<bool>()});
    }
    m.n = j.at("n").get<std::size_t>();
    m.loglik = get_number(j.at("loglik"));
    m.aic = get_number(j.at("aic"));
    m.bic = get_number(j.at("bic"));
    m.converged = j.at("converged").get<bool>();
    m.J_condition = get_number(j.at("J_condition"));
    return m;
}

json to_json(const SelectionReport& r) {
    json covs = json::array();
    for (const auto& c : r.covariates) {
        covs.push_back({{"index", c.index},
                        {"name", c.name},
                        {"estimate", number(c.estimate)},
                        {"std_error", number(c.std_error)},
                        {"t_stat", number(c.t_stat)},
                        {"p_value", number(c.p_value)},
                        {"adjusted_p", number(c.adjusted_p)},
                        {"sigma_kk", number(c.sigma_kk)},
                        {"selected", c.selected}});
    }
    json models = {{"full", to_json(r.full)}, {"null", to_json(r.null_model)}};
    models["selected"] = r.selected_model ? to_json(*r.selected_model) : json(nullptr);
    return {{"schema_version", r.schema_version},
            {"kind", "selection"},
            {"method", r.method},
            {"alpha", r.alpha},
            {"n", r.n},
            {"cutoff_index", r.cutoff_index},
            {"selected", r.selected},
            {"covariates", covs},
            {"models", models},
            {"information_criteria",
             {{"null", {{"aic", number(r.null_model.aic)}, {"bic", number(r.null_model.bic)}}},
              {"selected",
               {{"aic", number(r.selected_model ? r.selected_model->aic : r.null_model.aic)},
                {"bic", number(r.selected_model ? r.selected_model->bic : r.null_model.bic)}}},
              {"full", {{"aic", number(r.full.aic)}, {"bic", number(r.full.bic)}}}}},
            {"metadata", r.metadata}};
}

SelectionReport selection_report_from_json(const json& j) {
    SelectionReport r;
    r.schema_version = j.at("schema_version").get<int>();
    if (r.schema_version != kSchemaVersion) {
        throw std::invalid_argument("unsupported report schema version " + std::to_string(r.schema_version));
    }
    r.method = j.at("method").get<std::string>();
    r.alpha = j.at("alpha").get<double>();
    r.n = j.at("n").get<std::size_t>();
    r.cutoff_index = j.at("cutoff_index").get<std::size_t>();
    r.selected = j.at("selected").get<std::vector<std::string>>();
    for (const auto& c : j.at("covariates")) {
        r.covariates.push_back(CovariateRow{c.at("index").get<std::size_t>(), c.at("name").get<std::string>(),
                                            get_number(c.at("estimate")), get_number(c.at("std_error")),
                                            get_number(c.at("t_stat")), get_number(c.at("p_value")),
                                            get_number(c.at("adjusted_p")), get_number(c.at("sigma_kk")),
                                            c.at("selected").get<bool>()});
    }
    const json& models = j.at("models");
    r.full = model_summary_from_json(models.at("full"));
    r.null_model = model_summary_from_json(models.at("null"));
    if (!models.at("selected").is_null()) r.selected_model = model_summary_from_json(models.at("selected"));
    r.metadata = j.value("metadata", std::map<std::string, std::string>{});
    return r;
}

std::string to_dsv(const ModelSummary& m, char delimiter) {
    const char D = delimiter;
    std::ostringstream out;
    out << "# parameters: " << m.label << '\n'
        << "name" << D << "estimate" << D << "std_error" << D << "t_stat" << D << "at_boundary\n";
    for (const auto& p : m.params) {
        out << p.name << D << format_number(p.estimate) << D << format_number(p.std_error) << D
            << format_number(p.t_stat) << D << (p.at_boundary ? 1 : 0) << '\n';
    }
    return out.str();
}

std::string to_dsv(const SelectionReport& r, char delimiter) {
    const char D = delimiter;
    std::ostringstream out;
    std::string selected;
    for (std::size_t i = 0; i < r.selected.size(); ++i) selected += (i ? ";" : "") + r.selected[i];
    out << "# selection\n"
        << "method" << D << "alpha" << D << "n" << D << "cutoff_index" << D << "selected\n"
        << r.method << D << format_number(r.alpha) << D << r.n << D << r.cutoff_index << D
        << (selected.empty() ? "(none)" : selected) << "\n\n";

    out << "# covariates\n"
        << "index" << D << "name" << D << "estimate" << D << "std_error" << D << "t_stat" << D << "p_value" << D
        << "adjusted_p" << D << "sigma_kk" << D << "selected\n";
    for (const auto& c : r.covariates) {
        out << c.index << D << c.name << D << format_number(c.estimate) << D << format_number(c.std_error) << D
            << format_number(c.t_stat) << D << format_number(c.p_value) << D << format_number(c.adjusted_p) << D
            << format_number(c.sigma_kk) << D << (c.selected ? 1 : 0) << '\n';
    }

    out << "\n# information criteria\n"
        << "model" << D << "k_params" << D << "loglik" << D << "AIC" << D << "BIC\n";
    auto ic_row = [&](const ModelSummary& m) {
        out << m.label << D << 1 + m.p + m.q + m.covariates.size() << D << fixed(m.loglik, 1) << D << fixed(m.aic, 1)
            << D << fixed(m.bic, 1) << '\n';
    };
    ic_row(r.null_model);
    if (r.selected_model) ic_row(*r.selected_model);
    ic_row(r.full);

    out << '\n' << to_dsv(r.full, delimiter);
    if (r.selected_model) out << '\n' << to_dsv(*r.selected_model, delimiter);
    out << '\n' << to_dsv(r.null_model, delimiter);
    return out.str();
}

json to_json(const AggregateRow& row) {
    return {{"scenario", row.scenario_id},
            {"n", row.n},
            {"shock", row.shock.label()},
            {"d", row.d},
            {"replications", row.replications},
            {"failures", row.failures},
            {"flagged", row.flagged},
            {"mean_metrics",
             {{"corr_selected", row.mean_metrics.corr_selected},
              {"incorr_selected", row.mean_metrics.incorr_selected},
              {"corr_excluded", row.mean_metrics.corr_excluded},
              {"incorr_excluded", row.mean_metrics.incorr_excluded}}},
            {"freq", row.freq},
            {"ic_means",
             {{"bic_full", number(row.ic_means.bic_full)},
              {"bic_null", number(row.ic_means.bic_null)},
              {"bic_selected", number(row.ic_means.bic_selected)},
              {"aic_full", number(row.ic_means.aic_full)},
              {"aic_null", number(row.ic_means.aic_null)},
              {"aic_selected", number(row.ic_means.aic_selected)}}},
            {"exact_recovery_rate", row.exact_recovery_rate},
            {"mean_fdp", row.mean_fdp}};
}

AggregateRow aggregate_row_from_json(const json& j) {
    AggregateRow row;
    row.scenario_id = j.at("scenario").get<int>();
    row.n = j.at("n").get<std::size_t>();
    row.shock = ShockDist::parse(j.at("shock").get<std::string>());
    row.d = j.at("d").get<std::size_t>();
    row.replications = j.at("replications").get<std::size_t>();
    row.failures = j.at("failures").get<std::size_t>();
    row.flagged = j.at("flagged").get<bool>();
    const json& m = j.at("mean_metrics");
    row.mean_metrics = {m.at("corr_selected").get<double>(), m.at("incorr_selected").get<double>(),
                        m.at("corr_excluded").get<double>(), m.at("incorr_excluded").get<double>()};
    row.freq = j.at("freq").get<std::vector<double>>();
    const json& ic = j.at("ic_means");
    row.ic_means = {get_number(ic.at("bic_full")), get_number(ic.at("bic_null")), get_number(ic.at("bic_selected")),
                    get_number(ic.at("aic_full")), get_number(ic.at("aic_null")), get_number(ic.at("aic_selected"))};
    row.exact_recovery_rate = j.at("exact_recovery_rate").get<double>();
    row.mean_fdp = j.at("mean_fdp").get<double>();
    return row;
}

json experiment_results_to_json(const ExperimentPlan& plan, const std::vector<AggregateRow>& rows) {
    json cells = json::array();
    for (const auto& r : rows) cells.push_back(to_json(r));
    return {{"schema_version", kSchemaVersion}, {"kind", "montecarlo"}, {"plan", to_json(plan)}, {"rows", cells}};
}

std::vector<AggregateRow> experiment_rows_from_json(const json& j) {
    if (j.value("schema_version", 0) != kSchemaVersion) throw std::invalid_argument("unsupported results schema version");
    std::vector<AggregateRow> rows;
    for (const auto& r : j.at("rows")) rows.push_back(aggregate_row_from_json(r));
    return rows;
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

void emit_report(const SelectionReport& report, const fs::path& path, ReportFormat format) {
    write_text_file(path, format == ReportFormat::dsv ? to_dsv(report) : dump_json(to_json(report)));
}

SelectionReport read_selection_report(const fs::path& path) { return selection_report_from_json(read_json_file(path)); }

}  // namespace garchx
