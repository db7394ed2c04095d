#include "garchx/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <exception>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

namespace garchx {

namespace {

/// Neumaier compensated sum.
class CompensatedSum {
  public:
    void add(double v) noexcept {
        const double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v)) {
            comp_ += (sum_ - t) + v;
        } else {
            comp_ += (v - t) + sum_;
        }
        sum_ = t;
    }
    [[nodiscard]] double value() const noexcept { return sum_ + comp_; }

  private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

struct Cell {
    ScenarioConfig cfg;
    std::size_t first_task = 0;
};

AggregateRow aggregate(const ExperimentPlan& plan, const ScenarioConfig& cfg,
                       const std::vector<ReplicationOutcome>& outcomes) {
    AggregateRow row;
    row.scenario_id = cfg.scenario_id;
    row.n = cfg.n;
    row.shock = cfg.shock;
    row.d = cfg.spec.d;
    row.replications = plan.replications;

    CompensatedSum cs, is, ce, ie, recov, fdp;
    CompensatedSum bf, bn, bs, af, an, as;
    std::vector<CompensatedSum> freq(row.d);
    std::size_t ok = 0;
    for (const auto& o : outcomes) {
        if (!o.ok) {
            ++row.failures;
            continue;
        }
        ++ok;
        cs.add(static_cast<double>(o.metrics.corr_selected));
        is.add(static_cast<double>(o.metrics.incorr_selected));
        ce.add(static_cast<double>(o.metrics.corr_excluded));
        ie.add(static_cast<double>(o.metrics.incorr_excluded));
        recov.add(o.exact_recovery ? 1.0 : 0.0);
        fdp.add(o.fdp);
        bf.add(o.ic_full.bic);
        bn.add(o.ic_null.bic);
        bs.add(o.ic_selected.bic);
        af.add(o.ic_full.aic);
        an.add(o.ic_null.aic);
        as.add(o.ic_selected.aic);
        for (std::size_t k : o.selected) freq[k - 1].add(1.0);
    }
    row.flagged = static_cast<double>(row.failures) > 0.1 * static_cast<double>(plan.replications);
    row.freq.assign(row.d, 0.0);
    if (ok == 0) {
        row.flagged = true;
        return row;
    }
    const double m = static_cast<double>(ok);
    row.mean_metrics = {cs.value() / m, is.value() / m, ce.value() / m, ie.value() / m};
    row.exact_recovery_rate = recov.value() / m;
    row.mean_fdp = fdp.value() / m;
    row.ic_means = {bf.value() / m, bn.value() / m, bs.value() / m, af.value() / m, an.value() / m, as.value() / m};
    for (std::size_t k = 0; k < row.d; ++k) row.freq[k] = freq[k].value() / m;
    return row;
}

std::string fixed(double v, int digits) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(digits) << v;
    std::string s = out.str();
    if (s.starts_with("-") && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
    return s;
}

std::vector<std::string> split(const std::string& line, char delimiter) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, delimiter)) out.push_back(field);
    if (!line.empty() && line.back() == delimiter) out.emplace_back();
    return out;
}

const char* const kMetricNames[4] = {"corr. selected", "incorr. selected", "corr. excluded", "incorr. excluded"};

}  // namespace

void ExperimentPlan::validate() const {
    if (replications < 1) throw std::invalid_argument("empty plan: replications must be at least 1");
    if (sample_sizes.empty()) throw std::invalid_argument("empty plan: no sample sizes");
    if (shocks.empty()) throw std::invalid_argument("empty plan: no shock distributions");
    for (std::size_t i = 0; i < sample_sizes.size(); ++i) {
        if (sample_sizes[i] == 0) throw std::invalid_argument("sample sizes must be positive");
        if (i > 0 && sample_sizes[i] <= sample_sizes[i - 1]) {
            throw std::invalid_argument("sample sizes must be increasing");
        }
    }
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
    for (const auto& s : shocks) s.validate();
    ScenarioConfig probe = scenario;
    probe.n = sample_sizes.front();
    probe.validate();
    fit.validate();
}

std::uint64_t replication_seed(std::uint64_t master_seed, const ScenarioConfig& cell, std::size_t replication) {
    const std::uint64_t cell_id = derive_seed(
        static_cast<std::uint64_t>(cell.scenario_id),
        {cell.spec.p, cell.spec.q, cell.spec.d, cell.n, static_cast<std::uint64_t>(cell.shock.kind),
         std::bit_cast<std::uint64_t>(cell.shock.df), cell.shock.standardized ? 1ULL : 0ULL,
         static_cast<std::uint64_t>(cell.covgen.kind)});
    return derive_seed(master_seed, {cell_id, static_cast<std::uint64_t>(replication)});
}

ReplicationOutcome run_replication(const ScenarioConfig& cfg, double alpha, SelectionMethod method,
                                   const FitOptions& fit) {
    ReplicationOutcome out;
    try {
        const Dataset data = simulate_garchx(cfg);
        const VariableSelection vs = select_variables(cfg.spec, data, alpha, method, fit);
        if (!vs.full.converged) {
            out.error = "full-model fit did not converge: " + vs.full.message;
            return out;
        }
        const auto relevant = cfg.relevant_covariates();
        out.selected = vs.selection.selected;
        out.metrics = selection_metrics(out.selected, relevant, cfg.spec.d);
        out.ic_full = vs.ic_full;
        out.ic_null = vs.ic_null;
        out.ic_selected = vs.ic_selected;
        out.exact_recovery = out.selected == relevant;
        const std::size_t r = out.selected.size();
        out.fdp = static_cast<double>(out.metrics.incorr_selected) / static_cast<double>(std::max<std::size_t>(r, 1));
        out.ok = true;
    } catch (const NumericalError& e) {
        out.error = e.what();
    }
    return out;
}

std::vector<AggregateRow> run_experiment(const ExperimentPlan& plan) {
    plan.validate();

    std::vector<Cell> cells;
    for (const auto& shock : plan.shocks) {
        for (std::size_t n : plan.sample_sizes) {
            Cell cell{plan.scenario, cells.size() * plan.replications};
            cell.cfg.shock = shock;
            cell.cfg.n = n;
            cells.push_back(std::move(cell));
        }
    }
    const std::size_t tasks = cells.size() * plan.replications;
    std::vector<ReplicationOutcome> outcomes(tasks);

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        for (;;) {
            const std::size_t task = next.fetch_add(1);
            if (task >= tasks) return;
            const Cell& cell = cells[task / plan.replications];
            const std::size_t rep = task % plan.replications;
            try {
                ScenarioConfig cfg = cell.cfg;
                cfg.seed = replication_seed(plan.seed, cell.cfg, rep);
                outcomes[task] = run_replication(cfg, plan.alpha, plan.method, plan.fit);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(tasks);
            }
        }
    };

    std::size_t workers = plan.workers == 0 ? std::max(1u, std::thread::hardware_concurrency()) : plan.workers;
    workers = std::min(workers, tasks);
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    }
    if (failure) std::rethrow_exception(failure);

    std::vector<AggregateRow> rows;
    rows.reserve(cells.size());
    for (const Cell& cell : cells) {
        const auto begin = outcomes.begin() + static_cast<std::ptrdiff_t>(cell.first_task);
        const std::vector<ReplicationOutcome> slice(begin, begin + static_cast<std::ptrdiff_t>(plan.replications));
        rows.push_back(aggregate(plan, cell.cfg, slice));
    }
    return rows;
}

std::string format_tables(const std::vector<AggregateRow>& rows, char delimiter) {
    if (rows.empty()) throw std::invalid_argument("no rows to format");
    const char D = delimiter;

    // Group keys (scenario, d, shock) in order of first appearance.
    std::vector<std::tuple<int, std::size_t, std::string>> groups;
    std::vector<std::size_t> sizes;
    std::size_t max_d = 0;
    for (const auto& r : rows) {
        auto key = std::make_tuple(r.scenario_id, r.d, r.shock.label());
        if (std::find(groups.begin(), groups.end(), key) == groups.end()) groups.push_back(key);
        if (std::find(sizes.begin(), sizes.end(), r.n) == sizes.end()) sizes.push_back(r.n);
        max_d = std::max(max_d, r.d);
    }
    std::sort(sizes.begin(), sizes.end());

    auto find_row = [&](const std::tuple<int, std::size_t, std::string>& key, std::size_t n) -> const AggregateRow* {
        for (const auto& r : rows) {
            if (r.scenario_id == std::get<0>(key) && r.d == std::get<1>(key) && r.shock.label() == std::get<2>(key) &&
                r.n == n) {
                return &r;
            }
        }
        return nullptr;
    };
    auto prefix = [&](const AggregateRow& r) {
        std::ostringstream out;
        out << r.scenario_id << D << r.d << D << r.shock.label();
        return out.str();
    };

    std::ostringstream out;
    out << "# metrics\n" << "scenario" << D << "d" << D << "shock" << D << "metric";
    for (std::size_t n : sizes) out << D << "n=" << n;
    out << '\n';
    for (const auto& key : groups) {
        for (int m = 0; m < 4; ++m) {
            out << std::get<0>(key) << D << std::get<1>(key) << D << std::get<2>(key) << D << kMetricNames[m];
            for (std::size_t n : sizes) {
                out << D;
                if (const AggregateRow* r = find_row(key, n)) {
                    const MeanMetrics& mm = r->mean_metrics;
                    const double v[4] = {mm.corr_selected, mm.incorr_selected, mm.corr_excluded, mm.incorr_excluded};
                    out << fixed(v[m], 2);
                }
            }
            out << '\n';
        }
    }

    out << "\n# frequencies\n" << "scenario" << D << "d" << D << "shock" << D << "n";
    for (std::size_t k = 1; k <= max_d; ++k) out << D << 'X' << k;
    out << '\n';
    for (const auto& r : rows) {
        out << prefix(r) << D << r.n;
        for (std::size_t k = 0; k < max_d; ++k) {
            out << D;
            if (k < r.d) out << fixed(r.freq[k], 2);
        }
        out << '\n';
    }

    out << "\n# information criteria\n"
        << "scenario" << D << "d" << D << "shock" << D << "n" << D << "BIC full" << D << "BIC null" << D
        << "BIC selected" << D << "AIC full" << D << "AIC null" << D << "AIC selected\n";
    for (const auto& r : rows) {
        const IcMeans& ic = r.ic_means;
        out << prefix(r) << D << r.n << D << fixed(ic.bic_full, 1) << D << fixed(ic.bic_null, 1) << D
            << fixed(ic.bic_selected, 1) << D << fixed(ic.aic_full, 1) << D << fixed(ic.aic_null, 1) << D
            << fixed(ic.aic_selected, 1) << '\n';
    }

    out << "\n# summary\n"
        << "scenario" << D << "d" << D << "shock" << D << "n" << D << "replications" << D << "failures" << D
        << "flagged" << D << "exact recovery" << D << "mean FDP\n";
    for (const auto& r : rows) {
        out << prefix(r) << D << r.n << D << r.replications << D << r.failures << D << (r.flagged ? 1 : 0) << D
            << fixed(r.exact_recovery_rate, 3) << D << fixed(r.mean_fdp, 3) << '\n';
    }
    return out.str();
}

std::vector<AggregateRow> parse_tables(const std::string& text, char delimiter) {
    std::vector<AggregateRow> rows;
    auto row_for = [&](int scenario, std::size_t d, const std::string& shock, std::size_t n) -> AggregateRow& {
        const ShockDist dist = ShockDist::parse(shock);
        for (auto& r : rows) {
            if (r.scenario_id == scenario && r.d == d && r.shock == dist && r.n == n) return r;
        }
        AggregateRow r;
        r.scenario_id = scenario;
        r.d = d;
        r.shock = dist;
        r.n = n;
        r.freq.assign(d, 0.0);
        rows.push_back(std::move(r));
        return rows.back();
    };
    auto to_size = [](const std::string& s) { return static_cast<std::size_t>(std::stoull(s)); };

    std::istringstream in(text);
    std::string line, section;
    std::vector<std::string> header;
    bool expect_header = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line.starts_with("# ")) {
            section = line.substr(2);
            expect_header = true;
            continue;
        }
        auto f = split(line, delimiter);
        if (expect_header) {
            header = std::move(f);
            expect_header = false;
            continue;
        }
        if (f.size() != header.size()) throw std::invalid_argument("malformed table row: " + line);
        const int scenario = std::stoi(f[0]);
        const std::size_t d = to_size(f[1]);
        const std::string& shock = f[2];

        if (section == "metrics") {
            const auto it = std::find(std::begin(kMetricNames), std::end(kMetricNames), f[3]);
            if (it == std::end(kMetricNames)) throw std::invalid_argument("unknown metric: " + f[3]);
            const auto m = it - std::begin(kMetricNames);
            for (std::size_t c = 4; c < f.size(); ++c) {
                if (f[c].empty()) continue;
                AggregateRow& r = row_for(scenario, d, shock, to_size(header[c].substr(2)));
                const double v = std::stod(f[c]);
                double* slots[4] = {&r.mean_metrics.corr_selected, &r.mean_metrics.incorr_selected,
                                    &r.mean_metrics.corr_excluded, &r.mean_metrics.incorr_excluded};
                *slots[m] = v;
            }
        } else if (section == "frequencies") {
            AggregateRow& r = row_for(scenario, d, shock, to_size(f[3]));
            for (std::size_t k = 0; k < d; ++k) r.freq[k] = std::stod(f[4 + k]);
        } else if (section == "information criteria") {
            AggregateRow& r = row_for(scenario, d, shock, to_size(f[3]));
            r.ic_means = {std::stod(f[4]), std::stod(f[5]), std::stod(f[6]),
                          std::stod(f[7]), std::stod(f[8]), std::stod(f[9])};
        } else if (section == "summary") {
            AggregateRow& r = row_for(scenario, d, shock, to_size(f[3]));
            r.replications = to_size(f[4]);
            r.failures = to_size(f[5]);
            r.flagged = f[6] == "1";
            r.exact_recovery_rate = std::stod(f[7]);
            r.mean_fdp = std::stod(f[8]);
        } else {
            throw std::invalid_argument("unknown table section: " + section);
        }
    }
    return rows;
}

}  // namespace garchx
