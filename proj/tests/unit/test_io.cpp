#include "garchx/io.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

using namespace garchx;
namespace fs = std::filesystem;

namespace {

class TempDir {
  public:
    TempDir() {
        static int counter = 0;
        path_ = fs::temp_directory_path() / ("garchx_io_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    fs::path write(const std::string& name, const std::string& text) const {
        const fs::path p = path_ / name;
        std::ofstream(p) << text;
        return p;
    }
    fs::path operator/(const std::string& name) const { return path_ / name; }

  private:
    fs::path path_;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string date_of(int day) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "2021-%02d-%02d", 1 + day / 28, 1 + day % 28);
    return buf;
}

SeriesSchema schema_for(const std::string& target, std::vector<std::string> covs = {}) {
    SeriesSchema s;
    s.target = target;
    s.covariates = std::move(covs);
    return s;
}

VariableSelection small_selection(std::size_t n, std::uint64_t seed, bool null_gamma = false) {
    auto cfg = ScenarioConfig::builtin(1, 5, ShockDist::normal(), n, seed);
    if (null_gamma) {
        Eigen::VectorXd theta = cfg.theta_true.flat();
        theta.tail(5).setZero();
        cfg.theta_true = ParamVector(cfg.spec, theta);
    }
    return select_variables(cfg.spec, simulate_garchx(cfg));
}

const std::vector<std::string> kNames{"X1", "X2", "X3", "X4", "X5"};

}  // namespace

TEST_CASE("ISO dates") {
    CHECK(parse_iso_date("2020-02-29") == "2020-02-29");
    CHECK(parse_iso_date(" 2021-12-31 ") == "2021-12-31");
    CHECK(parse_iso_date("2021-03-04T10:00:00") == "2021-03-04T10:00:00");
    CHECK_THROWS_AS((void)parse_iso_date("2021-02-29"), std::invalid_argument);
    CHECK_THROWS_AS((void)parse_iso_date("2021-13-01"), std::invalid_argument);
    CHECK_THROWS_AS((void)parse_iso_date("03/04/2021"), std::invalid_argument);
    CHECK_THROWS_AS((void)parse_iso_date("2021-3-4"), std::invalid_argument);
    CHECK_THROWS_AS((void)parse_iso_date(""), std::invalid_argument);
}

TEST_CASE("ingest a well-formed file") {
    TempDir dir;
    const auto p = dir.write("a.csv", "date,SPX,A,B\n2021-01-05,101,1,2\n2021-01-04,100,1.5,2.5\n2021-01-06,102.5,2,3\n");
    const auto t = ingest_csv(p, schema_for("SPX"));
    CHECK(t.rows() == 3);
    CHECK(t.dates == std::vector<std::string>{"2021-01-04", "2021-01-05", "2021-01-06"});
    CHECK(t.target == std::vector<double>{100, 101, 102.5});
    CHECK(t.covariate_names == std::vector<std::string>{"A", "B"});
    CHECK(t.covariates(0, 1) == 2.5);
    CHECK(t.rows_in == 3);
    CHECK(t.dropped == 0);

    const auto only_b = ingest_csv(p, schema_for("SPX", {"B"}));
    CHECK(only_b.covariate_names == std::vector<std::string>{"B"});
}

TEST_CASE("rows with a missing cell are dropped and counted") {
    TempDir dir;
    const auto p = dir.write("a.csv", "date,SPX,A\n2021-01-04,100,1\n2021-01-05,101,\n2021-01-06,102,3\n2021-01-07,103,NA\n");
    const auto t = ingest_csv(p, schema_for("SPX"));
    CHECK(t.rows() == 2);
    CHECK(t.dropped == 2);
    CHECK(t.dropped_missing == 2);
    CHECK(t.rows_in == t.rows() + t.dropped);

    const auto one = dir.write("b.csv", "date,SPX,A\n2021-01-04,100,1\n2021-01-05,101,\n2021-01-06,102,3\n");
    CHECK(ingest_csv(one, schema_for("SPX")).dropped == 1);
    // A missing cell in an unused column does not drop the row.
    const auto unused = dir.write("c.csv", "date,SPX,A,B\n2021-01-04,100,1,\n2021-01-05,101,2,x\n2021-01-06,102,3,1\n");
    CHECK(ingest_csv(unused, schema_for("SPX", {"A"})).rows() == 3);
}

TEST_CASE("joining files keeps exactly the date intersection") {
    TempDir dir;
    Rng rng(12);
    for (int rep = 0; rep < 20; ++rep) {
        std::set<std::string> da, db;
        std::ostringstream fa, fb;
        fa << "date,SPX\n";
        fb << "date,C\n";
        for (int day = 0; day < 300; ++day) {
            if (rng.uniform() < 0.7) {
                fa << date_of(day) << ',' << 100 + day << '\n';
                da.insert(date_of(day));
            }
            if (rng.uniform() < 0.6) {
                fb << date_of(day) << ',' << 1 + day << '\n';
                db.insert(date_of(day));
            }
        }
        const auto pa = dir.write("a.csv", fa.str());
        const auto pb = dir.write("b.csv", fb.str());
        std::vector<std::string> common, all;
        std::set_intersection(da.begin(), da.end(), db.begin(), db.end(), std::back_inserter(common));
        std::set_union(da.begin(), da.end(), db.begin(), db.end(), std::back_inserter(all));

        const auto t = ingest_csv(std::vector<fs::path>{pa, pb}, schema_for("SPX"));
        CHECK(t.rows() == common.size());
        CHECK(t.dates == common);
        CHECK(t.rows_in == all.size());
        CHECK(t.rows_in == t.rows() + t.dropped);
        CHECK(std::is_sorted(t.dates.begin(), t.dates.end()));
        CHECK(std::adjacent_find(t.dates.begin(), t.dates.end()) == t.dates.end());
    }
}

TEST_CASE("ingestion errors") {
    TempDir dir;
    const auto bad_cell = dir.write("a.csv", "date,SPX,A\n2021-01-04,100,1\n2021-01-05,abc,2\n");
    CHECK_THROWS_WITH_AS((void)ingest_csv(bad_cell, schema_for("SPX")),
                         doctest::Contains("line 3, column 'SPX'"), std::invalid_argument);
    const auto dup = dir.write("b.csv", "date,SPX\n2021-01-04,100\n2021-01-04,101\n");
    CHECK_THROWS_WITH_AS((void)ingest_csv(dup, schema_for("SPX")), doctest::Contains("duplicate date"),
                         std::invalid_argument);
    const auto x = dir.write("c.csv", "date,SPX\n2021-01-04,100\n");
    const auto y = dir.write("d.csv", "date,C\n2021-01-05,100\n");
    CHECK_THROWS_WITH_AS((void)ingest_csv(std::vector<fs::path>{x, y}, schema_for("SPX")),
                         doctest::Contains("intersection"), std::invalid_argument);
    const auto bad_date = dir.write("e.csv", "date,SPX\n2021-01-32,100\n");
    CHECK_THROWS_AS((void)ingest_csv(bad_date, schema_for("SPX")), std::invalid_argument);
    const auto ragged = dir.write("f.csv", "date,SPX,A\n2021-01-04,100\n");
    CHECK_THROWS_AS((void)ingest_csv(ragged, schema_for("SPX")), std::invalid_argument);
    CHECK_THROWS_AS((void)ingest_csv(x, schema_for("NOPE")), std::invalid_argument);
    CHECK_THROWS_AS((void)ingest_csv(x, schema_for("SPX", {"B"})), std::invalid_argument);
    CHECK_THROWS_AS((void)ingest_csv(std::vector<fs::path>{x, x}, schema_for("SPX")), std::invalid_argument);
    CHECK_THROWS_AS((void)ingest_csv(dir / "missing.csv", schema_for("SPX")), std::runtime_error);
}

TEST_CASE("quoted fields, CRLF line ends and other delimiters") {
    TempDir dir;
    const auto p = dir.write("a.csv", "\"date\";\"SPX\";\"A\"\r\n2021-01-04;\"100\";1\r\n2021-01-05;101;2\r\n2021-01-06;102;3\r\n");
    SeriesSchema s = schema_for("SPX");
    s.delimiter = ';';
    const auto t = ingest_csv(p, s);
    CHECK(t.rows() == 3);
    CHECK(t.target[0] == 100.0);
}

TEST_CASE("target transform") {
    SeriesTable t;
    t.target_name = "P";
    t.dates = {"2021-01-01", "2021-01-02", "2021-01-03", "2021-01-04"};
    t.target = {100, 100, 100, 100};
    t.covariate_names = {"A"};
    t.covariates = RowMatrix::Ones(4, 1);
    SUBCASE("constant price gives zero returns") {
        const auto s = transform_series(t);
        CHECK(s.data.n() == 3);
        for (double e : s.data.eps) CHECK(e == 0.0);
    }
    SUBCASE("100 x log return before demeaning") {
        t.target = {100, 110, 121, 133.1};
        const auto s = transform_series(t);
        CHECK(s.target_mean == doctest::Approx(100.0 * std::log(1.1)).epsilon(1e-12));
        CHECK(s.target_mean == doctest::Approx(9.531).epsilon(1e-4));
        for (double e : s.data.eps) CHECK(std::abs(e) < 1e-12);
    }
    SUBCASE("demeaned returns") {
        t.target = {100, 110, 99, 120};
        const auto s = transform_series(t);
        double sum = 0.0;
        for (double e : s.data.eps) sum += e;
        CHECK(std::abs(sum) < 1e-12);
        CHECK(s.data.eps[0] + s.target_mean == doctest::Approx(100.0 * std::log(1.1)));
    }
    SUBCASE("nonpositive price") {
        t.target = {100, 0, 100, 100};
        CHECK_THROWS_WITH_AS((void)transform_series(t), doctest::Contains("2021-01-02"), std::invalid_argument);
    }
    SUBCASE("returns given directly") {
        t.target = {0.5, -0.5, 1.0, -1.0};
        TransformOptions opt;
        opt.target = TargetKind::returns;
        const auto s = transform_series(t, opt);
        CHECK(s.data.n() == 3);  // the first row only provides the presample covariates
        CHECK(s.data.eps[0] == doctest::Approx(-0.5 - (-0.5 + 1.0 - 1.0) / 3.0));
    }
}

TEST_CASE("covariate transforms and alignment") {
    SeriesTable t;
    t.target_name = "P";
    Rng rng(3);
    double price = 100.0, a = 50.0, b = 20.0;
    for (int day = 0; day < 60; ++day) {
        t.dates.push_back(date_of(day));
        price *= std::exp(0.01 * rng.normal());
        t.target.push_back(price);
    }
    t.covariate_names = {"A", "B"};
    t.covariates.resize(60, 2);
    for (Eigen::Index r = 0; r < 60; ++r) {
        a *= std::exp(0.02 * rng.normal());
        b *= std::exp(0.02 * rng.normal());
        t.covariates(r, 0) = a;
        t.covariates(r, 1) = b;
    }

    for (auto mode : {CovariateTransform::level, CovariateTransform::level_scaled,
                      CovariateTransform::abs_log_return_x100, CovariateTransform::squared_log_return_x100}) {
        TransformOptions opt;
        opt.default_mode = mode;
        const auto s = transform_series(t, opt);
        CAPTURE(to_string(mode));
        CHECK(s.data.X.minCoeff() >= 0.0);
        for (double v : s.data.presample_X) CHECK(v >= 0.0);
        REQUIRE(s.eps_dates.size() == s.data.n());
        // No look-ahead: X row t-1 (presample row for t = 0) predates eps[t].
        CHECK(s.presample_x_date < s.eps_dates[0]);
        for (std::size_t i = 1; i < s.data.n(); ++i) CHECK(s.x_dates[i - 1] < s.eps_dates[i]);
        CHECK(parse_covariate_transform(to_string(mode)) == mode);
    }

    TransformOptions lvl;
    lvl.default_mode = CovariateTransform::level;
    const auto level = transform_series(t, lvl);
    // eps[t] and X row t come from the same table row.
    const auto row = static_cast<Eigen::Index>(std::find(t.dates.begin(), t.dates.end(), level.eps_dates[5]) - t.dates.begin());
    CHECK(level.data.X(5, 1) == t.covariates(row, 1));
    CHECK(level.data.presample_X[0] == t.covariates(row - 6, 0));

    TransformOptions scaled;
    const auto sc = transform_series(t, scaled);
    Eigen::VectorXd col(static_cast<Eigen::Index>(sc.data.n() + 1));
    col[0] = sc.data.presample_X[0];
    col.tail(static_cast<Eigen::Index>(sc.data.n())) = sc.data.X.col(0);
    CHECK(col.mean() == doctest::Approx(1.0));

    TransformOptions ab, sq;
    ab.default_mode = CovariateTransform::abs_log_return_x100;
    sq.default_mode = CovariateTransform::squared_log_return_x100;
    const auto sa = transform_series(t, ab);
    const auto ss = transform_series(t, sq);
    CHECK(sa.eps_dates == ss.eps_dates);
    for (Eigen::Index r = 0; r < sa.data.X.rows(); ++r) {
        for (Eigen::Index k = 0; k < 2; ++k) {
            CHECK(ss.data.X(r, k) == doctest::Approx(sa.data.X(r, k) * sa.data.X(r, k)).epsilon(1e-12));
        }
    }

    TransformOptions mixed;
    mixed.per_column["B"] = CovariateTransform::abs_log_return_x100;
    const auto m = transform_series(t, mixed);
    CHECK(m.eps_dates == sa.eps_dates);
    CHECK(m.data.X.col(1) == sa.data.X.col(1));
    mixed.per_column["C"] = CovariateTransform::level;
    CHECK_THROWS_AS((void)transform_series(t, mixed), std::invalid_argument);

    t.covariates(10, 0) = -1.0;
    CHECK_THROWS_AS((void)transform_series(t, lvl), std::invalid_argument);
    CHECK_THROWS_AS((void)transform_series(t, ab), std::invalid_argument);
}

TEST_CASE("dataset files round trip exactly") {
    TempDir dir;
    for (int id : {1, 3}) {
        const auto data = simulate_garchx(ScenarioConfig::builtin(id, 5, ShockDist::student_t(5.0), 250, 8));
        const auto p = dir / ("d" + std::to_string(id) + ".csv");
        write_dataset_csv(p, data);
        std::vector<std::string> names;
        const auto back = read_dataset_csv(p, &names);
        CHECK(names == kNames);
        CHECK(back.eps == data.eps);
        CHECK(back.X == data.X);
        CHECK(back.presample_X == data.presample_X);
        REQUIRE(back.presample_eps2.size() == data.presample_eps2.size());
        for (std::size_t i = 0; i < back.presample_eps2.size(); ++i) {
            CHECK(back.presample_eps2[i] == doctest::Approx(data.presample_eps2[i]).epsilon(1e-15));
        }
    }
    Dataset bare;
    bare.eps = {0.1, 0.2, 0.3};
    bare.X = RowMatrix::Ones(3, 1);
    const auto p = dir / "bare.csv";
    write_dataset_csv(p, bare, {"vix"});
    CHECK(slurp(p).starts_with("t,eps,vix\n1,"));
    const auto back = read_dataset_csv(p);
    CHECK(back.presample_eps2.empty());
    CHECK(back.presample_X.empty());
    const auto broken = dir.write("broken.csv", "t,eps,X1\n1,0.1,1\n3,0.2,1\n");
    CHECK_THROWS_AS((void)read_dataset_csv(broken), std::invalid_argument);
}

TEST_CASE("configuration round trips") {
    const auto cfg = ScenarioConfig::builtin(4, 8, ShockDist::student_t(7.0), 1234, 99);
    const auto back = scenario_from_json(to_json(cfg));
    CHECK(back.scenario_id == 4);
    CHECK(back.spec == cfg.spec);
    CHECK(back.theta_true == cfg.theta_true);
    CHECK(back.shock == cfg.shock);
    CHECK(back.covgen == cfg.covgen);
    CHECK(back.n == cfg.n);
    CHECK(back.seed == cfg.seed);

    const auto minimal = scenario_from_json(json::parse(R"({"id": 2, "shock": "t5", "n": 700})"));
    CHECK(minimal.spec == ModelSpec{1, 1, 5});
    CHECK(minimal.shock == ShockDist::student_t(5.0));
    CHECK(minimal.covgen.kind == CovariateKind::abs_gaussian_expdecay);
    const auto raw = scenario_from_json(json::parse(R"({"shock": "t5", "standardize_t": false})"));
    CHECK_FALSE(raw.shock.standardized);
    const auto custom = scenario_from_json(
        json::parse(R"({"id": 1, "d": 2, "theta": [0.1, 0.1, 0.5, 0.2, 0.0], "covariates": {"ar_base": 0.5}})"));
    CHECK(custom.spec == ModelSpec{1, 1, 2});
    CHECK(custom.covgen.ar_base == 0.5);
    CHECK(custom.relevant_covariates() == std::vector<std::size_t>{1});
    CHECK_THROWS_AS((void)scenario_from_json(json::parse(R"({"theta": [0.1, 0.2]})")), std::invalid_argument);

    ExperimentPlan plan;
    plan.scenario = cfg;
    plan.sample_sizes = {500, 1000};
    plan.shocks = {ShockDist::normal(), ShockDist::student_t(5.0)};
    plan.replications = 7;
    plan.method = SelectionMethod::bonferroni;
    plan.fit.weight = FourthMomentWeight::squared_deviation;
    const auto pj = plan_from_json(to_json(plan));
    CHECK(pj.sample_sizes == plan.sample_sizes);
    CHECK(pj.shocks == plan.shocks);
    CHECK(pj.replications == 7);
    CHECK(pj.method == SelectionMethod::bonferroni);
    CHECK(pj.seed == plan.seed);
    CHECK(pj.fit.weight == FourthMomentWeight::squared_deviation);
    CHECK(dump_json(to_json(pj)) == dump_json(to_json(plan)));
    CHECK_THROWS_WITH_AS((void)plan_from_json(json::parse(R"({"experiment": {"replications": 0}})")),
                         doctest::Contains("empty plan"), std::invalid_argument);
    CHECK_THROWS_AS((void)fit_options_from_json(json::parse(R"({"fourth_moment": "other"})")), std::invalid_argument);
}

TEST_CASE("selection report contents") {
    const auto vs = small_selection(3000, 5);
    const auto r = make_selection_report(vs, kNames);
    CHECK(r.schema_version == kSchemaVersion);
    REQUIRE(r.covariates.size() == 5);
    for (std::size_t k = 0; k < 5; ++k) {
        CHECK(r.covariates[k].index == k + 1);
        CHECK(r.covariates[k].name == kNames[k]);
        CHECK(r.covariates[k].adjusted_p == vs.selection.adjusted_p[k]);
        CHECK(r.covariates[k].p_value == vs.selection.reports[k].p_value);
        const auto j = static_cast<Eigen::Index>(3 + k);
        CHECK(r.covariates[k].std_error == doctest::Approx(std::sqrt(vs.full.Sigma_hat(j, j) / 3000.0)));
    }
    CHECK(r.full.aic == doctest::Approx(vs.ic_full.aic));
    CHECK(r.null_model.bic == doctest::Approx(vs.ic_null.bic));
    REQUIRE(r.selected_model);
    CHECK(r.selected_model->bic == doctest::Approx(vs.ic_selected.bic));
    CHECK(r.full.params.size() == 8);
    CHECK(r.full.params[3].name == "gamma:X1");

    const std::string dsv = to_dsv(r);
    CHECK(dsv.find("# selection\n") == 0);
    CHECK(dsv.find("# covariates\n") != std::string::npos);
    CHECK(dsv.find("# information criteria\nmodel,k_params,loglik,AIC,BIC\nnull,3,") != std::string::npos);
    CHECK(dsv.find("# parameters: selected\n") != std::string::npos);
}

TEST_CASE("empty selection omits the selected-model block") {
    const auto vs = small_selection(1500, 2, true);
    REQUIRE(vs.selection.selected.empty());
    const auto r = make_selection_report(vs, kNames);
    CHECK_FALSE(r.selected_model);
    CHECK(r.selected.empty());
    const std::string dsv = to_dsv(r);
    CHECK(dsv.find("(none)") != std::string::npos);
    CHECK(dsv.find("# parameters: selected") == std::string::npos);
    CHECK(dsv.find("\nselected,") == std::string::npos);
    const json j = to_json(r);
    CHECK(j.at("models").at("selected").is_null());
    CHECK(j.at("selected").empty());
    CHECK(j.at("information_criteria").at("selected") == j.at("information_criteria").at("null"));
}

TEST_CASE("structured reports round trip through the reader") {
    TempDir dir;
    auto r = make_selection_report(small_selection(2000, 9), kNames);
    r.metadata["input"] = "sim.csv";
    const auto p = dir / "r.json";
    emit_report(r, p, ReportFormat::structured);
    const auto back = read_selection_report(p);
    CHECK(back == r);
    emit_report(back, dir / "again.json", ReportFormat::structured);
    CHECK(slurp(p) == slurp(dir / "again.json"));

    emit_report(r, dir / "r.csv", ReportFormat::dsv);
    CHECK(slurp(dir / "r.csv") == to_dsv(r));
    CHECK_THROWS_AS(emit_report(r, dir / "no" / "such" / "dir.json", ReportFormat::structured), std::runtime_error);
    CHECK(parse_report_format("dsv") == ReportFormat::dsv);
    CHECK_THROWS_AS((void)parse_report_format("xml"), std::invalid_argument);

    json bumped = to_json(r);
    bumped["schema_version"] = 99;
    CHECK_THROWS_AS((void)selection_report_from_json(bumped), std::invalid_argument);
}

TEST_CASE("Monte Carlo results round trip") {
    ExperimentPlan plan;
    plan.scenario = ScenarioConfig::builtin(1, 5, ShockDist::normal(), 300, 0);
    plan.sample_sizes = {300};
    plan.replications = 3;
    const auto rows = run_experiment(plan);
    const json j = experiment_results_to_json(plan, rows);
    CHECK(j.at("schema_version") == kSchemaVersion);
    const auto back = experiment_rows_from_json(json::parse(dump_json(j)));
    REQUIRE(back.size() == 1);
    CHECK(format_tables(back) == format_tables(rows));
    CHECK(back[0].freq == rows[0].freq);
    CHECK(back[0].ic_means.bic_full == rows[0].ic_means.bic_full);
}

TEST_CASE("end to end: identical inputs give byte-identical reports") {
    TempDir dir;
    const auto data = simulate_garchx(ScenarioConfig::builtin(2, 5, ShockDist::normal(), 2000, 4));
    write_dataset_csv(dir / "d.csv", data);
    for (int run = 0; run < 2; ++run) {
        const auto loaded = read_dataset_csv(dir / "d.csv");
        const auto vs = select_variables(ModelSpec{1, 1, 5}, loaded);
        emit_report(make_selection_report(vs, kNames), dir / ("run" + std::to_string(run) + ".json"),
                    ReportFormat::structured);
    }
    CHECK(slurp(dir / "run0.json") == slurp(dir / "run1.json"));
}
