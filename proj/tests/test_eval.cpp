#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <set>

#include "windfleet/artifacts.hpp"
#include "windfleet/eval.hpp"
#include "windfleet/metrics.hpp"

using namespace windfleet;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

std::vector<TurbineMeta> metas_at(const std::vector<std::pair<double, double>>& xy) {
    std::vector<TurbineMeta> out;
    for (std::size_t i = 0; i < xy.size(); ++i) {
        TurbineMeta m;
        m.id = "T" + std::to_string(i);
        m.capacity_kw = 10.0;
        m.utm_x = xy[i].first;
        m.utm_y = xy[i].second;
        out.push_back(m);
    }
    return out;
}

}  // namespace

TEST_CASE("regression_metrics exact and mean-predictor cases", "[eval]") {
    const std::vector<double> y{1.0, 2.0, 3.0, 4.0};
    const auto perfect = regression_metrics(y, y);
    CHECK(perfect.mse == 0.0);
    CHECK(perfect.rmse == 0.0);
    CHECK(perfect.mae == 0.0);
    CHECK(perfect.r2 == 1.0);
    CHECK(perfect.n_points == 4);

    const std::vector<double> mean_pred(4, 2.5);
    const auto base = regression_metrics(y, mean_pred);
    CHECK(base.r2 == Catch::Approx(0.0).margin(1e-15));

    CHECK_THROWS_AS(regression_metrics(y, std::vector<double>{1.0}), LengthMismatch);
    CHECK_THROWS_AS(regression_metrics(std::vector<double>{}, std::vector<double>{}), EmptyInput);
}

TEST_CASE("regression_metrics identities on random data", "[eval]") {
    Rng rng = make_rng(4000);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int rep = 0; rep < 10; ++rep) {
        std::vector<double> yt(100), yp(100);
        for (std::size_t i = 0; i < 100; ++i) {
            yt[i] = uni(rng);
            yp[i] = uni(rng);
        }
        const auto m = regression_metrics(yt, yp);
        CHECK(m.rmse * m.rmse == Catch::Approx(m.mse).margin(1e-12));
        CHECK(m.mae <= m.rmse + 1e-12);  // power-mean inequality
        CHECK(m.mse >= 0.0);
        CHECK(m.r2 <= 1.0);
    }
}

TEST_CASE("regression_metrics near-constant target collapses r2", "[eval]") {
    std::vector<double> yt(50), yp(50);
    Rng rng = make_rng(4001);
    std::normal_distribution<double> tiny(0.0, 1e-6);
    for (std::size_t i = 0; i < 50; ++i) {
        yt[i] = 0.5 + tiny(rng);
        yp[i] = yt[i] + 0.004;
    }
    const auto m = regression_metrics(yt, yp);
    CHECK(m.r2 < -1e5);  // the instability class behind huge negative scores
    CHECK(!m.degenerate_target);

    // exactly constant target: sentinel plus degenerate flag
    const std::vector<double> flat(10, 0.5);
    std::vector<double> off(10, 0.6);
    const auto d = regression_metrics(flat, off);
    CHECK(d.degenerate_target);
    CHECK(d.r2 == kDegenerateR2);
    const auto ok = regression_metrics(flat, flat);
    CHECK(ok.degenerate_target);
    CHECK(ok.r2 == 1.0);
}

TEST_CASE("geo_grouping fixed k yields exactly k groups", "[eval]") {
    Rng rng = make_rng(4100);
    std::uniform_real_distribution<double> uni(0.0, 1000.0);
    std::vector<std::pair<double, double>> xy;
    for (int i = 0; i < 40; ++i) xy.emplace_back(uni(rng), uni(rng));
    const auto g = geo_grouping(metas_at(xy), 7, 9);
    CHECK(g.k == 7);
    CHECK(g.method == "geo_fixed");
    std::set<int> distinct(g.labels.begin(), g.labels.end());
    CHECK(distinct.size() == 7);
    CHECK(*distinct.rbegin() == 6);
}

TEST_CASE("geo_grouping auto picks K by silhouette re-sweep", "[eval]") {
    Rng rng = make_rng(4200);
    std::normal_distribution<double> noise(0.0, 5.0);
    std::vector<std::pair<double, double>> xy;
    const double cx[] = {0.0, 500.0, 0.0};
    const double cy[] = {0.0, 0.0, 500.0};
    for (int b = 0; b < 3; ++b)
        for (int i = 0; i < 12; ++i) xy.emplace_back(cx[b] + noise(rng), cy[b] + noise(rng));

    const auto g = geo_grouping(metas_at(xy), std::nullopt, 77);
    CHECK(g.method == "geo_auto");
    CHECK(g.k == 3);
    for (std::size_t kk = 2; kk <= 10; ++kk) {
        const auto fixed = geo_grouping(metas_at(xy), kk, 77);
        if (fixed.k >= 2) CHECK(g.quality >= fixed.quality - 1e-12);
    }
}

TEST_CASE("geo_grouping degenerate single location", "[eval]") {
    std::vector<std::pair<double, double>> xy(8, {100.0, 200.0});
    const auto g = geo_grouping(metas_at(xy), std::nullopt, 5);
    CHECK(g.k == 1);
    for (int l : g.labels) CHECK(l == 0);
    const auto gf = geo_grouping(metas_at(xy), 4, 5);
    CHECK(gf.k == 1);
}

TEST_CASE("flat_fed_kmeans_grouping labels and determinism", "[eval]") {
    Rng rng = make_rng(4300);
    std::normal_distribution<double> noise(0.0, 0.2);
    Eigen::MatrixXd m(60, 6);
    for (int i = 0; i < 60; ++i)
        for (int j = 0; j < 6; ++j) m(i, j) = (i % 6) * 4.0 + noise(rng);

    FedKMeansConfig cfg;
    cfg.n_clients = 4;
    cfg.c_rounds = 4;
    cfg.seed = 31;
    const auto g = flat_fed_kmeans_grouping(m, 6, cfg);
    CHECK(g.method == "flat_fed_k");
    CHECK(g.k == 6);
    std::set<int> distinct(g.labels.begin(), g.labels.end());
    CHECK(distinct.size() == 6);

    const auto g2 = flat_fed_kmeans_grouping(m, 6, cfg);
    CHECK(g2.labels == g.labels);

    const auto g1 = flat_fed_kmeans_grouping(m, 1, cfg);
    CHECK(g1.k == 1);
}

TEST_CASE("pca explained variance and distance preservation", "[eval]") {
    // data confined to a 1-D subspace
    Eigen::MatrixXd line(30, 4);
    Rng rng = make_rng(4400);
    std::uniform_real_distribution<double> uni(-3.0, 3.0);
    Eigen::RowVector4d dir(1.0, -2.0, 0.5, 0.0);
    for (int i = 0; i < 30; ++i) line.row(i) = uni(rng) * dir;
    const auto p1 = pca_project(line, 1);
    CHECK(p1.explained_variance_ratio[0] == Catch::Approx(1.0).margin(1e-12));

    // full-dimensional projection is an isometry
    Eigen::MatrixXd data(40, 5);
    for (Eigen::Index i = 0; i < data.size(); ++i) data.data()[i] = uni(rng);
    const auto pf = pca_project(data, 5);
    for (int a = 0; a < 10; ++a)
        for (int b = a + 1; b < 10; ++b) {
            const double orig = (data.row(a) - data.row(b)).norm();
            const double proj = (pf.projected.row(a) - pf.projected.row(b)).norm();
            CHECK(proj == Catch::Approx(orig).margin(1e-9));
        }

    CHECK_THROWS_AS(pca_project(data, 6), DimsTooLarge);
}

TEST_CASE("pca reconstruction error equals the eigenvalue tail", "[eval]") {
    Rng rng = make_rng(4500);
    std::uniform_real_distribution<double> uni(-2.0, 2.0);
    Eigen::MatrixXd data(80, 6);
    for (Eigen::Index i = 0; i < data.size(); ++i) data.data()[i] = uni(rng);

    const auto p = pca_project(data, 3);
    const Eigen::RowVectorXd mean = data.colwise().mean();
    const Eigen::MatrixXd centered = data.rowwise() - mean;
    const Eigen::MatrixXd recon = p.projected * p.components.transpose();
    const double mse = (centered - recon).squaredNorm() / static_cast<double>(data.rows());
    double tail = 0.0;
    for (std::size_t j = 3; j < 6; ++j) tail += p.eigenvalues[j];
    CHECK(mse == Catch::Approx(tail).margin(1e-9));

    // components orthonormal, ratios bounded
    const Eigen::MatrixXd gram = p.components.transpose() * p.components;
    CHECK((gram - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-9);
    double sum = 0.0;
    for (double r : p.explained_variance_ratio) sum += r;
    CHECK(sum <= 1.0 + 1e-9);
}

TEST_CASE("adjusted_rand_index reference values and invariance", "[eval]") {
    const std::vector<int> a{0, 0, 1, 1};
    CHECK(adjusted_rand_index(a, a) == 1.0);
    const std::vector<int> renamed{5, 5, 2, 2};
    CHECK(adjusted_rand_index(a, renamed) == 1.0);
    const std::vector<int> alt{0, 1, 0, 1};
    CHECK(adjusted_rand_index(a, alt) == Catch::Approx(-0.5).margin(1e-12));

    Rng rng = make_rng(4600);
    std::uniform_int_distribution<int> lab(0, 3);
    std::vector<int> x(60), y(60);
    for (std::size_t i = 0; i < 60; ++i) {
        x[i] = lab(rng);
        y[i] = lab(rng);
    }
    const double base = adjusted_rand_index(x, y);
    std::vector<int> permuted(60);
    const int perm[] = {2, 3, 1, 0};
    for (std::size_t i = 0; i < 60; ++i) permuted[i] = perm[x[i]];
    CHECK(adjusted_rand_index(permuted, y) == Catch::Approx(base).margin(1e-12));
}

TEST_CASE("emit_report writes comparison rows and deterministic bytes", "[eval]") {
    auto dir = fs::temp_directory_path() / "windfleet_test_report";
    fs::remove_all(dir);

    ReportInputs in;
    for (int i = 0; i < 5; ++i) {
        MethodMetrics mm;
        mm.method = "method" + std::to_string(i);
        mm.n_groups = static_cast<std::size_t>(i + 1);
        mm.train.mse = 0.01 * (i + 1);
        mm.train.rmse = std::sqrt(mm.train.mse);
        mm.test.mse = 0.02 * (i + 1);
        mm.test.rmse = std::sqrt(mm.test.mse);
        in.methods.push_back(mm);
    }
    emit_report(in, dir.string());

    const std::string comparison = slurp(dir / "comparison.csv");
    std::size_t test_rows = 0, lines = 0;
    for (std::size_t pos = 0; (pos = comparison.find('\n', pos)) != std::string::npos; ++pos)
        ++lines;
    for (std::size_t pos = 0; (pos = comparison.find(",test,", pos)) != std::string::npos; ++pos)
        ++test_rows;
    CHECK(lines == 11);     // header + 5 methods x 2 splits
    CHECK(test_rows == 5);  // one test row per method
    CHECK(!fs::exists(dir / "forecast.csv"));  // no forecasts, no plots

    emit_report(in, (dir / "again").string());
    CHECK(slurp(dir / "again" / "comparison.csv") == comparison);
}

TEST_CASE("forecast csv and svg emission", "[eval]") {
    auto dir = fs::temp_directory_path() / "windfleet_test_svg";
    fs::remove_all(dir);

    ForecastTrajectory tr;
    tr.turbine_id = "T7";
    tr.mode = ForecastMode::teacher_forced;
    for (int i = 0; i < 24; ++i) {
        tr.timestamps.push_back(kSyntheticEpoch + i * 3600);
        tr.predicted_kw.push_back(5.0 + std::sin(i / 3.0));
        tr.measured_kw.push_back(5.2 + std::sin(i / 3.0 + 0.2));
    }
    ReportInputs in;
    in.forecasts.push_back(tr);
    emit_report(in, dir.string());
    CHECK(fs::exists(dir / "forecast.csv"));
    CHECK(fs::exists(dir / "forecast_T7_teacher_forced.svg"));
    const auto svg = slurp(dir / "forecast_T7_teacher_forced.svg");
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("polyline") != std::string::npos);
}
