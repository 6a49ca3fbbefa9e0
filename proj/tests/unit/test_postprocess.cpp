#include "mdmt/postprocess.hpp"
#include "oracles/elbow_oracle.hpp"
#include "unit/helpers.hpp"

#include <doctest.h>

#include <numeric>
#include <set>

using namespace mdmt;

namespace {

std::vector<std::string> names(std::size_t d)
{
    std::vector<std::string> out;
    for (std::size_t j = 0; j < d; ++j) out.push_back("f" + std::to_string(j + 1));
    return out;
}

FeatureReport report_with(const std::vector<std::string>& universe, const std::vector<std::string>& selected)
{
    FeatureReport r;
    r.universe = universe;
    r.selected = selected;
    return r;
}

} // namespace

TEST_SUITE("postprocess") {

TEST_CASE("elbow examples")
{
    const std::vector<double> curve{10, 9, 8, 1, 0.9, 0.8};
    const auto knee = elbow_point(curve);
    const auto ref = oracle::brute_force_elbow(curve);
    CHECK(knee.index == ref.index);
    CHECK(knee.value == ref.value);
    CHECK(knee.value == 1);  // first point past the drop

    const std::vector<double> flat(4, 5.0);
    CHECK(elbow_threshold(flat) == 5.0);
    const std::vector<double> ramp{1, 2, 3, 4, 5};
    CHECK(elbow_point(ramp).index == 4);
    CHECK(elbow_threshold(ramp) == 1.0);
    const std::vector<double> fine_ramp{0.5, 0.4, 0.3, 0.2, 0.1};
    CHECK(elbow_threshold(fine_ramp) == 0.1);

    CHECK_THROWS_AS(elbow_threshold(std::vector<double>{1.0}), Error);
    CHECK_THROWS_AS(elbow_threshold(std::vector<double>{1.0, std::nan("")}), Error);
}

TEST_CASE("elbow agrees with the exhaustive oracle on random curves")
{
    Rng rng(99);
    std::uniform_int_distribution<int> len(2, 60);
    std::exponential_distribution<double> expo(1.0);
    for (int t = 0; t < 200; ++t) {
        std::vector<double> v(static_cast<std::size_t>(len(rng)));
        for (auto& x : v) x = t % 2 ? expo(rng) : std::pow(expo(rng), 3.0);
        const auto ref = oracle::brute_force_elbow(v);
        CHECK(elbow_point(v).index == ref.index);
        CHECK(elbow_threshold(v) == ref.value);
    }
}

TEST_CASE("per-run selection on one run")
{
    const std::vector<std::vector<double>> masks{{1.0, 0.9, 0.01, 0.005}};
    const auto sel = per_run_selection(masks);
    const auto ref = oracle::brute_force_elbow({1.0, 0.9, 0.01, 0.005});
    CHECK(sel.weight_threshold == ref.value);
    std::vector<std::size_t> expect;
    for (std::size_t j = 0; j < 4; ++j)
        if (masks[0][j] >= ref.value) expect.push_back(j);
    CHECK(sel.selected[0] == expect);
    CHECK(sel.selected[0] == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("per-run selection properties")
{
    Rng rng(4);
    std::normal_distribution<double> n(0, 1);
    std::vector<std::vector<double>> masks(5, std::vector<double>(30));
    for (auto& m : masks)
        for (std::size_t j = 0; j < m.size(); ++j) m[j] = (j < 4 ? 3.0 : 0.2) * n(rng);

    const std::vector<std::vector<double>> twins{masks[0], masks[0]};
    const auto t = per_run_selection(twins);
    CHECK(t.selected[0] == t.selected[1]);

    const auto base = per_run_selection(masks);
    for (double c : {3.0, 0.001, 1024.0, 17.5}) {
        auto scaled = masks;
        for (auto& m : scaled)
            for (auto& w : m) w *= c;
        CHECK(per_run_selection(scaled).selected == base.selected);
    }

    // negative weights count by magnitude
    auto flipped = masks;
    for (auto& w : flipped[2]) w = -w;
    CHECK(per_run_selection(flipped).selected == base.selected);

    const std::vector<std::vector<double>> zeros(3, std::vector<double>(6, 0.0));
    const auto z = per_run_selection(zeros);
    CHECK(z.all_zero);
    for (const auto& s : z.selected) CHECK(s.empty());
    CHECK_THROWS_AS(frequency_rank(z, names(6)), Error);
}

TEST_CASE("frequency ranking counts selections")
{
    RunSelection sel;
    sel.selected = {{0, 1}, {1}, {0, 1, 2}};
    sel.mean_abs_weight = {0.5, 0.9, 0.1, 0.0};
    const auto rep = frequency_rank(sel, names(4));
    CHECK(rep.n_runs == 3);
    std::map<std::string, double> freq;
    double total = 0;
    for (const auto& r : rep.ranked) {
        freq[r.id] = r.frequency;
        total += r.frequency * 3;
        CHECK(r.frequency >= 0);
        CHECK(r.frequency <= 1);
    }
    CHECK(freq["f1"] == doctest::Approx(2.0 / 3.0));
    CHECK(freq["f2"] == 1.0);
    CHECK(freq["f4"] == 0.0);
    CHECK(total == doctest::Approx(6.0));
    CHECK(rep.ranked[0].id == "f2");
    CHECK(std::find(rep.selected.begin(), rep.selected.end(), "f2") != rep.selected.end());
    for (const auto& r : rep.ranked) {
        const bool in = std::find(rep.selected.begin(), rep.selected.end(), r.id) != rep.selected.end();
        CHECK(in == (r.frequency > 0 && r.frequency >= rep.frequency_threshold));
    }
}

TEST_CASE("ranking ties fall back to mean weight then id")
{
    RunSelection sel;
    sel.selected = {{0, 1, 2, 3}, {0, 1, 2, 3}};
    sel.mean_abs_weight = {0.2, 0.7, 0.2, 0.1};
    const auto rep = frequency_rank(sel, {"c", "b", "a", "d"});
    std::vector<std::string> order;
    for (const auto& r : rep.ranked) order.push_back(r.id);
    CHECK(order == std::vector<std::string>{"b", "a", "c", "d"});
}

TEST_CASE("planted features recovered from clean selections")
{
    // 20 runs over 50 features; planted ones appear in >= 80% of runs, background in <= 10%
    const std::set<std::size_t> planted{2, 11, 19, 30, 44};
    Rng rng(8);
    std::bernoulli_distribution hit(0.9), noise(0.05);
    RunSelection sel;
    sel.mean_abs_weight.assign(50, 0.1);
    std::vector<std::size_t> counts(50, 0);
    for (int r = 0; r < 20; ++r) {
        std::vector<std::size_t> s;
        for (std::size_t j = 0; j < 50; ++j)
            if ((planted.count(j) ? hit(rng) : noise(rng)) && counts[j] < (planted.count(j) ? 20u : 2u)) {
                s.push_back(j);
                ++counts[j];
            }
        sel.selected.push_back(s);
    }
    for (auto j : planted) REQUIRE(counts[j] >= 16);
    const auto rep = frequency_rank(sel, names(50));
    // the knee is the first point past the drop and is kept, so background
    // features tied at the highest background frequency come along
    std::size_t top_background = 0;
    for (std::size_t j = 0; j < 50; ++j)
        if (!planted.count(j)) top_background = std::max(top_background, counts[j]);
    std::set<std::string> got(rep.selected.begin(), rep.selected.end()), want;
    for (std::size_t j = 0; j < 50; ++j)
        if (planted.count(j) || counts[j] == top_background) want.insert("f" + std::to_string(j + 1));
    CHECK(got == want);
    for (auto j : planted) CHECK(got.count("f" + std::to_string(j + 1)) == 1);
}

TEST_CASE("overlap groups")
{
    const auto u = names(4);
    const auto g = overlap_groups(report_with(u, {"f1", "f2", "f3", "f4"}), report_with(u, {"f1", "f3"}),
                                  report_with(u, {"f1", "f4"}));
    CHECK(g.across.groups.at("Both") == std::vector<std::string>{"f1"});
    CHECK(g.across.groups.at("DomainA") == std::vector<std::string>{"f3"});
    CHECK(g.across.groups.at("DomainB") == std::vector<std::string>{"f4"});
    CHECK(g.across.groups.at("None") == std::vector<std::string>{"f2"});
    CHECK(g.single_a.groups.at("Both") == std::vector<std::string>{"f1", "f3"});
    CHECK(g.single_a.groups.at("DomainOnly").empty());

    const auto same = overlap_groups(report_with(u, {"f1", "f2"}), report_with(u, {"f1", "f2"}),
                                     report_with(u, {"f1", "f2"}));
    CHECK(same.across.groups.at("None").empty());

    const auto disjoint = overlap_groups(report_with(u, {"f1", "f2"}), report_with(u, {"f3"}),
                                         report_with(u, {"f4"}));
    CHECK(disjoint.across.groups.at("None") == std::vector<std::string>{"f1", "f2"});
    CHECK(disjoint.single_b.groups.at("DomainOnly") == std::vector<std::string>{"f4"});

    // groups partition each perspective's selected set
    std::size_t n = 0;
    for (const auto& [k, v] : g.across.groups) n += v.size();
    CHECK(n == 4);

    CHECK_THROWS_AS(overlap_groups(report_with(u, {}), report_with(names(3), {}), report_with(u, {})), Error);
}

TEST_CASE("PCA")
{
    Eigen::MatrixXd same = Eigen::MatrixXd::Constant(4, 3, 2.0);
    const auto deg = pca_2d({same, same}, {"a", "b"}, {{0, 1, 0, 1}, {0, 1, 0, 1}});
    CHECK(deg.degenerate);
    CHECK(deg.coords.isZero());
    CHECK(deg.coords.rows() == 8);

    Rng rng(5);
    std::normal_distribution<double> n(0, 1);
    Eigen::MatrixXd a(50, 4), b(30, 4);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = n(rng);
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = n(rng);
    a.col(2) *= 5;
    b.col(2) *= 5;
    a.col(0) *= 2;
    b.col(0) *= 2;
    std::vector<int> la(50, 0), lb(30, 1);
    const auto p = pca_2d({a, b}, {"x", "y"}, {la, lb});
    CHECK_FALSE(p.degenerate);
    CHECK(p.variance[0] >= p.variance[1]);
    CHECK(p.domains[49] == "x");
    CHECK(p.domains[50] == "y");
    CHECK(p.labels[50] == 1);
    // component variance equals the variance of the projected coordinates
    const Eigen::VectorXd c0 = p.coords.col(0).array() - p.coords.col(0).mean();
    CHECK(c0.squaredNorm() / 80.0 == doctest::Approx(p.variance[0]).epsilon(1e-9));
    CHECK(std::abs(p.coords.col(0).mean()) < 1e-9);

    CHECK_THROWS_AS(pca_2d({a}, {"x", "y"}, {la}), Error);
}

TEST_CASE("recovery statistics")
{
    const auto r = recovery({"a", "b", "x"}, {"a", "b", "c", "d"});
    CHECK(r.true_positives == 2);
    CHECK(r.recall == 0.5);
    CHECK(r.precision == doctest::Approx(2.0 / 3.0));
    CHECK(recovery({"a"}, {"a"}).recall == 1.0);
    CHECK(recovery({}, {"a"}).precision == 0.0);
}

TEST_CASE("report files")
{
    RunSelection sel;
    sel.selected = {{0, 1}, {1}};
    sel.mean_abs_weight = {0.5, 0.9, 0.1};
    const auto rep = frequency_rank(sel, names(3));
    testing::TempDir tmp("rep");
    write_feature_report(rep, tmp / "f.csv", tmp / "s.json");
    const auto csv = testing::read_file(tmp / "f.csv");
    CHECK(csv.rfind("rank,feature,frequency,mean_abs_weight,selected\n1,f2,1,0.9,1\n", 0) == 0);
    CHECK(testing::read_file(tmp / "s.json").find("\"frequency_threshold\"") != std::string::npos);

    const auto g = overlap_groups(rep, rep, rep);
    write_overlap_report(g.across, rep, tmp / "o.csv");
    CHECK(testing::read_file(tmp / "o.csv").find("Both,f2,1") != std::string::npos);
}

} // TEST_SUITE
