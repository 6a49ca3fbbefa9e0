#include "unit/helpers.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

using namespace mdmt;
using testing::TempDir;
using testing::write_file;

TEST_SUITE("dataset") {

TEST_CASE("load maps classes lexicographically")
{
    TempDir tmp("load");
    write_file(tmp / "x.csv", "id,pheno,g1,g2\ns1,tol,1,2\ns2,sus,3,4\ns3,tol,5,6\n");
    const auto ds = load_dataset(tmp / "x.csv", "liver", "pheno");
    CHECK(ds.n() == 3);
    CHECK(ds.d() == 2);
    CHECK(ds.class_names[0] == "sus");
    CHECK(ds.class_names[1] == "tol");
    CHECK(ds.labels == std::vector<int>{1, 0, 1});
    CHECK(ds.features == std::vector<std::string>{"g1", "g2"});
    CHECK(ds.samples(1, 0) == 3.0);
    CHECK(ds.sample_ids[2] == "s3");
}

TEST_CASE("load detects tab delimiters and label column position")
{
    TempDir tmp("tab");
    write_file(tmp / "x.tsv", "id\tg1\tlabel\tg2\r\na\t1.5\tB\t-2e-1\r\nb\t2\tA\t0\r\n");
    const auto ds = load_dataset(tmp / "x.tsv", "d", "label");
    CHECK(ds.features == std::vector<std::string>{"g1", "g2"});
    CHECK(ds.samples(0, 1) == doctest::Approx(-0.2));
    CHECK(ds.labels == std::vector<int>{1, 0});
}

TEST_CASE("load rejects malformed files")
{
    TempDir tmp("bad");
    write_file(tmp / "one.csv", "id,y,g1\na,x,1\nb,x,2\n");
    CHECK_THROWS_WITH_AS(load_dataset(tmp / "one.csv", "d", "y"), doctest::Contains("single-class dataset"),
                         Error);

    write_file(tmp / "dup.csv", "id,y,GeneX,GeneX\na,p,1,2\nb,q,2,3\n");
    CHECK_THROWS_WITH_AS(load_dataset(tmp / "dup.csv", "d", "y"), doctest::Contains("duplicate feature"),
                         Error);

    write_file(tmp / "three.csv", "id,y,g\na,p,1\nb,q,2\nc,r,3\n");
    CHECK_THROWS_AS(load_dataset(tmp / "three.csv", "d", "y"), Error);

    write_file(tmp / "ragged.csv", "id,y,g1,g2\na,p,1\nb,q,2,3\n");
    CHECK_THROWS_WITH_AS(load_dataset(tmp / "ragged.csv", "d", "y"), doctest::Contains("ragged"), Error);

    write_file(tmp / "nan.csv", "id,y,g1\na,p,one\nb,q,2\n");
    CHECK_THROWS_WITH_AS(load_dataset(tmp / "nan.csv", "d", "y"), doctest::Contains("non-numeric"), Error);

    CHECK_THROWS_AS(load_dataset(tmp / "missing.csv", "d", "y"), Error);
    CHECK_THROWS_AS(load_dataset(tmp / "nan.csv", "d", "nolabel"), Error);
}

TEST_CASE("write then load round-trips")
{
    TempDir tmp("rt");
    SyntheticSpec spec;
    spec.d = 7;
    spec.n_a = 6;
    spec.n_b = 5;
    spec.planted_shared = {2};
    const auto p = generate_synthetic(spec);
    write_dataset(p.domain_a, tmp / "a.csv");
    const auto back = load_dataset(tmp / "a.csv", "a", "label");
    CHECK(back.features == p.domain_a.features);
    CHECK(back.labels == p.domain_a.labels);
    CHECK(back.class_names == p.domain_a.class_names);
    CHECK(back.samples.isApprox(p.domain_a.samples, 1e-15));
}

ExpressionDataset make(const std::vector<std::string>& features, const std::string& id = "x")
{
    ExpressionDataset ds;
    ds.domain_id = id;
    ds.features = features;
    ds.samples = Eigen::MatrixXd::Zero(2, static_cast<Eigen::Index>(features.size()));
    for (Eigen::Index j = 0; j < ds.samples.cols(); ++j) {
        ds.samples(0, j) = static_cast<double>(j);
        ds.samples(1, j) = 10.0 + static_cast<double>(j);
    }
    ds.labels = {0, 1};
    ds.class_names = {"n", "p"};
    return ds;
}

TEST_CASE("align restricts to the sorted intersection")
{
    const auto a = make({"g3", "g1", "g2"}, "a");
    const auto b = make({"g2", "g4", "g3"}, "b");
    const auto p = align_domains(a, b);
    CHECK(p.shared_features == std::vector<std::string>{"g2", "g3"});
    CHECK(p.domain_a.samples.cols() == 2);
    CHECK(p.domain_a.samples(0, 0) == 2.0);  // g2 was column 2 of a
    CHECK(p.domain_a.samples(0, 1) == 0.0);  // g3 was column 0 of a
    CHECK(p.domain_b.samples(0, 0) == 0.0);
    CHECK(p.domain_b.samples(0, 1) == 2.0);
    CHECK(align_domains(b, a).shared_features == p.shared_features);

    const auto same = align_domains(make({"b", "a"}), make({"a", "b"}));
    CHECK(same.shared_features == std::vector<std::string>{"a", "b"});

    CHECK_THROWS_AS(align_domains(make({"x"}), make({"y"})), Error);
    auto other = make({"g2"});
    other.class_names = {"q", "r"};
    CHECK_THROWS_AS(align_domains(make({"g2"}), other), Error);
}

TEST_CASE("zscore uses population std and zeroes constant columns")
{
    ExpressionDataset ds = make({"a", "b"});
    ds.samples.resize(3, 2);
    ds.samples << 1, 5, 2, 5, 3, 5;
    ds.labels = {0, 1, 0};
    const auto z = zscore(ds);
    // mean 2, population std sqrt(2/3)
    const double s = std::sqrt(2.0 / 3.0);
    CHECK(z.samples(0, 0) == doctest::Approx(-1.0 / s).epsilon(1e-12));
    CHECK(z.samples(0, 0) == doctest::Approx(-1.2247).epsilon(1e-4));
    CHECK(z.samples(1, 0) == doctest::Approx(0.0));
    CHECK(z.samples(2, 0) == doctest::Approx(1.2247).epsilon(1e-4));
    CHECK(z.samples.col(1).isZero());

    const auto twice = zscore(z);
    CHECK((twice.samples - z.samples).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("zscore_per_domain standardises each domain separately")
{
    SyntheticSpec spec;
    spec.d = 9;
    spec.planted_shared = {1};
    spec.effect_size_shared = 3;
    auto raw = generate_synthetic(spec);
    raw.domain_b.samples.array() = raw.domain_b.samples.array() * 4 + 7;
    const auto p = zscore_per_domain(raw);
    for (const auto* ds : {&p.domain_a, &p.domain_b}) {
        const Eigen::RowVectorXd mean = ds->samples.colwise().mean();
        const Eigen::RowVectorXd var =
            (ds->samples.rowwise() - mean).array().square().colwise().mean().matrix();
        CHECK(mean.cwiseAbs().maxCoeff() < 1e-9);
        CHECK((var.array() - 1).abs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("batch pairs have equal size and are seed-deterministic")
{
    SyntheticSpec spec;
    spec.d = 5;
    spec.n_a = 100;
    spec.n_b = 20;
    const auto p = generate_synthetic(spec);
    Rng r1(11), r2(11);
    const auto b1 = sample_batch_pair(p, 4, r1);
    const auto b2 = sample_batch_pair(p, 4, r2);
    CHECK(b1.a.x.rows() == 4);
    CHECK(b1.b.x.rows() == 4);
    CHECK(b1.a.y.size() == 4);
    CHECK(b1.a.x == b2.a.x);
    CHECK(b1.b.x == b2.b.x);
    CHECK(b1.b.y == b2.b.y);
    // labels travel with their rows
    for (Eigen::Index r = 0; r < 4; ++r) {
        bool found = false;
        for (Eigen::Index i = 0; i < p.domain_b.samples.rows(); ++i)
            if (p.domain_b.samples.row(i) == b1.b.x.row(r)) {
                found = true;
                CHECK(p.domain_b.labels[static_cast<std::size_t>(i)] == b1.b.y[static_cast<std::size_t>(r)]);
            }
        CHECK(found);
    }
    Rng r3(1);
    CHECK_THROWS_AS(sample_batch_pair(p, 0, r3), Error);
}

TEST_CASE("subsample is stratified, deterministic and keeps both classes")
{
    SyntheticSpec spec;
    spec.d = 3;
    spec.n_a = 40;  // 20 per class
    spec.n_b = 14;
    const auto p = generate_synthetic(spec);
    Rng r1(3), r2(3);
    const auto [s1, keep1] = subsample(p, 0.85, r1);
    const auto [s2, keep2] = subsample(p, 0.85, r2);
    CHECK(keep1.per_domain == keep2.per_domain);
    CHECK(s1.domain_a.n() == 34);  // ceil(0.85 * 20) twice
    CHECK(s1.domain_b.n() == 12);  // ceil(0.85 * 7) = 6 twice
    for (const auto* ds : {&s1.domain_a, &s1.domain_b}) {
        CHECK(std::count(ds->labels.begin(), ds->labels.end(), 0) > 0);
        CHECK(std::count(ds->labels.begin(), ds->labels.end(), 1) > 0);
    }
    const std::set<std::size_t> uniq(keep1.per_domain[0].begin(), keep1.per_domain[0].end());
    CHECK(uniq.size() == keep1.per_domain[0].size());
    for (std::size_t r = 0; r < keep1.per_domain[0].size(); ++r)
        CHECK(s1.domain_a.samples.row(static_cast<Eigen::Index>(r)) ==
              p.domain_a.samples.row(static_cast<Eigen::Index>(keep1.per_domain[0][r])));

    Rng r3(9);
    const auto [full, all] = subsample(p, 1.0, r3);
    CHECK(full.domain_a.samples == p.domain_a.samples);
    CHECK(all.per_domain[0].size() == 40);

    Rng r4(9);
    CHECK_THROWS_AS(subsample(p, 0.0, r4), Error);
    CHECK_THROWS_AS(subsample(p, 1.5, r4), Error);
}

TEST_CASE("synthetic generator plants class shifts")
{
    SyntheticSpec spec;
    spec.d = 10;
    spec.n_a = 200;
    spec.n_b = 200;
    spec.planted_shared = {3};
    spec.planted_a_only = {5};
    spec.effect_size_shared = 10;
    spec.effect_size_single = 4;
    const auto p = generate_synthetic(spec);
    auto gap = [](const ExpressionDataset& ds, Eigen::Index col) {
        double m[2] = {0, 0};
        int c[2] = {0, 0};
        for (std::size_t i = 0; i < ds.n(); ++i) {
            m[ds.labels[i]] += ds.samples(static_cast<Eigen::Index>(i), col);
            ++c[ds.labels[i]];
        }
        return m[1] / c[1] - m[0] / c[0];
    };
    CHECK(gap(p.domain_a, 3) == doctest::Approx(10).epsilon(0.05));
    CHECK(gap(p.domain_b, 3) == doctest::Approx(10).epsilon(0.05));
    CHECK(gap(p.domain_a, 5) == doctest::Approx(4).epsilon(0.1));
    CHECK(std::abs(gap(p.domain_b, 5)) < 0.5);
    CHECK(std::abs(gap(p.domain_a, 0)) < 0.5);

    CHECK(generate_synthetic(spec).domain_a.samples == p.domain_a.samples);
    spec.noise_seed = 1;
    CHECK(generate_synthetic(spec).domain_a.samples != p.domain_a.samples);
}

TEST_CASE("zero effect leaves planted columns at the null")
{
    SyntheticSpec spec;
    spec.d = 4;
    spec.n_a = 400;
    spec.n_b = 400;
    spec.planted_shared = {0, 1};
    spec.effect_size_shared = 0;
    const auto p = generate_synthetic(spec);
    for (Eigen::Index col : {0, 1}) {
        double m[2] = {0, 0};
        for (std::size_t i = 0; i < p.domain_a.n(); ++i)
            m[p.domain_a.labels[i]] += p.domain_a.samples(static_cast<Eigen::Index>(i), col) / 200.0;
        // standard error of a difference of two 200-sample means is 0.1
        CHECK(std::abs(m[1] - m[0]) < 0.4);
    }
}

TEST_CASE("synthetic spec validation names the overlap")
{
    SyntheticSpec spec;
    spec.planted_shared = {1, 2};
    spec.planted_a_only = {2};
    CHECK_THROWS_WITH_AS(spec.validate(), doctest::Contains("overlapping planted sets: feature 2"), Error);
    spec.planted_a_only = {500};
    CHECK_THROWS_AS(spec.validate(), Error);
}

TEST_CASE("ground truth sidecar round-trips")
{
    TempDir tmp("truth");
    SyntheticSpec spec;
    spec.d = 30;
    spec.planted_shared = {1, 4};
    spec.planted_b_only = {7};
    spec.effect_size_single = 2.5;
    spec.noise_seed = 42;
    write_ground_truth(spec, tmp / "truth.json");
    const auto back = read_ground_truth(tmp / "truth.json");
    CHECK(back.planted_shared == spec.planted_shared);
    CHECK(back.planted_b_only == spec.planted_b_only);
    CHECK(back.effect_size_single == 2.5);
    CHECK(back.noise_seed == 42);
    CHECK(testing::read_file(tmp / "truth.json").find("\"g04\"") != std::string::npos);
}

} // TEST_SUITE
