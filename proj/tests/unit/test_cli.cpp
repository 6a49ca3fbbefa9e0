#include "mdmt/cli.hpp"
#include "mdmt/config_io.hpp"
#include "mdmt/plot.hpp"
#include "unit/helpers.hpp"

#include <doctest.h>

#include <sstream>

using namespace mdmt;
using testing::TempDir;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result run(const std::vector<std::string>& args)
{
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::vector<std::string> tiny_train()
{
    return {"--desk-scale", "--epochs", "40", "--hidden", "8", "--latent", "3", "--classifier-depth", "1",
            "--batch-size", "8"};
}

std::vector<std::string> cat(std::vector<std::string> a, const std::vector<std::string>& b)
{
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("synth writes a reproducible pair and sidecar")
{
    TempDir tmp("synth");
    const auto d1 = (tmp / "one").string(), d2 = (tmp / "two").string();
    auto r = run({"synth", "--out", d1, "--seed", "4", "--d", "30", "--n-a", "20", "--n-b", "16"});
    REQUIRE(r.code == 0);
    CHECK(std::filesystem::exists(tmp / "one/domain_a.csv"));
    CHECK(std::filesystem::exists(tmp / "one/domain_b.csv"));
    CHECK(std::filesystem::exists(tmp / "one/effective_config_synth.json"));
    const auto truth = read_ground_truth(tmp / "one/truth.json");
    CHECK(truth.planted_shared.size() == 10);
    CHECK(truth.noise_seed == 4);

    REQUIRE(run({"--seed", "4", "synth", "--out", d2, "--d", "30", "--n-a", "20", "--n-b", "16"}).code == 0);
    CHECK(testing::read_file(tmp / "one/domain_a.csv") == testing::read_file(tmp / "two/domain_a.csv"));
    CHECK(testing::read_file(tmp / "one/domain_b.csv") == testing::read_file(tmp / "two/domain_b.csv"));
}

TEST_CASE("synth rejects overlapping planted sets")
{
    TempDir tmp("overlap");
    const auto r = run({"synth", "--out", tmp.path().string(), "--shared", "1,2,3", "--a-only", "3"});
    CHECK(r.code != 0);
    CHECK(r.err.find("overlapping planted sets: feature 3") != std::string::npos);
}

TEST_CASE("config files reject unknown keys and flags override them")
{
    TempDir tmp("cfg");
    testing::write_file(tmp / "bad.json", R"({"train": {"epochs": 5, "learnin_rate": 1}})");
    auto r = run({"--config", (tmp / "bad.json").string(), "synth", "--out", (tmp / "x").string()});
    CHECK(r.code != 0);
    CHECK(r.err.find("learnin_rate") != std::string::npos);
    testing::write_file(tmp / "bad2.json", R"({"plots": {}})");
    CHECK(run({"--config", (tmp / "bad2.json").string(), "synth", "--out", (tmp / "x").string()}).code != 0);

    testing::write_file(tmp / "ok.json", R"({"synth": {"d": 25, "planted_shared": [4]}, "io": {"out": ")" +
                                             (tmp / "y").generic_string() + R"("}})");
    r = run({"--config", (tmp / "ok.json").string(), "synth", "--d", "26"});
    REQUIRE(r.code == 0);
    const auto spec = read_ground_truth(tmp / "y/truth.json");
    CHECK(spec.d == 26);
    CHECK(spec.planted_shared == std::vector<std::size_t>{4});
}

TEST_CASE("config json round-trips")
{
    SweepConfig c;
    c.n_inits = 7;
    c.train.loss.theta = 3e-3;
    c.train.precision = Precision::float64;
    c.mode = SweepMode::single_b;
    const auto back = sweep_config_from_json(to_json(c));
    CHECK(back.n_inits == 7);
    CHECK(back.train.loss.theta == 3e-3);
    CHECK(back.train.precision == Precision::float64);
    CHECK(back.mode == SweepMode::single_b);
    CHECK(to_json(c)["train"]["alpha"] == 10.0);
    CHECK_THROWS_AS(train_config_from_json(nlohmann::json{{"epochs", "many"}}), Error);
}

TEST_CASE("sweep, resume and report end to end")
{
    TempDir tmp("e2e");
    const auto data = (tmp / "data").string();
    REQUIRE(run({"synth", "--out", data, "--d", "24", "--n-a", "40", "--n-b", "40", "--shared", "0,1,2",
                 "--a-only", "5", "--b-only", "9"})
                .code == 0);
    const auto a = data + "/domain_a.csv", b = data + "/domain_b.csv";
    const auto across = (tmp / "across").string();

    auto r = run(cat({"sweep", "--data-a", a, "--data-b", b, "--out", across, "--n-subsamples", "2", "--n-inits",
                      "2", "--workers", "2"},
                     tiny_train()));
    INFO(r.err);
    REQUIRE(r.code == 0);
    std::size_t folders = 0;
    for (const auto& e : std::filesystem::directory_iterator(tmp / "across/runs")) folders += e.is_directory();
    CHECK(folders == 4);
    CHECK(std::filesystem::exists(tmp / "across/effective_config_sweep.json"));

    r = run({"sweep", "--out", across, "--resume"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("0 runs trained") != std::string::npos);

    const auto single_a = (tmp / "sa").string(), single_b = (tmp / "sb").string();
    REQUIRE(run(cat({"--mode", "single-a", "sweep", "--data-a", a, "--data-b", b, "--out", single_a,
                     "--n-subsamples", "1", "--n-inits", "2"},
                    tiny_train()))
                .code == 0);
    REQUIRE(run(cat({"sweep", "--mode", "single-b", "--data-a", a, "--data-b", b, "--out", single_b,
                     "--n-subsamples", "1", "--n-inits", "2"},
                    tiny_train()))
                .code == 0);
    CHECK(SweepStore(single_a).read_config().mode == SweepMode::single_a);

    const auto rep1 = (tmp / "rep1").string();
    r = run({"report", "--across", across, "--out", rep1});
    INFO(r.err);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("overlap report skipped") != std::string::npos);
    CHECK(r.out.find("recall") != std::string::npos);  // sidecar found next to the data
    for (const char* f : {"features_across.csv", "summary_across.json", "frequency_across.svg", "loss_across.csv",
                          "loss_across.svg", "pca_across.csv", "pca_across.svg", "report.json"})
        CHECK_MESSAGE(std::filesystem::exists(tmp / "rep1" / f), f);
    CHECK_FALSE(std::filesystem::exists(tmp / "rep1/overlap_across.csv"));

    const auto rep2 = (tmp / "rep2").string();
    r = run({"report", "--across", across, "--single-a", single_a, "--single-b", single_b, "--out", rep2, "--truth",
             data + "/truth.json"});
    INFO(r.err);
    REQUIRE(r.code == 0);
    for (const char* f : {"overlap_across.csv", "overlap_single_a.csv", "overlap_single_b.csv",
                          "features_single_a.csv", "loss_single_b.svg"})
        CHECK_MESSAGE(std::filesystem::exists(tmp / "rep2" / f), f);

    CHECK(run({"report", "--across", (tmp / "nothing").string()}).code != 0);
    CHECK(run({"report", "--across", single_a}).code != 0);
}

TEST_CASE("missing inputs fail with a message")
{
    TempDir tmp("miss");
    auto r = run({"sweep", "--out", tmp.path().string()});
    CHECK(r.code != 0);
    CHECK(r.err.find("data-a") != std::string::npos);
    CHECK(run({}).code != 0);
    CHECK(run({"frobnicate"}).code != 0);
}

TEST_CASE("loss plot has the four weighted panels")
{
    LossBreakdown l;
    l.rec = {0.5, 0.25};
    l.cls = {0.1, 0.2};
    l.sparse = 100;
    l.total = 9;
    const LossWeights w;
    const auto panels = loss_panels({l, l}, w);
    REQUIRE(panels.size() == 4);
    CHECK(panels[0].series[0].y[0] == doctest::Approx(5.0));
    CHECK(panels[0].series[1].y[0] == doctest::Approx(2.5));
    CHECK(panels[1].series[0].y[0] == doctest::Approx(0.1));
    CHECK(panels[2].series[0].y[0] == doctest::Approx(0.01));
    CHECK(panels[3].series[0].y[0] == 9.0);
    const auto svg = render_line_panels(panels, 2);
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("reconstruction") != std::string::npos);
    CHECK(svg.find("sparsity") != std::string::npos);
}

} // TEST_SUITE
