#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "weca/anomaly.hpp"
#include "weca/experiment.hpp"

namespace fs = std::filesystem;
using namespace weca;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "weca_test_cli";

int run(const std::string& args) {
    const std::string cmd = std::string(WECA_CLI_PATH) + " " + args + " >" + (kRoot / "stdout.txt").string() +
                            " 2>" + (kRoot / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

const char* kTiny =
    "data.n_series=3\n"
    "data.length=240\n"
    "window.input=16\n"
    "window.horizon=4\n"
    "model.latent_dim=4\n"
    "model.dilations=1,2\n"
    "train.max_epochs=2\n"
    "train.windows_per_epoch=48\n"
    "train.batch_size=16\n"
    "bench.seeds=3\n";

fs::path write_tiny(const std::string& extra = "") {
    const auto p = kRoot / "tiny.cfg";
    std::ofstream(p) << kTiny << extra;
    return p;
}

struct Fresh {
    Fresh() {
        fs::remove_all(kRoot);
        fs::create_directories(kRoot);
    }
};

}  // namespace

TEST_CASE("gen writes the full synthetic benchmark reproducibly") {
    Fresh fresh;
    REQUIRE(run("gen --out " + (kRoot / "a").string()) == 0);
    const auto text = slurp(kRoot / "a" / "data.csv");
    const auto rows = lines(text);
    CHECK(rows.front() == "series_id,date,value");
    CHECK(rows.size() - 1 == 46720);
    CHECK(slurp(kRoot / "stdout.txt").find("46720 rows") != std::string::npos);
    REQUIRE(run("gen --out " + (kRoot / "b").string()) == 0);
    CHECK(slurp(kRoot / "b" / "data.csv") == text);
}

TEST_CASE("usage errors exit with 1") {
    Fresh fresh;
    CHECK(run("") == 1);
    CHECK(run("gen --set nope.key=1 --out " + kRoot.string()) == 1);
    CHECK(run("gen --config " + (kRoot / "missing.cfg").string()) == 1);
    CHECK(run("train --config " + write_tiny().string() + " --out " + kRoot.string()) == 1);
    CHECK(run("train --regime FT --config " + write_tiny().string() + " --out " + kRoot.string()) == 1);
    CHECK(slurp(kRoot / "stderr.txt").find("NT checkpoint") != std::string::npos);
    CHECK(run("--help") == 0);
}

TEST_CASE("inject-preview columns") {
    Fresh fresh;
    REQUIRE(run("inject-preview --series atm_002 --onset 10 --config " + write_tiny().string() + " --out " +
                kRoot.string()) == 0);
    const auto rows = lines(slurp(kRoot / "preview_atm_002.csv"));
    CHECK(rows.front() == "t,original,anomaly,augmented");
    CHECK(rows.size() == 21);
    CHECK(fs::exists(kRoot / "preview_atm_002.svg"));
    CHECK(slurp(kRoot / "preview_atm_002.svg").find("<polyline") != std::string::npos);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        std::istringstream in(rows[r]);
        std::string f[4];
        for (auto& x : f) std::getline(in, x, ',');
        const double orig = std::stod(f[1]), anomaly = std::stod(f[2]), aug = std::stod(f[3]);
        if (r - 1 < 10) CHECK(anomaly == 0.0);
        CHECK(std::fabs(aug - orig - anomaly) <= 1e-12 * std::max(1.0, std::fabs(aug)));
    }
    CHECK(run("inject-preview --series nope --config " + write_tiny().string() + " --out " + kRoot.string()) == 2);
}

TEST_CASE("preview peak sits at the grid argmax of the curve") {
    auto config = parse_config(kTiny);
    config.window = {56, 14};
    config.synthetic.length = 730;
    const auto data = prepare_data(config);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto p = preview_injection(config, data, "atm_001", 42, seed);
        std::size_t peak = 0;
        for (std::size_t t = 0; t < p.rows.size(); ++t) {
            if (std::fabs(p.rows[t].anomaly) > std::fabs(p.rows[peak].anomaly)) peak = t;
        }
        std::size_t best = 0;
        for (std::size_t n = 1; n < 70 - 42; ++n) {
            if (anomaly_curve(double(n), p.params) > anomaly_curve(double(best), p.params)) best = n;
        }
        CHECK(peak == 42 + best);
    }
}

TEST_CASE("train then eval through the command line") {
    Fresh fresh;
    const auto cfg = write_tiny().string();
    REQUIRE(run("train --regime NT --seed 3 --config " + cfg + " --out " + kRoot.string()) == 0);
    CHECK(fs::exists(kRoot / "NT_s3" / "checkpoint.ckpt"));
    CHECK(lines(slurp(kRoot / "NT_s3" / "train_log.csv")).front() == "epoch,train_loss,val_mae,lr,wall_ms");
    REQUIRE(run("train --regime FT --seed 3 --config " + cfg + " --out " + kRoot.string()) == 0);
    REQUIRE(run("eval --regime FT --seed 3 --config " + cfg + " --out " + kRoot.string()) == 0);
    const auto report = lines(slurp(kRoot / "FT_s3" / "report.csv"));
    REQUIRE(report.size() == 2);
    CHECK(report[1].rfind("FT,3,", 0) == 0);
    CHECK(slurp(kRoot / "FT_s3" / "checkpoint.ckpt").find("meta fingerprint") != std::string::npos);
}

TEST_CASE("bench reports four regimes and is repeatable") {
    Fresh fresh;
    const auto cfg = write_tiny().string();
    const auto out = (kRoot / "bench").string();
    REQUIRE(run("bench --config " + cfg + " --out " + out) == 0);
    const auto first = slurp(kRoot / "bench" / "report.txt");
    const auto agg = lines(slurp(kRoot / "bench" / "aggregate.csv"));
    REQUIRE(agg.size() == 5);
    CHECK(agg[1].rfind("NT,1,", 0) == 0);
    std::istringstream nt(agg[1]);
    std::string f[9];
    for (auto& x : f) std::getline(nt, x, ',');
    CHECK(f[4] == "0");
    CHECK(f[7] == "0");
    const auto ckpt = slurp(kRoot / "bench" / "WECA_s3" / "checkpoint.ckpt");

    REQUIRE(run("bench --jobs 3 --config " + cfg + " --out " + out) == 0);
    CHECK(slurp(kRoot / "bench" / "report.txt") == first);
    CHECK(slurp(kRoot / "bench" / "WECA_s3" / "checkpoint.ckpt") == ckpt);
    REQUIRE(run("report --config " + cfg + " --out " + out) == 0);
    CHECK(slurp(kRoot / "bench" / "report.txt") == first);
}

TEST_CASE("lambda = 0 WECA row equals the NT row") {
    Fresh fresh;
    const auto cfg = write_tiny("train.lambda=0\ntrain.forecast_on_augmented=false\nbench.regimes=NT,WECA\n").string();
    REQUIRE(run("bench --config " + cfg + " --out " + kRoot.string()) == 0);
    const auto runs = lines(slurp(kRoot / "runs.csv"));
    REQUIRE(runs.size() == 3);
    auto scores = [](const std::string& row) { return row.substr(row.find(',', row.find(',') + 1)); };
    // Same numbers; only the fingerprint column differs.
    CHECK(scores(runs[1]).substr(0, scores(runs[1]).rfind(',')) ==
          scores(runs[2]).substr(0, scores(runs[2]).rfind(',')));
}

TEST_CASE("failed runs give exit code 2 and an incomplete report") {
    Fresh fresh;
    const auto cfg = write_tiny("anomaly.scale=1e308\n").string();
    CHECK(run("bench --config " + cfg + " --out " + kRoot.string()) == 2);
    const auto report = slurp(kRoot / "report.txt");
    CHECK(report.find("INCOMPLETE") != std::string::npos);
    CHECK(report.find("WECA/3") != std::string::npos);
    // The AD test set overflows too, so even NT fails at evaluation.
    CHECK(report.find("NT/3") != std::string::npos);
    CHECK(lines(slurp(kRoot / "runs.csv")).size() == 1);
}
