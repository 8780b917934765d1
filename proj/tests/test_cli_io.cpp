#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "qpdyn/cli_io.hpp"
#include "qpdyn/errors.hpp"
#include "qpdyn/trace_fit.hpp"
#include "support.hpp"

using namespace qpdyn;
using namespace qpdyn::test;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinRel;

namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_command(args, out, err);
    return {code, out.str(), err.str()};
}

// Runs from the source tree so that input paths in manifests are relative.
struct InSourceDir {
    fs::path prev = fs::current_path();
    InSourceDir() { fs::current_path(QPDYN_SOURCE_DIR); }
    ~InSourceDir() { fs::current_path(prev); }
};

const std::vector<std::string> geom_opts{"--geom", "data/b1_like.geom", "--p", "0.067cm2/s", "--d", "18cm2/s"};

std::vector<std::string> cat(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

}  // namespace

TEST_CASE("minimal trace file", "[cli_io]") {
    const DecayTrace tr = parse_trace("t,gamma\n1e-3,5e4\n2e-3,4e4\n3e-3,3.5e4\n");
    REQUIRE(tr.samples.size() == 3);
    CHECK(tr.samples[1].t == 2e-3);
    CHECK(tr.samples[2].gamma == 3.5e4);
    CHECK_FALSE(tr.has_sigma());
}

TEST_CASE("trace units and label comments", "[cli_io]") {
    const DecayTrace tr = parse_trace("# label: run 7\n# units: t=ms, gamma=1/us\nt,gamma,sigma\n1,0.05,0.001\n2,0.04,0.001\n");
    CHECK(tr.label == "run 7");
    CHECK_THAT(tr.samples[0].t, WithinRel(1e-3, 1e-15));
    CHECK_THAT(tr.samples[1].gamma, WithinRel(4e4, 1e-15));
    CHECK_THAT(*tr.samples[0].sigma, WithinRel(1e3, 1e-15));
}

TEST_CASE("trace errors name the line", "[cli_io]") {
    try {
        parse_trace("t,gamma\n1e-3,5e4\n3e-3,4e4\n2e-3,3e4\n");
        FAIL("accepted out-of-order times");
    } catch (const ParseError& e) {
        CHECK(e.line == 4);
        CHECK_THAT(e.what(), ContainsSubstring("line 4"));
    }
    try {
        parse_trace("t,gamma\n1e-3,5e4\n2e-3,abc\n3e-3,3e4\n");
        FAIL("accepted a bad number");
    } catch (const ParseError& e) {
        CHECK(e.line == 3);
    }
    CHECK_THROWS_AS(parse_trace("time,rate\n1,2\n"), ParseError);
    CHECK_THROWS_AS(parse_trace("t,gamma\n1e-3,5e4,7\n"), ParseError);
    CHECK_THROWS_AS(read_trace("no/such/file.csv"), IoError);
}

TEST_CASE("trace round trip is lossless", "[cli_io]") {
    CounterRng rng(99);
    for (int i = 0; i < 1000; ++i) {
        DecayTrace tr;
        tr.label = i % 3 ? "" : "trace " + std::to_string(i);
        const int n = 3 + static_cast<int>(rng.uniform() * 40);
        const bool sigma = i % 2 == 0;
        double t = std::pow(10.0, -7 + 4 * rng.uniform());
        for (int k = 0; k < n; ++k) {
            t *= 1.0 + rng.uniform();
            TraceSample s{t, std::pow(10.0, 2 + 5 * rng.uniform()), std::nullopt};
            if (sigma) s.sigma = s.gamma * 0.05 * rng.uniform() + 1e-3;
            tr.samples.push_back(s);
        }
        const std::string text = format_trace(tr);
        const DecayTrace back = parse_trace(text);
        REQUIRE(back.samples.size() == tr.samples.size());
        CHECK(back.label == tr.label);
        bool same = true;
        for (int k = 0; k < n; ++k) {
            same = same && back.samples[k].t == tr.samples[k].t && back.samples[k].gamma == tr.samples[k].gamma &&
                   back.samples[k].sigma == tr.samples[k].sigma;
        }
        CHECK(same);
        CHECK(format_trace(back) == text);
    }
}

TEST_CASE("trace file write and read", "[cli_io]") {
    const fs::path p = fs::temp_directory_path() / "qpdyn_trace_io.csv";
    const DecayTrace tr = parse_trace("t,gamma\n1e-3,5e4\n2e-3,4e4\n");
    write_trace(p, tr);
    CHECK(read_trace(p).samples.size() == 2);
    fs::remove(p);
}

TEST_CASE("steady-state points", "[cli_io]") {
    const auto pts = parse_t1_points("tau_ss,inv_t1,sigma\n0.002,4.4e4,440\n0.004,5.1e4,510\n");
    REQUIRE(pts.size() == 2);
    CHECK(pts[1].inv_t1 == 5.1e4);
    CHECK(*pts[0].sigma_inv_t1 == 440);
    CHECK(parse_t1_points(format_t1_points(pts)).size() == 2);
    CHECK_THROWS_AS(parse_t1_points("tau,inv\n1,2\n"), ParseError);
}

TEST_CASE("sha256 and number formatting", "[cli_io]") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(format_double(0.1) == "0.10000000000000001");
    CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("rendered JSON re-serializes byte for byte", "[cli_io]") {
    InSourceDir here;
    for (const auto& args : {std::vector<std::string>{"fit", "data/b1_like_trace.csv", "--no-timestamp"},
                             cat({"steps", "--max", "3", "--no-timestamp"}, geom_opts)}) {
        const Run r = run(args);
        REQUIRE(r.code == 0);
        CHECK(Json::parse(r.out).dump(2) + "\n" == r.out);
    }
}

TEST_CASE("fit reports the bundled trace parameters", "[cli_io]") {
    InSourceDir here;
    const Run r = run({"fit", "data/b1_like_trace.csv", "--no-timestamp"});
    REQUIRE(r.code == 0);
    const Json j = Json::parse(r.out);
    CHECK(j["manifest"]["inputs"][0]["path"] == "data/b1_like_trace.csv");
    CHECK(j["manifest"]["inputs"][0]["sha256"] == sha256_hex(read_text_file("data/b1_like_trace.csv")));
    CHECK_FALSE(j["manifest"].contains("timestamp"));
    const double tau = j["result"]["tau_ss"];
    CHECK(std::abs(tau - 18e-3) < 2e-3);
    CHECK(j["result"]["covariance"].size() == 4);
    CHECK(j["result"]["covariance"][0].size() == 4);
}

TEST_CASE("eigenrate without vortices echoes s0", "[cli_io]") {
    InSourceDir here;
    const Run r = run(cat({"eigenrate", "--nl", "0", "--nr", "0", "--s0", "42/s", "--no-timestamp"}, geom_opts));
    REQUIRE(r.code == 0);
    CHECK(Json::parse(r.out)["result"]["s"] == 42.0);
}

TEST_CASE("steps table is monotone with near-equal early increments", "[cli_io]") {
    InSourceDir here;
    const Run r = run(cat({"steps", "--max", "4", "--out", "csv", "--no-timestamp"}, geom_opts));
    REQUIRE(r.code == 0);
    std::istringstream in(r.out);
    std::string line;
    std::vector<std::vector<double>> rows;
    bool header = false;
    while (std::getline(in, line)) {
        if (line.starts_with("#")) continue;
        if (!header) {
            CHECK(line == "step,n_left,n_right,s_per_s,sA_cm2_per_s,increment_cm2_per_s");
            header = true;
            continue;
        }
        std::vector<double> row;
        std::istringstream cells(line);
        std::string c;
        while (std::getline(cells, c, ',')) row.push_back(std::stod(c));
        rows.push_back(row);
    }
    REQUIRE(rows.size() == 5);
    const double first = rows[1][5];
    CHECK(first >= 0.85 * 0.067);
    CHECK(first <= 0.067);
    for (std::size_t k = 1; k < rows.size(); ++k) {
        CHECK(rows[k][4] > rows[k - 1][4]);
        CHECK(rel(rows[k][5], first) < 0.15);
    }
}

TEST_CASE("sweep CSV header", "[cli_io]") {
    InSourceDir here;
    const Run r = run(cat({"sweep", "--bk", "20mG", "--slope", "0.1/mG", "--bmin", "0mG", "--bmax", "100mG",
                           "--points", "3", "--out", "csv", "--no-timestamp"},
                          geom_opts));
    REQUIRE(r.code == 0);
    CHECK_THAT(r.out, ContainsSubstring("\nb_mG,n_left,n_right,s_per_s,sA_cm2_per_s\n"));
    CHECK(r.out.starts_with("# manifest: {"));
}

TEST_CASE("synth output reads back as a trace and is seed-determined", "[cli_io]") {
    const std::vector<std::string> base{"synth", "--params", "amplitude=3.9e6/s,rprime=0.9,tauss=18ms,gamma0=1/9.5us",
                                        "--noise", "0.02", "--tgrid", "log:200us:80ms:40", "--out", "csv",
                                        "--no-timestamp"};
    const Run a = run(cat(base, {"--seed", "5"}));
    const Run b = run(cat(base, {"--seed", "5"}));
    const Run c = run(cat(base, {"--seed", "6"}));
    REQUIRE(a.code == 0);
    CHECK(a.out == b.out);
    CHECK(a.out != c.out);
    const DecayTrace tr = parse_trace(a.out);
    CHECK(tr.samples.size() == 40);
    CHECK(tr.has_sigma());
}

TEST_CASE("output file option", "[cli_io]") {
    const fs::path p = fs::temp_directory_path() / "qpdyn_out.json";
    const Run r = run({"estimate", "qprate", "--rj", "8kOhm", "--no-timestamp", "-o", p.string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.empty());
    CHECK(Json::parse(read_text_file(p))["result"].contains("rate_per_s"));
    fs::remove(p);
}

TEST_CASE("exit codes", "[cli_io]") {
    InSourceDir here;
    CHECK(run({}).code == 2);
    CHECK(run({"frobnicate"}).code == 2);
    CHECK(run({"fit", "data/b1_like_trace.csv", "--bogus"}).code == 2);
    CHECK(run({"fit", "missing.csv"}).code == 3);
    CHECK(run(cat({"eigenrate", "--nl", "1", "--d", "18cm2/s", "--p", "0.067"}, {"--geom", "data/b1_like.geom"}))
              .code == 4);
    CHECK(run({"rates", "--amplitude", "3.9e6/s", "--rprime", "0.9", "--tauss", "-18ms", "--gamma0", "1e5/s"}).code ==
          5);
    CHECK(run({"estimate", "vortex-profile", "--rho", "-1nm", "--p", "0.067cm2/s", "--d", "18cm2/s", "--rc", "100nm"})
              .code == 5);
    const fs::path tiny = fs::temp_directory_path() / "qpdyn_tiny.csv";
    write_text_file(tiny, "t,gamma\n1e-3,5e4\n2e-3,4e4\n");
    CHECK(run({"fit", tiny.string()}).code == 7);
    fs::remove(tiny);

    const Run help = run({"pde", "evolve", "--help"});
    CHECK(help.code == 0);
    CHECK_THAT(help.out, ContainsSubstring("--tinj"));
    CHECK_THAT(help.out, ContainsSubstring("Exit codes"));
    CHECK(run({"--version"}).code == 0);
}

TEST_CASE("golden outputs", "[golden]") {
    InSourceDir here;
    const std::vector<std::string> trap{"--p", "0.067cm2/s", "--d", "18cm2/s"};
    const std::vector<std::pair<std::string, std::vector<std::string>>> cases{
        {"fit.json", {"fit", "data/b1_like_trace.csv"}},
        {"fit_relative.csv", {"fit", "data/b1_like_trace.csv", "--weighting", "relative", "--out", "csv"}},
        {"rates.json", {"rates", "--amplitude", "3.9e6/s", "--rprime", "0.9", "--tauss", "18ms", "--gamma0", "1/9.5us"}},
        {"eigenrate.json", cat({"eigenrate", "--geom", "data/b1_like.geom", "--nl", "1", "--nr", "0"}, trap)},
        {"eigenrate_reduced.json",
         cat({"eigenrate", "--geom", "data/b3_like.geom", "--nl", "2", "--nr", "3", "--s0", "30/s", "--form", "reduced"},
             trap)},
        {"steps.csv", cat({"steps", "--geom", "data/b1_like.geom", "--max", "6", "--out", "csv"}, trap)},
        {"steps_pairs.json", cat({"steps", "--geom", "data/b2_like.geom", "--series", "pairs", "--max", "3"}, trap)},
        {"sweep.csv", cat({"sweep", "--geom", "data/b2_like.geom", "--bk", "20mG", "--slope", "0.1/mG", "--bmin", "0mG",
                           "--bmax", "200mG", "--points", "11", "--out", "csv"},
                          trap)},
        {"pde_eigen.json",
         cat({"pde", "eigen", "--geom", "data/b1_like.geom", "--nl", "1", "--nr", "0", "--resolution", "20"}, trap)},
        {"pde_evolve.csv", cat({"pde", "evolve", "--geom", "data/b2_like.geom", "--nl", "0", "--nr", "0", "--s0", "50/s",
                                "--r", "1/170ns", "--tinj", "6us", "--amp", "10/s", "--tmax", "2ms", "--points", "21",
                                "--resolution", "20", "--out", "csv"},
                               trap)},
        {"synth.csv", {"synth", "--params", "amplitude=3.9e6/s,rprime=0.9,tauss=18ms,gamma0=1/9.5us", "--noise", "0.02",
                       "--seed", "3", "--tgrid", "lin:200us:40ms:12", "--out", "csv"}},
        {"estimate_injection.json",
         {"estimate", "injection", "--rj", "8kOhm", "--qin", "2e6", "--qout", "1e5", "--qj", "1.1e4"}},
        {"estimate_qprate.json", {"estimate", "qprate", "--rj", "8kOhm"}},
        {"estimate_trapping_power.json", {"estimate", "trapping-power", "--rcore", "100nm", "--taun", "80ns"}},
        {"estimate_freqshift.json", {"estimate", "freqshift", "--gamma", "1e4/s"}},
        {"estimate_vortex_profile.json",
         {"estimate", "vortex-profile", "--rho", "80um", "--p", "0.067cm2/s", "--d", "18cm2/s", "--rc", "100nm"}},
        {"t1fit.json", {"t1fit", "data/t1_points.csv"}},
    };
    const bool regen = std::getenv("QPDYN_REGEN_GOLDEN") != nullptr;
    for (const auto& [name, args] : cases) {
        INFO(name);
        const Run r = run(cat(args, {"--no-timestamp"}));
        INFO(r.err);
        REQUIRE(r.code == 0);
        const fs::path file = fs::path(QPDYN_GOLDEN_DIR) / name;
        if (regen) write_text_file(file, r.out);
        REQUIRE(fs::exists(file));
        CHECK(read_text_file(file) == r.out);
        CHECK(run(cat(args, {"--no-timestamp"})).out == r.out);
    }
}
