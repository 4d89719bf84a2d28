#include "pqeig/cli_app.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

using namespace pqeig;
using namespace pqeig::cli;
using nlohmann::json;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "pqeig");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out;
    std::ostringstream err;
    const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

class TempDir {
public:
    TempDir() {
        path_ = std::filesystem::temp_directory_path() /
                ("pqeig_cli_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                 "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    std::string file(const std::string& name) const { return (path_ / name).string(); }
    std::string write(const std::string& name, const std::string& text) const {
        std::ofstream(file(name)) << text;
        return file(name);
    }

private:
    std::filesystem::path path_;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::vector<std::string>> read_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

} // namespace

TEST(ParseConfig, ValidDocuments) {
    const RunConfig a = parse_config("p=2\nq=2\nalpha=1\nbeta=1\ndim=1\nn=200");
    EXPECT_EQ(a.n, 200u);
    EXPECT_EQ(a.dim, 1);
    const RunConfig b = parse_config("p=3\nq=3\nalpha=1.5\nbeta=1.5\n# comment\n\n  n = 50  # trailing\n");
    EXPECT_DOUBLE_EQ(b.exponents.alpha, 1.5);
    EXPECT_EQ(b.n, 50u);
    const RunConfig c = parse_config("");
    EXPECT_EQ(c.n, 100u);
    EXPECT_EQ(c.fields, "fields.csv");
    EXPECT_TRUE(parse_config("fields=none").fields.empty());
    EXPECT_FALSE(parse_config("positive_init=false").solver.positive_init);
}

TEST(ParseConfig, AdmissibilityErrorNamesTheLine) {
    try {
        parse_config("p=2\nq=2\nalpha=1\nbeta=0.5", "base.cfg");
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("base.cfg:4"), std::string::npos) << msg;
        EXPECT_NE(msg.find("alpha/p + beta/q = 0.75 ≠ 1"), std::string::npos) << msg;
    }
}

TEST(ParseConfig, MalformedInput) {
    EXPECT_THROW(parse_config("p 2"), ParseError);
    EXPECT_THROW(parse_config("p="), ParseError);
    EXPECT_THROW(parse_config("colour=red"), ParseError);
    EXPECT_THROW(parse_config("n=abc"), ParseError);
    EXPECT_THROW(parse_config("n=1"), ParseError);
    EXPECT_THROW(parse_config("dim=3"), ParseError);
    EXPECT_THROW(parse_config("tol_kkt=-1"), ParseError);
    EXPECT_THROW(parse_config("p=1.6:3:0"), ParseError);
    EXPECT_THROW(parse_config("p=3:1.6:4"), ParseError);
    EXPECT_THROW(parse_config("q=2:3:4"), ParseError);
    EXPECT_THROW(parse_config("p=1.6:3:4\ntheta=1"), ParseError);
    try {
        parse_config("n=10\ncolour=red", "x.cfg");
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("x.cfg:2"), std::string::npos);
    }
}

TEST(ParseConfig, SweepRanges) {
    const RunConfig c = parse_config("p=1.6:3.0:15\nq=p\ntheta=0.5");
    ASSERT_TRUE(c.p_range.has_value());
    EXPECT_TRUE(c.q_follows_p);
    const auto pts = c.p_range->points();
    ASSERT_EQ(pts.size(), 15u);
    EXPECT_DOUBLE_EQ(pts.front(), 1.6);
    EXPECT_DOUBLE_EQ(pts.back(), 3.0);
    EXPECT_DOUBLE_EQ(pts[7], 2.3);
}

TEST(FormatNumber, RoundTripsAtFullPrecision) {
    for (double x : {0.1, std::numbers::pi, 1e-300, -2.5e17, 9.869604401089358}) {
        EXPECT_EQ(std::stod(format_number(x)), x);
    }
    EXPECT_EQ(format_number(std::nan("")), "null");
}

TEST(Run, SolveWritesJsonAndFields) {
    TempDir dir;
    const std::string cfg = dir.write("base.cfg", "p=2\nq=2\nalpha=1\nbeta=1\ndim=1\nn=200\n");
    const std::string fields = dir.file("fields.csv");
    const Outcome r = invoke({"solve", "--config", cfg, "--fields", fields});
    ASSERT_EQ(r.code, exit_ok) << r.err;
    const json j = json::parse(r.out);
    for (const char* key : {"lambda", "iterations", "converged", "termination", "kkt_u", "kkt_v",
                            "p", "q", "alpha", "beta", "dim", "n", "seed"}) {
        EXPECT_TRUE(j.contains(key)) << key;
    }
    const double pi2 = std::numbers::pi * std::numbers::pi;
    EXPECT_LT(std::abs(j["lambda"].get<double>() - pi2) / pi2, 0.01);
    EXPECT_TRUE(j["converged"].get<bool>());
    EXPECT_EQ(j["n"].get<int>(), 200);

    // The field CSV round-trips to the printed precision.
    const auto rows = read_csv(slurp(fields));
    ASSERT_EQ(rows.size(), 201u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"x", "u", "v"}));
    const Grid g = make_grid(1, 200, 1.0);
    for (std::size_t k = 1; k < rows.size(); ++k) {
        ASSERT_EQ(rows[k].size(), 3u);
        EXPECT_EQ(std::stod(rows[k][0]), g.coordinate(k - 1));
        EXPECT_EQ(format_number(std::stod(rows[k][1])), rows[k][1]);
    }
}

TEST(Run, FlagsOverrideConfigAndSolveIsDeterministic) {
    TempDir dir;
    const std::string cfg = dir.write("c.cfg", "p=2\nq=3\nalpha=1\nbeta=1.5\nn=40\nseed=3\nfields=none\n");
    const Outcome a = invoke({"solve", "--config", cfg, "--n", "30"});
    const Outcome b = invoke({"solve", "--config", cfg, "--n=30"});
    ASSERT_EQ(a.code, exit_ok) << a.err;
    EXPECT_EQ(a.out, b.out);
    EXPECT_EQ(json::parse(a.out)["n"].get<int>(), 30);
    EXPECT_EQ(json::parse(a.out)["seed"].get<int>(), 3);
    EXPECT_FALSE(std::filesystem::exists(dir.file("fields.csv")));
}

TEST(Run, TwoDimensionalFieldCsv) {
    TempDir dir;
    const std::string fields = dir.file("f2.csv");
    const Outcome r = invoke({"solve", "--dim", "2", "--n", "6", "--fields", fields, "--output",
                              dir.file("out.json")});
    ASSERT_EQ(r.code, exit_ok) << r.err;
    EXPECT_TRUE(r.out.empty());
    const auto rows = read_csv(slurp(fields));
    ASSERT_EQ(rows.size(), 37u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"x", "y", "u", "v"}));
    // Row-major with x fastest.
    EXPECT_EQ(std::stod(rows[2][0]), 2.0 / 7.0);
    EXPECT_EQ(std::stod(rows[2][1]), 1.0 / 7.0);
    EXPECT_EQ(std::stod(rows[7][1]), 2.0 / 7.0);
    EXPECT_NO_THROW(json::parse(slurp(dir.file("out.json"))));
}

TEST(Run, SweepCsv) {
    const Outcome r = invoke({"sweep", "--p", "1.6:3.0:4", "--q", "p", "--theta", "0.5", "--n", "40",
                              "--fields", "none"});
    ASSERT_EQ(r.code, exit_ok) << r.err;
    const auto rows = read_csv(r.out);
    ASSERT_EQ(rows.size(), 5u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"p", "q", "alpha", "beta", "lambda", "iterations",
                                                  "kkt_u", "kkt_v", "converged"}));
    for (std::size_t k = 1; k < rows.size(); ++k) {
        const double p = std::stod(rows[k][0]);
        EXPECT_EQ(std::stod(rows[k][1]), p);
        EXPECT_DOUBLE_EQ(std::stod(rows[k][2]), 0.5 * p);
        EXPECT_TRUE(std::isfinite(std::stod(rows[k][4])));
        EXPECT_EQ(rows[k][8], "1");
    }
}

TEST(Run, VerifyPasses) {
    const Outcome r = invoke({"verify", "--trials", "1000", "--seed", "1", "--n", "60"});
    ASSERT_EQ(r.code, exit_ok) << r.err;
    const json j = json::parse(r.out);
    EXPECT_TRUE(j["passed"].get<bool>());
    EXPECT_GE(j["jensen_min_gap"].get<double>(), -1e-14);
    EXPECT_LE(j["concavity_max_violation"].get<double>(), 1e-12);
    EXPECT_EQ(j["simplicity"].get<std::string>(), "simple");
    EXPECT_EQ(j["path_distinct_delta"].size(), 3u);
}

TEST(Run, Oracle) {
    const Outcome r = invoke({"oracle", "--p", "3", "--n", "199"});
    ASSERT_EQ(r.code, exit_ok) << r.err;
    const json j = json::parse(r.out);
    EXPECT_NEAR(j["pi_p"].get<double>(), 3.0469919990461722, 1e-15);
    EXPECT_NEAR(j["linear_lambda1"].get<double>(), std::numbers::pi * std::numbers::pi, 5e-3);
    EXPECT_EQ(invoke({"oracle", "--p", "1"}).code, exit_config);
    EXPECT_EQ(invoke({"solve", "--p", "3"}).code, exit_config);
}

TEST(Run, ConfigurationErrorsExitTwo) {
    TempDir dir;
    const std::string bad = dir.write("bad.cfg", "p=2\nq=2\nalpha=1\nbeta=0.5\n");
    const Outcome a = invoke({"solve", "--config", bad});
    EXPECT_EQ(a.code, exit_config);
    EXPECT_NE(a.err.find("alpha/p + beta/q = 0.75"), std::string::npos) << a.err;
    EXPECT_NE(a.err.find("bad.cfg:4"), std::string::npos) << a.err;

    EXPECT_EQ(invoke({"solve", "--config", dir.file("missing.cfg")}).code, exit_config);
    EXPECT_EQ(invoke({"solve", "--colour", "red"}).code, exit_config);
    EXPECT_EQ(invoke({"solve", "--n"}).code, exit_config);
    EXPECT_EQ(invoke({"solve", "--p", "1.6:3:4"}).code, exit_config);
    EXPECT_EQ(invoke({"frobnicate"}).code, exit_config);
    EXPECT_EQ(invoke({}).code, exit_config);
}

TEST(Run, SolverFailureExitsOne) {
    // An unconvergeable multi-start has no converged run to judge.
    const Outcome r = invoke({"verify", "--max_iters", "2", "--n", "30", "--trials", "10"});
    EXPECT_EQ(r.code, exit_failed);
    EXPECT_FALSE(r.err.empty());
}
