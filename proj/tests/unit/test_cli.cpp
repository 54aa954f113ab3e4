#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mulma/errors.hpp"
#include "mulma_cli/cli.hpp"
#include "mulma_cli/config.hpp"

using namespace mulma;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    args.insert(args.begin(), "mulma");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("mulma-cli-" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

}  // namespace

TEST_SUITE("cli") {
    TEST_CASE("defaults merge and reject unknown keys") {
        cli::json doc = cli::default_config();
        cli::apply_override(doc, "system.n_tx=12");
        CHECK(doc["system"]["n_tx"] == 12);
        cli::apply_override(doc, "train.epochs=5");
        CHECK(doc["train"]["epochs"] == 5);
        CHECK_THROWS_AS(cli::apply_override(doc, "system.bogus=1"), ConfigError);
        CHECK_THROWS_AS(cli::apply_override(doc, "system.n_tx=\"many\""), ConfigError);
        CHECK_THROWS_AS(cli::apply_override(doc, "no-equals-sign"), ConfigError);
        CHECK(cli::embedded_config("fig5").has_value());
        CHECK_FALSE(cli::embedded_config("fig6").has_value());
        CHECK_NOTHROW(cli::validate_config(cli::default_config()));
    }

    TEST_CASE("exit codes") {
        CHECK(run({"-q", "--set", "bogus=1", "precode"}).code == 1);
        const Result infeasible = run({"-q", "--set", "algorithm=\"sas\"", "--set", "system.rx=[2,2,2,2]", "--set",
                                       "system.bits=[2,2,2,2]", "-o", scratch("infeasible").string(), "precode"});
        CHECK(infeasible.code == 2);
        CHECK(infeasible.err.find("N_R <= N_T/K") != std::string::npos);
        CHECK(run({"-q", "--set", "system.n_tx=0", "channel"}).code == 1);
        CHECK(run({"-q", "reproduce", "fig6"}).code == 1);
    }

    TEST_CASE("dry run prints the plan without writing") {
        const auto dir = scratch("dry");
        const Result r = run({"--dry-run", "-o", dir.string(), "ber"});
        CHECK(r.code == 0);
        CHECK(r.out.find("\"snr_db\"") != std::string::npos);
        CHECK_FALSE(std::filesystem::exists(dir / "ber_fas-nbd.csv"));
    }

    TEST_CASE("same seed gives byte-identical results") {
        const std::vector<std::string> common{"-q", "--seed", "7", "--set", "system.n_tx=8", "--set", "system.rx=[2,2]",
                                              "--set", "system.bits=[2,2]", "--set", "snr_db=[0,4]",
                                              "--set", "stop.max_bits=20000"};
        std::vector<std::filesystem::path> dirs{scratch("seed-a"), scratch("seed-b")};
        std::vector<std::string> csv;
        for (const auto& d : dirs) {
            auto args = common;
            args.insert(args.end(), {"-o", d.string(), "ber"});
            const Result r = run(args);
            REQUIRE(r.code == 0);
            std::filesystem::path found;
            for (const auto& e : std::filesystem::directory_iterator(d))
                if (e.path().extension() == ".csv") found = e.path();
            REQUIRE_FALSE(found.empty());
            CHECK(r.out.find(found.filename().string()) != std::string::npos);
            csv.push_back(slurp(found));
        }
        CHECK(csv[0] == csv[1]);
        CHECK(csv[0].rfind("snr_db,ber,bits,errors", 0) == 0);
    }

    TEST_CASE("channel and precoder artifacts") {
        const auto dir = scratch("artifacts");
        const Result r = run({"-q", "-o", dir.string(), "precode"});
        CHECK(r.code == 0);
        bool sidecar = false;
        for (const auto& e : std::filesystem::directory_iterator(dir))
            if (e.path().string().ends_with(".run.json")) sidecar = true;
        CHECK(sidecar);
    }
}
