#include "doctest.h"

#include <fstream>
#include <sstream>

#include "good/cli.hpp"
#include "good/errors.hpp"
#include "good/evalbench.hpp"
#include "good/runconfig.hpp"
#include "helpers.hpp"

using namespace good;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run cli(const std::vector<std::string>& args) {
    std::ostringstream out;
    std::ostringstream err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream(p) << text;
}

const char* kSmallConfig =
    "# smoke run\n"
    "num_nodes = 50\n"
    "edge_density = 0.08   # denser so 50 nodes carry signal\n"
    "epochs = 5\n"
    "hidden_dim = 8\n"
    "head_hidden = 8\n"
    "batch_size = 64\n"
    "seeds = 1,2\n";

// A generated 50-node dataset shared by the command tests.
const fs::path& smoke_dir() {
    static const fs::path dir = [] {
        const fs::path d = testutil::temp_dir("cli_smoke");
        write_file(d / "small.cfg", kSmallConfig);
        REQUIRE(cli({"generate", "--config", (d / "small.cfg").string(), "--out", (d / "data").string()}).code == 0);
        return d;
    }();
    return dir;
}

nlohmann::json without_clock(const std::string& line) {
    auto j = nlohmann::json::parse(line);
    j.erase("wall_clock_s");
    return j;
}

} // namespace

TEST_CASE("run config text form") {
    SUBCASE("defaults round trip") {
        const RunConfig def;
        CHECK_NOTHROW(def.validate());
        const RunConfig back = parse_run_config(format_run_config(def));
        CHECK(format_run_config(back) == format_run_config(def));
    }
    SUBCASE("values, lists and comments") {
        const RunConfig c = parse_run_config(
            "seed = 7  # both halves\n"
            "target_mixture = 0.6, 0.4\n"
            "num_known_contexts = 2\n"
            "widths = 16,12,8\n"
            "schedule = 2-1\n"
            "variant = GOOD_LC\n"
            "uniform_coefficients = true\n"
            "aggregator = dstack\n"
            "suite = GOOD, SISO\n"
            "coefficients = run/coefficients.json\n");
        CHECK(c.synth.seed == 7);
        CHECK(c.train.seed == 7);
        CHECK(c.synth.target_mixture == std::vector<double>{0.6, 0.4});
        CHECK(c.train.widths == std::vector<std::size_t>{16, 12, 8});
        CHECK(c.train.schedule == std::vector<std::size_t>{2, 1});
        CHECK(c.train.variant == Variant::GoodLc);
        CHECK(c.train.uniform_coefficients);
        CHECK(c.train.aggregator == Aggregator::DStack);
        CHECK(c.suite == std::vector<Member>{Member::Good, Member::Siso});
        CHECK(c.coefficients == "run/coefficients.json");
        CHECK(format_run_config(parse_run_config(format_run_config(c))) == format_run_config(c));
    }
    SUBCASE("errors name the key and line") {
        const auto message = [](const std::string& text) {
            try {
                parse_run_config(text, "f");
            } catch (const ConfigError& e) {
                return std::string(e.what());
            }
            return std::string("no error");
        };
        CHECK(message("epochs = 3\nbogus = 1\n").find("f:2") != std::string::npos);
        CHECK(message("bogus = 1\n").find("bogus") != std::string::npos);
        CHECK(message("epochs = 3\nepochs = 4\n").find("twice") != std::string::npos);
        CHECK(message("epochs = three\n").find("epochs") != std::string::npos);
        CHECK(message("epochs = -3\n").find("epochs") != std::string::npos);
        CHECK(message("in_domain = yes\n").find("in_domain") != std::string::npos);
        CHECK(message("just words\n").find("key = value") != std::string::npos);
        CHECK(message("suite = GOOD, GCN\n").find("GCN") != std::string::npos);
        CHECK(message("variant = BEST\n") != "no error");
    }
    SUBCASE("validation") {
        RunConfig c = parse_run_config("edge_density = 1.5\n");
        CHECK_THROWS_AS(c.validate(), ConfigError);
        c = parse_run_config("suite =\n");
        CHECK_THROWS_AS(c.validate(), ConfigError);
        c = parse_run_config("dropout_rate = 1\n");
        CHECK_THROWS_AS(c.validate(), ConfigError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_run_config("/nonexistent/good.cfg"), IoError);
    }
}

TEST_CASE("usage errors") {
    CHECK(cli({}).code == kExitConfig);
    CHECK(cli({"frobnicate"}).code == kExitConfig);
    CHECK(cli({"train", "--data", "x"}).code == kExitConfig);
    CHECK(cli({"--help"}).code == kExitOk);
    CHECK(cli({"generate", "--config", "/nonexistent/x.cfg", "--out", "x"}).code == kExitIo);
}

TEST_CASE("generate") {
    const fs::path dir = testutil::temp_dir("cli_generate");
    write_file(dir / "small.cfg", kSmallConfig);
    const std::string cfg = (dir / "small.cfg").string();
    const Run a = cli({"generate", "--config", cfg, "--out", (dir / "a").string()});
    REQUIRE(a.code == 0);
    CHECK(a.out.find("manifest.json") != std::string::npos);
    for (const char* f : {"edges.csv", "features.csv", "manifest.json", "config.txt"}) {
        CHECK(fs::exists(dir / "a" / f));
    }
    REQUIRE(cli({"generate", "--config", cfg, "--out", (dir / "b").string(), "--seed", "9"}).code == 0);
    CHECK(slurp(dir / "a" / "edges.csv") != slurp(dir / "b" / "edges.csv"));
    REQUIRE(cli({"generate", "--config", cfg, "--out", (dir / "c").string()}).code == 0);
    CHECK(slurp(dir / "a" / "edges.csv") == slurp(dir / "c" / "edges.csv"));

    write_file(dir / "bad.cfg", "edge_density = 1.5\n");
    const Run bad = cli({"generate", "--config", (dir / "bad.cfg").string(), "--out", (dir / "d").string()});
    CHECK(bad.code == kExitConfig);
    CHECK(bad.err.find("edge_density") != std::string::npos);
}

TEST_CASE("train and evaluate") {
    const fs::path& d = smoke_dir();
    const std::string cfg = (d / "small.cfg").string();
    const std::string data = (d / "data").string();

    const Run first = cli({"train", "--config", cfg, "--data", data, "--out", (d / "run1").string()});
    REQUIRE(first.code == 0);
    for (const char* f : {"model.ckpt", "epochs.jsonl", "metrics.jsonl", "config.txt"}) {
        CHECK(fs::exists(d / "run1" / f));
    }
    REQUIRE(cli({"train", "--config", cfg, "--data", data, "--out", (d / "run2").string()}).code == 0);
    CHECK(slurp(d / "run1" / "epochs.jsonl") == slurp(d / "run2" / "epochs.jsonl"));
    CHECK(without_clock(slurp(d / "run1" / "metrics.jsonl")) == without_clock(slurp(d / "run2" / "metrics.jsonl")));
    CHECK(parse_run_config(slurp(d / "run1" / "config.txt")).train.epochs == 5);

    SUBCASE("evaluate reproduces the logged test metrics") {
        const fs::path rows = d / "eval.jsonl";
        fs::remove(rows);
        const Run ev = cli({"evaluate", "--checkpoint", (d / "run1" / "model.ckpt").string(), "--data", data,
                            "--jsonl", rows.string()});
        REQUIRE(ev.code == 0);
        const auto logged = nlohmann::json::parse(slurp(d / "run1" / "metrics.jsonl"));
        const auto again = nlohmann::json::parse(slurp(rows));
        CHECK(again["roc_auc"] == logged["roc_auc"]);
        CHECK(again["accuracy"] == logged["accuracy"]);
    }
    SUBCASE("GOOD_LC coefficients drive GOOD_LC_PLUS") {
        write_file(d / "lc.cfg", std::string("variant = GOOD_LC\n") + kSmallConfig);
        REQUIRE(cli({"train", "--config", (d / "lc.cfg").string(), "--data", data, "--out", (d / "lc").string()})
                    .code == 0);
        REQUIRE(fs::exists(d / "lc" / "coefficients.json"));
        const Run plus = cli({"evaluate", "--checkpoint", (d / "run1" / "model.ckpt").string(), "--data", data,
                              "--coefficients", (d / "lc" / "coefficients.json").string()});
        CHECK(plus.code == 0);
        CHECK(plus.out.find("GOOD_LC_PLUS") != std::string::npos);
        const Run wrong = cli({"evaluate", "--checkpoint", (d / "lc" / "model.ckpt").string(), "--data", data,
                               "--coefficients", (d / "lc" / "coefficients.json").string()});
        CHECK(wrong.code == kExitIncompatible);

        write_file(d / "plus.cfg", std::string("variant = GOOD_LC_PLUS\ncoefficients = ") +
                                       (d / "lc" / "coefficients.json").string() + "\n" + kSmallConfig);
        CHECK(cli({"train", "--config", (d / "plus.cfg").string(), "--data", data, "--out", (d / "plus").string()})
                  .code == 0);
    }
    SUBCASE("GOOD_LC_PLUS without coefficients is a config error") {
        write_file(d / "p.cfg", std::string("variant = GOOD_LC_PLUS\n") + kSmallConfig);
        CHECK(cli({"train", "--config", (d / "p.cfg").string(), "--data", data, "--out", (d / "p").string()}).code ==
              kExitConfig);
    }
    SUBCASE("missing and incompatible inputs") {
        CHECK(cli({"evaluate", "--checkpoint", (d / "absent.ckpt").string(), "--data", data}).code == kExitIo);
        CHECK(cli({"train", "--config", cfg, "--data", (d / "absent").string(), "--out", (d / "x").string()}).code ==
              kExitIo);
        write_file(d / "other.cfg", "num_nodes = 60\nedge_density = 0.08\n");
        REQUIRE(cli({"generate", "--config", (d / "other.cfg").string(), "--out", (d / "other").string()}).code == 0);
        CHECK(cli({"evaluate", "--checkpoint", (d / "run1" / "model.ckpt").string(), "--data",
                   (d / "other").string()})
                  .code == kExitIncompatible);
    }
    SUBCASE("divergence") {
        write_file(d / "div.cfg", std::string("learning_rate = 1e300\n") + kSmallConfig);
        const Run div = cli({"train", "--config", (d / "div.cfg").string(), "--data", data, "--out",
                             (d / "div").string()});
        CHECK(div.code == kExitDivergence);
        CHECK(div.err.find("diverged") != std::string::npos);
    }
}

TEST_CASE("gradcheck command") {
    const Run ok = cli({"gradcheck"});
    CHECK(ok.code == 0);
    for (const char* name : {"subblock", "residual_stack", "link_head", "disentangler", "link_loss", "disentangle_loss"}) {
        CHECK(ok.out.find(name) != std::string::npos);
    }
    const Run bad = cli({"gradcheck", "--inject-fault", "hadamard"});
    CHECK(bad.code == kExitVerifyFailed);
    CHECK(bad.out.find("gradient check failed: ") != std::string::npos);
    CHECK(bad.out.find("link_head") != std::string::npos);
}

TEST_CASE("report command") {
    const fs::path dir = testutil::temp_dir("cli_report");
    SUBCASE("empty directory") {
        CHECK(cli({"report", "--runs", dir.string()}).code == kExitIo);
        CHECK(cli({"report", "--runs", (dir / "absent").string()}).code == kExitIo);
    }
    SUBCASE("aggregation and robustness") {
        fs::create_directories(dir / "a");
        fs::create_directories(dir / "b");
        const std::vector<std::string> members{"GOOD", "GOOD_LC", "GOOD_LC_PLUS", "ABLATED", "SISO"};
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            for (const std::string& m : members) {
                MetricsReport r;
                r.member = m;
                r.seed = seed;
                r.scores = {0.9, 0.4, 0.6, 0.2};
                r.labels = {1, 0, 1, 0};
                r.accuracy = accuracy(r.scores, r.labels);
                r.roc_auc = roc_auc(r.scores, r.labels);
                append_jsonl(dir / (seed % 2 ? "a" : "b") / "metrics.jsonl", r);
            }
        }
        std::ofstream(dir / "a" / "metrics.jsonl", std::ios::app) << "{broken\n";
        const Run rep = cli({"report", "--runs", dir.string(), "--csv", (dir / "summary.csv").string()});
        CHECK(rep.code == 0);
        CHECK(rep.err.find("warning") != std::string::npos);
        for (const std::string& m : members) {
            CHECK(rep.out.find(m) != std::string::npos);
        }
        CHECK(std::count(rep.out.begin(), rep.out.end(), '\n') == 7);
        const std::string csv = slurp(dir / "summary.csv");
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
        CHECK(csv.find("GOOD,5,0,1,0,1,0") != std::string::npos);
    }
}

TEST_CASE("experiment command") {
    const fs::path& d = smoke_dir();
    write_file(d / "exp.cfg", std::string(kSmallConfig) + "suite = GOOD, ABLATED\nepochs = 2\n");
    // epochs appears twice above, which the parser rejects
    CHECK(cli({"experiment", "--config", (d / "exp.cfg").string(), "--data", (d / "data").string(), "--out",
               (d / "exp").string()})
              .code == kExitConfig);
    write_file(d / "exp.cfg", "num_nodes = 50\nepochs = 2\nhidden_dim = 8\nhead_hidden = 8\nbatch_size = 64\n"
                              "suite = GOOD, ABLATED\nseeds = 1, 2\n");
    const Run run = cli({"experiment", "--config", (d / "exp.cfg").string(), "--data", (d / "data").string(), "--out",
                         (d / "exp").string()});
    REQUIRE(run.code == 0);
    CHECK(run.out.find("ABLATED") != std::string::npos);
    std::vector<std::string> warnings;
    CHECK(read_jsonl(d / "exp" / "metrics.jsonl", warnings).size() == 4);
    CHECK(fs::exists(d / "exp" / "summary.txt"));
    const Run rep = cli({"report", "--runs", (d / "exp").string()});
    CHECK(rep.code == 0);
    CHECK(std::count(rep.out.begin(), rep.out.end(), '\n') == 4);
}
