#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "mttsiam/cli.hpp"
#include "mttsiam/eval_harness.hpp"

namespace fs = std::filesystem;

namespace {

struct CliRun {
    int code;
    std::string out, err;
};

CliRun cli(std::vector<std::string> args) {
    args.insert(args.begin(), "mttsiam");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = mttsiam::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("mttsiam_cli_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Every regular file under `dir`, relative path -> bytes.
std::map<std::string, std::string> tree(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = slurp(e.path());
    return files;
}

fs::path write_config(const std::string& name, const std::string& body) {
    const fs::path p = fs::temp_directory_path() / ("mttsiam_cli_" + name + ".cfg");
    std::ofstream(p) << body;
    return p;
}

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
    EXPECT_EQ(cli({}).code, 2);
    EXPECT_EQ(cli({"frobnicate"}).code, 2);
    const CliRun r = cli({"simulate", "--bogus"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("--bogus"), std::string::npos);
    EXPECT_EQ(cli({"train-combinet", "--synthetic", "--corpus", "."}).code, 2);
    EXPECT_EQ(cli({"simulate", "--config", "/nonexistent.cfg"}).code, 2);
}

TEST(Cli, HelpExitsZero) {
    const CliRun r = cli({"--help"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("ablate"), std::string::npos);
}

TEST(Cli, RuntimeErrorsExitOne) {
    const fs::path cfg = write_config("badkey", "bag.nope = 1\n");
    const CliRun r = cli({"simulate", "--config", cfg.string(), "--out", scratch("bad").string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("unknown key 'bag.nope'"), std::string::npos);
    EXPECT_EQ(cli({"track", "--scenario", "no_such", "--out", scratch("bad2").string()}).code, 1);
}

TEST(Cli, SimulateIsByteIdenticalOnRerun) {
    const fs::path a = scratch("sim_a"), b = scratch("sim_b");
    ASSERT_EQ(cli({"simulate", "--scenario", "sine_occlusion", "--export", "got10k", "--out", a.string()}).code, 0);
    ASSERT_EQ(cli({"simulate", "--scenario", "sine_occlusion", "--export", "got10k", "--out", b.string()}).code, 0);
    auto ta = tree(a);
    EXPECT_TRUE(ta.count("sine_occlusion.world.csv"));
    EXPECT_TRUE(ta.count("settings.cfg"));
    EXPECT_EQ(ta, tree(b));
    const fs::path c = scratch("sim_c");
    ASSERT_EQ(cli({"simulate", "--scenario", "sine_occlusion", "--seed", "5", "--out", c.string()}).code, 0);
    EXPECT_NE(slurp(c / "sine_occlusion.world.csv"), ta["sine_occlusion.world.csv"]);
}

TEST(Cli, TrackThenEvalOnCleanScenario) {
    const fs::path t = scratch("track"), e = scratch("eval");
    const CliRun tr = cli({"track", "--scenario", "cv_clean", "--out", t.string()});
    ASSERT_EQ(tr.code, 0) << tr.err;
    EXPECT_TRUE(fs::exists(t / "cv_clean.results.csv"));
    const CliRun ev = cli({"eval", "--results", t.string(), "--annotations", (t / "annotations").string(), "--out",
                        e.string()});
    ASSERT_EQ(ev.code, 0) << ev.err;
    const std::string report = slurp(e / "report.txt");
    const auto at = report.find("\nsuccess_auc = ");
    ASSERT_NE(at, std::string::npos) << report;
    EXPECT_GT(std::stod(report.substr(at + 15)), 0.8);

    const fs::path t2 = scratch("track2");
    ASSERT_EQ(cli({"track", "--scenario", "cv_clean", "--out", t2.string()}).code, 0);
    EXPECT_EQ(tree(t), tree(t2));
}

TEST(Cli, TrackAlongAnnotations) {
    const fs::path t = scratch("along");
    const CliRun r = cli({"track", "--annotations", MTTSIAM_TEST_DATA "/otb_toy", "--out", t.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    for (const char* name : {"Ball", "Car", "Dog"}) EXPECT_TRUE(fs::exists(t / (std::string(name) + ".results.csv")));
}

TEST(Cli, EvalLengthMismatchNamesBothLengths) {
    const fs::path dir = scratch("mismatch");
    fs::create_directories(dir);
    std::ofstream(dir / "Ball.results.csv") << mttsiam::kResultsHeader << "\n0,10,20,40,60,1,1,TRACKED\n";
    const CliRun r = cli({"eval", "--results", (dir / "Ball.results.csv").string(), "--annotations",
                       MTTSIAM_TEST_DATA "/otb_toy/Ball", "--out", (dir / "out").string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("1 predictions vs 5 ground-truth frames"), std::string::npos) << r.err;
}

TEST(Cli, EvalFixture) {
    const fs::path out = scratch("evalfix");
    const CliRun r = cli({"eval", "--results", MTTSIAM_TEST_DATA "/Ball.results.csv", "--annotations",
                       MTTSIAM_TEST_DATA "/otb_toy/Ball", "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("precision_at_20 = 0.6"), std::string::npos) << r.out;
}

TEST(Cli, TrainSmallSyntheticIsReproducible) {
    const fs::path cfg = write_config("train",
                                      "corpus.sequences = 10\ncorpus.frames = 20\ncombinet.epochs = 3\n"
                                      "combinet.batch_size = 64\ncombinet.channels = 4\ncombinet.dense_width = 8\n");
    const fs::path a = scratch("train_a"), b = scratch("train_b");
    const CliRun ra = cli({"train-combinet", "--synthetic", "--config", cfg.string(), "--out", a.string()});
    ASSERT_EQ(ra.code, 0) << ra.err;
    ASSERT_EQ(cli({"train-combinet", "--synthetic", "--config", cfg.string(), "--out", b.string()}).code, 0);
    EXPECT_EQ(tree(a), tree(b));
    EXPECT_NO_THROW(mttsiam::load_model((a / "model.txt").string()));
    const CliRun tr = cli({"track", "--scenario", "cv_clean", "--model", (a / "model.txt").string(), "--out",
                        scratch("train_track").string()});
    EXPECT_EQ(tr.code, 0) << tr.err;
}

TEST(Cli, AblateSubset) {
    const fs::path a = scratch("ablate");
    const CliRun r = cli({"ablate", "--scenarios", "cv_clean,walk_clean", "--threads", "2", "--out", a.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const std::string table = slurp(a / "ablation.csv");
    EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 25);
    EXPECT_EQ(cli({"ablate", "--scenarios", "nope", "--out", a.string()}).code, 1);
}
