#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out;
    std::string err;
};

fs::path scratch(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / ("kkreg_test_cli_" + std::to_string(::getpid())) / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string read_text(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream(path) << text;
}

//! Runs the CLI in `dir`, capturing stdout and stderr.
Run run_cli(const fs::path& dir, const std::string& args)
{
    const std::string cmd = "cd '" + dir.string() + "' && '" KKREG_CLI_PATH "' " + args + " > stdout.txt 2> stderr.txt";
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = read_text(dir / "stdout.txt");
    r.err = read_text(dir / "stderr.txt");
    return r;
}

//! One training bag labelled 7, one labelled 3, far apart.
void write_toy(const fs::path& dir)
{
    write_text(dir / "train.csv", "bag_id,x0\n0,0.10\n0,0.15\n0,0.20\n1,0.80\n1,0.85\n1,0.90\n");
    write_text(dir / "labels.csv", "bag_id,y\n0,7\n1,3\n");
    write_text(dir / "self.csv", "bag_id,x0\n9,0.10\n9,0.15\n9,0.20\n");
    write_text(dir / "mid.csv", "bag_id,x0\n4,0.45\n4,0.5\n4,0.55\n");
}

} // namespace

TEST(Cli, SelfPredictionRecoversLabel)
{
    const auto dir = scratch("self");
    write_toy(dir);
    const auto r = run_cli(dir, "fit-predict --train train.csv --labels labels.csv --test self.csv --b 0.05 --h 0.1");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out, "bag_id,y_pred\n9,7\n");
}

TEST(Cli, TinyBandwidthPredictsZeroWithWarning)
{
    const auto dir = scratch("tiny");
    write_toy(dir);
    const auto r =
        run_cli(dir, "fit-predict --train train.csv --labels labels.csv --test mid.csv --b 0.05 --h 1e-9 --out p.csv");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read_text(dir / "p.csv"), "bag_id,y_pred\n4,0\n");
    EXPECT_NE(r.err.find("warning"), std::string::npos);
    EXPECT_NE(r.err.find("bag_id 4"), std::string::npos);
}

TEST(Cli, MissingLabelIsDataError)
{
    const auto dir = scratch("missing");
    write_toy(dir);
    write_text(dir / "labels.csv", "bag_id,y\n0,7\n");
    const auto r = run_cli(dir, "fit-predict --train train.csv --labels labels.csv --test self.csv --b 0.05 --h 0.1");
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("bag_id 1"), std::string::npos);
}

TEST(Cli, MalformedCsvIsDataError)
{
    const auto dir = scratch("malformed");
    write_toy(dir);
    write_text(dir / "train.csv", "bag_id,x0\n0,0.1\n1,oops\n");
    const auto r = run_cli(dir, "fit-predict --train train.csv --labels labels.csv --test self.csv --b 0.05 --h 0.1");
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("train.csv:3"), std::string::npos);
}

TEST(Cli, DimensionMismatchIsDataError)
{
    const auto dir = scratch("dims");
    write_toy(dir);
    write_text(dir / "test2.csv", "bag_id,x0,x1\n0,0.1,0.2\n");
    const auto r = run_cli(dir, "fit-predict --train train.csv --labels labels.csv --test test2.csv --b 0.05 --h 0.1");
    EXPECT_EQ(r.code, 3);
}

TEST(Cli, UsageErrors)
{
    const auto dir = scratch("usage");
    write_toy(dir);
    EXPECT_EQ(run_cli(dir, "study bogus --out x").code, 2);
    EXPECT_EQ(run_cli(dir, "").code, 2);
    EXPECT_EQ(run_cli(dir, "fit-predict --train train.csv --labels labels.csv --test self.csv --b 0.05").code, 2);
    EXPECT_EQ(run_cli(dir, "fit-predict --train train.csv --labels labels.csv --test self.csv --b -1 --h 1").code, 2);
    EXPECT_EQ(run_cli(dir, "fit-predict --train train.csv --labels labels.csv --test self.csv --b 0.1 --h 1 --distance l3")
                  .code,
              2);
    EXPECT_EQ(run_cli(dir, "rate --beta 2 --d 1 --k 1 --m 10 --n 10").code, 2);
}

TEST(Cli, ConfigFileWithFlagOverride)
{
    const auto dir = scratch("config");
    write_toy(dir);
    write_text(dir / "run.cfg", "# bandwidths\nb = 0.05\nh = 1e-9\n");
    auto r = run_cli(dir, "fit-predict --config run.cfg --train train.csv --labels labels.csv --test mid.csv");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out, "bag_id,y_pred\n4,0\n");
    // the command-line h wins over the file; with h = 100 both bags weigh almost equally
    r = run_cli(dir, "fit-predict --config run.cfg --h 100 --train train.csv --labels labels.csv --test mid.csv");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out, "bag_id,y_pred\n4,0\n");
    write_text(dir / "bad.cfg", "nonsense = 1\n");
    EXPECT_EQ(run_cli(dir, "fit-predict --config bad.cfg --train train.csv --labels labels.csv --test mid.csv").code, 2);
}

TEST(Cli, SavedModelPredictsIdentically)
{
    const auto dir = scratch("model");
    write_toy(dir);
    auto a = run_cli(dir, "fit-predict --train train.csv --labels labels.csv --test mid.csv --b 0.3 --h 5 --model-out m");
    ASSERT_EQ(a.code, 0) << a.err;
    auto b = run_cli(dir, "predict --model m --test mid.csv");
    ASSERT_EQ(b.code, 0) << b.err;
    EXPECT_EQ(a.out, b.out);
}

TEST(Cli, SelectHoldsOutAndPredicts)
{
    const auto dir = scratch("select");
    const auto g = run_cli(dir, "generate --task beta-skewness --n-per-bag 50 --n-train 20 --n-val 2 --n-test 3 --seed 5 --out data");
    ASSERT_EQ(g.code, 0) << g.err;
    const auto r = run_cli(dir, "fit-predict --train data/points.csv --labels data/labels.csv --test data/points.csv "
                                "--select --trials 3 --cells 256 --seed 2");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.err.find("selected b="), std::string::npos);
    EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 26);
}

TEST(Cli, GenerateIsByteReproducible)
{
    const auto dir = scratch("generate");
    for (const char* task : {"beta-skewness", "gauss-entropy"}) {
        const std::string common = std::string("generate --task ") + task + " --n-per-bag 20 --n-train 5 --n-val 2 --n-test 2 --seed 3 --noise 0.1";
        ASSERT_EQ(run_cli(dir, common + " --out a").code, 0);
        ASSERT_EQ(run_cli(dir, common + " --out b --threads 2").code, 0);
        for (const char* f : {"points.csv", "labels.csv", "covariates.csv", "manifest"}) {
            const auto ta = read_text(dir / "a" / f);
            EXPECT_FALSE(ta.empty()) << f;
            EXPECT_EQ(ta, read_text(dir / "b" / f)) << task << ' ' << f;
        }
        ASSERT_EQ(run_cli(dir, std::string("generate --task ") + task +
                                   " --n-per-bag 20 --n-train 5 --n-val 2 --n-test 2 --seed 4 --noise 0.1 --out c")
                      .code,
                  0);
        EXPECT_NE(read_text(dir / "a" / "points.csv"), read_text(dir / "c" / "points.csv"));
    }
}

TEST(Cli, RateReport)
{
    const auto dir = scratch("rate");
    auto r = run_cli(dir, "rate --beta 1 --d 1 --k 1 --m 1e6 --n 1e19");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("regime=m_limited\n"), std::string::npos);
    EXPECT_NE(r.out.find("exponent_base=m\n"), std::string::npos);
    EXPECT_NE(r.out.find("exponent=-0.33333333333333331\n"), std::string::npos);
    r = run_cli(dir, "rate --beta 1 --d 1 --k 1 --m 1e6 --n 1e12");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("regime=n_limited\n"), std::string::npos);
    EXPECT_NE(r.out.find("exponent=-0.1111111111111111\n"), std::string::npos);
    r = run_cli(dir, "rate --beta 1 --d 1 --k 1 --m 100 --n 1e6");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("near_boundary=true\n"), std::string::npos);
    EXPECT_NE(r.out.find("alt_regime="), std::string::npos);
}

TEST(Cli, StudiesWriteReports)
{
    const auto dir = scratch("study");
    auto r = run_cli(dir, "study kde-risk --out kr --reps 3 --seed 1");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("slope="), std::string::npos);
    const auto summary = read_text(dir / "kr" / "summary.csv");
    EXPECT_EQ(std::count(summary.begin(), summary.end(), '\n'), 6);
    const auto rows = read_text(dir / "kr" / "rows.csv");
    EXPECT_EQ(std::count(rows.begin(), rows.end(), '\n'), 16);

    r = run_cli(dir, "study doubling --out db --bags 60 --n-per-bag 300 --seed 2");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("d_hat="), std::string::npos);

    r = run_cli(dir, "study small-ball --out sb --bags 60 --n-per-bag 300 --seed 2 --radius 10");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("probability=1\n"), std::string::npos);
}
