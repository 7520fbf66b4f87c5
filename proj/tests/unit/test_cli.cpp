#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "lerp_cli_test";

void write(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << text;
}

std::string read(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Runs the binary with stdout and stderr captured to `log`; returns the exit code.
int run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(LERP_CLI_PATH) + " --threads 1 " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(kRoot);
    write(kRoot / "data/train.txt", "a\tparent\tb\nb\tparent\tc\na\tparent\td\nd\tparent\te\nc\tsibling\te\n");
    write(kRoot / "data/valid.txt", "e\tsibling\tc\n");
    write(kRoot / "data/test.txt", "b\tsibling\td\n");
    write(kRoot / "config.json",
          R"({"m": 3, "T": 2, "K": 2, "rules_per_relation": 2, "epochs": 2, "batch_size": 4, "seed": 3})");
  }
};

}  // namespace

TEST_F(Cli, TrainEvaluateExtractDump) {
  const auto out = kRoot / "run";
  ASSERT_EQ(run("train --data " + (kRoot / "data").string() + " --config " + (kRoot / "config.json").string() +
                    " --out " + out.string(),
                kRoot / "train.out"),
            0)
      << read(kRoot / "train.out");
  EXPECT_TRUE(fs::exists(out / "epoch-001"));
  EXPECT_TRUE(fs::exists(out / "final"));
  EXPECT_NE(read(out / "train.log").find("epoch 2 done"), std::string::npos);

  ASSERT_EQ(run("evaluate --data " + (kRoot / "data").string() + " --ckpt " + (out / "final").string() +
                    " --report " + (kRoot / "report.json").string(),
                kRoot / "eval.out"),
            0)
      << read(kRoot / "eval.out");
  EXPECT_NE(read(kRoot / "report.json").find("\"mrr\""), std::string::npos);
  EXPECT_TRUE(fs::exists(kRoot / "report.json.txt"));

  ASSERT_EQ(run("extract-rules --ckpt " + (out / "final").string() + " --out " + (kRoot / "rules.txt").string(),
                kRoot / "extract.out"),
            0);
  EXPECT_NE(read(kRoot / "rules.txt").find("⇒"), std::string::npos);
  EXPECT_TRUE(fs::exists(kRoot / "rules.txt.functions"));

  ASSERT_EQ(run("dump-lerp --data " + (kRoot / "data").string() + " --ckpt " + (out / "final").string() +
                    " --out " + (kRoot / "lerp.tsv").string(),
                kRoot / "dump.out"),
            0);
  EXPECT_EQ(read(kRoot / "lerp.tsv").rfind("a\t", 0), 0u);
}

TEST_F(Cli, SameArgumentsGiveIdenticalFiles) {
  for (const char* name : {"det1", "det2"})
    ASSERT_EQ(run("train --data " + (kRoot / "data").string() + " --config " + (kRoot / "config.json").string() +
                      " --out " + (kRoot / name).string(),
                  kRoot / "det.out"),
              0);
  EXPECT_EQ(read(kRoot / "det1/final"), read(kRoot / "det2/final"));
  EXPECT_EQ(read(kRoot / "det1/epoch-001"), read(kRoot / "det2/epoch-001"));
}

TEST_F(Cli, UnknownConfigKeyFails) {
  write(kRoot / "bad.json", R"({"m": 3, "learning_rate": 0.1})");
  const int code = run("train --data " + (kRoot / "data").string() + " --config " + (kRoot / "bad.json").string() +
                           " --out " + (kRoot / "bad").string(),
                       kRoot / "bad.out");
  EXPECT_NE(code, 0);
  EXPECT_NE(read(kRoot / "bad.out").find("learning_rate"), std::string::npos);
}

TEST_F(Cli, MissingDatasetFails) {
  EXPECT_NE(run("evaluate --data " + (kRoot / "nowhere").string() + " --ckpt x --report y", kRoot / "missing.out"), 0);
  EXPECT_NE(read(kRoot / "missing.out").find("error:"), std::string::npos);
}

TEST_F(Cli, OracleCheckSmall) {
  EXPECT_EQ(run("oracle-check --graphs 10 --instances 3", kRoot / "oracle.out"), 0) << read(kRoot / "oracle.out");
}
