#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#ifndef GAT_CLI_PATH
#error "GAT_CLI_PATH must point at the built CLI binary"
#endif

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(GAT_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

fs::path scratch() {
  const fs::path dir = fs::temp_directory_path() / "gat_cli_test";
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("exit codes follow the 0/1/2 contract") {
  const fs::path dir = scratch();

  // usage error
  CHECK(run_cli("no-such-subcommand") == 1);

  // missing KB file -> data error
  const fs::path corpus = dir / "dialogues.jsonl";
  std::ofstream(corpus) << R"({"scenario":"s0","question":"q","answer":"a"})" << "\n";
  CHECK(run_cli("prepare --corpus " + corpus.string() + " --kb " + (dir / "missing.jsonl").string() +
                " --out " + (dir / "out").string()) == 2);

  // empty corpus -> data error
  const fs::path empty = dir / "empty.jsonl";
  std::ofstream(empty).close();
  const fs::path kb = dir / "kb.jsonl";
  std::ofstream(kb) << R"({"scenario":"s0","entries":[{"poitype":"parking garage"}]})" << "\n";
  CHECK(run_cli("prepare --corpus " + empty.string() + " --kb " + kb.string() + " --out " +
                (dir / "out").string()) == 2);

  // config pointing at a nonexistent train file -> usage/config error
  const fs::path config = dir / "bad_config.json";
  std::ofstream(config) << R"({"task":"car-stage1","train_file":"/nonexistent.jsonl",)"
                        << R"("output_dir":")" << (dir / "run").string() << R"("})" << "\n";
  CHECK(run_cli("train " + config.string()) == 1);
}

TEST_CASE("prepare and selfcheck succeed end to end") {
  const fs::path dir = scratch();
  CHECK(run_cli("prepare --synthetic car --scenarios 2 --out " + (dir / "synth").string()) == 0);
  CHECK(fs::exists(dir / "synth" / "stage1.jsonl"));
  CHECK(fs::exists(dir / "synth" / "quality_report.json"));

  CHECK(run_cli("selfcheck") == 0);
}
