// End-to-end smoke test against the built command-line binary. Takes the
// binary path as argv[1] and drives synth -> pretrain -> prompt-train -> eval
// plus the error paths, printing one line per check.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

int failures = 0;

void check(bool ok, const std::string& what) {
  std::cout << (ok ? "ok   " : "FAIL ") << what << "\n";
  if (!ok) ++failures;
}

int run(const std::string& cmd) {
  int status = std::system((cmd + " > /dev/null 2>&1").c_str());
  if (status == -1) return -1;
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: cli_smoke <path-to-cli-binary>\n";
    return 2;
  }
  std::string bin = argv[1];
  fs::path work = fs::temp_directory_path() / "plcr_cli_smoke";
  fs::remove_all(work);
  fs::create_directories(work);
  fs::path out1 = work / "run1";
  fs::path out2 = work / "run2";

  const std::string small =
      " --seed 11 --set synth.users=60 --set synth.items=40"
      " --set corpus.kcore=2 --set backbone.dim=12 --set backbone.max_len=12"
      " --set pretrain.epochs=6 --set pretrain.batch_size=32"
      " --set train.epochs=6 --set train.batch_size=32"
      " --set train.learning_rate=0.05";

  check(run(bin) == 1, "no subcommand is a usage error (exit 1)");
  check(run(bin + " eval --out " + out1.string() + small) == 2,
        "eval before any artifacts exits 2");

  check(run(bin + " synth --out " + out1.string() + small) == 0, "synth runs");
  check(fs::exists(out1 / "manifest.txt"), "synth writes the manifest");
  check(fs::exists(out1 / "stats.txt"), "synth writes stats");

  check(run(bin + " prompt-train --out " + out1.string() + small) == 2,
        "prompt-train without a backbone checkpoint exits 2");

  check(run(bin + " pretrain --out " + out1.string() + small) == 0,
        "pretrain runs");
  check(fs::exists(out1 / "backbone.ckpt"), "pretrain writes the checkpoint");

  check(run(bin + " prompt-train --out " + out1.string() + small) == 0,
        "prompt-train runs");
  check(fs::exists(out1 / "prompts.ckpt"), "prompt-train writes the checkpoint");
  check(run(bin + " eval --out " + out1.string() + small) == 0, "eval runs");
  check(fs::exists(out1 / "report.csv"), "eval writes the csv report");
  check(fs::exists(out1 / "report.txt"), "eval writes the table report");

  // ingest path: rebuild the same manifest from the emitted logs
  check(run(bin + " ingest --log-a " + (out1 / "log_a.tsv").string() +
            " --log-b " + (out1 / "log_b.tsv").string() + " --out " +
            out2.string() + small) == 0,
        "ingest consumes the TSV logs");
  check(slurp(out2 / "manifest.txt") == slurp(out1 / "manifest.txt"),
        "ingest reproduces the synth manifest byte-for-byte");
  check(run(bin + " ingest --log-a " + (out1 / "no_such.tsv").string() +
            " --log-b " + (out1 / "log_b.tsv").string() + " --out " +
            out2.string() + small) == 2,
        "ingest with a missing log exits 2");

  // determinism: an identical rerun must overwrite with identical artifacts
  std::string report_before = slurp(out1 / "report.csv");
  check(run(bin + " synth --out " + out1.string() + small) == 0 &&
            run(bin + " pretrain --out " + out1.string() + small) == 0 &&
            run(bin + " prompt-train --out " + out1.string() + small) == 0 &&
            run(bin + " eval --out " + out1.string() + small) == 0,
        "identical rerun succeeds");
  check(slurp(out1 / "report.csv") == report_before,
        "identical rerun reproduces report.csv byte-for-byte");

  // variant flag + sweep + report
  check(run(bin + " prompt-train --out " + out1.string() + small +
            " --variant no_attention") == 0,
        "prompt-train accepts --variant");
  check(run(bin + " prompt-train --out " + out1.string() + small +
            " --variant bogus") == 1,
        "unknown variant is a usage error");
  check(run(bin + " sweep --axis layout --out " + out1.string() + small +
            " --set train.epochs=2") == 0,
        "layout sweep runs");
  check(fs::exists(out1 / "sweep_layout.csv") &&
            fs::exists(out1 / "sweep_layout.svg"),
        "sweep emits csv and plot");
  {
    // the m1 sweep grid has 5 values x 4 metrics per domain
    check(run(bin + " sweep --axis m1 --out " + out1.string() + small +
              " --set train.epochs=2") == 0,
          "m1 sweep runs");
    std::ifstream in(out1 / "sweep_m1.csv");
    std::string line;
    int rows = 0;
    while (std::getline(in, line))
      if (!line.empty() && line.rfind("axis,", 0) != 0) ++rows;
    check(rows == 5 * 2 * 4, "m1 sweep has 5 rows per (domain, metric, K)");
  }
  check(run(bin + " report --out " + out1.string() + " " +
            (out1 / "report.csv").string()) == 0,
        "report aggregates a result csv");
  {
    // mismatched fingerprints for one dataset must be refused
    fs::path bad = work / "bad.csv";
    std::ofstream outf(bad);
    outf << "dataset,domain,variant,metric,K,value,seed,fingerprint\n";
    outf << "run,A,full,HR,10,0.5,1,aaaaaaaaaaaaaaaa\n";
    outf << "run,A,full,HR,10,0.6,2,bbbbbbbbbbbbbbbb\n";
    outf.close();
    check(run(bin + " report --out " + out1.string() + " " + bad.string()) == 2,
          "report refuses mismatched fingerprints");
  }

  std::cout << (failures == 0 ? "cli smoke: all checks passed\n"
                              : "cli smoke: FAILURES\n");
  return failures == 0 ? 0 : 1;
}
