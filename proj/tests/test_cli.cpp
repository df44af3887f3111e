#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::current_path() / "cli_test_out";

int run(const std::string& args) {
  const std::string cmd = std::string("\"") + ASYNCDSB_CLI + "\" " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

fs::path fresh(const std::string& name) {
  const auto dir = kRoot / name;
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) ++n;
  return n;
}

// Shared inputs: one corpus image and a center mask at 32 x 32.
struct Inputs {
  fs::path image;
  fs::path mask;
  Inputs() {
    const auto dir = fresh("inputs");
    REQUIRE(run("--seed 3 --out-dir \"" + (dir / "corpus").string() + "\" corpus --count 1 --height 32 --width 32") == 0);
    REQUIRE(run("--out-dir \"" + (dir / "mask").string() + "\" mask --kind center --height 32 --width 32") == 0);
    image = dir / "corpus" / "image_000.png";
    mask = dir / "mask" / "mask.png";
  }
};

const Inputs& inputs() {
  static const Inputs in;
  return in;
}

}  // namespace

TEST_CASE("schedule command writes one row per step") {
  const auto dir = fresh("schedule");
  REQUIRE(run("--steps 1000 --total-mass 1 --out-dir \"" + dir.string() + "\" schedule") == 0);
  CHECK(line_count(dir / "schedule.csv") == 1001);
  CHECK(fs::exists(dir / "schedule.svg"));
  CHECK(fs::exists(dir / "manifest.json"));
}

TEST_CASE("schedule at the base apex equals the default schedule") {
  const auto a = fresh("sched_default");
  const auto b = fresh("sched_tau");
  REQUIRE(run("--out-dir \"" + a.string() + "\" schedule") == 0);
  REQUIRE(run("--out-dir \"" + b.string() + "\" schedule --tau 0.5") == 0);
  CHECK(slurp(a / "schedule.csv") == slurp(b / "schedule.csv"));
}

TEST_CASE("validation failures exit with code 2") {
  CHECK(run("--out-dir \"" + fresh("bad_tau").string() + "\" schedule --tau 1.5") == 2);
  CHECK(run("--steps 1 --out-dir \"" + fresh("bad_steps").string() + "\" schedule") == 2);
  CHECK(run("schedule --no-such-flag") == 2);
  const auto& in = inputs();
  CHECK(run("--out-dir \"" + fresh("bad_range").string() + "\" inpaint --image \"" + in.image.string() +
            "\" --mask \"" + in.mask.string() + "\" --tau-min 0.6 --tau-max 0.4") == 2);
  CHECK(run("--out-dir \"" + fresh("no_gt").string() + "\" inpaint --image \"" + in.image.string() +
            "\" --mask \"" + in.mask.string() + "\" --score oracle") == 2);
}

TEST_CASE("missing inputs exit with code 3") {
  const auto& in = inputs();
  CHECK(run("--out-dir \"" + fresh("missing_img").string() + "\" inpaint --image \"" +
            (kRoot / "nope.png").string() + "\" --mask \"" + in.mask.string() + "\"") == 3);
  const auto empty = fresh("empty_run");
  fs::create_directories(empty);
  CHECK(run("--out-dir \"" + fresh("diag_missing").string() + "\" diagnose --run \"" + empty.string() + "\"") == 3);
}

TEST_CASE("oracle inpainting restores the image") {
  const auto& in = inputs();
  const auto dir = fresh("inpaint");
  REQUIRE(run("--steps 200 --out-dir \"" + dir.string() + "\" inpaint --image \"" + in.image.string() +
              "\" --mask \"" + in.mask.string() + "\" --ground-truth \"" + in.image.string() +
              "\" --score oracle --completer oracle") == 0);
  for (const char* f : {"restored.png", "corrupted.png", "tau.png", "tau.raw", "trajectory.csv",
                        "trajectory.raw", "metrics.json", "manifest.json"}) {
    CHECK(fs::exists(dir / f));
  }
  std::ifstream m(dir / "metrics.json");
  const auto metrics = nlohmann::json::parse(m);
  CHECK(metrics.at("mse").get<double>() <= 1e-3);
  CHECK(line_count(dir / "trajectory.csv") == 1 + 200 / 10 + 1);
}

TEST_CASE("diagnosing the same run twice gives identical reports") {
  const auto& in = inputs();
  const auto run_dir = fresh("diag_src");
  REQUIRE(run("--steps 100 --out-dir \"" + run_dir.string() + "\" inpaint --image \"" + in.image.string() +
              "\" --mask \"" + in.mask.string() + "\" --ground-truth \"" + in.image.string() +
              "\" --score oracle --completer oracle --record-every 5") == 0);
  const auto a = fresh("diag_a");
  const auto b = fresh("diag_b");
  REQUIRE(run("--out-dir \"" + a.string() + "\" diagnose --run \"" + run_dir.string() + "\"") == 0);
  REQUIRE(run("--out-dir \"" + b.string() + "\" diagnose --run \"" + run_dir.string() + "\"") == 0);
  CHECK(slurp(a / "mismatch.json") == slurp(b / "mismatch.json"));
  CHECK(slurp(a / "band_peaks.json") == slurp(b / "band_peaks.json"));
  CHECK(line_count(a / "empirical_full.csv") == 1 + 100 / 5 + 1);
  CHECK(fs::exists(a / "overlay.svg"));
}

TEST_CASE("a three by three sweep evaluates only the upper triangle") {
  const auto dir = fresh("sweep");
  REQUIRE(run("--steps 50 --out-dir \"" + dir.string() +
              "\" sweep --taus 0.2,0.5,0.8 --count 1 --height 32 --width 32") == 0);
  std::ifstream in(dir / "sweep.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "tau_min,tau_max,valid,mse,ssim,abs_peak_lag,l1_gap");
  int valid = 0;
  int invalid = 0;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string tmin, tmax, flag;
    std::getline(ss, tmin, ',');
    std::getline(ss, tmax, ',');
    std::getline(ss, flag, ',');
    const bool ok = std::stod(tmin) <= std::stod(tmax);
    CHECK((flag == "1") == ok);
    (flag == "1" ? valid : invalid)++;
  }
  CHECK(valid == 6);
  CHECK(invalid == 3);
  CHECK(fs::exists(dir / "heatmap.svg"));
}

TEST_CASE("replaying a manifest reproduces the outputs") {
  const auto a = fresh("replay_src");
  REQUIRE(run("--seed 9 --out-dir \"" + a.string() + "\" mask --kind wide --height 48 --width 48") == 0);
  const auto b = fresh("replay_dst");
  REQUIRE(run("--out-dir \"" + b.string() + "\" replay \"" + (a / "manifest.json").string() + "\"") == 0);
  CHECK(slurp(a / "mask.png") == slurp(b / "mask.png"));
  CHECK(slurp(a / "manifest.json") == slurp(b / "manifest.json"));
}
