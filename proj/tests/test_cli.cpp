#include <doctest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <random>
#include <sstream>
#include <string>

#include "sentinet/io.hpp"

using namespace sentinet;
namespace fs = std::filesystem;

namespace {

// These cases drive the installed binary end to end; the test harness points
// SENTINET_CLI at the freshly built tool.
const char* cli_path() { return std::getenv("SENTINET_CLI"); }

struct RunResult {
  int code{-1};
  std::string output;  // stdout + stderr
};

struct CliFixture {
  fs::path dir;
  CliFixture() {
    dir = fs::temp_directory_path() /
          ("sentinet-cli-" + std::to_string(std::random_device{}()));
    fs::create_directories(dir);
  }
  ~CliFixture() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }

  fs::path write_config(const std::string& name, const nlohmann::json& j) {
    const fs::path p = dir / name;
    write_text_file(p, j.dump(2) + "\n");
    return p;
  }

  RunResult run(const std::string& args) const {
    const fs::path log = dir / "run.log";
    const std::string cmd = std::string("\"") + cli_path() + "\" " + args +
                            " > \"" + log.string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    if (fs::exists(log)) r.output = read_text_file(log);
    return r;
  }
};

int count_lines(const std::string& text) {
  int n = 0;
  for (char c : text) {
    if (c == '\n') ++n;
  }
  return n;
}

nlohmann::json load_json(const fs::path& p) {
  return nlohmann::json::parse(read_text_file(p));
}

#define REQUIRE_CLI()                                  \
  if (!cli_path()) {                                   \
    MESSAGE("SENTINET_CLI not set; skipping");         \
    return;                                            \
  }

}  // namespace

TEST_CASE("generate writes a labeled panel and its truth sidecar") {
  REQUIRE_CLI();
  CliFixture fx;
  const fs::path cfg = fx.write_config("gen.json",
                                       {{"n_components", 500},
                                        {"n_sentinels", 12},
                                        {"t_rows", 40},
                                        {"kind", "linear"},
                                        {"snr_db", 20.0},
                                        {"seed", 5},
                                        {"prefix", "demo"}});
  const RunResult r =
      fx.run("generate --config \"" + cfg.string() + "\" --out \"" +
             fx.dir.string() + "\"");
  CHECK(r.code == 0);

  const DynamicsMatrix d =
      read_dynamics_csv(fx.dir / "demo.csv", Mode::continuous);
  CHECK(d.t_rows() == 40);
  CHECK(d.n_components() == 500);
  REQUIRE(d.component_ids.size() == 500);
  CHECK(d.component_ids.front() == "c0");
  CHECK(d.component_ids.back() == "c499");

  const SyntheticTruth truth = read_truth_json(fx.dir / "demo.truth.json");
  CHECK(truth.gamma_true.size() == 500);
  CHECK(truth.sentinels.size() == 12);
  CHECK(truth.s_true.rows() == 500);
  CHECK(truth.s_true.cols() == 500);
}

TEST_CASE("config errors exit 1, io errors exit 3") {
  REQUIRE_CLI();
  CliFixture fx;

  SUBCASE("ber on a linear system") {
    const fs::path cfg = fx.write_config("bad.json", {{"n_components", 5},
                                                      {"n_sentinels", 2},
                                                      {"t_rows", 30},
                                                      {"kind", "linear"},
                                                      {"ber", 0.1},
                                                      {"seed", 1}});
    const RunResult r = fx.run("generate --config \"" + cfg.string() + "\"");
    CHECK(r.code == 1);
    CHECK(r.output.find("ber") != std::string::npos);
  }
  SUBCASE("unknown key") {
    const fs::path cfg = fx.write_config("bad.json", {{"n_components", 5},
                                                      {"n_sentinels", 2},
                                                      {"t_rows", 30},
                                                      {"kind", "linear"},
                                                      {"seed", 1},
                                                      {"typo_key", true}});
    const RunResult r = fx.run("generate --config \"" + cfg.string() + "\"");
    CHECK(r.code == 1);
    CHECK(r.output.find("typo_key") != std::string::npos);
  }
  SUBCASE("both t_rows and t_over_n") {
    const fs::path cfg = fx.write_config("bad.json", {{"n_components", 5},
                                                      {"n_sentinels", 2},
                                                      {"t_rows", 30},
                                                      {"t_over_n", 4.0},
                                                      {"kind", "linear"},
                                                      {"seed", 1}});
    CHECK(fx.run("generate --config \"" + cfg.string() + "\"").code == 1);
  }
  SUBCASE("missing seed everywhere") {
    const fs::path cfg = fx.write_config("bad.json", {{"n_components", 5},
                                                      {"n_sentinels", 2},
                                                      {"t_rows", 30},
                                                      {"kind", "linear"}});
    CHECK(fx.run("generate --config \"" + cfg.string() + "\"").code == 1);
  }
  SUBCASE("config file absent") {
    const RunResult r =
        fx.run("generate --config \"" + (fx.dir / "ghost.json").string() + "\"");
    CHECK(r.code == 3);
  }
  SUBCASE("dynamics file absent") {
    const fs::path cfg = fx.write_config(
        "sel.json", {{"dynamics", (fx.dir / "ghost.csv").string()},
                     {"kind", "linear"},
                     {"k", 2}});
    CHECK(fx.run("select --config \"" + cfg.string() + "\"").code == 3);
  }
  SUBCASE("help exits 0") {
    CHECK(fx.run("--help").code == 0);
    CHECK(fx.run("generate --help").code == 0);
  }
  SUBCASE("missing subcommand fails") {
    CHECK(fx.run("").code != 0);
  }
}

TEST_CASE("generate then select recovers a noise-free plant through files") {
  REQUIRE_CLI();
  CliFixture fx;
  const fs::path gen = fx.write_config("gen.json", {{"n_components", 8},
                                                    {"n_sentinels", 2},
                                                    {"t_rows", 100},
                                                    {"kind", "linear"},
                                                    {"var_small", 0.0},
                                                    {"seed", 31},
                                                    {"prefix", "sys"}});
  REQUIRE(fx.run("generate --config \"" + gen.string() + "\" --out \"" +
                 fx.dir.string() + "\"")
              .code == 0);

  const fs::path sel = fx.write_config(
      "sel.json", {{"dynamics", (fx.dir / "sys.csv").string()},
                   {"kind", "linear"},
                   {"k", 2},
                   {"prefix", "pick"}});
  REQUIRE(fx.run("select --config \"" + sel.string() + "\" --out \"" +
                 fx.dir.string() + "\"")
              .code == 0);

  // Truth sidecar was discovered by naming convention: failure_rate present.
  const nlohmann::json res = load_json(fx.dir / "pick.result.json");
  REQUIRE(res.contains("failure_rate"));
  CHECK(res.at("failure_rate").get<double>() == 0.0);
  CHECK(res.at("sentinels").size() == 2);
  CHECK(res.at("rounds").size() == 7);  // six removals + final fit

  // No timing sidecar unless asked for.
  CHECK_FALSE(fs::exists(fx.dir / "pick.timing.json"));

  const fs::path pe = fx.write_config(
      "pe.json", {{"model", (fx.dir / "pick.model.json").string()},
                  {"dynamics", (fx.dir / "sys.csv").string()},
                  {"prefix", "eval"}});
  REQUIRE(fx.run("predict-eval --config \"" + pe.string() + "\" --out \"" +
                 fx.dir.string() + "\"")
              .code == 0);
  const nlohmann::json ev = load_json(fx.dir / "eval.result.json");
  CHECK(ev.at("rmse_paper").get<double>() < 1e-6);
  CHECK(ev.at("t_predicted").get<int>() == 99);
  CHECK(fs::exists(fx.dir / "eval.predictions.csv"));
}

TEST_CASE("select without a truth sidecar simply omits the recovery metric") {
  REQUIRE_CLI();
  CliFixture fx;
  const fs::path gen = fx.write_config("gen.json", {{"n_components", 6},
                                                    {"n_sentinels", 2},
                                                    {"t_rows", 60},
                                                    {"kind", "linear"},
                                                    {"snr_db", 20.0},
                                                    {"seed", 9},
                                                    {"prefix", "sys"}});
  REQUIRE(fx.run("generate --config \"" + gen.string() + "\" --out \"" +
                 fx.dir.string() + "\"")
              .code == 0);
  fs::remove(fx.dir / "sys.truth.json");

  const fs::path sel = fx.write_config(
      "sel.json", {{"dynamics", (fx.dir / "sys.csv").string()},
                   {"kind", "linear"},
                   {"k", 6},  // k = N keeps every component
                   {"timing", true},
                   {"prefix", "pick"}});
  REQUIRE(fx.run("select --config \"" + sel.string() + "\" --out \"" +
                 fx.dir.string() + "\"")
              .code == 0);
  const nlohmann::json res = load_json(fx.dir / "pick.result.json");
  CHECK_FALSE(res.contains("failure_rate"));
  CHECK(res.at("sentinels").size() == 6);

  const nlohmann::json tj = load_json(fx.dir / "pick.timing.json");
  CHECK(tj.contains("wall_ms_total"));
  CHECK(tj.at("rounds_ms").size() == res.at("rounds").size());
}

TEST_CASE("predict-eval rejects a panel whose width disagrees with the model") {
  REQUIRE_CLI();
  CliFixture fx;
  for (int n : {6, 9}) {
    const fs::path gen = fx.write_config(
        "gen" + std::to_string(n) + ".json", {{"n_components", n},
                                              {"n_sentinels", 2},
                                              {"t_rows", 60},
                                              {"kind", "linear"},
                                              {"seed", 3},
                                              {"prefix", "sys" + std::to_string(n)}});
    REQUIRE(fx.run("generate --config \"" + gen.string() + "\" --out \"" +
                   fx.dir.string() + "\"")
                .code == 0);
  }
  const fs::path sel = fx.write_config(
      "sel.json", {{"dynamics", (fx.dir / "sys6.csv").string()},
                   {"kind", "linear"},
                   {"k", 2},
                   {"prefix", "pick"}});
  REQUIRE(fx.run("select --config \"" + sel.string() + "\" --out \"" +
                 fx.dir.string() + "\"")
              .code == 0);

  const fs::path pe = fx.write_config(
      "pe.json", {{"model", (fx.dir / "pick.model.json").string()},
                  {"dynamics", (fx.dir / "sys9.csv").string()}});
  const RunResult r = fx.run("predict-eval --config \"" + pe.string() +
                             "\" --out \"" + fx.dir.string() + "\"");
  CHECK(r.code == 2);
  // The complaint names both widths.
  CHECK(r.output.find("6") != std::string::npos);
  CHECK(r.output.find("9") != std::string::npos);
}

TEST_CASE("fixed seeds make the whole file pipeline byte-identical") {
  REQUIRE_CLI();
  CliFixture fx;
  for (const char* sub : {"a", "b"}) {
    const fs::path out = fx.dir / sub;
    const fs::path gen = fx.write_config("gen.json", {{"n_components", 10},
                                                      {"n_sentinels", 3},
                                                      {"t_rows", 80},
                                                      {"kind", "linear"},
                                                      {"snr_db", 25.0},
                                                      {"prefix", "sys"}});
    REQUIRE(fx.run("generate --config \"" + gen.string() + "\" --seed 42" +
                   " --out \"" + out.string() + "\"")
                .code == 0);
    const fs::path sel = fx.write_config(
        "sel.json", {{"dynamics", (out / "sys.csv").string()},
                     {"kind", "linear"},
                     {"k", 3},
                     {"prefix", "pick"}});
    REQUIRE(fx.run("select --config \"" + sel.string() + "\" --out \"" +
                   out.string() + "\"")
                .code == 0);
  }
  for (const char* name : {"sys.csv", "sys.truth.json", "pick.model.json"}) {
    CHECK(read_text_file(fx.dir / "a" / name) ==
          read_text_file(fx.dir / "b" / name));
  }
  // result.json echoes the config (which embeds per-run paths), so compare
  // only its selection fields.
  const nlohmann::json ra = load_json(fx.dir / "a" / "pick.result.json");
  const nlohmann::json rb = load_json(fx.dir / "b" / "pick.result.json");
  CHECK(ra.at("sentinels") == rb.at("sentinels"));
  CHECK(ra.at("gamma_final") == rb.at("gamma_final"));
}

TEST_CASE("sweep emits one record per grid cell and seed means over them") {
  REQUIRE_CLI();
  CliFixture fx;
  nlohmann::json cfg = {{"kind", "linear"},
                        {"n_components", 6},
                        {"n_sentinels", 2},
                        {"var_small", 1e-4},
                        {"seeds", {1, 2, 3}},
                        {"cv_folds", 2},
                        {"prefix", "sw"}};
  cfg["grid"] = {{"snr_db", {"inf", 20.0}},
                 {"t_over_n", {20.0}},
                 {"k", {1, 2, 3}}};
  const fs::path plan = fx.write_config("sweep.json", cfg);
  const RunResult r = fx.run("sweep --config \"" + plan.string() +
                             "\" --out \"" + fx.dir.string() + "\"");
  CHECK(r.code == 0);

  const std::string recs = read_text_file(fx.dir / "sw.records.csv");
  // header + 2 noise × 1 ratio × 3 seeds × 3 sizes
  CHECK(count_lines(recs) == 1 + 18);
  std::istringstream in(recs);
  std::string header;
  std::getline(in, header);
  CHECK(header ==
        "kind,n_components,n_sentinels,t_over_n,snr_db,ber,k,seed,"
        "failure_rate,rmse_paper,rmse,converged,wall_ms,error");
  // Every record carries a wall-time figure.
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::string f;
    int idx = 0;
    std::string wall;
    while (std::getline(fields, f, ',')) {
      if (idx++ == 12) wall = f;
    }
    CHECK_FALSE(wall.empty());
    CHECK(parse_double(wall) >= 0.0);
  }

  const std::string means = read_text_file(fx.dir / "sw.means.csv");
  CHECK(count_lines(means) == 1 + 6);  // 2 noise × 3 sizes

  // Noise-free rows at the true size recover the plant on every seed.
  std::istringstream in2(recs);
  std::getline(in2, header);
  int checked = 0;
  while (std::getline(in2, line)) {
    std::istringstream fields(line);
    std::vector<std::string> f;
    std::string tok;
    while (std::getline(fields, tok, ',')) f.push_back(tok);
    if (f.size() > 8 && f[4] == "inf" && f[6] == "2") {
      CHECK(parse_double(f[8]) == 0.0);
      ++checked;
    }
  }
  CHECK(checked == 3);
}

TEST_CASE("sweep refuses the --seed flag") {
  REQUIRE_CLI();
  CliFixture fx;
  nlohmann::json cfg = {{"kind", "linear"},
                        {"n_components", 4},
                        {"n_sentinels", 1},
                        {"seeds", {1}}};
  cfg["grid"] = {{"t_over_n", {10.0}}, {"k", {1}}};
  const fs::path plan = fx.write_config("sweep.json", cfg);
  const RunResult r = fx.run("sweep --config \"" + plan.string() +
                             "\" --seed 7 --out \"" + fx.dir.string() + "\"");
  CHECK(r.code == 1);
}
