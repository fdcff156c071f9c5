#include "support.hpp"

#include "vinn/archive.hpp"
#include "vinn/fixtures.hpp"
#include "vinn/json_codec.hpp"
#include "vinn/service.hpp"
#include "vinn/session.hpp"

#include "httplib.h"

#include <gtest/gtest.h>

#include <csignal>
#include <cstdio>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out;
};

std::string quote(const std::string& s) { return "'" + s + "'"; }

Run run(const std::string& args) {
    const auto cmd = quote(VINNPRUNER_PATH) + " " + args + " 2>&1";
    Run r;
    FILE* pipe = popen(cmd.c_str(), "r");
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string model(const char* name) { return quote((vt::fixture_dir() / "models" / name).string()); }
std::string data(const char* name) { return quote((vt::fixture_dir() / "datasets" / name).string()); }

std::string mlp_args() { return "--model " + model("blob-mlp") + " --dataset " + data("blobs-test"); }
std::string cnn_args() { return "--model " + model("shapes-cnn") + " --dataset " + data("shapes-test"); }

// Child process running `vinnpruner serve`; reads the announced port.
class ServeProcess {
public:
    ServeProcess(const std::vector<std::string>& args, const char* env_port) {
        int fds[2];
        EXPECT_EQ(pipe(fds), 0);
        pid_ = fork();
        if (pid_ == 0) {
            dup2(fds[1], STDOUT_FILENO);
            close(fds[0]);
            if (env_port) setenv("VINN_PORT", env_port, 1);
            std::vector<char*> argv{const_cast<char*>(VINNPRUNER_PATH), const_cast<char*>("serve")};
            for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
            argv.push_back(nullptr);
            execv(VINNPRUNER_PATH, argv.data());
            _exit(127);
        }
        close(fds[1]);
        out_ = fdopen(fds[0], "r");
    }
    ~ServeProcess() {
        kill(pid_, SIGTERM);
        waitpid(pid_, nullptr, 0);
        fclose(out_);
    }
    std::string first_line() {
        char line[256] = {};
        if (!fgets(line, sizeof line, out_)) return "";
        return line;
    }

private:
    pid_t pid_;
    FILE* out_;
};

int port_of(const std::string& line) {
    const auto colon = line.rfind(':');
    return colon == std::string::npos ? -1 : std::stoi(line.substr(colon + 1));
}

}  // namespace

TEST(Cli, HelpListsFlags) {
    const auto r = run("prune --help");
    EXPECT_EQ(r.code, 0);
    for (const char* flag : {"--model", "--dataset", "--algo", "--ratio", "--layer-ratio", "--steps", "--out"}) {
        EXPECT_NE(r.out.find(flag), std::string::npos) << flag;
    }
    const auto top = run("--help");
    for (const char* cmd : {"serve", "prune", "compare", "export-mask", "generate-fixtures"}) {
        EXPECT_NE(top.out.find(cmd), std::string::npos) << cmd;
    }
}

TEST(Cli, ExitCodes) {
    vt::TempDir tmp;
    EXPECT_EQ(run("").code, 2);
    EXPECT_EQ(run("prune " + mlp_args()).code, 2);  // no --out
    EXPECT_EQ(run("prune " + mlp_args() + " --algo taylor --out " + (tmp / "r.json").string()).code, 2);
    EXPECT_EQ(run("prune " + mlp_args() + " --ratio 1.5 --out " + (tmp / "r.json").string()).code, 2);
    EXPECT_EQ(run("prune " + mlp_args() + " --layer-ratio 1=0.5 --out " + (tmp / "r.json").string()).code, 2);
    EXPECT_EQ(run("prune " + mlp_args() + " --layer-ratio x --out " + (tmp / "r.json").string()).code, 2);
    EXPECT_EQ(run("prune --model /nonexistent --dataset " + data("blobs-test") + " --out " + (tmp / "r.json").string()).code, 3);
    EXPECT_EQ(run("prune --model " + model("blob-mlp") + " --dataset " + data("shapes-test") + " --out " +
                  (tmp / "r.json").string())
                  .code,
              3);
    EXPECT_FALSE(fs::exists(tmp / "r.json"));
}

TEST(Cli, ZeroRatioMatchesBaseline) {
    vt::TempDir tmp;
    ASSERT_EQ(run("prune " + mlp_args() + " --algo map --ratio 0 --steps 1 --out " + (tmp / "r.json").string()).code, 0);
    const auto r = vt::read_json(tmp / "r.json");
    ASSERT_EQ(r.at("steps").size(), 2u);
    EXPECT_EQ(r.at("steps")[1].at("report"), r.at("steps")[0].at("report"));
    EXPECT_EQ(r.at("steps")[1].at("mask_hash"), r.at("steps")[0].at("mask_hash"));
}

TEST(Cli, MapHalfCounts) {
    vt::TempDir tmp;
    ASSERT_EQ(run("prune " + mlp_args() + " --algo map --ratio 0.5 --out " + (tmp / "r.json").string()).code, 0);
    const auto r = vt::read_json(tmp / "r.json");
    for (const auto& l : r.at("steps")[1].at("report").at("sparsity").at("layers")) {
        EXPECT_EQ(l.at("pruned").get<std::size_t>(), l.at("total").get<std::size_t>() / 2);
    }
    EXPECT_EQ(r.at("sparsity_trajectory"), json::parse("[0.0, 0.5]"));
}

TEST(Cli, IterativeStepsAndLayerOverrides) {
    vt::TempDir tmp;
    ASSERT_EQ(run("prune " + mlp_args() + " --algo lap-forward --ratio 0.5 --layer-ratio 4=0 --layer-ratio 0=0.25 --steps 3 --out " +
                  (tmp / "r.json").string())
                  .code,
              0);
    const auto r = vt::read_json(tmp / "r.json");
    ASSERT_EQ(r.at("steps").size(), 4u);
    EXPECT_EQ(r.at("settings").at("per_layer_ratio"), json::parse(R"({"0":0.25,"4":0.0})"));
    const auto& last = r.at("steps")[3].at("report").at("sparsity").at("layers");
    // 512 -> 384 -> 288 -> 216 kept, 1024 -> 512 -> 256 -> 128 kept
    EXPECT_EQ(last[0].at("pruned"), 512 - 216);
    EXPECT_EQ(last[1].at("pruned"), 1024 - 128);
    EXPECT_EQ(last[2].at("pruned"), 0);
}

TEST(Cli, MapAndLapDiffer) {
    vt::TempDir tmp;
    ASSERT_EQ(run("prune " + mlp_args() + " --algo map --ratio 0.5 --out " + (tmp / "map.json").string()).code, 0);
    ASSERT_EQ(run("prune " + mlp_args() + " --algo lap --ratio 0.5 --out " + (tmp / "lap.json").string()).code, 0);
    EXPECT_NE(vt::read_json(tmp / "map.json").at("steps")[1].at("mask_hash"),
              vt::read_json(tmp / "lap.json").at("steps")[1].at("mask_hash"));
}

TEST(Cli, ReportsAreByteReproducible) {
    vt::TempDir tmp;
    const auto args = "prune " + cnn_args() + " --algo lap --ratio 0.3 --steps 2 --out ";
    ASSERT_EQ(run(args + (tmp / "a.json").string()).code, 0);
    ASSERT_EQ(run(args + (tmp / "b.json").string()).code, 0);
    EXPECT_EQ(vt::slurp(tmp / "a.json"), vt::slurp(tmp / "b.json"));
}

TEST(Cli, Compare) {
    vt::TempDir tmp;
    ASSERT_EQ(run("compare " + cnn_args() + " --algos map,lap --ratio 0.7 --out " + (tmp / "cmp").string()).code, 0);
    EXPECT_TRUE(fs::exists(tmp / "cmp" / "report_map.json"));
    EXPECT_TRUE(fs::exists(tmp / "cmp" / "report_lap.json"));
    const auto csv = vt::slurp(tmp / "cmp" / "summary.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "algo,step,ratio,accuracy,loss");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
    EXPECT_NE(csv.find("\nlap,1,"), std::string::npos);
    EXPECT_EQ(run("compare " + cnn_args() + " --algos map,bogus --out " + (tmp / "x").string()).code, 2);
}

namespace {

// Session archive on the fixture CNN with one LAP and one MAP branch at 0.7.
fs::path make_session(const vt::TempDir& tmp) {
    const auto cnn = vt::fixture_dir() / "models" / vinn::fixtures::cnn_name;
    const auto shapes = vt::fixture_dir() / "datasets" / vinn::fixtures::shapes_test_name;
    vinn::Session s(vinn::load_model(cnn), vinn::load_dataset(shapes));
    s.model_ref = cnn.string();
    s.dataset_ref = shapes.string();
    s.run_prune_step({vinn::PruneAlgorithm::lap, 0.7, {}});  // 1
    s.revert_to(0);
    s.run_prune_step({vinn::PruneAlgorithm::map, 0.7, {}});  // 2
    vinn::save_session(s, tmp / "session");
    return tmp / "session";
}

struct Pgm {
    std::size_t width = 0, height = 0;
    std::string pixels;
};

Pgm read_pgm(const fs::path& path) {
    const auto bytes = vt::slurp(path);
    Pgm p;
    int consumed = 0;
    EXPECT_EQ(std::sscanf(bytes.c_str(), "P5\n%zu %zu\n255\n%n", &p.width, &p.height, &consumed), 2);
    p.pixels = bytes.substr(static_cast<std::size_t>(consumed));
    return p;
}

std::size_t dark_rows(const Pgm& p) {
    std::size_t n = 0;
    for (std::size_t r = 0; r < p.height; ++r) {
        if (p.pixels.substr(r * p.width, p.width) == std::string(p.width, '\0')) ++n;
    }
    return n;
}

}  // namespace

TEST(Cli, ExportMask) {
    vt::TempDir tmp;
    const auto session = make_session(tmp).string();
    ASSERT_EQ(run("export-mask --session " + session + " --layer 3 --step 0 --out " + (tmp / "base.pgm").string()).code, 0);
    const auto base = read_pgm(tmp / "base.pgm");
    EXPECT_EQ(base.width, 36u);
    EXPECT_EQ(base.height, 8u);
    EXPECT_EQ(base.pixels, std::string(36 * 8, '\xff'));

    ASSERT_EQ(run("export-mask --session " + session + " --layer 3 --step 1 --out " + (tmp / "lap.pgm").string()).code, 0);
    ASSERT_EQ(run("export-mask --session " + session + " --layer 3 --out " + (tmp / "map.pgm").string()).code, 0);
    EXPECT_GE(dark_rows(read_pgm(tmp / "lap.pgm")), 1u);
    EXPECT_EQ(dark_rows(read_pgm(tmp / "map.pgm")), 0u);

    ASSERT_EQ(run("export-mask --session " + session + " --layer 6 --out " + (tmp / "dense.pgm").string()).code, 0);
    const auto dense = read_pgm(tmp / "dense.pgm");
    EXPECT_EQ(dense.width, 128u);
    EXPECT_EQ(dense.height, 4u);

    EXPECT_EQ(run("export-mask --session " + session + " --layer 4 --out " + (tmp / "x.pgm").string()).code, 2);
    EXPECT_EQ(run("export-mask --session " + session + " --layer 3 --step 9 --out " + (tmp / "x.pgm").string()).code, 2);
    EXPECT_EQ(run("export-mask --session " + (tmp / "none").string() + " --layer 3 --out " + (tmp / "x.pgm").string()).code, 3);
}

TEST(Cli, GenerateFixturesIsDeterministic) {
    vt::TempDir tmp;
    ASSERT_EQ(run("generate-fixtures --seed 7 --out " + (tmp / "a").string()).code, 0);
    EXPECT_EQ(vt::slurp(tmp / "a" / "goldens.json"), vt::slurp(vt::fixture_dir() / "goldens.json"));
    EXPECT_EQ(vt::slurp(tmp / "a" / "models" / "shapes-cnn" / "weights.bin"),
              vt::slurp(vt::fixture_dir() / "models" / "shapes-cnn" / "weights.bin"));
}

TEST(Cli, ServeBadDirectory) {
    const auto r = run("serve --models-dir /nonexistent --datasets-dir /nonexistent --port 0");
    EXPECT_NE(r.code, 0);
    EXPECT_NE(r.out.find("/nonexistent"), std::string::npos);
}

TEST(Cli, ServeOnAssignedPort) {
    vt::TempDir tmp;
    ServeProcess proc({"--models-dir", (vt::fixture_dir() / "models").string(), "--datasets-dir",
                       (vt::fixture_dir() / "datasets").string(), "--sessions-dir", (tmp / "s").string(), "--port", "0"},
                      nullptr);
    const int port = port_of(proc.first_line());
    ASSERT_GT(port, 0);
    httplib::Client client("127.0.0.1", port);
    const auto r = client.Get("/api/models");
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 200);
}

TEST(Cli, ServeHonoursPortVariable) {
    vt::TempDir tmp;
    ServeProcess proc({"--models-dir", (vt::fixture_dir() / "models").string(), "--datasets-dir",
                       (vt::fixture_dir() / "datasets").string(), "--sessions-dir", (tmp / "s").string()},
                      "0");
    const int port = port_of(proc.first_line());
    ASSERT_GT(port, 0);
    EXPECT_NE(port, 8080);
    httplib::Client client("127.0.0.1", port);
    EXPECT_TRUE(client.Get("/api/datasets"));
}

TEST(Cli, SameMasksAsApi) {
    vt::TempDir tmp;
    ASSERT_EQ(run("prune " + cnn_args() + " --algo lap --ratio 0.4 --steps 2 --out " + (tmp / "r.json").string()).code, 0);
    const auto report = vt::read_json(tmp / "r.json");

    vinn::ApiService service({vt::fixture_dir() / "models", vt::fixture_dir() / "datasets", tmp / "s", std::nullopt});
    const int port = service.bind("127.0.0.1", 0);
    std::thread thread([&] { service.listen(); });
    service.wait_until_ready();
    {
        httplib::Client client("127.0.0.1", port);
        const auto created = client.Post("/api/sessions", R"({"model":"shapes-cnn","dataset":"shapes-test"})", "application/json");
        ASSERT_TRUE(created);
        const auto id = json::parse(created->body).at("session_id").get<std::string>();
        for (std::size_t k = 1; k <= 2; ++k) {
            const auto step = client.Post("/api/sessions/" + id + "/prune",
                                          R"({"settings":{"algorithm":"lap","global_ratio":0.4}})", "application/json");
            ASSERT_TRUE(step);
            const auto j = json::parse(step->body);
            EXPECT_EQ(j.at("mask_hash"), report.at("steps")[k].at("mask_hash"));
            EXPECT_EQ(j.at("report"), report.at("steps")[k].at("report"));
        }
    }
    service.stop();
    thread.join();
}
