// vinnpruner: headless pruning runs, MAP/LAP comparisons, mask export, and the API server.
//
// Exit codes: 0 success, 2 invalid arguments, 3 archive errors, 1 anything else.

#include "vinn/archive.hpp"
#include "vinn/error.hpp"
#include "vinn/fixtures.hpp"
#include "vinn/json_codec.hpp"
#include "vinn/runs.hpp"
#include "vinn/service.hpp"

#include "CLI11.hpp"

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <thread>

namespace {

using namespace vinn;

constexpr int exit_invalid = 2;
constexpr int exit_archive = 3;

struct Usage : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

PruneSettings settings_from(const std::string& algo, double ratio, const std::vector<std::string>& layer_ratios) {
    PruneSettings s;
    const auto parsed = parse_algorithm(algo);
    if (!parsed || *parsed == PruneAlgorithm::manual) throw InvalidArgument("algo", "unknown algorithm '" + algo + "'");
    s.algorithm = *parsed;
    s.global_ratio = ratio;
    for (const auto& item : layer_ratios) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw InvalidArgument("layer-ratio", "expected L=R, got '" + item + "'");
        try {
            std::size_t used = 0;
            const auto layer = std::stoul(item.substr(0, eq), &used);
            if (used != eq) throw std::invalid_argument("layer");
            const auto value = item.substr(eq + 1);
            const double r = std::stod(value, &used);
            if (used != value.size()) throw std::invalid_argument("ratio");
            s.per_layer_ratio[layer] = r;
        } catch (const std::logic_error&) {
            throw InvalidArgument("layer-ratio", "expected L=R, got '" + item + "'");
        }
    }
    return s;
}

struct Inputs {
    Model model;
    Dataset dataset;
};

Inputs load_inputs(const fs::path& model_dir, const fs::path& dataset_dir) {
    Inputs in{load_model(model_dir), load_dataset(dataset_dir)};
    try {
        check_compatible(in.model, in.dataset);
    } catch (const Error& e) {
        throw ArchiveError(std::string("model and dataset do not fit: ") + e.what());
    }
    return in;
}

nlohmann::json run_series(const Inputs& in, const PruneSettings& settings, std::size_t steps) {
    validate(settings, in.model);
    Session session(in.model, in.dataset);
    return run_prune_series(session, settings, steps);
}

int serve(const fs::path& models_dir, const fs::path& datasets_dir, const fs::path& sessions_dir,
          const std::string& ui_dir, const std::string& host, int port) {
    for (const auto& dir : {models_dir, datasets_dir}) {
        if (!fs::is_directory(dir)) throw Usage("not a directory: " + dir.string());
    }
    ServiceConfig config{models_dir, datasets_dir, sessions_dir, std::nullopt};
    if (!ui_dir.empty()) config.ui_dir = ui_dir;

    // Handle termination signals on a dedicated wait instead of in a handler.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    ApiService service(std::move(config));
    const int bound = service.bind(host, port);
    if (bound < 0) {
        std::cerr << "vinnpruner: cannot bind " << host << ":" << port << "\n";
        return 1;
    }
    std::thread server([&] { service.listen(); });
    service.wait_until_ready();
    std::cout << "listening on http://" << host << ":" << bound << std::endl;

    int sig = 0;
    sigwait(&signals, &sig);
    service.stop();
    server.join();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Interactive pruning workbench: serve the API or run headless pruning jobs."};
    app.require_subcommand(1);

    std::string models_dir, datasets_dir, sessions_dir = "sessions", ui_dir, host = "127.0.0.1";
    int port = 8080;
    if (const char* env = std::getenv("VINN_PORT")) {
        try {
            port = std::stoi(env);
        } catch (const std::logic_error&) {
            std::cerr << "vinnpruner: VINN_PORT is not a number\n";
            return exit_invalid;
        }
    }
    auto* serve_cmd = app.add_subcommand("serve", "Serve the JSON API (and the UI when --ui-dir is set)");
    serve_cmd->add_option("--models-dir", models_dir, "Directory of model archives")->required();
    serve_cmd->add_option("--datasets-dir", datasets_dir, "Directory of dataset archives")->required();
    serve_cmd->add_option("--port", port, "Port; 0 picks a free one (default 8080 or $VINN_PORT)")
        ->check(CLI::Range(0, 65535));
    serve_cmd->add_option("--host", host, "Address to bind")->capture_default_str();
    serve_cmd->add_option("--sessions-dir", sessions_dir, "Where sessions are persisted")->capture_default_str();
    serve_cmd->add_option("--ui-dir", ui_dir, "Built UI to serve under /");

    std::string model, dataset, algo = "lap", out;
    double ratio = 0.5;
    std::vector<std::string> layer_ratios;
    std::size_t steps = 1;
    auto* prune_cmd = app.add_subcommand("prune", "Run iterative pruning steps and write a JSON report");
    prune_cmd->add_option("--model", model, "Model archive directory")->required();
    prune_cmd->add_option("--dataset", dataset, "Dataset archive directory")->required();
    prune_cmd->add_option("--algo", algo, "map, lap, lap-forward or lap-backward")->capture_default_str();
    prune_cmd->add_option("--ratio", ratio, "Fraction of remaining weights pruned per step")->capture_default_str();
    prune_cmd->add_option("--layer-ratio", layer_ratios, "Per-layer override L=R (repeatable)");
    prune_cmd->add_option("--steps", steps, "Number of pruning steps")->capture_default_str();
    prune_cmd->add_option("--out", out, "Report path")->required();

    std::string algos = "map,lap";
    auto* compare_cmd = app.add_subcommand("compare", "Run several algorithms with the same settings");
    compare_cmd->add_option("--model", model, "Model archive directory")->required();
    compare_cmd->add_option("--dataset", dataset, "Dataset archive directory")->required();
    compare_cmd->add_option("--algos", algos, "Comma-separated algorithms")->capture_default_str();
    compare_cmd->add_option("--ratio", ratio, "Fraction of remaining weights pruned per step")->capture_default_str();
    compare_cmd->add_option("--layer-ratio", layer_ratios, "Per-layer override L=R (repeatable)");
    compare_cmd->add_option("--steps", steps, "Number of pruning steps")->capture_default_str();
    compare_cmd->add_option("--out", out, "Output directory for report_<algo>.json and summary.csv")->required();

    std::string session_dir;
    std::size_t layer = 0;
    std::optional<std::size_t> step;
    auto* export_cmd = app.add_subcommand("export-mask", "Write a layer mask as a binary PGM image");
    export_cmd->add_option("--session", session_dir, "Session directory (holding session.json)")->required();
    export_cmd->add_option("--layer", layer, "Weighted layer index")->required();
    export_cmd->add_option("--step", step, "Step id (default: current step)");
    export_cmd->add_option("--out", out, "PGM path")->required();

    std::uint64_t seed = fixtures::default_seed;
    auto* fixtures_cmd = app.add_subcommand("generate-fixtures", "Write the fixture models, datasets and goldens");
    fixtures_cmd->add_option("--out", out, "Output directory")->required();
    fixtures_cmd->add_option("--seed", seed, "PRNG seed")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_invalid;
    }

    try {
        if (*serve_cmd) return serve(models_dir, datasets_dir, sessions_dir, ui_dir, host, port);

        if (*prune_cmd) {
            const auto settings = settings_from(algo, ratio, layer_ratios);
            const auto inputs = load_inputs(model, dataset);
            write_text(out, run_series(inputs, settings, steps).dump(2) + "\n");
            return 0;
        }

        if (*compare_cmd) {
            std::vector<PruneSettings> runs;
            std::vector<std::string> names;
            std::stringstream list(algos);
            for (std::string name; std::getline(list, name, ',');) {
                runs.push_back(settings_from(name, ratio, layer_ratios));
                names.push_back(name);
            }
            if (runs.empty()) throw InvalidArgument("algos", "no algorithm given");
            const auto inputs = load_inputs(model, dataset);
            std::vector<std::pair<std::string, nlohmann::json>> reports;
            for (std::size_t i = 0; i < runs.size(); ++i) {
                reports.emplace_back(names[i], run_series(inputs, runs[i], steps));
            }
            fs::create_directories(out);
            for (const auto& [name, report] : reports) {
                write_text(fs::path(out) / ("report_" + name + ".json"), report.dump(2) + "\n");
            }
            write_text(fs::path(out) / "summary.csv", compare_csv(reports));
            return 0;
        }

        if (*export_cmd) {
            const auto session = load_session(session_dir);
            if (layer >= session.model().layers.size() || !session.model().layers[layer].weighted()) {
                throw InvalidArgument("layer", "layer " + std::to_string(layer) + " has no weights");
            }
            const auto& s = step ? session.step(*step) : session.current();
            const auto pgm = mask_to_pgm(s.masks.at(layer), mask_view_layout(session.model().layers[layer]));
            if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
            write_file(out, pgm);
            return 0;
        }

        if (*fixtures_cmd) {
            const auto goldens = fixtures::generate_fixtures(out, seed);
            std::cout << goldens.dump(2) << "\n";
            return 0;
        }
    } catch (const Usage& e) {
        std::cerr << "vinnpruner: " << e.what() << "\n";
        return exit_invalid;
    } catch (const InvalidArgument& e) {
        std::cerr << "vinnpruner: invalid argument: " << e.what() << "\n";
        return exit_invalid;
    } catch (const NotFound& e) {
        std::cerr << "vinnpruner: " << e.what() << "\n";
        return exit_invalid;
    } catch (const ArchiveError& e) {
        std::cerr << "vinnpruner: archive error: " << e.what() << "\n";
        return exit_archive;
    } catch (const ShapeError& e) {
        std::cerr << "vinnpruner: archive error: " << e.what() << "\n";
        return exit_archive;
    } catch (const std::exception& e) {
        std::cerr << "vinnpruner: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
