#include "vinn/service.hpp"

#include "vinn/archive.hpp"
#include "vinn/error.hpp"
#include "vinn/feature_maps.hpp"
#include "vinn/json_codec.hpp"
#include "vinn/session.hpp"

#include "httplib.h"

#include <charconv>
#include <map>
#include <mutex>
#include <regex>
#include <shared_mutex>

namespace vinn {

namespace {

using nlohmann::json;

struct SessionEntry {
    SessionEntry(std::string id, Session s, fs::path d) : id(std::move(id)), session(std::move(s)), dir(std::move(d)) {}

    std::string id;
    std::mutex write_gate;          // held for the whole mutation; try-locked
    mutable std::shared_mutex state;
    Session session;
    fs::path dir;
};

class HttpError : public std::runtime_error {
public:
    HttpError(int status, const std::string& what) : std::runtime_error(what), status(status) {}
    int status;
};

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message, const json& fields = json::array()) {
    send_json(res, status, {{"error", message}, {"fields", fields}});
}

std::size_t parse_index(const std::string& text, const std::string& field) {
    std::size_t value = 0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (text.empty() || ec != std::errc{} || ptr != end) throw InvalidArgument(field, "must be a non-negative integer");
    return value;
}

std::optional<std::size_t> query_index(const httplib::Request& req, const std::string& name) {
    if (!req.has_param(name)) return std::nullopt;
    return parse_index(req.get_param_value(name), name);
}

json parse_body(const httplib::Request& req) {
    try {
        return json::parse(req.body);
    } catch (const json::exception&) {
        throw InvalidArgument("body", "must be valid JSON");
    }
}

const PruneStep& step_or_current(const Session& s, std::optional<std::size_t> step) {
    return step ? s.step(*step) : s.current();
}

}  // namespace

struct ApiService::Impl {
    explicit Impl(ServiceConfig c) : config(std::move(c)) {}

    ServiceConfig config;
    httplib::Server server;
    std::mutex registry_mutex;
    std::map<std::string, std::shared_ptr<SessionEntry>> sessions;
    std::size_t next_session = 1;

    std::shared_ptr<SessionEntry> find_session(const std::string& id) {
        std::lock_guard lock(registry_mutex);
        if (auto it = sessions.find(id); it != sessions.end()) return it->second;
        // Sessions persisted by an earlier run are loaded on first use.
        const auto dir = config.sessions_dir / id;
        if (!fs::exists(dir / "session.json")) throw NotFound("unknown session '" + id + "'");
        auto entry = std::make_shared<SessionEntry>(id, load_session(dir), dir);
        sessions.emplace(id, entry);
        return entry;
    }

    json create_session(const json& body) {
        if (!body.is_object()) throw InvalidArgument("body", "must be an object");
        auto name_field = [&](const char* key) {
            if (!body.contains(key) || !body.at(key).is_string()) throw InvalidArgument(key, "must be a string");
            const auto name = body.at(key).get<std::string>();
            if (!std::regex_match(name, std::regex("[A-Za-z0-9._-]+")) || name == "." || name == "..") {
                throw InvalidArgument(key, "invalid archive name");
            }
            return name;
        };
        const auto model_dir = config.models_dir / name_field("model");
        const auto dataset_dir = config.datasets_dir / name_field("dataset");
        if (!fs::is_directory(model_dir)) throw NotFound("unknown model '" + body.at("model").get<std::string>() + "'");
        if (!fs::is_directory(dataset_dir)) {
            throw NotFound("unknown dataset '" + body.at("dataset").get<std::string>() + "'");
        }
        Model model;
        Dataset dataset;
        try {
            model = load_model(model_dir);
            dataset = load_dataset(dataset_dir);
        } catch (const ArchiveError& e) {
            throw InvalidArgument("archive", e.what());
        }
        try {
            check_compatible(model, dataset);
        } catch (const Error& e) {
            throw InvalidArgument("dataset", e.what());
        }
        Session session(std::move(model), std::move(dataset));
        session.model_ref = fs::absolute(model_dir).string();
        session.dataset_ref = fs::absolute(dataset_dir).string();

        std::shared_ptr<SessionEntry> entry;
        {
            std::lock_guard lock(registry_mutex);
            std::string id;
            do {
                id = "s" + std::to_string(next_session++);
            } while (sessions.contains(id) || fs::exists(config.sessions_dir / id));
            entry = std::make_shared<SessionEntry>(id, std::move(session), config.sessions_dir / id);
            sessions.emplace(id, entry);
        }
        save_session(entry->session, entry->dir);
        std::shared_lock lock(entry->state);
        return {{"session_id", entry->id}, {"baseline", step_summary(entry->session.step(0), true)}};
    }

    // Runs a mutation under the session's write gate; a concurrent mutation gets 409.
    template <typename F>
    json mutate(const std::string& id, F&& op) {
        auto entry = find_session(id);
        std::unique_lock gate(entry->write_gate, std::try_to_lock);
        if (!gate.owns_lock()) throw HttpError(409, "another mutation is in progress on session '" + id + "'");
        json result;
        {
            std::unique_lock lock(entry->state);
            result = op(entry->session);
        }
        std::shared_lock lock(entry->state);
        save_session(entry->session, entry->dir);
        return result;
    }

    template <typename F>
    json read(const std::string& id, F&& op) {
        auto entry = find_session(id);
        std::shared_lock lock(entry->state);
        return op(static_cast<const Session&>(entry->session));
    }

    template <typename F>
    void handle(httplib::Response& res, F&& op) {
        try {
            send_json(res, 200, op());
        } catch (const HttpError& e) {
            send_error(res, e.status, e.what());
        } catch (const NotFound& e) {
            send_error(res, 404, e.what());
        } catch (const InvalidArgument& e) {
            send_error(res, 422, e.what(), json::array({{{"field", e.field()}, {"message", e.what()}}}));
        } catch (const ShapeError& e) {
            send_error(res, 422, e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, e.what());
        }
    }

    void routes();
};

void ApiService::Impl::routes() {
    static const std::string sid = "/api/sessions/([A-Za-z0-9_-]+)";

    server.Get("/api/models", [this](const httplib::Request&, httplib::Response& res) {
        handle(res, [&] {
            json out = json::array();
            for (const auto& e : list_models(config.models_dir)) {
                json item{{"name", e.name}, {"status", e.valid ? "ok" : "invalid"}};
                if (e.valid) item["summary"] = e.summary;
                else item["reason"] = e.reason;
                out.push_back(std::move(item));
            }
            return out;
        });
    });

    server.Get("/api/datasets", [this](const httplib::Request&, httplib::Response& res) {
        handle(res, [&] {
            json out = json::array();
            for (const auto& e : list_datasets(config.datasets_dir)) {
                json item{{"name", e.name}, {"status", e.valid ? "ok" : "invalid"}};
                if (e.valid) item["summary"] = e.summary;
                else item["reason"] = e.reason;
                out.push_back(std::move(item));
            }
            return out;
        });
    });

    server.Get("/api/settings/suggested", [this](const httplib::Request&, httplib::Response& res) {
        handle(res, [] { return json{{"label", "suggested"}, {"settings", PruneSettings::suggested()}}; });
    });

    server.Post("/api/sessions", [this](const httplib::Request& req, httplib::Response& res) {
        handle(res, [&] { return create_session(parse_body(req)); });
    });

    server.Get("/api/sessions", [this](const httplib::Request&, httplib::Response& res) {
        handle(res, [&] {
            std::lock_guard lock(registry_mutex);
            json ids = json::array();
            for (const auto& [id, entry] : sessions) ids.push_back(id);
            return ids;
        });
    });

    server.Get(sid, [this](const httplib::Request& req, httplib::Response& res) {
        handle(res, [&] {
            return read(req.matches[1], [&](const Session& s) {
                return json{{"session_id", std::string(req.matches[1])},
                            {"model", s.model().name},
                            {"dataset", s.dataset().name},
                            {"current_step", s.current_id()},
                            {"step_count", s.list_steps().size()},
                            {"weighted_layers", weighted_layer_indices(s.model())}};
            });
        });
    });

    server.Get(sid + "/steps", [this](const httplib::Request& req, httplib::Response& res) {
        handle(res, [&] {
            return read(req.matches[1], [](const Session& s) {
                json steps = json::array();
                for (const auto* step : s.list_steps()) steps.push_back(step_summary(*step, step->step_id == s.current_id()));
                return json{{"current_step", s.current_id()}, {"steps", std::move(steps)}};
            });
        });
    });

    server.Post(sid + "/prune", [this](const httplib::Request& req, httplib::Response& res) {
        handle(res, [&] {
            const auto body = parse_body(req);
            const auto settings = parse_settings(body.is_object() && body.contains("settings") ? body.at("settings") : body);
            return mutate(req.matches[1], [&](Session& s) { return step_summary(s.run_prune_step(settings), true); });
        });
    });

    server.Post(sid + "/edits", [this](const httplib::Request& req, httplib::Response& res) {
        handle(res, [&] {
            const auto body = parse_body(req);
            if (!body.is_object() || !body.contains("edits")) throw InvalidArgument("edits", "is required");
            const auto edits = parse_edits(body.at("edits"));
            return mutate(req.matches[1], [&](Session& s) { return step_summary(s.apply_manual_edits(edits), true); });
        });
    });

    server.Post(sid + "/revert", [this](const httplib::Request& req, httplib::Response& res) {
        handle(res, [&] {
            const auto body = parse_body(req);
            if (!body.is_object() || !body.contains("step_id") || !body.at("step_id").is_number_unsigned()) {
                throw InvalidArgument("step_id", "must be a non-negative integer");
            }
            const auto id = body.at("step_id").get<StepId>();
            return mutate(req.matches[1], [&](Session& s) {
                s.revert_to(id);
                return step_summary(s.current(), true);
            });
        });
    });

    server.Delete(sid + "/steps/([0-9]+)", [this](const httplib::Request& req, httplib::Response& res) {
        handle(res, [&] {
            const auto id = parse_index(req.matches[2], "step_id");
            return mutate(req.matches[1], [&](Session& s) {
                s.remove_step(id);
                json steps = json::array();
                for (const auto* step : s.list_steps()) steps.push_back(step->step_id);
                return json{{"removed", id}, {"current_step", s.current_id()}, {"step_ids", std::move(steps)}};
            });
        });
    });

    server.Get(sid + "/layers/([0-9]+)/mask", [this](const httplib::Request& req, httplib::Response& res) {
        handle(res, [&] {
            const auto layer = parse_index(req.matches[2], "layer");
            const auto format = req.has_param("format") ? req.get_param_value("format") : std::string("bits");
            if (format != "bits" && format != "rle") throw InvalidArgument("format", "must be 'bits' or 'rle'");
            const auto step_id = query_index(req, "step");
            return read(req.matches[1], [&](const Session& s) {
                const auto& step = step_or_current(s, step_id);
                if (layer >= s.model().layers.size() || !s.model().layers[layer].weighted()) {
                    throw NotFound("layer " + std::to_string(layer) + " has no mask");
                }
                const auto& mask = step.masks.at(layer);
                json out{{"layer_index", layer},
                         {"step_id", step.step_id},
                         {"shape", mask.bits.shape},
                         {"format", format},
                         {"geometry", layout_json(mask_view_layout(s.model().layers[layer]))},
                         {"pruned", mask.pruned_count()},
                         {"remaining", mask.kept_count()},
                         {"total", mask.total()}};
                if (format == "bits") out["bits"] = to_hex(pack_bits(mask.bits.data));
                else out["runs"] = rle_encode(mask.bits.data);
                return out;
            });
        });
    });

    server.Get(sid + "/metrics", [this](const httplib::Request& req, httplib::Response& res) {
        handle(res, [&] {
            const auto step_id = query_index(req, "step");
            return read(req.matches[1], [&](const Session& s) {
                const auto& step = step_or_current(s, step_id);
                return json{{"step_id", step.step_id}, {"class_names", s.dataset().class_names}, {"report", step.report}};
            });
        });
    });

    server.Get(sid + "/compare", [this](const httplib::Request& req, httplib::Response& res) {
        handle(res, [&] {
            const auto a = query_index(req, "a");
            const auto b = query_index(req, "b");
            if (!a || !b) throw InvalidArgument(a ? "b" : "a", "is required");
            return read(req.matches[1], [&](const Session& s) {
                return json{{"a", *a}, {"b", *b}, {"delta", compare_reports(s.step(*a).report, s.step(*b).report)}};
            });
        });
    });

    server.Get(sid + "/featuremaps", [this](const httplib::Request& req, httplib::Response& res) {
        handle(res, [&] {
            const auto sample = query_index(req, "sample");
            const auto layer = query_index(req, "layer");
            if (!sample) throw InvalidArgument("sample", "is required");
            if (!layer) throw InvalidArgument("layer", "is required");
            auto variant = MaskVariant::current;
            if (req.has_param("variant")) {
                auto parsed = parse_mask_variant(req.get_param_value("variant"));
                if (!parsed) throw InvalidArgument("variant", "must be 'current' or 'baseline'");
                variant = *parsed;
            }
            return read(req.matches[1], [&](const Session& s) {
                json out = feature_maps(s, *sample, *layer, variant);
                out["variant"] = variant == MaskVariant::current ? "current" : "baseline";
                return out;
            });
        });
    });

    server.Post(sid + "/featuremaps/mark", [this](const httplib::Request& req, httplib::Response& res) {
        handle(res, [&] {
            const auto body = parse_body(req);
            if (!body.is_object()) throw InvalidArgument("body", "must be an object");
            for (const char* key : {"layer", "channel"}) {
                if (!body.contains(key) || !body.at(key).is_number_unsigned()) {
                    throw InvalidArgument(key, "must be a non-negative integer");
                }
            }
            const auto layer = body.at("layer").get<std::size_t>();
            const auto channel = body.at("channel").get<std::size_t>();
            auto entry = find_session(req.matches[1]);
            std::unique_lock gate(entry->write_gate, std::try_to_lock);
            if (!gate.owns_lock()) throw HttpError(409, "another mutation is in progress");
            std::unique_lock lock(entry->state);
            const auto edit = mark_channel_from_feature_map(entry->session, layer, channel);
            return json{{"edit", edit}, {"pending", entry->session.pending_marks()}};
        });
    });
}

ApiService::ApiService(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {
    fs::create_directories(impl_->config.sessions_dir);
    impl_->routes();
    if (impl_->config.ui_dir) impl_->server.set_mount_point("/", impl_->config.ui_dir->string());
}

ApiService::~ApiService() { stop(); }

int ApiService::bind(const std::string& host, int port) {
    if (port == 0) return impl_->server.bind_to_any_port(host);
    return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool ApiService::listen() { return impl_->server.listen_after_bind(); }

void ApiService::stop() {
    if (impl_) impl_->server.stop();
}

void ApiService::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace vinn
