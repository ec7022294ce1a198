#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "wadkit/labeller.hpp"

// After Eigen: <resolv.h> from httplib defines a `_res` macro.
#include "httplib.h"
#include "json.hpp"

namespace wadkit {

struct LabellerServerConfig {
    std::filesystem::path state_dir;  // session logs; empty keeps sessions in memory only
    std::size_t workers = 1;
};

/// HTTP+JSON front of the labelling sessions.
class LabellerServer {
public:
    explicit LabellerServer(LabellerServerConfig cfg) : cfg_(std::move(cfg)) {
        restore();
        routes();
    }

    httplib::Server& http() { return server_; }

    bool listen(const std::string& host, int port) { return server_.listen(host, port); }
    int bind_to_any_port(const std::string& host) { return server_.bind_to_any_port(host); }
    bool listen_after_bind() { return server_.listen_after_bind(); }
    void stop() { server_.stop(); }

    std::shared_ptr<Session> session(const std::string& id) const {
        std::lock_guard lock(mutex_);
        auto it = sessions_.find(id);
        if (it == sessions_.end()) throw MissingInputError("unknown session " + id);
        return it->second;
    }

    std::shared_ptr<Session> create(SessionConfig cfg) {
        cfg.workers = cfg_.workers;
        std::string id;
        {
            std::lock_guard lock(mutex_);
            id = "s" + std::to_string(++counter_);
        }
        const auto log = cfg_.state_dir.empty() ? std::filesystem::path{} : cfg_.state_dir / (id + ".jsonl");
        auto s = std::make_shared<Session>(id, cfg, log);
        std::lock_guard lock(mutex_);
        sessions_[id] = s;
        return s;
    }

private:
    void restore() {
        if (cfg_.state_dir.empty() || !std::filesystem::exists(cfg_.state_dir)) return;
        for (const auto& entry : std::filesystem::directory_iterator(cfg_.state_dir)) {
            if (entry.path().extension() != ".jsonl") continue;
            std::shared_ptr<Session> s = Session::replay(entry.path(), cfg_.workers);
            const auto& id = s->id();
            if (id.size() > 1 && id[0] == 's') counter_ = std::max(counter_, std::stoul(id.substr(1)));
            sessions_[id] = std::move(s);
        }
    }

    template <typename Fn>
    static void guarded(httplib::Response& res, Fn&& fn) {
        auto fail = [&](int status, const std::string& msg) {
            res.status = status;
            res.set_content(nlohmann::json{{"error", msg}}.dump(), "application/json");
        };
        try {
            fn();
        } catch (const MissingInputError& e) {
            fail(404, e.what());
        } catch (const UsageError& e) {
            fail(400, e.what());
        } catch (const FormatError& e) {
            fail(400, e.what());
        } catch (const nlohmann::json::exception& e) {
            fail(400, std::string("bad request body: ") + e.what());
        } catch (const std::exception& e) {
            fail(500, e.what());
        }
    }

    static void reply(httplib::Response& res, const nlohmann::json& j, int status = 200) {
        res.status = status;
        res.set_content(j.dump(), "application/json");
    }

    void routes() {
        server_.set_default_headers({{"Access-Control-Allow-Origin", "*"}});

        server_.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const auto body = nlohmann::json::parse(req.body);
                SessionConfig cfg;
                cfg.recordings = body.at("recordings").get<std::vector<std::string>>();
                cfg.snippet_ms = body.value("snippet_ms", 500);
                cfg.projection = body.value("projection", "pca");
                cfg.seed = body.value("seed", std::uint64_t{1});
                cfg.perplexity = body.value("perplexity", 30.0);
                cfg.tsne_iterations = body.value("tsne_iterations", 1000);
                for (const auto& r : cfg.recordings)
                    if (!std::filesystem::exists(r)) throw MissingInputError("missing recording " + r);
                auto s = create(cfg);
                nlohmann::json out{{"session_id", s->id()}, {"snippets", s->snippets().size()}};
                if (cfg.projection == "tsne") out["job_id"] = s->start_projection("tsne", cfg.seed);
                reply(res, out, 201);
            });
        });

        server_.Get(R"(/sessions/(\w+))", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                auto s = session(req.matches[1]);
                nlohmann::json recs = nlohmann::json::array();
                for (const auto& r : s->recordings()) recs.push_back({{"id", r.id}, {"path", r.path}, {"duration_s", r.audio.duration_s()}});
                reply(res, {{"session_id", s->id()},
                            {"recordings", recs},
                            {"snippet_ms", s->config().snippet_ms},
                            {"snippets", s->snippets().size()},
                            {"projection", s->active_projection()},
                            {"history_len", s->history_size()},
                            {"labels", labeller_vocabulary()}});
            });
        });

        server_.Get(R"(/sessions/(\w+)/points)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                auto s = session(req.matches[1]);
                const auto coords = s->coords();
                const auto labels = s->labels();
                nlohmann::json out = nlohmann::json::array();
                for (const auto& p : s->snippets()) {
                    const auto i = static_cast<Eigen::Index>(p.id);
                    out.push_back({{"id", p.id},
                                   {"x", coords ? nlohmann::json((*coords)(i, 0)) : nlohmann::json()},
                                   {"y", coords ? nlohmann::json((*coords)(i, 1)) : nlohmann::json()},
                                   {"t_start_s", p.t_start_s},
                                   {"t_end_s", p.t_end_s},
                                   {"recording_id", p.recording_id},
                                   {"label", labels[p.id] ? nlohmann::json(*labels[p.id]) : nlohmann::json()}});
                }
                reply(res, out);
            });
        });

        server_.Get(R"(/sessions/(\w+)/audio/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                auto s = session(req.matches[1]);
                const auto audio = s->snippet_audio(std::stoul(req.matches[2]));
                res.set_content(encode_wav(audio), "audio/wav");
            });
        });

        server_.Post(R"(/sessions/(\w+)/labels)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                auto s = session(req.matches[1]);
                const auto body = nlohmann::json::parse(req.body);
                const auto n = s->assign(body.at("snippet_ids").get<std::vector<std::size_t>>(), body.at("label").get<std::string>());
                reply(res, {{"history_len", n}});
            });
        });

        server_.Post(R"(/sessions/(\w+)/undo)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { reply(res, {{"history_len", session(req.matches[1])->undo()}}); });
        });

        server_.Post(R"(/sessions/(\w+)/projection)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                auto s = session(req.matches[1]);
                const auto body = req.body.empty() ? nlohmann::json::object() : nlohmann::json::parse(req.body);
                const auto job = s->start_projection(body.value("method", "tsne"), body.value("seed", std::uint64_t{1}));
                reply(res, {{"job_id", job}}, 202);
            });
        });

        server_.Get(R"(/sessions/(\w+)/projection/(\w+))", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                auto s = session(req.matches[1]);
                const auto job = s->job(req.matches[2]);
                if (!job) throw MissingInputError("unknown job " + std::string(req.matches[2]));
                reply(res, {{"job_id", job->id}, {"method", job->method}, {"seed", job->seed}, {"status", job->status},
                            {"error", job->error}});
            });
        });

        server_.Get(R"(/sessions/(\w+)/export)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                auto s = session(req.matches[1]);
                res.set_header("Content-Disposition", "attachment; filename=\"" + s->id() + "_labels.zip\"");
                res.set_content(s->export_zip(), "application/zip");
            });
        });
    }

    LabellerServerConfig cfg_;
    httplib::Server server_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    unsigned long counter_ = 0;
};

}  // namespace wadkit
