#include "sharedctl/service.hpp"

#include "sharedctl/errors.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <thread>

namespace sharedctl {

namespace {

using json = nlohmann::ordered_json;
namespace asio = boost::asio;
namespace beast = boost::beast;
namespace ws = beast::websocket;
using tcp = asio::ip::tcp;

json cell_json(Cell c) { return json::array({c.row, c.col}); }

struct HttpError {
    int status;
    std::string message;
};

// One session plus the ticket lock that serializes its requests in arrival order.
struct Slot {
    explicit Slot(Session s) : session(std::move(s)) {}
    Session session;
    std::mutex m;
    std::condition_variable cv;
    std::atomic<std::uint64_t> next_ticket{0};
    std::uint64_t serving = 0;
};

// -------------------------------------------------------- websocket mirror

class WsClient : public std::enable_shared_from_this<WsClient> {
public:
    WsClient(tcp::socket socket, std::function<void(WsClient*)> on_close)
        : stream_(std::move(socket)), on_close_(std::move(on_close)) {}

    const std::string& filter() const { return filter_; }

    void start() {
        auto self = shared_from_this();
        beast::http::async_read(stream_.next_layer(), buffer_, request_,
                                [self](beast::error_code ec, std::size_t) {
                                    if (ec) return self->close();
                                    // "/sessions/<id>" subscribes to one session.
                                    const std::string target(self->request_.target());
                                    const std::string prefix = "/sessions/";
                                    if (target.rfind(prefix, 0) == 0) self->filter_ = target.substr(prefix.size());
                                    self->stream_.async_accept(self->request_, [self](beast::error_code e) {
                                        if (e) return self->close();
                                        self->open_ = true;
                                        self->read();
                                        self->flush();
                                    });
                                });
    }

    void send(std::shared_ptr<const std::string> text) {
        queue_.push_back(std::move(text));
        if (open_ && queue_.size() == 1) flush();
    }

    void close() {
        if (closed_) return;
        closed_ = true;
        beast::error_code ec;
        stream_.next_layer().shutdown(tcp::socket::shutdown_both, ec);
        stream_.next_layer().close(ec);
        on_close_(this);
    }

private:
    void read() {
        auto self = shared_from_this();
        stream_.async_read(in_, [self](beast::error_code ec, std::size_t) {
            if (ec) return self->close();
            self->in_.consume(self->in_.size());
            self->read();
        });
    }

    void flush() {
        if (queue_.empty() || closed_ || writing_) return;
        writing_ = true;
        auto self = shared_from_this();
        stream_.text(true);
        stream_.async_write(asio::buffer(*queue_.front()), [self](beast::error_code ec, std::size_t) {
            self->writing_ = false;
            if (ec) return self->close();
            self->queue_.pop_front();
            self->flush();
        });
    }

    ws::stream<tcp::socket> stream_;
    std::function<void(WsClient*)> on_close_;
    beast::flat_buffer buffer_;
    beast::flat_buffer in_;
    beast::http::request<beast::http::string_body> request_;
    std::string filter_;
    std::deque<std::shared_ptr<const std::string>> queue_;
    bool open_ = false;
    bool writing_ = false;
    bool closed_ = false;
};

class WsMirror {
public:
    WsMirror(const std::string& host, int port) : acceptor_(ioc_) {
        beast::error_code ec;
        const tcp::endpoint ep(asio::ip::make_address(host, ec), static_cast<unsigned short>(port));
        if (ec) throw ConfigError("bad host '" + host + "'");
        acceptor_.open(ep.protocol(), ec);
        if (!ec) acceptor_.set_option(asio::socket_base::reuse_address(true), ec);
        if (!ec) acceptor_.bind(ep, ec);
        if (!ec) acceptor_.listen(asio::socket_base::max_listen_connections, ec);
        if (ec) throw ConfigError("cannot listen on WebSocket port " + std::to_string(port) + ": " + ec.message());
        port_ = acceptor_.local_endpoint().port();
        accept();
        thread_ = std::thread([this] { ioc_.run(); });
    }

    ~WsMirror() { stop(); }

    int port() const { return port_; }

    void publish(const std::string& session, json event) {
        auto text = std::make_shared<const std::string>(event.dump());
        asio::post(ioc_, [this, session, text] {
            for (auto& [ptr, client] : clients_)
                if (client->filter().empty() || client->filter() == session) client->send(text);
        });
    }

    void stop() {
        if (!thread_.joinable()) return;
        asio::post(ioc_, [this] {
            beast::error_code ec;
            acceptor_.close(ec);
            auto copy = clients_;
            for (auto& [ptr, client] : copy) client->close();
        });
        // Let the close handlers run, then stop.
        asio::post(ioc_, [this] { ioc_.stop(); });
        thread_.join();
    }

private:
    void accept() {
        acceptor_.async_accept([this](beast::error_code ec, tcp::socket socket) {
            if (ec) return;
            auto client = std::make_shared<WsClient>(std::move(socket), [this](WsClient* c) { clients_.erase(c); });
            clients_.emplace(client.get(), client);
            client->start();
            accept();
        });
    }

    asio::io_context ioc_;
    tcp::acceptor acceptor_;
    std::map<WsClient*, std::shared_ptr<WsClient>> clients_;
    std::thread thread_;
    int port_ = 0;
};

} // namespace

// ------------------------------------------------------------------ service

struct SessionService::Impl {
    ServiceOptions opt;
    httplib::Server http;
    std::thread http_thread;
    std::thread worker;
    std::unique_ptr<WsMirror> mirror;
    int bound_port = 0;

    mutable std::mutex mu;
    std::condition_variable stopped_cv;
    bool stopped = false;
    std::string status = "empty";
    std::string failure;
    std::shared_ptr<const SharedControl> control;
    std::map<std::string, std::shared_ptr<Slot>> sessions;
    std::uint64_t created = 0;

    // Per-cell layers for the agent cells, with the obstacle and automaton
    // state of product state k held fixed.
    json layer(const SharedControl& sc, StateId k, const std::vector<double>& values) const {
        const Gridworld& g = sc.grid;
        const int n = g.config().n;
        const StateId base = sc.product.base_state[k];
        const AutomatonState q = sc.product.automaton_state[k];
        const Cell obstacle = g.obstacle_cell(base);
        json rows = json::array();
        for (int r = 0; r < n; ++r) {
            json row = json::array();
            for (int c = 0; c < n; ++c) {
                const auto pk = sc.product_state(g.state_of({r, c}, obstacle), q);
                row.push_back(pk ? json(values[*pk]) : json(nullptr));
            }
            rows.push_back(std::move(row));
        }
        return rows;
    }

    json heatmaps(const SharedControl& sc, StateId k) const {
        return {{"human", layer(sc, k, sc.reach_human)},
                {"repaired", layer(sc, k, sc.reach_repaired)},
                {"autonomy", layer(sc, k, sc.reach_autonomy)}};
    }

    json state_json(const Session& s) const {
        const SharedControl& sc = s.scenario();
        const StateId k = s.state();
        const StateId base = sc.product.base_state[k];
        return {{"product", k},
                {"base", base},
                {"automaton", sc.product.automaton_state[k]},
                {"agent", cell_json(sc.grid.agent_cell(base))},
                {"obstacle", cell_json(sc.grid.obstacle_cell(base))},
                {"finished", s.finished()},
                {"steps", s.log().size()}};
    }

    json view_json(const Session& s) const {
        const SharedControl& sc = s.scenario();
        return {{"state", state_json(s)},
                {"b", layer(sc, s.state(), sc.b)},
                {"heatmaps", heatmaps(sc, s.state())}};
    }

    json grid_json(const SharedControl& sc) const {
        const GridworldConfig& c = sc.grid.config();
        json statics = json::array();
        for (Cell x : c.static_obstacles) statics.push_back(cell_json(x));
        json actions = json::array();
        for (const char* a : kGridActions) actions.push_back(a);
        return {{"n", c.n},
                {"m", c.m},
                {"region_origin", cell_json(*c.region_origin)},
                {"target", cell_json(*c.target)},
                {"static_obstacles", statics},
                {"agent_slip", c.agent_slip},
                {"actions", actions}};
    }

    std::shared_ptr<Slot> find(const std::string& id) {
        std::lock_guard lock(mu);
        auto it = sessions.find(id);
        if (it == sessions.end()) throw HttpError{404, "no session '" + id + "'"};
        return it->second;
    }

    // Runs `fn` on the session once every earlier request on it has finished.
    template <class F>
    json in_order(const std::string& id, F fn) {
        auto slot = find(id);
        const std::uint64_t ticket = slot->next_ticket.fetch_add(1);
        std::unique_lock lock(slot->m);
        slot->cv.wait(lock, [&] { return slot->serving == ticket; });
        struct Done {
            Slot& s;
            ~Done() {
                ++s.serving;
                s.cv.notify_all();
            }
        } done{*slot};
        return fn(slot->session);
    }

    void publish(const std::string& id, json event) {
        if (mirror) mirror->publish(id, std::move(event));
    }

    static json body_of(const httplib::Request& req) {
        if (req.body.empty()) return json::object();
        json j = json::parse(req.body, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw HttpError{400, "request body must be a JSON object"};
        return j;
    }

    json create(const json& body) {
        for (const char* key : {"scenario", "result"})
            if (body.contains(key) && !(body[key].is_string() && body[key] == "default"))
                throw HttpError{400, std::string(key) + " must be \"default\" (the scenario this server hosts)"};
        for (const auto& [key, v] : body.items())
            if (key != "scenario" && key != "result" && key != "seed")
                throw HttpError{400, "unknown field '" + key + "'"};
        std::shared_ptr<const SharedControl> sc;
        std::string id;
        std::uint64_t seed = 0;
        {
            std::lock_guard lock(mu);
            if (status != "ready")
                throw HttpError{503, status == "failed" ? "synthesis failed: " + failure : "synthesis is " + status};
            sc = control;
            ++created;
            id = "s" + std::to_string(created);
            seed = created;
        }
        if (body.contains("seed")) {
            if (!body["seed"].is_number_unsigned()) throw HttpError{400, "seed must be a non-negative integer"};
            seed = body["seed"].get<std::uint64_t>();
        }
        auto slot = std::make_shared<Slot>(Session(id, sc, seed));
        json out = {{"id", id}, {"seed", seed}, {"grid", grid_json(*sc)}};
        const json view = view_json(slot->session);
        for (const auto& [k, v] : view.items()) out[k] = v;
        {
            std::lock_guard lock(mu);
            sessions.emplace(id, slot);
        }
        publish(id, {{"type", "session"}, {"session", id}, {"seed", seed}, {"state", out["state"]}});
        return out;
    }

    json step(Session& s, const json& body) {
        if (!body.contains("action") || !body["action"].is_string())
            throw HttpError{400, "body needs {\"action\": name}"};
        const Mdp& mdp = s.scenario().product.mdp;
        const auto a = mdp.find_action(s.state(), body["action"].get<std::string>());
        if (!a) throw HttpError{400, "unknown action '" + body["action"].get<std::string>() + "'"};
        if (s.finished()) throw HttpError{409, "episode is over; reset the session"};
        const StateId from = s.state();
        const StepRecord rec = s.step(*a);
        json blended = json::object();
        for (std::size_t i = 0; i < rec.blended.size(); ++i) blended[mdp.action(from, i).name] = rec.blended[i];
        json out = {{"step", s.log().size() - 1},
                    {"command", mdp.action(from, rec.command).name},
                    {"b_here", rec.b},
                    {"blended", blended},
                    {"sampled", mdp.action(from, rec.sampled).name},
                    {"flags", {{"crash", rec.crash}, {"target", rec.target}}},
                    {"deviation_here", rec.deviation_here}};
        const json view = view_json(s);
        for (const auto& [k, v] : view.items()) out[k] = v;
        json event = out;
        event.erase("heatmaps");
        event.erase("b");
        event["type"] = "step";
        event["session"] = s.id();
        publish(s.id(), std::move(event));
        return out;
    }

    json reset(Session& s) {
        s.reset();
        json out = view_json(s);
        publish(s.id(), {{"type", "reset"}, {"session", s.id()}, {"state", out["state"]}});
        return out;
    }

    json meta() const {
        std::lock_guard lock(mu);
        json out = {{"status", status}};
        if (status == "failed") out["error"] = failure;
        if (control) {
            const SynthesisResult& r = control->document.result;
            out["method"] = to_string(r.method);
            out["engine"] = to_string(r.engine);
            out["delta_hat"] = r.delta_hat;
            out["probability"] = r.probability;
            out["beta"] = control->document.beta;
            out["adjusted_states"] = control->adjustments.size();
        }
        return out;
    }

    template <class F>
    static void guarded(httplib::Response& res, F fn) {
        auto fail = [&](int status, const std::string& msg) {
            res.status = status;
            res.set_content(json{{"error", msg}}.dump(), "application/json");
        };
        try {
            const json out = fn();
            res.status = 200;
            res.set_content(out.dump(), "application/json");
        } catch (const HttpError& e) {
            fail(e.status, e.message);
        } catch (const json::exception& e) {
            fail(400, e.what());
        } catch (const DomainError& e) {
            fail(400, e.what());
        } catch (const std::exception& e) {
            fail(500, e.what());
        }
    }

    void routes() {
        http.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { return create(body_of(req)); });
        });
        http.Get(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { return in_order(req.matches[1], [&](Session& s) { return view_json(s); }); });
        });
        http.Post(R"(/sessions/([^/]+)/step)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const json body = body_of(req);
                return in_order(req.matches[1], [&](Session& s) { return step(s, body); });
            });
        });
        http.Post(R"(/sessions/([^/]+)/reset)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { return in_order(req.matches[1], [&](Session& s) { return reset(s); }); });
        });
        http.Get(R"(/sessions/([^/]+)/export-demos)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                return in_order(req.matches[1], [&](Session& s) {
                    return json::parse(demos_to_json(s.scenario().grid.mdp(), s.export_demos()));
                });
            });
        });
        http.Get("/meta/result", [this](const httplib::Request&, httplib::Response& res) {
            guarded(res, [&] { return meta(); });
        });
        http.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
        // The library default adds SO_REUSEPORT, which lets a second server share a busy port.
        http.set_socket_options([](socket_t sock) {
            int yes = 1;
            setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
        });
        http.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
            res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
            res.set_header("Access-Control-Allow-Headers", "Content-Type");
            res.status = 204;
        });
    }
};

SessionService::SessionService(ServiceOptions options) : impl_(std::make_unique<Impl>()) {
    if (!(options.b_min >= 0.0 && options.b_min <= options.b_max && options.b_max <= 1.0))
        throw ConfigError("blending bounds must satisfy 0 <= b_min <= b_max <= 1");
    impl_->opt = std::move(options);
    impl_->routes();
}

SessionService::~SessionService() {
    stop();
    if (impl_->worker.joinable()) impl_->worker.join();
}

void SessionService::set_result(const GridworldConfig& scenario, ResultDocument result) {
    auto sc = std::make_shared<const SharedControl>(scenario, std::move(result), impl_->opt.b_min, impl_->opt.b_max);
    std::lock_guard lock(impl_->mu);
    impl_->control = std::move(sc);
    impl_->status = "ready";
}

void SessionService::synthesize_on_start(const GridworldConfig& scenario, std::function<ResultDocument()> job) {
    {
        std::lock_guard lock(impl_->mu);
        if (impl_->worker.joinable()) throw ConfigError("synthesis already started");
        impl_->status = "running";
    }
    impl_->worker = std::thread([this, scenario, job = std::move(job)] {
        try {
            set_result(scenario, job());
        } catch (const std::exception& e) {
            std::lock_guard lock(impl_->mu);
            impl_->status = "failed";
            impl_->failure = e.what();
        }
    });
}

void SessionService::start() {
    Impl& d = *impl_;
    if (d.opt.port == 0) {
        d.bound_port = d.http.bind_to_any_port(d.opt.host);
        if (d.bound_port < 0) throw ConfigError("cannot bind " + d.opt.host);
    } else {
        if (!d.http.bind_to_port(d.opt.host, d.opt.port))
            throw ConfigError("port " + std::to_string(d.opt.port) + " is in use");
        d.bound_port = d.opt.port;
    }
    if (d.opt.ws_port >= 0) d.mirror = std::make_unique<WsMirror>(d.opt.host, d.opt.ws_port);
    d.http_thread = std::thread([&d] { d.http.listen_after_bind(); });
    d.http.wait_until_ready();
}

void SessionService::wait() {
    std::unique_lock lock(impl_->mu);
    impl_->stopped_cv.wait(lock, [&] { return impl_->stopped; });
}

void SessionService::stop() {
    Impl& d = *impl_;
    d.http.stop();
    if (d.http_thread.joinable()) d.http_thread.join();
    if (d.mirror) d.mirror->stop();
    std::lock_guard lock(d.mu);
    d.stopped = true;
    d.stopped_cv.notify_all();
}

int SessionService::port() const { return impl_->bound_port; }
int SessionService::ws_port() const { return impl_->mirror ? impl_->mirror->port() : -1; }

bool SessionService::ready() const {
    std::lock_guard lock(impl_->mu);
    return impl_->status == "ready";
}

} // namespace sharedctl
