#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "sisurr/error.hpp"
#include "sisurr/eye.hpp"
#include "sisurr/model.hpp"

namespace httplib {
class Server;
}

namespace sisurr {

struct ServiceOptions {
    std::size_t explore_cap = 10000;
};

struct HttpResponse {
    int status = 200;
    json body;
};

/// Immutable registry of models and masks answering the /v1 endpoints. Every
/// handler is const, so one instance can serve concurrent requests.
class ExplorerService {
public:
    ExplorerService() = default;
    ExplorerService(std::map<std::string, Surrogate> models, std::vector<EyeMask> user_masks = {},
                    ServiceOptions opts = {});

    /// Loads <dir>/*.json as models and <dir>/masks/*.json as extra masks.
    static ExplorerService from_directory(const std::string& dir, ServiceOptions opts = {});

    HttpResponse handle(const std::string& method, const std::string& path, const std::string& body) const;

    json health() const;
    json models() const;
    json spaces() const;
    json masks() const;
    json predict(const json& request) const;
    json explore(const json& request) const;

    const std::map<std::string, Surrogate>& registry() const { return models_; }
    const EyeMask& mask(const json& ref) const;

private:
    const Surrogate& model(const json& request) const;
    json point_outputs(const Surrogate& m, const std::map<std::string, double>& values, const double* out,
                       const EyeMask* mask) const;

    std::map<std::string, Surrogate> models_;
    std::vector<EyeMask> masks_;
    ServiceOptions opts_;
};

/// Maps library error codes to HTTP status codes.
int http_status(ErrorCode code);

/// HTTP front end; requests are answered by ExplorerService::handle.
class HttpServer {
public:
    explicit HttpServer(const ExplorerService& service);
    ~HttpServer();

    /// Binds host:port (port 0 picks a free one) and returns the port.
    int bind(const std::string& host, int port);
    /// Serves until stop() is called.
    void listen();
    void stop();

private:
    std::unique_ptr<httplib::Server> server_;
};

/// Blocking HTTP server on host:port.
void run_server(const ExplorerService& service, const std::string& host, int port);

}  // namespace sisurr
