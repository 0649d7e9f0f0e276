#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "tportal/error.hpp"
#include "tportal/pipeline.hpp"

namespace httplib {
class Server;
}

namespace tportal::gateway {

struct Request {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct Response {
  int status = 200;
  std::string body;
  std::string version;
};

/// HTTP status for a library error: 400 for bad input, 404 for unknown
/// entities, 422 when filters leave nothing, 500 otherwise.
int status_for(ErrorCode code);

/// JSON request routing over an immutable PipelineState. The state pointer
/// is swapped atomically on reload; a request works on the snapshot it
/// started with.
class Service {
 public:
  using Loader = std::function<std::shared_ptr<const pipeline::PipelineState>()>;

  explicit Service(std::shared_ptr<const pipeline::PipelineState> state, Loader loader = {});

  Response handle(const Request& req);

  std::shared_ptr<const pipeline::PipelineState> state() const;
  void replace(std::shared_ptr<const pipeline::PipelineState> next);

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const pipeline::PipelineState> state_;
  Loader loader_;
};

/// Binds `service` to an httplib server.
class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Blocks until stop().
  bool listen(const std::string& host, int port);
  /// Binds to a free port and returns it (-1 on failure); call serve() afterwards.
  int bind_any_port(const std::string& host);
  bool serve();
  void stop();
  void wait_until_ready() const;

 private:
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace tportal::gateway
