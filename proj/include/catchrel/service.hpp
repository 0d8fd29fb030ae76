#pragma once

// HTTP front end over the workspace pipeline (link target `catchrel::net`).
// Endpoint reference: docs/api.md.

#include <memory>
#include <string>

#include "catchrel/jobs.hpp"
#include "catchrel/media.hpp"
#include "catchrel/workspace.hpp"

namespace catchrel {

/// Languages offered by the transcription form: BCP-47 tag and display name.
inline const std::vector<std::pair<std::string, std::string>>& supported_languages() {
  static const std::vector<std::pair<std::string, std::string>> kLanguages{
      {"id", "Bahasa Indonesia"}, {"ban", "Basa Bali"}, {"jv", "Basa Jawa"}, {"en", "English"}};
  return kLanguages;
}

/// HTTP status for a library error code.
int http_status(ErrorCode code);

class Service {
 public:
  Service(Workspace& ws, MediaBackend& backend);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds to an ephemeral port and returns it; pair with `serve()`.
  int bind_ephemeral(const std::string& host = "127.0.0.1");
  bool bind(const std::string& host, int port);
  /// Blocks until `stop()`.
  void serve();
  void stop();
  /// Blocks until the server accepts connections.
  void wait_until_ready() const;

  JobQueue& jobs();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace catchrel
