#pragma once

#include <string>

#include "tutor/renderer.h"
#include "tutor/service.h"

namespace httplib {
class Server;
}

namespace tutor {

// OpenAI-compatible chat-completion client over HTTP(S). The endpoint is the
// full URL of the completions route, e.g. https://host/v1/chat/completions.
class HttpChatClient : public ChatClient {
 public:
  explicit HttpChatClient(std::string endpoint_url);
  std::string complete(const ChatRequest& request, const std::string& api_key) override;

 private:
  std::string base_;  // scheme://host[:port]
  std::string path_;
};

// Registers the /api/v1 routes on `server`. The service must outlive it.
void mount_api(httplib::Server& server, TutorService& service);

// Maps exceptions to {status, {code, message, field?}}.
struct ApiError {
  int status = 500;
  nlohmann::json body;
};
ApiError api_error_from_current_exception();

}  // namespace tutor
