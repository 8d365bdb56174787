#pragma once

#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "mqud/backend/cache.hpp"
#include "mqud/backend/request.hpp"
#include "mqud/backend/throttle.hpp"

namespace mqud::backend {

/// Resolves an asset hash to image bytes (nullopt when unknown).
using ImageResolver = std::function<std::optional<std::string>(const std::string& hash)>;

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  /// Returns the model's raw text reply. Throws BackendUnavailable.
  virtual std::string complete(const BackendRequest& request) = 0;
  virtual std::string model_tag() const = 0;
};

/// Replies from a FIFO of canned texts; records what it was asked.
class ScriptedBackend : public ChatBackend {
 public:
  explicit ScriptedBackend(std::vector<std::string> replies = {});
  void push(std::string reply);
  std::string complete(const BackendRequest& request) override;
  std::string model_tag() const override { return "scripted"; }
  std::vector<BackendRequest> requests() const;

 private:
  std::deque<std::string> replies_;
  std::vector<BackendRequest> requests_;
  mutable std::mutex mu_;
};

/// Offline synthetic responder. Replies are pure functions of the request
/// slots: questions are assembled from caption terms, answers from anchor
/// sentences, grounding from token coverage, judge labels from hashes.
class MockBackend : public ChatBackend {
 public:
  std::string complete(const BackendRequest& request) override;
  std::string model_tag() const override { return "mock"; }
};

/// Serves replies from a recorded cache; a miss is BackendUnavailable.
/// Never touches the network.
class ReplayBackend : public ChatBackend {
 public:
  explicit ReplayBackend(const ResponseCache& cache) : cache_(cache) {}
  std::string complete(const BackendRequest& request) override;
  std::string model_tag() const override { return "replay"; }

 private:
  const ResponseCache& cache_;
};

/// Forwards to `inner` and records every reply into the cache.
class RecordingBackend : public ChatBackend {
 public:
  RecordingBackend(ChatBackend& inner, ResponseCache& cache) : inner_(inner), cache_(cache) {}
  std::string complete(const BackendRequest& request) override;
  std::string model_tag() const override { return inner_.model_tag(); }

 private:
  ChatBackend& inner_;
  ResponseCache& cache_;
};

/// Holds a throttle slot for the duration of each call.
class ThrottledBackend : public ChatBackend {
 public:
  ThrottledBackend(ChatBackend& inner, Throttle& throttle) : inner_(inner), throttle_(throttle) {}
  std::string complete(const BackendRequest& request) override;
  std::string model_tag() const override { return inner_.model_tag(); }

 private:
  ChatBackend& inner_;
  Throttle& throttle_;
};

struct LiveConfig {
  std::string base_url = "http://127.0.0.1:8000";
  std::string api_key_env = "MQUD_API_KEY";
  std::string model = "live";
  int timeout_seconds = 120;
};

/// POST /chat {template_id, rendered_prompt, images: [base64], decoding} → {text}.
class LiveBackend : public ChatBackend {
 public:
  LiveBackend(LiveConfig config, ImageResolver images);
  std::string complete(const BackendRequest& request) override;
  std::string model_tag() const override { return config_.model; }

 private:
  LiveConfig config_;
  ImageResolver images_;
};

/// POSTs `body` to base_url + path with the bearer token from the env var.
/// Throws BackendUnavailable on transport errors and non-2xx statuses.
nlohmann::json post_json(const LiveConfig& config, const std::string& path, const nlohmann::json& body);

}  // namespace mqud::backend
