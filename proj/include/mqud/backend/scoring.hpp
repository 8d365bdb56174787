#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mqud/backend/cache.hpp"
#include "mqud/backend/chat.hpp"

namespace mqud::backend {

/// One scoring call: the reference question conditioned on text and an
/// optional image.
struct ScoreRequest {
  std::string title;
  std::string abstract;
  std::string caption;
  std::optional<std::string> image_ref;
  std::string question;

  bool operator==(const ScoreRequest&) const = default;
};

struct ScoreResponse {
  std::vector<double> token_nlls;
  double mean_nll = 0.0;
};

nlohmann::json canonical(const ScoreRequest& request);
std::string score_key(const ScoreRequest& request);
nlohmann::json to_json(const ScoreResponse& response);
ScoreResponse score_from_json(const nlohmann::json& j);

class ScoringBackend {
 public:
  virtual ~ScoringBackend() = default;
  virtual ScoreResponse score(const ScoreRequest& request) = 0;
  virtual std::string model_tag() const = 0;
};

/// Deterministic synthetic scorer. Per-token NLLs are hashed from the
/// question; an image lowers them, more when the image belongs to the
/// caption (per `owners`: image hash → caption) than when it does not.
class MockScoringBackend : public ScoringBackend {
 public:
  explicit MockScoringBackend(std::string model_tag = "mock", std::map<std::string, std::string> owners = {});
  ScoreResponse score(const ScoreRequest& request) override;
  std::string model_tag() const override { return model_tag_; }

 private:
  std::string model_tag_;
  std::map<std::string, std::string> owners_;
};

class ReplayScoringBackend : public ScoringBackend {
 public:
  ReplayScoringBackend(const ResponseCache& cache, std::string model_tag)
      : cache_(cache), model_tag_(std::move(model_tag)) {}
  ScoreResponse score(const ScoreRequest& request) override;
  std::string model_tag() const override { return model_tag_; }

 private:
  const ResponseCache& cache_;
  std::string model_tag_;
};

class RecordingScoringBackend : public ScoringBackend {
 public:
  RecordingScoringBackend(ScoringBackend& inner, ResponseCache& cache) : inner_(inner), cache_(cache) {}
  ScoreResponse score(const ScoreRequest& request) override;
  std::string model_tag() const override { return inner_.model_tag(); }

 private:
  ScoringBackend& inner_;
  ResponseCache& cache_;
};

/// POST /score {title, abstract, caption, image: base64|null, question}
/// → {token_nlls, mean_nll}.
class LiveScoringBackend : public ScoringBackend {
 public:
  LiveScoringBackend(LiveConfig config, ImageResolver images);
  ScoreResponse score(const ScoreRequest& request) override;
  std::string model_tag() const override { return config_.model; }

 private:
  LiveConfig config_;
  ImageResolver images_;
};

}  // namespace mqud::backend
