#pragma once
// Builders and scratch directories shared by the unit and acceptance tests.

#include <atomic>
#include <filesystem>
#include <unistd.h>
#include <string>

#include "mqud/corpus/types.hpp"
#include "mqud/util/text.hpp"

namespace mqud::testing {

namespace fs = std::filesystem;

inline fs::path fixture(const std::string& rel) { return fs::path(MQUD_FIXTURE_DIR) / rel; }

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("mqud_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  std::string str() const { return path_.string(); }

 private:
  fs::path path_;
};

// n distinct words.
inline std::string words(std::size_t n, const std::string& stem = "w") {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) out += (i ? " " : "") + stem + std::to_string(i);
  return out;
}

inline corpus::QudRecord make_qud(const std::string& paper, const std::string& figure, corpus::QudType type,
                                  const std::string& question, const std::string& answer = "") {
  corpus::QudRecord r;
  r.context = {paper, figure, "Title of " + paper, "Abstract of " + paper, "Caption of " + figure,
               std::string("sha256:") + std::string(64, 'a')};
  r.question = question;
  r.abstractive_answer = answer.empty() ? words(30, "a") : answer;
  r.anchor_text = r.abstractive_answer;
  r.anchor_sources = {{1, 0, r.anchor_text.size()}};
  r.extractive_evidence = {{1, 0, 0, r.anchor_text.size(), r.anchor_text}};
  r.qud_type = type;
  r.qud_id = corpus::make_qud_id(paper, figure, question);
  return r;
}

inline corpus::AnnotationRecord make_ann(const std::string& qud_id, const std::string& annotator,
                                         corpus::AnswerCorrect correct = corpus::AnswerCorrect::acceptable) {
  corpus::AnnotationRecord a;
  a.qud_id = qud_id;
  a.annotator_id = annotator;
  a.answer_correct = correct;
  return a;
}

}  // namespace mqud::testing
