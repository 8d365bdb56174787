#include "mqud/paperstore/assets.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "mqud/paperstore/eligibility.hpp"
#include "mqud/paperstore/latex.hpp"
#include "mqud/util/error.hpp"
#include "mqud/util/hash.hpp"
#include "mqud/util/jsonl.hpp"

namespace mqud::paperstore {

namespace fs = std::filesystem;

void AssetManifest::add(const std::string& paper_id, const std::string& image_path, const std::string& hash) {
  entries_[paper_id + "/" + image_path] = hash;
}

std::optional<std::string> AssetManifest::hash_for(const std::string& paper_id, const std::string& image_path) const {
  auto it = entries_.find(paper_id + "/" + image_path);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::string AssetManifest::serialize() const {
  std::string out;
  for (const auto& [key, hash] : entries_) out += key + "\t" + hash + "\n";
  return out;
}

AssetManifest AssetManifest::parse(const std::string& content) {
  AssetManifest m;
  std::istringstream in(content);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) throw Error(ErrorKind::InvariantViolation, "malformed manifest line: " + line);
    m.entries_[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return m;
}

void AssetManifest::save(const fs::path& path) const { util::write_text_file(path, serialize()); }

AssetManifest AssetManifest::load(const fs::path& path) {
  if (!fs::exists(path)) return {};
  return parse(util::read_text_file(path));
}

std::string AssetStore::put(const std::string& bytes, const std::string& extension) {
  const std::string hex = util::sha256_hex(bytes);
  fs::create_directories(dir_);
  const fs::path target = dir_ / (hex + extension);
  if (!fs::exists(target)) util::write_text_file(target, bytes);
  return "sha256:" + hex;
}

std::optional<std::string> AssetStore::read(const std::string& hash) const {
  const std::string hex = hash.rfind("sha256:", 0) == 0 ? hash.substr(7) : hash;
  std::error_code ec;
  if (!fs::is_directory(dir_, ec)) return std::nullopt;
  for (const auto& entry : fs::directory_iterator(dir_, ec)) {
    if (entry.path().stem().string() == hex) return util::read_text_file(entry.path());
  }
  return std::nullopt;
}

IngestResult ingest_corpus(const fs::path& root, const std::vector<std::string>& section_lexicon, AssetStore* store,
                           bool parallel) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw Error(ErrorKind::UnreadableSource, root.string() + " is not a directory");
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root, ec))
    if (entry.is_directory()) dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());

  const auto n = static_cast<long>(dirs.size());
  std::vector<std::optional<PaperRecord>> parsed(dirs.size());
  std::vector<std::string> errors(dirs.size());

  // Parsing is pure per paper.
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (long i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    try {
      parsed[idx] = mark_eligibility(parse_paper(dirs[idx]), section_lexicon);
    } catch (const std::exception& e) {
      errors[idx] = e.what();
    }
  }

  IngestResult result;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    if (!parsed[i]) {
      spdlog::error("ingest {}: {}", dirs[i].string(), errors[i]);
      result.failures.push_back({dirs[i].string(), errors[i]});
      continue;
    }
    PaperRecord& p = *parsed[i];
    if (!seen.insert(p.paper_id).second) {
      result.failures.push_back({dirs[i].string(), "duplicate paper_id '" + p.paper_id + "'"});
      continue;
    }
    if (p.no_results_section()) {
      spdlog::warn("[{}] NoResultsSection: no section title matches the results lexicon", p.paper_id);
      p.warnings.push_back("NoResultsSection");
    }
    if (store) {
      for (const auto& f : p.figures) {
        if (f.image_path.empty()) continue;
        const fs::path file = dirs[i] / f.image_path;
        if (!fs::is_regular_file(file, ec)) continue;
        result.manifest.add(p.paper_id, f.image_path, store->put(util::read_text_file(file), file.extension().string()));
      }
    }
    result.papers.push_back(std::move(p));
  }
  std::sort(result.papers.begin(), result.papers.end(),
            [](const PaperRecord& a, const PaperRecord& b) { return a.paper_id < b.paper_id; });
  return result;
}

}  // namespace mqud::paperstore
