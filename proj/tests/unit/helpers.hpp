#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>

#include "delib/corpus.hpp"

namespace testing_support {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("delib-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline delib::Sentence make_sentence(const std::string& batch, const std::string& text, int label) {
  return delib::Sentence{delib::sentence_id(batch, text), batch, text, label};
}

// Four batches, `per_batch` sentences each, every third sentence AD.
inline delib::Corpus small_corpus(int per_batch = 6) {
  std::vector<delib::Sentence> out;
  for (const char* b : {"K1", "K2", "K3", "R4"}) {
    for (int i = 0; i < per_batch; ++i) {
      out.push_back(make_sentence(b, std::string("Sentence ") + b + " number " + std::to_string(i) + ".",
                                  i % 3 == 0 ? 1 : 0));
    }
  }
  return delib::Corpus(out);
}

}  // namespace testing_support
