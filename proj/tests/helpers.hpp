#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "cmrx/record.hpp"
#include "cmrx/rng.hpp"

namespace testutil {

// Arbitrary record: mixed nulls, integers, long fractions, huge and tiny values.
inline cmrx::CmrRecord random_record(cmrx::Rng& rng) {
  cmrx::CmrRecord r;
  for (auto& v : r.values) {
    switch (rng.below(5)) {
      case 0: v = cmrx::FieldValue::null(); break;
      case 1: v = cmrx::FieldValue::present(static_cast<double>(rng.below(500))); break;
      case 2: v = cmrx::FieldValue::present(rng.uniform(0, 300)); break;
      case 3: v = cmrx::FieldValue::present(rng.uniform(0, 1) * 1e-7); break;
      default: v = cmrx::FieldValue::present(rng.uniform(0, 1) * 1e12); break;
    }
  }
  const auto pick = rng.below(6);
  r.category = pick == 5 ? cmrx::DiagnosisCategory::Unspecified : cmrx::kNamedCategories[pick];
  return r;
}

class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 gen{std::random_device{}()};
    path_ = std::filesystem::temp_directory_path() / ("cmrx-test-" + std::to_string(gen()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testutil
