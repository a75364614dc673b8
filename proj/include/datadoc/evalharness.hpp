#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace datadoc::evalharness {

struct GroundTruthRow {
  std::string doi;
  std::string title;
  std::string dimension;
  std::string subdimension;
  std::string label;
};

/// dimension -> valid subdimension names (lowercase).
const std::map<std::string, std::vector<std::string>>& taxonomy();

/// Accepts CSV (with header) or JSON (array of objects) by file extension.
/// Validates columns, duplicate (doi, dimension, subdimension) keys, and
/// the dimension/subdimension taxonomy.
std::vector<GroundTruthRow> load_ground_truth(const std::filesystem::path& path);

enum class Verdict { Correct, IncorrectFaithful, IncorrectUnfaithful };

Verdict verdict_from_string(const std::string& s);
std::string to_string(Verdict v);

struct EvalVerdict {
  std::string doi;
  std::string dimension;
  std::string subdimension;
  std::string model;
  std::string annotator;
  Verdict verdict = Verdict::Correct;
};

/// Keyed by (doi, dimension, subdimension, model, annotator); re-recording
/// the same key replaces the stored verdict and reports it.
class VerdictStore {
 public:
  /// Returns true when an existing verdict was replaced.
  bool record(const EvalVerdict& v);

  static VerdictStore load(const std::filesystem::path& path);  // JSON lines
  void append_to(const std::filesystem::path& path, const EvalVerdict& v);
  void save(const std::filesystem::path& path) const;

  std::vector<EvalVerdict> all() const;
  size_t size() const { return verdicts_.size(); }
  size_t replaced_count() const { return replaced_; }

 private:
  std::map<std::string, EvalVerdict> verdicts_;
  size_t replaced_ = 0;
};

struct CellStats {
  double accuracy = 0.0;  // percent
  double unfaith = 0.0;   // percent
  int total = 0;
};

struct EvalSummary {
  // model -> dimension -> subdimension -> stats
  std::map<std::string, std::map<std::string, std::map<std::string, CellStats>>> cells;
  std::map<std::string, std::map<std::string, double>> dimension_overall;
  std::map<std::string, double> model_overall;

  nlohmann::json to_json() const;
  std::string to_table() const;
};

/// Aggregation helpers: unweighted means at each level.
double dimension_overall_from(const std::vector<double>& subdimension_accuracies);
double model_overall_from(const std::vector<double>& dimension_overalls);

/// Consensus: an "adjudicated" annotator wins; otherwise strict majority;
/// otherwise the conflict is an error listing the keys.
inline constexpr const char* kAdjudicatedAnnotator = "adjudicated";

EvalSummary summarize(const std::vector<EvalVerdict>& verdicts);

struct AgreementCell {
  double percent = 0.0;   // mean pairwise agreement, [0, 1]
  std::optional<double> kappa;  // chance-corrected, when computable
  int pairs = 0;
};

struct AgreementReport {
  std::map<std::string, AgreementCell> cells;  // "<dimension>.<subdimension>"
  std::string note;  // set when no multi-annotator keys exist

  nlohmann::json to_json() const;
};

AgreementReport agreement(const std::vector<EvalVerdict>& verdicts);

}  // namespace datadoc::evalharness
