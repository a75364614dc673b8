#include "datadoc/evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "datadoc/util.hpp"

namespace datadoc::evalharness {

using nlohmann::json;

const std::map<std::string, std::vector<std::string>>& taxonomy() {
  static const std::map<std::string, std::vector<std::string>> tax = {
      {"uses", {"design intentions", "recommendations", "ml benchmarks"}},
      {"contributors", {"authors", "funding", "maintenance"}},
      {"distribution", {"accessibility", "licenses", "deprecation policies"}},
      {"composition", {"data records", "data splits", "statistics"}},
      {"gathering", {"description & type", "team", "source & infrastructure", "localization"}},
      {"annotation", {"description & type", "team", "infrastructure", "validation"}},
      {"social_concerns", {"bias", "sensitivity data", "privacy"}},
  };
  return tax;
}

namespace {

std::string canonical_dimension(std::string_view raw) {
  std::string d = util::to_lower(util::trim(raw));
  std::replace(d.begin(), d.end(), ' ', '_');
  return d;
}

std::string valid_dimensions_list() {
  std::string out;
  for (const auto& [dim, subs] : taxonomy()) {
    if (!out.empty()) out += ", ";
    out += dim;
  }
  return out;
}

void validate_row(const GroundTruthRow& row) {
  auto it = taxonomy().find(row.dimension);
  if (it == taxonomy().end()) {
    throw std::runtime_error("unknown dimension '" + row.dimension +
                             "'; valid dimensions: " + valid_dimensions_list());
  }
  const auto& subs = it->second;
  if (std::find(subs.begin(), subs.end(), row.subdimension) == subs.end()) {
    std::string valid;
    for (const auto& s : subs) {
      if (!valid.empty()) valid += ", ";
      valid += s;
    }
    throw std::runtime_error("unknown subdimension '" + row.subdimension +
                             "' for dimension '" + row.dimension + "'; valid: " + valid);
  }
}

// RFC-4180-ish: quoted fields, doubled quotes, CRLF line ends.
std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool row_started = false;
  for (size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"': in_quotes = true; row_started = true; break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        row_started = true;
        break;
      case '\r': break;
      case '\n':
        if (row_started || !field.empty()) {
          row.push_back(std::move(field));
          field.clear();
          rows.push_back(std::move(row));
          row.clear();
          row_started = false;
        }
        break;
      default: field.push_back(c); row_started = true; break;
    }
  }
  if (row_started || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<GroundTruthRow> rows_from_csv(const std::string& text) {
  const auto raw = parse_csv(text);
  if (raw.empty()) throw std::runtime_error("ground truth file is empty");
  const std::vector<std::string> required = {"doi", "title", "dimension", "subdimension",
                                             "label"};
  std::map<std::string, size_t> columns;
  for (size_t i = 0; i < raw[0].size(); ++i) {
    columns[util::to_lower(util::trim(raw[0][i]))] = i;
  }
  for (const auto& col : required) {
    if (!columns.contains(col)) {
      throw std::runtime_error("ground truth file is missing column '" + col + "'");
    }
  }
  std::vector<GroundTruthRow> rows;
  for (size_t r = 1; r < raw.size(); ++r) {
    const auto& cells = raw[r];
    auto cell = [&](const std::string& col) -> std::string {
      const size_t idx = columns.at(col);
      if (idx >= cells.size()) {
        throw std::runtime_error("row " + std::to_string(r) + " is missing column '" +
                                 col + "'");
      }
      return cells[idx];
    };
    GroundTruthRow row;
    row.doi = util::trim(cell("doi"));
    row.title = cell("title");
    row.dimension = canonical_dimension(cell("dimension"));
    row.subdimension = util::to_lower(util::trim(cell("subdimension")));
    row.label = cell("label");
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<GroundTruthRow> rows_from_json(const std::string& text) {
  json j = json::parse(text);
  if (!j.is_array()) throw std::runtime_error("ground truth JSON must be an array");
  const std::vector<std::string> required = {"doi", "title", "dimension", "subdimension",
                                             "label"};
  std::vector<GroundTruthRow> rows;
  for (const auto& item : j) {
    for (const auto& col : required) {
      if (!item.contains(col)) {
        throw std::runtime_error("ground truth file is missing column '" + col + "'");
      }
    }
    GroundTruthRow row;
    row.doi = util::trim(item.at("doi").get<std::string>());
    row.title = item.at("title").get<std::string>();
    row.dimension = canonical_dimension(item.at("dimension").get<std::string>());
    row.subdimension = util::to_lower(util::trim(item.at("subdimension").get<std::string>()));
    row.label = item.at("label").get<std::string>();
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::vector<GroundTruthRow> load_ground_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open ground truth file: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();

  std::vector<GroundTruthRow> rows = path.extension() == ".json"
                                         ? rows_from_json(text)
                                         : rows_from_csv(text);
  std::set<std::string> keys;
  for (const auto& row : rows) {
    validate_row(row);
    const std::string key = row.doi + "|" + row.dimension + "|" + row.subdimension;
    if (!keys.insert(key).second) {
      throw std::runtime_error("duplicate ground truth key (" + row.doi + ", " +
                               row.dimension + ", " + row.subdimension + ")");
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// verdicts

Verdict verdict_from_string(const std::string& s) {
  const std::string v = util::to_lower(util::trim(s));
  if (v == "correct") return Verdict::Correct;
  if (v == "incorrect_faithful") return Verdict::IncorrectFaithful;
  if (v == "incorrect_unfaithful") return Verdict::IncorrectUnfaithful;
  throw std::runtime_error("invalid verdict '" + s +
                           "'; expected correct | incorrect_faithful | incorrect_unfaithful");
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Correct: return "correct";
    case Verdict::IncorrectFaithful: return "incorrect_faithful";
    case Verdict::IncorrectUnfaithful: return "incorrect_unfaithful";
  }
  return "unknown";
}

namespace {
std::string verdict_key(const EvalVerdict& v) {
  return v.doi + "|" + v.dimension + "|" + v.subdimension + "|" + v.model + "|" +
         v.annotator;
}

json verdict_to_json(const EvalVerdict& v) {
  return {{"doi", v.doi},           {"dimension", v.dimension},
          {"subdimension", v.subdimension}, {"model", v.model},
          {"annotator", v.annotator},       {"verdict", to_string(v.verdict)}};
}

EvalVerdict verdict_from_json(const json& j) {
  EvalVerdict v;
  v.doi = j.at("doi").get<std::string>();
  v.dimension = canonical_dimension(j.at("dimension").get<std::string>());
  v.subdimension = util::to_lower(util::trim(j.at("subdimension").get<std::string>()));
  v.model = j.at("model").get<std::string>();
  v.annotator = j.at("annotator").get<std::string>();
  v.verdict = verdict_from_string(j.at("verdict").get<std::string>());
  return v;
}
}  // namespace

bool VerdictStore::record(const EvalVerdict& v) {
  const std::string key = verdict_key(v);
  const bool replaced = verdicts_.contains(key);
  if (replaced) {
    ++replaced_;
    fprintf(stderr, "warning: replacing verdict for key %s\n", key.c_str());
  }
  verdicts_[key] = v;
  return replaced;
}

VerdictStore VerdictStore::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open verdict store: " + path.string());
  VerdictStore store;
  std::string line;
  while (std::getline(in, line)) {
    if (util::trim(line).empty()) continue;
    store.record(verdict_from_json(json::parse(line)));
  }
  return store;
}

void VerdictStore::append_to(const std::filesystem::path& path, const EvalVerdict& v) {
  record(v);
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot append to verdict store: " + path.string());
  out << verdict_to_json(v).dump() << "\n";
}

void VerdictStore::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write verdict store: " + path.string());
  for (const auto& [key, v] : verdicts_) out << verdict_to_json(v).dump() << "\n";
}

std::vector<EvalVerdict> VerdictStore::all() const {
  std::vector<EvalVerdict> out;
  out.reserve(verdicts_.size());
  for (const auto& [key, v] : verdicts_) out.push_back(v);
  return out;
}

// ---------------------------------------------------------------------------
// aggregation

double dimension_overall_from(const std::vector<double>& subdimension_accuracies) {
  if (subdimension_accuracies.empty()) return 0.0;
  return std::accumulate(subdimension_accuracies.begin(), subdimension_accuracies.end(),
                         0.0) /
         static_cast<double>(subdimension_accuracies.size());
}

double model_overall_from(const std::vector<double>& dimension_overalls) {
  return dimension_overall_from(dimension_overalls);
}

EvalSummary summarize(const std::vector<EvalVerdict>& verdicts) {
  if (verdicts.empty()) throw std::invalid_argument("no verdicts to summarize");

  // Resolve one verdict per item (model, doi, dimension, subdimension).
  std::map<std::string, std::vector<EvalVerdict>> items;
  for (const auto& v : verdicts) {
    items[v.model + "|" + v.dimension + "|" + v.subdimension + "|" + v.doi].push_back(v);
  }
  std::vector<std::string> conflicts;
  // model -> dimension -> subdimension -> resolved verdicts
  std::map<std::string, std::map<std::string, std::map<std::string, std::vector<Verdict>>>>
      resolved;
  for (const auto& [key, group] : items) {
    std::optional<Verdict> final_verdict;
    for (const auto& v : group) {
      if (v.annotator == kAdjudicatedAnnotator) final_verdict = v.verdict;
    }
    if (!final_verdict) {
      std::map<Verdict, int> votes;
      for (const auto& v : group) ++votes[v.verdict];
      int best = 0;
      bool tie = false;
      for (const auto& [verdict, count] : votes) {
        if (count > best) {
          best = count;
          final_verdict = verdict;
          tie = false;
        } else if (count == best) {
          tie = true;
        }
      }
      if (tie && votes.size() > 1) {
        conflicts.push_back(key);
        continue;
      }
    }
    const auto& sample = group.front();
    resolved[sample.model][sample.dimension][sample.subdimension].push_back(*final_verdict);
  }
  if (!conflicts.empty()) {
    std::string msg = "unresolved annotator conflicts for keys:";
    for (const auto& key : conflicts) msg += " " + key;
    throw std::runtime_error(msg);
  }

  EvalSummary summary;
  for (const auto& [model, dims_map] : resolved) {
    std::vector<double> dim_overalls;
    for (const auto& [dimension, subs] : dims_map) {
      std::vector<double> sub_accuracies;
      for (const auto& [subdimension, verdict_list] : subs) {
        CellStats stats;
        stats.total = static_cast<int>(verdict_list.size());
        int correct = 0;
        int unfaithful = 0;
        for (const Verdict v : verdict_list) {
          if (v == Verdict::Correct) ++correct;
          if (v == Verdict::IncorrectUnfaithful) ++unfaithful;
        }
        stats.accuracy = 100.0 * correct / stats.total;
        stats.unfaith = 100.0 * unfaithful / stats.total;
        summary.cells[model][dimension][subdimension] = stats;
        sub_accuracies.push_back(stats.accuracy);
      }
      const double overall = dimension_overall_from(sub_accuracies);
      summary.dimension_overall[model][dimension] = overall;
      dim_overalls.push_back(overall);
    }
    summary.model_overall[model] = model_overall_from(dim_overalls);
  }
  return summary;
}

json EvalSummary::to_json() const {
  json cells_json = json::object();
  for (const auto& [model, dims_map] : cells) {
    for (const auto& [dimension, subs] : dims_map) {
      for (const auto& [subdimension, stats] : subs) {
        cells_json[model][dimension][subdimension] = {{"accuracy", stats.accuracy},
                                                      {"unfaith", stats.unfaith},
                                                      {"total", stats.total}};
      }
    }
  }
  return {{"cells", cells_json},
          {"dimension_overall", dimension_overall},
          {"model_overall", model_overall}};
}

std::string EvalSummary::to_table() const {
  std::ostringstream out;
  for (const auto& [model, dims_map] : cells) {
    out << "Model: " << model << "\n";
    out << "  " << std::string(70, '-') << "\n";
    char line[160];
    std::snprintf(line, sizeof(line), "  %-16s %-24s %9s %9s %9s\n", "Dimension",
                  "Subdimension", "Accuracy", "Unfaith", "Overall");
    out << line;
    for (const auto& [dimension, subs] : dims_map) {
      bool first = true;
      for (const auto& [subdimension, stats] : subs) {
        std::snprintf(line, sizeof(line), "  %-16s %-24s %8.2f%% %8.2f%%",
                      first ? dimension.c_str() : "", subdimension.c_str(),
                      stats.accuracy, stats.unfaith);
        out << line;
        if (first) {
          std::snprintf(line, sizeof(line), " %8.2f%%",
                        dimension_overall.at(model).at(dimension));
          out << line;
        }
        out << "\n";
        first = false;
      }
    }
    std::snprintf(line, sizeof(line), "  Overall: %.2f%%\n", model_overall.at(model));
    out << line;
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// agreement

AgreementReport agreement(const std::vector<EvalVerdict>& verdicts) {
  // item (doi, model) verdicts per annotator, grouped by (dimension, subdimension)
  std::map<std::string, std::map<std::string, std::map<std::string, Verdict>>> grouped;
  for (const auto& v : verdicts) {
    if (v.annotator == kAdjudicatedAnnotator) continue;
    grouped[v.dimension + "." + v.subdimension][v.doi + "|" + v.model][v.annotator] =
        v.verdict;
  }
  AgreementReport report;
  bool any_pairs = false;
  for (const auto& [cell_key, items] : grouped) {
    int agreements = 0;
    int pairs = 0;
    std::map<Verdict, int> marginal;
    int marginal_total = 0;
    for (const auto& [item_key, by_annotator] : items) {
      if (by_annotator.size() < 2) continue;
      std::vector<Verdict> vs;
      for (const auto& [annotator, verdict] : by_annotator) {
        vs.push_back(verdict);
        ++marginal[verdict];
        ++marginal_total;
      }
      for (size_t i = 0; i < vs.size(); ++i) {
        for (size_t j = i + 1; j < vs.size(); ++j) {
          ++pairs;
          if (vs[i] == vs[j]) ++agreements;
        }
      }
    }
    if (pairs == 0) continue;
    any_pairs = true;
    AgreementCell cell;
    cell.pairs = pairs;
    cell.percent = static_cast<double>(agreements) / pairs;
    double expected = 0.0;
    for (const auto& [verdict, count] : marginal) {
      const double p = static_cast<double>(count) / marginal_total;
      expected += p * p;
    }
    if (expected < 1.0) {
      cell.kappa = (cell.percent - expected) / (1.0 - expected);
    }
    report.cells[cell_key] = cell;
  }
  if (!any_pairs) {
    report.note = "no key has verdicts from two or more annotators";
  }
  return report;
}

json AgreementReport::to_json() const {
  json cells_json = json::object();
  for (const auto& [key, cell] : cells) {
    json cj = {{"percent_agreement", cell.percent}, {"pairs", cell.pairs}};
    if (cell.kappa) cj["kappa"] = *cell.kappa;
    cells_json[key] = std::move(cj);
  }
  json j = {{"cells", std::move(cells_json)}};
  if (!note.empty()) j["note"] = note;
  return j;
}

}  // namespace datadoc::evalharness
