#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "datadoc/config.hpp"
#include "datadoc/evalharness.hpp"
#include "datadoc/pipeline.hpp"
#include "datadoc/service.hpp"

namespace eh = datadoc::evalharness;

int main(int argc, char** argv) {
  CLI::App app{"Dataset documentation extraction over scientific data papers"};
  app.require_subcommand(1);

  // analyze
  std::string input, tables, dimension = "all", config_path, out = "analysis.json";
  CLI::App* analyze = app.add_subcommand("analyze", "Extract documentation dimensions");
  analyze->add_option("--input", input, "Input text file")->required();
  analyze->add_option("--tables", tables, "Parsed tables JSON file");
  analyze->add_option("--dimension", dimension, "Dimension name or 'all'");
  analyze->add_option("--config", config_path, "Configuration JSON file")->required();
  analyze->add_option("--out", out, "Output JSON file");

  // serve
  std::string host = "0.0.0.0";
  int port = 8080;
  CLI::App* serve = app.add_subcommand("serve", "Run the HTTP service");
  serve->add_option("--config", config_path, "Configuration JSON file")->required();
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port");

  // eval
  CLI::App* eval = app.add_subcommand("eval", "Evaluation harness");
  eval->require_subcommand(1);
  std::string gt_path, verdicts_path, format = "json";
  CLI::App* check_gt = eval->add_subcommand("check-gt", "Validate a ground-truth file");
  check_gt->add_option("file", gt_path, "Ground-truth CSV or JSON")->required();
  CLI::App* summarize = eval->add_subcommand("summarize", "Aggregate stored verdicts");
  summarize->add_option("--verdicts", verdicts_path, "Verdict JSONL file")->required();
  summarize->add_option("--format", format, "json or table");
  CLI::App* agreement = eval->add_subcommand("agreement", "Inter-annotator agreement");
  agreement->add_option("--verdicts", verdicts_path, "Verdict JSONL file")->required();
  eh::EvalVerdict verdict;
  std::string verdict_value;
  CLI::App* record = eval->add_subcommand("record", "Append one verdict");
  record->add_option("--verdicts", verdicts_path, "Verdict JSONL file")->required();
  record->add_option("--doi", verdict.doi)->required();
  record->add_option("--dimension", verdict.dimension)->required();
  record->add_option("--subdimension", verdict.subdimension)->required();
  record->add_option("--model", verdict.model)->required();
  record->add_option("--annotator", verdict.annotator)->required();
  record->add_option("--verdict", verdict_value)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (analyze->parsed()) {
      const auto cfg = datadoc::config::AppConfig::from_file(config_path);
      return datadoc::pipeline::run_analyze(cfg, input, tables, dimension, out);
    }
    if (serve->parsed()) {
      const auto cfg = datadoc::config::AppConfig::from_file(config_path);
      auto rt = datadoc::config::build_runtime(cfg);
      datadoc::service::Service svc(rt);
      printf("listening on %s:%d\n", host.c_str(), port);
      return svc.listen(host, port) ? 0 : 1;
    }
    if (check_gt->parsed()) {
      const auto rows = eh::load_ground_truth(gt_path);
      printf("ok: %zu rows\n", rows.size());
      return 0;
    }
    if (summarize->parsed()) {
      const auto store = eh::VerdictStore::load(verdicts_path);
      const auto summary = eh::summarize(store.all());
      if (format == "table") {
        printf("%s", summary.to_table().c_str());
      } else {
        printf("%s\n", summary.to_json().dump(2).c_str());
      }
      return 0;
    }
    if (agreement->parsed()) {
      const auto store = eh::VerdictStore::load(verdicts_path);
      printf("%s\n", eh::agreement(store.all()).to_json().dump(2).c_str());
      return 0;
    }
    if (record->parsed()) {
      verdict.verdict = eh::verdict_from_string(verdict_value);
      eh::VerdictStore store;
      if (std::filesystem::exists(verdicts_path)) {
        store = eh::VerdictStore::load(verdicts_path);
      }
      store.append_to(verdicts_path, verdict);
      return 0;
    }
  } catch (const std::exception& e) {
    fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
