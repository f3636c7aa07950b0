#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "optiprobe/cli.hpp"
#include "optiprobe/error.hpp"

namespace fs = std::filesystem;
using namespace optiprobe;

namespace {

struct Common {
  std::string manifest;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<std::string> out;

  void add_to(CLI::App* app, bool manifest_required) {
    auto* opt = app->add_option("--manifest", manifest, "experiment manifest (JSON)");
    if (manifest_required) opt->required();
    app->add_option("--seed", seed, "override the manifest seed");
    app->add_option("--jobs", jobs, "relations processed in parallel");
    app->add_option("--out", out, "output path");
  }

  ExperimentManifest load() const {
    auto m = load_manifest(manifest);
    Overrides o;
    o.seed = seed;
    o.jobs = jobs;
    if (out) o.out = fs::path(*out);
    apply(m, o);
    return m;
  }
};

int run_checked(const ExperimentManifest& manifest, bool (*accepts)(Method), const char* subcommand) {
  if (!accepts(manifest.method))
    throw ArgumentError(std::string(subcommand) + " does not run method " + to_string(manifest.method));
  auto result = run(manifest, std::cerr);
  std::cout << emit_report(std::vector<MethodReport>{result.method}, nullptr, ReportFormat::Markdown);
  std::cerr << "wrote " << result.output_dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Factual probing workbench: prompts, controls and baselines for masked language models"};
  app.require_subcommand(1);

  Common common;
  std::vector<std::string> dirs;
  std::string partition_file;
  std::size_t sample = 0;

  auto* ingest_cmd = app.add_subcommand("ingest", "load and validate a corpus, write the normalised splits");
  common.add_to(ingest_cmd, true);

  auto* fit_cmd = app.add_subcommand("fit-baseline", "fit class-prior or naive-bayes and evaluate it");
  common.add_to(fit_cmd, true);

  auto* train_cmd = app.add_subcommand("train", "train prompts or fine-tune (dense-*, autoprompt-lite, finetune)");
  common.add_to(train_cmd, true);

  auto* evaluate_cmd =
      app.add_subcommand("evaluate", "evaluate fixed prompts (manual, trigger-file), or re-score a run with --from");
  common.add_to(evaluate_cmd, true);
  std::string from_dir;
  evaluate_cmd->add_option("--from", from_dir, "existing run directory to re-score");

  auto* partition_cmd = app.add_subcommand("partition", "easy/hard split of the test set from prediction dumps");
  common.add_to(partition_cmd, true);
  partition_cmd->add_option("dirs", dirs, "run directories of the defining predictors")->required();

  auto* compare_cmd = app.add_subcommand("compare", "side-by-side predictions and pairwise agreement");
  common.add_to(compare_cmd, false);
  compare_cmd->add_option("dirs", dirs, "run directories")->required();
  compare_cmd->add_option("--sample", sample, "facts shown in the table (0: all)");

  auto* report_cmd = app.add_subcommand("report", "combined accuracy table over several runs");
  common.add_to(report_cmd, true);
  report_cmd->add_option("dirs", dirs, "run directories")->required();
  report_cmd->add_option("--partition", partition_file, "partition.jsonl for Easy/Hard columns");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest_cmd) {
      auto m = common.load();
      if (!common.out) throw ArgumentError("ingest needs --out");
      auto summary = ingest(m, *common.out);
      for (const auto& e : summary.entries)
        std::cout << e.relation << "\ttrain " << e.train << "\tdev " << e.dev << "\ttest " << e.test << "\tskipped "
                  << e.skipped_multi_token + e.skipped_subject << "\n";
      return 0;
    }
    if (*fit_cmd) return run_checked(common.load(), is_baseline, "fit-baseline");
    if (*train_cmd) return run_checked(common.load(), is_trained, "train");
    if (*evaluate_cmd) {
      auto m = common.load();
      if (from_dir.empty())
        return run_checked(m, [](Method x) { return x == Method::Manual || x == Method::TriggerFile; }, "evaluate");
      auto corpus = load_manifest_corpus(m);
      auto reports = method_reports({load_run(from_dir)}, corpus);
      for (const auto& w : reports[0].report.warnings) std::cerr << "warning: " << w << "\n";
      auto text = emit_report(reports, nullptr, ReportFormat::Tsv);
      if (common.out) write_text(*common.out, text);
      else std::cout << text;
      return 0;
    }
    if (*partition_cmd) {
      auto m = common.load();
      auto corpus = load_manifest_corpus(m);
      std::vector<Fact> test;
      for (const auto& [_, d] : corpus.relations) test.insert(test.end(), d.test().begin(), d.test().end());
      std::map<std::string, std::vector<PredictionRecord>> records;
      for (const auto& d : dirs) {
        auto r = load_run(d);
        if (!records.emplace(r.name, std::move(r.records)).second)
          throw ArgumentError("two run directories named " + r.name);
      }
      auto partition = build_partition(test, records);
      fs::path out = common.out ? fs::path(*common.out) : fs::path("partition.jsonl");
      write_partition(out, partition);
      std::cout << "easy " << partition.easy.size() << "\thard " << partition.hard.size() << "\n";
      return 0;
    }
    if (*compare_cmd) {
      std::vector<LoadedRun> runs;
      for (const auto& d : dirs) runs.push_back(load_run(d));
      auto c = compare(runs, sample, common.seed.value_or(0));
      if (common.out) {
        fs::create_directories(*common.out);
        write_text(fs::path(*common.out) / "compare.tsv", c.table);
        write_text(fs::path(*common.out) / "agreement.tsv", c.agreement_table);
      } else {
        std::cout << c.table << "\n" << c.agreement_table;
      }
      return 0;
    }
    if (*report_cmd) {
      auto m = common.load();
      auto corpus = load_manifest_corpus(m);
      std::vector<LoadedRun> runs;
      for (const auto& d : dirs) runs.push_back(load_run(d));
      auto reports = method_reports(runs, corpus);
      std::optional<Partition> partition;
      if (!partition_file.empty()) partition = read_partition(partition_file);
      const Partition* p = partition ? &*partition : nullptr;
      if (common.out) {
        fs::create_directories(*common.out);
        write_text(fs::path(*common.out) / "report.tsv", emit_report(reports, p, ReportFormat::Tsv));
        write_text(fs::path(*common.out) / "report.md", emit_report(reports, p, ReportFormat::Markdown));
      } else {
        std::cout << emit_report(reports, p, ReportFormat::Markdown);
      }
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << nlohmann::json{{"error", e.kind()}, {"message", e.what()}}.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", "internal"}, {"message", e.what()}}.dump() << "\n";
    return 1;
  }
  return 0;
}
