// Operator tooling: knowledge-base ingestion, headless simulation, sentiment
// benchmarking, prediction analysis, survey statistics and the service.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "vpsim/analytics.hpp"
#include "vpsim/assets.hpp"
#include "vpsim/config.hpp"
#include "vpsim/corpus_io.hpp"
#include "vpsim/http_server.hpp"
#include "vpsim/knowledge_base.hpp"
#include "vpsim/remote_adapters.hpp"
#include "vpsim/serialization.hpp"
#include "vpsim/session_manager.hpp"
#include "vpsim/text.hpp"

using namespace vpsim;

namespace {

// Used whenever --seed is not given so casual runs repeat exactly.
constexpr std::uint64_t kDefaultSeed = 20240601;

struct Common {
  std::string config_path;
  bool machine = false;
  std::string out;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Rows of cells printed either tab-separated or padded into columns.
void print_table(std::ostream& os, const std::vector<std::vector<std::string>>& rows, bool machine) {
  if (machine) {
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "\t" : "") << r[i];
      os << '\n';
    }
    return;
  }
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    width.resize(std::max(width.size(), r.size()));
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  }
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t i = 0; i < r.size(); ++i) {
      std::string cell = r[i];
      if (i + 1 < r.size()) cell.resize(width[i] + 2, ' ');
      line += cell;
    }
    os << line << '\n';
  }
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + path);
  return in;
}

char parse_delimiter(const std::string& s) {
  if (s == "tab" || s == "\\t") return '\t';
  if (s == "comma") return ',';
  if (s.size() == 1) return s[0];
  throw Error(ErrorCode::invalid_argument, "delimiter must be one character or 'tab'");
}

service::ServiceConfig load_cfg(const Common& c) { return service::load_config(c.config_path); }

kb::KnowledgeBase load_kb(const std::string& path) {
  if (!path.empty()) return kb::KnowledgeBase::load(path);
  std::istringstream in{std::string(assets::builtin("kb/sample_kb.jsonl"))};
  return kb::KnowledgeBase::read_snapshot(in);
}

void print_kb_counts(const kb::KnowledgeBase& k, bool machine) {
  print_table(std::cout,
              {{"syndromes", std::to_string(k.size())},
               {"raw_pair_count", std::to_string(k.raw_pair_count())},
               {"pair_count", std::to_string(k.pair_count())}},
              machine);
}

// ---- kb ------------------------------------------------------------------

struct KbArgs {
  std::vector<std::string> inputs;
  std::vector<std::string> formats;
  std::vector<std::string> snapshots;
  std::string kb;
  std::uint64_t seed = kDefaultSeed;
};

int cmd_kb_ingest(const KbArgs& a, const Common& c) {
  if (a.formats.size() > 1 && a.formats.size() != a.inputs.size()) {
    throw Error(ErrorCode::invalid_argument, "give one --format for all inputs or one per input");
  }
  std::vector<kb::SyndromeRecord> all;
  for (std::size_t i = 0; i < a.inputs.size(); ++i) {
    const auto format =
        kb::ColumnFormat::parse(a.formats.empty() ? "" : a.formats.size() == 1 ? a.formats[0] : a.formats[i]);
    auto result = kb::ingest_file(a.inputs[i], format);
    if (!c.machine) {
      std::cerr << a.inputs[i] << ": " << result.rows << " rows, " << result.association_count()
                << " pairs\n";
    }
    all.insert(all.end(), result.records.begin(), result.records.end());
  }
  const auto k = kb::KnowledgeBase::from_records(all);
  if (!c.out.empty()) k.save(c.out);
  print_kb_counts(k, c.machine);
  return 0;
}

int cmd_kb_merge(const KbArgs& a, const Common& c) {
  std::vector<kb::SyndromeRecord> all;
  std::size_t raw = 0;
  for (const auto& path : a.snapshots) {
    const auto k = kb::KnowledgeBase::load(path);
    raw += k.raw_pair_count();
    all.insert(all.end(), k.records().begin(), k.records().end());
  }
  auto merged = kb::KnowledgeBase::from_records(all);
  // Snapshots already deduplicated within themselves; carry their raw counts.
  std::stringstream ss;
  merged.write_snapshot(ss);
  std::string header;
  std::getline(ss, header);
  auto j = Json::parse(header);
  j["raw_pair_count"] = raw;
  std::stringstream rebuilt;
  rebuilt << j.dump() << '\n' << ss.rdbuf();
  merged = kb::KnowledgeBase::read_snapshot(rebuilt);
  if (!c.out.empty()) merged.save(c.out);
  print_kb_counts(merged, c.machine);
  return 0;
}

int cmd_kb_stats(const KbArgs& a, const Common& c) {
  print_kb_counts(kb::KnowledgeBase::load(a.kb), c.machine);
  return 0;
}

int cmd_kb_sample(const KbArgs& a, const Common& c) {
  const auto k = load_kb(a.kb);
  const auto s = kb::sample_scenario(k, a.seed);
  const auto persona = scenario::generate_persona(a.seed);
  Json j{{"scenario", s}, {"persona", persona}};
  std::cout << (c.machine ? j.dump() : j.dump(2)) << '\n';
  return 0;
}

// ---- simulate ------------------------------------------------------------

struct SimArgs {
  std::string script;
  std::string kb;
  std::uint64_t seed = kDefaultSeed;
  std::string adapters;
  double budget_s = 0;
  std::vector<double> mock_delays{0.0, 0.0, 0.0};
};

int cmd_simulate(const SimArgs& a, const Common& c) {
  auto cfg = load_cfg(c);
  if (a.adapters == "mock") cfg.adapter_mode = service::AdapterMode::mock;
  if (a.adapters == "remote") cfg.adapter_mode = service::AdapterMode::remote;
  if (a.budget_s > 0) cfg.latency_budget_s = a.budget_s;
  if (!a.kb.empty()) cfg.kb_path = a.kb;
  cfg.validate();

  std::vector<std::string> lines;
  {
    auto in = open_input(a.script);
    std::string line;
    while (std::getline(in, line)) {
      auto t = text::trim(line);
      if (!t.empty() && t.front() != '#') lines.emplace_back(t);
    }
  }
  if (lines.empty()) throw Error(ErrorCode::invalid_argument, "script " + a.script + " has no utterances");
  if (a.mock_delays.size() != 3) throw Error(ErrorCode::invalid_argument, "--mock-delays takes stt,llm,tts");

  const auto k = load_kb(cfg.kb_path);
  const auto scenario_spec = kb::sample_scenario(k, a.seed);
  const auto persona = scenario::generate_persona(a.seed);
  const auto prompt = scenario::build_system_prompt(scenario_spec, persona);

  // Mock runs use a fake clock so timings are reproducible too.
  pipeline::FakeClock fake;
  pipeline::SteadyClock steady;
  pipeline::Clock& clock = cfg.adapter_mode == service::AdapterMode::mock
                               ? static_cast<pipeline::Clock&>(fake)
                               : static_cast<pipeline::Clock&>(steady);
  auto deps = service::make_deps(cfg);
  pipeline::AdapterSet adapters = deps.adapters;
  if (cfg.adapter_mode == service::AdapterMode::mock) {
    auto mocks = pipeline::make_mock_adapters(clock, {a.mock_delays[0], a.mock_delays[1], a.mock_delays[2]});
    adapters.transcriber = mocks.transcriber;
    adapters.patient_model = mocks.patient_model;
    adapters.synthesizer = mocks.synthesizer;
  }

  pipeline::DialogueSession session(prompt, scenario::ConversationMemory(cfg.memory_window, cfg.memory_char_budget));
  std::size_t failed = 0;
  for (const auto& line : lines) {
    const auto turn = session.run_turn(line, adapters, clock, deps.classifier, {cfg.sentiment_blocking});
    if (!turn.ok()) {
      ++failed;
      std::cerr << "turn " << turn.turn_id << " failed at " << pipeline::to_string(turn.failure->stage) << ": "
                << turn.failure->message << '\n';
    }
  }
  session.wait_for_sentiment();
  const auto turns = session.turns();

  if (!c.out.empty()) {
    std::ofstream out(c.out, std::ios::trunc);
    if (!out) throw Error(ErrorCode::io_error, "cannot write " + c.out);
    for (const auto& t : turns) out << Json(t).dump() << '\n';
  }

  std::vector<std::vector<std::string>> rows{{"turns", std::to_string(turns.size())},
                                             {"ok_turns", std::to_string(turns.size() - failed)},
                                             {"failed_turns", std::to_string(failed)},
                                             {"transcript_hash", pipeline::transcript_hash(turns)}};
  if (failed < turns.size()) {
    const auto r = pipeline::latency_report(turns, cfg.latency_budget_s);
    auto stage = [&](const char* name, const pipeline::StageSummary& s) {
      rows.push_back({std::string(name) + "_mean_s", fmt("%.4f", s.mean)});
      rows.push_back({std::string(name) + "_median_s", fmt("%.4f", s.median)});
      rows.push_back({std::string(name) + "_p95_s", fmt("%.4f", s.p95)});
    };
    stage("stt", r.stt);
    stage("llm", r.llm);
    stage("tts", r.tts);
    stage("sentiment", r.sentiment);
    stage("total", r.total);
    rows.push_back({"budget_s", fmt("%.3f", r.budget_s)});
    rows.push_back({"budget_met", r.budget_met ? "yes" : "no"});
  }
  print_table(std::cout, rows, c.machine);
  return 0;
}

// ---- bench ---------------------------------------------------------------

struct BenchArgs {
  std::string corpus;
  std::vector<std::string> classifiers{"rule"};
  std::string delimiter = ",";
  std::string predictions_out;
  std::size_t workers = 4;
};

std::vector<sentiment::SentimentLabel> run_classifier(sentiment::Classifier& clf, const std::vector<io::LabeledUtterance>& rows,
                                                      std::size_t workers) {
  std::vector<sentiment::SentimentLabel> out(rows.size(), sentiment::SentimentLabel::neutral);
  std::atomic<std::size_t> next{0};
  std::vector<std::string> errors(rows.size());
  auto work = [&] {
    for (std::size_t i = next++; i < rows.size(); i = next++) {
      const auto r = clf.classify(rows[i].text);
      if (!r.error.empty()) errors[i] = r.error;
      out[i] = r.label.value_or(sentiment::SentimentLabel::neutral);
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::max<std::size_t>(1, workers); ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i].empty()) {
      throw Error(ErrorCode::adapter_protocol, clf.id() + " failed on row " + std::to_string(i + 1) + ": " + errors[i]);
    }
  }
  return out;
}

int cmd_bench(const BenchArgs& a, const Common& c) {
  const auto cfg = load_cfg(c);
  auto in = open_input(a.corpus);
  const auto rows = io::read_labeled_corpus(in, parse_delimiter(a.delimiter));
  std::vector<sentiment::SentimentLabel> golds;
  for (const auto& r : rows) golds.push_back(r.gold);

  std::vector<std::vector<std::string>> table{{"classifier", "accuracy", "precision", "recall", "f1", "n"}};
  std::vector<io::Prediction> dump;
  for (const auto& id : a.classifiers) {
    std::vector<sentiment::SentimentLabel> preds;
    if (id == "oracle") {
      preds = golds;
    } else if (id == "rule") {
      sentiment::RuleBasedClassifier clf(cfg.lexicon_path.empty() ? sentiment::Lexicon::builtin()
                                                                  : sentiment::Lexicon::load(cfg.lexicon_path));
      preds = run_classifier(clf, rows, a.workers);
    } else if (!cfg.sentiment_model.url.empty()) {
      auto model = std::make_shared<pipeline::RemoteChatModel>(cfg.sentiment_model.url, id);
      sentiment::ModelClassifier clf(model, id,
                                     cfg.sentiment_prompt_path.empty() ? sentiment::builtin_classification_template()
                                                                       : text::read_file(cfg.sentiment_prompt_path),
                                     cfg.sentiment_model.timeout_s, static_cast<std::ptrdiff_t>(a.workers));
      preds = run_classifier(clf, rows, a.workers);
    } else {
      throw Error(ErrorCode::invalid_argument,
                  "unknown classifier '" + id + "' (known: rule, oracle; model ids need adapter.sentiment_model.url)");
    }
    const auto m = sentiment::evaluate(golds, preds);
    const char* f = c.machine ? "%.6f" : "%.3f";
    table.push_back({id, fmt(f, m.accuracy), fmt(f, m.precision), fmt(f, m.recall), fmt(f, m.f1), std::to_string(m.n)});
    for (std::size_t i = 0; i < preds.size(); ++i) {
      char uid[32];
      std::snprintf(uid, sizeof uid, "u%06zu", i + 1);
      dump.push_back({uid, id, preds[i]});
    }
  }
  print_table(std::cout, table, c.machine);
  if (!a.predictions_out.empty()) {
    std::ofstream out(a.predictions_out, std::ios::trunc);
    if (!out) throw Error(ErrorCode::io_error, "cannot write " + a.predictions_out);
    out << "utterance_id,model_id,label\n";
    for (const auto& p : dump) out << p.utterance_id << ',' << p.model_id << ',' << sentiment::to_string(p.label) << '\n';
  }
  return 0;
}

// ---- analyze -------------------------------------------------------------

struct AnalyzeArgs {
  std::vector<std::string> dumps;
  std::string delimiter = ",";
};

int cmd_analyze(const AnalyzeArgs& a, const Common& c) {
  std::vector<io::Prediction> preds;
  for (const auto& path : a.dumps) {
    auto in = open_input(path);
    auto p = io::read_prediction_dump(in, parse_delimiter(a.delimiter));
    preds.insert(preds.end(), p.begin(), p.end());
  }
  const auto by_model = io::align_predictions(preds);
  const char* f = c.machine ? "%.6f" : "%.3f";

  std::vector<std::vector<std::string>> ent{{"model", "negative", "neutral", "positive", "entropy_bits"}};
  for (const auto& row : analytics::entropy_table(by_model)) {
    ent.push_back({row.model_id, fmt(f, row.distribution.p_negative), fmt(f, row.distribution.p_neutral),
                   fmt(f, row.distribution.p_positive), fmt(f, row.entropy_bits)});
  }
  const auto m = analytics::agreement_matrix(by_model);
  std::vector<std::vector<std::string>> kap{{"kappa"}};
  for (const auto& id : m.model_ids) kap[0].push_back(id);
  for (std::size_t i = 0; i < m.model_ids.size(); ++i) {
    std::vector<std::string> r{m.model_ids[i]};
    for (const auto& k : m.kappa[i]) r.push_back(k.defined() ? fmt(f, *k.value) : "undefined");
    kap.push_back(std::move(r));
  }
  if (!c.machine) std::cout << "Label distribution and entropy\n";
  print_table(std::cout, ent, c.machine);
  std::cout << '\n';
  if (!c.machine) std::cout << "Cohen's kappa\n";
  print_table(std::cout, kap, c.machine);
  return 0;
}

// ---- stats ---------------------------------------------------------------

struct StatsArgs {
  std::string survey;
  double mu0 = 3.0;
  std::string alternative = "greater";
  bool no_correction = false;
  std::string delimiter = ",";
};

int cmd_stats(const StatsArgs& a, const Common& c) {
  auto in = open_input(a.survey);
  const auto items = io::read_survey(in, parse_delimiter(a.delimiter));
  analytics::WilcoxonOptions opts;
  opts.mu0 = a.mu0;
  opts.alternative = analytics::parse_alternative(a.alternative);
  opts.continuity_correction = !a.no_correction;

  const char* f = c.machine ? "%.6f" : "%.4f";
  std::vector<std::vector<std::string>> table{
      {"item", "n", "mean", "median", "sd", "W", "p", "z", "r", "n_used", "method"}};
  for (const auto& item : items) {
    if (item.values.empty()) {
      table.push_back({item.item_label, "0", "-", "-", "-", "-", "-", "-", "-", "0", "no-data"});
      continue;
    }
    const auto d = analytics::descriptive_stats(item);
    std::vector<std::string> row{item.item_label, std::to_string(d.count), fmt(f, d.mean), fmt(f, d.median),
                                 fmt(f, d.std_dev)};
    bool tested = std::any_of(item.values.begin(), item.values.end(), [&](int v) { return v != a.mu0; });
    if (tested) {
      const auto w = analytics::wilcoxon_signed_rank(item, opts);
      for (auto s : {fmt("%g", w.w), fmt(f, w.p), fmt(f, w.z), fmt(f, w.r)}) row.push_back(s);
      row.push_back(std::to_string(w.n_used));
      row.push_back(w.exact ? "exact" : "normal");
    } else {
      for (int i = 0; i < 4; ++i) row.push_back("-");
      row.push_back("0");
      row.push_back("no-test");
    }
    table.push_back(std::move(row));
  }
  if (!c.machine) {
    std::cout << "Wilcoxon signed-rank vs " << a.mu0 << " (" << analytics::to_string(opts.alternative) << ")\n";
  }
  print_table(std::cout, table, c.machine);
  return 0;
}

// ---- serve ---------------------------------------------------------------

struct ServeArgs {
  std::string listen;
  std::string kb;
  std::string adapters;
  std::string persistence_dir;
  std::string port_file;
};

int cmd_serve(const ServeArgs& a, const Common& c) {
  auto cfg = load_cfg(c);
  if (!a.listen.empty()) cfg.listen = a.listen;
  if (!a.kb.empty()) cfg.kb_path = a.kb;
  if (a.adapters == "mock") cfg.adapter_mode = service::AdapterMode::mock;
  if (a.adapters == "remote") cfg.adapter_mode = service::AdapterMode::remote;
  if (!a.persistence_dir.empty()) cfg.persistence_dir = a.persistence_dir;
  cfg.validate();

  // Block the stop signals before any thread starts so only sigwait sees them.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  const auto addr = service::parse_listen(cfg.listen);
  service::SessionManager manager(cfg, service::make_deps(cfg));
  service::HttpServer server(manager, addr.host, addr.port);
  const auto port = server.start();
  std::cerr << "vpsim: listening on " << addr.host << ':' << port << " (" << manager.recovered_sessions()
            << " sessions recovered)\n";
  if (!a.port_file.empty()) {
    const std::string tmp = a.port_file + ".tmp";
    {
      std::ofstream pf(tmp, std::ios::trunc);
      pf << port << '\n';
    }
    std::filesystem::rename(tmp, a.port_file);
  }
  int sig = 0;
  sigwait(&set, &sig);
  std::cerr << "vpsim: stopping\n";
  server.stop();
  manager.drain();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Virtual patient simulator tools"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--config", common.config_path, "Service config file (JSON)");
  app.add_flag("--machine-readable", common.machine, "Tab-separated output");

  KbArgs kb_args;
  auto* kb = app.add_subcommand("kb", "Knowledge base ingestion and inspection");
  kb->require_subcommand(1);
  kb->fallthrough();
  auto* ingest = kb->add_subcommand("ingest", "Ingest delimited source files into a snapshot");
  ingest->add_option("inputs", kb_args.inputs, "Source files")->required()->check(CLI::ExistingFile);
  ingest->add_option("--format", kb_args.formats,
                     "Column mapping, e.g. 'sep=comma,header=1,syndrome=0,symptoms=1-5,source=mendeley'");
  ingest->add_option("--out", common.out, "Snapshot to write");
  auto* merge = kb->add_subcommand("merge", "Merge snapshots");
  merge->add_option("snapshots", kb_args.snapshots, "Snapshot files")->required()->check(CLI::ExistingFile);
  merge->add_option("--out", common.out, "Snapshot to write");
  auto* kstats = kb->add_subcommand("stats", "Print counts of a snapshot");
  kstats->add_option("--kb", kb_args.kb, "Snapshot file")->required();
  auto* ksample = kb->add_subcommand("sample", "Sample a scenario and persona");
  ksample->add_option("--kb", kb_args.kb, "Snapshot file (default: built-in sample)");
  ksample->add_option("--seed", kb_args.seed, "Seed")->capture_default_str();

  SimArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Run a scripted session without the UI");
  simulate->add_option("--script", sim.script, "One doctor utterance per line")->required();
  simulate->add_option("--kb", sim.kb, "Snapshot file (default: built-in sample)");
  simulate->add_option("--seed", sim.seed, "Scenario and persona seed")->capture_default_str();
  simulate->add_option("--adapters", sim.adapters, "mock or remote")->check(CLI::IsMember({"mock", "remote"}));
  simulate->add_option("--budget-s", sim.budget_s, "Latency budget in seconds");
  simulate->add_option("--mock-delays", sim.mock_delays, "Mock stt,llm,tts delays in seconds")->delimiter(',');
  simulate->add_option("--out", common.out, "Write turns as JSON lines");

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Score classifiers on a labeled corpus");
  bench_cmd->add_option("--corpus", bench.corpus, "Columns text,gold_label")->required();
  bench_cmd->add_option("--classifier", bench.classifiers, "rule, oracle, or a model id")->delimiter(',');
  bench_cmd->add_option("--delimiter", bench.delimiter, "Field delimiter")->capture_default_str();
  bench_cmd->add_option("--predictions-out", bench.predictions_out, "Write a prediction dump");
  bench_cmd->add_option("--workers", bench.workers, "Concurrent classifier calls")->capture_default_str();

  AnalyzeArgs an;
  auto* analyze = app.add_subcommand("analyze", "Entropy and agreement over prediction dumps");
  analyze->add_option("dumps", an.dumps, "Columns utterance_id,model_id,label")->required();
  analyze->add_option("--delimiter", an.delimiter, "Field delimiter")->capture_default_str();

  StatsArgs st;
  auto* stats = app.add_subcommand("stats", "Descriptive statistics and Wilcoxon tests per survey item");
  stats->add_option("--survey", st.survey, "One column per item, values 1..5")->required();
  stats->add_option("--mu0", st.mu0, "Hypothesized median")->capture_default_str();
  stats->add_option("--alternative", st.alternative, "greater, less or two-sided")->capture_default_str();
  stats->add_flag("--no-continuity-correction", st.no_correction, "Plain normal approximation");
  stats->add_option("--delimiter", st.delimiter, "Field delimiter")->capture_default_str();

  ServeArgs sv;
  auto* serve = app.add_subcommand("serve", "Run the session service");
  serve->add_option("--listen", sv.listen, "host:port");
  serve->add_option("--kb", sv.kb, "Snapshot file");
  serve->add_option("--adapters", sv.adapters, "mock or remote")->check(CLI::IsMember({"mock", "remote"}));
  serve->add_option("--persistence-dir", sv.persistence_dir, "Session log directory");
  serve->add_option("--port-file", sv.port_file, "Write the bound port here once listening");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*ingest) return cmd_kb_ingest(kb_args, common);
    if (*merge) return cmd_kb_merge(kb_args, common);
    if (*kstats) return cmd_kb_stats(kb_args, common);
    if (*ksample) return cmd_kb_sample(kb_args, common);
    if (*simulate) return cmd_simulate(sim, common);
    if (*bench_cmd) return cmd_bench(bench, common);
    if (*analyze) return cmd_analyze(an, common);
    if (*stats) return cmd_stats(st, common);
    if (*serve) return cmd_serve(sv, common);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
