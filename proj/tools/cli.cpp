#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "attrib/calibrate.hpp"
#include "attrib/genpipe.hpp"
#include "attrib/http_server.hpp"
#include "attrib/parallel.hpp"
#include "attrib/recovery.hpp"
#include "attrib/report.hpp"
#include "attrib/run_store.hpp"
#include "attrib/taskserver.hpp"

namespace attrib::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

/// Reported to the user as a one-line diagnostic with exit status 1.
class UsageError : public Error {
public:
    using Error::Error;
};

struct Options {
    std::string root = "runs";
    std::string run;
    std::string corpus;
    std::uint64_t seed = 0;
    std::string setting = "sample";
    std::string evidence = "human";
    std::string model;
    std::string base_url;
    std::string fixtures;
    std::string record;
    std::string annotator;
    std::string import_file;
    std::string a;
    std::string b;
    std::string input;
    std::string static_dir;
    std::string host = "127.0.0.1";
    std::string mode = "all";
    double threshold = 0.6;
    double rate_limit = 0.0;
    double shape = 1.5;
    double rate = 0.5;
    double cutoff = 0.7;
    int parallel = 1;
    int port = 8080;
    int target = 5;
    int tasks_per_control = 5;
    int max_tokens = 1024;
    bool no_controls = false;
};

/// Restores the previous default logger on scope exit.
class LogRedirect {
public:
    explicit LogRedirect(std::ostream& err) : previous_(spdlog::default_logger()) {
        auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true);
        auto logger = std::make_shared<spdlog::logger>("attrib-eval", sink);
        logger->set_pattern("[%l] %v");
        logger->set_level(previous_->level());
        spdlog::set_default_logger(logger);
    }
    ~LogRedirect() { spdlog::set_default_logger(previous_); }

private:
    std::shared_ptr<spdlog::logger> previous_;
};

/// Chat backend chosen from --fixtures / --base-url, optionally recording.
class Backend {
public:
    Backend(const Options& o) {
        if (!o.fixtures.empty()) {
            base_ = std::make_unique<llm::ScriptedTransport>(o.fixtures);
        } else if (!o.base_url.empty()) {
            base_ = llm::HttpChatTransport::from_env(o.base_url);
        } else {
            throw UsageError("either --fixtures or --base-url is required");
        }
        if (!o.record.empty()) recorder_ = std::make_unique<llm::RecordingTransport>(*base_, o.record);
    }
    llm::ChatTransport& get() { return recorder_ ? *recorder_ : *base_; }

private:
    std::unique_ptr<llm::ChatTransport> base_;
    std::unique_ptr<llm::RecordingTransport> recorder_;
};

RunStore open_run(const Options& o) {
    if (o.run.empty()) throw UsageError("--run is required");
    return RunStore::open(o.root, o.run);
}

void check_matches_manifest(const RunManifest& m, const Options& o, const CLI::App& cmd) {
    const auto given = [&](const char* name) {
        const auto* opt = cmd.get_option_no_throw(name);
        return opt != nullptr && opt->count() > 0;
    };
    if (given("--setting") && parse_setting(o.setting) != m.setting) {
        throw UsageError(fmt::format("run '{}' uses setting '{}', not '{}'", m.run_id, to_string(m.setting), o.setting));
    }
    if (given("--seed") && o.seed != m.seed) {
        throw UsageError(fmt::format("run '{}' uses seed {}, not {}", m.run_id, m.seed, o.seed));
    }
    if (given("--evidence") && parse_evidence_source(o.evidence) != m.evidence_source) {
        throw UsageError(fmt::format("run '{}' uses {} evidence, not {}", m.run_id, to_string(m.evidence_source),
                                     o.evidence));
    }
}

report::ReportOptions report_options(const Options& o) {
    report::ReportOptions r;
    r.threshold = o.threshold;
    r.mode = o.mode == "mean" ? metrics::ThresholdMode::kMean : metrics::ThresholdMode::kAll;
    r.ep.shape = o.shape;
    r.ep.rate = o.rate;
    return r;
}

int cmd_ingest(const Options& o, std::ostream& out) {
    if (o.run.empty()) throw UsageError("--run is required");
    auto claims = load_corpus(o.corpus);
    RunManifest m;
    m.run_id = o.run;
    m.seed = o.seed;
    m.generator_id = o.model;
    m.annotator_id = o.annotator;
    m.setting = parse_setting(o.setting);
    m.evidence_source = parse_evidence_source(o.evidence);
    auto store = RunStore::create(o.root, m);
    store.write_corpus(claims);
    out << fmt::format("run {}: {} claims\n", o.run, claims.size());
    return 0;
}

int cmd_generate(const Options& o, std::ostream& out) {
    auto store = open_run(o);
    auto m = store.manifest();
    std::string model = o.model.empty() ? m.generator_id : o.model;
    if (model.empty()) throw UsageError("--model is required");
    if (!m.generator_id.empty() && model != m.generator_id) {
        throw UsageError(fmt::format("run '{}' was created for generator '{}'", m.run_id, m.generator_id));
    }
    const auto claims = store.corpus();
    std::set<std::string> done;
    for (const auto& e : store.explanations()) done.insert(e.claim_id);
    std::vector<ClaimRecord> todo;
    for (const auto& c : claims) {
        if (!done.contains(c.id)) todo.push_back(c);
    }

    Backend backend(o);
    gen::GenerationConfig config;
    config.generator_id = model;
    config.max_tokens = o.max_tokens;
    config.rate_limit = o.rate_limit;
    std::map<std::string, IndexSet> gold;
    const auto outcomes =
        gen::run_generation(todo, m.evidence_source, m.seed, backend.get(), config, o.parallel, &gold);

    std::vector<ExplanationRecord> records;
    std::size_t failed = 0, issues = 0;
    for (const auto& r : outcomes) {
        if (r.explanation) {
            issues += r.explanation->issues.size();
            records.push_back(*r.explanation);
        } else if (r.error != "no human-selected evidence") {
            ++failed;
        }
    }
    store.append_explanations(records);
    store.update_manifest([&](RunManifest& mm) {
        mm.generator_id = model;
        for (const auto& [id, set] : gold) mm.gold_choices[id] = set;
    });
    out << fmt::format("generated {} explanations ({} already present, {} failed, {} citation issues)\n",
                       records.size(), done.size(), failed, issues);
    return failed == 0 ? 0 : 1;
}

int cmd_mask(const Options& o, const CLI::App& cmd, std::ostream& out) {
    auto store = open_run(o);
    const auto m = store.manifest();
    check_matches_manifest(m, o, cmd);
    std::map<std::string, ClaimRecord> claims;
    for (auto& c : store.corpus()) claims.emplace(c.id, c);

    std::vector<recovery::RecoveryTask> tasks;
    std::size_t controls = 0;
    for (const auto& e : store.explanations()) {
        auto it = claims.find(e.claim_id);
        if (it == claims.end()) throw Error(fmt::format("explanation for unknown claim '{}'", e.claim_id));
        try {
            auto built = recovery::build_tasks(e, it->second, m.setting, m.seed);
            tasks.insert(tasks.end(), built.begin(), built.end());
        } catch (const PreconditionError& ex) {
            spdlog::warn("{}", ex.what());
            continue;
        }
        if (o.no_controls) continue;
        for (auto kind : {ControlKind::kPositive, ControlKind::kNegative}) {
            try {
                tasks.push_back(recovery::make_control_task(e, it->second, kind, m.seed));
                ++controls;
            } catch (const PreconditionError& ex) {
                spdlog::debug("{}", ex.what());
            }
        }
    }
    const auto added = store.append_tasks(tasks);
    out << fmt::format("{} tasks ({} controls), {} new\n", tasks.size(), controls, added);
    return 0;
}

int import_annotations(RunStore& store, const std::string& path, std::ostream& out) {
    std::map<std::string, recovery::RecoveryTask> tasks;
    for (auto& t : store.tasks()) tasks.emplace(t.task_id, t);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError(fmt::format("cannot open {}", path));
    std::vector<recovery::AnnotationRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            auto r = recovery::annotation_from_json(json::parse(line));
            auto it = tasks.find(r.task_id);
            if (it == tasks.end()) throw ParseError(fmt::format("unknown task '{}'", r.task_id));
            for (int pos : r.prediction) {
                if (pos < 0 || static_cast<std::size_t>(pos) >= it->second.sentence_count()) {
                    throw ParseError(fmt::format("sentence {} out of range for '{}'", pos, r.task_id));
                }
            }
            records.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(fmt::format("{}:{}: {}", path, line_no, e.what()));
        } catch (const ParseError& e) {
            throw ParseError(fmt::format("{}:{}: {}", path, line_no, e.what()));
        }
    }
    const auto added = store.append_annotations(records);
    out << fmt::format("imported {} annotations ({} new)\n", records.size(), added);
    return 0;
}

int cmd_annotate(const Options& o, std::ostream& out) {
    auto store = open_run(o);
    if (!o.import_file.empty()) return import_annotations(store, o.import_file, out);
    if (o.annotator.empty()) throw UsageError("--annotator llm:<model> or nli:<endpoint> is required");

    const auto colon = o.annotator.find(':');
    const std::string kind = o.annotator.substr(0, colon);
    const std::string target = colon == std::string::npos ? "" : o.annotator.substr(colon + 1);
    if ((kind != "llm" && kind != "nli") || target.empty()) {
        throw UsageError(fmt::format("invalid annotator '{}'; expected llm:<model> or nli:<endpoint>", o.annotator));
    }
    std::set<std::string> done;
    for (const auto& a : store.annotations()) {
        if (a.annotator_id == o.annotator) done.insert(a.task_id);
    }
    std::vector<recovery::RecoveryTask> todo;
    for (auto& t : store.tasks()) {
        if (!t.is_control() && !done.contains(t.task_id)) todo.push_back(std::move(t));
    }

    std::function<std::optional<recovery::AnnotationRecord>(std::size_t)> work;
    std::unique_ptr<Backend> backend;
    recovery::LlmAnnotatorConfig llm_config;
    std::unique_ptr<recovery::HttpEntailmentJudge> judge;
    if (kind == "llm") {
        backend = std::make_unique<Backend>(o);
        llm_config.model_id = target;
        work = [&](std::size_t i) -> std::optional<recovery::AnnotationRecord> {
            try {
                return recovery::annotate_with_llm(todo[i], backend->get(), llm_config);
            } catch (const Error& e) {
                spdlog::error("task '{}': {}", todo[i].task_id, e.what());
                return std::nullopt;
            }
        };
    } else {
        judge = std::make_unique<recovery::HttpEntailmentJudge>(target);
        work = [&](std::size_t i) -> std::optional<recovery::AnnotationRecord> {
            try {
                return recovery::annotate_with_nli(todo[i], *judge, o.annotator);
            } catch (const Error& e) {
                spdlog::error("task '{}': {}", todo[i].task_id, e.what());
                return std::nullopt;
            }
        };
    }
    const auto results = parallel_map<std::optional<recovery::AnnotationRecord>>(todo.size(), o.parallel, work);
    std::vector<recovery::AnnotationRecord> records;
    std::size_t parse_failed = 0;
    for (const auto& r : results) {
        if (!r) continue;
        if (r->parse_failed) ++parse_failed;
        records.push_back(*r);
    }
    store.append_annotations(records);
    const auto failed = todo.size() - records.size();
    out << fmt::format("{}: annotated {} tasks ({} unparseable, {} failed, {} already done)\n", o.annotator,
                       records.size(), parse_failed, failed, done.size());
    return failed == 0 ? 0 : 1;
}

int cmd_score(const Options& o, const CLI::App& cmd, std::ostream& out) {
    auto store = open_run(o);
    check_matches_manifest(store.manifest(), o, cmd);
    const auto r = report::build_report(report::RunData::load(store), report_options(o));
    const json full = report::to_json(r);
    json scores{{"run_id", r.run_id},
                {"setting", to_string(r.setting)},
                {"threshold", r.threshold},
                {"annotators", full["annotators"]}};
    store.write_file("scores.json", scores.dump(2) + "\n");
    for (const auto& a : r.annotators) {
        out << fmt::format("{}: P {:.4f}±{:.4f} R {:.4f}±{:.4f} F1 {:.4f}±{:.4f} over {} claims\n", a.annotator,
                           a.precision.mean, a.precision.std, a.recall.mean, a.recall.std, a.f1.mean, a.f1.std,
                           a.f1.n);
    }
    return 0;
}

int cmd_agree(const Options& o, std::ostream& out) {
    auto store = open_run(o);
    if (o.a.empty() || o.b.empty()) throw UsageError("--a and --b are required");
    const auto g = report::agreement(report::RunData::load(store), o.a, o.b);

    json all = json::object();
    const auto path = store.dir() / "agreement.json";
    if (fs::exists(path)) {
        std::ifstream in(path);
        all = json::parse(in);
    }
    json entry{{"a", g.a}, {"b", g.b}, {"alpha", g.alpha ? json(*g.alpha) : json(nullptr)}, {"units", g.units}};
    if (!g.note.empty()) entry["note"] = g.note;
    all[fmt::format("{}~{}", g.a, g.b)] = entry;
    store.write_file("agreement.json", all.dump(2) + "\n");
    if (!g.alpha) {
        out << fmt::format("alpha undefined for {} vs {}: {}\n", g.a, g.b, g.note);
        return 1;
    }
    out << fmt::format("alpha({}, {}) = {:.6f} over {} units\n", g.a, g.b, *g.alpha, g.units);
    return 0;
}

int cmd_calibrate(const Options& o, std::ostream& out) {
    std::vector<calib::UtilityObservation> obs;
    std::optional<RunStore> store;
    if (!o.input.empty()) {
        std::ifstream in(o.input);
        if (!in) throw UsageError(fmt::format("cannot open {}", o.input));
        obs = calib::read_observations_tsv(in);
    } else {
        store = open_run(o);
        const auto r = report::build_report(report::RunData::load(*store), report_options(o));
        if (!r.calibration) throw UsageError("run has no utility ratings");
        std::ostringstream items, annotators;
        calib::write_items_tsv(items, *r.calibration);
        calib::write_annotators_tsv(annotators, *r.calibration);
        store->write_file("calibration_items.tsv", items.str());
        store->write_file("calibration_annotators.tsv", annotators.str());
        out << fmt::format("calibrated {} items from {} annotators in {} sweeps{}\n", r.calibration->items.size(),
                           r.calibration->annotators.size(), r.calibration->iterations,
                           r.calibration->converged ? "" : " (not converged)");
        return 0;
    }
    const auto z = calib::zscore_per_annotator(obs);
    calib::EpOptions ep;
    ep.shape = o.shape;
    ep.rate = o.rate;
    const auto result = calib::ep_calibrate(z.observations, ep);
    calib::write_items_tsv(out, result);
    calib::write_annotators_tsv(out, result);
    return result.converged ? 0 : 1;
}

int cmd_report(const Options& o, std::ostream& out) {
    auto store = open_run(o);
    const auto r = report::build_report(report::RunData::load(store), report_options(o));
    store.write_file("report.json", report::to_json(r).dump(2) + "\n");
    store.write_file("report.tsv", report::to_tsv(r));
    out << fmt::format("wrote {} and {}\n", (store.dir() / "report.json").string(),
                       (store.dir() / "report.tsv").string());
    return 0;
}

int cmd_serve(const Options& o, std::ostream& out) {
    auto store = open_run(o);
    server::TaskServerConfig config;
    config.target_annotations = o.target;
    config.tasks_per_control = o.tasks_per_control;
    config.accuracy_cutoff = o.cutoff;
    server::TaskServer tasks(store, config);
    std::optional<fs::path> static_dir;
    if (!o.static_dir.empty()) static_dir = o.static_dir;
    server::HttpServer http(tasks, static_dir);
    out << fmt::format("serving run {} on http://{}:{}\n", o.run, o.host, o.port) << std::flush;
    if (!http.listen(o.host, o.port)) throw Error(fmt::format("cannot listen on {}:{}", o.host, o.port));
    return 0;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    LogRedirect log(err);
    Options o;
    CLI::App app{"Citation attribution evaluation pipeline", "attrib-eval"};
    app.require_subcommand(1);
    app.fallthrough();
    app.add_option("--out", o.root, "Directory holding runs")->capture_default_str();

    auto run_opt = [&](CLI::App* c) { c->add_option("--run", o.run, "Run id")->required(); };
    auto setting_opt = [&](CLI::App* c) {
        c->add_option("--setting", o.setting, "sample or full")->check(CLI::IsMember({"sample", "full"}));
    };
    auto seed_opt = [&](CLI::App* c) { c->add_option("--seed", o.seed, "Run seed"); };
    auto transport_opts = [&](CLI::App* c) {
        c->add_option("--base-url", o.base_url, "OpenAI-compatible endpoint; key from ATTRIB_EVAL_API_KEY");
        c->add_option("--fixtures", o.fixtures, "Replay completions from this fixture directory");
        c->add_option("--record", o.record, "Also write every completion into this fixture directory");
        c->add_option("--parallel", o.parallel, "Requests in flight")->check(CLI::PositiveNumber);
    };
    auto threshold_opts = [&](CLI::App* c) {
        c->add_option("--threshold", o.threshold, "Fully-attributed F1 threshold")->check(CLI::Range(0.0, 1.0));
        c->add_option("--mode", o.mode, "Fully-attributed rule: all or mean")->check(CLI::IsMember({"all", "mean"}));
    };

    auto* ingest = app.add_subcommand("ingest", "Create a run from a corpus file");
    ingest->add_option("--corpus", o.corpus, "Line-delimited corpus")->required()->check(CLI::ExistingFile);
    run_opt(ingest);
    seed_opt(ingest);
    setting_opt(ingest);
    ingest->add_option("--evidence", o.evidence, "human or machine")->check(CLI::IsMember({"human", "machine"}));
    ingest->add_option("--model", o.model, "Generator model id");
    ingest->add_option("--annotator", o.annotator, "Default annotator id");

    auto* generate = app.add_subcommand("generate", "Select evidence and generate explanations");
    run_opt(generate);
    generate->add_option("--model", o.model, "Generator model id");
    generate->add_option("--rate-limit", o.rate_limit, "Requests per second (0 = unlimited)");
    generate->add_option("--max-tokens", o.max_tokens, "Completion token limit");
    transport_opts(generate);

    auto* mask = app.add_subcommand("mask", "Build recovery and control tasks");
    run_opt(mask);
    setting_opt(mask);
    seed_opt(mask);
    mask->add_flag("--no-controls", o.no_controls, "Do not build control tasks");

    auto* annotate = app.add_subcommand("annotate", "Annotate tasks with an LLM or NLI judge");
    run_opt(annotate);
    annotate->add_option("--annotator", o.annotator, "llm:<model> or nli:<endpoint>");
    annotate->add_option("--import", o.import_file, "Import annotation records (JSON lines)");
    transport_opts(annotate);

    auto* score = app.add_subcommand("score", "Compute attribution scores");
    run_opt(score);
    setting_opt(score);
    seed_opt(score);
    threshold_opts(score);

    auto* agree = app.add_subcommand("agree", "Krippendorff's alpha between two annotation sources");
    run_opt(agree);
    agree->add_option("--a", o.a, "human:union, human:all, or an annotator id")->required();
    agree->add_option("--b", o.b, "human:union, human:all, or an annotator id")->required();

    auto* calibrate = app.add_subcommand("calibrate", "Bayesian calibration of utility ratings");
    calibrate->add_option("--run", o.run, "Run id");
    calibrate->add_option("--input", o.input, "TSV of item_id, annotator_id, score")->check(CLI::ExistingFile);
    calibrate->add_option("--shape", o.shape, "Gamma prior shape")->check(CLI::PositiveNumber);
    calibrate->add_option("--rate", o.rate, "Gamma prior rate")->check(CLI::PositiveNumber);

    auto* rep = app.add_subcommand("report", "Write report.json and report.tsv");
    run_opt(rep);
    threshold_opts(rep);

    auto* serve = app.add_subcommand("serve", "Serve tasks to human annotators over HTTP");
    run_opt(serve);
    serve->add_option("--serve-port", o.port, "Port")->check(CLI::Range(1, 65535));
    serve->add_option("--host", o.host, "Bind address");
    serve->add_option("--static", o.static_dir, "Directory of the annotation UI bundle");
    serve->add_option("--target", o.target, "Annotations wanted per task")->check(CLI::PositiveNumber);
    serve->add_option("--tasks-per-control", o.tasks_per_control, "Regular tasks per control task (0 = none)");
    serve->add_option("--cutoff", o.cutoff, "Control accuracy below which annotators are removed")
        ->check(CLI::Range(0.0, 1.0));

    std::vector<std::string> argv_store{"attrib-eval"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_store) argv.push_back(a.data());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (ingest->parsed()) return cmd_ingest(o, out);
        if (generate->parsed()) return cmd_generate(o, out);
        if (mask->parsed()) return cmd_mask(o, *mask, out);
        if (annotate->parsed()) return cmd_annotate(o, out);
        if (score->parsed()) return cmd_score(o, *score, out);
        if (agree->parsed()) return cmd_agree(o, out);
        if (calibrate->parsed()) {
            if (o.run.empty() == o.input.empty()) throw UsageError("calibrate needs exactly one of --run or --input");
            return cmd_calibrate(o, out);
        }
        if (rep->parsed()) return cmd_report(o, out);
        if (serve->parsed()) return cmd_serve(o, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

}  // namespace attrib::cli
